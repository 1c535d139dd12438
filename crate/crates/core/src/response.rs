//! Closed-form weak-probe steady state: collective susceptibility and the
//! normalized cavity transmission.
//!
//! The susceptibility of M transitions with collective couplings Gᵢ is
//!
//! ```text
//! χ(Δp) = Σᵢ i·Gᵢ² / (γᵢ/2 − i(Δp − Δᵢ))
//! ```
//!
//! and the transmitted field, normalized to the empty cavity on resonance, is
//!
//! ```text
//! t(Δp) = κ / (κ + i(Δc − Δp) − iχ(Δp)).
//! ```
//!
//! With three transitions the last term carries G₄² and γ₄.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{CavityParams, CollectiveCoupling, ScanGrid, SystemConfig, TransitionLadder};
use crate::par::{self, Execution};

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Collective atomic susceptibility at probe detuning `dp`.
///
/// Panics in debug builds if the ladder and coupling lengths differ; use
/// [`SystemConfig`] to get that checked up front.
pub fn susceptibility(ladder: &TransitionLadder, coupling: &CollectiveCoupling, dp: f64) -> Complex64 {
    debug_assert_eq!(ladder.len(), coupling.len());
    ladder
        .offsets()
        .iter()
        .zip(ladder.decays())
        .zip(coupling.strengths())
        .map(|((&offset, &gamma), &g)| {
            let den = Complex64::new(0.5 * gamma, -(dp - offset));
            I * (g * g) / den
        })
        .sum()
}

/// Denominator κ + i(Δc − Δp) − iχ shared by the amplitude and intensity.
fn denominator(cavity: &CavityParams, chi: Complex64, dp: f64) -> Complex64 {
    Complex64::new(cavity.kappa, cavity.delta_c - dp) - I * chi
}

/// Transmitted field relative to the empty-cavity resonant transmission.
pub fn transmission_amplitude(cavity: &CavityParams, chi: Complex64, dp: f64) -> Complex64 {
    cavity.kappa / denominator(cavity, chi, dp)
}

/// Normalized transmitted intensity |t|². Evaluated as κ²/|den|² so that the
/// bound `intensity <= 1` also holds in floating point.
pub fn transmission_intensity(cavity: &CavityParams, chi: Complex64, dp: f64) -> f64 {
    let den = denominator(cavity, chi, dp);
    cavity.kappa * cavity.kappa / den.norm_sqr()
}

/// Sampled transmission spectrum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    pub dp: Vec<f64>,
    pub amplitude: Vec<Complex64>,
    pub intensity: Vec<f64>,
}

impl Spectrum {
    pub fn len(&self) -> usize {
        self.dp.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dp.is_empty()
    }
}

/// Transmission over `config.grid`, parallel when the `parallel` feature is on.
pub fn scan_spectrum(config: &SystemConfig) -> Result<Spectrum> {
    scan_spectrum_with(config, Execution::default())
}

pub fn scan_spectrum_with(config: &SystemConfig, exec: Execution) -> Result<Spectrum> {
    config.validate()?;
    let grid = config.grid;
    let samples = par::map_range(grid.points, exec, |i| {
        let dp = grid.value(i);
        let chi = susceptibility(&config.ladder, &config.coupling, dp);
        (
            dp,
            transmission_amplitude(&config.cavity, chi, dp),
            transmission_intensity(&config.cavity, chi, dp),
        )
    });

    let mut spectrum = Spectrum {
        dp: Vec::with_capacity(samples.len()),
        amplitude: Vec::with_capacity(samples.len()),
        intensity: Vec::with_capacity(samples.len()),
    };
    for (dp, amp, intensity) in samples {
        if !(intensity > 0.0 && intensity <= 1.0) {
            return Err(Error::numerical(format!(
                "transmission {intensity} outside (0, 1] at dp = {dp}"
            )));
        }
        spectrum.dp.push(dp);
        spectrum.amplitude.push(amp);
        spectrum.intensity.push(intensity);
    }
    Ok(spectrum)
}

/// χ sampled on a grid, as (Δp, χ) pairs.
pub fn scan_susceptibility(
    ladder: &TransitionLadder,
    coupling: &CollectiveCoupling,
    grid: &ScanGrid,
    exec: Execution,
) -> Result<Vec<(f64, Complex64)>> {
    coupling.check_matches(ladder)?;
    grid.validate()?;
    Ok(par::map_range(grid.points, exec, |i| {
        let dp = grid.value(i);
        (dp, susceptibility(ladder, coupling, dp))
    }))
}
