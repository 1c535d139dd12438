//! Domain types and unit conventions.
//!
//! Every rate and detuning is stored in units of the excited-state decay rate
//! Γ (so Γ = 1). MHz only appears at the configuration boundary, through
//! [`convert`] and an explicit Γ-in-MHz calibration.
//!
//! Atomic resonances are stored as the probe detunings Δp at which the probe
//! is resonant with each transition. The reference transition sits at zero
//! and the others are negative, which puts spectra, susceptibilities and
//! mode eigenvalues on one common axis.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Reduced Planck constant in J·s.
pub const HBAR: f64 = 1.054_571_817e-34;
/// Vacuum permittivity in F/m.
pub const EPSILON_0: f64 = 8.854_187_812_8e-12;

/// Natural linewidth Γ/2π of the ⁸⁵Rb D2 line in MHz, used as the default
/// Γ↔MHz calibration for the rubidium preset.
pub const RB85_D2_GAMMA_MHZ: f64 = 6.0666;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FrequencyUnit {
    /// Multiples of the excited-state decay rate Γ.
    Gamma,
    MHz,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrequencyQuantity {
    pub value: f64,
    pub unit: FrequencyUnit,
}

impl FrequencyQuantity {
    pub fn gamma(value: f64) -> Self {
        Self {
            value,
            unit: FrequencyUnit::Gamma,
        }
    }

    pub fn mhz(value: f64) -> Self {
        Self {
            value,
            unit: FrequencyUnit::MHz,
        }
    }
}

/// Rescale `q` into `target` using the calibration `gamma_mhz` (MHz per Γ).
pub fn convert(q: FrequencyQuantity, target: FrequencyUnit, gamma_mhz: f64) -> Result<FrequencyQuantity> {
    if !(gamma_mhz > 0.0 && gamma_mhz.is_finite()) {
        return Err(Error::validation("gamma_mhz", "must be finite and > 0"));
    }
    let value = match (q.unit, target) {
        (FrequencyUnit::Gamma, FrequencyUnit::MHz) => q.value * gamma_mhz,
        (FrequencyUnit::MHz, FrequencyUnit::Gamma) => q.value / gamma_mhz,
        _ => q.value,
    };
    Ok(FrequencyQuantity { value, unit: target })
}

/// The cavity-coupled optical transitions, all sharing one ground state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionLadder {
    offsets: Vec<f64>,
    decays: Vec<f64>,
    labels: Vec<String>,
}

impl TransitionLadder {
    /// `offsets` are the probe detunings of each resonance (strictly
    /// increasing), `decays` the excited-state decay rates γᵢ.
    pub fn new(offsets: Vec<f64>, decays: Vec<f64>, labels: Vec<String>) -> Result<Self> {
        if offsets.is_empty() {
            return Err(Error::validation("offsets", "at least one transition is required"));
        }
        if decays.len() != offsets.len() {
            return Err(Error::validation(
                "decays",
                format!("expected {} entries, got {}", offsets.len(), decays.len()),
            ));
        }
        if labels.len() != offsets.len() {
            return Err(Error::validation(
                "labels",
                format!("expected {} entries, got {}", offsets.len(), labels.len()),
            ));
        }
        if offsets.iter().any(|x| !x.is_finite()) {
            return Err(Error::validation("offsets", "entries must be finite"));
        }
        if offsets.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::validation("offsets", "must be strictly increasing"));
        }
        if let Some(i) = decays.iter().position(|&g| !(g > 0.0 && g.is_finite())) {
            return Err(Error::validation(format!("decays[{i}]"), "must be finite and > 0"));
        }
        Ok(Self {
            offsets,
            decays,
            labels,
        })
    }

    /// Three transitions |1⟩→|2⟩,|3⟩,|4⟩ with upper-level splittings
    /// δ₂₃ = ω₃ − ω₂ and δ₃₄ = ω₄ − ω₃. The |1⟩→|4⟩ line is the zero of Δp.
    pub fn from_splittings(delta23: f64, delta34: f64, gammas: [f64; 3]) -> Result<Self> {
        if !(delta23 > 0.0 && delta23.is_finite()) {
            return Err(Error::validation("delta23", "must be finite and > 0"));
        }
        if !(delta34 > 0.0 && delta34.is_finite()) {
            return Err(Error::validation("delta34", "must be finite and > 0"));
        }
        for (i, g) in gammas.iter().enumerate() {
            if !(*g > 0.0 && g.is_finite()) {
                return Err(Error::validation(format!("gammas[{i}]"), "must be finite and > 0"));
            }
        }
        Self::new(
            vec![-(delta34 + delta23), -delta34, 0.0],
            gammas.to_vec(),
            vec!["|2>".into(), "|3>".into(), "|4>".into()],
        )
    }

    /// A single transition resonant at Δp = 0.
    pub fn two_level(gamma: f64) -> Result<Self> {
        Self::new(vec![0.0], vec![gamma], vec!["|e>".into()])
    }

    pub fn len(&self) -> usize {
        self.offsets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.offsets.is_empty()
    }

    pub fn offsets(&self) -> &[f64] {
        &self.offsets
    }

    pub fn decays(&self) -> &[f64] {
        &self.decays
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    /// Copy of the ladder with every resonance moved by `shift`.
    pub fn shifted(&self, shift: f64) -> Self {
        Self {
            offsets: self.offsets.iter().map(|x| x + shift).collect(),
            decays: self.decays.clone(),
            labels: self.labels.clone(),
        }
    }
}

/// Collective coupling strengths G = g√N, one per transition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CollectiveCoupling {
    strengths: Vec<f64>,
}

impl CollectiveCoupling {
    pub fn new(strengths: Vec<f64>) -> Result<Self> {
        if let Some(i) = strengths.iter().position(|&g| !(g >= 0.0 && g.is_finite())) {
            return Err(Error::validation(format!("coupling[{i}]"), "must be finite and >= 0"));
        }
        Ok(Self { strengths })
    }

    /// The same G on each of `m` transitions.
    pub fn uniform(g: f64, m: usize) -> Result<Self> {
        Self::new(vec![g; m])
    }

    pub fn strengths(&self) -> &[f64] {
        &self.strengths
    }

    pub fn len(&self) -> usize {
        self.strengths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.strengths.is_empty()
    }

    pub(crate) fn check_matches(&self, ladder: &TransitionLadder) -> Result<()> {
        if self.len() != ladder.len() {
            return Err(Error::validation(
                "coupling",
                format!("{} strengths for {} transitions", self.len(), ladder.len()),
            ));
        }
        Ok(())
    }
}

/// Symmetric single-mode cavity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CavityParams {
    /// Field decay rate; the empty-cavity resonance has half-width κ.
    pub kappa: f64,
    /// Cavity detuning from the reference transition.
    pub delta_c: f64,
    /// Probe input amplitude. Drops out of normalized observables.
    pub drive: f64,
}

impl CavityParams {
    pub fn new(kappa: f64, delta_c: f64, drive: f64) -> Result<Self> {
        if !(kappa > 0.0 && kappa.is_finite()) {
            return Err(Error::validation("kappa", "must be finite and > 0"));
        }
        if !delta_c.is_finite() {
            return Err(Error::validation("delta_c", "must be finite"));
        }
        if !(drive > 0.0 && drive.is_finite()) {
            return Err(Error::validation("drive", "must be finite and > 0"));
        }
        Ok(Self {
            kappa,
            delta_c,
            drive,
        })
    }
}

/// Uniform probe-detuning grid including both endpoints.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanGrid {
    pub dp_min: f64,
    pub dp_max: f64,
    pub points: usize,
}

impl ScanGrid {
    pub fn new(dp_min: f64, dp_max: f64, points: usize) -> Result<Self> {
        let grid = Self {
            dp_min,
            dp_max,
            points,
        };
        grid.validate()?;
        Ok(grid)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dp_min.is_finite() && self.dp_max.is_finite()) {
            return Err(Error::validation("grid", "bounds must be finite"));
        }
        if self.dp_min >= self.dp_max {
            return Err(Error::validation("grid", "dp_min must be < dp_max"));
        }
        if self.points < 2 {
            return Err(Error::validation("grid.points", "need at least 2 points"));
        }
        Ok(())
    }

    pub fn step(&self) -> f64 {
        (self.dp_max - self.dp_min) / (self.points - 1) as f64
    }

    /// The i-th grid point. The last point is exactly `dp_max`.
    pub fn value(&self, i: usize) -> f64 {
        if i + 1 == self.points {
            self.dp_max
        } else {
            self.dp_min + i as f64 * self.step()
        }
    }

    pub fn values(&self) -> Vec<f64> {
        (0..self.points).map(|i| self.value(i)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemConfig {
    pub ladder: TransitionLadder,
    pub coupling: CollectiveCoupling,
    pub cavity: CavityParams,
    pub grid: ScanGrid,
}

impl SystemConfig {
    pub fn new(
        ladder: TransitionLadder,
        coupling: CollectiveCoupling,
        cavity: CavityParams,
        grid: ScanGrid,
    ) -> Result<Self> {
        let config = Self {
            ladder,
            coupling,
            cavity,
            grid,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        self.coupling.check_matches(&self.ladder)?;
        self.grid.validate()
    }
}

/// Single-atom coupling g = μ·√(ω_c / 2ħε₀V) in SI units: μ in C·m, ω_c in
/// rad/s, V in m³. The result is an angular frequency in rad/s.
pub fn coupling_from_dipole(mu: f64, omega_c: f64, volume: f64) -> Result<f64> {
    for (name, v) in [("mu", mu), ("omega_c", omega_c), ("volume", volume)] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::validation(name, "must be finite and > 0"));
        }
    }
    Ok(mu * (omega_c / (2.0 * HBAR * EPSILON_0 * volume)).sqrt())
}
