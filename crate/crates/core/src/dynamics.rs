//! Linearized equations of motion for the cavity field and the optical
//! coherences, integrated in time as a check on the closed-form steady state.
//!
//! With the atoms held in the ground state the state vector
//! v = [a, s₁ … s_M] obeys v̇ = A·v + b with
//!
//! ```text
//! ȧ  = −[κ + i(Δc − Δp)]·a + i·Σᵢ Gᵢ·sᵢ + a_in
//! ṡᵢ = −[γᵢ/2 − i(Δp − Δᵢ)]·sᵢ + i·Gᵢ·a
//! ```
//!
//! Eliminating the sᵢ at steady state gives a = a_in / (κ + i(Δc − Δp) − iχ),
//! which is the closed form in [`crate::response`]. The collective √N factors
//! are absorbed into Gᵢ, and the cavity decay and the imaginary unit on the
//! detuning are written so that this identity holds exactly.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::model::{CavityParams, CollectiveCoupling, SystemConfig, TransitionLadder};

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Largest dt·ρ(A) accepted by [`integrate`].
pub const RK4_STABILITY_LIMIT: f64 = 2.6;

#[derive(Debug, Clone, PartialEq)]
pub struct LinearSystem {
    matrix: DMatrix<Complex64>,
    drive: DVector<Complex64>,
    eigenvalues: Vec<Complex64>,
    /// κ / a_in, mapping the cavity amplitude to the normalized transmission.
    normalization: Complex64,
}

impl LinearSystem {
    /// General stable system v̇ = A·v + b. Fails if any eigenvalue of A has
    /// a non-negative real part.
    pub fn new(matrix: DMatrix<Complex64>, drive: DVector<Complex64>) -> Result<Self> {
        if !matrix.is_square() || matrix.nrows() != drive.len() || drive.is_empty() {
            return Err(Error::validation("linear system", "matrix must be square and match the drive"));
        }
        if matrix.iter().chain(drive.iter()).any(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(Error::validation("linear system", "entries must be finite"));
        }
        let eigenvalues: Vec<Complex64> = nalgebra::Schur::try_new(matrix.clone(), 1e-14, 10_000)
            .and_then(|s| s.eigenvalues())
            .ok_or_else(|| Error::numerical("Schur decomposition did not converge"))?
            .iter()
            .copied()
            .collect();
        let abscissa = eigenvalues.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max);
        if abscissa >= 0.0 {
            return Err(Error::numerical(format!(
                "unstable linear system: max Re(eig) = {abscissa}"
            )));
        }
        Ok(Self {
            matrix,
            drive,
            eigenvalues,
            normalization: Complex64::new(1.0, 0.0),
        })
    }

    /// The linearized cavity + coherence system at probe detuning `dp`.
    pub fn from_parts(
        ladder: &TransitionLadder,
        coupling: &CollectiveCoupling,
        cavity: &CavityParams,
        dp: f64,
    ) -> Result<Self> {
        coupling.check_matches(ladder)?;
        let m = ladder.len();
        let mut a = DMatrix::<Complex64>::zeros(m + 1, m + 1);
        a[(0, 0)] = -Complex64::new(cavity.kappa, cavity.delta_c - dp);
        for (i, ((&offset, &gamma), &g)) in ladder
            .offsets()
            .iter()
            .zip(ladder.decays())
            .zip(coupling.strengths())
            .enumerate()
        {
            a[(0, i + 1)] = I * g;
            a[(i + 1, 0)] = I * g;
            a[(i + 1, i + 1)] = -Complex64::new(0.5 * gamma, -(dp - offset));
        }
        let mut b = DVector::<Complex64>::zeros(m + 1);
        b[0] = Complex64::new(cavity.drive, 0.0);
        let mut sys = Self::new(a, b)?;
        sys.normalization = Complex64::new(cavity.kappa / cavity.drive, 0.0);
        Ok(sys)
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.matrix
    }

    pub fn drive(&self) -> &DVector<Complex64> {
        &self.drive
    }

    pub fn dim(&self) -> usize {
        self.drive.len()
    }

    pub fn eigenvalues(&self) -> &[Complex64] {
        &self.eigenvalues
    }

    /// max Re(eig A); always negative.
    pub fn spectral_abscissa(&self) -> f64 {
        self.eigenvalues.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max)
    }

    /// max |eig A|.
    pub fn spectral_radius(&self) -> f64 {
        self.eigenvalues.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Same system with the drive multiplied by `factor`.
    pub fn with_scaled_drive(&self, factor: f64) -> Self {
        let mut out = self.clone();
        out.drive *= Complex64::new(factor, 0.0);
        out
    }

    /// Cavity component of `state` expressed as the normalized transmitted
    /// amplitude (comparable to [`crate::response::transmission_amplitude`]).
    pub fn normalized_cavity(&self, state: &DVector<Complex64>) -> Complex64 {
        state[0] * self.normalization
    }

    fn rhs(&self, v: &DVector<Complex64>) -> DVector<Complex64> {
        &self.matrix * v + &self.drive
    }
}

/// The linearized system for `config` at probe detuning `dp`.
pub fn linear_system(config: &SystemConfig, dp: f64) -> Result<LinearSystem> {
    LinearSystem::from_parts(&config.ladder, &config.coupling, &config.cavity, dp)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<DVector<Complex64>>,
}

impl Trajectory {
    pub fn last(&self) -> Option<&DVector<Complex64>> {
        self.states.last()
    }
}

/// Classical fourth-order Runge–Kutta from `v0` at t = 0 to `t_end` with
/// step `dt`. The final step is shortened to land on `t_end` exactly.
pub fn integrate(sys: &LinearSystem, v0: &DVector<Complex64>, dt: f64, t_end: f64) -> Result<Trajectory> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::validation("dt", "must be finite and > 0"));
    }
    if !(t_end >= dt && t_end.is_finite()) {
        return Err(Error::validation("t_end", "must be finite and >= dt"));
    }
    if v0.len() != sys.dim() {
        return Err(Error::validation(
            "v0",
            format!("expected {} components, got {}", sys.dim(), v0.len()),
        ));
    }
    let radius = sys.spectral_radius();
    if dt * radius > RK4_STABILITY_LIMIT {
        return Err(Error::numerical(format!(
            "dt = {dt} is outside the RK4 stability region (|eig| up to {radius}); use dt <= {:.3e}",
            RK4_STABILITY_LIMIT / radius
        )));
    }

    let steps = ((t_end / dt) * (1.0 - 1e-12)).ceil() as usize;
    let mut times = Vec::with_capacity(steps + 1);
    let mut states = Vec::with_capacity(steps + 1);
    let mut v = v0.clone();
    times.push(0.0);
    states.push(v.clone());
    for k in 0..steps {
        let t = k as f64 * dt;
        let h = if k + 1 == steps { t_end - t } else { dt };
        let half = Complex64::new(0.5 * h, 0.0);
        let k1 = sys.rhs(&v);
        let k2 = sys.rhs(&(&v + &k1 * half));
        let k3 = sys.rhs(&(&v + &k2 * half));
        let k4 = sys.rhs(&(&v + &k3 * Complex64::new(h, 0.0)));
        v += (k1 + (k2 + k3) * Complex64::new(2.0, 0.0) + k4) * Complex64::new(h / 6.0, 0.0);
        times.push(if k + 1 == steps { t_end } else { t + h });
        states.push(v.clone());
    }
    Ok(Trajectory { times, states })
}

/// Fixed point of v̇ = A·v + b, by LU solve of A·v = −b.
pub fn steady_state(sys: &LinearSystem) -> Result<DVector<Complex64>> {
    let rhs = -sys.drive.clone();
    sys.matrix
        .clone()
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::numerical("singular system matrix"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ScanGrid;
    use crate::response::{susceptibility, transmission_amplitude};

    fn resonant_case() -> SystemConfig {
        SystemConfig::new(
            TransitionLadder::from_splittings(5.0, 10.0, [1.0; 3]).unwrap(),
            CollectiveCoupling::uniform(4.3, 3).unwrap(),
            CavityParams::new(2.0, 0.0, 1.0).unwrap(),
            ScanGrid::new(-30.0, 20.0, 11).unwrap(),
        )
        .unwrap()
    }

    fn rel(a: Complex64, b: Complex64) -> f64 {
        (a - b).norm() / b.norm()
    }

    #[test]
    fn uncoupled_is_diagonal_and_empty_cavity() {
        let mut config = resonant_case();
        config.coupling = CollectiveCoupling::uniform(0.0, 3).unwrap();
        config.cavity = CavityParams::new(1.5, 0.7, 2.0).unwrap();
        let dp = -3.0;
        let sys = linear_system(&config, dp).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                if i != j {
                    assert_eq!(sys.matrix()[(i, j)], Complex64::new(0.0, 0.0));
                }
            }
        }
        let v = steady_state(&sys).unwrap();
        let expected = 2.0 / Complex64::new(1.5, 0.7 - dp);
        assert!(rel(v[0], expected) < 1e-15);
        assert!((sys.spectral_abscissa() + 0.5).abs() < 1e-12);
    }

    #[test]
    fn on_resonance_empty_cavity() {
        let mut config = resonant_case();
        config.coupling = CollectiveCoupling::uniform(0.0, 3).unwrap();
        config.cavity = CavityParams::new(2.0, 1.0, 3.0).unwrap();
        let v = steady_state(&linear_system(&config, 1.0).unwrap()).unwrap();
        assert!(rel(v[0], Complex64::new(1.5, 0.0)) < 1e-15);
    }

    #[test]
    fn two_level_suppression() {
        let (kappa, gamma, g, drive) = (2.0, 1.0, 3.0, 1.0);
        let config = SystemConfig::new(
            TransitionLadder::two_level(gamma).unwrap(),
            CollectiveCoupling::new(vec![g]).unwrap(),
            CavityParams::new(kappa, 0.0, drive).unwrap(),
            ScanGrid::new(-1.0, 1.0, 2).unwrap(),
        )
        .unwrap();
        let v = steady_state(&linear_system(&config, 0.0).unwrap()).unwrap();
        let expected = drive / (kappa + 2.0 * g * g / gamma);
        assert!(rel(v[0], Complex64::new(expected, 0.0)) < 1e-14);
    }

    #[test]
    fn steady_state_matches_closed_form() {
        let config = resonant_case();
        for dp in [-16.7, -11.4, -2.85, 0.0, 5.55, 13.0] {
            let sys = linear_system(&config, dp).unwrap();
            let v = steady_state(&sys).unwrap();
            let chi = susceptibility(&config.ladder, &config.coupling, dp);
            let closed = transmission_amplitude(&config.cavity, chi, dp);
            assert!(rel(sys.normalized_cavity(&v), closed) < 1e-12);
        }
    }

    #[test]
    fn zero_state_stays_zero() {
        let config = resonant_case();
        let sys = linear_system(&config, 0.3).unwrap().with_scaled_drive(0.0);
        let traj = integrate(&sys, &DVector::zeros(4), 0.01, 1.0).unwrap();
        assert!(traj.states.iter().all(|s| s.iter().all(|z| *z == Complex64::new(0.0, 0.0))));
        assert_eq!(traj.times.len(), 101);
        assert_eq!(*traj.times.last().unwrap(), 1.0);
    }

    fn decay() -> LinearSystem {
        LinearSystem::new(
            DMatrix::from_element(1, 1, Complex64::new(-1.0, 0.0)),
            DVector::from_element(1, Complex64::new(0.0, 0.0)),
        )
        .unwrap()
    }

    #[test]
    fn scalar_exponential() {
        let v0 = DVector::from_element(1, Complex64::new(1.0, 0.0));
        let traj = integrate(&decay(), &v0, 0.01, 1.0).unwrap();
        let err = (traj.last().unwrap()[0].re - (-1.0f64).exp()).abs();
        assert!(err < 1e-9, "{err}");
    }

    #[test]
    fn fourth_order_convergence() {
        let v0 = DVector::from_element(1, Complex64::new(1.0, 0.0));
        let exact = (-1.0f64).exp();
        let err = |dt: f64| (integrate(&decay(), &v0, dt, 1.0).unwrap().last().unwrap()[0].re - exact).abs();
        let ratio = err(0.1) / err(0.05);
        assert!(ratio >= 12.0, "ratio {ratio}");
    }

    #[test]
    fn converges_to_steady_state() {
        let config = resonant_case();
        let sys = linear_system(&config, -2.85).unwrap();
        let traj = integrate(&sys, &DVector::zeros(4), 0.01, 200.0).unwrap();
        let v = steady_state(&sys).unwrap();
        assert!(rel(traj.last().unwrap()[0], v[0]) < 1e-6);
    }

    #[test]
    fn linear_in_initial_state_and_drive() {
        let config = resonant_case();
        let sys = linear_system(&config, 1.2).unwrap();
        let v0 = DVector::from_fn(4, |i, _| Complex64::new(0.1 * i as f64, -0.05));
        let alpha = 2.5;
        let a = integrate(&sys, &v0, 0.02, 5.0).unwrap();
        let b = integrate(&sys.with_scaled_drive(alpha), &(&v0 * Complex64::new(alpha, 0.0)), 0.02, 5.0).unwrap();
        for (x, y) in a.states.iter().zip(&b.states) {
            assert!((x * Complex64::new(alpha, 0.0) - y).norm() < 1e-12 * (1.0 + y.norm()));
        }
    }

    #[test]
    fn oversized_step_rejected() {
        let sys = linear_system(&resonant_case(), 0.0).unwrap();
        let dt = 10.0 / sys.spectral_radius();
        let err = integrate(&sys, &DVector::zeros(4), dt, 100.0).unwrap_err();
        assert!(matches!(err, Error::Numerical(ref m) if m.contains("use dt <=")));
    }

    #[test]
    fn unstable_matrix_rejected() {
        let err = LinearSystem::new(
            DMatrix::from_element(1, 1, Complex64::new(0.1, 0.0)),
            DVector::from_element(1, Complex64::new(1.0, 0.0)),
        )
        .unwrap_err();
        assert!(!err.is_validation());
    }
}
