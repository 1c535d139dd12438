//! Damped least-squares fits of the transmission model to measured spectra.
//!
//! The model for a data point at probe detuning Δp is
//! `scale · |t(Δp − offset; G, κ, Δc)|²`. Couplings and κ are optimized in
//! log space, which keeps them positive without pinning to a bound; the
//! other parameters are optimized directly. Bounds are enforced by
//! projecting each trial step onto the box.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{CavityParams, CollectiveCoupling, TransitionLadder};
use crate::par::{self, Execution};
use crate::response::{susceptibility, transmission_intensity};

pub const DEFAULT_MAX_ITERATIONS: usize = 500;
const RELATIVE_TOLERANCE: f64 = 1e-10;
const GRADIENT_TOLERANCE: f64 = 1e-8;
const MAX_DAMPING: f64 = 1e16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Parameter {
    /// One G shared by every transition.
    CommonCoupling,
    /// G of transition i (0-based, ladder order); named g2, g3, … after the
    /// upper level.
    Coupling(usize),
    Kappa,
    DeltaC,
    Scale,
    Offset,
}

impl Parameter {
    pub fn name(&self) -> String {
        match self {
            Parameter::CommonCoupling => "g".into(),
            Parameter::Coupling(i) => format!("g{}", i + 2),
            Parameter::Kappa => "kappa".into(),
            Parameter::DeltaC => "delta_c".into(),
            Parameter::Scale => "scale".into(),
            Parameter::Offset => "offset".into(),
        }
    }

    fn log_scaled(&self) -> bool {
        matches!(
            self,
            Parameter::CommonCoupling | Parameter::Coupling(_) | Parameter::Kappa
        )
    }

    fn default_bounds(&self) -> (f64, f64) {
        match self {
            Parameter::CommonCoupling | Parameter::Coupling(_) => (1e-6, 1e3),
            Parameter::Kappa => (1e-6, 1e3),
            Parameter::DeltaC | Parameter::Offset => (-1e3, 1e3),
            Parameter::Scale => (1e-9, 1e9),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParameterSpec {
    pub id: Parameter,
    /// Initial value if free, held value otherwise.
    pub value: f64,
    pub free: bool,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub dp: f64,
    pub intensity: f64,
    pub weight: f64,
}

impl Observation {
    pub fn new(dp: f64, intensity: f64) -> Self {
        Self {
            dp,
            intensity,
            weight: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitProblem {
    pub ladder: TransitionLadder,
    pub data: Vec<Observation>,
    pub params: Vec<ParameterSpec>,
    pub max_iterations: usize,
}

impl FitProblem {
    fn with_couplings(ladder: TransitionLadder, data: Vec<Observation>, couplings: Vec<(Parameter, f64)>, kappa: f64, delta_c: f64) -> Self {
        let spec = |id: Parameter, value: f64| {
            let (lower, upper) = id.default_bounds();
            ParameterSpec {
                id,
                value,
                free: false,
                lower,
                upper,
            }
        };
        let mut params: Vec<ParameterSpec> = couplings.into_iter().map(|(id, v)| spec(id, v)).collect();
        params.push(spec(Parameter::Kappa, kappa));
        params.push(spec(Parameter::DeltaC, delta_c));
        params.push(spec(Parameter::Scale, 1.0));
        params.push(spec(Parameter::Offset, 0.0));
        Self {
            ladder,
            data,
            params,
            max_iterations: DEFAULT_MAX_ITERATIONS,
        }
    }

    /// Problem with one shared coupling `g`. Every parameter starts fixed;
    /// release them with [`FitProblem::free`].
    pub fn common_coupling(ladder: TransitionLadder, data: Vec<Observation>, g: f64, kappa: f64, delta_c: f64) -> Self {
        Self::with_couplings(ladder, data, vec![(Parameter::CommonCoupling, g)], kappa, delta_c)
    }

    /// Problem with an independent coupling per transition.
    pub fn per_transition(ladder: TransitionLadder, data: Vec<Observation>, g: &[f64], kappa: f64, delta_c: f64) -> Self {
        let couplings = g.iter().enumerate().map(|(i, &v)| (Parameter::Coupling(i), v)).collect();
        Self::with_couplings(ladder, data, couplings, kappa, delta_c)
    }

    fn spec_mut(&mut self, id: Parameter) -> Result<&mut ParameterSpec> {
        self.params
            .iter_mut()
            .find(|p| p.id == id)
            .ok_or_else(|| Error::validation(id.name(), "not a parameter of this problem"))
    }

    pub fn spec(&self, id: Parameter) -> Option<&ParameterSpec> {
        self.params.iter().find(|p| p.id == id)
    }

    pub fn free(mut self, id: Parameter) -> Result<Self> {
        self.spec_mut(id)?.free = true;
        Ok(self)
    }

    pub fn fix(mut self, id: Parameter, value: f64) -> Result<Self> {
        let s = self.spec_mut(id)?;
        s.free = false;
        s.value = value;
        Ok(self)
    }

    pub fn value(mut self, id: Parameter, value: f64) -> Result<Self> {
        self.spec_mut(id)?.value = value;
        Ok(self)
    }

    pub fn bounds(mut self, id: Parameter, lower: f64, upper: f64) -> Result<Self> {
        let s = self.spec_mut(id)?;
        s.lower = lower;
        s.upper = upper;
        Ok(self)
    }

    pub fn free_count(&self) -> usize {
        self.params.iter().filter(|p| p.free).count()
    }

    pub fn validate(&self) -> Result<()> {
        let couplings = self
            .params
            .iter()
            .filter(|p| matches!(p.id, Parameter::Coupling(_)))
            .count();
        let common = self.spec(Parameter::CommonCoupling).is_some();
        if !(common && couplings == 0) && couplings != self.ladder.len() {
            return Err(Error::validation("params", "coupling parameters do not match the ladder"));
        }
        for p in &self.params {
            let name = p.id.name();
            if !(p.lower.is_finite() && p.upper.is_finite() && p.lower < p.upper) {
                return Err(Error::validation(name, "bounds must be finite with lower < upper"));
            }
            if p.id.log_scaled() && p.lower <= 0.0 {
                return Err(Error::validation(name, "lower bound must be > 0"));
            }
            if !(p.value >= p.lower && p.value <= p.upper) {
                return Err(Error::validation(name, format!("value {} outside [{}, {}]", p.value, p.lower, p.upper)));
            }
        }
        if self.data.len() < self.free_count() + 2 {
            return Err(Error::validation(
                "data",
                format!("{} points for {} free parameters", self.data.len(), self.free_count()),
            ));
        }
        if let Some(k) = self
            .data
            .iter()
            .position(|o| !(o.dp.is_finite() && o.intensity.is_finite() && o.weight >= 0.0 && o.weight.is_finite()))
        {
            return Err(Error::validation(format!("data[{k}]"), "non-finite value or negative weight"));
        }
        Ok(())
    }

    /// Parameter values aligned with `self.params`.
    pub fn initial_values(&self) -> Vec<f64> {
        self.params.iter().map(|p| p.value).collect()
    }

    fn lookup(&self, values: &[f64], id: Parameter) -> Option<f64> {
        self.params.iter().position(|p| p.id == id).map(|k| values[k])
    }

    /// Physical model pieces for a full parameter vector.
    pub fn model_parts(&self, values: &[f64]) -> Result<(CollectiveCoupling, CavityParams, f64, f64)> {
        let g = match self.lookup(values, Parameter::CommonCoupling) {
            Some(g) => vec![g; self.ladder.len()],
            None => (0..self.ladder.len())
                .map(|i| self.lookup(values, Parameter::Coupling(i)).unwrap_or(0.0))
                .collect(),
        };
        let kappa = self.lookup(values, Parameter::Kappa).unwrap_or(1.0);
        let delta_c = self.lookup(values, Parameter::DeltaC).unwrap_or(0.0);
        let scale = self.lookup(values, Parameter::Scale).unwrap_or(1.0);
        let offset = self.lookup(values, Parameter::Offset).unwrap_or(0.0);
        Ok((
            CollectiveCoupling::new(g)?,
            CavityParams::new(kappa, delta_c, 1.0)?,
            scale,
            offset,
        ))
    }

    /// Model intensity at each of `dp` for a full parameter vector.
    pub fn model(&self, values: &[f64], dp: &[f64]) -> Result<Vec<f64>> {
        let (coupling, cavity, scale, offset) = self.model_parts(values)?;
        Ok(dp
            .iter()
            .map(|&x| {
                let shifted = x - offset;
                let chi = susceptibility(&self.ladder, &coupling, shifted);
                scale * transmission_intensity(&cavity, chi, shifted)
            })
            .collect())
    }
}

/// Weighted residuals √wₖ·(model(Δpₖ) − observedₖ) for a full parameter vector.
pub fn residuals(problem: &FitProblem, values: &[f64]) -> Result<Vec<f64>> {
    if values.len() != problem.params.len() {
        return Err(Error::validation(
            "params",
            format!("expected {} values, got {}", problem.params.len(), values.len()),
        ));
    }
    for (p, &v) in problem.params.iter().zip(values) {
        if !(v >= p.lower && v <= p.upper) {
            return Err(Error::validation(p.id.name(), format!("value {v} outside [{}, {}]", p.lower, p.upper)));
        }
    }
    let dp: Vec<f64> = problem.data.iter().map(|o| o.dp).collect();
    let model = problem.model(values, &dp)?;
    Ok(model
        .iter()
        .zip(&problem.data)
        .map(|(m, o)| o.weight.sqrt() * (m - o.intensity))
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub parameters: Vec<(Parameter, f64)>,
    pub residual_rms: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Ratio of extreme singular values of the final Jacobian (in the
    /// optimizer's coordinates); infinite if it is rank deficient.
    pub jacobian_condition: f64,
    /// Max-norm of Jᵀr at the final point.
    pub gradient_norm: f64,
    /// Residual norm after the start and after every accepted step.
    pub norm_history: Vec<f64>,
}

impl FitResult {
    pub fn get(&self, id: Parameter) -> Option<f64> {
        self.parameters.iter().find(|(p, _)| *p == id).map(|&(_, v)| v)
    }

    pub fn values(&self) -> Vec<f64> {
        self.parameters.iter().map(|&(_, v)| v).collect()
    }
}

/// Maps between the optimizer's coordinates (free parameters only, logs for
/// couplings and κ) and full physical parameter vectors.
struct Coordinates<'a> {
    problem: &'a FitProblem,
    free: Vec<usize>,
}

impl<'a> Coordinates<'a> {
    fn new(problem: &'a FitProblem) -> Self {
        let free = (0..problem.params.len()).filter(|&k| problem.params[k].free).collect();
        Self { problem, free }
    }

    fn forward(id: Parameter, x: f64) -> f64 {
        if id.log_scaled() {
            x.ln()
        } else {
            x
        }
    }

    fn inverse(id: Parameter, u: f64) -> f64 {
        if id.log_scaled() {
            u.exp()
        } else {
            u
        }
    }

    fn initial(&self) -> Vec<f64> {
        self.free
            .iter()
            .map(|&k| {
                let p = &self.problem.params[k];
                Self::forward(p.id, p.value)
            })
            .collect()
    }

    fn box_of(&self, j: usize) -> (f64, f64) {
        let p = &self.problem.params[self.free[j]];
        (Self::forward(p.id, p.lower), Self::forward(p.id, p.upper))
    }

    fn project(&self, u: &mut [f64]) {
        for (j, x) in u.iter_mut().enumerate() {
            let (lo, hi) = self.box_of(j);
            *x = x.clamp(lo, hi);
        }
    }

    fn physical(&self, u: &[f64]) -> Vec<f64> {
        let mut values = self.problem.initial_values();
        for (j, &k) in self.free.iter().enumerate() {
            let p = &self.problem.params[k];
            values[k] = Self::inverse(p.id, u[j]).clamp(p.lower, p.upper);
        }
        values
    }

    fn residuals(&self, u: &[f64]) -> Result<DVector<f64>> {
        Ok(DVector::from_vec(residuals(self.problem, &self.physical(u))?))
    }

    /// Central differences, one-sided where a probe would leave the box.
    fn jacobian(&self, u: &[f64], r0: &DVector<f64>) -> Result<DMatrix<f64>> {
        let mut jac = DMatrix::zeros(r0.len(), u.len());
        for j in 0..u.len() {
            let (lo, hi) = self.box_of(j);
            let h = 1e-6 * u[j].abs().max(1.0);
            let mut probe = u.to_vec();
            let column = if u[j] - h >= lo && u[j] + h <= hi {
                probe[j] = u[j] + h;
                let rp = self.residuals(&probe)?;
                probe[j] = u[j] - h;
                let rm = self.residuals(&probe)?;
                (rp - rm) / (2.0 * h)
            } else if u[j] + h <= hi {
                probe[j] = u[j] + h;
                (self.residuals(&probe)? - r0) / h
            } else {
                probe[j] = u[j] - h;
                (r0 - self.residuals(&probe)?) / h
            };
            jac.set_column(j, &column);
        }
        Ok(jac)
    }
}

fn condition_number(jac: &DMatrix<f64>) -> f64 {
    if jac.ncols() == 0 {
        return 1.0;
    }
    let sv = jac.clone().svd(false, false).singular_values;
    let max = sv.max();
    let min = sv.min();
    if min > 0.0 {
        max / min
    } else {
        f64::INFINITY
    }
}

/// Levenberg–Marquardt with Marquardt diagonal scaling.
///
/// A trial step is accepted only if it lowers the residual norm. The fit
/// reports convergence when an accepted step changes the norm by less than
/// 1e-10 relative, when the gradient max-norm drops below 1e-8, or when no
/// damping level yields any decrease. Hitting `max_iterations` returns a
/// non-converged result rather than an error.
pub fn fit_spectrum(problem: &FitProblem) -> Result<FitResult> {
    problem.validate()?;
    let coords = Coordinates::new(problem);
    let mut u = coords.initial();
    let mut r = coords.residuals(&u)?;
    let mut norm = r.norm();
    let mut history = vec![norm];
    let mut damping = 1e-3;
    let mut converged = false;
    let mut iterations = 0;
    let mut jac = coords.jacobian(&u, &r)?;
    let mut gradient = jac.transpose() * &r;

    if coords.free.is_empty() {
        converged = true;
    }
    while !converged && iterations < problem.max_iterations {
        iterations += 1;
        if gradient.amax() < GRADIENT_TOLERANCE || norm == 0.0 {
            converged = true;
            break;
        }
        let jtj = jac.transpose() * &jac;
        let diag_floor = 1e-12 * jtj.diagonal().max().max(f64::MIN_POSITIVE);
        let mut accepted = false;
        while damping <= MAX_DAMPING {
            let mut lhs = jtj.clone();
            for k in 0..lhs.nrows() {
                lhs[(k, k)] += damping * jtj[(k, k)].max(diag_floor);
            }
            let Some(chol) = lhs.cholesky() else {
                damping *= 10.0;
                continue;
            };
            let step = chol.solve(&(-&gradient));
            let mut trial: Vec<f64> = u.iter().zip(step.iter()).map(|(a, b)| a + b).collect();
            coords.project(&mut trial);
            let r_trial = coords.residuals(&trial)?;
            let norm_trial = r_trial.norm();
            if norm_trial < norm {
                let change = (norm - norm_trial) / norm;
                u = trial;
                r = r_trial;
                norm = norm_trial;
                history.push(norm);
                damping = (damping / 10.0).max(1e-15);
                accepted = true;
                if change < RELATIVE_TOLERANCE {
                    converged = true;
                }
                break;
            }
            damping *= 10.0;
        }
        jac = coords.jacobian(&u, &r)?;
        gradient = jac.transpose() * &r;
        if !accepted {
            // no damping level gives a decrease: stationary to working precision
            converged = true;
        }
    }
    if gradient.amax() < GRADIENT_TOLERANCE {
        converged = true;
    }

    let values = coords.physical(&u);
    Ok(FitResult {
        parameters: problem.params.iter().map(|p| p.id).zip(values).collect(),
        residual_rms: norm / (problem.data.len() as f64).sqrt(),
        iterations,
        converged,
        jacobian_condition: condition_number(&jac),
        gradient_norm: gradient.amax(),
        norm_history: history,
    })
}

/// Noisy synthetic observations: the model at `values` on the probe
/// detunings of `problem.data`, each multiplied by (1 + rel_noise·n) with n
/// standard normal from a ChaCha stream seeded with `seed`.
pub fn synthetic_data(problem: &FitProblem, values: &[f64], rel_noise: f64, seed: u64) -> Result<Vec<Observation>> {
    let dp: Vec<f64> = problem.data.iter().map(|o| o.dp).collect();
    let model = problem.model(values, &dp)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(dp
        .iter()
        .zip(model)
        .map(|(&x, y)| {
            let n: f64 = StandardNormal.sample(&mut rng);
            Observation::new(x, y * (1.0 + rel_noise * n))
        })
        .collect())
}

/// Refit `template` against fresh noisy synthetic data for every seed. Runs
/// are independent and may execute in parallel; results come back in seed
/// order.
pub fn monte_carlo(
    template: &FitProblem,
    truth: &[f64],
    rel_noise: f64,
    seeds: &[u64],
    exec: Execution,
) -> Result<Vec<FitResult>> {
    par::map_slice(seeds, exec, |&seed| {
        let mut problem = template.clone();
        problem.data = synthetic_data(template, truth, rel_noise, seed)?;
        fit_spectrum(&problem)
    })
    .into_iter()
    .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ladder() -> TransitionLadder {
        TransitionLadder::from_splittings(5.0, 10.0, [1.0; 3]).unwrap()
    }

    fn grid(lo: f64, hi: f64, n: usize) -> Vec<Observation> {
        (0..n)
            .map(|i| Observation::new(lo + (hi - lo) * i as f64 / (n - 1) as f64, 0.0))
            .collect()
    }

    fn noiseless(g: f64, kappa: f64, dc: f64) -> FitProblem {
        let mut p = FitProblem::common_coupling(ladder(), grid(-30.0, 20.0, 501), g, kappa, dc);
        let truth = p.initial_values();
        p.data = synthetic_data(&p, &truth, 0.0, 0).unwrap();
        p
    }

    #[test]
    fn zero_residual_at_truth() {
        let p = noiseless(4.3, 2.0, 0.0);
        let r = residuals(&p, &p.initial_values()).unwrap();
        assert!(r.iter().all(|x| *x == 0.0));
    }

    #[test]
    fn doubled_scale_shifts_peak_residual() {
        let p = noiseless(4.3, 2.0, 0.0);
        let mut v = p.initial_values();
        let k = p.params.iter().position(|s| s.id == Parameter::Scale).unwrap();
        v[k] = 2.0;
        let r = residuals(&p, &v).unwrap();
        let (imax, peak) = p
            .data
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.intensity.total_cmp(&b.1.intensity))
            .map(|(i, o)| (i, o.intensity))
            .unwrap();
        assert!((r[imax] - peak).abs() < 1e-15);
    }

    #[test]
    fn out_of_bounds_rejected() {
        let p = noiseless(4.3, 2.0, 0.0);
        let mut v = p.initial_values();
        v[0] = -1.0;
        assert!(residuals(&p, &v).unwrap_err().is_validation());
    }

    #[test]
    fn central_and_forward_differences_agree() {
        let p = noiseless(4.3, 2.0, 0.0)
            .free(Parameter::CommonCoupling)
            .unwrap()
            .free(Parameter::DeltaC)
            .unwrap();
        let coords = Coordinates::new(&p);
        let u: Vec<f64> = vec![(4.0f64).ln(), 0.3];
        let r0 = coords.residuals(&u).unwrap();
        let central = coords.jacobian(&u, &r0).unwrap();
        for (j, h) in [(0usize, 1e-7), (1, 1e-7)] {
            let mut probe = u.clone();
            probe[j] += h;
            let forward = (coords.residuals(&probe).unwrap() - &r0) / h;
            let scale = central.column(j).amax();
            assert!((forward - central.column(j)).amax() < 1e-5 * scale);
        }
        // two step sizes agree to second order
        let mut probe = u.clone();
        let column = |h: f64, probe: &mut Vec<f64>| {
            probe[1] = u[1] + h;
            let rp = coords.residuals(probe).unwrap();
            probe[1] = u[1] - h;
            let rm = coords.residuals(probe).unwrap();
            (rp - rm) / (2.0 * h)
        };
        let a = column(1e-3, &mut probe);
        let b = column(5e-4, &mut probe);
        let c = column(2.5e-4, &mut probe);
        let ratio = (&a - &b).amax() / (&b - &c).amax();
        assert!((ratio - 4.0).abs() < 0.5, "ratio {ratio}");
    }

    #[test]
    fn noiseless_round_trip() {
        let truth = noiseless(4.3, 2.0, 0.0);
        let p = truth
            .clone()
            .value(Parameter::CommonCoupling, 3.9)
            .unwrap()
            .value(Parameter::Kappa, 2.3)
            .unwrap()
            .value(Parameter::DeltaC, 0.4)
            .unwrap()
            .free(Parameter::CommonCoupling)
            .unwrap()
            .free(Parameter::Kappa)
            .unwrap()
            .free(Parameter::DeltaC)
            .unwrap();
        let res = fit_spectrum(&p).unwrap();
        assert!(res.converged);
        let rel = |a: f64, b: f64| ((a - b) / b).abs();
        assert!(rel(res.get(Parameter::CommonCoupling).unwrap(), 4.3) < 1e-6);
        assert!(rel(res.get(Parameter::Kappa).unwrap(), 2.0) < 1e-6);
        assert!(res.get(Parameter::DeltaC).unwrap().abs() < 1e-6);
        assert!(res.norm_history.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn empty_cavity_drives_coupling_to_zero() {
        let truth = noiseless(0.0, 2.0, 0.0).bounds(Parameter::CommonCoupling, 1e-8, 1e3);
        let p = truth
            .unwrap()
            .value(Parameter::CommonCoupling, 1.0)
            .unwrap()
            .free(Parameter::CommonCoupling)
            .unwrap();
        let res = fit_spectrum(&p).unwrap();
        assert!(res.get(Parameter::CommonCoupling).unwrap() < 0.05);
    }

    #[test]
    fn free_scale_absorbs_prefactor() {
        let mut p = noiseless(4.3, 2.0, -5.0);
        for o in p.data.iter_mut() {
            o.intensity *= 3.7;
        }
        let p = p
            .value(Parameter::CommonCoupling, 4.0)
            .unwrap()
            .free(Parameter::CommonCoupling)
            .unwrap()
            .free(Parameter::Scale)
            .unwrap();
        let res = fit_spectrum(&p).unwrap();
        assert!((res.get(Parameter::Scale).unwrap() - 3.7).abs() < 1e-6);
        assert!((res.get(Parameter::CommonCoupling).unwrap() - 4.3).abs() < 1e-6);
    }

    #[test]
    fn per_transition_couplings() {
        let mut p = FitProblem::per_transition(ladder(), grid(-30.0, 20.0, 401), &[3.0, 4.0, 5.0], 2.0, 0.0);
        let truth = p.initial_values();
        p.data = synthetic_data(&p, &truth, 0.0, 0).unwrap();
        let p = p
            .value(Parameter::Coupling(1), 3.5)
            .unwrap()
            .free(Parameter::Coupling(1))
            .unwrap();
        let res = fit_spectrum(&p).unwrap();
        assert!((res.get(Parameter::Coupling(1)).unwrap() - 4.0).abs() < 1e-6);
    }

    #[test]
    fn validation_errors() {
        let p = noiseless(4.3, 2.0, 0.0);
        assert!(p.clone().bounds(Parameter::Kappa, 0.0, 5.0).unwrap().validate().is_err());
        assert!(p.clone().bounds(Parameter::DeltaC, 1.0, -1.0).unwrap().validate().is_err());
        assert!(p.clone().value(Parameter::Kappa, 2e3).unwrap().validate().is_err());
        assert!(p.clone().free(Parameter::Coupling(0)).is_err());
        let mut tiny = p.free(Parameter::Kappa).unwrap();
        tiny.data.truncate(2);
        assert!(fit_spectrum(&tiny).unwrap_err().is_validation());
    }

    #[test]
    fn iteration_cap_is_not_an_error() {
        let truth = noiseless(4.3, 2.0, 0.0);
        let mut p = truth
            .value(Parameter::CommonCoupling, 2.0)
            .unwrap()
            .free(Parameter::CommonCoupling)
            .unwrap();
        p.max_iterations = 1;
        let res = fit_spectrum(&p).unwrap();
        assert_eq!(res.iterations, 1);
        assert!(!res.converged);
    }
}
