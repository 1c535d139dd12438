//! Subcommand bodies. Each returns the text to write; frequency columns are
//! in the configuration's display unit, times in 1/Γ.

use cqed_core::analysis::{find_peaks, full_width_half_max, match_peaks_to_modes};
use cqed_core::dynamics::{integrate, steady_state, LinearSystem};
use cqed_core::fit::{fit_spectrum, FitProblem, FitResult, Observation, Parameter};
use cqed_core::modes::{branch_scan, eigenmodes, mode_matrix, quartic_audit};
use cqed_core::response::{scan_spectrum_with, scan_susceptibility, susceptibility, transmission_amplitude};
use cqed_core::Execution;
use nalgebra::DVector;
use serde_json::{json, Map, Value};

use crate::config::Resolved;
use crate::error::{CliError, Result};
use crate::output::{num, Csv};

pub fn spectrum(r: &Resolved, exec: Execution) -> Result<String> {
    let s = scan_spectrum_with(&r.system, exec)?;
    let mut csv = Csv::new(&["delta_p", "re_amplitude", "im_amplitude", "intensity"]);
    for k in 0..s.len() {
        csv.row(&[r.to_display(s.dp[k]), s.amplitude[k].re, s.amplitude[k].im, s.intensity[k]]);
    }
    Ok(csv.finish())
}

pub fn chi(r: &Resolved, exec: Execution) -> Result<String> {
    let scan = scan_susceptibility(&r.system.ladder, &r.system.coupling, &r.system.grid, exec)?;
    let mut csv = Csv::new(&["delta_p", "re_chi", "im_chi"]);
    for (dp, z) in scan {
        csv.row(&[r.to_display(dp), r.to_display(z.re), r.to_display(z.im)]);
    }
    Ok(csv.finish())
}

pub fn modes(r: &Resolved) -> Result<String> {
    let m = mode_matrix(&r.system.ladder, &r.system.coupling, r.system.cavity.delta_c)?;
    let modes = eigenmodes(&m)?;
    let transitions = r.system.ladder.len();
    let mut header = vec!["index".to_string(), "eigenvalue".into(), "photonic_fraction".into()];
    header.extend((1..=transitions).map(|i| format!("w{i}")));
    let mut csv = Csv::new(&header);
    let photonic = modes.photonic_fraction();
    for (k, w) in modes.weights().iter().enumerate() {
        let mut cells = vec![(k + 1).to_string(), num(r.to_display(modes.eigenvalues[k])), num(photonic[k])];
        cells.extend(w[..transitions].iter().map(|&x| num(x)));
        csv.cells(&cells);
    }
    Ok(csv.finish())
}

/// Audit of the reference quartic. Needs equal couplings and δ₃₄ = 2δ₂₃;
/// values are reported in Γ-units.
pub fn poly(r: &Resolved) -> Result<String> {
    let g = r.system.coupling.strengths();
    if g.iter().any(|&x| x != g[0]) {
        return Err(CliError::usage("poly needs equal couplings (coupling.g_sqrt_n)"));
    }
    let offsets = r.system.ladder.offsets();
    let (d23, d34) = (offsets[1] - offsets[0], offsets[2] - offsets[1]);
    if (d34 - 2.0 * d23).abs() > 1e-12 * d34.abs() {
        return Err(CliError::usage(format!(
            "poly needs levels.delta34 = 2 * levels.delta23 (got {} and {} gamma)",
            num(d23),
            num(d34)
        )));
    }
    let audit = quartic_audit(g[0], 0.5 * d23, r.system.cavity.delta_c)?;
    let mut text = serde_json::to_string_pretty(&json!({ "units": "gamma", "audit": audit }))
        .map_err(|e| CliError::Numerical(e.to_string()))?;
    text.push('\n');
    Ok(text)
}

pub fn branches(r: &Resolved, exec: Execution) -> Result<String> {
    let (lo, hi, n) = r.branches;
    let dc: Vec<f64> = (0..n).map(|i| if i + 1 == n { hi } else { lo + (hi - lo) * i as f64 / (n - 1) as f64 }).collect();
    let scan = branch_scan(&r.system.ladder, &r.system.coupling, &dc, exec)?;
    let mut header = vec!["delta_c".to_string()];
    header.extend((1..=r.system.ladder.len() + 1).map(|i| format!("lambda_{i}")));
    let mut csv = Csv::new(&header);
    for (s, &x) in dc.iter().enumerate() {
        let mut row = vec![r.to_display(x)];
        row.extend(scan.sorted(s).iter().map(|&l| r.to_display(l)));
        csv.row(&row);
    }
    Ok(csv.finish())
}

pub struct DynamicsOptions {
    /// Γ-units.
    pub dp: f64,
    pub dt: Option<f64>,
    pub t_end: f64,
    pub stride: Option<usize>,
}

/// Trajectory of the normalized cavity amplitude from the empty state,
/// ending with the relative deviation from the closed-form steady state.
pub fn dynamics(r: &Resolved, o: &DynamicsOptions) -> Result<String> {
    let sys = LinearSystem::from_parts(&r.system.ladder, &r.system.coupling, &r.system.cavity, o.dp)?;
    let dt = o.dt.unwrap_or_else(|| (1.0 / sys.spectral_radius()).min(0.01));
    let traj = integrate(&sys, &DVector::zeros(sys.dim()), dt, o.t_end)?;
    let last = traj.states.len() - 1;
    let stride = o.stride.unwrap_or(last.div_ceil(2000)).max(1);

    let mut csv = Csv::new(&["t", "re_cavity", "im_cavity", "intensity"]);
    for (k, (t, v)) in traj.times.iter().zip(&traj.states).enumerate() {
        if k % stride == 0 || k == last {
            let a = sys.normalized_cavity(v);
            csv.row(&[*t, a.re, a.im, a.norm_sqr()]);
        }
    }
    let chi = susceptibility(&r.system.ladder, &r.system.coupling, o.dp);
    let exact = transmission_amplitude(&r.system.cavity, chi, o.dp);
    let solved = sys.normalized_cavity(&steady_state(&sys)?);
    let integrated = sys.normalized_cavity(&traj.states[last]);
    csv.comment(&format!("linear_solve_relative_error={:e}", (solved - exact).norm() / exact.norm()));
    csv.comment(&format!("steady_state_relative_error={:e}", (integrated - exact).norm() / exact.norm()));
    Ok(csv.finish())
}

/// Peak table with each peak's nearest mode eigenvalue (blank if none lies
/// within `match_tol`, given in Γ-units).
pub fn peaks(r: &Resolved, exec: Execution, min_prominence: f64, match_tol: f64) -> Result<String> {
    let s = scan_spectrum_with(&r.system, exec)?;
    let found = find_peaks(&s, min_prominence);
    let m = mode_matrix(&r.system.ladder, &r.system.coupling, r.system.cavity.delta_c)?;
    let modes = eigenmodes(&m)?;
    let matching = match_peaks_to_modes(&found, &modes, match_tol);
    let mut csv = Csv::new(&["position", "height", "prominence", "fwhm", "eigenvalue", "residual"]);
    for (k, p) in found.iter().enumerate() {
        let fwhm = full_width_half_max(&s.dp, &s.intensity, p).map(|w| num(r.to_display(w))).unwrap_or_default();
        let (eig, res) = match matching.pairs.iter().find(|q| q.peak == k) {
            Some(q) => (num(r.to_display(q.eigenvalue)), num(r.to_display(q.residual))),
            None => (String::new(), String::new()),
        };
        csv.cells(&[num(r.to_display(p.position)), num(p.height), num(p.prominence), fwhm, eig, res]);
    }
    Ok(csv.finish())
}

/// `delta_p,intensity[,weight]` with Δp in the display unit.
pub fn parse_data(text: &str, r: &Resolved) -> Result<Vec<Observation>> {
    let mut lines = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with('#'));
    let (_, header) = lines.next().ok_or_else(|| CliError::usage("data: empty file"))?;
    let columns: Vec<&str> = header.split(',').map(str::trim).collect();
    let weighted = match columns.as_slice() {
        ["delta_p", "intensity"] => false,
        ["delta_p", "intensity", "weight"] => true,
        _ => {
            return Err(CliError::usage(format!(
                "data: header must be delta_p,intensity[,weight], got {header:?}"
            )))
        }
    };
    let mut out = Vec::new();
    for (n, line) in lines {
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != columns.len() {
            return Err(CliError::usage(format!("data line {}: expected {} fields", n + 1, columns.len())));
        }
        let parse = |s: &str| {
            s.parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .ok_or_else(|| CliError::usage(format!("data line {}: {s:?} is not a finite number", n + 1)))
        };
        out.push(Observation {
            dp: r.from_display(parse(fields[0])?),
            intensity: parse(fields[1])?,
            weight: if weighted { parse(fields[2])? } else { 1.0 },
        });
    }
    Ok(out)
}

fn is_frequency(id: Parameter) -> bool {
    id != Parameter::Scale
}

pub fn fit_problem(r: &Resolved, data: Vec<Observation>) -> Result<FitProblem> {
    let sys = &r.system;
    let mut p = if r.per_transition {
        FitProblem::per_transition(sys.ladder.clone(), data, sys.coupling.strengths(), sys.cavity.kappa, sys.cavity.delta_c)
    } else {
        FitProblem::common_coupling(
            sys.ladder.clone(),
            data,
            sys.coupling.strengths()[0],
            sys.cavity.kappa,
            sys.cavity.delta_c,
        )
    };
    p = p.value(Parameter::Scale, r.fit.scale)?.value(Parameter::Offset, r.fit.offset)?;
    for &(id, lo, hi) in &r.fit.bounds {
        p = p.bounds(id, lo, hi)?;
    }
    for &id in &r.fit.free {
        p = p.free(id)?;
    }
    p.max_iterations = r.fit.max_iterations;
    Ok(p)
}

pub struct FitOutput {
    pub result: FitResult,
    /// Structured report (JSON).
    pub report: String,
    /// `delta_p,observed,model,residual` at the data points.
    pub model_csv: String,
}

pub fn fit(r: &Resolved, problem: &FitProblem) -> Result<FitOutput> {
    let result = fit_spectrum(problem)?;
    let display = |id: Parameter, v: f64| if is_frequency(id) { r.to_display(v) } else { v };
    let mut params = Map::new();
    for &(id, v) in &result.parameters {
        params.insert(id.name(), json!(display(id, v)));
    }
    let free: Vec<String> = problem.params.iter().filter(|s| s.free).map(|s| s.id.name()).collect();
    let report = json!({
        "converged": result.converged,
        "iterations": result.iterations,
        "residual_rms": result.residual_rms,
        "gradient_norm": result.gradient_norm,
        "jacobian_condition": if result.jacobian_condition.is_finite() { json!(result.jacobian_condition) } else { Value::String("inf".into()) },
        "units": r.display_name(),
        "free": free,
        "parameters": params,
        "norm_history": result.norm_history,
    });
    let mut report = serde_json::to_string_pretty(&report).map_err(|e| CliError::Numerical(e.to_string()))?;
    report.push('\n');

    let dp: Vec<f64> = problem.data.iter().map(|o| o.dp).collect();
    let model = problem.model(&result.values(), &dp)?;
    let mut csv = Csv::new(&["delta_p", "observed", "model", "residual"]);
    for (o, m) in problem.data.iter().zip(model) {
        csv.row(&[r.to_display(o.dp), o.intensity, m, m - o.intensity]);
    }
    Ok(FitOutput {
        result,
        report,
        model_csv: csv.finish(),
    })
}
