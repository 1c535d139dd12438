//! Acceptance criteria. Runs without the libtest harness so every criterion
//! prints exactly one PASS/FAIL line; exits non-zero if any fails.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use cqed_core::analysis::{find_peaks, find_peaks_xy, full_width_half_max, match_peaks_to_modes, DEFAULT_MIN_PROMINENCE};
use cqed_core::dynamics::{integrate, steady_state, LinearSystem};
use cqed_core::fit::{fit_spectrum, monte_carlo, synthetic_data, FitProblem, Observation, Parameter};
use cqed_core::model::{
    convert, CavityParams, CollectiveCoupling, FrequencyQuantity, FrequencyUnit, ScanGrid, SystemConfig,
    TransitionLadder, RB85_D2_GAMMA_MHZ,
};
use cqed_core::modes::{
    characteristic_polynomial, eigenmodes, mode_matrix, poly_roots, quartic_audit, branch_scan,
};
use cqed_core::response::{scan_spectrum, scan_susceptibility, susceptibility, transmission_amplitude, transmission_intensity};
use cqed_core::Execution;
use nalgebra::DVector;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn fail<E: std::fmt::Debug>(e: E) -> String {
    format!("{e:?}")
}

fn ladder(d23: f64, d34: f64) -> TransitionLadder {
    TransitionLadder::from_splittings(d23, d34, [1.0; 3]).unwrap()
}

fn spectrum(l: &TransitionLadder, g: &[f64], kappa: f64, dc: f64, grid: ScanGrid) -> cqed_core::response::Spectrum {
    let cfg = SystemConfig::new(
        l.clone(),
        CollectiveCoupling::new(g.to_vec()).unwrap(),
        CavityParams::new(kappa, dc, 1.0).unwrap(),
        grid,
    )
    .unwrap();
    scan_spectrum(&cfg).unwrap()
}

fn empty_cavity_lorentzian() -> Check {
    let (kappa, dc) = (2.0, 3.0);
    let grid = ScanGrid::new(-47.0, 53.0, 5001).unwrap();
    ensure(grid.step() <= kappa / 100.0, "grid too coarse")?;
    let s = spectrum(&ladder(5.0, 10.0), &[0.0; 3], kappa, dc, grid);
    let worst = s
        .dp
        .iter()
        .zip(&s.intensity)
        .map(|(x, y)| (y - kappa * kappa / (kappa * kappa + (dc - x) * (dc - x))).abs())
        .fold(0.0, f64::max);
    ensure(worst < 1e-12, format!("pointwise error {worst:e}"))?;
    let peaks = find_peaks(&s, DEFAULT_MIN_PROMINENCE);
    ensure(peaks.len() == 1, format!("{} peaks", peaks.len()))?;
    let p = peaks[0];
    ensure((p.height - 1.0).abs() < 1e-12, format!("peak height {}", p.height))?;
    ensure((p.position - dc).abs() < 1e-9, format!("peak at {}", p.position))?;
    let fwhm = full_width_half_max(&s.dp, &s.intensity, &p).ok_or("no FWHM")?;
    let rel = (fwhm - 2.0 * kappa).abs() / (2.0 * kappa);
    ensure(rel < 1e-3, format!("FWHM {fwhm}"))?;
    Ok(format!("max error {worst:.1e}, FWHM {fwhm:.6} (rel {rel:.1e})"))
}

fn two_level_splitting() -> Check {
    let s = spectrum(&ladder(5.0, 10.0), &[0.0, 0.0, 10.0], 2.0, 0.0, ScanGrid::new(-30.0, 30.0, 12001).unwrap());
    let peaks = find_peaks(&s, DEFAULT_MIN_PROMINENCE);
    ensure(peaks.len() == 2, format!("{} peaks", peaks.len()))?;
    let (lo, hi) = (peaks[0].position, peaks[1].position);
    ensure((lo + 10.0).abs() < 0.2 && (hi - 10.0).abs() < 0.2, format!("peaks at {lo}, {hi}"))?;
    // dense-scan oracle: maxima of the closed-form single-transition response
    let dense: Vec<f64> = (0..600_001).map(|i| -30.0 + 1e-4 * i as f64).collect();
    let t2 = |x: f64| {
        let den = Complex64::new(2.0, -x) + 100.0 / Complex64::new(0.5, -x);
        4.0 / den.norm_sqr()
    };
    let y: Vec<f64> = dense.iter().map(|&x| t2(x)).collect();
    let oracle = find_peaks_xy(&dense, &y, DEFAULT_MIN_PROMINENCE);
    ensure(oracle.len() == 2, "oracle peak count")?;
    let dev = (oracle[0].position - lo).abs().max((oracle[1].position - hi).abs());
    ensure(dev < 0.01, format!("oracle deviation {dev}"))?;
    Ok(format!("peaks at {lo:.3}, {hi:.3}"))
}

fn four_level_structure() -> Check {
    let l = ladder(5.0, 10.0);
    let grid = ScanGrid::new(-30.0, 20.0, 5001).unwrap();
    let mut counts = Vec::new();
    for dc in [0.0, -5.0, -10.0, -12.5] {
        for g in [2.3, 3.3, 4.3] {
            let s = spectrum(&l, &[g; 3], 2.0, dc, grid);
            let peaks = find_peaks(&s, DEFAULT_MIN_PROMINENCE);
            if g == 4.3 {
                ensure(peaks.len() == 4, format!("Δc={dc}: {} peaks at G=4.3", peaks.len()))?;
                counts.push(peaks.len());
            }
            if dc == -5.0 {
                let tallest = peaks.iter().max_by(|a, b| a.height.total_cmp(&b.height)).unwrap();
                let mid = -5.0;
                let nearest = peaks
                    .iter()
                    .min_by(|a, b| (a.position - mid).abs().total_cmp(&(b.position - mid).abs()))
                    .unwrap();
                ensure(
                    tallest.index == nearest.index,
                    format!("G={g}: tallest at {}, nearest-mid at {}", tallest.position, nearest.position),
                )?;
            }
        }
    }
    Ok(format!("G=4.3 peak counts {counts:?}; Δc=-5 tallest peak nearest midpoint for all G"))
}

fn peak_eigenvalue_consistency() -> Check {
    let l = ladder(5.0, 10.0);
    let c = CollectiveCoupling::uniform(4.3, 3).unwrap();
    let m = mode_matrix(&l, &c, 0.0).map_err(fail)?;
    let modes = eigenmodes(&m).map_err(fail)?;
    let sum: f64 = modes.eigenvalues.iter().sum();
    ensure((sum + 25.0).abs() < 1e-10, format!("trace {sum}"))?;
    for (got, want) in modes.eigenvalues.iter().zip([-16.5, -11.3, -2.7, 5.5]) {
        ensure((got - want).abs() < 0.05, format!("eigenvalue {got} vs ≈{want}"))?;
    }
    let s = spectrum(&l, &[4.3; 3], 2.0, 0.0, ScanGrid::new(-30.0, 20.0, 5001).unwrap());
    let peaks = find_peaks(&s, DEFAULT_MIN_PROMINENCE);
    ensure(peaks.len() == 4, format!("{} peaks", peaks.len()))?;
    let matching = match_peaks_to_modes(&peaks, &modes, 1.0);
    ensure(
        matching.pairs.len() == 4 && matching.unmatched_peaks.is_empty(),
        format!("{} pairs within 1Γ", matching.pairs.len()),
    )?;
    Ok(format!(
        "eigenvalues {:?}, max |peak − λ| {:.3}",
        modes.eigenvalues.iter().map(|x| (x * 1e3).round() / 1e3).collect::<Vec<_>>(),
        matching.max_residual()
    ))
}

fn quartic_audit_check() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let mut worst = 0.0f64;
    for draw in 0..100 {
        let g = rng.random_range(0.5..10.0);
        let delta = rng.random_range(0.5..10.0);
        let dc = rng.random_range(-30.0..30.0);
        // internal ladder: offsets (−6δ, −4δ, 0)
        let l = ladder(2.0 * delta, 4.0 * delta);
        let m = mode_matrix(&l, &CollectiveCoupling::uniform(g, 3).unwrap(), dc).map_err(fail)?;
        let eig = eigenmodes(&m).map_err(fail)?.eigenvalues;
        let mut roots = poly_roots(&characteristic_polynomial(&m)).map_err(fail)?;
        roots.sort_by(|a, b| a.re.total_cmp(&b.re));
        for (r, e) in roots.iter().zip(&eig) {
            worst = worst.max((r - e).norm());
        }
        let audit = quartic_audit(g, delta, dc).map_err(fail)?;
        ensure(
            audit.disagreeing_powers == vec![0, 3],
            format!("draw {draw}: disagreeing powers {:?}", audit.disagreeing_powers),
        )?;
        ensure(audit.expanded_root_error < 1e-9, format!("draw {draw}: audit root error {:e}", audit.expanded_root_error))?;
    }
    ensure(worst < 1e-9, format!("root/eigenvalue error {worst:e}"))?;
    for (g, delta, dc) in [(0.0, 0.0, -3.0), (0.0, 0.0, 7.5), (4.0, 0.0, -2.0), (1.5, 0.0, 0.0)] {
        let audit = quartic_audit(g, delta, dc).map_err(fail)?;
        ensure(audit.consistent(), format!("reduction G={g}, δ={delta}: {:?}", audit.disagreeing_powers))?;
    }
    Ok(format!("max root error {worst:.1e}; reference λ³ and λ⁰ terms differ; reductions agree"))
}

fn branch_behaviour() -> Check {
    let l = ladder(5.0, 10.0);
    let c = CollectiveCoupling::uniform(10.0, 3).unwrap();
    let dc: Vec<f64> = (0..=600).map(|i| -40.0 + 0.1 * i as f64).collect();
    let scan = branch_scan(&l, &c, &dc, Execution::default()).map_err(fail)?;
    for (s, &x) in dc.iter().enumerate() {
        let m = mode_matrix(&l, &c, x).map_err(fail)?;
        let roots = poly_roots(&characteristic_polynomial(&m)).map_err(fail)?;
        let imag = roots.iter().map(|r| r.im.abs()).fold(0.0, f64::max);
        ensure(imag < 1e-9, format!("Δc={x}: complex root, |Im| {imag:e}"))?;
        let ev = scan.sorted(s);
        let d = l.offsets();
        let interlaced = (0..d.len()).all(|k| ev[k] <= d[k] && d[k] <= ev[k + 1]);
        ensure(interlaced, format!("interlacing fails at Δc={x}"))?;
    }
    let gap = scan.min_adjacent_gap();
    ensure(gap > 0.0, format!("branches touch, gap {gap}"))?;
    let far = eigenmodes(&mode_matrix(&l, &c, -1000.0).map_err(fail)?).map_err(fail)?.eigenvalues;
    ensure((far[0] + 1000.0).abs() < 1.0, format!("cavity-like mode at {}", far[0]))?;
    for (e, o) in far[1..].iter().zip(l.offsets()) {
        ensure((e - o).abs() < 0.5, format!("atom-like mode {e} vs offset {o}"))?;
    }
    Ok(format!("{} samples, min adjacent gap {gap:.4}", dc.len()))
}

fn susceptibility_structure() -> Check {
    let l = ladder(5.0, 10.0);
    let c = CollectiveCoupling::uniform(4.5, 3).unwrap();
    let grid = ScanGrid::new(-30.0, 20.0, 10001).unwrap();
    let chi = scan_susceptibility(&l, &c, &grid, Execution::default()).map_err(fail)?;
    ensure(chi.iter().all(|(_, z)| z.im > 0.0), "Im χ not positive")?;
    let x: Vec<f64> = chi.iter().map(|p| p.0).collect();
    let im: Vec<f64> = chi.iter().map(|p| p.1.im).collect();
    let maxima = find_peaks_xy(&x, &im, 0.0);
    ensure(maxima.len() == 3, format!("{} maxima of Im χ", maxima.len()))?;
    for (p, o) in maxima.iter().zip(l.offsets()) {
        ensure((p.position - o).abs() < 0.2, format!("Im χ maximum {} vs offset {o}", p.position))?;
    }
    let crossings: Vec<f64> = chi
        .windows(2)
        .filter(|w| w[0].1.re.signum() != w[1].1.re.signum())
        .map(|w| 0.5 * (w[0].0 + w[1].0))
        .collect();
    for o in l.offsets() {
        ensure(crossings.iter().any(|z| (z - o).abs() <= 0.5), format!("no Re χ sign change near {o}"))?;
    }
    let at0 = susceptibility(&l, &c, 0.0);
    let oracle: Complex64 = [-15.0, -10.0, 0.0]
        .iter()
        .map(|&o: &f64| Complex64::new(0.0, 4.5 * 4.5) / Complex64::new(0.5, o))
        .sum();
    ensure((at0 - oracle).norm() < 1e-12, format!("χ(0) {at0} vs oracle {oracle}"))?;
    ensure(
        format!("{:.3}", at0.re) == "-3.368" && format!("{:.2}", at0.im) == "40.65",
        format!("χ(0) {at0}"),
    )?;
    Ok(format!("χ(0) = {:.4} + {:.4}i", at0.re, at0.im))
}

fn dynamics_oracle() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let (mut worst_int, mut worst_lu) = (0.0f64, 0.0f64);
    for _ in 0..20 {
        let gammas = [rng.random_range(0.5..2.0), rng.random_range(0.5..2.0), rng.random_range(0.5..2.0)];
        let l = TransitionLadder::from_splittings(rng.random_range(1.0..15.0), rng.random_range(1.0..15.0), gammas)
            .map_err(fail)?;
        let c = CollectiveCoupling::new((0..3).map(|_| rng.random_range(0.0..8.0)).collect()).map_err(fail)?;
        let cav = CavityParams::new(rng.random_range(0.5..4.0), rng.random_range(-15.0..10.0), rng.random_range(0.5..2.0))
            .map_err(fail)?;
        for _ in 0..5 {
            let dp = rng.random_range(-30.0..15.0);
            let sys = LinearSystem::from_parts(&l, &c, &cav, dp).map_err(fail)?;
            let exact = transmission_amplitude(&cav, susceptibility(&l, &c, dp), dp);
            let lu = sys.normalized_cavity(&steady_state(&sys).map_err(fail)?);
            worst_lu = worst_lu.max((lu - exact).norm() / exact.norm());
            let dt = (1.0 / sys.spectral_radius()).min(0.01);
            let traj = integrate(&sys, &DVector::zeros(sys.dim()), dt, 200.0).map_err(fail)?;
            let end = sys.normalized_cavity(traj.last().unwrap());
            worst_int = worst_int.max((end - exact).norm() / exact.norm());
        }
    }
    ensure(worst_int < 1e-6, format!("integrated vs closed form {worst_int:e}"))?;
    ensure(worst_lu < 1e-10, format!("linear solve vs closed form {worst_lu:e}"))?;
    Ok(format!("integration rel error {worst_int:.1e}, linear solve {worst_lu:.1e}"))
}

fn fit_round_trip() -> Check {
    let data: Vec<Observation> = (0..501).map(|i| Observation::new(-30.0 + 0.1 * i as f64, 0.0)).collect();
    let mut template = FitProblem::common_coupling(ladder(5.0, 10.0), data, 4.3, 2.0, -5.0);
    let truth = template.initial_values();
    template.data = synthetic_data(&template, &truth, 0.0, 0).map_err(fail)?;
    let free = |p: FitProblem| -> Result<FitProblem, String> {
        p.free(Parameter::CommonCoupling)
            .and_then(|p| p.free(Parameter::Kappa))
            .and_then(|p| p.free(Parameter::DeltaC))
            .map_err(fail)
    };
    let start = free(template.clone())?
        .value(Parameter::CommonCoupling, 3.9)
        .and_then(|p| p.value(Parameter::Kappa, 2.4))
        .and_then(|p| p.value(Parameter::DeltaC, -4.5))
        .map_err(fail)?;
    let res = fit_spectrum(&start).map_err(fail)?;
    ensure(res.converged, "noiseless fit did not converge")?;
    let rel = |id: Parameter, want: f64| (res.get(id).unwrap() - want).abs() / want.abs();
    let worst = rel(Parameter::CommonCoupling, 4.3)
        .max(rel(Parameter::Kappa, 2.0))
        .max(rel(Parameter::DeltaC, -5.0));
    ensure(worst < 1e-6, format!("noiseless relative error {worst:e}"))?;

    let noisy = free(template)?
        .value(Parameter::CommonCoupling, 4.0)
        .and_then(|p| p.value(Parameter::Kappa, 2.2))
        .and_then(|p| p.value(Parameter::DeltaC, -4.7))
        .map_err(fail)?;
    let seeds: Vec<u64> = (1..=50).collect();
    let runs = monte_carlo(&noisy, &truth, 0.01, &seeds, Execution::default()).map_err(fail)?;
    let good = runs
        .iter()
        .filter(|r| {
            (r.get(Parameter::CommonCoupling).unwrap() - 4.3).abs() / 4.3 < 0.05
                && (r.get(Parameter::DeltaC).unwrap() + 5.0).abs() < 0.5
        })
        .count();
    ensure(good >= 45, format!("{good}/50 noisy runs within tolerance"))?;
    Ok(format!("noiseless rel error {worst:.1e}; {good}/50 noisy runs within tolerance"))
}

fn rb85_preset_structure() -> Check {
    let to_gamma = |mhz: f64| convert(FrequencyQuantity::mhz(mhz), FrequencyUnit::Gamma, RB85_D2_GAMMA_MHZ).unwrap().value;
    let l = ladder(to_gamma(31.7), to_gamma(60.3));
    let kappa = to_gamma(10.0);
    let grid = ScanGrid::new(to_gamma(-200.0), to_gamma(100.0), 6001).unwrap();
    let sweep: Vec<f64> = (10..=60).map(f64::from).collect();
    let four: Vec<bool> = sweep
        .iter()
        .map(|&g| find_peaks(&spectrum(&l, &[to_gamma(g); 3], kappa, to_gamma(-31.7), grid), DEFAULT_MIN_PROMINENCE).len() == 4)
        .collect();
    let mut best = (0, 0);
    let mut start = None;
    for (k, &f) in four.iter().chain([false].iter()).enumerate() {
        match (f, start) {
            (true, None) => start = Some(k),
            (false, Some(s)) => {
                if k - s > best.1 - best.0 {
                    best = (s, k);
                }
                start = None;
            }
            _ => {}
        }
    }
    ensure(best.1 > best.0, "no G gives 4 resolved peaks at Δc = −31.7 MHz")?;
    let range = (sweep[best.0], sweep[best.1 - 1]);
    for &g in &sweep {
        let peaks = find_peaks(&spectrum(&l, &[to_gamma(g); 3], kappa, to_gamma(-78.1), grid), DEFAULT_MIN_PROMINENCE);
        ensure(peaks.len() >= 3, format!("G={g} MHz: {} peaks at Δc = −78.1 MHz", peaks.len()))?;
        let low = peaks[0].prominence + peaks[1].prominence;
        let high = peaks[peaks.len() - 1].prominence;
        ensure(low > high, format!("G={g} MHz: low pair {low:.3} vs highest {high:.3}"))?;
    }
    Ok(format!("4 peaks for G in [{}, {}] MHz; low-pair dominance holds over the sweep", range.0, range.1))
}

fn invariant_suites() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(29);
    let random_system = |rng: &mut ChaCha8Rng| {
        let gammas = [rng.random_range(0.2..3.0), rng.random_range(0.2..3.0), rng.random_range(0.2..3.0)];
        let l = TransitionLadder::from_splittings(rng.random_range(0.1..20.0), rng.random_range(0.1..20.0), gammas).unwrap();
        let c = CollectiveCoupling::new((0..3).map(|_| rng.random_range(0.01..15.0)).collect()).unwrap();
        let cav = CavityParams::new(rng.random_range(0.1..5.0), rng.random_range(-30.0..30.0), 1.0).unwrap();
        let dp = rng.random_range(-60.0..60.0);
        (l, c, cav, dp)
    };
    let mut violations = [0usize; 5];
    for _ in 0..1000 {
        let (l, c, cav, dp) = random_system(&mut rng);
        let chi = susceptibility(&l, &c, dp);
        if !(chi.im > 0.0) {
            violations[0] += 1;
        }
        let t = transmission_intensity(&cav, chi, dp);
        if !(t > 0.0 && t <= 1.0) {
            violations[1] += 1;
        }
    }
    for _ in 0..1000 {
        let (l, c, cav, dp) = random_system(&mut rng);
        let s = rng.random_range(-50.0..50.0);
        let moved = CavityParams::new(cav.kappa, cav.delta_c + s, 1.0).unwrap();
        let a = transmission_amplitude(&cav, susceptibility(&l, &c, dp), dp);
        let b = transmission_amplitude(&moved, susceptibility(&l.shifted(s), &c, dp + s), dp + s);
        if (a - b).norm() > 1e-9 * a.norm().max(1e-12) {
            violations[2] += 1;
        }
    }
    for _ in 0..1000 {
        let (l, c, cav, _) = random_system(&mut rng);
        let m = mode_matrix(&l, &c, cav.delta_c).unwrap();
        let ev = eigenmodes(&m).unwrap().eigenvalues;
        let d = l.offsets();
        if !(0..d.len()).all(|k| ev[k] <= d[k] && d[k] <= ev[k + 1]) {
            violations[3] += 1;
        }
        let scale = ev.iter().map(|x| x.abs()).fold(1.0, f64::max);
        let trace_err = (ev.iter().sum::<f64>() - m.trace()).abs();
        let product: f64 = ev.iter().product();
        let det_err = (product - m.determinant()).abs();
        if trace_err > 1e-10 * scale || det_err > 1e-9 * scale.powi(ev.len() as i32) {
            violations[4] += 1;
        }
    }
    let names = ["passivity", "boundedness", "translation", "interlacing", "trace/det"];
    let report: Vec<String> = names.iter().zip(violations).map(|(n, v)| format!("{n} {v}")).collect();
    ensure(violations.iter().all(|&v| v == 0), format!("violations: {}", report.join(", ")))?;
    Ok("1000 draws per suite, zero violations".into())
}

fn main() -> ExitCode {
    let criteria: [(&str, Duration, fn() -> Check); 11] = [
        ("1 empty-cavity Lorentzian", Duration::from_secs(1), empty_cavity_lorentzian),
        ("2 two-level vacuum Rabi splitting", Duration::from_secs(5), two_level_splitting),
        ("3 four-level spectrum structure", Duration::from_secs(5), four_level_structure),
        ("4 peak/eigenvalue consistency", Duration::from_secs(5), peak_eigenvalue_consistency),
        ("5 quartic audit", Duration::from_secs(1), quartic_audit_check),
        ("6 branch behaviour", Duration::from_secs(5), branch_behaviour),
        ("7 susceptibility structure", Duration::from_secs(5), susceptibility_structure),
        ("8 dynamics oracle", Duration::from_secs(10), dynamics_oracle),
        ("9 fit round trip", Duration::from_secs(60), fit_round_trip),
        ("10 rubidium preset structure", Duration::from_secs(30), rb85_preset_structure),
        ("11 invariant suites", Duration::from_secs(10), invariant_suites),
    ];
    let mut failed = 0;
    for (name, budget, run) in criteria {
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(run).unwrap_or_else(|_| Err("panicked".into()));
        let elapsed = start.elapsed();
        let outcome = match outcome {
            Ok(detail) if elapsed > budget => Err(format!("{detail}; took {elapsed:.2?} > {budget:?}")),
            other => other,
        };
        match outcome {
            Ok(detail) => println!("PASS  criterion {name}: {detail} [{elapsed:.2?}]"),
            Err(why) => {
                failed += 1;
                println!("FAIL  criterion {name}: {why} [{elapsed:.2?}]");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", 11 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
