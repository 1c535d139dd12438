//! Polariton (normal-mode) structure of the single-excitation manifold.
//!
//! In the symmetric Dicke basis {|atomic₁⟩ … |atomic_M⟩, |photon⟩} the
//! coupled system is a real symmetric arrowhead matrix: the atomic resonances
//! and the cavity detuning on the diagonal, the collective couplings Gᵢ on
//! the border linking every atomic state to the photonic hub.
//!
//! The diagonal uses the probe-detuning convention (atomic entries are the
//! ladder offsets, the hub is +Δc), so eigenvalues land on the same axis as
//! transmission peaks. The reference form of this matrix lists the negated
//! diagonal (0, 4δ, 6δ, −Δc); [`ModeMatrix::negated`] converts between the
//! two and the audit in [`quartic_audit`] works in the reference convention.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{CollectiveCoupling, TransitionLadder};
use crate::par::{self, Execution};

const MAX_BISECTION_STEPS: usize = 5000;

/// Real symmetric arrowhead matrix. The last row/column is the photonic hub.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeMatrix {
    diagonal: Vec<f64>,
    border: Vec<f64>,
}

impl ModeMatrix {
    /// `diagonal` has M+1 entries (leaves first, hub last); `border` has M.
    pub fn new(diagonal: Vec<f64>, border: Vec<f64>) -> Result<Self> {
        if diagonal.len() != border.len() + 1 {
            return Err(Error::validation(
                "diagonal",
                format!("expected {} entries, got {}", border.len() + 1, diagonal.len()),
            ));
        }
        if diagonal.iter().chain(&border).any(|x| !x.is_finite()) {
            return Err(Error::validation("mode matrix", "entries must be finite"));
        }
        Ok(Self { diagonal, border })
    }

    pub fn dim(&self) -> usize {
        self.diagonal.len()
    }

    pub fn diagonal(&self) -> &[f64] {
        &self.diagonal
    }

    pub fn border(&self) -> &[f64] {
        &self.border
    }

    pub fn leaves(&self) -> &[f64] {
        &self.diagonal[..self.border.len()]
    }

    pub fn hub(&self) -> f64 {
        self.diagonal[self.border.len()]
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.dim();
        let m = n - 1;
        let mut a = DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(&self.diagonal));
        for (i, &z) in self.border.iter().enumerate() {
            a[(i, m)] = z;
            a[(m, i)] = z;
        }
        a
    }

    pub fn trace(&self) -> f64 {
        self.diagonal.iter().sum()
    }

    /// det(A) = hub·Π dᵢ − Σ zᵢ² Π_{j≠i} dⱼ.
    pub fn determinant(&self) -> f64 {
        let leaves = self.leaves();
        let mut det = self.hub() * leaves.iter().product::<f64>();
        for (i, z) in self.border.iter().enumerate() {
            let rest: f64 = leaves
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(_, d)| d)
                .product();
            det -= z * z * rest;
        }
        det
    }

    /// The matrix with its diagonal negated: the reference sign convention.
    /// Border entries are kept, which leaves the spectrum exactly negated.
    pub fn negated(&self) -> Self {
        Self {
            diagonal: self.diagonal.iter().map(|d| -d).collect(),
            border: self.border.clone(),
        }
    }
}

/// Mode matrix for the given ladder and couplings at cavity detuning `delta_c`.
pub fn mode_matrix(ladder: &TransitionLadder, coupling: &CollectiveCoupling, delta_c: f64) -> Result<ModeMatrix> {
    coupling.check_matches(ladder)?;
    let mut diagonal = ladder.offsets().to_vec();
    diagonal.push(delta_c);
    ModeMatrix::new(diagonal, coupling.strengths().to_vec())
}

/// Eigen-decomposition of a [`ModeMatrix`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolaritonModes {
    /// Ascending.
    pub eigenvalues: Vec<f64>,
    /// Row k is the unit eigenvector of `eigenvalues[k]` over
    /// [atomic₁ … atomic_M, photon].
    pub vectors: Vec<Vec<f64>>,
}

impl PolaritonModes {
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    /// Squared eigenvector components; each row sums to one.
    pub fn weights(&self) -> Vec<Vec<f64>> {
        self.vectors
            .iter()
            .map(|v| v.iter().map(|x| x * x).collect())
            .collect()
    }

    /// Photon content of each mode.
    pub fn photonic_fraction(&self) -> Vec<f64> {
        self.vectors
            .iter()
            .map(|v| {
                let h = v[v.len() - 1];
                h * h
            })
            .collect()
    }
}

/// A pole of the deflated secular equation: a distinct leaf value with the
/// combined border weight of every leaf sharing it.
struct Pole {
    value: f64,
    weight: f64,
    /// (original leaf index, component of the unit border direction).
    members: Vec<(usize, f64)>,
}

/// A root of the secular equation stored as `poles[origin].value + shift`,
/// which keeps λ − dⱼ accurate when λ sits next to a pole.
#[derive(Clone, Copy)]
struct Root {
    origin: usize,
    shift: f64,
}

/// Full eigen-decomposition of the arrowhead matrix.
///
/// Leaves with negligible coupling and groups of equal leaves are deflated
/// analytically. The remaining eigenvalues are the roots of
///
/// ```text
/// f(λ) = hub − λ − Σⱼ ζⱼ² / (dⱼ − λ)
/// ```
///
/// one per interlacing interval, found by bisection on the offset from the
/// nearer pole. Eigenvectors are formed from border weights recomputed from
/// the converged roots so that they stay orthogonal when roots crowd a pole.
pub fn eigenmodes(matrix: &ModeMatrix) -> Result<PolaritonModes> {
    let n = matrix.dim();
    let m = n - 1;
    let leaves = matrix.leaves();
    let hub = matrix.hub();
    let border_norm = matrix.border.iter().map(|z| z * z).sum::<f64>().sqrt();
    let scale = matrix
        .diagonal
        .iter()
        .fold(border_norm, |acc, d| acc.max(d.abs()))
        .max(f64::MIN_POSITIVE);
    let tol = 8.0 * f64::EPSILON * scale;

    let unit = |i: usize| {
        let mut v = vec![0.0; n];
        v[i] = 1.0;
        v
    };

    let mut pairs: Vec<(f64, Vec<f64>)> = Vec::with_capacity(n);

    // decoupled leaves
    let mut active: Vec<usize> = Vec::with_capacity(m);
    for i in 0..m {
        if matrix.border[i].abs() <= tol {
            pairs.push((leaves[i], unit(i)));
        } else {
            active.push(i);
        }
    }
    active.sort_by(|&a, &b| leaves[a].total_cmp(&leaves[b]));

    // merge equal leaves into one pole each
    let mut poles: Vec<Pole> = Vec::new();
    let mut start = 0;
    while start < active.len() {
        let mut end = start + 1;
        while end < active.len() && leaves[active[end]] - leaves[active[start]] <= tol {
            end += 1;
        }
        let group = &active[start..end];
        let weight = group
            .iter()
            .map(|&i| matrix.border[i] * matrix.border[i])
            .sum::<f64>()
            .sqrt();
        let value = group.iter().map(|&i| leaves[i]).sum::<f64>() / group.len() as f64;
        let members: Vec<(usize, f64)> = group.iter().map(|&i| (i, matrix.border[i] / weight)).collect();
        if group.len() > 1 {
            for v in degenerate_complement(&members, n) {
                pairs.push((value, v));
            }
        }
        poles.push(Pole {
            value,
            weight,
            members,
        });
        start = end;
    }

    if poles.is_empty() {
        pairs.push((hub, unit(m)));
    } else {
        let roots = secular_roots(&poles, hub, border_norm)?;
        let weights = recomputed_weights(&poles, &roots);
        for root in &roots {
            let lambda = poles[root.origin].value + root.shift;
            let mut v = vec![0.0; n];
            v[m] = 1.0;
            for (j, pole) in poles.iter().enumerate() {
                let gap = (poles[root.origin].value - pole.value) + root.shift;
                let x = weights[j] / gap;
                for &(i, u) in &pole.members {
                    v[i] = x * u;
                }
            }
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if !(norm.is_finite() && norm > 0.0) {
                return Err(Error::numerical(format!("degenerate eigenvector at λ = {lambda}")));
            }
            v.iter_mut().for_each(|x| *x /= norm);
            pairs.push((lambda, v));
        }
    }

    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let (eigenvalues, vectors) = pairs.into_iter().unzip();
    Ok(PolaritonModes { eigenvalues, vectors })
}

/// Orthonormal vectors spanning the part of a degenerate leaf group that is
/// orthogonal to its border direction. These are exact eigenvectors with the
/// shared leaf value as eigenvalue.
fn degenerate_complement(members: &[(usize, f64)], n: usize) -> Vec<Vec<f64>> {
    let pivot = members
        .iter()
        .enumerate()
        .max_by(|a, b| a.1 .1.abs().total_cmp(&b.1 .1.abs()))
        .map(|(k, _)| k)
        .unwrap_or(0);
    let mut basis: Vec<Vec<f64>> = vec![{
        let mut u = vec![0.0; n];
        for &(i, c) in members {
            u[i] = c;
        }
        u
    }];
    let mut out = Vec::with_capacity(members.len() - 1);
    for (k, &(i, _)) in members.iter().enumerate() {
        if k == pivot {
            continue;
        }
        let mut v = vec![0.0; n];
        v[i] = 1.0;
        // two passes of modified Gram-Schmidt
        for _ in 0..2 {
            for b in &basis {
                let dot: f64 = v.iter().zip(b).map(|(x, y)| x * y).sum();
                v.iter_mut().zip(b).for_each(|(x, y)| *x -= dot * y);
            }
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        v.iter_mut().for_each(|x| *x /= norm);
        basis.push(v.clone());
        out.push(v);
    }
    out
}

/// Secular function in a frame shifted to `origin`: `deltas[j] = dⱼ − origin`.
fn secular(deltas: &[f64], weights: &[f64], hub_shifted: f64, mu: f64) -> f64 {
    let sum: f64 = deltas
        .iter()
        .zip(weights)
        .map(|(d, w)| w * w / (d - mu))
        .sum();
    hub_shifted - mu - sum
}

fn secular_roots(poles: &[Pole], hub: f64, border_norm: f64) -> Result<Vec<Root>> {
    let r = poles.len();
    let weights: Vec<f64> = poles.iter().map(|p| p.weight).collect();
    let lowest = poles[0].value.min(hub);
    let highest = poles[r - 1].value.max(hub);
    let margin = 2.0 * border_norm + f64::EPSILON * lowest.abs().max(highest.abs());

    let mut roots = Vec::with_capacity(r + 1);
    for k in 0..=r {
        let (origin, lo, hi) = if k == 0 {
            (0, lowest - margin - poles[0].value, 0.0)
        } else if k == r {
            (r - 1, 0.0, highest + margin - poles[r - 1].value)
        } else {
            let left = poles[k - 1].value;
            let right = poles[k].value;
            let mid = 0.5 * (left + right);
            let deltas: Vec<f64> = poles.iter().map(|p| p.value - left).collect();
            if secular(&deltas, &weights, hub - left, mid - left) >= 0.0 {
                (k, mid - right, 0.0)
            } else {
                (k - 1, 0.0, mid - left)
            }
        };
        let o = poles[origin].value;
        let deltas: Vec<f64> = poles.iter().map(|p| p.value - o).collect();
        let shift = bisect(|mu| secular(&deltas, &weights, hub - o, mu), lo, hi)?;
        roots.push(Root { origin, shift });
    }
    Ok(roots)
}

/// Root of a decreasing function on the open interval (lo, hi), refined until
/// the bracket cannot be split further in floating point.
fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> Result<f64> {
    for _ in 0..MAX_BISECTION_STEPS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            return Ok(mid);
        }
        let v = f(mid);
        if v > 0.0 {
            lo = mid;
        } else if v < 0.0 {
            hi = mid;
        } else {
            return Ok(mid);
        }
        if v.is_nan() {
            return Err(Error::numerical("secular function evaluated to NaN"));
        }
    }
    Err(Error::numerical(format!(
        "secular bisection did not converge on ({lo}, {hi})"
    )))
}

/// Border weights consistent with the computed roots:
/// ζ̂ⱼ² = −Πₖ(λₖ − dⱼ) / Π_{i≠j}(dᵢ − dⱼ).
fn recomputed_weights(poles: &[Pole], roots: &[Root]) -> Vec<f64> {
    poles
        .iter()
        .enumerate()
        .map(|(j, pole)| {
            let gap = |root: &Root| (poles[root.origin].value - pole.value) + root.shift;
            let others: Vec<f64> = poles
                .iter()
                .enumerate()
                .filter(|&(i, _)| i != j)
                .map(|(_, p)| p.value - pole.value)
                .collect();
            // interleave numerator and denominator factors to stay in range
            let mut prod = -1.0;
            for (k, root) in roots.iter().enumerate() {
                prod *= gap(root);
                if let Some(d) = others.get(k) {
                    prod /= d;
                }
            }
            if prod > 0.0 && prod.is_finite() {
                prod.sqrt()
            } else {
                pole.weight
            }
        })
        .collect()
}

/// Monic characteristic polynomial det(λI − A), coefficients in ascending
/// powers of λ:
///
/// ```text
/// det(λI − A) = (λ − hub)·Πᵢ(λ − dᵢ) − Σᵢ zᵢ²·Π_{j≠i}(λ − dⱼ)
/// ```
///
/// This is (−1)^{M+1}·det(A − λI).
pub fn characteristic_polynomial(matrix: &ModeMatrix) -> Vec<f64> {
    let leaves = matrix.leaves();
    let all_leaves = leaves.iter().fold(vec![1.0], |p, &d| mul_linear(&p, d));
    let mut coeffs = mul_linear(&all_leaves, matrix.hub());
    for (i, z) in matrix.border.iter().enumerate() {
        let rest = leaves
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != i)
            .fold(vec![1.0], |p, (_, &d)| mul_linear(&p, d));
        for (c, r) in coeffs.iter_mut().zip(&rest) {
            *c -= z * z * r;
        }
    }
    coeffs
}

/// p(λ)·(λ − root), ascending coefficients.
fn mul_linear(p: &[f64], root: f64) -> Vec<f64> {
    let mut out = vec![0.0; p.len() + 1];
    for (k, &c) in p.iter().enumerate() {
        out[k + 1] += c;
        out[k] -= root * c;
    }
    out
}

/// Evaluate ascending coefficients at `z` by Horner's rule.
pub fn poly_eval(coeffs: &[f64], z: Complex64) -> Complex64 {
    coeffs
        .iter()
        .rev()
        .fold(Complex64::new(0.0, 0.0), |acc, &c| acc * z + c)
}

fn poly_eval_with_derivative(coeffs: &[f64], z: Complex64) -> (Complex64, Complex64) {
    let zero = Complex64::new(0.0, 0.0);
    coeffs.iter().rev().fold((zero, zero), |(p, dp), &c| (p * z + c, dp * z + p))
}

/// All complex roots of the polynomial with ascending `coeffs`, from the
/// eigenvalues of its companion matrix followed by a few Newton polishing
/// steps. Sorted by real part, then imaginary part.
pub fn poly_roots(coeffs: &[f64]) -> Result<Vec<Complex64>> {
    let lead = *coeffs
        .last()
        .ok_or_else(|| Error::validation("coefficients", "empty polynomial"))?;
    if lead == 0.0 || !lead.is_finite() {
        return Err(Error::validation("coefficients", "leading coefficient must be nonzero"));
    }
    if coeffs.iter().any(|c| !c.is_finite()) {
        return Err(Error::validation("coefficients", "entries must be finite"));
    }
    let degree = coeffs.len() - 1;
    if degree == 0 {
        return Ok(Vec::new());
    }

    let mut companion = DMatrix::<f64>::zeros(degree, degree);
    for k in 0..degree {
        companion[(0, k)] = -coeffs[degree - 1 - k] / lead;
    }
    for k in 1..degree {
        companion[(k, k - 1)] = 1.0;
    }
    let mut roots: Vec<Complex64> = companion.complex_eigenvalues().iter().copied().collect();

    for z in roots.iter_mut() {
        let mut residual = poly_eval(coeffs, *z).norm();
        for _ in 0..8 {
            let (p, dp) = poly_eval_with_derivative(coeffs, *z);
            if dp.norm() == 0.0 || residual == 0.0 {
                break;
            }
            let candidate = *z - p / dp;
            let r = poly_eval(coeffs, candidate).norm();
            if r < residual {
                *z = candidate;
                residual = r;
            } else {
                break;
            }
        }
    }
    roots.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    Ok(roots)
}

/// The reference quartic for three equally coupled transitions
/// with δ₂₃ = 2δ and δ₃₄ = 4δ, ascending:
///
/// ```text
/// λ⁴ + (Δc + 10δ)λ³ + (24δ² − 3G² − 10δΔc)λ² + (20δG² + 24δ²Δc)λ + 24G²δ²
/// ```
///
/// Kept verbatim for the audit; it is not the determinant of the mode matrix.
pub fn reference_quartic(g: f64, delta: f64, delta_c: f64) -> [f64; 5] {
    let g2 = g * g;
    let d2 = delta * delta;
    [
        24.0 * g2 * d2,
        20.0 * delta * g2 + 24.0 * d2 * delta_c,
        24.0 * d2 - 3.0 * g2 - 10.0 * delta * delta_c,
        delta_c + 10.0 * delta,
        1.0,
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientCheck {
    pub power: usize,
    pub reference: f64,
    pub expanded: f64,
    pub agrees: bool,
}

/// Comparison of the reference quartic against the expanded determinant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuarticAudit {
    pub g: f64,
    pub delta: f64,
    pub delta_c: f64,
    /// Always "reference": diagonal (0, 4δ, 6δ, −Δc).
    pub convention: String,
    pub coefficients: Vec<CoefficientCheck>,
    /// Powers of λ whose coefficients disagree.
    pub disagreeing_powers: Vec<usize>,
    /// Eigenvalues of the reference-convention matrix, ascending.
    pub eigenvalues: Vec<f64>,
    /// Roots of the expanded determinant, as (re, im).
    pub expanded_roots: Vec<(f64, f64)>,
    /// Roots of the reference quartic, as (re, im).
    pub reference_roots: Vec<(f64, f64)>,
    /// max |expanded root − eigenvalue|.
    pub expanded_root_error: f64,
    /// Distance from each eigenvalue to the nearest reference root.
    pub reference_root_error: f64,
}

impl QuarticAudit {
    pub fn consistent(&self) -> bool {
        self.disagreeing_powers.is_empty()
    }
}

/// Audit the reference quartic at (G, δ, Δc) against det(λI − B), where B is
/// the reference-convention mode matrix with diagonal (0, 4δ, 6δ, −Δc).
pub fn quartic_audit(g: f64, delta: f64, delta_c: f64) -> Result<QuarticAudit> {
    for (name, v) in [("g", g), ("delta", delta), ("delta_c", delta_c)] {
        if !v.is_finite() {
            return Err(Error::validation(name, "must be finite"));
        }
    }
    let internal = ModeMatrix::new(vec![-6.0 * delta, -4.0 * delta, 0.0, delta_c], vec![g; 3])?;
    let flipped = internal.negated();
    let expanded = characteristic_polynomial(&flipped);
    let reference = reference_quartic(g, delta, delta_c);
    let scale = expanded
        .iter()
        .chain(reference.iter())
        .fold(1.0_f64, |acc, c| acc.max(c.abs()));

    let coefficients: Vec<CoefficientCheck> = (0..5)
        .map(|k| CoefficientCheck {
            power: k,
            reference: reference[k],
            expanded: expanded[k],
            agrees: (reference[k] - expanded[k]).abs() <= 1e-12 * scale,
        })
        .collect();
    let disagreeing_powers = coefficients.iter().filter(|c| !c.agrees).map(|c| c.power).collect();

    let eigenvalues = eigenmodes(&flipped)?.eigenvalues;
    let expanded_roots = poly_roots(&expanded)?;
    let reference_roots = poly_roots(&reference)?;
    let nearest = |roots: &[Complex64], x: f64| {
        roots
            .iter()
            .map(|r| (r - x).norm())
            .fold(f64::INFINITY, f64::min)
    };
    let expanded_root_error = eigenvalues
        .iter()
        .zip(&expanded_roots)
        .map(|(l, r)| (r - l).norm())
        .fold(0.0, f64::max);
    let reference_root_error = eigenvalues
        .iter()
        .map(|&l| nearest(&reference_roots, l))
        .fold(0.0, f64::max);

    Ok(QuarticAudit {
        g,
        delta,
        delta_c,
        convention: "reference".into(),
        coefficients,
        disagreeing_powers,
        eigenvalues,
        expanded_roots: expanded_roots.iter().map(|z| (z.re, z.im)).collect(),
        reference_roots: reference_roots.iter().map(|z| (z.re, z.im)).collect(),
        expanded_root_error,
        reference_root_error,
    })
}

/// Eigenvalues tracked over a sequence of cavity detunings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchScan {
    pub delta_c: Vec<f64>,
    pub modes: Vec<PolaritonModes>,
    /// `branches[s][b]`: value of continuity branch b at sample s.
    pub branches: Vec<Vec<f64>>,
}

impl BranchScan {
    /// Ascending eigenvalues at sample `s`.
    pub fn sorted(&self, s: usize) -> &[f64] {
        &self.modes[s].eigenvalues
    }

    pub fn branch(&self, b: usize) -> Vec<f64> {
        self.branches.iter().map(|row| row[b]).collect()
    }

    /// Smallest gap between adjacent sorted eigenvalues over the whole scan.
    pub fn min_adjacent_gap(&self) -> f64 {
        self.modes
            .iter()
            .flat_map(|m| m.eigenvalues.windows(2).map(|w| w[1] - w[0]))
            .fold(f64::INFINITY, f64::min)
    }
}

const MAX_REFINE_DEPTH: usize = 8;

/// Mode structure at each Δc in `dc_values` (strictly increasing), with
/// branches labelled by continuity.
///
/// Each branch is extrapolated linearly from its last two samples and the new
/// eigenvalues are matched to the predictions in sorted order, which is the
/// minimum total-distance assignment on a line. When two predictions come
/// within ten times the prediction error of each other the step is halved.
pub fn branch_scan(
    ladder: &TransitionLadder,
    coupling: &CollectiveCoupling,
    dc_values: &[f64],
    exec: Execution,
) -> Result<BranchScan> {
    coupling.check_matches(ladder)?;
    if dc_values.iter().any(|x| !x.is_finite()) {
        return Err(Error::validation("dc_values", "entries must be finite"));
    }
    if dc_values.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::validation("dc_values", "must be strictly increasing"));
    }
    let solve = |dc: f64| mode_matrix(ladder, coupling, dc).and_then(|m| eigenmodes(&m));
    let modes: Vec<PolaritonModes> = par::map_slice(dc_values, exec, |&dc| solve(dc))
        .into_iter()
        .collect::<Result<_>>()?;

    let mut branches: Vec<Vec<f64>> = Vec::with_capacity(dc_values.len());
    let mut history: Option<(f64, Vec<f64>)> = None;
    for (s, &dc) in dc_values.iter().enumerate() {
        let row = match s {
            0 => modes[0].eigenvalues.clone(),
            _ => {
                let prev = (dc_values[s - 1], branches[s - 1].clone());
                let (row, hist) = track(&solve, history.as_ref(), &prev, dc, &modes[s].eigenvalues, 0)?;
                history = Some(hist);
                row
            }
        };
        branches.push(row);
    }

    Ok(BranchScan {
        delta_c: dc_values.to_vec(),
        modes,
        branches,
    })
}

/// Assign `sorted` eigenvalues at `dc` to branches continuing from `prev`
/// (and `older`, if available). Returns the labelled row and the sample that
/// should serve as history for the next step.
fn track(
    solve: &dyn Fn(f64) -> Result<PolaritonModes>,
    older: Option<&(f64, Vec<f64>)>,
    prev: &(f64, Vec<f64>),
    dc: f64,
    sorted: &[f64],
    depth: usize,
) -> Result<(Vec<f64>, (f64, Vec<f64>))> {
    let (prev_dc, prev_row) = prev;
    let predicted: Vec<f64> = match older {
        Some((old_dc, old_row)) => prev_row
            .iter()
            .zip(old_row)
            .map(|(p, o)| p + (p - o) * (dc - prev_dc) / (prev_dc - old_dc))
            .collect(),
        None => prev_row.clone(),
    };
    let mut order: Vec<usize> = (0..predicted.len()).collect();
    order.sort_by(|&a, &b| predicted[a].total_cmp(&predicted[b]));
    let mut row = vec![0.0; predicted.len()];
    for (rank, &b) in order.iter().enumerate() {
        row[b] = sorted[rank];
    }

    let error = row
        .iter()
        .zip(&predicted)
        .map(|(a, p)| (a - p).abs())
        .fold(0.0, f64::max);
    let floor = 1e-12 * predicted.iter().fold(1.0_f64, |a, p| a.max(p.abs()));
    let crowded = error > floor
        && order
            .windows(2)
            .any(|w| predicted[w[1]] - predicted[w[0]] < 10.0 * error);
    if crowded && depth < MAX_REFINE_DEPTH {
        let mid_dc = 0.5 * (prev_dc + dc);
        let mid_sorted = solve(mid_dc)?.eigenvalues;
        let (mid_row, _) = track(solve, older, prev, mid_dc, &mid_sorted, depth + 1)?;
        let mid = (mid_dc, mid_row);
        return track(solve, Some(prev), &mid, dc, sorted, depth + 1);
    }
    Ok((row, prev.clone()))
}
