//! Spectrum post-processing: peaks, peak/mode pairing and distances.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::modes::PolaritonModes;
use crate::response::Spectrum;

/// Default prominence threshold, in normalized intensity.
pub const DEFAULT_MIN_PROMINENCE: f64 = 0.005;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Peak {
    /// Sub-grid position from a parabola through the maximum and its neighbours.
    pub position: f64,
    /// Sampled value at the discrete maximum.
    pub height: f64,
    pub prominence: f64,
    /// Grid index of the discrete maximum.
    pub index: usize,
}

/// Peaks of a transmission spectrum; see [`find_peaks_xy`].
pub fn find_peaks(spectrum: &Spectrum, min_prominence: f64) -> Vec<Peak> {
    find_peaks_xy(&spectrum.dp, &spectrum.intensity, min_prominence)
}

/// Strict local maxima of `y(x)` whose prominence is at least
/// `min_prominence`, sorted by position.
///
/// Prominence is the height above the higher of the two bounding minima,
/// where each minimum is taken between the peak and the nearest strictly
/// higher sample on that side (or the end of the window).
pub fn find_peaks_xy(x: &[f64], y: &[f64], min_prominence: f64) -> Vec<Peak> {
    let n = x.len().min(y.len());
    if n < 3 {
        return Vec::new();
    }
    let mut peaks = Vec::new();
    for i in 1..n - 1 {
        if !(y[i] > y[i - 1] && y[i] > y[i + 1]) {
            continue;
        }
        let mut left_min = y[i];
        for j in (0..i).rev() {
            if y[j] > y[i] {
                break;
            }
            left_min = left_min.min(y[j]);
        }
        let mut right_min = y[i];
        for &v in &y[i + 1..n] {
            if v > y[i] {
                break;
            }
            right_min = right_min.min(v);
        }
        let prominence = y[i] - left_min.max(right_min);
        if prominence >= min_prominence {
            peaks.push(Peak {
                position: parabolic_vertex(&x[i - 1..=i + 1], &y[i - 1..=i + 1]),
                height: y[i],
                prominence,
                index: i,
            });
        }
    }
    peaks
}

/// Abscissa of the vertex of the parabola through three points; falls back
/// to the middle point if the three are collinear.
fn parabolic_vertex(x: &[f64], y: &[f64]) -> f64 {
    let (x0, x1, x2) = (x[0], x[1], x[2]);
    let (y0, y1, y2) = (y[0], y[1], y[2]);
    let d0 = (y1 - y0) / (x1 - x0);
    let d1 = (y2 - y1) / (x2 - x1);
    let curvature = (d1 - d0) / (x2 - x0);
    if curvature >= 0.0 || !curvature.is_finite() {
        return x1;
    }
    // p(t) = y0 + d0 (t − x0) + c (t − x0)(t − x1); p'(t) = 0
    let vertex = 0.5 * (x0 + x1) - d0 / (2.0 * curvature);
    vertex.clamp(x0, x2)
}

/// Full width at half of `peak.height`, from linear interpolation of the
/// nearest half-height crossings on either side. `None` if a side never
/// drops below half height inside the window.
pub fn full_width_half_max(x: &[f64], y: &[f64], peak: &Peak) -> Option<f64> {
    let half = 0.5 * peak.height;
    let i = peak.index;
    let cross = |a: usize, b: usize| x[a] + (half - y[a]) * (x[b] - x[a]) / (y[b] - y[a]);
    let left = (1..=i).rev().find(|&j| y[j - 1] < half).map(|j| cross(j - 1, j))?;
    let right = (i..y.len() - 1).find(|&j| y[j + 1] < half).map(|j| cross(j, j + 1))?;
    Some(right - left)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeakModePair {
    pub peak: usize,
    pub mode: usize,
    pub peak_position: f64,
    pub eigenvalue: f64,
    /// peak_position − eigenvalue.
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeakModeMatching {
    pub pairs: Vec<PeakModePair>,
    pub unmatched_peaks: Vec<usize>,
    pub unmatched_modes: Vec<usize>,
}

impl PeakModeMatching {
    pub fn max_residual(&self) -> f64 {
        self.pairs.iter().map(|p| p.residual.abs()).fold(0.0, f64::max)
    }
}

/// One-to-one pairing of peak positions with mode eigenvalues.
///
/// Pairs as many items as the smaller set allows with the minimum total
/// absolute distance; pairs further apart than `tol` are then dropped and
/// both members reported as unmatched.
pub fn match_peaks_to_modes(peaks: &[Peak], modes: &PolaritonModes, tol: f64) -> PeakModeMatching {
    let positions: Vec<f64> = peaks.iter().map(|p| p.position).collect();
    let assignment = min_cost_assignment(&positions, &modes.eigenvalues);
    let mut matched_peaks = vec![false; peaks.len()];
    let mut matched_modes = vec![false; modes.len()];
    let mut pairs = Vec::new();
    for (p, m) in assignment {
        let residual = positions[p] - modes.eigenvalues[m];
        if residual.abs() <= tol {
            matched_peaks[p] = true;
            matched_modes[m] = true;
            pairs.push(PeakModePair {
                peak: p,
                mode: m,
                peak_position: positions[p],
                eigenvalue: modes.eigenvalues[m],
                residual,
            });
        }
    }
    let unmatched = |flags: &[bool]| flags.iter().enumerate().filter(|(_, &f)| !f).map(|(i, _)| i).collect();
    PeakModeMatching {
        unmatched_peaks: unmatched(&matched_peaks),
        unmatched_modes: unmatched(&matched_modes),
        pairs,
    }
}

/// Minimum-total-|a − b| matching of min(|a|, |b|) pairs between two point
/// sets on a line. Some optimal matching is non-crossing once both sides are
/// sorted, so a dynamic program over sorted prefixes finds it.
pub(crate) fn min_cost_assignment(a: &[f64], b: &[f64]) -> Vec<(usize, usize)> {
    let swap = a.len() > b.len();
    let (small, large) = if swap { (b, a) } else { (a, b) };
    let mut si: Vec<usize> = (0..small.len()).collect();
    let mut li: Vec<usize> = (0..large.len()).collect();
    si.sort_by(|&i, &j| small[i].total_cmp(&small[j]));
    li.sort_by(|&i, &j| large[i].total_cmp(&large[j]));
    let (n, m) = (small.len(), large.len());

    // cost[i][j]: best cost matching the first i small items into the first j large items
    let mut cost = vec![vec![f64::INFINITY; m + 1]; n + 1];
    cost[0].iter_mut().for_each(|c| *c = 0.0);
    for i in 1..=n {
        for j in i..=m {
            let skip = cost[i][j - 1];
            let take = cost[i - 1][j - 1] + (small[si[i - 1]] - large[li[j - 1]]).abs();
            cost[i][j] = skip.min(take);
        }
    }
    let mut out = Vec::with_capacity(n);
    let (mut i, mut j) = (n, m);
    while i > 0 {
        let take = cost[i - 1][j - 1] + (small[si[i - 1]] - large[li[j - 1]]).abs();
        if j > i && cost[i][j - 1] <= take {
            j -= 1;
        } else {
            out.push(if swap { (li[j - 1], si[i - 1]) } else { (si[i - 1], li[j - 1]) });
            i -= 1;
            j -= 1;
        }
    }
    out.reverse();
    out
}

/// Root-mean-square intensity difference between two spectra on the same grid.
pub fn spectrum_distance(a: &Spectrum, b: &Spectrum) -> Result<f64> {
    if a.len() != b.len() || a.is_empty() {
        return Err(Error::validation("spectrum", "grids differ in length or are empty"));
    }
    for (x, y) in a.dp.iter().zip(&b.dp) {
        if (x - y).abs() > 1e-12 * x.abs().max(y.abs()).max(1.0) {
            return Err(Error::validation("spectrum", format!("grid mismatch at dp = {x}")));
        }
    }
    let sum: f64 = a
        .intensity
        .iter()
        .zip(&b.intensity)
        .map(|(p, q)| (p - q) * (p - q))
        .sum();
    Ok((sum / a.len() as f64).sqrt())
}
