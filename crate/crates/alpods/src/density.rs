//! One-dimensional class-conditional density estimation, Bayes posterior
//! curves, decision regions and 2-D smoothed data histograms.
//!
//! Densities are Gaussian kernel estimates with Silverman bandwidth, computed
//! on a fixed grid via linear binning followed by a discrete convolution, so
//! cost is O(n + g·k) rather than O(n·g) and the result is deterministic.

use serde::{Deserialize, Serialize};

use crate::error::{AlpodsError, Result};

pub const DEFAULT_GRID_POINTS: usize = 256;

/// Floor under the mixture denominator when forming posteriors.
const DENOMINATOR_FLOOR: f64 = 1e-12;

/// A 1-D density sampled on a strictly increasing grid, trapezoid-normalized.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DensityGrid {
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
}

impl DensityGrid {
    pub fn trapezoid_integral(&self) -> f64 {
        trapezoid(&self.grid, &self.values)
    }
}

/// Per-class Bayes posteriors on a shared grid.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PosteriorCurves {
    pub grid: Vec<f64>,
    /// posteriors[c][i] for class c at grid point i
    pub posteriors: Vec<Vec<f64>>,
    pub priors: Vec<f64>,
}

/// A maximal interval where one class strictly dominates the posterior.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DecisionRegion {
    pub lower: f64,
    pub upper: f64,
    pub winner: usize,
    pub mean_margin: f64,
    pub support: f64,
}

/// A smoothed 2-D histogram; weights sum to 1.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DensityGrid2D {
    pub x_centers: Vec<f64>,
    pub y_centers: Vec<f64>,
    /// row-major: weights[iy * nx + ix]
    pub weights: Vec<f64>,
}

fn trapezoid(grid: &[f64], values: &[f64]) -> f64 {
    let mut s = 0.0;
    for i in 1..grid.len() {
        s += 0.5 * (values[i] + values[i - 1]) * (grid[i] - grid[i - 1]);
    }
    s
}

fn mean_and_sd(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

fn percentile_sorted(sorted: &[f64], p: f64) -> f64 {
    // linear interpolation between closest ranks (R type 7)
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = p * (n - 1) as f64;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Silverman's rule-of-thumb bandwidth. Returns 0 for degenerate input.
pub fn silverman_bandwidth(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let (_, sd) = mean_and_sd(values);
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let iqr = percentile_sorted(&sorted, 0.75) - percentile_sorted(&sorted, 0.25);
    let spread = if iqr > 0.0 { sd.min(iqr / 1.34) } else { sd };
    0.9 * spread * n.powf(-0.2)
}

/// Evaluate a Gaussian KDE of `values` on an arbitrary fixed grid.
///
/// `bandwidth <= 0` falls back to a narrow spike bandwidth derived from the
/// grid spacing. Not normalized; callers integrate or normalize as needed.
pub fn kde_on_grid(values: &[f64], grid: &[f64], bandwidth: f64) -> Vec<f64> {
    let g = grid.len();
    let step = if g > 1 { grid[1] - grid[0] } else { 1.0 };
    let h = if bandwidth > 0.0 { bandwidth } else { step.max(1e-12) };
    let n = values.len() as f64;
    let norm = 1.0 / (n * h * (2.0 * std::f64::consts::PI).sqrt());

    // linear binning onto the grid, then convolve with the kernel
    let mut bins = vec![0.0f64; g];
    let lo = grid[0];
    for &v in values {
        let pos = (v - lo) / step;
        let i = pos.floor();
        let frac = pos - i;
        let i = i as isize;
        if i < 0 {
            bins[0] += 1.0;
        } else if i as usize >= g - 1 {
            bins[g - 1] += 1.0;
        } else {
            bins[i as usize] += 1.0 - frac;
            bins[i as usize + 1] += frac;
        }
    }
    let radius = ((4.0 * h / step).ceil() as usize).max(1).min(g - 1);
    let kernel: Vec<f64> = (0..=radius)
        .map(|k| {
            let z = k as f64 * step / h;
            (-0.5 * z * z).exp()
        })
        .collect();
    let mut out = vec![0.0f64; g];
    for i in 0..g {
        if bins[i] == 0.0 {
            continue;
        }
        let w = bins[i];
        let k_lo = i.saturating_sub(radius);
        let k_hi = (i + radius).min(g - 1);
        for j in k_lo..=k_hi {
            let k = if j >= i { j - i } else { i - j };
            out[j] += w * kernel[k];
        }
    }
    for o in out.iter_mut() {
        *o *= norm;
    }
    out
}

/// Width of the spike used for constant inputs.
fn spike_epsilon(v: f64) -> f64 {
    1e-6 * v.abs().max(1.0)
}

/// Gaussian KDE with Silverman bandwidth on a uniform grid spanning
/// [min − 3h, max + 3h], trapezoid-normalized to 1.
///
/// A constant input produces a uniform spike of width ε around the value.
pub fn estimate_pdf_1d(values: &[f64], grid_points: usize) -> Result<DensityGrid> {
    if values.is_empty() {
        return Err(AlpodsError::Input("empty input to density estimate".into()));
    }
    let grid_points = grid_points.max(8);
    let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let h = silverman_bandwidth(values);
    if h <= 0.0 || min == max {
        // degenerate spike: uniform over a width-ε interval
        let eps = spike_epsilon(values[0]);
        let lo = values[0] - eps / 2.0;
        let step = eps / (grid_points - 1) as f64;
        let grid: Vec<f64> = (0..grid_points).map(|i| lo + i as f64 * step).collect();
        let v = 1.0 / eps;
        return Ok(DensityGrid {
            grid,
            values: vec![v; grid_points],
        });
    }
    let lo = min - 3.0 * h;
    let hi = max + 3.0 * h;
    let step = (hi - lo) / (grid_points - 1) as f64;
    let grid: Vec<f64> = (0..grid_points).map(|i| lo + i as f64 * step).collect();
    let mut vals = kde_on_grid(values, &grid, h);
    let integral = trapezoid(&grid, &vals);
    if integral > 0.0 {
        for v in vals.iter_mut() {
            *v /= integral;
        }
    }
    Ok(DensityGrid {
        grid,
        values: vals,
    })
}

/// Class-conditional densities on a shared grid, combined into Bayes
/// posteriors. Where the mixture density underflows, posteriors fall back
/// to the priors.
pub fn posterior_curves(
    values_by_class: &[Vec<f64>],
    priors: &[f64],
    grid_points: usize,
) -> Result<PosteriorCurves> {
    if values_by_class.len() < 2 {
        return Err(AlpodsError::Input("need at least 2 classes".into()));
    }
    if values_by_class.iter().any(|v| v.is_empty()) {
        return Err(AlpodsError::Input("class with no values".into()));
    }
    if (priors.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(AlpodsError::Input("priors must sum to 1".into()));
    }
    let grid_points = grid_points.max(8);

    // shared grid spanning all classes, padded by the largest bandwidth
    let mut bandwidths = Vec::with_capacity(values_by_class.len());
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for vals in values_by_class {
        let h = silverman_bandwidth(vals);
        let min = vals.iter().cloned().fold(f64::INFINITY, f64::min);
        let max = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let pad = if h > 0.0 { 3.0 * h } else { spike_epsilon(min) };
        lo = lo.min(min - pad);
        hi = hi.max(max + pad);
        bandwidths.push(h);
    }
    if hi <= lo {
        hi = lo + spike_epsilon(lo);
    }
    let step = (hi - lo) / (grid_points - 1) as f64;
    let grid: Vec<f64> = (0..grid_points).map(|i| lo + i as f64 * step).collect();

    let mut pdfs: Vec<Vec<f64>> = Vec::with_capacity(values_by_class.len());
    for (vals, &h) in values_by_class.iter().zip(&bandwidths) {
        let mut pdf = kde_on_grid(vals, &grid, h);
        let integral = trapezoid(&grid, &pdf);
        if integral > 0.0 {
            for v in pdf.iter_mut() {
                *v /= integral;
            }
        }
        pdfs.push(pdf);
    }

    let k = pdfs.len();
    let mut posteriors = vec![vec![0.0f64; grid_points]; k];
    for i in 0..grid_points {
        let mut denom = 0.0;
        for c in 0..k {
            denom += priors[c] * pdfs[c][i];
        }
        if denom < DENOMINATOR_FLOOR {
            for c in 0..k {
                posteriors[c][i] = priors[c];
            }
        } else {
            for c in 0..k {
                posteriors[c][i] = priors[c] * pdfs[c][i] / denom;
            }
        }
    }
    Ok(PosteriorCurves {
        grid,
        posteriors,
        priors: priors.to_vec(),
    })
}

/// Maximal contiguous runs where one class strictly maximizes the posterior.
///
/// `node_values` supplies the empirical support check: a region keeping less
/// than `min_support` of those values is dropped. Region bounds are midpoints
/// between adjacent grid points; runs touching a grid end extend to ±∞.
pub fn bayes_regions(
    curves: &PosteriorCurves,
    node_values: &[f64],
    min_support: f64,
) -> Vec<DecisionRegion> {
    let g = curves.grid.len();
    let k = curves.posteriors.len();
    let strict_winner = |i: usize| -> Option<usize> {
        let mut best = 0usize;
        for c in 1..k {
            if curves.posteriors[c][i] > curves.posteriors[best][i] {
                best = c;
            }
        }
        for c in 0..k {
            if c != best && curves.posteriors[c][i] >= curves.posteriors[best][i] {
                return None;
            }
        }
        Some(best)
    };

    let mut regions = Vec::new();
    let mut run_start: Option<(usize, usize)> = None; // (start idx, winner)
    for i in 0..=g {
        let w = if i < g { strict_winner(i) } else { None };
        match (run_start, w) {
            (None, Some(c)) => run_start = Some((i, c)),
            (Some((s, c0)), Some(c)) if c == c0 => {
                let _ = (s, c0);
            }
            (Some((s, c0)), _) => {
                regions.push(close_run(curves, s, i - 1, c0));
                run_start = w.map(|c| (i, c));
            }
            (None, None) => {}
        }
    }

    let n = node_values.len().max(1) as f64;
    regions.retain(|r| {
        let inside = node_values
            .iter()
            .filter(|&&v| v > r.lower && v <= r.upper)
            .count() as f64;
        inside / n >= min_support
    });
    let mut out: Vec<DecisionRegion> = regions
        .into_iter()
        .map(|mut r| {
            let inside = node_values
                .iter()
                .filter(|&&v| v > r.lower && v <= r.upper)
                .count() as f64;
            r.support = inside / n;
            r
        })
        .collect();
    out.sort_by(|a, b| a.lower.partial_cmp(&b.lower).unwrap());
    out
}

fn close_run(curves: &PosteriorCurves, start: usize, end: usize, winner: usize) -> DecisionRegion {
    let g = curves.grid.len();
    let lower = if start == 0 {
        f64::NEG_INFINITY
    } else {
        0.5 * (curves.grid[start - 1] + curves.grid[start])
    };
    let upper = if end == g - 1 {
        f64::INFINITY
    } else {
        0.5 * (curves.grid[end] + curves.grid[end + 1])
    };
    let mut margin = 0.0;
    for i in start..=end {
        let win = curves.posteriors[winner][i];
        let mut second = f64::NEG_INFINITY;
        for c in 0..curves.posteriors.len() {
            if c != winner {
                second = second.max(curves.posteriors[c][i]);
            }
        }
        margin += win - second;
    }
    DecisionRegion {
        lower,
        upper,
        winner,
        mean_margin: margin / (end - start + 1) as f64,
        support: 0.0,
    }
}

/// 2-D histogram over the bounding box, smoothed by repeated application of
/// the separable (1,2,1)/4 kernel with reflecting boundaries, renormalized
/// to sum 1.
pub fn sdh_2d(x: &[f64], y: &[f64], bins: usize, smoothing_passes: usize) -> Result<DensityGrid2D> {
    if x.len() != y.len() {
        return Err(AlpodsError::Input("x/y length mismatch".into()));
    }
    if x.is_empty() {
        return Err(AlpodsError::Input("empty input to sdh_2d".into()));
    }
    let bins = bins.max(2);
    let (x_centers, xi) = bin_axis(x, bins);
    let (y_centers, yi) = bin_axis(y, bins);
    let mut w = vec![0.0f64; bins * bins];
    for i in 0..x.len() {
        w[yi[i] * bins + xi[i]] += 1.0;
    }
    for _ in 0..smoothing_passes {
        smooth_pass(&mut w, bins);
    }
    let total: f64 = w.iter().sum();
    for v in w.iter_mut() {
        *v /= total;
    }
    Ok(DensityGrid2D {
        x_centers,
        y_centers,
        weights: w,
    })
}

/// Like [`sdh_2d`] but over a caller-fixed bounding box, so two event subsets
/// can share comparable grids. Values outside the box clamp to edge bins.
pub fn sdh_2d_in_box(
    x: &[f64],
    y: &[f64],
    bins: usize,
    smoothing_passes: usize,
    x_range: (f64, f64),
    y_range: (f64, f64),
) -> Result<DensityGrid2D> {
    if x.len() != y.len() {
        return Err(AlpodsError::Input("x/y length mismatch".into()));
    }
    if x.is_empty() {
        return Err(AlpodsError::Input("empty input to sdh_2d".into()));
    }
    let bins = bins.max(2);
    let (x_centers, xi) = bin_axis_in_range(x, bins, x_range);
    let (y_centers, yi) = bin_axis_in_range(y, bins, y_range);
    let mut w = vec![0.0f64; bins * bins];
    for i in 0..x.len() {
        w[yi[i] * bins + xi[i]] += 1.0;
    }
    for _ in 0..smoothing_passes {
        smooth_pass(&mut w, bins);
    }
    let total: f64 = w.iter().sum();
    for v in w.iter_mut() {
        *v /= total;
    }
    Ok(DensityGrid2D {
        x_centers,
        y_centers,
        weights: w,
    })
}

fn bin_axis(values: &[f64], bins: usize) -> (Vec<f64>, Vec<usize>) {
    let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    bin_axis_in_range(values, bins, (min, max))
}

fn bin_axis_in_range(values: &[f64], bins: usize, range: (f64, f64)) -> (Vec<f64>, Vec<usize>) {
    let (min, max) = range;
    let width = if max > min { max - min } else { spike_epsilon(min) };
    let step = width / bins as f64;
    let centers: Vec<f64> = (0..bins).map(|i| min + (i as f64 + 0.5) * step).collect();
    let idx: Vec<usize> = values
        .iter()
        .map(|&v| (((v - min) / step) as isize).clamp(0, bins as isize - 1) as usize)
        .collect();
    (centers, idx)
}

fn smooth_pass(w: &mut [f64], bins: usize) {
    // separable (1,2,1)/4 with reflecting boundaries, x then y
    let reflect = |i: isize| -> usize {
        if i < 0 {
            (-i) as usize
        } else if i as usize >= bins {
            2 * bins - 2 - i as usize
        } else {
            i as usize
        }
    };
    let mut tmp = vec![0.0f64; w.len()];
    for iy in 0..bins {
        for ix in 0..bins {
            let a = w[iy * bins + reflect(ix as isize - 1)];
            let b = w[iy * bins + ix];
            let c = w[iy * bins + reflect(ix as isize + 1)];
            tmp[iy * bins + ix] = 0.25 * (a + 2.0 * b + c);
        }
    }
    for iy in 0..bins {
        for ix in 0..bins {
            let a = tmp[reflect(iy as isize - 1) * bins + ix];
            let b = tmp[iy * bins + ix];
            let c = tmp[reflect(iy as isize + 1) * bins + ix];
            w[iy * bins + ix] = 0.25 * (a + 2.0 * b + c);
        }
    }
}
