//! Box counting for graphs of curves and surfaces, and log-log fits.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::function::FunctionHandle;

/// Coarsest scale used for dimension fits.
pub const MAX_SCALE: f64 = 1.0 / 16.0;
/// Finest scale used for dimension fits.
pub const MIN_SCALE: f64 = 1.0 / 16384.0;

fn column_count(delta: f64) -> usize {
    (1.0 / delta).ceil() as usize
}

fn check_delta(delta: f64, samples: usize) -> Result<()> {
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(domain(format!("box size {delta} is not in (0, 1]")));
    }
    if samples < 4 {
        return Err(domain(format!("need at least 4 samples per column, got {samples}")));
    }
    Ok(())
}

#[inline]
fn boxes_spanned(lo: f64, hi: f64, delta: f64) -> u64 {
    ((hi / delta).floor() - (lo / delta).floor()) as u64 + 1
}

/// Sample abscissae of column `j`, endpoints included and clipped to 1.
fn column_samples(j: usize, delta: f64, samples: usize) -> impl Iterator<Item = f64> {
    let a = j as f64 * delta;
    let b = ((j + 1) as f64 * delta).min(1.0);
    let step = (b - a) / (samples - 1) as f64;
    (0..samples).map(move |t| if t + 1 == samples { b } else { a + t as f64 * step })
}

/// Number of `delta`-boxes met by the graph of a curve, from per-column
/// minima and maxima over `samples_per_column` points.
pub fn box_count_curve(g: &FunctionHandle, delta: f64, samples_per_column: usize) -> Result<u64> {
    check_delta(delta, samples_per_column)?;
    if g.dim() != 1 {
        return Err(domain("box_count_curve expects a one-dimensional function"));
    }
    let mut total = 0u64;
    for j in 0..column_count(delta) {
        let (lo, hi) = column_samples(j, delta, samples_per_column)
            .map(|x| g.eval1(x))
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
        total += boxes_spanned(lo, hi, delta);
    }
    Ok(total)
}

/// Number of `delta`-cubes met by the graph of a surface over `[0,1]^2`.
pub fn box_count_surface(g: &FunctionHandle, delta: f64, samples_per_cell: usize) -> Result<u64> {
    check_delta(delta, samples_per_cell)?;
    if g.dim() != 2 {
        return Err(domain("box_count_surface expects a two-dimensional function"));
    }
    let cols = column_count(delta);
    let mut total = 0u64;
    for i in 0..cols {
        let xs: Vec<f64> = column_samples(i, delta, samples_per_cell).collect();
        for j in 0..cols {
            let mut lo = f64::INFINITY;
            let mut hi = f64::NEG_INFINITY;
            for y in column_samples(j, delta, samples_per_cell) {
                for &x in &xs {
                    let v = g.eval(&[x, y]);
                    lo = lo.min(v);
                    hi = hi.max(v);
                }
            }
            total += boxes_spanned(lo, hi, delta);
        }
    }
    Ok(total)
}

/// Where a fit's scale window came from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScaleWindow {
    pub min_scale: f64,
    pub max_scale: f64,
    /// Construction depth and finest interval length that clamped the window.
    pub depth: Option<usize>,
    pub finest_length: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DimFit {
    pub scales: Vec<f64>,
    pub counts: Vec<u64>,
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub window: Option<ScaleWindow>,
}

impl DimFit {
    /// Counts never decrease as the box size shrinks.
    pub fn is_monotone(&self) -> bool {
        let mut idx: Vec<usize> = (0..self.scales.len()).collect();
        idx.sort_by(|&a, &b| self.scales[b].total_cmp(&self.scales[a]));
        idx.windows(2).all(|w| self.counts[w[1]] >= self.counts[w[0]])
    }
}

/// Least-squares slope of `log N` against `log(1/delta)`.
pub fn fit_dimension(scales: &[f64], counts: &[u64]) -> Result<DimFit> {
    if scales.len() != counts.len() {
        return Err(domain("scales and counts differ in length"));
    }
    if scales.len() < 4 {
        return Err(domain(format!("need at least 4 scales, got {}", scales.len())));
    }
    let max = scales.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = scales.iter().cloned().fold(f64::INFINITY, f64::min);
    if !(min > 0.0) || max / min < 4.0 * (1.0 - 1e-12) {
        return Err(domain("scales must be positive and span at least two octaves"));
    }
    if counts.contains(&0) {
        return Err(domain("box counts must be positive"));
    }
    let xs: Vec<f64> = scales.iter().map(|d| (1.0 / d).ln()).collect();
    let ys: Vec<f64> = counts.iter().map(|&c| (c as f64).ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r_squared = if syy == 0.0 { 1.0 } else { (sxy * sxy) / (sxx * syy) };
    Ok(DimFit {
        scales: scales.to_vec(),
        counts: counts.to_vec(),
        slope,
        intercept,
        r_squared,
        window: None,
    })
}

/// `2^-lo, ..., 2^-hi`
pub fn dyadic_scales(lo: u32, hi: u32) -> Vec<f64> {
    (lo..=hi).map(|j| 0.5f64.powi(j as i32)).collect()
}

/// Dyadic window `[2^-j_max, 2^-4]` for a witness of depth `K`: the finest
/// scale is the smallest dyadic `>= c_K`, clipped to `[2^-14, 2^-6]` so the
/// window is computable and spans at least two octaves.
pub fn witness_window(depth: usize, finest_length: f64) -> ScaleWindow {
    let mut j = 4;
    while j < 14 && 0.5f64.powi(j + 1) >= finest_length {
        j += 1;
    }
    let j = j.max(6);
    ScaleWindow {
        min_scale: 0.5f64.powi(j),
        max_scale: MAX_SCALE,
        depth: Some(depth),
        finest_length: Some(finest_length),
    }
}

/// Half-octave scales `2^(-j/2)` spanning `window`, coarse to fine.
pub fn window_scales(window: &ScaleWindow) -> Vec<f64> {
    let lo = (2.0 * (1.0 / window.max_scale).log2()).round() as i32;
    let hi = (2.0 * (1.0 / window.min_scale).log2()).round() as i32;
    (lo..=hi).map(|j| 2f64.powf(-0.5 * j as f64)).collect()
}

/// Counts over the half-octave scales of `window` and fits the slope.
pub fn curve_dimension(
    g: &FunctionHandle,
    window: ScaleWindow,
    samples_per_column: usize,
) -> Result<DimFit> {
    let scales = window_scales(&window);
    let counts = scales
        .iter()
        .map(|&d| box_count_curve(g, d, samples_per_column))
        .collect::<Result<Vec<_>>>()?;
    let mut fit = fit_dimension(&scales, &counts)?;
    fit.window = Some(window);
    Ok(fit)
}
