//! Horizons `H(g)(x) = sup_y g(x, y)` of gridded surfaces.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::function::FunctionHandle;
use crate::rng::Partitioning;
use crate::witness::WitnessFunction;

/// Heights of a surface on the closed uniform `n x n` grid
/// `x_i = i / (n - 1)`, `y_j = j / (n - 1)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SurfaceGrid {
    n: usize,
    /// Row-major, `heights[i * n + j] = g(x_i, y_j)`.
    heights: Vec<f64>,
    pub label: String,
    pub seed: Option<u64>,
}

/// `0, 1/(n-1), ..., 1`
pub fn grid_coords(n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![0.0],
        _ => (0..n).map(|i| i as f64 / (n - 1) as f64).collect(),
    }
}

impl SurfaceGrid {
    pub fn from_heights(n: usize, heights: Vec<f64>, label: impl Into<String>) -> Result<Self> {
        if n < 2 {
            return Err(domain(format!("grid resolution must be at least 2, got {n}")));
        }
        if heights.len() != n * n {
            return Err(domain(format!("expected {} heights, got {}", n * n, heights.len())));
        }
        if heights.iter().any(|h| !h.is_finite()) {
            return Err(domain("grid heights must be finite"));
        }
        Ok(Self {
            n,
            heights,
            label: label.into(),
            seed: None,
        })
    }

    /// Samples a two-dimensional function; rows are filled in parallel.
    pub fn from_fn(g: &FunctionHandle, n: usize, partitioning: Partitioning) -> Result<Self> {
        if g.dim() != 2 {
            return Err(domain(format!("surface grids need a 2-D function, got d = {}", g.dim())));
        }
        if n < 2 {
            return Err(domain(format!("grid resolution must be at least 2, got {n}")));
        }
        let xs = grid_coords(n);
        let rows = partitioning.map_indexed(n, |i| {
            xs.iter().map(|&y| g.eval(&[xs[i], y])).collect::<Vec<f64>>()
        });
        Self::from_heights(n, rows.concat(), g.label())
    }

    pub fn with_seed(mut self, seed: Option<u64>) -> Self {
        self.seed = seed;
        self
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.heights[i * self.n + j]
    }

    pub fn column(&self, i: usize) -> &[f64] {
        &self.heights[i * self.n..(i + 1) * self.n]
    }
}

/// Column maxima: the exact horizon of the grid-restricted surface.
pub fn horizon(grid: &SurfaceGrid) -> Result<Vec<f64>> {
    if grid.n == 0 || grid.heights.is_empty() {
        return Err(domain("empty grid"));
    }
    Ok((0..grid.n)
        .map(|i| grid.column(i).iter().copied().fold(f64::NEG_INFINITY, f64::max))
        .collect())
}

/// Piecewise-linear interpolant of a sampled horizon, for box counting.
pub fn horizon_function(values: Vec<f64>, label: impl Into<String>) -> Result<FunctionHandle> {
    if values.len() < 2 {
        return Err(domain("need at least two horizon samples"));
    }
    let m = (values.len() - 1) as f64;
    Ok(FunctionHandle::from_fn(1, label, move |p| {
        let t = p[0].clamp(0.0, 1.0) * m;
        let i = (t.floor() as usize).min(values.len() - 2);
        let s = t - i as f64;
        values[i] + s * (values[i + 1] - values[i])
    }))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HorizonCheck {
    pub n: usize,
    pub f: String,
    pub seed: Option<u64>,
    /// `max_i |H(f + phi_2)(x_i) - H(f)(x_i) - phi(x_i)|`
    pub max_deviation: f64,
}

/// Compares `H(f + phi_2)` with `H(f) + phi` on the grid. `w` must be the
/// two-dimensional extension of a witness.
pub fn verify_horizon_shift(
    f: &FunctionHandle,
    w: &WitnessFunction,
    n: usize,
    partitioning: Partitioning,
) -> Result<HorizonCheck> {
    if f.dim() != 2 || w.dim() != 2 {
        return Err(domain(format!(
            "horizon shift needs a 2-D function and a 2-D witness, got {} and {}",
            f.dim(),
            w.dim()
        )));
    }
    let shifted = f.add(&FunctionHandle::witness(w.clone()))?;
    let h_shift = horizon(&SurfaceGrid::from_fn(&shifted, n, partitioning)?)?;
    let h_f = horizon(&SurfaceGrid::from_fn(f, n, partitioning)?)?;
    let xs = grid_coords(n);
    let mut max_deviation = 0.0f64;
    for (i, &x) in xs.iter().enumerate() {
        let phi = w.eval_at(&[x, 0.0])?;
        max_deviation = max_deviation.max((h_shift[i] - (h_f[i] + phi)).abs());
    }
    Ok(HorizonCheck {
        n,
        f: f.label().to_string(),
        seed: w.labeling().seed(),
        max_deviation,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cantor::{build_levels, CantorConfig};
    use crate::labeling::Labeling;
    use std::sync::Arc;

    fn witness2(seed: u64) -> WitnessFunction {
        let lv = build_levels(&CantorConfig::tower(2, 0.5).unwrap()).unwrap();
        WitnessFunction::new(Arc::new(lv), Labeling::from_seed(seed))
            .surface_extend(2)
            .unwrap()
    }

    #[test]
    fn sum_of_coordinates() {
        let g = FunctionHandle::parse("x + y", 2, None).unwrap();
        let grid = SurfaceGrid::from_fn(&g, 33, Partitioning::default()).unwrap();
        let h = horizon(&grid).unwrap();
        for (hi, x) in h.iter().zip(grid_coords(33)) {
            assert_eq!(*hi, x + 1.0);
        }
    }

    #[test]
    fn centred_parabola_has_flat_horizon() {
        let g = FunctionHandle::from_fn(2, "-(y-1/2)^2", |p| -(p[1] - 0.5).powi(2));
        let h = horizon(&SurfaceGrid::from_fn(&g, 65, Partitioning::default()).unwrap()).unwrap();
        assert!(h.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn witness_surface_horizon_is_the_witness() {
        let w = witness2(12);
        let g = FunctionHandle::witness(w.clone());
        let h = horizon(&SurfaceGrid::from_fn(&g, 128, Partitioning::new(2)).unwrap()).unwrap();
        for (hi, x) in h.iter().zip(grid_coords(128)) {
            assert_eq!(*hi, w.eval_at(&[x, 0.3]).unwrap());
        }
    }

    #[test]
    fn shift_identity() {
        let w = witness2(3);
        let zero = verify_horizon_shift(&FunctionHandle::zero(2), &w, 64, Partitioning::default()).unwrap();
        assert_eq!(zero.max_deviation, 0.0);
        let f = FunctionHandle::sin_xy(4.0);
        let c = verify_horizon_shift(&f, &w, 256, Partitioning::new(3)).unwrap();
        assert!(c.max_deviation <= 1e-12);
        assert!(verify_horizon_shift(&FunctionHandle::zero(1), &w, 8, Partitioning::default()).is_err());
    }

    #[test]
    fn bad_grids() {
        assert!(SurfaceGrid::from_heights(1, vec![0.0], "").is_err());
        assert!(SurfaceGrid::from_heights(2, vec![0.0; 3], "").is_err());
        assert!(SurfaceGrid::from_heights(2, vec![0.0, 1.0, f64::NAN, 0.0], "").is_err());
        assert!(SurfaceGrid::from_fn(&FunctionHandle::zero(1), 4, Partitioning::default()).is_err());
    }

    #[test]
    fn interpolated_horizon() {
        let f = horizon_function(vec![0.0, 1.0, 0.0], "tent").unwrap();
        assert_eq!(f.eval1(0.25), 0.5);
        assert_eq!(f.eval1(1.0), 0.0);
    }
}
