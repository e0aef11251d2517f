//! Random witness functions `phi_omega` and the lifted graph measures.

use std::sync::Arc;

use crate::cantor::{CantorLevels, CantorPoint, Location, PointCode};
use crate::error::{domain, Result};
use crate::function::FunctionHandle;
use crate::labeling::Labeling;
use crate::rng::StreamRng;

/// `phi(x) = sum_k 2^-k omega(I_{k, i_k(x)})` on the set, linear across gaps.
/// With `dim > 1` the function reads only the first coordinate.
#[derive(Clone, Debug)]
pub struct WitnessFunction {
    levels: Arc<CantorLevels>,
    labeling: Labeling,
    dim: usize,
}

#[derive(Clone, Debug)]
pub struct GraphSample {
    pub point: CantorPoint,
    /// `(x, phi(x) + f(x))`
    pub graph: [f64; 2],
}

impl WitnessFunction {
    pub fn new(levels: Arc<CantorLevels>, labeling: Labeling) -> Self {
        Self {
            levels,
            labeling,
            dim: 1,
        }
    }

    pub fn levels(&self) -> &Arc<CantorLevels> {
        &self.levels
    }

    pub fn labeling(&self) -> Labeling {
        self.labeling
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn depth(&self) -> usize {
        self.levels.depth()
    }

    /// Distance to the untruncated series, `2^-K`.
    pub fn truncation_bound(&self) -> f64 {
        0.5f64.powi(self.depth() as i32)
    }

    /// `phi_{d, omega}(x_1, ..., x_d) = phi_omega(x_1)`
    pub fn surface_extend(&self, d: usize) -> Result<Self> {
        if d < 2 {
            return Err(domain(format!("surface dimension must be at least 2, got {d}")));
        }
        if self.dim != 1 {
            return Err(domain("surface_extend expects a one-dimensional witness"));
        }
        Ok(Self {
            dim: d,
            ..self.clone()
        })
    }

    /// Series value for a code of any depth up to `K`.
    pub fn eval_code(&self, code: &PointCode) -> f64 {
        let mut index = 0u128;
        let mut weight = 1.0;
        let mut sum = 0.0;
        for (k, &d) in code.digits.iter().enumerate() {
            let level = k + 1;
            index = index * self.levels.branching(level) as u128 + d as u128;
            weight *= 0.5;
            sum += weight * self.labeling.bit(level, index + 1) as f64;
        }
        sum
    }

    pub fn eval_point(&self, p: &CantorPoint) -> f64 {
        self.eval_code(&p.code)
    }

    pub fn eval(&self, x: f64) -> Result<f64> {
        Ok(match self.levels.locate(x)? {
            Location::Inside(code) => self.eval_code(&code),
            Location::Gap(gap) => {
                let left = self.eval_code(&self.levels.left_flank(&gap));
                let right = self.eval_code(&self.levels.right_flank(&gap));
                let t = (x - gap.left) / (gap.right - gap.left);
                left + t.clamp(0.0, 1.0) * (right - left)
            }
        })
    }

    /// [`eval`](Self::eval) with `x` clamped into `[0, 1]`.
    pub fn value(&self, x: f64) -> f64 {
        self.eval(x.clamp(0.0, 1.0)).unwrap_or(f64::NAN)
    }

    pub fn eval_at(&self, p: &[f64]) -> Result<f64> {
        if p.len() != self.dim {
            return Err(domain(format!(
                "expected a point of dimension {}, got {}",
                self.dim,
                p.len()
            )));
        }
        self.eval(p[0])
    }

    pub fn eval_grid(&self, xs: &[f64]) -> Vec<f64> {
        xs.iter().map(|&x| self.value(x)).collect()
    }

    /// One draw from `nu` pushed through `x -> (x, phi(x) + f(x))`.
    pub fn sample_graph(&self, f: &FunctionHandle, rng: &mut StreamRng) -> Result<GraphSample> {
        if f.dim() != 1 || self.dim != 1 {
            return Err(domain("graph measures are defined for one-dimensional functions"));
        }
        let point = self.levels.sample_point(rng);
        let y = self.eval_point(&point) + f.eval1(point.x);
        let graph = [point.x, y];
        Ok(GraphSample { point, graph })
    }
}

pub fn sample_graph_measure(
    w: &WitnessFunction,
    f: &FunctionHandle,
    rng: &mut StreamRng,
) -> Result<[f64; 2]> {
    Ok(w.sample_graph(f, rng)?.graph)
}
