//! Monte Carlo Riesz energies `I_s(mu) = E |X - Y|^-s` from independent pairs.
//!
//! Besides the mean and its standard error every estimate carries a growth
//! diagnostic. The diagnostic is the per-doubling growth factor of the
//! estimator implied by the tail of the pair-distance distribution: with a
//! Hill estimate `D` of the small-scale correlation dimension the sample mean
//! grows like `N^(s/D - 1)` when `s > D`, so the factor is
//! `2^max(0, s/D - 1)`. The raw prefix ratios over the last three doublings
//! are reported alongside.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::cantor::CantorLevels;
use crate::error::{domain, Error, Result};
use crate::function::FunctionHandle;
use crate::rng::{tags, Partitioning, StreamRng};
use crate::witness::WitnessFunction;

pub const MIN_PAIRS: usize = 100;
/// Redraws allowed for a coincident pair before the sampler is declared atomic.
pub const MAX_REDRAWS: usize = 100;
/// Growth above this flags a divergent integral.
pub const GROWTH_THRESHOLD: f64 = 1.05;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyEstimate {
    pub s: f64,
    pub n: usize,
    pub mean: f64,
    pub stderr: f64,
    pub growth: f64,
    /// `mean(N/4)/mean(N/8)`, `mean(N/2)/mean(N/4)`, `mean(N)/mean(N/2)` over
    /// nested prefixes of the pair sequence.
    pub doubling_ratios: [f64; 3],
    /// Hill estimate of the correlation dimension from the closest pairs.
    pub tail_dimension: f64,
    pub tail_pairs: usize,
    pub seed: u64,
    pub partitions: usize,
}

impl EnergyEstimate {
    pub fn diverges(&self) -> bool {
        self.growth > GROWTH_THRESHOLD
    }
}

pub trait PointSampler<const D: usize>: Sync {
    fn sample(&self, rng: &mut StreamRng) -> Result<[f64; D]>;
}

impl<const D: usize, F> PointSampler<D> for F
where
    F: Fn(&mut StreamRng) -> Result<[f64; D]> + Sync,
{
    fn sample(&self, rng: &mut StreamRng) -> Result<[f64; D]> {
        self(rng)
    }
}

/// Lebesgue measure on `[0, 1]`.
pub struct UniformUnit;

impl PointSampler<1> for UniformUnit {
    fn sample(&self, rng: &mut StreamRng) -> Result<[f64; 1]> {
        Ok([rng.gen::<f64>()])
    }
}

/// The normalised natural measure on `E_K`.
pub struct NuSampler<'a>(pub &'a CantorLevels);

impl PointSampler<1> for NuSampler<'_> {
    fn sample(&self, rng: &mut StreamRng) -> Result<[f64; 1]> {
        Ok([self.0.sample_nu(rng)])
    }
}

/// The lifted measure on the graph of `phi + f`.
pub struct GraphSampler<'a> {
    pub witness: &'a WitnessFunction,
    pub f: &'a FunctionHandle,
}

impl PointSampler<2> for GraphSampler<'_> {
    fn sample(&self, rng: &mut StreamRng) -> Result<[f64; 2]> {
        Ok(self.witness.sample_graph(self.f, rng)?.graph)
    }
}

fn distance<const D: usize>(a: &[f64; D], b: &[f64; D]) -> f64 {
    let mut d2 = 0.0;
    for i in 0..D {
        let t = a[i] - b[i];
        d2 += t * t;
    }
    d2.sqrt()
}

fn check_args(s: f64, n: usize) -> Result<()> {
    if !(s >= 0.0) || !s.is_finite() {
        return Err(domain(format!("energy exponent s = {s} must be non-negative")));
    }
    if n < MIN_PAIRS {
        return Err(domain(format!(
            "{n} pairs is below the minimum of {MIN_PAIRS} for a standard error"
        )));
    }
    Ok(())
}

/// Draws pairs until they are distinct.
fn distinct_pair<T>(
    rng: &mut StreamRng,
    mut draw: impl FnMut(&mut StreamRng) -> Result<T>,
    mut dist: impl FnMut(&T, &T) -> f64,
) -> Result<(T, T, f64)> {
    for _ in 0..MAX_REDRAWS {
        let a = draw(rng)?;
        let b = draw(rng)?;
        let d = dist(&a, &b);
        if d > 0.0 {
            return Ok((a, b, d));
        }
    }
    Err(Error::Degenerate(format!(
        "{MAX_REDRAWS} consecutive coincident pairs; the sampler looks atomic"
    )))
}

/// `I_s` of the sampler's law from `n` independent pairs.
pub fn energy_mc<const D: usize, S: PointSampler<D>>(
    sampler: &S,
    s: f64,
    n: usize,
    seed: u64,
    partitioning: Partitioning,
) -> Result<EnergyEstimate> {
    check_args(s, n)?;
    let blocks = partitioning.run_blocks(seed, tags::ENERGY_PAIRS, n, |range, rng| {
        let mut out = Vec::with_capacity(range.len());
        for _ in range {
            let (_, _, d) = distinct_pair(rng, |r| sampler.sample(r), distance)?;
            out.push((d.powf(-s), d));
        }
        Ok::<_, Error>(out)
    });
    let pairs = collect_blocks(blocks)?;
    Ok(summarize(&pairs, s, seed, partitioning))
}

fn collect_blocks(blocks: Vec<Result<Vec<(f64, f64)>>>) -> Result<Vec<(f64, f64)>> {
    let mut out = Vec::new();
    for b in blocks {
        out.extend(b?);
    }
    Ok(out)
}

/// Builds an estimate from `(kernel, distance)` pairs in draw order.
pub fn summarize(pairs: &[(f64, f64)], s: f64, seed: u64, partitioning: Partitioning) -> EnergyEstimate {
    let n = pairs.len();
    let mut prefix = Vec::with_capacity(n);
    let mut acc = 0.0;
    for &(k, _) in pairs {
        acc += k;
        prefix.push(acc);
    }
    let mean = acc / n as f64;
    let var = pairs.iter().map(|&(k, _)| (k - mean).powi(2)).sum::<f64>() / (n - 1).max(1) as f64;
    let prefix_mean = |m: usize| prefix[m - 1] / m as f64;
    let doubling_ratios = [
        prefix_mean(n / 4) / prefix_mean(n / 8),
        prefix_mean(n / 2) / prefix_mean(n / 4),
        mean / prefix_mean(n / 2),
    ];
    let mut dists: Vec<f64> = pairs.iter().map(|&(_, d)| d).collect();
    let (tail_dimension, tail_pairs) = hill_dimension(&mut dists);
    let growth = if s == 0.0 {
        1.0
    } else {
        2f64.powf((s / tail_dimension - 1.0).max(0.0))
    };
    EnergyEstimate {
        s,
        n,
        mean,
        stderr: (var / n as f64).sqrt(),
        growth,
        doubling_ratios,
        tail_dimension,
        tail_pairs,
        seed,
        partitions: partitioning.partitions,
    }
}

/// Hill estimator of the exponent `D` in `P(|X - Y| < r) ~ r^D` from the
/// `ceil(sqrt(n))` smallest distances. Reorders `dists`.
pub fn hill_dimension(dists: &mut [f64]) -> (f64, usize) {
    let n = dists.len();
    let k = ((n as f64).sqrt().ceil() as usize).clamp(2, n.saturating_sub(1).max(2));
    if n <= k {
        return (f64::INFINITY, 0);
    }
    dists.select_nth_unstable_by(k, |a, b| a.total_cmp(b));
    let threshold = dists[k];
    let mut closest = dists[..k].to_vec();
    closest.sort_by(|a, b| a.total_cmp(b));
    let sum: f64 = closest.iter().map(|&d| (threshold / d).ln()).sum();
    if sum > 0.0 {
        (k as f64 / sum, k)
    } else {
        (f64::INFINITY, k)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraphEnergy {
    pub eps: f64,
    pub estimate: EnergyEstimate,
    /// Pairs whose graph-space and x-space kernels differ in any bit.
    pub kernel_mismatches: usize,
}

/// `I_{2 - 2 eps}` of the lifted measure on the graph of `phi + f`.
///
/// Every pair is also evaluated in the pulled-back form
/// `(|x - y|^2 + |(phi + f)(x) - (phi + f)(y)|^2)^(eps - 1)`, re-evaluating
/// `phi` and `f` at the preimages; disagreements are counted.
pub fn graph_energy(
    w: &WitnessFunction,
    f: &FunctionHandle,
    eps: f64,
    n: usize,
    seed: u64,
    partitioning: Partitioning,
) -> Result<GraphEnergy> {
    if !(eps > 0.0 && eps <= 0.25) {
        return Err(domain(format!("eps = {eps} is not in (0, 1/4]")));
    }
    if f.dim() != 1 || w.dim() != 1 {
        return Err(domain("graph energy needs one-dimensional functions"));
    }
    let s = 2.0 - 2.0 * eps;
    check_args(s, n)?;
    let graph_exp = -(s / 2.0);
    let pulled_exp = eps - 1.0;
    let blocks = partitioning.run_blocks(seed, tags::GRAPH_PAIRS, n, |range, rng| {
        let mut out = Vec::with_capacity(range.len());
        let mut mismatches = 0usize;
        for _ in range {
            let (a, b, _) = distinct_pair(
                rng,
                |r| w.sample_graph(f, r),
                |a, b| distance(&a.graph, &b.graph),
            )?;
            let dx = a.graph[0] - b.graph[0];
            let dy = a.graph[1] - b.graph[1];
            let d2 = dx * dx + dy * dy;
            let graph_kernel = d2.powf(graph_exp);

            let ex = a.point.x - b.point.x;
            let ev = (w.eval_point(&a.point) + f.eval1(a.point.x))
                - (w.eval_point(&b.point) + f.eval1(b.point.x));
            let pulled_kernel = (ex * ex + ev * ev).powf(pulled_exp);
            if graph_kernel.to_bits() != pulled_kernel.to_bits() {
                mismatches += 1;
            }
            out.push((graph_kernel, d2.sqrt()));
        }
        Ok::<_, Error>((out, mismatches))
    });
    let mut pairs = Vec::with_capacity(n);
    let mut kernel_mismatches = 0;
    for b in blocks {
        let (p, m) = b?;
        pairs.extend(p);
        kernel_mismatches += m;
    }
    Ok(GraphEnergy {
        eps,
        estimate: summarize(&pairs, s, seed, partitioning),
        kernel_mismatches,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn closed_form_uniform(s: f64) -> f64 {
        2.0 / ((1.0 - s) * (2.0 - s))
    }

    #[test]
    fn zero_exponent_is_exactly_one() {
        let e = energy_mc(&UniformUnit, 0.0, 1000, 1, Partitioning::default()).unwrap();
        assert_eq!(e.mean, 1.0);
        assert_eq!(e.stderr, 0.0);
        assert_eq!(e.growth, 1.0);
    }

    #[test]
    fn uniform_half_matches_closed_form() {
        let e = energy_mc(&UniformUnit, 0.5, 200_000, 2, Partitioning::new(4)).unwrap();
        let target = closed_form_uniform(0.5);
        assert!((target - 8.0 / 3.0).abs() < 1e-15);
        assert!((e.mean - target).abs() < 0.02 * target, "{}", e.mean);
        assert!(e.growth <= 1.02);
        assert!(e.mean >= 1.0);
    }

    #[test]
    fn uniform_divergent_exponent_grows() {
        let e = energy_mc(&UniformUnit, 1.5, 100_000, 3, Partitioning::new(2)).unwrap();
        assert!(e.growth > 1.1, "{e:?}");
        assert!(e.diverges());
    }

    #[test]
    fn refuses_small_samples_and_bad_exponents() {
        assert!(energy_mc(&UniformUnit, 0.5, 99, 0, Partitioning::default()).is_err());
        assert!(energy_mc(&UniformUnit, -0.1, 1000, 0, Partitioning::default()).is_err());
    }

    #[test]
    fn atomic_sampler_is_rejected() {
        let atom = |_: &mut StreamRng| Ok([0.5f64]);
        assert!(matches!(
            energy_mc(&atom, 0.5, 100, 0, Partitioning::default()),
            Err(Error::Degenerate(_))
        ));
    }

    #[test]
    fn hill_recovers_uniform_square_dimension() {
        let mut rng = crate::rng::stream(4, 0, 0);
        let mut d: Vec<f64> = (0..200_000)
            .map(|_| {
                let a = [rng.gen::<f64>(), rng.gen::<f64>()];
                let b = [rng.gen::<f64>(), rng.gen::<f64>()];
                distance(&a, &b)
            })
            .collect();
        let (dim, k) = hill_dimension(&mut d);
        assert_eq!(k, 448);
        assert!((dim - 2.0).abs() < 0.2, "{dim}");
    }

    #[test]
    fn estimates_reproduce_bit_exactly() {
        let run = |p| energy_mc(&UniformUnit, 0.7, 20_000, 9, Partitioning::new(p)).unwrap();
        let a = run(3);
        assert_eq!(a, run(3));
        let b = run(1);
        assert_eq!(a.mean.to_bits(), b.mean.to_bits());
    }
}
