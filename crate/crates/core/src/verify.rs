//! Numerical checks of the integral, coding and expectation bounds that the
//! dimension argument chains together.
//!
//! Every check yields a [`VerificationReport`]: one row per grid point with
//! the computed value, the bound, the declared numerical error and the margin
//! `bound - value`. A row passes when `value <= bound + error`.

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::cantor::{c_epsilon, CantorLevels, CantorPoint};
use crate::energy::{energy_mc, graph_energy, NuSampler};
use crate::error::{domain, Result};
use crate::function::FunctionHandle;
use crate::labeling::{sample_labeling, Labeling};
use crate::quadrature::{integrate, QuadResult};
use crate::rng::{derive_seed, stream, tags, Partitioning};
use crate::witness::WitnessFunction;

/// Relative tolerance of the real-integral quadrature.
pub const QUAD_REL_TOL: f64 = 1e-4;
/// Bound on the growth factor of a finite energy estimate.
pub const STABLE_GROWTH: f64 = 1.02;
/// Stderr multiple allowed on Monte Carlo comparisons.
pub const MC_SIGMAS: f64 = 3.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Pass,
    Fail,
    /// Numerics did not converge; says nothing about the inequality.
    Inconclusive,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub params: Value,
    pub value: f64,
    pub bound: f64,
    /// `bound - value`
    pub margin: f64,
    pub error: f64,
    pub pass: bool,
}

impl ReportRow {
    pub fn new(params: Value, value: f64, bound: f64, error: f64) -> Self {
        Self {
            params,
            value,
            bound,
            margin: bound - value,
            error,
            pass: value <= bound + error,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub lemma: String,
    pub grid: Value,
    pub rows: Vec<ReportRow>,
    pub pass: bool,
    pub status: Status,
    pub errors: Vec<String>,
    /// Check-specific extras (constants, coverage, partitioning).
    pub details: Value,
}

impl VerificationReport {
    fn assemble(
        lemma: &str,
        grid: Value,
        rows: Vec<ReportRow>,
        mut errors: Vec<String>,
        inconclusive: bool,
        details: Value,
    ) -> Self {
        let failed = rows.iter().filter(|r| !r.pass).count();
        if failed > 0 {
            errors.push(format!("{failed} of {} rows violate the bound", rows.len()));
        }
        let status = if failed > 0 {
            Status::Fail
        } else if inconclusive {
            Status::Inconclusive
        } else {
            Status::Pass
        };
        Self {
            lemma: lemma.to_string(),
            grid,
            rows,
            pass: status == Status::Pass,
            status,
            errors,
            details,
        }
    }

    pub fn violations(&self) -> usize {
        self.rows.iter().filter(|r| !r.pass).count()
    }

    /// Smallest `bound - value - error` over all rows.
    pub fn min_strict_margin(&self) -> f64 {
        self.rows
            .iter()
            .map(|r| r.margin - r.error)
            .fold(f64::INFINITY, f64::min)
    }
}

fn check_eps(eps: f64) -> Result<()> {
    if !(eps > 0.0 && eps <= 0.25) {
        return Err(domain(format!("eps = {eps} is not in (0, 1/4]")));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// real integral

/// `int int_{[0,p]^2} (q^2 + (a - b + r)^2)^(eps - 1) da db`, computed as the
/// one-dimensional integral over `t = a - b` with weight `p - |t|`.
pub fn real_integral_lhs(p: f64, q: f64, r: f64, eps: f64, rel_tol: f64) -> Result<QuadResult> {
    if !(p > 0.0 && p <= 1.0) || !(q > 0.0 && q <= 1.0) {
        return Err(domain(format!("p = {p}, q = {q} must lie in (0, 1]")));
    }
    if !r.is_finite() {
        return Err(domain("r must be finite"));
    }
    check_eps(eps)?;
    let q2 = q * q;
    let g = |t: f64| (p - t.abs()) * (q2 + (t + r) * (t + r)).powf(eps - 1.0);
    let breaks = [0.0, -r, -r - q, -r + q];
    Ok(integrate(g, -p, p, &breaks, rel_tol, 0.0))
}

pub fn real_integral_bound(p: f64, q: f64, eps: f64) -> f64 {
    6.0 * p * q.powf(eps - 1.0)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntegralGrid {
    pub p: Vec<f64>,
    pub q: Vec<f64>,
    /// Shifts; `"q"` and `"-q"` tie the shift to the current `q`.
    pub r: Vec<RShift>,
    pub eps: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RShift {
    Fixed(f64),
    PlusQ,
    MinusQ,
}

impl RShift {
    fn resolve(self, q: f64) -> f64 {
        match self {
            RShift::Fixed(r) => r,
            RShift::PlusQ => q,
            RShift::MinusQ => -q,
        }
    }
}

impl Default for IntegralGrid {
    /// `p, q in {2^-j : j = 0..8}`, `r in {0, +-q, +-1}`, `eps in {0.01, 0.1, 0.2}`.
    fn default() -> Self {
        let pow: Vec<f64> = (0..=8).map(|j| 0.5f64.powi(j)).collect();
        Self {
            p: pow.clone(),
            q: pow,
            r: vec![
                RShift::Fixed(0.0),
                RShift::PlusQ,
                RShift::MinusQ,
                RShift::Fixed(1.0),
                RShift::Fixed(-1.0),
            ],
            eps: vec![0.01, 0.1, 0.2],
        }
    }
}

impl IntegralGrid {
    pub fn points(&self) -> Vec<(f64, f64, f64, f64)> {
        let mut out = Vec::new();
        for &p in &self.p {
            for &q in &self.q {
                for &r in &self.r {
                    for &eps in &self.eps {
                        out.push((p, q, r.resolve(q), eps));
                    }
                }
            }
        }
        out
    }
}

struct IntegralPoint {
    row: ReportRow,
    converged: bool,
}

fn integral_point(p: f64, q: f64, r: f64, eps: f64) -> Result<IntegralPoint> {
    let coarse = real_integral_lhs(p, q, r, eps, QUAD_REL_TOL)?;
    let fine = real_integral_lhs(p, q, r, eps, 0.5 * QUAD_REL_TOL)?;
    let declared = QUAD_REL_TOL * coarse.value.abs();
    let delta = (fine.value - coarse.value).abs();
    let converged = coarse.converged && fine.converged && delta < declared;
    let row = ReportRow::new(
        json!({
            "p": p, "q": q, "r": r, "eps": eps,
            "quad_error": coarse.error,
            "self_check_delta": delta,
            "segments": coarse.segments,
        }),
        coarse.value,
        real_integral_bound(p, q, eps),
        declared,
    );
    Ok(IntegralPoint { row, converged })
}

/// Checks the integral bound at a single point.
pub fn verify_real_integral(p: f64, q: f64, r: f64, eps: f64) -> Result<VerificationReport> {
    let pt = integral_point(p, q, r, eps)?;
    let grid = json!({ "p": [p], "q": [q], "r": [r], "eps": [eps] });
    let errors = if pt.converged {
        vec![]
    } else {
        vec!["quadrature did not reach the requested tolerance".into()]
    };
    Ok(VerificationReport::assemble(
        "real-integral",
        grid,
        vec![pt.row],
        errors,
        !pt.converged,
        json!({ "rel_tol": QUAD_REL_TOL }),
    ))
}

/// Sweeps the integral bound over a grid; points run in parallel.
pub fn verify_real_integral_grid(
    grid: &IntegralGrid,
    partitioning: Partitioning,
) -> Result<VerificationReport> {
    let points = grid.points();
    let results = partitioning.map_indexed(points.len(), |i| {
        let (p, q, r, eps) = points[i];
        integral_point(p, q, r, eps)
    });
    let mut rows = Vec::with_capacity(points.len());
    let mut unconverged = 0;
    for res in results {
        let pt = res?;
        if !pt.converged {
            unconverged += 1;
        }
        rows.push(pt.row);
    }
    let errors = if unconverged > 0 {
        vec![format!("{unconverged} grid points did not converge")]
    } else {
        vec![]
    };
    Ok(VerificationReport::assemble(
        "real-integral",
        serde_json::to_value(grid)?,
        rows,
        errors,
        unconverged > 0,
        json!({ "rel_tol": QUAD_REL_TOL, "points": points.len(), "partitions": partitioning.partitions }),
    ))
}

// ---------------------------------------------------------------------------
// coding bounds

#[derive(Clone, Debug, Default)]
struct DepthStats {
    pairs: u64,
    max_ratio: f64,
    ratio_violations: u64,
    min_loglog: f64,
    loglog_violations: u64,
    /// per eps: max `2^n |x-y|^(eps/2)`
    max_coding: Vec<f64>,
    coding_violations: Vec<u64>,
}

impl DepthStats {
    fn new(n_eps: usize) -> Self {
        Self {
            min_loglog: f64::INFINITY,
            max_coding: vec![0.0; n_eps],
            coding_violations: vec![0; n_eps],
            ..Default::default()
        }
    }

    fn merge(&mut self, o: &DepthStats) {
        self.pairs += o.pairs;
        self.max_ratio = self.max_ratio.max(o.max_ratio);
        self.ratio_violations += o.ratio_violations;
        self.min_loglog = self.min_loglog.min(o.min_loglog);
        self.loglog_violations += o.loglog_violations;
        for i in 0..self.max_coding.len() {
            self.max_coding[i] = self.max_coding[i].max(o.max_coding[i]);
            self.coding_violations[i] += o.coding_violations[i];
        }
    }
}

/// `log_3 log_3 (1 / d)`
pub fn log3_log3_inv(d: f64) -> f64 {
    let l3 = 3f64.ln();
    ((1.0 / d).ln() / l3).ln() / l3
}

/// Samples `m` independent `nu`-pairs and checks, per shared depth `n`:
/// `|x - y| <= c_n` always; `n <= log_3 log_3 |x - y|^-1` and
/// `2^n <= C_eps |x - y|^(-eps/2)` on levels where the construction has the
/// `3^(3^k)` interval counts. Deeper levels only get the first check.
pub fn verify_nxy_bound(
    levels: &CantorLevels,
    m: usize,
    eps_list: &[f64],
    seed: u64,
    partitioning: Partitioning,
) -> Result<VerificationReport> {
    if m == 0 {
        return Err(domain("need at least one pair"));
    }
    let constants = eps_list
        .iter()
        .map(|&e| c_epsilon(e))
        .collect::<Result<Vec<_>>>()?;
    let depth = levels.depth();
    let faithful = levels.faithful_depth();
    let ne = eps_list.len();
    let blocks = partitioning.run_blocks(seed, tags::PAIR_SELECTION, m, |range, rng| {
        let mut stats: Vec<DepthStats> = (0..=depth).map(|_| DepthStats::new(ne)).collect();
        for _ in range {
            let (x, y) = loop {
                let x = levels.sample_point(rng);
                let y = levels.sample_point(rng);
                if x.x != y.x {
                    break (x, y);
                }
            };
            let n = x.code.shared_depth(&y.code);
            let d = (x.x - y.x).abs();
            let st = &mut stats[n];
            st.pairs += 1;
            let ratio = d / levels.length(n);
            st.max_ratio = st.max_ratio.max(ratio);
            if ratio > 1.0 {
                st.ratio_violations += 1;
            }
            if faithful > 0 && n <= faithful {
                if n >= 1 {
                    let ll = log3_log3_inv(d);
                    st.min_loglog = st.min_loglog.min(ll);
                    if n as f64 > ll {
                        st.loglog_violations += 1;
                    }
                }
                for (i, (&eps, &c)) in eps_list.iter().zip(&constants).enumerate() {
                    let lhs = 2f64.powi(n as i32) * d.powf(eps / 2.0);
                    st.max_coding[i] = st.max_coding[i].max(lhs);
                    if lhs > c {
                        st.coding_violations[i] += 1;
                    }
                }
            }
        }
        stats
    });
    let mut stats: Vec<DepthStats> = (0..=depth).map(|_| DepthStats::new(ne)).collect();
    for b in &blocks {
        for (acc, s) in stats.iter_mut().zip(b) {
            acc.merge(s);
        }
    }

    let mut rows = Vec::new();
    for (n, st) in stats.iter().enumerate() {
        if st.pairs == 0 {
            continue;
        }
        rows.push(ReportRow::new(
            json!({ "check": "separation", "n": n, "pairs": st.pairs, "violations": st.ratio_violations }),
            st.max_ratio,
            1.0,
            0.0,
        ));
        if faithful == 0 || n > faithful {
            continue;
        }
        if n >= 1 {
            rows.push(ReportRow::new(
                json!({ "check": "loglog", "n": n, "pairs": st.pairs, "violations": st.loglog_violations }),
                n as f64,
                st.min_loglog,
                0.0,
            ));
        }
        for (i, &eps) in eps_list.iter().enumerate() {
            rows.push(ReportRow::new(
                json!({
                    "check": "coding", "n": n, "eps": eps, "pairs": st.pairs,
                    "violations": st.coding_violations[i],
                }),
                st.max_coding[i],
                constants[i],
                0.0,
            ));
        }
    }
    let coverage = if faithful == depth { "full" } else { "partial" };
    Ok(VerificationReport::assemble(
        "nxy",
        json!({ "pairs": m, "eps": eps_list, "depth": depth }),
        rows,
        vec![],
        false,
        json!({
            "coverage": coverage,
            "faithful_depth": faithful,
            "c_eps": constants,
            "seed": seed,
            "partitions": partitioning.partitions,
        }),
    ))
}

// ---------------------------------------------------------------------------
// increment expectation

/// Kolmogorov-Smirnov distance of a sample on `[0, 1]` from the uniform law.
/// Sorts the sample.
pub fn ks_uniform(sample: &mut [f64]) -> f64 {
    sample.sort_by(|a, b| a.total_cmp(b));
    let m = sample.len() as f64;
    sample
        .iter()
        .enumerate()
        .map(|(i, &u)| ((i + 1) as f64 / m - u).max(u - i as f64 / m))
        .fold(0.0, f64::max)
}

/// Coding constant that applies to pairs sharing `n` levels.
fn constant_for(levels: &CantorLevels, n: usize, eps: f64) -> Result<f64> {
    if n <= levels.faithful_depth() {
        c_epsilon(eps)
    } else {
        levels.coding_constant(eps)
    }
}

/// `6 C_eps / |x - y|^(1 - eps/2)`
pub fn increment_bound(levels: &CantorLevels, x: &CantorPoint, y: &CantorPoint, eps: f64) -> Result<f64> {
    let n = x.code.shared_depth(&y.code);
    let c = constant_for(levels, n, eps)?;
    Ok(6.0 * c / (x.x - y.x).abs().powf(1.0 - eps / 2.0))
}

/// Per-labelling data of the increment at a fixed pair.
struct IncrementDraw {
    /// Kernel of the full series: levels past the truncation depth are
    /// completed by their exact law.
    kernel: f64,
    /// Kernel of the series cut at the truncation depth.
    truncated: f64,
    /// Levels below the shared prefix down to the truncation depth,
    /// rescaled to `[0, 1)`.
    x_tail: f64,
    y_tail: f64,
}

struct PairIndices {
    x: Vec<u128>,
    y: Vec<u128>,
    n: usize,
}

impl PairIndices {
    fn draw(&self, lab: &Labeling, dx2: f64, df: f64, eps: f64) -> IncrementDraw {
        let depth = self.x.len();
        let mut xt = 0.0;
        let mut yt = 0.0;
        let mut w = 1.0;
        for k in self.n + 1..=depth {
            w *= 0.5;
            let bits = lab.level_bits(k);
            xt += w * bits.bit(self.x[k - 1]) as f64;
            yt += w * bits.bit(self.y[k - 1]) as f64;
        }
        // Below depth K the two points sit in different intervals (when
        // n < K), so their deeper bits are independent fair coins.
        let (xd, yd) = if self.n < depth {
            (
                lab.tail_uniform(depth, self.x[depth - 1]),
                lab.tail_uniform(depth, self.y[depth - 1]),
            )
        } else {
            (0.0, 0.0)
        };
        // shared levels cancel in phi(x) - phi(y)
        let scale = 0.5f64.powi(self.n as i32);
        let kern = |dv: f64| (dx2 + dv * dv).powf(eps - 1.0);
        IncrementDraw {
            kernel: kern(scale * (xt - yt + w * (xd - yd)) + df),
            truncated: kern(scale * (xt - yt) + df),
            x_tail: xt,
            y_tail: yt,
        }
    }
}

/// Monte Carlo mean over `m` labellings of
/// `(|x - y|^2 + |phi(x) + f(x) - phi(y) - f(y)|^2)^(eps - 1)` against
/// `6 C_eps / |x - y|^(1 - eps/2)`, plus KS checks that the parts of `phi(x)`
/// and `phi(y)` below the shared prefix are uniform on `[0, 2^-n]`.
#[allow(clippy::too_many_arguments)]
pub fn verify_increment_expectation(
    levels: &CantorLevels,
    x: &CantorPoint,
    y: &CantorPoint,
    f: &FunctionHandle,
    eps: f64,
    m: usize,
    seed: u64,
    partitioning: Partitioning,
) -> Result<VerificationReport> {
    check_eps(eps)?;
    if x.x == y.x {
        return Err(domain("the increment bound needs x != y"));
    }
    let depth = levels.depth();
    if x.code.depth() != depth || y.code.depth() != depth {
        return Err(domain(format!("points must be coded to depth {depth}")));
    }
    if f.dim() != 1 {
        return Err(domain("f must be one-dimensional"));
    }
    if m < 2 {
        return Err(domain("need at least two labellings"));
    }
    let idx = PairIndices {
        x: levels.global_indices(&x.code),
        y: levels.global_indices(&y.code),
        n: x.code.shared_depth(&y.code),
    };
    let n = idx.n;
    if n >= depth {
        return Err(domain(format!(
            "x and y share all {depth} levels; the increment is not determined at this depth"
        )));
    }
    let d = (x.x - y.x).abs();
    let dx2 = d * d;
    let df = f.eval1(x.x) - f.eval1(y.x);

    let draws: Vec<IncrementDraw> = partitioning
        .run_blocks(seed, tags::LABELINGS, m, |range, rng| {
            range
                .map(|_| idx.draw(&sample_labeling(rng), dx2, df, eps))
                .collect::<Vec<_>>()
        })
        .into_iter()
        .flatten()
        .collect();

    let mf = m as f64;
    let mean = draws.iter().map(|d| d.kernel).sum::<f64>() / mf;
    let var = draws.iter().map(|d| (d.kernel - mean).powi(2)).sum::<f64>() / (mf - 1.0);
    let stderr = (var / mf).sqrt();
    let truncated_mean = draws.iter().map(|d| d.truncated).sum::<f64>() / mf;
    let c = constant_for(levels, n, eps)?;
    let bound = 6.0 * c / d.powf(1.0 - eps / 2.0);

    let gap = 0.5f64.powi((depth - n) as i32);
    let ks_tol = (0.01f64).max(1.95 / mf.sqrt()) + gap;
    let mut xs: Vec<f64> = draws.iter().map(|d| d.x_tail).collect();
    let mut ys: Vec<f64> = draws.iter().map(|d| d.y_tail).collect();
    let ks_x = ks_uniform(&mut xs);
    let ks_y = ks_uniform(&mut ys);

    let base = json!({ "n": n, "distance": d, "eps": eps, "f": f.label(), "labelings": m });
    let with = |check: &str| {
        let mut v = base.clone();
        v["check"] = json!(check);
        v
    };
    let rows = vec![
        ReportRow::new(with("expectation"), mean, bound, MC_SIGMAS * stderr),
        ReportRow::new(with("ks_x"), ks_x, ks_tol, 0.0),
        ReportRow::new(with("ks_y"), ks_y, ks_tol, 0.0),
    ];
    Ok(VerificationReport::assemble(
        "increment",
        json!({ "x": x.x, "y": y.x, "eps": [eps], "labelings": m }),
        rows,
        vec![],
        false,
        json!({
            "c_eps": c,
            "mean": mean,
            "stderr": stderr,
            "margin_in_stderr": if stderr > 0.0 { (bound - mean) / stderr } else { f64::INFINITY },
            "truncated_mean": truncated_mean,
            "truncated_within_bound": truncated_mean <= bound,
            "discretization_gap": gap,
            "seed": seed,
            "partitions": partitioning.partitions,
        }),
    ))
}

/// Runs the increment check over `pair_count` pairs whose shared depths
/// cycle through `0, 1, 2` (capped below the depth), for every function and
/// every `eps`. Rows carry a `pair` index.
#[allow(clippy::too_many_arguments)]
pub fn verify_increment_suite(
    levels: &CantorLevels,
    functions: &[FunctionHandle],
    eps_list: &[f64],
    pair_count: usize,
    m: usize,
    seed: u64,
    partitioning: Partitioning,
) -> Result<VerificationReport> {
    if levels.depth() < 2 {
        return Err(domain("the increment suite needs depth at least 2"));
    }
    let cycle = levels.depth().min(3);
    let mut rng = stream(seed, tags::PAIR_SELECTION, 1);
    let pairs = (0..pair_count)
        .map(|i| levels.sample_pair_with_shared_depth(i % cycle, &mut rng))
        .collect::<Result<Vec<_>>>()?;
    let mut rows = Vec::new();
    let mut worst_sigma = f64::INFINITY;
    let mut case = 0u64;
    let mut truncated_over = 0usize;
    for (i, (x, y)) in pairs.iter().enumerate() {
        for f in functions {
            for &eps in eps_list {
                let rep = verify_increment_expectation(
                    levels,
                    x,
                    y,
                    f,
                    eps,
                    m,
                    derive_seed(seed, tags::LABELINGS, case),
                    partitioning,
                )?;
                case += 1;
                worst_sigma = worst_sigma.min(rep.details["margin_in_stderr"].as_f64().unwrap_or(f64::INFINITY));
                if rep.details["truncated_within_bound"] == json!(false) {
                    truncated_over += 1;
                }
                for mut row in rep.rows {
                    row.params["pair"] = json!(i);
                    rows.push(row);
                }
            }
        }
    }
    let labels: Vec<&str> = functions.iter().map(|f| f.label()).collect();
    Ok(VerificationReport::assemble(
        "increment",
        json!({ "pairs": pair_count, "functions": labels, "eps": eps_list, "labelings": m }),
        rows,
        vec![],
        false,
        json!({
            "cases": case,
            "min_margin_in_stderr": worst_sigma,
            "truncated_cases_over_bound": truncated_over,
            "depth": levels.depth(),
            "seed": seed,
            "partitions": partitioning.partitions,
        }),
    ))
}

// ---------------------------------------------------------------------------
// expected energy

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExpectedEnergyParams {
    pub eps: f64,
    pub labelings: usize,
    /// Pairs per graph energy and for each `nu` energy.
    pub pairs: usize,
}

fn mean_and_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, f64::INFINITY);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Averages `I_{2-2eps}` of the lifted measures over seeded labellings and
/// compares with `6 C_eps I_{1-eps/2}(nu)`. Also reports the stability of
/// `I_{1-eps/2}(nu)` and `I_{1-eps}(nu)` and the kernel-form agreement.
pub fn expected_energy_experiment(
    levels: &Arc<CantorLevels>,
    f: &FunctionHandle,
    params: &ExpectedEnergyParams,
    seed: u64,
    partitioning: Partitioning,
) -> Result<VerificationReport> {
    let eps = params.eps;
    check_eps(eps)?;
    if params.labelings < 2 {
        return Err(domain("need at least two labellings"));
    }
    let energies = partitioning.map_indexed(params.labelings, |j| {
        let lab = Labeling::from_seed(derive_seed(seed, tags::LABELINGS, j as u64));
        let w = WitnessFunction::new(levels.clone(), lab);
        graph_energy(
            &w,
            f,
            eps,
            params.pairs,
            derive_seed(seed, tags::GRAPH_PAIRS, j as u64),
            Partitioning::new(1),
        )
    });
    let energies = energies.into_iter().collect::<Result<Vec<_>>>()?;
    let means: Vec<f64> = energies.iter().map(|e| e.estimate.mean).collect();
    let mismatches: usize = energies.iter().map(|e| e.kernel_mismatches).sum();
    let (lhs, lhs_se) = mean_and_stderr(&means);

    let nu = NuSampler(levels);
    let target = energy_mc(
        &nu,
        1.0 - eps / 2.0,
        params.pairs,
        derive_seed(seed, tags::NU_ENERGY, 0),
        partitioning,
    )?;
    let premise = energy_mc(
        &nu,
        1.0 - eps,
        params.pairs,
        derive_seed(seed, tags::NU_ENERGY, 1),
        partitioning,
    )?;
    let c = levels.coding_constant(eps)?;
    let bound = 6.0 * c * target.mean;
    let combined = (lhs_se.powi(2) + (6.0 * c * target.stderr).powi(2)).sqrt();

    let rows = vec![
        ReportRow::new(
            json!({ "check": "expected_energy", "s": 2.0 - 2.0 * eps, "f": f.label() }),
            lhs,
            bound,
            MC_SIGMAS * combined,
        ),
        ReportRow::new(
            json!({ "check": "target_growth", "s": target.s, "ratios": target.doubling_ratios }),
            target.growth,
            STABLE_GROWTH,
            0.0,
        ),
        ReportRow::new(
            json!({ "check": "premise_growth", "s": premise.s, "ratios": premise.doubling_ratios }),
            premise.growth,
            STABLE_GROWTH,
            0.0,
        ),
        ReportRow::new(
            json!({ "check": "kernel_forms", "pairs": params.pairs * params.labelings }),
            mismatches as f64,
            0.0,
            0.0,
        ),
    ];
    let graph_growth = energies.iter().map(|e| e.estimate.growth).sum::<f64>() / means.len() as f64;
    Ok(VerificationReport::assemble(
        "expected-energy",
        serde_json::to_value(params)?,
        rows,
        vec![],
        false,
        json!({
            "c_eps": c,
            "expected_graph_energy": { "mean": lhs, "stderr": lhs_se },
            "mean_graph_growth": graph_growth,
            "nu_target": target,
            "nu_premise": premise,
            "depth": levels.depth(),
            "seed": seed,
            "partitions": partitioning.partitions,
        }),
    ))
}

// ---------------------------------------------------------------------------
// interchange of expectation and pair integral

fn kernel_matrix(
    levels: &CantorLevels,
    pairs: &[(CantorPoint, CantorPoint)],
    f: &FunctionHandle,
    eps: f64,
    labeling_root: u64,
    m: usize,
    partitioning: Partitioning,
) -> Vec<Vec<f64>> {
    let prepared: Vec<(PairIndices, f64, f64)> = pairs
        .iter()
        .map(|(x, y)| {
            let d = x.x - y.x;
            (
                PairIndices {
                    x: levels.global_indices(&x.code),
                    y: levels.global_indices(&y.code),
                    n: x.code.shared_depth(&y.code),
                },
                d * d,
                f.eval1(x.x) - f.eval1(y.x),
            )
        })
        .collect();
    partitioning.map_indexed(m, |j| {
        let lab = Labeling::from_seed(derive_seed(labeling_root, tags::LABELINGS, j as u64));
        prepared
            .iter()
            .map(|(idx, dx2, df)| idx.draw(&lab, *dx2, *df, eps).kernel)
            .collect()
    })
}

/// Averages the kernel over labellings pair by pair and then over pairs, and
/// separately integrates over pairs per labelling and then averages; the two
/// use independent labellings and must agree within Monte Carlo error.
pub fn fubini_consistency(
    levels: &CantorLevels,
    f: &FunctionHandle,
    eps: f64,
    pair_count: usize,
    m: usize,
    seed: u64,
    partitioning: Partitioning,
) -> Result<VerificationReport> {
    check_eps(eps)?;
    if pair_count == 0 || m < 2 {
        return Err(domain("need pairs and at least two labellings"));
    }
    let mut rng = stream(seed, tags::FUBINI, 0);
    let pairs: Vec<(CantorPoint, CantorPoint)> = (0..pair_count)
        .map(|_| loop {
            let x = levels.sample_point(&mut rng);
            let y = levels.sample_point(&mut rng);
            if x.x != y.x {
                break (x, y);
            }
        })
        .collect();
    let p = pair_count as f64;

    // omega first: per-pair expectations, then the pair average
    let a = kernel_matrix(levels, &pairs, f, eps, derive_seed(seed, tags::FUBINI, 1), m, partitioning);
    let per_pair: Vec<f64> = (0..pair_count)
        .map(|i| a.iter().map(|row| row[i]).sum::<f64>() / m as f64)
        .collect();
    let route_a = per_pair.iter().sum::<f64>() / p;
    let cols_a: Vec<f64> = a.iter().map(|row| row.iter().sum::<f64>() / p).collect();
    let (_, se_a) = mean_and_stderr(&cols_a);

    // pairs first: per-labelling energies, then the labelling average
    let b = kernel_matrix(levels, &pairs, f, eps, derive_seed(seed, tags::FUBINI, 2), m, partitioning);
    let energies: Vec<f64> = b.iter().map(|row| row.iter().sum::<f64>() / p).collect();
    let (route_b, se_b) = mean_and_stderr(&energies);

    let bounds = pairs
        .iter()
        .map(|(x, y)| increment_bound(levels, x, y, eps))
        .collect::<Result<Vec<_>>>()?;
    let mean_bound = bounds.iter().sum::<f64>() / p;

    let rows = vec![
        ReportRow::new(
            json!({ "check": "routes_agree", "omega_first": route_a, "pairs_first": route_b }),
            (route_a - route_b).abs(),
            0.0,
            MC_SIGMAS * (se_a * se_a + se_b * se_b).sqrt(),
        ),
        ReportRow::new(
            json!({ "check": "below_pairwise_bound" }),
            route_a,
            mean_bound,
            MC_SIGMAS * se_a,
        ),
    ];
    Ok(VerificationReport::assemble(
        "fubini",
        json!({ "pairs": pair_count, "labelings": m, "eps": eps, "f": f.label() }),
        rows,
        vec![],
        false,
        json!({
            "omega_first": { "mean": route_a, "stderr": se_a },
            "pairs_first": { "mean": route_b, "stderr": se_b },
            "seed": seed,
            "partitions": partitioning.partitions,
        }),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cantor::{build_levels, CantorConfig, PointCode};

    /// Direct two-dimensional nested quadrature; independent of the
    /// diagonal substitution.
    fn lhs_oracle(p: f64, q: f64, r: f64, eps: f64) -> f64 {
        let inner = |a: f64| {
            let k = |b: f64| (q * q + (a - b + r).powi(2)).powf(eps - 1.0);
            integrate(k, 0.0, p, &[a + r, a + r - q, a + r + q], 1e-10, 0.0).value
        };
        integrate(inner, 0.0, p, &[-r, p - r], 1e-8, 0.0).value
    }

    #[test]
    fn substitution_matches_nested_quadrature() {
        for &(p, q, r, eps) in &[
            (1.0, 1.0, 0.0, 0.1),
            (0.5, 0.125, 0.125, 0.2),
            (0.25, 1.0 / 256.0, 0.0, 0.01),
            (1.0, 1.0 / 64.0, -1.0, 0.1),
            (1.0 / 8.0, 0.5, 1.0, 0.2),
        ] {
            let lhs = real_integral_lhs(p, q, r, eps, 1e-8).unwrap();
            let oracle = lhs_oracle(p, q, r, eps);
            assert!(
                (lhs.value - oracle).abs() < 1e-6 * oracle,
                "{p} {q} {r} {eps}: {} vs {oracle}",
                lhs.value
            );
        }
    }

    #[test]
    fn unit_square_small_eps_is_below_one() {
        let rep = verify_real_integral(1.0, 1.0, 0.0, 1e-6).unwrap();
        assert!(rep.pass);
        assert!(rep.rows[0].value <= 1.0 && rep.rows[0].value > 0.6);
    }

    #[test]
    fn far_shift_is_tiny() {
        let (p, q, r, eps) = (0.5, 0.25, 10.0, 0.1);
        let rep = verify_real_integral(p, q, r, eps).unwrap();
        let crude = p * p / (q * q + (r - p).powi(2)).powf(1.0 - eps);
        assert!(rep.rows[0].value <= crude * (1.0 + 1e-6));
        assert!(rep.rows[0].value < 1e-2 * rep.rows[0].bound);
    }

    #[test]
    fn integral_domain_errors() {
        assert!(real_integral_lhs(0.0, 0.5, 0.0, 0.1, 1e-4).is_err());
        assert!(real_integral_lhs(0.5, 1.5, 0.0, 0.1, 1e-4).is_err());
        assert!(real_integral_lhs(0.5, 0.5, 0.0, 0.3, 1e-4).is_err());
    }

    #[test]
    fn default_grid_size() {
        assert_eq!(IntegralGrid::default().points().len(), 9 * 9 * 5 * 3);
    }

    #[test]
    fn report_status_logic() {
        let ok = ReportRow::new(json!({}), 1.0, 1.0, 0.0);
        let bad = ReportRow::new(json!({}), 1.1, 1.0, 0.05);
        assert!(ok.pass && !bad.pass);
        let r = VerificationReport::assemble("x", json!({}), vec![ok.clone()], vec![], true, json!({}));
        assert_eq!(r.status, Status::Inconclusive);
        assert!(!r.pass);
        let r = VerificationReport::assemble("x", json!({}), vec![ok, bad], vec![], true, json!({}));
        assert_eq!(r.status, Status::Fail);
        assert_eq!(r.violations(), 1);
    }

    #[test]
    fn nxy_on_faithful_levels() {
        let lv = build_levels(&CantorConfig::tower(2, 0.5).unwrap()).unwrap();
        let rep = verify_nxy_bound(&lv, 50_000, &[0.1, 0.5], 3, Partitioning::new(2)).unwrap();
        assert!(rep.pass, "{:?}", rep.errors);
        assert_eq!(rep.details["coverage"], "full");
        assert!(rep.rows.iter().any(|r| r.params["check"] == "loglog"));
    }

    #[test]
    fn nxy_on_other_branching_is_partial() {
        let lv = build_levels(&CantorConfig::new(vec![4, 5, 3], 0.5).unwrap()).unwrap();
        let rep = verify_nxy_bound(&lv, 20_000, &[0.1], 3, Partitioning::default()).unwrap();
        assert!(rep.pass);
        assert_eq!(rep.details["coverage"], "partial");
        assert!(rep.rows.iter().all(|r| r.params["check"] == "separation"));
    }

    #[test]
    fn explicit_level_one_pair() {
        let lv = build_levels(&CantorConfig::tower(2, 0.5).unwrap()).unwrap();
        let x = lv.point_from_code(PointCode { digits: vec![3, 0] }, 0.0).unwrap();
        let y = lv.point_from_code(PointCode { digits: vec![3, 728] }, 1.0).unwrap();
        assert_eq!(x.code.shared_depth(&y.code), 1);
        let d = (x.x - y.x).abs();
        assert!(d <= lv.length(1) * (1.0 + 1e-12));
        assert!(lv.length(1) <= 1.0 / 27.0);
        assert!(log3_log3_inv(d) >= 1.0);
    }

    #[test]
    fn ks_of_exact_grid_is_one_cell() {
        let mut s: Vec<f64> = (0..1000).map(|i| (i as f64 + 0.5) / 1000.0).collect();
        assert!((ks_uniform(&mut s) - 0.0005).abs() < 1e-12);
        let mut c = vec![0.0; 10];
        assert_eq!(ks_uniform(&mut c), 1.0);
    }

    #[test]
    fn increment_small_run() {
        let lv = build_levels(&CantorConfig::tower(6, 0.5).unwrap()).unwrap();
        let mut rng = stream(11, 0, 0);
        let (x, y) = lv.sample_pair_with_shared_depth(1, &mut rng).unwrap();
        let rep = verify_increment_expectation(
            &lv,
            &x,
            &y,
            &FunctionHandle::zero(1),
            0.2,
            20_000,
            5,
            Partitioning::new(2),
        )
        .unwrap();
        assert!(rep.pass, "{:?}", rep.rows);
        let err = verify_increment_expectation(&lv, &x, &x, &FunctionHandle::zero(1), 0.2, 100, 5, Partitioning::default());
        assert!(err.is_err());
        // same deepest interval: nothing left to average over
        let x2 = lv.point_from_code(x.code.clone(), 0.25).unwrap();
        let y2 = lv.point_from_code(x.code.clone(), 0.75).unwrap();
        let err = verify_increment_expectation(&lv, &x2, &y2, &FunctionHandle::zero(1), 0.2, 100, 5, Partitioning::default());
        assert!(err.is_err());
    }

    #[test]
    fn completed_tail_removes_the_zero_atom() {
        // Close pair two levels below the top: the cut series puts mass
        // 2^-(K-n) on a zero increment, the completed series does not.
        let lv = build_levels(&CantorConfig::tower(4, 0.5).unwrap()).unwrap();
        let mut rng = stream(3, 0, 0);
        let (x, y) = lv.sample_pair_with_shared_depth(2, &mut rng).unwrap();
        let rep = verify_increment_expectation(&lv, &x, &y, &FunctionHandle::zero(1), 0.1, 4000, 9, Partitioning::default())
            .unwrap();
        let full = rep.details["mean"].as_f64().unwrap();
        let cut = rep.details["truncated_mean"].as_f64().unwrap();
        assert!(cut > full, "{cut} vs {full}");
    }

    #[test]
    fn fubini_routes_agree() {
        let lv = build_levels(&CantorConfig::tower(8, 0.5).unwrap()).unwrap();
        let rep = fubini_consistency(&lv, &FunctionHandle::zero(1), 0.2, 32, 2000, 4, Partitioning::new(2)).unwrap();
        assert!(rep.pass, "{:?}", rep.rows);
    }
}
