//! Truncated fat Cantor set.
//!
//! Level `k` of the construction holds `m_k = b_1 * ... * b_k` closed intervals of
//! common length `c_k = L_k / m_k`. Each level-`k` interval contains `b_{k+1}`
//! equally spaced children flush with its endpoints, so `0` and `1` stay in every
//! level. Geometry is computed from indices on demand; nothing per-interval is
//! stored.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{config, domain, Error, Result};
use crate::rng::{tags, Partitioning, StreamRng};

/// Branching of the first two levels of the tower preset
/// (`m_1 = 3^3`, `m_2 = 3^9`); deeper levels repeat the last factor.
pub const TOWER_BRANCHING: [u32; 2] = [27, 729];

/// Absolute slack used when deciding interval membership of an `f64`.
const MEMBERSHIP_SLACK: f64 = 4.0 * f64::EPSILON;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BranchingSpec {
    /// `"tower"` (alias `"paper"`)
    Preset(String),
    List(Vec<u32>),
}

/// On-disk form of a [`CantorConfig`].
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CantorConfigFile {
    pub max_depth: usize,
    pub branching: BranchingSpec,
    pub lambda: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub measure_schedule: Option<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CantorConfig {
    pub max_depth: usize,
    /// `b_1..b_K`
    pub branching: Vec<u32>,
    pub lambda: f64,
    /// `L_0..L_K`
    pub measure_schedule: Vec<f64>,
}

/// `L_k = lambda + (1 - lambda) 2^-k`
pub fn default_schedule(lambda: f64, depth: usize) -> Vec<f64> {
    (0..=depth)
        .map(|k| lambda + (1.0 - lambda) * 0.5f64.powi(k as i32))
        .collect()
}

impl CantorConfig {
    pub fn new(branching: Vec<u32>, lambda: f64) -> Result<Self> {
        let depth = branching.len();
        let cfg = Self {
            max_depth: depth,
            branching,
            lambda,
            measure_schedule: default_schedule(lambda, depth),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Tower preset: `b = (27, 729, 729, ...)`, default schedule.
    pub fn tower(depth: usize, lambda: f64) -> Result<Self> {
        Self::new(tower_branching(depth), lambda)
    }

    pub fn with_schedule(mut self, schedule: Vec<f64>) -> Result<Self> {
        self.measure_schedule = schedule;
        self.validate()?;
        Ok(self)
    }

    pub fn from_file(file: CantorConfigFile) -> Result<Self> {
        if file.max_depth < 1 {
            return Err(config("max_depth", "must be at least 1"));
        }
        let branching = match file.branching {
            BranchingSpec::Preset(name) if name == "tower" || name == "paper" => {
                tower_branching(file.max_depth)
            }
            BranchingSpec::Preset(name) => {
                return Err(config("branching", format!("unknown preset `{name}`")))
            }
            BranchingSpec::List(list) if list.len() == file.max_depth => list,
            BranchingSpec::List(list) if list.len() == 1 => vec![list[0]; file.max_depth],
            BranchingSpec::List(list) => {
                return Err(config(
                    "branching",
                    format!("expected 1 or {} entries, got {}", file.max_depth, list.len()),
                ))
            }
        };
        let schedule = match file.measure_schedule {
            Some(s) => s,
            None => default_schedule(file.lambda, file.max_depth),
        };
        let cfg = Self {
            max_depth: file.max_depth,
            branching,
            lambda: file.lambda,
            measure_schedule: schedule,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: CantorConfigFile = serde_json::from_str(text)
            .map_err(|e| config("config", format!("malformed config: {e}")))?;
        Self::from_file(file)
    }

    pub fn to_file(&self) -> CantorConfigFile {
        CantorConfigFile {
            max_depth: self.max_depth,
            branching: BranchingSpec::List(self.branching.clone()),
            lambda: self.lambda,
            measure_schedule: Some(self.measure_schedule.clone()),
        }
    }

    /// Field-level checks. Nesting feasibility is checked by [`build_levels`].
    pub fn validate(&self) -> Result<()> {
        if self.max_depth < 1 {
            return Err(config("max_depth", "must be at least 1"));
        }
        if !(self.lambda > 0.0 && self.lambda < 1.0) {
            return Err(config("lambda", format!("{} is not in (0, 1)", self.lambda)));
        }
        if self.branching.len() != self.max_depth {
            return Err(config(
                "branching",
                format!("expected {} entries, got {}", self.max_depth, self.branching.len()),
            ));
        }
        if let Some(k) = self.branching.iter().position(|&b| b < 2) {
            return Err(config("branching", format!("b_{} must be at least 2", k + 1)));
        }
        let s = &self.measure_schedule;
        if s.len() != self.max_depth + 1 {
            return Err(config(
                "measure_schedule",
                format!("expected {} entries (L_0..L_K), got {}", self.max_depth + 1, s.len()),
            ));
        }
        if s[0] != 1.0 {
            return Err(config("measure_schedule", "L_0 must equal 1"));
        }
        for (k, &l) in s.iter().enumerate().skip(1) {
            if !(l > self.lambda && l < 1.0) {
                return Err(config(
                    "measure_schedule",
                    format!("L_{k} = {l} is not in (lambda, 1)"),
                ));
            }
        }
        Ok(())
    }
}

pub fn tower_branching(depth: usize) -> Vec<u32> {
    (0..depth)
        .map(|k| TOWER_BRANCHING[k.min(TOWER_BRANCHING.len() - 1)])
        .collect()
}

/// Per-level child indices of a point, 0-based within each parent.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct PointCode {
    pub digits: Vec<u32>,
}

impl PointCode {
    pub fn depth(&self) -> usize {
        self.digits.len()
    }

    /// Number of leading levels on which the two codes agree.
    pub fn shared_depth(&self, other: &PointCode) -> usize {
        self.digits
            .iter()
            .zip(&other.digits)
            .take_while(|(a, b)| a == b)
            .count()
    }
}

/// A point of `E_K` together with its exact code.
#[derive(Clone, Debug, PartialEq)]
pub struct CantorPoint {
    pub x: f64,
    pub code: PointCode,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GapDescriptor {
    /// Level whose gap contains the point.
    pub level: usize,
    /// Code of the enclosing level-`(level - 1)` interval.
    pub prefix: PointCode,
    /// Child to the left of the gap (0-based).
    pub left_child: u32,
    /// Right end of the left child; a point of the set.
    pub left: f64,
    /// Left end of the right child; a point of the set.
    pub right: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Location {
    Inside(PointCode),
    Gap(GapDescriptor),
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LevelRow {
    pub k: usize,
    pub count: u128,
    pub length: f64,
    pub measure: f64,
}

#[derive(Clone, Debug)]
pub struct CantorLevels {
    config: CantorConfig,
    /// `m_0..m_K`
    counts: Vec<u128>,
    /// `c_0..c_K`
    lengths: Vec<f64>,
    /// Child spacing at level `k`; index 0 unused.
    pitches: Vec<f64>,
    faithful_depth: usize,
}

pub fn build_levels(config: &CantorConfig) -> Result<CantorLevels> {
    CantorLevels::new(config.clone())
}

impl CantorLevels {
    pub fn new(config: CantorConfig) -> Result<Self> {
        config.validate()?;
        let depth = config.max_depth;
        let mut counts = vec![1u128];
        let mut lengths = vec![1.0];
        let mut pitches = vec![0.0];
        for k in 1..=depth {
            let b = config.branching[k - 1];
            let m = counts[k - 1]
                .checked_mul(b as u128)
                .ok_or_else(|| Error::Construction {
                    level: k,
                    reason: "interval count overflows 128 bits".into(),
                })?;
            let c = config.measure_schedule[k] / m as f64;
            let parent = lengths[k - 1];
            if b as f64 * c >= parent {
                return Err(Error::Construction {
                    level: k,
                    reason: format!(
                        "{b} children of length {c:e} do not fit disjointly in a parent of length {parent:e}"
                    ),
                });
            }
            counts.push(m);
            lengths.push(c);
            pitches.push((parent - c) / (b - 1) as f64);
        }
        let faithful_depth = (1..=depth)
            .take_while(|&k| {
                3u128
                    .checked_pow(3u32.pow(k as u32))
                    .is_some_and(|target| target == counts[k])
            })
            .count();
        Ok(Self {
            config,
            counts,
            lengths,
            pitches,
            faithful_depth,
        })
    }

    pub fn config(&self) -> &CantorConfig {
        &self.config
    }

    pub fn depth(&self) -> usize {
        self.config.max_depth
    }

    pub fn lambda(&self) -> f64 {
        self.config.lambda
    }

    pub fn branching(&self, k: usize) -> u32 {
        self.config.branching[k - 1]
    }

    pub fn count(&self, k: usize) -> u128 {
        self.counts[k]
    }

    pub fn length(&self, k: usize) -> f64 {
        self.lengths[k]
    }

    pub fn measure(&self, k: usize) -> f64 {
        self.config.measure_schedule[k]
    }

    /// Distance between the left ends of neighbouring children at level `k`.
    pub fn pitch(&self, k: usize) -> f64 {
        self.pitches[k]
    }

    /// Width of the gaps between siblings at level `k`.
    pub fn gap(&self, k: usize) -> f64 {
        self.pitches[k] - self.lengths[k]
    }

    /// Deepest level whose interval count equals `3^(3^k)` on every level
    /// above it, i.e. the levels on which the `3^(-3^n)` coding bounds apply.
    pub fn faithful_depth(&self) -> usize {
        self.faithful_depth
    }

    /// Total-variation distance between sampling on `E_K` and the limit measure.
    pub fn tv_bound(&self) -> f64 {
        let lk = self.measure(self.depth());
        (lk - self.lambda()) / lk
    }

    pub fn level_table(&self) -> Vec<LevelRow> {
        (0..=self.depth())
            .map(|k| LevelRow {
                k,
                count: self.count(k),
                length: self.length(k),
                measure: self.measure(k),
            })
            .collect()
    }

    /// Interval `i` (1-based) of level `k`.
    pub fn interval(&self, k: usize, i: u128) -> Result<(f64, f64)> {
        if k > self.depth() {
            return Err(domain(format!("level {k} exceeds depth {}", self.depth())));
        }
        if i < 1 || i > self.count(k) {
            return Err(domain(format!(
                "interval index {i} outside 1..={} at level {k}",
                self.count(k)
            )));
        }
        let code = self.code_of_index(k, i);
        let a = self.start_of(&code);
        Ok((a, a + self.length(k)))
    }

    /// Mixed-radix decomposition of a 1-based global index.
    pub fn code_of_index(&self, k: usize, i: u128) -> PointCode {
        let mut rest = i - 1;
        let mut digits = vec![0u32; k];
        for level in (1..=k).rev() {
            let b = self.branching(level) as u128;
            digits[level - 1] = (rest % b) as u32;
            rest /= b;
        }
        PointCode { digits }
    }

    /// 1-based global indices `i_1..i_depth` of a code.
    pub fn global_indices(&self, code: &PointCode) -> Vec<u128> {
        let mut out = Vec::with_capacity(code.depth());
        let mut i = 0u128;
        for (k, &d) in code.digits.iter().enumerate() {
            i = i * self.branching(k + 1) as u128 + d as u128;
            out.push(i + 1);
        }
        out
    }

    /// Left end of the interval addressed by `code`.
    pub fn start_of(&self, code: &PointCode) -> f64 {
        let mut start = 0.0;
        for (k, &d) in code.digits.iter().enumerate() {
            start += d as f64 * self.pitches[k + 1];
        }
        start
    }

    /// Codes every `x` in `[0, 1]`: either a full depth-`K` code or the gap
    /// it falls in.
    pub fn locate(&self, x: f64) -> Result<Location> {
        if !(0.0..=1.0).contains(&x) {
            return Err(domain(format!("{x} is outside [0, 1]")));
        }
        let mut start = 0.0;
        let mut digits = Vec::with_capacity(self.depth());
        for k in 1..=self.depth() {
            let b = self.branching(k);
            let pitch = self.pitches[k];
            let len = self.lengths[k];
            let offset = x - start;
            let j = ((offset / pitch).floor().max(0.0) as u64).min(b as u64 - 1) as u32;
            let within = offset - j as f64 * pitch;
            if within <= len + MEMBERSHIP_SLACK {
                start += j as f64 * pitch;
                digits.push(j);
            } else {
                let left = start + j as f64 * pitch + len;
                let right = start + (j + 1) as f64 * pitch;
                return Ok(Location::Gap(GapDescriptor {
                    level: k,
                    prefix: PointCode { digits },
                    left_child: j,
                    left,
                    right,
                }));
            }
        }
        Ok(Location::Inside(PointCode { digits }))
    }

    /// Code of the right end of the left child of a gap: the rightmost
    /// descendant at every deeper level.
    pub fn left_flank(&self, gap: &GapDescriptor) -> PointCode {
        let mut digits = gap.prefix.digits.clone();
        digits.push(gap.left_child);
        for k in gap.level + 1..=self.depth() {
            digits.push(self.branching(k) - 1);
        }
        PointCode { digits }
    }

    /// Code of the left end of the right child of a gap.
    pub fn right_flank(&self, gap: &GapDescriptor) -> PointCode {
        let mut digits = gap.prefix.digits.clone();
        digits.push(gap.left_child + 1);
        digits.resize(self.depth(), 0);
        PointCode { digits }
    }

    /// Uniform draw from `E_K`: every depth-`K` interval has the same length,
    /// so the index digits are independent and uniform.
    pub fn sample_point(&self, rng: &mut StreamRng) -> CantorPoint {
        let mut digits = Vec::with_capacity(self.depth());
        let mut start = 0.0;
        for k in 1..=self.depth() {
            let d = rng.gen_range(0..self.branching(k));
            start += d as f64 * self.pitches[k];
            digits.push(d);
        }
        let u: f64 = rng.gen();
        CantorPoint {
            x: start + u * self.lengths[self.depth()],
            code: PointCode { digits },
        }
    }

    /// The point at fraction `u` of the depth-`K` interval addressed by `code`.
    pub fn point_from_code(&self, code: PointCode, u: f64) -> Result<CantorPoint> {
        if code.depth() != self.depth() {
            return Err(domain(format!(
                "code has depth {}, expected {}",
                code.depth(),
                self.depth()
            )));
        }
        for (k, &d) in code.digits.iter().enumerate() {
            if d >= self.branching(k + 1) {
                return Err(domain(format!("digit {d} out of range at level {}", k + 1)));
            }
        }
        if !(0.0..=1.0).contains(&u) {
            return Err(domain(format!("fraction {u} outside [0, 1]")));
        }
        Ok(CantorPoint {
            x: self.start_of(&code) + u * self.lengths[self.depth()],
            code,
        })
    }

    /// A `nu`-pair conditioned on sharing exactly `n` levels.
    pub fn sample_pair_with_shared_depth(
        &self,
        n: usize,
        rng: &mut StreamRng,
    ) -> Result<(CantorPoint, CantorPoint)> {
        if n >= self.depth() {
            return Err(domain(format!(
                "shared depth {n} must be below the depth {}",
                self.depth()
            )));
        }
        let x = self.sample_point(rng);
        let mut digits = x.code.digits[..n].to_vec();
        let b = self.branching(n + 1);
        let other = rng.gen_range(0..b - 1);
        let own = x.code.digits[n];
        digits.push(if other >= own { other + 1 } else { other });
        for k in n + 2..=self.depth() {
            digits.push(rng.gen_range(0..self.branching(k)));
        }
        let y = self.point_from_code(PointCode { digits }, rng.gen())?;
        Ok((x, y))
    }

    pub fn sample_nu(&self, rng: &mut StreamRng) -> f64 {
        self.sample_point(rng).x
    }

    /// `n` draws from `nu` keyed by `seed`; identical for any partition count.
    pub fn sample_nu_batch(&self, n: usize, seed: u64, partitioning: Partitioning) -> Vec<f64> {
        partitioning
            .run_blocks(seed, tags::NU_SAMPLES, n, |range, rng| {
                range.map(|_| self.sample_nu(rng)).collect::<Vec<_>>()
            })
            .concat()
    }

    /// `max_n 2^n r_n^(eps/2)` where `r_n` bounds `|x - y|` for pairs sharing
    /// exactly `n` levels: `3^(-3^n)` on faithful levels, `c_n` below them.
    pub fn coding_constant(&self, eps: f64) -> Result<f64> {
        let mut best = c_epsilon(eps)?;
        for n in self.faithful_depth + 1..=self.depth() {
            let term = (n as f64 * std::f64::consts::LN_2 + 0.5 * eps * self.lengths[n].ln()).exp();
            best = best.max(term);
        }
        Ok(best)
    }
}

/// Deepest shared level of two distinct points.
pub fn n_of_pair(x: &CantorPoint, y: &CantorPoint) -> Result<usize> {
    if x.x == y.x && x.code == y.code {
        return Err(domain("n(x, y) is undefined for x = y"));
    }
    Ok(x.code.shared_depth(&y.code))
}

/// `2^n 3^(-3^n eps / 2)`, the value of `2^n |x-y|^(eps/2)` at the largest
/// separation `3^(-3^n)` allowed for pairs with `n(x, y) = n >= 1`.
pub fn coding_term(n: u32, eps: f64) -> f64 {
    (n as f64 * std::f64::consts::LN_2 - 3f64.powi(n as i32) * 0.5 * eps * 3f64.ln()).exp()
}

/// Smallest `C` with `2^n(x,y) <= C |x - y|^(-eps/2)` on the tower
/// levels. Pairs with `n = 0` only satisfy `|x - y| <= 1`, which contributes 1.
pub fn c_epsilon(eps: f64) -> Result<f64> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(domain(format!("eps = {eps} is not in (0, 1)")));
    }
    let mut best = 1.0f64;
    let mut prev = coding_term(1, eps);
    best = best.max(prev);
    // log of the term is concave in n, so the first decrease is past the peak.
    for n in 2.. {
        let t = coding_term(n, eps);
        if t < prev {
            break;
        }
        best = best.max(t);
        prev = t;
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use approx::assert_relative_eq;

    fn levels(b: Vec<u32>, lambda: f64) -> CantorLevels {
        CantorLevels::new(CantorConfig::new(b, lambda).unwrap()).unwrap()
    }

    #[test]
    fn tower_first_level_length() {
        let cfg = CantorConfig::tower(1, 0.5).unwrap();
        assert_eq!(cfg.measure_schedule[1], 0.75);
        let lv = build_levels(&cfg).unwrap();
        assert_eq!(lv.count(1), 27);
        assert_relative_eq!(lv.length(1), 0.75 / 27.0, max_relative = 1e-15);
        assert_relative_eq!(lv.length(1), 0.0277778, epsilon = 1e-7);
    }

    #[test]
    fn default_schedule_depth_three() {
        let lv = levels(vec![3, 3, 3], 0.5);
        assert_eq!(lv.measure(3), 0.5625);
        assert_eq!(lv.count(3), 27);
        assert_relative_eq!(lv.length(3), 0.0208333, epsilon = 1e-7);
    }

    #[test]
    fn endpoints_are_interval_endpoints() {
        for lv in [levels(vec![3, 5, 2], 0.3), levels(tower_branching(3), 0.5)] {
            for k in 1..=lv.depth() {
                let (a, _) = lv.interval(k, 1).unwrap();
                let (_, b) = lv.interval(k, lv.count(k)).unwrap();
                assert_eq!(a, 0.0);
                assert!((b - 1.0).abs() < 1e-14, "level {k} ends at {b}");
            }
        }
    }

    #[test]
    fn exhaustive_nesting_and_disjointness() {
        let lv = levels(vec![3, 4, 2], 0.4);
        for k in 1..=lv.depth() {
            let m = lv.count(k);
            let mut total = 0.0;
            let mut prev_end = f64::NEG_INFINITY;
            for i in 1..=m {
                let (a, b) = lv.interval(k, i).unwrap();
                assert!(a > prev_end, "overlap at level {k} index {i}");
                prev_end = b;
                total += b - a;
                if k > 1 {
                    let parent = (i - 1) / lv.branching(k) as u128 + 1;
                    let (pa, pb) = lv.interval(k - 1, parent).unwrap();
                    assert!(a >= pa - 1e-15 && b <= pb + 1e-15);
                }
            }
            assert_relative_eq!(total, lv.measure(k), max_relative = 1e-12);
            assert_relative_eq!(m as f64 * lv.length(k), lv.measure(k), max_relative = 1e-15);
        }
    }

    #[test]
    fn infeasible_schedule_names_level() {
        let cfg = CantorConfig::new(vec![3, 3], 0.5)
            .unwrap()
            .with_schedule(vec![1.0, 0.7, 0.8])
            .unwrap();
        match build_levels(&cfg) {
            Err(Error::Construction { level, .. }) => assert_eq!(level, 2),
            other => panic!("expected construction error, got {other:?}"),
        }
    }

    #[test]
    fn config_validation() {
        assert!(matches!(
            CantorConfig::new(vec![3], 1.0),
            Err(Error::Config { ref field, .. }) if field == "lambda"
        ));
        assert!(matches!(
            CantorConfig::new(vec![3, 1], 0.5),
            Err(Error::Config { ref field, .. }) if field == "branching"
        ));
        let json = r#"{"max_depth": 3, "branching": "tower", "lambda": 0.5}"#;
        let cfg = CantorConfig::from_json(json).unwrap();
        assert_eq!(cfg.branching, vec![27, 729, 729]);
        let alias = r#"{"max_depth": 3, "branching": "paper", "lambda": 0.5}"#;
        assert_eq!(CantorConfig::from_json(alias).unwrap(), cfg);
        let json = r#"{"max_depth": 2, "branching": [4], "lambda": 0.25}"#;
        assert_eq!(CantorConfig::from_json(json).unwrap().branching, vec![4, 4]);
        assert!(CantorConfig::from_json(r#"{"max_depth": 2, "branching": "nope", "lambda": 0.5}"#).is_err());
    }

    #[test]
    fn count_overflow_is_construction_error() {
        let cfg = CantorConfig::tower(14, 0.5).unwrap();
        assert!(matches!(build_levels(&cfg), Err(Error::Construction { .. })));
        assert!(build_levels(&CantorConfig::tower(13, 0.5).unwrap()).is_ok());
    }

    #[test]
    fn faithful_depth_of_presets() {
        assert_eq!(build_levels(&CantorConfig::tower(2, 0.5).unwrap()).unwrap().faithful_depth(), 2);
        assert_eq!(build_levels(&CantorConfig::tower(5, 0.5).unwrap()).unwrap().faithful_depth(), 2);
        assert_eq!(levels(vec![3, 3], 0.5).faithful_depth(), 0);
    }

    #[test]
    fn locate_endpoints() {
        let lv = levels(vec![4, 3, 5], 0.5);
        match lv.locate(0.0).unwrap() {
            Location::Inside(code) => assert_eq!(code.digits, vec![0, 0, 0]),
            g => panic!("{g:?}"),
        }
        match lv.locate(1.0).unwrap() {
            Location::Inside(code) => {
                assert_eq!(code.digits, vec![3, 2, 4]);
                assert_eq!(lv.global_indices(&code), vec![4, 12, 60]);
            }
            g => panic!("{g:?}"),
        }
        assert!(lv.locate(1.5).is_err());
    }

    #[test]
    fn locate_first_gap_midpoint() {
        let lv = levels(vec![5, 3], 0.5);
        let c1 = lv.length(1);
        let (second_start, _) = lv.interval(1, 2).unwrap();
        match lv.locate(0.5 * (c1 + second_start)).unwrap() {
            Location::Gap(g) => {
                assert_eq!(g.level, 1);
                assert_eq!(g.left_child, 0);
                assert_relative_eq!(g.left, c1, max_relative = 1e-15);
                assert_relative_eq!(g.right, second_start, max_relative = 1e-15);
                assert_eq!(lv.left_flank(&g).digits, vec![0, 2]);
                assert_eq!(lv.right_flank(&g).digits, vec![1, 0]);
            }
            g => panic!("{g:?}"),
        }
    }

    #[test]
    fn n_of_pair_cases() {
        let lv = levels(vec![3, 3, 3], 0.5);
        let pt = |x: f64| match lv.locate(x).unwrap() {
            Location::Inside(code) => CantorPoint { x, code },
            _ => panic!("{x} is in a gap"),
        };
        assert_eq!(n_of_pair(&pt(0.0), &pt(1.0)).unwrap(), 0);
        // same level-2 interval, different level-3 children
        let (a, _) = lv.interval(3, 1).unwrap();
        let (b, _) = lv.interval(3, 2).unwrap();
        assert_eq!(n_of_pair(&pt(a), &pt(b)).unwrap(), 2);
        // distinct points in one deepest interval
        let c3 = lv.length(3);
        assert_eq!(n_of_pair(&pt(a + 0.1 * c3), &pt(a + 0.6 * c3)).unwrap(), 3);
        assert!(n_of_pair(&pt(a), &pt(a)).is_err());
    }

    #[test]
    fn samples_land_in_deepest_level() {
        let lv = levels(tower_branching(3), 0.5);
        let mut rng = stream(3, 0, 0);
        for _ in 0..20_000 {
            let p = lv.sample_point(&mut rng);
            match lv.locate(p.x).unwrap() {
                Location::Inside(code) => assert_eq!(code, p.code),
                g => panic!("sample {} located in {g:?}", p.x),
            }
        }
    }

    #[test]
    fn nu_mean_and_first_interval_mass() {
        let lv = levels(vec![4, 4, 4], 0.5);
        let n = 1_000_000;
        let xs = lv.sample_nu_batch(n, 11, Partitioning::new(4));
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        assert!((mean - 0.5).abs() <= 3.0 * (var / n as f64).sqrt());

        let c1 = lv.length(1);
        let frac = xs.iter().filter(|&&x| x <= c1).count() as f64 / n as f64;
        let p = 0.25;
        assert!((frac - p).abs() <= 3.0 * (p * (1.0 - p) / n as f64).sqrt());
    }

    #[test]
    fn nu_batches_ignore_worker_count() {
        let lv = levels(vec![27, 729], 0.5);
        let a = lv.sample_nu_batch(10_000, 5, Partitioning::new(1));
        let b = lv.sample_nu_batch(10_000, 5, Partitioning::new(6));
        assert_eq!(a, b);
    }

    fn c_epsilon_oracle(eps: f64) -> f64 {
        let mut best = 1.0f64;
        for n in 1..=20 {
            best = best.max(2f64.powi(n) * 3f64.powf(-3f64.powi(n) * eps / 2.0));
        }
        best
    }

    #[test]
    fn c_epsilon_against_brute_force() {
        for eps in [0.01, 0.05, 0.1, 0.2, 0.25, 0.5, 0.9, 0.99] {
            assert_relative_eq!(c_epsilon(eps).unwrap(), c_epsilon_oracle(eps), max_relative = 1e-12);
        }
        // the n >= 1 maximum at eps = 0.5 sits at n = 1
        assert_relative_eq!(coding_term(1, 0.5), 0.877_383, epsilon = 1e-6);
        assert!(coding_term(1, 0.5) > coding_term(2, 0.5));
        // below one, so the n = 0 pairs set the constant
        assert_eq!(c_epsilon(0.5).unwrap(), 1.0);
        assert!(c_epsilon(0.99).unwrap() <= 1.2);
        assert_relative_eq!(c_epsilon(0.25).unwrap(), 2.0 * 3f64.powf(-0.375), max_relative = 1e-12);
        assert!(c_epsilon(0.0).is_err());
        assert!(c_epsilon(1.0).is_err());
    }

    #[test]
    fn coding_constant_includes_capped_levels() {
        let lv = build_levels(&CantorConfig::tower(6, 0.5).unwrap()).unwrap();
        assert_eq!(lv.coding_constant(0.25).unwrap(), c_epsilon(0.25).unwrap());
        assert!(lv.coding_constant(0.05).unwrap() > c_epsilon(0.05).unwrap());
    }

    #[test]
    fn pairs_with_prescribed_shared_depth() {
        let lv = build_levels(&CantorConfig::tower(4, 0.5).unwrap()).unwrap();
        let mut rng = stream(8, 0, 0);
        for n in 0..4 {
            for _ in 0..200 {
                let (x, y) = lv.sample_pair_with_shared_depth(n, &mut rng).unwrap();
                assert_eq!(n_of_pair(&x, &y).unwrap(), n);
                assert!((x.x - y.x).abs() <= lv.length(n) + 1e-15);
                assert!(matches!(lv.locate(y.x).unwrap(), Location::Inside(_)));
            }
        }
        assert!(lv.sample_pair_with_shared_depth(4, &mut rng).is_err());
        assert!(lv.point_from_code(PointCode { digits: vec![27, 0, 0, 0] }, 0.5).is_err());
    }
}
