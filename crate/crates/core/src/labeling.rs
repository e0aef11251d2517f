//! Seeded 0/1 labellings of the construction intervals.
//!
//! A labelling stores only a seed; the bit of interval `(k, i)` is a
//! counter-based hash of `(seed, k, i)`. The bit function is frozen by the
//! golden vectors in `tests/data/labeling_vectors.txt`.

use std::fmt::Write as _;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::cantor::CantorLevels;
use crate::error::{domain, Result};
use crate::rng::{mix64, StreamRng};

const SEED_SALT: u64 = 0x243F_6A88_85A3_08D3;
const LEVEL_MUL: u64 = 0x9E37_79B9_7F4A_7C15;
const HIGH_SALT: u64 = 0x1319_8A2E_0370_7344;
const TAIL_SALT: u64 = 0xA409_3822_299F_31D0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Labeling {
    Hashed { seed: u64 },
    /// Every interval carries the same bit.
    Constant { bit: u8 },
}

impl Labeling {
    pub fn from_seed(seed: u64) -> Self {
        Labeling::Hashed { seed }
    }

    pub fn all_zero() -> Self {
        Labeling::Constant { bit: 0 }
    }

    pub fn all_one() -> Self {
        Labeling::Constant { bit: 1 }
    }

    pub fn seed(&self) -> Option<u64> {
        match self {
            Labeling::Hashed { seed } => Some(*seed),
            Labeling::Constant { .. } => None,
        }
    }

    /// Bit of interval `i` (1-based) at level `k`, without range checks.
    #[inline]
    pub fn bit(&self, k: usize, i: u128) -> u8 {
        match *self {
            Labeling::Hashed { seed } => hashed_bit(level_key(seed, k), i),
            Labeling::Constant { bit } => bit,
        }
    }

    pub fn bit_checked(&self, levels: &CantorLevels, k: usize, i: u128) -> Result<u8> {
        if k < 1 || k > levels.depth() {
            return Err(domain(format!("level {k} outside 1..={}", levels.depth())));
        }
        if i < 1 || i > levels.count(k) {
            return Err(domain(format!(
                "interval {i} outside 1..={} at level {k}",
                levels.count(k)
            )));
        }
        Ok(self.bit(k, i))
    }

    /// Sum `sum_{j >= 1} 2^-j b_j` of the bits below interval `i` at level `k`,
    /// one chain of descendants. Under a hashed labelling these bits are fair
    /// and independent, so the sum is uniform on `[0, 1]`; it is drawn from
    /// its own hash with 53-bit resolution.
    pub fn tail_uniform(&self, k: usize, i: u128) -> f64 {
        match *self {
            Labeling::Hashed { seed } => {
                let key = level_key(seed ^ TAIL_SALT, k);
                let h = mix64(mix64(key ^ i as u64) ^ (i >> 64) as u64 ^ HIGH_SALT);
                (h >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
            }
            Labeling::Constant { bit } => bit as f64,
        }
    }

    /// Per-level hasher; lets hot loops reuse the `(seed, k)` part of the key.
    #[inline]
    pub fn level_bits(&self, k: usize) -> LevelBits {
        match *self {
            Labeling::Hashed { seed } => LevelBits::Hashed(level_key(seed, k)),
            Labeling::Constant { bit } => LevelBits::Constant(bit),
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub enum LevelBits {
    Hashed(u64),
    Constant(u8),
}

impl LevelBits {
    #[inline]
    pub fn bit(&self, i: u128) -> u8 {
        match *self {
            LevelBits::Hashed(key) => hashed_bit(key, i),
            LevelBits::Constant(b) => b,
        }
    }
}

#[inline]
fn level_key(seed: u64, k: usize) -> u64 {
    mix64(mix64(seed ^ SEED_SALT) ^ (k as u64).wrapping_mul(LEVEL_MUL))
}

#[inline]
fn hashed_bit(key: u64, i: u128) -> u8 {
    let lo = i as u64;
    let hi = (i >> 64) as u64;
    let mut h = mix64(key ^ lo);
    if hi != 0 {
        h = mix64(h ^ hi ^ HIGH_SALT);
    }
    (h >> 63) as u8
}

/// Draws a fresh hashed labelling.
pub fn sample_labeling(rng: &mut StreamRng) -> Labeling {
    Labeling::from_seed(rng.gen())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TestVector {
    pub seed: u64,
    pub k: usize,
    pub i: u128,
    pub bit: u8,
}

/// Parses lines of `seed k i bit`; `#` starts a comment.
pub fn parse_test_vectors(text: &str) -> Result<Vec<TestVector>> {
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let f: Vec<&str> = line.split_whitespace().collect();
        let bad = || domain(format!("line {}: expected `seed k i bit`", n + 1));
        if f.len() != 4 {
            return Err(bad());
        }
        out.push(TestVector {
            seed: f[0].parse().map_err(|_| bad())?,
            k: f[1].parse().map_err(|_| bad())?,
            i: f[2].parse().map_err(|_| bad())?,
            bit: f[3].parse().map_err(|_| bad())?,
        });
    }
    Ok(out)
}

pub fn format_test_vectors(vectors: &[TestVector]) -> String {
    let mut s = String::from("# seed k i bit\n");
    for v in vectors {
        let _ = writeln!(s, "{} {} {} {}", v.seed, v.k, v.i, v.bit);
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cantor::{CantorConfig, CantorLevels};
    use crate::rng::{derive_seed, stream};

    #[test]
    fn tail_sums() {
        assert_eq!(Labeling::all_zero().tail_uniform(3, 5), 0.0);
        assert_eq!(Labeling::all_one().tail_uniform(3, 5), 1.0);
        let l = Labeling::from_seed(8);
        let us: Vec<f64> = (1..=20_000u128).map(|i| l.tail_uniform(4, i)).collect();
        assert!(us.iter().all(|u| (0.0..1.0).contains(u)));
        let mean = us.iter().sum::<f64>() / us.len() as f64;
        assert!((mean - 0.5).abs() < 0.01, "{mean}");
        assert_ne!(l.tail_uniform(4, 1), l.tail_uniform(5, 1));
    }

    #[test]
    fn bits_are_stable() {
        let l = Labeling::from_seed(42);
        assert_eq!(l.bit(2, 17), l.bit(2, 17));
        assert_eq!(l.bit(2, 17), l.level_bits(2).bit(17));
    }

    #[test]
    fn checked_access_rejects_out_of_range() {
        let lv = CantorLevels::new(CantorConfig::new(vec![3, 3], 0.5).unwrap()).unwrap();
        let l = Labeling::from_seed(1);
        assert!(l.bit_checked(&lv, 1, 3).is_ok());
        assert!(l.bit_checked(&lv, 1, 4).is_err());
        assert!(l.bit_checked(&lv, 0, 1).is_err());
        assert!(l.bit_checked(&lv, 3, 1).is_err());
        assert!(l.bit_checked(&lv, 2, 0).is_err());
    }

    #[test]
    fn fixed_interval_is_fair_over_seeds() {
        let n = 100_000;
        let ones: u32 = (0..n)
            .map(|s| Labeling::from_seed(derive_seed(5, 0, s)).bit(1, 1) as u32)
            .sum();
        let frac = ones as f64 / n as f64;
        assert!((frac - 0.5).abs() <= 0.005, "{frac}");
    }

    #[test]
    fn two_cylinder_mass() {
        let n = 100_000u64;
        let hits = (0..n)
            .filter(|&s| {
                let l = Labeling::from_seed(derive_seed(8, 0, s));
                l.bit(1, 3) == 1 && l.bit(2, 40) == 0
            })
            .count();
        let p = hits as f64 / n as f64;
        let se = (0.25f64 * 0.75 / n as f64).sqrt();
        assert!((p - 0.25).abs() <= 3.0 * se, "{p}");
    }

    #[test]
    fn pairwise_independence_chi_square() {
        // 2x2 table of bits at two distinct intervals over seeds
        let n = 40_000u64;
        let pairs = [((1, 1), (1, 2)), ((2, 5), (3, 5)), ((1, 7), (2, 7)), ((4, 1), (4, 1u128 << 70))];
        for ((ka, ia), (kb, ib)) in pairs {
            let mut table = [[0f64; 2]; 2];
            for s in 0..n {
                let l = Labeling::from_seed(derive_seed(21, 1, s));
                table[l.bit(ka, ia) as usize][l.bit(kb, ib) as usize] += 1.0;
            }
            let e = n as f64 / 4.0;
            let chi2: f64 = table.iter().flatten().map(|o| (o - e).powi(2) / e).sum();
            // 3 degrees of freedom, 99.9% quantile
            assert!(chi2 < 16.27, "chi2 = {chi2} for ({ka},{ia}) vs ({kb},{ib})");
        }
    }

    #[test]
    fn sampled_labelings_differ_and_have_fair_weight() {
        let mut rng = stream(2, 0, 0);
        let a = sample_labeling(&mut rng);
        let b = sample_labeling(&mut rng);
        assert_ne!(a.seed(), b.seed());

        let m1 = 27u128;
        let count = 10_000;
        let weights: Vec<f64> = (0..count)
            .map(|_| {
                let l = sample_labeling(&mut rng);
                (1..=m1).map(|i| l.bit(1, i) as f64).sum()
            })
            .collect();
        let mean = weights.iter().sum::<f64>() / count as f64;
        let se = (m1 as f64 * 0.25 / count as f64).sqrt();
        assert!((mean - 13.5).abs() <= 3.0 * se, "{mean}");
    }

    #[test]
    fn constant_labelings() {
        assert_eq!(Labeling::all_zero().bit(3, 99), 0);
        assert_eq!(Labeling::all_one().bit(1, 1), 1);
        assert_eq!(Labeling::all_one().seed(), None);
    }

    #[test]
    fn vector_format_round_trip() {
        let v = vec![TestVector { seed: 3, k: 2, i: 1 << 80, bit: 1 }];
        assert_eq!(parse_test_vectors(&format_test_vectors(&v)).unwrap(), v);
        assert!(parse_test_vectors("1 2 3").is_err());
    }
}
