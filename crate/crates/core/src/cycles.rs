//! Cycle-structure samplers for uniform permutations, the independent
//! Poisson surrogate, and coarse-scale block occupancy.

use crate::error::{invalid, Error, Result};
use crate::rng::Stream;
use crate::special;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt::Write as _;

/// Sparse cycle counts `length -> multiplicity`, shared by permutation
/// cycle types and Poisson surrogates.
pub trait CycleCounts {
    /// Largest admissible cycle length (`n` or `max_len`).
    fn size(&self) -> u64;
    fn counts(&self) -> &BTreeMap<u64, u64>;

    fn total_cycles(&self) -> u64 {
        self.counts().values().sum()
    }

    fn distinct_lengths(&self) -> usize {
        self.counts().len()
    }
}

/// Cycle type of a permutation of `[n]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CycleStructure {
    n: u64,
    counts: BTreeMap<u64, u64>,
}

impl CycleStructure {
    pub fn new(n: u64, counts: BTreeMap<u64, u64>) -> Result<Self> {
        if n == 0 {
            return Err(invalid("permutation size must be positive"));
        }
        let mut total: u128 = 0;
        for (&len, &c) in &counts {
            if len == 0 || len > n {
                return Err(invalid(format!("cycle length {len} outside 1..={n}")));
            }
            if c == 0 {
                return Err(invalid(format!("zero multiplicity stored for length {len}")));
            }
            total += len as u128 * c as u128;
        }
        if total != n as u128 {
            return Err(invalid(format!("cycle lengths sum to {total}, expected {n}")));
        }
        Ok(Self { n, counts })
    }

    /// Build from a list of cycle lengths, e.g. `[56, 22, 9, 9, 4]`.
    pub fn from_lengths(lengths: &[u64]) -> Result<Self> {
        let mut counts = BTreeMap::new();
        for &l in lengths {
            *counts.entry(l).or_insert(0) += 1;
        }
        Self::new(lengths.iter().sum(), counts)
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn count(&self, len: u64) -> u64 {
        self.counts.get(&len).copied().unwrap_or(0)
    }

    /// CSV form: a header row `n,<n>` followed by `length,count` rows.
    pub fn to_csv(&self) -> String {
        let mut out = format!("n,{}\n", self.n);
        for (l, c) in &self.counts {
            let _ = writeln!(out, "{l},{c}");
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut n = None;
        let mut counts = BTreeMap::new();
        for line in text.lines().map(str::trim) {
            if line.is_empty() || line.starts_with('#') || line == "length,count" {
                continue;
            }
            let (a, b) =
                line.split_once(',').ok_or_else(|| Error::Parse(format!("expected two fields in {line:?}")))?;
            let b: u64 = b.trim().parse().map_err(|_| Error::Parse(format!("bad count in {line:?}")))?;
            if a.trim() == "n" {
                n = Some(b);
                continue;
            }
            let a: u64 = a.trim().parse().map_err(|_| Error::Parse(format!("bad length in {line:?}")))?;
            if counts.insert(a, b).is_some() {
                return Err(Error::Parse(format!("duplicate length {a}")));
            }
        }
        let n = n.ok_or_else(|| Error::Parse("missing `n,<n>` header".into()))?;
        Self::new(n, counts)
    }
}

impl CycleCounts for CycleStructure {
    fn size(&self) -> u64 {
        self.n
    }
    fn counts(&self) -> &BTreeMap<u64, u64> {
        &self.counts
    }
}

/// Independent `Z_l ~ Poisson(1/l)` for `l <= max_len`, stored sparsely.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PoissonCounts {
    max_len: u64,
    counts: BTreeMap<u64, u64>,
}

impl PoissonCounts {
    pub fn new(max_len: u64, counts: BTreeMap<u64, u64>) -> Result<Self> {
        if max_len == 0 {
            return Err(invalid("max_len must be positive"));
        }
        if counts.iter().any(|(&l, &c)| l == 0 || l > max_len || c == 0) {
            return Err(invalid("Poisson counts must have keys in 1..=max_len and values >= 1"));
        }
        Ok(Self { max_len, counts })
    }

    pub fn max_len(&self) -> u64 {
        self.max_len
    }
}

impl CycleCounts for PoissonCounts {
    fn size(&self) -> u64 {
        self.max_len
    }
    fn counts(&self) -> &BTreeMap<u64, u64> {
        &self.counts
    }
}

/// Cycle type of a uniform permutation of `[n]`.
///
/// The cycle containing the smallest remaining element has length uniform
/// on `1..=remaining`; repeating on the rest gives the exact law in
/// `O(#cycles)` steps.
pub fn sample_cycle_structure(n: u64, rng: &mut Stream) -> Result<CycleStructure> {
    if n == 0 {
        return Err(invalid("permutation size must be positive"));
    }
    let mut counts = BTreeMap::new();
    let mut remaining = n;
    while remaining > 0 {
        let len = rng.random_range(1..=remaining);
        *counts.entry(len).or_insert(0) += 1;
        remaining -= len;
    }
    Ok(CycleStructure { n, counts })
}

/// Cauchy's formula `prod_l l^{-c_l} / c_l!`.
pub fn exact_cycle_type_probability(structure: &CycleStructure) -> f64 {
    let log_p: f64 = structure.counts.iter().map(|(&l, &c)| -(c as f64) * (l as f64).ln() - ln_factorial(c)).sum();
    log_p.exp()
}

fn ln_factorial(c: u64) -> f64 {
    if c <= 20 {
        ((1..=c).product::<u64>() as f64).ln()
    } else {
        special::ln_gamma(c as f64 + 1.0).expect("positive argument")
    }
}

/// All cycle types of permutations of `[n]` (integer partitions of `n`).
pub fn all_cycle_types(n: u64) -> Vec<CycleStructure> {
    fn rec(remaining: u64, max_part: u64, current: &mut Vec<u64>, out: &mut Vec<Vec<u64>>) {
        if remaining == 0 {
            out.push(current.clone());
            return;
        }
        for part in (1..=max_part.min(remaining)).rev() {
            current.push(part);
            rec(remaining - part, part, current, out);
            current.pop();
        }
    }
    let mut parts = Vec::new();
    rec(n, n, &mut Vec::new(), &mut parts);
    parts.into_iter().map(|p| CycleStructure::from_lengths(&p).expect("partition of n")).collect()
}

/// Poisson draw by sequential inversion; exact, intended for `mean <= 1`.
pub fn sample_poisson(mean: f64, rng: &mut Stream) -> u64 {
    let u: f64 = rng.random();
    let mut k = 0u64;
    let mut p = (-mean).exp();
    let mut cdf = p;
    while u >= cdf && p > 0.0 {
        k += 1;
        p *= mean / k as f64;
        cdf += p;
    }
    k
}

pub fn sample_poisson_counts(max_len: u64, rng: &mut Stream) -> Result<PoissonCounts> {
    if max_len == 0 {
        return Err(invalid("max_len must be positive"));
    }
    let mut counts = BTreeMap::new();
    for l in 1..=max_len {
        let z = sample_poisson(1.0 / l as f64, rng);
        if z > 0 {
            counts.insert(l, z);
        }
    }
    Ok(PoissonCounts { max_len, counts })
}

/// Integer block `I_k = [ceil(e^{rho k}), ceil(e^{rho (k+1)}))`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Block {
    pub start: u64,
    pub end: u64,
}

/// Largest block endpoint for which integer arithmetic is used.
const INTEGER_BLOCK_LIMIT: f64 = 4.0e15;
/// Longest block summed term by term.
const EXACT_SUM_LIMIT: u64 = 10_000_000;

fn block_start(k: u64, rho: f64) -> f64 {
    (rho * k as f64).exp().ceil()
}

impl Block {
    pub fn new(k: u64, rho: f64) -> Result<Self> {
        if !(rho > 0.0) || !rho.is_finite() {
            return Err(invalid(format!("block scale must be positive, got {rho}")));
        }
        let (a, b) = (block_start(k, rho), block_start(k + 1, rho));
        if b > INTEGER_BLOCK_LIMIT {
            return Err(Error::Capacity {
                param: "block index",
                detail: format!("block {k} at scale {rho} ends beyond {INTEGER_BLOCK_LIMIT:e}"),
            });
        }
        Ok(Block { start: a as u64, end: b as u64 })
    }

    pub fn from_range(start: u64, end: u64) -> Result<Self> {
        if start == 0 || end <= start {
            return Err(invalid(format!("empty block [{start}, {end})")));
        }
        Ok(Block { start, end })
    }

    pub fn len(&self) -> u64 {
        self.end.saturating_sub(self.start)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn contains(&self, l: u64) -> bool {
        self.start <= l && l < self.end
    }

    /// `rho_k = sum_{l in I_k} 1/l`.
    pub fn mass(&self) -> f64 {
        harmonic_range(self.start, self.end)
    }
}

/// `sum_{a <= l < b} 1/l`, summed smallest term first; long ranges use the
/// digamma difference.
pub fn harmonic_range(a: u64, b: u64) -> f64 {
    if b <= a {
        return 0.0;
    }
    if b - a <= EXACT_SUM_LIMIT {
        (a..b).rev().map(|l| 1.0 / l as f64).sum()
    } else {
        special::digamma(b as f64).unwrap() - special::digamma(a as f64).unwrap()
    }
}

/// Expected block occupancy `rho_k`, valid for arbitrarily large `k`.
///
/// Beyond the integer range the endpoints are used as reals; the rounding
/// they would get is below double precision there.
pub fn block_mass(k: u64, rho: f64) -> f64 {
    match Block::new(k, rho) {
        Ok(b) => b.mass(),
        Err(_) => {
            let a = rho * k as f64;
            let b = rho * (k + 1) as f64;
            // psi(e^b) - psi(e^a) with psi(x) ~ ln x - 1/(2x) - 1/(12 x^2)
            let tail = |s: f64| -0.5 * (-s).exp() - (-2.0 * s).exp() / 12.0;
            (b - a) + tail(b) - tail(a)
        }
    }
}

/// Exact sampler for `P(l) = (1/l)/rho_k` on a block.
///
/// Proposes `floor(a (b/a)^U)`, whose law is proportional to `ln(1 + 1/l)`,
/// and accepts with probability `g(l)/g(a)` where `g(l) = 1/(l ln(1+1/l))`
/// is decreasing.
#[derive(Debug, Clone, Copy)]
pub struct BlockSampler {
    block: Block,
    log_ratio: f64,
    g_start: f64,
}

fn block_weight_ratio(l: u64) -> f64 {
    let x = l as f64;
    1.0 / (x * (1.0 / x).ln_1p())
}

impl BlockSampler {
    pub fn new(block: Block) -> Result<Self> {
        if block.is_empty() || block.start == 0 {
            return Err(invalid(format!("empty block [{}, {})", block.start, block.end)));
        }
        Ok(Self {
            block,
            log_ratio: (block.end as f64 / block.start as f64).ln(),
            g_start: block_weight_ratio(block.start),
        })
    }

    pub fn block(&self) -> Block {
        self.block
    }

    pub fn sample(&self, rng: &mut Stream) -> u64 {
        let Block { start, end } = self.block;
        if end - start == 1 {
            return start;
        }
        loop {
            let u: f64 = rng.random();
            let l = (start as f64 * (u * self.log_ratio).exp()).floor() as u64;
            if l < start || l >= end {
                continue;
            }
            let v: f64 = rng.random();
            if v * self.g_start <= block_weight_ratio(l) {
                return l;
            }
        }
    }
}

pub fn sample_block_cycle(k: u64, rho: f64, rng: &mut Stream) -> Result<u64> {
    let block = Block::new(k, rho)?;
    Ok(BlockSampler::new(block)?.sample(rng))
}

/// Index of the block containing cycle length `l >= 1`.
pub fn block_index_of(l: u64, rho: f64) -> u64 {
    let mut k = ((l as f64).ln() / rho).floor().max(0.0) as u64;
    while k > 0 && block_start(k, rho) > l as f64 {
        k -= 1;
    }
    while block_start(k + 1, rho) <= l as f64 {
        k += 1;
    }
    k
}

/// Blocks of `[m, n)` sorted by how many cycles they hold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Occupancy {
    pub rho: f64,
    pub m: u64,
    pub n: u64,
    pub q0: Vec<u64>,
    pub q1: Vec<u64>,
    pub q2plus: Vec<u64>,
    /// `N([e^{rho m}, e^{rho n}))`, the number of cycles over all blocks.
    pub total: u64,
}

fn check_occupancy_args(rho: f64, m: u64, n: u64) -> Result<()> {
    if !(rho > 0.0 && rho < 0.5) {
        return Err(invalid(format!("block scale must lie in (0, 1/2), got {rho}")));
    }
    if m >= n {
        return Err(invalid(format!("empty block range [{m}, {n})")));
    }
    Ok(())
}

impl Occupancy {
    fn from_block_counts(rho: f64, m: u64, n: u64, per_block: impl Iterator<Item = (u64, u64)>) -> Self {
        let mut occ = Occupancy { rho, m, n, q0: vec![], q1: vec![], q2plus: vec![], total: 0 };
        for (k, c) in per_block {
            occ.total += c;
            match c {
                0 => occ.q0.push(k),
                1 => occ.q1.push(k),
                _ => occ.q2plus.push(k),
            }
        }
        occ
    }
}

/// Classify blocks `k in [m, n)` by `N(I_k) = 0`, `= 1` or `>= 2`.
pub fn coarse_occupancy<C: CycleCounts + ?Sized>(counts: &C, rho: f64, m: u64, n: u64) -> Result<Occupancy> {
    check_occupancy_args(rho, m, n)?;
    let mut per_block: BTreeMap<u64, u64> = BTreeMap::new();
    for (&l, &c) in counts.counts() {
        let k = block_index_of(l, rho);
        if (m..n).contains(&k) {
            *per_block.entry(k).or_insert(0) += c;
        }
    }
    Ok(Occupancy::from_block_counts(rho, m, n, (m..n).map(|k| (k, per_block.get(&k).copied().unwrap_or(0)))))
}

/// Sample the occupancy of `[m, n)` directly: the block totals `N(I_k)` are
/// independent `Poisson(rho_k)`, so the individual `Z_l` need not be drawn.
/// This reaches block ranges far beyond any representable cycle length.
pub fn sample_block_occupancy(rho: f64, m: u64, n: u64, rng: &mut Stream) -> Result<Occupancy> {
    check_occupancy_args(rho, m, n)?;
    let counts: Vec<(u64, u64)> = (m..n).map(|k| (k, sample_poisson(block_mass(k, rho), rng))).collect();
    Ok(Occupancy::from_block_counts(rho, m, n, counts.into_iter()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    #[test]
    fn single_element() {
        let mut rng = stream(1, &[]);
        let s = sample_cycle_structure(1, &mut rng).unwrap();
        assert_eq!(s.count(1), 1);
        assert_eq!(s.distinct_lengths(), 1);
    }

    #[test]
    fn zero_size_rejected() {
        let mut rng = stream(1, &[]);
        assert!(matches!(sample_cycle_structure(0, &mut rng), Err(Error::InvalidArgument(_))));
        assert!(sample_poisson_counts(0, &mut rng).is_err());
    }

    #[test]
    fn invariant_violations_rejected() {
        assert!(CycleStructure::new(3, BTreeMap::from([(1, 2)])).is_err());
        assert!(CycleStructure::new(3, BTreeMap::from([(1, 3), (2, 0)])).is_err());
        assert!(CycleStructure::new(3, BTreeMap::from([(4, 1)])).is_err());
    }

    #[test]
    fn figure_partition_is_admissible() {
        let s = CycleStructure::from_lengths(&[56, 22, 9, 9, 4]).unwrap();
        assert_eq!(s.n(), 100);
        assert_eq!(s.count(9), 2);
        assert_eq!(s.total_cycles(), 5);
    }

    #[test]
    fn cauchy_formula_values() {
        let id = CycleStructure::from_lengths(&[1, 1, 1]).unwrap();
        assert!((exact_cycle_type_probability(&id) - 1.0 / 6.0).abs() < 1e-15);
        let three = CycleStructure::from_lengths(&[3]).unwrap();
        assert!((exact_cycle_type_probability(&three) - 1.0 / 3.0).abs() < 1e-15);
        let one = CycleStructure::from_lengths(&[1]).unwrap();
        assert_eq!(exact_cycle_type_probability(&one), 1.0);
    }

    #[test]
    fn cauchy_formula_sums_to_one() {
        for n in 1..=12 {
            let total: f64 = all_cycle_types(n).iter().map(exact_cycle_type_probability).sum();
            assert!((total - 1.0).abs() < 1e-12, "n={n}: {total}");
        }
        // p(6) = 11
        assert_eq!(all_cycle_types(6).len(), 11);
    }

    #[test]
    fn csv_round_trip() {
        let s = CycleStructure::from_lengths(&[56, 22, 9, 9, 4]).unwrap();
        let text = s.to_csv();
        assert_eq!(text, "n,100\n4,1\n9,2\n22,1\n56,1\n");
        assert_eq!(CycleStructure::from_csv(&text).unwrap(), s);
        assert!(CycleStructure::from_csv("n,10\n4,1\n").is_err());
        assert!(CycleStructure::from_csv("4,1\n").is_err());
    }

    #[test]
    fn block_endpoints() {
        assert_eq!(Block::new(1, 0.6).unwrap(), Block { start: 2, end: 4 });
        assert_eq!(Block::new(19, 0.1).unwrap(), Block { start: 7, end: 8 });
        assert_eq!(Block::new(3, 0.74).unwrap(), Block { start: 10, end: 20 });
        assert!(Block::new(2, 0.1).unwrap().is_empty());
    }

    #[test]
    fn singleton_block_is_deterministic() {
        let mut rng = stream(3, &[]);
        for _ in 0..100 {
            assert_eq!(sample_block_cycle(19, 0.1, &mut rng).unwrap(), 7);
        }
    }

    #[test]
    fn empty_block_rejected() {
        let mut rng = stream(3, &[]);
        assert!(matches!(sample_block_cycle(2, 0.1, &mut rng), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn two_point_block_frequencies() {
        // I_k = {2, 3}: P(2) = 3/5.
        let mut rng = stream(5, &[]);
        let draws = 200_000;
        let twos = (0..draws).filter(|_| sample_block_cycle(1, 0.6, &mut rng).unwrap() == 2).count();
        let p = twos as f64 / draws as f64;
        let sigma = (0.6 * 0.4 / draws as f64).sqrt();
        assert!((p - 0.6).abs() < 4.0 * sigma, "p = {p}");
    }

    #[test]
    fn block_mass_matches_harmonic_sum() {
        let b = Block::new(3, 0.74).unwrap();
        let direct: f64 = (10..20).map(|l| 1.0 / l as f64).sum();
        assert!((b.mass() - direct).abs() < 1e-15);
        // Long range: digamma path vs term-by-term.
        let a = harmonic_range(1_000_000, 12_000_000);
        let s: f64 = (1_000_000u64..12_000_000).rev().map(|l| 1.0 / l as f64).sum();
        assert!((a - s).abs() < 1e-12);
        // Far blocks approach rho.
        assert!((block_mass(2000, 0.1) - 0.1).abs() < 1e-12);
    }

    #[test]
    fn block_index_round_trip() {
        for &rho in &[0.05, 0.1, 0.3] {
            for l in 1..5000u64 {
                let k = block_index_of(l, rho);
                assert!(Block::new(k, rho).unwrap().contains(l), "l={l} rho={rho}");
            }
        }
    }

    #[test]
    fn occupancy_examples() {
        let empty = PoissonCounts::new(100, BTreeMap::new()).unwrap();
        let occ = coarse_occupancy(&empty, 0.1, 10, 40).unwrap();
        assert_eq!(occ.q0, (10..40).collect::<Vec<_>>());
        assert!(occ.q1.is_empty() && occ.q2plus.is_empty());

        let single = PoissonCounts::new(100, BTreeMap::from([(10, 1)])).unwrap();
        let k = block_index_of(10, 0.1);
        let occ = coarse_occupancy(&single, 0.1, 0, 40).unwrap();
        assert_eq!(occ.q1, vec![k]);
        assert_eq!(occ.total, 1);

        let double = PoissonCounts::new(100, BTreeMap::from([(10, 2)])).unwrap();
        let occ = coarse_occupancy(&double, 0.1, 0, 40).unwrap();
        assert_eq!(occ.q2plus, vec![k]);

        assert!(coarse_occupancy(&empty, 0.6, 0, 10).is_err());
        assert!(coarse_occupancy(&empty, 0.1, 10, 10).is_err());
    }
}
