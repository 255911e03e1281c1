//! Principal-minor enumeration, P-matrix membership and violation sets.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::mask::{low_bits, SubsetMask};
use crate::matrix::Matrix;

/// Largest dimension for full `2^n − 1` enumeration.
pub const MAX_ENUM_DIM: usize = 26;

/// Minors with `|value| < MARGINAL_REL · max(1, max|a_ij|)^|α|` are flagged.
pub const MARGINAL_REL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MinorRecord {
    pub alpha: SubsetMask,
    pub value: f64,
}

impl MinorRecord {
    /// Total order used for minimum selection: value, then mask bits.
    fn precedes(&self, other: &MinorRecord) -> bool {
        self.value < other.value || (self.value == other.value && self.alpha.bits() < other.alpha.bits())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    PMatrix,
    SingleViolation,
    SparseViolation,
    DenseViolation,
}

impl Regime {
    /// Sparse means at most `n²` violations.
    pub fn classify(n: usize, violations: usize) -> Regime {
        match violations {
            0 => Regime::PMatrix,
            1 => Regime::SingleViolation,
            k if k <= n * n => Regime::SparseViolation,
            _ => Regime::DenseViolation,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Regime::PMatrix => "p_matrix",
            Regime::SingleViolation => "single_violation",
            Regime::SparseViolation => "sparse_violation",
            Regime::DenseViolation => "dense_violation",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ViolationReport {
    pub n: usize,
    pub tau: f64,
    pub regime: Regime,
    pub total_minors: u64,
    /// Ascending by mask.
    pub violations: Vec<MinorRecord>,
    pub min_minor: MinorRecord,
    /// Minors whose magnitude is below the marginal threshold.
    pub marginal: Vec<MinorRecord>,
}

impl ViolationReport {
    pub fn witness(&self) -> Option<SubsetMask> {
        match self.regime {
            Regime::SingleViolation => Some(self.violations[0].alpha),
            _ => None,
        }
    }
}

/// Which enumerator backs [`violation_set_with`].
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Engine {
    /// One LU per subset, ascending mask order.
    #[default]
    Naive,
    /// Shares elimination work along nested subsets.
    Recursive,
    /// Naive LU per subset, mask range split into fixed chunks across the
    /// rayon pool.
    Parallel,
}

fn check_dim(a: &Matrix) -> Result<()> {
    if a.n() > MAX_ENUM_DIM {
        return Err(Error::DimensionCap { n: a.n(), cap: MAX_ENUM_DIM });
    }
    Ok(())
}

/// Streams all `2^n − 1` principal minors in ascending mask order.
pub fn enumerate_minors(a: &Matrix) -> Result<Minors<'_>> {
    check_dim(a)?;
    Ok(Minors { a, next: 1, end: low_bits(a.n()), scratch: Vec::with_capacity(a.n() * a.n()) })
}

pub struct Minors<'a> {
    a: &'a Matrix,
    next: u64,
    end: u64,
    scratch: Vec<f64>,
}

impl Iterator for Minors<'_> {
    type Item = MinorRecord;

    fn next(&mut self) -> Option<MinorRecord> {
        if self.next > self.end {
            return None;
        }
        let bits = self.next;
        self.next += 1;
        let value = self.a.principal_det_with(bits, &mut self.scratch);
        Some(MinorRecord { alpha: SubsetMask::from_bits_unchecked(bits, self.a.n()), value })
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let left = (self.end + 1 - self.next) as usize;
        (left, Some(left))
    }
}

// Pivots below this fraction of the largest remaining entry end the shared
// elimination; that subtree is finished with per-subset LU instead.
const RECURSIVE_PIVOT_REL: f64 = 1e-3;

/// Visits every principal minor, reusing elimination work: for a subset α
/// with remaining Schur complement `S = A/A_α`, `det A_{α∪{j}} = det A_α · S_jj`.
/// Visiting order is depth-first, not ascending.
pub fn for_each_minor_recursive(a: &Matrix, mut f: impl FnMut(MinorRecord)) -> Result<()> {
    check_dim(a)?;
    let n = a.n();
    let idx: Vec<usize> = (0..n).collect();
    let mut scratch = Vec::new();
    descend(a, 0, 1.0, &idx, a.as_slice(), &mut f, &mut scratch);
    Ok(())
}

fn descend(
    a: &Matrix,
    mask: u64,
    det: f64,
    idx: &[usize],
    schur: &[f64],
    f: &mut impl FnMut(MinorRecord),
    scratch: &mut Vec<f64>,
) {
    let r = idx.len();
    let scale = schur.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    for p in 0..r {
        let pivot = schur[p * r + p];
        let child = mask | 1 << idx[p];
        f(MinorRecord { alpha: SubsetMask::from_bits_unchecked(child, a.n()), value: det * pivot });
        let rest = &idx[p + 1..];
        if rest.is_empty() {
            continue;
        }
        if pivot.abs() <= RECURSIVE_PIVOT_REL * scale || det == 0.0 {
            naive_subtree(a, child, rest, f, scratch);
            continue;
        }
        let q = rest.len();
        let mut next = Vec::with_capacity(q * q);
        for i in p + 1..r {
            let l = schur[i * r + p] / pivot;
            for j in p + 1..r {
                next.push(schur[i * r + j] - l * schur[p * r + j]);
            }
        }
        descend(a, child, det * pivot, rest, &next, f, scratch);
    }
}

fn naive_subtree(a: &Matrix, base: u64, rest: &[usize], f: &mut impl FnMut(MinorRecord), scratch: &mut Vec<f64>) {
    for sel in 1u64..(1 << rest.len()) {
        let mut bits = base;
        let mut s = sel;
        while s != 0 {
            bits |= 1 << rest[s.trailing_zeros() as usize];
            s &= s - 1;
        }
        let value = a.principal_det_with(bits, scratch);
        f(MinorRecord { alpha: SubsetMask::from_bits_unchecked(bits, a.n()), value });
    }
}

/// Materialized recursive enumeration, sorted by mask.
pub fn enumerate_minors_recursive(a: &Matrix) -> Result<Vec<MinorRecord>> {
    let mut out = Vec::with_capacity(low_bits(a.n().min(MAX_ENUM_DIM)) as usize);
    for_each_minor_recursive(a, |r| out.push(r))?;
    out.sort_by_key(|r| r.alpha.bits());
    Ok(out)
}

struct Accumulator {
    tau: f64,
    scale: f64,
    violations: Vec<MinorRecord>,
    marginal: Vec<MinorRecord>,
    min: Option<MinorRecord>,
}

impl Accumulator {
    fn new(a: &Matrix, tau: f64) -> Self {
        Self { tau, scale: a.max_abs().max(1.0), violations: Vec::new(), marginal: Vec::new(), min: None }
    }

    fn push(&mut self, rec: MinorRecord) {
        if rec.value <= self.tau {
            self.violations.push(rec);
        }
        if rec.value.abs() < MARGINAL_REL * self.scale.powi(rec.alpha.len() as i32) {
            self.marginal.push(rec);
        }
        match self.min {
            Some(m) if !rec.precedes(&m) => {}
            _ => self.min = Some(rec),
        }
    }

    fn merge(&mut self, other: Accumulator) {
        self.violations.extend(other.violations);
        self.marginal.extend(other.marginal);
        if let Some(rec) = other.min {
            match self.min {
                Some(m) if !rec.precedes(&m) => {}
                _ => self.min = Some(rec),
            }
        }
    }

    fn finish(mut self, n: usize) -> ViolationReport {
        self.violations.sort_by_key(|r| r.alpha.bits());
        self.marginal.sort_by_key(|r| r.alpha.bits());
        ViolationReport {
            n,
            tau: self.tau,
            regime: Regime::classify(n, self.violations.len()),
            total_minors: low_bits(n),
            violations: self.violations,
            min_minor: self.min.expect("n >= 1 yields at least one minor"),
            marginal: self.marginal,
        }
    }
}

/// `{α : det A_α ≤ τ}` with the global minimum and regime label.
pub fn violation_set(a: &Matrix, tau: f64) -> Result<ViolationReport> {
    violation_set_with(a, tau, Engine::Naive)
}

const PARALLEL_CHUNK: u64 = 1 << 12;

pub fn violation_set_with(a: &Matrix, tau: f64, engine: Engine) -> Result<ViolationReport> {
    check_dim(a)?;
    let n = a.n();
    let mut acc = Accumulator::new(a, tau);
    match engine {
        Engine::Naive => enumerate_minors(a)?.for_each(|r| acc.push(r)),
        Engine::Recursive => for_each_minor_recursive(a, |r| acc.push(r))?,
        Engine::Parallel => {
            let last = low_bits(n);
            let chunks = last.div_ceil(PARALLEL_CHUNK);
            let parts: Vec<Accumulator> = (0..chunks)
                .into_par_iter()
                .map(|c| {
                    let mut part = Accumulator::new(a, tau);
                    let mut scratch = Vec::new();
                    let lo = 1 + c * PARALLEL_CHUNK;
                    let hi = (lo + PARALLEL_CHUNK - 1).min(last);
                    for bits in lo..=hi {
                        let value = a.principal_det_with(bits, &mut scratch);
                        part.push(MinorRecord { alpha: SubsetMask::from_bits_unchecked(bits, n), value });
                    }
                    part
                })
                .collect();
            for part in parts {
                acc.merge(part);
            }
        }
    }
    Ok(acc.finish(n))
}

/// Stops at the first minor `≤ τ`.
pub fn is_p_matrix(a: &Matrix, tau: f64) -> Result<bool> {
    Ok(enumerate_minors(a)?.all(|r| r.value > tau))
}

/// Minors of subsets near `center`: symmetric-difference distance at most
/// `radius`, changing the cardinality by at most one. Radius 1 is
/// add/remove one index; radius 2 also allows swapping one index for
/// another. Sorted by (cardinality, mask).
pub fn neighborhood_minors(a: &Matrix, center: &SubsetMask, radius: usize) -> Result<Vec<MinorRecord>> {
    if !(1..=2).contains(&radius) {
        return Err(Error::InvalidArgument(format!("radius must be 1 or 2, got {radius}")));
    }
    if center.n() != a.n() {
        return Err(Error::DimensionMismatch(center.n(), a.n()));
    }
    check_dim(a)?;
    let n = a.n();
    let c = center.len();
    let mut scratch = Vec::new();
    let mut out: Vec<MinorRecord> = (1..=low_bits(n))
        .map(|bits| SubsetMask::from_bits_unchecked(bits, n))
        .filter(|m| m.distance(center) <= radius && m.len().abs_diff(c) <= 1)
        .map(|m| MinorRecord { alpha: m, value: a.principal_det_with(m.bits(), &mut scratch) })
        .collect();
    out.sort_by_key(|r| (r.alpha.len(), r.alpha.bits()));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forge::appendix_b_fixture;

    fn mask(idx: &[usize]) -> SubsetMask {
        SubsetMask::from_one_based(idx, 6).unwrap()
    }

    #[test]
    fn fixture_base_is_p_matrix() {
        let m = appendix_b_fixture().m().clone();
        let all: Vec<_> = enumerate_minors(&m).unwrap().collect();
        assert_eq!(all.len(), 63);
        assert!(all.iter().all(|r| r.value > 0.0));
        let rep = violation_set(&m, 0.0).unwrap();
        assert_eq!(rep.regime, Regime::PMatrix);
        assert_eq!(rep.min_minor.alpha, mask(&[2, 3, 4]));
        assert!((rep.min_minor.value - 0.272).abs() < 1e-3);
        assert!(is_p_matrix(&m, 0.0).unwrap());
    }

    #[test]
    fn fixture_perturbed_single_violation() {
        let a = appendix_b_fixture().perturbed();
        let rep = violation_set(&a, 0.0).unwrap();
        assert_eq!(rep.regime, Regime::SingleViolation);
        assert_eq!(rep.violations.len(), 1);
        assert_eq!(rep.witness(), Some(mask(&[1, 5])));
        assert!((rep.violations[0].value + 0.001).abs() < 5e-4);
        assert!(!is_p_matrix(&a, 0.0).unwrap());
    }

    #[test]
    fn identity_minors() {
        let all: Vec<_> = enumerate_minors(&Matrix::identity(3)).unwrap().collect();
        assert_eq!(all.len(), 7);
        assert!(all.iter().all(|r| r.value == 1.0));
        assert!(all.windows(2).all(|w| w[0].alpha.bits() < w[1].alpha.bits()));
        let rep = violation_set(&Matrix::identity(3), 0.0).unwrap();
        assert_eq!(rep.min_minor.alpha.bits(), 1);
        assert!(is_p_matrix(&Matrix::identity(5), 0.0).unwrap());
    }

    #[test]
    fn negated_identity_odd_subsets() {
        for n in 1..=8 {
            let mut neg = Matrix::identity(n).as_slice().to_vec();
            neg.iter_mut().for_each(|x| *x = -*x);
            let rep = violation_set(&Matrix::new(n, neg).unwrap(), 0.0).unwrap();
            let odd: u64 = (1..=n).step_by(2).map(|k| binomial(n, k)).sum();
            assert_eq!(rep.violations.len() as u64, odd);
            assert_eq!(odd, 1 << (n - 1));
            assert!(rep.violations.iter().all(|r| r.alpha.len() % 2 == 1));
            let expected = Regime::classify(n, odd as usize);
            assert_eq!(rep.regime, expected);
        }
    }

    fn binomial(n: usize, k: usize) -> u64 {
        (0..k).fold(1u64, |acc, i| acc * (n - i) as u64 / (i as u64 + 1))
    }

    #[test]
    fn regime_thresholds() {
        assert_eq!(Regime::classify(3, 0), Regime::PMatrix);
        assert_eq!(Regime::classify(3, 1), Regime::SingleViolation);
        assert_eq!(Regime::classify(3, 9), Regime::SparseViolation);
        assert_eq!(Regime::classify(3, 10), Regime::DenseViolation);
    }

    #[test]
    fn dimension_cap() {
        let big = Matrix::identity(MAX_ENUM_DIM + 1);
        assert!(matches!(enumerate_minors(&big), Err(Error::DimensionCap { .. })));
        assert!(violation_set(&big, 0.0).is_err());
    }

    #[test]
    fn table_one_neighborhood() {
        let a = appendix_b_fixture().perturbed();
        let rows = neighborhood_minors(&a, &mask(&[1, 5]), 2).unwrap();
        assert_eq!(rows.len(), 15);
        let get = |idx: &[usize]| rows.iter().find(|r| r.alpha == mask(idx)).unwrap().value;
        for (idx, v) in [
            (&[1][..], 1.865),
            (&[1, 2], 18.820),
            (&[1, 5], -0.001),
            (&[5], 1.419),
            (&[1, 5, 6], 14.244),
            (&[1, 4, 5], 0.617),
        ] {
            assert!((get(idx) - v).abs() <= 1e-3, "{idx:?}");
        }
        let near = neighborhood_minors(&a, &mask(&[1, 5]), 1).unwrap();
        assert_eq!(near.len(), 7);
        assert!(neighborhood_minors(&a, &mask(&[1, 5]), 3).is_err());
        let id = neighborhood_minors(&Matrix::identity(6), &mask(&[2]), 2).unwrap();
        assert!(id.iter().all(|r| r.value == 1.0));
    }

    #[test]
    fn marginal_flagging() {
        let a = Matrix::from_rows(&[vec![1.0, 1.0], vec![1.0, 1.0 + 1e-12]]).unwrap();
        let rep = violation_set(&a, 0.0).unwrap();
        assert_eq!(rep.marginal.len(), 1);
        assert_eq!(rep.marginal[0].alpha.bits(), 3);
    }

    #[test]
    fn engines_agree_on_fixture() {
        let a = appendix_b_fixture().perturbed();
        let naive = violation_set_with(&a, 0.0, Engine::Naive).unwrap();
        let par = violation_set_with(&a, 0.0, Engine::Parallel).unwrap();
        assert_eq!(naive, par);
        let rec = violation_set_with(&a, 0.0, Engine::Recursive).unwrap();
        assert_eq!(rec.regime, naive.regime);
        assert_eq!(rec.min_minor.alpha, naive.min_minor.alpha);
    }
}
