//! Schur-complement checks and a sign-correlation study between pairs of
//! principal minors under random matrix ensembles.
//!
//! Findings here are relative to the two ensembles below; nothing is claimed
//! about matrices in general.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::mask::SubsetMask;
use crate::matrix::{schur_det, Block, Matrix};
use crate::rng::substream;

/// Dimension cap for the study and the identity check.
pub const MAX_STUDY_DIM: usize = 24;

fn uniform_matrix(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..n * n).map(|_| rng.random_range(-1.0..=1.0)).collect()
}

/// Maximum of `|det A − det F · det S| / |det A|` over `samples` random
/// matrices `U[−1,1] + n·I`, each split at a random point after a random
/// symmetric permutation. Samples whose `F` block is numerically singular
/// are skipped; returns `(max error, samples used)`.
pub fn verify_schur_identity(samples: usize, n: usize, seed: u64) -> Result<(f64, usize)> {
    if !(2..=MAX_STUDY_DIM).contains(&n) {
        return Err(Error::InvalidArgument(format!("n must be in 2..={MAX_STUDY_DIM}, got {n}")));
    }
    let errs: Vec<Option<f64>> = (0..samples as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = substream(seed, i);
            let mut data = uniform_matrix(n, &mut rng);
            for d in 0..n {
                data[d * n + d] += n as f64;
            }
            let mut perm: Vec<usize> = (0..n).collect();
            perm.shuffle(&mut rng);
            let a = Matrix::new(n, data)?.permute_symmetric(&perm)?;
            let k = rng.random_range(1..n);
            let (c, d, e, f) = split_blocks(&a, k);
            match schur_det(&c, &d, &e, &f) {
                Ok(s) => Ok(Some(s.relative_error())),
                Err(Error::SingularBlock { .. }) => Ok(None),
                Err(e) => Err(e),
            }
        })
        .collect::<Result<_>>()?;
    let used = errs.iter().flatten().count();
    Ok((errs.into_iter().flatten().fold(0.0, f64::max), used))
}

/// `[[C, D], [E, F]]` with `C` the leading `k × k` block.
pub fn split_blocks(a: &Matrix, k: usize) -> (Matrix, Block, Block, Matrix) {
    let n = a.n();
    assert!(k >= 1 && k < n, "split point must leave both blocks nonempty");
    let m = n - k;
    let pick = |r0: usize, rows: usize, c0: usize, cols: usize| -> Vec<f64> {
        let mut out = Vec::with_capacity(rows * cols);
        for i in r0..r0 + rows {
            for j in c0..c0 + cols {
                out.push(a[(i, j)]);
            }
        }
        out
    };
    let c = Matrix::new(k, pick(0, k, 0, k)).expect("finite");
    let d = Block::new(k, m, pick(0, k, k, m)).expect("conformal");
    let e = Block::new(m, k, pick(k, m, 0, k)).expect("conformal");
    let f = Matrix::new(m, pick(k, m, k, m)).expect("finite");
    (c, d, e, f)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EnsembleKind {
    /// Entries iid uniform on `[−1, 1]`.
    IidUniform,
    /// Diagonally dominant positive-diagonal base plus a rank-one shift whose
    /// scale is uniform on `[0, 2λ_c]`, where `λ_c` zeroes the full
    /// determinant. Roughly half the samples leave the P-matrix class.
    ShiftedPMatrix,
}

impl EnsembleKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            EnsembleKind::IidUniform => "iid_uniform",
            EnsembleKind::ShiftedPMatrix => "shifted_pmatrix",
        }
    }

    pub fn sample(&self, n: usize, rng: &mut ChaCha8Rng) -> Matrix {
        match self {
            EnsembleKind::IidUniform => Matrix::new(n, uniform_matrix(n, rng)).expect("finite"),
            EnsembleKind::ShiftedPMatrix => shifted_pmatrix(n, rng),
        }
    }
}

impl fmt::Display for EnsembleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EnsembleKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.replace('-', "_").as_str() {
            "iid_uniform" | "iid" => Ok(EnsembleKind::IidUniform),
            "shifted_pmatrix" | "shifted" => Ok(EnsembleKind::ShiftedPMatrix),
            _ => Err(Error::InvalidArgument(format!("unknown ensemble {s:?}"))),
        }
    }
}

fn shifted_pmatrix(n: usize, rng: &mut ChaCha8Rng) -> Matrix {
    let mut data = uniform_matrix(n, rng);
    for i in 0..n {
        let off: f64 = (0..n).filter(|&j| j != i).map(|j| data[i * n + j].abs()).sum();
        data[i * n + i] = off + rng.random_range(0.5..=1.5);
    }
    let m = Matrix::new(n, data).expect("finite");
    let u: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..=1.0)).collect();
    let mut v: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..=1.0)).collect();
    // det(M + λ u vᵀ) = det M · (1 + λ vᵀM⁻¹u), zero at λ_c = −1/(vᵀM⁻¹u)
    let minv_u = m.solve(&u).expect("diagonally dominant base is nonsingular");
    let mut g: f64 = v.iter().zip(&minv_u).map(|(a, b)| a * b).sum();
    if g > 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
        g = -g;
    }
    if g == 0.0 {
        return m;
    }
    let lambda_c = -1.0 / g;
    let lambda = rng.random_range(0.0..=2.0 * lambda_c);
    let scaled: Vec<f64> = u.iter().map(|x| x * lambda).collect();
    m.add_outer(&scaled, &v).expect("conformal")
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EnsembleConfig {
    pub n: usize,
    pub kind: EnsembleKind,
    pub samples: usize,
    pub seed: u64,
}

impl EnsembleConfig {
    pub fn validate(&self) -> Result<()> {
        if !(2..=MAX_STUDY_DIM).contains(&self.n) {
            return Err(Error::InvalidArgument(format!("n must be in 2..={MAX_STUDY_DIM}, got {}", self.n)));
        }
        if self.samples == 0 {
            return Err(Error::InvalidArgument("samples must be >= 1".into()));
        }
        Ok(())
    }
}

/// Which `(α, β)` pairs to tabulate. With `a = ⌊n/2⌋`, `α = {1..a}`.
#[derive(Clone, Debug, PartialEq)]
pub enum PairSpec {
    /// Overlaps 0, 1 and `a − 1`, plus containment (deduplicated).
    Defaults,
    /// One pair with `|α ∩ β| = k` and `|α| = |β|`.
    Overlap(usize),
    /// `β = α ∪ {a + 1}`.
    Containment,
    Explicit(Vec<(SubsetMask, SubsetMask)>),
}

impl FromStr for PairSpec {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "default" | "defaults" => Ok(PairSpec::Defaults),
            "containment" | "contain" => Ok(PairSpec::Containment),
            _ => s
                .parse::<usize>()
                .map(PairSpec::Overlap)
                .map_err(|_| Error::InvalidArgument(format!("bad overlap spec {s:?}"))),
        }
    }
}

fn range_mask(lo: usize, hi: usize, n: usize) -> SubsetMask {
    SubsetMask::from_indices(&(lo..hi).collect::<Vec<_>>(), n).expect("in range")
}

fn overlap_pair(n: usize, k: usize) -> Result<(SubsetMask, SubsetMask)> {
    let a = (n / 2).max(k + 1);
    if 2 * a - k > n {
        return Err(Error::InvalidArgument(format!("overlap {k} does not fit in dimension {n}")));
    }
    let alpha = range_mask(0, a, n);
    let beta = range_mask(a - k, 2 * a - k, n);
    Ok((alpha, beta))
}

impl PairSpec {
    pub fn resolve(&self, n: usize) -> Result<Vec<(SubsetMask, SubsetMask)>> {
        let a = (n / 2).max(1);
        let containment = || (range_mask(0, a, n), range_mask(0, a + 1, n));
        let pairs = match self {
            PairSpec::Defaults => {
                let mut out = Vec::new();
                for k in [0, 1, a.saturating_sub(1)] {
                    if let Ok(p) = overlap_pair(n, k) {
                        if !out.contains(&p) {
                            out.push(p);
                        }
                    }
                }
                out.push(containment());
                out
            }
            PairSpec::Overlap(k) => vec![overlap_pair(n, *k)?],
            PairSpec::Containment => vec![containment()],
            PairSpec::Explicit(v) => v.clone(),
        };
        for (x, y) in &pairs {
            if x == y {
                return Err(Error::InvalidArgument(format!("degenerate pair: alpha = beta = {x}")));
            }
            if x.n() != n || y.n() != n {
                return Err(Error::InvalidArgument("pair dimension differs from ensemble".into()));
            }
        }
        Ok(pairs)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PairStats {
    pub alpha: SubsetMask,
    pub beta: SubsetMask,
    pub overlap: usize,
    /// `det A_α > 0` and `det A_β > 0`.
    pub n_pp: u64,
    /// `det A_α > 0`, `det A_β ≤ 0`.
    pub n_pn: u64,
    pub n_np: u64,
    pub n_nn: u64,
    /// `P(det A_β > 0 | det A_α > 0)`; absent when the condition never occurred.
    pub p_beta_pos_given_alpha_pos: Option<f64>,
    pub p_beta_nonpos_given_alpha_pos: Option<f64>,
    pub p_beta_pos_given_alpha_nonpos: Option<f64>,
    pub p_beta_nonpos_given_alpha_nonpos: Option<f64>,
    pub mi_bits: f64,
}

impl PairStats {
    fn from_counts(alpha: SubsetMask, beta: SubsetMask, [pp, pn, np, nn]: [u64; 4]) -> Self {
        let ratio = |a: u64, b: u64| if a + b == 0 { None } else { Some(a as f64 / (a + b) as f64) };
        Self {
            overlap: (alpha.bits() & beta.bits()).count_ones() as usize,
            alpha,
            beta,
            n_pp: pp,
            n_pn: pn,
            n_np: np,
            n_nn: nn,
            p_beta_pos_given_alpha_pos: ratio(pp, pn),
            p_beta_nonpos_given_alpha_pos: ratio(pn, pp),
            p_beta_pos_given_alpha_nonpos: ratio(np, nn),
            p_beta_nonpos_given_alpha_nonpos: ratio(nn, np),
            mi_bits: sign_mi([pp, pn, np, nn]),
        }
    }

    pub fn total(&self) -> u64 {
        self.n_pp + self.n_pn + self.n_np + self.n_nn
    }
}

/// Plug-in mutual information of a 2×2 table `[pp, pn, np, nn]`, summed so
/// that the transposed table gives a bit-identical result.
pub fn sign_mi([pp, pn, np, nn]: [u64; 4]) -> f64 {
    let total = (pp + pn + np + nn) as f64;
    if total == 0.0 {
        return 0.0;
    }
    let (row_p, row_n) = ((pp + pn) as f64, (np + nn) as f64);
    let (col_p, col_n) = ((pp + np) as f64, (pn + nn) as f64);
    let term = |c: u64, r: f64, k: f64| {
        if c == 0 {
            0.0
        } else {
            let c = c as f64;
            c / total * (c * total / (r * k)).log2()
        }
    };
    let diag = term(pp, row_p, col_p) + term(nn, row_n, col_n);
    let off = term(pn, row_p, col_n) + term(np, row_n, col_p);
    (diag + off).max(0.0)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConditionalSignReport {
    pub config: EnsembleConfig,
    pub pairs: Vec<PairStats>,
}

/// Samples the ensemble in parallel (sample `i` uses substream `i`) and
/// tabulates joint signs for each pair.
pub fn conditional_sign_study(cfg: &EnsembleConfig, spec: &PairSpec) -> Result<ConditionalSignReport> {
    cfg.validate()?;
    let pairs = spec.resolve(cfg.n)?;
    let zero = || vec![[0u64; 4]; pairs.len()];
    let counts = (0..cfg.samples as u64)
        .into_par_iter()
        .fold(zero, |mut acc, i| {
            let mut rng = substream(cfg.seed, i);
            let a = cfg.kind.sample(cfg.n, &mut rng);
            for (slot, (x, y)) in acc.iter_mut().zip(&pairs) {
                let sx = a.principal_minor(x).expect("dimension checked") > 0.0;
                let sy = a.principal_minor(y).expect("dimension checked") > 0.0;
                let cell = match (sx, sy) {
                    (true, true) => 0,
                    (true, false) => 1,
                    (false, true) => 2,
                    (false, false) => 3,
                };
                slot[cell] += 1;
            }
            acc
        })
        .reduce(zero, |mut a, b| {
            for (x, y) in a.iter_mut().zip(b) {
                for c in 0..4 {
                    x[c] += y[c];
                }
            }
            a
        });
    let pairs = pairs
        .into_iter()
        .zip(counts)
        .map(|((x, y), c)| PairStats::from_counts(x, y, c))
        .collect();
    Ok(ConditionalSignReport { config: cfg.clone(), pairs })
}
