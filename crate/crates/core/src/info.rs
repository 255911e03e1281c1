//! Information quantities for the hidden-witness search, all in bits.
//!
//! The witness `W` is uniform over the `K = 2^n − 1` nonempty subsets. With
//! distinct queries, after `k − 1` misses the posterior is uniform over the
//! remaining candidates, so the `k`-th response is Bernoulli with
//! `p_k = 1/(K − k + 1)`.

use std::collections::HashMap;

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::mask::{low_bits, SubsetMask};
use crate::oracle::{self, OracleMode, OracleSession, StrategyKind, Target, Transcript, WithoutReplacement};
use crate::rng::substream;

/// `K = 2^n − 1`.
pub fn candidate_count(n: usize) -> Result<u64> {
    if n == 0 || n > 62 {
        return Err(Error::InvalidArgument(format!("n must be in 1..=62, got {n}")));
    }
    Ok(low_bits(n))
}

pub fn binary_entropy(p: f64) -> f64 {
    if p <= 0.0 || p >= 1.0 {
        return 0.0;
    }
    -p * p.log2() - (1.0 - p) * (1.0 - p).log2()
}

/// `log₂(2^n − 1)`.
pub fn prior_entropy(n: usize) -> Result<f64> {
    Ok((candidate_count(n)? as f64).log2())
}

/// `1/(K − (k − 1))`, `1 ≤ k ≤ K`.
pub fn posterior_hit_prob(n: usize, k: u64) -> Result<f64> {
    let big_k = candidate_count(n)?;
    if k == 0 || k > big_k {
        return Err(Error::InvalidArgument(format!("query index {k} outside 1..={big_k}")));
    }
    Ok(1.0 / (big_k - (k - 1)) as f64)
}

fn check_budget(n: usize, q: u64) -> Result<u64> {
    let k = candidate_count(n)?;
    if q > k {
        return Err(Error::InvalidArgument(format!("query budget {q} exceeds K = {k}")));
    }
    Ok(k)
}

/// `Σ_{k≤q} h₂(p_k)`: chain-rule upper bound on `I(W; F_q)`.
pub fn mi_chain_bound(n: usize, q: u64) -> Result<f64> {
    let k = check_budget(n, q)?;
    Ok((1..=q).map(|j| binary_entropy(1.0 / (k - j + 1) as f64)).sum())
}

/// Exact `I(W; F_q)` for `q` distinct queries fixed in advance. The
/// transcript determines which (if any) query hit, so the information equals
/// the transcript entropy: all-zero with mass `(K − q)/K`, each one-hot
/// pattern with mass `1/K`.
pub fn mi_exact_nonadaptive(n: usize, q: u64) -> Result<f64> {
    let k = check_budget(n, q)?;
    let kf = k as f64;
    let miss = (k - q) as f64 / kf;
    let miss_term = if miss > 0.0 { -miss * miss.log2() } else { 0.0 };
    Ok(miss_term + q as f64 / kf * kf.log2())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MiEstimate {
    pub bits: f64,
    pub samples: usize,
}

/// Plug-in estimate of `I(W; F)` from `(witness, transcript)` samples;
/// transcripts are bucketed by their flattened `(query, response)` bytes.
/// Biased upward, no correction.
pub fn mi_estimate(samples: &[(SubsetMask, Transcript)]) -> Result<MiEstimate> {
    if samples.is_empty() {
        return Err(Error::InvalidArgument("no samples".into()));
    }
    let mut f_ids: HashMap<Vec<u8>, usize> = HashMap::new();
    let mut joint: HashMap<(u64, usize), u64> = HashMap::new();
    let mut w_counts: HashMap<u64, u64> = HashMap::new();
    let mut f_counts: Vec<u64> = Vec::new();
    for (w, t) in samples {
        let next = f_ids.len();
        let id = *f_ids.entry(t.key_bytes()).or_insert(next);
        if id == f_counts.len() {
            f_counts.push(0);
        }
        f_counts[id] += 1;
        *w_counts.entry(w.bits()).or_insert(0) += 1;
        *joint.entry((w.bits(), id)).or_insert(0) += 1;
    }
    let total = samples.len() as f64;
    let mut cells: Vec<_> = joint.into_iter().collect();
    cells.sort_unstable();
    let bits = cells
        .into_iter()
        .map(|((w, f), c)| {
            let c = c as f64;
            let pw = w_counts[&w] as f64;
            let pf = f_counts[f] as f64;
            c / total * (c * total / (pw * pf)).log2()
        })
        .sum::<f64>();
    Ok(MiEstimate { bits: bits.max(0.0), samples: samples.len() })
}

/// Draws `samples` synthetic runs of exactly `q` single queries each, with
/// a uniform witness per sample.
pub fn sample_transcripts(
    n: usize,
    q: u64,
    kind: &StrategyKind,
    samples: usize,
    seed: u64,
) -> Result<Vec<(SubsetMask, Transcript)>> {
    let k = check_budget(n, q)?;
    if matches!(kind, StrategyKind::NeighborDescent) {
        return Err(Error::ValueModeUnavailable);
    }
    (0..samples as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = substream(seed, i);
            let w = SubsetMask::from_bits_unchecked(rng.random_range(1..=k), n);
            let mut session = OracleSession::new(Target::Hidden(w), 0.0, OracleMode::Sign)?;
            let mut strat = kind.build();
            while session.query_count() < q {
                let batch = strat.next_batch(session.transcript(), n, 1, &mut rng);
                if batch.is_empty() {
                    break;
                }
                session.query_batch(&batch)?;
            }
            Ok((w, session.into_transcript()))
        })
        .collect()
}

/// `1 − (I + 1)/log₂K`, clamped to `[0, 1]`.
pub fn fano_error_bound(mi_bits: f64, k: u64) -> f64 {
    if k < 2 {
        return 0.0;
    }
    (1.0 - (mi_bits + 1.0) / (k as f64).log2()).clamp(0.0, 1.0)
}

/// Smallest `Pe` with `h₂(Pe) + Pe·log₂(K − 1) ≥ log₂K − I`, by bisection.
pub fn fano_exact_bound(mi_bits: f64, k: u64) -> f64 {
    if k < 2 {
        return 0.0;
    }
    let target = (k as f64).log2() - mi_bits;
    if target <= 0.0 {
        return 0.0;
    }
    let g = |pe: f64| binary_entropy(pe) + pe * ((k - 1) as f64).log2();
    // g increases on [0, (K−1)/K] and reaches log₂K there
    let (mut lo, mut hi) = (0.0, (k - 1) as f64 / k as f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g(mid) >= target {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct AllZero {
    /// `Pr(F_q = 0…0) = (K − q)/K`.
    pub exact: f64,
    /// `Σ p_k ≥ Pr(∃k ≤ q: y_k = 1)`.
    pub union_bound: f64,
}

pub fn all_zero_probability(n: usize, q: u64) -> Result<AllZero> {
    let k = check_budget(n, q)?;
    let union_bound = (1..=q).map(|j| 1.0 / (k - j + 1) as f64).sum();
    Ok(AllZero { exact: (k - q) as f64 / k as f64, union_bound })
}

/// `1 − C(K−2, q)/C(K, q)`: chance that a uniform without-replacement
/// query set of size `q` touches `w` or `w'`.
pub fn tv_uniform_wor_closed_form(k: u64, q: u64) -> f64 {
    if q >= k.saturating_sub(1) {
        return 1.0;
    }
    let (k, q) = (k as f64, q as f64);
    1.0 - (k - q) * (k - q - 1.0) / (k * (k - 1.0))
}

const ENUMERATION_LIMIT: f64 = 2e6;

/// Total variation between `P(F_q | W = w)` and `P(F_q | W = w2)`, computed
/// by exhaustive enumeration of the strategy's random choices. Transcripts
/// compare on `(query, response)` pairs.
pub fn transcript_tv_distance(
    n: usize,
    kind: &StrategyKind,
    q: u64,
    w: &SubsetMask,
    w2: &SubsetMask,
) -> Result<f64> {
    if n > 10 {
        return Err(Error::Infeasible(format!("n = {n} above 10")));
    }
    let k = check_budget(n, q)?;
    if w == w2 || w.n() != n || w2.n() != n {
        return Err(Error::InvalidArgument("need two distinct witnesses of dimension n".into()));
    }
    match kind {
        StrategyKind::Sweep | StrategyKind::Fixed(_) => {
            let mut strat = kind.build();
            let mut rng = substream(0, 0);
            let seq = strat.next_batch(&Transcript::default(), n, q as usize, &mut rng);
            Ok(tv_from_paths(std::iter::once((1.0, seq)), w, w2))
        }
        StrategyKind::UniformWithoutReplacement => {
            let count: f64 = (0..q).map(|i| (k - i) as f64).product();
            if count <= ENUMERATION_LIMIT {
                Ok(tv_exhaustive_wor(n, q, w, w2))
            } else {
                Ok(tv_pattern_enumeration(k, q, w, w2, false))
            }
        }
        StrategyKind::UniformWithReplacement => {
            if (k as f64).powi(q as i32) <= ENUMERATION_LIMIT {
                Ok(tv_exhaustive_wr(n, q, w, w2))
            } else if 3f64.powi(q as i32) <= ENUMERATION_LIMIT {
                Ok(tv_pattern_enumeration(k, q, w, w2, true))
            } else {
                Err(Error::Infeasible(format!("3^{q} patterns")))
            }
        }
        StrategyKind::NeighborDescent => Err(Error::Infeasible("adaptive value-mode strategy".into())),
    }
}

fn transcript_key(seq: &[SubsetMask], w: &SubsetMask) -> Vec<u8> {
    let mut key = Vec::with_capacity(seq.len() * 9);
    for q in seq {
        key.extend_from_slice(&q.bits().to_le_bytes());
        key.push((q == w) as u8);
    }
    key
}

fn tv_from_paths(paths: impl Iterator<Item = (f64, Vec<SubsetMask>)>, w: &SubsetMask, w2: &SubsetMask) -> f64 {
    let mut p: HashMap<Vec<u8>, f64> = HashMap::new();
    let mut q: HashMap<Vec<u8>, f64> = HashMap::new();
    for (weight, seq) in paths {
        *p.entry(transcript_key(&seq, w)).or_insert(0.0) += weight;
        *q.entry(transcript_key(&seq, w2)).or_insert(0.0) += weight;
    }
    let mut diff = 0.0;
    for (key, pv) in &p {
        diff += (pv - q.get(key).copied().unwrap_or(0.0)).abs();
    }
    for (key, qv) in &q {
        if !p.contains_key(key) {
            diff += qv;
        }
    }
    0.5 * diff
}

/// Every ordered `q`-sequence of distinct masks, each with mass `1/(K)_q`.
pub fn tv_exhaustive_wor(n: usize, q: u64, w: &SubsetMask, w2: &SubsetMask) -> f64 {
    let k = low_bits(n);
    let weight = 1.0 / (0..q).map(|i| (k - i) as f64).product::<f64>();
    let mut paths = Vec::new();
    let mut seq = Vec::with_capacity(q as usize);
    let mut used = vec![false; k as usize + 1];
    fn rec(n: usize, k: u64, q: u64, seq: &mut Vec<SubsetMask>, used: &mut [bool], out: &mut Vec<Vec<SubsetMask>>) {
        if seq.len() as u64 == q {
            out.push(seq.clone());
            return;
        }
        for b in 1..=k {
            if !used[b as usize] {
                used[b as usize] = true;
                seq.push(SubsetMask::from_bits_unchecked(b, n));
                rec(n, k, q, seq, used, out);
                seq.pop();
                used[b as usize] = false;
            }
        }
    }
    rec(n, k, q, &mut seq, &mut used, &mut paths);
    tv_from_paths(paths.into_iter().map(|s| (weight, s)), w, w2)
}

/// Every `q`-sequence with repetition, each with mass `K^{-q}`.
pub fn tv_exhaustive_wr(n: usize, q: u64, w: &SubsetMask, w2: &SubsetMask) -> f64 {
    let k = low_bits(n);
    let total = k.pow(q as u32);
    let weight = 1.0 / total as f64;
    let paths = (0..total).map(|mut code| {
        let seq = (0..q)
            .map(|_| {
                let b = code % k + 1;
                code /= k;
                SubsetMask::from_bits_unchecked(b, n)
            })
            .collect();
        (weight, seq)
    });
    tv_from_paths(paths, w, w2)
}

#[derive(Clone, Copy, PartialEq, Eq, Hash)]
enum Slot {
    First,
    Second,
    Other,
}

/// Exact enumeration over query patterns in which every mask other than the
/// two witnesses is collapsed into one symbol. Both conditionals assign the
/// same mass to each concrete sequence, so collapsing exchangeable masks
/// preserves the total variation.
pub fn tv_pattern_enumeration(k: u64, q: u64, w: &SubsetMask, w2: &SubsetMask, with_replacement: bool) -> f64 {
    let _ = (w, w2);
    let mut p: HashMap<(Vec<Slot>, Vec<bool>), f64> = HashMap::new();
    let mut qd: HashMap<(Vec<Slot>, Vec<bool>), f64> = HashMap::new();
    let mut stack = vec![(Vec::<Slot>::new(), 1.0f64)];
    while let Some((pat, mass)) = stack.pop() {
        if pat.len() as u64 == q {
            let under_first: Vec<bool> = pat.iter().map(|s| *s == Slot::First).collect();
            let under_second: Vec<bool> = pat.iter().map(|s| *s == Slot::Second).collect();
            *p.entry((pat.clone(), under_first)).or_insert(0.0) += mass;
            *qd.entry((pat, under_second)).or_insert(0.0) += mass;
            continue;
        }
        let used_first = pat.contains(&Slot::First) as u64;
        let used_second = pat.contains(&Slot::Second) as u64;
        let used_other = pat.iter().filter(|s| **s == Slot::Other).count() as u64;
        let (avail_first, avail_second, avail_other, remaining) = if with_replacement {
            (1, 1, k - 2, k)
        } else {
            (1 - used_first, 1 - used_second, k - 2 - used_other, k - pat.len() as u64)
        };
        for (slot, avail) in [(Slot::First, avail_first), (Slot::Second, avail_second), (Slot::Other, avail_other)] {
            if avail > 0 {
                let mut next = pat.clone();
                next.push(slot);
                stack.push((next, mass * avail as f64 / remaining as f64));
            }
        }
    }
    let mut diff = 0.0;
    for (key, pv) in &p {
        diff += (pv - qd.get(key).copied().unwrap_or(0.0)).abs();
    }
    for (key, qv) in &qd {
        if !p.contains_key(key) {
            diff += qv;
        }
    }
    0.5 * diff
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct McEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub trials: u64,
}

impl McEstimate {
    fn from_successes(successes: u64, trials: u64) -> Self {
        let p = successes as f64 / trials as f64;
        Self { mean: p, stderr: (p * (1.0 - p) / trials as f64).sqrt(), trials }
    }
}

fn check_trials(trials: u64) -> Result<()> {
    if trials == 0 {
        return Err(Error::InvalidArgument("trials must be >= 1".into()));
    }
    Ok(())
}

/// Monte Carlo success rate of `q` uniform distinct queries followed by a
/// maximum-a-posteriori guess (the hit if there was one, otherwise a uniform
/// pick among unqueried candidates).
pub fn simulate_map_success(n: usize, q: u64, trials: u64, seed: u64) -> Result<McEstimate> {
    let k = check_budget(n, q)?;
    check_trials(trials)?;
    let wins: u64 = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = substream(seed, t);
            let w = rng.random_range(1..=k);
            let mut strat = WithoutReplacement::default();
            let hist = Transcript::default();
            let queried = oracle::Strategy::next_batch(&mut strat, &hist, n, q as usize, &mut rng);
            if queried.iter().any(|m| m.bits() == w) {
                return 1;
            }
            // next draw is uniform over the unqueried candidates
            match oracle::Strategy::next_batch(&mut strat, &hist, n, 1, &mut rng).first() {
                Some(g) if g.bits() == w => 1,
                _ => 0,
            }
        })
        .sum();
    Ok(McEstimate::from_successes(wins, trials))
}

/// Monte Carlo `Pr(F_q = 0…0)` for uniform distinct queries.
pub fn simulate_all_zero(n: usize, q: u64, trials: u64, seed: u64) -> Result<McEstimate> {
    let k = check_budget(n, q)?;
    check_trials(trials)?;
    let zeros: u64 = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = substream(seed, t);
            let w = rng.random_range(1..=k);
            let mut strat = WithoutReplacement::default();
            let queried = oracle::Strategy::next_batch(&mut strat, &Transcript::default(), n, q as usize, &mut rng);
            queried.iter().all(|m| m.bits() != w) as u64
        })
        .sum();
    Ok(McEstimate::from_successes(zeros, trials))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct HitFrequency {
    pub k: u64,
    /// Trials whose first `k − 1` queries all missed.
    pub reached: u64,
    pub hits: u64,
    pub expected: f64,
}

impl HitFrequency {
    pub fn empirical(&self) -> f64 {
        self.hits as f64 / self.reached.max(1) as f64
    }

    pub fn stderr(&self) -> f64 {
        (self.expected * (1.0 - self.expected) / self.reached.max(1) as f64).sqrt()
    }
}

/// Empirical `Pr(y_k = 1 | y_<k = 0)` for uniform distinct queries.
pub fn posterior_hit_frequencies(n: usize, max_k: u64, trials: u64, seed: u64) -> Result<Vec<HitFrequency>> {
    let k = check_budget(n, max_k)?;
    check_trials(trials)?;
    let positions: Vec<Option<u64>> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = substream(seed, t);
            let w = rng.random_range(1..=k);
            let mut strat = WithoutReplacement::default();
            let queried =
                oracle::Strategy::next_batch(&mut strat, &Transcript::default(), n, max_k as usize, &mut rng);
            queried.iter().position(|m| m.bits() == w).map(|p| p as u64 + 1)
        })
        .collect();
    let mut out = Vec::with_capacity(max_k as usize);
    for j in 1..=max_k {
        let reached = positions.iter().filter(|p| p.is_none_or(|p| p >= j)).count() as u64;
        let hits = positions.iter().filter(|p| **p == Some(j)).count() as u64;
        out.push(HitFrequency { k: j, reached, hits, expected: posterior_hit_prob(n, j)? });
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct InfoReport {
    pub n: usize,
    #[serde(rename = "K")]
    pub k: u64,
    pub q: u64,
    pub strategy: String,
    pub prior_entropy_bits: f64,
    pub mi_exact_bits: Option<f64>,
    pub mi_estimate_bits: Option<f64>,
    pub mi_estimate_samples: usize,
    pub mi_upper_bound_bits: f64,
    pub fano_error_lower: f64,
    pub all_zero_prob_exact: f64,
    pub all_zero_prob_union_bound: f64,
}

/// Closed forms plus, when `samples > 0`, a plug-in estimate from synthetic
/// runs.
pub fn info_report(n: usize, q: u64, kind: &StrategyKind, samples: usize, seed: u64) -> Result<InfoReport> {
    let k = check_budget(n, q)?;
    let mi_exact = if kind.is_distinct_nonadaptive() { Some(mi_exact_nonadaptive(n, q)?) } else { None };
    let bound = mi_chain_bound(n, q)?;
    let estimate = if samples > 0 { Some(mi_estimate(&sample_transcripts(n, q, kind, samples, seed)?)?) } else { None };
    let az = all_zero_probability(n, q)?;
    Ok(InfoReport {
        n,
        k,
        q,
        strategy: kind.name().to_string(),
        prior_entropy_bits: prior_entropy(n)?,
        mi_exact_bits: mi_exact,
        mi_estimate_bits: estimate.map(|e| e.bits),
        mi_estimate_samples: samples,
        mi_upper_bound_bits: bound,
        fano_error_lower: fano_error_bound(mi_exact.unwrap_or(bound), k),
        all_zero_prob_exact: az.exact,
        all_zero_prob_union_bound: az.union_bound,
    })
}
