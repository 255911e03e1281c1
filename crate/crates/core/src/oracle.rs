//! Determinant-sign oracle, query strategies and first-hit experiments.
//!
//! A query on subset `α` answers `[det(A_α) ≤ τ]`. In the single-violation
//! regime this is an equality test against the hidden witness, which is
//! what the synthetic target models directly.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::mask::{low_bits, SubsetMask};
use crate::matrix::Matrix;
use crate::minors::{self, MinorRecord};
use crate::rng::substream;

#[derive(Clone, Debug)]
pub enum Target {
    Matrix(Matrix),
    /// Equality oracle against a hidden mask, no matrix needed.
    Hidden(SubsetMask),
}

impl Target {
    pub fn n(&self) -> usize {
        match self {
            Target::Matrix(a) => a.n(),
            Target::Hidden(w) => w.n(),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum OracleMode {
    /// Response bit only.
    #[default]
    Sign,
    /// Response bit plus the minor value itself.
    Value,
}

impl FromStr for OracleMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sign" => Ok(OracleMode::Sign),
            "value" => Ok(OracleMode::Value),
            _ => Err(Error::InvalidArgument(format!("unknown oracle mode {s:?}"))),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct Round {
    pub queries: Vec<SubsetMask>,
    pub responses: Vec<bool>,
    /// Minor values, value mode only.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<f64>>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct Transcript {
    rounds: Vec<Round>,
}

impl Transcript {
    pub fn rounds(&self) -> &[Round] {
        &self.rounds
    }

    /// Total number of scalar responses.
    pub fn len(&self) -> usize {
        self.rounds.iter().map(|r| r.responses.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Responses flattened in query order.
    pub fn flatten(&self) -> Vec<bool> {
        self.rounds.iter().flat_map(|r| r.responses.iter().copied()).collect()
    }

    pub fn queries(&self) -> impl Iterator<Item = &SubsetMask> {
        self.rounds.iter().flat_map(|r| r.queries.iter())
    }

    /// Flattened `(query, response)` pairs as bytes, for bucketing.
    pub fn key_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.len() * 9);
        for r in &self.rounds {
            for (q, y) in r.queries.iter().zip(&r.responses) {
                out.extend_from_slice(&q.bits().to_le_bytes());
                out.push(*y as u8);
            }
        }
        out
    }

    pub fn push(&mut self, round: Round) {
        self.rounds.push(round);
    }
}

pub struct OracleSession {
    target: Target,
    tau: f64,
    mode: OracleMode,
    query_count: u64,
    transcript: Transcript,
    scratch: Vec<f64>,
}

impl OracleSession {
    pub fn new(target: Target, tau: f64, mode: OracleMode) -> Result<Self> {
        if mode == OracleMode::Value && matches!(target, Target::Hidden(_)) {
            return Err(Error::ValueModeUnavailable);
        }
        Ok(Self { target, tau, mode, query_count: 0, transcript: Transcript::default(), scratch: Vec::new() })
    }

    pub fn n(&self) -> usize {
        self.target.n()
    }

    pub fn mode(&self) -> OracleMode {
        self.mode
    }

    pub fn query_count(&self) -> u64 {
        self.query_count
    }

    pub fn transcript(&self) -> &Transcript {
        &self.transcript
    }

    pub fn into_transcript(self) -> Transcript {
        self.transcript
    }

    fn answer(&mut self, alpha: &SubsetMask) -> Result<(bool, Option<f64>)> {
        if alpha.n() != self.n() {
            return Err(Error::DimensionMismatch(alpha.n(), self.n()));
        }
        Ok(match &self.target {
            Target::Hidden(w) => (alpha == w, None),
            Target::Matrix(a) => {
                let v = a.principal_det_with(alpha.bits(), &mut self.scratch);
                (v <= self.tau, Some(v))
            }
        })
    }

    /// A single query as its own round.
    pub fn query(&mut self, alpha: &SubsetMask) -> Result<bool> {
        Ok(self.query_batch(std::slice::from_ref(alpha))?[0])
    }

    /// One round of simultaneous queries.
    pub fn query_batch(&mut self, batch: &[SubsetMask]) -> Result<Vec<bool>> {
        let mut responses = Vec::with_capacity(batch.len());
        let mut values = match self.mode {
            OracleMode::Value => Some(Vec::with_capacity(batch.len())),
            OracleMode::Sign => None,
        };
        for alpha in batch {
            let (y, v) = self.answer(alpha)?;
            responses.push(y);
            if let Some(vals) = values.as_mut() {
                vals.push(v.unwrap_or(f64::NAN));
            }
        }
        self.query_count += batch.len() as u64;
        self.transcript.push(Round { queries: batch.to_vec(), responses: responses.clone(), values });
        Ok(responses)
    }
}

/// An adaptive query strategy. Batches may depend on the full history.
/// An empty batch means the strategy has nothing left to ask.
pub trait Strategy: Send {
    fn name(&self) -> &'static str;
    fn next_batch(&mut self, history: &Transcript, n: usize, p: usize, rng: &mut ChaCha8Rng) -> Vec<SubsetMask>;
}

/// Ascending mask order: `1, 2, 3, …`.
#[derive(Default)]
pub struct Sweep {
    next: u64,
}

impl Strategy for Sweep {
    fn name(&self) -> &'static str {
        "sweep"
    }

    fn next_batch(&mut self, _: &Transcript, n: usize, p: usize, _: &mut ChaCha8Rng) -> Vec<SubsetMask> {
        let last = low_bits(n);
        self.next = self.next.max(1);
        let mut out = Vec::with_capacity(p);
        while out.len() < p && self.next <= last {
            out.push(SubsetMask::from_bits_unchecked(self.next, n));
            self.next += 1;
        }
        out
    }
}

/// Lazy Fisher–Yates over the `K` candidates. Small `K` uses a dense swap
/// table; larger `K` a sparse one whose size grows with the number of
/// queries rather than with `K`.
#[derive(Default)]
pub struct WithoutReplacement {
    drawn: u64,
    table: SwapTable,
}

/// Above this many candidates the swap table is sparse.
const DENSE_SWAP_LIMIT: u64 = 1 << 16;

#[derive(Default)]
enum SwapTable {
    #[default]
    Unset,
    /// `slot[i] = 0` means position `i` still holds `i`, else holds `slot[i] − 1`.
    Dense(Vec<u64>),
    Sparse(HashMap<u64, u64>),
}

impl SwapTable {
    fn get(&self, i: u64) -> u64 {
        match self {
            SwapTable::Unset => i,
            SwapTable::Dense(v) => match v[i as usize] {
                0 => i,
                x => x - 1,
            },
            SwapTable::Sparse(m) => *m.get(&i).unwrap_or(&i),
        }
    }

    fn set(&mut self, i: u64, value: u64) {
        match self {
            SwapTable::Unset => unreachable!("table initialized before first draw"),
            SwapTable::Dense(v) => v[i as usize] = value + 1,
            SwapTable::Sparse(m) => {
                m.insert(i, value);
            }
        }
    }
}

impl WithoutReplacement {
    fn draw(&mut self, k: u64, rng: &mut ChaCha8Rng) -> u64 {
        if matches!(self.table, SwapTable::Unset) {
            self.table =
                if k <= DENSE_SWAP_LIMIT { SwapTable::Dense(vec![0; k as usize]) } else { SwapTable::Sparse(HashMap::new()) };
        }
        let i = self.drawn;
        let j = rng.random_range(i..k);
        let at_j = self.table.get(j);
        let at_i = self.table.get(i);
        self.table.set(j, at_i);
        self.drawn += 1;
        at_j + 1
    }
}

impl Strategy for WithoutReplacement {
    fn name(&self) -> &'static str {
        "uniform-without-replacement"
    }

    fn next_batch(&mut self, _: &Transcript, n: usize, p: usize, rng: &mut ChaCha8Rng) -> Vec<SubsetMask> {
        let k = low_bits(n);
        let take = (p as u64).min(k - self.drawn);
        (0..take).map(|_| SubsetMask::from_bits_unchecked(self.draw(k, rng), n)).collect()
    }
}

#[derive(Default)]
pub struct WithReplacement;

impl Strategy for WithReplacement {
    fn name(&self) -> &'static str {
        "uniform-with-replacement"
    }

    fn next_batch(&mut self, _: &Transcript, n: usize, p: usize, rng: &mut ChaCha8Rng) -> Vec<SubsetMask> {
        let k = low_bits(n);
        (0..p).map(|_| SubsetMask::from_bits_unchecked(rng.random_range(1..=k), n)).collect()
    }
}

/// A fixed query list; stops once it is exhausted.
pub struct FixedOrder {
    queue: Vec<SubsetMask>,
    pos: usize,
}

impl FixedOrder {
    pub fn new(queue: Vec<SubsetMask>) -> Self {
        Self { queue, pos: 0 }
    }
}

impl Strategy for FixedOrder {
    fn name(&self) -> &'static str {
        "fixed"
    }

    fn next_batch(&mut self, _: &Transcript, _: usize, p: usize, _: &mut ChaCha8Rng) -> Vec<SubsetMask> {
        let end = (self.pos + p).min(self.queue.len());
        let out = self.queue[self.pos..end].to_vec();
        self.pos = end;
        out
    }
}

/// Subsets one move from `center`: add an index, drop one, or swap one
/// in for one out. Excludes the empty set and `center` itself.
pub fn move_neighbors(center: &SubsetMask) -> Vec<SubsetMask> {
    let n = center.n();
    let bits = center.bits();
    let mut out = Vec::new();
    for i in 0..n {
        let flipped = bits ^ (1 << i);
        if flipped != 0 {
            out.push(SubsetMask::from_bits_unchecked(flipped, n));
        }
    }
    for i in center.indices() {
        for j in 0..n {
            if !center.contains(j) {
                out.push(SubsetMask::from_bits_unchecked(bits & !(1 << i) | 1 << j, n));
            }
        }
    }
    out.sort_by_key(|m| (m.len(), m.bits()));
    out
}

/// Greedy descent on observed minor values: query the one-move neighbors of
/// the current subset, step to the smallest if it improves, otherwise fall
/// back to uniform sampling of unqueried subsets. Without values (sign
/// mode) it degenerates to the fallback after the first neighborhood.
#[derive(Default)]
pub struct NeighborDescent {
    start: Option<SubsetMask>,
    current: Option<(SubsetMask, f64)>,
    pending: Vec<SubsetMask>,
    best: Option<(SubsetMask, f64)>,
    seen: HashSet<u64>,
    consumed_rounds: usize,
    stuck: bool,
}

impl NeighborDescent {
    pub fn from_start(start: SubsetMask) -> Self {
        Self { start: Some(start), ..Default::default() }
    }

    fn absorb(&mut self, history: &Transcript) {
        for round in &history.rounds()[self.consumed_rounds..] {
            for (k, q) in round.queries.iter().enumerate() {
                let v = round.values.as_ref().map_or(f64::INFINITY, |vals| vals[k]);
                if self.current.is_none() {
                    self.current = Some((*q, v));
                    continue;
                }
                if self.best.is_none_or(|(_, b)| v < b) {
                    self.best = Some((*q, v));
                }
            }
        }
        self.consumed_rounds = history.rounds().len();
    }

    fn refill(&mut self) {
        let Some((cur, cur_v)) = self.current else { return };
        let center = match self.best.take() {
            None => cur,
            Some((b, bv)) if bv < cur_v => {
                self.current = Some((b, bv));
                b
            }
            Some(_) => {
                self.stuck = true;
                return;
            }
        };
        self.pending = move_neighbors(&center).into_iter().filter(|m| !self.seen.contains(&m.bits())).rev().collect();
        if self.pending.is_empty() {
            self.stuck = true;
        }
    }
}

impl Strategy for NeighborDescent {
    fn name(&self) -> &'static str {
        "neighbor-descent"
    }

    fn next_batch(&mut self, history: &Transcript, n: usize, p: usize, rng: &mut ChaCha8Rng) -> Vec<SubsetMask> {
        self.absorb(history);
        let k = low_bits(n);
        let mut out = Vec::new();
        if self.current.is_none() {
            let start = self.start.unwrap_or_else(|| SubsetMask::from_bits_unchecked(rng.random_range(1..=k), n));
            self.seen.insert(start.bits());
            return vec![start];
        }
        if !self.stuck && self.pending.is_empty() {
            self.refill();
        }
        while out.len() < p && !self.stuck {
            match self.pending.pop() {
                Some(m) => {
                    if self.seen.insert(m.bits()) {
                        out.push(m);
                    }
                }
                None => break,
            }
        }
        if self.stuck {
            while out.len() < p && (self.seen.len() as u64) < k {
                let m = rng.random_range(1..=k);
                if self.seen.insert(m) {
                    out.push(SubsetMask::from_bits_unchecked(m, n));
                }
            }
        }
        out
    }
}

/// Deterministic descent path on a matrix: from `start`, repeatedly move
/// to the one-move neighbor with the smallest minor while that improves.
pub fn greedy_descent(a: &Matrix, start: &SubsetMask) -> Result<Vec<MinorRecord>> {
    let mut cur = MinorRecord { alpha: *start, value: a.principal_minor(start)? };
    let mut path = vec![cur];
    loop {
        let best = move_neighbors(&cur.alpha)
            .into_iter()
            .map(|m| MinorRecord { alpha: m, value: a.principal_minor(&m).expect("same dimension") })
            .min_by(|x, y| x.value.total_cmp(&y.value).then(x.alpha.bits().cmp(&y.alpha.bits())));
        match best {
            Some(b) if b.value < cur.value => {
                cur = b;
                path.push(b);
            }
            _ => return Ok(path),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "kebab-case", tag = "kind", content = "queries")]
pub enum StrategyKind {
    Sweep,
    UniformWithoutReplacement,
    UniformWithReplacement,
    NeighborDescent,
    Fixed(Vec<SubsetMask>),
}

impl StrategyKind {
    pub fn build(&self) -> Box<dyn Strategy> {
        match self {
            StrategyKind::Sweep => Box::new(Sweep::default()),
            StrategyKind::UniformWithoutReplacement => Box::new(WithoutReplacement::default()),
            StrategyKind::UniformWithReplacement => Box::new(WithReplacement),
            StrategyKind::NeighborDescent => Box::new(NeighborDescent::default()),
            StrategyKind::Fixed(q) => Box::new(FixedOrder::new(q.clone())),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            StrategyKind::Sweep => "sweep",
            StrategyKind::UniformWithoutReplacement => "uniform-without-replacement",
            StrategyKind::UniformWithReplacement => "uniform-with-replacement",
            StrategyKind::NeighborDescent => "neighbor-descent",
            StrategyKind::Fixed(_) => "fixed",
        }
    }

    /// Never repeats a query and does not look at responses.
    pub fn is_distinct_nonadaptive(&self) -> bool {
        matches!(self, StrategyKind::Sweep | StrategyKind::UniformWithoutReplacement | StrategyKind::Fixed(_))
    }

    /// Round budget that guarantees a hit (distinct strategies) or makes a
    /// miss astronomically unlikely (with replacement).
    pub fn default_max_rounds(&self, k: u64, p: usize) -> usize {
        let p = p as u64;
        match self {
            StrategyKind::UniformWithReplacement => (100 * k).div_ceil(p) as usize,
            // partial batches while descending; every round still adds a new subset
            StrategyKind::NeighborDescent => k as usize,
            _ => k.div_ceil(p) as usize,
        }
    }
}

impl fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for StrategyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sweep" | "lexicographic" => Ok(StrategyKind::Sweep),
            "uniform-without-replacement" | "without-replacement" | "wor" => {
                Ok(StrategyKind::UniformWithoutReplacement)
            }
            "uniform-with-replacement" | "with-replacement" | "wr" => Ok(StrategyKind::UniformWithReplacement),
            "neighbor-descent" | "descent" => Ok(StrategyKind::NeighborDescent),
            _ => Err(Error::InvalidArgument(format!("unknown strategy {s:?}"))),
        }
    }
}

pub fn builtin_strategies() -> Vec<StrategyKind> {
    vec![
        StrategyKind::Sweep,
        StrategyKind::UniformWithoutReplacement,
        StrategyKind::UniformWithReplacement,
        StrategyKind::NeighborDescent,
    ]
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunOutcome {
    pub transcript: Transcript,
    /// 1-based round of the first positive response.
    pub hit_round: Option<usize>,
    /// 1-based flattened index of the first positive response.
    pub hit_query: Option<usize>,
    /// Queries issued, including the whole hit round.
    pub queries: usize,
}

/// Runs until the first positive response, `max_rounds`, or an empty batch.
pub fn run_strategy(
    session: &mut OracleSession,
    strategy: &mut dyn Strategy,
    p: usize,
    max_rounds: usize,
    rng: &mut ChaCha8Rng,
) -> Result<(Option<usize>, Option<usize>)> {
    if p == 0 {
        return Err(Error::InvalidArgument("batch size p must be >= 1".into()));
    }
    let n = session.n();
    let mut flat = 0usize;
    for round in 1..=max_rounds {
        let batch = strategy.next_batch(session.transcript(), n, p, rng);
        if batch.is_empty() {
            break;
        }
        if batch.len() > p {
            return Err(Error::InvalidBatch(format!("{} queries exceed p = {p}", batch.len())));
        }
        if let Some(bad) = batch.iter().find(|m| m.n() != n) {
            return Err(Error::InvalidBatch(format!("mask {bad} has dimension {} != {n}", bad.n())));
        }
        let responses = session.query_batch(&batch)?;
        if let Some(pos) = responses.iter().position(|&y| y) {
            return Ok((Some(round), Some(flat + pos + 1)));
        }
        flat += responses.len();
    }
    Ok((None, None))
}

/// Convenience wrapper: fresh session, RNG from `seed`.
pub fn run_strategy_seeded(
    target: Target,
    tau: f64,
    mode: OracleMode,
    strategy: &mut dyn Strategy,
    p: usize,
    max_rounds: usize,
    seed: u64,
) -> Result<RunOutcome> {
    let mut session = OracleSession::new(target, tau, mode)?;
    let mut rng = substream(seed, 0);
    let (hit_round, hit_query) = run_strategy(&mut session, strategy, p, max_rounds, &mut rng)?;
    let queries = session.query_count() as usize;
    Ok(RunOutcome { transcript: session.into_transcript(), hit_round, hit_query, queries })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FirstHitReport {
    pub n: usize,
    pub p: usize,
    pub trials: u64,
    pub strategy: String,
    pub mode: OracleMode,
    pub seed: u64,
    pub max_rounds: usize,
    /// Over trials that hit.
    pub mean_rounds: f64,
    pub mean_queries: f64,
    /// Standard error of `mean_rounds`.
    pub stderr_rounds: f64,
    pub exact_expectation: Option<f64>,
    pub misses: u64,
    /// Hit round → count.
    pub histogram: BTreeMap<usize, u64>,
}

/// `E[⌈U/p⌉]` for `U` uniform on `{1..K}`, by direct summation.
pub fn exact_rounds_without_replacement(k: u64, p: usize) -> f64 {
    let p = p as u64;
    let mut total = 0u128;
    let mut r = 1u64;
    // rounds 1..⌈K/p⌉, each covering p positions except possibly the last
    while (r - 1) * p < k {
        let lo = (r - 1) * p + 1;
        let hi = (r * p).min(k);
        total += (r as u128) * (hi - lo + 1) as u128;
        r += 1;
    }
    total as f64 / k as f64
}

/// Geometric rounds when each of `p` independent draws hits with `1/K`.
pub fn exact_rounds_with_replacement(k: u64, p: usize) -> f64 {
    let miss = (1.0 - 1.0 / k as f64).powi(p as i32);
    1.0 / (1.0 - miss)
}

fn exact_expectation(kind: &StrategyKind, k: u64, p: usize) -> Option<f64> {
    match kind {
        StrategyKind::Sweep | StrategyKind::UniformWithoutReplacement => Some(exact_rounds_without_replacement(k, p)),
        StrategyKind::UniformWithReplacement => Some(exact_rounds_with_replacement(k, p)),
        _ => None,
    }
}

struct TrialOutcome {
    rounds: Option<usize>,
    queries: usize,
}

#[allow(clippy::too_many_arguments)]
fn summarize(
    outcomes: Vec<TrialOutcome>,
    n: usize,
    p: usize,
    kind: &StrategyKind,
    mode: OracleMode,
    seed: u64,
    max_rounds: usize,
    exact: Option<f64>,
) -> FirstHitReport {
    let trials = outcomes.len() as u64;
    let mut histogram = BTreeMap::new();
    let (mut sum_r, mut sum_r2, mut sum_q, mut hits) = (0.0, 0.0, 0.0, 0u64);
    for o in &outcomes {
        if let Some(r) = o.rounds {
            *histogram.entry(r).or_insert(0) += 1;
            sum_r += r as f64;
            sum_r2 += (r as f64) * (r as f64);
            sum_q += o.queries as f64;
            hits += 1;
        }
    }
    let h = hits.max(1) as f64;
    let mean = sum_r / h;
    let var = if hits > 1 { (sum_r2 - h * mean * mean) / (h - 1.0) } else { 0.0 };
    FirstHitReport {
        n,
        p,
        trials,
        strategy: kind.name().to_string(),
        mode,
        seed,
        max_rounds,
        mean_rounds: mean,
        mean_queries: sum_q / h,
        stderr_rounds: (var.max(0.0) / h).sqrt(),
        exact_expectation: exact,
        misses: trials - hits,
        histogram,
    }
}

/// Synthetic first-hit experiment: each trial draws a uniform witness from
/// the `K = 2^n − 1` nonempty subsets and runs the strategy on its own
/// RNG substream. Trials run in parallel; the report does not depend on
/// scheduling.
pub fn first_hit_experiment(n: usize, p: usize, trials: u64, kind: &StrategyKind, seed: u64) -> Result<FirstHitReport> {
    if trials == 0 {
        return Err(Error::InvalidArgument("trials must be >= 1".into()));
    }
    if n == 0 || n > 62 {
        return Err(Error::InvalidArgument(format!("n must be in 1..=62, got {n}")));
    }
    if matches!(kind, StrategyKind::NeighborDescent) {
        return Err(Error::ValueModeUnavailable);
    }
    let k = low_bits(n);
    let max_rounds = kind.default_max_rounds(k, p);
    let outcomes = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = substream(seed, t);
            let w = SubsetMask::from_bits_unchecked(rng.random_range(1..=k), n);
            let mut session = OracleSession::new(Target::Hidden(w), 0.0, OracleMode::Sign)?;
            let mut strat = kind.build();
            let (rounds, _) = run_strategy(&mut session, strat.as_mut(), p, max_rounds, &mut rng)?;
            Ok(TrialOutcome { rounds, queries: session.query_count() as usize })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(summarize(outcomes, n, p, kind, OracleMode::Sign, seed, max_rounds, exact_expectation(kind, k, p)))
}

/// First-hit experiment against a concrete matrix; the witness is fixed
/// and only the strategy's randomness varies across trials.
pub fn first_hit_experiment_on_matrix(
    a: &Matrix,
    tau: f64,
    mode: OracleMode,
    p: usize,
    trials: u64,
    kind: &StrategyKind,
    seed: u64,
) -> Result<FirstHitReport> {
    if trials == 0 {
        return Err(Error::InvalidArgument("trials must be >= 1".into()));
    }
    let n = a.n();
    let k = low_bits(n);
    let max_rounds = kind.default_max_rounds(k, p);
    let outcomes = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = substream(seed, t);
            let mut session = OracleSession::new(Target::Matrix(a.clone()), tau, mode)?;
            let mut strat = kind.build();
            let (rounds, _) = run_strategy(&mut session, strat.as_mut(), p, max_rounds, &mut rng)?;
            Ok(TrialOutcome { rounds, queries: session.query_count() as usize })
        })
        .collect::<Result<Vec<_>>>()?;
    let report = minors::violation_set(a, tau)?;
    let exact = match (kind, report.witness()) {
        (StrategyKind::Sweep, Some(w)) => Some(w.bits().div_ceil(p as u64) as f64),
        (StrategyKind::UniformWithoutReplacement | StrategyKind::UniformWithReplacement, Some(_)) => {
            exact_expectation(kind, k, p)
        }
        _ => None,
    };
    Ok(summarize(outcomes, n, p, kind, mode, seed, max_rounds, exact))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forge::appendix_b_fixture;

    fn fixture_session(mode: OracleMode) -> OracleSession {
        OracleSession::new(Target::Matrix(appendix_b_fixture().perturbed()), 0.0, mode).unwrap()
    }

    fn mask(idx: &[usize]) -> SubsetMask {
        SubsetMask::from_one_based(idx, 6).unwrap()
    }

    #[test]
    fn dense_and_sparse_swap_tables_agree() {
        let k = 500;
        let mut dense = WithoutReplacement::default();
        let mut sparse = WithoutReplacement { drawn: 0, table: SwapTable::Sparse(HashMap::new()) };
        let (mut r1, mut r2) = (substream(3, 1), substream(3, 1));
        let a: Vec<u64> = (0..k).map(|_| dense.draw(k, &mut r1)).collect();
        let b: Vec<u64> = (0..k).map(|_| sparse.draw(k, &mut r2)).collect();
        assert_eq!(a, b);
        let mut sorted = a.clone();
        sorted.sort_unstable();
        assert_eq!(sorted, (1..=k).collect::<Vec<_>>());
    }

    #[test]
    fn fixture_queries() {
        let mut s = fixture_session(OracleMode::Sign);
        assert!(s.query(&mask(&[1, 5])).unwrap());
        assert!(!s.query(&mask(&[1, 4, 5])).unwrap());
        assert_eq!(s.query_count(), 2);
        assert_eq!(s.transcript().flatten(), vec![true, false]);
        assert!(s.query(&SubsetMask::from_one_based(&[1], 5).unwrap()).is_err());
    }

    #[test]
    fn value_mode_records_values() {
        let mut s = fixture_session(OracleMode::Value);
        s.query_batch(&[mask(&[1, 4, 5]), mask(&[1, 5])]).unwrap();
        let vals = s.transcript().rounds()[0].values.clone().unwrap();
        assert!((vals[0] - 0.617).abs() < 1e-3);
        assert!(vals[1] < 0.0);
        assert!(matches!(
            OracleSession::new(Target::Hidden(mask(&[1])), 0.0, OracleMode::Value),
            Err(Error::ValueModeUnavailable)
        ));
    }

    #[test]
    fn sweep_hits_at_mask_rank() {
        let target = Target::Matrix(appendix_b_fixture().perturbed());
        let out = run_strategy_seeded(target, 0.0, OracleMode::Sign, &mut Sweep::default(), 1, 63, 0).unwrap();
        // rank of {1,5} in the sweep order, found by walking the order
        let rank = (1u64..=63).position(|b| b == mask(&[1, 5]).bits()).unwrap() + 1;
        assert_eq!(out.hit_query, Some(rank));
        assert_eq!(out.hit_round, Some(rank));
        assert_eq!(rank, 17);
    }

    #[test]
    fn witness_first_and_full_cover() {
        let w = mask(&[2, 6]);
        let mut first = FixedOrder::new(vec![w, mask(&[1])]);
        let out = run_strategy_seeded(Target::Hidden(w), 0.0, OracleMode::Sign, &mut first, 1, 10, 0).unwrap();
        assert_eq!(out.hit_round, Some(1));
        for seed in 0..20 {
            let mut s = WithoutReplacement::default();
            let out = run_strategy_seeded(Target::Hidden(w), 0.0, OracleMode::Sign, &mut s, 63, 1, seed).unwrap();
            assert_eq!(out.hit_round, Some(1));
            assert_eq!(out.queries, 63);
        }
    }

    #[test]
    fn without_replacement_never_repeats() {
        let mut s = WithoutReplacement::default();
        let mut rng = substream(3, 0);
        let mut seen = HashSet::new();
        let t = Transcript::default();
        loop {
            let b = s.next_batch(&t, 7, 5, &mut rng);
            if b.is_empty() {
                break;
            }
            for m in b {
                assert!(seen.insert(m.bits()));
            }
        }
        assert_eq!(seen.len(), 127);
    }

    #[test]
    fn invalid_batches_rejected() {
        struct TooMany;
        impl Strategy for TooMany {
            fn name(&self) -> &'static str {
                "too-many"
            }
            fn next_batch(&mut self, _: &Transcript, n: usize, p: usize, _: &mut ChaCha8Rng) -> Vec<SubsetMask> {
                vec![SubsetMask::full(n).unwrap(); p + 1]
            }
        }
        let r = run_strategy_seeded(Target::Hidden(mask(&[1])), 0.0, OracleMode::Sign, &mut TooMany, 2, 5, 0);
        assert!(matches!(r, Err(Error::InvalidBatch(_))));
        let r = run_strategy_seeded(Target::Hidden(mask(&[1])), 0.0, OracleMode::Sign, &mut Sweep::default(), 0, 5, 0);
        assert!(r.is_err());
    }

    #[test]
    fn equality_reduction_on_fixture() {
        let mut s = fixture_session(OracleMode::Sign);
        let w = mask(&[1, 5]);
        for bits in 1..=63u64 {
            let m = SubsetMask::new(bits, 6).unwrap();
            assert_eq!(s.query(&m).unwrap(), m == w);
        }
    }

    #[test]
    fn exact_expectations() {
        assert_eq!(exact_rounds_without_replacement(63, 1), 32.0);
        // brute-force mean of ceil(u/4) over u in 1..=1023
        let brute: f64 = (1..=1023u64).map(|u| u.div_ceil(4) as f64).sum::<f64>() / 1023.0;
        assert!((exact_rounds_without_replacement(1023, 4) - brute).abs() < 1e-12);
        assert!((exact_rounds_with_replacement(63, 1) - 63.0).abs() < 1e-9);
    }

    #[test]
    fn exact_rounds_scale_like_k_over_p() {
        for n in 1..=16 {
            let k = (1u64 << n) - 1;
            for p in 1..=64 {
                assert!(exact_rounds_without_replacement(k, p) >= k as f64 / (2.0 * p as f64));
            }
        }
    }

    #[test]
    fn first_hit_n6_sweep_exact_and_seeded() {
        let r = first_hit_experiment(6, 1, 2000, &StrategyKind::UniformWithoutReplacement, 11).unwrap();
        assert_eq!(r.exact_expectation, Some(32.0));
        assert!((r.mean_rounds - 32.0).abs() < 4.0 * r.stderr_rounds);
        assert!(r.mean_queries <= 63.0);
        assert_eq!(r.misses, 0);
        let again = first_hit_experiment(6, 1, 2000, &StrategyKind::UniformWithoutReplacement, 11).unwrap();
        assert_eq!(r, again);
        assert!(first_hit_experiment(6, 1, 0, &StrategyKind::Sweep, 0).is_err());
    }

    #[test]
    fn with_replacement_mean_is_k() {
        let r = first_hit_experiment(4, 1, 20000, &StrategyKind::UniformWithReplacement, 5).unwrap();
        assert!((r.mean_queries - 15.0).abs() < 4.0 * r.stderr_rounds, "{}", r.mean_queries);
    }

    #[test]
    fn descent_does_not_always_find_witness() {
        let a = appendix_b_fixture().perturbed();
        let w = mask(&[1, 5]);
        let (mut starts, mut found) = (0, 0);
        for bits in 1..=63u64 {
            let start = SubsetMask::new(bits, 6).unwrap();
            if start.len() > 3 {
                continue;
            }
            starts += 1;
            let path = greedy_descent(&a, &start).unwrap();
            assert!(path.windows(2).all(|p| p[1].value < p[0].value));
            if path.last().unwrap().alpha == w {
                found += 1;
            }
        }
        assert_eq!(starts, 41);
        assert!(found < starts, "descent reached the witness from every start");
        let from_145 = greedy_descent(&a, &mask(&[1, 4, 5])).unwrap();
        assert_eq!(from_145.last().unwrap().alpha, w);
    }

    #[test]
    fn descent_strategy_runs_in_value_mode() {
        let a = appendix_b_fixture().perturbed();
        let r = first_hit_experiment_on_matrix(&a, 0.0, OracleMode::Value, 4, 50, &StrategyKind::NeighborDescent, 1)
            .unwrap();
        assert_eq!(r.misses, 0);
        assert!(r.mean_queries <= 63.0);
        let mut s = NeighborDescent::from_start(mask(&[1, 4, 5]));
        let out = run_strategy_seeded(Target::Matrix(a), 0.0, OracleMode::Value, &mut s, 1, 63, 0).unwrap();
        assert!(out.hit_round.is_some());
    }

    #[test]
    fn move_neighbors_of_table_center() {
        let nb = move_neighbors(&mask(&[1, 5]));
        assert_eq!(nb.len(), 14);
        assert!(nb.iter().all(|m| m.distance(&mask(&[1, 5])) <= 2));
    }
}
