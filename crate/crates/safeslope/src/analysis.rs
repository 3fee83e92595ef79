//! Theory toolkit: information-gain upper bounds via greedy eigenvalue
//! allocation, the exploration constant `C1`, convergence-time scans,
//! reachability closures, and regret bookkeeping.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::grid::{GridDomain, IncidenceMatrix};
use crate::search::TrialRecord;
use crate::slope::SlopeUpperBounds;

/// Scale factor applied to the allocation objective in the information-gain
/// bound: `(1/2) / (1 - e^{-1})`.
pub fn info_gain_scale() -> f64 {
    0.5 / (1.0 - (-1.0_f64).exp())
}

/// Result of maximizing `sum_t log(1 + m_t lambda_t / noise)` over integer
/// allocations with `sum_t m_t = horizon`.
#[derive(Debug, Clone, PartialEq)]
pub struct InfoGainBound {
    pub horizon: u64,
    /// Units assigned per eigenvalue (aligned with the input order). Entries
    /// sum to `horizon`.
    pub allocation: Vec<u64>,
    pub noise: f64,
    /// The maximized sum of logs, before scaling.
    pub objective: f64,
    /// Scaled bound value.
    pub bound: f64,
}

#[derive(Debug, Clone, Copy)]
struct HeapEntry {
    gain: f64,
    index: usize,
}

impl PartialEq for HeapEntry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for HeapEntry {}
impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for HeapEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        // Larger gain wins; ties prefer the lower index for determinism.
        self.gain
            .total_cmp(&other.gain)
            .then_with(|| other.index.cmp(&self.index))
    }
}

/// Incremental greedy allocator. Because each per-eigenvalue term
/// `log(1 + c m)` is concave in the integer count `m`, assigning one unit at
/// a time to the largest marginal gain is optimal, and the allocation for
/// horizon `T + 1` extends the one for horizon `T`. Iterating yields the
/// scaled bound at horizons 1, 2, 3, ...
#[derive(Debug, Clone)]
pub struct InfoGainSequence {
    rates: Vec<f64>, // lambda / noise
    counts: Vec<u64>,
    heap: BinaryHeap<HeapEntry>,
    objective: f64,
    horizon: u64,
}

fn validate_eigenvalues(eigenvalues: &[f64]) -> Result<Vec<f64>> {
    if eigenvalues.is_empty() {
        return Err(Error::Empty("eigenvalue list"));
    }
    let scale = eigenvalues[0].abs().max(1.0);
    let mut cleaned = Vec::with_capacity(eigenvalues.len());
    let mut prev = f64::INFINITY;
    for &v in eigenvalues {
        if v < -1e-9 * scale {
            return Err(Error::InvalidEigenvalues);
        }
        if v > prev + 1e-12 * scale {
            return Err(Error::InvalidEigenvalues);
        }
        prev = v;
        cleaned.push(v.max(0.0));
    }
    Ok(cleaned)
}

impl InfoGainSequence {
    pub fn new(eigenvalues: &[f64], noise: f64) -> Result<Self> {
        if !(noise > 0.0) {
            return Err(Error::NegativeNoise(noise));
        }
        let cleaned = validate_eigenvalues(eigenvalues)?;
        let rates: Vec<f64> = cleaned.iter().map(|l| l / noise).collect();
        let mut heap = BinaryHeap::with_capacity(rates.len());
        for (index, &rate) in rates.iter().enumerate() {
            heap.push(HeapEntry { gain: rate.ln_1p(), index });
        }
        Ok(Self { counts: vec![0; rates.len()], rates, heap, objective: 0.0, horizon: 0 })
    }

    pub fn horizon(&self) -> u64 {
        self.horizon
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn objective(&self) -> f64 {
        self.objective
    }

    /// Assigns one more unit and returns the scaled bound at the new horizon.
    pub fn step(&mut self) -> f64 {
        let top = self.heap.pop().expect("heap holds one entry per eigenvalue");
        let i = top.index;
        self.objective += top.gain;
        self.counts[i] += 1;
        let m = self.counts[i] as f64;
        let rate = self.rates[i];
        let next_gain = (rate * (m + 1.0)).ln_1p() - (rate * m).ln_1p();
        self.heap.push(HeapEntry { gain: next_gain, index: i });
        self.horizon += 1;
        info_gain_scale() * self.objective
    }
}

impl Iterator for InfoGainSequence {
    type Item = f64;

    fn next(&mut self) -> Option<f64> {
        Some(self.step())
    }
}

/// Maximizes the information-gain objective for a fixed horizon by greedy
/// unit assignment and returns the allocation together with the scaled bound.
///
/// For a single-fidelity GP the eigenvalues come from the grid covariance;
/// for the AR-1 model they come from the error-kernel covariance over the
/// high-fidelity inputs, which is what makes the multi-fidelity bound
/// smaller.
pub fn info_gain_bound(eigenvalues: &[f64], noise: f64, horizon: u64) -> Result<InfoGainBound> {
    if horizon == 0 {
        return Err(Error::Invalid("information-gain horizon must be at least 1".into()));
    }
    let mut seq = InfoGainSequence::new(eigenvalues, noise)?;
    let mut bound = 0.0;
    for _ in 0..horizon {
        bound = seq.step();
    }
    Ok(InfoGainBound {
        horizon,
        allocation: seq.counts.clone(),
        noise,
        objective: seq.objective,
        bound,
    })
}

/// Exploration constant `C1 = 8 v^2 / log(1 + v^2 / noise)`.
pub fn c1(variance: f64, noise: f64) -> Result<f64> {
    if !(variance > 0.0) {
        return Err(Error::NegativeVariance(variance));
    }
    if !(noise > 0.0) {
        return Err(Error::NegativeNoise(noise));
    }
    Ok(8.0 * variance / (variance / noise).ln_1p())
}

/// Smallest `t` with `t / (gamma(t) beta(t)) >= c1 (reach_cardinality + 1) / epsilon^2`,
/// found by a linear scan from `t = 1`. Both `gamma` and `beta` are queried
/// with strictly increasing `t`, so incremental evaluators work. Fails with
/// an explicit signal when the cap is reached.
pub fn convergence_time(
    mut gamma: impl FnMut(u64) -> f64,
    mut beta: impl FnMut(u64) -> f64,
    c1: f64,
    reach_cardinality: usize,
    epsilon: f64,
    cap: u64,
) -> Result<u64> {
    if !(epsilon > 0.0) {
        return Err(Error::Invalid(format!("epsilon must be positive (got {epsilon})")));
    }
    let threshold = c1 * (reach_cardinality as f64 + 1.0) / (epsilon * epsilon);
    for t in 1..=cap {
        let denom = gamma(t) * beta(t);
        if t as f64 / denom >= threshold {
            return Ok(t);
        }
    }
    Err(Error::ConvergenceTimeNotFound { cap })
}

/// Fixpoint of the one-step safe-expansion operator: starting from `seed`,
/// repeatedly adds any grid neighbor `x'` of a member `x` with
/// `f(x) + u_hat_i(x, x') * d + epsilon <= h`. The slope bounds are a fixed
/// snapshot (for example the final ones logged by a run); with `epsilon = 0`
/// the cardinality feeds the convergence-time threshold.
pub fn reachability_closure(
    grid: &GridDomain,
    incidence: &[IncidenceMatrix],
    f_values: &[f64],
    bounds: &SlopeUpperBounds,
    seed: &[usize],
    epsilon: f64,
    safe_limit: f64,
) -> Result<Vec<usize>> {
    if seed.is_empty() {
        return Err(Error::EmptySafeSet);
    }
    let n = grid.len();
    if f_values.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: f_values.len() });
    }
    let mut member = vec![false; n];
    let mut queue = VecDeque::new();
    for &i in seed {
        if i >= n {
            return Err(Error::InvalidPointIndex { index: i, len: n });
        }
        if !member[i] {
            member[i] = true;
            queue.push_back(i);
        }
    }
    while let Some(x) = queue.pop_front() {
        for w in incidence {
            let d = w.spacing();
            for neighbor in grid.vicinity(x, w.axis())? {
                if member[neighbor] {
                    continue;
                }
                let edge = w.edge_between(x, neighbor).expect("neighbors share an edge");
                if f_values[x] + bounds.get(w.axis(), edge) * d + epsilon <= safe_limit {
                    member[neighbor] = true;
                    queue.push_back(neighbor);
                }
            }
        }
    }
    Ok((0..n).filter(|&i| member[i]).collect())
}

/// Prefix sums of the optimality gaps `f(x_t) - f_star` over a run's sampled
/// points. Nondecreasing whenever `f_star` is the true grid minimum.
pub fn cumulative_regret(record: &TrialRecord, f_star: f64) -> Vec<f64> {
    let mut total = 0.0;
    record
        .rows
        .iter()
        .map(|row| {
            total += row.f_true - f_star;
            total
        })
        .collect()
}

/// Running count of unsafe samples over a run's sampled points.
pub fn cumulative_unsafe(record: &TrialRecord) -> Vec<u64> {
    let mut total = 0u64;
    record
        .rows
        .iter()
        .map(|row| {
            if !row.safe {
                total += 1;
            }
            total
        })
        .collect()
}
