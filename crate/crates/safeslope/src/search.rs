//! Safe search over the grid: the SafeSlope iteration and the SafeUCB
//! baseline.
//!
//! SafeSlope certifies new points through confidence bounds on local slopes
//! instead of a known Lipschitz constant: a neighbor `x'` of a safe point `x`
//! along axis `i` joins the safe set when
//! `u(x) + u_hat_i(x, x') * d(x, x') <= h`, where `u_hat` is the running
//! slope-magnitude bound. Candidates are drawn from the union of the
//! minimizer set (points whose lower bound undercuts the least upper bound)
//! and the expander set (points whose sampling could certify new neighbors),
//! picking the widest confidence interval. SafeUCB instead thresholds the
//! upper confidence bound globally and samples the widest safe interval.

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::gp::{GpPosterior, GridPrior};
use crate::grid::{GridDomain, IncidenceMatrix};
use crate::kernel::KernelSpec;
use crate::mfgp::Ar1Model;
use crate::slope::{SlopeField, SlopeUpperBounds};

/// Confidence-interval bookkeeping mode. Nested intersects each new interval
/// with the previous one, keeping intervals (and safe sets) monotone, as the
/// theory assumes. Unnested uses the fresh interval directly, which works
/// better in practice and is the default.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SearchMode {
    Nested,
    #[default]
    Unnested,
}

/// Which search rule drives point selection.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Algorithm {
    SafeSlope,
    SafeUcb,
}

/// Surrogate model for the objective.
#[derive(Debug, Clone, Copy)]
pub enum SearchModel<'a> {
    /// A zero-mean GP with the given kernel and observation noise variance.
    SingleFidelity { kernel: &'a KernelSpec, noise: f64 },
    /// An AR-1 model; the low-fidelity function is swept over the whole grid
    /// before the search starts.
    MultiFidelity(&'a Ar1Model),
}

/// Default exploration schedule `pi_t = t^2 pi^2 / 6`, which satisfies
/// `sum_t 1/pi_t = 1`.
pub fn basel_pi(t: u64) -> f64 {
    (t * t) as f64 * std::f64::consts::PI * std::f64::consts::PI / 6.0
}

fn check_beta_args(t: u64, delta: f64) -> Result<()> {
    if t == 0 {
        return Err(Error::Invalid("beta schedules start at t = 1".into()));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::ProbabilityOutOfRange(delta));
    }
    Ok(())
}

/// Objective-confidence scale `beta_f(t) = 2 log(|X| pi_t / delta_f)` with a
/// caller-supplied schedule.
pub fn beta_f_with(t: u64, n_points: usize, delta_f: f64, pi: impl Fn(u64) -> f64) -> Result<f64> {
    check_beta_args(t, delta_f)?;
    Ok(2.0 * (n_points as f64 * pi(t) / delta_f).ln())
}

/// `beta_f` with the default schedule.
pub fn beta_f(t: u64, n_points: usize, delta_f: f64) -> Result<f64> {
    beta_f_with(t, n_points, delta_f, basel_pi)
}

/// Slope-confidence scale `beta_m(t) = 2 log(|X| n pi_t / delta_m)` with a
/// caller-supplied schedule. The count `|X| n` covers the union bound over
/// one slope GP per axis.
pub fn beta_m_with(
    t: u64,
    n_points: usize,
    n_axes: usize,
    delta_m: f64,
    pi: impl Fn(u64) -> f64,
) -> Result<f64> {
    check_beta_args(t, delta_m)?;
    Ok(2.0 * (n_points as f64 * n_axes as f64 * pi(t) / delta_m).ln())
}

/// `beta_m` with the default schedule.
pub fn beta_m(t: u64, n_points: usize, n_axes: usize, delta_m: f64) -> Result<f64> {
    beta_m_with(t, n_points, n_axes, delta_m, basel_pi)
}

/// Per-point confidence intervals `[lower, upper]`, possibly half-infinite.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfidenceState {
    mode: SearchMode,
    lower: DVector<f64>,
    upper: DVector<f64>,
}

impl ConfidenceState {
    /// Initial intervals: `(-inf, h]` on the seed safe set (those points are
    /// known safe), unconstrained elsewhere.
    fn init(n: usize, seed_safe: &[usize], safe_limit: f64, mode: SearchMode) -> Self {
        let mut upper = DVector::from_element(n, f64::INFINITY);
        let lower = DVector::from_element(n, f64::NEG_INFINITY);
        for &i in seed_safe {
            upper[i] = safe_limit;
        }
        Self { mode, lower, upper }
    }

    fn update(&mut self, post: &GpPosterior, beta_f: f64) {
        let half = beta_f.sqrt();
        match self.mode {
            SearchMode::Unnested => {
                for i in 0..post.len() {
                    self.lower[i] = post.mean()[i] - half * post.std()[i];
                    self.upper[i] = post.mean()[i] + half * post.std()[i];
                }
            }
            SearchMode::Nested => {
                for i in 0..post.len() {
                    self.lower[i] = self.lower[i].max(post.mean()[i] - half * post.std()[i]);
                    self.upper[i] = self.upper[i].min(post.mean()[i] + half * post.std()[i]);
                }
            }
        }
    }

    pub fn lower(&self) -> &DVector<f64> {
        &self.lower
    }

    pub fn upper(&self) -> &DVector<f64> {
        &self.upper
    }

    pub fn width(&self, i: usize) -> f64 {
        self.upper[i] - self.lower[i]
    }
}

/// Why a search run stopped before exhausting its budget.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    /// Ran the full iteration budget.
    Completed,
    /// SafeSlope found no minimizer or expander candidates.
    NoCandidates { at: u64 },
    /// SafeUCB's thresholded safe set was empty.
    EmptySafeSet { at: u64 },
    /// A nested confidence interval became empty on the safe set.
    ConfidenceCollapse { at: u64 },
}

impl StopReason {
    pub fn label(&self) -> String {
        match self {
            StopReason::Completed => "completed".to_string(),
            StopReason::NoCandidates { at } => format!("no_candidates@{at}"),
            StopReason::EmptySafeSet { at } => format!("empty_safe_set@{at}"),
            StopReason::ConfidenceCollapse { at } => format!("confidence_collapse@{at}"),
        }
    }
}

/// Outcome of one search step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepOutcome {
    /// Sample this point next.
    Sample(usize),
    /// The search cannot continue; distinct from an error.
    Terminal(StopReason),
}

/// Mutable search bookkeeping: iteration counter, safe set, confidence
/// intervals, slope bounds, and the current incumbent.
#[derive(Debug, Clone)]
pub struct SafeSearchState {
    t: u64,
    mode: SearchMode,
    safe_limit: f64,
    safe: Vec<bool>,
    confidence: ConfidenceState,
    slope_bounds: SlopeUpperBounds,
    incumbent: Option<usize>,
}

impl SafeSearchState {
    pub fn new(
        grid: &GridDomain,
        incidence: &[IncidenceMatrix],
        seed_safe: &[usize],
        safe_limit: f64,
        mode: SearchMode,
    ) -> Result<Self> {
        if seed_safe.is_empty() {
            return Err(Error::EmptySafeSet);
        }
        let n = grid.len();
        let mut safe = vec![false; n];
        for &i in seed_safe {
            if i >= n {
                return Err(Error::InvalidPointIndex { index: i, len: n });
            }
            safe[i] = true;
        }
        Ok(Self {
            t: 0,
            mode,
            safe_limit,
            safe,
            confidence: ConfidenceState::init(n, seed_safe, safe_limit, mode),
            slope_bounds: SlopeUpperBounds::unbounded(incidence),
            incumbent: None,
        })
    }

    pub fn iteration(&self) -> u64 {
        self.t
    }

    pub fn mode(&self) -> SearchMode {
        self.mode
    }

    pub fn is_safe(&self, i: usize) -> bool {
        self.safe[i]
    }

    pub fn safe_set(&self) -> Vec<usize> {
        (0..self.safe.len()).filter(|&i| self.safe[i]).collect()
    }

    pub fn safe_count(&self) -> usize {
        self.safe.iter().filter(|s| **s).count()
    }

    pub fn confidence(&self) -> &ConfidenceState {
        &self.confidence
    }

    pub fn slope_bounds(&self) -> &SlopeUpperBounds {
        &self.slope_bounds
    }

    /// Safe point with the lowest upper confidence bound, after the most
    /// recent step.
    pub fn incumbent(&self) -> Option<usize> {
        self.incumbent
    }

    fn refresh_incumbent(&mut self) {
        let mut best: Option<(usize, f64)> = None;
        for i in 0..self.safe.len() {
            if !self.safe[i] {
                continue;
            }
            let u = self.confidence.upper[i];
            if best.map_or(true, |(_, bu)| u < bu) {
                best = Some((i, u));
            }
        }
        self.incumbent = best.map(|(i, _)| i);
    }

    /// One SafeSlope iteration: refresh slope bounds and confidence
    /// intervals, expand the safe set over grid edges, form the minimizer and
    /// expander sets, and pick the widest candidate (ties to the lowest point
    /// index).
    pub fn safeslope_step(
        &mut self,
        grid: &GridDomain,
        incidence: &[IncidenceMatrix],
        post: &GpPosterior,
        field: &SlopeField,
        beta_f: f64,
        beta_m: f64,
    ) -> StepOutcome {
        self.t += 1;
        let q = field.magnitude_bound(beta_m);
        match self.mode {
            SearchMode::Nested => self.slope_bounds.update_nested(&q),
            SearchMode::Unnested => self.slope_bounds.replace(&q),
        }
        self.confidence.update(post, beta_f);

        self.expand_safe_set(grid, incidence);
        if self.mode == SearchMode::Nested && self.has_collapsed_interval() {
            self.refresh_incumbent();
            return StepOutcome::Terminal(StopReason::ConfidenceCollapse { at: self.t });
        }
        self.refresh_incumbent();

        let minimizers = self.minimizer_set();
        let expanders = self.expander_set(grid, incidence);
        select_widest(&self.confidence, minimizers.iter().chain(expanders.iter()).cloned())
            .map(StepOutcome::Sample)
            .unwrap_or(StepOutcome::Terminal(StopReason::NoCandidates { at: self.t }))
    }

    /// One SafeUCB iteration: the safe set is recomputed globally as all
    /// points whose upper confidence bound clears the limit, and the widest
    /// safe interval is sampled.
    pub fn safeucb_step(&mut self, post: &GpPosterior, beta_f: f64) -> StepOutcome {
        self.t += 1;
        self.confidence.update(post, beta_f);
        for i in 0..self.safe.len() {
            self.safe[i] = self.confidence.upper[i] <= self.safe_limit;
        }
        if self.mode == SearchMode::Nested && self.has_collapsed_interval() {
            self.refresh_incumbent();
            return StepOutcome::Terminal(StopReason::ConfidenceCollapse { at: self.t });
        }
        self.refresh_incumbent();
        select_widest(&self.confidence, (0..self.safe.len()).filter(|&i| self.safe[i]))
            .map(StepOutcome::Sample)
            .unwrap_or(StepOutcome::Terminal(StopReason::EmptySafeSet { at: self.t }))
    }

    /// Grows the safe set by one ring: a neighbor `x'` of a safe `x` along
    /// axis `i` is certified when `u(x) + u_hat_i(x, x') * d <= h`. The
    /// previous safe set is always retained.
    fn expand_safe_set(&mut self, grid: &GridDomain, incidence: &[IncidenceMatrix]) {
        let mut next = self.safe.clone();
        for x in 0..self.safe.len() {
            if !self.safe[x] {
                continue;
            }
            let u_x = self.confidence.upper[x];
            for w in incidence {
                let d = w.spacing();
                for neighbor in grid.vicinity(x, w.axis()).expect("valid point and axis") {
                    if next[neighbor] {
                        continue;
                    }
                    let edge = w.edge_between(x, neighbor).expect("neighbors share an edge");
                    if u_x + self.slope_bounds.get(w.axis(), edge) * d <= self.safe_limit {
                        next[neighbor] = true;
                    }
                }
            }
        }
        self.safe = next;
    }

    fn has_collapsed_interval(&self) -> bool {
        (0..self.safe.len())
            .any(|i| self.safe[i] && self.confidence.upper[i] < self.confidence.lower[i])
    }

    /// Safe points whose lower bound undercuts the least safe upper bound.
    fn minimizer_set(&self) -> Vec<usize> {
        let min_upper = (0..self.safe.len())
            .filter(|&i| self.safe[i])
            .map(|i| self.confidence.upper[i])
            .fold(f64::INFINITY, f64::min);
        (0..self.safe.len())
            .filter(|&i| self.safe[i] && self.confidence.lower[i] <= min_upper)
            .collect()
    }

    /// Safe points that could certify at least one unsafe neighbor, counting
    /// over all axes with the optimistic (lower) bound.
    fn expander_set(&self, grid: &GridDomain, incidence: &[IncidenceMatrix]) -> Vec<usize> {
        let mut out = Vec::new();
        for x in 0..self.safe.len() {
            if !self.safe[x] {
                continue;
            }
            let l_x = self.confidence.lower[x];
            let mut count = 0usize;
            for w in incidence {
                let d = w.spacing();
                for neighbor in grid.vicinity(x, w.axis()).expect("valid point and axis") {
                    if self.safe[neighbor] {
                        continue;
                    }
                    let edge = w.edge_between(x, neighbor).expect("neighbors share an edge");
                    if l_x + self.slope_bounds.get(w.axis(), edge) * d <= self.safe_limit {
                        count += 1;
                    }
                }
            }
            if count > 0 {
                out.push(x);
            }
        }
        out
    }
}

/// Argmax of the interval width over candidates, ties resolved toward the
/// lowest point index. Candidates may repeat.
fn select_widest(confidence: &ConfidenceState, candidates: impl Iterator<Item = usize>) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for i in candidates {
        let w = confidence.width(i);
        match best {
            None => best = Some((i, w)),
            Some((bi, bw)) => {
                if w > bw || (w == bw && i < bi) {
                    best = Some((i, w));
                }
            }
        }
    }
    best.map(|(i, _)| i)
}

/// One sampled point and its context.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationRow {
    pub t: u64,
    pub point: usize,
    pub coords: Vec<f64>,
    pub f_true: f64,
    pub observed: f64,
    pub safe: bool,
    pub safe_set_size: usize,
    pub incumbent: usize,
    pub incumbent_f: f64,
}

/// Full log of one seeded run.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub seed: u64,
    pub initial_safe_set: Vec<usize>,
    /// Noisy objective evaluations made at the seed safe set before the loop.
    pub initial_observations: Vec<(usize, f64)>,
    pub rows: Vec<IterationRow>,
    pub stop: StopReason,
    /// Low-fidelity sweep observations (multi-fidelity runs only).
    pub low_fidelity_observations: Option<Vec<f64>>,
    /// Per-iteration safe sets, if requested.
    pub safe_set_history: Option<Vec<Vec<usize>>>,
    /// Per-iteration slope-bound snapshots `[iteration][axis][edge]`, if
    /// requested.
    pub slope_bound_history: Option<Vec<Vec<Vec<f64>>>>,
    /// Confidence width at each sampled point, if requested. The sampling
    /// rule maximizes the width over the candidate set, so this is also the
    /// largest width among minimizers and expanders at that iteration.
    pub width_history: Option<Vec<f64>>,
}

impl TrialRecord {
    /// Number of sampled iterations.
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

/// Optional diagnostics collected during a run.
#[derive(Debug, Clone, Copy, Default)]
pub struct RunOptions {
    pub log_safe_sets: bool,
    pub log_slope_bounds: bool,
    pub log_widths: bool,
}

/// Everything needed to execute one seeded search run.
#[derive(Debug, Clone, Copy)]
pub struct SearchSetup<'a> {
    pub algorithm: Algorithm,
    pub mode: SearchMode,
    pub grid: &'a GridDomain,
    pub model: SearchModel<'a>,
    /// Ground-truth objective per grid point; owned by the harness.
    pub true_f: &'a [f64],
    /// Ground-truth low-fidelity objective per grid point (multi-fidelity
    /// runs sweep it before the loop).
    pub true_f_low: Option<&'a [f64]>,
    pub safe_limit: f64,
    pub delta_f: f64,
    pub delta_m: f64,
    pub initial_safe_set: &'a [usize],
    pub budget: u64,
    pub seed: u64,
    pub options: RunOptions,
}

/// Runs one seeded search: condition the model, step the search, observe the
/// chosen point with noise, repeat. Fails fast if a seed point is actually
/// unsafe (the harness owns the ground truth, so this is checked here).
pub fn run_search(setup: &SearchSetup) -> Result<TrialRecord> {
    let grid = setup.grid;
    let n = grid.len();
    if setup.true_f.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: setup.true_f.len() });
    }
    if setup.initial_safe_set.is_empty() {
        return Err(Error::EmptySafeSet);
    }
    let mut seed_set: Vec<usize> = setup.initial_safe_set.to_vec();
    seed_set.sort_unstable();
    seed_set.dedup();
    for &i in &seed_set {
        if i >= n {
            return Err(Error::InvalidPointIndex { index: i, len: n });
        }
        if setup.true_f[i] > setup.safe_limit {
            return Err(Error::UnsafeSeed {
                index: i,
                value: setup.true_f[i],
                limit: setup.safe_limit,
            });
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(setup.seed);
    let draw = |rng: &mut ChaCha8Rng, variance: f64| -> f64 {
        let z: f64 = StandardNormal.sample(rng);
        z * variance.sqrt()
    };

    // Build the conditioning base: the kernel prior for single fidelity, or
    // the low-fidelity-conditioned moments after sweeping f_L over the grid.
    let (prior, high_noise, low_obs) = match setup.model {
        SearchModel::SingleFidelity { kernel, noise } => {
            (GridPrior::from_kernel(kernel, grid)?, noise, None)
        }
        SearchModel::MultiFidelity(model) => {
            let f_low = setup
                .true_f_low
                .ok_or(Error::Empty("low-fidelity ground truth"))?;
            if f_low.len() != n {
                return Err(Error::DimensionMismatch { expected: n, got: f_low.len() });
            }
            let y_low: Vec<f64> = f_low
                .iter()
                .map(|&v| v + draw(&mut rng, model.low_noise))
                .collect();
            (model.grid_prior_given_low(grid, &y_low)?, model.high_noise, Some(y_low))
        }
    };

    let incidence = grid.incidence_all();
    let mut state = SafeSearchState::new(grid, &incidence, &seed_set, setup.safe_limit, setup.mode)?;

    let mut observations: Vec<(usize, f64)> = seed_set
        .iter()
        .map(|&i| (i, setup.true_f[i] + draw(&mut rng, high_noise)))
        .collect();

    let mut record = TrialRecord {
        seed: setup.seed,
        initial_safe_set: seed_set.clone(),
        initial_observations: observations.clone(),
        rows: Vec::with_capacity(setup.budget as usize),
        stop: StopReason::Completed,
        low_fidelity_observations: low_obs,
        safe_set_history: setup.options.log_safe_sets.then(Vec::new),
        slope_bound_history: setup.options.log_slope_bounds.then(Vec::new),
        width_history: setup.options.log_widths.then(Vec::new),
    };

    for t in 1..=setup.budget {
        let post = prior.condition(&observations, high_noise)?;
        let bf = beta_f(t, n, setup.delta_f)?;
        let outcome = match setup.algorithm {
            Algorithm::SafeSlope => {
                let bm = beta_m(t, n, grid.dims(), setup.delta_m)?;
                let field = SlopeField::from_posterior(&post, &incidence)?;
                state.safeslope_step(grid, &incidence, &post, &field, bf, bm)
            }
            Algorithm::SafeUcb => state.safeucb_step(&post, bf),
        };

        if let Some(history) = record.safe_set_history.as_mut() {
            history.push(state.safe_set());
        }
        if let Some(history) = record.slope_bound_history.as_mut() {
            history.push(
                (0..state.slope_bounds().axes())
                    .map(|a| state.slope_bounds().axis(a).to_vec())
                    .collect(),
            );
        }

        match outcome {
            StepOutcome::Sample(x) => {
                debug_assert!(state.is_safe(x), "sampled point must lie in the safe set");
                if let Some(history) = record.width_history.as_mut() {
                    history.push(state.confidence().width(x));
                }
                let y = setup.true_f[x] + draw(&mut rng, high_noise);
                observations.push((x, y));
                let incumbent = state.incumbent().expect("safe set is nonempty");
                record.rows.push(IterationRow {
                    t,
                    point: x,
                    coords: grid.coords(x),
                    f_true: setup.true_f[x],
                    observed: y,
                    safe: setup.true_f[x] <= setup.safe_limit,
                    safe_set_size: state.safe_count(),
                    incumbent,
                    incumbent_f: setup.true_f[incumbent],
                });
            }
            StepOutcome::Terminal(reason) => {
                record.stop = reason;
                break;
            }
        }
    }
    Ok(record)
}
