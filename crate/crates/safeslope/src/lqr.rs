//! Controller-tuning benchmark: discrete-time LTI dynamics, finite-horizon
//! quadratic cost, and the log-cost objectives evaluated over a gain grid.
//!
//! The benchmark pairs a "true" system with a slightly different approximate
//! model. Tuning searches over state-feedback gains `K = [x_1 x_2]`; the
//! objective is the log of the truncated quadratic cost, so unstable gains
//! show up as large positive values rather than overflow.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::grid::GridDomain;
use crate::kernel::{eigenvalues_descending, KernelFamily};

/// Discrete-time linear system `z_{j+1} = A z_j + B u_j`.
#[derive(Debug, Clone, PartialEq)]
pub struct LtiSystem {
    a: DMatrix<f64>,
    b: DMatrix<f64>,
}

impl LtiSystem {
    pub fn new(a: DMatrix<f64>, b: DMatrix<f64>) -> Result<Self> {
        if a.nrows() != a.ncols() {
            return Err(Error::BadShape { name: "A", rows: a.nrows(), cols: a.nrows() });
        }
        if b.nrows() != a.nrows() {
            return Err(Error::BadShape { name: "B", rows: a.nrows(), cols: b.ncols() });
        }
        Ok(Self { a, b })
    }

    pub fn state_dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn input_dim(&self) -> usize {
        self.b.ncols()
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn b(&self) -> &DMatrix<f64> {
        &self.b
    }

    /// Closed-loop matrix `A - B K`.
    pub fn closed_loop(&self, gain: &DMatrix<f64>) -> DMatrix<f64> {
        &self.a - &self.b * gain
    }
}

/// Finite-horizon quadratic cost parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct CostSpec {
    q: DMatrix<f64>,
    r: DMatrix<f64>,
    horizon: usize,
    initial_state: DVector<f64>,
}

impl CostSpec {
    pub fn new(
        q: DMatrix<f64>,
        r: DMatrix<f64>,
        horizon: usize,
        initial_state: DVector<f64>,
    ) -> Result<Self> {
        if q.nrows() != q.ncols() || q.nrows() != initial_state.len() {
            return Err(Error::BadShape { name: "Q", rows: initial_state.len(), cols: initial_state.len() });
        }
        if r.nrows() != r.ncols() {
            return Err(Error::BadShape { name: "R", rows: r.nrows(), cols: r.ncols() });
        }
        if horizon == 0 {
            return Err(Error::Invalid("cost horizon must be at least 1".into()));
        }
        let q_eigs = eigenvalues_descending(&q)?;
        if q_eigs.last().copied().unwrap_or(0.0) < -1e-10 {
            return Err(Error::NotPsd { name: "Q" });
        }
        let r_eigs = eigenvalues_descending(&r)?;
        if r_eigs.last().copied().unwrap_or(0.0) <= 0.0 {
            return Err(Error::NotPsd { name: "R" });
        }
        Ok(Self { q, r, horizon, initial_state })
    }

    pub fn q(&self) -> &DMatrix<f64> {
        &self.q
    }

    pub fn r(&self) -> &DMatrix<f64> {
        &self.r
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn initial_state(&self) -> &DVector<f64> {
        &self.initial_state
    }

    /// Replaces the initial state (dimension-checked).
    pub fn with_initial_state(&self, z0: DVector<f64>) -> Result<Self> {
        if z0.len() != self.q.nrows() {
            return Err(Error::DimensionMismatch { expected: self.q.nrows(), got: z0.len() });
        }
        Ok(Self { initial_state: z0, ..self.clone() })
    }
}

/// Truncated quadratic cost of a state-feedback gain:
/// `J = sum_{j=0}^{H-1} z_j^T (Q + K^T R K) z_j` with `z_{j+1} = (A - B K) z_j`.
/// Finite for any gain because the horizon is finite.
pub fn lqr_cost(system: &LtiSystem, gain: &DMatrix<f64>, spec: &CostSpec) -> Result<f64> {
    if gain.nrows() != system.input_dim() || gain.ncols() != system.state_dim() {
        return Err(Error::BadShape {
            name: "K",
            rows: system.input_dim(),
            cols: system.state_dim(),
        });
    }
    if spec.q.nrows() != system.state_dim() || spec.r.nrows() != system.input_dim() {
        return Err(Error::DimensionMismatch {
            expected: system.state_dim(),
            got: spec.q.nrows(),
        });
    }
    let stage = &spec.q + gain.transpose() * &spec.r * gain;
    let closed = system.closed_loop(gain);
    let mut z = spec.initial_state.clone();
    let mut cost = 0.0;
    for _ in 0..spec.horizon {
        cost += (stage.clone() * &z).dot(&z);
        z = &closed * &z;
    }
    Ok(cost)
}

/// Interprets a grid point as a single-input gain row `K = [x_1 ... x_n]`.
pub fn gain_at(grid: &GridDomain, index: usize) -> DMatrix<f64> {
    let coords = grid.coords(index);
    DMatrix::from_row_slice(1, coords.len(), &coords)
}

/// Log-cost objectives over the whole grid: `f = log J` for the true system
/// and `f_L = log J_hat` for the approximate one. Rejects nonpositive costs,
/// which can only arise from a zero initial state.
pub fn log_cost_objectives(
    true_system: &LtiSystem,
    approx_system: &LtiSystem,
    spec: &CostSpec,
    grid: &GridDomain,
) -> Result<(Vec<f64>, Vec<f64>)> {
    if true_system.input_dim() != 1 || approx_system.input_dim() != 1 {
        return Err(Error::Invalid("gain grids require single-input systems".into()));
    }
    if grid.dims() != true_system.state_dim() {
        return Err(Error::DimensionMismatch {
            expected: true_system.state_dim(),
            got: grid.dims(),
        });
    }
    let mut f = Vec::with_capacity(grid.len());
    let mut f_low = Vec::with_capacity(grid.len());
    for index in 0..grid.len() {
        let gain = gain_at(grid, index);
        let j_true = lqr_cost(true_system, &gain, spec)?;
        let j_approx = lqr_cost(approx_system, &gain, spec)?;
        if j_true <= 0.0 {
            return Err(Error::NonPositiveCost(j_true));
        }
        if j_approx <= 0.0 {
            return Err(Error::NonPositiveCost(j_approx));
        }
        f.push(j_true.ln());
        f_low.push(j_approx.ln());
    }
    Ok((f, f_low))
}

/// Index and value of the smallest entry, ties to the lowest index.
pub fn argmin(values: &[f64]) -> Option<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for (i, &v) in values.iter().enumerate() {
        if best.map_or(true, |(_, bv)| v < bv) {
            best = Some((i, v));
        }
    }
    best
}

/// Spectral radius of a 2x2 matrix, via the characteristic quadratic.
pub fn spectral_radius_2x2(m: &DMatrix<f64>) -> f64 {
    assert_eq!(m.nrows(), 2);
    assert_eq!(m.ncols(), 2);
    let tr = m[(0, 0)] + m[(1, 1)];
    let det = m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)];
    let disc = tr * tr - 4.0 * det;
    if disc >= 0.0 {
        let s = disc.sqrt();
        (0.5 * (tr + s)).abs().max((0.5 * (tr - s)).abs())
    } else {
        det.sqrt()
    }
}

/// Algorithm and model parameters used by the benchmark experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkDefaults {
    pub safe_limit: f64,
    pub delta_f: f64,
    pub delta_m: f64,
    pub high_noise: f64,
    pub low_noise: f64,
    pub iterations: u64,
    pub trials: usize,
    pub initial_safe_size: usize,
    pub rho: f64,
    pub kernel_family: KernelFamily,
    pub kernel_variance: f64,
    pub kernel_lengthscale: f64,
}

/// The full benchmark setup: systems, cost, gain grid, and defaults.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkInstance {
    pub true_system: LtiSystem,
    pub approx_system: LtiSystem,
    pub cost: CostSpec,
    pub grid: GridDomain,
    pub defaults: BenchmarkDefaults,
}

/// Builds the reference controller-tuning instance: a 2-state single-input
/// system pair, `Q = I`, `R = 1`, a 20-step horizon, and a 26x26 gain grid
/// over `x_1 in [-0.5, 4.5]`, `x_2 in [-3.5, 1.5]`.
///
/// The initial state defaults to `(0.1, -0.1)`. The stage cost at `j = 0`
/// already contributes `|z_0|^2`, so any `|z_0| >= 1` would push every
/// log-cost above the safety limit 0 and leave no safe gains; a small initial
/// state keeps both safe and unsafe regions nonempty, and this direction
/// keeps the two log-cost surfaces strongly correlated where they are safe.
pub fn benchmark_instance() -> BenchmarkInstance {
    let true_system = LtiSystem::new(
        DMatrix::from_row_slice(2, 2, &[0.785, -0.260, -0.260, 0.315]),
        DMatrix::from_column_slice(2, 1, &[1.475, 0.607]),
    )
    .expect("static dimensions are consistent");
    let approx_system = LtiSystem::new(
        DMatrix::from_row_slice(2, 2, &[0.700, -0.306, -0.306, 0.342]),
        DMatrix::from_column_slice(2, 1, &[1.543, 0.524]),
    )
    .expect("static dimensions are consistent");
    let cost = CostSpec::new(
        DMatrix::identity(2, 2),
        DMatrix::from_element(1, 1, 1.0),
        20,
        DVector::from_vec(vec![0.1, -0.1]),
    )
    .expect("static cost parameters are valid");
    let grid = GridDomain::new(26, vec![-0.5, -3.5], vec![4.5, 1.5]).expect("static grid is valid");
    BenchmarkInstance {
        true_system,
        approx_system,
        cost,
        grid,
        defaults: BenchmarkDefaults {
            safe_limit: 0.0,
            delta_f: 0.1,
            delta_m: 0.1,
            high_noise: 1e-4,
            low_noise: 1e-8,
            iterations: 150,
            trials: 10,
            initial_safe_size: 3,
            rho: 1.0,
            kernel_family: KernelFamily::Matern52,
            kernel_variance: 1.0,
            kernel_lengthscale: 1.0,
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn nilpotent_system_costs_only_the_first_step() {
        let system = LtiSystem::new(DMatrix::zeros(2, 2), DMatrix::zeros(2, 1)).unwrap();
        let spec = CostSpec::new(
            DMatrix::identity(2, 2),
            DMatrix::from_element(1, 1, 1.0),
            20,
            DVector::from_vec(vec![1.0, 1.0]),
        )
        .unwrap();
        let j = lqr_cost(&system, &DMatrix::zeros(1, 2), &spec).unwrap();
        assert_relative_eq!(j, 2.0, max_relative = 1e-14);
    }

    #[test]
    fn identity_dynamics_accumulate_per_step() {
        let system = LtiSystem::new(DMatrix::identity(2, 2), DMatrix::zeros(2, 1)).unwrap();
        let spec = CostSpec::new(
            DMatrix::identity(2, 2),
            DMatrix::from_element(1, 1, 1.0),
            3,
            DVector::from_vec(vec![1.0, 0.0]),
        )
        .unwrap();
        let j = lqr_cost(&system, &DMatrix::zeros(1, 2), &spec).unwrap();
        assert_relative_eq!(j, 3.0, max_relative = 1e-14);
    }

    /// Scalar-by-scalar simulation without matrix types.
    fn naive_cost(
        a: [[f64; 2]; 2],
        b: [f64; 2],
        k: [f64; 2],
        z0: [f64; 2],
        horizon: usize,
    ) -> f64 {
        let mut z = z0;
        let mut cost = 0.0;
        for _ in 0..horizon {
            let u = -(k[0] * z[0] + k[1] * z[1]);
            cost += z[0] * z[0] + z[1] * z[1] + u * u;
            z = [
                a[0][0] * z[0] + a[0][1] * z[1] + b[0] * u,
                a[1][0] * z[0] + a[1][1] * z[1] + b[1] * u,
            ];
        }
        cost
    }

    #[test]
    fn matches_naive_simulation_on_the_benchmark_system() {
        let bench = benchmark_instance();
        let k = DMatrix::from_row_slice(1, 2, &[0.6, -0.4]);
        let j = lqr_cost(&bench.true_system, &k, &bench.cost).unwrap();
        let oracle = naive_cost(
            [[0.785, -0.260], [-0.260, 0.315]],
            [1.475, 0.607],
            [0.6, -0.4],
            [0.1, -0.1],
            20,
        );
        assert_relative_eq!(j, oracle, max_relative = 1e-12);
    }

    #[test]
    fn benchmark_matrices_are_loaded_exactly() {
        let bench = benchmark_instance();
        assert_eq!(bench.true_system.a()[(0, 0)], 0.785);
        assert_eq!(bench.true_system.a()[(0, 1)], -0.260);
        assert_eq!(bench.true_system.a()[(1, 0)], -0.260);
        assert_eq!(bench.true_system.a()[(1, 1)], 0.315);
        assert_eq!(bench.true_system.b()[(0, 0)], 1.475);
        assert_eq!(bench.true_system.b()[(1, 0)], 0.607);
        assert_eq!(bench.approx_system.a()[(0, 0)], 0.700);
        assert_eq!(bench.approx_system.a()[(0, 1)], -0.306);
        assert_eq!(bench.approx_system.a()[(1, 1)], 0.342);
        assert_eq!(bench.approx_system.b()[(0, 0)], 1.543);
        assert_eq!(bench.approx_system.b()[(1, 0)], 0.524);
        assert_eq!(bench.defaults.safe_limit, 0.0);
        assert_eq!(bench.defaults.delta_f, 0.1);
        assert_eq!(bench.defaults.delta_m, 0.1);
        assert_eq!(bench.defaults.high_noise, 1e-4);
        assert_eq!(bench.defaults.low_noise, 1e-8);
        assert_eq!(bench.defaults.iterations, 150);
        assert_eq!(bench.defaults.trials, 10);
        assert_eq!(bench.defaults.initial_safe_size, 3);
    }

    #[test]
    fn zero_initial_state_makes_log_cost_undefined() {
        let bench = benchmark_instance();
        let spec = bench.cost.with_initial_state(DVector::zeros(2)).unwrap();
        let err = log_cost_objectives(&bench.true_system, &bench.approx_system, &spec, &bench.grid);
        assert!(matches!(err, Err(Error::NonPositiveCost(_))));
    }

    #[test]
    fn log_cost_grows_with_instability_along_a_ray() {
        let bench = benchmark_instance();
        // Walk from a reasonable gain outward; once the closed loop is
        // clearly unstable, larger spectral radius must mean larger log cost.
        let mut unstable: Vec<(f64, f64)> = Vec::new();
        for step in 0..12 {
            let k = DMatrix::from_row_slice(1, 2, &[0.5 + 0.35 * step as f64, -0.2]);
            let radius = spectral_radius_2x2(&bench.true_system.closed_loop(&k));
            let j = lqr_cost(&bench.true_system, &k, &bench.cost).unwrap();
            if radius > 1.05 {
                unstable.push((radius, j.ln()));
            }
        }
        assert!(unstable.len() >= 3, "the ray must leave the stable region");
        for pair in unstable.windows(2) {
            assert!(pair[1].0 > pair[0].0, "radius must increase along the ray");
            assert!(pair[1].1 > pair[0].1, "log cost must increase with the radius");
        }
    }

    #[test]
    fn safe_and_unsafe_regions_are_both_nonempty() {
        let bench = benchmark_instance();
        let (f, f_low) =
            log_cost_objectives(&bench.true_system, &bench.approx_system, &bench.cost, &bench.grid)
                .unwrap();
        let h = bench.defaults.safe_limit;
        let safe = f.iter().filter(|v| **v <= h).count();
        let unsafe_count = f.len() - safe;
        assert!(safe >= 10, "expected a sizable safe region, found {safe} points");
        assert!(unsafe_count >= 10, "expected a sizable unsafe region, found {unsafe_count}");
        // f <= h iff J <= 1 under h = 0.
        for (i, &v) in f.iter().enumerate() {
            let gain = gain_at(&bench.grid, i);
            let j = lqr_cost(&bench.true_system, &gain, &bench.cost).unwrap();
            assert_eq!(v <= 0.0, j <= 1.0);
        }
        assert_eq!(f_low.len(), f.len());
    }

    #[test]
    fn objectives_correlate_on_the_safe_region() {
        let bench = benchmark_instance();
        let (f, f_low) =
            log_cost_objectives(&bench.true_system, &bench.approx_system, &bench.cost, &bench.grid)
                .unwrap();
        let h = bench.defaults.safe_limit;
        let pairs: Vec<(f64, f64)> = f
            .iter()
            .zip(&f_low)
            .filter(|(a, b)| **a <= h && **b <= h)
            .map(|(a, b)| (*a, *b))
            .collect();
        assert!(pairs.len() > 30);
        let n = pairs.len() as f64;
        let mean_a = pairs.iter().map(|p| p.0).sum::<f64>() / n;
        let mean_b = pairs.iter().map(|p| p.1).sum::<f64>() / n;
        let mut cov = 0.0;
        let mut var_a = 0.0;
        let mut var_b = 0.0;
        for (a, b) in &pairs {
            cov += (a - mean_a) * (b - mean_b);
            var_a += (a - mean_a).powi(2);
            var_b += (b - mean_b).powi(2);
        }
        let pearson = cov / (var_a.sqrt() * var_b.sqrt());
        assert!(pearson >= 0.9, "safe-region correlation {pearson} too weak");
    }

    #[test]
    fn argmin_breaks_ties_to_the_lowest_index() {
        assert_eq!(argmin(&[2.0, 1.0, 1.0]), Some((1, 1.0)));
        assert_eq!(argmin(&[]), None);
    }
}
