//! Experiment configuration: a flat `key = value` text file with `#`
//! comments. Every key has a default taken from the built-in benchmark
//! instance, so an empty file is a valid configuration.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};
use nalgebra::{DMatrix, DVector};
use safeslope::grid::GridDomain;
use safeslope::kernel::{KernelFamily, KernelSpec};
use safeslope::lqr::{benchmark_instance, CostSpec, LtiSystem};
use safeslope::mfgp::Ar1Model;
use safeslope::search::{Algorithm, SearchMode};

/// Which fidelity structure the surrogate uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fidelity {
    Single,
    Multi,
}

impl fmt::Display for Fidelity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Fidelity::Single => "single",
            Fidelity::Multi => "multi",
        })
    }
}

impl FromStr for Fidelity {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "single" | "sf" => Ok(Fidelity::Single),
            "multi" | "mf" => Ok(Fidelity::Multi),
            other => bail!("unknown fidelity `{other}` (expected single|multi)"),
        }
    }
}

/// How the initial safe set is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitialSetPolicy {
    /// Uniformly sample `s0_size` distinct truly-safe points per trial.
    RandomSafe,
    /// Start from the observed low-fidelity minimizer (multi-fidelity only).
    ArgminLowFidelity,
}

impl fmt::Display for InitialSetPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            InitialSetPolicy::RandomSafe => "random_safe_k",
            InitialSetPolicy::ArgminLowFidelity => "argmin_low_fidelity",
        })
    }
}

impl FromStr for InitialSetPolicy {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "random_safe_k" | "random_safe" => Ok(InitialSetPolicy::RandomSafe),
            "argmin_low_fidelity" => Ok(InitialSetPolicy::ArgminLowFidelity),
            other => bail!("unknown s0_policy `{other}`"),
        }
    }
}

/// Per-kernel configuration block.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelConfig {
    pub family: KernelFamily,
    pub variance: f64,
    pub lengthscales: Vec<f64>,
}

impl KernelConfig {
    fn spec(&self, dims: usize) -> Result<KernelSpec> {
        let lengthscales = if self.lengthscales.len() == 1 {
            vec![self.lengthscales[0]; dims]
        } else if self.lengthscales.len() == dims {
            self.lengthscales.clone()
        } else {
            bail!(
                "kernel lengthscales must have 1 or {dims} entries (got {})",
                self.lengthscales.len()
            );
        };
        Ok(KernelSpec::new(self.family, self.variance, lengthscales)?)
    }
}

/// Fully resolved experiment configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub algorithm: Algorithm,
    pub fidelity: Fidelity,
    pub mode: SearchMode,
    pub kernel: KernelConfig,
    pub low_kernel: KernelConfig,
    pub error_kernel: KernelConfig,
    pub rho: f64,
    pub high_noise: f64,
    pub low_noise: f64,
    pub safe_limit: f64,
    pub delta_f: f64,
    pub delta_m: f64,
    pub iterations: u64,
    pub trials: usize,
    pub seed: u64,
    pub s0_policy: InitialSetPolicy,
    pub s0_size: usize,
    pub grid_resolution: usize,
    pub grid_lower: Vec<f64>,
    pub grid_upper: Vec<f64>,
    pub z0: Vec<f64>,
    pub horizon: usize,
    pub a_true: Vec<f64>,
    pub b_true: Vec<f64>,
    pub a_approx: Vec<f64>,
    pub b_approx: Vec<f64>,
    pub epsilon: f64,
    pub tstar_cap: u64,
    pub analysis_horizons: Vec<u64>,
    pub high_subset_stride: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let bench = benchmark_instance();
        let d = &bench.defaults;
        let kernel = KernelConfig {
            family: d.kernel_family,
            variance: d.kernel_variance,
            lengthscales: vec![d.kernel_lengthscale],
        };
        Self {
            algorithm: Algorithm::SafeSlope,
            fidelity: Fidelity::Multi,
            mode: SearchMode::Unnested,
            kernel: kernel.clone(),
            low_kernel: kernel.clone(),
            error_kernel: kernel,
            rho: d.rho,
            high_noise: d.high_noise,
            low_noise: d.low_noise,
            safe_limit: d.safe_limit,
            delta_f: d.delta_f,
            delta_m: d.delta_m,
            iterations: d.iterations,
            trials: d.trials,
            seed: 1729,
            s0_policy: InitialSetPolicy::RandomSafe,
            s0_size: d.initial_safe_size,
            grid_resolution: bench.grid.resolution(),
            grid_lower: bench.grid.lower().to_vec(),
            grid_upper: bench.grid.upper().to_vec(),
            z0: bench.cost.initial_state().iter().cloned().collect(),
            horizon: bench.cost.horizon(),
            a_true: bench.true_system.a().transpose().iter().cloned().collect(),
            b_true: bench.true_system.b().iter().cloned().collect(),
            a_approx: bench.approx_system.a().transpose().iter().cloned().collect(),
            b_approx: bench.approx_system.b().iter().cloned().collect(),
            epsilon: 0.5,
            tstar_cap: 1_000_000,
            analysis_horizons: vec![5, 20, 100, 150],
            high_subset_stride: 2,
        }
    }
}

fn parse_f64(key: &str, value: &str) -> Result<f64> {
    value
        .parse::<f64>()
        .with_context(|| format!("key `{key}`: expected a number, got `{value}`"))
}

fn parse_f64_list(key: &str, value: &str) -> Result<Vec<f64>> {
    value
        .split(',')
        .map(|part| parse_f64(key, part.trim()))
        .collect()
}

fn parse_u64_list(key: &str, value: &str) -> Result<Vec<u64>> {
    value
        .split(',')
        .map(|part| {
            part.trim()
                .parse::<u64>()
                .with_context(|| format!("key `{key}`: expected an integer, got `{part}`"))
        })
        .collect()
}

impl ExperimentConfig {
    /// Parses a flat `key = value` file on top of the defaults.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config file {}", path.display()))?;
        Self::from_str_contents(&text)
    }

    pub fn from_str_contents(text: &str) -> Result<Self> {
        let mut config = Self::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| anyhow!("line {}: expected `key = value`", lineno + 1))?;
            config
                .set(key.trim(), value.trim())
                .with_context(|| format!("line {}", lineno + 1))?;
        }
        config.validate()?;
        Ok(config)
    }

    /// Sets one configuration key from its text form.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key.to_ascii_lowercase().as_str() {
            "algorithm" => {
                self.algorithm = match value.to_ascii_lowercase().as_str() {
                    "safeslope" => Algorithm::SafeSlope,
                    "safeucb" => Algorithm::SafeUcb,
                    other => bail!("unknown algorithm `{other}` (expected safeslope|safeucb)"),
                }
            }
            "fidelity" => self.fidelity = value.parse()?,
            "mode" => {
                self.mode = match value.to_ascii_lowercase().as_str() {
                    "nested" => SearchMode::Nested,
                    "unnested" => SearchMode::Unnested,
                    other => bail!("unknown mode `{other}` (expected nested|unnested)"),
                }
            }
            "kernel_family" => self.kernel.family = value.parse()?,
            "kernel_variance" => self.kernel.variance = parse_f64(key, value)?,
            "kernel_lengthscales" => self.kernel.lengthscales = parse_f64_list(key, value)?,
            "low_kernel_family" => self.low_kernel.family = value.parse()?,
            "low_kernel_variance" => self.low_kernel.variance = parse_f64(key, value)?,
            "low_kernel_lengthscales" => self.low_kernel.lengthscales = parse_f64_list(key, value)?,
            "error_kernel_family" => self.error_kernel.family = value.parse()?,
            "error_kernel_variance" => self.error_kernel.variance = parse_f64(key, value)?,
            "error_kernel_lengthscales" => {
                self.error_kernel.lengthscales = parse_f64_list(key, value)?
            }
            "rho" => self.rho = parse_f64(key, value)?,
            "high_noise" => self.high_noise = parse_f64(key, value)?,
            "low_noise" => self.low_noise = parse_f64(key, value)?,
            "safe_limit" | "h" => self.safe_limit = parse_f64(key, value)?,
            "delta_f" => self.delta_f = parse_f64(key, value)?,
            "delta_m" => self.delta_m = parse_f64(key, value)?,
            "iterations" => self.iterations = value.parse().context("iterations")?,
            "trials" => self.trials = value.parse().context("trials")?,
            "seed" => self.seed = value.parse().context("seed")?,
            "s0_policy" => self.s0_policy = value.parse()?,
            "s0_size" => self.s0_size = value.parse().context("s0_size")?,
            "grid_resolution" => self.grid_resolution = value.parse().context("grid_resolution")?,
            "grid_lower" => self.grid_lower = parse_f64_list(key, value)?,
            "grid_upper" => self.grid_upper = parse_f64_list(key, value)?,
            "z0" => self.z0 = parse_f64_list(key, value)?,
            "horizon" => self.horizon = value.parse().context("horizon")?,
            "a_true" => self.a_true = parse_f64_list(key, value)?,
            "b_true" => self.b_true = parse_f64_list(key, value)?,
            "a_approx" => self.a_approx = parse_f64_list(key, value)?,
            "b_approx" => self.b_approx = parse_f64_list(key, value)?,
            "epsilon" => self.epsilon = parse_f64(key, value)?,
            "tstar_cap" => self.tstar_cap = value.parse().context("tstar_cap")?,
            "analysis_horizons" => self.analysis_horizons = parse_u64_list(key, value)?,
            "high_subset_stride" => {
                self.high_subset_stride = value.parse().context("high_subset_stride")?
            }
            other => bail!("unknown configuration key `{other}`"),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        for (name, p) in [("delta_f", self.delta_f), ("delta_m", self.delta_m)] {
            if !(p > 0.0 && p < 1.0) {
                bail!("{name} must lie in (0, 1), got {p}");
            }
        }
        if self.trials < 1 {
            bail!("trials must be at least 1");
        }
        if self.s0_size < 1 {
            bail!("s0_size must be at least 1");
        }
        if self.grid_lower.len() != self.grid_upper.len() {
            bail!("grid_lower and grid_upper must have the same length");
        }
        let n = self.grid_lower.len();
        if self.z0.len() != n {
            bail!("z0 must have {n} entries");
        }
        if self.a_true.len() != n * n || self.a_approx.len() != n * n {
            bail!("system matrices must have {} entries (row-major)", n * n);
        }
        if self.b_true.len() != n || self.b_approx.len() != n {
            bail!("input matrices must have {n} entries");
        }
        if self.s0_policy == InitialSetPolicy::ArgminLowFidelity && self.fidelity == Fidelity::Single
        {
            bail!("s0_policy argmin_low_fidelity requires fidelity = multi");
        }
        if self.high_subset_stride == 0 {
            bail!("high_subset_stride must be at least 1");
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<GridDomain> {
        Ok(GridDomain::new(self.grid_resolution, self.grid_lower.clone(), self.grid_upper.clone())?)
    }

    pub fn dims(&self) -> usize {
        self.grid_lower.len()
    }

    pub fn kernel_spec(&self) -> Result<KernelSpec> {
        self.kernel.spec(self.dims())
    }

    pub fn ar1_model(&self) -> Result<Ar1Model> {
        Ok(Ar1Model::new(
            self.low_kernel.spec(self.dims())?,
            self.error_kernel.spec(self.dims())?,
            self.rho,
            self.low_noise,
            self.high_noise,
        )?)
    }

    pub fn true_system(&self) -> Result<LtiSystem> {
        let n = self.dims();
        Ok(LtiSystem::new(
            DMatrix::from_row_slice(n, n, &self.a_true),
            DMatrix::from_column_slice(n, 1, &self.b_true),
        )?)
    }

    pub fn approx_system(&self) -> Result<LtiSystem> {
        let n = self.dims();
        Ok(LtiSystem::new(
            DMatrix::from_row_slice(n, n, &self.a_approx),
            DMatrix::from_column_slice(n, 1, &self.b_approx),
        )?)
    }

    pub fn cost_spec(&self) -> Result<CostSpec> {
        let n = self.dims();
        Ok(CostSpec::new(
            DMatrix::identity(n, n),
            DMatrix::from_element(1, 1, 1.0),
            self.horizon,
            DVector::from_vec(self.z0.clone()),
        )?)
    }

    /// Short human-readable tag for output naming and logs.
    pub fn cell_label(&self) -> String {
        let alg = match self.algorithm {
            Algorithm::SafeSlope => "safeslope",
            Algorithm::SafeUcb => "safeucb",
        };
        format!("{alg}_{}", self.fidelity)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_the_benchmark_instance() {
        let cfg = ExperimentConfig::default();
        assert_eq!(cfg.grid_resolution, 26);
        assert_eq!(cfg.iterations, 150);
        assert_eq!(cfg.trials, 10);
        assert_eq!(cfg.s0_size, 3);
        assert_eq!(cfg.a_true, vec![0.785, -0.260, -0.260, 0.315]);
        assert_eq!(cfg.b_approx, vec![1.543, 0.524]);
        assert_eq!(cfg.safe_limit, 0.0);
        cfg.validate().unwrap();
    }

    #[test]
    fn parses_overrides_and_rejects_unknown_keys() {
        let cfg = ExperimentConfig::from_str_contents(
            "# comment\nalgorithm = safeucb\nfidelity = single\niterations = 12\nkernel_lengthscales = 0.5, 0.8\n",
        )
        .unwrap();
        assert_eq!(cfg.algorithm, Algorithm::SafeUcb);
        assert_eq!(cfg.fidelity, Fidelity::Single);
        assert_eq!(cfg.iterations, 12);
        assert_eq!(cfg.kernel.lengthscales, vec![0.5, 0.8]);

        assert!(ExperimentConfig::from_str_contents("no_such_key = 1\n").is_err());
        assert!(ExperimentConfig::from_str_contents("delta_f = 1.5\n").is_err());
    }

    #[test]
    fn argmin_policy_requires_multi_fidelity() {
        let err = ExperimentConfig::from_str_contents(
            "fidelity = single\ns0_policy = argmin_low_fidelity\n",
        );
        assert!(err.is_err());
    }
}
