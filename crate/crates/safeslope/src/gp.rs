//! Single-fidelity Gaussian-process inference: posterior over query points,
//! prior sampling for synthetic experiments, and the log marginal likelihood.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::grid::GridDomain;
use crate::kernel::{max_asymmetry, KernelSpec};
use crate::linalg::{cholesky_with_jitter, condition_on_observations};

/// Noisy function observations: inputs, outputs, and a shared observation
/// noise variance.
#[derive(Debug, Clone, PartialEq)]
pub struct GpDataset {
    inputs: Vec<Vec<f64>>,
    outputs: Vec<f64>,
    noise: f64,
}

impl GpDataset {
    pub fn new(inputs: Vec<Vec<f64>>, outputs: Vec<f64>, noise: f64) -> Result<Self> {
        if inputs.len() != outputs.len() {
            return Err(Error::DatasetLengthMismatch {
                inputs: inputs.len(),
                outputs: outputs.len(),
            });
        }
        if noise < 0.0 {
            return Err(Error::NegativeNoise(noise));
        }
        Ok(Self { inputs, outputs, noise })
    }

    pub fn empty(noise: f64) -> Self {
        Self { inputs: Vec::new(), outputs: Vec::new(), noise: noise.max(0.0) }
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn inputs(&self) -> &[Vec<f64>] {
        &self.inputs
    }

    pub fn outputs(&self) -> &[f64] {
        &self.outputs
    }

    pub fn noise(&self) -> f64 {
        self.noise
    }

    pub fn push(&mut self, input: Vec<f64>, output: f64) {
        self.inputs.push(input);
        self.outputs.push(output);
    }
}

/// Gaussian posterior over a fixed list of query points.
#[derive(Debug, Clone, PartialEq)]
pub struct GpPosterior {
    mean: DVector<f64>,
    cov: DMatrix<f64>,
    std: DVector<f64>,
}

impl GpPosterior {
    /// Wraps explicit moments; standard deviations are derived from the
    /// covariance diagonal (clamped at zero).
    pub fn from_moments(mean: DVector<f64>, cov: DMatrix<f64>) -> Self {
        let std = DVector::from_iterator(
            mean.len(),
            (0..mean.len()).map(|i| cov[(i, i)].max(0.0).sqrt()),
        );
        Self { mean, cov, std }
    }

    pub fn len(&self) -> usize {
        self.mean.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mean.is_empty()
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn cov(&self) -> &DMatrix<f64> {
        &self.cov
    }

    /// Pointwise standard deviations, `sqrt(max(K_ii, 0))`.
    pub fn std(&self) -> &DVector<f64> {
        &self.std
    }
}

/// Posterior of a zero-mean GP at `queries` given a dataset (standard noisy
/// Gaussian-process regression). An empty dataset yields the prior.
pub fn posterior(spec: &KernelSpec, data: &GpDataset, queries: &[Vec<f64>]) -> Result<GpPosterior> {
    if queries.is_empty() {
        return Err(Error::Empty("query list"));
    }
    let mut all: Vec<Vec<f64>> = Vec::with_capacity(data.len() + queries.len());
    all.extend(data.inputs().iter().cloned());
    all.extend(queries.iter().cloned());
    let prior_cov = spec.covariance_square(&all)?;
    let prior_mean = DVector::zeros(all.len());
    let obs: Vec<(usize, f64)> = data.outputs().iter().cloned().enumerate().collect();
    let noise = vec![data.noise(); obs.len()];
    let (mean, cov) =
        condition_on_observations(&prior_mean, &prior_cov, &obs, &noise, spec.variance)?;
    // Keep only the query block.
    let t = data.len();
    let q = queries.len();
    let mean_q = DVector::from_iterator(q, (0..q).map(|i| mean[t + i]));
    let cov_q = DMatrix::from_fn(q, q, |i, j| cov[(t + i, t + j)]);
    Ok(GpPosterior::from_moments(mean_q, cov_q))
}

/// A Gaussian prior over all points of a grid, used as the per-iteration
/// conditioning base of the search loop. For single-fidelity search this is
/// the zero-mean kernel prior; the multi-fidelity search substitutes the
/// low-fidelity-conditioned moments.
#[derive(Debug, Clone, PartialEq)]
pub struct GridPrior {
    mean: DVector<f64>,
    cov: DMatrix<f64>,
    jitter_scale: f64,
}

impl GridPrior {
    pub fn from_kernel(spec: &KernelSpec, grid: &GridDomain) -> Result<Self> {
        if spec.dims() != grid.dims() {
            return Err(Error::DimensionMismatch { expected: grid.dims(), got: spec.dims() });
        }
        let pts: Vec<Vec<f64>> = grid.points().collect();
        let cov = spec.covariance_square(&pts)?;
        Ok(Self { mean: DVector::zeros(grid.len()), cov, jitter_scale: spec.variance })
    }

    /// Builds a prior from explicit moments. `jitter_scale` calibrates the
    /// factorization shift ladder and should be on the order of the prior's
    /// largest variance.
    pub fn from_moments(mean: DVector<f64>, cov: DMatrix<f64>, jitter_scale: f64) -> Result<Self> {
        if cov.nrows() != mean.len() || cov.ncols() != mean.len() {
            return Err(Error::BadShape { name: "prior covariance", rows: mean.len(), cols: mean.len() });
        }
        let scale = cov.iter().fold(0.0_f64, |a, v| a.max(v.abs())).max(1e-300);
        let asym = max_asymmetry(&cov);
        if asym > 1e-8 * scale {
            return Err(Error::NotSymmetric(asym));
        }
        Ok(Self { mean, cov, jitter_scale })
    }

    pub fn len(&self) -> usize {
        self.mean.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mean.is_empty()
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn cov(&self) -> &DMatrix<f64> {
        &self.cov
    }

    /// Conditions the prior on noisy observations at grid indices; repeated
    /// indices are legitimate (re-sampling) and kept as separate rows.
    pub fn condition(&self, obs: &[(usize, f64)], noise: f64) -> Result<GpPosterior> {
        if noise < 0.0 {
            return Err(Error::NegativeNoise(noise));
        }
        let per_obs = vec![noise; obs.len()];
        let (mean, cov) =
            condition_on_observations(&self.mean, &self.cov, obs, &per_obs, self.jitter_scale)?;
        Ok(GpPosterior::from_moments(mean, cov))
    }
}

/// Draws one function realization from the zero-mean kernel prior over the
/// grid. Deterministic for a fixed seed.
pub fn sample_prior(spec: &KernelSpec, grid: &GridDomain, seed: u64) -> Result<DVector<f64>> {
    if spec.variance == 0.0 {
        return Ok(DVector::zeros(grid.len()));
    }
    let pts: Vec<Vec<f64>> = grid.points().collect();
    let cov = spec.covariance_square(&pts)?;
    let factor = cholesky_with_jitter(&cov, spec.variance)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let z = DVector::from_iterator(
        grid.len(),
        (0..grid.len()).map(|_| StandardNormal.sample(&mut rng)),
    );
    Ok(factor.chol.l() * z)
}

/// Log marginal likelihood of the outputs under the zero-mean prior with the
/// dataset's noise: `log N(y; 0, K + noise I)`.
pub fn log_marginal_likelihood(spec: &KernelSpec, data: &GpDataset) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::Empty("dataset"));
    }
    let mut k = spec.covariance_square(data.inputs())?;
    for i in 0..k.nrows() {
        k[(i, i)] += data.noise();
    }
    let factor = cholesky_with_jitter(&k, spec.variance)?;
    let y = DVector::from_column_slice(data.outputs());
    let alpha = factor.chol.solve(&y);
    let log_det: f64 = factor.chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>() * 2.0;
    let n = data.len() as f64;
    Ok(-0.5 * y.dot(&alpha) - 0.5 * log_det - 0.5 * n * (2.0 * std::f64::consts::PI).ln())
}
