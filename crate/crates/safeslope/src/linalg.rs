//! Shared dense linear-algebra helpers: jittered Cholesky factorization and
//! Gaussian conditioning on noisy observations.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};

/// Relative size of the first nonzero jitter attempt.
const JITTER_START: f64 = 1e-10;
/// Relative size of the last jitter attempt before giving up.
const JITTER_MAX: f64 = 1e-4;

pub(crate) struct JitteredCholesky {
    pub chol: Cholesky<f64, Dyn>,
    /// Diagonal shift that made the factorization succeed (0 if none needed).
    #[allow(dead_code)]
    pub jitter: f64,
}

/// Cholesky-factorizes a symmetric PSD matrix, retrying with a growing
/// diagonal shift on failure. The shift ladder is scaled by `scale`
/// (typically the kernel variance): first a bare attempt, then
/// `1e-10 * scale` escalating tenfold up to `1e-4 * scale`.
pub(crate) fn cholesky_with_jitter(m: &DMatrix<f64>, scale: f64) -> Result<JitteredCholesky> {
    debug_assert_eq!(m.nrows(), m.ncols());
    if let Some(chol) = Cholesky::new(m.clone()) {
        return Ok(JitteredCholesky { chol, jitter: 0.0 });
    }
    if scale > 0.0 {
        let mut jitter = JITTER_START * scale;
        let limit = JITTER_MAX * scale;
        while jitter <= limit * (1.0 + 1e-12) {
            let mut shifted = m.clone();
            for i in 0..shifted.nrows() {
                shifted[(i, i)] += jitter;
            }
            if let Some(chol) = Cholesky::new(shifted) {
                return Ok(JitteredCholesky { chol, jitter });
            }
            jitter *= 10.0;
        }
    }
    Err(Error::IllConditioned { max_jitter: JITTER_MAX * scale })
}

/// Posterior of a finite-dimensional Gaussian after observing noisy values at
/// a subset of its coordinates.
///
/// `obs` pairs coordinate indices with observed values; repeated indices are
/// kept as separate rows. `noise` holds one noise variance per observation,
/// added to the observed block's diagonal. Returns the posterior mean and
/// covariance over all coordinates of the prior.
pub(crate) fn condition_on_observations(
    prior_mean: &DVector<f64>,
    prior_cov: &DMatrix<f64>,
    obs: &[(usize, f64)],
    noise: &[f64],
    jitter_scale: f64,
) -> Result<(DVector<f64>, DMatrix<f64>)> {
    debug_assert_eq!(noise.len(), obs.len());
    if let Some(&bad) = noise.iter().find(|v| **v < 0.0) {
        return Err(Error::NegativeNoise(bad));
    }
    let n = prior_mean.len();
    debug_assert_eq!(prior_cov.nrows(), n);
    if obs.is_empty() {
        return Ok((prior_mean.clone(), prior_cov.clone()));
    }
    for &(idx, _) in obs {
        if idx >= n {
            return Err(Error::InvalidPointIndex { index: idx, len: n });
        }
    }
    let t = obs.len();
    let mut k_oo = DMatrix::zeros(t, t);
    for (a, &(ia, _)) in obs.iter().enumerate() {
        for (b, &(ib, _)) in obs.iter().enumerate() {
            k_oo[(a, b)] = prior_cov[(ia, ib)];
        }
        k_oo[(a, a)] += noise[a];
    }
    let factor = cholesky_with_jitter(&k_oo, jitter_scale)?;

    // Cross covariance between every coordinate and each observation row.
    let mut cross = DMatrix::zeros(n, t);
    for (b, &(ib, _)) in obs.iter().enumerate() {
        for a in 0..n {
            cross[(a, b)] = prior_cov[(a, ib)];
        }
    }
    let residual = DVector::from_iterator(t, obs.iter().map(|&(ia, y)| y - prior_mean[ia]));

    let alpha = factor.chol.solve(&residual);
    let mean = prior_mean + &cross * alpha;

    let solved = factor.chol.solve(&cross.transpose());
    let mut cov = prior_cov - &cross * solved;
    symmetrize(&mut cov);
    Ok((mean, cov))
}

/// Averages a nearly-symmetric matrix with its transpose in place.
pub(crate) fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in 0..i {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}
