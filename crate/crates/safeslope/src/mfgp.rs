//! AR-1 (linear auto-regressive) multi-fidelity Gaussian process.
//!
//! The high-fidelity function is modeled as `f = rho * f_L + delta`, where
//! `f_L` is a GP with kernel `k_L` and `delta` an independent error GP with
//! kernel `k_delta`. Stacking low-fidelity inputs before high-fidelity ones,
//! the joint covariance is
//!
//! ```text
//! [ K_LL            rho K_LH               ]
//! [ rho K_HL        rho^2 K_HH + Kd_HH     ]
//! ```
//!
//! with all `K` blocks built from `k_L` and `Kd` from `k_delta`. Two nested
//! fidelity levels are supported; deeper chains compose models of this type
//! but are not provided here.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::gp::{GpDataset, GpPosterior, GridPrior};
use crate::grid::GridDomain;
use crate::kernel::KernelSpec;
use crate::linalg::{cholesky_with_jitter, condition_on_observations, symmetrize};

/// Two-fidelity AR-1 model: kernels for the low-fidelity GP and the error GP,
/// the scaling `rho`, and per-fidelity observation noise variances.
#[derive(Debug, Clone, PartialEq)]
pub struct Ar1Model {
    pub low_kernel: KernelSpec,
    pub error_kernel: KernelSpec,
    pub rho: f64,
    pub low_noise: f64,
    pub high_noise: f64,
}

impl Ar1Model {
    pub fn new(
        low_kernel: KernelSpec,
        error_kernel: KernelSpec,
        rho: f64,
        low_noise: f64,
        high_noise: f64,
    ) -> Result<Self> {
        if low_kernel.dims() != error_kernel.dims() {
            return Err(Error::DimensionMismatch {
                expected: low_kernel.dims(),
                got: error_kernel.dims(),
            });
        }
        if low_noise < 0.0 {
            return Err(Error::NegativeNoise(low_noise));
        }
        if high_noise < 0.0 {
            return Err(Error::NegativeNoise(high_noise));
        }
        Ok(Self { low_kernel, error_kernel, rho, low_noise, high_noise })
    }

    pub fn dims(&self) -> usize {
        self.low_kernel.dims()
    }

    /// High-fidelity prior variance: the diagonal of the joint covariance's
    /// lower-right block, `rho^2 v_L^2 + v_d^2`.
    pub fn prior_variance(&self) -> f64 {
        self.rho * self.rho * self.low_kernel.variance + self.error_kernel.variance
    }

    /// Variance constant used by the multi-fidelity convergence-time bound,
    /// `rho v_L^2 + v_d^2`. Note this differs from [`Self::prior_variance`]
    /// unless `rho = 1`; both conventions are in circulation, so both are
    /// exposed.
    pub fn convergence_variance(&self) -> f64 {
        self.rho * self.low_kernel.variance + self.error_kernel.variance
    }

    /// Joint covariance over stacked `[X_L; X_H]` inputs. `x_high` may be
    /// empty, in which case this is just the low-fidelity block.
    pub fn joint_covariance(&self, x_low: &[Vec<f64>], x_high: &[Vec<f64>]) -> Result<DMatrix<f64>> {
        if x_low.is_empty() {
            return Err(Error::Empty("low-fidelity input list"));
        }
        let nl = x_low.len();
        let nh = x_high.len();
        let mut out = DMatrix::zeros(nl + nh, nl + nh);
        let k_ll = self.low_kernel.covariance_square(x_low)?;
        out.view_mut((0, 0), (nl, nl)).copy_from(&k_ll);
        if nh > 0 {
            let k_lh = self.low_kernel.covariance_matrix(x_low, x_high)?;
            let scaled = &k_lh * self.rho;
            out.view_mut((0, nl), (nl, nh)).copy_from(&scaled);
            out.view_mut((nl, 0), (nh, nl)).copy_from(&scaled.transpose());
            let k_hh = self.low_kernel.covariance_square(x_high)?;
            let kd_hh = self.error_kernel.covariance_square(x_high)?;
            let block = k_hh * (self.rho * self.rho) + kd_hh;
            out.view_mut((nl, nl), (nh, nh)).copy_from(&block);
        }
        Ok(out)
    }

    /// Posterior of the high-fidelity function at `queries`, conditioned on
    /// both datasets with their respective noise variances.
    pub fn posterior(
        &self,
        low: &GpDataset,
        high: &GpDataset,
        queries: &[Vec<f64>],
    ) -> Result<GpPosterior> {
        if low.is_empty() {
            return Err(Error::Empty("low-fidelity dataset"));
        }
        if queries.is_empty() {
            return Err(Error::Empty("query list"));
        }
        // Joint prior over [X_L ; X_H ; queries], with the query points
        // treated as unobserved high-fidelity coordinates.
        let mut high_points: Vec<Vec<f64>> = Vec::with_capacity(high.len() + queries.len());
        high_points.extend(high.inputs().iter().cloned());
        high_points.extend(queries.iter().cloned());
        let prior_cov = self.joint_covariance(low.inputs(), &high_points)?;
        let total = low.len() + high_points.len();
        let prior_mean = DVector::zeros(total);

        let mut obs = Vec::with_capacity(low.len() + high.len());
        let mut noise = Vec::with_capacity(low.len() + high.len());
        for (i, &y) in low.outputs().iter().enumerate() {
            obs.push((i, y));
            noise.push(low.noise());
        }
        for (j, &y) in high.outputs().iter().enumerate() {
            obs.push((low.len() + j, y));
            noise.push(high.noise());
        }
        let scale = self.low_kernel.variance.max(self.prior_variance());
        let (mean, cov) = condition_on_observations(&prior_mean, &prior_cov, &obs, &noise, scale)?;

        let q0 = low.len() + high.len();
        let q = queries.len();
        let mean_q = DVector::from_iterator(q, (0..q).map(|i| mean[q0 + i]));
        let cov_q = DMatrix::from_fn(q, q, |i, j| cov[(q0 + i, q0 + j)]);
        Ok(GpPosterior::from_moments(mean_q, cov_q))
    }

    /// Grid prior for the high-fidelity function after absorbing a full
    /// low-fidelity sweep: `y_low[i]` is the noisy low-fidelity observation at
    /// grid point `i`. Conditioning this prior on high-fidelity observations
    /// reproduces [`Self::posterior`] with the grid as the query set, at a
    /// fraction of the per-iteration cost.
    pub fn grid_prior_given_low(&self, grid: &GridDomain, y_low: &[f64]) -> Result<GridPrior> {
        if self.dims() != grid.dims() {
            return Err(Error::DimensionMismatch { expected: grid.dims(), got: self.dims() });
        }
        if y_low.len() != grid.len() {
            return Err(Error::DimensionMismatch { expected: grid.len(), got: y_low.len() });
        }
        let pts: Vec<Vec<f64>> = grid.points().collect();
        let k_ll = self.low_kernel.covariance_square(&pts)?;
        let mut gram = k_ll.clone();
        for i in 0..gram.nrows() {
            gram[(i, i)] += self.low_noise;
        }
        let factor = cholesky_with_jitter(&gram, self.low_kernel.variance)?;

        let y = DVector::from_column_slice(y_low);
        let alpha = factor.chol.solve(&y);
        let mean = &k_ll * alpha * self.rho;

        // rho^2 (K_LL - K_LL (K_LL + noise I)^-1 K_LL) + K_delta
        let solved = factor.chol.solve(&k_ll);
        let mut low_cond = &k_ll - &k_ll * solved;
        symmetrize(&mut low_cond);
        let kd = self.error_kernel.covariance_square(&pts)?;
        let mut cov = low_cond * (self.rho * self.rho) + kd;
        symmetrize(&mut cov);

        let scale = cov
            .diagonal()
            .iter()
            .fold(0.0_f64, |a, v| a.max(*v))
            .max(self.error_kernel.variance);
        GridPrior::from_moments(mean, cov, scale)
    }

    /// Numerically verifies that with nested inputs (`X_H` a subset of a
    /// duplicate-free `X_L`) and noise-free low fidelity, the covariance of
    /// `f(X_H)` conditioned on `f_L(X_L)` collapses to the error-GP covariance
    /// `k_delta(X_H, X_H)`. Computed by brute-force conditioning through an
    /// explicit inverse; returns the conditional covariance and its largest
    /// absolute deviation from `k_delta(X_H, X_H)`.
    pub fn conditional_covariance_check(
        &self,
        x_low: &[Vec<f64>],
        x_high: &[Vec<f64>],
    ) -> Result<ConditionalCovarianceCheck> {
        if self.low_noise != 0.0 {
            return Err(Error::NoiseNotZero(self.low_noise));
        }
        if x_low.is_empty() || x_high.is_empty() {
            return Err(Error::Empty("input list"));
        }
        for i in 0..x_low.len() {
            for j in 0..i {
                if x_low[i] == x_low[j] {
                    return Err(Error::DuplicateInput(j, i));
                }
            }
        }
        for h in x_high {
            if !x_low.contains(h) {
                return Err(Error::NotNested);
            }
        }

        let sigma_ll = self.low_kernel.covariance_square(x_low)?;
        let cross = self.low_kernel.covariance_matrix(x_low, x_high)? * self.rho;
        let sigma_hh = self.low_kernel.covariance_square(x_high)? * (self.rho * self.rho)
            + self.error_kernel.covariance_square(x_high)?;
        let inv = sigma_ll
            .try_inverse()
            .ok_or(Error::IllConditioned { max_jitter: 0.0 })?;
        let mut conditional = sigma_hh - cross.transpose() * inv * &cross;
        symmetrize(&mut conditional);

        let kd = self.error_kernel.covariance_square(x_high)?;
        let max_deviation = (&conditional - &kd)
            .iter()
            .fold(0.0_f64, |a, v| a.max(v.abs()));
        Ok(ConditionalCovarianceCheck { conditional, max_deviation })
    }
}

/// Result of [`Ar1Model::conditional_covariance_check`].
#[derive(Debug, Clone)]
pub struct ConditionalCovarianceCheck {
    pub conditional: DMatrix<f64>,
    pub max_deviation: f64,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gp;
    use crate::kernel::KernelFamily;
    use approx::assert_relative_eq;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn model(rho: f64, v_low: f64, v_err: f64) -> Ar1Model {
        Ar1Model::new(
            KernelSpec::isotropic(KernelFamily::Matern52, v_low, 1.0, 1).unwrap(),
            KernelSpec::isotropic(KernelFamily::Matern52, v_err, 0.7, 1).unwrap(),
            rho,
            0.0,
            0.0,
        )
        .unwrap()
    }

    #[test]
    fn joint_covariance_without_high_points() {
        let m = model(0.8, 1.2, 0.5);
        let x_low = vec![vec![0.0], vec![1.0]];
        let joint = m.joint_covariance(&x_low, &[]).unwrap();
        let k_ll = m.low_kernel.covariance_square(&x_low).unwrap();
        assert_eq!(joint, k_ll);
    }

    #[test]
    fn rho_zero_decouples_fidelities() {
        let m = model(0.0, 1.0, 0.6);
        let x_low = vec![vec![0.0], vec![0.5]];
        let x_high = vec![vec![0.25]];
        let joint = m.joint_covariance(&x_low, &x_high).unwrap();
        assert_eq!(joint[(0, 2)], 0.0);
        assert_eq!(joint[(1, 2)], 0.0);
        assert_eq!(joint[(2, 2)], 0.6);
    }

    #[test]
    fn joint_covariance_matches_hand_expansion() {
        let m = model(0.7, 1.3, 0.4);
        let x_low = vec![vec![0.0], vec![1.0]];
        let x_high = vec![vec![0.5]];
        let joint = m.joint_covariance(&x_low, &x_high).unwrap();
        let kl = |a: f64, b: f64| m.low_kernel.eval(&[a], &[b]).unwrap();
        let kd = |a: f64, b: f64| m.error_kernel.eval(&[a], &[b]).unwrap();
        assert_relative_eq!(joint[(0, 0)], kl(0.0, 0.0), max_relative = 1e-15);
        assert_relative_eq!(joint[(0, 1)], kl(0.0, 1.0), max_relative = 1e-15);
        assert_relative_eq!(joint[(0, 2)], 0.7 * kl(0.0, 0.5), max_relative = 1e-15);
        assert_relative_eq!(joint[(1, 2)], 0.7 * kl(1.0, 0.5), max_relative = 1e-15);
        assert_relative_eq!(
            joint[(2, 2)],
            0.49 * kl(0.5, 0.5) + kd(0.5, 0.5),
            max_relative = 1e-15
        );
        assert_eq!(joint[(2, 0)], joint[(0, 2)]);
    }

    #[test]
    fn degenerate_error_gp_reduces_to_low_posterior_mean() {
        let m = Ar1Model::new(
            KernelSpec::isotropic(KernelFamily::Matern52, 1.0, 1.0, 1).unwrap(),
            KernelSpec::isotropic(KernelFamily::Matern52, 0.0, 1.0, 1).unwrap(),
            1.0,
            1e-8,
            1e-8,
        )
        .unwrap();
        let low = GpDataset::new(vec![vec![0.0], vec![1.0], vec![2.0]], vec![0.5, -0.3, 0.9], 1e-8)
            .unwrap();
        let high = GpDataset::empty(1e-8);
        let queries = vec![vec![0.4], vec![1.6]];
        let post = m.posterior(&low, &high, &queries).unwrap();
        let single = gp::posterior(&m.low_kernel, &low, &queries).unwrap();
        for i in 0..queries.len() {
            assert_relative_eq!(post.mean()[i], single.mean()[i], max_relative = 1e-6, epsilon = 1e-9);
        }
    }

    #[test]
    fn rho_zero_posterior_ignores_low_data() {
        let m = Ar1Model::new(
            KernelSpec::isotropic(KernelFamily::Matern52, 1.0, 1.0, 1).unwrap(),
            KernelSpec::isotropic(KernelFamily::Matern52, 0.8, 0.6, 1).unwrap(),
            0.0,
            1e-6,
            1e-4,
        )
        .unwrap();
        let low =
            GpDataset::new(vec![vec![0.1], vec![0.9]], vec![5.0, -5.0], 1e-6).unwrap();
        let high = GpDataset::new(vec![vec![0.5]], vec![0.7], 1e-4).unwrap();
        let queries = vec![vec![0.3], vec![0.8]];
        let post = m.posterior(&low, &high, &queries).unwrap();
        let reference = gp::posterior(&m.error_kernel, &high, &queries).unwrap();
        for i in 0..queries.len() {
            assert_relative_eq!(post.mean()[i], reference.mean()[i], max_relative = 1e-8, epsilon = 1e-12);
            assert_relative_eq!(post.std()[i], reference.std()[i], max_relative = 1e-6, epsilon = 1e-9);
        }
    }

    #[test]
    fn rho_zero_empty_high_returns_error_gp_prior() {
        let m = Ar1Model::new(
            KernelSpec::isotropic(KernelFamily::Matern32, 1.0, 1.0, 1).unwrap(),
            KernelSpec::isotropic(KernelFamily::Matern32, 0.9, 0.5, 1).unwrap(),
            0.0,
            1e-8,
            1e-4,
        )
        .unwrap();
        let low = GpDataset::new(vec![vec![0.0]], vec![3.0], 1e-8).unwrap();
        let high = GpDataset::empty(1e-4);
        let queries = vec![vec![0.2], vec![0.7]];
        let post = m.posterior(&low, &high, &queries).unwrap();
        for i in 0..queries.len() {
            assert!(post.mean()[i].abs() < 1e-12);
            assert_relative_eq!(post.std()[i], 0.9_f64.sqrt(), max_relative = 1e-9);
        }
    }

    /// Brute-force oracle: build the full joint covariance entry by entry and
    /// condition through an explicit inverse.
    fn dense_mf_oracle(
        m: &Ar1Model,
        low: &GpDataset,
        high: &GpDataset,
        queries: &[Vec<f64>],
    ) -> (DVector<f64>, DMatrix<f64>) {
        let nl = low.len();
        let nh = high.len();
        let nq = queries.len();
        let total = nl + nh + nq;
        let fid = |i: usize| i >= nl; // false = low, true = high
        let point = |i: usize| -> &[f64] {
            if i < nl {
                &low.inputs()[i]
            } else if i < nl + nh {
                &high.inputs()[i - nl]
            } else {
                &queries[i - nl - nh]
            }
        };
        let mut joint = DMatrix::zeros(total, total);
        for i in 0..total {
            for j in 0..total {
                let kl = m.low_kernel.eval(point(i), point(j)).unwrap();
                joint[(i, j)] = match (fid(i), fid(j)) {
                    (false, false) => kl,
                    (false, true) | (true, false) => m.rho * kl,
                    (true, true) => {
                        m.rho * m.rho * kl + m.error_kernel.eval(point(i), point(j)).unwrap()
                    }
                };
            }
        }
        let mut sigma_oo = joint.view((0, 0), (nl + nh, nl + nh)).into_owned();
        for i in 0..nl + nh {
            sigma_oo[(i, i)] += if i < nl { low.noise() } else { high.noise() };
        }
        let cross = joint.view((nl + nh, 0), (nq, nl + nh)).into_owned();
        let sigma_qq = joint.view((nl + nh, nl + nh), (nq, nq)).into_owned();
        let inv = sigma_oo.try_inverse().unwrap();
        let mut y = DVector::zeros(nl + nh);
        for (i, &v) in low.outputs().iter().enumerate() {
            y[i] = v;
        }
        for (j, &v) in high.outputs().iter().enumerate() {
            y[nl + j] = v;
        }
        let mean = &cross * &inv * y;
        let cov = sigma_qq - &cross * inv * cross.transpose();
        (mean, cov)
    }

    #[test]
    fn posterior_matches_dense_joint_conditioning() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let m = Ar1Model::new(
            KernelSpec::isotropic(KernelFamily::Matern52, 1.2, 0.9, 1).unwrap(),
            KernelSpec::isotropic(KernelFamily::SquaredExponential, 0.5, 0.6, 1).unwrap(),
            0.85,
            1e-6,
            1e-3,
        )
        .unwrap();
        let low_in: Vec<Vec<f64>> = (0..5).map(|i| vec![i as f64 * 0.5 + rng.gen_range(-0.1..0.1)]).collect();
        let low_out: Vec<f64> = (0..5).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let high_in = vec![low_in[1].clone(), low_in[3].clone()];
        let high_out = vec![rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
        let low = GpDataset::new(low_in, low_out, 1e-6).unwrap();
        let high = GpDataset::new(high_in, high_out, 1e-3).unwrap();
        let queries: Vec<Vec<f64>> = (0..3).map(|_| vec![rng.gen_range(0.0..2.5)]).collect();

        let post = m.posterior(&low, &high, &queries).unwrap();
        let (mean, cov) = dense_mf_oracle(&m, &low, &high, &queries);
        for i in 0..queries.len() {
            assert_relative_eq!(post.mean()[i], mean[i], max_relative = 1e-8, epsilon = 1e-10);
            for j in 0..queries.len() {
                assert_relative_eq!(post.cov()[(i, j)], cov[(i, j)], max_relative = 1e-8, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn grid_prior_route_matches_joint_posterior() {
        let grid = GridDomain::new(7, vec![0.0], vec![3.0]).unwrap();
        let m = Ar1Model::new(
            KernelSpec::isotropic(KernelFamily::Matern52, 1.0, 1.0, 1).unwrap(),
            KernelSpec::isotropic(KernelFamily::Matern52, 0.4, 0.8, 1).unwrap(),
            0.9,
            1e-8,
            1e-4,
        )
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let y_low: Vec<f64> = (0..grid.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let high_obs = vec![(2usize, 0.3), (5usize, -0.6), (2usize, 0.35)];

        let prior = m.grid_prior_given_low(&grid, &y_low).unwrap();
        let fast = prior.condition(&high_obs, m.high_noise).unwrap();

        let low = GpDataset::new(grid.points().collect(), y_low.clone(), m.low_noise).unwrap();
        let high = GpDataset::new(
            high_obs.iter().map(|&(i, _)| grid.coords(i)).collect(),
            high_obs.iter().map(|&(_, y)| y).collect(),
            m.high_noise,
        )
        .unwrap();
        let queries: Vec<Vec<f64>> = grid.points().collect();
        let slow = m.posterior(&low, &high, &queries).unwrap();
        for i in 0..grid.len() {
            assert_relative_eq!(fast.mean()[i], slow.mean()[i], max_relative = 1e-7, epsilon = 1e-9);
            assert_relative_eq!(fast.std()[i], slow.std()[i], max_relative = 1e-5, epsilon = 1e-7);
        }
    }

    #[test]
    fn conditional_covariance_single_point() {
        let m = model(0.9, 1.1, 0.37);
        let x = vec![vec![0.4]];
        let check = m.conditional_covariance_check(&x, &x).unwrap();
        assert_relative_eq!(check.conditional[(0, 0)], 0.37, max_relative = 1e-9);
        assert!(check.max_deviation <= 1e-6 * 0.37);
    }

    #[test]
    fn conditional_covariance_nested_subset() {
        let m = model(0.75, 1.0, 0.5);
        let x_low = vec![vec![0.0], vec![1.0], vec![2.0], vec![3.0]];
        let x_high = vec![vec![1.0], vec![3.0]];
        let check = m.conditional_covariance_check(&x_low, &x_high).unwrap();
        assert!(
            check.max_deviation <= 1e-6 * m.error_kernel.variance,
            "deviation {} too large",
            check.max_deviation
        );
    }

    #[test]
    fn conditional_covariance_rejects_bad_preconditions() {
        let m = model(0.75, 1.0, 0.5);
        let x_low = vec![vec![0.0], vec![1.0]];
        assert!(matches!(
            m.conditional_covariance_check(&x_low, &[vec![0.5]]),
            Err(Error::NotNested)
        ));
        let dup = vec![vec![0.0], vec![0.0]];
        assert!(matches!(
            m.conditional_covariance_check(&dup, &[vec![0.0]]),
            Err(Error::DuplicateInput(0, 1))
        ));
        let noisy = Ar1Model { low_noise: 1e-8, ..model(0.75, 1.0, 0.5) };
        assert!(matches!(
            noisy.conditional_covariance_check(&x_low, &[vec![0.0]]),
            Err(Error::NoiseNotZero(_))
        ));
    }

    #[test]
    fn high_fidelity_observation_never_increases_variance() {
        let m = Ar1Model::new(
            KernelSpec::isotropic(KernelFamily::Matern52, 1.0, 1.0, 1).unwrap(),
            KernelSpec::isotropic(KernelFamily::Matern52, 0.5, 0.8, 1).unwrap(),
            0.8,
            1e-8,
            1e-4,
        )
        .unwrap();
        let low = GpDataset::new(
            vec![vec![0.0], vec![1.0], vec![2.0]],
            vec![0.2, -0.1, 0.4],
            1e-8,
        )
        .unwrap();
        let queries: Vec<Vec<f64>> = (0..9).map(|i| vec![i as f64 * 0.25]).collect();
        let before = m.posterior(&low, &GpDataset::empty(1e-4), &queries).unwrap();
        let high = GpDataset::new(vec![vec![1.25]], vec![0.1], 1e-4).unwrap();
        let after = m.posterior(&low, &high, &queries).unwrap();
        for i in 0..queries.len() {
            assert!(after.std()[i] <= before.std()[i] + 1e-9);
        }
    }
}
