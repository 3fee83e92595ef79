//! Slope GPs over grid edges.
//!
//! Finite-difference slopes along each axis are linear images of the function
//! GP: mean `W_i mu` and covariance `W_i K W_i^T`. Their confidence bounds
//! yield a per-edge surrogate for the unknown Lipschitz constant.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::gp::GpPosterior;
use crate::grid::IncidenceMatrix;

/// Per-axis slope distribution over grid edges.
#[derive(Debug, Clone, PartialEq)]
pub struct SlopeAxis {
    mean: DVector<f64>,
    cov: DMatrix<f64>,
    std: DVector<f64>,
}

impl SlopeAxis {
    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn cov(&self) -> &DMatrix<f64> {
        &self.cov
    }

    pub fn std(&self) -> &DVector<f64> {
        &self.std
    }

    pub fn edges(&self) -> usize {
        self.mean.len()
    }
}

/// Slope distributions for all axes, derived from one grid posterior.
#[derive(Debug, Clone, PartialEq)]
pub struct SlopeField {
    axes: Vec<SlopeAxis>,
}

impl SlopeField {
    /// Transforms a posterior over all grid points into per-axis slope
    /// distributions.
    pub fn from_posterior(post: &GpPosterior, incidence: &[IncidenceMatrix]) -> Result<Self> {
        let mut axes = Vec::with_capacity(incidence.len());
        for w in incidence {
            if w.cols() != post.len() {
                return Err(Error::DimensionMismatch { expected: w.cols(), got: post.len() });
            }
            let mean = w.apply(post.mean());
            let cov = w.conjugate(post.cov());
            let std = DVector::from_iterator(
                mean.len(),
                (0..mean.len()).map(|e| cov[(e, e)].max(0.0).sqrt()),
            );
            axes.push(SlopeAxis { mean, cov, std });
        }
        Ok(Self { axes })
    }

    pub fn axes(&self) -> &[SlopeAxis] {
        &self.axes
    }

    pub fn axis(&self, i: usize) -> &SlopeAxis {
        &self.axes[i]
    }

    /// Greatest confidence-bound magnitude per edge:
    /// `max(|mu - sqrt(beta) sigma|, |mu + sqrt(beta) sigma|)`.
    pub fn magnitude_bound(&self, beta_m: f64) -> Vec<DVector<f64>> {
        assert!(beta_m >= 0.0, "beta_m must be nonnegative");
        let half_width = beta_m.sqrt();
        self.axes
            .iter()
            .map(|axis| {
                DVector::from_iterator(
                    axis.edges(),
                    (0..axis.edges()).map(|e| {
                        let lo = axis.mean[e] - half_width * axis.std[e];
                        let hi = axis.mean[e] + half_width * axis.std[e];
                        lo.abs().max(hi.abs())
                    }),
                )
            })
            .collect()
    }
}

/// Running per-edge upper bounds on slope magnitudes, one vector per axis.
/// All entries start at infinity; in nested mode each update takes an
/// elementwise minimum with the incoming magnitude bounds, so entries are
/// non-increasing over iterations.
#[derive(Debug, Clone, PartialEq)]
pub struct SlopeUpperBounds {
    per_axis: Vec<Vec<f64>>,
}

impl SlopeUpperBounds {
    /// All-infinite bounds matching the incidence structure.
    pub fn unbounded(incidence: &[IncidenceMatrix]) -> Self {
        Self { per_axis: incidence.iter().map(|w| vec![f64::INFINITY; w.rows()]).collect() }
    }

    pub fn axes(&self) -> usize {
        self.per_axis.len()
    }

    pub fn axis(&self, i: usize) -> &[f64] {
        &self.per_axis[i]
    }

    pub fn get(&self, axis: usize, edge: usize) -> f64 {
        self.per_axis[axis][edge]
    }

    /// Nested update: elementwise `min` with the new magnitude bounds.
    pub fn update_nested(&mut self, q: &[DVector<f64>]) {
        self.check_shapes(q);
        for (bounds, qa) in self.per_axis.iter_mut().zip(q) {
            for (b, &v) in bounds.iter_mut().zip(qa.iter()) {
                if v < *b {
                    *b = v;
                }
            }
        }
    }

    /// Unnested update: the new magnitude bounds replace the old ones.
    pub fn replace(&mut self, q: &[DVector<f64>]) {
        self.check_shapes(q);
        for (bounds, qa) in self.per_axis.iter_mut().zip(q) {
            bounds.copy_from_slice(qa.as_slice());
        }
    }

    fn check_shapes(&self, q: &[DVector<f64>]) {
        assert_eq!(q.len(), self.per_axis.len(), "axis count mismatch");
        for (bounds, qa) in self.per_axis.iter().zip(q) {
            assert_eq!(qa.len(), bounds.len(), "edge count mismatch");
        }
    }
}
