//! Stationary kernels and covariance-matrix construction.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};

/// Supported stationary kernel families.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelFamily {
    Matern32,
    Matern52,
    SquaredExponential,
}

impl fmt::Display for KernelFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            KernelFamily::Matern32 => "matern32",
            KernelFamily::Matern52 => "matern52",
            KernelFamily::SquaredExponential => "squared_exponential",
        };
        f.write_str(s)
    }
}

impl FromStr for KernelFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "matern32" => Ok(KernelFamily::Matern32),
            "matern52" => Ok(KernelFamily::Matern52),
            "squared_exponential" | "se" | "rbf" => Ok(KernelFamily::SquaredExponential),
            other => Err(Error::Invalid(format!("unknown kernel family `{other}`"))),
        }
    }
}

/// A kernel with output variance `v^2` and per-axis lengthscales.
///
/// `k(x, x) = v^2` exactly, and `|k(x, x')| <= v^2` everywhere.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelSpec {
    pub family: KernelFamily,
    pub variance: f64,
    pub lengthscales: Vec<f64>,
}

impl KernelSpec {
    pub fn new(family: KernelFamily, variance: f64, lengthscales: Vec<f64>) -> Result<Self> {
        if !(variance >= 0.0) {
            return Err(Error::NegativeVariance(variance));
        }
        if lengthscales.is_empty() {
            return Err(Error::Empty("lengthscale vector"));
        }
        for &l in &lengthscales {
            if !(l > 0.0) {
                return Err(Error::NonPositiveLengthscale(l));
            }
        }
        Ok(Self { family, variance, lengthscales })
    }

    /// Same lengthscale on every axis.
    pub fn isotropic(family: KernelFamily, variance: f64, lengthscale: f64, dims: usize) -> Result<Self> {
        Self::new(family, variance, vec![lengthscale; dims])
    }

    pub fn dims(&self) -> usize {
        self.lengthscales.len()
    }

    /// Scaled distance between two points.
    fn scaled_distance(&self, x: &[f64], y: &[f64]) -> f64 {
        x.iter()
            .zip(y)
            .zip(&self.lengthscales)
            .map(|((a, b), l)| {
                let d = (a - b) / l;
                d * d
            })
            .sum::<f64>()
            .sqrt()
    }

    /// Evaluates `k(x, x')`.
    pub fn eval(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        if x.len() != self.dims() || y.len() != self.dims() {
            return Err(Error::DimensionMismatch {
                expected: self.dims(),
                got: if x.len() != self.dims() { x.len() } else { y.len() },
            });
        }
        let r = self.scaled_distance(x, y);
        let shape = match self.family {
            KernelFamily::SquaredExponential => (-0.5 * r * r).exp(),
            KernelFamily::Matern32 => {
                let s = 3.0_f64.sqrt() * r;
                (1.0 + s) * (-s).exp()
            }
            KernelFamily::Matern52 => {
                let s = 5.0_f64.sqrt() * r;
                (1.0 + s + s * s / 3.0) * (-s).exp()
            }
        };
        Ok(self.variance * shape)
    }

    /// Covariance matrix between two point lists: entry `(i, j)` is
    /// `k(a_i, b_j)`.
    pub fn covariance_matrix(&self, a: &[Vec<f64>], b: &[Vec<f64>]) -> Result<DMatrix<f64>> {
        if a.is_empty() || b.is_empty() {
            return Err(Error::Empty("point list"));
        }
        let mut out = DMatrix::zeros(a.len(), b.len());
        for (i, x) in a.iter().enumerate() {
            for (j, y) in b.iter().enumerate() {
                out[(i, j)] = self.eval(x, y)?;
            }
        }
        Ok(out)
    }

    /// Square covariance matrix over one point list, exactly symmetric.
    pub fn covariance_square(&self, pts: &[Vec<f64>]) -> Result<DMatrix<f64>> {
        if pts.is_empty() {
            return Err(Error::Empty("point list"));
        }
        let n = pts.len();
        let mut out = DMatrix::zeros(n, n);
        for i in 0..n {
            out[(i, i)] = self.variance;
            for j in 0..i {
                let v = self.eval(&pts[i], &pts[j])?;
                out[(i, j)] = v;
                out[(j, i)] = v;
            }
        }
        Ok(out)
    }
}

/// Maximum absolute asymmetry `|K - K^T|` of a square matrix.
pub(crate) fn max_asymmetry(m: &DMatrix<f64>) -> f64 {
    let mut worst = 0.0_f64;
    for i in 0..m.nrows() {
        for j in 0..i {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    worst
}

/// Eigenvalues of a symmetric matrix, sorted descending.
pub fn eigenvalues_descending(m: &DMatrix<f64>) -> Result<Vec<f64>> {
    if m.nrows() != m.ncols() {
        return Err(Error::BadShape { name: "eigenvalue input", rows: m.nrows(), cols: m.nrows() });
    }
    let scale = m.iter().fold(0.0_f64, |acc, v| acc.max(v.abs())).max(1e-300);
    let asym = max_asymmetry(m);
    if asym > 1e-10 * scale {
        return Err(Error::NotSymmetric(asym));
    }
    // Work on the symmetrized matrix so tiny representational asymmetry
    // cannot leak into the decomposition.
    let sym = (m + m.transpose()) * 0.5;
    let mut eig: Vec<f64> = SymmetricEigen::new(sym).eigenvalues.iter().cloned().collect();
    eig.sort_by(|a, b| b.partial_cmp(a).expect("eigenvalues are finite"));
    Ok(eig)
}
