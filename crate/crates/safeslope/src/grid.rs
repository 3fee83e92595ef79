//! Discrete hypercubic search domain.
//!
//! The domain is a uniform grid with `resolution` points per axis. Points are
//! enumerated row-major with axis 0 fastest, so the flat index of a point with
//! per-axis digits `(c_0, ..., c_{n-1})` is `sum_i c_i * r^i`. Edges between
//! axis-adjacent points carry the finite-difference (slope) structure used by
//! the search algorithm.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// A finite hypercubic grid over a box `[lower_i, upper_i]^n`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridDomain {
    dims: usize,
    resolution: usize,
    lower: Vec<f64>,
    upper: Vec<f64>,
    spacing: Vec<f64>,
    len: usize,
}

impl GridDomain {
    /// Builds a grid with `resolution` points per axis over the given bounds.
    ///
    /// Requires `resolution >= 2` and `lower < upper` on every axis.
    pub fn new(resolution: usize, lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if resolution < 2 {
            return Err(Error::ResolutionTooSmall(resolution));
        }
        if lower.len() != upper.len() || lower.is_empty() {
            return Err(Error::DimensionMismatch {
                expected: lower.len().max(1),
                got: upper.len(),
            });
        }
        let dims = lower.len();
        let mut spacing = Vec::with_capacity(dims);
        for axis in 0..dims {
            if lower[axis] >= upper[axis] {
                return Err(Error::InvertedBounds {
                    axis,
                    lower: lower[axis],
                    upper: upper[axis],
                });
            }
            spacing.push((upper[axis] - lower[axis]) / (resolution - 1) as f64);
        }
        let len = resolution
            .checked_pow(dims as u32)
            .ok_or_else(|| Error::Invalid("grid is too large to enumerate".into()))?;
        Ok(Self { dims, resolution, lower, upper, spacing, len })
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    /// Total number of grid points, `r^n`.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn spacing(&self) -> &[f64] {
        &self.spacing
    }

    fn check_index(&self, index: usize) -> Result<()> {
        if index >= self.len {
            return Err(Error::InvalidPointIndex { index, len: self.len });
        }
        Ok(())
    }

    fn check_axis(&self, axis: usize) -> Result<()> {
        if axis >= self.dims {
            return Err(Error::InvalidAxis { axis, dims: self.dims });
        }
        Ok(())
    }

    /// Per-axis integer digits of a point index (axis 0 fastest).
    pub fn digits(&self, index: usize) -> Vec<usize> {
        let mut rem = index;
        let mut out = Vec::with_capacity(self.dims);
        for _ in 0..self.dims {
            out.push(rem % self.resolution);
            rem /= self.resolution;
        }
        out
    }

    /// Flat index of a point given its per-axis digits.
    pub fn index_of(&self, digits: &[usize]) -> usize {
        let mut idx = 0;
        for &d in digits.iter().rev() {
            idx = idx * self.resolution + d;
        }
        idx
    }

    /// Real coordinates of a grid point.
    pub fn coords(&self, index: usize) -> Vec<f64> {
        let digits = self.digits(index);
        (0..self.dims)
            .map(|i| self.lower[i] + digits[i] as f64 * self.spacing[i])
            .collect()
    }

    /// Iterates over all point coordinates in index order.
    pub fn points(&self) -> impl Iterator<Item = Vec<f64>> + '_ {
        (0..self.len).map(|i| self.coords(i))
    }

    /// Euclidean distance between two grid points.
    pub fn distance(&self, a: usize, b: usize) -> f64 {
        let (pa, pb) = (self.coords(a), self.coords(b));
        pa.iter()
            .zip(&pb)
            .map(|(x, y)| (x - y) * (x - y))
            .sum::<f64>()
            .sqrt()
    }

    /// Index stride between axis-adjacent points along `axis`.
    pub fn stride(&self, axis: usize) -> usize {
        self.resolution.pow(axis as u32)
    }

    /// The axis-`axis` grid neighbors of a point: the adjacent points that
    /// differ only in coordinate `axis` by one spacing step. Interior points
    /// have two, boundary points one. The lower neighbor comes first.
    pub fn vicinity(&self, point: usize, axis: usize) -> Result<Vec<usize>> {
        self.check_index(point)?;
        self.check_axis(axis)?;
        let digit = self.digits(point)[axis];
        let stride = self.stride(axis);
        let mut out = Vec::with_capacity(2);
        if digit > 0 {
            out.push(point - stride);
        }
        if digit + 1 < self.resolution {
            out.push(point + stride);
        }
        Ok(out)
    }

    /// Builds the signed incidence matrix for finite differences along `axis`.
    pub fn incidence(&self, axis: usize) -> Result<IncidenceMatrix> {
        self.check_axis(axis)?;
        let stride = self.stride(axis);
        let mut edges = Vec::with_capacity((self.resolution - 1) * self.len / self.resolution);
        let mut edge_of_lower = vec![None; self.len];
        for point in 0..self.len {
            if self.digits(point)[axis] + 1 < self.resolution {
                edge_of_lower[point] = Some(edges.len());
                edges.push((point, point + stride));
            }
        }
        Ok(IncidenceMatrix {
            axis,
            cols: self.len,
            spacing: self.spacing[axis],
            edges,
            edge_of_lower,
        })
    }

    /// Incidence matrices for every axis, in axis order.
    pub fn incidence_all(&self) -> Vec<IncidenceMatrix> {
        (0..self.dims)
            .map(|axis| self.incidence(axis).expect("axis in range"))
            .collect()
    }

    /// Worst-case objective gap introduced by snapping the continuous optimum
    /// to the nearest grid point: `(dx * sqrt(n) / 2) * L` for a uniform grid
    /// with per-axis spacing `dx` and Lipschitz constant `L`.
    pub fn discretization_gap_bound(&self, lipschitz: f64) -> Result<f64> {
        if lipschitz < 0.0 {
            return Err(Error::Invalid(format!(
                "lipschitz constant must be nonnegative (got {lipschitz})"
            )));
        }
        let min = self.spacing.iter().cloned().fold(f64::INFINITY, f64::min);
        let max = self.spacing.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if (max - min).abs() > 1e-12 * max {
            return Err(Error::NonUniformSpacing { min, max });
        }
        Ok(0.5 * max * (self.dims as f64).sqrt() * lipschitz)
    }
}

/// Finite-difference incidence structure along one axis.
///
/// Row `e` of the dense form has `-1/d` at the lower endpoint and `+1/d` at
/// the upper endpoint of edge `e`, where `d` is the axis spacing, so applying
/// it to function values yields slopes directly. Rows are ordered by the flat
/// index of the lower endpoint.
#[derive(Debug, Clone, PartialEq)]
pub struct IncidenceMatrix {
    axis: usize,
    cols: usize,
    spacing: f64,
    edges: Vec<(usize, usize)>,
    edge_of_lower: Vec<Option<usize>>,
}

impl IncidenceMatrix {
    pub fn axis(&self) -> usize {
        self.axis
    }

    /// Number of edges, `(r-1) r^{n-1}`.
    pub fn rows(&self) -> usize {
        self.edges.len()
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    /// Grid spacing along this axis (the edge length `d`).
    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    /// Edge endpoints `(lower, upper)` for a row.
    pub fn edge(&self, row: usize) -> (usize, usize) {
        self.edges[row]
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    /// Row index of the edge whose lower endpoint is `point`, if any.
    pub fn edge_for_lower(&self, point: usize) -> Option<usize> {
        self.edge_of_lower.get(point).copied().flatten()
    }

    /// Row index of the edge joining two points, regardless of order.
    pub fn edge_between(&self, a: usize, b: usize) -> Option<usize> {
        let lower = a.min(b);
        let upper = a.max(b);
        match self.edge_for_lower(lower) {
            Some(row) if self.edges[row] == (lower, upper) => Some(row),
            _ => None,
        }
    }

    /// Applies the matrix to per-point values, producing per-edge slopes.
    pub fn apply(&self, values: &DVector<f64>) -> DVector<f64> {
        assert_eq!(values.len(), self.cols, "value vector does not match grid");
        DVector::from_iterator(
            self.edges.len(),
            self.edges
                .iter()
                .map(|&(lo, hi)| (values[hi] - values[lo]) / self.spacing),
        )
    }

    /// Computes `W K W^T` for a per-point covariance `K`, producing the
    /// per-edge slope covariance.
    pub fn conjugate(&self, k: &DMatrix<f64>) -> DMatrix<f64> {
        assert_eq!(k.nrows(), self.cols, "covariance does not match grid");
        assert_eq!(k.ncols(), self.cols, "covariance does not match grid");
        let m = self.edges.len();
        // Left application: rows of K differenced per edge.
        let mut wk = DMatrix::zeros(m, self.cols);
        for (e, &(lo, hi)) in self.edges.iter().enumerate() {
            for c in 0..self.cols {
                wk[(e, c)] = (k[(hi, c)] - k[(lo, c)]) / self.spacing;
            }
        }
        // Right application: columns of WK differenced per edge.
        let mut out = DMatrix::zeros(m, m);
        for (e, &(lo, hi)) in self.edges.iter().enumerate() {
            for r in 0..m {
                out[(r, e)] = (wk[(r, hi)] - wk[(r, lo)]) / self.spacing;
            }
        }
        out
    }

    /// Dense representation, mainly for tests.
    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut w = DMatrix::zeros(self.edges.len(), self.cols);
        for (e, &(lo, hi)) in self.edges.iter().enumerate() {
            w[(e, lo)] = -1.0 / self.spacing;
            w[(e, hi)] = 1.0 / self.spacing;
        }
        w
    }
}
