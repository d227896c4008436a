//! Matrix-free operators built from sums of Kronecker products of band
//! matrices.
//!
//! A [`TensorOperator`] acts on vectors indexed by a rectangular grid. Grid
//! points are linearized in row-major order, i.e. the first axis varies
//! slowest: on a two-axis grid `(n0, n1)` the point `(a, b)` lives at index
//! `a * n1 + b`. This is the order matching `A ⊗ B` where `A` acts on the
//! first axis.
//!
//! Every factor has a single nonzero band, so the action of one Kronecker
//! term on a grid point reads exactly one source point. [`TensorOperator::apply`]
//! exploits this and accumulates each term in a single strided pass over
//! the grid; no Kronecker product, not even a partial one, is ever formed.

use crate::{Error, Result};

/// Which band of a square matrix holds the nonzero entries.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Band {
    /// Entry `k` sits at `(k, k)`.
    Diagonal,
    /// Entry `k` sits at `(k, k + 1)`.
    Super,
    /// Entry `k` sits at `(k + 1, k)`.
    Sub,
}

/// A square matrix whose only nonzeros lie on one band.
#[derive(Debug, Clone, PartialEq)]
pub struct BandMatrix {
    dim: usize,
    band: Band,
    entries: Vec<f64>,
    identity: bool,
}

impl BandMatrix {
    pub fn new(dim: usize, band: Band, entries: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidArgument("band matrix dimension must be positive".into()));
        }
        let expected = match band {
            Band::Diagonal => dim,
            Band::Super | Band::Sub => dim - 1,
        };
        if entries.len() != expected {
            return Err(Error::BandLength { dim, band, expected, got: entries.len() });
        }
        let identity = band == Band::Diagonal && entries.iter().all(|&e| e == 1.0);
        Ok(Self { dim, band, entries, identity })
    }

    pub fn identity(dim: usize) -> Self {
        Self { dim, band: Band::Diagonal, entries: vec![1.0; dim], identity: true }
    }

    /// `diag(entries)`.
    pub fn diag(entries: Vec<f64>) -> Result<Self> {
        Self::new(entries.len(), Band::Diagonal, entries)
    }

    /// `superdiag(entries)` of dimension `entries.len() + 1`.
    pub fn superdiag(entries: Vec<f64>) -> Result<Self> {
        Self::new(entries.len() + 1, Band::Super, entries)
    }

    /// `subdiag(entries)` of dimension `entries.len() + 1`.
    pub fn subdiag(entries: Vec<f64>) -> Result<Self> {
        Self::new(entries.len() + 1, Band::Sub, entries)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn band(&self) -> Band {
        self.band
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn is_identity(&self) -> bool {
        self.identity
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        match self.band {
            Band::Diagonal if row == col => self.entries[row],
            Band::Super if col == row + 1 => self.entries[row],
            Band::Sub if row == col + 1 => self.entries[col],
            _ => 0.0,
        }
    }

    /// Dense row-major copy.
    pub fn to_dense(&self) -> Vec<f64> {
        let n = self.dim;
        let mut out = vec![0.0; n * n];
        for row in 0..n {
            for col in 0..n {
                out[row * n + col] = self.get(row, col);
            }
        }
        out
    }

    /// Output rows that receive a contribution, as a half-open range, and the
    /// offset from an output row to the source row it reads.
    fn row_span(&self) -> (usize, usize, isize) {
        match self.band {
            Band::Diagonal => (0, self.dim, 0),
            Band::Super => (0, self.dim - 1, 1),
            Band::Sub => (1, self.dim, -1),
        }
    }

    /// Weight applied to output row `row` (which must lie inside `row_span`).
    #[inline]
    fn row_weight(&self, row: usize) -> f64 {
        match self.band {
            Band::Diagonal | Band::Super => self.entries[row],
            Band::Sub => self.entries[row - 1],
        }
    }
}

/// `coefficient * (factors[0] ⊗ factors[1] ⊗ ...)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorTerm {
    pub coefficient: f64,
    pub factors: Vec<BandMatrix>,
}

impl TensorTerm {
    pub fn new(coefficient: f64, factors: Vec<BandMatrix>) -> Result<Self> {
        if factors.is_empty() {
            return Err(Error::InvalidArgument("tensor term needs at least one factor".into()));
        }
        Ok(Self { coefficient, factors })
    }

    pub fn shape(&self) -> Vec<usize> {
        self.factors.iter().map(BandMatrix::dim).collect()
    }
}

/// A weighted sum of Kronecker products sharing one grid shape.
///
/// Immutable once built; `apply` takes `&self`, so one operator may be shared
/// between threads.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorOperator {
    grid_shape: Vec<usize>,
    strides: Vec<usize>,
    terms: Vec<TensorTerm>,
}

impl TensorOperator {
    /// The zero operator on the given grid.
    pub fn zero(grid_shape: Vec<usize>) -> Result<Self> {
        if grid_shape.is_empty() || grid_shape.contains(&0) {
            return Err(Error::InvalidArgument(format!("invalid grid shape {grid_shape:?}")));
        }
        let mut strides = vec![1; grid_shape.len()];
        for axis in (0..grid_shape.len() - 1).rev() {
            strides[axis] = strides[axis + 1] * grid_shape[axis + 1];
        }
        Ok(Self { grid_shape, strides, terms: Vec::new() })
    }

    pub fn identity(grid_shape: Vec<usize>) -> Result<Self> {
        let factors = grid_shape.iter().map(|&d| BandMatrix::identity(d)).collect();
        Self::zero(grid_shape)?.with_term(1.0, factors)
    }

    /// Builds an operator from terms; the grid shape is taken from the first.
    pub fn from_terms(terms: Vec<TensorTerm>) -> Result<Self> {
        let first = terms
            .first()
            .ok_or_else(|| Error::InvalidArgument("operator needs at least one term".into()))?;
        let mut op = Self::zero(first.shape())?;
        for term in terms {
            op.push_term(term)?;
        }
        Ok(op)
    }

    pub fn with_term(mut self, coefficient: f64, factors: Vec<BandMatrix>) -> Result<Self> {
        self.push_term(TensorTerm::new(coefficient, factors)?)?;
        Ok(self)
    }

    pub fn push_term(&mut self, term: TensorTerm) -> Result<()> {
        let shape = term.shape();
        if shape != self.grid_shape {
            return Err(Error::ShapeMismatch { expected: self.grid_shape.clone(), got: shape });
        }
        self.terms.push(term);
        Ok(())
    }

    pub fn grid_shape(&self) -> &[usize] {
        &self.grid_shape
    }

    pub fn terms(&self) -> &[TensorTerm] {
        &self.terms
    }

    /// Number of grid points, i.e. the operator dimension.
    pub fn dim(&self) -> usize {
        self.grid_shape.iter().product()
    }

    /// `a * self + b * Id`.
    pub fn scale_shift(&self, a: f64, b: f64) -> Self {
        let mut out = self.scaled(a);
        if b != 0.0 {
            let factors = self.grid_shape.iter().map(|&d| BandMatrix::identity(d)).collect();
            out.terms.push(TensorTerm { coefficient: b, factors });
        }
        out
    }

    pub fn scaled(&self, a: f64) -> Self {
        let mut out = self.clone();
        for term in &mut out.terms {
            term.coefficient *= a;
        }
        out
    }

    /// `self + other`, concatenating the term lists.
    pub fn sum(&self, other: &Self) -> Result<Self> {
        if other.grid_shape != self.grid_shape {
            return Err(Error::ShapeMismatch {
                expected: self.grid_shape.clone(),
                got: other.grid_shape.clone(),
            });
        }
        let mut out = self.clone();
        out.terms.extend(other.terms.iter().cloned());
        Ok(out)
    }

    /// Checked matrix-vector product.
    pub fn matvec(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: v.len() });
        }
        let mut out = vec![0.0; v.len()];
        self.apply(v, &mut out);
        Ok(out)
    }

    /// Writes `self * x` into `y`. Both slices must have length `dim()`.
    pub fn apply(&self, x: &[f64], y: &mut [f64]) {
        y.fill(0.0);
        self.apply_add(x, y);
    }

    /// Accumulates `self * x` into `y`.
    pub fn apply_add(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.dim(), "input length does not match operator");
        assert_eq!(y.len(), self.dim(), "output length does not match operator");
        for term in &self.terms {
            if term.coefficient != 0.0 {
                self.accumulate(&term.factors, 0, 0, 0, term.coefficient, x, y);
            }
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn accumulate(
        &self,
        factors: &[BandMatrix],
        axis: usize,
        x_base: usize,
        y_base: usize,
        scale: f64,
        x: &[f64],
        y: &mut [f64],
    ) {
        let factor = &factors[axis];
        let (lo, hi, shift) = factor.row_span();
        if lo >= hi {
            return;
        }
        let stride = self.strides[axis];

        if axis + 1 == factors.len() {
            // innermost axis has stride 1
            let src_lo = (lo as isize + shift) as usize;
            let ys = &mut y[y_base + lo..y_base + hi];
            let xs = &x[x_base + src_lo..x_base + src_lo + (hi - lo)];
            if factor.identity {
                for (yi, xi) in ys.iter_mut().zip(xs) {
                    *yi += scale * xi;
                }
            } else {
                let ws = match factor.band {
                    Band::Diagonal | Band::Super => &factor.entries[lo..hi],
                    Band::Sub => &factor.entries[lo - 1..hi - 1],
                };
                for ((yi, xi), wi) in ys.iter_mut().zip(xs).zip(ws) {
                    *yi += scale * wi * xi;
                }
            }
            return;
        }

        for row in lo..hi {
            let weight = if factor.identity { 1.0 } else { factor.row_weight(row) };
            if weight == 0.0 {
                continue;
            }
            let src = (row as isize + shift) as usize;
            self.accumulate(
                factors,
                axis + 1,
                x_base + src * stride,
                y_base + row * stride,
                scale * weight,
                x,
                y,
            );
        }
    }

    /// Dense row-major materialization. Only sensible for small grids.
    pub fn to_dense(&self) -> Vec<f64> {
        let n = self.dim();
        let mut out = vec![0.0; n * n];
        let mut unit = vec![0.0; n];
        let mut col = vec![0.0; n];
        for j in 0..n {
            unit[j] = 1.0;
            self.apply(&unit, &mut col);
            for (i, &value) in col.iter().enumerate() {
                out[i * n + j] = value;
            }
            unit[j] = 0.0;
        }
        out
    }

    /// Linear index of a grid point.
    pub fn index_of(&self, coords: &[usize]) -> usize {
        linear_index(&self.grid_shape, coords)
    }
}

/// Row-major linear index of `coords` on a grid of shape `shape`.
pub fn linear_index(shape: &[usize], coords: &[usize]) -> usize {
    debug_assert_eq!(shape.len(), coords.len());
    coords.iter().zip(shape).fold(0, |acc, (&c, &d)| {
        debug_assert!(c < d, "coordinate {c} out of range for axis of size {d}");
        acc * d + c
    })
}

/// Inverse of [`linear_index`].
pub fn grid_coords(shape: &[usize], mut index: usize) -> Vec<usize> {
    let mut coords = vec![0; shape.len()];
    for axis in (0..shape.len()).rev() {
        coords[axis] = index % shape[axis];
        index /= shape[axis];
    }
    coords
}
