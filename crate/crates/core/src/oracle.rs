//! Similarity oracles: the only access path to the matrix being approximated.

use std::sync::Arc;

use dashmap::DashMap;
use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{Error, Result};

/// A pairwise similarity function over `n` points.
///
/// Implementations must be deterministic and may be evaluated concurrently
/// on distinct pairs.
pub trait SimilarityOracle: Send + Sync {
    fn size(&self) -> usize;

    fn evaluate(&self, i: usize, j: usize) -> Result<f64>;

    /// Producer's claim that `evaluate(i, j) == evaluate(j, i)`.
    fn symmetric_hint(&self) -> bool {
        false
    }
}

impl<T: SimilarityOracle + ?Sized> SimilarityOracle for &T {
    fn size(&self) -> usize {
        (**self).size()
    }
    fn evaluate(&self, i: usize, j: usize) -> Result<f64> {
        (**self).evaluate(i, j)
    }
    fn symmetric_hint(&self) -> bool {
        (**self).symmetric_hint()
    }
}

impl<T: SimilarityOracle + ?Sized> SimilarityOracle for Box<T> {
    fn size(&self) -> usize {
        (**self).size()
    }
    fn evaluate(&self, i: usize, j: usize) -> Result<f64> {
        (**self).evaluate(i, j)
    }
    fn symmetric_hint(&self) -> bool {
        (**self).symmetric_hint()
    }
}

impl<T: SimilarityOracle + ?Sized> SimilarityOracle for Arc<T> {
    fn size(&self) -> usize {
        (**self).size()
    }
    fn evaluate(&self, i: usize, j: usize) -> Result<f64> {
        (**self).evaluate(i, j)
    }
    fn symmetric_hint(&self) -> bool {
        (**self).symmetric_hint()
    }
}

/// Evaluates and rejects NaN/Inf.
pub fn checked_evaluate<O: SimilarityOracle + ?Sized>(oracle: &O, i: usize, j: usize) -> Result<f64> {
    let value = oracle.evaluate(i, j)?;
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::NonFinite { i, j, value })
    }
}

/// Fully materialized matrix held in memory.
#[derive(Debug, Clone)]
pub struct DenseOracle {
    matrix: DMatrix<f64>,
    symmetric: bool,
}

impl DenseOracle {
    /// Relative tolerance of the symmetry scan, against `max |entry|`.
    pub const SYMMETRY_TOL: f64 = 1e-8;

    pub fn new(matrix: DMatrix<f64>) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::Format(format!(
                "matrix is {}x{}, expected square",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        if matrix.nrows() == 0 {
            return Err(Error::Format("matrix is empty".into()));
        }
        if let Some(pos) = matrix.iter().position(|v| !v.is_finite()) {
            let n = matrix.nrows();
            return Err(Error::Format(format!(
                "non-finite entry at ({}, {})",
                pos % n,
                pos / n
            )));
        }
        let symmetric = is_symmetric(&matrix, Self::SYMMETRY_TOL);
        Ok(Self { matrix, symmetric })
    }

    /// Skips validation; for matrices symmetric by construction.
    pub(crate) fn from_symmetric(matrix: DMatrix<f64>) -> Self {
        Self { matrix, symmetric: true }
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.matrix
    }

    /// `(K + Kᵀ)/2` as a new stored oracle; a no-op copy when already symmetric.
    pub fn symmetrized(&self) -> DenseOracle {
        if self.symmetric {
            return self.clone();
        }
        let n = self.matrix.nrows();
        let m = DMatrix::from_fn(n, n, |i, j| 0.5 * (self.matrix[(i, j)] + self.matrix[(j, i)]));
        Self::from_symmetric(m)
    }
}

impl SimilarityOracle for DenseOracle {
    fn size(&self) -> usize {
        self.matrix.nrows()
    }

    fn evaluate(&self, i: usize, j: usize) -> Result<f64> {
        Ok(self.matrix[(i, j)])
    }

    fn symmetric_hint(&self) -> bool {
        self.symmetric
    }
}

pub(crate) fn is_symmetric(m: &DMatrix<f64>, rel_tol: f64) -> bool {
    let scale = m.amax();
    let n = m.nrows();
    (0..n).all(|j| (j + 1..n).all(|i| (m[(i, j)] - m[(j, i)]).abs() <= rel_tol * scale))
}

/// Oracle backed by a closure.
pub struct FnOracle<F> {
    n: usize,
    symmetric: bool,
    f: F,
}

impl<F> FnOracle<F>
where
    F: Fn(usize, usize) -> f64 + Send + Sync,
{
    pub fn new(n: usize, symmetric: bool, f: F) -> Self {
        Self { n, symmetric, f }
    }
}

impl<F> SimilarityOracle for FnOracle<F>
where
    F: Fn(usize, usize) -> f64 + Send + Sync,
{
    fn size(&self) -> usize {
        self.n
    }
    fn evaluate(&self, i: usize, j: usize) -> Result<f64> {
        Ok((self.f)(i, j))
    }
    fn symmetric_hint(&self) -> bool {
        self.symmetric
    }
}

/// Wraps an oracle as `½(Δ(i,j) + Δ(j,i))`.
pub struct Symmetrized<O> {
    inner: O,
}

pub fn symmetrize_oracle<O: SimilarityOracle>(inner: O) -> Symmetrized<O> {
    Symmetrized { inner }
}

impl<O: SimilarityOracle> Symmetrized<O> {
    pub fn inner(&self) -> &O {
        &self.inner
    }
}

impl<O: SimilarityOracle> SimilarityOracle for Symmetrized<O> {
    fn size(&self) -> usize {
        self.inner.size()
    }

    fn evaluate(&self, i: usize, j: usize) -> Result<f64> {
        if i == j {
            return self.inner.evaluate(i, i);
        }
        Ok(0.5 * (self.inner.evaluate(i, j)? + self.inner.evaluate(j, i)?))
    }

    fn symmetric_hint(&self) -> bool {
        true
    }
}

/// Memoizing wrapper that counts distinct pairs sent to the inner oracle.
///
/// Pairs are keyed unordered when the inner oracle claims symmetry.
pub struct CountingOracle<O> {
    inner: O,
    unordered: bool,
    cache: DashMap<(usize, usize), f64>,
}

pub fn counting_oracle<O: SimilarityOracle>(inner: O) -> CountingOracle<O> {
    let unordered = inner.symmetric_hint();
    CountingOracle { inner, unordered, cache: DashMap::new() }
}

impl<O: SimilarityOracle> CountingOracle<O> {
    /// Distinct pairs evaluated on the inner oracle so far.
    pub fn calls(&self) -> usize {
        self.cache.len()
    }

    pub fn inner(&self) -> &O {
        &self.inner
    }

    fn key(&self, i: usize, j: usize) -> (usize, usize) {
        if self.unordered && j < i {
            (j, i)
        } else {
            (i, j)
        }
    }
}

impl<O: SimilarityOracle> SimilarityOracle for CountingOracle<O> {
    fn size(&self) -> usize {
        self.inner.size()
    }

    fn evaluate(&self, i: usize, j: usize) -> Result<f64> {
        let key = self.key(i, j);
        if let Some(v) = self.cache.get(&key) {
            return Ok(*v);
        }
        let value = checked_evaluate(&self.inner, key.0, key.1)?;
        self.cache.insert(key, value);
        Ok(value)
    }

    fn symmetric_hint(&self) -> bool {
        self.inner.symmetric_hint()
    }
}

/// Row selection for [`gather_block`].
#[derive(Debug, Clone, Copy)]
pub enum Rows<'a> {
    All,
    Indices(&'a [usize]),
}

impl Rows<'_> {
    fn len(&self, n: usize) -> usize {
        match self {
            Rows::All => n,
            Rows::Indices(idx) => idx.len(),
        }
    }

    fn index(&self, r: usize) -> usize {
        match self {
            Rows::All => r,
            Rows::Indices(idx) => idx[r],
        }
    }
}

/// Dense `|rows| x |cols|` block of oracle values in sample order.
pub fn gather_block<O: SimilarityOracle + ?Sized>(
    oracle: &O,
    rows: Rows<'_>,
    cols: &[usize],
) -> Result<DMatrix<f64>> {
    let n = oracle.size();
    let in_range = |idx: &[usize]| idx.iter().all(|&i| i < n);
    if let Rows::Indices(idx) = rows {
        if !in_range(idx) {
            return Err(Error::param(format!("row index out of range for n = {n}")));
        }
    }
    if !in_range(cols) {
        return Err(Error::param(format!("column index out of range for n = {n}")));
    }
    let nrows = rows.len(n);
    let columns: Vec<Result<Vec<f64>>> = cols
        .par_iter()
        .map(|&j| (0..nrows).map(|r| checked_evaluate(oracle, rows.index(r), j)).collect())
        .collect();
    let mut data = Vec::with_capacity(nrows * cols.len());
    for column in columns {
        data.extend(column?);
    }
    Ok(DMatrix::from_vec(nrows, cols.len(), data))
}

/// Every entry of the oracle as a dense matrix. O(n²) evaluations.
pub fn materialize<O: SimilarityOracle + ?Sized>(oracle: &O) -> Result<DMatrix<f64>> {
    let all: Vec<usize> = (0..oracle.size()).collect();
    gather_block(oracle, Rows::All, &all)
}
