//! Factored approximations and on-demand reconstruction.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::sample::IndexSample;

/// A factored n×n approximation whose entries can be materialized on demand.
pub trait Approximation {
    /// Side length n of the approximated matrix.
    fn size(&self) -> usize;

    /// Upper bound on the rank of the approximation.
    fn rank_bound(&self) -> usize;

    /// Entries at `rows × cols`, indices assumed in range.
    fn block(&self, rows: &[usize], cols: &[usize]) -> DMatrix<f64>;

    /// The full n×n matrix. O(n²·rank).
    fn to_dense(&self) -> DMatrix<f64>;

    fn entry(&self, i: usize, j: usize) -> f64 {
        self.block(&[i], &[j])[(0, 0)]
    }
}

/// Entries of the approximation at the requested positions.
pub fn reconstruct<A: Approximation + ?Sized>(factor: &A, rows: &[usize], cols: &[usize]) -> Result<DMatrix<f64>> {
    let n = factor.size();
    if rows.iter().chain(cols).any(|&i| i >= n) {
        return Err(Error::param(format!("index out of range for n = {n}")));
    }
    Ok(factor.block(rows, cols))
}

fn mirror_upper(mut m: DMatrix<f64>) -> DMatrix<f64> {
    let n = m.nrows();
    for j in 0..n {
        for i in j + 1..n {
            m[(i, j)] = m[(j, i)];
        }
    }
    m
}

/// `Σ_k a[i,k]·w[k]·a[j,k]` over the canonical order `(min, max)` so that
/// swapped arguments give bitwise-equal results.
fn weighted_dot(a: &DMatrix<f64>, w: &[f64], i: usize, j: usize) -> f64 {
    let (p, q) = if i <= j { (i, j) } else { (j, i) };
    (0..a.ncols()).map(|k| a[(p, k)] * w[k] * a[(q, k)]).sum()
}

fn weighted_gram(a: &DMatrix<f64>, w: &[f64]) -> DMatrix<f64> {
    let mut scaled = a.clone();
    for (k, mut col) in scaled.column_iter_mut().enumerate() {
        col *= w[k];
    }
    mirror_upper(scaled * a.transpose())
}

/// `K̃ = Z·D·Zᵀ` with `D = diag(signs)`.
#[derive(Debug, Clone)]
pub struct NystromFactor {
    /// n×r factor.
    pub z: DMatrix<f64>,
    /// ±1 per column of `z`.
    pub signs: Vec<f64>,
    /// Landmarks S1 in column order of the gathered block.
    pub landmarks: IndexSample,
    /// s1×r map from (shifted) landmark similarities to rows of `z`.
    pub inner_root: DMatrix<f64>,
    /// Diagonal shift e applied to landmark-aligned entries.
    pub shift: f64,
    pub alpha: f64,
    /// Inner-matrix rescaling; 1.0 when disabled.
    pub rescale_beta: f64,
}

impl NystromFactor {
    pub fn is_psd(&self) -> bool {
        self.signs.iter().all(|&s| s > 0.0)
    }

    pub fn rank(&self) -> usize {
        self.z.ncols()
    }
}

impl Approximation for NystromFactor {
    fn size(&self) -> usize {
        self.z.nrows()
    }

    fn rank_bound(&self) -> usize {
        self.z.ncols()
    }

    fn block(&self, rows: &[usize], cols: &[usize]) -> DMatrix<f64> {
        DMatrix::from_fn(rows.len(), cols.len(), |r, c| weighted_dot(&self.z, &self.signs, rows[r], cols[c]))
    }

    fn to_dense(&self) -> DMatrix<f64> {
        weighted_gram(&self.z, &self.signs)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CurMethod {
    Skeleton,
    SiCur,
    StaCurShared,
    StaCurDistinct,
}

impl CurMethod {
    pub fn label(self) -> &'static str {
        match self {
            CurMethod::Skeleton => "skeleton",
            CurMethod::SiCur => "sicur",
            CurMethod::StaCurShared => "stacur-s",
            CurMethod::StaCurDistinct => "stacur-d",
        }
    }
}

/// `K̃ = C·U·R`.
#[derive(Debug, Clone)]
pub struct CurFactor {
    /// n×s1 sampled columns.
    pub c: DMatrix<f64>,
    /// s1×s2 joining matrix.
    pub u: DMatrix<f64>,
    /// s2×n sampled rows.
    pub r: DMatrix<f64>,
    pub col_landmarks: IndexSample,
    pub row_landmarks: IndexSample,
    pub method: CurMethod,
}

impl Approximation for CurFactor {
    fn size(&self) -> usize {
        self.c.nrows()
    }

    fn rank_bound(&self) -> usize {
        self.u.nrows().min(self.u.ncols())
    }

    fn block(&self, rows: &[usize], cols: &[usize]) -> DMatrix<f64> {
        let left = self.c.select_rows(rows) * &self.u;
        left * self.r.select_columns(cols)
    }

    fn to_dense(&self) -> DMatrix<f64> {
        (&self.c * &self.u) * &self.r
    }
}

/// `K̃ = B·diag(values)·Bᵀ` from selected eigenpairs.
#[derive(Debug, Clone)]
pub struct SpectralFactor {
    pub basis: DMatrix<f64>,
    pub values: DVector<f64>,
}

impl SpectralFactor {
    pub fn new(basis: DMatrix<f64>, values: DVector<f64>) -> Self {
        Self { basis, values }
    }
}

impl Approximation for SpectralFactor {
    fn size(&self) -> usize {
        self.basis.nrows()
    }

    fn rank_bound(&self) -> usize {
        self.values.len()
    }

    fn block(&self, rows: &[usize], cols: &[usize]) -> DMatrix<f64> {
        let w = self.values.as_slice();
        DMatrix::from_fn(rows.len(), cols.len(), |r, c| weighted_dot(&self.basis, w, rows[r], cols[c]))
    }

    fn to_dense(&self) -> DMatrix<f64> {
        weighted_gram(&self.basis, self.values.as_slice())
    }
}
