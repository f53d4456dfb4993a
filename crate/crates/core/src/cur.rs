//! CUR approximations: skeleton, SiCUR and StaCUR.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::factor::{CurFactor, CurMethod};
use crate::linalg;
use crate::nystrom::ExtensionMap;
use crate::oracle::{gather_block, Rows, SimilarityOracle};
use crate::sample::{sample_independent, sample_nested, sample_uniform, IndexSample};

/// How row landmarks relate to column landmarks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sampling {
    /// Column landmarks are a subset of the row landmarks.
    Nested,
    /// Rows and columns are drawn independently.
    Independent,
}

/// StaCUR row-sample choice.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StaCurVariant {
    Shared,
    Distinct,
}

fn gather_rows<O: SimilarityOracle + ?Sized>(oracle: &O, rows: &IndexSample) -> Result<DMatrix<f64>> {
    let all: Vec<usize> = (0..oracle.size()).collect();
    gather_block(oracle, Rows::Indices(rows.indices()), &all)
}

/// Skeleton approximation `KS1 · (S2ᵀKS1)⁺ · S2ᵀK`.
pub fn skeleton<O: SimilarityOracle + ?Sized>(
    oracle: &O,
    s1: usize,
    s2: usize,
    sampling: Sampling,
    seed: u64,
    rcond: f64,
) -> Result<CurFactor> {
    let n = oracle.size();
    let (cols, rows) = match sampling {
        Sampling::Nested => sample_nested(n, s1, s2, seed)?,
        Sampling::Independent => (sample_uniform(n, s1, seed)?, sample_independent(n, s2, seed)?),
    };
    skeleton_with(oracle, cols, rows, CurMethod::Skeleton, rcond)
}

/// Skeleton approximation on caller-chosen landmark sets.
pub fn skeleton_with<O: SimilarityOracle + ?Sized>(
    oracle: &O,
    cols: IndexSample,
    rows: IndexSample,
    method: CurMethod,
    rcond: f64,
) -> Result<CurFactor> {
    let c = gather_block(oracle, Rows::All, cols.indices())?;
    let r = gather_rows(oracle, &rows)?;
    let core = r.select_columns(cols.indices());
    let u = linalg::pinv(&core, rcond)?;
    Ok(CurFactor { c, u, r, col_landmarks: cols, row_landmarks: rows, method })
}

/// Skeleton with nested samples and `s2 = 2·s1`.
pub fn sicur<O: SimilarityOracle + ?Sized>(oracle: &O, s1: usize, seed: u64, rcond: f64) -> Result<CurFactor> {
    let n = oracle.size();
    if s1 < 1 || 2 * s1 > n {
        return Err(Error::param(format!("sicur needs 1 <= s1 and 2*s1 <= n, got s1 = {s1}, n = {n}")));
    }
    let (cols, rows) = sample_nested(n, s1, 2 * s1, seed)?;
    skeleton_with(oracle, cols, rows, CurMethod::SiCur, rcond)
}

/// StaCUR with joining matrix `(n/s)·(CᵀC)⁺·S1ᵀKS2`.
pub fn stacur<O: SimilarityOracle + ?Sized>(
    oracle: &O,
    s: usize,
    variant: StaCurVariant,
    seed: u64,
    rcond: f64,
) -> Result<CurFactor> {
    let n = oracle.size();
    let cols = sample_uniform(n, s, seed)?;
    let (rows, method) = match variant {
        StaCurVariant::Shared => (cols.clone(), CurMethod::StaCurShared),
        StaCurVariant::Distinct => (sample_independent(n, s, seed)?, CurMethod::StaCurDistinct),
    };
    stacur_with(oracle, cols, rows, method, rcond)
}

/// StaCUR on caller-chosen landmark sets of equal size.
pub fn stacur_with<O: SimilarityOracle + ?Sized>(
    oracle: &O,
    cols: IndexSample,
    rows: IndexSample,
    method: CurMethod,
    rcond: f64,
) -> Result<CurFactor> {
    let n = oracle.size();
    let s = cols.len();
    if rows.len() != s {
        return Err(Error::param(format!("stacur needs equal samples, got {s} and {}", rows.len())));
    }
    let c = gather_block(oracle, Rows::All, cols.indices())?;
    let r = gather_rows(oracle, &rows)?;
    let cross = gather_block(oracle, Rows::Indices(cols.indices()), rows.indices())?;
    let gram = c.tr_mul(&c);
    let u = linalg::pinv(&gram, rcond)? * cross * (n as f64 / s as f64);
    Ok(CurFactor { c, u, r, col_landmarks: cols, row_landmarks: rows, method })
}

/// Left embeddings `C·W·S^{1/2}` from the SVD `U = W·S·Vᵀ`, with the map
/// that extends them to new points.
pub fn embed_cur(factor: &CurFactor, rcond: f64) -> Result<(DMatrix<f64>, ExtensionMap)> {
    let dec = linalg::svd(&factor.u)?;
    let rank = dec.rank(rcond);
    let mut root = dec.left.columns(0, rank).into_owned();
    for (k, mut col) in root.column_iter_mut().enumerate() {
        col *= dec.sigma[k].sqrt();
    }
    let embedding = &factor.c * &root;
    let map = ExtensionMap { landmarks: factor.col_landmarks.indices().to_vec(), shift: 0.0, root };
    Ok((embedding, map))
}

/// Right factor `S^{1/2}·Vᵀ·R`, so that `left · right = C·U·R`.
pub fn cur_right_factor(factor: &CurFactor, rcond: f64) -> Result<DMatrix<f64>> {
    let dec = linalg::svd(&factor.u)?;
    let rank = dec.rank(rcond);
    let mut right = dec.right.columns(0, rank).into_owned();
    for (k, mut col) in right.column_iter_mut().enumerate() {
        col *= dec.sigma[k].sqrt();
    }
    Ok(right.tr_mul(&factor.r))
}
