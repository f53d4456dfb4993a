//! Small dense kernels: symmetric eigendecomposition, SVD, pseudoinverse and
//! inverse square roots. Eigendecompositions use nalgebra; the SVD is a
//! one-sided Jacobi iteration.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::factor::SpectralFactor;

/// Relative cutoff for pseudo-inversions and inverse square roots.
pub const DEFAULT_RCOND: f64 = 1e-10;

/// Relative asymmetry accepted by symmetric routines, against `max |a_ij|`.
pub const SYMMETRY_TOL: f64 = 1e-8;

/// Relative negativity accepted as numerically PSD, against `‖A‖₂`.
pub const PSD_TOL: f64 = 1e-8;

/// Full symmetric spectrum, eigenvalues ascending.
#[derive(Debug, Clone)]
pub struct EigenDecomposition {
    pub values: DVector<f64>,
    pub vectors: DMatrix<f64>,
}

impl EigenDecomposition {
    pub fn min(&self) -> f64 {
        self.values[0]
    }

    /// Largest eigenvalue magnitude, i.e. `‖A‖₂`.
    pub fn spectral_radius(&self) -> f64 {
        self.values.amax()
    }
}

/// Thin SVD, singular values descending.
#[derive(Debug, Clone)]
pub struct Svd {
    pub left: DMatrix<f64>,
    pub sigma: DVector<f64>,
    pub right: DMatrix<f64>,
}

impl Svd {
    /// Number of singular values at or above `rcond * sigma_max`.
    pub fn rank(&self, rcond: f64) -> usize {
        let top = self.sigma.iter().copied().fold(0.0, f64::max);
        if top == 0.0 {
            return 0;
        }
        self.sigma.iter().filter(|&&s| s >= rcond * top).count()
    }
}

/// `(W, signs)` with `W·diag(signs)·Wᵀ = A⁺`.
#[derive(Debug, Clone)]
pub struct SignedRoot {
    pub w: DMatrix<f64>,
    pub signs: Vec<f64>,
}

pub fn check_symmetric(a: &DMatrix<f64>) -> Result<()> {
    if !a.is_square() {
        return Err(Error::param(format!("expected a square matrix, got {}x{}", a.nrows(), a.ncols())));
    }
    let scale = a.amax();
    let n = a.nrows();
    let mut asym = 0.0f64;
    for j in 0..n {
        for i in j + 1..n {
            asym = asym.max((a[(i, j)] - a[(j, i)]).abs());
        }
    }
    if asym > SYMMETRY_TOL * scale {
        return Err(Error::NotSymmetric { asymmetry: asym, scale });
    }
    Ok(())
}

/// Flips each column so its largest-magnitude entry (first on ties) is positive.
fn normalize_signs(v: &mut DMatrix<f64>) {
    for mut col in v.column_iter_mut() {
        let mut best = 0.0f64;
        let mut sign = 1.0;
        for &x in col.iter() {
            if x.abs() > best {
                best = x.abs();
                sign = x.signum();
            }
        }
        if sign < 0.0 {
            col.neg_mut();
        }
    }
}

pub fn sym_eig(a: &DMatrix<f64>) -> Result<EigenDecomposition> {
    check_symmetric(a)?;
    let m = a.nrows();
    if m == 0 {
        return Err(Error::param("empty matrix"));
    }
    let eig = SymmetricEigen::try_new(a.clone(), f64::EPSILON, 100 * m + 100)
        .ok_or(Error::NoConvergence("symmetric eigendecomposition"))?;
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&x, &y| eig.eigenvalues[x].total_cmp(&eig.eigenvalues[y]).then(x.cmp(&y)));
    let values = DVector::from_iterator(m, order.iter().map(|&k| eig.eigenvalues[k]));
    let mut vectors = eig.eigenvectors.select_columns(&order);
    normalize_signs(&mut vectors);
    Ok(EigenDecomposition { values, vectors })
}

/// Eigenvalues only, ascending.
pub fn eigenvalues(a: &DMatrix<f64>) -> Result<Vec<f64>> {
    check_symmetric(a)?;
    if a.nrows() == 0 {
        return Err(Error::param("empty matrix"));
    }
    let mut values: Vec<f64> = a.clone().symmetric_eigenvalues().iter().copied().collect();
    values.sort_by(f64::total_cmp);
    Ok(values)
}

/// Smallest eigenvalue, computed without eigenvectors.
pub fn min_eigenvalue(a: &DMatrix<f64>) -> Result<f64> {
    Ok(eigenvalues(a)?[0])
}

/// Indices of `values` by descending magnitude; ties by signed value
/// descending, then by index.
pub fn magnitude_order(values: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&x, &y| {
        values[y]
            .abs()
            .total_cmp(&values[x].abs())
            .then(values[y].total_cmp(&values[x]))
            .then(x.cmp(&y))
    });
    order
}

/// One-sided Jacobi SVD. nalgebra's bidiagonal solver can return wrong
/// factors for exactly rank-deficient inputs, which CUR cores routinely are.
pub fn svd(a: &DMatrix<f64>) -> Result<Svd> {
    let (p, q) = a.shape();
    if p.min(q) == 0 {
        return Ok(Svd { left: DMatrix::zeros(p, 0), sigma: DVector::zeros(0), right: DMatrix::zeros(q, 0) });
    }
    if p < q {
        let t = svd(&a.transpose())?;
        return Ok(Svd { left: t.right, sigma: t.sigma, right: t.left });
    }
    // Columns below this norm are roundoff and count as exact zeros.
    let negligible = p as f64 * f64::EPSILON * a.norm();
    let (w, v) = jacobi_rotate(a.clone(), negligible)?;
    let norms: Vec<f64> =
        w.column_iter().map(|c| c.norm()).map(|x| if x <= negligible { 0.0 } else { x }).collect();
    let mut order: Vec<usize> = (0..q).collect();
    order.sort_by(|&x, &y| norms[y].total_cmp(&norms[x]).then(x.cmp(&y)));
    let sigma = DVector::from_iterator(q, order.iter().map(|&k| norms[k]));
    let mut left = DMatrix::zeros(p, q);
    for (c, &k) in order.iter().enumerate() {
        if norms[k] > 0.0 {
            left.set_column(c, &(w.column(k) / norms[k]));
        }
    }
    complete_orthonormal(&mut left, sigma.iter().position(|&s| s == 0.0).unwrap_or(q));
    Ok(Svd { left, sigma, right: v.select_columns(&order) })
}

const JACOBI_SWEEPS: usize = 80;

/// Rotates column pairs of `w` until they are mutually orthogonal; returns
/// `(A·V, V)`. Pairs involving a column of norm at most `negligible` are
/// left alone.
fn jacobi_rotate(mut w: DMatrix<f64>, negligible: f64) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let (p, q) = w.shape();
    let mut v = DMatrix::identity(q, q);
    let tol = p as f64 * f64::EPSILON;
    for _ in 0..JACOBI_SWEEPS {
        let mut rotated = false;
        for i in 0..q {
            for j in i + 1..q {
                let alpha = w.column(i).norm_squared();
                let beta = w.column(j).norm_squared();
                let gamma = w.column(i).dot(&w.column(j));
                if gamma == 0.0
                    || alpha.min(beta) <= negligible * negligible
                    || gamma.abs() <= tol * (alpha * beta).sqrt()
                {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate_pair(&mut w, i, j, c, s);
                rotate_pair(&mut v, i, j, c, s);
            }
        }
        if !rotated {
            return Ok((w, v));
        }
    }
    Err(Error::NoConvergence("singular value decomposition"))
}

fn rotate_pair(m: &mut DMatrix<f64>, i: usize, j: usize, c: f64, s: f64) {
    for r in 0..m.nrows() {
        let (x, y) = (m[(r, i)], m[(r, j)]);
        m[(r, i)] = c * x - s * y;
        m[(r, j)] = s * x + c * y;
    }
}

/// Fills columns `from..` of `u` so that all columns are orthonormal.
fn complete_orthonormal(u: &mut DMatrix<f64>, from: usize) {
    let p = u.nrows();
    let mut next = from;
    for e in 0..p {
        if next == u.ncols() {
            break;
        }
        let mut x = DVector::zeros(p);
        x[e] = 1.0;
        for _ in 0..2 {
            for c in 0..next {
                let d = u.column(c).dot(&x);
                x.axpy(-d, &u.column(c), 1.0);
            }
        }
        let norm = x.norm();
        if norm > 0.5 {
            u.set_column(next, &(x / norm));
            next += 1;
        }
    }
}

pub fn spectral_norm(a: &DMatrix<f64>) -> Result<f64> {
    if a.is_empty() {
        return Ok(0.0);
    }
    Ok(svd(a)?.sigma.iter().copied().fold(0.0, f64::max))
}

/// Moore–Penrose pseudoinverse dropping singular values below `rcond·σ_max`.
pub fn pinv(a: &DMatrix<f64>, rcond: f64) -> Result<DMatrix<f64>> {
    if rcond <= 0.0 {
        return Err(Error::param("rcond must be positive"));
    }
    let dec = svd(a)?;
    let keep = dec.rank(rcond);
    let (p, q) = a.shape();
    if keep == 0 {
        return Ok(DMatrix::zeros(q, p));
    }
    let mut right = dec.right.columns(0, keep).into_owned();
    for (k, mut col) in right.column_iter_mut().enumerate() {
        col /= dec.sigma[k];
    }
    Ok(right * dec.left.columns(0, keep).transpose())
}

/// Builds `V_kept · diag(|λ|^{-1/2})` with kept eigenpairs ordered by
/// descending eigenvalue.
fn root_from_eig(eig: &EigenDecomposition, keep: impl Fn(f64) -> bool) -> SignedRoot {
    let m = eig.values.len();
    let kept: Vec<usize> = (0..m).rev().filter(|&k| keep(eig.values[k])).collect();
    let mut w = eig.vectors.select_columns(&kept);
    let mut signs = Vec::with_capacity(kept.len());
    for (c, &k) in kept.iter().enumerate() {
        let lambda = eig.values[k];
        w.column_mut(c).scale_mut(1.0 / lambda.abs().sqrt());
        signs.push(if lambda < 0.0 { -1.0 } else { 1.0 });
    }
    SignedRoot { w, signs }
}

/// Sign-decomposed pseudo-inverse root of a symmetric, possibly indefinite matrix.
pub fn signed_inv_sqrt(a: &DMatrix<f64>, rcond: f64) -> Result<SignedRoot> {
    let eig = sym_eig(a)?;
    Ok(signed_root_of(&eig, rcond))
}

pub(crate) fn signed_root_of(eig: &EigenDecomposition, rcond: f64) -> SignedRoot {
    let cutoff = rcond * eig.spectral_radius();
    root_from_eig(eig, |l| l.abs() > cutoff && l != 0.0)
}

/// Positive part root: kept eigenvalues are those above `rcond·λ_max`.
/// Fails with [`Error::NotPsd`] when `λ_min < -PSD_TOL·‖A‖₂`.
pub(crate) fn psd_root_of(eig: &EigenDecomposition, rcond: f64) -> Result<DMatrix<f64>> {
    let radius = eig.spectral_radius();
    if eig.min() < -PSD_TOL * radius {
        return Err(Error::NotPsd { lambda_min: eig.min() });
    }
    let top = eig.values[eig.values.len() - 1];
    Ok(root_from_eig(eig, |l| l > rcond * top && l > 0.0).w)
}

/// Symmetric pseudo-inverse square root of a numerically PSD matrix.
pub fn inv_sqrt_psd(a: &DMatrix<f64>, rcond: f64) -> Result<DMatrix<f64>> {
    let eig = sym_eig(a)?;
    let w = psd_root_of(&eig, rcond)?;
    let m = a.nrows();
    let mut b = DMatrix::zeros(m, m);
    let v = eig.vectors.select_columns(&(0..m).rev().collect::<Vec<_>>());
    // w = V_kept diag(λ^{-1/2}); B = w V_keptᵀ.
    let kept = w.ncols();
    if kept > 0 {
        b = &w * v.columns(0, kept).transpose();
    }
    Ok(symmetrize(b))
}

pub(crate) fn symmetrize(mut m: DMatrix<f64>) -> DMatrix<f64> {
    let n = m.nrows();
    for j in 0..n {
        for i in j + 1..n {
            let avg = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = avg;
            m[(j, i)] = avg;
        }
    }
    m
}

/// Best rank-`k` Frobenius approximation of a symmetric matrix: the `k`
/// eigenpairs of largest magnitude.
pub fn optimal_rank_k(a: &DMatrix<f64>, k: usize) -> Result<SpectralFactor> {
    let eig = sym_eig(a)?;
    optimal_rank_k_of(&eig, k)
}

pub(crate) fn optimal_rank_k_of(eig: &EigenDecomposition, k: usize) -> Result<SpectralFactor> {
    let n = eig.values.len();
    if k < 1 || k > n {
        return Err(Error::param(format!("rank {k} must lie in [1, {n}]")));
    }
    let values: Vec<f64> = eig.values.iter().copied().collect();
    let chosen: Vec<usize> = magnitude_order(&values).into_iter().take(k).collect();
    let basis = eig.vectors.select_columns(&chosen);
    let kept = DVector::from_iterator(k, chosen.iter().map(|&c| values[c]));
    Ok(SpectralFactor::new(basis, kept))
}
