//! Classic and submatrix-shifted Nyström approximation.

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::factor::NystromFactor;
use crate::linalg::{self, DEFAULT_RCOND};
use crate::oracle::{gather_block, Rows, SimilarityOracle};
use crate::sample::{sample_nested, sample_uniform, IndexSample};

/// How the shift is derived from `λ = λ_min(S2ᵀKS2)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShiftMode {
    /// `e = α·max(0, -λ)`; PSD samples leave the matrix unshifted.
    Clamped,
    /// `e = -α·λ`, applied even when it is negative.
    Verbatim,
}

impl ShiftMode {
    pub fn label(self) -> &'static str {
        match self {
            ShiftMode::Clamped => "clamped",
            ShiftMode::Verbatim => "verbatim",
        }
    }

    pub fn shift(self, alpha: f64, lambda_min: f64) -> f64 {
        match self {
            ShiftMode::Clamped => alpha * f64::max(0.0, -lambda_min),
            ShiftMode::Verbatim => -alpha * lambda_min,
        }
    }
}

/// Parameters of a shifted Nyström run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmsParams {
    pub s1: usize,
    pub s2: usize,
    pub alpha: f64,
    pub shift_mode: ShiftMode,
    pub rescale: bool,
    pub rcond: f64,
}

impl SmsParams {
    pub const DEFAULT_ALPHA: f64 = 1.5;
    pub const DEFAULT_MULTIPLIER: usize = 2;

    /// Defaults: `s2 = 2·s1`, `α = 1.5`, clamped shift, no rescaling.
    pub fn new(s1: usize) -> Self {
        Self {
            s1,
            s2: Self::DEFAULT_MULTIPLIER * s1,
            alpha: Self::DEFAULT_ALPHA,
            shift_mode: ShiftMode::Clamped,
            rescale: false,
            rcond: DEFAULT_RCOND,
        }
    }
}

/// Classic Nyström `KS(SᵀKS)⁺SᵀK` in sign-decomposed factored form.
pub fn classic_nystrom<O: SimilarityOracle + ?Sized>(
    oracle: &O,
    s: usize,
    seed: u64,
    rcond: f64,
) -> Result<NystromFactor> {
    let landmarks = sample_uniform(oracle.size(), s, seed)?;
    nystrom_with_landmarks(oracle, landmarks, rcond)
}

/// Classic Nyström on a caller-chosen landmark set.
pub fn nystrom_with_landmarks<O: SimilarityOracle + ?Sized>(
    oracle: &O,
    landmarks: IndexSample,
    rcond: f64,
) -> Result<NystromFactor> {
    let c = gather_block(oracle, Rows::All, landmarks.indices())?;
    let inner = c.select_rows(landmarks.indices());
    let eig = linalg::sym_eig(&inner)?;
    let root = linalg::signed_root_of(&eig, rcond);
    Ok(NystromFactor {
        z: &c * &root.w,
        signs: root.signs,
        landmarks,
        inner_root: root.w,
        shift: 0.0,
        alpha: 1.0,
        rescale_beta: 1.0,
    })
}

/// Classic Nyström through the PSD inverse square root; fails with
/// [`Error::NotPsd`] when the sampled inner matrix is indefinite.
pub fn classic_nystrom_psd<O: SimilarityOracle + ?Sized>(
    oracle: &O,
    s: usize,
    seed: u64,
    rcond: f64,
) -> Result<NystromFactor> {
    let landmarks = sample_uniform(oracle.size(), s, seed)?;
    let c = gather_block(oracle, Rows::All, landmarks.indices())?;
    let inner = c.select_rows(landmarks.indices());
    let w = linalg::psd_root_of(&linalg::sym_eig(&inner)?, rcond)?;
    let rank = w.ncols();
    Ok(NystromFactor {
        z: &c * &w,
        signs: vec![1.0; rank],
        landmarks,
        inner_root: w,
        shift: 0.0,
        alpha: 1.0,
        rescale_beta: 1.0,
    })
}

/// Submatrix-shifted Nyström.
///
/// Draws nested landmarks `S1 ⊆ S2`, shifts the sampled columns and the
/// inner matrix by `e` derived from `λ_min(S2ᵀKS2)`, and factors the
/// (optionally rescaled) shifted inner matrix through its PSD root.
pub fn sms_nystrom<O: SimilarityOracle + ?Sized>(
    oracle: &O,
    params: &SmsParams,
    seed: u64,
) -> Result<NystromFactor> {
    let n = oracle.size();
    if params.alpha < 1.0 || params.alpha.is_nan() {
        return Err(Error::param(format!("alpha must be >= 1, got {}", params.alpha)));
    }
    let (s1, s2) = sample_nested(n, params.s1, params.s2, seed)?;

    let mut c = gather_block(oracle, Rows::All, s1.indices())?;
    let mut inner = c.select_rows(s1.indices());
    let outer = outer_block(oracle, &c, &s1, &s2)?;

    let lambda = linalg::min_eigenvalue(&outer)?;
    let e = params.shift_mode.shift(params.alpha, lambda);
    let unshifted = params.rescale.then(|| inner.clone());
    for (k, &i) in s1.indices().iter().enumerate() {
        c[(i, k)] += e;
        inner[(k, k)] += e;
    }

    let mut beta = 1.0;
    if let Some(unshifted) = unshifted {
        let shifted_norm = linalg::spectral_norm(&inner)?;
        if shifted_norm > 0.0 {
            beta = linalg::spectral_norm(&unshifted)? / shifted_norm;
        }
        inner *= beta;
    }

    let eig = linalg::sym_eig(&inner)?;
    let w = linalg::psd_root_of(&eig, params.rcond).map_err(|err| match err {
        Error::NotPsd { lambda_min } => Error::ShiftedIndefinite { mode: params.shift_mode.label(), lambda_min },
        other => other,
    })?;
    let rank = w.ncols();
    Ok(NystromFactor {
        z: &c * &w,
        signs: vec![1.0; rank],
        landmarks: s1,
        inner_root: w,
        shift: e,
        alpha: params.alpha,
        rescale_beta: beta,
    })
}

/// `S2ᵀKS2`, reusing the already gathered columns for indices in `S1`.
fn outer_block<O: SimilarityOracle + ?Sized>(
    oracle: &O,
    c: &DMatrix<f64>,
    s1: &IndexSample,
    s2: &IndexSample,
) -> Result<DMatrix<f64>> {
    let pos: HashMap<usize, usize> = s1.indices().iter().enumerate().map(|(k, &i)| (i, k)).collect();
    let missing: Vec<usize> = s2.indices().iter().copied().filter(|i| !pos.contains_key(i)).collect();
    let extra = gather_block(oracle, Rows::Indices(s2.indices()), &missing)?;
    let mut next = 0;
    let mut outer = DMatrix::zeros(s2.len(), s2.len());
    for (b, &j) in s2.indices().iter().enumerate() {
        match pos.get(&j) {
            Some(&k) => {
                for (a, &i) in s2.indices().iter().enumerate() {
                    outer[(a, b)] = c[(i, k)];
                }
            }
            None => {
                outer.set_column(b, &extra.column(next));
                next += 1;
            }
        }
    }
    Ok(outer)
}

/// Maps similarities to landmarks onto embedding coordinates.
///
/// Shared by Nyström factors (root = inner root, shift = e) and CUR
/// embeddings (root = `W·S^{1/2}`, shift = 0).
#[derive(Debug, Clone, PartialEq)]
pub struct ExtensionMap {
    pub landmarks: Vec<usize>,
    pub shift: f64,
    pub root: DMatrix<f64>,
}

impl ExtensionMap {
    pub fn dim(&self) -> usize {
        self.root.ncols()
    }

    /// Embeds a point from its similarities to the landmarks, in landmark
    /// order. `point` is the dataset index when the point is in-sample; a
    /// landmark receives the same diagonal shift as during fitting.
    pub fn extend(&self, similarities: &[f64], point: Option<usize>) -> Result<DVector<f64>> {
        if similarities.len() != self.landmarks.len() {
            return Err(Error::param(format!(
                "expected {} similarities, got {}",
                self.landmarks.len(),
                similarities.len()
            )));
        }
        let mut v = DVector::from_column_slice(similarities);
        if let Some(k) = point.and_then(|p| self.landmarks.iter().position(|&l| l == p)) {
            v[k] += self.shift;
        }
        Ok(self.root.tr_mul(&v))
    }
}

impl NystromFactor {
    pub fn extension_map(&self) -> Result<ExtensionMap> {
        if !self.is_psd() {
            return Err(Error::IndefiniteFactor);
        }
        Ok(ExtensionMap {
            landmarks: self.landmarks.indices().to_vec(),
            shift: self.shift,
            root: self.inner_root.clone(),
        })
    }
}

/// Rows of `Z` as embeddings; requires an all-positive factor.
pub fn embed_nystrom(factor: &NystromFactor) -> Result<DMatrix<f64>> {
    if !factor.is_psd() {
        return Err(Error::IndefiniteFactor);
    }
    Ok(factor.z.clone())
}

/// Out-of-sample extension of a PSD-path factor.
pub fn extend_embedding(factor: &NystromFactor, similarities: &[f64], point: Option<usize>) -> Result<DVector<f64>> {
    factor.extension_map()?.extend(similarities, point)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::factor::Approximation;
    use crate::generators::{gaussian_matrix, low_rank_symmetric, planted_spectrum, random_points, random_psd};
    use crate::generators::exp_distance_oracle;
    use crate::oracle::{materialize, DenseOracle, FnOracle};
    use crate::sample::IndexSample;
    use proptest::prelude::*;

    fn rel_err(k: &DMatrix<f64>, approx: &DMatrix<f64>) -> f64 {
        (k - approx).norm() / k.norm()
    }

    fn indefinite(n: usize, seed: u64) -> DenseOracle {
        let values: Vec<f64> = (0..n).map(|i| if i % 3 == 0 { -1.0 - i as f64 } else { 1.0 + i as f64 }).collect();
        planted_spectrum(n, &values, seed).unwrap()
    }

    #[test]
    fn identity_full_sample_is_exact() {
        let id = DenseOracle::new(DMatrix::identity(12, 12)).unwrap();
        let f = classic_nystrom(&id, 12, 0, DEFAULT_RCOND).unwrap();
        assert_eq!(f.to_dense(), DMatrix::identity(12, 12));
        assert_eq!(f.entry(0, 0), 1.0);
        assert_eq!(f.entry(0, 1), 0.0);
        let z = embed_nystrom(&f).unwrap();
        assert!((z.transpose() * &z - DMatrix::identity(12, 12)).amax() < 1e-12);
    }

    #[test]
    fn low_rank_psd_recovery() {
        let g = gaussian_matrix(50, 5, 11);
        let k = DenseOracle::new(&g * g.transpose()).unwrap();
        for seed in 0..5 {
            let f = classic_nystrom(&k, 8, seed, DEFAULT_RCOND).unwrap();
            assert!(rel_err(k.matrix(), &f.to_dense()) < 1e-8);
            assert!(f.is_psd());
        }
    }

    #[test]
    fn signed_path_matches_pseudoinverse_formula() {
        let k = indefinite(30, 2);
        let f = classic_nystrom(&k, 9, 4, DEFAULT_RCOND).unwrap();
        let s = f.landmarks.indices();
        let c = k.matrix().select_columns(s);
        let w = c.select_rows(s);
        let direct = &c * linalg::pinv(&w, DEFAULT_RCOND).unwrap() * c.transpose();
        assert!(rel_err(&direct, &f.to_dense()) < 1e-8);
        assert!(!f.is_psd());
        assert!(matches!(embed_nystrom(&f), Err(Error::IndefiniteFactor)));
        assert!(matches!(classic_nystrom_psd(&k, 9, 4, DEFAULT_RCOND), Err(Error::NotPsd { lambda_min }) if lambda_min < 0.0));
    }

    #[test]
    fn zero_matrix_gives_rank_zero_factor() {
        let zero = DenseOracle::new(DMatrix::zeros(6, 6)).unwrap();
        let f = classic_nystrom(&zero, 3, 0, DEFAULT_RCOND).unwrap();
        assert_eq!(f.rank(), 0);
        assert_eq!(f.to_dense(), DMatrix::zeros(6, 6));
        let g = sms_nystrom(&zero, &SmsParams::new(3), 0).unwrap();
        assert_eq!(g.rank(), 0);
    }

    #[test]
    fn sms_equals_classic_on_psd() {
        let k = random_psd(60, 3).unwrap();
        for seed in 0..5 {
            let a = classic_nystrom(&k, 10, seed, DEFAULT_RCOND).unwrap();
            let b = sms_nystrom(&k, &SmsParams::new(10), seed).unwrap();
            assert_eq!(b.shift, 0.0);
            assert_eq!(a.landmarks.indices(), b.landmarks.indices());
            assert_eq!(a.z, b.z);
        }
    }

    #[test]
    fn full_sample_verbatim_closed_form() {
        for seed in 0..3 {
            let k = indefinite(25, seed);
            let params = SmsParams { s1: 25, s2: 25, shift_mode: ShiftMode::Verbatim, ..SmsParams::new(25) };
            let f = sms_nystrom(&k, &params, seed).unwrap();
            let lambda = linalg::min_eigenvalue(k.matrix()).unwrap();
            assert!((f.shift + 1.5 * lambda).abs() < 1e-12);
            let expected = k.matrix() + DMatrix::identity(25, 25) * f.shift;
            assert!(rel_err(&expected, &f.to_dense()) < 1e-10);
            let err = rel_err(k.matrix(), &f.to_dense());
            assert!((err - f.shift * 5.0 / k.matrix().norm()).abs() < 1e-8);
        }
    }

    #[test]
    fn verbatim_can_overshoot_on_definite_input() {
        let id = DenseOracle::new(DMatrix::identity(10, 10)).unwrap();
        let params = SmsParams { s1: 2, s2: 4, alpha: 2.0, shift_mode: ShiftMode::Verbatim, ..SmsParams::new(2) };
        assert!(matches!(
            sms_nystrom(&id, &params, 0),
            Err(Error::ShiftedIndefinite { mode: "verbatim", .. })
        ));
    }

    #[test]
    fn alpha_below_one_is_rejected() {
        let k = random_psd(10, 0).unwrap();
        let params = SmsParams { alpha: 0.5, ..SmsParams::new(2) };
        assert!(matches!(sms_nystrom(&k, &params, 0), Err(Error::Parameter(_))));
    }

    #[test]
    fn rescale_is_neutral_without_shift() {
        let k = random_psd(40, 1).unwrap();
        let plain = sms_nystrom(&k, &SmsParams::new(6), 2).unwrap();
        let scaled = sms_nystrom(&k, &SmsParams { rescale: true, ..SmsParams::new(6) }, 2).unwrap();
        assert_eq!(scaled.rescale_beta, 1.0);
        assert_eq!(plain.z, scaled.z);
    }

    #[test]
    fn rescale_factor_matches_norm_ratio() {
        let k = indefinite(40, 5);
        let f = sms_nystrom(&k, &SmsParams { rescale: true, ..SmsParams::new(8) }, 3).unwrap();
        assert!(f.shift > 0.0);
        let s = f.landmarks.indices();
        let inner = k.matrix().select_rows(s).select_columns(s);
        let shifted = &inner + DMatrix::identity(8, 8) * f.shift;
        let beta = linalg::spectral_norm(&inner).unwrap() / linalg::spectral_norm(&shifted).unwrap();
        assert!((f.rescale_beta - beta).abs() < 1e-12);
        let c = k.matrix().select_columns(s) + {
            let mut e = DMatrix::zeros(40, 8);
            for (col, &i) in s.iter().enumerate() {
                e[(i, col)] = f.shift;
            }
            e
        };
        let expected = &c * linalg::pinv(&(shifted * beta), DEFAULT_RCOND).unwrap() * c.transpose();
        assert!(rel_err(&expected, &f.to_dense()) < 1e-8);
    }

    #[test]
    fn reconstruction_is_exactly_symmetric() {
        let k = indefinite(35, 1);
        for f in [
            classic_nystrom(&k, 7, 1, DEFAULT_RCOND).unwrap(),
            sms_nystrom(&k, &SmsParams::new(7), 1).unwrap(),
        ] {
            let d = f.to_dense();
            assert_eq!(d, d.transpose());
        }
    }

    #[test]
    fn extension_reproduces_in_sample_rows() {
        let k = indefinite(30, 7);
        let f = sms_nystrom(&k, &SmsParams::new(6), 5).unwrap();
        let s = f.landmarks.indices().to_vec();
        for i in 0..30 {
            let sims: Vec<f64> = s.iter().map(|&l| k.matrix()[(i, l)]).collect();
            let row = extend_embedding(&f, &sims, Some(i)).unwrap();
            let diff = (row.transpose() - f.z.row(i)).amax();
            assert!(diff < 1e-12 * f.z.amax().max(1.0), "row {i}: {diff}");
        }
        assert!(matches!(extend_embedding(&f, &[1.0], None), Err(Error::Parameter(_))));
    }

    #[test]
    fn held_out_extension_matches_enlarged_factor() {
        let points = random_points(41, 3, 2);
        let full = exp_distance_oracle(points, 0.5).unwrap();
        let k_full = materialize(&full).unwrap();
        let train = DenseOracle::new(k_full.view((0, 0), (40, 40)).into_owned()).unwrap();
        let f = classic_nystrom(&train, 8, 1, DEFAULT_RCOND).unwrap();
        assert!(f.is_psd());
        let s = f.landmarks.indices().to_vec();
        let sims: Vec<f64> = s.iter().map(|&l| k_full[(40, l)]).collect();
        let new = extend_embedding(&f, &sims, None).unwrap();

        let big = DenseOracle::new(k_full.clone()).unwrap();
        let g = nystrom_with_landmarks(&big, IndexSample::new(s, 41).unwrap(), DEFAULT_RCOND).unwrap();
        let dense = g.to_dense();
        let mut row_err = 0.0;
        for j in 0..40 {
            let dot = new.dot(&f.z.row(j).transpose());
            assert!((dot - dense[(40, j)]).abs() < 1e-10);
            row_err += (dot - k_full[(40, j)]).powi(2);
        }
        assert!(row_err.sqrt() <= (&k_full - &dense).norm() + 1e-12);
    }

    #[test]
    fn counting_budget_for_sms() {
        let k = indefinite(60, 3);
        let counter = crate::oracle::counting_oracle(&k);
        sms_nystrom(&counter, &SmsParams::new(6), 0).unwrap();
        assert!(counter.calls() <= 60 * 6 + 12 * 12);
        let counter = crate::oracle::counting_oracle(&k);
        sms_nystrom(&counter, &SmsParams { s2: 6, ..SmsParams::new(6) }, 0).unwrap();
        assert_eq!(counter.calls(), 60 * 6 - 6 * 5 / 2);
    }

    #[test]
    fn lazy_oracle_agrees_with_dense() {
        let k = low_rank_symmetric(20, &[3.0, -1.0, 0.5], 4).unwrap();
        let m = k.matrix().clone();
        let lazy = FnOracle::new(20, true, move |i, j| m[(i, j)]);
        let a = sms_nystrom(&lazy, &SmsParams::new(4), 9).unwrap();
        let b = sms_nystrom(&k, &SmsParams::new(4), 9).unwrap();
        assert_eq!(a.z, b.z);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn clamped_shift_invariants(n in 8usize..30, neg in 1usize..5, seed in 0u64..1000, alpha in 1.0f64..3.0) {
            let values: Vec<f64> = (0..n).map(|i| if i < neg { -0.3 * (i + 1) as f64 / neg as f64 } else { 0.5 + i as f64 / n as f64 }).collect();
            let k = planted_spectrum(n, &values, seed).unwrap();
            let s1 = (n / 4).max(1);
            let params = SmsParams { s2: (2 * s1).min(n), alpha, ..SmsParams::new(s1) };
            let f = sms_nystrom(&k, &params, seed).unwrap();
            let (_, s2) = crate::sample::sample_nested(n, s1, params.s2, seed).unwrap();
            let outer = k.matrix().select_rows(s2.indices()).select_columns(s2.indices());
            let lambda2 = linalg::min_eigenvalue(&outer).unwrap();
            prop_assert!(f.shift >= 0.0);
            prop_assert!((f.shift - alpha * f64::max(0.0, -lambda2)).abs() < 1e-12);
            let lambda_k = linalg::min_eigenvalue(k.matrix()).unwrap();
            prop_assert!(f.shift <= alpha * lambda_k.abs() + 1e-10);
            let s = f.landmarks.indices();
            let shifted = k.matrix().select_rows(s).select_columns(s) + DMatrix::identity(s1, s1) * f.shift;
            let lmin = linalg::min_eigenvalue(&shifted).unwrap();
            let norm = linalg::spectral_norm(&shifted).unwrap();
            prop_assert!(lmin >= (alpha - 1.0) * f64::max(0.0, -lambda2) - 1e-8 * norm);
        }

        #[test]
        fn psd_samples_are_unshifted(n in 5usize..25, seed in 0u64..1000) {
            let k = random_psd(n, seed).unwrap();
            let f = sms_nystrom(&k, &SmsParams { s2: n.min(4), ..SmsParams::new(2) }, seed).unwrap();
            prop_assert_eq!(f.shift, 0.0);
        }
    }
}
