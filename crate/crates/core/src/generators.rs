//! Synthetic oracles for experiments and tests.

use std::str::FromStr;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::oracle::{DenseOracle, SimilarityOracle};
use crate::rng::{self, Stream};

/// p×q matrix of i.i.d. standard normals.
pub fn gaussian_matrix(p: usize, q: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = rng::stream(seed, Stream::Gaussian);
    // Row-major fill keeps the draw order independent of storage layout.
    let data: Vec<f64> = (0..p * q).map(|_| rng.sample(StandardNormal)).collect();
    DMatrix::from_row_slice(p, q, &data)
}

/// `A·diag(d)·Aᵀ`, exactly symmetric.
fn congruence(a: &DMatrix<f64>, d: &[f64]) -> DMatrix<f64> {
    let mut scaled = a.clone();
    for (k, mut col) in scaled.column_iter_mut().enumerate() {
        col *= d[k];
    }
    let mut m = scaled * a.transpose();
    let n = m.nrows();
    for j in 0..n {
        for i in j + 1..n {
            m[(i, j)] = m[(j, i)];
        }
    }
    m
}

/// `G·Gᵀ` with `G` an n×n standard-normal matrix.
pub fn random_psd(n: usize, seed: u64) -> Result<DenseOracle> {
    if n < 1 {
        return Err(Error::param("n must be positive"));
    }
    let g = gaussian_matrix(n, n, seed);
    Ok(DenseOracle::from_symmetric(congruence(&g, &vec![1.0; n])))
}

/// `A·diag(d)·Aᵀ` with `A` an n×len(d) standard-normal matrix; rank len(d)
/// almost surely, indefinite when `d` has mixed signs.
pub fn low_rank_symmetric(n: usize, d: &[f64], seed: u64) -> Result<DenseOracle> {
    if n < 1 || d.is_empty() {
        return Err(Error::param("need n >= 1 and at least one diagonal entry"));
    }
    let a = gaussian_matrix(n, d.len(), seed);
    Ok(DenseOracle::from_symmetric(congruence(&a, d)))
}

/// Haar-distributed orthogonal matrix: QR of a Gaussian matrix with the
/// signs of `diag(R)` folded into `Q`.
pub fn random_orthogonal(n: usize, seed: u64) -> DMatrix<f64> {
    let qr = gaussian_matrix(n, n, seed).qr();
    let r = qr.r();
    let mut q = qr.q();
    for (k, mut col) in q.column_iter_mut().enumerate() {
        if r[(k, k)] < 0.0 {
            col.neg_mut();
        }
    }
    q
}

/// `Q·diag(eigenvalues)·Qᵀ` with a seeded Haar `Q`.
pub fn planted_spectrum(n: usize, eigenvalues: &[f64], seed: u64) -> Result<DenseOracle> {
    if n < 1 || eigenvalues.len() != n {
        return Err(Error::param(format!("need {n} eigenvalues, got {}", eigenvalues.len())));
    }
    if eigenvalues.iter().any(|v| !v.is_finite()) {
        return Err(Error::param("eigenvalues must be finite"));
    }
    let q = random_orthogonal(n, seed);
    Ok(DenseOracle::from_symmetric(congruence(&q, eigenvalues)))
}

/// One piece of a piecewise-uniform spectrum: `count` values from `U[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub count: usize,
    pub lo: f64,
    pub hi: f64,
}

/// Piecewise-uniform eigenvalue profile, written `count:lo..hi,...`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumProfile {
    pub segments: Vec<Segment>,
}

impl SpectrumProfile {
    /// 90% of eigenvalues in `U[0.5, 1]`, 10% in `U[-0.1, -0.001]`.
    pub fn near_psd(n: usize) -> Self {
        let negative = (n as f64 * 0.1).round() as usize;
        Self {
            segments: vec![
                Segment { count: n - negative, lo: 0.5, hi: 1.0 },
                Segment { count: negative, lo: -0.1, hi: -0.001 },
            ],
        }
    }

    pub fn len(&self) -> usize {
        self.segments.iter().map(|s| s.count).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn sample(&self, seed: u64) -> Vec<f64> {
        let mut rng = rng::stream(seed, Stream::Spectrum);
        let mut out = Vec::with_capacity(self.len());
        for seg in &self.segments {
            for _ in 0..seg.count {
                let u: f64 = rng.random();
                out.push(seg.lo + (seg.hi - seg.lo) * u);
            }
        }
        out
    }
}

impl FromStr for SpectrumProfile {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = |part: &str| Error::param(format!("bad profile segment '{part}', expected count:lo..hi"));
        let mut segments = Vec::new();
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (count, range) = part.split_once(':').ok_or_else(|| bad(part))?;
            let (lo, hi) = range.split_once("..").ok_or_else(|| bad(part))?;
            let count: usize = count.trim().parse().map_err(|_| bad(part))?;
            let lo: f64 = lo.trim().parse().map_err(|_| bad(part))?;
            let hi: f64 = hi.trim().parse().map_err(|_| bad(part))?;
            if !(lo.is_finite() && hi.is_finite()) || lo > hi {
                return Err(bad(part));
            }
            segments.push(Segment { count, lo, hi });
        }
        if segments.is_empty() {
            return Err(Error::param("empty spectrum profile"));
        }
        Ok(Self { segments })
    }
}

/// Planted matrix whose eigenvalues are drawn from `profile`.
pub fn planted_profile(profile: &SpectrumProfile, seed: u64) -> Result<DenseOracle> {
    let values = profile.sample(seed);
    planted_spectrum(values.len(), &values, seed)
}

/// Decaying near-PSD spectrum: `k^{-exponent}` for the positive part and
/// `round(n·neg_fraction)` values from `U[neg_lo, neg_hi]`.
pub fn decaying_spectrum(n: usize, exponent: f64, neg_fraction: f64, neg_lo: f64, neg_hi: f64, seed: u64) -> Vec<f64> {
    let negative = (n as f64 * neg_fraction).round() as usize;
    let mut values: Vec<f64> = (1..=n - negative).map(|k| (k as f64).powf(-exponent)).collect();
    let mut rng = rng::stream(seed, Stream::Spectrum);
    values.extend((0..negative).map(|_| neg_lo + (neg_hi - neg_lo) * rng.random::<f64>()));
    values
}

/// n×d standard-normal point cloud.
pub fn random_points(n: usize, d: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = rng::stream(seed, Stream::Points);
    let data: Vec<f64> = (0..n * d).map(|_| rng.sample(StandardNormal)).collect();
    DMatrix::from_row_slice(n, d, &data)
}

/// `Δ(i, j) = exp(-γ·‖p_i - p_j‖₂)` over the rows of a point matrix.
#[derive(Debug, Clone)]
pub struct ExpDistanceOracle {
    points: DMatrix<f64>,
    gamma: f64,
}

pub fn exp_distance_oracle(points: DMatrix<f64>, gamma: f64) -> Result<ExpDistanceOracle> {
    if gamma <= 0.0 || !gamma.is_finite() {
        return Err(Error::param(format!("gamma must be positive, got {gamma}")));
    }
    if points.nrows() == 0 {
        return Err(Error::param("no points"));
    }
    if points.iter().any(|v| !v.is_finite()) {
        return Err(Error::param("points must be finite"));
    }
    Ok(ExpDistanceOracle { points, gamma })
}

impl SimilarityOracle for ExpDistanceOracle {
    fn size(&self) -> usize {
        self.points.nrows()
    }

    fn evaluate(&self, i: usize, j: usize) -> Result<f64> {
        let sq: f64 = (0..self.points.ncols())
            .map(|k| {
                let d = self.points[(i, k)] - self.points[(j, k)];
                d * d
            })
            .sum();
        Ok((-self.gamma * sq.sqrt()).exp())
    }

    fn symmetric_hint(&self) -> bool {
        true
    }
}

/// Adds seeded `U(-ε, ε)` noise independently per ordered pair.
#[derive(Debug, Clone)]
pub struct NoisyOracle<O> {
    inner: O,
    epsilon: f64,
    seed: u64,
}

pub fn asymmetric_noise<O: SimilarityOracle>(inner: O, epsilon: f64, seed: u64) -> Result<NoisyOracle<O>> {
    if epsilon < 0.0 || !epsilon.is_finite() {
        return Err(Error::param(format!("epsilon must be non-negative, got {epsilon}")));
    }
    Ok(NoisyOracle { inner, epsilon, seed })
}

impl<O: SimilarityOracle> NoisyOracle<O> {
    /// Noise at ordered pair `(i, j)`: the 64-bit word at position
    /// `i·n + j` of the pair-noise stream, mapped to `[-ε, ε)`.
    pub fn noise(&self, i: usize, j: usize) -> f64 {
        if self.epsilon == 0.0 {
            return 0.0;
        }
        let mut rng = rng::stream(self.seed, Stream::PairNoise);
        let pos = (i as u128) * (self.inner.size() as u128) + j as u128;
        rng.set_word_pos(2 * pos);
        let u: f64 = rng.random();
        self.epsilon * (2.0 * u - 1.0)
    }
}

impl<O: SimilarityOracle> SimilarityOracle for NoisyOracle<O> {
    fn size(&self) -> usize {
        self.inner.size()
    }

    fn evaluate(&self, i: usize, j: usize) -> Result<f64> {
        Ok(self.inner.evaluate(i, j)? + self.noise(i, j))
    }

    fn symmetric_hint(&self) -> bool {
        self.epsilon == 0.0 && self.inner.symmetric_hint()
    }
}
