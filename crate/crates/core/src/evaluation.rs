//! Error metrics, experiment harnesses and trial aggregation.

use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;
use std::time::Instant;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::cur::{self, Sampling, StaCurVariant};
use crate::error::{Error, Result};
use crate::factor::{Approximation, CurFactor, NystromFactor, SpectralFactor};
use crate::io::fmt_f64;
use crate::linalg::{self, EigenDecomposition, DEFAULT_RCOND, PSD_TOL};
use crate::nystrom::{self, ShiftMode, SmsParams};
use crate::oracle::{counting_oracle, gather_block, materialize, DenseOracle, Rows, SimilarityOracle};
use crate::sample::sample_uniform;

/// `‖K − K̃‖_F / ‖K‖_F`.
pub fn rel_fro_error<A: Approximation + ?Sized>(k: &DMatrix<f64>, approx: &A) -> Result<f64> {
    if approx.size() != k.nrows() || !k.is_square() {
        return Err(Error::param(format!(
            "approximation is {}x{}, reference is {}x{}",
            approx.size(),
            approx.size(),
            k.nrows(),
            k.ncols()
        )));
    }
    rel_fro_error_dense(k, &approx.to_dense())
}

pub fn rel_fro_error_dense(k: &DMatrix<f64>, approx: &DMatrix<f64>) -> Result<f64> {
    let norm = k.norm();
    if norm == 0.0 {
        return Err(Error::UndefinedMetric);
    }
    Ok((k - approx).norm() / norm)
}

/// An approximation method together with its tunable parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Method {
    /// Classic Nyström on the signed factored path.
    Nystrom,
    /// Classic Nyström through the PSD inverse square root; indefinite
    /// samples are a numeric error.
    NystromPsd,
    Sms { alpha: f64, z: usize, mode: ShiftMode, rescale: bool },
    Skeleton(Sampling),
    SiCur,
    StaCur(StaCurVariant),
    Optimal,
}

impl Method {
    pub fn sms() -> Self {
        Self::sms_with(ShiftMode::Clamped, false)
    }

    pub fn sms_with(mode: ShiftMode, rescale: bool) -> Self {
        Method::Sms { alpha: SmsParams::DEFAULT_ALPHA, z: SmsParams::DEFAULT_MULTIPLIER, mode, rescale }
    }

    pub fn label(&self) -> &'static str {
        match self {
            Method::Nystrom => "nystrom",
            Method::NystromPsd => "nystrom-psd",
            Method::Sms { mode: ShiftMode::Verbatim, rescale: true, .. } => "sms-verbatim-rescaled",
            Method::Sms { mode: ShiftMode::Verbatim, .. } => "sms-verbatim",
            Method::Sms { rescale: true, .. } => "sms-rescaled",
            Method::Sms { .. } => "sms",
            Method::Skeleton(Sampling::Independent) => "skeleton",
            Method::Skeleton(Sampling::Nested) => "skeleton-nested",
            Method::SiCur => "sicur",
            Method::StaCur(StaCurVariant::Shared) => "stacur-s",
            Method::StaCur(StaCurVariant::Distinct) => "stacur-d",
            Method::Optimal => "optimal",
        }
    }

    pub fn is_cur(&self) -> bool {
        matches!(self, Method::Skeleton(_) | Method::SiCur | Method::StaCur(_))
    }

    pub fn alpha(&self) -> Option<f64> {
        match self {
            Method::Sms { alpha, .. } => Some(*alpha),
            _ => None,
        }
    }

    /// Sample sizes `(s1, s2)` for a fraction `s/n`. SiCUR reads the fraction
    /// as `s2/n` and halves it; SMS caps `z·s1` at `n`.
    pub fn sizes(&self, n: usize, fraction: f64) -> Result<(usize, usize)> {
        if !(fraction > 0.0 && fraction <= 1.0) {
            return Err(Error::param(format!("fraction must lie in (0, 1], got {fraction}")));
        }
        let s = (fraction * n as f64).round() as usize;
        let (s1, s2) = match self {
            Method::SiCur => (s / 2, s),
            Method::Sms { z, .. } => (s, (z * s).min(n)),
            _ => (s, s),
        };
        if s1 < 1 {
            return Err(Error::param(format!("fraction {fraction} gives s1 = 0 for n = {n}")));
        }
        Ok((s1, s2))
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())?;
        if let Method::Sms { alpha, z, .. } = self {
            if *alpha != SmsParams::DEFAULT_ALPHA {
                write!(f, ":alpha={alpha}")?;
            }
            if *z != SmsParams::DEFAULT_MULTIPLIER {
                write!(f, ":z={z}")?;
            }
        }
        Ok(())
    }
}

impl FromStr for Method {
    type Err = Error;

    /// `label[:alpha=A][:z=Z]`; parameters apply to the sms family only.
    fn from_str(s: &str) -> Result<Self> {
        let mut parts = s.trim().split(':');
        let base = parts.next().unwrap_or_default();
        let mut method = match base {
            "nystrom" => Method::Nystrom,
            "nystrom-psd" => Method::NystromPsd,
            "sms" => Method::sms(),
            "sms-rescaled" => Method::sms_with(ShiftMode::Clamped, true),
            "sms-verbatim" => Method::sms_with(ShiftMode::Verbatim, false),
            "sms-verbatim-rescaled" => Method::sms_with(ShiftMode::Verbatim, true),
            "skeleton" => Method::Skeleton(Sampling::Independent),
            "skeleton-nested" => Method::Skeleton(Sampling::Nested),
            "sicur" => Method::SiCur,
            "stacur-s" => Method::StaCur(StaCurVariant::Shared),
            "stacur-d" => Method::StaCur(StaCurVariant::Distinct),
            "optimal" => Method::Optimal,
            other => return Err(Error::param(format!("unknown method '{other}'"))),
        };
        for part in parts {
            let (key, value) = part
                .split_once('=')
                .ok_or_else(|| Error::param(format!("expected key=value in '{s}', got '{part}'")))?;
            let Method::Sms { alpha, z, .. } = &mut method else {
                return Err(Error::param(format!("method '{base}' takes no parameters")));
            };
            match key {
                "alpha" => {
                    *alpha = value.parse().map_err(|_| Error::param(format!("bad alpha '{value}'")))?;
                }
                "z" => {
                    *z = value.parse().map_err(|_| Error::param(format!("bad z '{value}'")))?;
                    if *z < 1 {
                        return Err(Error::param("z must be >= 1"));
                    }
                }
                other => return Err(Error::param(format!("unknown parameter '{other}'"))),
            }
        }
        Ok(method)
    }
}

/// Output of [`fit`].
#[derive(Debug, Clone)]
pub enum Fitted {
    Nystrom(NystromFactor),
    Cur(CurFactor),
    Spectral(SpectralFactor),
}

impl Approximation for Fitted {
    fn size(&self) -> usize {
        match self {
            Fitted::Nystrom(f) => f.size(),
            Fitted::Cur(f) => f.size(),
            Fitted::Spectral(f) => f.size(),
        }
    }

    fn rank_bound(&self) -> usize {
        match self {
            Fitted::Nystrom(f) => f.rank_bound(),
            Fitted::Cur(f) => f.rank_bound(),
            Fitted::Spectral(f) => f.rank_bound(),
        }
    }

    fn block(&self, rows: &[usize], cols: &[usize]) -> DMatrix<f64> {
        match self {
            Fitted::Nystrom(f) => f.block(rows, cols),
            Fitted::Cur(f) => f.block(rows, cols),
            Fitted::Spectral(f) => f.block(rows, cols),
        }
    }

    fn to_dense(&self) -> DMatrix<f64> {
        match self {
            Fitted::Nystrom(f) => f.to_dense(),
            Fitted::Cur(f) => f.to_dense(),
            Fitted::Spectral(f) => f.to_dense(),
        }
    }
}

/// Runs `method` with explicit sample sizes. `s2` is ignored by methods that
/// use a single sample; `optimal` takes `k = s1` and reads the whole matrix.
pub fn fit<O: SimilarityOracle + ?Sized>(
    method: &Method,
    oracle: &O,
    s1: usize,
    s2: usize,
    seed: u64,
    rcond: f64,
) -> Result<Fitted> {
    Ok(match *method {
        Method::Nystrom => Fitted::Nystrom(nystrom::classic_nystrom(oracle, s1, seed, rcond)?),
        Method::NystromPsd => Fitted::Nystrom(nystrom::classic_nystrom_psd(oracle, s1, seed, rcond)?),
        Method::Sms { alpha, mode, rescale, .. } => {
            let params = SmsParams { s1, s2, alpha, shift_mode: mode, rescale, rcond };
            Fitted::Nystrom(nystrom::sms_nystrom(oracle, &params, seed)?)
        }
        Method::Skeleton(sampling) => Fitted::Cur(cur::skeleton(oracle, s1, s2, sampling, seed, rcond)?),
        Method::SiCur => Fitted::Cur(cur::sicur(oracle, s1, seed, rcond)?),
        Method::StaCur(variant) => Fitted::Cur(cur::stacur(oracle, s1, variant, seed, rcond)?),
        Method::Optimal => Fitted::Spectral(linalg::optimal_rank_k(&materialize(oracle)?, s1)?),
    })
}

/// One approximation run.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorReport {
    pub method: String,
    pub s1: usize,
    pub s2: usize,
    pub alpha: Option<f64>,
    pub seed: u64,
    pub rel_fro_error: f64,
    pub oracle_calls: usize,
    pub wall_time: f64,
}

impl ErrorReport {
    pub const HEADER: &'static str = "method,s1,s2,alpha,seed,rel_fro_error,oracle_calls,wall_time";

    /// CSV row; `wall_time` is left empty unless `timing` is set so that
    /// repeated runs produce identical rows.
    pub fn csv_row(&self, timing: bool) -> String {
        format!(
            "{},{},{},{},{},{},{},{}",
            self.method,
            self.s1,
            self.s2,
            self.alpha.map(fmt_f64).unwrap_or_default(),
            self.seed,
            fmt_f64(self.rel_fro_error),
            self.oracle_calls,
            if timing { fmt_f64(self.wall_time) } else { String::new() }
        )
    }
}

/// The stored matrix that errors are measured against: symmetrized when
/// the source is asymmetric.
pub fn reference(oracle: &DenseOracle) -> DenseOracle {
    if oracle.symmetric_hint() {
        oracle.clone()
    } else {
        oracle.symmetrized()
    }
}

/// Fits `method` on the reference matrix through a call counter and
/// measures its error.
pub fn run_method(
    method: &Method,
    oracle: &DenseOracle,
    s1: usize,
    s2: usize,
    seed: u64,
    rcond: f64,
) -> Result<(Fitted, ErrorReport)> {
    let k = reference(oracle);
    let counter = counting_oracle(&k);
    let start = Instant::now();
    let fitted = fit(method, &counter, s1, s2, seed, rcond)?;
    let wall_time = start.elapsed().as_secs_f64();
    let report = ErrorReport {
        method: method.to_string(),
        s1,
        s2: reported_s2(method, s1, s2),
        alpha: method.alpha(),
        seed,
        rel_fro_error: rel_fro_error(k.matrix(), &fitted)?,
        oracle_calls: counter.calls(),
        wall_time,
    };
    Ok((fitted, report))
}

fn reported_s2(method: &Method, s1: usize, s2: usize) -> usize {
    match method {
        Method::Sms { .. } | Method::Skeleton(_) => s2,
        Method::SiCur => 2 * s1,
        _ => s1,
    }
}

/// Aggregate of one (method, fraction) cell of a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub method: String,
    pub fraction: f64,
    pub s1: usize,
    pub s2: usize,
    pub mean_err: f64,
    pub std_err: f64,
    pub mean_calls: f64,
    /// Per-trial errors in trial order.
    pub errors: Vec<f64>,
}

impl SweepRow {
    pub const HEADER: &'static str = "method,fraction,s1,s2,mean_err,std_err,mean_calls";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{}",
            self.method,
            fmt_f64(self.fraction),
            self.s1,
            self.s2,
            fmt_f64(self.mean_err),
            fmt_f64(self.std_err),
            fmt_f64(self.mean_calls)
        )
    }
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from(SweepRow::HEADER);
    out.push('\n');
    for row in rows {
        out.push_str(&row.csv_row());
        out.push('\n');
    }
    out
}

/// Mean and sample (n−1) standard deviation; the deviation of a single
/// value is 0.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Runs every (method, fraction) cell for `trials` seeds `base_seed + t`.
///
/// Rows follow the order of `methods`, then `fractions`. Each run gets a
/// fresh call counter; `optimal` shares one eigendecomposition and reports
/// the cost of reading the full matrix.
pub fn error_sweep(
    oracle: &DenseOracle,
    methods: &[Method],
    fractions: &[f64],
    trials: usize,
    base_seed: u64,
) -> Result<Vec<SweepRow>> {
    if trials == 0 {
        return Err(Error::param("trials must be >= 1"));
    }
    let k = reference(oracle);
    let n = k.size();
    let mut cells = Vec::new();
    for method in methods {
        for &fraction in fractions {
            let (s1, s2) = method.sizes(n, fraction)?;
            cells.push((method, fraction, s1, s2));
        }
    }

    let eig: OnceLock<Result<EigenDecomposition>> = OnceLock::new();
    let full_cost = n * (n + 1) / 2;
    let jobs: Vec<(usize, u64)> = (0..cells.len())
        .flat_map(|c| (0..trials as u64).map(move |t| (c, base_seed.wrapping_add(t))))
        .collect();
    let results: Vec<Result<(f64, usize)>> = jobs
        .par_iter()
        .map(|&(c, seed)| {
            let (method, _, s1, s2) = cells[c];
            if let Method::Optimal = method {
                let eig = eig.get_or_init(|| linalg::sym_eig(k.matrix())).as_ref().map_err(clone_error)?;
                let approx = linalg::optimal_rank_k_of(eig, s1)?;
                return Ok((rel_fro_error(k.matrix(), &approx)?, full_cost));
            }
            let counter = counting_oracle(&k);
            let fitted = fit(method, &counter, s1, s2, seed, DEFAULT_RCOND)?;
            Ok((rel_fro_error(k.matrix(), &fitted)?, counter.calls()))
        })
        .collect();

    let mut results = results.into_iter();
    let mut rows = Vec::with_capacity(cells.len());
    for &(method, fraction, s1, s2) in &cells {
        let mut errors = Vec::with_capacity(trials);
        let mut calls = 0usize;
        for _ in 0..trials {
            let (err, c) = results.next().expect("one result per job")?;
            errors.push(err);
            calls += c;
        }
        let (mean_err, std_err) = mean_std(&errors);
        rows.push(SweepRow {
            method: method.to_string(),
            fraction,
            s1,
            s2: reported_s2(method, s1, s2),
            mean_err,
            std_err,
            mean_calls: calls as f64 / trials as f64,
            errors,
        });
    }
    Ok(rows)
}

fn clone_error(err: &Error) -> Error {
    match err {
        Error::NoConvergence(what) => Error::NoConvergence(what),
        Error::NotSymmetric { asymmetry, scale } => Error::NotSymmetric { asymmetry: *asymmetry, scale: *scale },
        other => Error::param(other.to_string()),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bin {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

/// Eigenvalues of sampled principal submatrices, pooled over trials.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    /// `(trial, index, eigenvalue)` with eigenvalues ascending per trial.
    pub pooled: Vec<(usize, usize, f64)>,
    pub bins: Vec<Bin>,
}

impl Histogram {
    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        self.pooled.iter().map(|p| p.2)
    }
}

/// Eigenvalues of `SᵀKS` for `trials` independent uniform samples (seeds
/// `seed + t`), binned into `bins` equal-width bins over the pooled range.
/// Blocks of an asymmetric oracle are symmetrized.
pub fn eigen_histogram<O: SimilarityOracle + ?Sized>(
    oracle: &O,
    sample_size: usize,
    trials: usize,
    seed: u64,
    bins: usize,
) -> Result<Histogram> {
    if bins == 0 {
        return Err(Error::param("bins must be >= 1"));
    }
    let n = oracle.size();
    let per_trial: Vec<Result<Vec<f64>>> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let sample = sample_uniform(n, sample_size, seed.wrapping_add(t as u64))?;
            let block = gather_block(oracle, Rows::Indices(sample.indices()), sample.indices())?;
            linalg::eigenvalues(&linalg::symmetrize(block))
        })
        .collect();
    let mut pooled = Vec::with_capacity(trials * sample_size);
    for (t, values) in per_trial.into_iter().enumerate() {
        pooled.extend(values?.into_iter().enumerate().map(|(i, v)| (t, i, v)));
    }
    let bins = bin_values(pooled.iter().map(|p| p.2), bins);
    Ok(Histogram { pooled, bins })
}

fn bin_values(values: impl Iterator<Item = f64> + Clone, bins: usize) -> Vec<Bin> {
    let (mut lo, mut hi) = values.clone().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if lo > hi {
        return Vec::new();
    }
    if lo == hi {
        lo -= 0.5;
        hi += 0.5;
    }
    let width = (hi - lo) / bins as f64;
    let mut out: Vec<Bin> = (0..bins)
        .map(|b| Bin {
            lo: lo + b as f64 * width,
            hi: if b + 1 == bins { hi } else { lo + (b + 1) as f64 * width },
            count: 0,
        })
        .collect();
    for v in values {
        let b = (((v - lo) / width) as usize).min(bins - 1);
        out[b].count += 1;
    }
    out
}

/// Signed eigenvalues by descending magnitude, ranks `from..=to` (1-based).
pub fn spectrum_profile(k: &DMatrix<f64>, from_rank: usize, to_rank: usize) -> Result<Vec<f64>> {
    let n = k.nrows();
    if !(1 <= from_rank && from_rank <= to_rank && to_rank <= n) {
        return Err(Error::param(format!("need 1 <= from <= to <= {n}, got {from_rank}..{to_rank}")));
    }
    let values = linalg::eigenvalues(k)?;
    let order = linalg::magnitude_order(&values);
    Ok(order[from_rank - 1..to_rank].iter().map(|&i| values[i]).collect())
}

/// Number of negative eigenvalues and their share `Σ|λ₋| / Σ|λ|`.
///
/// Eigenvalues within `PSD_TOL·‖K‖₂` of zero count as zero so that roundoff
/// on a PSD matrix is not reported as negativity.
pub fn negativity_summary(k: &DMatrix<f64>) -> Result<(usize, f64)> {
    let values = linalg::eigenvalues(k)?;
    Ok(negativity_of(&values))
}

pub fn negativity_of(values: &[f64]) -> (usize, f64) {
    let radius = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let cutoff = -PSD_TOL * radius;
    let total: f64 = values.iter().map(|v| v.abs()).sum();
    let negative: Vec<f64> = values.iter().copied().filter(|&v| v < cutoff).collect();
    let mass = if total > 0.0 { negative.iter().map(|v| v.abs()).sum::<f64>() / total } else { 0.0 };
    (negative.len(), mass)
}
