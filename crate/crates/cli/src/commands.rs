use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use serde_json::json;

use simapprox::evaluation::{self, eigen_histogram, error_sweep, run_method, spectrum_profile, Fitted, Method};
use simapprox::generators::{
    asymmetric_noise, exp_distance_oracle, planted_profile, planted_spectrum, random_points, random_psd,
    SpectrumProfile,
};
use simapprox::io::{fmt_f64, read_float_rows, stored_matrix_oracle, write_matrix, MatrixFormat};
use simapprox::linalg;
use simapprox::oracle::materialize;
use simapprox::{embed_cur, embed_nystrom, DenseOracle, Error, ExtensionMap, ShiftMode, SimilarityOracle};

use crate::{ApproxArgs, EmbedArgs, ExtendArgs, Failure, GenArgs, GenKind, HistogramArgs, MethodArgs, SpectrumArgs, SweepArgs};

fn write_file(path: &Path, contents: &str) -> Result<(), Failure> {
    fs::write(path, contents).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))
}

fn read_file(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))
}

fn load(path: &Path) -> Result<DenseOracle, Failure> {
    stored_matrix_oracle(path).map_err(|err| match err {
        Error::Io(e) => Failure::Io(format!("{}: {e}", path.display())),
        other => Failure::Io(format!("{}: {other}", path.display())),
    })
}

fn row_csv(index: usize, values: impl IntoIterator<Item = f64>) -> String {
    let mut line = index.to_string();
    for v in values {
        line.push(',');
        line.push_str(&fmt_f64(v));
    }
    line.push('\n');
    line
}

fn rows_of(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

pub fn gen(a: &GenArgs) -> Result<(), Failure> {
    let need_n = || a.n.ok_or_else(|| Failure::Usage("--n is required".into()));
    let oracle = match a.kind {
        GenKind::Psd => random_psd(need_n()?, a.seed)?,
        GenKind::Planted => {
            if let Some(text) = &a.profile {
                let profile: SpectrumProfile = text.parse()?;
                if a.n.is_some_and(|n| n != profile.len()) {
                    return Err(Failure::Usage(format!("profile has {} eigenvalues but --n is {}", profile.len(), a.n.unwrap())));
                }
                planted_profile(&profile, a.seed)?
            } else if let Some(values) = &a.eigenvalues {
                if a.n.is_some_and(|n| n != values.len()) {
                    return Err(Failure::Usage(format!("{} eigenvalues given but --n is {}", values.len(), a.n.unwrap())));
                }
                planted_spectrum(values.len(), values, a.seed)?
            } else {
                planted_profile(&SpectrumProfile::near_psd(need_n()?), a.seed)?
            }
        }
        GenKind::Expdist => {
            let points = random_points(need_n()?, a.dim, a.seed);
            DenseOracle::new(materialize(&exp_distance_oracle(points, a.gamma)?)?)?
        }
    };
    let matrix = match a.noise {
        Some(eps) => materialize(&asymmetric_noise(&oracle, eps, a.seed)?)?,
        None => oracle.into_matrix(),
    };
    write_matrix(&a.out, &matrix, MatrixFormat::from_path(&a.out))?;

    if a.analyze {
        let stored = DenseOracle::new(matrix)?;
        let reference = evaluation::reference(&stored);
        let values = linalg::eigenvalues(reference.matrix())?;
        let (count, mass) = evaluation::negativity_of(&values);
        println!("n={}", stored.size());
        println!("symmetric={}", stored.symmetric_hint());
        println!("lambda_min={}", fmt_f64(values[0]));
        println!("lambda_max={}", fmt_f64(values[values.len() - 1]));
        println!("negative_count={count}");
        println!("negative_mass={}", fmt_f64(mass));
    }
    Ok(())
}

pub fn spectrum(a: &SpectrumArgs) -> Result<(), Failure> {
    let k = evaluation::reference(&load(&a.matrix)?);
    let to = a.to.unwrap_or(k.size());
    let values = spectrum_profile(k.matrix(), a.from, to)?;
    let mut out = String::from("rank,eigenvalue\n");
    for (offset, v) in values.iter().enumerate() {
        writeln!(out, "{},{}", a.from + offset, fmt_f64(*v)).expect("string write");
    }
    write_file(&a.out, &out)
}

pub fn histogram(a: &HistogramArgs) -> Result<(), Failure> {
    let k = evaluation::reference(&load(&a.matrix)?);
    let hist = eigen_histogram(&k, a.sample, a.trials, a.seed, a.bins)?;
    let mut out = String::from("trial,index,eigenvalue\n");
    for &(trial, index, value) in &hist.pooled {
        writeln!(out, "{trial},{index},{}", fmt_f64(value)).expect("string write");
    }
    write_file(&a.out, &out)?;
    let mut bins = String::from("bin_lo,bin_hi,count\n");
    for b in &hist.bins {
        writeln!(bins, "{},{},{}", fmt_f64(b.lo), fmt_f64(b.hi), b.count).expect("string write");
    }
    let bins_path = a.bins_out.clone().unwrap_or_else(|| a.out.with_extension("bins.csv"));
    write_file(&bins_path, &bins)
}

/// Applies the flag overrides to the method string and fills in `s2`.
fn resolve(m: &MethodArgs, n: usize, strict_psd: bool) -> Result<(Method, usize, usize), Failure> {
    let mut method: Method = m.method.parse()?;
    if let Some(value) = m.alpha {
        let Method::Sms { alpha, .. } = &mut method else {
            return Err(Failure::Usage("--alpha applies to sms methods only".into()));
        };
        *alpha = value;
    }
    if m.verbatim {
        let Method::Sms { mode, .. } = &mut method else {
            return Err(Failure::Usage("--verbatim applies to sms methods only".into()));
        };
        *mode = ShiftMode::Verbatim;
    }
    if strict_psd {
        if method != Method::Nystrom {
            return Err(Failure::Usage("--strict-psd applies to nystrom only".into()));
        }
        method = Method::NystromPsd;
    }
    let s1 = m.s1;
    let s2 = match method {
        Method::Sms { z, .. } => m.s2.unwrap_or((z * s1).min(n)),
        Method::Skeleton(_) => m.s2.unwrap_or(s1),
        _ => s1,
    };
    if matches!(method, Method::Sms { .. }) && s2 < s1 {
        return Err(Failure::Usage(format!("sms requires s2 >= s1, got s1 = {s1}, s2 = {s2}")));
    }
    Ok((method, s1, s2))
}

fn factor_json(fitted: &Fitted) -> serde_json::Value {
    match fitted {
        Fitted::Nystrom(f) => json!({
            "kind": "nystrom",
            "landmarks": f.landmarks.indices(),
            "shift": f.shift,
            "alpha": f.alpha,
            "rescale_beta": f.rescale_beta,
            "signs": f.signs,
            "z": rows_of(&f.z),
        }),
        Fitted::Cur(f) => json!({
            "kind": "cur",
            "method": f.method.label(),
            "col_landmarks": f.col_landmarks.indices(),
            "row_landmarks": f.row_landmarks.indices(),
            "c": rows_of(&f.c),
            "u": rows_of(&f.u),
            "r": rows_of(&f.r),
        }),
        Fitted::Spectral(f) => json!({
            "kind": "spectral",
            "values": f.values.as_slice(),
            "basis": rows_of(&f.basis),
        }),
    }
}

pub fn approx(a: &ApproxArgs) -> Result<(), Failure> {
    let stored = load(&a.matrix)?;
    let (method, s1, s2) = resolve(&a.method, stored.size(), a.strict_psd)?;
    let (fitted, report) = run_method(&method, &stored, s1, s2, a.method.seed, a.method.rcond)?;
    if let Some(path) = &a.factor_out {
        let text = serde_json::to_string(&factor_json(&fitted)).expect("serializable");
        write_file(path, &text)?;
    }
    let out = format!("{}\n{}\n", evaluation::ErrorReport::HEADER, report.csv_row(a.timing));
    match &a.report {
        Some(path) => write_file(path, &out),
        None => {
            print!("{out}");
            Ok(())
        }
    }
}

pub fn sweep(a: &SweepArgs) -> Result<(), Failure> {
    let stored = load(&a.matrix)?;
    let methods = a.methods.iter().map(|m| m.parse::<Method>()).collect::<Result<Vec<_>, _>>()?;
    let rows = error_sweep(&stored, &methods, &a.fractions, a.trials, a.seed)?;
    write_file(&a.out, &evaluation::sweep_csv(&rows))
}

/// Everything `extend` needs to embed a new point.
#[derive(Debug, Serialize, Deserialize)]
pub struct LandmarkFile {
    pub method: String,
    pub n: usize,
    pub landmarks: Vec<usize>,
    pub shift: f64,
    pub alpha: Option<f64>,
    pub rescale_beta: Option<f64>,
    pub dim: usize,
    /// Landmark-by-dimension map from similarities to coordinates.
    pub inner_root: Vec<Vec<f64>>,
}

impl LandmarkFile {
    fn into_map(self) -> Result<ExtensionMap, Failure> {
        let s = self.landmarks.len();
        if self.inner_root.len() != s || self.inner_root.iter().any(|r| r.len() != self.dim) {
            return Err(Failure::Io(format!("landmark file: inner_root must be {s}x{}", self.dim)));
        }
        let flat: Vec<f64> = self.inner_root.into_iter().flatten().collect();
        Ok(ExtensionMap { landmarks: self.landmarks, shift: self.shift, root: DMatrix::from_row_slice(s, self.dim, &flat) })
    }
}

pub fn embed(a: &EmbedArgs) -> Result<(), Failure> {
    let stored = load(&a.matrix)?;
    let k = evaluation::reference(&stored);
    let n = k.size();
    let (mut method, s1, s2) = resolve(&a.method, n, false)?;
    if method == Method::Nystrom {
        method = Method::NystromPsd;
    }
    if method == Method::Optimal {
        return Err(Failure::Usage("embed supports nystrom, sms and the CUR methods".into()));
    }
    let fitted = evaluation::fit(&method, &k, s1, s2, a.method.seed, a.method.rcond).map_err(|err| match err {
        Error::NotPsd { .. } => {
            Failure::Numeric(format!("{err}; classic Nyström cannot embed an indefinite sample, use --method sms"))
        }
        other => other.into(),
    })?;
    let (embedding, map, alpha, beta) = match &fitted {
        Fitted::Nystrom(f) => (embed_nystrom(f)?, f.extension_map()?, Some(f.alpha), Some(f.rescale_beta)),
        Fitted::Cur(f) => {
            let (embedding, map) = embed_cur(f, a.method.rcond)?;
            (embedding, map, None, None)
        }
        Fitted::Spectral(_) => unreachable!("optimal rejected above"),
    };

    let mut out = String::new();
    for (i, row) in embedding.row_iter().enumerate() {
        out.push_str(&row_csv(i, row.iter().copied()));
    }
    write_file(&a.out, &out)?;

    let file = LandmarkFile {
        method: method.to_string(),
        n,
        dim: map.dim(),
        landmarks: map.landmarks.clone(),
        shift: map.shift,
        alpha,
        rescale_beta: beta,
        inner_root: rows_of(&map.root),
    };
    write_file(&a.landmarks, &serde_json::to_string_pretty(&file).expect("serializable"))
}

pub fn extend(a: &ExtendArgs) -> Result<(), Failure> {
    let text = read_file(&a.landmarks)?;
    let file: LandmarkFile = serde_json::from_str(&text)
        .map_err(|e| Failure::Io(format!("{}: invalid landmark file: {e}", a.landmarks.display())))?;
    let map = file.into_map()?;
    let rows = read_float_rows(&a.similarities).map_err(|err| match err {
        Error::Io(e) => Failure::Io(format!("{}: {e}", a.similarities.display())),
        other => Failure::Io(format!("{}: {other}", a.similarities.display())),
    })?;
    let mut out = String::new();
    for (r, row) in rows.iter().enumerate() {
        let (index, point, sims) = if a.indexed {
            let Some((&first, sims)) = row.split_first() else {
                return Err(Failure::Usage(format!("row {r}: missing index")));
            };
            if !(first >= 0.0 && first.fract() == 0.0) {
                return Err(Failure::Usage(format!("row {r}: index {first} is not a non-negative integer")));
            }
            (first as usize, Some(first as usize), sims)
        } else {
            (r, None, row.as_slice())
        };
        let coords = map.extend(sims, point).map_err(|e| Failure::Usage(format!("row {r}: {e}")))?;
        out.push_str(&row_csv(index, coords.iter().copied()));
    }
    write_file(&a.out, &out)
}
