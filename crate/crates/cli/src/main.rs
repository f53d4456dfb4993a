mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

/// Sublinear-time approximation of indefinite similarity matrices.
///
/// Flags may also come from a JSON config (`--config FILE`) whose keys are
/// flag names of the chosen subcommand; command-line flags take precedence.
#[derive(Debug, Parser)]
#[command(name = "simapprox", version, args_override_self = true)]
pub struct Cli {
    /// Worker threads for sweeps and block gathers (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic similarity matrix.
    Gen(GenArgs),
    /// Signed eigenvalues by descending magnitude.
    Spectrum(SpectrumArgs),
    /// Eigenvalues of sampled principal submatrices.
    Histogram(HistogramArgs),
    /// Run one approximation and report its error.
    Approx(ApproxArgs),
    /// Error versus sample fraction, averaged over trials.
    Sweep(SweepArgs),
    /// Write embeddings and a landmark file for extension.
    Embed(EmbedArgs),
    /// Embed new points from their similarities to the landmarks.
    Extend(ExtendArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum GenKind {
    /// G·Gᵀ with G n×n standard normal.
    Psd,
    /// Haar-rotated diagonal with a requested spectrum.
    Planted,
    /// exp(-gamma·‖xᵢ − xⱼ‖) over Gaussian points.
    Expdist,
}

#[derive(Debug, Args)]
pub struct GenArgs {
    pub kind: GenKind,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long, env = "SIMAPPROX_SEED", default_value_t = 0)]
    pub seed: u64,
    /// Piecewise-uniform spectrum, e.g. "45:0.5..1,5:-0.1..-0.001".
    #[arg(long, conflicts_with = "eigenvalues")]
    pub profile: Option<String>,
    /// Explicit comma-separated eigenvalues.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub eigenvalues: Option<Vec<f64>>,
    /// Point dimension for expdist.
    #[arg(long, default_value_t = 3)]
    pub dim: usize,
    #[arg(long, default_value_t = 1.0)]
    pub gamma: f64,
    /// Uniform asymmetric noise amplitude added to every entry.
    #[arg(long)]
    pub noise: Option<f64>,
    /// Output path; `.csv` writes CSV, anything else binary.
    #[arg(long)]
    pub out: PathBuf,
    /// Print size, symmetry and eigenvalue summary.
    #[arg(long)]
    pub analyze: bool,
}

#[derive(Debug, Args)]
pub struct SpectrumArgs {
    #[arg(long)]
    pub matrix: PathBuf,
    #[arg(long, default_value_t = 1)]
    pub from: usize,
    /// Last rank (default: n).
    #[arg(long)]
    pub to: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct HistogramArgs {
    #[arg(long)]
    pub matrix: PathBuf,
    #[arg(long)]
    pub sample: usize,
    #[arg(long, default_value_t = 50)]
    pub trials: usize,
    #[arg(long, env = "SIMAPPROX_SEED", default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 50)]
    pub bins: usize,
    #[arg(long)]
    pub out: PathBuf,
    /// Binned summary path (default: OUT with extension `bins.csv`).
    #[arg(long)]
    pub bins_out: Option<PathBuf>,
}

/// Method selection shared by `approx` and `embed`.
#[derive(Debug, Args)]
pub struct MethodArgs {
    /// nystrom, sms, sms-rescaled, skeleton, skeleton-nested, sicur,
    /// stacur-s, stacur-d or optimal; sms also accepts `:alpha=A:z=Z`.
    #[arg(long)]
    pub method: String,
    #[arg(long)]
    pub s1: usize,
    /// Second sample size (default: min(z·s1, n) for sms, s1 for skeleton).
    #[arg(long)]
    pub s2: Option<usize>,
    /// Shift multiplier for sms.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Use the unclamped shift e = -alpha·lambda_min.
    #[arg(long)]
    pub verbatim: bool,
    #[arg(long, env = "SIMAPPROX_SEED", default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = simapprox::linalg::DEFAULT_RCOND)]
    pub rcond: f64,
}

#[derive(Debug, Args)]
pub struct ApproxArgs {
    #[arg(long)]
    pub matrix: PathBuf,
    #[command(flatten)]
    pub method: MethodArgs,
    /// Run classic Nyström through the PSD inverse square root and fail on
    /// indefinite samples.
    #[arg(long)]
    pub strict_psd: bool,
    /// Write the factor as JSON.
    #[arg(long)]
    pub factor_out: Option<PathBuf>,
    /// Report CSV path (default: stdout).
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Fill the wall_time column (makes the report run-dependent).
    #[arg(long)]
    pub timing: bool,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long)]
    pub matrix: PathBuf,
    #[arg(long, value_delimiter = ',', required = true)]
    pub methods: Vec<String>,
    #[arg(long, value_delimiter = ',', required = true)]
    pub fractions: Vec<f64>,
    #[arg(long, default_value_t = 10)]
    pub trials: usize,
    #[arg(long, env = "SIMAPPROX_SEED", default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EmbedArgs {
    #[arg(long)]
    pub matrix: PathBuf,
    #[command(flatten)]
    pub method: MethodArgs,
    /// Embedding CSV: row index, then the coordinates.
    #[arg(long)]
    pub out: PathBuf,
    /// Landmark JSON for `extend`.
    #[arg(long)]
    pub landmarks: PathBuf,
}

#[derive(Debug, Args)]
pub struct ExtendArgs {
    #[arg(long)]
    pub landmarks: PathBuf,
    /// CSV rows of similarities to the landmarks, in landmark order.
    #[arg(long)]
    pub similarities: PathBuf,
    /// The first column of each row is the point's dataset index; landmarks
    /// then receive the fitted diagonal shift.
    #[arg(long)]
    pub indexed: bool,
    #[arg(long)]
    pub out: PathBuf,
}

/// Failure classes and their exit codes.
#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Io(String),
    Numeric(String),
}

impl Failure {
    pub fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 2,
            Failure::Io(_) => 3,
            Failure::Numeric(_) => 4,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Usage(m) | Failure::Io(m) | Failure::Numeric(m) => m,
        }
    }
}

impl From<simapprox::Error> for Failure {
    fn from(err: simapprox::Error) -> Self {
        use simapprox::Error;
        match &err {
            Error::Parameter(_) => Failure::Usage(err.to_string()),
            Error::Io(_) | Error::Format(_) => Failure::Io(err.to_string()),
            _ => Failure::Numeric(err.to_string()),
        }
    }
}

fn run(args: Vec<String>) -> Result<(), Failure> {
    let args = config::expand(args)?;
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(err) => {
            let code = if err.use_stderr() { 2 } else { 0 };
            let _ = err.print();
            return if code == 0 { Ok(()) } else { Err(Failure::Usage(String::new())) };
        }
    };
    if let Some(threads) = cli.threads {
        if threads == 0 {
            return Err(Failure::Usage("--threads must be >= 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| Failure::Usage(e.to_string()))?;
    }
    match cli.command {
        Command::Gen(a) => commands::gen(&a),
        Command::Spectrum(a) => commands::spectrum(&a),
        Command::Histogram(a) => commands::histogram(&a),
        Command::Approx(a) => commands::approx(&a),
        Command::Sweep(a) => commands::sweep(&a),
        Command::Embed(a) => commands::embed(&a),
        Command::Extend(a) => commands::extend(&a),
    }
}

fn main() -> ExitCode {
    match run(std::env::args().collect()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            if !failure.message().is_empty() {
                eprintln!("error: {}", failure.message());
            }
            ExitCode::from(failure.code())
        }
    }
}
