//! `frfkit`: run identification scenarios and evaluate model FRFs.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use frfkit_core::scenario::{export_report, parse_config, run_scenario, SeedConfig};
use frfkit_core::signals::bin_frequencies;
use frfkit_core::sim::{discretize_zoh, true_frf, StateSpaceModel, TimeDomain};
use frfkit_core::FrfError;

const EXIT_FAILURE: u8 = 1;
const EXIT_VALIDATION: u8 = 2;
const EXIT_DEFECTS: u8 = 3;

#[derive(Parser)]
#[command(name = "frfkit", version, about = "Nonparametric FRF identification scenarios")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario config and export CSV/JSON results.
    Run {
        config: PathBuf,
        /// Output directory; overrides `output_dir` in the config.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Replaces the configured seeds (phase seed N, noise seed N + 2^32).
        #[arg(long)]
        seed_override: Option<u64>,
    },
    /// Print the exact FRF of a state-space model as CSV.
    ///
    /// Emits N bins from DC to Nyquist, the one-sided grid of a
    /// 2(N - 1)-sample DFT. Continuous models are discretised with a
    /// zero-order hold at 1/fs.
    Oracle {
        model: PathBuf,
        #[arg(long)]
        fs: f64,
        #[arg(long)]
        bins: usize,
        /// Write to a file instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

enum Failure {
    Validation(String),
    Runtime(String),
}

impl From<FrfError> for Failure {
    fn from(e: FrfError) -> Self {
        match e {
            FrfError::Config(_) | FrfError::Json(_) | FrfError::Parse(_) => Failure::Validation(e.to_string()),
            other => Failure::Runtime(other.to_string()),
        }
    }
}

fn configure_threads() -> Result<(), Failure> {
    let Ok(value) = std::env::var("FRFKIT_THREADS") else {
        return Ok(());
    };
    let n: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&n| n >= 1)
        .ok_or_else(|| Failure::Validation(format!("FRFKIT_THREADS must be a positive integer, got {value:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Failure::Runtime(format!("thread pool: {e}")))
}

fn run(config: &Path, out: Option<PathBuf>, seed_override: Option<u64>) -> Result<u8, Failure> {
    let mut cfg = parse_config(config).map_err(|e| match e {
        FrfError::Io { .. } => Failure::Validation(e.to_string()),
        other => other.into(),
    })?;
    if let Some(n) = seed_override {
        cfg.seeds = SeedConfig::from_override(n);
    }
    let dir = match (out, &cfg.output_dir) {
        (Some(d), _) => d,
        (None, Some(d)) if d.is_absolute() => d.clone(),
        (None, Some(d)) => cfg.base_dir.join(d),
        (None, None) => PathBuf::from("frfkit-out"),
    };
    let report = run_scenario(&cfg)?;
    export_report(&report, &dir)?;
    println!("scenario {:?}: wrote {}", cfg.scenario, dir.display());
    for e in &report.estimates {
        println!(
            "  {:<14} max error {:>8.2} dB  mean error {:>8.2} dB  defects {}/{}",
            e.name, e.stats.max_error_db, e.stats.mean_error_db, e.stats.n_defects, e.stats.n_bins
        );
    }
    for (k, v) in &report.metrics {
        println!("  {k} = {v}");
    }
    if report.defect_threshold_exceeded {
        eprintln!("defect fraction above max_defect_fraction = {}", cfg.max_defect_fraction);
        return Ok(EXIT_DEFECTS);
    }
    Ok(0)
}

fn oracle(model: &Path, fs: f64, bins: usize, out: Option<PathBuf>) -> Result<u8, Failure> {
    if !(fs.is_finite() && fs > 0.0) {
        return Err(Failure::Validation("--fs must be positive".into()));
    }
    if bins < 2 {
        return Err(Failure::Validation("--bins must be >= 2".into()));
    }
    let text = std::fs::read_to_string(model).map_err(|e| Failure::Validation(FrfError::io(model, e).to_string()))?;
    let m = StateSpaceModel::<f64>::from_json_str(&text).map_err(|e| Failure::Validation(e.to_string()))?;
    let ts = 1.0 / fs;
    let m = match m.time_domain() {
        TimeDomain::Continuous => discretize_zoh(&m, ts)?,
        TimeDomain::Discrete { ts: mts } if (mts - ts).abs() <= 1e-12 * ts => m,
        TimeDomain::Discrete { ts: mts } => {
            return Err(Failure::Validation(format!("model ts = {mts} does not match 1/fs = {ts}")));
        }
    };
    let freqs = bin_frequencies(2 * (bins - 1), ts);
    let csv = true_frf(&m, &freqs[..bins]).to_csv_string();
    match out {
        Some(path) => std::fs::write(&path, csv).map_err(|e| Failure::Runtime(FrfError::io(&path, e).to_string()))?,
        None => std::io::stdout().write_all(csv.as_bytes()).map_err(|e| Failure::Runtime(e.to_string()))?,
    }
    Ok(0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = configure_threads().and_then(|()| match cli.command {
        Command::Run { config, out, seed_override } => run(&config, out, seed_override),
        Command::Oracle { model, fs, bins, out } => oracle(&model, fs, bins, out),
    });
    match result {
        Ok(code) => ExitCode::from(code),
        Err(Failure::Validation(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_VALIDATION)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_FAILURE)
        }
    }
}
