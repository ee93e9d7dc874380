//! Command-line front end.
//!
//! Exit codes: 0 on success, 1 when a computation fails, 2 for bad flags or
//! configuration files.

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use strucid_core::datagen::{add_noise, add_noise_per_channel, simulate, CoeffLaw, GenSpec, RNG_ALGORITHM};
use strucid_core::identify::{identify, label_string, Prior, StageEigenvalues};
use strucid_core::metrics::subspace_dependence;
use strucid_core::model::Label;
use strucid_core::{cases, ConstraintModel, IdentifyOptions, Mat, Method, StructureMask};

use crate::harness::{run_faults_in, run_mc_in, ExperimentConfig, FaultConfig, HarnessError, Snr};
use crate::io::{self, IoError};

#[derive(Debug, Parser)]
#[command(name = "strucid", version, about = "Identify linear constraint models from noisy data")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate data from a constraint model and write it as CSV.
    Generate(GenerateArgs),
    /// Estimate a constraint matrix from a data CSV.
    Identify(IdentifyArgs),
    /// Print the subspace dependence of an estimate against the true model.
    Evaluate(EvaluateArgs),
    /// Run a Monte-Carlo SNR sweep described by a JSON config.
    McSweep(SweepArgs),
    /// Run a fault-detection experiment described by a JSON config.
    FaultDetect(FaultArgs),
    /// List the built-in case studies.
    ListCases,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum LawArg {
    Normal,
    Uniform,
}

#[derive(Debug, Args)]
struct GenerateArgs {
    /// Built-in case name (see list-cases).
    #[arg(long, conflicts_with = "model", required_unless_present = "model")]
    case: Option<String>,
    /// Constraint matrix CSV (no header).
    #[arg(long)]
    model: Option<PathBuf>,
    /// Number of samples.
    #[arg(long, default_value_t = 1000)]
    n: usize,
    /// Signal-to-noise ratio; `inf` for noise-free data.
    #[arg(long, default_value = "inf")]
    snr: Snr,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Noise level per channel instead of one shared level.
    #[arg(long)]
    per_channel: bool,
    /// Distribution of the mixing coefficients.
    #[arg(long, value_enum, default_value_t = LawArg::Normal)]
    coeff_law: LawArg,
    /// Output data CSV; provenance goes to `<stem>.provenance.json`.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct IdentifyArgs {
    #[arg(long)]
    method: Method,
    /// Data CSV with header v1..vn.
    #[arg(long)]
    data: PathBuf,
    /// Structure mask file (spca, cspca).
    #[arg(long, conflicts_with = "case")]
    mask: Option<PathBuf>,
    /// Take the mask from a built-in case instead of a file.
    #[arg(long)]
    case: Option<String>,
    /// Known constraint rows CSV (cpca).
    #[arg(long)]
    known: Option<PathBuf>,
    /// Total number of constraints, known rows included (pca, cpca).
    #[arg(short = 'm')]
    m: Option<usize>,
    /// Relative residual a candidate must exceed to count as new.
    #[arg(long)]
    rank_tol: Option<f64>,
    /// Subtract each variable's mean before forming the covariance.
    #[arg(long)]
    center: bool,
    /// Output estimate CSV; diagnostics go to `<stem>.diagnostics.json`.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    /// True constraint matrix CSV.
    #[arg(long = "true", conflicts_with = "case", required_unless_present = "case")]
    truth: Option<PathBuf>,
    /// Built-in case supplying the true model.
    #[arg(long)]
    case: Option<String>,
    /// Estimated constraint matrix CSV.
    #[arg(long)]
    est: PathBuf,
    /// Scale true rows to unit norm first.
    #[arg(long)]
    normalize: bool,
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[arg(long)]
    config: PathBuf,
    /// Directory for long.csv, summary.csv and results.json.
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
    /// Run on one thread regardless of the config.
    #[arg(long)]
    sequential: bool,
}

#[derive(Debug, Args)]
struct FaultArgs {
    #[arg(long)]
    config: PathBuf,
    /// Output JSON; printed to standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    sequential: bool,
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Runtime(String),
}

impl From<IoError> for Failure {
    fn from(e: IoError) -> Self {
        Failure::Runtime(e.to_string())
    }
}

impl From<strucid_core::Error> for Failure {
    fn from(e: strucid_core::Error) -> Self {
        Failure::Runtime(format!("{}: {e}", e.name()))
    }
}

impl From<HarnessError> for Failure {
    fn from(e: HarnessError) -> Self {
        if e.is_config() { Failure::Usage(e.to_string()) } else { Failure::Runtime(e.to_string()) }
    }
}

type CmdResult = Result<(), Failure>;

/// Parse `args` (program name first), run the subcommand and map the
/// outcome to an exit code.
pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    let outcome = match cli.command {
        Command::Generate(a) => generate(a),
        Command::Identify(a) => identify_cmd(a),
        Command::Evaluate(a) => evaluate(a),
        Command::McSweep(a) => mc_sweep(a),
        Command::FaultDetect(a) => fault_detect(a),
        Command::ListCases => list_cases(),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}

fn lookup_case(name: &str) -> Result<(ConstraintModel, StructureMask), Failure> {
    cases::lookup(name).map_err(|_| Failure::Usage(format!("unknown case `{name}` (known: {})", cases::NAMES.join(", "))))
}

#[derive(Serialize)]
struct Provenance<'a> {
    tool: &'static str,
    version: &'static str,
    rng: &'static str,
    model_source: String,
    n_variables: usize,
    n_samples: usize,
    snr: Snr,
    seed: u64,
    coeff_law: CoeffLaw,
    /// Noise standard deviation, one entry per channel in per-channel mode.
    sigma: &'a [f64],
    per_channel: bool,
}

fn generate(args: GenerateArgs) -> CmdResult {
    let (model, source) = match (&args.case, &args.model) {
        (Some(name), _) => (lookup_case(name)?.0, name.clone()),
        (None, Some(path)) => {
            let a = io::read_matrix_csv(path)?;
            (ConstraintModel::new(a, None)?, path.display().to_string())
        }
        (None, None) => return Err(Failure::Usage("one of --case or --model is required".into())),
    };
    if args.snr.0.is_nan() || args.snr.0 <= 0.0 {
        return Err(Failure::Usage(format!("--snr must be positive, got {}", args.snr)));
    }
    let coeff_law = match args.coeff_law {
        LawArg::Normal => CoeffLaw::StandardNormal,
        LawArg::Uniform => CoeffLaw::Uniform,
    };
    let n_variables = model.cols();
    let spec = GenSpec { coeff_law, ..GenSpec::new(model, args.n, args.seed) };
    let x = simulate(&spec)?;
    let (y, sigma) = if args.per_channel {
        add_noise_per_channel(&x, args.snr.0, args.seed)?
    } else {
        let (y, s) = add_noise(&x, args.snr.0, args.seed)?;
        (y, vec![s])
    };
    io::write_data_csv(&args.out, &y)?;
    let provenance = Provenance {
        tool: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        rng: RNG_ALGORITHM,
        model_source: source,
        n_variables,
        n_samples: args.n,
        snr: args.snr,
        seed: args.seed,
        coeff_law,
        sigma: &sigma,
        per_channel: args.per_channel,
    };
    io::write_json(&io::sidecar(&args.out, "provenance"), &provenance)?;
    Ok(())
}

#[derive(Serialize)]
struct LabelRow {
    /// Row index in processing order.
    row: usize,
    support: Vec<usize>,
    substructured: Vec<usize>,
    label: Label,
}

#[derive(Serialize)]
struct Diagnostics<'a> {
    tool: &'static str,
    version: &'static str,
    method: Method,
    data: String,
    rows: usize,
    cols: usize,
    options: IdentifyOptions,
    permutation: &'a [usize],
    eigenvalues: &'a [StageEigenvalues],
    #[serde(skip_serializing_if = "String::is_empty")]
    label_string: String,
    labels: Vec<LabelRow>,
}

fn identify_cmd(args: IdentifyArgs) -> CmdResult {
    let mut opts = IdentifyOptions { center_data: args.center, ..IdentifyOptions::default() };
    if let Some(tol) = args.rank_tol {
        opts.rank_tol_rel = tol;
    }
    opts.validate().map_err(|e| Failure::Usage(e.to_string()))?;

    let mask = match (&args.mask, &args.case) {
        (Some(path), _) => Some(io::read_mask(path)?),
        (None, Some(name)) => Some(lookup_case(name)?.1),
        (None, None) => None,
    };
    let known = args.known.as_deref().map(io::read_matrix_csv).transpose()?;
    let y = io::read_data_csv(&args.data)?;

    let need_m = || args.m.ok_or_else(|| Failure::Usage(format!("{} needs -m", args.method.id())));
    let result = match args.method {
        Method::Pca => identify(Method::Pca, &y, Prior::Rows(need_m()?), &opts)?,
        Method::Spca | Method::Cspca => {
            let mask = mask.as_ref().ok_or_else(|| Failure::Usage(format!("{} needs --mask or --case", args.method.id())))?;
            identify(args.method, &y, Prior::Mask(mask), &opts)?
        }
        Method::Cpca => {
            let known = known.as_ref().ok_or_else(|| Failure::Usage("cpca needs --known".into()))?;
            let m = need_m()?;
            if m <= known.nrows() {
                return Err(Failure::Usage(format!("-m {m} leaves no unknown rows beside {} known", known.nrows())));
            }
            identify(Method::Cpca, &y, Prior::Known { rows: known, unknown: m - known.nrows() }, &opts)?
        }
    };

    io::write_matrix_csv(&args.out, result.matrix())?;
    let labels = result
        .labels
        .iter()
        .enumerate()
        .map(|(row, l)| LabelRow {
            row,
            support: l.support.clone(),
            substructured: l.substructured.clone(),
            label: l.label,
        })
        .collect();
    let diagnostics = Diagnostics {
        tool: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        method: result.method,
        data: args.data.display().to_string(),
        rows: result.matrix().nrows(),
        cols: result.matrix().ncols(),
        options: opts,
        permutation: result.permutation.as_slice(),
        eigenvalues: &result.eigenvalues,
        label_string: label_string(&result.labels),
        labels,
    };
    io::write_json(&io::sidecar(&args.out, "diagnostics"), &diagnostics)?;
    Ok(())
}

fn evaluate(args: EvaluateArgs) -> CmdResult {
    let a0: Mat = match (&args.truth, &args.case) {
        (Some(path), _) => io::read_matrix_csv(path)?,
        (None, Some(name)) => lookup_case(name)?.0.into_matrix(),
        (None, None) => return Err(Failure::Usage("one of --true or --case is required".into())),
    };
    let est = io::read_matrix_csv(&args.est)?;
    let report = subspace_dependence(&a0, &est, args.normalize)?;
    let text = serde_json::to_string_pretty(&report).map_err(|e| Failure::Runtime(e.to_string()))?;
    println!("{text}");
    Ok(())
}

fn base_dir(config: &Path) -> PathBuf {
    config.parent().map(Path::to_path_buf).unwrap_or_default()
}

fn read_config<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, Failure> {
    io::read_json(path).map_err(|e| Failure::Usage(e.to_string()))
}

fn mc_sweep(args: SweepArgs) -> CmdResult {
    let mut cfg: ExperimentConfig = read_config(&args.config)?;
    if args.sequential {
        cfg.parallel = false;
    }
    let start = Instant::now();
    let table = run_mc_in(&cfg, &base_dir(&args.config))?;
    std::fs::create_dir_all(&args.out_dir)
        .map_err(|source| IoError::File { path: args.out_dir.clone(), source })?;
    table.write_to(&args.out_dir)?;
    eprintln!(
        "mc-sweep: {} SNR values x {} runs x {} methods in {:.2}s, {} failed runs",
        cfg.snr_grid.len(),
        cfg.runs,
        cfg.methods.len(),
        start.elapsed().as_secs_f64(),
        table.failures.len()
    );
    Ok(())
}

fn fault_detect(args: FaultArgs) -> CmdResult {
    let mut cfg: FaultConfig = read_config(&args.config)?;
    if args.sequential {
        cfg.parallel = false;
    }
    let summary = run_faults_in(&cfg, &base_dir(&args.config))?;
    match &args.out {
        Some(path) => io::write_json(path, &summary)?,
        None => {
            let text = serde_json::to_string_pretty(&summary).map_err(|e| Failure::Runtime(e.to_string()))?;
            println!("{text}");
        }
    }
    Ok(())
}

fn list_cases() -> CmdResult {
    for name in cases::NAMES {
        let (model, _) = lookup_case(name)?;
        println!("{name}\t{} x {}", model.rows(), model.cols());
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn usage_errors_exit_2() {
        assert_eq!(main_with_args(["strucid", "frobnicate"]), ExitCode::from(2));
        assert_eq!(main_with_args(["strucid", "generate", "--out", "x.csv"]), ExitCode::from(2));
        assert_eq!(main_with_args(["strucid", "list-cases", "--bogus"]), ExitCode::from(2));
    }

    #[test]
    fn snr_flag_parses_inf() {
        let cli = Cli::try_parse_from(["strucid", "generate", "--case", "cs3", "--snr", "inf", "--out", "d.csv"]).unwrap();
        match cli.command {
            Command::Generate(a) => assert!(a.snr.0.is_infinite()),
            _ => unreachable!(),
        }
    }
}
