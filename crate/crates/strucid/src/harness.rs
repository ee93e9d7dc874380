//! Monte-Carlo experiment runner and fault-detection experiments.
//!
//! Every run draws its seed from `(master_seed, snr_index, run_index)`, so a
//! table does not depend on scheduling and a single cell can be rerun alone.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use strucid_core::datagen::{generate, CoeffLaw, GenSpec, RNG_ALGORITHM};
use strucid_core::faults::{
    detect_with, fault_experiment, faulty_test_set, known_rows_matrix, FaultExperiment, FaultMagnitude,
    ResidualNorm,
};
use strucid_core::identify::{identify, Prior};
use strucid_core::metrics::{best_instance_counts, subspace_dependence};
use strucid_core::seeds::derive_seed;
use strucid_core::{cases, ConstraintModel, IdentifyOptions, Mat, Method, StructureMask};

use crate::io::{self, format_f64, IoError};

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] IoError),
    #[error("{}: {}", .0.name(), .0)]
    Core(#[from] strucid_core::Error),
}

impl HarnessError {
    /// Whether the failure lies in the configuration rather than the run.
    pub fn is_config(&self) -> bool {
        matches!(self, HarnessError::Config(_) | HarnessError::Io(_))
    }
}

pub type Result<T, E = HarnessError> = std::result::Result<T, E>;

fn config_error(msg: impl Into<String>) -> HarnessError {
    HarnessError::Config(msg.into())
}

/// Signal-to-noise ratio; serialized as a number or the string `"inf"`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Snr(pub f64);

impl fmt::Display for Snr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_infinite() { f.write_str("inf") } else { write!(f, "{}", self.0) }
    }
}

impl std::str::FromStr for Snr {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.trim() {
            "inf" | "Inf" | "infinity" => Ok(Snr(f64::INFINITY)),
            t => t.parse().map(Snr).map_err(|_| format!("not an SNR: `{s}`")),
        }
    }
}

impl Serialize for Snr {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        if self.0.is_finite() { s.serialize_f64(self.0) } else { s.serialize_str("inf") }
    }
}

impl<'de> Deserialize<'de> for Snr {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(x) => Ok(Snr(x)),
            Raw::Text(t) => t.parse().map_err(serde::de::Error::custom),
        }
    }
}

/// A registry name or a pair of model and mask files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CaseSpec {
    Named(String),
    Files { model: PathBuf, mask: Option<PathBuf> },
}

/// A resolved case: the true model, its mask and a description of where
/// it came from.
#[derive(Debug, Clone)]
pub struct Case {
    pub model: ConstraintModel,
    pub mask: StructureMask,
    pub source: String,
}

pub fn registry_lookup(name: &str) -> Result<(ConstraintModel, StructureMask)> {
    Ok(cases::lookup(name)?)
}

impl CaseSpec {
    /// Load the case. Relative file paths are taken from `base`.
    pub fn resolve(&self, base: &Path) -> Result<Case> {
        match self {
            CaseSpec::Named(name) => {
                let (model, mask) = cases::lookup(name).map_err(|_| config_error(format!("unknown case `{name}`")))?;
                Ok(Case { model, mask, source: name.clone() })
            }
            CaseSpec::Files { model, mask } => {
                let model_path = io::resolve(base, model);
                let a = io::read_matrix_csv(&model_path)?;
                let mask = match mask {
                    Some(p) => io::read_mask(&io::resolve(base, p))?,
                    None => StructureMask::from_matrix(&a)?,
                };
                let model = ConstraintModel::new(a, Some(mask.clone()))?;
                Ok(Case { model, mask, source: model_path.display().to_string() })
            }
        }
    }
}

fn default_n_samples() -> usize {
    1000
}

fn default_parallel() -> bool {
    true
}

fn default_tolerance() -> f64 {
    1.0
}

fn default_one() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub case: CaseSpec,
    pub methods: Vec<Method>,
    /// Rows of the true model given to cPCA as known (0-based).
    #[serde(default)]
    pub known_rows: Vec<usize>,
    pub snr_grid: Vec<Snr>,
    pub runs: usize,
    #[serde(default = "default_n_samples")]
    pub n_samples: usize,
    #[serde(default)]
    pub master_seed: u64,
    /// Scale true rows to unit norm before computing theta.
    #[serde(default)]
    pub theta_normalize: bool,
    #[serde(default)]
    pub coeff_law: CoeffLaw,
    #[serde(default)]
    pub options: IdentifyOptions,
    /// Execution mode only; results do not depend on it, so it is left out
    /// of written results.
    #[serde(default = "default_parallel", skip_serializing)]
    pub parallel: bool,
}

fn check_methods(methods: &[Method], known_rows: &[usize], m: usize) -> Result<()> {
    if methods.is_empty() {
        return Err(config_error("no methods requested"));
    }
    for (i, a) in methods.iter().enumerate() {
        if methods[..i].contains(a) {
            return Err(config_error(format!("method {a} listed twice")));
        }
    }
    if methods.contains(&Method::Cpca) {
        if known_rows.is_empty() {
            return Err(config_error("cPCA needs at least one known row"));
        }
        if known_rows.len() >= m {
            return Err(config_error("cPCA needs at least one unknown row"));
        }
    }
    for (i, &r) in known_rows.iter().enumerate() {
        if r >= m {
            return Err(config_error(format!("known row {r} out of range for {m} equations")));
        }
        if known_rows[..i].contains(&r) {
            return Err(config_error(format!("known row {r} listed twice")));
        }
    }
    Ok(())
}

fn check_snr(snr: Snr) -> Result<()> {
    if snr.0.is_nan() || snr.0 <= 0.0 {
        return Err(config_error(format!("SNR must be positive, got {snr}")));
    }
    Ok(())
}

impl ExperimentConfig {
    /// Check the fields that do not need the model.
    pub fn validate(&self) -> Result<()> {
        if self.snr_grid.is_empty() {
            return Err(config_error("snr_grid is empty"));
        }
        self.snr_grid.iter().try_for_each(|&s| check_snr(s))?;
        if self.runs == 0 {
            return Err(config_error("runs must be positive"));
        }
        if self.n_samples == 0 {
            return Err(config_error("n_samples must be positive"));
        }
        self.options.validate().map_err(|e| config_error(e.to_string()))
    }
}

/// Theta of one method in one run, in both modes.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Theta {
    raw: f64,
    normalized: f64,
}

type RunOutcome = Vec<std::result::Result<Theta, &'static str>>;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Failure {
    pub method: Method,
    pub snr: Snr,
    pub run: usize,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellSummary {
    pub method: Method,
    pub snr: Snr,
    /// Mean over successful runs, in the configured theta mode.
    pub mean_theta: f64,
    /// Sample standard deviation over successful runs.
    pub std_theta: f64,
    pub mean_theta_raw: f64,
    pub mean_theta_normalized: f64,
    pub best_count: usize,
    pub failed_runs: usize,
    /// Per-run theta in the configured mode; `None` for failed runs.
    pub theta: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResultsTable {
    pub config: ExperimentConfig,
    pub case_source: String,
    pub cells: Vec<CellSummary>,
    pub failures: Vec<Failure>,
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

fn one_run(case: &Case, known: &Mat, cfg: &ExperimentConfig, snr: f64, seed: u64) -> RunOutcome {
    let spec = GenSpec { coeff_law: cfg.coeff_law, ..GenSpec::new(case.model.clone(), cfg.n_samples, seed) };
    let data = match generate(&spec, snr) {
        Ok(d) => d,
        Err(e) => return vec![Err(e.name()); cfg.methods.len()],
    };
    let unknown = case.model.rows() - cfg.known_rows.len();
    cfg.methods
        .iter()
        .map(|&method| {
            let prior = match method {
                Method::Cpca => Prior::Known { rows: known, unknown },
                _ => Prior::Mask(&case.mask),
            };
            let a0 = case.model.matrix();
            let est = identify(method, &data.y, prior, &cfg.options).map_err(|e| e.name())?;
            let raw = subspace_dependence(a0, est.matrix(), false).map_err(|e| e.name())?;
            let normalized = subspace_dependence(a0, est.matrix(), true).map_err(|e| e.name())?;
            Ok(Theta { raw: raw.theta, normalized: normalized.theta })
        })
        .collect()
}

/// Run the sweep with the case resolved relative to `base`.
pub fn run_mc_in(cfg: &ExperimentConfig, base: &Path) -> Result<ResultsTable> {
    cfg.validate()?;
    let case = cfg.case.resolve(base)?;
    check_methods(&cfg.methods, &cfg.known_rows, case.model.rows())?;
    let known = known_rows_matrix(&case.model, &cfg.known_rows)?;

    let tasks: Vec<(usize, usize)> =
        (0..cfg.snr_grid.len()).flat_map(|s| (0..cfg.runs).map(move |r| (s, r))).collect();
    let task = |&(s, r): &(usize, usize)| {
        let seed = derive_seed(cfg.master_seed, s as u64, r as u64);
        one_run(&case, &known, cfg, cfg.snr_grid[s].0, seed)
    };
    let outcomes: Vec<RunOutcome> =
        if cfg.parallel { tasks.par_iter().map(task).collect() } else { tasks.iter().map(task).collect() };

    let mut cells = Vec::new();
    let mut failures = Vec::new();
    for (s, &snr) in cfg.snr_grid.iter().enumerate() {
        let block = &outcomes[s * cfg.runs..(s + 1) * cfg.runs];
        let pick = |k: usize, normalized: bool| -> Vec<Option<f64>> {
            block
                .iter()
                .map(|run| run[k].ok().map(|t| if normalized { t.normalized } else { t.raw }))
                .collect()
        };
        let primary: Vec<Vec<f64>> = (0..cfg.methods.len())
            .map(|k| pick(k, cfg.theta_normalize).into_iter().map(|v| v.unwrap_or(f64::NAN)).collect())
            .collect();
        let best = best_instance_counts(&primary)?;
        for (k, &method) in cfg.methods.iter().enumerate() {
            for (r, run) in block.iter().enumerate() {
                if let Err(name) = run[k] {
                    failures.push(Failure { method, snr, run: r, error: name.to_owned() });
                }
            }
            let theta = pick(k, cfg.theta_normalize);
            let ok: Vec<f64> = theta.iter().flatten().copied().collect();
            let (mean, std) = mean_std(&ok);
            let raw: Vec<f64> = pick(k, false).into_iter().flatten().collect();
            let normalized: Vec<f64> = pick(k, true).into_iter().flatten().collect();
            cells.push(CellSummary {
                method,
                snr,
                mean_theta: mean,
                std_theta: std,
                mean_theta_raw: mean_std(&raw).0,
                mean_theta_normalized: mean_std(&normalized).0,
                best_count: best[k],
                failed_runs: cfg.runs - ok.len(),
                theta,
            });
        }
    }
    Ok(ResultsTable { config: cfg.clone(), case_source: case.source, cells, failures })
}

/// Run the sweep; relative case paths are taken from the working directory.
pub fn run_mc(cfg: &ExperimentConfig) -> Result<ResultsTable> {
    run_mc_in(cfg, Path::new("."))
}

fn opt_f64(v: Option<f64>) -> String {
    v.map_or_else(String::new, format_f64)
}

impl ResultsTable {
    pub fn cell(&self, method: Method, snr: f64) -> Option<&CellSummary> {
        self.cells.iter().find(|c| c.method == method && c.snr.0 == snr)
    }

    /// `method,snr,run,theta`; failed runs leave `theta` empty.
    pub fn long_csv(&self) -> String {
        let mut out = String::from("method,snr,run,theta\n");
        for c in &self.cells {
            for (r, t) in c.theta.iter().enumerate() {
                out.push_str(&format!("{},{},{},{}\n", c.method.id(), c.snr, r, opt_f64(*t)));
            }
        }
        out
    }

    /// `method,snr,mean_theta,std_theta,best_count`.
    pub fn summary_csv(&self) -> String {
        let mut out = String::from("method,snr,mean_theta,std_theta,best_count\n");
        for c in &self.cells {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                c.method.id(),
                c.snr,
                format_f64(c.mean_theta),
                format_f64(c.std_theta),
                c.best_count
            ));
        }
        out
    }

    pub fn envelope(&self) -> Envelope<'_> {
        Envelope::new(self)
    }

    /// Write `long.csv`, `summary.csv` and `results.json` into `dir`.
    pub fn write_to(&self, dir: &Path) -> Result<()> {
        let file = |name: &str, text: String| {
            let path = dir.join(name);
            std::fs::write(&path, text).map_err(|source| IoError::File { path, source })
        };
        file("long.csv", self.long_csv())?;
        file("summary.csv", self.summary_csv())?;
        io::write_json(&dir.join("results.json"), &self.envelope())?;
        Ok(())
    }
}

/// JSON wrapper recording versions next to a result.
#[derive(Debug, Serialize)]
pub struct Envelope<'a> {
    pub tool: &'static str,
    pub version: &'static str,
    pub core_version: &'static str,
    pub rng: &'static str,
    pub theta_mode: &'static str,
    #[serde(flatten)]
    pub results: &'a ResultsTable,
}

impl<'a> Envelope<'a> {
    fn new(results: &'a ResultsTable) -> Self {
        Envelope {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            core_version: strucid_core::VERSION,
            rng: RNG_ALGORITHM,
            theta_mode: if results.config.theta_normalize { "normalized" } else { "raw" },
            results,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FaultConfig {
    pub case: CaseSpec,
    pub methods: Vec<Method>,
    #[serde(default)]
    pub known_rows: Vec<usize>,
    pub snr: Snr,
    #[serde(default = "default_n_samples")]
    pub n_samples: usize,
    pub n_faulty: usize,
    #[serde(default)]
    pub magnitude: FaultMagnitude,
    /// Monte-Carlo runs averaged into each method's model.
    pub runs: usize,
    /// Independent repetitions of the whole experiment.
    #[serde(default = "default_one")]
    pub repetitions: usize,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    #[serde(default)]
    pub norm: ResidualNorm,
    #[serde(default)]
    pub options: IdentifyOptions,
    /// Fixed constraint matrices (CSV paths) scored on the same faulty data.
    #[serde(default)]
    pub estimates: BTreeMap<String, PathBuf>,
    #[serde(default = "default_parallel", skip_serializing)]
    pub parallel: bool,
}

impl FaultConfig {
    pub fn validate(&self) -> Result<()> {
        check_snr(self.snr)?;
        if self.runs == 0 || self.repetitions == 0 {
            return Err(config_error("runs and repetitions must be positive"));
        }
        if self.n_faulty > self.n_samples {
            return Err(config_error("n_faulty exceeds n_samples"));
        }
        if self.tolerance.is_nan() || self.tolerance <= 0.0 {
            return Err(config_error("tolerance must be positive"));
        }
        match self.magnitude {
            FaultMagnitude::Constant(c) if !c.is_finite() => return Err(config_error("fault magnitude must be finite")),
            FaultMagnitude::UniformChannelStd(k) if !k.is_finite() || k < 0.0 => {
                return Err(config_error("fault magnitude must be finite and non-negative"))
            }
            _ => {}
        }
        self.options.validate().map_err(|e| config_error(e.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MethodCount {
    pub name: String,
    pub detected: usize,
    pub true_positive: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub failed_runs: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Repetition {
    pub seed: u64,
    pub injected: usize,
    pub oracle_detected: usize,
    pub oracle_true_positive: usize,
    pub counts: Vec<MethodCount>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MeanCount {
    pub name: String,
    pub mean_detected: f64,
    pub mean_true_positive: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FaultSummary {
    pub tool: &'static str,
    pub version: &'static str,
    pub rng: &'static str,
    pub config: FaultConfig,
    pub case_source: String,
    pub mean_oracle_detected: f64,
    pub means: Vec<MeanCount>,
    pub repetitions: Vec<Repetition>,
}

impl FaultSummary {
    pub fn mean_detected(&self, name: &str) -> Option<f64> {
        self.means.iter().find(|m| m.name == name).map(|m| m.mean_detected)
    }
}

fn fault_repetition(
    cfg: &FaultConfig,
    case: &Case,
    fixed: &[(String, Mat)],
    rep: usize,
) -> strucid_core::Result<Repetition> {
    let seed = derive_seed(cfg.master_seed, rep as u64, 0);
    let exp = FaultExperiment {
        model: &case.model,
        mask: &case.mask,
        methods: &cfg.methods,
        known_rows: &cfg.known_rows,
        snr: cfg.snr.0,
        n_samples: cfg.n_samples,
        n_faulty: cfg.n_faulty,
        magnitude: cfg.magnitude,
        runs: cfg.runs,
        seed,
        tolerance: cfg.tolerance,
        norm: cfg.norm,
        options: cfg.options,
    };
    let (oracle_detected, oracle_true_positive, injected, mut counts) = if cfg.methods.is_empty() {
        let (y, injected, truth) = faulty_test_set(&exp)?;
        let oracle = detect_with(case.model.matrix(), &y, cfg.tolerance, cfg.norm)?.score(&truth)?;
        let tp = oracle.confusion.map_or(0, |c| c.true_positive);
        (oracle.flagged(), tp, injected.len(), Vec::new())
    } else {
        let out = fault_experiment(&exp)?;
        let counts = out
            .methods
            .iter()
            .map(|m| MethodCount {
                name: m.method.id().to_owned(),
                detected: m.detected,
                true_positive: m.true_positive,
                failed_runs: Some(m.failed_runs),
            })
            .collect();
        (out.oracle_detected, out.oracle_true_positive, out.injected.len(), counts)
    };
    if !fixed.is_empty() {
        let (y, _, truth) = faulty_test_set(&exp)?;
        for (name, a) in fixed {
            let report = detect_with(a, &y, cfg.tolerance, cfg.norm)?.score(&truth)?;
            counts.push(MethodCount {
                name: name.clone(),
                detected: report.flagged(),
                true_positive: report.confusion.map_or(0, |c| c.true_positive),
                failed_runs: None,
            });
        }
    }
    Ok(Repetition { seed, injected, oracle_detected, oracle_true_positive, counts })
}

/// Run a fault-detection experiment with paths resolved relative to `base`.
pub fn run_faults_in(cfg: &FaultConfig, base: &Path) -> Result<FaultSummary> {
    cfg.validate()?;
    let case = cfg.case.resolve(base)?;
    if !cfg.methods.is_empty() {
        check_methods(&cfg.methods, &cfg.known_rows, case.model.rows())?;
    }
    let mut fixed = Vec::new();
    for (name, path) in &cfg.estimates {
        if cfg.methods.iter().any(|m| m.id() == name) {
            return Err(config_error(format!("estimate name `{name}` clashes with a method")));
        }
        let a = io::read_matrix_csv(&io::resolve(base, path))?;
        if a.ncols() != case.model.cols() {
            return Err(config_error(format!("estimate `{name}` has {} columns, expected {}", a.ncols(), case.model.cols())));
        }
        fixed.push((name.clone(), a));
    }

    let task = |&rep: &usize| fault_repetition(cfg, &case, &fixed, rep);
    let reps: Vec<usize> = (0..cfg.repetitions).collect();
    let results: Vec<_> =
        if cfg.parallel { reps.par_iter().map(task).collect() } else { reps.iter().map(task).collect() };
    let repetitions = results.into_iter().collect::<strucid_core::Result<Vec<_>>>()?;

    let count = repetitions.len() as f64;
    let names: Vec<String> = repetitions[0].counts.iter().map(|c| c.name.clone()).collect();
    let means = names
        .iter()
        .enumerate()
        .map(|(k, name)| MeanCount {
            name: name.clone(),
            mean_detected: repetitions.iter().map(|r| r.counts[k].detected as f64).sum::<f64>() / count,
            mean_true_positive: repetitions.iter().map(|r| r.counts[k].true_positive as f64).sum::<f64>() / count,
        })
        .collect();
    Ok(FaultSummary {
        tool: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        rng: RNG_ALGORITHM,
        config: cfg.clone(),
        case_source: case.source,
        mean_oracle_detected: repetitions.iter().map(|r| r.oracle_detected as f64).sum::<f64>() / count,
        means,
        repetitions,
    })
}

pub fn run_faults(cfg: &FaultConfig) -> Result<FaultSummary> {
    run_faults_in(cfg, Path::new("."))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sweep(methods: Vec<Method>, snr: Vec<f64>, runs: usize) -> ExperimentConfig {
        ExperimentConfig {
            case: CaseSpec::Named("flow-mix".into()),
            methods,
            known_rows: vec![0],
            snr_grid: snr.into_iter().map(Snr).collect(),
            runs,
            n_samples: 200,
            master_seed: 3,
            theta_normalize: false,
            coeff_law: CoeffLaw::default(),
            options: IdentifyOptions::default(),
            parallel: true,
        }
    }

    #[test]
    fn snr_serialization() {
        let v: Vec<Snr> = serde_json::from_str(r#"[10, 2.5, "inf"]"#).unwrap();
        assert_eq!(v[2].0, f64::INFINITY);
        assert_eq!(serde_json::to_string(&v).unwrap(), r#"[10.0,2.5,"inf"]"#);
        assert_eq!(v[0].to_string(), "10");
        assert!(serde_json::from_str::<Snr>(r#""loud""#).is_err());
    }

    #[test]
    fn config_parsing() {
        let text = r#"{"case": "cs3", "methods": ["pca", "cspca"], "snr_grid": [10, "inf"], "runs": 2}"#;
        let cfg: ExperimentConfig = serde_json::from_str(text).unwrap();
        assert_eq!(cfg.n_samples, 1000);
        assert!(cfg.parallel);
        let files = r#"{"case": {"model": "a.csv", "mask": "m.txt"}, "methods": ["pca"], "snr_grid": [1], "runs": 1}"#;
        let cfg: ExperimentConfig = serde_json::from_str(files).unwrap();
        assert!(matches!(cfg.case, CaseSpec::Files { .. }));
        let unknown = r#"{"case": "cs3", "methods": ["pca"], "snr_grid": [1], "runs": 1, "seed": 4}"#;
        assert!(serde_json::from_str::<ExperimentConfig>(unknown).is_err());
    }

    #[test]
    fn config_validation() {
        let mut cfg = sweep(vec![Method::Cpca], vec![10.0], 1);
        cfg.known_rows.clear();
        assert!(run_mc(&cfg).unwrap_err().is_config());
        let cfg = sweep(vec![Method::Pca], vec![], 1);
        assert!(run_mc(&cfg).unwrap_err().is_config());
        let cfg = sweep(vec![Method::Pca], vec![-1.0], 1);
        assert!(run_mc(&cfg).unwrap_err().is_config());
        let cfg = sweep(vec![Method::Pca, Method::Pca], vec![10.0], 1);
        assert!(run_mc(&cfg).unwrap_err().is_config());
        let mut cfg = sweep(vec![Method::Pca], vec![10.0], 1);
        cfg.case = CaseSpec::Named("nope".into());
        assert!(run_mc(&cfg).unwrap_err().is_config());
    }

    #[test]
    fn noise_free_sweep_is_exact() {
        let t = run_mc(&sweep(Method::ALL.to_vec(), vec![f64::INFINITY], 3)).unwrap();
        assert_eq!(t.cells.len(), 4);
        for c in &t.cells {
            assert!(c.mean_theta < 1e-8, "{:?}", c);
            assert_eq!(c.theta.len(), 3);
        }
    }

    #[test]
    fn cells_reproduce_in_isolation() {
        let cfg = sweep(vec![Method::Pca, Method::Spca], vec![10.0, 50.0], 4);
        let full = run_mc(&cfg).unwrap();
        let case = cfg.case.resolve(Path::new(".")).unwrap();
        let known = known_rows_matrix(&case.model, &cfg.known_rows).unwrap();
        let alone = one_run(&case, &known, &cfg, 50.0, derive_seed(3, 1, 2));
        assert_eq!(full.cell(Method::Spca, 50.0).unwrap().theta[2], Some(alone[1].unwrap().raw));
    }

    #[test]
    fn parallel_matches_sequential() {
        let mut cfg = sweep(vec![Method::Pca, Method::Spca, Method::Cpca], vec![10.0, 100.0], 6);
        let a = run_mc(&cfg).unwrap();
        cfg.parallel = false;
        let b = run_mc(&cfg).unwrap();
        assert_eq!(a.long_csv(), b.long_csv());
        assert_eq!(a.summary_csv(), b.summary_csv());
    }

    #[test]
    fn exports_have_expected_shape() {
        let t = run_mc(&sweep(vec![Method::Pca, Method::Spca, Method::Cpca], vec![10.0, 20.0], 2)).unwrap();
        let summary = t.summary_csv();
        assert_eq!(summary.lines().count(), 1 + 3 * 2);
        assert_eq!(t.long_csv().lines().count(), 1 + 3 * 2 * 2);
        let best: usize = t.cells.iter().filter(|c| c.snr.0 == 10.0).map(|c| c.best_count).sum();
        assert!(best <= 2);
        let json = serde_json::to_value(t.envelope()).unwrap();
        assert_eq!(json["theta_mode"], "raw");
        assert!(json["config"]["snr_grid"].is_array());
    }

    #[test]
    fn failed_runs_are_recorded() {
        let mut cfg = sweep(vec![Method::Pca], vec![10.0], 2);
        cfg.n_samples = 2;
        let t = run_mc(&cfg).unwrap();
        assert_eq!(t.failures.len(), 2);
        assert_eq!(t.failures[0].error, "TooFewSamples");
        assert_eq!(t.cells[0].failed_runs, 2);
        assert!(t.cells[0].mean_theta.is_nan());
        assert!(t.long_csv().lines().nth(1).unwrap().ends_with(','));
    }

    fn faults(methods: Vec<Method>) -> FaultConfig {
        FaultConfig {
            case: CaseSpec::Named("flow-mix".into()),
            methods,
            known_rows: vec![0],
            snr: Snr(f64::INFINITY),
            n_samples: 200,
            n_faulty: 20,
            magnitude: FaultMagnitude::Constant(100.0),
            runs: 2,
            repetitions: 2,
            master_seed: 1,
            tolerance: 1.0,
            norm: ResidualNorm::L1,
            options: IdentifyOptions::default(),
            estimates: BTreeMap::new(),
            parallel: true,
        }
    }

    #[test]
    fn oracle_separates_exactly() {
        let s = run_faults(&faults(vec![])).unwrap();
        assert_eq!(s.mean_oracle_detected, 20.0);
        for r in &s.repetitions {
            assert_eq!(r.oracle_true_positive, 20);
        }
    }

    #[test]
    fn zero_faults_stay_quiet() {
        let mut cfg = faults(vec![Method::Pca, Method::Spca]);
        cfg.magnitude = FaultMagnitude::Constant(0.0);
        let s = run_faults(&cfg).unwrap();
        assert_eq!(s.mean_oracle_detected, 0.0);
        assert_eq!(s.mean_detected("pca"), Some(0.0));
        assert_eq!(s.mean_detected("spca"), Some(0.0));
    }

    #[test]
    fn fault_config_validation() {
        let mut cfg = faults(vec![]);
        cfg.n_faulty = 500;
        assert!(run_faults(&cfg).unwrap_err().is_config());
        let mut cfg = faults(vec![]);
        cfg.tolerance = 0.0;
        assert!(run_faults(&cfg).unwrap_err().is_config());
        let json = r#"{"case": "flow-mix", "methods": ["pca"], "snr": 1000, "n_faulty": 5, "runs": 3}"#;
        let cfg: FaultConfig = serde_json::from_str(json).unwrap();
        assert_eq!(cfg.tolerance, 1.0);
        assert_eq!(cfg.magnitude, FaultMagnitude::UniformChannelStd(5.0));
    }
}
