//! Residual-based fault detection with an identified constraint matrix.

use alloc::vec::Vec;

use rand::seq::index;
use rand::Rng;

use crate::datagen::{channel_variances, generate, stream_rng, GenSpec, STREAM_FAULTS};
use crate::error::{Error, Result};
use crate::identify::{identify, IdentifyOptions, Method, Prior};
use crate::matops::Mat;
use crate::model::{ConstraintModel, StructureMask};
use crate::seeds::derive_seed;

/// How per-constraint residuals of one sample are combined.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum ResidualNorm {
    /// Sum of absolute residuals.
    #[default]
    L1,
    L2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Confusion {
    pub true_positive: usize,
    pub false_positive: usize,
    pub false_negative: usize,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FaultReport {
    pub flags: Vec<bool>,
    pub residuals: Vec<f64>,
    pub tolerance: f64,
    /// Present once scored against known fault locations.
    pub confusion: Option<Confusion>,
}

impl FaultReport {
    pub fn flagged(&self) -> usize {
        self.flags.iter().filter(|&&f| f).count()
    }

    /// Score the flags against the true fault locations.
    pub fn score(mut self, truth: &[bool]) -> Result<Self> {
        if truth.len() != self.flags.len() {
            return Err(Error::ShapeMismatch("truth and flag vectors differ in length"));
        }
        let mut c = Confusion::default();
        for (&f, &t) in self.flags.iter().zip(truth) {
            match (f, t) {
                (true, true) => c.true_positive += 1,
                (true, false) => c.false_positive += 1,
                (false, true) => c.false_negative += 1,
                (false, false) => {}
            }
        }
        self.confusion = Some(c);
        Ok(self)
    }
}

/// Flag every sample whose summed absolute constraint residual exceeds
/// `tolerance`.
pub fn detect(a_hat: &Mat, y: &Mat, tolerance: f64) -> Result<FaultReport> {
    detect_with(a_hat, y, tolerance, ResidualNorm::L1)
}

pub fn detect_with(a_hat: &Mat, y: &Mat, tolerance: f64, norm: ResidualNorm) -> Result<FaultReport> {
    if a_hat.ncols() != y.nrows() {
        return Err(Error::ShapeMismatch("model columns must equal data rows"));
    }
    if tolerance.is_nan() || tolerance <= 0.0 {
        return Err(Error::InvalidOption("tolerance must be positive"));
    }
    let r = a_hat * y;
    let residuals: Vec<f64> = r
        .column_iter()
        .map(|c| match norm {
            ResidualNorm::L1 => c.iter().map(|v| v.abs()).sum(),
            ResidualNorm::L2 => c.norm(),
        })
        .collect();
    let flags = residuals.iter().map(|&v| v > tolerance).collect();
    Ok(FaultReport { flags, residuals, tolerance, confusion: None })
}

/// Size of the offset added to a faulty variable.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum FaultMagnitude {
    /// Add this constant.
    Constant(f64),
    /// Add a uniform draw from `±k` times the variable's sample standard
    /// deviation.
    UniformChannelStd(f64),
}

impl Default for FaultMagnitude {
    fn default() -> Self {
        FaultMagnitude::UniformChannelStd(5.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct InjectedFault {
    pub sample: usize,
    pub variable: usize,
    pub offset: f64,
}

/// Corrupt `n_faulty` distinct samples of `y`, one random variable each.
///
/// Returns the corrupted data, the faults (sorted by sample) and a per-sample
/// truth vector.
pub fn inject_faults(
    y: &Mat,
    n_faulty: usize,
    magnitude: FaultMagnitude,
    seed: u64,
) -> Result<(Mat, Vec<InjectedFault>, Vec<bool>)> {
    let (n, samples) = y.shape();
    if n_faulty > samples {
        return Err(Error::InvalidOption("more faulty samples requested than available"));
    }
    let stds: Vec<f64> = channel_variances(y).into_iter().map(libm::sqrt).collect();
    let mut rng = stream_rng(seed, STREAM_FAULTS);
    let mut picked: Vec<usize> = index::sample(&mut rng, samples, n_faulty).into_vec();
    picked.sort_unstable();

    let mut out = y.clone();
    let mut truth = alloc::vec![false; samples];
    let mut faults = Vec::with_capacity(n_faulty);
    for sample in picked {
        let variable = rng.random_range(0..n);
        let offset = match magnitude {
            FaultMagnitude::Constant(c) => c,
            FaultMagnitude::UniformChannelStd(k) => {
                let half = k * stds[variable];
                if half > 0.0 { rng.random_range(-half..half) } else { 0.0 }
            }
        };
        out[(variable, sample)] += offset;
        truth[sample] = true;
        faults.push(InjectedFault { sample, variable, offset });
    }
    Ok((out, faults, truth))
}

/// Reorder and sign-flip the rows of `a` to match `reference`.
///
/// Rows are paired greedily by largest absolute inner product, then each
/// row is flipped so its inner product with its partner is non-negative.
pub fn align_rows(reference: &Mat, a: &Mat) -> Result<Mat> {
    if reference.shape() != a.shape() {
        return Err(Error::ShapeMismatch("alignment needs equal shapes"));
    }
    let m = a.nrows();
    let gram = reference * a.transpose();
    let mut pairs: Vec<(usize, usize)> = (0..m).flat_map(|i| (0..m).map(move |j| (i, j))).collect();
    pairs.sort_by(|&(i, j), &(k, l)| {
        gram[(k, l)].abs().total_cmp(&gram[(i, j)].abs()).then((i, j).cmp(&(k, l)))
    });
    let mut ref_taken = alloc::vec![false; m];
    let mut row_taken = alloc::vec![false; m];
    let mut out = Mat::zeros(m, a.ncols());
    for (i, j) in pairs {
        if ref_taken[i] || row_taken[j] {
            continue;
        }
        ref_taken[i] = true;
        row_taken[j] = true;
        let sign = if gram[(i, j)] < 0.0 { -1.0 } else { 1.0 };
        out.set_row(i, &(a.row(j) * sign));
    }
    Ok(out)
}

/// Elementwise mean of estimates after aligning each to the first.
pub fn average_aligned(estimates: &[Mat]) -> Result<Mat> {
    let first = estimates.first().ok_or(Error::InvalidOption("nothing to average"))?;
    let mut sum = first.clone();
    for a in &estimates[1..] {
        sum += align_rows(first, a)?;
    }
    Ok(sum / estimates.len() as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FaultExperiment<'a> {
    pub model: &'a ConstraintModel,
    pub mask: &'a StructureMask,
    pub methods: &'a [Method],
    /// Rows of the true model handed to cPCA as known.
    pub known_rows: &'a [usize],
    pub snr: f64,
    pub n_samples: usize,
    pub n_faulty: usize,
    pub magnitude: FaultMagnitude,
    pub runs: usize,
    pub seed: u64,
    pub tolerance: f64,
    pub norm: ResidualNorm,
    pub options: IdentifyOptions,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MethodFaults {
    pub method: Method,
    pub averaged: Mat,
    pub detected: usize,
    pub true_positive: usize,
    pub failed_runs: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FaultOutcome {
    pub injected: Vec<InjectedFault>,
    /// Samples flagged by the true model.
    pub oracle_detected: usize,
    pub oracle_true_positive: usize,
    pub methods: Vec<MethodFaults>,
}

/// Known-row matrix for cPCA from row indices of the true model.
pub fn known_rows_matrix(model: &ConstraintModel, rows: &[usize]) -> Result<Mat> {
    let a = model.matrix();
    if rows.iter().any(|&r| r >= a.nrows()) {
        return Err(Error::InvalidOption("known row index out of range"));
    }
    Ok(Mat::from_fn(rows.len(), a.ncols(), |r, c| a[(rows[r], c)]))
}

/// The noisy, fault-injected data set an experiment scores its models on.
///
/// Returns the data, the injected faults and the per-sample truth flags.
pub fn faulty_test_set(cfg: &FaultExperiment<'_>) -> Result<(Mat, Vec<InjectedFault>, Vec<bool>)> {
    let test_seed = derive_seed(cfg.seed, 1, 0);
    let spec = GenSpec::new(cfg.model.clone(), cfg.n_samples, test_seed);
    let data = generate(&spec, cfg.snr)?;
    inject_faults(&data.y, cfg.n_faulty, cfg.magnitude, test_seed)
}

/// Identify each method over `runs` Monte-Carlo data sets, average its
/// estimates, then count how many samples of a fresh faulty data set each
/// averaged model flags, next to the count the true model flags.
///
/// Faults are added after noise. Run `r` uses `derive_seed(seed, 0, r)`;
/// the test set uses `derive_seed(seed, 1, 0)`.
pub fn fault_experiment(cfg: &FaultExperiment<'_>) -> Result<FaultOutcome> {
    let known = known_rows_matrix(cfg.model, cfg.known_rows)?;
    let unknown = cfg.model.rows().saturating_sub(cfg.known_rows.len());
    let prior_for = |method: Method| match method {
        Method::Cpca => Prior::Known { rows: &known, unknown },
        _ => Prior::Mask(cfg.mask),
    };

    let mut estimates: Vec<Vec<Mat>> = alloc::vec![Vec::new(); cfg.methods.len()];
    let mut last_error: Vec<Option<Error>> = alloc::vec![None; cfg.methods.len()];
    for run in 0..cfg.runs {
        let spec = GenSpec::new(cfg.model.clone(), cfg.n_samples, derive_seed(cfg.seed, 0, run as u64));
        let data = generate(&spec, cfg.snr)?;
        for (k, &method) in cfg.methods.iter().enumerate() {
            match identify(method, &data.y, prior_for(method), &cfg.options) {
                Ok(res) => estimates[k].push(res.model.into_matrix()),
                Err(e) => last_error[k] = Some(e),
            }
        }
    }

    let (faulty, injected, truth) = faulty_test_set(cfg)?;

    let oracle = detect_with(cfg.model.matrix(), &faulty, cfg.tolerance, cfg.norm)?.score(&truth)?;
    let mut methods = Vec::with_capacity(cfg.methods.len());
    for (k, &method) in cfg.methods.iter().enumerate() {
        if estimates[k].is_empty() {
            return Err(last_error[k].take().unwrap_or(Error::InvalidOption("no Monte-Carlo runs")));
        }
        let averaged = average_aligned(&estimates[k])?;
        let report = detect_with(&averaged, &faulty, cfg.tolerance, cfg.norm)?.score(&truth)?;
        methods.push(MethodFaults {
            method,
            averaged,
            detected: report.flagged(),
            true_positive: report.confusion.map_or(0, |c| c.true_positive),
            failed_runs: cfg.runs - estimates[k].len(),
        });
    }
    Ok(FaultOutcome {
        injected,
        oracle_detected: oracle.flagged(),
        oracle_true_positive: oracle.confusion.map_or(0, |c| c.true_positive),
        methods,
    })
}
