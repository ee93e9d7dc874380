//! Seeded synthetic data: noise-free samples drawn from the null space of a
//! true model, then corrupted by white Gaussian noise at a target SNR.
//!
//! Randomness comes from ChaCha8 (`rand_chacha`) seeded with
//! `seed_from_u64(seed)`. Independent streams of the same key keep the
//! coefficient draws and the noise draws from perturbing each other.

use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::matops::{null_space_basis, Mat};
use crate::model::ConstraintModel;

/// Provenance string recorded alongside generated data.
pub const RNG_ALGORITHM: &str =
    "ChaCha8Rng(rand_chacha 0.9, seed_from_u64); stream 0 = coefficients, stream 1 = noise, stream 2 = faults";

pub const STREAM_COEFFICIENTS: u64 = 0;
pub const STREAM_NOISE: u64 = 1;
pub const STREAM_FAULTS: u64 = 2;

/// Generator for one stream of a seed.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Distribution of the null-space mixing coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum CoeffLaw {
    #[default]
    StandardNormal,
    /// Uniform on (-1, 1).
    Uniform,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenSpec {
    pub model: ConstraintModel,
    pub n_samples: usize,
    pub coeff_law: CoeffLaw,
    pub seed: u64,
}

impl GenSpec {
    pub fn new(model: ConstraintModel, n_samples: usize, seed: u64) -> Self {
        GenSpec { model, n_samples, coeff_law: CoeffLaw::default(), seed }
    }

    fn validate(&self) -> Result<()> {
        let needed = self.model.cols() - self.model.rows() + 1;
        if self.n_samples < needed {
            return Err(Error::TooFewSamples { needed, got: self.n_samples });
        }
        Ok(())
    }
}

/// Noise-free data `X = B M` with `B` an orthonormal null-space basis of the
/// true model and `M` i.i.d. coefficients (`n x N`, one sample per column).
pub fn simulate(spec: &GenSpec) -> Result<Mat> {
    spec.validate()?;
    let basis = null_space_basis(spec.model.matrix(), None)?;
    let k = basis.ncols();
    let mut rng = stream_rng(spec.seed, STREAM_COEFFICIENTS);
    let mut coeffs = Mat::zeros(k, spec.n_samples);
    for t in 0..spec.n_samples {
        for j in 0..k {
            coeffs[(j, t)] = match spec.coeff_law {
                CoeffLaw::StandardNormal => StandardNormal.sample(&mut rng),
                CoeffLaw::Uniform => rng.random_range(-1.0..1.0),
            };
        }
    }
    Ok(basis * coeffs)
}

/// Unbiased sample variance of each row.
pub fn channel_variances(x: &Mat) -> Vec<f64> {
    let n = x.ncols();
    x.row_iter()
        .map(|row| {
            if n < 2 {
                return 0.0;
            }
            let mean = row.sum() / n as f64;
            row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64
        })
        .collect()
}

fn check_snr(snr: f64) -> Result<()> {
    if snr.is_nan() || snr <= 0.0 {
        return Err(Error::InvalidSnr(snr));
    }
    Ok(())
}

fn corrupt(x: &Mat, sigmas: &[f64], seed: u64) -> Mat {
    let mut rng = stream_rng(seed, STREAM_NOISE);
    let mut y = x.clone();
    for t in 0..x.ncols() {
        for (i, &s) in sigmas.iter().enumerate() {
            let e: f64 = StandardNormal.sample(&mut rng);
            y[(i, t)] += s * e;
        }
    }
    y
}

/// Add homoscedastic white noise with `sigma² = mean(var(x_i)) / snr`.
///
/// `snr = ∞` returns `x` unchanged with `sigma = 0`.
pub fn add_noise(x: &Mat, snr: f64, seed: u64) -> Result<(Mat, f64)> {
    check_snr(snr)?;
    if snr.is_infinite() {
        return Ok((x.clone(), 0.0));
    }
    let vars = channel_variances(x);
    let mean_var = vars.iter().sum::<f64>() / vars.len().max(1) as f64;
    if mean_var <= 0.0 {
        return Err(Error::DegenerateSignal);
    }
    let sigma = libm::sqrt(mean_var / snr);
    let sigmas = alloc::vec![sigma; x.nrows()];
    Ok((corrupt(x, &sigmas, seed), sigma))
}

/// Per-channel variant: channel `i` gets `sigma_i² = var(x_i) / snr`.
///
/// This breaks the equal-variance noise assumption the estimators rely on
/// and is not used by default.
pub fn add_noise_per_channel(x: &Mat, snr: f64, seed: u64) -> Result<(Mat, Vec<f64>)> {
    check_snr(snr)?;
    if snr.is_infinite() {
        return Ok((x.clone(), alloc::vec![0.0; x.nrows()]));
    }
    let vars = channel_variances(x);
    if vars.iter().all(|&v| v <= 0.0) {
        return Err(Error::DegenerateSignal);
    }
    let sigmas: Vec<f64> = vars.iter().map(|v| libm::sqrt(v / snr)).collect();
    Ok((corrupt(x, &sigmas, seed), sigmas))
}

/// Noise-free and noisy data with provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct DataSet {
    pub x: Mat,
    pub y: Mat,
    pub sigma: f64,
    pub seed: u64,
    pub snr: f64,
}

/// `simulate` followed by `add_noise`, both keyed by `spec.seed`.
pub fn generate(spec: &GenSpec, snr: f64) -> Result<DataSet> {
    let x = simulate(spec)?;
    let (y, sigma) = add_noise(&x, snr, spec.seed)?;
    Ok(DataSet { x, y, sigma, seed: spec.seed, snr })
}
