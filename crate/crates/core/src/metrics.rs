//! Model-error metrics.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::matops::{residual_against_basis, row_space_basis, Mat};

/// Subspace dependence between a true and an estimated model.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ThetaReport {
    pub theta: f64,
    /// Distance of each true row from the estimate's row space.
    pub per_row: Vec<f64>,
    /// Whether true rows were scaled to unit norm first.
    pub normalized: bool,
}

/// Sum over rows of `a0` of the Euclidean distance from that row to the row
/// space of `a_hat`.
///
/// The projection uses an orthonormal basis of `a_hat`'s rows rather than
/// `(ÂÂᵀ)⁻¹`. With `normalize_rows`, each true row is scaled to unit norm
/// first, which makes the value independent of how the true equations were
/// scaled.
pub fn subspace_dependence(a0: &Mat, a_hat: &Mat, normalize_rows: bool) -> Result<ThetaReport> {
    if a0.ncols() != a_hat.ncols() {
        return Err(Error::ShapeMismatch("true and estimated models have different column counts"));
    }
    let basis = row_space_basis(a_hat, None);
    if a_hat.nrows() == 0 || basis.nrows() < a_hat.nrows() {
        return Err(Error::RankDeficientEstimate);
    }
    let per_row: Vec<f64> = a0
        .row_iter()
        .map(|row| {
            let row = row.into_owned();
            let row = if normalize_rows {
                let norm = row.norm();
                if norm > 0.0 { row / norm } else { row }
            } else {
                row
            };
            residual_against_basis(&basis, &row)
        })
        .collect();
    Ok(ThetaReport { theta: per_row.iter().sum(), per_row, normalized: normalize_rows })
}

/// Raw-mode subspace dependence.
pub fn theta(a0: &Mat, a_hat: &Mat) -> Result<f64> {
    subspace_dependence(a0, a_hat, false).map(|r| r.theta)
}

/// For paired runs, how often each method has the strictly smallest value.
///
/// `runs[k][r]` is method `k`'s value in run `r`. Ties credit nobody and
/// non-finite entries (failed runs) never win.
pub fn best_instance_counts(runs: &[Vec<f64>]) -> Result<Vec<usize>> {
    let len = runs.first().map_or(0, |r| r.len());
    if runs.iter().any(|r| r.len() != len) {
        return Err(Error::LengthMismatch);
    }
    let mut counts = alloc::vec![0usize; runs.len()];
    for r in 0..len {
        let mut best: Option<(usize, f64)> = None;
        let mut tied = false;
        for (k, values) in runs.iter().enumerate() {
            let v = values[r];
            if !v.is_finite() {
                continue;
            }
            match best {
                None => best = Some((k, v)),
                Some((_, b)) if v < b => {
                    best = Some((k, v));
                    tied = false;
                }
                Some((_, b)) if v == b => tied = true,
                _ => {}
            }
        }
        if let (Some((k, _)), false) = (best, tied) {
            counts[k] += 1;
        }
    }
    Ok(counts)
}
