//! The four estimators: plain PCA, structural PCA (per-equation PCA on
//! sub-selected variables with rank filtering), constrained PCA (PCA in the
//! null space of known equations) and the combined algorithm that feeds
//! earlier structured estimates into constrained PCA.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::error::{Error, Result};
use crate::matops::{
    check_finite, condition_number, max_abs, null_space_basis, numeric_rank, pinv, pinv_apply,
    residual_against_basis, row_space_basis, sym_eig, Mat, RowVec, SymEig,
};
use crate::model::{
    embed_row, group_count, label_equations, restructure, ConstraintModel, EquationLabel, Label,
    RowPermutation, StructureMask,
};

/// Null-space bases with a condition number above this are rejected.
pub const MAX_BASIS_CONDITION: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum Method {
    Pca,
    Spca,
    Cpca,
    Cspca,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Pca, Method::Spca, Method::Cpca, Method::Cspca];

    /// Lower-case identifier used in files and on the command line.
    pub fn id(self) -> &'static str {
        match self {
            Method::Pca => "pca",
            Method::Spca => "spca",
            Method::Cpca => "cpca",
            Method::Cspca => "cspca",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Pca => "PCA",
            Method::Spca => "sPCA",
            Method::Cpca => "cPCA",
            Method::Cspca => "CSPCA",
        })
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.id().eq_ignore_ascii_case(s))
            .ok_or(Error::InvalidOption("unknown method"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct IdentifyOptions {
    /// A candidate row is accepted as a new constraint when its distance to
    /// the row space of the rows accepted so far exceeds this value.
    pub rank_tol_rel: f64,
    /// Relative rank tolerance for null-space and rank computations;
    /// `None` uses the matops default.
    pub eig_tol: Option<f64>,
    /// Subtract the per-variable mean before forming covariances.
    pub center_data: bool,
}

impl Default for IdentifyOptions {
    fn default() -> Self {
        IdentifyOptions { rank_tol_rel: 0.1, eig_tol: None, center_data: false }
    }
}

impl IdentifyOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.rank_tol_rel > 0.0 && self.rank_tol_rel < 1.0) {
            return Err(Error::InvalidOption("rank_tol_rel must lie in (0, 1)"));
        }
        if let Some(t) = self.eig_tol {
            if !(t > 0.0 && t.is_finite()) {
                return Err(Error::InvalidOption("eig_tol must be positive"));
            }
        }
        Ok(())
    }
}

/// Eigenvalues computed at one stage of an estimator.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct StageEigenvalues {
    /// Row in the processing order (`None` for a single whole-data stage).
    pub stage: Option<usize>,
    /// Variables the covariance was formed over (all variables for PCA,
    /// projected coordinates for cPCA are reported as an empty list).
    pub support: Vec<usize>,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IdentifyResult {
    pub model: ConstraintModel,
    pub eigenvalues: Vec<StageEigenvalues>,
    /// Processing order used internally (output rows are in the caller's order).
    pub permutation: RowPermutation,
    pub method: Method,
    /// Equation labels in processing order (combined algorithm only).
    pub labels: Vec<EquationLabel>,
}

impl IdentifyResult {
    pub fn matrix(&self) -> &Mat {
        self.model.matrix()
    }
}

/// `(1/N) Y Yᵀ`, optionally about the per-row mean.
pub fn sample_covariance(y: &Mat, center: bool) -> Mat {
    let n = y.ncols().max(1) as f64;
    if center {
        let mut c = y.clone();
        for mut row in c.row_iter_mut() {
            let mean = row.sum() / n;
            row.add_scalar_mut(-mean);
        }
        (&c * c.transpose()) / n
    } else {
        (y * y.transpose()) / n
    }
}

fn check_data(y: &Mat, m: usize) -> Result<()> {
    check_finite(y)?;
    let (n, samples) = y.shape();
    if m == 0 || m >= n {
        return Err(Error::InvalidRowCount { requested: m, variables: n });
    }
    if samples < n {
        return Err(Error::TooFewSamples { needed: n, got: samples });
    }
    Ok(())
}

fn select_rows(y: &Mat, support: &[usize]) -> Mat {
    Mat::from_fn(support.len(), y.ncols(), |r, c| y[(support[r], c)])
}

fn covariance_eig(y: &Mat, center: bool) -> Result<SymEig> {
    let cov = sample_covariance(y, center);
    if max_abs(&cov) == 0.0 {
        return Err(Error::DegenerateCovariance);
    }
    sym_eig(&cov)
}

fn stack_rows(rows: &[RowVec], n: usize) -> Mat {
    let mut a = Mat::zeros(rows.len(), n);
    for (i, r) in rows.iter().enumerate() {
        a.set_row(i, r);
    }
    a
}

/// Running set of accepted constraint rows with an orthonormal basis of
/// their span, used for the "is this a new relation" test.
struct Accepted {
    n: usize,
    rows: Vec<RowVec>,
    basis: Mat,
}

impl Accepted {
    fn new(n: usize) -> Self {
        Accepted { n, rows: Vec::new(), basis: Mat::zeros(0, n) }
    }

    fn residual(&self, candidate: &RowVec) -> f64 {
        if self.rows.is_empty() {
            candidate.norm()
        } else {
            residual_against_basis(&self.basis, candidate)
        }
    }

    fn push(&mut self, row: RowVec) {
        self.rows.push(row);
        self.basis = row_space_basis(&stack_rows(&self.rows, self.n), None);
    }
}

/// Plain PCA: the `m` eigenvectors of the sample covariance with the
/// smallest eigenvalues, stacked as orthonormal rows.
pub fn pca_identify(y: &Mat, m: usize, opts: &IdentifyOptions) -> Result<IdentifyResult> {
    opts.validate()?;
    check_data(y, m)?;
    let eig = covariance_eig(y, opts.center_data)?;
    let n = y.nrows();
    let rows: Vec<RowVec> = (0..m).map(|i| eig.vector_row(i)).collect();
    let model = ConstraintModel::new(stack_rows(&rows, n), None)?;
    Ok(IdentifyResult {
        model,
        eigenvalues: alloc::vec![StageEigenvalues {
            stage: None,
            support: (0..n).collect(),
            values: eig.values.iter().copied().collect(),
        }],
        permutation: RowPermutation::identity(m),
        method: Method::Pca,
        labels: Vec::new(),
    })
}

/// Mean of the `m` smallest eigenvalues of the (uncentred) sample covariance.
pub fn noise_variance_estimate(y: &Mat, m: usize) -> Result<f64> {
    check_data(y, m)?;
    let eig = covariance_eig(y, false)?;
    Ok(eig.values.iter().take(m).sum::<f64>() / m as f64)
}

fn check_mask(y: &Mat, mask: &StructureMask) -> Result<()> {
    if mask.cols() != y.nrows() {
        return Err(Error::ShapeMismatch("mask columns must equal the number of variables"));
    }
    check_data(y, mask.rows())
}

/// Put rows estimated in processing order back into the caller's order.
fn unpermute(sorted_rows: &[RowVec], perm: &RowPermutation, n: usize) -> Mat {
    let mut a = Mat::zeros(sorted_rows.len(), n);
    for (s, row) in sorted_rows.iter().enumerate() {
        a.set_row(perm.as_slice()[s], row);
    }
    a
}

fn finish_model(a: Mat, mask: &StructureMask) -> Result<ConstraintModel> {
    match ConstraintModel::new(a, Some(mask.clone())) {
        Err(Error::DependentRows { rank, rows }) => {
            Err(Error::StructureInfeasible { row: rank, found: rank, needed: rows })
        }
        other => other,
    }
}

/// Structural PCA.
///
/// Equations are processed in ascending order of support size. Each
/// distinct support is handled once: PCA on the variables in the support
/// yields candidate rows (ascending eigenvalue), and candidates are accepted
/// while they add a new direction to the rows found so far, until as many
/// rows as the mask has with that support have been collected.
pub fn spca_identify(y: &Mat, mask: &StructureMask, opts: &IdentifyOptions) -> Result<IdentifyResult> {
    opts.validate()?;
    check_mask(y, mask)?;
    let n = y.nrows();
    let m = mask.rows();
    let (sorted, perm) = restructure(mask);

    let mut slots: Vec<Option<RowVec>> = alloc::vec![None; m];
    let mut accepted = Accepted::new(n);
    let mut eigenvalues = Vec::new();

    for i in 0..m {
        if (0..i).any(|j| sorted.row(j) == sorted.row(i)) {
            continue;
        }
        let support = sorted.support(i);
        let needed = group_count(&sorted, i);
        let targets: Vec<usize> = (i..m).filter(|&j| sorted.row(j) == sorted.row(i)).collect();

        let eig = covariance_eig(&select_rows(y, &support), opts.center_data)?;
        eigenvalues.push(StageEigenvalues {
            stage: Some(i),
            support: support.clone(),
            values: eig.values.iter().copied().collect(),
        });

        let mut found = 0;
        for k in 0..support.len() {
            let v: Vec<f64> = eig.vectors.column(k).iter().copied().collect();
            let candidate = embed_row(&v, &support, n)?;
            if accepted.residual(&candidate) > opts.rank_tol_rel {
                slots[targets[found]] = Some(candidate.clone());
                accepted.push(candidate);
                found += 1;
                if found == needed {
                    break;
                }
            }
        }
        if found < needed {
            return Err(Error::StructureInfeasible { row: perm.as_slice()[i], found, needed });
        }
    }

    let rows: Vec<RowVec> = slots.into_iter().map(|r| r.expect("every slot filled")).collect();
    let model = finish_model(unpermute(&rows, &perm, n), mask)?;
    Ok(IdentifyResult { model, eigenvalues, permutation: perm, method: Method::Spca, labels: Vec::new() })
}

/// Candidate rows from PCA in the null space of `known`, back-mapped to the
/// original coordinates, ascending by projected eigenvalue.
struct Projected {
    candidates: Vec<RowVec>,
    eigenvalues: Vec<f64>,
}

fn projected_candidates(y: &Mat, known: &Mat, opts: &IdentifyOptions) -> Result<Projected> {
    let n = y.nrows();
    if known.ncols() != n {
        return Err(Error::DimensionMismatch("known rows must have one column per variable"));
    }
    if known.nrows() > 0 && numeric_rank(known, opts.eig_tol) < known.nrows() {
        return Err(Error::KnownRowsRankDeficient);
    }
    let basis = null_space_basis(known, opts.eig_tol)?;
    if basis.ncols() != n - known.nrows() {
        return Err(Error::KnownRowsRankDeficient);
    }
    let condition = condition_number(&basis);
    if condition > MAX_BASIS_CONDITION {
        return Err(Error::IllConditioned { condition });
    }
    let projected = pinv_apply(&basis, y)?;
    let eig = covariance_eig(&projected, opts.center_data)?;
    let back = pinv(&basis)?;
    let candidates = (0..basis.ncols())
        .map(|k| {
            let row = eig.vector_row(k) * &back;
            let norm = row.norm();
            row / norm
        })
        .collect();
    Ok(Projected { candidates, eigenvalues: eig.values.iter().copied().collect() })
}

/// Constrained PCA: `known` holds `m - l` rows of the model, and the
/// remaining `l` rows are estimated from the data projected onto the null
/// space of `known`. The result stacks `known` (unchanged) above the `l`
/// unit-norm estimated rows.
pub fn cpca_identify(y: &Mat, known: &Mat, l: usize, opts: &IdentifyOptions) -> Result<IdentifyResult> {
    opts.validate()?;
    check_finite(y)?;
    check_finite(known)?;
    let (n, samples) = y.shape();
    if known.ncols() != n {
        return Err(Error::DimensionMismatch("known rows must have one column per variable"));
    }
    if l == 0 {
        return Err(Error::InvalidOption("cPCA needs at least one unknown row"));
    }
    let m = known.nrows() + l;
    if m >= n {
        return Err(Error::InvalidRowCount { requested: m, variables: n });
    }
    let reduced = n - known.nrows();
    if samples < reduced {
        return Err(Error::TooFewSamples { needed: reduced, got: samples });
    }
    let projected = projected_candidates(y, known, opts)?;

    let mut full = Mat::zeros(m, n);
    full.rows_mut(0, known.nrows()).copy_from(known);
    for (i, row) in projected.candidates.iter().take(l).enumerate() {
        full.set_row(known.nrows() + i, row);
    }
    let model = ConstraintModel::new(full, None).map_err(|e| match e {
        Error::DependentRows { .. } => Error::KnownRowsRankDeficient,
        other => other,
    })?;
    Ok(IdentifyResult {
        model,
        eigenvalues: alloc::vec![StageEigenvalues { stage: None, support: Vec::new(), values: projected.eigenvalues }],
        permutation: RowPermutation::identity(m),
        method: Method::Cpca,
        labels: Vec::new(),
    })
}

/// Combined structural/constrained PCA.
///
/// Equations are sorted by support size and labelled. An `S` equation is
/// estimated like a structural-PCA row. A `C` equation runs constrained PCA
/// on its own variables, treating the already estimated rows whose supports
/// it contains as known, and keeps one new direction.
pub fn cspca_identify(y: &Mat, mask: &StructureMask, opts: &IdentifyOptions) -> Result<IdentifyResult> {
    opts.validate()?;
    check_mask(y, mask)?;
    let n = y.nrows();
    let (sorted, perm) = restructure(mask);
    let labels = label_equations(&sorted);

    let mut accepted = Accepted::new(n);
    let mut eigenvalues = Vec::new();

    for (i, eq) in labels.iter().enumerate() {
        let support = &eq.support;
        let y_sub = select_rows(y, support);
        let (candidates, values) = match eq.label {
            Label::S => {
                let eig = covariance_eig(&y_sub, opts.center_data)?;
                let cands: Vec<RowVec> = (0..support.len()).map(|k| eig.vector_row(k)).collect();
                (cands, eig.values.iter().copied().collect::<Vec<f64>>())
            }
            Label::C => {
                let known = Mat::from_fn(eq.substructured.len(), support.len(), |r, c| {
                    accepted.rows[eq.substructured[r]][support[c]]
                });
                if known.nrows() + 1 >= support.len() {
                    return Err(Error::StructureInfeasible { row: perm.as_slice()[i], found: 0, needed: 1 });
                }
                let p = projected_candidates(&y_sub, &known, opts)?;
                (p.candidates, p.eigenvalues)
            }
        };
        eigenvalues.push(StageEigenvalues { stage: Some(i), support: support.clone(), values });

        let mut chosen = None;
        for cand in &candidates {
            let v: Vec<f64> = cand.iter().copied().collect();
            let row = embed_row(&v, support, n)?;
            if accepted.residual(&row) > opts.rank_tol_rel {
                chosen = Some(row);
                break;
            }
        }
        match chosen {
            Some(row) => accepted.push(row),
            None => return Err(Error::StructureInfeasible { row: perm.as_slice()[i], found: 0, needed: 1 }),
        }
    }

    let model = finish_model(unpermute(&accepted.rows, &perm, n), mask)?;
    Ok(IdentifyResult { model, eigenvalues, permutation: perm, method: Method::Cspca, labels })
}

/// Which estimator to run, with its method-specific prior.
#[derive(Debug, Clone, PartialEq)]
pub enum Prior<'a> {
    Rows(usize),
    Mask(&'a StructureMask),
    Known { rows: &'a Mat, unknown: usize },
}

/// Dispatch helper used by the experiment runners.
pub fn identify(method: Method, y: &Mat, prior: Prior<'_>, opts: &IdentifyOptions) -> Result<IdentifyResult> {
    match (method, prior) {
        (Method::Pca, Prior::Rows(m)) => pca_identify(y, m, opts),
        (Method::Pca, Prior::Mask(mask)) => pca_identify(y, mask.rows(), opts),
        (Method::Spca, Prior::Mask(mask)) => spca_identify(y, mask, opts),
        (Method::Cspca, Prior::Mask(mask)) => cspca_identify(y, mask, opts),
        (Method::Cpca, Prior::Known { rows, unknown }) => cpca_identify(y, rows, unknown, opts),
        _ => Err(Error::InvalidOption("prior does not match method")),
    }
}

/// Label column rendered as a string such as `"SCCC"`.
pub fn label_string(labels: &[EquationLabel]) -> String {
    labels.iter().map(|l| if l.label == Label::S { 'S' } else { 'C' }).collect()
}
