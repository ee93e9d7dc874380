//! Dense matrix primitives used by every estimator.
//!
//! Everything here routes through nalgebra's SVD or symmetric eigensolver.
//! Rank decisions use a relative tolerance: a singular value counts as
//! non-zero when it exceeds `tol * sigma_max`, with the default
//! `tol = max(rows, cols) * f64::EPSILON`.

use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector, RowDVector, SymmetricEigen, SVD};

use crate::error::{Error, Result};

/// Dense real matrix, stored column-major by nalgebra.
pub type Mat = DMatrix<f64>;
/// Dense real row vector.
pub type RowVec = RowDVector<f64>;

/// Relative tolerance above which `sym_eig` rejects an input as asymmetric.
pub const SYMMETRY_TOL: f64 = 1e-10;

const EIG_MAX_ITER: usize = 10_000;

/// Default relative rank tolerance for a `rows x cols` matrix.
pub fn default_rank_tol(rows: usize, cols: usize) -> f64 {
    rows.max(cols) as f64 * f64::EPSILON
}

/// Largest absolute entry (0 for an empty matrix).
pub fn max_abs(a: &Mat) -> f64 {
    a.iter().fold(0.0, |acc, v| acc.max(v.abs()))
}

pub fn check_finite(a: &Mat) -> Result<()> {
    if a.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite)
    }
}

/// Build a matrix from row-major entries, rejecting non-finite values.
pub fn from_rows(rows: usize, cols: usize, entries: &[f64]) -> Result<Mat> {
    if entries.len() != rows * cols {
        return Err(Error::DimensionMismatch("entry count must equal rows * cols"));
    }
    let a = Mat::from_row_slice(rows, cols, entries);
    check_finite(&a)?;
    Ok(a)
}

/// Flip the sign of `v` so its largest-magnitude entry is positive.
///
/// The first index attaining the maximum magnitude decides.
pub(crate) fn canonical_sign(v: &mut [f64]) {
    let mut best = 0usize;
    let mut best_abs = -1.0;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > best_abs {
            best_abs = x.abs();
            best = i;
        }
    }
    if !v.is_empty() && v[best] < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

/// Symmetric eigendecomposition with ascending eigenvalues.
#[derive(Debug, Clone, PartialEq)]
pub struct SymEig {
    pub values: DVector<f64>,
    /// Column `i` is the unit eigenvector for `values[i]`.
    pub vectors: Mat,
}

impl SymEig {
    /// Eigenvector `i` as a row vector.
    pub fn vector_row(&self, i: usize) -> RowVec {
        self.vectors.column(i).transpose()
    }
}

/// Eigendecomposition of a symmetric matrix.
///
/// Eigenvalues are sorted ascending and every eigenvector is flipped so
/// that its largest-magnitude entry is positive.
pub fn sym_eig(s: &Mat) -> Result<SymEig> {
    let n = s.nrows();
    if n != s.ncols() {
        return Err(Error::NonSquare { rows: n, cols: s.ncols() });
    }
    check_finite(s)?;
    let scale = max_abs(s);
    let asymmetry = max_abs(&(s - s.transpose()));
    if asymmetry > SYMMETRY_TOL * scale {
        return Err(Error::NotSymmetric { asymmetry });
    }
    if n == 0 {
        return Ok(SymEig { values: DVector::zeros(0), vectors: Mat::zeros(0, 0) });
    }
    let sym = (s + s.transpose()) * 0.5;
    let eig = SymmetricEigen::try_new(sym, f64::EPSILON, EIG_MAX_ITER).ok_or(Error::FailedToConverge)?;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));

    let mut values = DVector::zeros(n);
    let mut vectors = Mat::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        values[dst] = eig.eigenvalues[src];
        let mut col: Vec<f64> = eig.eigenvectors.column(src).iter().copied().collect();
        canonical_sign(&mut col);
        vectors.set_column(dst, &DVector::from_vec(col));
    }
    Ok(SymEig { values, vectors })
}

/// Singular values, sorted descending.
pub fn singular_values(a: &Mat) -> DVector<f64> {
    if a.is_empty() {
        return DVector::zeros(0);
    }
    let mut sv: Vec<f64> = SVD::new(a.clone(), false, false).singular_values.iter().copied().collect();
    sv.sort_by(|x, y| y.total_cmp(x));
    DVector::from_vec(sv)
}

/// Number of singular values above `tol * sigma_max`.
///
/// `tol = None` selects [`default_rank_tol`].
pub fn numeric_rank(a: &Mat, tol: Option<f64>) -> usize {
    let sv = singular_values(a);
    if sv.is_empty() {
        return 0;
    }
    let tol = tol.unwrap_or_else(|| default_rank_tol(a.nrows(), a.ncols()));
    let threshold = tol * sv[0];
    sv.iter().filter(|&&s| s > threshold).count()
}

/// Full right-singular basis of `a` as `(sigma, vt)` with `vt` square
/// `ncols x ncols`. Wide inputs are padded with zero rows so the
/// decomposition is complete.
fn full_right_svd(a: &Mat) -> (Vec<f64>, Mat) {
    let (m, n) = a.shape();
    let work = if m < n {
        let mut padded = Mat::zeros(n, n);
        padded.rows_mut(0, m).copy_from(a);
        padded
    } else {
        a.clone()
    };
    let svd = SVD::new(work, false, true);
    let vt = svd.v_t.expect("v_t requested");
    let mut sigma: Vec<f64> = svd.singular_values.iter().copied().collect();
    sigma.resize(n, 0.0);
    (sigma, vt)
}

/// Orthonormal basis of the null space of `a`, one basis vector per column.
///
/// Directions with singular value at most `tol * sigma_max` are treated as
/// null (`tol = None` selects [`default_rank_tol`]).
pub fn null_space_basis(a: &Mat, tol: Option<f64>) -> Result<Mat> {
    check_finite(a)?;
    let (m, n) = a.shape();
    let tol = tol.unwrap_or_else(|| default_rank_tol(m, n));
    let (sigma, vt) = full_right_svd(a);
    let sigma_max = sigma.iter().fold(0.0_f64, |acc, s| acc.max(*s));
    let threshold = tol * sigma_max;

    let mut null_rows: Vec<usize> = (0..n).filter(|&i| sigma[i] <= threshold).collect();
    // present the weakest directions last, matching descending singular values
    null_rows.sort_by(|&x, &y| sigma[y].total_cmp(&sigma[x]).then(x.cmp(&y)));
    if null_rows.is_empty() {
        return Err(Error::EmptyNullSpace);
    }
    let mut basis = Mat::zeros(n, null_rows.len());
    for (k, &r) in null_rows.iter().enumerate() {
        let mut col: Vec<f64> = vt.row(r).iter().copied().collect();
        canonical_sign(&mut col);
        basis.set_column(k, &DVector::from_vec(col));
    }
    Ok(basis)
}

/// Orthonormal basis (as rows) of the row space of `a`.
pub fn row_space_basis(a: &Mat, tol: Option<f64>) -> Mat {
    let (m, n) = a.shape();
    if m == 0 || n == 0 {
        return Mat::zeros(0, n);
    }
    let tol = tol.unwrap_or_else(|| default_rank_tol(m, n));
    let svd = SVD::new(a.clone(), false, true);
    let vt = svd.v_t.expect("v_t requested");
    let sigma_max = svd.singular_values.iter().fold(0.0_f64, |acc, s| acc.max(*s));
    let keep: Vec<usize> = (0..svd.singular_values.len())
        .filter(|&i| svd.singular_values[i] > tol * sigma_max && sigma_max > 0.0)
        .collect();
    let mut q = Mat::zeros(keep.len(), n);
    for (k, &r) in keep.iter().enumerate() {
        q.set_row(k, &vt.row(r));
    }
    q
}

/// Euclidean distance from `b` to the row space of `a`.
///
/// `a` must have full numeric row rank.
pub fn row_space_residual(a: &Mat, b: &RowVec) -> Result<f64> {
    if a.ncols() != b.len() {
        return Err(Error::DimensionMismatch("row vector width must match base columns"));
    }
    let q = row_space_basis(a, None);
    if q.nrows() < a.nrows() {
        return Err(Error::RankDeficientBase);
    }
    Ok(residual_against_basis(&q, b))
}

/// `|| b - b qᵀ q ||` for a matrix `q` with orthonormal rows.
pub(crate) fn residual_against_basis(q: &Mat, b: &RowVec) -> f64 {
    let coeffs = b * q.transpose();
    (b - coeffs * q).norm()
}

/// Least-squares solution `Z` of `a Z = y`, i.e. `(aᵀa)⁻¹ aᵀ y` evaluated
/// through the SVD of `a`.
pub fn pinv_apply(a: &Mat, y: &Mat) -> Result<Mat> {
    let (n, k) = a.shape();
    if y.nrows() != n {
        return Err(Error::DimensionMismatch("pinv_apply: row counts differ"));
    }
    if k == 0 || k > n {
        return Err(Error::RankDeficient);
    }
    let svd = SVD::new(a.clone(), true, true);
    let sigma = &svd.singular_values;
    let sigma_max = sigma.iter().fold(0.0_f64, |acc, s| acc.max(*s));
    let threshold = default_rank_tol(n, k) * sigma_max;
    if sigma_max == 0.0 || sigma.iter().any(|&s| s <= threshold) {
        return Err(Error::RankDeficient);
    }
    let u = svd.u.expect("u requested");
    let vt = svd.v_t.expect("v_t requested");
    let mut uty = u.transpose() * y;
    for (i, mut row) in uty.row_iter_mut().enumerate() {
        row /= sigma[i];
    }
    Ok(vt.transpose() * uty)
}

/// Moore-Penrose pseudo-inverse of a full-column-rank matrix.
pub fn pinv(a: &Mat) -> Result<Mat> {
    pinv_apply(a, &Mat::identity(a.nrows(), a.nrows()))
}

/// Ratio of largest to smallest singular value (infinite when singular).
pub fn condition_number(a: &Mat) -> f64 {
    let sv = singular_values(a);
    match (sv.iter().next(), sv.iter().next_back()) {
        (Some(&hi), Some(&lo)) if lo > 0.0 => hi / lo,
        _ => f64::INFINITY,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flow_mix() -> Mat {
        Mat::from_row_slice(
            3,
            5,
            &[1.0, -1.0, 0.0, 0.0, 1.0, 0.0, 1.0, -1.0, 0.0, 0.0, 0.0, 0.0, 1.0, -1.0, -1.0],
        )
    }

    #[test]
    fn eig_identity_and_diagonal() {
        let e = sym_eig(&Mat::identity(3, 3)).unwrap();
        assert_eq!(e.values.as_slice(), &[1.0, 1.0, 1.0]);
        let v = &e.vectors;
        assert!((v.transpose() * v - Mat::identity(3, 3)).abs().max() < 1e-12);

        let d = Mat::from_diagonal(&DVector::from_vec(vec![4.0, 1.0, 9.0]));
        let e = sym_eig(&d).unwrap();
        assert_eq!(e.values.as_slice(), &[1.0, 4.0, 9.0]);
        // permuted standard basis, positive by the sign convention
        let expected = Mat::from_row_slice(3, 3, &[0.0, 1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0]);
        assert!((&e.vectors - expected).abs().max() < 1e-14);
    }

    #[test]
    fn eig_rejects_bad_input() {
        assert!(matches!(sym_eig(&Mat::zeros(2, 3)), Err(Error::NonSquare { .. })));
        let s = Mat::from_row_slice(2, 2, &[1.0, 2.0, 0.0, 1.0]);
        assert!(matches!(sym_eig(&s), Err(Error::NotSymmetric { .. })));
    }

    #[test]
    fn eig_sign_convention() {
        let s = Mat::from_row_slice(2, 2, &[2.0, -1.0, -1.0, 2.0]);
        let e = sym_eig(&s).unwrap();
        for c in 0..2 {
            let col = e.vectors.column(c);
            let (imax, _) = col.iter().enumerate().fold((0, 0.0), |acc, (i, v)| {
                if v.abs() > acc.1 { (i, v.abs()) } else { acc }
            });
            assert!(col[imax] > 0.0);
        }
    }

    #[test]
    fn rank_examples() {
        assert_eq!(numeric_rank(&Mat::zeros(3, 4), None), 0);
        assert_eq!(numeric_rank(&flow_mix(), None), 3);
        assert_eq!(numeric_rank(&Mat::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0]), None), 1);
    }

    #[test]
    fn null_space_examples() {
        let b = null_space_basis(&Mat::from_row_slice(1, 2, &[1.0, -1.0]), None).unwrap();
        let s = 1.0 / 2f64.sqrt();
        assert_eq!(b.shape(), (2, 1));
        assert!((b[(0, 0)] - s).abs() < 1e-15 && (b[(1, 0)] - s).abs() < 1e-15);

        let a = flow_mix();
        let b = null_space_basis(&a, None).unwrap();
        assert_eq!(b.shape(), (5, 2));
        assert!(max_abs(&(&a * &b)) < 1e-12);
        assert!((b.transpose() * &b - Mat::identity(2, 2)).abs().max() < 1e-12);

        let a = Mat::from_row_slice(2, 3, &[1.0, -1.0, 0.0, 0.0, 1.0, -1.0]);
        let b = null_space_basis(&a, None).unwrap();
        let t = 1.0 / 3f64.sqrt();
        for i in 0..3 {
            assert!((b[(i, 0)] - t).abs() < 1e-14);
        }
    }

    #[test]
    fn null_space_empty() {
        assert_eq!(null_space_basis(&Mat::identity(3, 3), None), Err(Error::EmptyNullSpace));
    }

    #[test]
    fn residual_examples() {
        let a = Mat::from_row_slice(1, 3, &[1.0, 0.0, 0.0]);
        let b = RowVec::from_row_slice(&[0.0, 0.0, 3.0]);
        assert!((row_space_residual(&a, &b).unwrap() - 3.0).abs() < 1e-14);

        let s = 1.0 / 2f64.sqrt();
        let a = Mat::from_row_slice(1, 3, &[s, s, 0.0]);
        let b = RowVec::from_row_slice(&[1.0, -1.0, 0.0]);
        assert!((row_space_residual(&a, &b).unwrap() - 2f64.sqrt()).abs() < 1e-14);

        let a = flow_mix();
        let b = a.row(0) * 2.0 - a.row(2);
        assert!(row_space_residual(&a, &b).unwrap() < 1e-10);

        let dep = Mat::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0]);
        assert_eq!(
            row_space_residual(&dep, &RowVec::from_row_slice(&[1.0, 0.0])),
            Err(Error::RankDeficientBase)
        );
    }

    #[test]
    fn pinv_examples() {
        let a = Mat::from_row_slice(2, 1, &[2.0, 0.0]);
        let y = Mat::from_row_slice(2, 1, &[4.0, 0.0]);
        assert!((pinv_apply(&a, &y).unwrap()[(0, 0)] - 2.0).abs() < 1e-15);

        let q = null_space_basis(&flow_mix(), None).unwrap();
        let y = Mat::from_fn(5, 4, |i, j| (i * 4 + j) as f64 - 7.0);
        let z = pinv_apply(&q, &y).unwrap();
        assert!((z - q.transpose() * y).abs().max() < 1e-12);

        let dep = Mat::from_row_slice(3, 2, &[1.0, 2.0, 2.0, 4.0, 3.0, 6.0]);
        assert_eq!(pinv_apply(&dep, &Mat::zeros(3, 1)), Err(Error::RankDeficient));
    }

    #[test]
    fn condition_of_orthonormal_is_one() {
        let q = null_space_basis(&flow_mix(), None).unwrap();
        assert!((condition_number(&q) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn from_rows_rejects_nan() {
        assert_eq!(from_rows(1, 2, &[1.0, f64::NAN]), Err(Error::NonFinite));
        assert!(from_rows(1, 3, &[1.0, 2.0]).is_err());
    }
}
