//! Structure masks, constraint models and the support-set bookkeeping used
//! by the structured estimators.
//!
//! Row and column indices are 0-based throughout.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::matops::{numeric_rank, Mat, RowVec};

/// Zero/non-zero pattern of an `m x n` constraint matrix.
///
/// `true` marks an entry that may be non-zero.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(try_from = "Vec<Vec<bool>>", into = "Vec<Vec<bool>>"))]
pub struct StructureMask {
    rows: usize,
    cols: usize,
    bits: Vec<bool>,
}

impl StructureMask {
    /// Validate and build a mask from row-major booleans.
    ///
    /// Every row needs at least two candidate entries and the mask must be
    /// wide (`rows < cols`).
    pub fn new(rows: usize, cols: usize, bits: Vec<bool>) -> Result<Self> {
        if bits.len() != rows * cols {
            return Err(Error::InvalidMask("entry count must equal rows * cols"));
        }
        if rows == 0 {
            return Err(Error::InvalidMask("mask has no rows"));
        }
        if rows >= cols {
            return Err(Error::InvalidMask("mask must have fewer rows than columns"));
        }
        for row in bits.chunks(cols) {
            match row.iter().filter(|&&b| b).count() {
                0 => return Err(Error::InvalidMask("mask row is empty")),
                1 => return Err(Error::InvalidMask("mask row has a single entry")),
                _ => {}
            }
        }
        Ok(StructureMask { rows, cols, bits })
    }

    pub fn from_rows(rows: &[&[bool]]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.len());
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::InvalidMask("ragged rows"));
        }
        Self::new(rows.len(), cols, rows.iter().flat_map(|r| r.iter().copied()).collect())
    }

    /// Mask of the exact non-zero pattern of `a`.
    pub fn from_matrix(a: &Mat) -> Result<Self> {
        let (m, n) = a.shape();
        let bits = (0..m).flat_map(|i| (0..n).map(move |j| (i, j))).map(|(i, j)| a[(i, j)] != 0.0).collect();
        Self::new(m, n, bits)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, row: usize, col: usize) -> bool {
        self.bits[row * self.cols + col]
    }

    pub fn row(&self, i: usize) -> &[bool] {
        &self.bits[i * self.cols..(i + 1) * self.cols]
    }

    /// Number of candidate entries in row `i`.
    pub fn nnz(&self, i: usize) -> usize {
        self.row(i).iter().filter(|&&b| b).count()
    }

    /// Variables participating in equation `i`, ascending.
    pub fn support(&self, i: usize) -> Vec<usize> {
        support(self, i)
    }

    /// Rows rearranged so output row `r` is input row `perm[r]`.
    pub fn permuted(&self, perm: &RowPermutation) -> Self {
        let bits = perm.as_slice().iter().flat_map(|&src| self.row(src).iter().copied()).collect();
        StructureMask { rows: self.rows, cols: self.cols, bits }
    }

    /// Does `a` vanish everywhere the mask is `false`?
    pub fn admits(&self, a: &Mat) -> Result<()> {
        if a.shape() != (self.rows, self.cols) {
            return Err(Error::ShapeMismatch("matrix and mask shapes differ"));
        }
        for i in 0..self.rows {
            for j in 0..self.cols {
                if !self.get(i, j) && a[(i, j)] != 0.0 {
                    return Err(Error::MaskViolation { row: i, col: j });
                }
            }
        }
        Ok(())
    }

    pub fn to_rows(&self) -> Vec<Vec<bool>> {
        self.bits.chunks(self.cols).map(|r| r.to_vec()).collect()
    }
}

impl TryFrom<Vec<Vec<bool>>> for StructureMask {
    type Error = Error;

    fn try_from(rows: Vec<Vec<bool>>) -> Result<Self> {
        let refs: Vec<&[bool]> = rows.iter().map(|r| r.as_slice()).collect();
        Self::from_rows(&refs)
    }
}

impl From<StructureMask> for Vec<Vec<bool>> {
    fn from(mask: StructureMask) -> Self {
        mask.to_rows()
    }
}

/// A constraint matrix with independent rows, optionally tied to a mask.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintModel {
    a: Mat,
    mask: Option<StructureMask>,
}

impl ConstraintModel {
    pub fn new(a: Mat, mask: Option<StructureMask>) -> Result<Self> {
        crate::matops::check_finite(&a)?;
        if let Some(mask) = &mask {
            mask.admits(&a)?;
        }
        let rank = numeric_rank(&a, None);
        if rank != a.nrows() {
            return Err(Error::DependentRows { rank, rows: a.nrows() });
        }
        Ok(ConstraintModel { a, mask })
    }

    pub fn matrix(&self) -> &Mat {
        &self.a
    }

    pub fn mask(&self) -> Option<&StructureMask> {
        self.mask.as_ref()
    }

    /// Number of equations `m`.
    pub fn rows(&self) -> usize {
        self.a.nrows()
    }

    /// Number of variables `n`.
    pub fn cols(&self) -> usize {
        self.a.ncols()
    }

    pub fn into_matrix(self) -> Mat {
        self.a
    }
}

/// Bijection on row indices: output row `r` came from input row `perm[r]`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(try_from = "Vec<usize>", into = "Vec<usize>"))]
pub struct RowPermutation(Vec<usize>);

impl RowPermutation {
    pub fn new(perm: Vec<usize>) -> Result<Self> {
        let mut seen = alloc::vec![false; perm.len()];
        for &p in &perm {
            if p >= perm.len() || seen[p] {
                return Err(Error::InvalidPermutation);
            }
            seen[p] = true;
        }
        Ok(RowPermutation(perm))
    }

    pub fn identity(m: usize) -> Self {
        RowPermutation((0..m).collect())
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn is_identity(&self) -> bool {
        self.0.iter().enumerate().all(|(i, &p)| i == p)
    }

    pub fn inverse(&self) -> Self {
        let mut inv = alloc::vec![0; self.0.len()];
        for (out, &src) in self.0.iter().enumerate() {
            inv[src] = out;
        }
        RowPermutation(inv)
    }

    /// Rows of `a` reordered so output row `r` is `a.row(perm[r])`.
    pub fn apply_rows(&self, a: &Mat) -> Mat {
        Mat::from_fn(a.nrows(), a.ncols(), |r, c| a[(self.0[r], c)])
    }
}

impl TryFrom<Vec<usize>> for RowPermutation {
    type Error = Error;

    fn try_from(v: Vec<usize>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<RowPermutation> for Vec<usize> {
    fn from(p: RowPermutation) -> Self {
        p.0
    }
}

/// Sort rows ascending by candidate count; ties keep their original order.
pub fn restructure(mask: &StructureMask) -> (StructureMask, RowPermutation) {
    let mut order: Vec<usize> = (0..mask.rows()).collect();
    order.sort_by_key(|&i| mask.nnz(i));
    let perm = RowPermutation(order);
    (mask.permuted(&perm), perm)
}

/// Number of rows whose support equals row `i`'s support (row `i` included).
pub fn group_count(mask: &StructureMask, i: usize) -> usize {
    (0..mask.rows()).filter(|&j| mask.row(j) == mask.row(i)).count()
}

pub fn support(mask: &StructureMask, i: usize) -> Vec<usize> {
    mask.row(i).iter().enumerate().filter_map(|(j, &b)| b.then_some(j)).collect()
}

/// How an equation is estimated by the combined algorithm.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Label {
    /// No earlier equation's support is contained in this one.
    S,
    /// Some earlier equations are sub-structured with respect to this one.
    C,
}

#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EquationLabel {
    /// Active variables.
    pub support: Vec<usize>,
    /// Earlier rows whose support is a subset of this row's support.
    pub substructured: Vec<usize>,
    pub label: Label,
}

/// Support sets, sub-structured predecessors and S/C labels, in mask order.
///
/// Rows are expected to be sorted ascending by support size already.
pub fn label_equations(mask: &StructureMask) -> Vec<EquationLabel> {
    let supports: Vec<Vec<usize>> = (0..mask.rows()).map(|i| support(mask, i)).collect();
    (0..mask.rows())
        .map(|i| {
            let substructured: Vec<usize> = (0..i)
                .filter(|&j| supports[j].iter().all(|&c| mask.get(i, c)))
                .collect();
            let label = if substructured.is_empty() { Label::S } else { Label::C };
            EquationLabel { support: supports[i].clone(), substructured, label }
        })
        .collect()
}

/// Scatter `sub_row` into a zero row of width `n` at the `support` columns.
pub fn embed_row(sub_row: &[f64], support: &[usize], n: usize) -> Result<RowVec> {
    if sub_row.len() != support.len() {
        return Err(Error::DimensionMismatch("sub-row and support lengths differ"));
    }
    if support.windows(2).any(|w| w[0] >= w[1]) || support.iter().any(|&c| c >= n) {
        return Err(Error::SupportOutOfRange);
    }
    let mut row = RowVec::zeros(n);
    for (&v, &c) in sub_row.iter().zip(support) {
        row[c] = v;
    }
    Ok(row)
}
