//! Built-in case studies: true constraint matrices and their structure masks.

use crate::error::{Error, Result};
use crate::matops::Mat;
use crate::model::{ConstraintModel, StructureMask};

/// Registry names accepted by [`lookup`].
pub const NAMES: [&str; 3] = ["flow-mix", "cs1", "cs3"];

fn build(rows: usize, cols: usize, entries: &[f64]) -> (ConstraintModel, StructureMask) {
    let a = Mat::from_row_slice(rows, cols, entries);
    let mask = StructureMask::from_matrix(&a).expect("built-in mask is valid");
    let model = ConstraintModel::new(a, Some(mask.clone())).expect("built-in model is valid");
    (model, mask)
}

/// Three-node flow-mixing network: five streams, three node balances.
pub fn flow_mix() -> (ConstraintModel, StructureMask) {
    #[rustfmt::skip]
    let a = [
        1.0, -1.0,  0.0,  0.0,  1.0,
        0.0,  1.0, -1.0,  0.0,  0.0,
        0.0,  0.0,  1.0, -1.0, -1.0,
    ];
    build(3, 5, &a)
}

/// Nested supports over four of six variables; variables 5 and 6 are free.
pub fn cs1() -> (ConstraintModel, StructureMask) {
    #[rustfmt::skip]
    let a = [
        1.0, 1.0,  0.0, 0.0, 0.0, 0.0,
        1.0, 2.0,  3.0, 0.0, 0.0, 0.0,
        3.0, 1.0, -1.0, 2.0, 0.0, 0.0,
    ];
    build(3, 6, &a)
}

/// Repeated and sub-structured equations; variable 5 is free.
pub fn cs3() -> (ConstraintModel, StructureMask) {
    #[rustfmt::skip]
    let a = [
        3.0,  1.0, -1.0, 2.0, 0.0, -6.0,
        2.0,  1.0, -2.0, 1.0, 0.0,  0.0,
        1.0,  1.0, -1.0, 0.0, 0.0,  0.0,
        1.0, -3.0,  1.0, 1.0, 0.0,  0.0,
    ];
    build(4, 6, &a)
}

pub fn lookup(name: &str) -> Result<(ConstraintModel, StructureMask)> {
    match name {
        "flow-mix" => Ok(flow_mix()),
        "cs1" => Ok(cs1()),
        "cs3" => Ok(cs3()),
        other => Err(Error::UnknownCase(other.into())),
    }
}
