//! Identification of linear steady-state constraint models from noisy data.
//!
//! Given samples `y(t) = x(t) + e(t)` of `n` variables that satisfy
//! `A₀ x(t) = 0`, the estimators in [`identify`] recover the row space of
//! `A₀`:
//!
//! - [`identify::pca_identify`]: the `m` least-variance principal directions.
//! - [`identify::spca_identify`]: one PCA per equation over the variables the
//!   structure mask allows, with a rank filter for repeated or nested
//!   supports.
//! - [`identify::cpca_identify`]: PCA in the null space of known equations.
//! - [`identify::cspca_identify`]: structural PCA that treats earlier,
//!   nested estimates as known equations.
//!
//! The crate is `no_std` and needs only `alloc`.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod cases;
pub mod datagen;
pub mod error;
pub mod faults;
pub mod identify;
pub mod matops;
pub mod metrics;
pub mod model;
pub mod seeds;

pub use error::{Error, Result};
pub use identify::{IdentifyOptions, IdentifyResult, Method};
pub use matops::{Mat, RowVec};
pub use model::{ConstraintModel, RowPermutation, StructureMask};

/// Crate version, recorded in result files.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
