//! File formats, Monte-Carlo harness and command-line front end for
//! `strucid-core`.

pub mod cli;
pub mod harness;
pub mod io;

pub use strucid_core as core;
