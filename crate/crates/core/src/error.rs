use thiserror::Error;

/// Errors raised by the identification toolkit.
///
/// Variant names are stable; the CLI reports them verbatim.
#[derive(Debug, Clone, PartialEq, Error)]
#[non_exhaustive]
pub enum Error {
    #[error("matrix is not square ({rows}x{cols})")]
    NonSquare { rows: usize, cols: usize },
    #[error("matrix is not symmetric (max asymmetry {asymmetry:e})")]
    NotSymmetric { asymmetry: f64 },
    #[error("eigensolver failed to converge")]
    FailedToConverge,
    #[error("matrix has full column rank; null space is empty")]
    EmptyNullSpace,
    #[error("base matrix for row-space projection is rank deficient")]
    RankDeficientBase,
    #[error("matrix does not have full column rank")]
    RankDeficient,
    #[error("matrix is ill-conditioned (condition number {condition:e})")]
    IllConditioned { condition: f64 },
    #[error("matrix contains non-finite entries")]
    NonFinite,
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(&'static str),

    #[error("invalid structure mask: {0}")]
    InvalidMask(&'static str),
    #[error("constraint matrix does not conform to its structure mask at ({row}, {col})")]
    MaskViolation { row: usize, col: usize },
    #[error("constraint rows are not linearly independent (rank {rank} < {rows})")]
    DependentRows { rank: usize, rows: usize },
    #[error("invalid row permutation")]
    InvalidPermutation,
    #[error("support index out of range or not strictly ascending")]
    SupportOutOfRange,

    #[error("signal-to-noise ratio must be positive, got {0}")]
    InvalidSnr(f64),
    #[error("signal has zero variance in every channel")]
    DegenerateSignal,
    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },

    #[error("invalid option: {0}")]
    InvalidOption(&'static str),
    #[error("requested {requested} constraints for {variables} variables")]
    InvalidRowCount { requested: usize, variables: usize },
    #[error("sample covariance is identically zero")]
    DegenerateCovariance,
    #[error("structure infeasible: equation {row} yielded {found} of {needed} independent constraints")]
    StructureInfeasible { row: usize, found: usize, needed: usize },
    #[error("known constraint rows are rank deficient")]
    KnownRowsRankDeficient,

    #[error("estimate is rank deficient")]
    RankDeficientEstimate,
    #[error("shape mismatch: {0}")]
    ShapeMismatch(&'static str),
    #[error("per-method run arrays have different lengths")]
    LengthMismatch,

    #[error("unknown case `{0}`")]
    UnknownCase(alloc::string::String),
}

impl Error {
    /// Short variant name, used in CLI diagnostics and run-failure records.
    pub fn name(&self) -> &'static str {
        match self {
            Error::NonSquare { .. } => "NonSquare",
            Error::NotSymmetric { .. } => "NotSymmetric",
            Error::FailedToConverge => "FailedToConverge",
            Error::EmptyNullSpace => "EmptyNullSpace",
            Error::RankDeficientBase => "RankDeficientBase",
            Error::RankDeficient => "RankDeficient",
            Error::IllConditioned { .. } => "IllConditioned",
            Error::NonFinite => "NonFinite",
            Error::DimensionMismatch(_) => "DimensionMismatch",
            Error::InvalidMask(_) => "InvalidMask",
            Error::MaskViolation { .. } => "MaskViolation",
            Error::DependentRows { .. } => "DependentRows",
            Error::InvalidPermutation => "InvalidPermutation",
            Error::SupportOutOfRange => "SupportOutOfRange",
            Error::InvalidSnr(_) => "InvalidSnr",
            Error::DegenerateSignal => "DegenerateSignal",
            Error::TooFewSamples { .. } => "TooFewSamples",
            Error::InvalidOption(_) => "InvalidOption",
            Error::InvalidRowCount { .. } => "InvalidRowCount",
            Error::DegenerateCovariance => "DegenerateCovariance",
            Error::StructureInfeasible { .. } => "StructureInfeasible",
            Error::KnownRowsRankDeficient => "KnownRowsRankDeficient",
            Error::RankDeficientEstimate => "RankDeficientEstimate",
            Error::ShapeMismatch(_) => "ShapeMismatch",
            Error::LengthMismatch => "LengthMismatch",
            Error::UnknownCase(_) => "UnknownCase",
        }
    }
}

pub type Result<T, E = Error> = core::result::Result<T, E>;
