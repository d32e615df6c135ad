use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid lattice: {0}")]
    InvalidLattice(String),

    #[error("interaction cutoff {cutoff_um} um is below the lattice spacing {spacing_um} um")]
    CutoffTooSmall { cutoff_um: f64, spacing_um: f64 },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("{n_sites} sites exceed the dense oracle limit of {limit}")]
    TooLargeForOracle { n_sites: usize, limit: usize },

    #[error("site index {site} out of range for {n_sites} sites")]
    InvalidSite { site: usize, n_sites: usize },

    #[error("estimated memory {required_bytes:.3e} B exceeds budget {budget_bytes:.3e} B")]
    MemoryBudgetExceeded { required_bytes: f64, budget_bytes: f64 },

    #[error("{available} loaded atoms cannot fill a register of {needed}")]
    NotEnoughAtoms { needed: usize, available: usize },

    #[error("inconsistent rearrangement counts: {0}")]
    InvalidCounts(String),

    #[error("precision must be positive, got {0}")]
    InvalidPrecision(f64),

    #[error("no finite number of attempts reaches the requested confidence: {0}")]
    Unsatisfiable(String),

    #[error("underdetermined fit: {0}")]
    UnderdeterminedFit(String),

    #[error("energy scale must be positive, got {0}")]
    InvalidScale(f64),

    #[error("config error: {0}")]
    Config(String),

    #[error("malformed input: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Stable machine-readable identifier, used in error JSON and exit codes.
    pub fn code(&self) -> &'static str {
        match self {
            Error::InvalidLattice(_) => "InvalidLattice",
            Error::CutoffTooSmall { .. } => "CutoffTooSmall",
            Error::InvalidParameter { .. } => "InvalidParameter",
            Error::TooLargeForOracle { .. } => "TooLargeForOracle",
            Error::InvalidSite { .. } => "InvalidSite",
            Error::MemoryBudgetExceeded { .. } => "MemoryBudgetExceeded",
            Error::NotEnoughAtoms { .. } => "NotEnoughAtoms",
            Error::InvalidCounts(_) => "InvalidCounts",
            Error::InvalidPrecision(_) => "InvalidPrecision",
            Error::Unsatisfiable(_) => "Unsatisfiable",
            Error::UnderdeterminedFit(_) => "UnderdeterminedFit",
            Error::InvalidScale(_) => "InvalidScale",
            Error::Config(_) => "Config",
            Error::Parse(_) => "Parse",
            Error::Io(_) => "Io",
            Error::Csv(_) => "Csv",
            Error::Json(_) => "Json",
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Parse(_) | Error::Io(_) | Error::Csv(_) | Error::Json(_) => 2,
            Error::InvalidLattice(_)
            | Error::CutoffTooSmall { .. }
            | Error::InvalidParameter { .. }
            | Error::InvalidSite { .. }
            | Error::InvalidPrecision(_)
            | Error::InvalidScale(_)
            | Error::InvalidCounts(_) => 3,
            Error::TooLargeForOracle { .. } => 4,
            Error::MemoryBudgetExceeded { .. } => 5,
            Error::NotEnoughAtoms { .. } => 6,
            Error::Unsatisfiable(_) => 7,
            Error::UnderdeterminedFit(_) => 8,
        }
    }

    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter { name, reason: reason.into() }
    }
}
