//! Error type shared by every module of the crate.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("experiment arm is empty (treated = {treated}, control = {control})")]
    EmptyArm { treated: usize, control: usize },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("design matrix is rank deficient: {0}")]
    RankDeficient(String),

    #[error("nuisance training diverged at epoch {epoch} (loss = {loss})")]
    NonFiniteLoss { epoch: usize, loss: f64 },

    #[error("estimated Hessian could not be inverted even with ridge stabilization")]
    SingularLambda,

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("experiment {0} carries no design factor")]
    MissingDesignFactor(usize),

    #[error("oracle scale parameter requires tau0 > 0, got {0}")]
    NonPositiveTau0(f64),

    #[error("balanced design requires an even sample size, got N = {0}")]
    OddN(usize),

    #[error("brute-force enumeration over 2^{k} treatment vectors exceeds the cap of {cap}")]
    KTooLarge { k: usize, cap: usize },

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("missing context: {0}")]
    MissingContext(&'static str),

    #[error("no group reached the minimum size of {min_size} rows")]
    NoGroupsRetained { min_size: usize },

    #[error("group `{key}` cannot supply {requested} rows from an arm holding {available}")]
    GroupTooSmall {
        key: String,
        requested: usize,
        available: usize,
    },

    #[error("column `{0}` not found in header")]
    MissingColumn(String),

    #[error("line {line}: {reason}")]
    UnparseableRow { line: u64, reason: String },

    #[error("input file has no data rows")]
    EmptyFile,

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Coarse classification used for process exit codes and FFI status codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Config,
    Data,
    Numeric,
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Config(_)
            | Error::MissingDesignFactor(_)
            | Error::NonPositiveTau0(_)
            | Error::OddN(_)
            | Error::KTooLarge { .. } => ErrorKind::Config,
            Error::RankDeficient(_) | Error::NonFiniteLoss { .. } | Error::SingularLambda => {
                ErrorKind::Numeric
            }
            _ => ErrorKind::Data,
        }
    }

    /// Process exit code: 1 config error, 2 data error, 3 numeric failure.
    pub fn exit_code(&self) -> i32 {
        match self.kind() {
            ErrorKind::Config => 1,
            ErrorKind::Data => 2,
            ErrorKind::Numeric => 3,
        }
    }

    /// Short machine-readable tag written into the `error_tag` output column.
    pub fn tag(&self) -> &'static str {
        match self {
            Error::EmptyArm { .. } => "empty_arm",
            Error::InsufficientData(_) => "insufficient_data",
            Error::RankDeficient(_) => "rank_deficient",
            Error::NonFiniteLoss { .. } => "non_finite_loss",
            Error::SingularLambda => "singular_lambda",
            Error::EmptyInput(_) => "empty_input",
            Error::MissingDesignFactor(_) => "missing_design_factor",
            Error::NonPositiveTau0(_) => "non_positive_tau0",
            Error::OddN(_) => "odd_n",
            Error::KTooLarge { .. } => "k_too_large",
            Error::LengthMismatch { .. } => "length_mismatch",
            Error::MissingContext(_) => "missing_context",
            Error::NoGroupsRetained { .. } => "no_groups_retained",
            Error::GroupTooSmall { .. } => "group_too_small",
            Error::MissingColumn(_) => "missing_column",
            Error::UnparseableRow { .. } => "unparseable_row",
            Error::EmptyFile => "empty_file",
            Error::Config(_) => "config",
            Error::Io(_) => "io",
            Error::Csv(_) => "csv",
            Error::Json(_) => "json",
        }
    }
}
