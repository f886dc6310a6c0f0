use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A model or configuration field violates its invariant.
    #[error("invalid {field}: {reason}")]
    InvalidParameter { field: String, reason: String },

    /// An operation was called outside its domain (negative stock, shock
    /// outside the support, harvest larger than the stock, ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// A non-finite intermediate showed up inside a solver.
    #[error("numerical failure at stage {stage}, node {node}: {detail}")]
    Numerical {
        stage: usize,
        node: usize,
        detail: String,
    },

    #[error("rank-deficient data: {0}")]
    RankDeficient(String),

    #[error("calibration failed: {0}")]
    Calibration(String),

    #[error("line {line}: {reason}")]
    Parse { line: u64, reason: String },

    #[error("record for year {year}: {reason}")]
    Record { year: i64, reason: String },

    #[error("no records")]
    NoRecords,

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            field: field.into(),
            reason: reason.into(),
        }
    }

    /// True for failures that come out of the numerics rather than the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Numerical { .. } | Error::Calibration(_) | Error::RankDeficient(_)
        )
    }
}
