use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("adjacency is not symmetric between regions {0} and {1}")]
    Asymmetric(String, String),

    #[error("region {0} has no neighbours")]
    Island(String),

    #[error("region {0} is listed as its own neighbour")]
    SelfLoop(String),

    #[error("duplicate region id {0}")]
    DuplicateRegion(String),

    #[error("unknown region id {0}")]
    UnknownRegion(String),

    #[error("invalid value: {0}")]
    Domain(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("all counts are zero in slice {0}; expected counts are undefined")]
    ZeroCounts(String),

    #[error("covariate matrix does not have full column rank")]
    RankDeficient,

    #[error("estimator {estimator} needs samples from the {expected} family")]
    FamilyMismatch {
        estimator: &'static str,
        expected: &'static str,
    },

    #[error("non-finite sampler state at iteration {iteration}: {detail}")]
    NonFinite { iteration: usize, detail: String },

    #[error("too few draws: need at least {needed}, got {got}")]
    TooFewDraws { needed: usize, got: usize },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Stable machine-readable tag, used in the CLI's error JSON.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Asymmetric(..) => "asymmetric_adjacency",
            Error::Island(_) => "island_region",
            Error::SelfLoop(_) => "self_loop",
            Error::DuplicateRegion(_) => "duplicate_region",
            Error::UnknownRegion(_) => "unknown_region",
            Error::Domain(_) => "domain",
            Error::Shape(_) => "shape",
            Error::ZeroCounts(_) => "zero_counts",
            Error::RankDeficient => "rank_deficient",
            Error::FamilyMismatch { .. } => "family_mismatch",
            Error::NonFinite { .. } => "non_finite_state",
            Error::TooFewDraws { .. } => "too_few_draws",
            Error::Config(_) => "config",
            Error::Parse(_) => "parse",
            Error::Io(_) => "io",
            Error::Csv(_) => "csv",
            Error::Json(_) => "json",
        }
    }
}
