use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid MDP: {0}")]
    InvalidMdp(String),
    #[error("invalid policy: {0}")]
    InvalidPolicy(String),
    #[error("invalid demand: {0}")]
    InvalidDemand(String),
    #[error("invalid cut: {0}")]
    InvalidCut(String),
    #[error("flow is not integral on arc {0}")]
    NonIntegralFlow(String),
    #[error("invalid instance parameters: {0}")]
    InvalidParameters(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("MDP is not tree-based")]
    NotTreeBased,
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Stable short tag for machine-readable error output.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidMdp(_) => "invalid_mdp",
            Error::InvalidPolicy(_) => "invalid_policy",
            Error::InvalidDemand(_) => "invalid_demand",
            Error::InvalidCut(_) => "invalid_cut",
            Error::NonIntegralFlow(_) => "non_integral_flow",
            Error::InvalidParameters(_) => "invalid_parameters",
            Error::InvalidConfig(_) => "invalid_config",
            Error::NotTreeBased => "not_tree_based",
            Error::Json(_) => "json",
            Error::Csv(_) => "csv",
            Error::Io(_) => "io",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
