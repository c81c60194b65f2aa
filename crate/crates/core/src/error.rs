use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("integrator failed at t = {time} ns: {reason}")]
    Integrator { time: f64, reason: String },

    #[error("time grid must be non-empty and strictly increasing (violated at index {index})")]
    TimeGrid { index: usize },

    #[error("exciton population vanishes at t = {time} ns")]
    VanishingPopulation { time: f64 },

    #[error("state purity is zero")]
    ZeroPurity,

    #[error("interface fidelity must be positive, got {0}")]
    ZeroInterfaceFidelity(f64),

    #[error("analyzer polarization is not normalized (norm² = {0})")]
    UnnormalizedAnalyzer(f64),

    #[error("trace binning mismatch: {0}")]
    BinMismatch(String),

    #[error("insufficient periods: {found:.2} visible, need at least {required}")]
    InsufficientPeriods { found: f64, required: f64 },

    #[error("fit did not converge: {0}")]
    FitFailed(String),

    #[error("root bracket failure: {0}")]
    Bracket(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("unknown experiment `{0}` (expected one of fig1d, fig2, fig3b, fig3cf, fig4, sweep)")]
    UnknownExperiment(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("csv error at line {line}: {reason}")]
    Csv { line: usize, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
