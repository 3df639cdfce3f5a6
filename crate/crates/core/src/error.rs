use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("p_global_min must lie in (0, 0.5), got {0}")]
    PGlobalMinOutOfRange(f64),

    #[error("cost per transmission must be positive and finite, got {0}")]
    NonPositiveCost(f64),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("node index {index} out of range for {len} nodes")]
    NodeIndex { index: usize, len: usize },

    #[error("profile has {got} entries but the roster has {expected} nodes")]
    ProfileLength { got: usize, expected: usize },

    #[error("probability {value} at node {index} is outside {domain}")]
    InvalidProbability {
        index: usize,
        value: f64,
        domain: &'static str,
    },

    #[error("degenerate profile: {0}")]
    DegenerateProfile(String),

    #[error("root not bracketed on [{lo}, {hi}] (f(lo) = {f_lo}, f(hi) = {f_hi})")]
    NotBracketed {
        lo: f64,
        hi: f64,
        f_lo: f64,
        f_hi: f64,
    },

    #[error("{what} did not converge after {iterations} iterations (last step {last_step:e})")]
    NoConvergence {
        what: &'static str,
        iterations: usize,
        last_step: f64,
    },

    #[error("roster is empty at frame {0}")]
    EmptyRoster(usize),

    #[error("round-robin mode requires a fixed roster, but churn events are configured")]
    ChurnInRoundRobin,

    #[error("{0}")]
    Config(#[from] crate::harness::config::ConfigError),

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },

    #[error("writing table {path}: {source}")]
    Table {
        path: String,
        #[source]
        source: csv::Error,
    },

    #[error("scenario `{scenario}`: {source}")]
    Scenario {
        scenario: String,
        #[source]
        source: Box<Error>,
    },
}
