use thiserror::Error;

/// Errors produced across the crate.
#[derive(Debug, Error)]
pub enum RosaError {
    #[error("unknown dimension name `{0}`")]
    UnknownDimension(String),

    #[error("dimension `{name}`: value {value} outside bounds [{lower}, {upper}]")]
    OutOfBounds {
        name: String,
        value: f64,
        lower: f64,
        upper: f64,
    },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid parameter space: {0}")]
    InvalidSpace(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("infeasible bivariate Bernoulli (p={p}, q={q}, rho={rho}): cell P11={p11} violates {bound}")]
    InfeasibleJoint {
        p: f64,
        q: f64,
        rho: f64,
        p11: f64,
        bound: String,
    },

    #[error("correlation {0} outside [0, 1)")]
    InvalidCorrelation(f64),

    #[error("simulation failed for scenario {index}: {source}")]
    Simulation {
        index: usize,
        #[source]
        source: Box<RosaError>,
    },

    #[error("surrogate training failed: {0}")]
    Training(String),

    #[error("OC index {index} out of range (R = {r})")]
    OcIndexOutOfRange { index: usize, r: usize },

    #[error("combinatorial budget exceeded: C({n}, {k}) = {count} subsets > {budget}")]
    BudgetExceeded {
        n: usize,
        k: usize,
        count: u128,
        budget: u128,
    },

    #[error("pipeline stage `{stage}` failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<RosaError>,
    },

    #[error("surrogate validation gate failed: min R^2 {r2:.4} < required {gate:.4}")]
    ValidationGate { r2: f64, gate: f64 },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("config parse error: {0}")]
    Toml(#[from] toml::de::Error),
}
