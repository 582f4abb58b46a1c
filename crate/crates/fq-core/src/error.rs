use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum CoreError {
    #[error("invalid system: {0}")]
    InvalidSystem(String),

    #[error("singular configuration: particles {i} and {j} coincide")]
    SingularConfiguration { i: usize, j: usize },

    #[error("no analytic form: {0}")]
    NoAnalyticForm(String),

    #[error("energies only at this tier: {tier} does not provide forces")]
    ForcesUnavailable { tier: String },

    #[error("unstable integration at step {step}: |E| = {energy:.3e} exceeds bound {bound:.3e}")]
    UnstableIntegration { step: usize, energy: f64, bound: f64 },

    #[error("empty trajectory")]
    EmptyTrajectory,

    #[error("non-finite energy at state {state}, sample {sample}")]
    NonFiniteEnergy { state: usize, sample: usize },

    #[error("state {state} has zero samples")]
    ZeroSamples { state: usize },

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("training failed: {0}")]
    Training(String),

    #[error("non-finite training target for entry {0}")]
    NonFiniteTarget(String),

    #[error("insufficient transfer data: got {got}, need at least {need}")]
    InsufficientTransferData { got: usize, need: usize },

    #[error("model artifact error: {0}")]
    Artifact(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, CoreError>;
