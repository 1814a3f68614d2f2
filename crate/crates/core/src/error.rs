use thiserror::Error;

/// Errors raised by the model primitives and the stepping loop.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    /// A caller passed arguments outside an operation's contract.
    #[error("contract violation in {op}: {detail}")]
    Contract { op: &'static str, detail: String },

    /// A state or flow invariant broke during a step; the step is aborted.
    #[error("invariant breach at k={k}: {invariant}")]
    Invariant { k: usize, invariant: String },

    /// The topology failed validation.
    #[error("invalid topology: {}", .0.join("; "))]
    Topology(Vec<String>),
}

impl ModelError {
    pub(crate) fn contract(op: &'static str, detail: impl Into<String>) -> Self {
        ModelError::Contract {
            op,
            detail: detail.into(),
        }
    }

    pub(crate) fn invariant(k: usize, invariant: impl Into<String>) -> Self {
        ModelError::Invariant {
            k,
            invariant: invariant.into(),
        }
    }
}

/// Errors from scenario parsing and resolution.
#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("{path}: {message}")]
    Schema { path: String, message: String },

    #[error("scenario is invalid:\n  {}", .0.join("\n  "))]
    Invalid(Vec<String>),

    #[error("unknown preset `{0}`")]
    UnknownPreset(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// Errors from metric computations.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricsError {
    #[error("baseline peak delay is zero; the congestion index is undefined")]
    ZeroBaseline,

    #[error("series is empty")]
    EmptySeries,

    #[error("speed of cell {cell} is not positive ({speed})")]
    NonPositiveSpeed { cell: usize, speed: f64 },
}

/// Top-level error of a simulation run.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),

    #[error(transparent)]
    Model(#[from] ModelError),

    #[error(transparent)]
    Metrics(#[from] MetricsError),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}
