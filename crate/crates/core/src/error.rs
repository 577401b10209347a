use thiserror::Error;

/// Failure of a single stochastic Runge-Kutta step.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolveError {
    #[error("stage solve did not converge after {iterations} iterations (residual {residual:e})")]
    StageSolve { iterations: usize, residual: f64 },
    #[error("stage Jacobian is singular (residual {residual:e})")]
    SingularJacobian { residual: f64 },
    #[error("numerical blow-up: non-finite value encountered")]
    Blowup,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown method `{name}`; available methods: {available}")]
    UnknownMethod { name: String, available: String },
    #[error("unknown problem `{name}`; available problems: {available}")]
    UnknownProblem { name: String, available: String },
    #[error("invalid tableau: {0}")]
    InvalidTableau(String),
    #[error("invalid coefficient `{0}`")]
    InvalidCoefficient(String),
    #[error("tree order {0} out of range 1..=12")]
    TreeOrderOutOfRange(usize),
    #[error("invalid tree notation `{0}`")]
    InvalidTreeNotation(String),
    #[error("level {level} out of range 0..={max}")]
    LevelOutOfRange { level: u32, max: u32 },
    #[error("unsupported weak increment order {0}; expected 1 or 2")]
    UnsupportedWeakOrder(u32),
    #[error("invalid driving measure: {0}")]
    InvalidDriving(String),
    #[error("invalid problem: {0}")]
    InvalidProblem(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("step {step} failed: {source}")]
    StepFailed {
        step: usize,
        #[source]
        source: SolveError,
    },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
