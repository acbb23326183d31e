use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
    #[error("non-finite {what}")]
    NonFinite { what: &'static str },
    #[error("{what} out of domain: {value}")]
    Domain { what: &'static str, value: f64 },
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("no dark state: omega2 = 0 while omega1 = {omega1}")]
    NoCptState { omega1: f64 },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum IntegrationError {
    #[error("step size underflow at t = {t} (h = {h})")]
    StepUnderflow { t: f64, h: f64 },
    #[error("step budget exhausted at t = {t}")]
    TooManySteps { t: f64 },
    #[error("model evaluation failed at t = {t}: {source}")]
    Model { t: f64, source: ModelError },
    #[error("invalid integration setup: {0}")]
    Setup(String),
    #[error(transparent)]
    Params(#[from] ModelError),
}

impl IntegrationError {
    /// Time at which the failure happened, if it happened mid-run.
    pub fn failure_time(&self) -> Option<f64> {
        match self {
            Self::StepUnderflow { t, .. } | Self::TooManySteps { t } | Self::Model { t, .. } => Some(*t),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StabilityError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("eigenvalue solver did not converge at omega1 = {omega1}, omega2 = {omega2}")]
    EigenNonConvergence { omega1: f64, omega2: f64 },
    #[error("axis `{0}` must be non-empty and strictly increasing")]
    BadAxis(&'static str),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SweepError {
    #[error("axis `{0}` must be non-empty")]
    EmptyAxis(&'static str),
    #[error("invalid bounds for `{0}`")]
    BadBounds(&'static str),
    #[error("evaluation budget {0} is below the minimum of 9")]
    BudgetTooSmall(usize),
    #[error("every evaluation failed; first failure: {0}")]
    AllFailed(IntegrationError),
}
