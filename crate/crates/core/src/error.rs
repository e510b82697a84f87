use thiserror::Error;

use crate::fields::FieldError;

#[derive(Debug, Error)]
pub enum SolveError {
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error("eta must be positive everywhere (min eta = {min_eta:e})")]
    NonPositiveEta { min_eta: f64 },
    #[error("right-hand side is not orthogonal to constants (mean = {mean:e})")]
    SolvabilityViolation { mean: f64 },
    #[error("{solver} did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence { solver: &'static str, iterations: usize, residual: f64 },
    #[error("degenerate data: {0}")]
    DegenerateData(String),
    #[error("invalid seed: {0}")]
    InvalidSeed(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("stability system infeasible: {0}")]
    InfeasibleStability(String),
    #[error("exponent sequence does not escape: t = {t} <= t0 = {t0}")]
    NonEscaping { t: f64, t0: f64 },
    #[error("iterate {iteration} left the admissible set: {detail}")]
    SetEscape { iteration: usize, detail: String },
    #[error("limit condition violated: (n-1)/n int tau^2 does not exceed int |L Wbar|^2/(4 eta^2) (leading coefficient {a2:e})")]
    ConditionViolated { a2: f64 },
    #[error("double root: scalar pivot {pivot:e} below threshold")]
    DoubleRootDegeneracy { pivot: f64 },
    #[error("conformal factor lost positivity (min = {min:e})")]
    PositivityLoss { min: f64 },
    #[error("continuation step {step:e} underflowed at lambda = {lambda}")]
    StepUnderflow { lambda: f64, step: f64 },
}

impl SolveError {
    /// Verdicts about the data rather than solver failures.
    pub fn is_infeasible(&self) -> bool {
        matches!(
            self,
            SolveError::DegenerateData(_)
                | SolveError::InfeasibleStability(_)
                | SolveError::NonEscaping { .. }
                | SolveError::ConditionViolated { .. }
                | SolveError::DoubleRootDegeneracy { .. }
                | SolveError::SolvabilityViolation { .. }
                | SolveError::NonPositiveEta { .. }
        )
    }
}

pub type Result<T, E = SolveError> = std::result::Result<T, E>;
