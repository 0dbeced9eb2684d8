use thiserror::Error;

/// Everything that can go wrong in the lab.
///
/// Variants fall in two camps: violations of a mathematical hypothesis
/// (a non-dissipative field, an inadmissible weight, a failed geometric
/// condition, ...) and ordinary internal/IO failures. The CLI maps the
/// first camp to exit code 2, see [`LabError::is_hypothesis_violation`].
#[derive(Debug, Error)]
pub enum LabError {
    #[error("ode step {step} exceeds the reliable bound 0.1*rho/M = {limit}")]
    StepTooLarge { step: f64, limit: f64 },

    #[error("point {point:?} lies outside the closed domain")]
    OutsideDomain { point: [f64; 2] },

    #[error("field is not dissipative: {failures} grid point(s) have a curve that never leaves the domain")]
    NotDissipative { failures: usize },

    #[error("beta = {beta} violates 0 < beta < rho / sup A0 = {bound}")]
    InvalidBeta { beta: f64, bound: f64 },

    #[error("cutoff plateau {{phi > 2 eps}} contains no grid point (eps = {eps})")]
    EmptyPlateau { eps: f64 },

    #[error("CFL number {cfl} exceeds 1")]
    CflViolation { cfl: f64 },

    #[error("backward characteristic from (x={point:?}, t={time}) leaves through the outflow boundary")]
    CharacteristicLost { point: [f64; 2], time: f64 },

    #[error("observation mask is empty")]
    EmptyMask,

    #[error("test function does not vanish at t = T (max |u(.,T)| = {max_abs})")]
    FinalTimeNotZero { max_abs: f64 },

    #[error("weight is inadmissible: beta = {beta} must satisfy 0 < beta < {bound}")]
    InadmissibleWeight { beta: f64, bound: f64 },

    #[error("min |R(.,0)| = {min} is below the declared m0 = {m0}")]
    ViolatesR0 { min: f64, m0: f64 },

    #[error("geometric condition fails: {reason}")]
    GeometricConditionViolated { reason: String },

    #[error("data norms must be positive (D = {d}, F = {f})")]
    NonpositiveData { d: f64, f: f64 },

    #[error("only {usable} usable samples for the log-log fit (need at least 4)")]
    DegenerateSamples { usable: usize },

    #[error("ensemble holds {got} solutions, expected d+1 = {expected}")]
    EnsembleSizeMismatch { got: usize, expected: usize },

    #[error("coefficient pair is not in D(M, rho, Gamma): {clauses}")]
    MembershipViolated { clauses: String },

    #[error("determinant condition fails: min |p| |det| = {min} < m0 = {m0}")]
    DeterminantConditionViolated { min: f64, m0: f64 },

    #[error("unknown scenario '{0}'")]
    UnknownScenario(String),

    #[error("bad override '{0}'")]
    BadOverride(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("dimension mismatch: {0}")]
    Shape(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl LabError {
    /// True when the error reports a violated hypothesis of the theory
    /// rather than a bug, bad input syntax or an IO failure.
    pub fn is_hypothesis_violation(&self) -> bool {
        matches!(
            self,
            LabError::StepTooLarge { .. }
                | LabError::NotDissipative { .. }
                | LabError::InvalidBeta { .. }
                | LabError::EmptyPlateau { .. }
                | LabError::CflViolation { .. }
                | LabError::CharacteristicLost { .. }
                | LabError::FinalTimeNotZero { .. }
                | LabError::InadmissibleWeight { .. }
                | LabError::ViolatesR0 { .. }
                | LabError::GeometricConditionViolated { .. }
                | LabError::MembershipViolated { .. }
                | LabError::DeterminantConditionViolated { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, LabError>;
