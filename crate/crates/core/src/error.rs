use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("evaluation point is {modulus:e} from the pole (threshold {threshold:e})")]
    PoleProximity { modulus: f64, threshold: f64 },

    #[error("degenerate Moebius map: |ad - bc| = {det:e} against coefficient scale {scale:e}")]
    DegenerateMap { det: f64, scale: f64 },

    #[error("cannot normalize by d: |d| = {0:e}")]
    DegenerateNormalization(f64),

    #[error("all {0} grid points fall inside the pole guard")]
    AllPointsSkipped(usize),

    #[error("recurrence overflow at index {index}: |value| = {magnitude:e}")]
    Overflow { index: usize, magnitude: f64 },

    #[error("schedule carries an additive term at step {0}; expected eps == 0")]
    ScheduleMismatch(usize),

    #[error("martingale identity violated at n = {n}: residual {residual:e}")]
    IdentityViolation { n: usize, residual: f64 },

    #[error("invalid {field}: {reason}")]
    InvalidSpec { field: String, reason: String },

    #[error("recurrence and chain composition disagree at N = {n}: {what} = {deviation:e}")]
    OracleMismatch {
        n: usize,
        what: &'static str,
        deviation: f64,
    },

    #[error("cannot fit a log-log line: value {value:e} at N = {n} is not positive")]
    NonPositiveValue { n: usize, value: f64 },

    #[error("N = {n}: {source}")]
    AtPoint {
        n: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("{} sweep point(s) failed; first: {}", .0.len(), .0[0])]
    Sweep(Vec<Error>),
}

impl Error {
    pub(crate) fn invalid(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidSpec {
            field: field.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn at(n: usize, source: Error) -> Self {
        Error::AtPoint {
            n,
            source: Box::new(source),
        }
    }

    /// The innermost error, skipping `AtPoint` labels.
    pub fn root(&self) -> &Error {
        match self {
            Error::AtPoint { source, .. } => source.root(),
            Error::Sweep(all) if !all.is_empty() => all[0].root(),
            other => other,
        }
    }

    /// True for failures caused by user input rather than the numerics.
    pub fn is_usage(&self) -> bool {
        matches!(self.root(), Error::InvalidSpec { .. })
    }
}
