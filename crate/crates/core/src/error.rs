use alloc::string::String;
use core::fmt;

/// Failure modes of the numerical core.
///
/// Every variant names the operation that raised it so that messages read
/// as `module::operation: detail`.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// An argument is outside the mathematical domain of the operation.
    Domain { op: &'static str, detail: String },
    /// A factorization, quadrature or sampling step produced an unusable value.
    Numerical { op: &'static str, detail: String },
    /// Model coefficients violate a standing requirement at `witness`.
    Model { op: &'static str, witness: f64, detail: String },
    /// A value lies outside the range of a transform.
    Range { op: &'static str, value: f64 },
    /// A size or iteration cap was exceeded.
    Resource { op: &'static str, detail: String },
    /// The adaptive scheme reached an invalid state.
    Scheme { op: &'static str, step: usize, t: f64, y: f64, detail: String },
    /// A configuration field is invalid.
    Config { field: &'static str, detail: String },
}

pub type Result<T> = core::result::Result<T, Error>;

impl Error {
    pub(crate) fn domain(op: &'static str, detail: impl Into<String>) -> Self {
        Error::Domain { op, detail: detail.into() }
    }

    pub(crate) fn numerical(op: &'static str, detail: impl Into<String>) -> Self {
        Error::Numerical { op, detail: detail.into() }
    }

    pub(crate) fn resource(op: &'static str, detail: impl Into<String>) -> Self {
        Error::Resource { op, detail: detail.into() }
    }

    pub(crate) fn config(field: &'static str, detail: impl Into<String>) -> Self {
        Error::Config { field, detail: detail.into() }
    }

    /// The operation (or config field) the error is attributed to.
    pub fn origin(&self) -> &'static str {
        match self {
            Error::Domain { op, .. }
            | Error::Numerical { op, .. }
            | Error::Model { op, .. }
            | Error::Range { op, .. }
            | Error::Resource { op, .. }
            | Error::Scheme { op, .. } => op,
            Error::Config { field, .. } => field,
        }
    }
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Domain { op, detail } => write!(f, "{op}: domain error: {detail}"),
            Error::Numerical { op, detail } => write!(f, "{op}: numerical error: {detail}"),
            Error::Model { op, witness, detail } => {
                write!(f, "{op}: model error at x = {witness}: {detail}")
            }
            Error::Range { op, value } => {
                write!(f, "{op}: range error: {value} is outside the range of the transform")
            }
            Error::Resource { op, detail } => write!(f, "{op}: resource limit: {detail}"),
            Error::Scheme { op, step, t, y, detail } => {
                write!(f, "{op}: scheme error at step {step} (t = {t}, y = {y}): {detail}")
            }
            Error::Config { field, detail } => write!(f, "config field `{field}`: {detail}"),
        }
    }
}

impl core::error::Error for Error {}
