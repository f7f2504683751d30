use thiserror::Error;

/// Errors raised by mesh construction, assembly, solution and the oracles.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("interface polylines intersect near ({x1}, {x2})")]
    InterfaceCrossing { x1: f64, x2: f64 },
    #[error("periodic mismatch: {0}")]
    PeriodicMismatch(String),
    #[error("Wood anomaly: alpha_{n}^2 coincides with k^2 eps+")]
    WoodAnomaly { n: i64 },
    #[error("face {0} does not lie on the top boundary")]
    FaceNotOnTop(usize),
    #[error("singular matrix: zero pivot at column {0}")]
    SingularMatrix(usize),
    #[error("point ({x1}, {x2}) lies outside the domain")]
    PointOutsideDomain { x1: f64, x2: f64 },
    #[error("argument outside supported envelope: {0}")]
    OutOfEnvelope(String),
    #[error("gradient is singular at the origin")]
    SingularOrigin,
    #[error("degenerate branch: eps2 equals cos^2(theta)")]
    DegenerateBranch,
    #[error("no permittivity given for region {0}")]
    MissingPermittivity(usize),
    #[error("inadmissible permittivity for region {region}: {re} + {im}i")]
    InadmissiblePermittivity { region: usize, re: f64, im: f64 },
    #[error("parse error on line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
