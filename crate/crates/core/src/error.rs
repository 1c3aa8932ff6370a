use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("factor {factor} has no members")]
    EmptyFactor { factor: usize },
    #[error("factor {factor} refers to unknown vertex `{vertex}`")]
    UnknownVertex { factor: usize, vertex: String },
    #[error("factor {factor} lists vertex `{vertex}` twice")]
    DuplicateMember { factor: usize, vertex: String },
    #[error("vertex id `{0}` declared twice")]
    DuplicateVertex(String),
    #[error("graph is not connected ({components} components)")]
    Disconnected { components: usize },
    #[error("parameter outside the domain: {0}")]
    OutsideDomain(String),
    #[error("covariance is numerically singular: {0}")]
    SingularCovariance(String),
    #[error("singular matrix: {0}")]
    Singular(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("factor belief not normalizable at edge {edge} (factor {factor} -> vertex {vertex})")]
    NotNormalizable {
        edge: usize,
        factor: usize,
        vertex: usize,
    },
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("eigenvalue solver did not converge on a {0}x{0} matrix")]
    EigenFailure(usize),
    #[error("pole: det(I - M) = {0:e}")]
    Pole(f64),
    #[error("lift onto S(Psi) failed at factor {factor}: {reason}")]
    Lift { factor: usize, reason: String },
    #[error("state space too large ({0} joint states)")]
    TooLarge(usize),
    #[error("parse error at line {line}, column {column}: {msg}")]
    Parse {
        msg: String,
        line: usize,
        column: usize,
    },
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit status used by the command-line tool.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::EmptyFactor { .. }
            | Error::UnknownVertex { .. }
            | Error::DuplicateMember { .. }
            | Error::DuplicateVertex(_)
            | Error::Disconnected { .. }
            | Error::Unsupported(_)
            | Error::Shape(_)
            | Error::TooLarge(_)
            | Error::Parse { .. }
            | Error::Invalid(_)
            | Error::Io(_) => 2,
            _ => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
