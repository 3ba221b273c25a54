use thiserror::Error;

use crate::vsss::Violation;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("value {0} is outside the representable fixed-point range")]
    Range(f64),
    #[error("{0:#x} has no inverse modulo 2^l")]
    NoInverse(u64),
    #[error("public matrix rejected: {}", render_violations(.0))]
    Validation(Vec<Violation>),
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("preprocessing underflow: {0}")]
    PreprocUnderflow(String),
    #[error("preprocessing material mismatch: {0}")]
    PreprocMismatch(String),
    #[error("protocol desync: {0}")]
    Desync(String),
    #[error("peer {0} dropped")]
    PeerDropped(u8),
    #[error("connection error: {0}")]
    Connection(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit code used by the command line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Validation(_) | Error::Argument(_) | Error::Range(_) | Error::Parse(_) => 2,
            Error::Desync(_) | Error::PeerDropped(_) | Error::Connection(_) => 3,
            Error::PreprocUnderflow(_) | Error::PreprocMismatch(_) => 4,
            _ => 1,
        }
    }
}

fn render_violations(v: &[Violation]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("; ")
}
