use std::fmt;

/// Errors raised anywhere in the crate.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum Error {
    #[error("group parameters must be greater than 3")]
    ParameterTooSmall,
    #[error("p != 2q + 1")]
    NotSafePrime,
    #[error("{0} failed the primality test")]
    NotPrime(&'static str),
    #[error("unknown group preset `{0}`")]
    UnknownGroup(String),
    #[error("password maps to a degenerate generator (0 or 1)")]
    DegenerateGenerator,
    #[error("scalar outside [1, q-1]")]
    ScalarOutOfRange,
    #[error("exponent is not invertible modulo q, or is congruent to 1")]
    InvalidExponent,
    #[error("identity must not be empty")]
    EmptyIdentity,
    #[error("identity longer than 65535 octets")]
    IdentityTooLong,
    #[error("own and peer identities are equal")]
    IdentitiesEqual,
    #[error("password must not be empty")]
    EmptyPassword,
    #[error("received element outside [2, p-2]")]
    RangeCheckFailed,
    #[error("peer identity mismatch: expected `{expected}`, got `{got}`")]
    PeerIdentityMismatch { expected: String, got: String },
    #[error("operation not allowed in phase {0}")]
    WrongPhase(crate::protocol::Phase),
    #[error("key confirmation is disabled for this session")]
    ConfirmationDisabled,
    #[error("key confirmation tag mismatch")]
    ConfirmationMismatch,
    #[error("message duplicates one this party already sent")]
    DuplicateMessage,
    #[error("decode error: {0}")]
    Decode(DecodeError),
    #[error("i/o error: {0}")]
    Io(String),
}

impl From<DecodeError> for Error {
    fn from(e: DecodeError) -> Self {
        Error::Decode(e)
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

/// Wire and codec decoding failures.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DecodeError {
    Truncated,
    TrailingBytes,
    UnknownKind(u8),
    ElementWidth { expected: usize, got: usize },
    ElementOutOfRange,
    InvalidUtf8,
    FrameTooLarge(usize),
}

impl fmt::Display for DecodeError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DecodeError::Truncated => f.write_str("truncated input"),
            DecodeError::TrailingBytes => f.write_str("trailing bytes after message"),
            DecodeError::UnknownKind(k) => write!(f, "unknown message kind 0x{k:02x}"),
            DecodeError::ElementWidth { expected, got } => {
                write!(f, "element width {got}, expected {expected}")
            }
            DecodeError::ElementOutOfRange => f.write_str("element not below p"),
            DecodeError::InvalidUtf8 => f.write_str("identity is not valid UTF-8"),
            DecodeError::FrameTooLarge(n) => write!(f, "frame of {n} octets exceeds limit"),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
