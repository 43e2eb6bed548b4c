use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("state width {0} outside [1, 64]")]
    InvalidWidth(u32),

    #[error("value {value:#x} does not fit in {bits} bits")]
    OutOfRange { value: u64, bits: u32 },

    #[error("suffix length {ell} outside [1, {max}]")]
    InvalidSuffixLength { ell: u32, max: u32 },

    #[error("zero-prefix length {0} outside [0, 64]")]
    InvalidPrefixLength(u32),

    #[error("chain length must be at least 1")]
    ZeroChainLength,

    #[error("cannot draw {wanted} distinct starts from a space of 2^{bits}")]
    InsufficientStarts { wanted: u64, bits: u32 },

    #[error("enumeration of {entries} chain states exceeds the cap of {cap}")]
    EnumerationTooLarge { entries: u128, cap: u128 },

    #[error("no nonce produced a {d}-zero prefix within {cap} trials")]
    TrialCapExhausted { d: u32, cap: u64 },

    #[error("unknown difficulty {0}")]
    UnknownDifficulty(u32),

    #[error("node {node} holds no table for difficulty {difficulty}")]
    NoTableForDifficulty { node: u64, difficulty: u32 },

    #[error("table does not match the system parameters: {0}")]
    TableMismatch(String),

    #[error("empty transaction batch")]
    EmptyTransactions,

    #[error("empty pool")]
    EmptyPool,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("malformed table file: {0}")]
    TableFormat(String),

    #[error("malformed chain record on line {line}: {reason}")]
    ChainFormat { line: usize, reason: String },

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(err: std::io::Error) -> Self {
        Error::Io(err.to_string())
    }
}
