use thiserror::Error;

use crate::group::OpCounters;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("scalar must be non-zero")]
    ZeroScalar,
    #[error("point is the group identity")]
    IdentityPoint,
    #[error("invalid point encoding")]
    InvalidPoint,
    #[error("invalid scalar encoding")]
    InvalidScalar,
    #[error("hash input must be non-empty")]
    EmptyHashInput,
    #[error("entropy source failure: {0}")]
    Entropy(String),
    #[error("key bundle is inconsistent: {0}")]
    InvalidKeys(&'static str),
    #[error("malformed transaction: {0}")]
    MalformedTx(&'static str),
    #[error("truncated input while reading {0}")]
    Truncated(&'static str),
    #[error("{0} trailing bytes after end of input")]
    TrailingBytes(usize),
    #[error("bad magic bytes in {0}")]
    BadMagic(&'static str),
    #[error("unsupported format version {0}")]
    UnknownVersion(u8),
    #[error("backend mismatch: expected {expected}, found id {found}")]
    BackendMismatch { expected: &'static str, found: u8 },
    #[error("hash mismatch: expected {expected}, found id {found}")]
    HashMismatch { expected: &'static str, found: u8 },
    #[error("corrupt state: {0}")]
    CorruptState(&'static str),
    #[error("epoch length N must be at least 1")]
    InvalidEpoch,
    #[error("lookahead window must be at least 1")]
    InvalidLookahead,
    #[error("height range {from}..{to} out of bounds for ledger of {len} blocks")]
    RangeOutOfBounds { from: u64, to: u64, len: u64 },
    #[error("invalid traffic spec: {0}")]
    InvalidSpec(&'static str),
    #[error("op-count mismatch for {scheme} {side} at N={n}: expected {expected}, counted {counted}")]
    CountMismatch {
        scheme: &'static str,
        side: &'static str,
        n: u32,
        expected: OpCounters,
        counted: OpCounters,
    },
    #[error("protocol run failed: {0}")]
    ProtocolRun(String),
    #[error("at least 100 iterations are required, got {0}")]
    TooFewIterations(usize),
    #[error("timer resolution too coarse to time {0}")]
    TimerResolution(&'static str),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}
