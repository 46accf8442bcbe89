use thiserror::Error;

/// Error raised by pipe operations.
///
/// `Terminated` doubles as the clean end-of-stream signal for consumers
/// draining a pipe after the final `eos` packet has been taken.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PipeError {
    #[error("pipe stalled: {0}")]
    Stalled(String),
    #[error("pipe terminated")]
    Terminated,
    #[error("packet seq {got} does not increase over previous seq {last}")]
    NonMonotonicSeq { last: u64, got: u64 },
    #[error("invalid packet: {0}")]
    InvalidPacket(String),
}

/// Error raised while encoding, decoding or transmitting wire messages.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TransportError {
    #[error("bad header: {0}")]
    BadHeader(String),
    #[error("payload crc mismatch (expected {expected:#010x}, computed {computed:#010x})")]
    CrcMismatch { expected: u32, computed: u32 },
    #[error("sequence gap: expected {expected}, got {got}")]
    SeqGap { expected: u32, got: u32 },
    #[error("message truncated: need {need} bytes, have {have}")]
    Truncated { need: usize, have: usize },
    #[error("payload too large: {0} bytes exceeds u32 range")]
    PayloadTooLarge(u64),
    #[error("retries exhausted after {attempts} sends (last ack status {last:?})")]
    RetriesExhausted { attempts: u32, last: u8 },
    #[error("connection i/o error: {0}")]
    Io(String),
}

/// Top-level error for the pipeline framework.
#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error(transparent)]
    Pipe(#[from] PipeError),
    #[error(transparent)]
    Transport(#[from] TransportError),
    #[error("chain error: {0}")]
    Chain(String),
    #[error(
        "payload kind mismatch linking '{upstream}' -> '{downstream}': \
         {upstream} produces {produced:?}, {downstream} accepts {accepted:?}"
    )]
    KindMismatch {
        upstream: String,
        downstream: String,
        produced: crate::packet::PayloadKind,
        accepted: crate::packet::PayloadKind,
    },
    #[error("invalid config: {0}")]
    Config(String),
    #[error("dimension mismatch: {0}")]
    DimMismatch(String),
    #[error("format error: {0}")]
    Format(String),
    #[error("scorer error: {0}")]
    Scorer(String),
    #[error("decode failure: {0}")]
    DecodeFailure(String),
    #[error("component '{component}' failed to stop within {timeout_ms} ms")]
    StopTimeout { component: String, timeout_ms: u64 },
    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub fn format(msg: impl Into<String>) -> Self {
        Error::Format(msg.into())
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
