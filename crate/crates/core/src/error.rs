use thiserror::Error;

/// Errors raised by the link-simulation primitives.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A parameter is outside the supported range.
    #[error("configuration error: {0}")]
    Config(String),
    /// A buffer length does not match what the operation expects.
    #[error("framing error: {what}: expected {expected}, got {got}")]
    Framing {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    /// A numerical consistency check failed.
    #[error("integrity error: {0}")]
    Integrity(String),
    /// The estimated channel gain on a bin is too small to invert.
    #[error("degenerate channel: |h| = {magnitude:e} on occupied bin {bin}")]
    DegenerateChannel { bin: usize, magnitude: f64 },
    /// Bit loading cannot meet the requested total.
    #[error("allocation error: {0}")]
    Allocation(String),
    /// An error raised while simulating one frame.
    #[error("frame {index}: {source}")]
    Frame {
        index: u64,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    /// Strips any frame context.
    pub fn root(&self) -> &Error {
        match self {
            Error::Frame { source, .. } => source.root(),
            other => other,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_len(what: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::Framing {
            what,
            expected,
            got,
        })
    }
}
