use thiserror::Error;

use crate::pagestore::PageId;
use crate::types::{CellId, ObjectId, Timestamp};

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("page {0} was never allocated")]
    UnknownPage(PageId),

    #[error("page {page} overflow: {len} records exceed capacity {capacity}")]
    PageOverflow {
        page: PageId,
        len: usize,
        capacity: usize,
    },

    #[error("update at t={got} precedes the latest update at t={latest}")]
    OutOfOrder { got: Timestamp, latest: Timestamp },

    #[error("object {0} is already live")]
    AlreadyLive(ObjectId),

    #[error("object {0} is not live")]
    NotLive(ObjectId),

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("unknown cell {0}")]
    UnknownCell(CellId),

    #[error("object {object} in cell {cell}: {reason}")]
    Alternation {
        object: ObjectId,
        cell: CellId,
        reason: String,
    },

    #[error("invalid config: {0}")]
    Config(String),

    #[error("primitive backend capped at {cap} events")]
    CapExceeded { cap: usize },

    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("io: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl Error {
    /// Errors caused by the input data rather than by usage.
    pub fn is_data_error(&self) -> bool {
        matches!(
            self,
            Error::Alternation { .. }
                | Error::OutOfOrder { .. }
                | Error::AlreadyLive(_)
                | Error::NotLive(_)
                | Error::CapExceeded { .. }
                | Error::UnknownCell(_)
        )
    }
}
