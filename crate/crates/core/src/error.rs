use thiserror::Error;

use crate::id::Id;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("node {0} already present on the ring")]
    DuplicateId(Id),
    #[error("node {0} is not alive")]
    DeadNode(Id),
    #[error("lookup for {0} timed out")]
    LookupTimeout(Id),
    #[error("item {0} not found")]
    NotFound(Id),
}

pub type Result<T> = std::result::Result<T, Error>;
