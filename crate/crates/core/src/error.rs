use std::io;

use thiserror::Error;

use crate::field::FieldId;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("field mismatch: {0} vs {1}")]
    FieldMismatch(FieldId, FieldId),
    #[error("inversion of zero")]
    ZeroInverse,
    #[error("unsupported field: {0}")]
    InvalidField(String),
    #[error("value {value} out of range for {field}")]
    ValueOutOfRange { value: u16, field: FieldId },
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("index {index} out of range 1..={max}")]
    InvalidIndex { index: usize, max: usize },
    #[error(
        "randomness space has {size} tokens, too large to enumerate; use a smaller field or fewer messages/databases"
    )]
    SpaceTooLarge { size: u128 },
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("malformed wire data: {0}")]
    Wire(String),
    #[error("store format: {0}")]
    StoreFormat(String),
    #[error("endpoint {endpoint}: {source}")]
    Transport {
        endpoint: String,
        #[source]
        source: io::Error,
    },
    #[error("database {db_index} replied with error {code:#04x}: {reason}")]
    Remote { db_index: usize, code: u8, reason: String },
    #[error(transparent)]
    Io(#[from] io::Error),
}
