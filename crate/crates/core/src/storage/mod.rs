//! On-disk column files.
//!
//! ```text
//! +-------------------------------+  offset 0
//! | header (24 bytes)             |  "PCF1", version, codec, kind, reserved,
//! |                               |  values_per_page u32, total_pages u32, total_values u64
//! +-------------------------------+  offset 24
//! | page index (16 bytes / page)  |  offset u64, compressed_len u32, value_count u32
//! +-------------------------------+
//! | page 0 body | page 1 body | ..|  codec output, or a slot directory for byte columns
//! +-------------------------------+
//! ```
//!
//! Every page covers `values_per_page` logical values (the last may hold fewer);
//! only the physical extent varies with the codec.

mod catalog;
mod column;
mod compress;
mod stats;
mod store;

use std::io;
use std::path::PathBuf;

use thiserror::Error;

use crate::codec::{CodecError, CodecId};

pub use catalog::{Catalog, CatalogEntry, CATALOG_FILE_NAME, CATALOG_HEADER};
pub use column::{
    write_bytes_column, write_column, ColumnFile, ColumnFileHeader, PageData, PageIndexEntry, StringPage,
    FORMAT_VERSION, HEADER_LEN, INDEX_ENTRY_LEN, MAGIC,
};
pub use compress::{column_file_name, compress_existing_column, payload_bytes, CompressionReport};
pub use stats::{column_stats, AggregateStat, ColumnStat, ColumnStats};
pub use store::{ColumnId, ColumnStore, PageRef};

/// Logical type of a column's values.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ValueKind {
    U32,
    Bytes,
}

impl ValueKind {
    pub fn name(self) -> &'static str {
        match self {
            ValueKind::U32 => "u32",
            ValueKind::Bytes => "bytes",
        }
    }

    pub(crate) fn wire_byte(self) -> u8 {
        match self {
            ValueKind::U32 => 0,
            ValueKind::Bytes => 1,
        }
    }

    pub(crate) fn from_wire_byte(b: u8) -> Option<ValueKind> {
        match b {
            0 => Some(ValueKind::U32),
            1 => Some(ValueKind::Bytes),
            _ => None,
        }
    }

    pub(crate) fn from_name(s: &str) -> Option<ValueKind> {
        match s {
            "u32" => Some(ValueKind::U32),
            "bytes" => Some(ValueKind::Bytes),
            _ => None,
        }
    }
}

#[derive(Debug, Error)]
pub enum StorageError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path}: not a column file (bad magic)")]
    BadMagic { path: PathBuf },
    #[error("{path}: unsupported format version {version}")]
    UnsupportedVersion { path: PathBuf, version: u8 },
    #[error("{path}: corrupt column file: {reason}")]
    Corrupt { path: PathBuf, reason: String },
    #[error("page size must be a positive multiple of 4 bytes, got {0}")]
    InvalidPageSize(usize),
    #[error("page {page} out of range (column has {total_pages} pages)")]
    PageOutOfRange { page: u32, total_pages: u32 },
    #[error("unknown column {table}.{column}")]
    UnknownColumn { table: String, column: String },
    #[error("unknown table {0}")]
    UnknownTable(String),
    #[error("column {table}.{column} holds {kind} values; codec {codec} needs u32")]
    TypeMismatch { table: String, column: String, kind: &'static str, codec: CodecId },
    #[error("catalog line {line}: {message}")]
    CatalogParse { line: usize, message: String },
    #[error(transparent)]
    Codec(#[from] CodecError),
}

impl StorageError {
    pub(crate) fn io(path: impl Into<PathBuf>) -> impl FnOnce(io::Error) -> StorageError {
        let path = path.into();
        move |source| StorageError::Io { path, source }
    }
}

pub type Result<T, E = StorageError> = std::result::Result<T, E>;
