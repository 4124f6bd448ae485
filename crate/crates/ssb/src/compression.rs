use std::path::Path;

use colcrunch_core::codec::CodecId;
use colcrunch_core::storage::{compress_existing_column, payload_bytes, Catalog, CompressionReport};
use serde::{Deserialize, Serialize};

use crate::measure::{read_csv, write_csv};
use crate::schema::{COMPRESSED_COLUMNS, LINEORDER};
use crate::{BenchError, Result};

/// Per-column compression timings kept next to the dataset.
pub const COMPRESSION_LOG: &str = "compression_log.csv";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompressionLogRow {
    pub table: String,
    pub column: String,
    pub codec: String,
    pub compress_seconds: f64,
    pub compressed_bytes: u64,
    pub uncompressed_bytes: u64,
}

const LOG_HEADER: [&str; 6] =
    ["table", "column", "codec", "compress_seconds", "compressed_bytes", "uncompressed_bytes"];

/// One row of the size export: a column under one codec.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SizeRow {
    pub table: String,
    pub column: String,
    pub codec: String,
    pub compressed_bytes: u64,
    pub uncompressed_bytes: u64,
    pub ratio: f64,
    /// Empty for raw rows, which were never compressed.
    pub compress_seconds: Option<f64>,
}

pub const SIZES_HEADER: [&str; 7] =
    ["table", "column", "codec", "compressed_bytes", "uncompressed_bytes", "ratio", "compress_seconds"];

pub fn read_compression_log(data_dir: &Path) -> Result<Vec<CompressionLogRow>> {
    let path = data_dir.join(COMPRESSION_LOG);
    if !path.exists() {
        return Ok(Vec::new());
    }
    read_csv(&LOG_HEADER, &path)
}

fn record(data_dir: &Path, reports: &[CompressionReport]) -> Result<()> {
    let mut rows = read_compression_log(data_dir)?;
    for r in reports {
        let row = CompressionLogRow {
            table: r.entry.table.clone(),
            column: r.entry.column.clone(),
            codec: r.entry.codec.name().into(),
            compress_seconds: r.wall_seconds,
            compressed_bytes: r.compressed_bytes,
            uncompressed_bytes: r.uncompressed_bytes,
        };
        match rows.iter_mut().find(|x| x.table == row.table && x.column == row.column && x.codec == row.codec) {
            Some(x) => *x = row,
            None => rows.push(row),
        }
    }
    write_csv(&rows, &LOG_HEADER, &data_dir.join(COMPRESSION_LOG))
}

/// Recompresses the ten eligible LINEORDER columns with `codec` and logs
/// each column's compression time.
pub fn compress_lineorder(data_dir: &Path, codec: CodecId) -> Result<Vec<CompressionReport>> {
    let catalog_path = data_dir.join(colcrunch_core::storage::CATALOG_FILE_NAME);
    let mut catalog = Catalog::load(&catalog_path)?;
    let mut reports = Vec::with_capacity(COMPRESSED_COLUMNS.len());
    for column in COMPRESSED_COLUMNS {
        reports.push(compress_existing_column(&mut catalog, &catalog_path, LINEORDER, column, codec)?);
    }
    if codec != CodecId::Raw {
        record(data_dir, &reports)?;
    }
    Ok(reports)
}

/// The codec shared by the eligible columns, or an error if they differ.
pub fn lineorder_codec(catalog: &Catalog) -> Result<CodecId> {
    let mut codecs = COMPRESSED_COLUMNS.iter().map(|c| catalog.entry(LINEORDER, c).map(|e| e.codec));
    let first = codecs.next().expect("ten columns")?;
    for c in codecs {
        if c? != first {
            return Err(BenchError::Config("LINEORDER columns use mixed codecs; rerun compress".into()));
        }
    }
    Ok(first)
}

/// Raw sizes of the eligible columns plus every logged compression.
pub fn size_rows(data_dir: &Path) -> Result<Vec<SizeRow>> {
    let catalog = Catalog::load(data_dir.join(colcrunch_core::storage::CATALOG_FILE_NAME))?;
    let log = read_compression_log(data_dir)?;
    let mut rows = Vec::new();
    for column in COMPRESSED_COLUMNS {
        let e = catalog.entry(LINEORDER, column)?;
        rows.push(SizeRow {
            table: LINEORDER.into(),
            column: column.into(),
            codec: CodecId::Raw.name().into(),
            compressed_bytes: e.uncompressed_size,
            uncompressed_bytes: e.uncompressed_size,
            ratio: 1.0,
            compress_seconds: None,
        });
        // Columns compressed without a log entry still report their size.
        if e.codec != CodecId::Raw && !log.iter().any(|r| r.column == column && r.codec == e.codec.name()) {
            rows.push(SizeRow {
                table: LINEORDER.into(),
                column: column.into(),
                codec: e.codec.name().into(),
                compressed_bytes: payload_bytes(e),
                uncompressed_bytes: e.uncompressed_size,
                ratio: e.uncompressed_size as f64 / payload_bytes(e).max(1) as f64,
                compress_seconds: None,
            });
        }
    }
    for r in log {
        rows.push(SizeRow {
            ratio: r.uncompressed_bytes as f64 / r.compressed_bytes.max(1) as f64,
            table: r.table,
            column: r.column,
            codec: r.codec,
            compressed_bytes: r.compressed_bytes,
            uncompressed_bytes: r.uncompressed_bytes,
            compress_seconds: Some(r.compress_seconds),
        });
    }
    Ok(rows)
}

pub fn write_sizes(rows: &[SizeRow], path: &Path) -> Result<()> {
    write_csv(rows, &SIZES_HEADER, path)
}
