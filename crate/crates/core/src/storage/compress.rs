use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use crate::codec::CodecId;

use super::{
    write_column, Catalog, CatalogEntry, ColumnFile, Result, StorageError, ValueKind, HEADER_LEN, INDEX_ENTRY_LEN,
};

/// Outcome of recompressing one column.
#[derive(Clone, Debug)]
pub struct CompressionReport {
    pub entry: CatalogEntry,
    pub previous_codec: CodecId,
    /// Time to encode and write the new file; reading the source is excluded.
    pub wall_seconds: f64,
    /// Sum of page extents, without header and page index.
    pub compressed_bytes: u64,
    pub uncompressed_bytes: u64,
}

/// File name a column gets once stored with `codec`.
pub fn column_file_name(table: &str, column: &str, codec: CodecId) -> PathBuf {
    PathBuf::from(format!("{table}.{column}.{codec}.pcf"))
}

/// Bytes of page bodies, excluding header and page index.
pub fn payload_bytes(entry: &CatalogEntry) -> u64 {
    let overhead = HEADER_LEN + INDEX_ENTRY_LEN * entry.total_pages();
    entry.compressed_file_size.saturating_sub(overhead)
}

/// Rewrites one column with `codec` and swaps the catalog entry.
///
/// The new file is written under a codec-specific name, then the catalog is
/// replaced via temp file + rename, and only then is the old file removed.
pub fn compress_existing_column(
    catalog: &mut Catalog,
    catalog_path: &Path,
    table: &str,
    column: &str,
    codec: CodecId,
) -> Result<CompressionReport> {
    let source = catalog.entry(table, column)?.clone();
    if source.kind != ValueKind::U32 {
        if codec == CodecId::Raw {
            return Ok(CompressionReport {
                compressed_bytes: payload_bytes(&source),
                uncompressed_bytes: source.uncompressed_size,
                previous_codec: source.codec,
                entry: source,
                wall_seconds: 0.0,
            });
        }
        return Err(StorageError::TypeMismatch {
            table: table.into(),
            column: column.into(),
            kind: source.kind.name(),
            codec,
        });
    }
    let source_path = catalog.resolve(&source);
    let values = ColumnFile::open(&source_path)?.read_all_u32()?;
    let page_size = source.values_per_page as usize * 4;

    let file_name = column_file_name(table, column, codec);
    let target = catalog.root().join(&file_name);
    let started = Instant::now();
    let mut entry = write_column(table, column, &values, codec, page_size, &target)?;
    let wall_seconds = started.elapsed().as_secs_f64();
    entry.path = file_name;

    let mut updated = catalog.clone();
    updated.upsert(entry.clone());
    updated.save(catalog_path)?;
    *catalog = updated;
    if source_path != target {
        fs::remove_file(&source_path).map_err(StorageError::io(&source_path))?;
    }
    Ok(CompressionReport {
        compressed_bytes: payload_bytes(&entry),
        uncompressed_bytes: entry.uncompressed_size,
        previous_codec: source.codec,
        entry,
        wall_seconds,
    })
}
