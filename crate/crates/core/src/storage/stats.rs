use crate::codec::CodecId;

use super::compress::payload_bytes;
use super::{Catalog, ValueKind};

#[derive(Clone, Debug, PartialEq)]
pub struct ColumnStat {
    pub table: String,
    pub column: String,
    pub kind: ValueKind,
    pub codec: CodecId,
    /// Page extents only; header and index excluded.
    pub compressed_bytes: u64,
    pub file_bytes: u64,
    pub uncompressed_bytes: u64,
}

impl ColumnStat {
    pub fn ratio(&self) -> f64 {
        ratio(self.uncompressed_bytes, self.compressed_bytes)
    }
}

/// Per-table totals: `over columns` sums the compressed integer columns,
/// `over the whole table` sums every column of the table.
#[derive(Clone, Debug, PartialEq)]
pub struct AggregateStat {
    pub table: String,
    pub label: &'static str,
    pub columns: usize,
    pub compressed_bytes: u64,
    pub uncompressed_bytes: u64,
}

impl AggregateStat {
    pub const OVER_COLUMNS: &'static str = "over columns";
    pub const WHOLE_TABLE: &'static str = "over the whole table";

    pub fn ratio(&self) -> f64 {
        ratio(self.uncompressed_bytes, self.compressed_bytes)
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ColumnStats {
    pub columns: Vec<ColumnStat>,
    pub aggregates: Vec<AggregateStat>,
}

fn ratio(uncompressed: u64, compressed: u64) -> f64 {
    if compressed == 0 {
        if uncompressed == 0 {
            1.0
        } else {
            f64::INFINITY
        }
    } else {
        uncompressed as f64 / compressed as f64
    }
}

pub fn column_stats(catalog: &Catalog) -> ColumnStats {
    let columns: Vec<ColumnStat> = catalog
        .entries()
        .iter()
        .map(|e| ColumnStat {
            table: e.table.clone(),
            column: e.column.clone(),
            kind: e.kind,
            codec: e.codec,
            compressed_bytes: payload_bytes(e),
            file_bytes: e.compressed_file_size,
            uncompressed_bytes: e.uncompressed_size,
        })
        .collect();
    let mut aggregates = Vec::new();
    for table in catalog.tables() {
        let of_table = || columns.iter().filter(move |c| c.table == table);
        let sum = |label, stats: Vec<&ColumnStat>| AggregateStat {
            table: table.to_string(),
            label,
            columns: stats.len(),
            compressed_bytes: stats.iter().map(|c| c.compressed_bytes).sum(),
            uncompressed_bytes: stats.iter().map(|c| c.uncompressed_bytes).sum(),
        };
        let compressed: Vec<&ColumnStat> =
            of_table().filter(|c| c.kind == ValueKind::U32 && c.codec != CodecId::Raw).collect();
        if !compressed.is_empty() {
            aggregates.push(sum(AggregateStat::OVER_COLUMNS, compressed));
        }
        aggregates.push(sum(AggregateStat::WHOLE_TABLE, of_table().collect()));
    }
    ColumnStats { columns, aggregates }
}
