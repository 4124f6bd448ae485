use std::sync::Arc;

/// Rows per join-index block unless a context overrides it.
pub const DEFAULT_BLOCK_ROWS: usize = 4096;

/// A block of a generalized join index: for every row, one 0-based row
/// position in each listed table. Stored column-major.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct JoinIndexBlock {
    tables: Arc<[String]>,
    positions: Vec<Vec<u32>>,
}

impl JoinIndexBlock {
    pub fn new(tables: Arc<[String]>) -> JoinIndexBlock {
        let positions = vec![Vec::new(); tables.len()];
        JoinIndexBlock { tables, positions }
    }

    /// Single-table block covering positions `start..end`.
    pub fn dense(table: &str, start: u32, end: u32) -> JoinIndexBlock {
        JoinIndexBlock { tables: Arc::from(vec![table.to_string()]), positions: vec![(start..end).collect()] }
    }

    /// Builds a block from row vectors; every row must have one position per table.
    pub fn from_rows(tables: Arc<[String]>, rows: &[Vec<u32>]) -> JoinIndexBlock {
        let mut block = JoinIndexBlock::new(tables);
        for row in rows {
            block.push_row(row);
        }
        block
    }

    pub fn tables(&self) -> &[String] {
        &self.tables
    }

    pub fn len(&self) -> usize {
        self.positions.first().map_or(0, Vec::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn table_index(&self, table: &str) -> Option<usize> {
        self.tables.iter().position(|t| t == table)
    }

    /// Positions of the `t`-th listed table, one per row.
    pub fn positions(&self, t: usize) -> &[u32] {
        &self.positions[t]
    }

    pub fn row(&self, i: usize) -> Vec<u32> {
        self.positions.iter().map(|p| p[i]).collect()
    }

    pub fn push_row(&mut self, row: &[u32]) {
        assert_eq!(row.len(), self.tables.len(), "join index row arity");
        for (col, &p) in self.positions.iter_mut().zip(row) {
            col.push(p);
        }
    }

    /// Rows whose mask entry is true, order preserved.
    pub(crate) fn select(&self, mask: &[bool]) -> JoinIndexBlock {
        let positions = self
            .positions
            .iter()
            .map(|col| col.iter().zip(mask).filter(|(_, &keep)| keep).map(|(&p, _)| p).collect())
            .collect();
        JoinIndexBlock { tables: Arc::clone(&self.tables), positions }
    }

    /// Checks that every position lies below its table's row count.
    pub fn check(&self, rows_of: impl Fn(&str) -> Option<u64>) -> Result<(), String> {
        let n = self.len();
        for (table, col) in self.tables.iter().zip(&self.positions) {
            if col.len() != n {
                return Err(format!("table {table} has {} positions, block has {n} rows", col.len()));
            }
            let rows = rows_of(table).ok_or_else(|| format!("unknown table {table}"))?;
            if let Some(&p) = col.iter().find(|&&p| u64::from(p) >= rows) {
                return Err(format!("position {p} out of range for {table} ({rows} rows)"));
            }
        }
        Ok(())
    }
}
