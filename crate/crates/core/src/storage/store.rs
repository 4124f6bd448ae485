use std::collections::HashMap;

use super::{Catalog, CatalogEntry, ColumnFile, Result, StorageError};

/// Dense handle for an opened column.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ColumnId(pub u32);

/// One page of one column.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PageRef {
    pub column: ColumnId,
    pub page: u32,
}

/// Every column of a catalog, opened for reading.
#[derive(Debug)]
pub struct ColumnStore {
    catalog: Catalog,
    files: Vec<ColumnFile>,
    by_name: HashMap<(String, String), ColumnId>,
}

impl ColumnStore {
    pub fn open(catalog: Catalog) -> Result<ColumnStore> {
        let mut files = Vec::with_capacity(catalog.entries().len());
        let mut by_name = HashMap::new();
        for (i, entry) in catalog.entries().iter().enumerate() {
            let path = catalog.resolve(entry);
            let file = ColumnFile::open(&path)?;
            let h = file.header();
            if h.codec != entry.codec
                || h.kind != entry.kind
                || h.total_values != entry.total_values
                || h.values_per_page != entry.values_per_page
            {
                return Err(StorageError::Corrupt {
                    path,
                    reason: format!("header disagrees with catalog entry {}.{}", entry.table, entry.column),
                });
            }
            files.push(file);
            by_name.insert((entry.table.clone(), entry.column.clone()), ColumnId(i as u32));
        }
        Ok(ColumnStore { catalog, files, by_name })
    }

    pub fn catalog(&self) -> &Catalog {
        &self.catalog
    }

    pub fn column_id(&self, table: &str, column: &str) -> Result<ColumnId> {
        self.by_name
            .get(&(table.to_string(), column.to_string()))
            .copied()
            .ok_or_else(|| StorageError::UnknownColumn { table: table.into(), column: column.into() })
    }

    pub fn file(&self, id: ColumnId) -> &ColumnFile {
        &self.files[id.0 as usize]
    }

    pub fn entry(&self, id: ColumnId) -> &CatalogEntry {
        &self.catalog.entries()[id.0 as usize]
    }

    pub fn column_ids(&self) -> impl Iterator<Item = ColumnId> {
        (0..self.files.len() as u32).map(ColumnId)
    }

    /// Row count of a table; every column of a table holds the same number of values.
    pub fn table_rows(&self, table: &str) -> Result<u64> {
        let mut counts = self.catalog.columns_of(table).map(|e| e.total_values);
        let first = counts.next().ok_or_else(|| StorageError::UnknownTable(table.into()))?;
        if let Some(other) = counts.find(|&c| c != first) {
            return Err(StorageError::Corrupt {
                path: self.catalog.root().to_path_buf(),
                reason: format!("table {table} has columns of {first} and {other} rows"),
            });
        }
        Ok(first)
    }

    pub fn page_ref(&self, column: ColumnId, page: u32) -> Result<PageRef> {
        let total_pages = self.file(column).total_pages();
        if page >= total_pages {
            return Err(StorageError::PageOutOfRange { page, total_pages });
        }
        Ok(PageRef { column, page })
    }

    /// Drops the OS page cache for every column file; false if any call was unsupported.
    pub fn drop_os_cache(&self) -> bool {
        // Every file is attempted even after one fails.
        self.files.iter().filter(|f| !f.drop_os_cache()).count() == 0
    }
}
