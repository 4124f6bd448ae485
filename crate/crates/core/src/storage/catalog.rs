use std::fs::{self, File};
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::codec::CodecId;

use super::{Result, StorageError, ValueKind};

pub const CATALOG_FILE_NAME: &str = "catalog.txt";
pub const CATALOG_HEADER: &str = "# colcrunch catalog v1";
const COLUMNS_COMMENT: &str =
    "# table\tcolumn\ttype\tcodec\tpath\tvalues_per_page\ttotal_values\tcompressed_file_size\tuncompressed_size";
const FIELD_COUNT: usize = 9;

/// Physical parameters of one column file.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CatalogEntry {
    pub table: String,
    pub column: String,
    pub kind: ValueKind,
    pub codec: CodecId,
    /// Relative paths resolve against the catalog's directory.
    pub path: PathBuf,
    pub values_per_page: u32,
    pub total_values: u64,
    pub compressed_file_size: u64,
    pub uncompressed_size: u64,
}

impl CatalogEntry {
    pub fn total_pages(&self) -> u64 {
        self.total_values.div_ceil(u64::from(self.values_per_page))
    }

    fn to_line(&self, root: &Path) -> String {
        let path = self.path.strip_prefix(root).unwrap_or(&self.path);
        format!(
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
            self.table,
            self.column,
            self.kind.name(),
            self.codec.name(),
            path.display(),
            self.values_per_page,
            self.total_values,
            self.compressed_file_size,
            self.uncompressed_size
        )
    }

    fn parse(line: &str, line_no: usize) -> Result<CatalogEntry> {
        let err = |message: String| StorageError::CatalogParse { line: line_no, message };
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != FIELD_COUNT {
            return Err(err(format!("expected {FIELD_COUNT} tab-separated fields, found {}", fields.len())));
        }
        let number = |i: usize, name: &str| -> Result<u64> {
            fields[i].parse::<u64>().map_err(|_| err(format!("{name} {:?} is not a non-negative integer", fields[i])))
        };
        if fields[0].is_empty() || fields[1].is_empty() || fields[4].is_empty() {
            return Err(err("table, column and path must be non-empty".into()));
        }
        let kind = ValueKind::from_name(fields[2]).ok_or_else(|| err(format!("unknown type {:?}", fields[2])))?;
        let codec = fields[3].parse::<CodecId>().map_err(|_| err(format!("unknown codec {:?}", fields[3])))?;
        let values_per_page = u32::try_from(number(5, "values_per_page")?)
            .ok()
            .filter(|&v| v > 0)
            .ok_or_else(|| err("values_per_page must be in 1..=u32::MAX".into()))?;
        let entry = CatalogEntry {
            table: fields[0].to_string(),
            column: fields[1].to_string(),
            kind,
            codec,
            path: PathBuf::from(fields[4]),
            values_per_page,
            total_values: number(6, "total_values")?,
            compressed_file_size: number(7, "compressed_file_size")?,
            uncompressed_size: number(8, "uncompressed_size")?,
        };
        if kind == ValueKind::U32 && entry.uncompressed_size != 4 * entry.total_values {
            return Err(err("uncompressed_size of a u32 column must be 4 x total_values".into()));
        }
        if kind == ValueKind::Bytes && codec != CodecId::Raw {
            return Err(err("byte columns can only be stored raw".into()));
        }
        Ok(entry)
    }
}

/// All column files of a dataset. Entries keep insertion order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Catalog {
    root: PathBuf,
    entries: Vec<CatalogEntry>,
}

impl Catalog {
    pub fn new(root: impl Into<PathBuf>) -> Catalog {
        Catalog { root: root.into(), entries: Vec::new() }
    }

    /// Directory that relative entry paths resolve against.
    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn default_path(&self) -> PathBuf {
        self.root.join(CATALOG_FILE_NAME)
    }

    pub fn entries(&self) -> &[CatalogEntry] {
        &self.entries
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entry(&self, table: &str, column: &str) -> Result<&CatalogEntry> {
        self.entries
            .iter()
            .find(|e| e.table == table && e.column == column)
            .ok_or_else(|| StorageError::UnknownColumn { table: table.into(), column: column.into() })
    }

    /// Inserts or replaces the entry for `(table, column)`. Paths under the
    /// catalog root are stored relative to it.
    pub fn upsert(&mut self, mut entry: CatalogEntry) {
        if let Ok(rel) = entry.path.strip_prefix(&self.root) {
            entry.path = rel.to_path_buf();
        }
        match self.entries.iter_mut().find(|e| e.table == entry.table && e.column == entry.column) {
            Some(slot) => *slot = entry,
            None => self.entries.push(entry),
        }
    }

    /// Table names in first-seen order.
    pub fn tables(&self) -> Vec<&str> {
        let mut out: Vec<&str> = Vec::new();
        for e in &self.entries {
            if !out.contains(&e.table.as_str()) {
                out.push(&e.table);
            }
        }
        out
    }

    pub fn columns_of<'a>(&'a self, table: &'a str) -> impl Iterator<Item = &'a CatalogEntry> + 'a {
        self.entries.iter().filter(move |e| e.table == table)
    }

    pub fn resolve(&self, entry: &CatalogEntry) -> PathBuf {
        if entry.path.is_absolute() {
            entry.path.clone()
        } else {
            self.root.join(&entry.path)
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Catalog> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(StorageError::io(path))?;
        let root = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Catalog::parse(&text, root)
    }

    pub fn parse(text: &str, root: impl Into<PathBuf>) -> Result<Catalog> {
        let mut catalog = Catalog::new(root);
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, first)) if first == CATALOG_HEADER => {}
            _ => {
                return Err(StorageError::CatalogParse {
                    line: 1,
                    message: format!("missing header line {CATALOG_HEADER:?}"),
                })
            }
        }
        for (i, line) in lines {
            if line.starts_with('#') || line.trim().is_empty() {
                continue;
            }
            let entry = CatalogEntry::parse(line, i + 1)?;
            if catalog.entry(&entry.table, &entry.column).is_ok() {
                return Err(StorageError::CatalogParse {
                    line: i + 1,
                    message: format!("duplicate column {}.{}", entry.table, entry.column),
                });
            }
            catalog.entries.push(entry);
        }
        Ok(catalog)
    }

    pub fn render(&self) -> String {
        let mut out = format!("{CATALOG_HEADER}\n{COLUMNS_COMMENT}\n");
        for e in &self.entries {
            out.push_str(&e.to_line(&self.root));
            out.push('\n');
        }
        out
    }

    /// Writes to a temporary file, syncs it and renames it over `path`.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let tmp = path.with_extension("txt.tmp");
        let mut file = File::create(&tmp).map_err(StorageError::io(&tmp))?;
        file.write_all(self.render().as_bytes()).and_then(|_| file.sync_all()).map_err(StorageError::io(&tmp))?;
        drop(file);
        fs::rename(&tmp, path).map_err(StorageError::io(path))?;
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            // Persist the rename itself; not every platform allows syncing a directory.
            if let Ok(d) = File::open(dir) {
                let _ = d.sync_all();
            }
        }
        Ok(())
    }
}
