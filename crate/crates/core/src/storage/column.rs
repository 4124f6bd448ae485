use std::fs::{self, File, OpenOptions};
use std::io::{BufWriter, Read, Seek, SeekFrom, Write};
use std::os::unix::fs::FileExt;
use std::path::{Path, PathBuf};

use crate::codec::{self, CodecId, CompressedPayload};

use super::{CatalogEntry, Result, StorageError, ValueKind};

pub const MAGIC: [u8; 4] = *b"PCF1";
pub const FORMAT_VERSION: u8 = 1;
pub const HEADER_LEN: u64 = 24;
pub const INDEX_ENTRY_LEN: u64 = 16;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ColumnFileHeader {
    pub version: u8,
    pub codec: CodecId,
    pub kind: ValueKind,
    pub values_per_page: u32,
    pub total_pages: u32,
    pub total_values: u64,
}

impl ColumnFileHeader {
    fn encode(&self) -> [u8; HEADER_LEN as usize] {
        let mut buf = [0u8; HEADER_LEN as usize];
        buf[0..4].copy_from_slice(&MAGIC);
        buf[4] = self.version;
        buf[5] = self.codec.wire_byte();
        buf[6] = self.kind.wire_byte();
        buf[8..12].copy_from_slice(&self.values_per_page.to_le_bytes());
        buf[12..16].copy_from_slice(&self.total_pages.to_le_bytes());
        buf[16..24].copy_from_slice(&self.total_values.to_le_bytes());
        buf
    }

    fn decode(buf: &[u8; HEADER_LEN as usize], path: &Path) -> Result<Self> {
        if buf[0..4] != MAGIC {
            return Err(StorageError::BadMagic { path: path.into() });
        }
        if buf[4] != FORMAT_VERSION {
            return Err(StorageError::UnsupportedVersion { path: path.into(), version: buf[4] });
        }
        let corrupt = |reason: String| StorageError::Corrupt { path: path.into(), reason };
        let codec = CodecId::from_wire_byte(buf[5]).map_err(|e| corrupt(e.to_string()))?;
        let kind =
            ValueKind::from_wire_byte(buf[6]).ok_or_else(|| corrupt(format!("unknown value kind {}", buf[6])))?;
        let word = |at: usize| u32::from_le_bytes(buf[at..at + 4].try_into().unwrap());
        Ok(ColumnFileHeader {
            version: buf[4],
            codec,
            kind,
            values_per_page: word(8),
            total_pages: word(12),
            total_values: u64::from_le_bytes(buf[16..24].try_into().unwrap()),
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PageIndexEntry {
    pub offset: u64,
    pub compressed_len: u32,
    pub value_count: u32,
}

impl PageIndexEntry {
    pub fn end(&self) -> u64 {
        self.offset + u64::from(self.compressed_len)
    }
}

/// Variable-length byte values of one page behind a slot directory:
/// `[count u32][offsets u32 x (count + 1)][bytes]`.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct StringPage {
    offsets: Vec<u32>,
    data: Vec<u8>,
}

impl StringPage {
    pub fn from_values<V: AsRef<[u8]>>(values: &[V]) -> StringPage {
        let mut offsets = Vec::with_capacity(values.len() + 1);
        let mut data = Vec::new();
        offsets.push(0);
        for v in values {
            data.extend_from_slice(v.as_ref());
            offsets.push(u32::try_from(data.len()).expect("string page exceeds 4 GiB"));
        }
        StringPage { offsets, data }
    }

    pub fn len(&self) -> usize {
        self.offsets.len().saturating_sub(1)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get(&self, i: usize) -> &[u8] {
        &self.data[self.offsets[i] as usize..self.offsets[i + 1] as usize]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[u8]> + '_ {
        (0..self.len()).map(|i| self.get(i))
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(4 + 4 * self.offsets.len() + self.data.len());
        out.extend_from_slice(&(self.len() as u32).to_le_bytes());
        for o in &self.offsets {
            out.extend_from_slice(&o.to_le_bytes());
        }
        out.extend_from_slice(&self.data);
        out
    }

    pub fn decode(bytes: &[u8], value_count: usize) -> std::result::Result<StringPage, String> {
        let word = |i: usize| -> std::result::Result<u32, String> {
            bytes
                .get(i * 4..i * 4 + 4)
                .map(|b| u32::from_le_bytes(b.try_into().unwrap()))
                .ok_or_else(|| format!("slot directory truncated at byte {}", i * 4))
        };
        let count = word(0)? as usize;
        if count != value_count {
            return Err(format!("slot count {count}, index says {value_count}"));
        }
        let offsets = (0..=count).map(|i| word(1 + i)).collect::<std::result::Result<Vec<_>, _>>()?;
        let data = &bytes[4 * (count + 2)..];
        if offsets[0] != 0 || offsets.windows(2).any(|w| w[0] > w[1]) {
            return Err("slot offsets not ascending".into());
        }
        if *offsets.last().unwrap() as usize != data.len() {
            return Err(format!("slot data is {} bytes, directory says {}", data.len(), offsets.last().unwrap()));
        }
        Ok(StringPage { offsets, data: data.to_vec() })
    }
}

/// A decoded page.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum PageData {
    U32(Vec<u32>),
    Bytes(StringPage),
}

impl PageData {
    pub fn len(&self) -> usize {
        match self {
            PageData::U32(v) => v.len(),
            PageData::Bytes(p) => p.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

fn values_per_page(page_size_bytes: usize) -> Result<u32> {
    if page_size_bytes == 0 || !page_size_bytes.is_multiple_of(4) {
        return Err(StorageError::InvalidPageSize(page_size_bytes));
    }
    u32::try_from(page_size_bytes / 4).map_err(|_| StorageError::InvalidPageSize(page_size_bytes))
}

fn tmp_path(path: &Path) -> PathBuf {
    let mut name = path.file_name().unwrap_or_default().to_os_string();
    name.push(".tmp");
    path.with_file_name(name)
}

/// Writes header, a placeholder index and the page bodies in one pass, then
/// backpatches the index and renames the finished file into place.
fn write_pages<I>(
    path: &Path,
    codec: CodecId,
    kind: ValueKind,
    values_per_page: u32,
    total_values: u64,
    pages: I,
) -> Result<(u64, u64)>
where
    I: ExactSizeIterator<Item = Result<(Vec<u8>, u32, u64)>>,
{
    let tmp = tmp_path(path);
    let total_pages = u32::try_from(pages.len()).expect("page count exceeds u32");
    let header = ColumnFileHeader { version: FORMAT_VERSION, codec, kind, values_per_page, total_pages, total_values };
    let file = File::create(&tmp).map_err(StorageError::io(&tmp))?;
    let mut out = BufWriter::new(file);
    let data_start = HEADER_LEN + INDEX_ENTRY_LEN * u64::from(total_pages);
    out.write_all(&header.encode())
        .and_then(|_| out.write_all(&vec![0u8; (data_start - HEADER_LEN) as usize]))
        .map_err(StorageError::io(&tmp))?;

    let mut index = Vec::with_capacity(total_pages as usize);
    let mut offset = data_start;
    let mut raw_size = 0u64;
    for page in pages {
        let (body, value_count, raw_len) = page?;
        out.write_all(&body).map_err(StorageError::io(&tmp))?;
        let compressed_len = u32::try_from(body.len()).expect("page body exceeds 4 GiB");
        index.push(PageIndexEntry { offset, compressed_len, value_count });
        offset += u64::from(compressed_len);
        raw_size += raw_len;
    }
    let mut file = out.into_inner().map_err(|e| e.into_error()).map_err(StorageError::io(&tmp))?;
    let mut index_bytes = Vec::with_capacity(index.len() * INDEX_ENTRY_LEN as usize);
    for e in &index {
        index_bytes.extend_from_slice(&e.offset.to_le_bytes());
        index_bytes.extend_from_slice(&e.compressed_len.to_le_bytes());
        index_bytes.extend_from_slice(&e.value_count.to_le_bytes());
    }
    file.seek(SeekFrom::Start(HEADER_LEN))
        .and_then(|_| file.write_all(&index_bytes))
        .and_then(|_| file.sync_all())
        .map_err(StorageError::io(&tmp))?;
    drop(file);
    fs::rename(&tmp, path).map_err(StorageError::io(path))?;
    Ok((offset, raw_size))
}

/// Writes a u32 column, compressing each page with `codec`.
pub fn write_column(
    table: &str,
    column: &str,
    values: &[u32],
    codec: CodecId,
    page_size_bytes: usize,
    path: &Path,
) -> Result<CatalogEntry> {
    let vpp = values_per_page(page_size_bytes)?;
    let pages = values.chunks(vpp as usize).map(|chunk| {
        let payload = codec::compress_values(codec, chunk)?;
        Ok((payload.bytes, chunk.len() as u32, 4 * chunk.len() as u64))
    });
    let (file_size, raw_size) = write_pages(path, codec, ValueKind::U32, vpp, values.len() as u64, pages)?;
    Ok(CatalogEntry {
        table: table.to_string(),
        column: column.to_string(),
        kind: ValueKind::U32,
        codec,
        path: path.to_path_buf(),
        values_per_page: vpp,
        total_values: values.len() as u64,
        compressed_file_size: file_size,
        uncompressed_size: raw_size,
    })
}

/// Writes a byte-string column as uncompressed slot-directory pages.
pub fn write_bytes_column<V: AsRef<[u8]>>(
    table: &str,
    column: &str,
    values: &[V],
    page_size_bytes: usize,
    path: &Path,
) -> Result<CatalogEntry> {
    let vpp = values_per_page(page_size_bytes)?;
    let pages = values.chunks(vpp as usize).map(|chunk| {
        let body = StringPage::from_values(chunk).encode();
        let len = body.len() as u64;
        Ok((body, chunk.len() as u32, len))
    });
    let (file_size, raw_size) = write_pages(path, CodecId::Raw, ValueKind::Bytes, vpp, values.len() as u64, pages)?;
    Ok(CatalogEntry {
        table: table.to_string(),
        column: column.to_string(),
        kind: ValueKind::Bytes,
        codec: CodecId::Raw,
        path: path.to_path_buf(),
        values_per_page: vpp,
        total_values: values.len() as u64,
        compressed_file_size: file_size,
        uncompressed_size: raw_size,
    })
}

/// An open, immutable column file. Reads are positional and may run concurrently.
#[derive(Debug)]
pub struct ColumnFile {
    path: PathBuf,
    file: File,
    header: ColumnFileHeader,
    index: Vec<PageIndexEntry>,
}

impl ColumnFile {
    pub fn open(path: impl AsRef<Path>) -> Result<ColumnFile> {
        let path = path.as_ref();
        let mut file = OpenOptions::new().read(true).open(path).map_err(StorageError::io(path))?;
        let file_len = file.metadata().map_err(StorageError::io(path))?.len();
        let corrupt = |reason: String| StorageError::Corrupt { path: path.into(), reason };
        if file_len < HEADER_LEN {
            return Err(corrupt(format!("file is {file_len} bytes, shorter than the header")));
        }
        let mut head = [0u8; HEADER_LEN as usize];
        file.read_exact(&mut head).map_err(StorageError::io(path))?;
        let header = ColumnFileHeader::decode(&head, path)?;
        if header.values_per_page == 0 {
            return Err(corrupt("values_per_page is zero".into()));
        }
        let data_start = HEADER_LEN + INDEX_ENTRY_LEN * u64::from(header.total_pages);
        if file_len < data_start {
            return Err(corrupt("page index truncated".into()));
        }
        let mut raw_index = vec![0u8; (data_start - HEADER_LEN) as usize];
        file.read_exact(&mut raw_index).map_err(StorageError::io(path))?;
        let index: Vec<PageIndexEntry> = raw_index
            .chunks_exact(INDEX_ENTRY_LEN as usize)
            .map(|c| PageIndexEntry {
                offset: u64::from_le_bytes(c[0..8].try_into().unwrap()),
                compressed_len: u32::from_le_bytes(c[8..12].try_into().unwrap()),
                value_count: u32::from_le_bytes(c[12..16].try_into().unwrap()),
            })
            .collect();

        let mut expected_offset = data_start;
        let mut counted = 0u64;
        for (i, e) in index.iter().enumerate() {
            if e.offset < expected_offset {
                return Err(corrupt(format!("page {i} overlaps its predecessor")));
            }
            let full = i + 1 < index.len();
            if (full && e.value_count != header.values_per_page)
                || e.value_count == 0
                || e.value_count > header.values_per_page
            {
                return Err(corrupt(format!("page {i} holds {} values", e.value_count)));
            }
            expected_offset = e.end();
            counted += u64::from(e.value_count);
        }
        if counted != header.total_values {
            return Err(corrupt(format!("pages hold {counted} values, header says {}", header.total_values)));
        }
        if expected_offset > file_len {
            return Err(corrupt("last page extends past end of file".into()));
        }
        Ok(ColumnFile { path: path.to_path_buf(), file, header, index })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn header(&self) -> &ColumnFileHeader {
        &self.header
    }

    pub fn page_index(&self) -> &[PageIndexEntry] {
        &self.index
    }

    pub fn total_pages(&self) -> u32 {
        self.header.total_pages
    }

    pub fn page_entry(&self, page_no: u32) -> Result<PageIndexEntry> {
        self.index
            .get(page_no as usize)
            .copied()
            .ok_or(StorageError::PageOutOfRange { page: page_no, total_pages: self.header.total_pages })
    }

    /// Reads one page's extent with a single positional read.
    pub fn read_page_bytes(&self, page_no: u32) -> Result<CompressedPayload> {
        let entry = self.page_entry(page_no)?;
        let mut bytes = vec![0u8; entry.compressed_len as usize];
        self.file.read_exact_at(&mut bytes, entry.offset).map_err(StorageError::io(&self.path))?;
        Ok(CompressedPayload { codec: self.header.codec, value_count: entry.value_count, bytes })
    }

    /// Turns a page body read from this file into values.
    pub fn decode_page(&self, payload: &CompressedPayload) -> Result<PageData> {
        match self.header.kind {
            ValueKind::U32 => Ok(PageData::U32(payload.decompress()?)),
            ValueKind::Bytes => StringPage::decode(&payload.bytes, payload.value_count as usize)
                .map(PageData::Bytes)
                .map_err(|reason| StorageError::Corrupt { path: self.path.clone(), reason }),
        }
    }

    pub fn read_page(&self, page_no: u32) -> Result<PageData> {
        self.decode_page(&self.read_page_bytes(page_no)?)
    }

    /// All values of a u32 column, page by page.
    pub fn read_all_u32(&self) -> Result<Vec<u32>> {
        let mut out = Vec::with_capacity(self.header.total_values as usize);
        for p in 0..self.total_pages() {
            match self.read_page(p)? {
                PageData::U32(v) => out.extend_from_slice(&v),
                PageData::Bytes(_) => {
                    return Err(StorageError::Corrupt {
                        path: self.path.clone(),
                        reason: "byte column read as u32".into(),
                    })
                }
            }
        }
        Ok(out)
    }

    pub fn read_all_bytes(&self) -> Result<Vec<Vec<u8>>> {
        let mut out = Vec::with_capacity(self.header.total_values as usize);
        for p in 0..self.total_pages() {
            match self.read_page(p)? {
                PageData::Bytes(page) => out.extend(page.iter().map(<[u8]>::to_vec)),
                PageData::U32(_) => {
                    return Err(StorageError::Corrupt {
                        path: self.path.clone(),
                        reason: "u32 column read as bytes".into(),
                    })
                }
            }
        }
        Ok(out)
    }

    /// Asks the kernel to drop cached pages of this file. Returns false when unsupported.
    pub fn drop_os_cache(&self) -> bool {
        #[cfg(target_os = "linux")]
        {
            use std::os::fd::AsRawFd;
            // SAFETY: the descriptor is owned by `self.file` and stays open for the call.
            let rc = unsafe { libc::posix_fadvise(self.file.as_raw_fd(), 0, 0, libc::POSIX_FADV_DONTNEED) };
            rc == 0
        }
        #[cfg(not(target_os = "linux"))]
        {
            false
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn string_page_roundtrip() {
        let page = StringPage::from_values(&["ASIA", "", "UNITED KI1"]);
        let bytes = page.encode();
        let back = StringPage::decode(&bytes, 3).unwrap();
        assert_eq!(back, page);
        assert_eq!(back.get(2), b"UNITED KI1");
        assert!(StringPage::decode(&bytes, 2).is_err());
        assert!(StringPage::decode(&bytes[..bytes.len() - 1], 3).is_err());
    }

    #[test]
    fn rejects_bad_page_size() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.pcf");
        assert!(matches!(write_column("t", "c", &[1], CodecId::Raw, 0, &p), Err(StorageError::InvalidPageSize(0))));
        assert!(matches!(write_column("t", "c", &[1], CodecId::Raw, 6, &p), Err(StorageError::InvalidPageSize(6))));
    }

    #[test]
    fn open_rejects_garbage() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.pcf");
        fs::write(&p, b"NOPE and more bytes than a header").unwrap();
        assert!(matches!(ColumnFile::open(&p), Err(StorageError::BadMagic { .. })));
        fs::write(&p, b"PCF1").unwrap();
        assert!(matches!(ColumnFile::open(&p), Err(StorageError::Corrupt { .. })));
    }

    #[test]
    fn open_rejects_truncated_pages() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.pcf");
        write_column("t", "c", &[7; 100], CodecId::Raw, 64, &p).unwrap();
        let bytes = fs::read(&p).unwrap();
        fs::write(&p, &bytes[..bytes.len() - 1]).unwrap();
        let err = ColumnFile::open(&p).unwrap_err();
        assert!(err.to_string().contains("past end of file"), "{err}");
    }
}
