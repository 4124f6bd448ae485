//! Compressed columnar storage with an I/O-RAM buffer manager.
//!
//! Column pages are compressed on disk and decompressed by dedicated I/O
//! threads as they enter the buffer pool; query operators only ever see
//! decompressed [`buffer::ValBlock`]s.

pub mod buffer;
pub mod codec;
pub mod exec;
pub mod storage;
