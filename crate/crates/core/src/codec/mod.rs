//! Integer page codecs.
//!
//! Every codec turns a page of `u32` values into an opaque byte body and back.
//! The block codecs (`PFor`, `FastPFor128`, `BinaryPacking128`) work on
//! sub-blocks of [`BLOCK_LEN`] values; a trailing partial sub-block is padded
//! with zeros and the caller-supplied value count trims it on decode.

mod binpack;
pub(crate) mod bitpack;
mod heavy;
mod pfor;
mod vbyte;

use std::fmt;
use std::str::FromStr;
use std::sync::atomic::{AtomicBool, Ordering};

use thiserror::Error;

pub use bitpack::{BLOCK_LEN, LANE_COUNT};

/// Identifies a page codec. The discriminant is the on-disk wire byte.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[repr(u8)]
pub enum CodecId {
    Raw = 0,
    VByte = 1,
    PFor = 2,
    FastPFor128 = 3,
    BinaryPacking128 = 4,
    Brotli = 5,
}

impl CodecId {
    pub const ALL: [CodecId; 6] =
        [CodecId::Raw, CodecId::VByte, CodecId::PFor, CodecId::FastPFor128, CodecId::BinaryPacking128, CodecId::Brotli];

    pub fn wire_byte(self) -> u8 {
        self as u8
    }

    pub fn from_wire_byte(byte: u8) -> Result<CodecId, CodecError> {
        CodecId::ALL.get(usize::from(byte)).copied().ok_or(CodecError::UnknownCodecByte(byte))
    }

    /// Lowercase name used by the catalog and the command line.
    pub fn name(self) -> &'static str {
        match self {
            CodecId::Raw => "raw",
            CodecId::VByte => "vbyte",
            CodecId::PFor => "pfor",
            CodecId::FastPFor128 => "fastpfor128",
            CodecId::BinaryPacking128 => "binpack128",
            CodecId::Brotli => "brotli",
        }
    }

    /// Name of the algorithm actually behind the codec slot, for reports.
    pub fn algorithm(self) -> &'static str {
        match self {
            CodecId::Raw => "uncompressed little-endian u32",
            CodecId::VByte => "VByte (base-128 varint)",
            CodecId::PFor => "PFor (scalar, 128-value blocks)",
            CodecId::FastPFor128 => "FastPFor128 (4-lane interleaved, packed exceptions)",
            CodecId::BinaryPacking128 => "BinaryPacking128 (4-lane interleaved)",
            CodecId::Brotli => "Brotli (quality 11, window 22)",
        }
    }

    pub fn is_lightweight(self) -> bool {
        !matches!(self, CodecId::Raw | CodecId::Brotli)
    }
}

impl fmt::Display for CodecId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CodecId {
    type Err = CodecError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        CodecId::ALL.into_iter().find(|c| c.name() == s).ok_or_else(|| CodecError::UnknownCodecName(s.to_string()))
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CodecError {
    #[error("unknown codec byte {0}")]
    UnknownCodecByte(u8),
    #[error("unknown codec name {0:?} (valid: raw, vbyte, pfor, fastpfor128, binpack128, brotli)")]
    UnknownCodecName(String),
    #[error("{codec} decode error at byte {offset}: {reason}")]
    Decode { codec: CodecId, offset: usize, reason: String },
    #[error("{codec} compressor failed: {message}")]
    Compressor { codec: CodecId, message: String },
}

impl CodecError {
    pub(crate) fn decode(codec: CodecId, offset: usize, reason: impl Into<String>) -> Self {
        CodecError::Decode { codec, offset, reason: reason.into() }
    }
}

/// Serialized body of one disk page.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CompressedPayload {
    pub codec: CodecId,
    pub value_count: u32,
    pub bytes: Vec<u8>,
}

impl CompressedPayload {
    pub fn decompress(&self) -> Result<Vec<u32>, CodecError> {
        decompress_values(self.codec, &self.bytes, self.value_count as usize)
    }
}

/// Which unpacking routine the interleaved codecs use. Both read the same bytes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DecodePath {
    Scalar,
    Vectorized,
}

static VECTORIZED_DEFAULT: AtomicBool = AtomicBool::new(true);

/// Process-wide decode path used by [`decompress_values`].
pub fn set_default_decode_path(path: DecodePath) {
    VECTORIZED_DEFAULT.store(path == DecodePath::Vectorized, Ordering::Relaxed);
}

pub fn default_decode_path() -> DecodePath {
    if VECTORIZED_DEFAULT.load(Ordering::Relaxed) {
        DecodePath::Vectorized
    } else {
        DecodePath::Scalar
    }
}

pub fn compress_values(codec: CodecId, values: &[u32]) -> Result<CompressedPayload, CodecError> {
    let bytes = match codec {
        CodecId::Raw => values.iter().flat_map(|v| v.to_le_bytes()).collect(),
        CodecId::VByte => vbyte::encode(values),
        CodecId::PFor => pfor::encode_pfor(values),
        CodecId::FastPFor128 => pfor::encode_fastpfor(values),
        CodecId::BinaryPacking128 => binpack::encode(values),
        CodecId::Brotli => heavy::encode(values)?,
    };
    Ok(CompressedPayload {
        codec,
        value_count: u32::try_from(values.len()).expect("page value count exceeds u32"),
        bytes,
    })
}

pub fn decompress_values(codec: CodecId, bytes: &[u8], value_count: usize) -> Result<Vec<u32>, CodecError> {
    decompress_values_with(codec, bytes, value_count, default_decode_path())
}

pub fn decompress_values_with(
    codec: CodecId,
    bytes: &[u8],
    value_count: usize,
    path: DecodePath,
) -> Result<Vec<u32>, CodecError> {
    match codec {
        CodecId::Raw => decode_raw(bytes, value_count),
        CodecId::VByte => vbyte::decode(bytes, value_count),
        CodecId::PFor => pfor::decode_pfor(bytes, value_count),
        CodecId::FastPFor128 => pfor::decode_fastpfor(bytes, value_count, path),
        CodecId::BinaryPacking128 => binpack::decode(bytes, value_count, path),
        CodecId::Brotli => heavy::decode(bytes, value_count),
    }
}

fn decode_raw(bytes: &[u8], value_count: usize) -> Result<Vec<u32>, CodecError> {
    let expected =
        value_count.checked_mul(4).ok_or_else(|| CodecError::decode(CodecId::Raw, 0, "value count overflows"))?;
    if bytes.len() != expected {
        return Err(CodecError::decode(
            CodecId::Raw,
            bytes.len().min(expected),
            format!("expected {expected} bytes, found {}", bytes.len()),
        ));
    }
    Ok(bytes.chunks_exact(4).map(|c| u32::from_le_bytes([c[0], c[1], c[2], c[3]])).collect())
}

/// Upper bound on the size of `compress_values(codec, values)` for `value_count` values.
pub fn compressed_size_bound(codec: CodecId, value_count: usize) -> usize {
    let blocks = value_count.div_ceil(BLOCK_LEN);
    match codec {
        CodecId::Raw => 4 * value_count,
        CodecId::VByte => 5 * value_count,
        CodecId::BinaryPacking128 => blocks * binpack::MAX_BLOCK_BYTES,
        CodecId::PFor | CodecId::FastPFor128 => blocks * pfor::MAX_BLOCK_BYTES,
        CodecId::Brotli => heavy::size_bound(4 * value_count),
    }
}
