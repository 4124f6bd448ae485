//! Heavy-weight codec: Brotli at its default settings over the page's
//! little-endian byte image.

use std::io::Read;

use brotli::enc::BrotliEncoderParams;

use super::{CodecError, CodecId};

pub(super) fn encode(values: &[u32]) -> Result<Vec<u8>, CodecError> {
    let raw: Vec<u8> = values.iter().flat_map(|v| v.to_le_bytes()).collect();
    let params = BrotliEncoderParams::default();
    let mut out = Vec::with_capacity(raw.len() / 2 + 16);
    brotli::enc::BrotliCompress(&mut raw.as_slice(), &mut out, &params)
        .map_err(|e| CodecError::Compressor { codec: CodecId::Brotli, message: e.to_string() })?;
    Ok(out)
}

pub(super) fn decode(bytes: &[u8], value_count: usize) -> Result<Vec<u32>, CodecError> {
    let expected = value_count * 4;
    let mut raw = Vec::with_capacity(expected);
    // One extra byte lets an oversized stream be detected without inflating it fully.
    brotli::Decompressor::new(bytes, 4096)
        .take(expected as u64 + 1)
        .read_to_end(&mut raw)
        .map_err(|e| CodecError::decode(CodecId::Brotli, 0, e.to_string()))?;
    if raw.len() != expected {
        return Err(CodecError::decode(
            CodecId::Brotli,
            bytes.len(),
            format!("stream inflates to {} bytes, expected {expected}", raw.len()),
        ));
    }
    Ok(raw.chunks_exact(4).map(|c| u32::from_le_bytes([c[0], c[1], c[2], c[3]])).collect())
}

/// Worst case for incompressible input: the data stored uncompressed plus
/// per-16KiB meta-block headers.
pub(super) fn size_bound(input_len: usize) -> usize {
    if input_len == 0 {
        return 2;
    }
    let large_blocks = input_len >> 14;
    input_len + 2 + 4 * large_blocks + 3 + 1
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn corrupt_stream_is_an_error() {
        let mut bytes = encode(&(0..1000).collect::<Vec<_>>()).unwrap();
        let mid = bytes.len() / 2;
        bytes.truncate(mid);
        assert!(decode(&bytes, 1000).is_err());
        assert!(decode(&[0xff, 0xff, 0xff], 3).is_err());
    }

    #[test]
    fn wrong_count_is_an_error() {
        let bytes = encode(&[1, 2, 3]).unwrap();
        assert!(decode(&bytes, 2).is_err());
        assert!(decode(&bytes, 4).is_err());
    }
}
