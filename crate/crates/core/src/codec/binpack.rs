//! BinaryPacking128: per 128-value block, one width byte followed by the
//! block packed at that width in the 4-lane interleaved layout.

use super::bitpack::{self, BLOCK_LEN};
use super::{CodecError, CodecId, DecodePath};

pub(super) const MAX_BLOCK_BYTES: usize = 1 + 16 * 32;

pub(super) fn encode(values: &[u32]) -> Vec<u8> {
    let mut out = Vec::new();
    for chunk in values.chunks(BLOCK_LEN) {
        let block = bitpack::padded_block(chunk);
        let width = bitpack::max_width(&block);
        out.push(width as u8);
        bitpack::pack_interleaved(&block, width, &mut out);
    }
    out
}

pub(super) fn decode(bytes: &[u8], value_count: usize, path: DecodePath) -> Result<Vec<u32>, CodecError> {
    let blocks = value_count.div_ceil(BLOCK_LEN);
    let mut out = Vec::with_capacity(blocks * BLOCK_LEN);
    let mut block = [0u32; BLOCK_LEN];
    let mut pos = 0usize;
    for _ in 0..blocks {
        let width =
            *bytes.get(pos).ok_or_else(|| CodecError::decode(CodecId::BinaryPacking128, pos, "missing block header"))?
                as u32;
        if width > 32 {
            return Err(CodecError::decode(CodecId::BinaryPacking128, pos, format!("bit width {width} > 32")));
        }
        pos += 1;
        let len = bitpack::interleaved_len(width);
        let body = bytes
            .get(pos..pos + len)
            .ok_or_else(|| CodecError::decode(CodecId::BinaryPacking128, pos, "truncated block"))?;
        bitpack::unpack_interleaved(body, width, &mut block, path);
        out.extend_from_slice(&block);
        pos += len;
    }
    if pos != bytes.len() {
        return Err(CodecError::decode(CodecId::BinaryPacking128, pos, "trailing bytes after last block"));
    }
    out.truncate(value_count);
    Ok(out)
}
