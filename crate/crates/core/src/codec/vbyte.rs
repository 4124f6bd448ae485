//! Little-endian base-128 varint: seven data bits per byte, high bit set on
//! every byte except the last of a value.

use super::{CodecError, CodecId};

pub(super) fn encode(values: &[u32]) -> Vec<u8> {
    let mut out = Vec::with_capacity(values.len() * 2);
    for &v in values {
        let mut v = v;
        while v >= 0x80 {
            out.push((v as u8 & 0x7f) | 0x80);
            v >>= 7;
        }
        out.push(v as u8);
    }
    out
}

pub(super) fn decode(bytes: &[u8], value_count: usize) -> Result<Vec<u32>, CodecError> {
    let mut out = Vec::with_capacity(value_count);
    let mut pos = 0usize;
    for _ in 0..value_count {
        let start = pos;
        let mut value = 0u32;
        let mut shift = 0u32;
        loop {
            let Some(&byte) = bytes.get(pos) else {
                return Err(CodecError::decode(CodecId::VByte, pos, "truncated value"));
            };
            pos += 1;
            let payload = u32::from(byte & 0x7f);
            if shift == 28 && (payload > 0x0f || byte & 0x80 != 0) {
                return Err(CodecError::decode(CodecId::VByte, start, "value exceeds 32 bits"));
            }
            value |= payload << shift;
            if byte & 0x80 == 0 {
                break;
            }
            shift += 7;
        }
        out.push(value);
    }
    if pos != bytes.len() {
        return Err(CodecError::decode(CodecId::VByte, pos, "trailing bytes after last value"));
    }
    Ok(out)
}
