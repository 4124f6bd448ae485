//! Patched frame-of-reference codecs.
//!
//! Both variants pick, per 128-value block, the base width `w` that minimizes
//! the encoded block size; values wider than `w` become exceptions.
//!
//! Block layout, `PFor`:
//! `[w][128 values, low w bits, sequential][count][count x (position, u32 LE value)]`
//!
//! Block layout, `FastPFor128`:
//! `[w][128 values, low w bits, interleaved][count][count x position][count x high (32-w) bits, sequential]`

use super::bitpack::{self, BLOCK_LEN};
use super::{CodecError, CodecId, DecodePath};

pub(super) const MAX_BLOCK_BYTES: usize = 2 + 16 * 32;

/// Histogram of value bit widths: `hist[b]` counts values needing exactly `b` bits.
fn width_histogram(block: &[u32; BLOCK_LEN]) -> [usize; 33] {
    let mut hist = [0usize; 33];
    for &v in block {
        hist[bitpack::bit_width(v) as usize] += 1;
    }
    hist
}

/// Exception count for every candidate width: `exceptions[w]` = values wider than `w`.
fn exception_counts(hist: &[usize; 33]) -> [usize; 33] {
    let mut exceptions = [0usize; 33];
    let mut wider = 0;
    for w in (0..=32).rev() {
        exceptions[w] = wider;
        wider += hist[w];
    }
    exceptions
}

pub(super) fn pfor_block_size(width: u32, exceptions: usize) -> usize {
    2 + 16 * width as usize + exceptions * 5
}

pub(super) fn fastpfor_block_size(width: u32, exceptions: usize) -> usize {
    2 + 16 * width as usize + exceptions + bitpack::packed_len(exceptions, 32 - width)
}

fn best_width(block: &[u32; BLOCK_LEN], cost: fn(u32, usize) -> usize) -> u32 {
    let exceptions = exception_counts(&width_histogram(block));
    (0..=32u32).min_by_key(|&w| cost(w, exceptions[w as usize])).expect("non-empty range")
}

pub(super) fn encode_pfor(values: &[u32]) -> Vec<u8> {
    let mut out = Vec::new();
    let mut low = [0u32; BLOCK_LEN];
    for chunk in values.chunks(BLOCK_LEN) {
        let block = bitpack::padded_block(chunk);
        let width = best_width(&block, pfor_block_size);
        let mask = bitpack::low_mask(width);
        for (l, &v) in low.iter_mut().zip(&block) {
            *l = v & mask;
        }
        out.push(width as u8);
        bitpack::pack_sequential(&low, width, &mut out);
        let count_at = out.len();
        out.push(0);
        let mut count = 0u8;
        for (i, &v) in block.iter().enumerate() {
            if bitpack::bit_width(v) > width {
                out.push(i as u8);
                out.extend_from_slice(&v.to_le_bytes());
                count += 1;
            }
        }
        out[count_at] = count;
    }
    out
}

pub(super) fn encode_fastpfor(values: &[u32]) -> Vec<u8> {
    let mut out = Vec::new();
    let mut highs = Vec::with_capacity(BLOCK_LEN);
    for chunk in values.chunks(BLOCK_LEN) {
        let mut block = bitpack::padded_block(chunk);
        let width = best_width(&block, fastpfor_block_size);
        highs.clear();
        let mut positions = Vec::new();
        if width < 32 {
            for (i, v) in block.iter_mut().enumerate() {
                if bitpack::bit_width(*v) > width {
                    positions.push(i as u8);
                    highs.push(*v >> width);
                    *v &= bitpack::low_mask(width);
                }
            }
        }
        out.push(width as u8);
        bitpack::pack_interleaved(&block, width, &mut out);
        out.push(positions.len() as u8);
        out.extend_from_slice(&positions);
        bitpack::pack_sequential(&highs, 32 - width, &mut out);
    }
    out
}

struct Cursor<'a> {
    codec: CodecId,
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn byte(&mut self, what: &str) -> Result<u8, CodecError> {
        let b = *self
            .bytes
            .get(self.pos)
            .ok_or_else(|| CodecError::decode(self.codec, self.pos, format!("missing {what}")))?;
        self.pos += 1;
        Ok(b)
    }

    fn take(&mut self, len: usize, what: &str) -> Result<&'a [u8], CodecError> {
        let slice = self
            .bytes
            .get(self.pos..self.pos + len)
            .ok_or_else(|| CodecError::decode(self.codec, self.pos, format!("truncated {what}")))?;
        self.pos += len;
        Ok(slice)
    }

    fn width(&mut self) -> Result<u32, CodecError> {
        let at = self.pos;
        let w = u32::from(self.byte("block header")?);
        if w > 32 {
            return Err(CodecError::decode(self.codec, at, format!("bit width {w} > 32")));
        }
        Ok(w)
    }

    fn exception_count(&mut self) -> Result<usize, CodecError> {
        let at = self.pos;
        let c = usize::from(self.byte("exception count")?);
        if c > BLOCK_LEN {
            return Err(CodecError::decode(self.codec, at, format!("{c} exceptions in a {BLOCK_LEN}-value block")));
        }
        Ok(c)
    }

    fn position(&mut self) -> Result<usize, CodecError> {
        let at = self.pos;
        let p = usize::from(self.byte("exception position")?);
        if p >= BLOCK_LEN {
            return Err(CodecError::decode(self.codec, at, format!("exception position {p} out of block")));
        }
        Ok(p)
    }

    fn finish(self, mut out: Vec<u32>, value_count: usize) -> Result<Vec<u32>, CodecError> {
        if self.pos != self.bytes.len() {
            return Err(CodecError::decode(self.codec, self.pos, "trailing bytes after last block"));
        }
        out.truncate(value_count);
        Ok(out)
    }
}

pub(super) fn decode_pfor(bytes: &[u8], value_count: usize) -> Result<Vec<u32>, CodecError> {
    let blocks = value_count.div_ceil(BLOCK_LEN);
    let mut out = vec![0u32; blocks * BLOCK_LEN];
    let mut cur = Cursor { codec: CodecId::PFor, bytes, pos: 0 };
    for block in out.chunks_exact_mut(BLOCK_LEN) {
        let width = cur.width()?;
        let packed = cur.take(bitpack::packed_len(BLOCK_LEN, width), "packed values")?;
        bitpack::unpack_sequential(packed, width, block);
        for _ in 0..cur.exception_count()? {
            let p = cur.position()?;
            let v = cur.take(4, "exception value")?;
            block[p] = u32::from_le_bytes([v[0], v[1], v[2], v[3]]);
        }
    }
    cur.finish(out, value_count)
}

pub(super) fn decode_fastpfor(bytes: &[u8], value_count: usize, path: DecodePath) -> Result<Vec<u32>, CodecError> {
    let blocks = value_count.div_ceil(BLOCK_LEN);
    let mut out = Vec::with_capacity(blocks * BLOCK_LEN);
    let mut cur = Cursor { codec: CodecId::FastPFor128, bytes, pos: 0 };
    let mut block = [0u32; BLOCK_LEN];
    let mut highs = [0u32; BLOCK_LEN];
    for _ in 0..blocks {
        let width = cur.width()?;
        let packed = cur.take(bitpack::interleaved_len(width), "packed values")?;
        bitpack::unpack_interleaved(packed, width, &mut block, path);
        let count = cur.exception_count()?;
        if count > 0 {
            if width == 32 {
                return Err(CodecError::decode(cur.codec, cur.pos - 1, "exceptions at full width"));
            }
            let positions_at = cur.pos;
            cur.take(count, "exception positions")?;
            let high_bits = cur.take(bitpack::packed_len(count, 32 - width), "exception bits")?;
            bitpack::unpack_sequential(high_bits, 32 - width, &mut highs[..count]);
            for (i, &high) in highs[..count].iter().enumerate() {
                let p = usize::from(bytes[positions_at + i]);
                if p >= BLOCK_LEN {
                    return Err(CodecError::decode(
                        cur.codec,
                        positions_at + i,
                        format!("exception position {p} out of block"),
                    ));
                }
                block[p] |= high << width;
            }
        }
        out.extend_from_slice(&block);
    }
    cur.finish(out, value_count)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn width_selection_prefers_exceptions_for_outliers() {
        let mut block = [3u32; BLOCK_LEN];
        block[17] = 1 << 30;
        assert_eq!(best_width(&block, pfor_block_size), 2);
        assert_eq!(best_width(&block, fastpfor_block_size), 2);
    }

    #[test]
    fn dense_wide_values_use_full_width_without_exceptions() {
        let block: [u32; BLOCK_LEN] = std::array::from_fn(|i| u32::MAX - i as u32);
        assert_eq!(best_width(&block, pfor_block_size), 32);
        let bytes = encode_fastpfor(&block);
        assert_eq!(bytes.len(), MAX_BLOCK_BYTES);
        assert_eq!(decode_fastpfor(&bytes, BLOCK_LEN, DecodePath::Scalar).unwrap(), block);
    }

    #[test]
    fn bad_exception_position_is_rejected() {
        let mut values = vec![1u32; BLOCK_LEN];
        values[5] = 1 << 20;
        let mut bytes = encode_pfor(&values);
        // [w=1][16 packed][count=1][pos]...
        let pos_at = 1 + 16 + 1;
        assert_eq!(bytes[pos_at], 5);
        bytes[pos_at] = 200;
        let err = decode_pfor(&bytes, BLOCK_LEN).unwrap_err();
        assert_eq!(
            err,
            CodecError::Decode {
                codec: CodecId::PFor,
                offset: pos_at,
                reason: "exception position 200 out of block".into()
            }
        );
    }
}
