//! Fixed-width bit packing primitives shared by the block codecs.
//!
//! Sequential packing writes values LSB-first into a continuous bit stream.
//! Interleaved packing splits a 128-value block into 4 lanes (value `i` goes
//! to lane `i % 4`); each lane is packed into `width` little-endian 32-bit
//! words and word `k` of lane `l` is stored at word index `4 * k + l`, so one
//! 16-byte load yields the same word of every lane.

use super::DecodePath;

pub const BLOCK_LEN: usize = 128;
pub const LANE_COUNT: usize = 4;
const LANE_LEN: usize = BLOCK_LEN / LANE_COUNT;

#[inline]
pub(crate) fn bit_width(v: u32) -> u32 {
    32 - v.leading_zeros()
}

#[inline]
pub(crate) fn low_mask(width: u32) -> u32 {
    if width >= 32 {
        u32::MAX
    } else {
        (1u32 << width) - 1
    }
}

/// Bytes occupied by `count` values sequentially packed at `width` bits.
#[inline]
pub(crate) fn packed_len(count: usize, width: u32) -> usize {
    (count * width as usize).div_ceil(8)
}

/// Bytes occupied by one interleaved 128-value block at `width` bits.
#[inline]
pub(crate) fn interleaved_len(width: u32) -> usize {
    LANE_COUNT * 4 * width as usize
}

/// Copies `chunk` into a zero-padded full block.
pub(crate) fn padded_block(chunk: &[u32]) -> [u32; BLOCK_LEN] {
    let mut block = [0u32; BLOCK_LEN];
    block[..chunk.len()].copy_from_slice(chunk);
    block
}

pub(crate) fn max_width(values: &[u32]) -> u32 {
    bit_width(values.iter().fold(0, |acc, &v| acc | v))
}

pub(crate) fn pack_sequential(values: &[u32], width: u32, out: &mut Vec<u8>) {
    if width == 0 {
        return;
    }
    let mask = u64::from(low_mask(width));
    let mut acc = 0u64;
    let mut filled = 0u32;
    for &v in values {
        acc |= (u64::from(v) & mask) << filled;
        filled += width;
        while filled >= 8 {
            out.push(acc as u8);
            acc >>= 8;
            filled -= 8;
        }
    }
    if filled > 0 {
        out.push(acc as u8);
    }
}

/// Fills `out` from a sequential bit stream. `input` must hold at least
/// `packed_len(out.len(), width)` bytes.
pub(crate) fn unpack_sequential(input: &[u8], width: u32, out: &mut [u32]) {
    if width == 0 {
        out.fill(0);
        return;
    }
    let mask = u64::from(low_mask(width));
    let mut acc = 0u64;
    let mut avail = 0u32;
    let mut bytes = input.iter();
    for slot in out.iter_mut() {
        while avail < width {
            acc |= u64::from(*bytes.next().expect("caller checked packed length")) << avail;
            avail += 8;
        }
        *slot = (acc & mask) as u32;
        acc >>= width;
        avail -= width;
    }
}

pub(crate) fn pack_interleaved(block: &[u32; BLOCK_LEN], width: u32, out: &mut Vec<u8>) {
    if width == 0 {
        return;
    }
    let start = out.len();
    out.resize(start + interleaved_len(width), 0);
    let words = &mut out[start..];
    let mask = u64::from(low_mask(width));
    for lane in 0..LANE_COUNT {
        let mut word = 0usize;
        let mut acc = 0u64;
        let mut filled = 0u32;
        for m in 0..LANE_LEN {
            acc |= (u64::from(block[m * LANE_COUNT + lane]) & mask) << filled;
            filled += width;
            if filled >= 32 {
                let at = (word * LANE_COUNT + lane) * 4;
                words[at..at + 4].copy_from_slice(&(acc as u32).to_le_bytes());
                word += 1;
                acc >>= 32;
                filled -= 32;
            }
        }
        debug_assert_eq!(filled, 0);
    }
}

/// Unpacks one interleaved block. `input` must hold `interleaved_len(width)` bytes.
pub(crate) fn unpack_interleaved(input: &[u8], width: u32, out: &mut [u32; BLOCK_LEN], path: DecodePath) {
    assert!(input.len() >= interleaved_len(width));
    if width == 0 {
        out.fill(0);
        return;
    }
    match path {
        DecodePath::Scalar => unpack_interleaved_scalar(input, width, out),
        DecodePath::Vectorized => unpack_interleaved_vectorized(input, width, out),
    }
}

#[inline]
fn read_word(input: &[u8], index: usize) -> u32 {
    let at = index * 4;
    u32::from_le_bytes([input[at], input[at + 1], input[at + 2], input[at + 3]])
}

fn unpack_interleaved_scalar(input: &[u8], width: u32, out: &mut [u32; BLOCK_LEN]) {
    let mask = u64::from(low_mask(width));
    for lane in 0..LANE_COUNT {
        let mut word = 0usize;
        let mut acc = 0u64;
        let mut avail = 0u32;
        for m in 0..LANE_LEN {
            if avail < width {
                acc |= u64::from(read_word(input, word * LANE_COUNT + lane)) << avail;
                word += 1;
                avail += 32;
            }
            out[m * LANE_COUNT + lane] = (acc & mask) as u32;
            acc >>= width;
            avail -= width;
        }
    }
}

#[cfg(target_arch = "x86_64")]
fn unpack_interleaved_vectorized(input: &[u8], width: u32, out: &mut [u32; BLOCK_LEN]) {
    // SSE2 is part of the x86_64 baseline.
    unsafe { sse2::unpack(input, width, out) }
}

#[cfg(target_arch = "x86_64")]
mod sse2 {
    use super::{low_mask, BLOCK_LEN, LANE_COUNT, LANE_LEN};
    use std::arch::x86_64::*;

    /// Decodes all four lanes at once: step `m` yields values `4m..4m+4`.
    ///
    /// # Safety
    /// `input` must hold at least `16 * width` bytes and `1 <= width <= 32`.
    pub(super) unsafe fn unpack(input: &[u8], width: u32, out: &mut [u32; BLOCK_LEN]) {
        let load = |k: u32| _mm_loadu_si128(input.as_ptr().add(k as usize * 16) as *const __m128i);
        let mask = _mm_set1_epi32(low_mask(width) as i32);
        let mut word = 0u32;
        let mut current = load(0);
        let mut shift = 0u32;
        for m in 0..LANE_LEN {
            let mut v = _mm_srl_epi32(current, _mm_cvtsi32_si128(shift as i32));
            shift += width;
            if shift >= 32 {
                word += 1;
                shift -= 32;
                if word < width {
                    current = load(word);
                    if shift > 0 {
                        let spill = _mm_sll_epi32(current, _mm_cvtsi32_si128((width - shift) as i32));
                        v = _mm_or_si128(v, spill);
                    }
                }
            }
            _mm_storeu_si128(out.as_mut_ptr().add(m * LANE_COUNT) as *mut __m128i, _mm_and_si128(v, mask));
        }
    }
}

/// Portable lane-parallel variant for targets without SSE2.
#[cfg(not(target_arch = "x86_64"))]
fn unpack_interleaved_vectorized(input: &[u8], width: u32, out: &mut [u32; BLOCK_LEN]) {
    let mask = low_mask(width);
    let load = |k: u32| -> [u32; LANE_COUNT] { std::array::from_fn(|l| read_word(input, k as usize * LANE_COUNT + l)) };
    let mut word = 0u32;
    let mut current = load(0);
    let mut shift = 0u32;
    for m in 0..LANE_LEN {
        let mut v: [u32; LANE_COUNT] = current.map(|w| w >> shift);
        shift += width;
        if shift >= 32 {
            word += 1;
            shift -= 32;
            if word < width {
                current = load(word);
                if shift > 0 {
                    for l in 0..LANE_COUNT {
                        v[l] |= current[l] << (width - shift);
                    }
                }
            }
        }
        for l in 0..LANE_COUNT {
            out[m * LANE_COUNT + l] = v[l] & mask;
        }
    }
}
