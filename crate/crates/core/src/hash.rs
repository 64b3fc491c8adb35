//! Keyed hashing of byte items into fixed-width digests.
//!
//! Digests are returned right-aligned in a `u64`. Bit index 0 of a digest is
//! its most significant bit, so for an `L`-bit digest `h`, bit `k` is
//! `(h >> (L - 1 - k)) & 1`.

use mur3::{murmurhash3_x64_128, murmurhash3_x86_32};

/// Widest digest a sketch register can hold.
pub const MAX_HASH_BITS: u32 = 64;

/// MurmurHash3 of `item` truncated to its `bits` most significant bits.
///
/// Widths up to 32 use the x86 32-bit variant, wider ones the first half of
/// the x64 128-bit variant.
#[inline]
pub fn keyed_hash(item: &[u8], seed: u32, bits: u32) -> u64 {
    debug_assert!((1..=MAX_HASH_BITS).contains(&bits));
    if bits <= 32 {
        (murmurhash3_x86_32(item, seed) as u64) >> (32 - bits)
    } else {
        murmurhash3_x64_128(item, seed).0 >> (64 - bits)
    }
}

/// 64-bit digest used where items only need identity (exact counters,
/// frequency records).
#[inline]
pub fn digest64(item: &[u8]) -> u64 {
    murmurhash3_x64_128(item, 0x0b5e_55ed).0
}

/// Index of the leftmost 1 bit of a `width`-bit value, or `None` when the
/// value is zero.
#[inline]
pub fn leftmost_one(value: u64, width: u32) -> Option<u32> {
    if value == 0 {
        None
    } else {
        Some(value.leading_zeros() - (64 - width))
    }
}

/// Number of single-bit inspections a left-to-right scan performs to find
/// the leftmost 1 bit: up to and including that bit, or the whole width when
/// there is none.
#[inline]
pub fn scan_cost(value: u64, width: u32) -> u64 {
    match leftmost_one(value, width) {
        Some(k) => k as u64 + 1,
        None => width as u64,
    }
}

/// Derive the `i`-th member of a family of distinct seeds from a base seed.
/// Multiplication by an odd constant is a bijection on `u32`, so distinct
/// `i` below 2^32 always give distinct seeds.
#[inline]
pub fn family_seed(base: u32, i: u32) -> u32 {
    base.wrapping_add(i.wrapping_mul(0x9e37_79b9))
}
