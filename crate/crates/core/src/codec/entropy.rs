//! Run/level bit-cost model standing in for entropy coding.
//!
//! Each nonzero level `L` preceded by `z` zeros (in zigzag order) costs
//! `ue(z) + ue(|L|) + 1` bits, and every block ends with a 2-bit end-of-block marker.

pub const EOB_BITS: u32 = 2;

#[rustfmt::skip]
pub const ZIGZAG: [usize; 64] = [
     0,  1,  8, 16,  9,  2,  3, 10,
    17, 24, 32, 25, 18, 11,  4,  5,
    12, 19, 26, 33, 40, 48, 41, 34,
    27, 20, 13,  6,  7, 14, 21, 28,
    35, 42, 49, 56, 57, 50, 43, 36,
    29, 22, 15, 23, 30, 37, 44, 51,
    58, 59, 52, 45, 38, 31, 39, 46,
    53, 60, 61, 54, 47, 55, 62, 63,
];

/// Length of the order-0 exp-Golomb code for `k`: `2·floor(log2(k+1)) + 1`.
#[inline]
pub fn ue_bits(k: u32) -> u32 {
    2 * (u32::BITS - 1 - (k + 1).leading_zeros()) + 1
}

pub fn estimate_bits(qcoeffs: &[i32; 64]) -> u32 {
    let mut bits = 0;
    let mut run = 0u32;
    for &pos in ZIGZAG.iter() {
        let level = qcoeffs[pos];
        if level == 0 {
            run += 1;
        } else {
            bits += ue_bits(run) + ue_bits(level.unsigned_abs()) + 1;
            run = 0;
        }
    }
    bits + EOB_BITS
}
