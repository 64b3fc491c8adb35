//! Shared cardinality estimator for the bitmap sketches.
//!
//! Both sketches reduce to `N` bitmap registers. Each register contributes
//! the index of its leftmost 0 bit; the raw statistic is the harmonic mean of
//! those indices (a zero index counts as 1), and the cardinality estimate is
//! `C * 2^H` for a calibration constant `C` fitted offline against an exact
//! counter (see `cpadetect calibrate`).

/// Calibration constant for [`crate::lfm::LfmSketch`] at the default
/// configuration (L=32, M=8, N=256). Fitted by `cpadetect calibrate --seed 1`.
pub const LFM_CALIBRATION: f64 = 1.398_819_597_625_121_4;

/// Calibration constant for [`crate::baselines::HyperloglogFmSketch`] at
/// L=32, N=256. Fitted by `cpadetect calibrate --seed 1`.
pub const HLL_FM_CALIBRATION: f64 = 1.394_693_257_796_853_4;

/// Index of the first 0 bit of a `width`-bit register, scanning from bit 0
/// (the most significant). Returns `width` when every bit is set.
#[inline]
pub fn leftmost_zero(bitmap: u64, width: u32) -> u32 {
    (((!bitmap) << (64 - width)).leading_zeros()).min(width)
}

/// Harmonic mean of the registers' leftmost-zero indices, each floored at 1.
pub fn harmonic_statistic<I>(registers: I, width: u32) -> f64
where
    I: IntoIterator<Item = u64>,
{
    let mut n = 0usize;
    let mut inv_sum = 0.0;
    for r in registers {
        let idx = leftmost_zero(r, width).max(1);
        inv_sum += 1.0 / idx as f64;
        n += 1;
    }
    if n == 0 {
        0.0
    } else {
        n as f64 / inv_sum
    }
}

#[inline]
pub fn estimate_from_statistic(statistic: f64, calibration: f64) -> f64 {
    calibration * statistic.exp2()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive_leftmost_zero(bitmap: u64, width: u32) -> u32 {
        for k in 0..width {
            if (bitmap >> (width - 1 - k)) & 1 == 0 {
                return k;
            }
        }
        width
    }

    #[test]
    fn leftmost_zero_cases() {
        assert_eq!(leftmost_zero(0, 32), 0);
        assert_eq!(leftmost_zero(0b1110_0000, 8), 3);
        assert_eq!(leftmost_zero(0xff, 8), 8);
        assert_eq!(leftmost_zero(u64::MAX, 64), 64);
        assert_eq!(leftmost_zero(u64::MAX >> 1, 64), 0);
    }

    #[test]
    fn leftmost_zero_matches_naive_scan() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for width in [2u32, 8, 31, 32, 64] {
            for _ in 0..5_000 {
                let mut b: u64 = rng.gen();
                // Bias towards long runs of leading ones.
                b |= !0u64 << rng.gen_range(0..64);
                if width < 64 {
                    b &= (1u64 << width) - 1;
                }
                assert_eq!(leftmost_zero(b, width), naive_leftmost_zero(b, width));
            }
        }
    }

    #[test]
    fn harmonic_mean_with_guard() {
        // Registers with leftmost-zero indices 0, 2, 4 count as 1, 2, 4.
        let regs = [0u64, 0b1100_0000, 0b1111_0000];
        let h = harmonic_statistic(regs, 8);
        assert!((h - 3.0 / (1.0 + 0.5 + 0.25)).abs() < 1e-12);
        assert_eq!(harmonic_statistic(std::iter::empty(), 8), 0.0);
        assert_eq!(estimate_from_statistic(1.0, 0.5), 1.0);
    }
}
