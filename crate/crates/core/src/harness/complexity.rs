//! Operation counts per insert for both sketches.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::baselines::HyperloglogFmSketch;
use crate::error::Result;
use crate::lfm::{LfmSketch, SketchConfig};
use crate::sketch::DistinctSketch;

/// `N * (2 - (1/2)^(L-1))`: expected bits inspected per insert by `N`
/// independent leftmost-1 scans of `L`-bit values.
pub fn hll_expected_scans(bitmaps: usize, hash_bits: u32) -> f64 {
    bitmaps as f64 * (2.0 - 0.5f64.powi(hash_bits as i32 - 1))
}

/// `M * (2 - (1/2)^(L/M - 1)) + N`.
pub fn lfm_cost_bound(substrings: u32, hash_bits: u32, bitmaps: usize) -> f64 {
    let b = (hash_bits / substrings) as i32;
    substrings as f64 * (2.0 - 0.5f64.powi(b - 1)) + bitmaps as f64
}

/// Exact expectation of scans plus pattern steps per insert for uniform
/// digests. A substring is all zero with probability `p = 2^-(L/M)`; a
/// pattern walk inspects `k + 1` entries when its first `k` are all-zero
/// substrings, and at most `M`, so it costs `(1 - p^M) / (1 - p)` steps on
/// average.
pub fn lfm_expected_cost(substrings: u32, hash_bits: u32, bitmaps: usize) -> f64 {
    let b = (hash_bits / substrings) as i32;
    let p = 0.5f64.powi(b);
    let scans = substrings as f64 * (2.0 - 0.5f64.powi(b - 1));
    let steps = (1.0 - p.powi(substrings as i32)) / (1.0 - p);
    scans + bitmaps as f64 * steps
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplexityReport {
    pub inserts: u64,
    pub hash_bits: u32,
    pub substrings: u32,
    pub bitmaps: usize,
    pub lfm_hash_ops_per_insert: f64,
    pub hll_hash_ops_per_insert: f64,
    pub lfm_substring_scans_per_insert: f64,
    pub lfm_pattern_steps_per_insert: f64,
    /// Scans plus pattern steps.
    pub lfm_cost_per_insert: f64,
    pub lfm_cost_bound: f64,
    pub lfm_expected_cost: f64,
    pub lfm_within_bound: bool,
    pub hll_scans_per_insert: f64,
    pub hll_expected_scans: f64,
    pub hll_relative_error: f64,
}

pub fn complexity(sketch: SketchConfig, inserts: u64, seed: u64) -> Result<ComplexityReport> {
    let mut lfm = LfmSketch::new(sketch)?;
    let mut hll = HyperloglogFmSketch::new(sketch.bitmaps, sketch.hash_bits, sketch.hash_seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..inserts {
        let item: u64 = rng.gen();
        let bytes = item.to_le_bytes();
        lfm.insert(&bytes);
        hll.insert(&bytes);
    }
    let per = |x: u64| x as f64 / inserts.max(1) as f64;
    let l = lfm.op_counter();
    let h = hll.op_counter();
    let lfm_cost = per(l.substring_scans + l.pattern_steps);
    let bound = lfm_cost_bound(sketch.substrings, sketch.hash_bits, sketch.bitmaps);
    let hll_expected = hll_expected_scans(sketch.bitmaps, sketch.hash_bits);
    let hll_scans = per(h.substring_scans);
    Ok(ComplexityReport {
        inserts,
        hash_bits: sketch.hash_bits,
        substrings: sketch.substrings,
        bitmaps: sketch.bitmaps,
        lfm_hash_ops_per_insert: per(l.hash_ops),
        hll_hash_ops_per_insert: per(h.hash_ops),
        lfm_substring_scans_per_insert: per(l.substring_scans),
        lfm_pattern_steps_per_insert: per(l.pattern_steps),
        lfm_cost_per_insert: lfm_cost,
        lfm_cost_bound: bound,
        lfm_expected_cost: lfm_expected_cost(sketch.substrings, sketch.hash_bits, sketch.bitmaps),
        lfm_within_bound: lfm_cost <= bound,
        hll_scans_per_insert: hll_scans,
        hll_expected_scans: hll_expected,
        hll_relative_error: (hll_scans - hll_expected).abs() / hll_expected,
    })
}
