//! The lightweight Flajolet-Martin (LFM) sketch.
//!
//! One hash per item. The `L`-bit digest is split into `M` substrings and the
//! leftmost-1 index of each substring is recorded in an [`IndexSet`]. Each of
//! `N` permutation patterns defines a virtual rearrangement of the
//! substrings; walking the index set in pattern order yields the leftmost-1
//! position of that rearranged digest without materializing it. Position `k`
//! from pattern `i` sets bit `k` of bitmap `i`.

use std::collections::HashSet;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::{self, LFM_CALIBRATION};
use crate::hash::{self, MAX_HASH_BITS};
use crate::sketch::{DistinctSketch, OpCounter};

/// Largest number of substrings an [`IndexSet`] holds (`L <= 64`, `L/M >= 2`).
pub const MAX_SUBSTRINGS: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SketchConfig {
    /// Digest width `L` in bits.
    pub hash_bits: u32,
    /// Number of substrings `M`.
    pub substrings: u32,
    /// Number of bitmaps / permutation patterns `N`.
    pub bitmaps: usize,
    pub hash_seed: u32,
    pub pattern_seed: u64,
}

impl Default for SketchConfig {
    fn default() -> Self {
        SketchConfig {
            hash_bits: 32,
            substrings: 8,
            bitmaps: 256,
            hash_seed: 0x5eed_0001,
            pattern_seed: 0x9a77_e2a5,
        }
    }
}

impl SketchConfig {
    pub fn new(hash_bits: u32, substrings: u32, bitmaps: usize) -> Result<Self> {
        let cfg = SketchConfig {
            hash_bits,
            substrings,
            bitmaps,
            ..Default::default()
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_seeds(mut self, hash_seed: u32, pattern_seed: u64) -> Self {
        self.hash_seed = hash_seed;
        self.pattern_seed = pattern_seed;
        self
    }

    /// Bits per substring, `L / M`.
    pub fn substring_bits(&self) -> u32 {
        self.hash_bits / self.substrings
    }

    pub fn validate(&self) -> Result<()> {
        let (l, m) = (self.hash_bits, self.substrings);
        if l == 0 || l > MAX_HASH_BITS {
            return Err(Error::config(format!("hash width {l} must be in 1..={MAX_HASH_BITS}")));
        }
        if m == 0 || l % m != 0 {
            return Err(Error::config(format!("hash width {l} is not divisible by {m} substrings")));
        }
        if l / m < 2 {
            return Err(Error::config(format!("substrings of {} bit(s) are too short; need L/M >= 2", l / m)));
        }
        if self.bitmaps == 0 {
            return Err(Error::config("at least one bitmap is required"));
        }
        if (self.bitmaps as u128) > permutation_count(m) {
            return Err(Error::config(format!(
                "{} bitmaps requested but only {m}! = {} permutation patterns exist",
                self.bitmaps,
                permutation_count(m)
            )));
        }
        Ok(())
    }
}

/// `m!`, saturating at `u128::MAX`.
pub fn permutation_count(m: u32) -> u128 {
    (1..=m as u128).try_fold(1u128, |acc, k| acc.checked_mul(k)).unwrap_or(u128::MAX)
}

/// `N` distinct permutations of the substring identifiers `0..M`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PermutationPatternMatrix {
    substrings: usize,
    cells: Vec<u8>,
}

impl PermutationPatternMatrix {
    /// Sample `count` distinct permutations of `0..substrings` with seeded
    /// Fisher-Yates shuffles, rejecting duplicates.
    pub fn generate(substrings: u32, count: usize, seed: u64) -> Result<Self> {
        if substrings == 0 || substrings as usize > MAX_SUBSTRINGS {
            return Err(Error::config(format!("substring count {substrings} out of range")));
        }
        if count as u128 > permutation_count(substrings) {
            return Err(Error::config(format!(
                "cannot draw {count} distinct patterns from {substrings}! permutations"
            )));
        }
        let m = substrings as usize;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut seen: HashSet<Vec<u8>> = HashSet::with_capacity(count);
        let mut cells = Vec::with_capacity(count * m);
        let mut row: Vec<u8> = (0..m as u8).collect();
        while seen.len() < count {
            row.shuffle(&mut rng);
            if seen.insert(row.clone()) {
                cells.extend_from_slice(&row);
            }
        }
        Ok(PermutationPatternMatrix { substrings: m, cells })
    }

    /// Build from explicit rows, checking that each is a permutation and that
    /// rows are pairwise distinct.
    pub fn from_rows(rows: &[Vec<u8>]) -> Result<Self> {
        let m = rows.first().map_or(0, Vec::len);
        if m == 0 || m > MAX_SUBSTRINGS {
            return Err(Error::config("pattern rows must be non-empty"));
        }
        let mut seen = HashSet::new();
        let mut cells = Vec::with_capacity(rows.len() * m);
        for row in rows {
            if row.len() != m || !is_permutation(row) {
                return Err(Error::config(format!("pattern {row:?} is not a permutation of 0..{m}")));
            }
            if !seen.insert(row.clone()) {
                return Err(Error::config(format!("duplicate pattern {row:?}")));
            }
            cells.extend_from_slice(row);
        }
        Ok(PermutationPatternMatrix { substrings: m, cells })
    }

    pub fn substrings(&self) -> usize {
        self.substrings
    }

    pub fn len(&self) -> usize {
        self.cells.len() / self.substrings
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn row(&self, i: usize) -> &[u8] {
        &self.cells[i * self.substrings..(i + 1) * self.substrings]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[u8]> {
        self.cells.chunks_exact(self.substrings)
    }

    /// Storage for the matrix at `ceil(log2 M)` bits per identifier.
    pub fn memory_footprint(&self) -> usize {
        let id_bits = (usize::BITS - (self.substrings - 1).leading_zeros()).max(1) as usize;
        self.cells.len() * id_bits
    }
}

fn is_permutation(row: &[u8]) -> bool {
    let mut seen = [false; MAX_SUBSTRINGS];
    row.iter().all(|&id| {
        let id = id as usize;
        id < row.len() && !std::mem::replace(&mut seen[id], true)
    })
}

/// Leftmost-1 index of every substring of a digest; -1 marks an all-zero
/// substring.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IndexSet {
    len: u8,
    indices: [i8; MAX_SUBSTRINGS],
}

impl IndexSet {
    pub fn from_slice(indices: &[i8]) -> Self {
        let mut set = IndexSet {
            len: indices.len() as u8,
            indices: [-1; MAX_SUBSTRINGS],
        };
        set.indices[..indices.len()].copy_from_slice(indices);
        set
    }

    pub fn as_slice(&self) -> &[i8] {
        &self.indices[..self.len as usize]
    }

    #[inline]
    pub fn get(&self, id: usize) -> i8 {
        self.indices[id]
    }
}

/// Hash `item` to an `L`-bit digest, counting the invocation.
#[inline]
pub fn hash_item(item: &[u8], config: &SketchConfig, ops: &mut OpCounter) -> u64 {
    ops.hash_ops += 1;
    hash::keyed_hash(item, config.hash_seed, config.hash_bits)
}

/// Split `digest` into `M` substrings, most significant first, and record the
/// leftmost-1 index inside each.
pub fn split_and_index(digest: u64, config: &SketchConfig, ops: &mut OpCounter) -> IndexSet {
    let sub_bits = config.substring_bits();
    let m = config.substrings;
    let mask = (1u64 << sub_bits) - 1;
    let mut set = IndexSet {
        len: m as u8,
        indices: [-1; MAX_SUBSTRINGS],
    };
    for j in 0..m {
        let sub = (digest >> (config.hash_bits - (j + 1) * sub_bits)) & mask;
        ops.substring_scans += hash::scan_cost(sub, sub_bits);
        if let Some(k) = hash::leftmost_one(sub, sub_bits) {
            set.indices[j as usize] = k as i8;
        }
    }
    set
}

/// Leftmost-1 position of the digest rearranged by `pattern`, read off the
/// index set: all-zero substrings contribute their width to the offset, the
/// first non-empty one ends the walk. `None` when every substring is zero.
#[inline]
pub fn permuted_leftmost_one(ix: &IndexSet, pattern: &[u8], substring_bits: u32, ops: &mut OpCounter) -> Option<u32> {
    let mut offset = 0;
    for &id in pattern {
        ops.pattern_steps += 1;
        let k = ix.get(id as usize);
        if k >= 0 {
            return Some(offset + k as u32);
        }
        offset += substring_bits;
    }
    None
}

#[derive(Debug, Clone)]
pub struct LfmSketch {
    config: SketchConfig,
    patterns: Arc<PermutationPatternMatrix>,
    bitmaps: Vec<u64>,
    insert_count: u64,
    ops: OpCounter,
    calibration: f64,
}

impl LfmSketch {
    pub fn new(config: SketchConfig) -> Result<Self> {
        config.validate()?;
        let patterns = PermutationPatternMatrix::generate(config.substrings, config.bitmaps, config.pattern_seed)?;
        Self::with_patterns(config, Arc::new(patterns))
    }

    /// A sketch sharing an existing pattern matrix (one matrix serves every
    /// prefix monitor on a router).
    pub fn with_patterns(config: SketchConfig, patterns: Arc<PermutationPatternMatrix>) -> Result<Self> {
        config.validate()?;
        if patterns.len() != config.bitmaps || patterns.substrings() != config.substrings as usize {
            return Err(Error::config(format!(
                "pattern matrix is {}x{}, config needs {}x{}",
                patterns.len(),
                patterns.substrings(),
                config.bitmaps,
                config.substrings
            )));
        }
        Ok(LfmSketch {
            config,
            patterns,
            bitmaps: vec![0; config.bitmaps],
            insert_count: 0,
            ops: OpCounter::default(),
            calibration: LFM_CALIBRATION,
        })
    }

    pub fn with_calibration(mut self, calibration: f64) -> Self {
        self.calibration = calibration;
        self
    }

    pub fn config(&self) -> &SketchConfig {
        &self.config
    }

    pub fn patterns(&self) -> &Arc<PermutationPatternMatrix> {
        &self.patterns
    }

    pub fn bitmaps(&self) -> &[u64] {
        &self.bitmaps
    }

    pub fn calibration(&self) -> f64 {
        self.calibration
    }

    /// Leftmost-zero index of every register, in pattern order.
    pub fn registers(&self) -> impl Iterator<Item = u32> + '_ {
        self.bitmaps.iter().map(|&b| estimator::leftmost_zero(b, self.config.hash_bits))
    }

    pub(crate) fn restore(&mut self, bitmaps: Vec<u64>, insert_count: u64) {
        debug_assert_eq!(bitmaps.len(), self.bitmaps.len());
        self.bitmaps = bitmaps;
        self.insert_count = insert_count;
    }
}

impl DistinctSketch for LfmSketch {
    fn insert(&mut self, item: &[u8]) {
        let digest = hash_item(item, &self.config, &mut self.ops);
        let ix = split_and_index(digest, &self.config, &mut self.ops);
        let sub_bits = self.config.substring_bits();
        let top = self.config.hash_bits - 1;
        for (bitmap, pattern) in self.bitmaps.iter_mut().zip(self.patterns.rows()) {
            if let Some(k) = permuted_leftmost_one(&ix, pattern, sub_bits, &mut self.ops) {
                *bitmap |= 1u64 << (top - k);
            }
        }
        self.insert_count += 1;
    }

    fn harmonic_statistic(&self) -> f64 {
        estimator::harmonic_statistic(self.bitmaps.iter().copied(), self.config.hash_bits)
    }

    fn estimate(&self) -> f64 {
        if self.insert_count == 0 {
            return 0.0;
        }
        estimator::estimate_from_statistic(self.harmonic_statistic(), self.calibration)
    }

    fn reset(&mut self) {
        self.bitmaps.iter_mut().for_each(|b| *b = 0);
        self.insert_count = 0;
        self.ops.reset();
    }

    fn insert_count(&self) -> u64 {
        self.insert_count
    }

    fn op_counter(&self) -> OpCounter {
        self.ops
    }

    fn memory_footprint(&self) -> usize {
        self.config.bitmaps * self.config.hash_bits as usize
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_config() -> SketchConfig {
        SketchConfig::new(8, 4, 24).unwrap()
    }

    #[test]
    fn config_validation() {
        assert!(SketchConfig::new(32, 8, 256).is_ok());
        assert!(SketchConfig::new(30, 8, 1).is_err());
        assert!(SketchConfig::new(8, 8, 1).is_err());
        assert!(SketchConfig::new(8, 4, 25).is_err());
        assert!(SketchConfig::new(8, 4, 0).is_err());
        assert!(SketchConfig::new(8, 1, 1).is_ok());
        assert!(SketchConfig::new(8, 1, 2).is_err());
    }

    #[test]
    fn four_substrings_yield_all_24_patterns() {
        let pm = PermutationPatternMatrix::generate(4, 24, 3).unwrap();
        let mut rows: Vec<Vec<u8>> = pm.rows().map(<[u8]>::to_vec).collect();
        rows.sort();
        rows.dedup();
        assert_eq!(rows.len(), 24);
        assert!(rows.iter().all(|r| is_permutation(r)));
    }

    #[test]
    fn single_substring_pattern() {
        let pm = PermutationPatternMatrix::generate(1, 1, 0).unwrap();
        assert_eq!(pm.row(0), &[0]);
    }

    #[test]
    fn too_many_patterns_rejected() {
        assert!(PermutationPatternMatrix::generate(3, 7, 0).is_err());
    }

    #[test]
    fn default_patterns_valid_and_reproducible() {
        let a = PermutationPatternMatrix::generate(8, 256, 11).unwrap();
        let b = PermutationPatternMatrix::generate(8, 256, 11).unwrap();
        assert_eq!(a, b);
        let rows: HashSet<&[u8]> = a.rows().collect();
        assert_eq!(rows.len(), 256);
        for row in a.rows() {
            let mut sorted = row.to_vec();
            sorted.sort_unstable();
            assert_eq!(sorted, (0..8).collect::<Vec<u8>>());
        }
        assert_ne!(a, PermutationPatternMatrix::generate(8, 256, 12).unwrap());
    }

    #[test]
    fn from_rows_rejects_bad_rows() {
        assert!(PermutationPatternMatrix::from_rows(&[vec![0, 1], vec![1, 0]]).is_ok());
        assert!(PermutationPatternMatrix::from_rows(&[vec![0, 0]]).is_err());
        assert!(PermutationPatternMatrix::from_rows(&[vec![0, 1], vec![0, 1]]).is_err());
        assert!(PermutationPatternMatrix::from_rows(&[vec![0, 2]]).is_err());
    }

    #[test]
    fn worked_example_index_set() {
        let mut ops = OpCounter::default();
        let ix = split_and_index(0b0011_0110, &small_config(), &mut ops);
        assert_eq!(ix.as_slice(), &[-1, 0, 1, 0]);
        // "00" scans 2 bits, "11" 1, "01" 2, "10" 1.
        assert_eq!(ops.substring_scans, 6);
    }

    #[test]
    fn all_zero_digest_index_set() {
        let mut ops = OpCounter::default();
        let cfg = SketchConfig::default();
        let ix = split_and_index(0, &cfg, &mut ops);
        assert!(ix.as_slice().iter().all(|&k| k == -1));
        assert_eq!(ix.as_slice().len(), 8);
        assert_eq!(ops.substring_scans, 32);
    }

    #[test]
    fn worked_example_pattern_walk() {
        // Identifiers A=0, B=1, C=2, D=3; pattern ACDB.
        let mut ops = OpCounter::default();
        let ix = IndexSet::from_slice(&[-1, 0, 1, 0]);
        assert_eq!(permuted_leftmost_one(&ix, &[0, 2, 3, 1], 2, &mut ops), Some(3));
        assert_eq!(ops.pattern_steps, 2);
        let none = IndexSet::from_slice(&[-1, -1, -1, -1]);
        assert_eq!(permuted_leftmost_one(&none, &[0, 2, 3, 1], 2, &mut ops), None);
        assert_eq!(ops.pattern_steps, 6);
    }

    #[test]
    fn worked_example_insert_sets_fourth_bit() {
        let cfg = small_config();
        let pm = PermutationPatternMatrix::from_rows(&[vec![0, 2, 3, 1]]).unwrap();
        let cfg = SketchConfig { bitmaps: 1, ..cfg };
        // Digest 00110110 fed directly through the insert path's pieces.
        let mut ops = OpCounter::default();
        let ix = split_and_index(0b0011_0110, &cfg, &mut ops);
        let k = permuted_leftmost_one(&ix, pm.row(0), cfg.substring_bits(), &mut ops).unwrap();
        let bitmap = 1u64 << (cfg.hash_bits - 1 - k);
        assert_eq!(bitmap, 0b0001_0000);
    }

    #[test]
    fn insert_counts_one_hash() {
        let mut s = LfmSketch::new(SketchConfig::default()).unwrap();
        for i in 0..1000 {
            s.insert(format!("/a/{i}").as_bytes());
        }
        assert_eq!(s.op_counter().hash_ops, 1000);
        assert_eq!(s.insert_count(), 1000);
    }

    #[test]
    fn duplicate_insert_is_idempotent() {
        let mut once = LfmSketch::new(SketchConfig::default()).unwrap();
        let mut twice = once.clone();
        once.insert(b"/yahoo.com/1");
        twice.insert(b"/yahoo.com/1");
        twice.insert(b"/yahoo.com/1");
        assert_eq!(once.bitmaps(), twice.bitmaps());
    }

    #[test]
    fn insert_is_or_of_single_item_sketches() {
        let fresh = LfmSketch::new(SketchConfig::default()).unwrap();
        let mut all = fresh.clone();
        let mut expected = vec![0u64; 256];
        for item in [&b"a"[..], b"b", b"c"] {
            let mut single = fresh.clone();
            single.insert(item);
            all.insert(item);
            for (e, b) in expected.iter_mut().zip(single.bitmaps()) {
                *e |= b;
            }
        }
        assert_eq!(all.bitmaps(), &expected[..]);
    }

    #[test]
    fn empty_sketch_estimates() {
        let s = LfmSketch::new(SketchConfig::default()).unwrap().with_calibration(0.7);
        assert_eq!(s.harmonic_statistic(), 1.0);
        // Unguarded form is 2C; the public estimate short-circuits to 0.
        assert!((estimator::estimate_from_statistic(s.harmonic_statistic(), 0.7) - 1.4).abs() < 1e-12);
        assert_eq!(s.estimate(), 0.0);
    }

    #[test]
    fn reset_restores_fresh_state() {
        let fresh = LfmSketch::new(SketchConfig::default()).unwrap();
        let mut s = fresh.clone();
        let stream: Vec<String> = (0..500).map(|i| format!("/p/{i}")).collect();
        for x in &stream {
            s.insert(x.as_bytes());
        }
        s.reset();
        assert_eq!(s.insert_count(), 0);
        assert_eq!(s.estimate(), 0.0);
        assert_eq!(s.op_counter(), OpCounter::default());
        assert!(Arc::ptr_eq(s.patterns(), fresh.patterns()));
        assert_eq!(s.config(), fresh.config());
        let mut replay = fresh.clone();
        for x in &stream {
            s.insert(x.as_bytes());
            replay.insert(x.as_bytes());
        }
        assert_eq!(s.bitmaps(), replay.bitmaps());
    }

    #[test]
    fn footprints() {
        let s = LfmSketch::new(SketchConfig::default()).unwrap();
        assert_eq!(s.memory_footprint(), 8192);
        assert_eq!(s.patterns().memory_footprint(), 256 * 8 * 3);
        let tiny = LfmSketch::new(SketchConfig::new(8, 1, 1).unwrap()).unwrap();
        assert_eq!(tiny.memory_footprint(), 8);
    }

    #[test]
    fn mismatched_pattern_matrix_rejected() {
        let pm = Arc::new(PermutationPatternMatrix::generate(4, 24, 0).unwrap());
        assert!(LfmSketch::with_patterns(SketchConfig::default(), pm).is_err());
    }
}
