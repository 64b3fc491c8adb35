//! Behaviour common to the distinct-count sketches a prefix monitor can use.

use std::ops::AddAssign;

use serde::Serialize;

/// Instrumentation of the work a sketch performs on its insert path.
#[derive(Debug, Default, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct OpCounter {
    /// Hash-function invocations.
    pub hash_ops: u64,
    /// Single-bit inspections performed while searching for leftmost 1 bits.
    pub substring_scans: u64,
    /// Index-set entries visited while walking permutation patterns.
    pub pattern_steps: u64,
}

impl OpCounter {
    pub fn reset(&mut self) {
        *self = OpCounter::default();
    }
}

impl AddAssign for OpCounter {
    fn add_assign(&mut self, rhs: Self) {
        self.hash_ops += rhs.hash_ops;
        self.substring_scans += rhs.substring_scans;
        self.pattern_steps += rhs.pattern_steps;
    }
}

/// A bitmap sketch that estimates the number of distinct items inserted.
pub trait DistinctSketch {
    fn insert(&mut self, item: &[u8]);

    /// Harmonic mean of the registers' leftmost-zero indices.
    fn harmonic_statistic(&self) -> f64;

    /// Calibrated cardinality estimate; exactly 0 before the first insert.
    fn estimate(&self) -> f64;

    fn reset(&mut self);

    fn insert_count(&self) -> u64;

    fn op_counter(&self) -> OpCounter;

    /// Register storage in bits.
    fn memory_footprint(&self) -> usize;
}
