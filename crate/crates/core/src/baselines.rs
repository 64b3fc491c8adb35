//! Reference implementations the LFM sketch is compared against: the
//! multi-hash hyperloglog-FM sketch, an exact distinct counter, and a
//! per-content request-frequency detector.

use std::collections::HashSet;
use std::num::NonZeroUsize;

use lru::LruCache;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::estimator::{self, HLL_FM_CALIBRATION};
use crate::hash::{self, MAX_HASH_BITS};
use crate::sketch::{DistinctSketch, OpCounter};

/// FM sketch with `N` hash functions and one `L`-bit bitmap per function.
///
/// The hash family is one keyed hash evaluated under `N` distinct seeds.
#[derive(Debug, Clone)]
pub struct HyperloglogFmSketch {
    hash_bits: u32,
    seeds: Vec<u32>,
    bitmaps: Vec<u64>,
    insert_count: u64,
    ops: OpCounter,
    calibration: f64,
}

impl HyperloglogFmSketch {
    pub fn new(bitmaps: usize, hash_bits: u32, base_seed: u32) -> Result<Self> {
        if bitmaps == 0 {
            return Err(Error::config("at least one hash function is required"));
        }
        if hash_bits == 0 || hash_bits > MAX_HASH_BITS {
            return Err(Error::config(format!("hash width {hash_bits} must be in 1..={MAX_HASH_BITS}")));
        }
        Ok(HyperloglogFmSketch {
            hash_bits,
            seeds: (0..bitmaps as u32).map(|i| hash::family_seed(base_seed, i)).collect(),
            bitmaps: vec![0; bitmaps],
            insert_count: 0,
            ops: OpCounter::default(),
            calibration: HLL_FM_CALIBRATION,
        })
    }

    pub fn with_calibration(mut self, calibration: f64) -> Self {
        self.calibration = calibration;
        self
    }

    pub fn hash_bits(&self) -> u32 {
        self.hash_bits
    }

    pub fn seeds(&self) -> &[u32] {
        &self.seeds
    }

    pub fn bitmaps(&self) -> &[u64] {
        &self.bitmaps
    }

    pub fn calibration(&self) -> f64 {
        self.calibration
    }

    pub(crate) fn restore(&mut self, bitmaps: Vec<u64>, insert_count: u64) {
        debug_assert_eq!(bitmaps.len(), self.bitmaps.len());
        self.bitmaps = bitmaps;
        self.insert_count = insert_count;
    }
}

impl DistinctSketch for HyperloglogFmSketch {
    fn insert(&mut self, item: &[u8]) {
        let width = self.hash_bits;
        for (bitmap, &seed) in self.bitmaps.iter_mut().zip(&self.seeds) {
            let h = hash::keyed_hash(item, seed, width);
            self.ops.hash_ops += 1;
            self.ops.substring_scans += hash::scan_cost(h, width);
            if let Some(k) = hash::leftmost_one(h, width) {
                *bitmap |= 1u64 << (width - 1 - k);
            }
        }
        self.insert_count += 1;
    }

    fn harmonic_statistic(&self) -> f64 {
        estimator::harmonic_statistic(self.bitmaps.iter().copied(), self.hash_bits)
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
        self.bitmaps.len() * self.hash_bits as usize
    }
}

/// Exact distinct counter over 64-bit item digests; the ground truth the
/// sketches are calibrated and checked against.
#[derive(Debug, Default, Clone)]
pub struct ExactCounter {
    seen: HashSet<u64>,
}

impl ExactCounter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, item: &[u8]) {
        self.seen.insert(hash::digest64(item));
    }

    pub fn count(&self) -> u64 {
        self.seen.len() as u64
    }

    pub fn clear(&mut self) {
        self.seen.clear();
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FrequencyBaselineConfig {
    /// Records kept before the least recently observed one is evicted.
    pub capacity: usize,
    /// Deviation multiplier `k` in `mean + k * stddev`.
    pub deviation: f64,
    /// Epochs of history a record needs before it is checked.
    pub min_history: u32,
    /// Lower bound on the standard deviation, in requests per epoch.
    pub stddev_floor: f64,
}

impl Default for FrequencyBaselineConfig {
    fn default() -> Self {
        FrequencyBaselineConfig {
            capacity: 10_000,
            deviation: 3.0,
            min_history: 2,
            stddev_floor: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FrequencyRecord {
    pub digest: u64,
    /// Caller-defined tag (the detector stores the name prefix index).
    pub tag: u32,
    pub current: u32,
    pub epochs: u32,
    pub mean: f64,
    m2: f64,
}

impl FrequencyRecord {
    pub fn variance(&self) -> f64 {
        if self.epochs < 2 {
            0.0
        } else {
            self.m2 / (self.epochs - 1) as f64
        }
    }
}

/// A content whose current-epoch request count deviates from its history.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FrequencyAlarm {
    pub digest: u64,
    pub tag: u32,
    pub count: u32,
    pub threshold: f64,
}

/// Per-content request-frequency detector: alarms when a content's count in
/// the current epoch exceeds its historical mean by `k` standard deviations.
#[derive(Debug)]
pub struct FrequencyBaseline {
    config: FrequencyBaselineConfig,
    records: LruCache<u64, FrequencyRecord>,
    evictions: u64,
    epoch: u64,
}

/// Bits per record: digest, tag, current count, epoch count, mean, M2.
pub const FREQUENCY_RECORD_BITS: usize = 64 + 32 + 32 + 32 + 64 + 64;

impl FrequencyBaseline {
    pub fn new(config: FrequencyBaselineConfig) -> Result<Self> {
        let cap = NonZeroUsize::new(config.capacity).ok_or_else(|| Error::config("frequency baseline capacity must be positive"))?;
        Ok(FrequencyBaseline {
            config,
            records: LruCache::new(cap),
            evictions: 0,
            epoch: 0,
        })
    }

    pub fn observe(&mut self, item: &[u8]) {
        self.observe_tagged(item, 0);
    }

    pub fn observe_tagged(&mut self, item: &[u8], tag: u32) {
        let digest = hash::digest64(item);
        if let Some(rec) = self.records.get_mut(&digest) {
            rec.current += 1;
            return;
        }
        let rec = FrequencyRecord {
            digest,
            tag,
            current: 1,
            epochs: 0,
            mean: 0.0,
            m2: 0.0,
        };
        if self.records.push(digest, rec).is_some() {
            self.evictions += 1;
        }
    }

    fn threshold_for(&self, rec: &FrequencyRecord) -> f64 {
        rec.mean + self.config.deviation * rec.variance().sqrt().max(self.config.stddev_floor)
    }

    /// Every deviating content in the current epoch, in record order.
    pub fn check_all(&self) -> Vec<FrequencyAlarm> {
        self.records
            .iter()
            .map(|(_, rec)| rec)
            .filter(|rec| rec.epochs >= self.config.min_history)
            .filter_map(|rec| {
                let threshold = self.threshold_for(rec);
                (rec.current as f64 > threshold).then_some(FrequencyAlarm {
                    digest: rec.digest,
                    tag: rec.tag,
                    count: rec.current,
                    threshold,
                })
            })
            .collect()
    }

    /// The most deviating content in the current epoch, if any.
    pub fn check(&self) -> Option<FrequencyAlarm> {
        self.check_all()
            .into_iter()
            .max_by(|a, b| (a.count as f64 - a.threshold).total_cmp(&(b.count as f64 - b.threshold)))
    }

    /// Fold the current epoch's counts into every record's history.
    pub fn end_epoch(&mut self) {
        for (_, rec) in self.records.iter_mut() {
            let x = rec.current as f64;
            rec.epochs += 1;
            let delta = x - rec.mean;
            rec.mean += delta / rec.epochs as f64;
            rec.m2 += delta * (x - rec.mean);
            rec.current = 0;
        }
        self.epoch += 1;
    }

    pub fn epoch(&self) -> u64 {
        self.epoch
    }

    pub fn evictions(&self) -> u64 {
        self.evictions
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn memory_footprint(&self) -> usize {
        self.records.len() * FREQUENCY_RECORD_BITS
    }

    pub fn records(&self) -> impl Iterator<Item = &FrequencyRecord> {
        self.records.iter().map(|(_, r)| r)
    }

    /// Tabular dump: digest, current epoch count, epochs of history, mean,
    /// variance.
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["digest", "current", "epochs", "mean", "variance"])?;
        for rec in self.records() {
            w.write_record([
                format!("{:016x}", rec.digest),
                rec.current.to_string(),
                rec.epochs.to_string(),
                format!("{:.6}", rec.mean),
                format!("{:.6}", rec.variance()),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_hash_reduces_to_classic_fm() {
        let mut s = HyperloglogFmSketch::new(1, 32, 9).unwrap();
        s.insert(b"x");
        let h = hash::keyed_hash(b"x", s.seeds()[0], 32);
        let k = hash::leftmost_one(h, 32).unwrap();
        assert_eq!(s.bitmaps()[0], 1u64 << (31 - k));
        assert_eq!(s.op_counter().hash_ops, 1);
    }

    #[test]
    fn hll_duplicates_idempotent_and_hash_count() {
        let mut a = HyperloglogFmSketch::new(64, 32, 1).unwrap();
        let mut b = a.clone();
        a.insert(b"/x/1");
        b.insert(b"/x/1");
        b.insert(b"/x/1");
        assert_eq!(a.bitmaps(), b.bitmaps());
        assert_eq!(b.op_counter().hash_ops, 128);
        let seeds: HashSet<u32> = a.seeds().iter().copied().collect();
        assert_eq!(seeds.len(), 64);
    }

    #[test]
    fn hll_empty_estimate_is_zero() {
        let s = HyperloglogFmSketch::new(256, 32, 1).unwrap();
        assert_eq!(s.estimate(), 0.0);
        assert_eq!(s.memory_footprint(), 8192);
    }

    #[test]
    fn hll_scan_cost_matches_formula() {
        // Expected inspections per hash: 2 - (1/2)^(L-1).
        let n = 256usize;
        let mut s = HyperloglogFmSketch::new(n, 32, 4).unwrap();
        let items = 20_000u64;
        for i in 0..items {
            s.insert(&i.to_le_bytes());
        }
        let per_insert = s.op_counter().substring_scans as f64 / items as f64;
        let expected = n as f64 * (2.0 - 0.5f64.powi(31));
        assert!((per_insert / expected - 1.0).abs() < 0.05, "{per_insert} vs {expected}");
    }

    #[test]
    fn exact_counter_set_semantics() {
        let mut c = ExactCounter::new();
        for x in [&b"a"[..], b"a", b"b"] {
            c.insert(x);
        }
        assert_eq!(c.count(), 2);
        let mut big = ExactCounter::new();
        for i in 0..10_000u32 {
            big.insert(&i.to_be_bytes());
        }
        assert_eq!(big.count(), 10_000);
        big.clear();
        assert_eq!(big.count(), 0);
    }

    fn feed(fb: &mut FrequencyBaseline, name: &str, times: u32) {
        for _ in 0..times {
            fb.observe(name.as_bytes());
        }
    }

    #[test]
    fn stationary_traffic_raises_no_alarm() {
        let mut fb = FrequencyBaseline::new(FrequencyBaselineConfig::default()).unwrap();
        for _ in 0..20 {
            for (i, name) in ["/a/1", "/a/2", "/b/7"].iter().enumerate() {
                feed(&mut fb, name, 5 + i as u32);
            }
            assert_eq!(fb.check(), None);
            fb.end_epoch();
        }
    }

    #[test]
    fn tenfold_jump_alarms() {
        let mut fb = FrequencyBaseline::new(FrequencyBaselineConfig::default()).unwrap();
        let history = [4, 6, 5, 5, 4, 6, 5, 5];
        for &n in &history {
            feed(&mut fb, "/a/1", n);
            feed(&mut fb, "/a/2", 3);
            assert!(fb.check().is_none());
            fb.end_epoch();
        }
        feed(&mut fb, "/a/1", 50);
        feed(&mut fb, "/a/2", 3);
        let alarm = fb.check().expect("alarm");
        assert_eq!(alarm.digest, hash::digest64(b"/a/1"));
        assert_eq!(alarm.count, 50);
    }

    #[test]
    fn capacity_evicts_least_recent() {
        let cfg = FrequencyBaselineConfig {
            capacity: 2,
            ..Default::default()
        };
        let mut fb = FrequencyBaseline::new(cfg).unwrap();
        fb.observe(b"a");
        fb.observe(b"b");
        fb.observe(b"a");
        fb.observe(b"c");
        assert_eq!(fb.len(), 2);
        assert_eq!(fb.evictions(), 1);
        let digests: HashSet<u64> = fb.records().map(|r| r.digest).collect();
        assert!(digests.contains(&hash::digest64(b"a")));
        assert!(!digests.contains(&hash::digest64(b"b")));
    }

    #[test]
    fn frequency_memory_grows_linearly() {
        let mut fb = FrequencyBaseline::new(FrequencyBaselineConfig::default()).unwrap();
        for i in 0..1000 {
            fb.observe(format!("/a/{i}").as_bytes());
        }
        let small = fb.memory_footprint();
        for i in 1000..10_000 {
            fb.observe(format!("/a/{i}").as_bytes());
        }
        assert_eq!(fb.memory_footprint(), 10 * small);
    }

    #[test]
    fn frequency_csv_dump() {
        let mut fb = FrequencyBaseline::new(FrequencyBaselineConfig::default()).unwrap();
        feed(&mut fb, "/a/1", 3);
        fb.end_epoch();
        let mut out = Vec::new();
        fb.write_csv(&mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("digest,current,epochs,mean,variance"));
        assert!(lines.next().unwrap().ends_with(",0,1,3.000000,0.000000"));
    }
}
