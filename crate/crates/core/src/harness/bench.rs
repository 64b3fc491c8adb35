//! Insert-path throughput and detector memory.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::baselines::{FrequencyBaseline, FrequencyBaselineConfig};
use crate::detector::{bench_insert_path, BenchResult, Detector, DetectorConfig, DetectorMode};
use crate::error::Result;
use crate::lfm::SketchConfig;
use crate::scenario::DEFAULT_PREFIXES;

/// `count` interest names spread over the default prefixes with random
/// identifiers.
pub fn name_stream(count: usize, seed: u64) -> Vec<String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let p = DEFAULT_PREFIXES[rng.gen_range(0..DEFAULT_PREFIXES.len())];
            format!("{p}/{}", rng.gen_range(0..1_000_000_000u64))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchReport {
    pub bitmaps: usize,
    pub results: Vec<BenchResult>,
    /// ELDA throughput over strawman throughput.
    pub elda_over_strawman: f64,
}

pub fn bench(bitmaps: usize, interests: usize, rounds: usize, seed: u64) -> Result<BenchReport> {
    let stream = name_stream(interests, seed);
    let sketch = SketchConfig::new(32, 8, bitmaps)?;
    let mut results = Vec::new();
    for mode in [DetectorMode::Elda, DetectorMode::Strawman, DetectorMode::Freq] {
        let cfg = DetectorConfig {
            mode,
            sketch,
            ..Default::default()
        };
        results.push(bench_insert_path(&cfg, &stream, rounds)?);
    }
    let ratio = results[0].interests_per_second / results[1].interests_per_second;
    Ok(BenchReport {
        bitmaps,
        results,
        elda_over_strawman: ratio,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemoryRow {
    pub distinct_names: usize,
    /// Register bits held by the one prefix monitor.
    pub elda_bits_per_prefix: usize,
    pub frequency_baseline_bits: usize,
}

/// Feed `distinct` names under one prefix to an ELDA detector and to the
/// frequency baseline and report their state sizes.
pub fn memory_footprint(distinct: usize, sketch: SketchConfig) -> Result<MemoryRow> {
    let mut elda = Detector::elda(DetectorConfig {
        sketch,
        ..Default::default()
    })?;
    let mut freq = FrequencyBaseline::new(FrequencyBaselineConfig {
        capacity: distinct.max(FrequencyBaselineConfig::default().capacity),
        ..Default::default()
    })?;
    for i in 0..distinct {
        let name = format!("/yahoo.com/{i}");
        elda.observe_interest(&name);
        freq.observe(name.as_bytes());
    }
    Ok(MemoryRow {
        distinct_names: distinct,
        elda_bits_per_prefix: elda.monitors().count() * elda.per_prefix_footprint(),
        frequency_baseline_bits: freq.memory_footprint(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stream_is_reproducible() {
        assert_eq!(name_stream(100, 4), name_stream(100, 4));
        assert!(name_stream(10, 4).iter().all(|n| n.starts_with('/')));
    }

    #[test]
    fn sketch_memory_is_flat_and_baseline_linear() {
        let a = memory_footprint(1_000, SketchConfig::default()).unwrap();
        let b = memory_footprint(10_000, SketchConfig::default()).unwrap();
        assert_eq!(a.elda_bits_per_prefix, 256 * 32);
        assert_eq!(a.elda_bits_per_prefix, b.elda_bits_per_prefix);
        assert_eq!(b.frequency_baseline_bits, 10 * a.frequency_baseline_bits);
    }
}
