//! Acceptance suite. Each criterion prints one PASS/FAIL line; the process
//! exits non-zero when any criterion fails.

use std::collections::BTreeMap;
use std::panic::{self, AssertUnwindSafe};
use std::time::{Duration, Instant};

use proptest::prelude::*;
use proptest::test_runner::{Config as ProptestConfig, TestRunner};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson, Zipf};

use cpadetect::baselines::FREQUENCY_RECORD_BITS;
use cpadetect::harness::accuracy::{accuracy, AccuracyConfig};
use cpadetect::harness::bench::{bench, memory_footprint};
use cpadetect::harness::complexity::complexity;
use cpadetect::harness::run::RunOptions;
use cpadetect::harness::sweep::{sweep, SweepRow};
use cpadetect::hash::keyed_hash;
use cpadetect::lfm::{permuted_leftmost_one, split_and_index};
use cpadetect::scenario::builtin_names;
use cpadetect::{
    mc_threshold, Detector, DetectorConfig, DetectorMode, DistinctSketch, HyperloglogFmSketch, LfmSketch,
    MonitorHistory, OpCounter, SketchConfig, ThresholdConfig,
};

struct Verdict {
    pass: bool,
    detail: String,
}

impl Verdict {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Verdict {
            pass,
            detail: detail.into(),
        }
    }
}

// ---------------------------------------------------------------------------
// Materialized-permutation oracle

/// Rebuild the permuted digest bit by bit and scan it for its first 1.
fn materialized_leftmost_one(digest: u64, pattern: &[u8], hash_bits: u32) -> Option<u32> {
    let m = pattern.len() as u32;
    let w = hash_bits / m;
    let mut bits = Vec::with_capacity(hash_bits as usize);
    for &id in pattern {
        let start = id as u32 * w;
        for b in 0..w {
            bits.push((digest >> (hash_bits - 1 - (start + b))) & 1 == 1);
        }
    }
    bits.iter().position(|&b| b).map(|p| p as u32)
}

fn all_permutations(m: u8) -> Vec<Vec<u8>> {
    fn go(prefix: &mut Vec<u8>, left: &mut Vec<u8>, out: &mut Vec<Vec<u8>>) {
        if left.is_empty() {
            out.push(prefix.clone());
            return;
        }
        for i in 0..left.len() {
            let x = left.remove(i);
            prefix.push(x);
            go(prefix, left, out);
            prefix.pop();
            left.insert(i, x);
        }
    }
    let mut out = Vec::new();
    go(&mut Vec::new(), &mut (0..m).collect(), &mut out);
    out
}

fn permutation_oracle() -> Verdict {
    let t0 = Instant::now();
    let mut mismatches = 0u64;
    let mut cases = 0u64;
    let mut ops = OpCounter::default();

    let small = SketchConfig::new(8, 4, 24).unwrap();
    let patterns = all_permutations(4);
    assert_eq!(patterns.len(), 24);
    for digest in 0u64..256 {
        let ix = split_and_index(digest, &small, &mut ops);
        for p in &patterns {
            cases += 1;
            if permuted_leftmost_one(&ix, p, 2, &mut ops) != materialized_leftmost_one(digest, p, 8) {
                mismatches += 1;
            }
        }
    }

    let full = SketchConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(0x0a11_ce);
    let mut pattern: Vec<u8> = (0..8).collect();
    for i in 0..100_000u32 {
        // Include sparse digests so long zero runs are exercised.
        let mut digest: u64 = rng.gen::<u32>() as u64;
        if i % 4 == 0 {
            digest &= rng.gen::<u32>() as u64 & rng.gen::<u32>() as u64;
        }
        if i % 16 == 0 {
            digest &= rng.gen::<u32>() as u64 & rng.gen::<u32>() as u64;
        }
        pattern.shuffle(&mut rng);
        let ix = split_and_index(digest, &full, &mut ops);
        cases += 1;
        if permuted_leftmost_one(&ix, &pattern, 4, &mut ops) != materialized_leftmost_one(digest, &pattern, 32) {
            mismatches += 1;
        }
    }
    let elapsed = t0.elapsed();
    Verdict::new(
        mismatches == 0 && elapsed < Duration::from_secs(10),
        format!("{mismatches} mismatches over {cases} cases in {:.2}s", elapsed.as_secs_f64()),
    )
}

// ---------------------------------------------------------------------------

fn hash_economy() -> Verdict {
    let cfg = SketchConfig::default();
    let mut lfm = LfmSketch::new(cfg).unwrap();
    let mut hll = HyperloglogFmSketch::new(cfg.bitmaps, cfg.hash_bits, cfg.hash_seed).unwrap();
    let inserts = 10_000u64;
    for i in 0..inserts {
        let item = format!("/yahoo.com/{i}");
        lfm.insert(item.as_bytes());
        hll.insert(item.as_bytes());
    }
    let l = lfm.op_counter().hash_ops;
    let h = hll.op_counter().hash_ops;
    Verdict::new(
        l == inserts && h == inserts * cfg.bitmaps as u64,
        format!("{inserts} inserts: lfm {l} hashes, hyperloglog-fm {h} hashes (N={})", cfg.bitmaps),
    )
}

fn cost_bounds() -> Verdict {
    let t0 = Instant::now();
    let cfg = SketchConfig::default();
    let r = complexity(cfg, 1_000_000, 11).unwrap();
    let (l, m, n) = (cfg.hash_bits as i32, cfg.substrings as f64, cfg.bitmaps as f64);
    let lfm_bound = m * (2.0 - 0.5f64.powi(l / cfg.substrings as i32 - 1)) + n;
    let hll_expected = n * (2.0 - 0.5f64.powi(l - 1));
    let hll_rel = (r.hll_scans_per_insert - hll_expected).abs() / hll_expected;
    let elapsed = t0.elapsed();
    let lfm_ok = r.lfm_cost_per_insert <= lfm_bound;
    let hll_ok = hll_rel <= 0.05;
    Verdict::new(
        lfm_ok && hll_ok && elapsed < Duration::from_secs(60),
        format!(
            "lfm scans+steps {:.3}/insert vs bound {lfm_bound:.3} ({}); hyperloglog-fm scans {:.3} vs {hll_expected:.3}, rel {:.4} ({}); {:.1}s",
            r.lfm_cost_per_insert,
            if lfm_ok { "ok" } else { "exceeds" },
            r.hll_scans_per_insert,
            hll_rel,
            if hll_ok { "ok" } else { "off" },
            elapsed.as_secs_f64()
        ),
    )
}

fn estimation_accuracy() -> Verdict {
    let t0 = Instant::now();
    let rows = accuracy(&AccuracyConfig {
        bitmaps: vec![256],
        cardinalities: vec![1_000, 10_000, 100_000],
        trials: 30,
        seed: 1,
        ..Default::default()
    })
    .unwrap();
    let sd_limit = 2.0 * 0.78 / 256f64.sqrt();
    let combined_se = (2.0f64).sqrt() * 0.78 / 256f64.sqrt();
    let mut pass = true;
    let mut parts = Vec::new();
    for r in &rows {
        let sd_ok = r.lfm_sd <= sd_limit;
        let gap = (r.lfm_mean - r.hll_mean).abs() / r.cardinality as f64;
        let gap_ok = gap <= 2.0 * combined_se;
        pass &= sd_ok && gap_ok;
        parts.push(format!(
            "n={}: lfm sd {:.4}{} gap {:.4}{}",
            r.cardinality,
            r.lfm_sd,
            if sd_ok { "" } else { "!" },
            gap,
            if gap_ok { "" } else { "!" }
        ));
    }
    let elapsed = t0.elapsed();
    pass &= elapsed < Duration::from_secs(300);
    Verdict::new(
        pass,
        format!(
            "sd limit {sd_limit:.4}, gap limit {:.4}; {}; {:.1}s",
            2.0 * combined_se,
            parts.join("; "),
            elapsed.as_secs_f64()
        ),
    )
}

/// Every pair of patterns in the default matrix: how often both return the
/// same leftmost-1 position taken from the same substring.
fn collision_bound() -> Verdict {
    let cfg = SketchConfig::default();
    let sketch = LfmSketch::new(cfg).unwrap();
    let patterns: Vec<Vec<u8>> = sketch.patterns().rows().map(|r| r.to_vec()).collect();
    let n = patterns.len();
    let w = cfg.substring_bits();
    let hashes = 100_000u32;
    let mut counts = vec![0u32; n * n];
    let mut ops = OpCounter::default();
    let mut buckets: Vec<Vec<u16>> = vec![Vec::new(); (cfg.hash_bits * cfg.substrings) as usize];
    for i in 0..hashes {
        let digest = keyed_hash(&i.to_le_bytes(), cfg.hash_seed, cfg.hash_bits);
        let ix = split_and_index(digest, &cfg, &mut ops);
        buckets.iter_mut().for_each(Vec::clear);
        for (p, pat) in patterns.iter().enumerate() {
            if let Some(k) = permuted_leftmost_one(&ix, pat, w, &mut ops) {
                let slot = pat[(k / w) as usize] as u32;
                buckets[(k * cfg.substrings + slot) as usize].push(p as u16);
            }
        }
        for b in &buckets {
            for (x, &a) in b.iter().enumerate() {
                for &c in &b[x + 1..] {
                    counts[a as usize * n + c as usize] += 1;
                }
            }
        }
    }
    let bound = 1.0 / (cfg.substrings as f64).powi(2);
    let total = hashes as f64;
    let (mut pairs, mut violations, mut shared_lead, mut shared_lead_violations) = (0u64, 0u64, 0u64, 0u64);
    let mut worst_distinct_lead = 0.0f64;
    for a in 0..n {
        for b in a + 1..n {
            let p = counts[a * n + b] as f64 / total;
            let sigma = (p * (1.0 - p) / total).sqrt();
            let violated = p >= bound + 3.0 * sigma;
            pairs += 1;
            violations += violated as u64;
            if patterns[a][0] == patterns[b][0] {
                shared_lead += 1;
                shared_lead_violations += violated as u64;
            } else {
                worst_distinct_lead = worst_distinct_lead.max(p);
            }
        }
    }
    Verdict::new(
        violations == 0,
        format!(
            "{violations}/{pairs} pattern pairs at or above 1/64+3sigma; {shared_lead_violations}/{shared_lead} pairs sharing the leading substring; worst pair with distinct leads {worst_distinct_lead:.5}"
        ),
    )
}

// ---------------------------------------------------------------------------
// Simulated sweep

fn detection(rows: &[SweepRow], elapsed: Duration) -> Verdict {
    let attacks: Vec<&SweepRow> = rows.iter().filter(|r| r.attacks > 0).collect();
    let controls: Vec<&SweepRow> = rows.iter().filter(|r| r.attacks == 0).collect();
    let detected = attacks.iter().filter(|r| r.detection_rate == Some(1.0)).count();
    let fp_clean = rows.iter().all(|r| r.false_positive_rate == 0.0 && r.false_alarms == 0);
    let control_epochs: u64 = controls.iter().map(|r| r.scenario_epochs).sum();
    let pass = attacks.len() == 12
        && detected == 12
        && fp_clean
        && control_epochs >= 180
        && elapsed < Duration::from_secs(30 * 60);
    let fps: Vec<String> = rows
        .iter()
        .filter(|r| r.false_alarms > 0)
        .map(|r| format!("{}:{}", r.scenario, r.false_alarms))
        .collect();
    Verdict::new(
        pass,
        format!(
            "detected {detected}/{}; false alarms [{}]; {} control epochs; {:.1}s",
            attacks.len(),
            fps.join(","),
            control_epochs,
            elapsed.as_secs_f64()
        ),
    )
}

fn damage_shapes(rows: &[SweepRow]) -> Verdict {
    let by: BTreeMap<&str, &SweepRow> = rows.iter().map(|r| (r.scenario.as_str(), r)).collect();
    let hit = |s: &str| by[s].gateway_hit_rate_after.unwrap_or(f64::NAN);
    let rtt = |s: &str| by[s].avg_rtt_ms_after.unwrap_or(f64::NAN);
    let mut failures = Vec::new();

    for s in ["LDA2", "LDA4", "LDA6"] {
        if !(hit(s) < 0.05) {
            failures.push(format!("{s} hit {:.4}", hit(s)));
        }
    }
    let lda5 = hit("LDA5");
    for i in [1, 2, 3, 4, 6] {
        let other = format!("LDA{i}");
        if !(lda5 > hit(&other)) {
            failures.push(format!("LDA5 hit {lda5:.4} <= {other} {:.4}", hit(&other)));
        }
    }
    for i in 1..=6 {
        let fla = format!("FLA{i}");
        let pit = by[fla.as_str()].gateway_pit_min_after.unwrap_or(f64::NAN);
        if pit != 0.0 {
            failures.push(format!("{fla} pit min {pit:.4}"));
        }
        let lda = format!("LDA{i}");
        if !(rtt(&fla) > rtt(&lda)) {
            failures.push(format!("{fla} rtt {:.1}ms <= {lda} {:.1}ms", rtt(&fla), rtt(&lda)));
        }
    }
    Verdict::new(
        failures.is_empty(),
        if failures.is_empty() {
            "all shape checks hold".to_string()
        } else {
            failures.join("; ")
        },
    )
}

// ---------------------------------------------------------------------------

fn efficiency_ratio() -> Verdict {
    let r = bench(256, 200_000, 5, 1).unwrap();
    let rate = |m: DetectorMode| {
        r.results
            .iter()
            .find(|x| x.mode == m)
            .map(|x| x.interests_per_second)
            .unwrap_or(f64::NAN)
    };
    Verdict::new(
        r.elda_over_strawman >= 2.0,
        format!(
            "elda {:.0}/s, strawman {:.0}/s, ratio {:.2}",
            rate(DetectorMode::Elda),
            rate(DetectorMode::Strawman),
            r.elda_over_strawman
        ),
    )
}

/// Five prefixes of Zipf traffic with Poisson per-epoch volume, fed straight
/// to an ELDA detector.
fn stationary_false_alarms() -> (u64, u64) {
    let prefixes = ["/google.com", "/amazon.com", "/youtube.com", "/yahoo.com", "/facebook.com"];
    let mut det = Detector::elda(DetectorConfig::default()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let zipf = Zipf::new(10_000, 0.9).unwrap();
    let volume = Poisson::new(4_000.0).unwrap();
    for _ in 0..450 {
        let count = volume.sample(&mut rng) as u64;
        for _ in 0..count {
            let rank = zipf.sample(&mut rng) as u64;
            let name = format!("{}/{rank}", prefixes[(rank as usize - 1) % prefixes.len()]);
            det.observe_interest(&name);
        }
        det.end_epoch();
    }
    let judged = det.trace().iter().filter(|r| r.threshold.is_some()).count() as u64;
    let alarms = det.trace().iter().filter(|r| r.alarm).count() as u64;
    (alarms, judged)
}

fn threshold_behavior() -> Verdict {
    let (alarms, judged) = stationary_false_alarms();
    let alpha = ThresholdConfig::default().alpha;
    let rate = alarms as f64 / judged.max(1) as f64;
    let rate_ok = judged >= 2000 && rate <= 2.0 * alpha;

    let mut runner = TestRunner::new(ProptestConfig {
        cases: 64,
        failure_persistence: None,
        ..ProptestConfig::default()
    });
    let scale = runner.run(
        &(proptest::collection::vec(0.0f64..1e4, 2..12), 0.01f64..100.0),
        |(window, c)| {
            let cfg = ThresholdConfig::default();
            let base = mc_threshold(&MonitorHistory::from_values(10, &window).unwrap(), &cfg).unwrap();
            let scaled: Vec<f64> = window.iter().map(|v| v * c).collect();
            let t = mc_threshold(&MonitorHistory::from_values(10, &scaled).unwrap(), &cfg).unwrap();
            prop_assert!((t - c * base).abs() <= 1e-9 * (1.0 + c * base.abs()), "{t} vs {}", c * base);
            Ok(())
        },
    );
    let monotone = runner.run(
        &(proptest::collection::vec(0.0f64..1e4, 3..12), 0.001f64..0.2, 0.001f64..0.2),
        |(window, a, b)| {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            let h = MonitorHistory::from_values(10, &window).unwrap();
            let strict = ThresholdConfig {
                alpha: lo,
                ..Default::default()
            };
            let loose = ThresholdConfig {
                alpha: hi,
                ..Default::default()
            };
            prop_assert!(mc_threshold(&h, &strict).unwrap() >= mc_threshold(&h, &loose).unwrap());
            Ok(())
        },
    );
    Verdict::new(
        rate_ok && scale.is_ok() && monotone.is_ok(),
        format!(
            "{alarms} alarms over {judged} judged epochs (rate {rate:.4}, limit {:.4}); scale-equivariance {}; alpha-monotonicity {}",
            2.0 * alpha,
            if scale.is_ok() { "ok" } else { "FAILED" },
            if monotone.is_ok() { "ok" } else { "FAILED" }
        ),
    )
}

fn memory_shape() -> Verdict {
    let cfg = SketchConfig::default();
    let small = memory_footprint(1_000, cfg).unwrap();
    let large = memory_footprint(10_000, cfg).unwrap();
    let registers = cfg.bitmaps * cfg.hash_bits as usize;
    let elda_ok = small.elda_bits_per_prefix == registers && large.elda_bits_per_prefix == registers;
    let freq_ok = small.frequency_baseline_bits == 1_000 * FREQUENCY_RECORD_BITS
        && large.frequency_baseline_bits == 10_000 * FREQUENCY_RECORD_BITS;
    Verdict::new(
        elda_ok && freq_ok,
        format!(
            "elda {} -> {} bits, frequency baseline {} -> {} bits",
            small.elda_bits_per_prefix,
            large.elda_bits_per_prefix,
            small.frequency_baseline_bits,
            large.frequency_baseline_bits
        ),
    )
}

fn main() {
    let mut results: Vec<(&str, Verdict)> = Vec::new();
    let mut check = |name: &'static str, f: &mut dyn FnMut() -> Verdict| {
        let v = panic::catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Verdict::new(false, format!("panicked: {msg}"))
        });
        println!("{} {name}: {}", if v.pass { "PASS" } else { "FAIL" }, v.detail);
        results.push((name, v));
    };

    check("permutation-oracle", &mut permutation_oracle);
    check("hash-economy", &mut hash_economy);
    check("cost-bounds", &mut cost_bounds);
    check("estimation-accuracy", &mut estimation_accuracy);
    check("collision-bound", &mut collision_bound);

    let t0 = Instant::now();
    let swept = sweep(
        &builtin_names(),
        &[1],
        &RunOptions {
            record_trace: false,
            ..Default::default()
        },
    );
    let elapsed = t0.elapsed();
    match swept {
        Ok(out) => {
            check("detection", &mut || detection(&out.rows, elapsed));
            check("damage-shapes", &mut || damage_shapes(&out.rows));
        }
        Err(e) => {
            check("detection", &mut || Verdict::new(false, format!("sweep failed: {e}")));
            check("damage-shapes", &mut || Verdict::new(false, format!("sweep failed: {e}")));
        }
    }

    check("efficiency-ratio", &mut efficiency_ratio);
    check("threshold-behavior", &mut threshold_behavior);
    check("memory-shape", &mut memory_shape);

    let failed: Vec<&str> = results.iter().filter(|(_, v)| !v.pass).map(|(n, _)| *n).collect();
    println!(
        "acceptance: {} passed, {} failed{}",
        results.len() - failed.len(),
        failed.len(),
        if failed.is_empty() {
            String::new()
        } else {
            format!(" ({})", failed.join(", "))
        }
    );
    if !failed.is_empty() {
        std::process::exit(1);
    }
}
