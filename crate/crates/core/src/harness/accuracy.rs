//! Estimation accuracy of both sketches against an exact count.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::HyperloglogFmSketch;
use crate::error::Result;
use crate::lfm::{LfmSketch, SketchConfig};
use crate::sketch::DistinctSketch;

/// The `i`-th distinct item of trial `trial`.
#[inline]
pub fn trial_item(trial: u64, i: u64) -> [u8; 8] {
    ((trial << 40) | i).to_le_bytes()
}

/// Insert distinct items into a fresh sketch and read `f` at each
/// checkpoint cardinality (ascending).
pub fn checkpoint_readings<S, F>(mut sketch: S, trial: u64, checkpoints: &[u64], f: F) -> Vec<f64>
where
    S: DistinctSketch,
    F: Fn(&S) -> f64,
{
    let mut out = Vec::with_capacity(checkpoints.len());
    let mut inserted = 0u64;
    for &c in checkpoints {
        while inserted < c {
            sketch.insert(&trial_item(trial, inserted));
            inserted += 1;
        }
        out.push(f(&sketch));
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyConfig {
    pub bitmaps: Vec<usize>,
    pub cardinalities: Vec<u64>,
    pub trials: u64,
    pub seed: u64,
    pub hash_bits: u32,
    pub substrings: u32,
}

impl Default for AccuracyConfig {
    fn default() -> Self {
        AccuracyConfig {
            bitmaps: vec![256, 1024],
            cardinalities: vec![0, 1_000, 10_000, 100_000],
            trials: 30,
            seed: 1,
            hash_bits: 32,
            substrings: 8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyRow {
    pub bitmaps: usize,
    pub cardinality: u64,
    pub trials: u64,
    pub lfm_mean: f64,
    /// Mean relative error.
    pub lfm_bias: f64,
    /// Standard deviation of the relative error.
    pub lfm_sd: f64,
    pub hll_mean: f64,
    pub hll_bias: f64,
    pub hll_sd: f64,
    /// Reference standard error 0.78/sqrt(N).
    pub reference_se: f64,
    /// Relative difference of the two mean estimates.
    pub mean_gap: f64,
    /// sqrt(2) * reference_se: standard error of the difference of two
    /// single estimates.
    pub combined_se: f64,
}

fn rel_stats(estimates: &[f64], truth: u64) -> (f64, f64, f64) {
    let n = estimates.len() as f64;
    let mean = estimates.iter().sum::<f64>() / n;
    if truth == 0 {
        let sd = (estimates.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0)).sqrt();
        return (mean, mean, sd);
    }
    let rel: Vec<f64> = estimates.iter().map(|e| e / truth as f64 - 1.0).collect();
    let bias = rel.iter().sum::<f64>() / n;
    let sd = (rel.iter().map(|r| (r - bias).powi(2)).sum::<f64>() / (n - 1.0).max(1.0)).sqrt();
    (mean, bias, sd)
}

pub fn accuracy(cfg: &AccuracyConfig) -> Result<Vec<AccuracyRow>> {
    let mut checkpoints = cfg.cardinalities.clone();
    checkpoints.sort_unstable();
    checkpoints.dedup();
    let mut rows = Vec::new();
    for &n in &cfg.bitmaps {
        let sketch_cfg = SketchConfig::new(cfg.hash_bits, cfg.substrings, n)?;
        LfmSketch::new(sketch_cfg)?;
        HyperloglogFmSketch::new(n, cfg.hash_bits, sketch_cfg.hash_seed)?;
        let trials: Vec<(Vec<f64>, Vec<f64>)> = (0..cfg.trials)
            .into_par_iter()
            .map(|t| {
                let trial = cfg.seed.wrapping_mul(1_000_003).wrapping_add(t) & 0xff_ffff;
                let lfm = LfmSketch::new(sketch_cfg).expect("validated");
                let hll = HyperloglogFmSketch::new(n, cfg.hash_bits, sketch_cfg.hash_seed).expect("validated");
                (
                    checkpoint_readings(lfm, trial, &checkpoints, |s| s.estimate()),
                    checkpoint_readings(hll, trial, &checkpoints, |s| s.estimate()),
                )
            })
            .collect();
        for (ci, &card) in checkpoints.iter().enumerate() {
            let lfm: Vec<f64> = trials.iter().map(|t| t.0[ci]).collect();
            let hll: Vec<f64> = trials.iter().map(|t| t.1[ci]).collect();
            let (lfm_mean, lfm_bias, lfm_sd) = rel_stats(&lfm, card);
            let (hll_mean, hll_bias, hll_sd) = rel_stats(&hll, card);
            let reference_se = 0.78 / (n as f64).sqrt();
            rows.push(AccuracyRow {
                bitmaps: n,
                cardinality: card,
                trials: cfg.trials,
                lfm_mean,
                lfm_bias,
                lfm_sd,
                hll_mean,
                hll_bias,
                hll_sd,
                reference_se,
                mean_gap: if card == 0 { 0.0 } else { (lfm_mean - hll_mean).abs() / card as f64 },
                combined_se: std::f64::consts::SQRT_2 * reference_se,
            });
        }
    }
    Ok(rows)
}
