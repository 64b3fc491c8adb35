//! Fit the estimator constant `C` so that the median of `C * 2^H / n` over
//! the calibration grid is 1.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::accuracy::checkpoint_readings;
use crate::baselines::HyperloglogFmSketch;
use crate::error::Result;
use crate::lfm::{LfmSketch, SketchConfig};
use crate::sketch::DistinctSketch;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationConfig {
    pub cardinalities: Vec<u64>,
    pub trials: u64,
    pub seed: u64,
    pub sketch: SketchConfig,
    /// Cardinality checked with the fitted constant but not used to fit it.
    pub holdout: u64,
}

impl Default for CalibrationConfig {
    fn default() -> Self {
        CalibrationConfig {
            cardinalities: vec![100, 1_000, 10_000, 100_000],
            trials: 50,
            seed: 1,
            sketch: SketchConfig::default(),
            holdout: 50_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Residual {
    pub cardinality: u64,
    /// Median of `C * 2^H / n` minus 1.
    pub median_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SketchCalibration {
    pub constant: f64,
    pub residuals: Vec<Residual>,
    pub holdout_median_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationReport {
    pub config: CalibrationConfig,
    pub lfm: SketchCalibration,
    pub hll_fm: SketchCalibration,
    /// |C_lfm - C_hll| / C_hll.
    pub relative_gap: f64,
}

pub fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n == 0 {
        return f64::NAN;
    }
    if n % 2 == 1 {
        values[n / 2]
    } else {
        (values[n / 2 - 1] + values[n / 2]) / 2.0
    }
}

fn fit<S, F>(cfg: &CalibrationConfig, make: F) -> SketchCalibration
where
    S: DistinctSketch,
    F: Fn() -> S + Sync,
{
    let mut points = cfg.cardinalities.clone();
    points.push(cfg.holdout);
    points.sort_unstable();
    points.dedup();
    let readings: Vec<Vec<f64>> = (0..cfg.trials)
        .into_par_iter()
        .map(|t| {
            let trial = (cfg.seed.wrapping_mul(0x5851_f42d) ^ (t + 1).wrapping_mul(0x9e37)) & 0xff_ffff;
            checkpoint_readings(make(), trial, &points, |s| s.harmonic_statistic())
                .iter()
                .zip(&points)
                .map(|(h, &n)| h.exp2() / n as f64)
                .collect()
        })
        .collect();
    let column = |n: u64| -> Vec<f64> {
        let i = points.iter().position(|&p| p == n).expect("checkpoint");
        readings.iter().map(|r| r[i]).collect()
    };
    let mut all: Vec<f64> = cfg.cardinalities.iter().flat_map(|&n| column(n)).collect();
    let constant = 1.0 / median(&mut all);
    let residuals = cfg
        .cardinalities
        .iter()
        .map(|&n| {
            let mut c: Vec<f64> = column(n).iter().map(|r| r * constant).collect();
            Residual {
                cardinality: n,
                median_error: median(&mut c) - 1.0,
            }
        })
        .collect();
    let mut h: Vec<f64> = column(cfg.holdout).iter().map(|r| r * constant).collect();
    SketchCalibration {
        constant,
        residuals,
        holdout_median_ratio: median(&mut h),
    }
}

pub fn calibrate(cfg: &CalibrationConfig) -> Result<CalibrationReport> {
    cfg.sketch.validate()?;
    let sk = cfg.sketch;
    let proto = LfmSketch::new(sk)?;
    let patterns = proto.patterns().clone();
    let lfm = fit(cfg, || LfmSketch::with_patterns(sk, patterns.clone()).expect("validated"));
    HyperloglogFmSketch::new(sk.bitmaps, sk.hash_bits, sk.hash_seed)?;
    let hll_fm = fit(cfg, || HyperloglogFmSketch::new(sk.bitmaps, sk.hash_bits, sk.hash_seed).expect("validated"));
    let relative_gap = (lfm.constant - hll_fm.constant).abs() / hll_fm.constant;
    Ok(CalibrationReport {
        config: cfg.clone(),
        lfm,
        hll_fm,
        relative_gap,
    })
}
