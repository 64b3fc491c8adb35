//! All attack scenarios plus the no-attack controls.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::run::{run_scenario, write_artifacts, RunOptions, RunResult};
use super::write_csv;
use crate::error::Result;
use crate::scenario::{builtin, builtin_names};
use crate::sim::MetricsRow;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub scenario: String,
    pub detector: String,
    pub seed: u64,
    pub attacks: usize,
    pub detected: usize,
    pub detection_rate: Option<f64>,
    pub alarms: usize,
    pub false_alarms: usize,
    pub false_positive_rate: f64,
    pub detection_delay_s: Option<f64>,
    pub scenario_epochs: u64,
    pub gateway_hit_rate_before: Option<f64>,
    pub gateway_hit_rate_after: Option<f64>,
    pub gateway_pit_min_after: Option<f64>,
    pub avg_rtt_ms_after: Option<f64>,
    pub wall_seconds: f64,
}

/// Gateway and consumer-average series per scenario second, for charts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesRow {
    pub scenario: String,
    pub time_s: u32,
    pub gateway_hit_rate: Option<f64>,
    pub gateway_pit_available_rate: Option<f64>,
    pub avg_rtt_ms: Option<f64>,
}

pub fn series(scenario: &str, metrics: &[MetricsRow], gateway: &str) -> Vec<SeriesRow> {
    let last = metrics.iter().map(|r| r.time_s).max().map_or(0, |t| t + 1);
    (0..last)
        .map(|t| {
            let rows = metrics.iter().filter(|r| r.time_s == t);
            let gw = rows.clone().find(|r| r.node == gateway);
            let (mut s, mut w) = (0.0, 0.0);
            for r in rows {
                if let Some(x) = r.avg_rtt_ms {
                    s += x * r.data_out as f64;
                    w += r.data_out as f64;
                }
            }
            SeriesRow {
                scenario: scenario.to_owned(),
                time_s: t,
                gateway_hit_rate: gw.and_then(|r| r.cache_hit_rate),
                gateway_pit_available_rate: gw.and_then(|r| r.pit_available_rate),
                avg_rtt_ms: (w > 0.0).then(|| s / w),
            }
        })
        .collect()
}

impl SweepRow {
    fn from_result(r: &RunResult) -> Self {
        let s = &r.summary;
        let epochs = r.metrics.iter().map(|m| m.time_s).max().map_or(0, |t| t as u64 + 1);
        SweepRow {
            scenario: s.scenario.clone(),
            detector: s.detector.to_string(),
            seed: s.seed,
            attacks: s.report.attacks,
            detected: s.report.detected.iter().filter(|&&d| d).count(),
            detection_rate: s.report.detection_rate,
            alarms: s.report.alarms.len(),
            false_alarms: s.report.false_alarms,
            false_positive_rate: s.report.false_positive_rate,
            detection_delay_s: s.report.detection_delay_s.iter().flatten().copied().reduce(f64::max),
            scenario_epochs: epochs,
            gateway_hit_rate_before: s.damage.gateway_hit_rate_before,
            gateway_hit_rate_after: s.damage.gateway_hit_rate_after,
            gateway_pit_min_after: s.damage.gateway_pit_min_after,
            avg_rtt_ms_after: s.damage.avg_rtt_ms_after,
            wall_seconds: s.wall_seconds,
        }
    }
}

#[derive(Debug)]
pub struct SweepOutput {
    pub rows: Vec<SweepRow>,
    pub series: Vec<SeriesRow>,
    pub results: Vec<RunResult>,
}

/// Run `scenarios` (all built-ins when empty) for every seed, in parallel.
pub fn sweep(scenarios: &[String], seeds: &[u64], opts: &RunOptions) -> Result<SweepOutput> {
    let names = if scenarios.is_empty() { builtin_names() } else { scenarios.to_vec() };
    let jobs: Vec<(String, Option<u64>)> = names
        .iter()
        .flat_map(|n| {
            let seeds: Vec<Option<u64>> = if seeds.is_empty() { vec![opts.seed] } else { seeds.iter().map(|&s| Some(s)).collect() };
            seeds.into_iter().map(move |s| (n.clone(), s))
        })
        .collect();
    let results: Vec<RunResult> = jobs
        .par_iter()
        .map(|(name, seed)| {
            let spec = builtin(name)?;
            run_scenario(&spec, &RunOptions { seed: *seed, ..opts.clone() })
        })
        .collect::<Result<_>>()?;
    let rows = results.iter().map(SweepRow::from_result).collect();
    let series = results
        .iter()
        .flat_map(|r| series(&r.summary.scenario, &r.metrics, "gateway"))
        .collect();
    Ok(SweepOutput { rows, series, results })
}

/// `sweep_summary.csv`, `sweep_series.csv`, and one artifact directory per
/// run.
pub fn write_sweep(out: &SweepOutput, dir: &Path, per_run: bool) -> Result<()> {
    write_csv(&dir.join("sweep_summary.csv"), &out.rows)?;
    write_csv(&dir.join("sweep_series.csv"), &out.series)?;
    if per_run {
        for r in &out.results {
            let sub = dir.join(format!("{}-{}-seed{}", r.summary.scenario, r.summary.detector, r.summary.seed));
            write_artifacts(r, &sub)?;
        }
    }
    Ok(())
}
