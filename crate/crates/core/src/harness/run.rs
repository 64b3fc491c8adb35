//! Single scenario execution and its artifacts.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{write_csv, write_json};
use crate::detector::{score_run, Alarm, DetectionReport, DetectorMode, EpochRecord};
use crate::error::Result;
use crate::scenario::ScenarioSpec;
use crate::sim::{MetricsRow, SimCounters};

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub seed: Option<u64>,
    pub scale: f64,
    pub detector: DetectorMode,
    pub record_trace: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            seed: None,
            scale: 1.0,
            detector: DetectorMode::Elda,
            record_trace: true,
        }
    }
}

/// Attack-damage indicators read off the metrics trace.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DamageSummary {
    /// Mean gateway hit rate over seconds [0, 2).
    pub gateway_hit_rate_before: Option<f64>,
    /// Mean gateway hit rate from second 3 on.
    pub gateway_hit_rate_after: Option<f64>,
    /// Lowest gateway PIT availability from second 3 on.
    pub gateway_pit_min_after: Option<f64>,
    /// Mean gateway PIT availability from second 5 on.
    pub gateway_pit_mean_late: Option<f64>,
    /// Regular consumers' RTT from second 3 on, weighted by data received.
    pub avg_rtt_ms_after: Option<f64>,
    pub avg_rtt_ms_before: Option<f64>,
}

fn mean(xs: impl Iterator<Item = f64>) -> Option<f64> {
    let (s, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    (n > 0).then(|| s / n as f64)
}

impl DamageSummary {
    pub fn from_metrics(metrics: &[MetricsRow], gateway: &str) -> Self {
        let gw = || metrics.iter().filter(move |r| r.node == gateway);
        let rtt = |lo: u32, hi: u32| {
            let (mut s, mut w) = (0.0, 0.0);
            for r in metrics.iter().filter(|r| r.time_s >= lo && r.time_s < hi) {
                if let Some(x) = r.avg_rtt_ms {
                    s += x * r.data_out as f64;
                    w += r.data_out as f64;
                }
            }
            (w > 0.0).then(|| s / w)
        };
        DamageSummary {
            gateway_hit_rate_before: mean(gw().filter(|r| r.time_s < 2).filter_map(|r| r.cache_hit_rate)),
            gateway_hit_rate_after: mean(gw().filter(|r| r.time_s >= 3).filter_map(|r| r.cache_hit_rate)),
            gateway_pit_min_after: gw()
                .filter(|r| r.time_s >= 3)
                .filter_map(|r| r.pit_available_rate)
                .reduce(f64::min),
            gateway_pit_mean_late: mean(gw().filter(|r| r.time_s >= 5).filter_map(|r| r.pit_available_rate)),
            avg_rtt_ms_after: rtt(3, u32::MAX),
            avg_rtt_ms_before: rtt(0, 2),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub schema_version: u32,
    pub scenario: String,
    pub detector: DetectorMode,
    pub seed: u64,
    pub scale: f64,
    pub report: DetectionReport,
    pub damage: DamageSummary,
    pub counters: SimCounters,
    pub detector_footprint_bits: Vec<(String, usize)>,
    pub wall_seconds: f64,
}

#[derive(Debug)]
pub struct RunResult {
    pub summary: RunSummary,
    pub metrics: Vec<MetricsRow>,
    pub trace: Vec<DetectionRow>,
}

/// Detection trace CSV row. `time_s` is the scenario time at which the
/// epoch starts; warm-up epochs have negative times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionRow {
    pub time_s: i64,
    pub epoch: u64,
    pub prefix: String,
    pub statistic: f64,
    pub threshold: Option<f64>,
    pub alarm: bool,
    pub next_threshold: Option<f64>,
    /// History window after the epoch, `;`-separated.
    pub window: String,
}

impl DetectionRow {
    fn from_record(r: &EpochRecord, warmup_s: u32) -> Self {
        DetectionRow {
            time_s: r.epoch as i64 - warmup_s as i64,
            epoch: r.epoch,
            prefix: r.prefix.clone(),
            statistic: r.statistic,
            threshold: r.threshold,
            alarm: r.alarm,
            next_threshold: r.next_threshold,
            window: r.window.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(";"),
        }
    }
}

/// Apply seed, scale and detector overrides to a scenario.
pub fn prepare(spec: &ScenarioSpec, opts: &RunOptions) -> Result<ScenarioSpec> {
    let mut spec = spec.scaled(opts.scale)?;
    if let Some(seed) = opts.seed {
        spec.sim.seed = seed;
    }
    if let Some(d) = spec.sim.detector.as_mut() {
        d.mode = opts.detector;
    }
    spec.validate()?;
    Ok(spec)
}

pub fn run_scenario(spec: &ScenarioSpec, opts: &RunOptions) -> Result<RunResult> {
    let spec = prepare(spec, opts)?;
    let started = std::time::Instant::now();
    let out = spec.simulation()?.run();
    let schedule = spec.attack_schedule();
    let epoch_s = spec.sim.detector.as_ref().map_or(1.0, |d| d.epoch_s);
    let report = score_run(&out.alarms, &schedule, epoch_s);
    let gateway = spec.sim.detector_nodes.first().map_or("gateway", String::as_str);
    let damage = DamageSummary::from_metrics(&out.metrics, gateway);
    let trace = if opts.record_trace {
        out.detection_trace
            .iter()
            .map(|r| DetectionRow::from_record(r, spec.sim.warmup_s))
            .collect()
    } else {
        Vec::new()
    };
    Ok(RunResult {
        summary: RunSummary {
            schema_version: super::SCHEMA_VERSION,
            scenario: spec.name.clone(),
            detector: opts.detector,
            seed: spec.sim.seed,
            scale: opts.scale,
            report,
            damage,
            counters: out.counters,
            detector_footprint_bits: out.detector_footprint_bits,
            wall_seconds: started.elapsed().as_secs_f64(),
        },
        metrics: out.metrics,
        trace,
    })
}

/// Write `metrics.csv`, `detection.csv`, `alarms.jsonl` and `report.json`
/// under `dir`.
pub fn write_artifacts(result: &RunResult, dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let metrics = dir.join("metrics.csv");
    write_csv(&metrics, &result.metrics)?;
    let detection = dir.join("detection.csv");
    write_csv(&detection, &result.trace)?;
    let alarms = dir.join("alarms.jsonl");
    write_alarm_log(&alarms, &result.summary.report.alarms)?;
    let report = dir.join("report.json");
    write_json(&report, &result.summary)?;
    Ok(vec![metrics, detection, alarms, report])
}

pub fn write_alarm_log(path: &Path, alarms: &[Alarm]) -> Result<()> {
    let mut text = String::new();
    for a in alarms {
        text.push_str(&serde_json::to_string(a)?);
        text.push('\n');
    }
    std::fs::write(path, text)?;
    Ok(())
}
