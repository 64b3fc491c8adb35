//! Per-name-prefix attack detection.
//!
//! Every interest is routed by its first name component to a
//! [`PrefixMonitor`], whose sketch counts the distinct full names seen in
//! the current epoch. At each epoch boundary the monitor's statistic is
//! compared with its threshold; exceeding it raises an [`Alarm`]. Statistics
//! of non-alarm epochs feed the history from which the next threshold is
//! computed. Until the history is full the monitor only learns.

use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::baselines::{FrequencyBaseline, FrequencyBaselineConfig, HyperloglogFmSketch};
use crate::error::{Error, Result};
use crate::lfm::{LfmSketch, PermutationPatternMatrix, SketchConfig};
use crate::sketch::{DistinctSketch, OpCounter};
use crate::threshold::{mc_threshold, MonitorHistory, ThresholdConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum DetectorMode {
    /// LFM sketch per prefix.
    Elda,
    /// Multi-hash hyperloglog-FM sketch per prefix.
    Strawman,
    /// Per-content request-frequency deviation.
    Freq,
}

impl std::fmt::Display for DetectorMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            DetectorMode::Elda => "elda",
            DetectorMode::Strawman => "strawman",
            DetectorMode::Freq => "freq",
        })
    }
}

/// Which per-epoch number is compared against the threshold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MonitoredStatistic {
    /// Calibrated cardinality estimate.
    #[default]
    Estimate,
    /// Raw harmonic mean of leftmost-zero indices.
    Harmonic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DetectorConfig {
    pub mode: DetectorMode,
    pub sketch: SketchConfig,
    pub threshold: ThresholdConfig,
    pub statistic: MonitoredStatistic,
    pub epoch_s: f64,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        DetectorConfig {
            mode: DetectorMode::Elda,
            sketch: SketchConfig::default(),
            threshold: ThresholdConfig::default(),
            statistic: MonitoredStatistic::Estimate,
            epoch_s: 1.0,
        }
    }
}

impl DetectorConfig {
    pub fn validate(&self) -> Result<()> {
        self.sketch.validate()?;
        self.threshold.validate()?;
        if !(self.epoch_s > 0.0 && self.epoch_s.is_finite()) {
            return Err(Error::config("epoch length must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Alarm {
    pub prefix: String,
    pub epoch_index: u64,
    pub statistic: f64,
    pub threshold: f64,
    /// Simulated time at the end of the alarmed epoch, in seconds.
    pub wall_time: f64,
}

/// One row of the per-epoch detection trace.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpochRecord {
    pub epoch: u64,
    pub prefix: String,
    pub statistic: f64,
    /// Threshold in force during the epoch, if one was set.
    pub threshold: Option<f64>,
    pub alarm: bool,
    /// History window after the epoch and the threshold derived from it.
    pub window: Vec<f64>,
    pub next_threshold: Option<f64>,
}

/// First component of a `/`-separated name, including its leading slash.
pub fn name_prefix(name: &str) -> Option<&str> {
    let rest = name.strip_prefix('/')?;
    let end = rest.find('/').map_or(rest.len(), |i| i);
    (end > 0).then(|| &name[..end + 1])
}

#[derive(Debug, Clone)]
pub struct PrefixMonitor<S> {
    pub prefix: String,
    pub sketch: S,
    pub history: MonitorHistory,
    pub threshold: Option<f64>,
    pub epoch_index: u64,
}

impl<S: DistinctSketch> PrefixMonitor<S> {
    fn statistic(&self, kind: MonitoredStatistic) -> f64 {
        if self.sketch.insert_count() == 0 {
            return 0.0;
        }
        match kind {
            MonitoredStatistic::Estimate => self.sketch.estimate(),
            MonitoredStatistic::Harmonic => self.sketch.harmonic_statistic(),
        }
    }
}

/// Builds a fresh sketch for a newly seen prefix.
pub trait SketchFactory {
    type Sketch: DistinctSketch;
    fn build(&self) -> Self::Sketch;
}

/// LFM sketches sharing one pattern matrix.
#[derive(Debug, Clone)]
pub struct LfmFactory {
    config: SketchConfig,
    patterns: Arc<PermutationPatternMatrix>,
    calibration: Option<f64>,
}

impl LfmFactory {
    pub fn new(config: SketchConfig) -> Result<Self> {
        config.validate()?;
        let patterns = PermutationPatternMatrix::generate(config.substrings, config.bitmaps, config.pattern_seed)?;
        Ok(LfmFactory {
            config,
            patterns: Arc::new(patterns),
            calibration: None,
        })
    }

    pub fn patterns(&self) -> &Arc<PermutationPatternMatrix> {
        &self.patterns
    }
}

impl SketchFactory for LfmFactory {
    type Sketch = LfmSketch;
    fn build(&self) -> LfmSketch {
        let s = LfmSketch::with_patterns(self.config, Arc::clone(&self.patterns)).expect("validated config");
        match self.calibration {
            Some(c) => s.with_calibration(c),
            None => s,
        }
    }
}

#[derive(Debug, Clone)]
pub struct HllFmFactory {
    bitmaps: usize,
    hash_bits: u32,
    seed: u32,
}

impl HllFmFactory {
    pub fn new(config: &SketchConfig) -> Result<Self> {
        HyperloglogFmSketch::new(config.bitmaps, config.hash_bits, config.hash_seed)?;
        Ok(HllFmFactory {
            bitmaps: config.bitmaps,
            hash_bits: config.hash_bits,
            seed: config.hash_seed,
        })
    }
}

impl SketchFactory for HllFmFactory {
    type Sketch = HyperloglogFmSketch;
    fn build(&self) -> HyperloglogFmSketch {
        HyperloglogFmSketch::new(self.bitmaps, self.hash_bits, self.seed).expect("validated config")
    }
}

/// Seed for one monitor's threshold computation at one epoch; depends only
/// on the prefix, so monitors are independent of one another.
fn threshold_seed(base: u64, prefix: &str, epoch: u64) -> u64 {
    let h = crate::hash::digest64(prefix.as_bytes());
    base ^ h.rotate_left(17) ^ epoch.wrapping_mul(0x9e37_79b9_7f4a_7c15)
}

/// Sketch-based detector: one [`PrefixMonitor`] per observed prefix.
#[derive(Debug)]
pub struct Detector<F: SketchFactory> {
    factory: F,
    config: DetectorConfig,
    monitors: BTreeMap<String, PrefixMonitor<F::Sketch>>,
    epoch: u64,
    time_origin: f64,
    trace: Vec<EpochRecord>,
    record_trace: bool,
}

pub type EldaDetector = Detector<LfmFactory>;
pub type StrawmanDetector = Detector<HllFmFactory>;

impl Detector<LfmFactory> {
    pub fn elda(config: DetectorConfig) -> Result<Self> {
        config.validate()?;
        Ok(Detector::new(LfmFactory::new(config.sketch)?, config))
    }

    /// Override the estimator calibration of every monitor's sketch.
    pub fn with_calibration(mut self, c: f64) -> Self {
        self.factory.calibration = Some(c);
        self
    }
}

impl Detector<HllFmFactory> {
    pub fn strawman(config: DetectorConfig) -> Result<Self> {
        config.validate()?;
        Ok(Detector::new(HllFmFactory::new(&config.sketch)?, config))
    }
}

impl<F: SketchFactory> Detector<F> {
    pub fn new(factory: F, config: DetectorConfig) -> Self {
        Detector {
            factory,
            config,
            monitors: BTreeMap::new(),
            epoch: 0,
            time_origin: 0.0,
            trace: Vec::new(),
            record_trace: true,
        }
    }

    /// Simulated time at which epoch 0 starts.
    pub fn with_time_origin(mut self, t: f64) -> Self {
        self.time_origin = t;
        self
    }

    pub fn without_trace(mut self) -> Self {
        self.record_trace = false;
        self
    }

    pub fn config(&self) -> &DetectorConfig {
        &self.config
    }

    pub fn epoch(&self) -> u64 {
        self.epoch
    }

    pub fn monitor(&self, prefix: &str) -> Option<&PrefixMonitor<F::Sketch>> {
        self.monitors.get(prefix)
    }

    pub fn monitors(&self) -> impl Iterator<Item = &PrefixMonitor<F::Sketch>> {
        self.monitors.values()
    }

    pub fn trace(&self) -> &[EpochRecord] {
        &self.trace
    }

    pub fn take_trace(&mut self) -> Vec<EpochRecord> {
        std::mem::take(&mut self.trace)
    }

    /// Feed one interest name. Names without a first component are ignored.
    pub fn observe_interest(&mut self, name: &str) {
        let Some(prefix) = name_prefix(name) else {
            return;
        };
        let item = name.as_bytes();
        if let Some(m) = self.monitors.get_mut(prefix) {
            m.sketch.insert(item);
            return;
        }
        let mut monitor = PrefixMonitor {
            prefix: prefix.to_owned(),
            sketch: self.factory.build(),
            history: MonitorHistory::new(self.config.threshold.sample_size),
            threshold: None,
            epoch_index: self.epoch,
        };
        monitor.sketch.insert(item);
        self.monitors.insert(prefix.to_owned(), monitor);
    }

    /// Close the current epoch on every monitor and return its alarms.
    pub fn end_epoch(&mut self) -> Vec<Alarm> {
        let wall_time = self.time_origin + (self.epoch + 1) as f64 * self.config.epoch_s;
        let mut alarms = Vec::new();
        for monitor in self.monitors.values_mut() {
            let statistic = monitor.statistic(self.config.statistic);
            let in_force = monitor.threshold;
            let alarm = matches!(in_force, Some(t) if statistic > t);
            if alarm {
                alarms.push(Alarm {
                    prefix: monitor.prefix.clone(),
                    epoch_index: monitor.epoch_index,
                    statistic,
                    threshold: in_force.unwrap_or_default(),
                    wall_time,
                });
            } else if monitor.history.push(statistic).is_ok() && monitor.history.is_full() {
                let cfg = ThresholdConfig {
                    rng_seed: threshold_seed(self.config.threshold.rng_seed, &monitor.prefix, monitor.epoch_index),
                    ..self.config.threshold
                };
                monitor.threshold = mc_threshold(&monitor.history, &cfg).ok();
            }
            if self.record_trace {
                self.trace.push(EpochRecord {
                    epoch: monitor.epoch_index,
                    prefix: monitor.prefix.clone(),
                    statistic,
                    threshold: in_force,
                    alarm,
                    window: monitor.history.values().collect(),
                    next_threshold: monitor.threshold,
                });
            }
            monitor.sketch.reset();
            monitor.epoch_index += 1;
        }
        self.epoch += 1;
        alarms
    }

    /// Register bits held per prefix monitor.
    pub fn per_prefix_footprint(&self) -> usize {
        self.factory.build().memory_footprint()
    }

    pub fn op_counter(&self) -> OpCounter {
        let mut total = OpCounter::default();
        for m in self.monitors.values() {
            total += m.sketch.op_counter();
        }
        total
    }
}

/// Frequency-deviation detector wrapped to the same epoch interface.
#[derive(Debug)]
pub struct FrequencyDetector {
    baseline: FrequencyBaseline,
    prefixes: Vec<String>,
    prefix_ids: HashMap<String, u32>,
    epoch: u64,
    epoch_s: f64,
    time_origin: f64,
    trace: Vec<EpochRecord>,
}

impl FrequencyDetector {
    pub fn new(config: FrequencyBaselineConfig, epoch_s: f64) -> Result<Self> {
        Ok(FrequencyDetector {
            baseline: FrequencyBaseline::new(config)?,
            prefixes: Vec::new(),
            prefix_ids: HashMap::new(),
            epoch: 0,
            epoch_s,
            time_origin: 0.0,
            trace: Vec::new(),
        })
    }

    pub fn with_time_origin(mut self, t: f64) -> Self {
        self.time_origin = t;
        self
    }

    pub fn observe_interest(&mut self, name: &str) {
        let Some(prefix) = name_prefix(name) else {
            return;
        };
        let tag = match self.prefix_ids.get(prefix) {
            Some(&id) => id,
            None => {
                let id = self.prefixes.len() as u32;
                self.prefixes.push(prefix.to_owned());
                self.prefix_ids.insert(prefix.to_owned(), id);
                id
            }
        };
        self.baseline.observe_tagged(name.as_bytes(), tag);
    }

    pub fn end_epoch(&mut self) -> Vec<Alarm> {
        let wall_time = self.time_origin + (self.epoch + 1) as f64 * self.epoch_s;
        // Strongest deviation per prefix.
        let mut worst: BTreeMap<u32, (f64, f64)> = BTreeMap::new();
        for a in self.baseline.check_all() {
            let e = worst.entry(a.tag).or_insert((a.count as f64, a.threshold));
            if a.count as f64 - a.threshold > e.0 - e.1 {
                *e = (a.count as f64, a.threshold);
            }
        }
        let alarms: Vec<Alarm> = worst
            .into_iter()
            .map(|(tag, (statistic, threshold))| Alarm {
                prefix: self.prefixes[tag as usize].clone(),
                epoch_index: self.epoch,
                statistic,
                threshold,
                wall_time,
            })
            .collect();
        for a in &alarms {
            self.trace.push(EpochRecord {
                epoch: self.epoch,
                prefix: a.prefix.clone(),
                statistic: a.statistic,
                threshold: Some(a.threshold),
                alarm: true,
                window: Vec::new(),
                next_threshold: None,
            });
        }
        self.baseline.end_epoch();
        self.epoch += 1;
        alarms
    }

    pub fn baseline(&self) -> &FrequencyBaseline {
        &self.baseline
    }

    pub fn take_trace(&mut self) -> Vec<EpochRecord> {
        std::mem::take(&mut self.trace)
    }
}

/// Any of the three detectors behind one interface.
#[derive(Debug)]
pub enum AnyDetector {
    Elda(EldaDetector),
    Strawman(StrawmanDetector),
    Freq(FrequencyDetector),
}

impl AnyDetector {
    pub fn build(config: &DetectorConfig) -> Result<Self> {
        Ok(match config.mode {
            DetectorMode::Elda => AnyDetector::Elda(Detector::elda(*config)?),
            DetectorMode::Strawman => AnyDetector::Strawman(Detector::strawman(*config)?),
            DetectorMode::Freq => AnyDetector::Freq(FrequencyDetector::new(FrequencyBaselineConfig::default(), config.epoch_s)?),
        })
    }

    pub fn with_time_origin(self, t: f64) -> Self {
        match self {
            AnyDetector::Elda(d) => AnyDetector::Elda(d.with_time_origin(t)),
            AnyDetector::Strawman(d) => AnyDetector::Strawman(d.with_time_origin(t)),
            AnyDetector::Freq(d) => AnyDetector::Freq(d.with_time_origin(t)),
        }
    }

    #[inline]
    pub fn observe_interest(&mut self, name: &str) {
        match self {
            AnyDetector::Elda(d) => d.observe_interest(name),
            AnyDetector::Strawman(d) => d.observe_interest(name),
            AnyDetector::Freq(d) => d.observe_interest(name),
        }
    }

    pub fn end_epoch(&mut self) -> Vec<Alarm> {
        match self {
            AnyDetector::Elda(d) => d.end_epoch(),
            AnyDetector::Strawman(d) => d.end_epoch(),
            AnyDetector::Freq(d) => d.end_epoch(),
        }
    }

    pub fn take_trace(&mut self) -> Vec<EpochRecord> {
        match self {
            AnyDetector::Elda(d) => d.take_trace(),
            AnyDetector::Strawman(d) => d.take_trace(),
            AnyDetector::Freq(d) => d.take_trace(),
        }
    }

    /// Detection state in bits: register bits per monitored prefix for the
    /// sketch detectors, record storage for the frequency baseline.
    pub fn memory_footprint(&self) -> usize {
        match self {
            AnyDetector::Elda(d) => d.monitors().count() * d.per_prefix_footprint(),
            AnyDetector::Strawman(d) => d.monitors().count() * d.per_prefix_footprint(),
            AnyDetector::Freq(d) => d.baseline().memory_footprint(),
        }
    }
}

/// Ground-truth attack interval on one prefix, in simulated seconds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackInterval {
    pub prefix: String,
    pub start_s: f64,
    pub end_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DetectionReport {
    /// Detected attacks over actual attacks; `None` without attacks.
    pub detection_rate: Option<f64>,
    /// False positives over all alarms; 0 when there are no alarms.
    pub false_positive_rate: f64,
    pub attacks: usize,
    pub detected: Vec<bool>,
    pub true_alarms: usize,
    pub false_alarms: usize,
    /// Seconds from each attack's onset to the end of its first alarmed
    /// epoch.
    pub detection_delay_s: Vec<Option<f64>>,
    pub alarms: Vec<Alarm>,
}

/// Score alarms against the attack schedule. An alarm covers the epoch
/// `[wall_time - epoch_s, wall_time)`; it is a true detection when that
/// epoch overlaps an attack interval on the same prefix.
pub fn score_run(alarms: &[Alarm], schedule: &[AttackInterval], epoch_s: f64) -> DetectionReport {
    let overlaps = |a: &Alarm, iv: &AttackInterval| {
        a.prefix == iv.prefix && a.wall_time - epoch_s < iv.end_s && a.wall_time > iv.start_s
    };
    let mut detected = vec![false; schedule.len()];
    let mut delays = vec![None; schedule.len()];
    let mut true_alarms = 0;
    for a in alarms {
        let mut hit = false;
        for (i, iv) in schedule.iter().enumerate() {
            if overlaps(a, iv) {
                hit = true;
                detected[i] = true;
                let d = a.wall_time - iv.start_s;
                delays[i] = Some(delays[i].map_or(d, |old: f64| old.min(d)));
            }
        }
        true_alarms += hit as usize;
    }
    let false_alarms = alarms.len() - true_alarms;
    DetectionReport {
        detection_rate: (!schedule.is_empty())
            .then(|| detected.iter().filter(|&&d| d).count() as f64 / schedule.len() as f64),
        false_positive_rate: if alarms.is_empty() {
            0.0
        } else {
            false_alarms as f64 / alarms.len() as f64
        },
        attacks: schedule.len(),
        detected,
        true_alarms,
        false_alarms,
        detection_delay_s: delays,
        alarms: alarms.to_vec(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BenchResult {
    pub mode: DetectorMode,
    pub interests: usize,
    pub ns_per_interest: f64,
    pub interests_per_second: f64,
}

/// Time the insert path of a detector over a pre-generated name stream.
/// The best of `rounds` passes is reported, each on a fresh detector.
pub fn bench_insert_path(config: &DetectorConfig, stream: &[String], rounds: usize) -> Result<BenchResult> {
    let mut best = f64::INFINITY;
    for _ in 0..rounds.max(1) {
        let mut det = AnyDetector::build(config)?;
        let start = Instant::now();
        for name in stream {
            det.observe_interest(name);
        }
        let elapsed = start.elapsed().as_secs_f64();
        std::hint::black_box(&det);
        best = best.min(elapsed);
    }
    let ns = best * 1e9 / stream.len().max(1) as f64;
    Ok(BenchResult {
        mode: config.mode,
        interests: stream.len(),
        ns_per_interest: ns,
        interests_per_second: 1e9 / ns,
    })
}
