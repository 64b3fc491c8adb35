//! Detection thresholds from a small window of recent monitoring results.
//!
//! The threshold is an upper bound the per-epoch statistic stays below with
//! probability `1 - alpha` under regular traffic. One-sided Chebyshev
//! (Cantelli) bounds `P(X >= mu + k sigma) <= 1 / (1 + k^2)`, so
//! `k = sqrt((1 - alpha) / alpha)`. Because `mu` and `sigma` come from only
//! `n` observations, the bound is bootstrapped: each resample yields its own
//! bound, and a candidate threshold is accepted once no more than a fraction
//! `alpha` of the resampled bounds reach it. Candidates start at
//! `mu + sigma` and grow by `growth_step * sigma` per round.

use std::collections::VecDeque;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative margin above the mean when the window has zero spread.
pub const ZERO_SPREAD_MARGIN: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdConfig {
    pub alpha: f64,
    pub sample_size: usize,
    pub resamples: usize,
    pub growth_step: f64,
    pub rng_seed: u64,
}

impl Default for ThresholdConfig {
    fn default() -> Self {
        ThresholdConfig {
            alpha: 0.005,
            sample_size: 10,
            resamples: 1000,
            growth_step: 0.5,
            rng_seed: 0x7412_ba5e,
        }
    }
}

impl ThresholdConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::config(format!("significance {} must lie in (0, 1)", self.alpha)));
        }
        if (self.resamples as f64) < 1.0 / self.alpha {
            return Err(Error::config(format!(
                "{} resamples cannot resolve significance {}",
                self.resamples, self.alpha
            )));
        }
        if self.sample_size < 2 {
            return Err(Error::config("threshold sample size must be at least 2"));
        }
        if !(self.growth_step > 0.0 && self.growth_step.is_finite()) {
            return Err(Error::config("growth step must be positive"));
        }
        Ok(())
    }

    /// Cantelli multiplier for this significance level.
    pub fn chebyshev_k(&self) -> f64 {
        ((1.0 - self.alpha) / self.alpha).sqrt()
    }
}

/// The most recent per-epoch statistics of one prefix.
#[derive(Debug, Clone, PartialEq)]
pub struct MonitorHistory {
    window: VecDeque<f64>,
    capacity: usize,
}

impl MonitorHistory {
    pub fn new(capacity: usize) -> Self {
        MonitorHistory {
            window: VecDeque::with_capacity(capacity),
            capacity,
        }
    }

    pub fn from_values(capacity: usize, values: &[f64]) -> Result<Self> {
        let mut h = Self::new(capacity);
        for &v in values {
            h.push(v)?;
        }
        Ok(h)
    }

    /// Append an observation, dropping the oldest when full.
    pub fn push(&mut self, value: f64) -> Result<()> {
        if !value.is_finite() || value < 0.0 {
            return Err(Error::InvalidObservation(value));
        }
        if self.window.len() == self.capacity {
            self.window.pop_front();
        }
        self.window.push_back(value);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.window.len()
    }

    pub fn is_empty(&self) -> bool {
        self.window.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.window.len() >= self.capacity
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn values(&self) -> impl ExactSizeIterator<Item = f64> + '_ {
        self.window.iter().copied()
    }
}

/// Mean and sample standard deviation.
pub fn mean_and_stddev(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Draw `|window|` observations from the window uniformly with replacement.
pub fn bootstrap_resample<R: Rng + ?Sized>(history: &MonitorHistory, rng: &mut R) -> Result<Vec<f64>> {
    if history.is_empty() {
        return Err(Error::InsufficientHistory { needed: 1, available: 0 });
    }
    let n = history.len();
    Ok((0..n).map(|_| history.window[rng.gen_range(0..n)]).collect())
}

/// Threshold for the next epoch's statistic given the recent window.
pub fn mc_threshold(history: &MonitorHistory, cfg: &ThresholdConfig) -> Result<f64> {
    cfg.validate()?;
    if history.len() < 2 {
        return Err(Error::InsufficientHistory {
            needed: 2,
            available: history.len(),
        });
    }
    let window: Vec<f64> = history.values().collect();
    if let Some(&bad) = window.iter().find(|v| !v.is_finite() || **v < 0.0) {
        return Err(Error::InvalidObservation(bad));
    }
    let (mu, sigma) = mean_and_stddev(&window);
    if sigma == 0.0 {
        return Ok(mu * (1.0 + ZERO_SPREAD_MARGIN));
    }

    let k = cfg.chebyshev_k();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    let mut bounds = Vec::with_capacity(cfg.resamples);
    let mut resample = vec![0.0; window.len()];
    for _ in 0..cfg.resamples {
        for slot in resample.iter_mut() {
            *slot = window[rng.gen_range(0..window.len())];
        }
        let (m, s) = mean_and_stddev(&resample);
        bounds.push(m + k * s);
    }
    bounds.sort_unstable_by(f64::total_cmp);

    // Largest number of bounds allowed at or above an accepted candidate.
    let allowed = (cfg.alpha * cfg.resamples as f64).floor() as usize;
    let step = cfg.growth_step * sigma;
    let mut candidate = mu + sigma;
    loop {
        let at_or_above = bounds.len() - bounds.partition_point(|&b| b < candidate);
        if at_or_above <= allowed {
            return Ok(candidate);
        }
        // Jump straight past rounds that cannot succeed.
        let target = bounds[bounds.len() - allowed - 1];
        let rounds = ((target - candidate) / step).floor().max(0.0);
        candidate += rounds * step;
        let at_or_above = bounds.len() - bounds.partition_point(|&b| b < candidate);
        if at_or_above <= allowed {
            return Ok(candidate);
        }
        candidate += step;
    }
}
