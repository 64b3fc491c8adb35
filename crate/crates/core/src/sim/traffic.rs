//! Consumer traffic: Zipf-distributed regular requests and the two attack
//! generators.

use rand::Rng;
use rand_distr::{Distribution, Zipf};
use serde::{Deserialize, Serialize};

use super::name::ContentKey;
use crate::error::{Error, Result};

/// First id of the unpopular range used by attackers.
pub const UNPOPULAR_BASE: u64 = 1_000_000;
/// First id of the nonexistent range; producers never answer these.
pub const NONEXISTENT_BASE: u64 = 1_000_000_000;
/// Id space reserved per attacker inside each range.
pub const ATTACKER_STRIDE: u64 = 10_000_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum TrafficProfile {
    /// Poisson arrivals, ranks drawn from Zipf(alpha, catalog).
    Regular { alpha: f64, rate: f64, catalog: u64 },
    /// Never-repeating unpopular names under one prefix at a constant rate.
    Lda {
        rate: f64,
        prefix: String,
        start_s: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        end_s: Option<f64>,
    },
    /// Unpopular names from `unpopular_start_s`, then nonexistent names
    /// from `nonexistent_start_s`.
    Fla {
        rate: f64,
        prefix: String,
        unpopular_start_s: f64,
        nonexistent_start_s: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        end_s: Option<f64>,
    },
    /// Sends nothing.
    Idle,
}

impl TrafficProfile {
    pub fn validate(&self) -> Result<()> {
        let rate_ok = |r: f64| r.is_finite() && r >= 0.0;
        match self {
            TrafficProfile::Regular { alpha, rate, catalog } => {
                if !(*alpha > 0.0 && alpha.is_finite()) {
                    return Err(Error::config("zipf alpha must be positive"));
                }
                if !rate_ok(*rate) {
                    return Err(Error::config("rate must be non-negative"));
                }
                if *catalog == 0 || *catalog >= UNPOPULAR_BASE {
                    return Err(Error::config(format!("catalog must be in 1..{UNPOPULAR_BASE}")));
                }
            }
            TrafficProfile::Lda { rate, start_s, end_s, .. } => {
                if !rate_ok(*rate) || *start_s < 0.0 || end_s.is_some_and(|e| e < *start_s) {
                    return Err(Error::config("invalid LDA profile timing or rate"));
                }
            }
            TrafficProfile::Fla {
                rate,
                unpopular_start_s,
                nonexistent_start_s,
                end_s,
                ..
            } => {
                if !rate_ok(*rate)
                    || *unpopular_start_s < 0.0
                    || nonexistent_start_s < unpopular_start_s
                    || end_s.is_some_and(|e| e < *unpopular_start_s)
                {
                    return Err(Error::config("invalid FLA profile timing or rate"));
                }
            }
            TrafficProfile::Idle => {}
        }
        Ok(())
    }

    pub fn is_attack(&self) -> bool {
        matches!(self, TrafficProfile::Lda { .. } | TrafficProfile::Fla { .. })
    }

    pub fn rate(&self) -> f64 {
        match self {
            TrafficProfile::Regular { rate, .. } | TrafficProfile::Lda { rate, .. } | TrafficProfile::Fla { rate, .. } => {
                *rate
            }
            TrafficProfile::Idle => 0.0,
        }
    }

    /// Attack prefix and active interval, for attack profiles.
    pub fn attack_interval(&self, duration_s: f64) -> Option<(&str, f64, f64)> {
        match self {
            TrafficProfile::Lda {
                prefix, start_s, end_s, ..
            } => Some((prefix, *start_s, end_s.unwrap_or(duration_s).min(duration_s))),
            TrafficProfile::Fla {
                prefix,
                unpopular_start_s,
                end_s,
                ..
            } => Some((prefix, *unpopular_start_s, end_s.unwrap_or(duration_s).min(duration_s))),
            _ => None,
        }
    }

    /// Profile with its rate and catalog divided by `s`.
    pub fn scaled(&self, s: f64) -> Self {
        let mut p = self.clone();
        match &mut p {
            TrafficProfile::Regular { rate, catalog, .. } => {
                *rate /= s;
                *catalog = ((*catalog as f64 / s).round() as u64).max(1);
            }
            TrafficProfile::Lda { rate, .. } | TrafficProfile::Fla { rate, .. } => *rate /= s,
            TrafficProfile::Idle => {}
        }
        p
    }
}

/// Zipf rank in `[1, catalog]` with `P(i) ∝ i^-alpha`.
#[derive(Debug, Clone, Copy)]
pub struct ZipfSampler {
    dist: Zipf<f64>,
}

impl ZipfSampler {
    pub fn new(alpha: f64, catalog: u64) -> Result<Self> {
        let dist = Zipf::new(catalog, alpha).map_err(|e| Error::config(format!("zipf: {e}")))?;
        Ok(ZipfSampler { dist })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        self.dist.sample(rng) as u64
    }
}

/// Content key for a regular rank: ranks are spread round-robin over the
/// prefixes and the rank itself is the identifier.
pub fn regular_key(rank: u64, prefixes: usize) -> ContentKey {
    ContentKey::new(((rank - 1) % prefixes as u64) as u16, rank)
}

/// Name stream of one attacker.
#[derive(Debug, Clone)]
pub struct AttackGenerator {
    prefix: u16,
    unpopular_next: u64,
    nonexistent_next: u64,
    nonexistent_start_s: Option<f64>,
}

impl AttackGenerator {
    /// `attacker` is the index of this attacker among all attackers.
    pub fn new(profile: &TrafficProfile, prefix: u16, attacker: u64) -> Self {
        let nonexistent_start_s = match profile {
            TrafficProfile::Fla { nonexistent_start_s, .. } => Some(*nonexistent_start_s),
            _ => None,
        };
        AttackGenerator {
            prefix,
            unpopular_next: UNPOPULAR_BASE + attacker * ATTACKER_STRIDE,
            nonexistent_next: NONEXISTENT_BASE + attacker * ATTACKER_STRIDE,
            nonexistent_start_s,
        }
    }

    /// Next name to send at scenario time `t_s`.
    pub fn next_key(&mut self, t_s: f64) -> ContentKey {
        let counter = match self.nonexistent_start_s {
            Some(start) if t_s >= start => &mut self.nonexistent_next,
            _ => &mut self.unpopular_next,
        };
        let id = *counter;
        *counter += 1;
        ContentKey::new(self.prefix, id)
    }
}

pub fn is_nonexistent(key: ContentKey) -> bool {
    key.id() >= NONEXISTENT_BASE
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::baselines::ExactCounter;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn single_item_catalog() {
        let z = ZipfSampler::new(0.9, 1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!((0..1000).all(|_| z.sample(&mut rng) == 1));
    }

    fn rank_one_frequency(alpha: f64, draws: usize) -> f64 {
        let z = ZipfSampler::new(alpha, 10_000).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        (0..draws).filter(|_| z.sample(&mut rng) == 1).count() as f64 / draws as f64
    }

    #[test]
    fn rank_one_mass_matches_normalisation() {
        let norm: f64 = (1..=10_000u64).map(|j| (j as f64).powf(-0.9)).sum();
        let p = 1.0 / norm;
        let n = 1_000_000;
        let sigma = (p * (1.0 - p) / n as f64).sqrt();
        let f = rank_one_frequency(0.9, n);
        assert!((f - p).abs() < 3.0 * sigma, "{f} vs {p}");
    }

    #[test]
    fn larger_alpha_concentrates() {
        assert!(rank_one_frequency(1.1, 100_000) > rank_one_frequency(0.7, 100_000));
    }

    #[test]
    fn lda_names_are_distinct_and_prefixed() {
        let p = TrafficProfile::Lda {
            rate: 3000.0,
            prefix: "/yahoo.com".into(),
            start_s: 0.0,
            end_s: None,
        };
        let mut g = AttackGenerator::new(&p, 3, 0);
        let mut exact = ExactCounter::new();
        for i in 0..30_000 {
            let k = g.next_key(i as f64 / 3000.0);
            assert_eq!(k.prefix(), 3);
            assert!(k.id() >= UNPOPULAR_BASE && !is_nonexistent(k));
            exact.insert(&k.0.to_le_bytes());
        }
        assert_eq!(exact.count(), 30_000);
    }

    #[test]
    fn fla_switches_ranges() {
        let p = TrafficProfile::Fla {
            rate: 3000.0,
            prefix: "/yahoo.com".into(),
            unpopular_start_s: 2.0,
            nonexistent_start_s: 3.0,
            end_s: None,
        };
        let mut g = AttackGenerator::new(&p, 3, 1);
        assert!(!is_nonexistent(g.next_key(2.5)));
        assert!(is_nonexistent(g.next_key(3.5)));
    }

    #[test]
    fn attackers_use_disjoint_ranges() {
        let p = TrafficProfile::Lda {
            rate: 1.0,
            prefix: "/a".into(),
            start_s: 0.0,
            end_s: None,
        };
        let a = AttackGenerator::new(&p, 0, 0).next_key(0.0);
        let b = AttackGenerator::new(&p, 0, 1).next_key(0.0);
        assert_eq!(b.id() - a.id(), ATTACKER_STRIDE);
    }

    #[test]
    fn scaling_divides_rate_and_catalog() {
        let p = TrafficProfile::Regular {
            alpha: 0.9,
            rate: 3000.0,
            catalog: 10_000,
        };
        assert_eq!(
            p.scaled(10.0),
            TrafficProfile::Regular {
                alpha: 0.9,
                rate: 300.0,
                catalog: 1000
            }
        );
    }

    #[test]
    fn regular_keys_cycle_prefixes() {
        assert_eq!(regular_key(1, 5), ContentKey::new(0, 1));
        assert_eq!(regular_key(7, 5), ContentKey::new(1, 7));
    }

    #[test]
    fn profile_validation() {
        assert!(TrafficProfile::Regular {
            alpha: 0.0,
            rate: 1.0,
            catalog: 10
        }
        .validate()
        .is_err());
        assert!(TrafficProfile::Fla {
            rate: 1.0,
            prefix: "/a".into(),
            unpopular_start_s: 3.0,
            nonexistent_start_s: 2.0,
            end_s: None
        }
        .validate()
        .is_err());
    }
}
