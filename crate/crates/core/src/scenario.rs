//! Scenario descriptions: topology, traffic profiles, simulator and
//! detector settings. Stored as TOML; the attack and control scenarios are
//! also built in.
//!
//! ```toml
//! name = "LDA1"
//! prefixes = ["/google.com", "/yahoo.com"]
//! topology_file = "tree.toml"        # or an inline [topology] table
//!
//! [profiles.regular]
//! kind = "regular"
//! alpha = 0.7
//! rate = 3000.0
//! catalog = 10000
//!
//! [profiles.attack]
//! kind = "lda"                       # lda | fla | regular | idle
//! rate = 3000.0
//! prefix = "/yahoo.com"
//! start_s = 2.0
//!
//! [sim]
//! duration_s = 60
//! seed = 1
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::detector::AttackInterval;
use crate::error::{Error, Result};
use crate::sim::topology::NodeKind;
use crate::sim::{Network, PrefixTable, SimConfig, Simulation, TopologySpec, TrafficProfile};

pub const DEFAULT_PREFIXES: [&str; 5] = ["/google.com", "/amazon.com", "/youtube.com", "/yahoo.com", "/facebook.com"];
pub const ATTACK_PREFIX: &str = "/yahoo.com";
pub const ATTACKERS: [usize; 3] = [2, 4, 7];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    pub prefixes: Vec<String>,
    /// Relative paths resolve against the scenario file's directory.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub topology_file: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub topology: Option<TopologySpec>,
    pub profiles: BTreeMap<String, TrafficProfile>,
    #[serde(default)]
    pub sim: SimConfig,
}

impl ScenarioSpec {
    pub fn from_toml(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Parse(e.to_string()))
    }

    /// Read a scenario file and inline its topology file, if any.
    pub fn load(path: &Path) -> Result<Self> {
        let mut spec = Self::from_toml(&std::fs::read_to_string(path)?)?;
        if let Some(file) = spec.topology_file.take() {
            if spec.topology.is_some() {
                return Err(Error::config("give either topology or topology_file, not both"));
            }
            let file = path.parent().map_or(file.clone(), |dir| dir.join(&file));
            spec.topology = Some(toml::from_str(&std::fs::read_to_string(&file)?)?);
        }
        spec.validate()?;
        Ok(spec)
    }

    /// Built-in scenario by name, or a scenario file path.
    pub fn resolve(name_or_path: &str) -> Result<Self> {
        match builtin(name_or_path) {
            Ok(s) => Ok(s),
            Err(_) if Path::new(name_or_path).is_file() => Self::load(Path::new(name_or_path)),
            Err(e) => Err(e),
        }
    }

    pub fn topology(&self) -> Result<&TopologySpec> {
        self.topology
            .as_ref()
            .ok_or_else(|| Error::config(format!("scenario {:?} has no topology", self.name)))
    }

    pub fn validate(&self) -> Result<()> {
        if self.topology_file.is_some() {
            return Err(Error::config("topology_file must be resolved with ScenarioSpec::load"));
        }
        self.sim.validate()?;
        let prefixes = PrefixTable::new(&self.prefixes)?;
        for (name, p) in &self.profiles {
            p.validate().map_err(|e| Error::config(format!("profile {name:?}: {e}")))?;
            if let Some((prefix, _, _)) = p.attack_interval(self.sim.duration_s as f64) {
                if prefixes.id(prefix).is_none() {
                    return Err(Error::config(format!("profile {name:?} attacks unknown prefix {prefix:?}")));
                }
            }
        }
        let topology = self.topology()?;
        Network::build(topology, &prefixes, self.sim.seed)?;
        for n in &topology.nodes {
            if let Some(p) = &n.profile {
                if !self.profiles.contains_key(p) {
                    return Err(Error::config(format!("node {:?} uses unknown profile {p:?}", n.name)));
                }
            }
        }
        Ok(())
    }

    /// Ground-truth attack intervals implied by the profiles in use;
    /// attackers sharing one profile form one attack.
    pub fn attack_schedule(&self) -> Vec<AttackInterval> {
        let mut out: Vec<AttackInterval> = Vec::new();
        let Some(topology) = &self.topology else {
            return out;
        };
        for n in &topology.nodes {
            if n.kind != NodeKind::Consumer {
                continue;
            }
            let Some(p) = n.profile.as_ref().and_then(|p| self.profiles.get(p)) else {
                continue;
            };
            if p.rate() <= 0.0 {
                continue;
            }
            if let Some((prefix, start_s, end_s)) = p.attack_interval(self.sim.duration_s as f64) {
                let iv = AttackInterval {
                    prefix: prefix.to_owned(),
                    start_s,
                    end_s,
                };
                if !out.contains(&iv) {
                    out.push(iv);
                }
            }
        }
        out
    }

    /// Rates, store sizes, PIT size and catalog divided by `s`.
    pub fn scaled(&self, s: f64) -> Result<Self> {
        if !(s >= 1.0 && s.is_finite()) {
            return Err(Error::config("scale must be a finite number >= 1"));
        }
        let mut out = self.clone();
        if s == 1.0 {
            return Ok(out);
        }
        for p in out.profiles.values_mut() {
            *p = p.scaled(s);
        }
        out.sim.cs_capacity = ((self.sim.cs_capacity as f64 / s).round() as usize).max(1);
        out.sim.pit_capacity = ((self.sim.pit_capacity as f64 / s).round() as usize).max(1);
        Ok(out)
    }

    pub fn simulation(&self) -> Result<Simulation> {
        self.validate()?;
        Simulation::new(self.topology()?, &self.profiles, &self.prefixes, self.sim.clone())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AttackKind {
    Lda,
    Fla,
}

/// (alpha, per-attacker intensity) of attack scenarios 1 to 6.
pub const ATTACK_GRID: [(f64, f64); 6] = [
    (0.7, 3000.0),
    (0.7, 6000.0),
    (0.9, 3000.0),
    (0.9, 6000.0),
    (1.1, 3000.0),
    (1.1, 6000.0),
];

pub const CONTROL_ALPHAS: [f64; 3] = [0.7, 0.9, 1.1];

fn regular(alpha: f64) -> TrafficProfile {
    TrafficProfile::Regular {
        alpha,
        rate: 3000.0,
        catalog: 10_000,
    }
}

fn base(name: String, description: String, alpha: f64, attack: TrafficProfile) -> ScenarioSpec {
    ScenarioSpec {
        name,
        description: Some(description),
        prefixes: DEFAULT_PREFIXES.iter().map(|s| s.to_string()).collect(),
        topology_file: None,
        topology: Some(TopologySpec::tree(&ATTACKERS)),
        profiles: BTreeMap::from([("regular".into(), regular(alpha)), ("attack".into(), attack)]),
        sim: SimConfig::default(),
    }
}

pub fn attack_scenario(kind: AttackKind, index: usize) -> Result<ScenarioSpec> {
    let &(alpha, rate) = index
        .checked_sub(1)
        .and_then(|i| ATTACK_GRID.get(i))
        .ok_or_else(|| Error::UnknownScenario(format!("attack index {index}")))?;
    let (name, profile) = match kind {
        AttackKind::Lda => (
            format!("LDA{index}"),
            TrafficProfile::Lda {
                rate,
                prefix: ATTACK_PREFIX.into(),
                start_s: 2.0,
                end_s: None,
            },
        ),
        AttackKind::Fla => (
            format!("FLA{index}"),
            TrafficProfile::Fla {
                rate,
                prefix: ATTACK_PREFIX.into(),
                unpopular_start_s: 2.0,
                nonexistent_start_s: 3.0,
                end_s: None,
            },
        ),
    };
    let description = format!("zipf alpha {alpha}, {rate} attack interests/s per compromised consumer");
    Ok(base(name, description, alpha, profile))
}

/// Same network with the compromised consumers idle.
pub fn control_scenario(alpha: f64) -> ScenarioSpec {
    base(
        format!("baseline-noattack-a{alpha}"),
        format!("zipf alpha {alpha}, no attack"),
        alpha,
        TrafficProfile::Idle,
    )
}

pub fn builtin_names() -> Vec<String> {
    let mut names = Vec::new();
    for kind in ["LDA", "FLA"] {
        for i in 1..=6 {
            names.push(format!("{kind}{i}"));
        }
    }
    for a in CONTROL_ALPHAS {
        names.push(format!("baseline-noattack-a{a}"));
    }
    names
}

/// Look up a built-in scenario. Controls also accept `α` for `a`.
pub fn builtin(name: &str) -> Result<ScenarioSpec> {
    let unknown = || Error::UnknownScenario(name.to_owned());
    let upper = name.to_ascii_uppercase();
    for (tag, kind) in [("LDA", AttackKind::Lda), ("FLA", AttackKind::Fla)] {
        if let Some(rest) = upper.strip_prefix(tag) {
            let i: usize = rest.parse().map_err(|_| unknown())?;
            return attack_scenario(kind, i).map_err(|_| unknown());
        }
    }
    let alpha = name
        .strip_prefix("baseline-noattack-")
        .map(|r| r.trim_start_matches('α').trim_start_matches('a'))
        .ok_or_else(unknown)?;
    CONTROL_ALPHAS
        .iter()
        .find(|a| a.to_string() == alpha)
        .map(|&a| control_scenario(a))
        .ok_or_else(unknown)
}
