//! Discrete-event NDN simulator.
//!
//! Single-threaded and deterministic: simulated time is kept in integer
//! nanoseconds and simultaneous events are ordered by insertion sequence.

pub mod cs;
pub mod engine;
pub mod link;
pub mod name;
pub mod pit;
pub mod topology;
pub mod traffic;

pub use engine::{MetricsRow, SimConfig, SimCounters, SimOutput, Simulation};
pub use name::{ContentKey, Name, PrefixTable};
pub use topology::{LinkSpec, Network, NodeKind, NodeSpec, TopologySpec};
pub use traffic::TrafficProfile;

/// Nanoseconds per simulated second.
pub const NS_PER_S: u64 = 1_000_000_000;

pub(crate) fn secs_to_ns(s: f64) -> u64 {
    (s * NS_PER_S as f64).round() as u64
}
