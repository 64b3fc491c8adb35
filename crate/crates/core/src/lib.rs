//! Cache-pollution attack detection for NDN routers.
//!
//! The [`lfm`] sketch counts distinct interest names per name prefix using a
//! single hash per insert; [`threshold`] derives an alarm threshold from a
//! short history by bootstrap resampling; [`detector`] ties both together per
//! prefix. [`sim`] is a discrete-event NDN simulator used to replay the
//! attack scenarios and [`harness`] drives experiments from the CLI.

pub mod baselines;
pub mod codec;
pub mod detector;
pub mod error;
pub mod estimator;
pub mod harness;
pub mod hash;
pub mod lfm;
pub mod scenario;
pub mod sim;
pub mod sketch;
pub mod threshold;

pub use baselines::{ExactCounter, FrequencyBaseline, HyperloglogFmSketch};
pub use detector::{Alarm, AnyDetector, DetectionReport, Detector, DetectorConfig, DetectorMode};
pub use error::{Error, Result};
pub use lfm::{LfmSketch, PermutationPatternMatrix, SketchConfig};
pub use sketch::{DistinctSketch, OpCounter};
pub use threshold::{mc_threshold, MonitorHistory, ThresholdConfig};
