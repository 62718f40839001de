//! Audio biofeedback for standing balance.
//!
//! Trunk pitch/roll is calibrated against a natural-stance baseline,
//! classified into one of six sway regions, and voiced as stereo warning
//! noise whose band, loudness, pan and gating follow the region. Trials are
//! run in a four-condition protocol with and without feedback, and balance
//! improvement is summarised as percentage reductions of the range and
//! variance of the sway distance.

pub mod audio;
pub mod condition;
pub mod dispersion;
pub mod ingest;
pub mod metrics;
pub mod session;
pub mod sim;
pub mod sway;

pub use condition::{Condition, Eyes, Group, Subject, Surface};
pub use metrics::{paired_improvement, trial_metrics, PairedImprovement, TrialMetrics};
pub use sway::{apply_baseline, calibrate, classify, dist, Baseline, RawSample, Region, SwayPoint, Warning};
pub use ingest::{open_source, regularize, DropoutPolicy, IngestError, SampleSource, SourceConfig, SourceKind};
pub use session::{run_protocol, run_trial, TrialRecord, TrialStatus, TrialStore};
pub use sim::{run_virtual_subject, SimConfig};
