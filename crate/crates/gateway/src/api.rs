//! JSON shapes exchanged with the console.

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use swaycue_core::audio::SynthParams;
use swaycue_core::metrics::TrialMetrics;
use swaycue_core::{Baseline, Condition, Group, Region, TrialRecord, TrialStatus};
use uuid::Uuid;

/// Which activity produced a telemetry frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activity {
    Calibrating,
    Trial,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameState {
    pub activity: Activity,
    /// Absent while calibrating.
    pub condition: Option<Condition>,
    pub abf_on: bool,
    /// Zero-based sample index within the activity.
    pub index: usize,
    /// Samples the activity will collect if it runs to completion.
    pub total: usize,
}

/// What the console needs to show about the current sound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParamsSummary {
    pub region: Region,
    pub band_low: f64,
    pub band_high: f64,
    pub gate_period: Option<f64>,
    pub volume_mult: f64,
    pub pan: f64,
}

impl From<&SynthParams> for ParamsSummary {
    fn from(p: &SynthParams) -> Self {
        Self {
            region: p.region,
            band_low: p.band_low,
            band_high: p.band_high,
            gate_period: p.gate_period,
            volume_mult: p.volume_mult,
            pan: p.pan,
        }
    }
}

/// One processed sway sample.
///
/// While calibrating `x`/`y` are the raw pitch/roll and `region` is null;
/// during a trial they are baseline-subtracted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TelemetryFrame {
    /// Per-engine counter, starting at 0.
    pub seq: u64,
    /// Seconds since engine start; strictly increasing.
    pub engine_t: f64,
    /// Seconds since the start of the activity.
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub x_norm: f64,
    pub y_norm: f64,
    pub region: Option<Region>,
    pub warning: Option<String>,
    pub dist: f64,
    /// Null unless feedback is on.
    pub params: Option<ParamsSummary>,
    pub state: FrameState,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    /// No baseline yet.
    Idle,
    Calibrating,
    /// Calibrated and waiting for a trial.
    Ready,
    Running,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurrentTrial {
    pub condition: Condition,
    pub abf_on: bool,
    pub stopping: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EngineState {
    pub phase: Phase,
    pub subject_id: String,
    pub group: Group,
    pub baseline: Option<Baseline>,
    pub reference_volume: f64,
    pub current_trial: Option<CurrentTrial>,
    pub last_trial: Option<TrialSummary>,
    pub last_error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialSummary {
    pub id: Uuid,
    pub subject_id: String,
    pub group: Group,
    pub condition: Condition,
    pub abf_on: bool,
    pub status: TrialStatus,
    pub started_at: DateTime<Utc>,
    pub n_samples: usize,
    pub metrics: Option<TrialMetrics>,
}

impl From<&TrialRecord> for TrialSummary {
    fn from(r: &TrialRecord) -> Self {
        Self {
            id: r.id,
            subject_id: r.subject_id.clone(),
            group: r.group,
            condition: r.condition,
            abf_on: r.abf_on,
            status: r.status,
            started_at: r.started_at,
            n_samples: r.samples.len(),
            metrics: r.metrics,
        }
    }
}

/// One of the eight protocol cells for the configured subject.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolCell {
    pub condition: Condition,
    pub abf_on: bool,
    /// Id of the complete record filling this cell, if any.
    pub trial_id: Option<Uuid>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialsResponse {
    pub trials: Vec<TrialSummary>,
    pub cells: Vec<ProtocolCell>,
    pub protocol_complete: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StartTrialRequest {
    pub condition: Condition,
    pub abf_on: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VolumeRequest {
    pub reference_volume: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StopResponse {
    /// False when no trial was running.
    pub stopped: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorBody {
    /// Machine-readable code, e.g. `CalibrationMissing`.
    pub error: String,
    pub message: String,
}
