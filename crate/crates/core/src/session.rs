//! Calibration, single trials, the eight-trial protocol and the trial store.

use crate::audio::{map_params, ParamsTimeline, SynthParams};
use crate::condition::{Condition, Group, Subject};
use crate::ingest::{open_source, GapStats, IngestError, Regularizer, SampleSource, SourceConfig, SourceStats};
use crate::metrics::{group_report, paired_improvement, trial_metrics, GroupReport, MetricsError, PairMap, PairedImprovement, TrialMetrics};
use crate::sway::{apply_baseline, calibrate, classify, dist, Baseline, RawSample, Region, SwayError, SwayPoint};
use chrono::{DateTime, Utc};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};
use thiserror::Error;
use uuid::Uuid;

pub const SCHEMA_VERSION: u32 = 1;
pub const NOMINAL_TRIAL_S: f64 = 60.0;
/// Trials per subject: four conditions, each with and without feedback.
pub const PROTOCOL_TRIALS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrialStatus {
    Complete,
    /// Stopped by the operator.
    Aborted,
    /// The source failed or ran dry before the trial ended.
    Incomplete,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub schema_version: u32,
    pub id: Uuid,
    pub subject_id: String,
    pub group: Group,
    pub condition: Condition,
    pub abf_on: bool,
    pub baseline: Baseline,
    /// Regularized, baseline-subtracted samples; `t` counts from trial start.
    pub samples: Vec<SwayPoint>,
    /// Absent only when no sample was collected.
    pub metrics: Option<TrialMetrics>,
    pub reference_volume: f64,
    pub started_at: DateTime<Utc>,
    pub source: SourceConfig,
    pub status: TrialStatus,
    #[serde(default)]
    pub gaps: GapStats,
    #[serde(default)]
    pub source_stats: SourceStats,
}

impl TrialRecord {
    pub fn subject(&self) -> Subject {
        Subject::new(self.subject_id.clone(), self.group)
    }

    pub fn recompute_metrics(&self) -> Result<TrialMetrics, MetricsError> {
        metrics_for(&self.samples)
    }
}

pub fn metrics_for(samples: &[SwayPoint]) -> Result<TrialMetrics, MetricsError> {
    let d: Vec<f64> = samples.iter().map(dist).collect();
    let r: Vec<Region> = samples.iter().map(classify).collect();
    trial_metrics(&d, &r)
}

#[derive(Debug, Error)]
pub enum SessionError {
    #[error("calibration required before a trial")]
    CalibrationMissing,
    #[error(transparent)]
    Calibration(#[from] SwayError),
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error("source lost after {} samples: {cause}", .partial.record.samples.len())]
    SourceLost { partial: Box<TrialRun>, cause: IngestError },
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error("operator cancelled before {condition} (feedback {abf_on})")]
    OperatorCancelled { condition: Condition, abf_on: bool },
}

/// One processed sample, as seen by trial observers.
#[derive(Debug, Clone, Copy)]
pub struct SampleEvent<'a> {
    pub index: usize,
    pub raw: RawSample,
    pub point: SwayPoint,
    pub region: Region,
    pub dist: f64,
    /// Present only with feedback on.
    pub params: Option<&'a SynthParams>,
}

#[derive(Debug, Clone)]
pub struct TrialSpec {
    pub subject: Subject,
    pub condition: Condition,
    pub abf_on: bool,
    pub duration_s: f64,
    pub reference_volume: f64,
    /// Used to express timeline positions in audio frames.
    pub audio_sample_rate: u32,
}

impl TrialSpec {
    pub fn new(subject: Subject, condition: Condition, abf_on: bool) -> Self {
        Self {
            subject,
            condition,
            abf_on,
            duration_s: NOMINAL_TRIAL_S,
            reference_volume: crate::audio::RenderConfig::default().reference_volume,
            audio_sample_rate: crate::audio::RenderConfig::default().sample_rate,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialRun {
    pub record: TrialRecord,
    /// Every parameter change pushed to the renderer; empty without feedback.
    pub timeline: ParamsTimeline,
}

/// Pulls regularized samples for `window` seconds and averages them. The
/// observer sees each sample used.
pub fn calibrate_source(
    source: &mut dyn SampleSource,
    cfg: &SourceConfig,
    window: f64,
    observer: &mut dyn FnMut(&RawSample),
) -> Result<Baseline, SessionError> {
    let mut reg = Regularizer::new(cfg.sample_rate, cfg.dropout_policy);
    let mut samples: Vec<RawSample> = Vec::new();
    loop {
        let raw = match source.next_sample() {
            None => break,
            Some(r) => r?,
        };
        reg.push(raw);
        while let Some(s) = reg.pop() {
            if samples.first().is_some_and(|f| s.t >= f.t + window) {
                return Ok(calibrate(&samples, window)?);
            }
            observer(&s);
            samples.push(s);
        }
    }
    Ok(calibrate(&samples, window)?)
}

/// Runs one trial: each regularized sample is baseline-subtracted,
/// classified and measured; with feedback on its synthesis parameters go to
/// the timeline and its warning back to the source.
///
/// Setting `abort` ends the trial early with status `Aborted`. Source
/// failure yields `SourceLost` carrying the partial run.
pub fn run_trial(
    source: &mut dyn SampleSource,
    source_cfg: &SourceConfig,
    baseline: Option<&Baseline>,
    spec: &TrialSpec,
    observer: &mut dyn FnMut(&SampleEvent),
    abort: &AtomicBool,
) -> Result<TrialRun, SessionError> {
    let baseline = *baseline.ok_or(SessionError::CalibrationMissing)?;
    let target = (spec.duration_s * source_cfg.sample_rate).round() as usize;
    let mut reg = Regularizer::new(source_cfg.sample_rate, source_cfg.dropout_policy);
    let mut timeline = ParamsTimeline::default();
    let mut samples = Vec::with_capacity(target);
    let mut t_start = None;
    let started_at = Utc::now();

    let finish = |samples: Vec<SwayPoint>, status, reg: &Regularizer, timeline, source: &dyn SampleSource| {
        let metrics = if samples.is_empty() { None } else { Some(metrics_for(&samples)?) };
        Ok::<_, MetricsError>(TrialRun {
            record: TrialRecord {
                schema_version: SCHEMA_VERSION,
                id: Uuid::new_v4(),
                subject_id: spec.subject.id.clone(),
                group: spec.subject.group,
                condition: spec.condition,
                abf_on: spec.abf_on,
                baseline,
                samples,
                metrics,
                reference_volume: spec.reference_volume,
                started_at,
                source: source_cfg.clone(),
                status,
                gaps: reg.stats(),
                source_stats: source.stats(),
            },
            timeline,
        })
    };

    while samples.len() < target {
        if abort.load(Ordering::Acquire) {
            return Ok(finish(samples, TrialStatus::Aborted, &reg, timeline, source)?);
        }
        let cause = match source.next_sample() {
            Some(Ok(raw)) => {
                reg.push(raw);
                None
            }
            Some(Err(e)) => Some(e),
            None => Some(IngestError::SourceUnavailable {
                source_desc: source_cfg.describe(),
                reason: "source ended before the trial did".into(),
            }),
        };
        if let Some(cause) = cause {
            let partial = finish(samples, TrialStatus::Incomplete, &reg, timeline, source)?;
            return Err(SessionError::SourceLost { partial: Box::new(partial), cause });
        }
        while samples.len() < target {
            let Some(raw) = reg.pop() else { break };
            let t0 = *t_start.get_or_insert(raw.t);
            let mut point = apply_baseline(&raw, &baseline);
            point.t = raw.t - t0;
            let region = classify(&point);
            let d = dist(&point);
            let params = spec.abf_on.then(|| map_params(&point));
            if let Some(p) = &params {
                let frame = (point.t * spec.audio_sample_rate as f64).round() as u64;
                timeline.record(point.t, frame, *p);
                source.feedback(region.warning());
            }
            observer(&SampleEvent { index: samples.len(), raw, point, region, dist: d, params: params.as_ref() });
            samples.push(point);
        }
    }
    Ok(finish(samples, TrialStatus::Complete, &reg, timeline, source)?)
}

/// Training mode: feedback runs but nothing is recorded. Returns the number
/// of samples processed.
pub fn free_run(
    source: &mut dyn SampleSource,
    source_cfg: &SourceConfig,
    baseline: &Baseline,
    duration_s: f64,
    observer: &mut dyn FnMut(&SampleEvent),
    abort: &AtomicBool,
) -> Result<usize, SessionError> {
    let spec = TrialSpec {
        duration_s,
        ..TrialSpec::new(Subject::new("training", Group::Unspecified), Condition::default(), true)
    };
    match run_trial(source, source_cfg, Some(baseline), &spec, observer, abort) {
        Ok(run) => Ok(run.record.samples.len()),
        Err(SessionError::SourceLost { partial, .. }) => Ok(partial.record.samples.len()),
        Err(e) => Err(e),
    }
}

// ---------------------------------------------------------------- protocol

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum TrialOrder {
    /// Conditions in report order, each without feedback first.
    #[default]
    Fixed,
    Shuffled { seed: u64 },
}

pub fn protocol_order(order: TrialOrder) -> Vec<(Condition, bool)> {
    let mut cells: Vec<(Condition, bool)> =
        Condition::ALL.iter().flat_map(|&c| [(c, false), (c, true)]).collect();
    if let TrialOrder::Shuffled { seed } = order {
        cells.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    }
    cells
}

/// Physical-world confirmation before each trial (surface and eyes are
/// changed by people).
pub trait Operator {
    /// `false` cancels the protocol; completed trials stay stored.
    fn confirm(&mut self, condition: Condition, abf_on: bool) -> bool;
}

/// Confirms everything; for simulated subjects.
pub struct AutoConfirm;

impl Operator for AutoConfirm {
    fn confirm(&mut self, _c: Condition, _abf_on: bool) -> bool {
        true
    }
}

#[derive(Debug, Clone)]
pub struct ProtocolOptions {
    pub order: TrialOrder,
    pub duration_s: f64,
    pub calibration_window_s: f64,
    pub reference_volume: f64,
    pub audio_sample_rate: u32,
    /// Recalibrate before every condition instead of once per subject.
    pub recalibrate_per_condition: bool,
}

impl Default for ProtocolOptions {
    fn default() -> Self {
        let spec = TrialSpec::new(Subject::new("", Group::Unspecified), Condition::default(), false);
        Self {
            order: TrialOrder::Fixed,
            duration_s: NOMINAL_TRIAL_S,
            calibration_window_s: crate::sway::DEFAULT_CALIBRATION_WINDOW_S,
            reference_volume: spec.reference_volume,
            audio_sample_rate: spec.audio_sample_rate,
            recalibrate_per_condition: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProtocolOutcome {
    /// The complete record for each cell, in run order.
    pub records: Vec<TrialRecord>,
    pub improvements: BTreeMap<Condition, PairedImprovement>,
    /// Trials run in this call; the rest were already stored.
    pub newly_run: usize,
}

/// Latest complete record per (condition, feedback) cell.
pub fn complete_cells(records: &[TrialRecord]) -> BTreeMap<(Condition, bool), &TrialRecord> {
    let mut out = BTreeMap::new();
    for r in records.iter().filter(|r| r.status == TrialStatus::Complete) {
        out.insert((r.condition, r.abf_on), r);
    }
    out
}

/// All eight cells have a complete record.
pub fn protocol_complete(records: &[TrialRecord]) -> bool {
    complete_cells(records).len() == PROTOCOL_TRIALS
}

/// Runs whatever cells of the subject's protocol are not yet stored. Each
/// trial opens a fresh source so simulated arms of a condition share seeds.
pub fn run_protocol(
    subject: &Subject,
    source_cfg: &SourceConfig,
    store: &TrialStore,
    opts: &ProtocolOptions,
    operator: &mut dyn Operator,
    observer: &mut dyn FnMut(Condition, bool, &SampleEvent),
    abort: &AtomicBool,
) -> Result<ProtocolOutcome, SessionError> {
    let existing = store.load(&subject.id)?;
    let done: BTreeMap<(Condition, bool), TrialRecord> =
        complete_cells(&existing).into_iter().map(|(k, v)| (k, v.clone())).collect();
    let mut baseline: Option<Baseline> = (!opts.recalibrate_per_condition)
        .then(|| done.values().next().map(|r| r.baseline))
        .flatten();
    let mut per_condition: BTreeMap<Condition, Baseline> = BTreeMap::new();
    if opts.recalibrate_per_condition {
        for r in done.values() {
            per_condition.insert(r.condition, r.baseline);
        }
    }

    let mut records = Vec::with_capacity(PROTOCOL_TRIALS);
    let mut newly_run = 0;
    for (condition, abf_on) in protocol_order(opts.order) {
        if let Some(r) = done.get(&(condition, abf_on)) {
            records.push(r.clone());
            continue;
        }
        if !operator.confirm(condition, abf_on) {
            return Err(SessionError::OperatorCancelled { condition, abf_on });
        }
        let cfg = source_cfg.with_condition(condition);
        let b = if opts.recalibrate_per_condition {
            match per_condition.get(&condition) {
                Some(b) => *b,
                None => {
                    let b = calibrate_source(&mut *open_source(&cfg)?, &cfg, opts.calibration_window_s, &mut |_| {})?;
                    per_condition.insert(condition, b);
                    b
                }
            }
        } else {
            match baseline {
                Some(b) => b,
                None => {
                    let b = calibrate_source(&mut *open_source(&cfg)?, &cfg, opts.calibration_window_s, &mut |_| {})?;
                    baseline = Some(b);
                    b
                }
            }
        };
        let spec = TrialSpec {
            duration_s: opts.duration_s,
            reference_volume: opts.reference_volume,
            audio_sample_rate: opts.audio_sample_rate,
            ..TrialSpec::new(subject.clone(), condition, abf_on)
        };
        let mut source = open_source(&cfg)?;
        let result = run_trial(&mut *source, &cfg, Some(&b), &spec, &mut |ev| observer(condition, abf_on, ev), abort);
        let run = match result {
            Ok(run) => run,
            Err(SessionError::SourceLost { partial, cause }) => {
                store.append(&partial.record)?;
                return Err(SessionError::SourceLost { partial, cause });
            }
            Err(e) => return Err(e),
        };
        store.append(&run.record)?;
        newly_run += 1;
        if run.record.status != TrialStatus::Complete {
            // aborted: stop here, the cell stays open for a later resume
            return Ok(ProtocolOutcome { records, improvements: BTreeMap::new(), newly_run });
        }
        records.push(run.record);
    }

    let improvements = improvements_for(&records)?;
    Ok(ProtocolOutcome { records, improvements, newly_run })
}

/// P_R/P_V per condition for one subject's complete cells.
pub fn improvements_for(records: &[TrialRecord]) -> Result<BTreeMap<Condition, PairedImprovement>, MetricsError> {
    let cells = complete_cells(records);
    let mut out = BTreeMap::new();
    for c in Condition::ALL {
        if let (Some(off), Some(on)) = (cells.get(&(c, false)), cells.get(&(c, true))) {
            if let (Some(m_off), Some(m_on)) = (&off.metrics, &on.metrics) {
                out.insert(c, paired_improvement(m_off, m_on)?);
            }
        }
    }
    Ok(out)
}

/// Paired improvements for every subject and condition with both arms.
pub fn report_pairs(records: &[TrialRecord]) -> Result<PairMap, MetricsError> {
    let mut by_subject: BTreeMap<Subject, Vec<TrialRecord>> = BTreeMap::new();
    for r in records {
        by_subject.entry(r.subject()).or_default().push(r.clone());
    }
    let mut pairs = PairMap::new();
    for (subject, recs) in by_subject {
        for (c, imp) in improvements_for(&recs)? {
            pairs.insert((subject.clone(), c), imp);
        }
    }
    Ok(pairs)
}

pub fn report_from_records(records: &[TrialRecord]) -> Result<GroupReport, MetricsError> {
    group_report(&report_pairs(records)?)
}

// ---------------------------------------------------------------- store

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}:{line}: schema version {found}, expected {expected}")]
    SchemaVersionMismatch { path: PathBuf, line: usize, found: u64, expected: u32 },
    #[error("{path}:{line}: {reason}")]
    Corrupt { path: PathBuf, line: usize, reason: String },
    #[error("subject id `{0}` must be non-empty and use only letters, digits, `-`, `_` or `.`")]
    InvalidSubjectId(String),
}

/// One JSON-lines file per subject, one record per line.
#[derive(Debug, Clone)]
pub struct TrialStore {
    dir: PathBuf,
}

impl TrialStore {
    pub fn open(dir: impl Into<PathBuf>) -> Result<Self, StoreError> {
        let dir = dir.into();
        std::fs::create_dir_all(&dir).map_err(|source| StoreError::Io { path: dir.clone(), source })?;
        Ok(Self { dir })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn path_for(&self, subject_id: &str) -> Result<PathBuf, StoreError> {
        let ok = !subject_id.is_empty()
            && !subject_id.starts_with('.')
            && subject_id.chars().all(|c| c.is_ascii_alphanumeric() || "-_.".contains(c));
        if !ok {
            return Err(StoreError::InvalidSubjectId(subject_id.to_string()));
        }
        Ok(self.dir.join(format!("{subject_id}.jsonl")))
    }

    pub fn append(&self, record: &TrialRecord) -> Result<(), StoreError> {
        let path = self.path_for(&record.subject_id)?;
        let io = |source| StoreError::Io { path: path.clone(), source };
        let mut line = serde_json::to_vec(record).map_err(|e| io(e.into()))?;
        line.push(b'\n');
        let mut f = std::fs::OpenOptions::new().create(true).append(true).open(&path).map_err(io)?;
        f.write_all(&line).map_err(io)?;
        f.sync_data().map_err(io)
    }

    /// Records of one subject in append order; empty if none stored.
    pub fn load(&self, subject_id: &str) -> Result<Vec<TrialRecord>, StoreError> {
        let path = self.path_for(subject_id)?;
        if !path.exists() {
            return Ok(Vec::new());
        }
        load_jsonl(&path)
    }

    pub fn subjects(&self) -> Result<Vec<String>, StoreError> {
        let io = |source| StoreError::Io { path: self.dir.clone(), source };
        let mut out = Vec::new();
        for entry in std::fs::read_dir(&self.dir).map_err(io)? {
            let p = entry.map_err(io)?.path();
            if p.extension().is_some_and(|e| e == "jsonl") {
                if let Some(stem) = p.file_stem().and_then(|s| s.to_str()) {
                    out.push(stem.to_string());
                }
            }
        }
        out.sort();
        Ok(out)
    }

    pub fn load_all(&self) -> Result<Vec<TrialRecord>, StoreError> {
        let mut out = Vec::new();
        for s in self.subjects()? {
            out.extend(self.load(&s)?);
        }
        Ok(out)
    }

    pub fn find(&self, id: Uuid) -> Result<Option<TrialRecord>, StoreError> {
        Ok(self.load_all()?.into_iter().find(|r| r.id == id))
    }
}

/// Reads a trial file; errors name the 1-based line.
pub fn load_jsonl(path: &Path) -> Result<Vec<TrialRecord>, StoreError> {
    let io = |source| StoreError::Io { path: path.to_path_buf(), source };
    let reader = BufReader::new(std::fs::File::open(path).map_err(io)?);
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(io)?;
        if line.trim().is_empty() {
            continue;
        }
        let corrupt = |reason: String| StoreError::Corrupt { path: path.to_path_buf(), line: line_no, reason };
        let value: serde_json::Value = serde_json::from_str(&line).map_err(|e| corrupt(e.to_string()))?;
        let found = value
            .get("schema_version")
            .and_then(|v| v.as_u64())
            .ok_or_else(|| corrupt("missing schema_version".into()))?;
        if found != SCHEMA_VERSION as u64 {
            return Err(StoreError::SchemaVersionMismatch {
                path: path.to_path_buf(),
                line: line_no,
                found,
                expected: SCHEMA_VERSION,
            });
        }
        out.push(serde_json::from_value(value).map_err(|e| corrupt(e.to_string()))?);
    }
    Ok(out)
}
