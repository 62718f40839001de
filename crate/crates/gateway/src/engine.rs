//! The engine actor: one mailbox serializes every command, worker threads
//! run calibration and trials, and telemetry fans out through a broadcast
//! channel that never blocks the sample path.

use crate::api::{
    Activity, CurrentTrial, EngineState, FrameState, ParamsSummary, Phase, StartTrialRequest, StopResponse,
    TelemetryFrame, TrialSummary,
};
use std::path::PathBuf;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Instant;
use swaycue_core::audio::{AudioSink, Control, LiveRenderer, RenderConfig};
use swaycue_core::session::{calibrate_source, SampleEvent, SessionError, TrialSpec, NOMINAL_TRIAL_S};
use swaycue_core::sway::{normalize_display, DEFAULT_CALIBRATION_WINDOW_S};
use swaycue_core::{open_source, Baseline, SourceConfig, Subject, TrialRecord, TrialStore};
use thiserror::Error;
use tokio::sync::{broadcast, mpsc, oneshot};

/// Frames buffered per subscriber before it starts skipping.
pub const TELEMETRY_CAPACITY: usize = 256;
const MAILBOX_CAPACITY: usize = 64;

#[derive(Debug, Clone)]
pub struct EngineConfig {
    pub source: SourceConfig,
    pub store_dir: PathBuf,
    pub subject: Subject,
    pub render: RenderConfig,
    pub calibration_window_s: f64,
    pub trial_duration_s: f64,
}

impl EngineConfig {
    pub fn new(source: SourceConfig, store_dir: impl Into<PathBuf>, subject: Subject) -> Self {
        Self {
            source,
            store_dir: store_dir.into(),
            subject,
            render: RenderConfig::default(),
            calibration_window_s: DEFAULT_CALIBRATION_WINDOW_S,
            trial_duration_s: NOMINAL_TRIAL_S,
        }
    }
}

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("invalid engine configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Store(#[from] swaycue_core::session::StoreError),
    #[error("audio output: {0}")]
    Audio(#[from] std::io::Error),
}

/// Why a command was refused.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum CommandError {
    #[error("calibration required before a trial")]
    CalibrationMissing,
    #[error("calibration in progress")]
    Busy,
    #[error("a trial is running")]
    TrialRunning,
    #[error("reference volume must be in (0, 1], got {0}")]
    InvalidVolume(f64),
    #[error("engine has shut down")]
    EngineStopped,
}

impl CommandError {
    pub fn code(&self) -> &'static str {
        match self {
            CommandError::CalibrationMissing => "CalibrationMissing",
            CommandError::Busy => "Busy",
            CommandError::TrialRunning => "TrialRunning",
            CommandError::InvalidVolume(_) => "InvalidVolume",
            CommandError::EngineStopped => "EngineStopped",
        }
    }
}

struct Clock {
    seq: u64,
    last: f64,
}

/// Serializes frames once and hands them to every subscriber.
pub struct Telemetry {
    tx: broadcast::Sender<Arc<str>>,
    epoch: Instant,
    clock: Mutex<Clock>,
}

impl Telemetry {
    fn new() -> Self {
        let (tx, _) = broadcast::channel(TELEMETRY_CAPACITY);
        Self { tx, epoch: Instant::now(), clock: Mutex::new(Clock { seq: 0, last: f64::NEG_INFINITY }) }
    }

    pub fn subscribe(&self) -> broadcast::Receiver<Arc<str>> {
        self.tx.subscribe()
    }

    /// `build` receives the sequence number and engine time.
    fn publish(&self, build: impl FnOnce(u64, f64) -> TelemetryFrame) {
        let mut c = self.clock.lock().unwrap_or_else(|e| e.into_inner());
        let now = self.epoch.elapsed().as_secs_f64();
        let engine_t = if now > c.last { now } else { c.last + 1e-6 };
        c.last = engine_t;
        let seq = c.seq;
        c.seq += 1;
        if self.tx.receiver_count() == 0 {
            return;
        }
        let frame = build(seq, engine_t);
        match serde_json::to_string(&frame) {
            Ok(s) => {
                let _ = self.tx.send(s.into());
            }
            Err(e) => log::warn!("telemetry frame not serializable: {e}"),
        }
    }
}

struct Shared {
    telemetry: Telemetry,
    store: TrialStore,
    subject: Subject,
}

enum Command {
    Calibrate(oneshot::Sender<Result<(), CommandError>>),
    StartTrial(StartTrialRequest, oneshot::Sender<Result<(), CommandError>>),
    StopTrial(oneshot::Sender<StopResponse>),
    SetVolume(f64, oneshot::Sender<Result<f64, CommandError>>),
    State(oneshot::Sender<EngineState>),
    CalibrationDone(Result<Baseline, String>),
    TrialDone { summary: Option<TrialSummary>, error: Option<String> },
}

/// Cheap to clone; the engine stops once every handle is dropped.
#[derive(Clone)]
pub struct EngineHandle {
    tx: mpsc::Sender<Command>,
    shared: Arc<Shared>,
}

impl EngineHandle {
    async fn ask<T>(&self, make: impl FnOnce(oneshot::Sender<T>) -> Command) -> Result<T, CommandError> {
        let (tx, rx) = oneshot::channel();
        self.tx.send(make(tx)).await.map_err(|_| CommandError::EngineStopped)?;
        rx.await.map_err(|_| CommandError::EngineStopped)
    }

    /// Starts calibration in the background.
    pub async fn calibrate(&self) -> Result<(), CommandError> {
        self.ask(Command::Calibrate).await?
    }

    /// Starts a trial in the background.
    pub async fn start_trial(&self, req: StartTrialRequest) -> Result<(), CommandError> {
        self.ask(|tx| Command::StartTrial(req, tx)).await?
    }

    /// Asks the running trial to stop; a no-op otherwise.
    pub async fn stop_trial(&self) -> Result<StopResponse, CommandError> {
        self.ask(Command::StopTrial).await
    }

    pub async fn set_volume(&self, v: f64) -> Result<f64, CommandError> {
        self.ask(|tx| Command::SetVolume(v, tx)).await?
    }

    pub async fn state(&self) -> Result<EngineState, CommandError> {
        self.ask(Command::State).await
    }

    pub fn subscribe(&self) -> broadcast::Receiver<Arc<str>> {
        self.shared.telemetry.subscribe()
    }

    pub fn store(&self) -> &TrialStore {
        &self.shared.store
    }

    pub fn subject(&self) -> &Subject {
        &self.shared.subject
    }
}

/// Spawns the engine on the current tokio runtime. With a sink, a live
/// renderer voices the feedback of every trial.
pub fn start(cfg: EngineConfig, sink: Option<Box<dyn AudioSink>>) -> Result<EngineHandle, EngineError> {
    cfg.source.validate().map_err(|e| EngineError::Config(e.to_string()))?;
    cfg.render.validate().map_err(|e| EngineError::Config(e.to_string()))?;
    for (name, v) in [("calibration_window_s", cfg.calibration_window_s), ("trial_duration_s", cfg.trial_duration_s)] {
        if !(v.is_finite() && v > 0.0) {
            return Err(EngineError::Config(format!("{name} must be positive, got {v}")));
        }
    }
    let store = TrialStore::open(&cfg.store_dir)?;
    store.path_for(&cfg.subject.id)?;
    let renderer = match sink {
        Some(s) => Some(Arc::new(LiveRenderer::spawn(cfg.render, s)?)),
        None => None,
    };
    let shared = Arc::new(Shared { telemetry: Telemetry::new(), store, subject: cfg.subject.clone() });
    let (tx, rx) = mpsc::channel(MAILBOX_CAPACITY);
    let actor = Actor {
        volume: cfg.render.reference_volume,
        cfg,
        shared: shared.clone(),
        renderer,
        tx: tx.downgrade(),
        calibrating: false,
        baseline: None,
        current: None,
        last_trial: None,
        last_error: None,
    };
    tokio::spawn(actor.run(rx));
    Ok(EngineHandle { tx, shared })
}

struct Running {
    info: CurrentTrial,
    abort: Arc<AtomicBool>,
}

struct Actor {
    cfg: EngineConfig,
    shared: Arc<Shared>,
    renderer: Option<Arc<LiveRenderer>>,
    tx: mpsc::WeakSender<Command>,
    calibrating: bool,
    baseline: Option<Baseline>,
    volume: f64,
    current: Option<Running>,
    last_trial: Option<TrialSummary>,
    last_error: Option<String>,
}

impl Actor {
    async fn run(mut self, mut rx: mpsc::Receiver<Command>) {
        while let Some(cmd) = rx.recv().await {
            self.handle(cmd);
        }
        if let Some(r) = &self.current {
            r.abort.store(true, Ordering::Release);
        }
    }

    fn phase(&self) -> Phase {
        if self.calibrating {
            Phase::Calibrating
        } else if self.current.is_some() {
            Phase::Running
        } else if self.baseline.is_some() {
            Phase::Ready
        } else {
            Phase::Idle
        }
    }

    fn guard_idle(&self) -> Result<(), CommandError> {
        match self.phase() {
            Phase::Calibrating => Err(CommandError::Busy),
            Phase::Running => Err(CommandError::TrialRunning),
            _ => Ok(()),
        }
    }

    fn worker(&self) -> Option<Worker> {
        Some(Worker {
            shared: self.shared.clone(),
            renderer: self.renderer.clone(),
            done: self.tx.upgrade()?,
        })
    }

    fn handle(&mut self, cmd: Command) {
        match cmd {
            Command::Calibrate(reply) => {
                let r = self.guard_idle().and_then(|_| {
                    let w = self.worker().ok_or(CommandError::EngineStopped)?;
                    let (src, window) = (self.cfg.source.clone(), self.cfg.calibration_window_s);
                    spawn(move || w.calibrate(src, window));
                    self.calibrating = true;
                    Ok(())
                });
                let _ = reply.send(r);
            }
            Command::StartTrial(req, reply) => {
                let r = self.guard_idle().and_then(|_| {
                    let baseline = self.baseline.ok_or(CommandError::CalibrationMissing)?;
                    let w = self.worker().ok_or(CommandError::EngineStopped)?;
                    let spec = TrialSpec {
                        duration_s: self.cfg.trial_duration_s,
                        reference_volume: self.volume,
                        audio_sample_rate: self.cfg.render.sample_rate,
                        ..TrialSpec::new(self.shared.subject.clone(), req.condition, req.abf_on)
                    };
                    let abort = Arc::new(AtomicBool::new(false));
                    let (src, a) = (self.cfg.source.with_condition(req.condition), abort.clone());
                    spawn(move || w.trial(src, spec, baseline, a));
                    self.current = Some(Running {
                        info: CurrentTrial { condition: req.condition, abf_on: req.abf_on, stopping: false },
                        abort,
                    });
                    Ok(())
                });
                let _ = reply.send(r);
            }
            Command::StopTrial(reply) => {
                let stopped = match &mut self.current {
                    Some(r) if !r.info.stopping => {
                        r.abort.store(true, Ordering::Release);
                        r.info.stopping = true;
                        true
                    }
                    _ => false,
                };
                let _ = reply.send(StopResponse { stopped });
            }
            Command::SetVolume(v, reply) => {
                let r = if v.is_finite() && v > 0.0 && v <= 1.0 {
                    self.volume = v;
                    if let Some(r) = &self.renderer {
                        r.send(Control::ReferenceVolume(v));
                    }
                    Ok(v)
                } else {
                    Err(CommandError::InvalidVolume(v))
                };
                let _ = reply.send(r);
            }
            Command::State(reply) => {
                let _ = reply.send(EngineState {
                    phase: self.phase(),
                    subject_id: self.shared.subject.id.clone(),
                    group: self.shared.subject.group,
                    baseline: self.baseline,
                    reference_volume: self.volume,
                    current_trial: self.current.as_ref().map(|r| r.info.clone()),
                    last_trial: self.last_trial.clone(),
                    last_error: self.last_error.clone(),
                });
            }
            Command::CalibrationDone(r) => {
                self.calibrating = false;
                match r {
                    Ok(b) => {
                        self.baseline = Some(b);
                        self.last_error = None;
                    }
                    Err(e) => self.last_error = Some(e),
                }
            }
            Command::TrialDone { summary, error } => {
                self.current = None;
                if summary.is_some() {
                    self.last_trial = summary;
                }
                self.last_error = error;
            }
        }
    }
}

fn spawn(f: impl FnOnce() + Send + 'static) {
    if let Err(e) = std::thread::Builder::new().name("swaycue-session".into()).spawn(f) {
        log::error!("cannot start session thread: {e}");
    }
}

struct Worker {
    shared: Arc<Shared>,
    renderer: Option<Arc<LiveRenderer>>,
    done: mpsc::Sender<Command>,
}

impl Worker {
    fn report(&self, cmd: Command) {
        let _ = self.done.blocking_send(cmd);
    }

    fn calibrate(self, source: SourceConfig, window: f64) {
        let total = (window * source.sample_rate).round() as usize;
        let mut index = 0;
        let mut t0 = None;
        let telemetry = &self.shared.telemetry;
        let result = open_source(&source).map_err(SessionError::from).and_then(|mut src| {
            calibrate_source(&mut *src, &source, window, &mut |s| {
                let t0 = *t0.get_or_insert(s.t);
                telemetry.publish(|seq, engine_t| TelemetryFrame {
                    seq,
                    engine_t,
                    t: s.t - t0,
                    x: s.pitch,
                    y: s.roll,
                    x_norm: normalize_display(s.pitch),
                    y_norm: normalize_display(s.roll),
                    region: None,
                    warning: None,
                    dist: s.pitch.hypot(s.roll),
                    params: None,
                    state: FrameState { activity: Activity::Calibrating, condition: None, abf_on: false, index, total },
                });
                index += 1;
            })
        });
        if let Err(e) = &result {
            log::warn!("calibration failed: {e}");
        }
        self.report(Command::CalibrationDone(result.map_err(|e| e.to_string())));
    }

    fn trial(self, source: SourceConfig, spec: TrialSpec, baseline: Baseline, abort: Arc<AtomicBool>) {
        let total = (spec.duration_s * source.sample_rate).round() as usize;
        let telemetry = &self.shared.telemetry;
        let renderer = self.renderer.as_deref();
        let mut observer = |ev: &SampleEvent| {
            if let (Some(r), Some(p)) = (renderer, ev.params) {
                r.send(Control::Params(*p));
            }
            telemetry.publish(|seq, engine_t| TelemetryFrame {
                seq,
                engine_t,
                t: ev.point.t,
                x: ev.point.x,
                y: ev.point.y,
                x_norm: normalize_display(ev.point.x),
                y_norm: normalize_display(ev.point.y),
                region: Some(ev.region),
                warning: Some(ev.region.warning().as_str().to_string()),
                dist: ev.dist,
                params: ev.params.map(ParamsSummary::from),
                state: FrameState {
                    activity: Activity::Trial,
                    condition: Some(spec.condition),
                    abf_on: spec.abf_on,
                    index: ev.index,
                    total,
                },
            });
        };
        let result = open_source(&source).map_err(SessionError::from).and_then(|mut src| {
            swaycue_core::run_trial(&mut *src, &source, Some(&baseline), &spec, &mut observer, &abort)
        });
        if let Some(r) = renderer {
            r.send(Control::Mute);
        }
        let (record, mut error): (Option<TrialRecord>, Option<String>) = match result {
            Ok(run) => (Some(run.record), None),
            Err(SessionError::SourceLost { partial, cause }) => {
                let msg = format!("source lost: {cause}");
                (Some(partial.record), Some(msg))
            }
            Err(e) => (None, Some(e.to_string())),
        };
        if let Some(rec) = &record {
            if let Err(e) = self.shared.store.append(rec) {
                error = Some(format!("trial not saved: {e}"));
            }
        }
        if let Some(e) = &error {
            log::warn!("trial ended with error: {e}");
        }
        self.report(Command::TrialDone { summary: record.as_ref().map(TrialSummary::from), error });
    }
}
