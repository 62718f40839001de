//! Tilt sample sources and fixed-rate regularization.
//!
//! Three sources produce [`RawSample`]s: CSV replay, UDP datagrams and the
//! pendulum simulator. Live sources run on their own thread behind a bounded
//! queue ([`Queued`]); the consumer then regularizes the stream onto an exact
//! `1/rate` grid ([`Regularizer`]).

use crate::condition::Condition;
use crate::sim::{SimConfig, VirtualSubject};
use crate::sway::{RawSample, Warning};
use crossbeam_queue::ArrayQueue;
use serde::{Deserialize, Serialize};
use std::io::Read;
use std::net::{SocketAddr, UdpSocket};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, AtomicU8, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;
use std::time::{Duration, Instant};
use thiserror::Error;

pub const CSV_HEADER: [&str; 3] = ["t_s", "pitch_deg", "roll_deg"];
pub const DATAGRAM_LEN: usize = 20;
pub const DEFAULT_SAMPLE_RATE: f64 = 50.0;
pub const SAMPLE_RATE_RANGE: (f64, f64) = (4.0, 1000.0);
/// How long a live source may stay silent before it is considered lost.
pub const DEFAULT_SOURCE_TIMEOUT_S: f64 = 2.0;
/// Gaps longer than this restart the output grid instead of being filled.
pub const MAX_FILL_S: f64 = 10.0;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("source unavailable ({source_desc}): {reason}")]
    SourceUnavailable { source_desc: String, reason: String },
    #[error("malformed record {index}: {reason}")]
    MalformedRecord { index: u64, reason: String },
    #[error("invalid source config: {0}")]
    InvalidConfig(String),
    #[error("no sample for {waited:?}")]
    Timeout { waited: Duration },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReplayTiming {
    /// Keep the file's timestamps.
    #[default]
    Original,
    /// Re-stamp row `i` as `i / sample_rate`.
    Reclock,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Pacing {
    /// Deliver samples at their timestamps on the wall clock.
    Realtime,
    /// Deliver as fast as the consumer pulls.
    #[default]
    Fast,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DropoutPolicy {
    #[default]
    HoldLast,
    Interpolate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum SourceKind {
    Replay {
        path: PathBuf,
        #[serde(default)]
        timing: ReplayTiming,
        #[serde(default)]
        pacing: Pacing,
    },
    Udp {
        bind: SocketAddr,
        #[serde(default = "default_timeout")]
        timeout_s: f64,
    },
    Sim {
        #[serde(default)]
        sim: SimConfig,
        #[serde(default)]
        condition: Condition,
        /// Stop after this many seconds; unbounded when absent.
        #[serde(default)]
        limit_s: Option<f64>,
        #[serde(default)]
        pacing: Pacing,
    },
}

fn default_timeout() -> f64 {
    DEFAULT_SOURCE_TIMEOUT_S
}

fn default_rate() -> f64 {
    DEFAULT_SAMPLE_RATE
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceConfig {
    #[serde(flatten)]
    pub kind: SourceKind,
    #[serde(default = "default_rate")]
    pub sample_rate: f64,
    #[serde(default)]
    pub dropout_policy: DropoutPolicy,
}

impl SourceConfig {
    pub fn new(kind: SourceKind) -> Self {
        Self { kind, sample_rate: DEFAULT_SAMPLE_RATE, dropout_policy: DropoutPolicy::default() }
    }

    pub fn sim(sim: SimConfig, condition: Condition, limit_s: Option<f64>) -> Self {
        Self::new(SourceKind::Sim { sim, condition, limit_s, pacing: Pacing::Fast })
    }

    pub fn validate(&self) -> Result<(), IngestError> {
        let (lo, hi) = SAMPLE_RATE_RANGE;
        if !(lo..=hi).contains(&self.sample_rate) {
            return Err(IngestError::InvalidConfig(format!(
                "sample_rate {} Hz outside [{lo}, {hi}]",
                self.sample_rate
            )));
        }
        match &self.kind {
            SourceKind::Replay { path, .. } if !path.is_file() => Err(IngestError::SourceUnavailable {
                source_desc: self.describe(),
                reason: "file does not exist".into(),
            }),
            SourceKind::Udp { timeout_s, .. } if !(timeout_s.is_finite() && *timeout_s > 0.0) => {
                Err(IngestError::InvalidConfig("udp timeout must be > 0".into()))
            }
            SourceKind::Sim { sim, .. } => {
                sim.validate().map_err(|e| IngestError::InvalidConfig(e.to_string()))
            }
            _ => Ok(()),
        }
    }

    /// Same source, re-targeted at another protocol condition. Only the
    /// simulator is affected.
    pub fn with_condition(&self, c: Condition) -> Self {
        let mut out = self.clone();
        if let SourceKind::Sim { condition, .. } = &mut out.kind {
            *condition = c;
        }
        out
    }

    pub fn describe(&self) -> String {
        match &self.kind {
            SourceKind::Replay { path, .. } => format!("replay:{}", path.display()),
            SourceKind::Udp { bind, .. } => format!("udp:{bind}"),
            SourceKind::Sim { sim, condition, .. } => format!("sim:seed={} {condition}", sim.seed),
        }
    }

    pub fn pacing(&self) -> Pacing {
        match &self.kind {
            SourceKind::Replay { pacing, .. } | SourceKind::Sim { pacing, .. } => *pacing,
            SourceKind::Udp { .. } => Pacing::Realtime,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceStats {
    pub received: u64,
    /// Datagrams or rows that failed to decode or validate.
    pub corrupt: u64,
    /// Datagrams whose sequence number went backwards.
    pub out_of_order: u64,
    /// Samples discarded by a full queue.
    pub dropped: u64,
}

/// A stream of tilt samples. `None` means the source is exhausted.
pub trait SampleSource: Send {
    fn next_sample(&mut self) -> Option<Result<RawSample, IngestError>>;

    /// Warning heard by the subject after the latest sample. Only the
    /// simulator reacts.
    fn feedback(&mut self, _warning: Warning) {}

    fn stats(&self) -> SourceStats {
        SourceStats::default()
    }
}

impl<S: SampleSource + ?Sized> SampleSource for Box<S> {
    fn next_sample(&mut self) -> Option<Result<RawSample, IngestError>> {
        (**self).next_sample()
    }
    fn feedback(&mut self, warning: Warning) {
        (**self).feedback(warning)
    }
    fn stats(&self) -> SourceStats {
        (**self).stats()
    }
}

pub fn open_source(cfg: &SourceConfig) -> Result<Box<dyn SampleSource>, IngestError> {
    cfg.validate()?;
    let rate = cfg.sample_rate;
    let capacity = rate.ceil() as usize;
    Ok(match &cfg.kind {
        SourceKind::Replay { path, timing, pacing } => {
            let samples = load_csv(path, *timing, rate)?;
            let src = ReplaySource::new(samples);
            match pacing {
                Pacing::Fast => Box::new(src),
                Pacing::Realtime => Box::new(Queued::spawn(Paced::new(src), capacity, None)?),
            }
        }
        SourceKind::Udp { bind, timeout_s } => {
            let src = UdpSource::bind(*bind)?;
            Box::new(Queued::spawn(src, capacity, Some(Duration::from_secs_f64(*timeout_s)))?)
        }
        SourceKind::Sim { sim, condition, limit_s, pacing } => {
            let sim = SimConfig { sample_rate: rate, ..*sim };
            let src = SimSource::new(sim, *condition, *limit_s)?;
            match pacing {
                Pacing::Fast => Box::new(src),
                Pacing::Realtime => Box::new(Queued::spawn(Paced::new(src), capacity, None)?),
            }
        }
    })
}

// ---------------------------------------------------------------- replay

/// Parses `t_s,pitch_deg,roll_deg` rows. `index` in errors is the 1-based
/// file line.
pub fn parse_csv<R: Read>(reader: R, timing: ReplayTiming, rate: f64) -> Result<Vec<RawSample>, IngestError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let malformed = |index: u64, reason: String| IngestError::MalformedRecord { index, reason };
    let header = rdr.headers().map_err(|e| malformed(1, e.to_string()))?;
    if header.iter().collect::<Vec<_>>() != CSV_HEADER {
        return Err(malformed(1, format!("expected header `{}`", CSV_HEADER.join(","))));
    }
    let mut out: Vec<RawSample> = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            malformed(line, e.to_string())
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        let field = |i: usize| -> Result<f64, IngestError> {
            let raw = rec.get(i).unwrap_or_default();
            raw.parse::<f64>()
                .map_err(|_| malformed(line, format!("{} is not a number: `{raw}`", CSV_HEADER[i])))
        };
        let mut s = RawSample { t: field(0)?, pitch: field(1)?, roll: field(2)? };
        if timing == ReplayTiming::Reclock {
            s.t = out.len() as f64 / rate;
        }
        s.validate().map_err(|e| malformed(line, e.to_string()))?;
        if out.last().is_some_and(|p| s.t < p.t) {
            return Err(malformed(line, "timestamp goes backwards".into()));
        }
        out.push(s);
    }
    Ok(out)
}

pub fn load_csv(path: &Path, timing: ReplayTiming, rate: f64) -> Result<Vec<RawSample>, IngestError> {
    let file = std::fs::File::open(path).map_err(|e| IngestError::SourceUnavailable {
        source_desc: format!("replay:{}", path.display()),
        reason: e.to_string(),
    })?;
    parse_csv(std::io::BufReader::new(file), timing, rate)
}

pub fn write_csv<W: std::io::Write>(writer: W, samples: &[RawSample]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(CSV_HEADER)?;
    for s in samples {
        w.write_record([s.t.to_string(), s.pitch.to_string(), s.roll.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone)]
pub struct ReplaySource {
    samples: Vec<RawSample>,
    pos: usize,
}

impl ReplaySource {
    pub fn new(samples: Vec<RawSample>) -> Self {
        Self { samples, pos: 0 }
    }
}

impl SampleSource for ReplaySource {
    fn next_sample(&mut self) -> Option<Result<RawSample, IngestError>> {
        let s = self.samples.get(self.pos).copied()?;
        self.pos += 1;
        Some(Ok(s))
    }

    fn stats(&self) -> SourceStats {
        SourceStats { received: self.pos as u64, ..Default::default() }
    }
}

// ---------------------------------------------------------------- udp

/// Wire format: little-endian `u32 seq, u64 timestamp_micros, f32 pitch_deg,
/// f32 roll_deg`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Datagram {
    pub seq: u32,
    pub timestamp_micros: u64,
    pub pitch: f32,
    pub roll: f32,
}

impl Datagram {
    pub fn encode(&self) -> [u8; DATAGRAM_LEN] {
        let mut b = [0u8; DATAGRAM_LEN];
        b[0..4].copy_from_slice(&self.seq.to_le_bytes());
        b[4..12].copy_from_slice(&self.timestamp_micros.to_le_bytes());
        b[12..16].copy_from_slice(&self.pitch.to_le_bytes());
        b[16..20].copy_from_slice(&self.roll.to_le_bytes());
        b
    }

    pub fn decode(b: &[u8]) -> Option<Self> {
        let b: &[u8; DATAGRAM_LEN] = b.try_into().ok()?;
        Some(Self {
            seq: u32::from_le_bytes(b[0..4].try_into().ok()?),
            timestamp_micros: u64::from_le_bytes(b[4..12].try_into().ok()?),
            pitch: f32::from_le_bytes(b[12..16].try_into().ok()?),
            roll: f32::from_le_bytes(b[16..20].try_into().ok()?),
        })
    }
}

/// Blocking UDP receiver. Timestamps are made relative to the first
/// accepted datagram.
pub struct UdpSource {
    socket: UdpSocket,
    first_micros: Option<u64>,
    last_seq: Option<u32>,
    stats: SourceStats,
}

const UDP_POLL: Duration = Duration::from_millis(50);

impl UdpSource {
    pub fn bind(addr: SocketAddr) -> Result<Self, IngestError> {
        let unavailable = |e: std::io::Error| IngestError::SourceUnavailable {
            source_desc: format!("udp:{addr}"),
            reason: e.to_string(),
        };
        let socket = UdpSocket::bind(addr).map_err(unavailable)?;
        socket.set_read_timeout(Some(UDP_POLL)).map_err(unavailable)?;
        Ok(Self { socket, first_micros: None, last_seq: None, stats: SourceStats::default() })
    }

    pub fn local_addr(&self) -> std::io::Result<SocketAddr> {
        self.socket.local_addr()
    }

    /// Validates one datagram; `None` if it must be skipped.
    fn accept(&mut self, bytes: &[u8]) -> Option<RawSample> {
        let Some(d) = Datagram::decode(bytes) else {
            self.stats.corrupt += 1;
            log::warn!("skipping {}-byte datagram", bytes.len());
            return None;
        };
        if self.last_seq.is_some_and(|s| d.seq <= s) {
            self.stats.out_of_order += 1;
            return None;
        }
        let first = *self.first_micros.get_or_insert(d.timestamp_micros);
        let sample = RawSample {
            t: d.timestamp_micros.saturating_sub(first) as f64 / 1e6,
            pitch: d.pitch as f64,
            roll: d.roll as f64,
        };
        if sample.validate().is_err() {
            self.stats.corrupt += 1;
            log::warn!("skipping datagram seq {} with invalid angles", d.seq);
            return None;
        }
        self.last_seq = Some(d.seq);
        self.stats.received += 1;
        Some(sample)
    }
}

impl SampleSource for UdpSource {
    /// Returns `Timeout` after one poll interval without a valid datagram.
    fn next_sample(&mut self) -> Option<Result<RawSample, IngestError>> {
        let mut buf = [0u8; 64];
        let deadline = Instant::now() + UDP_POLL;
        loop {
            match self.socket.recv(&mut buf) {
                Ok(n) => {
                    if let Some(s) = self.accept(&buf[..n]) {
                        return Some(Ok(s));
                    }
                }
                Err(e) if matches!(e.kind(), std::io::ErrorKind::WouldBlock | std::io::ErrorKind::TimedOut) => {}
                Err(e) => {
                    return Some(Err(IngestError::SourceUnavailable {
                        source_desc: "udp".into(),
                        reason: e.to_string(),
                    }))
                }
            }
            if Instant::now() >= deadline {
                return Some(Err(IngestError::Timeout { waited: UDP_POLL }));
            }
        }
    }

    fn stats(&self) -> SourceStats {
        self.stats
    }
}

// ---------------------------------------------------------------- sim

pub struct SimSource {
    subject: VirtualSubject,
    remaining: Option<u64>,
}

impl SimSource {
    pub fn new(cfg: SimConfig, condition: Condition, limit_s: Option<f64>) -> Result<Self, IngestError> {
        let subject = VirtualSubject::new(cfg, condition).map_err(|e| IngestError::InvalidConfig(e.to_string()))?;
        let remaining = limit_s.map(|s| (s * cfg.sample_rate).round() as u64);
        Ok(Self { subject, remaining })
    }
}

impl SampleSource for SimSource {
    fn next_sample(&mut self) -> Option<Result<RawSample, IngestError>> {
        if let Some(r) = &mut self.remaining {
            if *r == 0 {
                return None;
            }
            *r -= 1;
        }
        Some(Ok(self.subject.next_sample()))
    }

    fn feedback(&mut self, warning: Warning) {
        self.subject.feedback(warning);
    }
}

// ---------------------------------------------------------------- pacing

/// Releases each sample no earlier than its timestamp, measured from the
/// first sample.
pub struct Paced<S> {
    inner: S,
    origin: Option<(Instant, f64)>,
}

impl<S: SampleSource> Paced<S> {
    pub fn new(inner: S) -> Self {
        Self { inner, origin: None }
    }
}

impl<S: SampleSource> SampleSource for Paced<S> {
    fn next_sample(&mut self) -> Option<Result<RawSample, IngestError>> {
        let item = self.inner.next_sample()?;
        if let Ok(s) = &item {
            let (start, t0) = *self.origin.get_or_insert((Instant::now(), s.t));
            let due = start + Duration::from_secs_f64((s.t - t0).max(0.0));
            if let Some(wait) = due.checked_duration_since(Instant::now()) {
                std::thread::sleep(wait);
            }
        }
        Some(item)
    }
    fn feedback(&mut self, warning: Warning) {
        self.inner.feedback(warning)
    }
    fn stats(&self) -> SourceStats {
        self.inner.stats()
    }
}

// ---------------------------------------------------------------- queue

const NO_WARNING: u8 = u8::MAX;

fn encode_warning(w: Warning) -> u8 {
    w as u8
}

fn decode_warning(v: u8) -> Option<Warning> {
    Warning::ALL.get(v as usize).copied()
}

struct Shared {
    queue: ArrayQueue<RawSample>,
    done: AtomicBool,
    stop: AtomicBool,
    warning: AtomicU8,
    error: Mutex<Option<IngestError>>,
    stats: Mutex<SourceStats>,
}

/// Runs a source on its own thread and buffers its output. When the buffer
/// is full the oldest sample is dropped and counted. Feedback is forwarded
/// as the latest warning, once per produced sample.
pub struct Queued {
    shared: Arc<Shared>,
    thread: Option<JoinHandle<()>>,
    timeout: Option<Duration>,
}

impl Queued {
    /// `timeout`: how long `next_sample` waits before reporting `Timeout`;
    /// `None` waits until the producer finishes.
    pub fn spawn<S: SampleSource + 'static>(
        mut inner: S,
        capacity: usize,
        timeout: Option<Duration>,
    ) -> Result<Self, IngestError> {
        let shared = Arc::new(Shared {
            queue: ArrayQueue::new(capacity.max(1)),
            done: AtomicBool::new(false),
            stop: AtomicBool::new(false),
            warning: AtomicU8::new(NO_WARNING),
            error: Mutex::new(None),
            stats: Mutex::new(SourceStats::default()),
        });
        let sh = shared.clone();
        let thread = std::thread::Builder::new()
            .name("swaycue-ingest".into())
            .spawn(move || {
                let mut dropped = 0;
                while !sh.stop.load(Ordering::Acquire) {
                    if let Some(w) = decode_warning(sh.warning.load(Ordering::Acquire)) {
                        inner.feedback(w);
                    }
                    match inner.next_sample() {
                        None => break,
                        Some(Ok(s)) => {
                            if sh.queue.force_push(s).is_some() {
                                dropped += 1;
                            }
                        }
                        Some(Err(IngestError::Timeout { .. })) => {}
                        Some(Err(e)) => {
                            *sh.error.lock().unwrap_or_else(|p| p.into_inner()) = Some(e);
                            break;
                        }
                    }
                    *sh.stats.lock().unwrap_or_else(|p| p.into_inner()) =
                        SourceStats { dropped, ..inner.stats() };
                }
                sh.done.store(true, Ordering::Release);
            })
            .map_err(|e| IngestError::SourceUnavailable { source_desc: "ingest thread".into(), reason: e.to_string() })?;
        Ok(Self { shared, thread: Some(thread), timeout })
    }
}

impl SampleSource for Queued {
    fn next_sample(&mut self) -> Option<Result<RawSample, IngestError>> {
        let start = Instant::now();
        loop {
            if let Some(s) = self.shared.queue.pop() {
                return Some(Ok(s));
            }
            if self.shared.done.load(Ordering::Acquire) {
                // the producer may have pushed between the pop and the flag
                if let Some(s) = self.shared.queue.pop() {
                    return Some(Ok(s));
                }
                let err = self.shared.error.lock().unwrap_or_else(|p| p.into_inner()).take();
                return err.map(Err);
            }
            if let Some(t) = self.timeout {
                if start.elapsed() >= t {
                    return Some(Err(IngestError::Timeout { waited: start.elapsed() }));
                }
            }
            std::thread::sleep(Duration::from_micros(500));
        }
    }

    fn feedback(&mut self, warning: Warning) {
        self.shared.warning.store(encode_warning(warning), Ordering::Release);
    }

    fn stats(&self) -> SourceStats {
        *self.shared.stats.lock().unwrap_or_else(|p| p.into_inner())
    }
}

impl Drop for Queued {
    fn drop(&mut self) {
        self.shared.stop.store(true, Ordering::Release);
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}

// ---------------------------------------------------------------- regularize

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GapStats {
    /// Number of holes in the input grid.
    pub gaps: u64,
    /// Samples synthesized to fill them.
    pub filled: u64,
    /// Inputs landing on an already emitted slot.
    pub late: u64,
    /// Holes too long to fill; the grid restarted after each.
    pub resyncs: u64,
}

#[derive(Debug, Clone, Copy)]
struct Fill {
    from: RawSample,
    to: RawSample,
    from_slot: u64,
    to_slot: u64,
    next: u64,
}

/// Snaps samples onto `t0 + k/rate` and fills missing slots.
///
/// Push one input, then drain with [`Regularizer::pop`].
#[derive(Debug, Clone)]
pub struct Regularizer {
    rate: f64,
    policy: DropoutPolicy,
    t0: f64,
    slot_offset: u64,
    next_slot: Option<u64>,
    last: Option<(u64, RawSample)>,
    fill: Option<Fill>,
    ready: Option<RawSample>,
    stats: GapStats,
}

impl Regularizer {
    pub fn new(rate: f64, policy: DropoutPolicy) -> Self {
        Self {
            rate,
            policy,
            t0: 0.0,
            slot_offset: 0,
            next_slot: None,
            last: None,
            fill: None,
            ready: None,
            stats: GapStats::default(),
        }
    }

    pub fn stats(&self) -> GapStats {
        self.stats
    }

    fn grid_t(&self, slot: u64) -> f64 {
        self.t0 + (slot - self.slot_offset) as f64 / self.rate
    }

    /// Must only be called once the previous push has been drained.
    pub fn push(&mut self, s: RawSample) {
        debug_assert!(self.fill.is_none() && self.ready.is_none());
        let Some(next) = self.next_slot else {
            self.t0 = s.t;
            self.emit(0, s);
            return;
        };
        let rel = ((s.t - self.t0) * self.rate).round();
        let slot = if rel < 0.0 { 0 } else { rel as u64 + self.slot_offset };
        if slot < next {
            self.stats.late += 1;
            return;
        }
        let missing = slot - next;
        if missing as f64 > MAX_FILL_S * self.rate {
            self.stats.resyncs += 1;
            self.t0 = s.t;
            self.slot_offset = next;
            self.emit(next, s);
            return;
        }
        if missing > 0 {
            self.stats.gaps += 1;
            self.stats.filled += missing;
            let (from_slot, from) = self.last.expect("a slot was emitted before");
            self.fill = Some(Fill { from, to: s, from_slot, to_slot: slot, next });
        }
        self.emit(slot, s);
    }

    fn emit(&mut self, slot: u64, s: RawSample) {
        let t = self.grid_t(slot);
        let out = RawSample { t, ..s };
        self.ready = Some(out);
        self.last = Some((slot, out));
        self.next_slot = Some(slot + 1);
    }

    pub fn pop(&mut self) -> Option<RawSample> {
        if let Some(f) = &mut self.fill {
            let slot = f.next;
            let fill = *f;
            f.next += 1;
            if f.next >= f.to_slot {
                self.fill = None;
            }
            let t = self.grid_t(slot);
            return Some(match self.policy {
                DropoutPolicy::HoldLast => RawSample { t, ..fill.from },
                DropoutPolicy::Interpolate => {
                    let a = (slot - fill.from_slot) as f64 / (fill.to_slot - fill.from_slot) as f64;
                    RawSample {
                        t,
                        pitch: fill.from.pitch + a * (fill.to.pitch - fill.from.pitch),
                        roll: fill.from.roll + a * (fill.to.roll - fill.from.roll),
                    }
                }
            });
        }
        self.ready.take()
    }
}

/// Iterator form of [`Regularizer`].
pub struct Regularized<I> {
    inner: I,
    reg: Regularizer,
}

impl<I> Regularized<I> {
    pub fn stats(&self) -> GapStats {
        self.reg.stats()
    }
}

impl<I: Iterator<Item = RawSample>> Iterator for Regularized<I> {
    type Item = RawSample;
    fn next(&mut self) -> Option<RawSample> {
        loop {
            if let Some(s) = self.reg.pop() {
                return Some(s);
            }
            let s = self.inner.next()?;
            self.reg.push(s);
        }
    }
}

pub fn regularize<I: IntoIterator<Item = RawSample>>(
    input: I,
    rate: f64,
    policy: DropoutPolicy,
) -> Regularized<I::IntoIter> {
    Regularized { inner: input.into_iter(), reg: Regularizer::new(rate, policy) }
}
