//! Real-time rendering on a dedicated thread.
//!
//! The control side pushes [`Control`] messages into a bounded lock-free
//! queue; the render thread drains it between blocks and never waits on the
//! control side. When the queue is full the oldest message is discarded.

use super::params::{RenderConfig, SynthParams};
use super::synth::SynthState;
use super::wav::to_s16;
use crossbeam_queue::ArrayQueue;
use std::io::{self, Write};
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;
use std::time::{Duration, Instant};

const CONTROL_CAPACITY: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Control {
    Params(SynthParams),
    /// Silence until the next `Params`.
    Mute,
    ReferenceVolume(f64),
}

/// Destination of rendered blocks.
pub trait AudioSink: Send {
    fn write_block(&mut self, block: &[[f32; 2]]) -> io::Result<()>;
}

/// Discards audio.
#[derive(Debug, Default)]
pub struct NullSink;

impl AudioSink for NullSink {
    fn write_block(&mut self, _block: &[[f32; 2]]) -> io::Result<()> {
        Ok(())
    }
}

/// Interleaved signed 16-bit little-endian PCM, e.g. for piping into
/// `aplay -f S16_LE -c 2 -r 48000`.
pub struct RawPcmSink<W: Write + Send> {
    out: W,
    scratch: Vec<u8>,
}

impl<W: Write + Send> RawPcmSink<W> {
    pub fn new(out: W) -> Self {
        Self { out, scratch: Vec::new() }
    }
}

impl<W: Write + Send> AudioSink for RawPcmSink<W> {
    fn write_block(&mut self, block: &[[f32; 2]]) -> io::Result<()> {
        self.scratch.clear();
        for f in block {
            self.scratch.extend_from_slice(&to_s16(f[0]).to_le_bytes());
            self.scratch.extend_from_slice(&to_s16(f[1]).to_le_bytes());
        }
        self.out.write_all(&self.scratch)?;
        self.out.flush()
    }
}

/// Keeps blocks in memory; the buffer is shared so it can be read while the
/// render thread is still running.
#[derive(Debug, Clone, Default)]
pub struct CaptureSink {
    frames: Arc<Mutex<Vec<[f32; 2]>>>,
}

impl CaptureSink {
    pub fn snapshot(&self) -> Vec<[f32; 2]> {
        self.frames.lock().unwrap_or_else(|e| e.into_inner()).clone()
    }
}

impl AudioSink for CaptureSink {
    fn write_block(&mut self, block: &[[f32; 2]]) -> io::Result<()> {
        self.frames.lock().unwrap_or_else(|e| e.into_inner()).extend_from_slice(block);
        Ok(())
    }
}

/// Sleeps so that blocks leave at the audio rate, for sinks that do not
/// block on their own.
pub struct Paced<S> {
    inner: S,
    sample_rate: f64,
    started: Option<Instant>,
    frames: u64,
}

impl<S: AudioSink> Paced<S> {
    pub fn new(inner: S, sample_rate: u32) -> Self {
        Self { inner, sample_rate: sample_rate as f64, started: None, frames: 0 }
    }
}

impl<S: AudioSink> AudioSink for Paced<S> {
    fn write_block(&mut self, block: &[[f32; 2]]) -> io::Result<()> {
        let start = *self.started.get_or_insert_with(Instant::now);
        self.inner.write_block(block)?;
        self.frames += block.len() as u64;
        let due = start + Duration::from_secs_f64(self.frames as f64 / self.sample_rate);
        if let Some(wait) = due.checked_duration_since(Instant::now()) {
            std::thread::sleep(wait);
        }
        Ok(())
    }
}

#[derive(Debug, Default)]
struct Counters {
    blocks: AtomicU64,
    dropped_controls: AtomicU64,
}

/// Control-side handle to a running render thread.
pub struct LiveRenderer {
    queue: Arc<ArrayQueue<Control>>,
    stop: Arc<AtomicBool>,
    counters: Arc<Counters>,
    thread: Option<JoinHandle<io::Result<()>>>,
}

impl LiveRenderer {
    /// Starts muted; the first `Control::Params` starts the sound.
    pub fn spawn(cfg: RenderConfig, mut sink: Box<dyn AudioSink>) -> io::Result<Self> {
        let queue = Arc::new(ArrayQueue::new(CONTROL_CAPACITY));
        let stop = Arc::new(AtomicBool::new(false));
        let counters = Arc::new(Counters::default());
        let (q, s, c) = (queue.clone(), stop.clone(), counters.clone());
        let thread = std::thread::Builder::new()
            .name("swaycue-render".into())
            .spawn(move || {
                let mut state = SynthState::new(&cfg);
                let mut block = vec![[0.0f32; 2]; cfg.block_size];
                let mut current: Option<SynthParams> = None;
                while !s.load(Ordering::Acquire) {
                    while let Some(msg) = q.pop() {
                        match msg {
                            Control::Params(p) => current = Some(p),
                            Control::Mute => current = None,
                            Control::ReferenceVolume(v) => state.set_reference_volume(v),
                        }
                    }
                    match &current {
                        Some(p) => state.render_block(p, &mut block),
                        None => state.render_silence(&mut block),
                    }
                    sink.write_block(&block)?;
                    c.blocks.fetch_add(1, Ordering::Relaxed);
                }
                Ok(())
            })?;
        Ok(Self { queue, stop, counters, thread: Some(thread) })
    }

    /// Never blocks; replaces the oldest pending message when full.
    pub fn send(&self, msg: Control) {
        if self.queue.force_push(msg).is_some() {
            self.counters.dropped_controls.fetch_add(1, Ordering::Relaxed);
        }
    }

    pub fn blocks_rendered(&self) -> u64 {
        self.counters.blocks.load(Ordering::Relaxed)
    }

    pub fn dropped_controls(&self) -> u64 {
        self.counters.dropped_controls.load(Ordering::Relaxed)
    }

    /// Stops the thread and reports any sink error it hit.
    pub fn stop(mut self) -> io::Result<()> {
        self.shutdown()
    }

    fn shutdown(&mut self) -> io::Result<()> {
        self.stop.store(true, Ordering::Release);
        match self.thread.take() {
            Some(t) => t.join().unwrap_or_else(|_| Err(io::Error::other("render thread panicked"))),
            None => Ok(()),
        }
    }
}

impl Drop for LiveRenderer {
    fn drop(&mut self) {
        let _ = self.shutdown();
    }
}
