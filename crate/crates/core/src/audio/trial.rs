use super::params::{map_params, RenderConfig, SynthParams};
use super::synth::SynthState;
use crate::sway::{Region, SwayPoint};
use serde::{Deserialize, Serialize};

/// Sway update interval assumed when a trial has a single point.
pub const DEFAULT_UPDATE_INTERVAL_S: f64 = 1.0 / 50.0;

/// One parameter change during a render.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimelineEntry {
    /// Sway timestamp that triggered the change.
    pub t: f64,
    /// First audio frame rendered with these parameters.
    pub frame: u64,
    pub params: SynthParams,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ParamsTimeline {
    pub entries: Vec<TimelineEntry>,
}

impl ParamsTimeline {
    /// Appends `params` unless they equal the most recent entry.
    pub fn record(&mut self, t: f64, frame: u64, params: SynthParams) -> bool {
        if self.entries.last().is_some_and(|e| e.params == params) {
            return false;
        }
        self.entries.push(TimelineEntry { t, frame, params });
        true
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    /// Consecutive runs of the same region, in order.
    pub fn region_segments(&self) -> Vec<Region> {
        let mut out: Vec<Region> = Vec::new();
        for e in &self.entries {
            if out.last() != Some(&e.params.region) {
                out.push(e.params.region);
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RenderedTrial {
    pub sample_rate: u32,
    pub frames: Vec<[f32; 2]>,
    pub timeline: ParamsTimeline,
}

/// Renders a time-ordered sway trial offline. Parameters change at each
/// sway sample and are held until the next one; the last sample is held for
/// one mean update interval.
pub fn render_trial(points: &[SwayPoint], cfg: &RenderConfig) -> RenderedTrial {
    let sr = cfg.sample_rate;
    let mut timeline = ParamsTimeline::default();
    let (Some(first), Some(last)) = (points.first(), points.last()) else {
        return RenderedTrial { sample_rate: sr, frames: Vec::new(), timeline };
    };
    let interval = if points.len() > 1 {
        (last.t - first.t) / (points.len() - 1) as f64
    } else {
        DEFAULT_UPDATE_INTERVAL_S
    };
    let duration = last.t - first.t + interval;
    let total = (duration * sr as f64).round() as usize;
    let frame_at = |t: f64| (((t - first.t) * sr as f64).round() as usize).min(total);

    let mut state = SynthState::new(cfg);
    let mut frames = vec![[0.0f32; 2]; total];
    for (i, p) in points.iter().enumerate() {
        let start = frame_at(p.t);
        let end = points.get(i + 1).map_or(total, |n| frame_at(n.t));
        let params = map_params(p);
        timeline.record(p.t, start as u64, params);
        if end > start {
            for chunk in frames[start..end].chunks_mut(cfg.block_size.max(1)) {
                state.render_block(&params, chunk);
            }
        }
    }
    RenderedTrial { sample_rate: sr, frames, timeline }
}
