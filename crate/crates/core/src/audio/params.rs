//! Mapping from a sway point to the synthesis parameters of its warning sound.

use crate::sway::{classify, Region, SwayPoint, FULL_SCALE_DEG};
use serde::{Deserialize, Serialize};
use std::f64::consts::FRAC_PI_4;
use thiserror::Error;

/// Pass band of the low-level warning (region B), Hz.
pub const BAND_LOW_WARNING: (f64, f64) = (128.0, 14_263.0);
/// Pass band of the medium-level warning (region C), Hz.
pub const BAND_MEDIUM_WARNING: (f64, f64) = (415.0, 4_390.0);
/// Nominal band reported for the unfiltered safety noise.
pub const FULL_BAND: (f64, f64) = (20.0, 20_000.0);
/// Width of the narrow high-warning band, Hz.
pub const NARROW_BAND_WIDTH: f64 = 800.0;
pub const GATE_DUTY: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum NoiseSource {
    PinkNoise,
    FilteredNoise,
    NarrowBandNoise,
}

/// Everything the renderer needs to voice one sway point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SynthParams {
    pub region: Region,
    pub band_low: f64,
    pub band_high: f64,
    pub source: NoiseSource,
    /// Square-wave gate period in seconds; present only in regions E and F.
    pub gate_period: Option<f64>,
    /// On-fraction of the gate; 1.0 when ungated.
    pub gate_duty: f64,
    /// Loudness relative to the reference volume.
    pub volume_mult: f64,
    /// −1 is hard left, +1 hard right.
    pub pan: f64,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("{field} out of range: {value}")]
    OutOfRange { field: &'static str, value: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RenderConfig {
    pub sample_rate: u32,
    pub block_size: usize,
    /// Linear gain of the safety noise, in (0, 1].
    pub reference_volume: f64,
    /// Region-change crossfade length, seconds.
    pub crossfade: f64,
    /// Ramp time for parameter changes within a region, seconds.
    pub param_smoothing: f64,
    pub rng_seed: u64,
}

impl Default for RenderConfig {
    fn default() -> Self {
        Self {
            sample_rate: 48_000,
            block_size: 256,
            reference_volume: 0.5,
            crossfade: 0.03,
            param_smoothing: 0.01,
            rng_seed: 0,
        }
    }
}

impl RenderConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let check = |field, value: f64, ok: bool| {
            if ok {
                Ok(())
            } else {
                Err(ConfigError::OutOfRange { field, value })
            }
        };
        check("sample_rate", self.sample_rate as f64, (8_000..=384_000).contains(&self.sample_rate))?;
        check("block_size", self.block_size as f64, (1..=8192).contains(&self.block_size))?;
        check(
            "reference_volume",
            self.reference_volume,
            self.reference_volume > 0.0 && self.reference_volume <= 1.0,
        )?;
        check("crossfade", self.crossfade, (0.0..=1.0).contains(&self.crossfade))?;
        check("param_smoothing", self.param_smoothing, (0.0..=1.0).contains(&self.param_smoothing))?;
        Ok(())
    }

    /// Seconds of audio per block.
    pub fn block_latency(&self) -> f64 {
        self.block_size as f64 / self.sample_rate as f64
    }
}

fn clamp_deg(v: f64) -> f64 {
    v.clamp(-FULL_SCALE_DEG, FULL_SCALE_DEG)
}

/// Lower corner of the narrow warning band: 2^(8 + 4·(y + 20)/40) Hz,
/// i.e. 256 Hz at y = −20° up to 4096 Hz at y = +20°.
pub fn lower_cutoff_hz(y: f64) -> f64 {
    let y = clamp_deg(y);
    (8.0 + 4.0 * (y + 20.0) / 40.0).exp2()
}

/// Gate period T = 8^h ms, with h falling linearly from 2.5 at |x| = 0 to
/// 2 at |x| = 20°. Returns seconds.
pub fn gate_period_s(x: f64) -> f64 {
    let ax = clamp_deg(x).abs();
    let h = 2.5 - 0.5 * ax / FULL_SCALE_DEG;
    0.001 * 8f64.powf(h)
}

/// Pan position for regions A–D.
pub fn pan_for(x: f64) -> f64 {
    (x / FULL_SCALE_DEG).clamp(-1.0, 1.0)
}

/// Equal-power channel gains `(left, right)`; negative pan favours left.
pub fn channel_gains(pan: f64) -> (f64, f64) {
    let theta = (pan.clamp(-1.0, 1.0) + 1.0) * FRAC_PI_4;
    (theta.cos(), theta.sin())
}

pub fn map_params(p: &SwayPoint) -> SynthParams {
    let region = classify(p);
    let (x, y) = (clamp_deg(p.x), clamp_deg(p.y));
    let base = SynthParams {
        region,
        band_low: FULL_BAND.0,
        band_high: FULL_BAND.1,
        source: NoiseSource::PinkNoise,
        gate_period: None,
        gate_duty: 1.0,
        volume_mult: 1.0,
        pan: pan_for(x),
    };
    let narrow = |gate: Option<f64>, pan: f64| {
        let f_inf = lower_cutoff_hz(y);
        SynthParams {
            band_low: f_inf,
            band_high: f_inf + NARROW_BAND_WIDTH,
            source: NoiseSource::NarrowBandNoise,
            gate_period: gate,
            gate_duty: if gate.is_some() { GATE_DUTY } else { 1.0 },
            volume_mult: 3.0,
            pan,
            ..base
        }
    };
    match region {
        Region::A => base,
        Region::B => SynthParams {
            band_low: BAND_LOW_WARNING.0,
            band_high: BAND_LOW_WARNING.1,
            source: NoiseSource::FilteredNoise,
            volume_mult: 1.5,
            ..base
        },
        Region::C => SynthParams {
            band_low: BAND_MEDIUM_WARNING.0,
            band_high: BAND_MEDIUM_WARNING.1,
            source: NoiseSource::FilteredNoise,
            volume_mult: 3.0,
            ..base
        },
        Region::D => narrow(None, base.pan),
        Region::E => narrow(Some(gate_period_s(x)), -1.0),
        Region::F => narrow(Some(gate_period_s(x)), 1.0),
    }
}
