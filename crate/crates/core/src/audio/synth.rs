//! Block renderer for the warning sounds.
//!
//! One pink-noise source feeds up to two voices: the active one and, for
//! `crossfade` seconds after a region change, the outgoing one. Within a
//! region, band edges, pan, loudness and gate period ramp linearly over
//! `param_smoothing` seconds.

use super::filter::{cascade_power_response, BandPass};
use super::noise::{pink_power_fraction, PinkNoise};
use super::params::{channel_gains, NoiseSource, RenderConfig, SynthParams};
use crate::sway::Region;
use std::f64::consts::FRAC_PI_2;

/// RMS of the safety noise at reference volume 1.0, before panning.
pub const BASE_LEVEL: f64 = 0.1;

/// Filter coefficients are refreshed this often while a band is ramping.
const RETUNE_INTERVAL: usize = 32;

const CLAMP_KNEE: f32 = 0.8;

/// Record of a band that had to be pulled below Nyquist.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BandClamp {
    pub requested: (f64, f64),
    pub applied: (f64, f64),
}

/// Linear ramp toward a target over a fixed number of samples.
#[derive(Debug, Clone, Copy)]
struct Ramp {
    value: f64,
    target: f64,
    step: f64,
    remaining: usize,
}

impl Ramp {
    fn at(value: f64) -> Self {
        Self { value, target: value, step: 0.0, remaining: 0 }
    }

    fn set(&mut self, target: f64, samples: usize) {
        if target == self.target {
            return;
        }
        self.target = target;
        if samples == 0 {
            self.value = target;
            self.remaining = 0;
        } else {
            self.step = (target - self.value) / samples as f64;
            self.remaining = samples;
        }
    }

    #[inline]
    fn tick(&mut self) -> f64 {
        if self.remaining > 0 {
            self.remaining -= 1;
            self.value = if self.remaining == 0 { self.target } else { self.value + self.step };
        }
        self.value
    }

    fn moving(&self) -> bool {
        self.remaining > 0
    }
}

#[derive(Debug, Clone)]
struct Voice {
    region: Region,
    source: NoiseSource,
    filter: Option<BandPass>,
    band_low: Ramp,
    band_high: Ramp,
    /// Gain that brings the filtered pink noise back to unit RMS.
    band_norm: Ramp,
    volume: Ramp,
    pan: Ramp,
    gate_period: Ramp,
    gate_duty: f64,
    gated: bool,
    gate_phase: f64,
    since_retune: usize,
}

impl Voice {
    fn new(p: &SynthParams, band: (f64, f64), sample_rate: f64) -> Self {
        let filtered = p.source != NoiseSource::PinkNoise;
        Self {
            region: p.region,
            source: p.source,
            filter: filtered.then(|| BandPass::new(band.0, band.1, sample_rate)),
            band_low: Ramp::at(band.0),
            band_high: Ramp::at(band.1),
            band_norm: Ramp::at(if filtered { band_norm(band, sample_rate) } else { 1.0 }),
            volume: Ramp::at(p.volume_mult),
            pan: Ramp::at(p.pan),
            gate_period: Ramp::at(p.gate_period.unwrap_or(1.0)),
            gate_duty: p.gate_duty,
            gated: p.gate_period.is_some(),
            gate_phase: 0.0,
            since_retune: 0,
        }
    }

    fn retarget(&mut self, p: &SynthParams, band: (f64, f64), ramp: usize, sample_rate: f64) {
        if self.filter.is_some() && (band.0 != self.band_low.target || band.1 != self.band_high.target) {
            self.band_low.set(band.0, ramp);
            self.band_high.set(band.1, ramp);
            self.band_norm.set(band_norm(band, sample_rate), ramp);
        }
        self.volume.set(p.volume_mult, ramp);
        self.pan.set(p.pan, ramp);
        if let Some(t) = p.gate_period {
            self.gate_period.set(t, ramp);
        }
        self.gate_duty = p.gate_duty;
    }

    /// Returns `(left, right)` for one input sample of unit-RMS pink noise.
    #[inline]
    fn tick(&mut self, pink: f64, sample_rate: f64) -> (f64, f64) {
        let ramping = self.band_low.moving() || self.band_high.moving();
        let lo = self.band_low.tick();
        let hi = self.band_high.tick();
        let norm = self.band_norm.tick();
        let signal = match self.filter.as_mut() {
            Some(f) => {
                if ramping {
                    self.since_retune += 1;
                    if self.since_retune >= RETUNE_INTERVAL || !self.band_low.moving() {
                        f.retune(lo, hi, sample_rate);
                        self.since_retune = 0;
                    }
                }
                f.process(pink) * norm
            }
            None => pink,
        };
        let mut gain = self.volume.tick();
        let period = self.gate_period.tick();
        if self.gated {
            if self.gate_phase >= self.gate_duty {
                gain = 0.0;
            }
            self.gate_phase += 1.0 / (period * sample_rate);
            if self.gate_phase >= 1.0 {
                self.gate_phase -= 1.0;
            }
        }
        let (l, r) = channel_gains(self.pan.tick());
        let s = signal * gain;
        (s * l, s * r)
    }
}

fn band_norm(band: (f64, f64), sample_rate: f64) -> f64 {
    let sections = super::filter::design_bandpass(band.0, band.1, sample_rate);
    let fraction = pink_power_fraction(sample_rate, |omega| {
        let f = omega * sample_rate / (2.0 * std::f64::consts::PI);
        cascade_power_response(&sections, f, sample_rate)
    });
    1.0 / fraction.sqrt()
}

/// All DSP state owned by the render context.
#[derive(Debug, Clone)]
pub struct SynthState {
    cfg: RenderConfig,
    pink: PinkNoise,
    current: Option<Voice>,
    outgoing: Option<Voice>,
    fade_pos: usize,
    fade_len: usize,
    ramp_len: usize,
    reference: Ramp,
    last_params: Option<SynthParams>,
    band_clamps: u64,
    last_clamp: Option<BandClamp>,
}

impl SynthState {
    pub fn new(cfg: &RenderConfig) -> Self {
        let fs = cfg.sample_rate as f64;
        Self {
            cfg: *cfg,
            pink: PinkNoise::new(cfg.rng_seed),
            current: None,
            outgoing: None,
            fade_pos: 0,
            fade_len: (cfg.crossfade * fs).round() as usize,
            ramp_len: (cfg.param_smoothing * fs).round() as usize,
            reference: Ramp::at(cfg.reference_volume),
            last_params: None,
            band_clamps: 0,
            last_clamp: None,
        }
    }

    pub fn config(&self) -> &RenderConfig {
        &self.cfg
    }

    pub fn set_reference_volume(&mut self, volume: f64) {
        let v = volume.clamp(0.0, 1.0);
        self.cfg.reference_volume = v;
        self.reference.set(v, self.ramp_len);
    }

    /// How many parameter sets had corners above the usable band.
    pub fn band_clamp_count(&self) -> u64 {
        self.band_clamps
    }

    pub fn last_band_clamp(&self) -> Option<BandClamp> {
        self.last_clamp
    }

    pub fn current_region(&self) -> Option<Region> {
        self.current.as_ref().map(|v| v.region)
    }

    fn usable_band(&mut self, p: &SynthParams) -> (f64, f64) {
        let ceiling = 0.45 * self.cfg.sample_rate as f64;
        let requested = (p.band_low, p.band_high);
        if p.source == NoiseSource::PinkNoise || requested.1 <= ceiling {
            return requested;
        }
        let hi = ceiling;
        let lo = if requested.0 < hi { requested.0 } else { hi / 2.0 };
        let applied = (lo, hi);
        if self.last_clamp.map(|c| c.requested) != Some(requested) {
            log::warn!(
                "band {:.1}-{:.1} Hz exceeds Nyquist at {} Hz; clamped to {:.1}-{:.1} Hz",
                requested.0,
                requested.1,
                self.cfg.sample_rate,
                lo,
                hi
            );
        }
        self.band_clamps += 1;
        self.last_clamp = Some(BandClamp { requested, applied });
        applied
    }

    fn apply(&mut self, p: &SynthParams) {
        if self.last_params.as_ref() == Some(p) {
            return;
        }
        self.last_params = Some(*p);
        let fs = self.cfg.sample_rate as f64;
        let band = self.usable_band(p);
        match self.current.as_mut() {
            Some(v) if v.region == p.region && v.source == p.source => {
                v.retarget(p, band, self.ramp_len, fs);
            }
            _ => {
                let fresh = Voice::new(p, band, fs);
                self.outgoing = self.current.replace(fresh);
                self.fade_pos = 0;
                if self.fade_len == 0 {
                    self.outgoing = None;
                }
            }
        }
    }

    /// Renders `out.len()` stereo frames for `params`.
    pub fn render_block(&mut self, params: &SynthParams, out: &mut [[f32; 2]]) {
        self.apply(params);
        let fs = self.cfg.sample_rate as f64;
        for frame in out.iter_mut() {
            let pink = self.pink.next_sample();
            let level = BASE_LEVEL * self.reference.tick();
            let (mut l, mut r) = (0.0, 0.0);
            if let Some(v) = self.current.as_mut() {
                let (vl, vr) = v.tick(pink, fs);
                let g = if self.outgoing.is_some() {
                    (FRAC_PI_2 * self.fade_pos as f64 / self.fade_len as f64).sin()
                } else {
                    1.0
                };
                l += vl * g;
                r += vr * g;
            }
            if let Some(v) = self.outgoing.as_mut() {
                let (vl, vr) = v.tick(pink, fs);
                let g = (FRAC_PI_2 * self.fade_pos as f64 / self.fade_len as f64).cos();
                l += vl * g;
                r += vr * g;
                self.fade_pos += 1;
                if self.fade_pos >= self.fade_len {
                    self.outgoing = None;
                }
            }
            *frame = [soft_clip((l * level) as f32), soft_clip((r * level) as f32)];
        }
    }

    /// Advances time without sound; keeps the noise generator running so a
    /// later resume is not correlated with the pause length.
    pub fn render_silence(&mut self, out: &mut [[f32; 2]]) {
        for frame in out.iter_mut() {
            self.pink.next_sample();
            *frame = [0.0, 0.0];
        }
        self.current = None;
        self.outgoing = None;
        self.last_params = None;
    }
}

/// Identity below the knee, tanh-shaped above, never reaching ±1.
#[inline]
pub fn soft_clip(x: f32) -> f32 {
    let a = x.abs();
    if a <= CLAMP_KNEE {
        x
    } else {
        let head = 1.0 - CLAMP_KNEE;
        // keep strictly below 1.0 after f32 rounding
        let y = CLAMP_KNEE + head * ((a - CLAMP_KNEE) / head).tanh();
        y.min(0.999_999).copysign(x)
    }
}

/// Convenience wrapper: renders `frames` frames into a fresh buffer.
pub fn render_block(params: &SynthParams, frames: usize, state: &mut SynthState) -> Vec<[f32; 2]> {
    let mut out = vec![[0.0f32; 2]; frames];
    state.render_block(params, &mut out);
    out
}
