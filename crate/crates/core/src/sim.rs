//! Stochastic inverted-pendulum stand-in for a test subject.
//!
//! Each tilt axis is an independent mean-reverting random walk:
//!
//! ```text
//! x ← x + (−x/τ + drift)·dt + σ·√dt·N(0,1)·m_condition·(1 − gain[warning])
//! ```
//!
//! The feedback factor models a subject steadying themself after hearing a
//! warning; it only applies to warnings of level Low and above, after a
//! configurable reaction delay.

use crate::condition::{Condition, Eyes, Surface};
use crate::sway::{apply_baseline, classify, Baseline, RawSample, Warning};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use std::collections::VecDeque;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
#[error("invalid simulator config: {0}")]
pub struct SimConfigError(pub String);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeedbackGains {
    pub low: f64,
    pub medium: f64,
    pub high: f64,
}

impl Default for FeedbackGains {
    fn default() -> Self {
        Self { low: 0.3, medium: 0.5, high: 0.7 }
    }
}

impl FeedbackGains {
    pub const ZERO: Self = Self { low: 0.0, medium: 0.0, high: 0.0 };

    pub fn gain(&self, warning: Warning) -> f64 {
        match warning {
            Warning::Safety => 0.0,
            Warning::Low => self.low,
            Warning::Medium => self.medium,
            Warning::High => self.high,
        }
    }
}

/// Noise multipliers for the sensory-deprived conditions; they compound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConditionMultipliers {
    pub eyes_closed: f64,
    pub foam: f64,
}

impl Default for ConditionMultipliers {
    fn default() -> Self {
        Self { eyes_closed: 1.5, foam: 1.3 }
    }
}

impl ConditionMultipliers {
    pub fn for_condition(&self, c: Condition) -> f64 {
        let eyes = if c.eyes == Eyes::Closed { self.eyes_closed } else { 1.0 };
        let surface = if c.surface == Surface::Foam { self.foam } else { 1.0 };
        eyes * surface
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    pub seed: u64,
    /// Noise scale, degrees per √s.
    pub sigma: f64,
    /// Mean-reversion time constant, seconds.
    pub tau: f64,
    /// Degrees per second, applied to both axes.
    pub drift: f64,
    pub feedback_gains: FeedbackGains,
    pub condition_multiplier: ConditionMultipliers,
    /// Seconds between a warning and its effect on the dynamics.
    pub reaction_delay: f64,
    pub sample_rate: f64,
    pub initial_pitch: f64,
    pub initial_roll: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            seed: 42,
            sigma: 1.0,
            tau: 2.0,
            drift: 0.0,
            feedback_gains: FeedbackGains::default(),
            condition_multiplier: ConditionMultipliers::default(),
            reaction_delay: 0.25,
            sample_rate: 50.0,
            initial_pitch: 0.0,
            initial_roll: 0.0,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), SimConfigError> {
        let fail = |m: &str| Err(SimConfigError(m.to_string()));
        if !(self.sigma.is_finite() && self.sigma > 0.0) {
            return fail("sigma must be > 0");
        }
        if !(self.tau.is_finite() && self.tau > 0.0) {
            return fail("tau must be > 0");
        }
        let g = self.feedback_gains;
        if [g.low, g.medium, g.high].iter().any(|v| !(0.0..1.0).contains(v)) {
            return fail("feedback gains must lie in [0, 1)");
        }
        if !(g.low <= g.medium && g.medium <= g.high) {
            return fail("feedback gains must not decrease with warning level");
        }
        let m = self.condition_multiplier;
        if !(m.eyes_closed >= 1.0 && m.foam >= 1.0) {
            return fail("condition multipliers must be >= 1");
        }
        if !(self.reaction_delay.is_finite() && self.reaction_delay >= 0.0) {
            return fail("reaction_delay must be >= 0");
        }
        if !(self.sample_rate.is_finite() && self.sample_rate > 0.0) {
            return fail("sample_rate must be > 0");
        }
        Ok(())
    }
}

/// Tilt state plus the noise stream that drives it.
#[derive(Debug, Clone)]
pub struct PendulumState {
    pub pitch: f64,
    pub roll: f64,
    rng: ChaCha8Rng,
}

impl PendulumState {
    pub fn new(cfg: &SimConfig) -> Self {
        Self {
            pitch: cfg.initial_pitch,
            roll: cfg.initial_roll,
            rng: ChaCha8Rng::seed_from_u64(cfg.seed),
        }
    }

    /// Advances both axes by `dt` seconds. Two normal draws are consumed per
    /// step whatever the warning, so runs with matched seeds share noise.
    pub fn step(
        &mut self,
        cfg: &SimConfig,
        condition_multiplier: f64,
        dt: f64,
        warning: Option<Warning>,
    ) -> (f64, f64) {
        let n_pitch: f64 = StandardNormal.sample(&mut self.rng);
        let n_roll: f64 = StandardNormal.sample(&mut self.rng);
        let feedback = warning.map_or(1.0, |w| 1.0 - cfg.feedback_gains.gain(w));
        let scale = cfg.sigma * dt.sqrt() * condition_multiplier * feedback;
        self.pitch += (-self.pitch / cfg.tau + cfg.drift) * dt + scale * n_pitch;
        self.roll += (-self.roll / cfg.tau + cfg.drift) * dt + scale * n_roll;
        (self.pitch, self.roll)
    }
}

/// Closed-loop subject: emits a fixed-rate tilt stream and accepts warning
/// feedback, applied after the reaction delay.
#[derive(Debug, Clone)]
pub struct VirtualSubject {
    cfg: SimConfig,
    state: PendulumState,
    multiplier: f64,
    dt: f64,
    index: u64,
    delay_steps: usize,
    pending: VecDeque<Warning>,
}

impl VirtualSubject {
    pub fn new(cfg: SimConfig, condition: Condition) -> Result<Self, SimConfigError> {
        cfg.validate()?;
        let dt = 1.0 / cfg.sample_rate;
        Ok(Self {
            state: PendulumState::new(&cfg),
            multiplier: cfg.condition_multiplier.for_condition(condition),
            dt,
            index: 0,
            delay_steps: (cfg.reaction_delay / dt).round() as usize,
            pending: VecDeque::new(),
            cfg,
        })
    }

    pub fn config(&self) -> &SimConfig {
        &self.cfg
    }

    /// Queues the warning heard after the most recent sample.
    pub fn feedback(&mut self, warning: Warning) {
        self.pending.push_back(warning);
    }

    pub fn next_sample(&mut self) -> RawSample {
        let t = self.index as f64 * self.dt;
        if self.index > 0 {
            let effective = if self.pending.len() > self.delay_steps {
                self.pending.pop_front()
            } else {
                None
            };
            self.state.step(&self.cfg, self.multiplier, self.dt, effective);
        }
        self.index += 1;
        RawSample {
            t,
            pitch: self.state.pitch.clamp(-89.0, 89.0),
            roll: self.state.roll.clamp(-89.0, 89.0),
        }
    }
}

/// Samples in one nominal 60 s trial at 50 Hz.
pub const TRIAL_SAMPLES: usize = 3000;

/// A 60 s, 50 Hz virtual trial. With `abf_on`, each sample is classified
/// against a zero baseline and the warning fed back.
pub fn run_virtual_subject(
    cfg: &SimConfig,
    condition: Condition,
    abf_on: bool,
) -> Result<Vec<RawSample>, SimConfigError> {
    let mut subject = VirtualSubject::new(*cfg, condition)?;
    let zero = Baseline::zero();
    let n = (60.0 * cfg.sample_rate).round() as usize;
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let s = subject.next_sample();
        if abf_on {
            subject.feedback(classify(&apply_baseline(&s, &zero)).warning());
        }
        out.push(s);
    }
    Ok(out)
}
