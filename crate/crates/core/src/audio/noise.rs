//! Seeded white and pink noise.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

/// Variance of a uniform draw on [-1, 1).
const WHITE_VARIANCE: f64 = 1.0 / 3.0;

/// Paul Kellet's refined pink filter: six leaky integrators, a direct path
/// and a one-sample-delayed tap. Accurate to ±0.05 dB above ~10 Hz.
const POLES: [f64; 6] = [0.99886, 0.99332, 0.96900, 0.86650, 0.55000, -0.7616];
const GAINS: [f64; 6] = [0.0555179, 0.0750759, 0.1538520, 0.3104856, 0.5329522, -0.0168980];
const DIRECT: f64 = 0.5362;
const DELAYED: f64 = 0.115926;

#[derive(Debug, Clone)]
pub struct WhiteNoise {
    rng: ChaCha8Rng,
}

impl WhiteNoise {
    pub fn new(seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    #[inline]
    pub fn next_sample(&mut self) -> f64 {
        self.rng.random_range(-1.0..1.0)
    }
}

/// Pink noise scaled to unit RMS in steady state.
#[derive(Debug, Clone)]
pub struct PinkNoise {
    white: WhiteNoise,
    state: [f64; 6],
    delayed: f64,
    norm: f64,
}

impl PinkNoise {
    pub fn new(seed: u64) -> Self {
        Self {
            white: WhiteNoise::new(seed),
            state: [0.0; 6],
            delayed: 0.0,
            norm: 1.0 / (WHITE_VARIANCE * impulse_energy()).sqrt(),
        }
    }

    #[inline]
    pub fn next_sample(&mut self) -> f64 {
        let w = self.white.next_sample();
        let mut acc = DIRECT * w + self.delayed;
        for ((s, a), g) in self.state.iter_mut().zip(POLES).zip(GAINS) {
            *s = a * *s + g * w;
            acc += *s;
        }
        self.delayed = DELAYED * w;
        acc * self.norm
    }
}

/// Σ h[n]² of the pink filter, in closed form from its partial fractions.
fn impulse_energy() -> f64 {
    // h[0] = Σg + DIRECT, h[1] = Σ g·a + DELAYED, h[n≥2] = Σ g·aⁿ
    let h0: f64 = GAINS.iter().sum::<f64>() + DIRECT;
    let h1: f64 = GAINS.iter().zip(POLES).map(|(g, a)| g * a).sum::<f64>() + DELAYED;
    let mut tail = 0.0;
    for (gi, ai) in GAINS.iter().zip(POLES) {
        for (gj, aj) in GAINS.iter().zip(POLES) {
            let r = ai * aj;
            tail += gi * gj * r * r / (1.0 - r);
        }
    }
    h0 * h0 + h1 * h1 + tail
}

/// Steady-state power spectral shape of the unit-RMS pink source at
/// normalized angular frequency ω: |P(e^{jω})|² · σ²_white · norm².
pub fn pink_power_response(omega: f64) -> f64 {
    let (c, s) = (omega.cos(), -omega.sin());
    let mut re = DIRECT + DELAYED * c;
    let mut im = DELAYED * s;
    for (g, a) in GAINS.iter().zip(POLES) {
        // g / (1 - a e^{-jω})
        let dr = 1.0 - a * c;
        let di = -a * s;
        let den = dr * dr + di * di;
        re += g * dr / den;
        im += -g * di / den;
    }
    (re * re + im * im) / impulse_energy()
}

/// Fraction of unit-RMS pink power passed by a filter with power response
/// `filter(ω)`. Integrated on a log-frequency grid down to 1 Hz plus a flat
/// segment below.
pub fn pink_power_fraction(sample_rate: f64, filter: impl Fn(f64) -> f64) -> f64 {
    const POINTS: usize = 2048;
    let nyquist = sample_rate / 2.0;
    let lo = 1.0f64;
    let step = (nyquist / lo).ln() / (POINTS - 1) as f64;
    let omega = |f: f64| 2.0 * PI * f / sample_rate;

    // ∫ S(f) df = ∫ S(f) f d(ln f)
    let mut num = 0.0;
    let mut den = 0.0;
    let mut prev: Option<(f64, f64)> = None;
    for i in 0..POINTS {
        let f = lo * (step * i as f64).exp();
        let p = pink_power_response(omega(f));
        let pw = p * f;
        let fw = pw * filter(omega(f));
        if let Some((pp, pf)) = prev {
            den += 0.5 * (pp + pw) * step;
            num += 0.5 * (pf + fw) * step;
        }
        prev = Some((pw, fw));
    }
    let p0 = pink_power_response(omega(lo));
    den += p0 * lo;
    num += p0 * filter(omega(lo)) * lo;
    num / den
}
