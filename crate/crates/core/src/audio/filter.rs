//! Butterworth band-pass as a cascade of second-order sections.
//!
//! Designed from an analog low-pass prototype, transformed to band-pass and
//! mapped through the bilinear transform with both corners prewarped, so the
//! digital −3 dB points land exactly on the requested corners.

use std::f64::consts::PI;

/// Order of the low-pass prototype. The band-pass has twice this order.
pub const PROTOTYPE_ORDER: usize = 4;
pub const SECTIONS: usize = PROTOTYPE_ORDER;

/// Normalized biquad, transposed direct form II.
///
/// H(z) = (b0 + b1 z⁻¹ + b2 z⁻²) / (1 + a1 z⁻¹ + a2 z⁻²)
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Biquad {
    pub b0: f64,
    pub b1: f64,
    pub b2: f64,
    pub a1: f64,
    pub a2: f64,
    s1: f64,
    s2: f64,
}

impl Biquad {
    pub const IDENTITY: Self = Self::new(1.0, 0.0, 0.0, 0.0, 0.0);

    pub const fn new(b0: f64, b1: f64, b2: f64, a1: f64, a2: f64) -> Self {
        Self { b0, b1, b2, a1, a2, s1: 0.0, s2: 0.0 }
    }

    #[inline]
    pub fn process(&mut self, x: f64) -> f64 {
        let y = self.b0 * x + self.s1;
        self.s1 = self.b1 * x - self.a1 * y + self.s2;
        self.s2 = self.b2 * x - self.a2 * y;
        y
    }

    /// Replaces the coefficients and keeps the delay line.
    pub fn set_coefficients(&mut self, other: &Biquad) {
        self.b0 = other.b0;
        self.b1 = other.b1;
        self.b2 = other.b2;
        self.a1 = other.a1;
        self.a2 = other.a2;
    }

    pub fn reset(&mut self) {
        self.s1 = 0.0;
        self.s2 = 0.0;
    }

    /// |H(e^{jω})|² at normalized angular frequency ω (rad/sample).
    pub fn power_response(&self, omega: f64) -> f64 {
        let (c1, s1) = (omega.cos(), -omega.sin());
        let (c2, s2) = ((2.0 * omega).cos(), -(2.0 * omega).sin());
        let nr = self.b0 + self.b1 * c1 + self.b2 * c2;
        let ni = self.b1 * s1 + self.b2 * s2;
        let dr = 1.0 + self.a1 * c1 + self.a2 * c2;
        let di = self.a1 * s1 + self.a2 * s2;
        (nr * nr + ni * ni) / (dr * dr + di * di)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
struct Complex {
    re: f64,
    im: f64,
}

impl Complex {
    fn new(re: f64, im: f64) -> Self {
        Self { re, im }
    }
    fn mul(self, o: Self) -> Self {
        Self::new(self.re * o.re - self.im * o.im, self.re * o.im + self.im * o.re)
    }
    fn scale(self, k: f64) -> Self {
        Self::new(self.re * k, self.im * k)
    }
    fn sub(self, o: Self) -> Self {
        Self::new(self.re - o.re, self.im - o.im)
    }
    fn add(self, o: Self) -> Self {
        Self::new(self.re + o.re, self.im + o.im)
    }
    fn sqrt(self) -> Self {
        let r = self.re.hypot(self.im);
        let re = ((r + self.re) / 2.0).max(0.0).sqrt();
        let im = ((r - self.re) / 2.0).max(0.0).sqrt().copysign(self.im);
        Self::new(re, im)
    }
}

/// Designs the band-pass sections for corners `low_hz < high_hz < fs / 2`.
///
/// Every section is scaled to unity gain at the geometric centre of the
/// prewarped band, which is where the full cascade peaks.
pub fn design_bandpass(low_hz: f64, high_hz: f64, sample_rate: f64) -> [Biquad; SECTIONS] {
    debug_assert!(0.0 < low_hz && low_hz < high_hz && high_hz < sample_rate / 2.0);
    let k = 2.0 * sample_rate;
    let w1 = k * (PI * low_hz / sample_rate).tan();
    let w2 = k * (PI * high_hz / sample_rate).tan();
    let w0sq = w1 * w2;
    let w0 = w0sq.sqrt();
    let bw = w2 - w1;

    let mut sections = [Biquad::IDENTITY; SECTIONS];
    let n = PROTOTYPE_ORDER as f64;
    // Upper-half-plane prototype poles; each yields two band-pass poles whose
    // conjugates come from the mirrored prototype pole.
    for i in 0..PROTOTYPE_ORDER / 2 {
        let theta = PI * (2.0 * i as f64 + n + 1.0) / (2.0 * n);
        let p = Complex::new(theta.cos(), theta.sin().abs());
        let pb = p.scale(bw);
        let disc = pb.mul(pb).sub(Complex::new(4.0 * w0sq, 0.0)).sqrt();
        for (j, s) in [pb.add(disc).scale(0.5), pb.sub(disc).scale(0.5)].into_iter().enumerate() {
            // analog section: g·s / (s² + a1·s + a0) with poles s, s*
            let a1 = -2.0 * s.re;
            let a0 = s.re * s.re + s.im * s.im;
            let g = (a0 - w0sq).hypot(a1 * w0) / w0;
            let d0 = k * k + a1 * k + a0;
            let b0 = g * k / d0;
            sections[2 * i + j] = Biquad::new(
                b0,
                0.0,
                -b0,
                (2.0 * a0 - 2.0 * k * k) / d0,
                (k * k - a1 * k + a0) / d0,
            );
        }
    }
    sections
}

/// |H|² of a cascade at `freq_hz`.
pub fn cascade_power_response(sections: &[Biquad], freq_hz: f64, sample_rate: f64) -> f64 {
    let omega = 2.0 * PI * freq_hz / sample_rate;
    sections.iter().map(|s| s.power_response(omega)).product()
}

/// A running band-pass cascade.
#[derive(Debug, Clone)]
pub struct BandPass {
    sections: [Biquad; SECTIONS],
}

impl BandPass {
    pub fn new(low_hz: f64, high_hz: f64, sample_rate: f64) -> Self {
        Self {
            sections: design_bandpass(low_hz, high_hz, sample_rate),
        }
    }

    /// Retunes without clearing the filter memories.
    pub fn retune(&mut self, low_hz: f64, high_hz: f64, sample_rate: f64) {
        let fresh = design_bandpass(low_hz, high_hz, sample_rate);
        for (s, f) in self.sections.iter_mut().zip(fresh.iter()) {
            s.set_coefficients(f);
        }
    }

    #[inline]
    pub fn process(&mut self, x: f64) -> f64 {
        self.sections.iter_mut().fold(x, |acc, s| s.process(acc))
    }

    pub fn sections(&self) -> &[Biquad; SECTIONS] {
        &self.sections
    }
}
