//! Sway-plane geometry: calibration baseline, distance and the six-region
//! classifier.
//!
//! All coordinates are trunk tilt in degrees. `x` is pitch
//! (anterior/posterior), `y` is roll (medial/lateral). Region contours:
//!
//! | Region | Contour                                   | Warning |
//! |--------|-------------------------------------------|---------|
//! | A      | x² + y² = 1                               | safety  |
//! | B      | ((y − 0.5) / 2.25)² + (x / 1.5)² = 1      | low     |
//! | C      | ((y − 0.5) / 3)² + (x / 2)² = 1           | medium  |
//! | D      | −2 < x < 2, outside C                     | high    |
//! | E      | x ≤ −2                                    | high    |
//! | F      | x ≥ 2                                     | high    |
//!
//! Membership uses closed interiors with precedence E/F, A, B, C, D.

use serde::{Deserialize, Serialize};
use std::fmt;
use thiserror::Error;

/// Hard sanity bound on raw tilt angles, in degrees.
pub const MAX_TILT_DEG: f64 = 90.0;

/// Default calibration window: 5 s, i.e. 250 samples at 50 Hz.
pub const DEFAULT_CALIBRATION_WINDOW_S: f64 = 5.0;

/// Full-scale tilt used for display normalization and audio mapping.
pub const FULL_SCALE_DEG: f64 = 20.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SwayError {
    #[error("no calibration samples inside a {window} s window")]
    EmptyCalibration { window: f64 },
    #[error("invalid sample at t={t}: {reason}")]
    InvalidSample { t: f64, reason: &'static str },
}

/// One orientation reading from the trunk sensor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RawSample {
    /// Seconds since the start of the stream.
    pub t: f64,
    /// Pitch in degrees (x, anterior/posterior).
    pub pitch: f64,
    /// Roll in degrees (y, medial/lateral).
    pub roll: f64,
}

impl RawSample {
    /// Builds a sample, rejecting non-finite or out-of-range values.
    pub fn new(t: f64, pitch: f64, roll: f64) -> Result<Self, SwayError> {
        let sample = Self { t, pitch, roll };
        sample.validate()?;
        Ok(sample)
    }

    pub fn validate(&self) -> Result<(), SwayError> {
        let reason = if !self.t.is_finite() || self.t < 0.0 {
            "timestamp must be finite and non-negative"
        } else if !self.pitch.is_finite() || !self.roll.is_finite() {
            "angles must be finite"
        } else if self.pitch.abs() > MAX_TILT_DEG || self.roll.abs() > MAX_TILT_DEG {
            "angle exceeds the 90 degree sanity bound"
        } else {
            return Ok(());
        };
        Err(SwayError::InvalidSample { t: self.t, reason })
    }
}

/// Natural-stance reference captured during calibration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Baseline {
    pub x0: f64,
    pub y0: f64,
    /// Calibration window length in seconds.
    pub window: f64,
    pub n_samples: usize,
}

impl Baseline {
    /// A baseline at the origin, used when no offset should be removed.
    pub fn zero() -> Self {
        Self {
            x0: 0.0,
            y0: 0.0,
            window: 0.0,
            n_samples: 1,
        }
    }
}

/// Baseline-subtracted sway point P(x, y, t).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SwayPoint {
    pub t: f64,
    pub x: f64,
    pub y: f64,
}

impl SwayPoint {
    pub fn new(t: f64, x: f64, y: f64) -> Self {
        Self { t, x, y }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Warning {
    Safety,
    Low,
    Medium,
    High,
}

impl Warning {
    pub const ALL: [Warning; 4] = [Warning::Safety, Warning::Low, Warning::Medium, Warning::High];

    pub fn as_str(self) -> &'static str {
        match self {
            Warning::Safety => "safety",
            Warning::Low => "low",
            Warning::Medium => "medium",
            Warning::High => "high",
        }
    }
}

/// The six sway regions. The warning level is a function of the label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Region {
    A,
    B,
    C,
    D,
    E,
    F,
}

impl Region {
    pub const ALL: [Region; 6] = [Region::A, Region::B, Region::C, Region::D, Region::E, Region::F];

    pub fn warning(self) -> Warning {
        match self {
            Region::A => Warning::Safety,
            Region::B => Warning::Low,
            Region::C => Warning::Medium,
            Region::D | Region::E | Region::F => Warning::High,
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Region::A => "A",
            Region::B => "B",
            Region::C => "C",
            Region::D => "D",
            Region::E => "E",
            Region::F => "F",
        }
    }
}

impl fmt::Display for Region {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Averages the samples inside `[t_first, t_first + window)`.
pub fn calibrate(samples: &[RawSample], window: f64) -> Result<Baseline, SwayError> {
    let Some(first) = samples.first() else {
        return Err(SwayError::EmptyCalibration { window });
    };
    let end = first.t + window;
    let (mut sx, mut sy, mut n) = (0.0, 0.0, 0usize);
    for s in samples.iter().filter(|s| s.t >= first.t && s.t < end) {
        sx += s.pitch;
        sy += s.roll;
        n += 1;
    }
    if n == 0 {
        return Err(SwayError::EmptyCalibration { window });
    }
    Ok(Baseline {
        x0: sx / n as f64,
        y0: sy / n as f64,
        window,
        n_samples: n,
    })
}

pub fn apply_baseline(raw: &RawSample, baseline: &Baseline) -> SwayPoint {
    SwayPoint {
        t: raw.t,
        x: raw.pitch - baseline.x0,
        y: raw.roll - baseline.y0,
    }
}

/// Left-hand side of the region-B ellipse equation; `<= 1` means inside.
#[inline]
pub fn ellipse_b(x: f64, y: f64) -> f64 {
    let u = (y - 0.5) / 2.25;
    let v = x / 1.5;
    u * u + v * v
}

/// Left-hand side of the region-C ellipse equation; `<= 1` means inside.
#[inline]
pub fn ellipse_c(x: f64, y: f64) -> f64 {
    let u = (y - 0.5) / 3.0;
    let v = x / 2.0;
    u * u + v * v
}

/// Slack on the contour equations so that points lying on a contour in
/// decimal degrees, e.g. (0.6, 0.8), count as on it despite binary rounding.
pub const CONTOUR_TOLERANCE: f64 = 1e-12;

#[inline]
pub fn classify(p: &SwayPoint) -> Region {
    classify_xy(p.x, p.y)
}

#[inline]
pub fn classify_xy(x: f64, y: f64) -> Region {
    if x <= -2.0 {
        Region::E
    } else if x >= 2.0 {
        Region::F
    } else if x * x + y * y <= 1.0 + CONTOUR_TOLERANCE {
        Region::A
    } else if ellipse_b(x, y) <= 1.0 + CONTOUR_TOLERANCE {
        Region::B
    } else if ellipse_c(x, y) <= 1.0 + CONTOUR_TOLERANCE {
        Region::C
    } else {
        Region::D
    }
}

/// Euclidean sway magnitude of a baseline-subtracted point, in degrees.
#[inline]
pub fn dist(p: &SwayPoint) -> f64 {
    p.x.hypot(p.y)
}

/// Maps degrees onto `[0, 1]` over the ±20° full scale, for display only.
#[inline]
pub fn normalize_display(deg: f64) -> f64 {
    ((deg + FULL_SCALE_DEG) / (2.0 * FULL_SCALE_DEG)).clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn raw(t: f64, pitch: f64, roll: f64) -> RawSample {
        RawSample { t, pitch, roll }
    }

    #[test]
    fn calibrate_zero_samples_gives_origin() {
        let samples: Vec<_> = (0..250).map(|i| raw(i as f64 / 50.0, 0.0, 0.0)).collect();
        let b = calibrate(&samples, 5.0).unwrap();
        assert_eq!((b.x0, b.y0, b.n_samples), (0.0, 0.0, 250));
    }

    #[test]
    fn calibrate_is_arithmetic_mean() {
        let b = calibrate(&[raw(0.0, 1.0, 2.0), raw(0.02, 3.0, 4.0)], 5.0).unwrap();
        assert_eq!((b.x0, b.y0, b.n_samples), (2.0, 3.0, 2));
    }

    #[test]
    fn calibrate_ignores_samples_past_window() {
        let samples = [raw(0.0, 1.0, 1.0), raw(4.9, 1.0, 1.0), raw(5.0, 100.0, 100.0)];
        let b = calibrate(&samples, 5.0).unwrap();
        assert_eq!((b.x0, b.n_samples), (1.0, 2));
    }

    #[test]
    fn calibrate_empty_is_error() {
        assert_eq!(
            calibrate(&[], 5.0),
            Err(SwayError::EmptyCalibration { window: 5.0 })
        );
        assert!(calibrate(&[raw(0.0, 0.0, 0.0)], 0.0).is_err());
    }

    #[test]
    fn apply_baseline_examples() {
        let b = |x0, y0| Baseline { x0, y0, window: 5.0, n_samples: 1 };
        assert_eq!(apply_baseline(&raw(1.0, 2.0, 3.0), &b(2.0, 3.0)), SwayPoint::new(1.0, 0.0, 0.0));
        assert_eq!(apply_baseline(&raw(0.0, 5.0, -1.0), &b(1.0, 1.0)), SwayPoint::new(0.0, 4.0, -2.0));
        assert_eq!(apply_baseline(&raw(0.0, 0.0, 0.0), &b(-1.5, 0.5)), SwayPoint::new(0.0, 1.5, -0.5));
    }

    #[test]
    fn classify_examples() {
        let c = |x, y| classify(&SwayPoint::new(0.0, x, y));
        assert_eq!(c(0.0, 0.0), Region::A);
        assert_eq!(c(0.0, 2.5), Region::B);
        assert_eq!(c(1.5, 0.0), Region::C);
        assert_eq!(c(0.0, -3.5), Region::D);
        assert_eq!(c(-2.5, 0.0), Region::E);
        assert_eq!(c(3.0, 0.0), Region::F);
    }

    #[test]
    fn classify_boundaries_resolve_to_documented_side() {
        let c = |x, y| classify_xy(x, y);
        // x thresholds are closed on the severe side
        assert_eq!(c(-2.0, 0.5), Region::E);
        assert_eq!(c(2.0, 0.5), Region::F);
        // nested contours are closed on the safer side
        assert_eq!(c(1.0, 0.0), Region::A);
        assert_eq!(c(0.0, 2.75), Region::B);
        assert_eq!(c(0.0, 3.5), Region::C);
        assert_eq!(c(0.0, 3.5000001), Region::D);
    }

    #[test]
    fn region_warning_levels() {
        assert_eq!(Region::A.warning(), Warning::Safety);
        assert_eq!(Region::B.warning(), Warning::Low);
        assert_eq!(Region::C.warning(), Warning::Medium);
        for r in [Region::D, Region::E, Region::F] {
            assert_eq!(r.warning(), Warning::High);
        }
    }

    #[test]
    fn dist_examples() {
        assert_eq!(dist(&SwayPoint::new(0.0, 0.0, 0.0)), 0.0);
        assert_eq!(dist(&SwayPoint::new(0.0, 3.0, 4.0)), 5.0);
        assert!((dist(&SwayPoint::new(0.0, -1.2, 0.5)) - 1.3).abs() < 1e-12);
    }

    #[test]
    fn raw_sample_validation() {
        assert!(RawSample::new(0.0, 10.0, -10.0).is_ok());
        assert!(RawSample::new(-1.0, 0.0, 0.0).is_err());
        assert!(RawSample::new(0.0, f64::NAN, 0.0).is_err());
        assert!(RawSample::new(0.0, 0.0, 90.5).is_err());
    }

    #[test]
    fn display_normalization_clamps() {
        assert_eq!(normalize_display(-20.0), 0.0);
        assert_eq!(normalize_display(0.0), 0.5);
        assert_eq!(normalize_display(35.0), 1.0);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn dist_non_negative_and_symmetric(x in -50.0..50.0f64, y in -50.0..50.0f64) {
                let d = dist(&SwayPoint::new(0.0, x, y));
                prop_assert!(d >= 0.0);
                prop_assert_eq!(d, dist(&SwayPoint::new(0.0, -x, -y)));
                prop_assert_eq!(d == 0.0, x == 0.0 && y == 0.0);
            }

            #[test]
            fn common_offset_does_not_change_region(
                pitch in -20.0..20.0f64, roll in -20.0..20.0f64,
                x0 in -5.0..5.0f64, y0 in -5.0..5.0f64,
                k in -8i32..8, m in -8i32..8,
            ) {
                // dyadic offsets keep the subtraction exact
                let (dx, dy) = (k as f64 * 0.25, m as f64 * 0.25);
                let x0 = (x0 * 4.0).round() / 4.0;
                let y0 = (y0 * 4.0).round() / 4.0;
                let pitch = (pitch * 1024.0).round() / 1024.0;
                let roll = (roll * 1024.0).round() / 1024.0;
                let b = Baseline { x0, y0, window: 5.0, n_samples: 1 };
                let shifted = Baseline { x0: x0 + dx, y0: y0 + dy, ..b };
                let r = RawSample { t: 0.0, pitch, roll };
                let rs = RawSample { t: 0.0, pitch: pitch + dx, roll: roll + dy };
                prop_assert_eq!(
                    classify(&apply_baseline(&r, &b)),
                    classify(&apply_baseline(&rs, &shifted))
                );
            }
        }
    }
}
