//! Scatter export of sway points with the region contours as polylines.

use crate::sway::{classify, Region, SwayPoint, FULL_SCALE_DEG};
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;

/// Upper bound on the distance between consecutive boundary vertices, degrees.
pub const MAX_VERTEX_SPACING_DEG: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScatterPoint {
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub region: Region,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Boundary {
    pub name: String,
    /// Region whose outer contour (or threshold line) this is.
    pub region: Region,
    pub closed: bool,
    pub points: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DispersionDataset {
    pub points: Vec<ScatterPoint>,
    pub boundaries: Vec<Boundary>,
}

/// Samples an axis-aligned ellipse with vertex count divisible by four so
/// the axis vertices are always included.
fn ellipse(cx: f64, cy: f64, ax: f64, ay: f64) -> Vec<[f64; 2]> {
    // chord length <= max(ax, ay) * dtheta
    let n = ((ax.max(ay) * TAU / (0.9 * MAX_VERTEX_SPACING_DEG)).ceil() as usize).next_multiple_of(4);
    (0..=n)
        .map(|k| {
            let th = TAU * k as f64 / n as f64;
            [cx + ax * th.cos(), cy + ay * th.sin()]
        })
        .collect()
}

fn vertical_line(x: f64) -> Vec<[f64; 2]> {
    let n = (2.0 * FULL_SCALE_DEG / MAX_VERTEX_SPACING_DEG).round() as usize;
    (0..=n)
        .map(|k| [x, -FULL_SCALE_DEG + 2.0 * FULL_SCALE_DEG * k as f64 / n as f64])
        .collect()
}

/// The contours of regions A, B, C and the x = ±2 thresholds of E and F.
/// Region D has no contour of its own; it is what lies outside C.
pub fn region_boundaries() -> Vec<Boundary> {
    let b = |name: &str, region, closed, points| Boundary {
        name: name.to_string(),
        region,
        closed,
        points,
    };
    vec![
        b("A: x^2 + y^2 = 1", Region::A, true, ellipse(0.0, 0.0, 1.0, 1.0)),
        b("B: ((y-0.5)/2.25)^2 + (x/1.5)^2 = 1", Region::B, true, ellipse(0.0, 0.5, 1.5, 2.25)),
        b("C: ((y-0.5)/3)^2 + (x/2)^2 = 1", Region::C, true, ellipse(0.0, 0.5, 2.0, 3.0)),
        b("E: x = -2", Region::E, false, vertical_line(-2.0)),
        b("F: x = 2", Region::F, false, vertical_line(2.0)),
    ]
}

pub fn dispersion_export(points: &[SwayPoint]) -> DispersionDataset {
    DispersionDataset {
        points: points
            .iter()
            .map(|p| ScatterPoint {
                t: p.t,
                x: p.x,
                y: p.y,
                region: classify(p),
            })
            .collect(),
        boundaries: region_boundaries(),
    }
}
