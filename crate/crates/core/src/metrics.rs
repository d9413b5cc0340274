//! Tracking and contour error metrics.
//!
//! Contour error is the distance from each output sample to the desired
//! geometric path (the polyline), not to the time-synchronized reference.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::fbs::rms;
use crate::sysmodel::Trajectory;
use crate::trajgen::PathSpec;

/// Per-axis `reference - output`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrackingError {
    pub ex: Vec<f64>,
    pub ey: Vec<f64>,
}

pub fn tracking_error(reference: &Trajectory, output: &Trajectory) -> Result<TrackingError> {
    if reference.len() != output.len() {
        return Err(Error::DimensionMismatch {
            what: "output length vs reference length",
            expected: reference.len(),
            got: output.len(),
        });
    }
    Ok(TrackingError {
        ex: reference.x.iter().zip(&output.x).map(|(r, o)| r - o).collect(),
        ey: reference.y.iter().zip(&output.y).map(|(r, o)| r - o).collect(),
    })
}

fn point_segment_distance(p: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    let len2 = dx * dx + dy * dy;
    let t = if len2 == 0.0 {
        0.0
    } else {
        (((p.0 - a.0) * dx + (p.1 - a.1) * dy) / len2).clamp(0.0, 1.0)
    };
    libm::hypot(p.0 - (a.0 + t * dx), p.1 - (a.1 + t * dy))
}

/// Distance from `(x, y)` to the nearest point of `path`.
pub fn distance_to_path(path: &PathSpec, x: f64, y: f64) -> f64 {
    path.edges()
        .map(|(a, b)| point_segment_distance((x, y), a, b))
        .fold(f64::INFINITY, f64::min)
}

/// Per-sample distance from `output` to the polyline.
pub fn contour_error(path: &PathSpec, output: &Trajectory) -> Vec<f64> {
    output
        .x
        .iter()
        .zip(&output.y)
        .map(|(&x, &y)| distance_to_path(path, x, y))
        .collect()
}

/// Cumulative path length along a sampled trajectory, starting at 0.
pub fn arc_length(traj: &Trajectory) -> Vec<f64> {
    let mut out = Vec::with_capacity(traj.len());
    let mut acc = 0.0;
    out.push(0.0);
    for k in 1..traj.len() {
        acc += libm::hypot(traj.x[k] - traj.x[k - 1], traj.y[k] - traj.y[k - 1]);
        out.push(acc);
    }
    out
}

pub fn root_mean_square(v: &[f64]) -> f64 {
    rms(v.iter().copied())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorReport {
    pub tracking_x: Vec<f64>,
    pub tracking_y: Vec<f64>,
    pub contour: Vec<f64>,
    pub arc_length: Vec<f64>,
    pub rms_tracking_x: f64,
    pub rms_tracking_y: f64,
    pub rms_contour: f64,
}

impl ErrorReport {
    pub fn new(path: &PathSpec, reference: &Trajectory, output: &Trajectory) -> Result<Self> {
        let t = tracking_error(reference, output)?;
        let contour = contour_error(path, output);
        Ok(Self {
            rms_tracking_x: root_mean_square(&t.ex),
            rms_tracking_y: root_mean_square(&t.ey),
            rms_contour: root_mean_square(&contour),
            tracking_x: t.ex,
            tracking_y: t.ey,
            arc_length: arc_length(reference),
            contour,
        })
    }
}
