//! Reference trajectory generation and the synthetic fallback plant.
//!
//! Paths are traversed edge by edge with a full stop at every waypoint; each
//! edge follows a rest-to-rest seven-phase jerk-limited (S-curve) profile.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::error::{Error, Result};
use crate::sysmodel::{CouplingMode, DiscreteTransferFunction, HFramePlant, Trajectory};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MotionLimits {
    /// mm/s
    pub vmax: f64,
    /// mm/s²
    pub amax: f64,
    /// mm/s³
    pub jmax: f64,
}

impl MotionLimits {
    pub fn new(vmax: f64, amax: f64, jmax: f64) -> Result<Self> {
        let ok = |v: f64| v > 0.0 && v.is_finite();
        if !(ok(vmax) && ok(amax) && ok(jmax)) {
            return Err(Error::InvalidParameter("motion limits must be positive and finite"));
        }
        Ok(Self { vmax, amax, jmax })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathSpec {
    waypoints: Vec<(f64, f64)>,
    closed: bool,
}

impl PathSpec {
    pub fn new(waypoints: Vec<(f64, f64)>, closed: bool) -> Result<Self> {
        if waypoints.len() < 2 {
            return Err(Error::InvalidPath("a path needs at least two waypoints"));
        }
        if waypoints.iter().any(|(x, y)| !x.is_finite() || !y.is_finite()) {
            return Err(Error::InvalidPath("non-finite waypoint"));
        }
        let spec = Self { waypoints, closed };
        if spec.edges().any(|(a, b)| a == b) {
            return Err(Error::InvalidPath("consecutive waypoints must be distinct"));
        }
        Ok(spec)
    }

    pub fn waypoints(&self) -> &[(f64, f64)] {
        &self.waypoints
    }

    pub fn is_closed(&self) -> bool {
        self.closed
    }

    /// Polyline segments, including the closing segment for closed paths.
    pub fn edges(&self) -> impl Iterator<Item = ((f64, f64), (f64, f64))> + '_ {
        let n = self.waypoints.len();
        let count = if self.closed { n } else { n - 1 };
        (0..count).map(move |i| (self.waypoints[i], self.waypoints[(i + 1) % n]))
    }

    pub fn perimeter(&self) -> f64 {
        self.edges().map(|(a, b)| libm::hypot(b.0 - a.0, b.1 - a.1)).sum()
    }
}

/// Closed counterclockwise rectangle starting at the origin.
pub fn rectangle_path(length: f64, width: f64) -> Result<PathSpec> {
    if !(length > 0.0 && width > 0.0) {
        return Err(Error::InvalidPath("rectangle dimensions must be positive"));
    }
    PathSpec::new(vec![(0.0, 0.0), (length, 0.0), (length, width), (0.0, width)], true)
}

/// Phase timing of a symmetric rest-to-rest S-curve, in whole samples.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SCurve {
    /// Samples spent in each jerk phase.
    pub jerk_samples: usize,
    /// Samples at constant acceleration per accel/decel stage.
    pub const_accel_samples: usize,
    /// Samples at cruise velocity.
    pub cruise_samples: usize,
    pub jerk: f64,
    pub peak_accel: f64,
    pub peak_velocity: f64,
    pub distance: f64,
    pub ts: f64,
}

fn ceil_samples(t: f64, ts: f64) -> usize {
    let n = t / ts;
    // Absorb round-off so exact multiples are not pushed up a sample.
    libm::ceil(n - 1e-9).max(0.0) as usize
}

impl SCurve {
    pub fn plan(distance: f64, limits: &MotionLimits, ts: f64) -> Result<Self> {
        if !(distance > 0.0) || !distance.is_finite() {
            return Err(Error::InvalidParameter("distance must be positive"));
        }
        if !(ts > 0.0) {
            return Err(Error::InvalidParameter("sample period must be positive"));
        }
        let MotionLimits { vmax, amax, jmax } = *limits;
        // Continuous-time phase durations.
        let (mut tj, mut tca, mut v) = if vmax * jmax >= amax * amax {
            let tj = amax / jmax;
            (tj, vmax / amax - tj, vmax)
        } else {
            let tj = libm::sqrt(vmax / jmax);
            (tj, 0.0, vmax)
        };
        if v * (2.0 * tj + tca) > distance {
            // No cruise: shrink the peak velocity until the ramps meet.
            let tj_a = amax / jmax;
            let v_a = 0.5 * amax * (-tj_a + libm::sqrt(tj_a * tj_a + 4.0 * distance / amax));
            if v_a / amax >= tj_a && v_a <= vmax {
                tj = tj_a;
                tca = v_a / amax - tj_a;
                v = v_a;
            } else {
                tj = libm::cbrt(distance / (2.0 * jmax));
                tca = 0.0;
                v = jmax * tj * tj;
            }
        }
        let tv = (distance / v - (2.0 * tj + tca)).max(0.0);

        let nj = ceil_samples(tj, ts).max(1);
        let nca = ceil_samples(tca, ts);
        let nv = ceil_samples(tv, ts);
        // Longer phases with rescaled peaks land exactly on the distance
        // without exceeding any limit.
        let tj = nj as f64 * ts;
        let tca = nca as f64 * ts;
        let tv = nv as f64 * ts;
        let peak_velocity = distance / (2.0 * tj + tca + tv);
        let peak_accel = peak_velocity / (tj + tca);
        let jerk = peak_accel / tj;
        Ok(Self {
            jerk_samples: nj,
            const_accel_samples: nca,
            cruise_samples: nv,
            jerk,
            peak_accel,
            peak_velocity,
            distance,
            ts,
        })
    }

    /// Total duration in samples.
    pub fn total_samples(&self) -> usize {
        4 * self.jerk_samples + 2 * self.const_accel_samples + self.cruise_samples
    }

    /// Displacement at `t_k = k·Ts` for `k = 0..=total_samples`.
    pub fn sample(&self) -> Vec<f64> {
        let j = self.jerk;
        let phases = [
            (self.jerk_samples, j),
            (self.const_accel_samples, 0.0),
            (self.jerk_samples, -j),
            (self.cruise_samples, 0.0),
            (self.jerk_samples, -j),
            (self.const_accel_samples, 0.0),
            (self.jerk_samples, j),
        ];
        let total = self.total_samples();
        let mut out = Vec::with_capacity(total + 1);
        let (mut s, mut v, mut a) = (0.0f64, 0.0f64, 0.0f64);
        out.push(0.0);
        for (len, jerk) in phases {
            let (s0, v0, a0) = (s, v, a);
            for i in 1..=len {
                let t = i as f64 * self.ts;
                let pos = s0 + v0 * t + a0 * t * t / 2.0 + jerk * t * t * t / 6.0;
                out.push(pos);
            }
            let t = len as f64 * self.ts;
            s = s0 + v0 * t + a0 * t * t / 2.0 + jerk * t * t * t / 6.0;
            v = v0 + a0 * t + jerk * t * t / 2.0;
            a = a0 + jerk * t;
        }
        if let Some(last) = out.last_mut() {
            *last = self.distance;
        }
        out
    }
}

/// Rest-to-rest jerk-limited displacement samples from 0 to `distance`.
pub fn jerk_limited_profile(distance: f64, limits: &MotionLimits, ts: f64) -> Result<Vec<f64>> {
    Ok(SCurve::plan(distance, limits, ts)?.sample())
}

/// Sample a path with a full stop at every waypoint. Corner samples are
/// shared between consecutive edges.
pub fn sample_trajectory(path: &PathSpec, limits: &MotionLimits, ts: f64) -> Result<Trajectory> {
    let mut x = Vec::new();
    let mut y = Vec::new();
    for (i, (a, b)) in path.edges().enumerate() {
        let len = libm::hypot(b.0 - a.0, b.1 - a.1);
        let (ux, uy) = ((b.0 - a.0) / len, (b.1 - a.1) / len);
        let prof = jerk_limited_profile(len, limits, ts)?;
        let last = prof.len() - 1;
        for (k, s) in prof.iter().enumerate() {
            if i > 0 && k == 0 {
                continue;
            }
            if k == last {
                x.push(b.0);
                y.push(b.1);
            } else {
                x.push(a.0 + s * ux);
                y.push(a.1 + s * uy);
            }
        }
    }
    Trajectory::new(x, y, ts)
}

/// Parameters of the synthetic fallback plant. These are not measured values;
/// they give each path a lightly damped resonance of plausible magnitude.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticPlantParams {
    /// Hz
    pub resonance_x: f64,
    /// Hz
    pub resonance_y: f64,
    /// Hz
    pub resonance_rack: f64,
    pub damping: f64,
    /// Static racking gain, rad per mm of x command.
    pub rack_gain: f64,
    /// s
    pub ts: f64,
}

impl Default for SyntheticPlantParams {
    fn default() -> Self {
        Self {
            resonance_x: 40.0,
            resonance_y: 30.0,
            resonance_rack: 55.0,
            damping: 0.05,
            rack_gain: 2e-5,
            ts: 0.001,
        }
    }
}

/// Second-order resonance with static gain `dc_gain`: poles mapped exactly
/// by `z = e^{sTs}` and both zeros at the origin, which keeps the filter
/// biproper with a finite-length inverse.
pub fn resonant_filter(freq_hz: f64, damping: f64, dc_gain: f64, ts: f64) -> Result<DiscreteTransferFunction> {
    if !(ts > 0.0) {
        return Err(Error::InvalidParameter("sample period must be positive"));
    }
    if !(freq_hz > 0.0) || freq_hz >= 0.5 / ts {
        return Err(Error::InvalidParameter("resonance must lie in (0, Nyquist)"));
    }
    if !(damping > 0.0 && damping < 1.0) {
        return Err(Error::InvalidParameter("damping ratio must lie in (0, 1)"));
    }
    let wn = 2.0 * PI * freq_hz;
    let radius = libm::exp(-damping * wn * ts);
    let angle = wn * libm::sqrt(1.0 - damping * damping) * ts;
    let a1 = -2.0 * radius * libm::cos(angle);
    let a0 = radius * radius;
    let k = dc_gain * (1.0 + a1 + a0);
    DiscreteTransferFunction::new(vec![k, 0.0, 0.0], vec![1.0, a1, a0], ts)
}

/// Biproper, stable plant for tests and for runs where the measured model
/// is unusable.
pub fn synthetic_plant(params: &SyntheticPlantParams) -> Result<HFramePlant> {
    let p = params;
    HFramePlant::new(
        resonant_filter(p.resonance_x, p.damping, 1.0, p.ts)?,
        resonant_filter(p.resonance_y, p.damping, 1.0, p.ts)?,
        resonant_filter(p.resonance_rack, p.damping, p.rack_gain, p.ts)?,
        CouplingMode::Nonlinear,
    )
}
