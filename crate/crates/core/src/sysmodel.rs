//! Discrete transfer functions, lifted (Toeplitz) representations and the
//! coupled H-frame plant.
//!
//! All filtering starts from rest (zero initial conditions).

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::splines::BasisMatrix;

/// Rational filter in the forward shift operator `z`.
///
/// Coefficients are stored highest power first; the denominator is monic.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteTransferFunction {
    numerator: Vec<f64>,
    denominator: Vec<f64>,
    sample_period: f64,
}

impl DiscreteTransferFunction {
    pub fn new(numerator: Vec<f64>, denominator: Vec<f64>, sample_period: f64) -> Result<Self> {
        if numerator.is_empty() || denominator.is_empty() {
            return Err(Error::InvalidTransferFunction("empty coefficient list"));
        }
        if denominator[0] != 1.0 {
            return Err(Error::InvalidTransferFunction("denominator must be monic (leading 1)"));
        }
        if numerator.len() > denominator.len() {
            return Err(Error::InvalidTransferFunction("numerator degree exceeds denominator degree"));
        }
        if numerator.iter().chain(&denominator).any(|c| !c.is_finite()) {
            return Err(Error::InvalidTransferFunction("non-finite coefficient"));
        }
        if !(sample_period > 0.0) || !sample_period.is_finite() {
            return Err(Error::InvalidTransferFunction("sample period must be positive"));
        }
        Ok(Self {
            numerator,
            denominator,
            sample_period,
        })
    }

    /// Static gain `k`.
    pub fn gain(k: f64, sample_period: f64) -> Result<Self> {
        Self::new(vec![k], vec![1.0], sample_period)
    }

    /// Pure delay of `samples` steps, `z^-samples`.
    pub fn delay(samples: usize, sample_period: f64) -> Result<Self> {
        let mut den = vec![0.0; samples + 1];
        den[0] = 1.0;
        Self::new(vec![1.0], den, sample_period)
    }

    pub fn numerator(&self) -> &[f64] {
        &self.numerator
    }

    pub fn denominator(&self) -> &[f64] {
        &self.denominator
    }

    pub fn sample_period(&self) -> f64 {
        self.sample_period
    }

    /// Denominator degree `d`.
    pub fn order(&self) -> usize {
        self.denominator.len() - 1
    }

    /// `d - q`; zero means biproper (nonzero direct feedthrough possible).
    pub fn relative_degree(&self) -> usize {
        self.denominator.len() - self.numerator.len()
    }

    /// First impulse-response sample, i.e. the direct feedthrough.
    pub fn feedthrough(&self) -> f64 {
        if self.relative_degree() == 0 {
            self.numerator[0]
        } else {
            0.0
        }
    }

    /// Numerator padded to the denominator length: entry `i` multiplies
    /// `u(k - i)`.
    fn padded_numerator(&self) -> Vec<f64> {
        let mut b = vec![0.0; self.relative_degree()];
        b.extend_from_slice(&self.numerator);
        b
    }

    /// `B(1) / A(1)`; infinite when the denominator vanishes at `z = 1`.
    pub fn dc_gain(&self) -> f64 {
        let b: f64 = self.numerator.iter().sum();
        let a: f64 = self.denominator.iter().sum();
        b / a
    }

    /// Pole magnitudes, largest first.
    pub fn pole_magnitudes(&self) -> Vec<f64> {
        let d = self.order();
        if d == 0 {
            return Vec::new();
        }
        let companion = DMatrix::from_fn(d, d, |i, j| {
            if i == 0 {
                -self.denominator[j + 1]
            } else if i == j + 1 {
                1.0
            } else {
                0.0
            }
        });
        let mut mags: Vec<f64> = companion.complex_eigenvalues().iter().map(|c| libm::hypot(c.re, c.im)).collect();
        mags.sort_by(|a, b| b.partial_cmp(a).unwrap_or(core::cmp::Ordering::Equal));
        mags
    }

    pub fn max_pole_magnitude(&self) -> f64 {
        self.pole_magnitudes().first().copied().unwrap_or(0.0)
    }

    pub fn is_stable(&self) -> bool {
        self.max_pole_magnitude() < 1.0
    }
}

/// Output of `tf` driven by `u` from rest, by direct difference-equation
/// recursion.
pub fn filter_signal(tf: &DiscreteTransferFunction, u: &[f64]) -> Vec<f64> {
    let b = tf.padded_numerator();
    let a = &tf.denominator;
    let mut y = vec![0.0; u.len()];
    for k in 0..u.len() {
        let mut acc = 0.0;
        for (i, &bi) in b.iter().enumerate().take(k + 1) {
            acc += bi * u[k - i];
        }
        for (i, &ai) in a.iter().enumerate().skip(1).take(k) {
            acc -= ai * y[k - i];
        }
        y[k] = acc;
    }
    y
}

/// First `length` samples of the unit-pulse response.
pub fn impulse_response(tf: &DiscreteTransferFunction, length: usize) -> Vec<f64> {
    let mut pulse = vec![0.0; length];
    if let Some(first) = pulse.first_mut() {
        *first = 1.0;
    }
    filter_signal(tf, &pulse)
}

/// Finite-horizon convolution matrix. Entry `(i, j)` is the kernel tap
/// `p_{i-j}`, which makes it Toeplitz; causal kernels give a lower-triangular
/// matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct LiftedMatrix {
    entries: DMatrix<f64>,
    kernel: Vec<f64>,
    origin: usize,
}

impl LiftedMatrix {
    /// Lift a two-sided FIR kernel; `kernel[origin]` is `p_0`, earlier entries
    /// are the anticausal taps `p_{-1}, p_{-2}, ...` in reverse order.
    pub fn from_two_sided(kernel: &[f64], origin: usize, size: usize) -> Result<Self> {
        if origin >= kernel.len() {
            return Err(Error::IndexOutOfRange {
                index: origin,
                max: kernel.len().saturating_sub(1),
            });
        }
        let tap = |lag: isize| -> f64 {
            let idx = origin as isize + lag;
            if idx < 0 || idx as usize >= kernel.len() {
                0.0
            } else {
                kernel[idx as usize]
            }
        };
        let entries = DMatrix::from_fn(size, size, |i, j| tap(i as isize - j as isize));
        Ok(Self {
            entries,
            kernel: kernel.to_vec(),
            origin,
        })
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    /// Kernel taps with `p_0` at index [`Self::origin`].
    pub fn kernel(&self) -> &[f64] {
        &self.kernel
    }

    pub fn origin(&self) -> usize {
        self.origin
    }

    pub fn size(&self) -> usize {
        self.entries.nrows()
    }

    pub fn apply(&self, u: &[f64]) -> Result<Vec<f64>> {
        if u.len() != self.size() {
            return Err(Error::DimensionMismatch {
                what: "lifted matrix operand",
                expected: self.size(),
                got: u.len(),
            });
        }
        let v = &self.entries * DVector::from_column_slice(u);
        Ok(v.as_slice().to_vec())
    }
}

/// `(E + 1) × (E + 1)` lifted representation of a causal transfer function.
pub fn lift(tf: &DiscreteTransferFunction, last_sample: usize) -> LiftedMatrix {
    let h = impulse_response(tf, last_sample + 1);
    LiftedMatrix::from_two_sided(&h, 0, last_sample + 1).expect("origin 0 is always in range")
}

/// Basis matrix with every column passed through a plant model.
#[derive(Debug, Clone, PartialEq)]
pub struct FilteredBasisMatrix {
    entries: DMatrix<f64>,
}

impl FilteredBasisMatrix {
    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn into_entries(self) -> DMatrix<f64> {
        self.entries
    }
}

/// Filter every column of `m` through `tf`.
pub fn filter_columns(tf: &DiscreteTransferFunction, m: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(m.nrows(), m.ncols());
    for (c, col) in m.column_iter().enumerate() {
        let y = filter_signal(tf, col.as_slice());
        out.set_column(c, &DVector::from_vec(y));
    }
    out
}

/// Filter each column of `basis` through `tf` (equivalently `G · N`).
pub fn filter_basis(tf: &DiscreteTransferFunction, basis: &BasisMatrix) -> Result<FilteredBasisMatrix> {
    if basis.samples() == 0 {
        return Err(Error::DimensionMismatch {
            what: "basis rows",
            expected: 1,
            got: 0,
        });
    }
    Ok(FilteredBasisMatrix {
        entries: filter_columns(tf, basis.entries()),
    })
}

/// How the racking angle turns into a y-axis error.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CouplingMode {
    /// `Δy = x · θ` using the simulated x position.
    #[default]
    Nonlinear,
    /// `Δy = x_d · θ` using the reference x position.
    Lpv,
}

/// Coupled H-frame dynamics: `G_xx`, `G_yy` and the racking path `G_xθ`
/// (rad per mm of x command).
#[derive(Debug, Clone, PartialEq)]
pub struct HFramePlant {
    pub gxx: DiscreteTransferFunction,
    pub gyy: DiscreteTransferFunction,
    pub gxtheta: DiscreteTransferFunction,
    pub coupling_mode: CouplingMode,
}

impl HFramePlant {
    pub fn new(
        gxx: DiscreteTransferFunction,
        gyy: DiscreteTransferFunction,
        gxtheta: DiscreteTransferFunction,
        coupling_mode: CouplingMode,
    ) -> Result<Self> {
        let ts = gxx.sample_period();
        if gyy.sample_period() != ts || gxtheta.sample_period() != ts {
            return Err(Error::InvalidTransferFunction("transfer functions disagree on sample period"));
        }
        Ok(Self {
            gxx,
            gyy,
            gxtheta,
            coupling_mode,
        })
    }

    pub fn sample_period(&self) -> f64 {
        self.gxx.sample_period()
    }

    pub fn with_mode(mut self, mode: CouplingMode) -> Self {
        self.coupling_mode = mode;
        self
    }

    /// Same plant with the racking path replaced by a zero gain.
    pub fn without_racking(&self) -> Self {
        let mut p = self.clone();
        p.gxtheta = DiscreteTransferFunction::gain(0.0, self.sample_period()).expect("valid sample period");
        p
    }

    /// `(name, max pole magnitude)` for each path.
    pub fn pole_report(&self) -> [(&'static str, f64); 3] {
        [
            ("gxx", self.gxx.max_pole_magnitude()),
            ("gyy", self.gyy.max_pole_magnitude()),
            ("gxtheta", self.gxtheta.max_pole_magnitude()),
        ]
    }

    pub fn is_stable(&self) -> bool {
        self.pole_report().iter().all(|(_, r)| *r < 1.0)
    }
}

/// Uniformly sampled two-axis positions in mm.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub sample_period: f64,
}

impl Trajectory {
    pub fn new(x: Vec<f64>, y: Vec<f64>, sample_period: f64) -> Result<Self> {
        if x.len() != y.len() {
            return Err(Error::DimensionMismatch {
                what: "trajectory y length",
                expected: x.len(),
                got: y.len(),
            });
        }
        if x.is_empty() {
            return Err(Error::InvalidParameter("trajectory must have at least one sample"));
        }
        if !(sample_period > 0.0) {
            return Err(Error::InvalidParameter("sample period must be positive"));
        }
        Ok(Self { x, y, sample_period })
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    /// Index of the last sample, `E`.
    pub fn last_index(&self) -> usize {
        self.x.len() - 1
    }
}

/// Simulated plant outputs.
#[derive(Debug, Clone, PartialEq)]
pub struct PlantOutput {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub theta: Vec<f64>,
}

impl PlantOutput {
    pub fn trajectory(&self, sample_period: f64) -> Result<Trajectory> {
        Trajectory::new(self.x.clone(), self.y.clone(), sample_period)
    }
}

/// Drive the coupled plant with commands `xdm`, `ydm`. `xd` is the x
/// reference, used for the racking lever arm in [`CouplingMode::Lpv`].
pub fn simulate_hframe(plant: &HFramePlant, xdm: &[f64], ydm: &[f64], xd: &[f64]) -> Result<PlantOutput> {
    if ydm.len() != xdm.len() || xd.len() != xdm.len() {
        return Err(Error::DimensionMismatch {
            what: "simulation sequence length",
            expected: xdm.len(),
            got: if ydm.len() != xdm.len() { ydm.len() } else { xd.len() },
        });
    }
    let x = filter_signal(&plant.gxx, xdm);
    let theta = filter_signal(&plant.gxtheta, xdm);
    let mut y = filter_signal(&plant.gyy, ydm);
    let lever = match plant.coupling_mode {
        CouplingMode::Nonlinear => &x[..],
        CouplingMode::Lpv => xd,
    };
    for ((yk, &arm), &th) in y.iter_mut().zip(lever).zip(&theta) {
        *yk += arm * th;
    }
    Ok(PlantOutput { x, y, theta })
}

/// Racking angular acceleration from the y accelerations at both ends of
/// the gantry, `(ÿ1 - ÿ2) / L_G`.
pub fn racking_accel(y1dd: f64, y2dd: f64, gauge_length: f64) -> Result<f64> {
    if !(gauge_length > 0.0) {
        return Err(Error::InvalidParameter("gauge length must be positive"));
    }
    Ok((y1dd - y2dd) / gauge_length)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn validation() {
        assert!(DiscreteTransferFunction::new(vec![1.0], vec![2.0, 1.0], 0.001).is_err());
        assert!(DiscreteTransferFunction::new(vec![1.0, 0.0, 0.0], vec![1.0, 1.0], 0.001).is_err());
        assert!(DiscreteTransferFunction::new(vec![1.0], vec![1.0], 0.0).is_err());
        assert!(DiscreteTransferFunction::new(vec![], vec![1.0], 0.001).is_err());
        let tf = DiscreteTransferFunction::new(vec![1.0], vec![1.0, -0.5], 0.001).unwrap();
        assert_eq!(tf.order(), 1);
        assert_eq!(tf.relative_degree(), 1);
        assert_eq!(tf.feedthrough(), 0.0);
    }

    #[test]
    fn impulse_examples() {
        let ts = 0.001;
        let gain = DiscreteTransferFunction::gain(1.0, ts).unwrap();
        assert_eq!(impulse_response(&gain, 4), vec![1.0, 0.0, 0.0, 0.0]);
        let delay = DiscreteTransferFunction::delay(1, ts).unwrap();
        assert_eq!(impulse_response(&delay, 4), vec![0.0, 1.0, 0.0, 0.0]);
        let pole = DiscreteTransferFunction::new(vec![1.0], vec![1.0, -0.5], ts).unwrap();
        assert_eq!(impulse_response(&pole, 5), vec![0.0, 1.0, 0.5, 0.25, 0.125]);
    }

    #[test]
    fn filter_examples() {
        let ts = 0.001;
        let g2 = DiscreteTransferFunction::gain(2.0, ts).unwrap();
        assert_eq!(filter_signal(&g2, &[1.0, 1.0, 1.0]), vec![2.0, 2.0, 2.0]);
        let delay = DiscreteTransferFunction::delay(1, ts).unwrap();
        assert_eq!(filter_signal(&delay, &[3.0, 5.0, 7.0]), vec![0.0, 3.0, 5.0]);
    }

    #[test]
    fn appendix_style_two_sided_lift() {
        // p = {p-2, p-1, p0, p1, p2}
        let p = [-2.0, -1.0, 10.0, 1.0, 2.0];
        let l = LiftedMatrix::from_two_sided(&p, 2, 3).unwrap();
        let want = DMatrix::from_row_slice(3, 3, &[10.0, -1.0, -2.0, 1.0, 10.0, -1.0, 2.0, 1.0, 10.0]);
        assert_eq!(l.entries(), &want);
    }

    #[test]
    fn lift_of_unity_gain_is_identity() {
        let g = DiscreteTransferFunction::gain(1.0, 0.01).unwrap();
        assert_eq!(lift(&g, 4).entries(), &DMatrix::identity(5, 5));
    }

    #[test]
    fn pole_magnitudes_of_simple_filters() {
        let tf = DiscreteTransferFunction::new(vec![1.0], vec![1.0, -0.5], 0.001).unwrap();
        assert!((tf.max_pole_magnitude() - 0.5).abs() < 1e-12);
        // z^2 + 0.81 has poles at ±0.9j.
        let tf = DiscreteTransferFunction::new(vec![1.0], vec![1.0, 0.0, 0.81], 0.001).unwrap();
        let mags = tf.pole_magnitudes();
        assert!(close(&mags, &[0.9, 0.9], 1e-12));
        assert!(tf.is_stable());
        let g = DiscreteTransferFunction::gain(3.0, 0.001).unwrap();
        assert!(g.pole_magnitudes().is_empty());
        assert!(g.is_stable());
    }

    #[test]
    fn pure_gain_plant_algebra() {
        let ts = 0.001;
        let one = DiscreteTransferFunction::gain(1.0, ts).unwrap();
        let rack = DiscreteTransferFunction::gain(1e-3, ts).unwrap();
        let plant = HFramePlant::new(one.clone(), one.clone(), rack, CouplingMode::Lpv).unwrap();
        let xdm = [100.0; 4];
        let out = simulate_hframe(&plant, &xdm, &[0.0; 4], &[100.0; 4]).unwrap();
        assert!(close(&out.theta, &[0.1; 4], 1e-15));
        assert!(close(&out.y, &[10.0; 4], 1e-12));
        let nl = simulate_hframe(&plant.clone().with_mode(CouplingMode::Nonlinear), &xdm, &[0.0; 4], &[0.0; 4]).unwrap();
        assert!(close(&nl.y, &[10.0; 4], 1e-12));
    }

    #[test]
    fn zero_racking_decouples() {
        let ts = 0.001;
        let gxx = DiscreteTransferFunction::new(vec![0.3], vec![1.0, -0.7], ts).unwrap();
        let gyy = DiscreteTransferFunction::new(vec![0.5, 0.1], vec![1.0, -0.4], ts).unwrap();
        let zero = DiscreteTransferFunction::gain(0.0, ts).unwrap();
        let plant = HFramePlant::new(gxx, gyy.clone(), zero, CouplingMode::Nonlinear).unwrap();
        let xdm = [1.0, 2.0, 3.0, 4.0];
        let ydm = [0.5, -1.0, 2.0, 0.0];
        let out = simulate_hframe(&plant, &xdm, &ydm, &xdm).unwrap();
        assert_eq!(out.y, filter_signal(&gyy, &ydm));
    }

    #[test]
    fn simulate_rejects_length_mismatch() {
        let one = DiscreteTransferFunction::gain(1.0, 0.001).unwrap();
        let plant = HFramePlant::new(one.clone(), one.clone(), one, CouplingMode::Lpv).unwrap();
        assert!(simulate_hframe(&plant, &[1.0, 2.0], &[1.0], &[1.0, 2.0]).is_err());
        assert!(simulate_hframe(&plant, &[1.0, 2.0], &[1.0, 2.0], &[1.0]).is_err());
    }

    #[test]
    fn plant_requires_shared_sample_period() {
        let a = DiscreteTransferFunction::gain(1.0, 0.001).unwrap();
        let b = DiscreteTransferFunction::gain(1.0, 0.002).unwrap();
        assert!(HFramePlant::new(a.clone(), b, a.clone(), CouplingMode::Lpv).is_err());
    }

    #[test]
    fn racking_accel_examples() {
        assert_eq!(racking_accel(2.0, 1.0, 0.5).unwrap(), 2.0);
        assert_eq!(racking_accel(5.0, 5.0, 3.0).unwrap(), 0.0);
        assert_eq!(racking_accel(-1.0, 1.0, 2.0).unwrap(), -1.0);
        assert!(racking_accel(1.0, 0.0, 0.0).is_err());
        assert!(racking_accel(1.0, 0.0, -1.0).is_err());
    }
}
