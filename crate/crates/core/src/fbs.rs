//! Full-horizon filtered B-spline solvers.
//!
//! The command for each axis is `N p`; the plant-filtered basis `Ñ = G N`
//! predicts the output, and control points minimize the squared tracking
//! error. Racking enters the y axis through `Δy = D_xd Ñ_xθ p_x`, where
//! `D_xd = diag(x_d)`.

use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{pseudo_solve, solve_lower_triangular, DEFAULT_RCOND};
use crate::splines::BasisMatrix;
use crate::sysmodel::{filter_columns, lift, DiscreteTransferFunction, HFramePlant};

/// Monotonic time source in seconds. Solvers read it around pseudo-solves.
pub trait Clock {
    fn now_seconds(&self) -> f64;
}

/// Clock that always reads zero; timings come out as `0.0`.
#[derive(Debug, Clone, Copy, Default)]
pub struct NoClock;

impl Clock for NoClock {
    fn now_seconds(&self) -> f64 {
        0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions {
    /// Relative singular-value cutoff.
    pub rcond: f64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self { rcond: DEFAULT_RCOND }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Standard,
    CoupledLpv,
    DecoupledLpv,
    ExactInverse,
}

impl Method {
    pub fn tag(self) -> &'static str {
        match self {
            Method::Standard => "standard",
            Method::CoupledLpv => "coupled_lpv",
            Method::DecoupledLpv => "decoupled_lpv",
            Method::ExactInverse => "exact_inverse",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ControlPoints {
    pub px: Vec<f64>,
    pub py: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompensationResult {
    pub control_points: ControlPoints,
    pub xdm: Vec<f64>,
    pub ydm: Vec<f64>,
    /// Model-predicted RMS tracking error per axis `[x, y]`, in mm.
    pub residual_rms: [f64; 2],
    /// Wall time spent inside pseudo-solves.
    pub solve_seconds: f64,
    pub method: Method,
}

/// Single-axis solution.
#[derive(Debug, Clone, PartialEq)]
pub struct AxisSolution {
    pub control_points: Vec<f64>,
    pub command: Vec<f64>,
    pub predicted: Vec<f64>,
    pub residual_rms: f64,
    pub solve_seconds: f64,
}

pub(crate) fn rms(v: impl IntoIterator<Item = f64>) -> f64 {
    let mut n = 0usize;
    let mut acc = 0.0;
    for x in v {
        acc += x * x;
        n += 1;
    }
    if n == 0 {
        0.0
    } else {
        libm::sqrt(acc / n as f64)
    }
}

fn check_len(what: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { what, expected, got })
    }
}

fn timed<T>(clock: &dyn Clock, f: impl FnOnce() -> Result<T>) -> Result<(T, f64)> {
    let t0 = clock.now_seconds();
    let out = f()?;
    Ok((out, clock.now_seconds() - t0))
}

fn to_vec(v: &DVector<f64>) -> Vec<f64> {
    v.as_slice().to_vec()
}

/// FBS for one decoupled LTI axis.
pub fn solve_standard(
    tf: &DiscreteTransferFunction,
    reference: &[f64],
    basis: &BasisMatrix,
    opts: &SolveOptions,
    clock: &dyn Clock,
) -> Result<AxisSolution> {
    check_len("reference length vs basis rows", basis.samples(), reference.len())?;
    let filtered = filter_columns(tf, basis.entries());
    solve_prefiltered(&filtered, basis.entries(), reference, opts, clock)
}

/// FBS for one axis given an already filtered basis.
pub fn solve_prefiltered(
    filtered: &DMatrix<f64>,
    basis: &DMatrix<f64>,
    reference: &[f64],
    opts: &SolveOptions,
    clock: &dyn Clock,
) -> Result<AxisSolution> {
    check_len("reference length vs basis rows", filtered.nrows(), reference.len())?;
    check_len("basis vs filtered basis columns", filtered.ncols(), basis.ncols())?;
    let target = DVector::from_column_slice(reference);
    let (p, secs) = timed(clock, || pseudo_solve(filtered, &target, opts.rcond))?;
    let predicted = filtered * &p;
    let residual_rms = rms(target.iter().zip(predicted.iter()).map(|(a, b)| a - b));
    Ok(AxisSolution {
        command: to_vec(&(basis * &p)),
        control_points: to_vec(&p),
        predicted: to_vec(&predicted),
        residual_rms,
        solve_seconds: secs,
    })
}

/// The three plant-filtered bases used by the racking solvers.
#[derive(Debug, Clone, PartialEq)]
pub struct FilteredBases {
    /// `Ñ_xx = G_xx N_x`
    pub xx: DMatrix<f64>,
    /// `Ñ_xθ = G_xθ N_x`
    pub xtheta: DMatrix<f64>,
    /// `Ñ_yy = G_yy N_y`
    pub yy: DMatrix<f64>,
}

impl FilteredBases {
    pub fn new(plant: &HFramePlant, basis_x: &BasisMatrix, basis_y: &BasisMatrix) -> Result<Self> {
        check_len("basis_y rows vs basis_x rows", basis_x.samples(), basis_y.samples())?;
        Ok(Self {
            xx: filter_columns(&plant.gxx, basis_x.entries()),
            xtheta: filter_columns(&plant.gxtheta, basis_x.entries()),
            yy: filter_columns(&plant.gyy, basis_y.entries()),
        })
    }

    pub fn samples(&self) -> usize {
        self.xx.nrows()
    }
}

/// `D_xd · M`: scale row `k` of `m` by `xd[k]`.
pub fn diag_scale(xd: &[f64], m: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = m.clone();
    for (k, mut row) in out.row_iter_mut().enumerate() {
        row *= xd[k];
    }
    out
}

/// The stacked coupled LPV system `[[Ñ_xx, 0], [D_xd Ñ_xθ, Ñ_yy]]`.
pub fn coupled_system(bases: &FilteredBases, xd: &[f64]) -> Result<DMatrix<f64>> {
    let rows = bases.samples();
    check_len("xd length", rows, xd.len())?;
    let (nx, ny) = (bases.xx.ncols(), bases.yy.ncols());
    let mut a = DMatrix::zeros(2 * rows, nx + ny);
    a.view_mut((0, 0), (rows, nx)).copy_from(&bases.xx);
    a.view_mut((rows, 0), (rows, nx)).copy_from(&diag_scale(xd, &bases.xtheta));
    a.view_mut((rows, nx), (rows, ny)).copy_from(&bases.yy);
    Ok(a)
}

fn stacked(xd: &[f64], yd: &[f64]) -> DVector<f64> {
    DVector::from_iterator(xd.len() + yd.len(), xd.iter().chain(yd).copied())
}

fn check_refs(bases: &FilteredBases, xd: &[f64], yd: &[f64]) -> Result<()> {
    check_len("xd length vs basis rows", bases.samples(), xd.len())?;
    check_len("yd length vs basis rows", bases.samples(), yd.len())
}

/// Coupled LPV FBS: one pseudo-solve of the stacked two-axis system.
pub fn solve_coupled_lpv(
    plant: &HFramePlant,
    xd: &[f64],
    yd: &[f64],
    basis_x: &BasisMatrix,
    basis_y: &BasisMatrix,
    opts: &SolveOptions,
    clock: &dyn Clock,
) -> Result<CompensationResult> {
    let bases = FilteredBases::new(plant, basis_x, basis_y)?;
    solve_coupled_lpv_prefiltered(&bases, xd, yd, basis_x, basis_y, opts, clock)
}

pub fn solve_coupled_lpv_prefiltered(
    bases: &FilteredBases,
    xd: &[f64],
    yd: &[f64],
    basis_x: &BasisMatrix,
    basis_y: &BasisMatrix,
    opts: &SolveOptions,
    clock: &dyn Clock,
) -> Result<CompensationResult> {
    check_refs(bases, xd, yd)?;
    let a = coupled_system(bases, xd)?;
    let target = stacked(xd, yd);
    let (p, secs) = timed(clock, || pseudo_solve(&a, &target, opts.rcond))?;
    let nx = bases.xx.ncols();
    let px = p.rows(0, nx).into_owned();
    let py = p.rows(nx, bases.yy.ncols()).into_owned();
    let predicted = &a * &p;
    let rows = bases.samples();
    let res_x = rms((0..rows).map(|k| target[k] - predicted[k]));
    let res_y = rms((rows..2 * rows).map(|k| target[k] - predicted[k]));
    Ok(CompensationResult {
        xdm: to_vec(&(basis_x.entries() * &px)),
        ydm: to_vec(&(basis_y.entries() * &py)),
        control_points: ControlPoints {
            px: to_vec(&px),
            py: to_vec(&py),
        },
        residual_rms: [res_x, res_y],
        solve_seconds: secs,
        method: Method::CoupledLpv,
    })
}

/// Decoupled LPV FBS: x axis first, then y with the predicted racking of the
/// optimized x command treated as a known disturbance.
pub fn solve_decoupled_lpv(
    plant: &HFramePlant,
    xd: &[f64],
    yd: &[f64],
    basis_x: &BasisMatrix,
    basis_y: &BasisMatrix,
    opts: &SolveOptions,
    clock: &dyn Clock,
) -> Result<CompensationResult> {
    let bases = FilteredBases::new(plant, basis_x, basis_y)?;
    solve_decoupled_lpv_prefiltered(&bases, xd, yd, basis_x, basis_y, opts, clock)
}

/// Predicted racking disturbance `D_xd Ñ_xθ p_x`.
pub fn predicted_racking(bases: &FilteredBases, xd: &[f64], px: &[f64]) -> Vec<f64> {
    let theta = &bases.xtheta * DVector::from_column_slice(px);
    theta.iter().zip(xd).map(|(t, x)| t * x).collect()
}

pub fn solve_decoupled_lpv_prefiltered(
    bases: &FilteredBases,
    xd: &[f64],
    yd: &[f64],
    basis_x: &BasisMatrix,
    basis_y: &BasisMatrix,
    opts: &SolveOptions,
    clock: &dyn Clock,
) -> Result<CompensationResult> {
    check_refs(bases, xd, yd)?;
    let x = solve_prefiltered(&bases.xx, basis_x.entries(), xd, opts, clock)?;
    let racking = predicted_racking(bases, xd, &x.control_points);
    let y_target: Vec<f64> = yd.iter().zip(&racking).map(|(y, r)| y - r).collect();
    let y = solve_prefiltered(&bases.yy, basis_y.entries(), &y_target, opts, clock)?;
    Ok(CompensationResult {
        xdm: x.command,
        ydm: y.command,
        control_points: ControlPoints {
            px: x.control_points,
            py: y.control_points,
        },
        residual_rms: [x.residual_rms, y.residual_rms],
        solve_seconds: x.solve_seconds + y.solve_seconds,
        method: Method::DecoupledLpv,
    })
}

/// Standard FBS on both axes, ignoring racking.
pub fn solve_standard_pair(
    plant: &HFramePlant,
    xd: &[f64],
    yd: &[f64],
    basis_x: &BasisMatrix,
    basis_y: &BasisMatrix,
    opts: &SolveOptions,
    clock: &dyn Clock,
) -> Result<CompensationResult> {
    let x = solve_standard(&plant.gxx, xd, basis_x, opts, clock)?;
    let y = solve_standard(&plant.gyy, yd, basis_y, opts, clock)?;
    Ok(CompensationResult {
        xdm: x.command,
        ydm: y.command,
        control_points: ControlPoints {
            px: x.control_points,
            py: y.control_points,
        },
        residual_rms: [x.residual_rms, y.residual_rms],
        solve_seconds: x.solve_seconds + y.solve_seconds,
        method: Method::Standard,
    })
}

/// Exact inverse of the lifted coupled LPV plant:
/// `x_dm = G_xx⁻¹ x_d`, `y_dm = G_yy⁻¹ (y_d − D_xd G_xθ x_dm)`.
///
/// Needs biproper `G_xx` and `G_yy`; a zero diagonal is reported as
/// [`Error::SingularLiftedMatrix`].
pub fn exact_inverse_reference(plant: &HFramePlant, xd: &[f64], yd: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    check_len("yd length vs xd length", xd.len(), yd.len())?;
    if xd.is_empty() {
        return Err(Error::InvalidParameter("references must be nonempty"));
    }
    let last = xd.len() - 1;
    let gxx = lift(&plant.gxx, last);
    let gyy = lift(&plant.gyy, last);
    let gxt = lift(&plant.gxtheta, last);
    let xdm = solve_lower_triangular(gxx.entries(), &DVector::from_column_slice(xd))?;
    let theta = gxt.entries() * &xdm;
    let y_target = DVector::from_iterator(xd.len(), (0..xd.len()).map(|k| yd[k] - xd[k] * theta[k]));
    let ydm = solve_lower_triangular(gyy.entries(), &y_target)?;
    Ok((to_vec(&xdm), to_vec(&ydm)))
}

/// `‖Aᵀ(A p − b)‖ / (‖A‖_F ‖b‖)`: zero at an exact least-squares optimum.
pub fn normal_equation_residual(a: &DMatrix<f64>, p: &[f64], b: &[f64]) -> f64 {
    let p = DVector::from_column_slice(p);
    let b = DVector::from_column_slice(b);
    let r = a * p - &b;
    let scale = a.norm() * b.norm();
    if scale == 0.0 {
        return a.tr_mul(&r).norm();
    }
    a.tr_mul(&r).norm() / scale
}
