//! End-to-end steps shared by the CLI and the acceptance run.

use std::str::FromStr;

use hfbs_core::fbs::{
    solve_coupled_lpv, solve_decoupled_lpv, solve_standard_pair, Clock, CompensationResult, SolveOptions,
};
use hfbs_core::lpfbs::{run_lpfbs, LpfbsMethod, LpfbsOutput, WindowConfig};
use hfbs_core::metrics::{root_mean_square, ErrorReport};
use hfbs_core::splines::{build_basis_matrix, BasisMatrix};
use hfbs_core::sysmodel::{simulate_hframe, HFramePlant, PlantOutput, Trajectory};
use hfbs_core::trajgen::PathSpec;
use serde::Serialize;

use crate::error::{AppError, AppResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CompensationMethod {
    None,
    Fbs,
    FbsRackingCoupled,
    FbsRackingDecoupled,
    Lpfbs,
    /// Decoupled limited-preview solve with racking.
    LpfbsRacking,
    LpfbsRackingCoupled,
}

impl CompensationMethod {
    pub const ALL: [CompensationMethod; 7] = [
        Self::None,
        Self::Fbs,
        Self::FbsRackingCoupled,
        Self::FbsRackingDecoupled,
        Self::Lpfbs,
        Self::LpfbsRacking,
        Self::LpfbsRackingCoupled,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::None => "none",
            Self::Fbs => "fbs",
            Self::FbsRackingCoupled => "fbs_racking_coupled",
            Self::FbsRackingDecoupled => "fbs_racking_decoupled",
            Self::Lpfbs => "lpfbs",
            Self::LpfbsRacking => "lpfbs_racking",
            Self::LpfbsRackingCoupled => "lpfbs_racking_coupled",
        }
    }

    pub fn is_windowed(self) -> bool {
        matches!(self, Self::Lpfbs | Self::LpfbsRacking | Self::LpfbsRackingCoupled)
    }
}

impl FromStr for CompensationMethod {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Self::ALL.into_iter().find(|m| m.name() == s).ok_or_else(|| {
            let names: Vec<_> = Self::ALL.iter().map(|m| m.name()).collect();
            format!("unknown method `{s}` (expected one of {})", names.join(", "))
        })
    }
}

/// Basis size for the full-horizon solvers: an explicit count of basis
/// functions or a fraction of the last sample index.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BasisSize {
    Count(usize),
    Fraction(f64),
}

impl BasisSize {
    pub fn resolve(self, last_sample: usize) -> usize {
        match self {
            BasisSize::Count(n) => n,
            BasisSize::Fraction(f) => (f * last_sample as f64).round() as usize,
        }
    }
}

/// `count` basis functions of degree `m` over samples `0..=last_sample`.
pub fn basis_with_count(last_sample: usize, count: usize, m: usize) -> AppResult<BasisMatrix> {
    if count < m + 1 {
        return Err(AppError::Usage(format!(
            "need at least m + 1 = {} basis functions, got {count}",
            m + 1
        )));
    }
    if count > last_sample + 1 {
        return Err(AppError::Usage(format!(
            "at most E + 1 = {} basis functions fit this trajectory, got {count}",
            last_sample + 1
        )));
    }
    Ok(build_basis_matrix(last_sample, count - 1, m)?)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CompensateParams {
    pub method: CompensationMethod,
    pub basis: BasisSize,
    pub degree: usize,
    pub window: WindowConfig,
    pub rcond: f64,
}

impl Default for CompensateParams {
    fn default() -> Self {
        Self {
            method: CompensationMethod::FbsRackingDecoupled,
            basis: BasisSize::Fraction(0.1),
            degree: 5,
            window: WindowConfig {
                l_c: 440,
                ..WindowConfig::printer_default()
            },
            rcond: hfbs_core::linalg::DEFAULT_RCOND,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PoleEntry {
    pub name: String,
    pub max_magnitude: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WindowDiagnostics {
    pub n_up: usize,
    pub n_c: usize,
    pub l_c: usize,
    pub spacing: usize,
    pub batches: usize,
    pub fir_len_x: usize,
    pub fir_len_y: usize,
    pub fir_len_xtheta: usize,
    pub fir_discarded_x: f64,
    pub fir_discarded_y: f64,
    pub fir_discarded_xtheta: f64,
    pub max_batch_seconds: f64,
}

/// Written next to the commands as TOML.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Diagnostics {
    pub method: String,
    pub samples: usize,
    pub degree: usize,
    /// Basis functions per axis (full-horizon methods only).
    pub basis_count: Option<usize>,
    /// Model-predicted RMS tracking error `[x, y]` in mm.
    pub residual_rms_mm: [f64; 2],
    pub solve_seconds: f64,
    pub poles: Vec<PoleEntry>,
    pub window: Option<WindowDiagnostics>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Compensation {
    pub xdm: Vec<f64>,
    pub ydm: Vec<f64>,
    pub diagnostics: Diagnostics,
}

fn predicted_residual(plant: &HFramePlant, reference: &Trajectory, xdm: &[f64], ydm: &[f64]) -> AppResult<[f64; 2]> {
    let out = simulate_hframe(plant, xdm, ydm, &reference.x)?;
    let ex: Vec<f64> = reference.x.iter().zip(&out.x).map(|(r, o)| r - o).collect();
    let ey: Vec<f64> = reference.y.iter().zip(&out.y).map(|(r, o)| r - o).collect();
    Ok([root_mean_square(&ex), root_mean_square(&ey)])
}

fn window_diagnostics(cfg: &WindowConfig, out: &LpfbsOutput) -> WindowDiagnostics {
    WindowDiagnostics {
        n_up: cfg.n_up,
        n_c: cfg.n_c,
        l_c: cfg.l_c,
        spacing: cfg.spacing,
        batches: out.batches(),
        fir_len_x: out.fir[0].0,
        fir_len_y: out.fir[1].0,
        fir_len_xtheta: out.fir[2].0,
        fir_discarded_x: out.fir[0].1,
        fir_discarded_y: out.fir[1].1,
        fir_discarded_xtheta: out.fir[2].1,
        max_batch_seconds: out.reports.iter().map(|r| r.solve_seconds).fold(0.0, f64::max),
    }
}

/// Run one compensation method on a reference trajectory.
pub fn compensate(
    plant: &HFramePlant,
    reference: &Trajectory,
    params: &CompensateParams,
    clock: &dyn Clock,
) -> AppResult<Compensation> {
    let opts = SolveOptions { rcond: params.rcond };
    let (xd, yd) = (&reference.x, &reference.y);
    let e = reference.last_index();
    let m = params.degree;
    let mut basis_count = None;
    let mut window = None;
    let (xdm, ydm, residual, seconds) = match params.method {
        CompensationMethod::None => {
            let r = predicted_residual(plant, reference, xd, yd)?;
            (xd.clone(), yd.clone(), r, 0.0)
        }
        CompensationMethod::Fbs | CompensationMethod::FbsRackingCoupled | CompensationMethod::FbsRackingDecoupled => {
            let count = params.basis.resolve(e);
            let b = basis_with_count(e, count, m)?;
            basis_count = Some(count);
            let r: CompensationResult = match params.method {
                CompensationMethod::Fbs => solve_standard_pair(plant, xd, yd, &b, &b, &opts, clock)?,
                CompensationMethod::FbsRackingCoupled => solve_coupled_lpv(plant, xd, yd, &b, &b, &opts, clock)?,
                _ => solve_decoupled_lpv(plant, xd, yd, &b, &b, &opts, clock)?,
            };
            (r.xdm, r.ydm, r.residual_rms, r.solve_seconds)
        }
        CompensationMethod::Lpfbs | CompensationMethod::LpfbsRacking | CompensationMethod::LpfbsRackingCoupled => {
            let method = match params.method {
                CompensationMethod::Lpfbs => LpfbsMethod::Standard,
                CompensationMethod::LpfbsRacking => LpfbsMethod::Decoupled,
                _ => LpfbsMethod::Coupled,
            };
            let cfg = WindowConfig {
                degree: m,
                ..params.window
            };
            let out = run_lpfbs(plant, method, xd, yd, cfg, opts, clock)?;
            let r = predicted_residual(plant, reference, &out.xdm, &out.ydm)?;
            let seconds = out.reports.iter().map(|b| b.solve_seconds).sum();
            window = Some(window_diagnostics(&cfg, &out));
            (out.xdm, out.ydm, r, seconds)
        }
    };
    Ok(Compensation {
        xdm,
        ydm,
        diagnostics: Diagnostics {
            method: params.method.name().to_string(),
            samples: reference.len(),
            degree: m,
            basis_count,
            residual_rms_mm: residual,
            solve_seconds: seconds,
            poles: plant
                .pole_report()
                .iter()
                .map(|(n, r)| PoleEntry {
                    name: n.to_string(),
                    max_magnitude: *r,
                })
                .collect(),
            window,
        },
    })
}

/// Open polyline through the reference samples with repeats removed, used
/// as the desired path when no explicit geometry is given.
pub fn path_from_reference(reference: &Trajectory) -> AppResult<PathSpec> {
    let mut pts: Vec<(f64, f64)> = Vec::with_capacity(reference.len());
    for (&x, &y) in reference.x.iter().zip(&reference.y) {
        if pts.last() != Some(&(x, y)) {
            pts.push((x, y));
        }
    }
    if pts.len() < 2 {
        return Err(AppError::Usage("reference never moves; pass --rect or --path for the geometry".into()));
    }
    Ok(PathSpec::new(pts, false)?)
}

pub fn simulate(plant: &HFramePlant, xdm: &[f64], ydm: &[f64], xd: &[f64]) -> AppResult<PlantOutput> {
    Ok(simulate_hframe(plant, xdm, ydm, xd)?)
}

/// Simulate commands on the plant and score the output against `path`.
pub fn score(
    plant: &HFramePlant,
    path: &PathSpec,
    reference: &Trajectory,
    xdm: &[f64],
    ydm: &[f64],
) -> AppResult<ErrorReport> {
    let out = simulate(plant, xdm, ydm, &reference.x)?;
    let traj = out.trajectory(reference.sample_period)?;
    Ok(ErrorReport::new(path, reference, &traj)?)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BenchmarkRow {
    pub n: usize,
    pub rms_coupled_mm: f64,
    pub rms_decoupled_mm: f64,
    pub time_coupled_s: f64,
    pub time_decoupled_s: f64,
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let k = v.len();
    if k % 2 == 1 {
        v[k / 2]
    } else {
        0.5 * (v[k / 2 - 1] + v[k / 2])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub fractions: Vec<f64>,
    pub degree: usize,
    pub repeats: usize,
    pub opts: SolveOptions,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            fractions: vec![0.01, 0.05, 0.1, 0.15, 0.2, 0.25],
            degree: 5,
            repeats: 3,
            opts: SolveOptions::default(),
        }
    }
}

/// Coupled vs decoupled full-horizon solves at each basis fraction. Contour
/// RMS comes from simulating `plant`; times are the median solve time over
/// `repeats` runs. Fractions giving fewer than `m + 1` functions are skipped.
pub fn benchmark_sweep(
    plant: &HFramePlant,
    path: &PathSpec,
    reference: &Trajectory,
    sweep: &SweepConfig,
    clock: &dyn Clock,
) -> AppResult<Vec<BenchmarkRow>> {
    let SweepConfig {
        fractions,
        degree: m,
        repeats,
        opts,
    } = sweep;
    let (m, repeats) = (*m, *repeats);
    if repeats == 0 {
        return Err(AppError::Usage("--repeats must be at least 1".into()));
    }
    let e = reference.last_index();
    let (xd, yd) = (&reference.x, &reference.y);
    let mut rows = Vec::new();
    for &f in fractions {
        let n = BasisSize::Fraction(f).resolve(e);
        if n < m + 1 {
            eprintln!("skipping fraction {f}: {n} basis functions is below m + 1 = {}", m + 1);
            continue;
        }
        let b = basis_with_count(e, n, m)?;
        let mut tc = Vec::with_capacity(repeats);
        let mut td = Vec::with_capacity(repeats);
        let mut last = None;
        for _ in 0..repeats {
            let c = solve_coupled_lpv(plant, xd, yd, &b, &b, opts, clock)?;
            let d = solve_decoupled_lpv(plant, xd, yd, &b, &b, opts, clock)?;
            tc.push(c.solve_seconds);
            td.push(d.solve_seconds);
            last = Some((c, d));
        }
        let (c, d) = last.expect("repeats >= 1");
        rows.push(BenchmarkRow {
            n,
            rms_coupled_mm: score(plant, path, reference, &c.xdm, &c.ydm)?.rms_contour,
            rms_decoupled_mm: score(plant, path, reference, &d.xdm, &d.ydm)?.rms_contour,
            time_coupled_s: median(tc),
            time_decoupled_s: median(td),
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn method_names_round_trip() {
        for m in CompensationMethod::ALL {
            assert_eq!(m.name().parse::<CompensationMethod>().unwrap(), m);
        }
        assert!("fbs_racking".parse::<CompensationMethod>().is_err());
    }

    #[test]
    fn fraction_rounds_to_nearest() {
        assert_eq!(BasisSize::Fraction(0.1).resolve(1944), 194);
        assert_eq!(BasisSize::Fraction(0.25).resolve(1944), 486);
        assert_eq!(BasisSize::Count(7).resolve(1944), 7);
    }

    #[test]
    fn median_of_even_and_odd() {
        assert_eq!(median(vec![3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(vec![4.0, 1.0, 2.0, 3.0]), 2.5);
    }

    #[test]
    fn reference_path_drops_repeats() {
        let t = Trajectory::new(vec![0.0, 0.0, 1.0, 1.0, 2.0], vec![0.0, 0.0, 0.0, 0.0, 1.0], 0.001).unwrap();
        let p = path_from_reference(&t).unwrap();
        assert_eq!(p.waypoints(), &[(0.0, 0.0), (1.0, 0.0), (2.0, 1.0)]);
        let still = Trajectory::new(vec![1.0; 3], vec![2.0; 3], 0.001).unwrap();
        assert!(path_from_reference(&still).is_err());
    }
}
