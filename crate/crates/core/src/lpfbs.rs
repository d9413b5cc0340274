//! Limited-preview filtered B-splines: the command is optimized batch by
//! batch over a sliding window instead of the whole trajectory at once.
//!
//! Knots are open-ended and uniform with spacing `L` samples, so every
//! B-spline past the clamped start is a translate of one cardinal spline.
//! Window geometry for batch `b`:
//!
//! * the window covers reference samples `[S_b, S_b + L_C)` with
//!   `S_b = b · n_up · L` (the sample cursor);
//! * the current coefficient slots are the `n_C` splines whose support starts
//!   at or after `S_b` (batch 0 additionally owns the `m` clamped start
//!   splines, which all begin at `t = 0`);
//! * after the solve, the oldest `n_up` slots (`n_up + m` in batch 0) are
//!   committed and the command samples `[S_b, S_{b+1})` become final.
//!
//! Committed coefficients influence the window through their overlapping
//! support and through the (truncated) plant impulse response; that carried
//! term is subtracted from the window target before solving. Current slots
//! never touch earlier samples and future slots never touch the window, which
//! is what makes the past/current/future split block triangular.
//!
//! With `L_C = n_up · L` only the committed slots intersect the window; the
//! remaining slots have zero columns and receive zero weight from the
//! minimum-norm solve.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::fbs::{Clock, SolveOptions};
use crate::linalg::{pseudo_solve, PseudoInverse};
use crate::splines::{build_open_knots, sample_basis};
use crate::sysmodel::{impulse_response, DiscreteTransferFunction, HFramePlant};

/// Default bound on the discarded fraction of the impulse response.
pub const DEFAULT_TAIL_FRACTION: f64 = 1e-4;

/// Longest impulse response the automatic truncation will consider.
const MAX_IMPULSE_HORIZON: usize = 4_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WindowConfig {
    /// Coefficients committed per batch.
    pub n_up: usize,
    /// Coefficient slots in the current window.
    pub n_c: usize,
    /// Reference samples in the current window.
    pub l_c: usize,
    /// Knot spacing in samples.
    pub spacing: usize,
    /// B-spline degree.
    pub degree: usize,
    /// Truncated impulse-response length; `None` picks the shortest length
    /// whose discarded tail is below [`DEFAULT_TAIL_FRACTION`], per filter.
    pub fir_len: Option<usize>,
}

impl WindowConfig {
    /// `n_up = 11, n_C = 22, L_C = 220, m = 5, L = 20`, automatic FIR length.
    pub fn printer_default() -> Self {
        Self {
            n_up: 11,
            n_c: 22,
            l_c: 220,
            spacing: 20,
            degree: 5,
            fir_len: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_up == 0 || self.n_up > self.n_c {
            return Err(Error::InvalidParameter("window needs 1 <= n_up <= n_C"));
        }
        if self.spacing == 0 {
            return Err(Error::InvalidParameter("knot spacing L must be at least 1"));
        }
        if self.degree == 0 || self.degree > crate::splines::MAX_DEGREE {
            return Err(Error::InvalidParameter("degree must be in 1..=30"));
        }
        if self.fir_len == Some(0) {
            return Err(Error::InvalidParameter("fir_len must be at least 1"));
        }
        if self.l_c < self.n_up * self.spacing {
            return Err(Error::InvalidParameter("L_C must cover the batch advance n_up * L"));
        }
        if self.l_c > self.n_c * self.spacing {
            return Err(Error::InvalidParameter("L_C must not exceed n_C * L"));
        }
        Ok(())
    }

    /// Samples the window advances per batch.
    pub fn advance(&self) -> usize {
        self.n_up * self.spacing
    }

    /// Number of batches needed for `samples` reference points.
    pub fn batch_count(&self, samples: usize) -> usize {
        samples.div_ceil(self.advance())
    }
}

/// Leading part of an impulse response.
#[derive(Debug, Clone, PartialEq)]
pub struct TruncatedImpulse {
    pub taps: Vec<f64>,
    /// Discarded share of the total absolute impulse-response sum.
    pub discarded_fraction: f64,
}

/// Sample count after which the remaining response is below double
/// precision, judged from the slowest pole.
fn impulse_horizon(tf: &DiscreteTransferFunction, at_least: usize) -> Result<usize> {
    let rho = tf.max_pole_magnitude();
    if rho >= 1.0 {
        return Err(Error::Unstable(rho));
    }
    let decay = if rho <= 0.0 {
        0
    } else {
        let n = libm::log(1e-18) / libm::log(rho);
        if !(n < MAX_IMPULSE_HORIZON as f64) {
            return Err(Error::InvalidParameter("impulse response decays too slowly to truncate"));
        }
        libm::ceil(n) as usize
    };
    Ok(decay + 4 * tf.order() + at_least + 1)
}

/// Keep the first `fir_len` impulse-response samples and report the share of
/// the absolute sum that was dropped. Fails for unstable filters, whose tail
/// does not converge.
pub fn truncate_impulse(tf: &DiscreteTransferFunction, fir_len: usize) -> Result<TruncatedImpulse> {
    if fir_len == 0 {
        return Err(Error::InvalidParameter("fir_len must be at least 1"));
    }
    let horizon = impulse_horizon(tf, fir_len)?;
    let h = impulse_response(tf, horizon);
    let total: f64 = h.iter().map(|v| v.abs()).sum();
    let tail: f64 = h[fir_len..].iter().map(|v| v.abs()).sum();
    Ok(TruncatedImpulse {
        taps: h[..fir_len].to_vec(),
        discarded_fraction: if total == 0.0 { 0.0 } else { tail / total },
    })
}

/// Shortest truncation whose discarded fraction is below `tail_fraction`.
pub fn min_fir_len(tf: &DiscreteTransferFunction, tail_fraction: f64) -> Result<usize> {
    let horizon = impulse_horizon(tf, 1)?;
    let h = impulse_response(tf, horizon);
    let total: f64 = h.iter().map(|v| v.abs()).sum();
    if total == 0.0 {
        return Ok(1);
    }
    let mut tail = total;
    for (len, v) in h.iter().enumerate() {
        if len > 0 && tail / total < tail_fraction {
            return Ok(len);
        }
        tail -= v.abs();
    }
    Ok(h.len())
}

/// Sampled B-spline shapes on open-ended knots, in units of samples.
#[derive(Debug, Clone)]
struct SplineTable {
    /// Uniform (cardinal) spline over its support `[0, (m + 1) L)`.
    cardinal: Vec<f64>,
    /// Clamped start splines `j < m`, rows `0..m·L`.
    clamped: DMatrix<f64>,
    spacing: usize,
    degree: usize,
}

impl SplineTable {
    fn new(degree: usize, spacing: usize) -> Result<Self> {
        let m = degree;
        let knots = build_open_knots(m, spacing, 1.0, 3 * m + 4)?;
        let support: Vec<f64> = (0..(m + 1) * spacing).map(|k| k as f64).collect();
        let cardinal = sample_basis(&knots, &support, m..m + 1)?;
        let head: Vec<f64> = (0..m * spacing).map(|k| k as f64).collect();
        let clamped = sample_basis(&knots, &head, 0..m)?;
        Ok(Self {
            cardinal: cardinal.as_slice().to_vec(),
            clamped,
            spacing,
            degree,
        })
    }

    /// `N_j` at sample `k`.
    fn value(&self, j: usize, k: usize) -> f64 {
        let (m, l) = (self.degree, self.spacing);
        if j >= m {
            let start = (j - m) * l;
            if k < start {
                return 0.0;
            }
            self.cardinal.get(k - start).copied().unwrap_or(0.0)
        } else if k < (j + 1) * l {
            self.clamped[(k, j)]
        } else {
            0.0
        }
    }

    /// Spline of `coeffs` (index = basis number) at sample `k`; missing
    /// coefficients count as zero.
    fn spline_value(&self, coeffs: &[f64], k: usize) -> f64 {
        let first = k / self.spacing;
        let last = (first + self.degree + 1).min(coeffs.len());
        (first.min(last)..last).map(|j| self.value(j, k) * coeffs[j]).sum()
    }
}

/// Which coefficient slots and samples batch `b` covers.
#[derive(Debug, Clone)]
struct Geometry {
    cfg: WindowConfig,
    table: SplineTable,
    basis_first: DMatrix<f64>,
    basis_steady: DMatrix<f64>,
}

impl Geometry {
    fn new(cfg: WindowConfig) -> Result<Self> {
        cfg.validate()?;
        let table = SplineTable::new(cfg.degree, cfg.spacing)?;
        let mut g = Self {
            cfg,
            table,
            basis_first: DMatrix::zeros(0, 0),
            basis_steady: DMatrix::zeros(0, 0),
        };
        g.basis_first = g.window_basis(0);
        g.basis_steady = g.window_basis(1);
        Ok(g)
    }

    fn window_start(&self, b: usize) -> usize {
        b * self.cfg.advance()
    }

    fn first_slot(&self, b: usize) -> usize {
        if b == 0 {
            0
        } else {
            b * self.cfg.n_up + self.cfg.degree
        }
    }

    fn slot_count(&self, b: usize) -> usize {
        self.cfg.n_c + if b == 0 { self.cfg.degree } else { 0 }
    }

    fn commit_count(&self, b: usize) -> usize {
        self.cfg.n_up + if b == 0 { self.cfg.degree } else { 0 }
    }

    fn window_basis(&self, b: usize) -> DMatrix<f64> {
        let s = self.window_start(b);
        let c0 = self.first_slot(b);
        DMatrix::from_fn(self.cfg.l_c, self.slot_count(b), |r, i| self.table.value(c0 + i, s + r))
    }
}

fn fir_filter(taps: &[f64], u: &[f64]) -> Vec<f64> {
    (0..u.len())
        .map(|k| {
            taps.iter()
                .take(k + 1)
                .enumerate()
                .map(|(i, h)| h * u[k - i])
                .sum()
        })
        .collect()
}

fn fir_filter_columns(taps: &[f64], m: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(m.nrows(), m.ncols());
    for (c, col) in m.column_iter().enumerate() {
        out.set_column(c, &DVector::from_vec(fir_filter(taps, col.as_slice())));
    }
    out
}

/// Window operators for one plant path.
#[derive(Debug, Clone)]
struct PathOps {
    fir: TruncatedImpulse,
    filtered_first: DMatrix<f64>,
    filtered_steady: DMatrix<f64>,
    pinv: Option<(PseudoInverse, PseudoInverse)>,
}

impl PathOps {
    fn new(tf: &DiscreteTransferFunction, geo: &Geometry, invert: bool, opts: &SolveOptions) -> Result<Self> {
        let len = match geo.cfg.fir_len {
            Some(n) => n,
            None => min_fir_len(tf, DEFAULT_TAIL_FRACTION)?,
        };
        let fir = truncate_impulse(tf, len)?;
        let filtered_first = fir_filter_columns(&fir.taps, &geo.basis_first);
        let filtered_steady = fir_filter_columns(&fir.taps, &geo.basis_steady);
        let pinv = if invert {
            Some((
                PseudoInverse::new(&filtered_first, opts.rcond)?,
                PseudoInverse::new(&filtered_steady, opts.rcond)?,
            ))
        } else {
            None
        };
        Ok(Self {
            fir,
            filtered_first,
            filtered_steady,
            pinv,
        })
    }

    fn filtered(&self, b: usize) -> &DMatrix<f64> {
        if b == 0 {
            &self.filtered_first
        } else {
            &self.filtered_steady
        }
    }

    fn pinv(&self, b: usize) -> &PseudoInverse {
        let (first, steady) = self.pinv.as_ref().expect("operator was precomputed");
        if b == 0 {
            first
        } else {
            steady
        }
    }

    /// Output over the window rows caused by committed coefficients.
    fn carried(&self, table: &SplineTable, committed: &[f64], start: usize, rows: usize) -> Vec<f64> {
        let taps = &self.fir.taps;
        let lo = start.saturating_sub(taps.len() - 1);
        let u: Vec<f64> = (lo..start + rows).map(|k| table.spline_value(committed, k)).collect();
        (0..rows)
            .map(|r| {
                let k = start + r;
                taps.iter()
                    .enumerate()
                    .take(k - lo + 1)
                    .map(|(i, h)| h * u[k - i - lo])
                    .sum()
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpfbsMethod {
    /// Per-axis LTI compensation; racking ignored.
    Standard,
    /// One stacked two-axis solve per batch.
    Coupled,
    /// x first, then y with the predicted racking subtracted.
    Decoupled,
}

/// Streaming state between batches.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct BatchState {
    /// Batches solved so far.
    pub batch: usize,
    /// First sample not yet final; advances by `n_up · L` per batch.
    pub sample_cursor: usize,
    /// Committed x coefficients, indexed by basis number.
    pub px: Vec<f64>,
    /// Committed y coefficients.
    pub py: Vec<f64>,
    /// Carried x-axis output `N̄_PC p̄_x,P` over the last window.
    pub carried_x: Vec<f64>,
    /// Carried y-axis output `N̄_PC p̄_y,P` over the last window.
    pub carried_y: Vec<f64>,
}

/// Newly final command samples.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Emitted {
    pub xdm: Vec<f64>,
    pub ydm: Vec<f64>,
}

/// Per-batch diagnostics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BatchReport {
    pub batch: usize,
    pub window_start: usize,
    /// The window ran past the supplied reference and was hold-extended.
    pub padded: bool,
    pub solve_seconds: f64,
}

/// Incremental limited-preview compensator for both axes.
#[derive(Debug, Clone)]
pub struct LpfbsStream {
    method: LpfbsMethod,
    geo: Geometry,
    opts: SolveOptions,
    xx: PathOps,
    yy: PathOps,
    xtheta: PathOps,
    xref: Vec<f64>,
    yref: Vec<f64>,
    state: BatchState,
    reports: Vec<BatchReport>,
    finished: bool,
}

impl LpfbsStream {
    pub fn new(plant: &HFramePlant, method: LpfbsMethod, cfg: WindowConfig, opts: SolveOptions) -> Result<Self> {
        let geo = Geometry::new(cfg)?;
        let invert = method != LpfbsMethod::Coupled;
        Ok(Self {
            xx: PathOps::new(&plant.gxx, &geo, invert, &opts)?,
            yy: PathOps::new(&plant.gyy, &geo, invert, &opts)?,
            xtheta: PathOps::new(&plant.gxtheta, &geo, false, &opts)?,
            method,
            geo,
            opts,
            xref: Vec::new(),
            yref: Vec::new(),
            state: BatchState::default(),
            reports: Vec::new(),
            finished: false,
        })
    }

    pub fn state(&self) -> &BatchState {
        &self.state
    }

    pub fn reports(&self) -> &[BatchReport] {
        &self.reports
    }

    pub fn config(&self) -> &WindowConfig {
        &self.geo.cfg
    }

    /// `[x, y, xθ]` truncation lengths and discarded tail fractions.
    pub fn fir_report(&self) -> [(usize, f64); 3] {
        [&self.xx, &self.yy, &self.xtheta].map(|p| (p.fir.taps.len(), p.fir.discarded_fraction))
    }

    /// Append reference samples; returns any command samples that became
    /// final. A batch runs once its whole window of reference is available.
    pub fn push(&mut self, xd: &[f64], yd: &[f64], clock: &dyn Clock) -> Result<Emitted> {
        if xd.len() != yd.len() {
            return Err(Error::DimensionMismatch {
                what: "yd chunk length",
                expected: xd.len(),
                got: yd.len(),
            });
        }
        if self.finished {
            return Err(Error::InvalidParameter("stream already finished"));
        }
        self.xref.extend_from_slice(xd);
        self.yref.extend_from_slice(yd);
        let mut out = Emitted::default();
        while self.xref.len() >= self.geo.window_start(self.state.batch) + self.geo.cfg.l_c {
            self.run_batch(false, clock, &mut out)?;
        }
        Ok(out)
    }

    /// Hold-extend the reference, run the remaining batches and return the
    /// rest of the command, trimmed to the reference length.
    pub fn finish(&mut self, clock: &dyn Clock) -> Result<Emitted> {
        let total = self.xref.len();
        let mut out = Emitted::default();
        if self.finished || total == 0 {
            self.finished = true;
            return Ok(out);
        }
        while self.state.sample_cursor < total {
            self.run_batch(true, clock, &mut out)?;
        }
        let emitted_before = self.state.sample_cursor - out.xdm.len();
        let keep = total.saturating_sub(emitted_before);
        out.xdm.truncate(keep);
        out.ydm.truncate(keep);
        self.finished = true;
        Ok(out)
    }

    fn window(reference: &[f64], start: usize, len: usize) -> Vec<f64> {
        let hold = reference.last().copied().unwrap_or(0.0);
        (start..start + len).map(|k| reference.get(k).copied().unwrap_or(hold)).collect()
    }

    fn run_batch(&mut self, allow_pad: bool, clock: &dyn Clock, out: &mut Emitted) -> Result<()> {
        let b = self.state.batch;
        let geo = &self.geo;
        let (start, rows) = (geo.window_start(b), geo.cfg.l_c);
        let padded = start + rows > self.xref.len();
        if padded && !allow_pad {
            return Err(Error::InvalidParameter("window extends past the supplied reference"));
        }
        let xd = Self::window(&self.xref, start, rows);
        let yd = Self::window(&self.yref, start, rows);
        let table = &geo.table;
        let carry_x = self.xx.carried(table, &self.state.px, start, rows);
        let carry_y = self.yy.carried(table, &self.state.py, start, rows);
        let carry_t = match self.method {
            LpfbsMethod::Standard => vec![0.0; rows],
            _ => self.xtheta.carried(table, &self.state.px, start, rows),
        };

        let tx = DVector::from_iterator(rows, (0..rows).map(|r| xd[r] - carry_x[r]));
        let t0 = clock.now_seconds();
        let (px, py) = match self.method {
            LpfbsMethod::Standard => {
                let ty = DVector::from_iterator(rows, (0..rows).map(|r| yd[r] - carry_y[r]));
                (self.xx.pinv(b).apply(&tx)?, self.yy.pinv(b).apply(&ty)?)
            }
            LpfbsMethod::Decoupled => {
                let px = self.xx.pinv(b).apply(&tx)?;
                let theta_now = self.xtheta.filtered(b) * &px;
                let ty = DVector::from_iterator(
                    rows,
                    (0..rows).map(|r| yd[r] - xd[r] * (carry_t[r] + theta_now[r]) - carry_y[r]),
                );
                (px, self.yy.pinv(b).apply(&ty)?)
            }
            LpfbsMethod::Coupled => {
                let fx = self.xx.filtered(b);
                let fy = self.yy.filtered(b);
                let ft = self.xtheta.filtered(b);
                let (nx, ny) = (fx.ncols(), fy.ncols());
                let mut a = DMatrix::zeros(2 * rows, nx + ny);
                a.view_mut((0, 0), (rows, nx)).copy_from(fx);
                for r in 0..rows {
                    for c in 0..nx {
                        a[(rows + r, c)] = xd[r] * ft[(r, c)];
                    }
                }
                a.view_mut((rows, nx), (rows, ny)).copy_from(fy);
                let target = DVector::from_iterator(
                    2 * rows,
                    tx.iter()
                        .copied()
                        .chain((0..rows).map(|r| yd[r] - xd[r] * carry_t[r] - carry_y[r])),
                );
                let p = pseudo_solve(&a, &target, self.opts.rcond)?;
                (p.rows(0, nx).into_owned(), p.rows(nx, ny).into_owned())
            }
        };
        let solve_seconds = clock.now_seconds() - t0;

        let commit = geo.commit_count(b);
        debug_assert_eq!(self.state.px.len(), geo.first_slot(b));
        self.state.px.extend_from_slice(&px.as_slice()[..commit]);
        self.state.py.extend_from_slice(&py.as_slice()[..commit]);

        let next = geo.window_start(b + 1);
        for k in start..next {
            out.xdm.push(table.spline_value(&self.state.px, k));
            out.ydm.push(table.spline_value(&self.state.py, k));
        }
        self.state.carried_x = carry_x;
        self.state.carried_y = carry_y;
        self.state.sample_cursor = next;
        self.state.batch += 1;
        self.reports.push(BatchReport {
            batch: b,
            window_start: start,
            padded,
            solve_seconds,
        });
        Ok(())
    }
}

/// Whole-trajectory result of a limited-preview run.
#[derive(Debug, Clone, PartialEq)]
pub struct LpfbsOutput {
    pub xdm: Vec<f64>,
    pub ydm: Vec<f64>,
    pub px: Vec<f64>,
    pub py: Vec<f64>,
    pub reports: Vec<BatchReport>,
    pub fir: [(usize, f64); 3],
}

impl LpfbsOutput {
    pub fn batches(&self) -> usize {
        self.reports.len()
    }
}

/// Feed complete references through a stream in one go.
pub fn run_lpfbs(
    plant: &HFramePlant,
    method: LpfbsMethod,
    xd: &[f64],
    yd: &[f64],
    cfg: WindowConfig,
    opts: SolveOptions,
    clock: &dyn Clock,
) -> Result<LpfbsOutput> {
    let mut s = LpfbsStream::new(plant, method, cfg, opts)?;
    let mut a = s.push(xd, yd, clock)?;
    let b = s.finish(clock)?;
    a.xdm.extend(b.xdm);
    a.ydm.extend(b.ydm);
    Ok(LpfbsOutput {
        xdm: a.xdm,
        ydm: a.ydm,
        px: s.state.px.clone(),
        py: s.state.py.clone(),
        fir: s.fir_report(),
        reports: s.reports,
    })
}

/// Single-axis limited-preview FBS through `tf`.
pub fn lpfbs_standard(
    tf: &DiscreteTransferFunction,
    reference: &[f64],
    cfg: WindowConfig,
    opts: SolveOptions,
    clock: &dyn Clock,
) -> Result<LpfbsOutput> {
    let zero = DiscreteTransferFunction::gain(0.0, tf.sample_period())?;
    let plant = HFramePlant::new(tf.clone(), tf.clone(), zero, Default::default())?;
    let zeros = vec![0.0; reference.len()];
    let mut out = run_lpfbs(&plant, LpfbsMethod::Standard, reference, &zeros, cfg, opts, clock)?;
    out.ydm.clear();
    out.py.clear();
    Ok(out)
}

pub fn lpfbs_coupled(
    plant: &HFramePlant,
    xd: &[f64],
    yd: &[f64],
    cfg: WindowConfig,
    opts: SolveOptions,
    clock: &dyn Clock,
) -> Result<LpfbsOutput> {
    run_lpfbs(plant, LpfbsMethod::Coupled, xd, yd, cfg, opts, clock)
}

pub fn lpfbs_decoupled(
    plant: &HFramePlant,
    xd: &[f64],
    yd: &[f64],
    cfg: WindowConfig,
    opts: SolveOptions,
    clock: &dyn Clock,
) -> Result<LpfbsOutput> {
    run_lpfbs(plant, LpfbsMethod::Decoupled, xd, yd, cfg, opts, clock)
}

/// Number of open-ended basis functions that touch `samples` points.
pub fn open_basis_count(samples: usize, spacing: usize, degree: usize) -> usize {
    samples.div_ceil(spacing) + degree
}
