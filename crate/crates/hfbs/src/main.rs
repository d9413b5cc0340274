use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use hfbs::config::{load_plant, LoadedPlant};
use hfbs::csvio::{self, Table};
use hfbs::pipeline::{self, BasisSize, CompensateParams, CompensationMethod, SweepConfig};
use hfbs::{AppError, AppResult, SystemClock};
use hfbs_core::fbs::SolveOptions;
use hfbs_core::lpfbs::WindowConfig;
use hfbs_core::metrics::ErrorReport;
use hfbs_core::sysmodel::{CouplingMode, Trajectory};
use hfbs_core::trajgen::{rectangle_path, sample_trajectory, MotionLimits, PathSpec};

#[derive(Parser)]
#[command(name = "hfbs", version, about = "Filtered B-spline feedforward for H-frame stages")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample a jerk-limited reference along a rectangle or polyline.
    Trajgen(TrajgenArgs),
    /// Compute compensated commands for a reference trajectory.
    Compensate(CompensateArgs),
    /// Drive the plant model with commands.
    Simulate(SimulateArgs),
    /// Tracking and contour errors of a simulated output.
    Evaluate(EvaluateArgs),
    /// Coupled vs decoupled accuracy and solve time over basis sizes.
    Benchmark(BenchmarkArgs),
}

#[derive(Args)]
struct GeometryArgs {
    /// Rectangle `LENGTHxWIDTH` in mm, starting at the origin.
    #[arg(long, value_parser = parse_rect, conflicts_with = "path")]
    rect: Option<(f64, f64)>,
    /// Waypoint file with header `x,y`.
    #[arg(long)]
    path: Option<PathBuf>,
    /// Treat the waypoint file as an open polyline (default: closed).
    #[arg(long, requires = "path")]
    open: bool,
}

impl GeometryArgs {
    fn load(&self) -> AppResult<Option<PathSpec>> {
        if let Some((l, w)) = self.rect {
            return Ok(Some(rectangle_path(l, w)?));
        }
        let Some(p) = &self.path else { return Ok(None) };
        let t = csvio::read_table(p, csvio::WAYPOINT_HEADER)?;
        let pts = t.columns[0].iter().copied().zip(t.columns[1].iter().copied()).collect();
        Ok(Some(PathSpec::new(pts, !self.open).map_err(|e| AppError::data(p, e))?))
    }
}

#[derive(Args)]
struct TrajgenArgs {
    #[command(flatten)]
    geometry: GeometryArgs,
    /// Sample period in seconds.
    #[arg(long)]
    ts: f64,
    /// mm/s
    #[arg(long, default_value_t = 150.0)]
    vmax: f64,
    /// mm/s²
    #[arg(long, default_value_t = 1e4)]
    amax: f64,
    /// mm/s³
    #[arg(long, default_value_t = 5e7)]
    jmax: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct PlantArgs {
    /// Plant configuration (TOML).
    #[arg(long)]
    plant: PathBuf,
    /// Run even if a transfer function has poles on or outside the unit circle.
    #[arg(long)]
    allow_unstable: bool,
}

impl PlantArgs {
    fn load(&self) -> AppResult<LoadedPlant> {
        let p = load_plant(&self.plant)?;
        p.require_stable(self.allow_unstable)?;
        if p.is_stable() {
            eprintln!("{}", p.pole_report());
        }
        Ok(p)
    }
}

#[derive(Args)]
struct CompensateArgs {
    #[command(flatten)]
    plant: PlantArgs,
    /// Reference trajectory `t,x,y`.
    #[arg(long)]
    traj: PathBuf,
    #[arg(long, value_parser = clap::value_parser!(CompensationMethod), default_value = "fbs_racking_decoupled")]
    method: CompensationMethod,
    /// Number of basis functions per axis.
    #[arg(long, conflicts_with = "n_fraction")]
    n: Option<usize>,
    /// Basis functions as a fraction of the last sample index.
    #[arg(long, default_value_t = 0.1)]
    n_fraction: f64,
    /// Spline degree.
    #[arg(long, default_value_t = 5)]
    m: usize,
    /// Batches: basis functions committed per batch.
    #[arg(long, default_value_t = 11)]
    nup: usize,
    /// Batches: basis functions per window.
    #[arg(long, default_value_t = 22)]
    nc: usize,
    /// Batches: window length in samples.
    #[arg(long, default_value_t = 440)]
    lc: usize,
    /// Batches: knot spacing in samples.
    #[arg(long = "L", default_value_t = 20)]
    spacing: usize,
    /// Batches: FIR length; by default the shortest with tail below 1e-4.
    #[arg(long)]
    fir_len: Option<usize>,
    #[arg(long, default_value_t = hfbs_core::linalg::DEFAULT_RCOND)]
    rcond: f64,
    /// Commands `t,xdm,ydm`.
    #[arg(long)]
    out: PathBuf,
    /// Diagnostics TOML; defaults to `<out>.diag.toml`.
    #[arg(long)]
    diagnostics: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Nonlinear,
    Lpv,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    plant: PlantArgs,
    /// Commands `t,xdm,ydm`.
    #[arg(long)]
    commands: PathBuf,
    /// Reference `t,x,y`; supplies the lever arm in LPV mode.
    #[arg(long)]
    traj: Option<PathBuf>,
    /// Override the configured coupling mode.
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    /// Output `t,x,y,theta`.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Reference `t,x,y`.
    #[arg(long)]
    traj: PathBuf,
    /// Simulated output `t,x,y,theta`.
    #[arg(long)]
    output: PathBuf,
    /// Desired geometry; defaults to the polyline through the reference.
    #[command(flatten)]
    geometry: GeometryArgs,
    /// Errors `t,arclen,ex,ey,contour`.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BenchmarkArgs {
    #[command(flatten)]
    plant: PlantArgs,
    #[arg(long)]
    traj: PathBuf,
    #[command(flatten)]
    geometry: GeometryArgs,
    #[arg(long, value_delimiter = ',', default_value = "0.01,0.05,0.1,0.15,0.2,0.25")]
    fractions: Vec<f64>,
    #[arg(long, default_value_t = 5)]
    m: usize,
    #[arg(long, default_value_t = 3)]
    repeats: usize,
    #[arg(long)]
    out: PathBuf,
}

fn parse_rect(s: &str) -> Result<(f64, f64), String> {
    let (l, w) = s.split_once(['x', 'X']).ok_or("expected LENGTHxWIDTH, e.g. 120x20")?;
    let num = |v: &str| v.trim().parse::<f64>().map_err(|e| format!("`{v}`: {e}"));
    Ok((num(l)?, num(w)?))
}

fn check_ts(plant: &LoadedPlant, traj: &Trajectory, origin: &Path) -> AppResult<()> {
    let ts = plant.plant.sample_period();
    if (traj.sample_period - ts).abs() > 1e-9 * ts {
        return Err(AppError::data(
            origin,
            format!("sample period {} does not match the plant's {ts}", traj.sample_period),
        ));
    }
    Ok(())
}

fn trajgen(a: TrajgenArgs) -> AppResult<()> {
    let path = a
        .geometry
        .load()?
        .ok_or_else(|| AppError::Usage("one of --rect or --path is required".into()))?;
    let limits = MotionLimits::new(a.vmax, a.amax, a.jmax)?;
    let traj = sample_trajectory(&path, &limits, a.ts)?;
    csvio::write_trajectory(&a.out, &traj)?;
    println!("{} samples ({:.3} s) written to {}", traj.len(), traj.last_index() as f64 * a.ts, a.out.display());
    Ok(())
}

fn compensate(a: CompensateArgs) -> AppResult<()> {
    let plant = a.plant.load()?;
    let reference = csvio::read_trajectory(&a.traj)?;
    check_ts(&plant, &reference, &a.traj)?;
    let params = CompensateParams {
        method: a.method,
        basis: a.n.map_or(BasisSize::Fraction(a.n_fraction), BasisSize::Count),
        degree: a.m,
        window: WindowConfig {
            n_up: a.nup,
            n_c: a.nc,
            l_c: a.lc,
            spacing: a.spacing,
            degree: a.m,
            fir_len: a.fir_len,
        },
        rcond: a.rcond,
    };
    let c = pipeline::compensate(&plant.plant, &reference, &params, &SystemClock::new())?;
    let t = csvio::time_column(c.xdm.len(), reference.sample_period);
    csvio::write_table(&a.out, &Table::new(csvio::COMMAND_HEADER, vec![t, c.xdm, c.ydm]))?;
    let diag_path = a.diagnostics.unwrap_or_else(|| {
        let mut p = a.out.clone().into_os_string();
        p.push(".diag.toml");
        p.into()
    });
    let text = toml::to_string(&c.diagnostics).map_err(|e| AppError::data(&diag_path, e))?;
    std::fs::write(&diag_path, text).map_err(|e| AppError::data(&diag_path, e))?;
    let d = &c.diagnostics;
    println!(
        "{}: predicted rms x {:.4e} mm, y {:.4e} mm; solve {:.3e} s",
        d.method, d.residual_rms_mm[0], d.residual_rms_mm[1], d.solve_seconds
    );
    Ok(())
}

fn simulate(a: SimulateArgs) -> AppResult<()> {
    let mut plant = a.plant.load()?;
    if let Some(m) = a.mode {
        plant.plant.coupling_mode = match m {
            ModeArg::Nonlinear => CouplingMode::Nonlinear,
            ModeArg::Lpv => CouplingMode::Lpv,
        };
    }
    let cmd = csvio::read_table(&a.commands, csvio::COMMAND_HEADER)?;
    let ts = csvio::sample_period(&a.commands, &cmd.columns[0])?;
    let cmd_traj = Trajectory::new(cmd.columns[1].clone(), cmd.columns[2].clone(), ts)?;
    check_ts(&plant, &cmd_traj, &a.commands)?;
    let xd = match (&a.traj, plant.plant.coupling_mode) {
        (Some(p), _) => {
            let r = csvio::read_trajectory(p)?;
            if r.len() != cmd_traj.len() {
                return Err(AppError::data(p, format!("{} samples, commands have {}", r.len(), cmd_traj.len())));
            }
            r.x
        }
        (None, CouplingMode::Lpv) => return Err(AppError::Usage("LPV mode needs --traj for the lever arm".into())),
        (None, CouplingMode::Nonlinear) => cmd_traj.x.clone(),
    };
    let out = pipeline::simulate(&plant.plant, &cmd_traj.x, &cmd_traj.y, &xd)?;
    let t = csvio::time_column(out.x.len(), ts);
    csvio::write_table(&a.out, &Table::new(csvio::OUTPUT_HEADER, vec![t, out.x, out.y, out.theta]))?;
    Ok(())
}

fn evaluate(a: EvaluateArgs) -> AppResult<()> {
    let reference = csvio::read_trajectory(&a.traj)?;
    let out = csvio::read_table(&a.output, csvio::OUTPUT_HEADER)?;
    let ts = csvio::sample_period(&a.output, &out.columns[0])?;
    let output = Trajectory::new(out.columns[1].clone(), out.columns[2].clone(), ts)?;
    if output.len() != reference.len() {
        return Err(AppError::data(
            &a.output,
            format!("{} samples, reference has {}", output.len(), reference.len()),
        ));
    }
    let path = match a.geometry.load()? {
        Some(p) => p,
        None => pipeline::path_from_reference(&reference)?,
    };
    let r = ErrorReport::new(&path, &reference, &output)?;
    if let Some(o) = &a.out {
        let t = csvio::time_column(reference.len(), reference.sample_period);
        let cols = vec![t, r.arc_length.clone(), r.tracking_x.clone(), r.tracking_y.clone(), r.contour.clone()];
        csvio::write_table(o, &Table::new(csvio::ERROR_HEADER, cols))?;
    }
    let max = r.contour.iter().fold(0.0f64, |m, v| m.max(*v));
    println!(
        "rms ex {:.6e} mm, rms ey {:.6e} mm, rms contour {:.6e} mm, max contour {:.6e} mm",
        r.rms_tracking_x, r.rms_tracking_y, r.rms_contour, max
    );
    Ok(())
}

fn benchmark(a: BenchmarkArgs) -> AppResult<()> {
    let plant = a.plant.load()?;
    let reference = csvio::read_trajectory(&a.traj)?;
    check_ts(&plant, &reference, &a.traj)?;
    let path = match a.geometry.load()? {
        Some(p) => p,
        None => pipeline::path_from_reference(&reference)?,
    };
    let sweep = SweepConfig {
        fractions: a.fractions,
        degree: a.m,
        repeats: a.repeats,
        opts: SolveOptions::default(),
    };
    let rows = pipeline::benchmark_sweep(&plant.plant, &path, &reference, &sweep, &SystemClock::new())?;
    let col = |f: fn(&pipeline::BenchmarkRow) -> f64| rows.iter().map(f).collect::<Vec<_>>();
    let table = Table::new(
        csvio::BENCHMARK_HEADER,
        vec![
            col(|r| r.n as f64),
            col(|r| r.rms_coupled_mm),
            col(|r| r.rms_decoupled_mm),
            col(|r| r.time_coupled_s),
            col(|r| r.time_decoupled_s),
        ],
    );
    csvio::write_table(&a.out, &table)?;
    for r in &rows {
        println!(
            "n={:5} coupled {:.4e} mm {:.3e} s | decoupled {:.4e} mm {:.3e} s",
            r.n, r.rms_coupled_mm, r.time_coupled_s, r.rms_decoupled_mm, r.time_decoupled_s
        );
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let result = match cli.command {
        Command::Trajgen(a) => trajgen(a),
        Command::Compensate(a) => compensate(a),
        Command::Simulate(a) => simulate(a),
        Command::Evaluate(a) => evaluate(a),
        Command::Benchmark(a) => benchmark(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
