//! Column files. Every file has a header row; values are written in `{:e}`
//! form so they read back bit for bit.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use hfbs_core::sysmodel::Trajectory;

use crate::error::{AppError, AppResult};

pub const TRAJECTORY_HEADER: &[&str] = &["t", "x", "y"];
pub const COMMAND_HEADER: &[&str] = &["t", "xdm", "ydm"];
pub const OUTPUT_HEADER: &[&str] = &["t", "x", "y", "theta"];
pub const ERROR_HEADER: &[&str] = &["t", "arclen", "ex", "ey", "contour"];
pub const WAYPOINT_HEADER: &[&str] = &["x", "y"];
pub const BENCHMARK_HEADER: &[&str] = &["n", "rms_coupled_mm", "rms_decoupled_mm", "time_coupled_s", "time_decoupled_s"];

/// Numeric table read from or written to disk, column-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub columns: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(header: &[&str], columns: Vec<Vec<f64>>) -> Self {
        assert_eq!(header.len(), columns.len(), "one column per header field");
        assert!(columns.windows(2).all(|w| w[0].len() == w[1].len()), "ragged columns");
        Self {
            header: header.iter().map(|s| s.to_string()).collect(),
            columns,
        }
    }

    pub fn rows(&self) -> usize {
        self.columns.first().map_or(0, Vec::len)
    }

    pub fn column(&self, name: &str) -> Option<&[f64]> {
        let i = self.header.iter().position(|h| h == name)?;
        Some(&self.columns[i])
    }
}

pub fn write_table(path: &Path, table: &Table) -> AppResult<()> {
    let io = |e: std::io::Error| AppError::data(path, e);
    let file = File::create(path).map_err(io)?;
    let mut w = std::io::BufWriter::new(file);
    writeln!(w, "{}", table.header.join(",")).map_err(io)?;
    let mut line = String::new();
    for r in 0..table.rows() {
        line.clear();
        for (i, c) in table.columns.iter().enumerate() {
            if i > 0 {
                line.push(',');
            }
            line.push_str(&format!("{:e}", c[r]));
        }
        writeln!(w, "{line}").map_err(io)?;
    }
    w.flush().map_err(io)
}

/// Read a table whose header must equal `expected`.
pub fn read_table(path: &Path, expected: &[&str]) -> AppResult<Table> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| AppError::data(path, e))?;
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| AppError::data(path, e))?
        .iter()
        .map(str::to_string)
        .collect();
    if header != expected {
        return Err(AppError::Parse {
            path: path.into(),
            line: 1,
            message: format!("expected header `{}`, found `{}`", expected.join(","), header.join(",")),
        });
    }
    let mut columns = vec![Vec::new(); expected.len()];
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            AppError::Parse {
                path: path.into(),
                line,
                message: e.to_string(),
            }
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        for (i, field) in rec.iter().enumerate() {
            let v: f64 = field.parse().map_err(|_| AppError::Parse {
                path: path.into(),
                line,
                message: format!("column `{}`: cannot parse `{field}` as a number", expected[i]),
            })?;
            if !v.is_finite() {
                return Err(AppError::Parse {
                    path: path.into(),
                    line,
                    message: format!("column `{}`: non-finite value", expected[i]),
                });
            }
            columns[i].push(v);
        }
    }
    if columns[0].is_empty() {
        return Err(AppError::data(path, "no data rows"));
    }
    Ok(Table {
        header,
        columns,
    })
}

/// Read a `t,x,y` file as a trajectory.
pub fn read_trajectory(path: &Path) -> AppResult<Trajectory> {
    let t = read_table(path, TRAJECTORY_HEADER)?;
    let ts = sample_period(path, &t.columns[0])?;
    let mut cols = t.columns.into_iter().skip(1);
    let (x, y) = (cols.next().unwrap(), cols.next().unwrap());
    Ok(Trajectory::new(x, y, ts)?)
}

pub fn write_trajectory(path: &Path, traj: &Trajectory) -> AppResult<()> {
    let t = time_column(traj.len(), traj.sample_period);
    write_table(path, &Table::new(TRAJECTORY_HEADER, vec![t, traj.x.clone(), traj.y.clone()]))
}

/// Time column `k · ts`.
pub fn time_column(len: usize, ts: f64) -> Vec<f64> {
    (0..len).map(|k| k as f64 * ts).collect()
}

/// Sample period recovered from a time column, checking uniform spacing.
pub fn sample_period(path: &Path, t: &[f64]) -> AppResult<f64> {
    if t.len() < 2 {
        return Err(AppError::data(path, "need at least two samples to infer the sample period"));
    }
    let ts = (t[t.len() - 1] - t[0]) / (t.len() - 1) as f64;
    if ts.is_nan() || ts <= 0.0 {
        return Err(AppError::data(path, "time column must increase"));
    }
    for (k, w) in t.windows(2).enumerate() {
        if ((w[1] - w[0]) - ts).abs() > 1e-6 * ts.max(1.0) {
            return Err(AppError::Parse {
                path: path.into(),
                line: k as u64 + 3,
                message: "time column is not uniformly spaced".into(),
            });
        }
    }
    Ok(ts)
}
