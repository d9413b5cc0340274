use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_hfbs");

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

fn run(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let o = run(args);
    assert!(o.status.success(), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// `rms contour X mm` from the evaluate summary line.
fn contour_rms(summary: &str) -> f64 {
    let rest = summary.split("rms contour ").nth(1).unwrap();
    rest.split_whitespace().next().unwrap().parse().unwrap()
}

fn rectangle(dir: &Path) -> PathBuf {
    let r = dir.join("ref.csv");
    let out = ok(&["trajgen", "--rect", "120x20", "--ts", "0.001", "--out", s(&r)]);
    assert!(out.starts_with("1945 samples"), "{out}");
    r
}

fn chain(dir: &Path, reference: &Path, method: &str) -> f64 {
    let plant = config("synthetic_plant.toml");
    let cmd = dir.join(format!("{method}.csv"));
    let out = dir.join(format!("{method}.out.csv"));
    ok(&["compensate", "--plant", s(&plant), "--traj", s(reference), "--method", method, "--out", s(&cmd)]);
    ok(&["simulate", "--plant", s(&plant), "--commands", s(&cmd), "--traj", s(reference), "--out", s(&out)]);
    let summary = ok(&["evaluate", "--traj", s(reference), "--output", s(&out), "--rect", "120x20"]);
    contour_rms(&summary)
}

#[test]
fn pipeline_reduces_contour_error() {
    let dir = tempfile::tempdir().unwrap();
    let r = rectangle(dir.path());
    let none = chain(dir.path(), &r, "none");
    // Racking dominates the contour error; per-axis compensation only trims it.
    let fbs = chain(dir.path(), &r, "fbs");
    assert!(fbs < none);
    let lpfbs = chain(dir.path(), &r, "lpfbs");
    assert!(lpfbs < none);
    for method in ["fbs_racking_coupled", "fbs_racking_decoupled", "lpfbs_racking"] {
        let c = chain(dir.path(), &r, method);
        assert!(c < 0.2 * fbs.min(lpfbs), "{method}: {c} vs per-axis {fbs}, {lpfbs}");
    }
    let text = std::fs::read_to_string(dir.path().join("fbs_racking_decoupled.csv")).unwrap();
    assert!(text.starts_with("t,xdm,ydm\n"));
    assert_eq!(text.lines().count(), 1946);
    let out = std::fs::read_to_string(dir.path().join("none.out.csv")).unwrap();
    assert!(out.starts_with("t,x,y,theta\n"));
}

#[test]
fn diagnostics_are_written() {
    let dir = tempfile::tempdir().unwrap();
    let r = rectangle(dir.path());
    let plant = config("synthetic_plant.toml");
    let cmd = dir.path().join("c.csv");
    ok(&["compensate", "--plant", s(&plant), "--traj", s(&r), "--method", "lpfbs_racking", "--out", s(&cmd)]);
    let d = std::fs::read_to_string(dir.path().join("c.csv.diag.toml")).unwrap();
    assert!(d.contains("method = \"lpfbs_racking\""), "{d}");
    assert!(d.contains("batches = 9"), "{d}");
    assert!(d.contains("l_c = 440"), "{d}");
    let diag = dir.path().join("d.toml");
    ok(&[
        "compensate", "--plant", s(&plant), "--traj", s(&r), "--method", "fbs", "--n", "50", "--out", s(&cmd),
        "--diagnostics", s(&diag),
    ]);
    let d = std::fs::read_to_string(&diag).unwrap();
    assert!(d.contains("basis_count = 50"), "{d}");
    assert!(d.contains("name = \"gxtheta\""), "{d}");
}

#[test]
fn evaluate_writes_error_table() {
    let dir = tempfile::tempdir().unwrap();
    let r = rectangle(dir.path());
    chain(dir.path(), &r, "fbs");
    let e = dir.path().join("err.csv");
    let out = dir.path().join("fbs.out.csv");
    let with_rect = ok(&["evaluate", "--traj", s(&r), "--output", s(&out), "--rect", "120x20", "--out", s(&e)]);
    let text = std::fs::read_to_string(&e).unwrap();
    assert!(text.starts_with("t,arclen,ex,ey,contour\n"));
    // A polyline through the reference traces the same rectangle.
    let from_ref = ok(&["evaluate", "--traj", s(&r), "--output", s(&out)]);
    let (a, b) = (contour_rms(&with_rect), contour_rms(&from_ref));
    assert!((a - b).abs() <= 1e-9 * a, "{a} vs {b}");
}

#[test]
fn compensation_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let r = rectangle(dir.path());
    let plant = config("synthetic_plant.toml");
    for method in ["fbs_racking_coupled", "lpfbs_racking"] {
        let a = dir.path().join("a.csv");
        let b = dir.path().join("b.csv");
        for p in [&a, &b] {
            ok(&["compensate", "--plant", s(&plant), "--traj", s(&r), "--method", method, "--out", s(p)]);
        }
        assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap(), "{method}");
    }
}

#[test]
fn waypoint_file_open_and_closed() {
    let dir = tempfile::tempdir().unwrap();
    let wp = dir.path().join("wp.csv");
    std::fs::write(&wp, "x,y\n0,0\n10,0\n10,5\n").unwrap();
    let a = dir.path().join("open.csv");
    let b = dir.path().join("closed.csv");
    ok(&["trajgen", "--path", s(&wp), "--open", "--ts", "0.001", "--out", s(&a)]);
    ok(&["trajgen", "--path", s(&wp), "--ts", "0.001", "--out", s(&b)]);
    let last = |p: &Path| std::fs::read_to_string(p).unwrap().lines().last().unwrap().to_string();
    let open_end: Vec<f64> = last(&a).split(',').skip(1).map(|v| v.parse().unwrap()).collect();
    let closed_end: Vec<f64> = last(&b).split(',').skip(1).map(|v| v.parse().unwrap()).collect();
    assert_eq!(open_end, vec![10.0, 5.0]);
    assert!(closed_end[0].abs() < 1e-9 && closed_end[1].abs() < 1e-9);
}

#[test]
fn benchmark_writes_one_row_per_fraction() {
    let dir = tempfile::tempdir().unwrap();
    let r = rectangle(dir.path());
    let plant = config("synthetic_plant.toml");
    let b = dir.path().join("bench.csv");
    ok(&[
        "benchmark", "--plant", s(&plant), "--traj", s(&r), "--rect", "120x20", "--fractions", "0.001,0.02,0.05",
        "--repeats", "1", "--out", s(&b),
    ]);
    let text = std::fs::read_to_string(&b).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "n,rms_coupled_mm,rms_decoupled_mm,time_coupled_s,time_decoupled_s");
    // 0.001 * 1944 rounds to 2 functions, below m + 1, and is skipped.
    let ns: Vec<f64> = lines.map(|l| l.split(',').next().unwrap().parse().unwrap()).collect();
    assert_eq!(ns, vec![39.0, 97.0]);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let r = rectangle(dir.path());
    let out = dir.path().join("x.csv");
    let code = |args: &[&str]| run(args).status.code().unwrap();

    let table = config("table_plant.toml");
    let o = run(&["compensate", "--plant", s(&table), "--traj", s(&r), "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&o.stderr).contains("--allow-unstable"));

    assert_eq!(code(&["compensate", "--traj", s(&r), "--out", s(&out)]), 2);
    assert_eq!(code(&["trajgen", "--ts", "0.001", "--out", s(&out)]), 2);
    assert_eq!(code(&["trajgen", "--rect", "12by3", "--ts", "0.001", "--out", s(&out)]), 2);
    let synth = config("synthetic_plant.toml");
    assert_eq!(code(&["compensate", "--plant", s(&synth), "--traj", s(&r), "--n", "3", "--out", s(&out)]), 2);

    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "t,x,y\n0,0,0\n0.001,1,zz\n").unwrap();
    let o = run(&["compensate", "--plant", s(&synth), "--traj", s(&bad), "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("bad.csv:3:"));

    let slow = dir.path().join("slow.csv");
    std::fs::write(&slow, "t,x,y\n0,0,0\n0.002,1,1\n0.004,2,2\n").unwrap();
    assert_eq!(code(&["compensate", "--plant", s(&synth), "--traj", s(&slow), "--out", s(&out)]), 3);
    assert_eq!(code(&["compensate", "--plant", s(&dir.path().join("nope.toml")), "--traj", s(&r), "--out", s(&out)]), 3);
}
