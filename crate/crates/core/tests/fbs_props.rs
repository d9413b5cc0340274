use hfbs_core::fbs::{
    coupled_system, exact_inverse_reference, solve_coupled_lpv, solve_decoupled_lpv, solve_standard,
    solve_standard_pair, FilteredBases, NoClock, SolveOptions,
};
use hfbs_core::splines::{build_basis_matrix, BasisMatrix};
use hfbs_core::sysmodel::{filter_signal, simulate_hframe, CouplingMode, DiscreteTransferFunction, HFramePlant};
use hfbs_core::trajgen::{synthetic_plant, SyntheticPlantParams};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

const TS: f64 = 0.001;

fn plant() -> HFramePlant {
    synthetic_plant(&SyntheticPlantParams::default()).unwrap()
}

fn smooth_refs(e: usize, a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
    let t = |k: usize| k as f64 / e as f64;
    let x = (0..=e).map(|k| a * (1.0 - (3.0 * t(k)).cos()) + 5.0 * t(k)).collect();
    let y = (0..=e).map(|k| b * (2.0 * t(k)).sin() * t(k)).collect();
    (x, y)
}

/// `‖Aᵀ(Ap − b)‖ / (‖A‖_F ‖b‖)`, computed independently of the library.
fn stationarity(a: &DMatrix<f64>, p: &[f64], b: &[f64]) -> f64 {
    let mut worst = 0.0f64;
    let r: Vec<f64> = (0..a.nrows())
        .map(|i| (0..a.ncols()).map(|j| a[(i, j)] * p[j]).sum::<f64>() - b[i])
        .collect();
    for j in 0..a.ncols() {
        let g: f64 = (0..a.nrows()).map(|i| a[(i, j)] * r[i]).sum();
        worst += g * g;
    }
    let fro = a.iter().map(|v| v * v).sum::<f64>().sqrt();
    let bn = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    worst.sqrt() / (fro * bn)
}

fn rel_diff(a: &[f64], b: &[f64]) -> f64 {
    let num = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
    let den = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    num / den
}

fn basis(e: usize, n: usize) -> BasisMatrix {
    build_basis_matrix(e, n, 5).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn every_solver_is_stationary(e in 60usize..160, frac in 0.1f64..0.6, a in 1.0f64..40.0, b in 1.0f64..20.0) {
        let p = plant();
        let n = ((e as f64 * frac) as usize).max(6);
        let bx = basis(e, n);
        let (xd, yd) = smooth_refs(e, a, b);
        let o = SolveOptions::default();
        let fb = FilteredBases::new(&p, &bx, &bx).unwrap();

        let s = solve_standard_pair(&p, &xd, &yd, &bx, &bx, &o, &NoClock).unwrap();
        prop_assert!(stationarity(&fb.xx, &s.control_points.px, &xd) < 1e-8);
        prop_assert!(stationarity(&fb.yy, &s.control_points.py, &yd) < 1e-8);

        let c = solve_coupled_lpv(&p, &xd, &yd, &bx, &bx, &o, &NoClock).unwrap();
        let a_full = coupled_system(&fb, &xd).unwrap();
        let pc: Vec<f64> = c.control_points.px.iter().chain(&c.control_points.py).copied().collect();
        let target: Vec<f64> = xd.iter().chain(&yd).copied().collect();
        prop_assert!(stationarity(&a_full, &pc, &target) < 1e-8);

        let d = solve_decoupled_lpv(&p, &xd, &yd, &bx, &bx, &o, &NoClock).unwrap();
        prop_assert!(stationarity(&fb.xx, &d.control_points.px, &xd) < 1e-8);
        let theta = &fb.xtheta * DVector::from_column_slice(&d.control_points.px);
        let y_target: Vec<f64> = (0..=e).map(|k| yd[k] - xd[k] * theta[k]).collect();
        prop_assert!(stationarity(&fb.yy, &d.control_points.py, &y_target) < 1e-8);
    }

    #[test]
    fn commands_reconstruct_from_control_points(e in 40usize..120, a in 1.0f64..30.0) {
        let p = plant();
        let bx = basis(e, e / 3 + 5);
        let (xd, yd) = smooth_refs(e, a, 3.0);
        let d = solve_decoupled_lpv(&p, &xd, &yd, &bx, &bx, &SolveOptions::default(), &NoClock).unwrap();
        let xdm = bx.entries() * DVector::from_column_slice(&d.control_points.px);
        let ydm = bx.entries() * DVector::from_column_slice(&d.control_points.py);
        prop_assert_eq!(xdm.as_slice(), &d.xdm[..]);
        prop_assert_eq!(ydm.as_slice(), &d.ydm[..]);
    }
}

#[test]
fn residual_shrinks_over_nested_refinements() {
    // Uniform interior knots nest when n - m + 1 doubles.
    let p = plant();
    let e = 400;
    let (xd, _) = smooth_refs(e, 30.0, 0.0);
    let mut last = f64::INFINITY;
    for spans in [4, 8, 16, 32, 64] {
        let b = basis(e, spans + 4);
        let s = solve_standard(&p.gxx, &xd, &b, &SolveOptions::default(), &NoClock).unwrap();
        assert!(s.residual_rms <= last * (1.0 + 1e-9), "spans={spans}: {} > {last}", s.residual_rms);
        last = s.residual_rms;
    }
}

#[test]
fn full_basis_matches_exact_inverse() {
    // Quadratic: uniform collocation at n = E is well conditioned only for m <= 2.
    let p = plant();
    let e = 200;
    let (xd, yd) = smooth_refs(e, 25.0, 8.0);
    let b = build_basis_matrix(e, e, 2).unwrap();
    let o = SolveOptions::default();
    let c = solve_coupled_lpv(&p, &xd, &yd, &b, &b, &o, &NoClock).unwrap();
    let d = solve_decoupled_lpv(&p, &xd, &yd, &b, &b, &o, &NoClock).unwrap();
    let (xi, yi) = exact_inverse_reference(&p, &xd, &yd).unwrap();
    assert!(rel_diff(&c.xdm, &xi) < 1e-6);
    assert!(rel_diff(&c.ydm, &yi) < 1e-6);
    assert!(rel_diff(&d.xdm, &xi) < 1e-6);
    assert!(rel_diff(&d.ydm, &yi) < 1e-6);
    assert!(rel_diff(&d.ydm, &c.ydm) < 1e-6);
    let lpv = p.with_mode(CouplingMode::Lpv);
    for r in [&c, &d] {
        let out = simulate_hframe(&lpv, &r.xdm, &r.ydm, &xd).unwrap();
        assert!(rel_diff(&out.x, &xd) < 1e-8);
        assert!(rel_diff(&out.y, &yd) < 1e-8);
    }
}

#[test]
fn exact_inverse_round_trips_in_lpv_mode() {
    let p = plant().with_mode(CouplingMode::Lpv);
    let mut rng = 0x2545f4914f6cdd1du64;
    let mut next = || {
        rng ^= rng << 13;
        rng ^= rng >> 7;
        rng ^= rng << 17;
        (rng >> 11) as f64 / (1u64 << 53) as f64 * 20.0 - 10.0
    };
    let xd: Vec<f64> = (0..100).map(|_| next()).collect();
    let yd: Vec<f64> = (0..100).map(|_| next()).collect();
    let (xdm, ydm) = exact_inverse_reference(&p, &xd, &yd).unwrap();
    let out = simulate_hframe(&p, &xdm, &ydm, &xd).unwrap();
    assert!(rel_diff(&out.x, &xd) < 1e-8);
    assert!(rel_diff(&out.y, &yd) < 1e-8);
}

#[test]
fn decoupled_residual_matches_lpv_simulation() {
    let p = plant().with_mode(CouplingMode::Lpv);
    let e = 300;
    let (xd, yd) = smooth_refs(e, 30.0, 10.0);
    let b = basis(e, 40);
    let d = solve_decoupled_lpv(&p, &xd, &yd, &b, &b, &SolveOptions::default(), &NoClock).unwrap();
    let out = simulate_hframe(&p, &d.xdm, &d.ydm, &xd).unwrap();
    let ey: Vec<f64> = yd.iter().zip(&out.y).map(|(a, b)| a - b).collect();
    let sim_rms = (ey.iter().map(|v| v * v).sum::<f64>() / ey.len() as f64).sqrt();
    assert!((sim_rms - d.residual_rms[1]).abs() < 1e-8, "{sim_rms} vs {}", d.residual_rms[1]);
}

#[test]
fn zero_references_give_zero_commands() {
    let p = plant();
    let z = vec![0.0; 81];
    let b = basis(80, 20);
    let o = SolveOptions::default();
    let results = [
        solve_standard_pair(&p, &z, &z, &b, &b, &o, &NoClock).unwrap(),
        solve_coupled_lpv(&p, &z, &z, &b, &b, &o, &NoClock).unwrap(),
        solve_decoupled_lpv(&p, &z, &z, &b, &b, &o, &NoClock).unwrap(),
    ];
    for r in results {
        let cp = &r.control_points;
        assert!(cp.px.iter().chain(&cp.py).chain(&r.xdm).chain(&r.ydm).all(|&v| v == 0.0));
    }
    let (xi, yi) = exact_inverse_reference(&p, &z, &z).unwrap();
    assert!(xi.iter().chain(&yi).all(|&v| v == 0.0));
}

#[test]
fn racking_free_plant_collapses_to_standard() {
    let mut p = plant();
    p.gxtheta = DiscreteTransferFunction::gain(0.0, TS).unwrap();
    let e = 150;
    let (xd, yd) = smooth_refs(e, 20.0, 6.0);
    let b = basis(e, 30);
    let o = SolveOptions::default();
    let s = solve_standard_pair(&p, &xd, &yd, &b, &b, &o, &NoClock).unwrap();
    let c = solve_coupled_lpv(&p, &xd, &yd, &b, &b, &o, &NoClock).unwrap();
    let d = solve_decoupled_lpv(&p, &xd, &yd, &b, &b, &o, &NoClock).unwrap();
    assert!(rel_diff(&c.xdm, &s.xdm) < 1e-9);
    assert!(rel_diff(&c.ydm, &s.ydm) < 1e-9);
    assert_eq!(d.xdm, s.xdm);
    assert_eq!(d.ydm, s.ydm);
}

#[test]
fn parked_x_axis_leaves_y_standard() {
    let p = plant();
    let e = 150;
    let (_, yd) = smooth_refs(e, 0.0, 6.0);
    let xd = vec![0.0; e + 1];
    let b = basis(e, 30);
    let o = SolveOptions::default();
    let s = solve_standard(&p.gyy, &yd, &b, &o, &NoClock).unwrap();
    let c = solve_coupled_lpv(&p, &xd, &yd, &b, &b, &o, &NoClock).unwrap();
    assert!(rel_diff(&c.ydm, &s.command) < 1e-9);
}

#[test]
fn solves_are_deterministic() {
    let p = plant();
    let e = 200;
    let (xd, yd) = smooth_refs(e, 20.0, 6.0);
    let b = basis(e, 50);
    let o = SolveOptions::default();
    let a = solve_coupled_lpv(&p, &xd, &yd, &b, &b, &o, &NoClock).unwrap();
    let c = solve_coupled_lpv(&p, &xd, &yd, &b, &b, &o, &NoClock).unwrap();
    assert_eq!(a, c);
    let u = filter_signal(&p.gxx, &a.xdm);
    assert_eq!(u, filter_signal(&p.gxx, &c.xdm));
}
