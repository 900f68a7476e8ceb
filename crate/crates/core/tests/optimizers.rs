//! End-to-end optimizer behavior on the reference problems.

mod common;

use common::{filtered, problem};
use spinctrl::dynamics::{ControlSignal, FieldModel, Prism, TimeGrid};
use spinctrl::objective::{pmp_certificate, pmp_residual, default_dead_band};
use spinctrl::optimize::{
    gpm_optimize, ipmp_optimize, ipmp_optimize_observed, is_bang_bang, GpmSettings, IpmpSettings,
    Status,
};

#[test]
fn single_interval_gpm_beats_every_vertex() {
    let prism = Prism::cube(3.0, 6.0);
    for model in [filtered(1.0, [3.0; 3]), FieldModel::NoFilter] {
        // One interval must still resolve the dynamics: ‖H‖h ≈ 0.4.
        let mut pr = problem(1, 1, model, prism);
        pr.grid = TimeGrid::new(0.02, 1).unwrap();
        let u0 = ControlSignal::constant(pr.grid, [4.5; 3]);
        let report = gpm_optimize(&pr, &u0, &GpmSettings::default()).unwrap();
        let best_vertex = (0..8)
            .map(|bits: usize| {
                let v = std::array::from_fn(|i| if bits >> i & 1 == 1 { prism.upper[i] } else { prism.lower[i] });
                pr.cost(&ControlSignal::constant(pr.grid, v)).unwrap().value()
            })
            .fold(f64::NEG_INFINITY, f64::max);
        assert!(report.final_cost.value() >= best_vertex - 1e-9);
    }
}

#[test]
fn ipmp_iterates_are_bang_bang_and_fixed_points_satisfy_the_maximum_principle() {
    let prism = Prism::cube(3.0, 6.0);
    for p in [1, 2] {
        for model in [filtered(1.0, [3.0; 3]), filtered(10.0, [6.0; 3]), FieldModel::NoFilter] {
            let pr = problem(p, 200, model, prism);
            let u0 = ControlSignal::constant(pr.grid, [4.0, 5.0, 3.5]);
            let mut iterates = Vec::new();
            let report = ipmp_optimize_observed(&pr, &u0, &IpmpSettings::default(), |it| {
                iterates.push((it.iteration, it.control.clone()));
            })
            .unwrap();
            assert!(iterates.iter().filter(|(n, _)| *n > 0).all(|(_, u)| is_bang_bang(u, &prism)));
            if report.status == Status::Converged {
                let phi = &report.final_switching;
                assert_eq!(pmp_residual(phi, &report.final_control, &prism, default_dead_band(phi)), 0.0);
                let cert = pmp_certificate(phi, &report.final_control, &prism, 100, 17);
                assert!(cert.holds, "{cert:?}");
            }
        }
    }
}

#[test]
fn gpm_and_ipmp_agree_on_the_positive_prism() {
    let prism = Prism::cube(3.0, 6.0);
    let pr = problem(1, 200, filtered(1.0, [3.0; 3]), prism);
    let u0 = ControlSignal::constant(pr.grid, [3.0; 3]);
    let ipmp = ipmp_optimize(&pr, &u0, &IpmpSettings::default()).unwrap();
    let gpm = gpm_optimize(&pr, &u0, &GpmSettings::default()).unwrap();
    assert_eq!(ipmp.status, Status::Converged);
    assert_eq!(gpm.status, Status::Converged);
    assert!(ipmp.iterations <= 15 && gpm.iterations <= 60);
    let (a, b) = (ipmp.final_cost.value(), gpm.final_cost.value());
    assert!(((a - b) / a).abs() <= 1e-3);
    let dist = ipmp.final_control.distance(&gpm.final_control) / ipmp.final_control.l2_norm();
    assert!(dist <= 0.05, "relative control distance {dist}");
}

#[test]
fn very_fast_filter_approaches_the_unfiltered_optimum() {
    let prism = Prism::cube(3.0, 6.0);
    let settings = IpmpSettings::default();
    let plain = problem(1, 200, FieldModel::NoFilter, prism);
    let u0 = ControlSignal::constant(plain.grid, [3.0; 3]);
    let baseline = ipmp_optimize(&plain, &u0, &settings).unwrap();
    let v0 = baseline.final_control.values[0];
    let fast = problem(1, 200, filtered(1e3, v0), prism);
    let result = ipmp_optimize(&fast, &u0, &settings).unwrap();
    let (jf, jn) = (result.final_cost.value(), baseline.final_cost.value());
    assert!(((jn - jf) / jn).abs() <= 1e-3, "filtered {jf:e}, unfiltered {jn:e}");
}

#[test]
fn optimizers_are_deterministic() {
    let prism = Prism::cube(3.0, 6.0);
    let pr = problem(2, 100, filtered(2.0, [4.0; 3]), prism);
    let u0 = ControlSignal::constant(pr.grid, [6.0, 3.0, 6.0]);
    let a = gpm_optimize(&pr, &u0, &GpmSettings::default()).unwrap();
    let b = gpm_optimize(&pr, &u0, &GpmSettings::default()).unwrap();
    assert_eq!(a, b);
    let a = ipmp_optimize(&pr, &u0, &IpmpSettings::default()).unwrap();
    let b = ipmp_optimize(&pr, &u0, &IpmpSettings::default()).unwrap();
    assert_eq!(a, b);
}

