use wedge_core::checker::*;
use wedge_core::config::{presets, BoundaryKind, ProblemConfig};
use wedge_core::fiber::FiberModel;
use wedge_core::linalg::{c, max_abs, min_singular, real, CMat};
use wedge_core::models;
use wedge_core::operator::CoefField;

fn small(mut cfg: ProblemConfig, edge: usize) -> ProblemConfig {
    cfg.grids.edge_samples = edge;
    cfg
}

#[test]
fn sphere_points_are_unit_and_contain_axes() {
    for d in 1..=4 {
        let p = sphere_points(d, 50);
        assert!(p.len() >= 2 * d);
        for v in &p {
            let n: f64 = v.iter().map(|x| x * x).sum();
            assert!((n - 1.0).abs() < 1e-12);
        }
        assert!(p.iter().any(|v| v[0] == 1.0));
    }
}

#[test]
fn w_ellipticity_on_models() {
    // |xi + i eta| = 1 on the unit circle
    let (f, op) = models::dbar();
    let r = w_ellipticity_check(&op, &f, &[vec![0.0], vec![1.0]], 64, 1e-6).unwrap();
    assert!(r.pass);
    assert!((r.min_singular - 1.0).abs() < 1e-12);

    // sigma_x xi + sigma_z eta + sigma_y zeta has both singular values |nu|
    let (f, op) = models::dirac(2, true);
    let r = w_ellipticity_check(&op, &f, &[vec![0.0], vec![2.0]], 64, 1e-6).unwrap();
    assert!(r.pass);
    assert!((r.min_singular - 1.0).abs() < 1e-12);

    let (f, mut op) = models::dbar();
    op.a_x = CoefField::zero();
    let r = w_ellipticity_check(&op, &f, &[vec![0.0]], 16, 1e-6).unwrap();
    assert!(!r.pass);
    assert_eq!(r.min_singular, 0.0);
    assert_eq!(r.worst.xi.abs(), 1.0);
    assert_eq!(r.worst.eta, vec![0.0]);
}

/// Brute-force oracle: smallest singular value of the symbol over a dense
/// angle grid, for the 2D case.
#[test]
fn w_ellipticity_matches_dense_scan() {
    let (f, mut op) = models::dbar();
    op.a_y = vec![CoefField::constant(CMat::from_element(1, 1, c(0.3, 0.5)))];
    let r = w_ellipticity_check(&op, &f, &[vec![0.0]], 4000, 1e-6).unwrap();
    let mut best = f64::INFINITY;
    for k in 0..200000 {
        let t = 2.0 * std::f64::consts::PI * k as f64 / 200000.0;
        best = best.min((c(t.cos(), 0.0) + c(0.3, 0.5) * t.sin()).norm());
    }
    assert!((r.min_singular - best).abs() < 1e-5, "{} vs {best}", r.min_singular);
}

#[test]
fn dbar_battery_passes() {
    let b = run_condition_battery(&small(presets::dbar(BoundaryKind::Identity), 4)).unwrap();
    assert!(b.report.pass);
    let labels: Vec<_> = b.report.conditions.iter().map(|c| (c.label.as_str(), c.status)).collect();
    assert_eq!(labels[..3], [("(9.1)", Status::Pass), ("(9.2)", Status::Pass), ("(9.3)", Status::Pass)]);
    let sweep = b.sweep.unwrap();
    assert_eq!(sweep.component_dims, vec![1, 0]);
    assert!(sweep.rank_identity_holds());
    let wl = b.report.weight_line.unwrap();
    assert!(wl.rows.iter().all(|r| r.re == 0.0 && r.im == 0.0 && r.mult == 1 && r.chain_lengths == vec![1]));
}

#[test]
fn weight_line_root_fails_9_2() {
    let b = run_condition_battery(&small(presets::shifted(c(0.0, -0.5)), 2)).unwrap();
    assert!(!b.report.pass);
    let c2 = &b.report.conditions[1];
    assert_eq!(c2.label, "(9.2)");
    assert_eq!(c2.status, Status::Fail);
    assert!(c2.detail.contains("weight line"));
    assert_eq!(b.report.conditions[2].status, Status::Skipped);
}

#[test]
fn singular_symbol_fails_9_1() {
    let mut cfg = small(presets::dbar(BoundaryKind::Aps), 2);
    cfg.operator.a_y = vec![CoefField::constant(CMat::from_element(1, 1, real(1.0)))];
    let b = run_condition_battery(&cfg).unwrap();
    assert_eq!(b.report.conditions[0].status, Status::Fail);
    assert!(b.report.conditions[1..].iter().all(|c| c.status == Status::Skipped));
}

#[test]
fn flat_counterexample_fails_9_3() {
    let b = run_condition_battery(&small(presets::flat_counterexample(), 2)).unwrap();
    assert_eq!(b.report.conditions[2].status, Status::Fail);
    assert!(b.report.conditions[2].detail.contains("injectivity"));
}

#[test]
fn dbar_lopatinskii_and_aps() {
    let id = run_check(&small(presets::dbar(BoundaryKind::Identity), 4)).unwrap();
    let v = id.lopatinskii.as_ref().unwrap();
    assert!(!v.pass);
    assert_eq!(v.failing_components, vec!["eta>0".to_string()]);
    assert!(!id.pass);
    let ab = id.atiyah_bott.as_ref().unwrap();
    assert_eq!(ab.rows.iter().map(|r| r.dim_kernel).collect::<Vec<_>>(), vec![1, 0]);
    assert!(!ab.rank_condition);
    assert_eq!(ab.note, "Rank equality is necessary, not sufficient");

    let aps = run_check(&small(presets::dbar(BoundaryKind::Aps), 4)).unwrap();
    let v = aps.lopatinskii.as_ref().unwrap();
    assert!(v.pass, "{v:?}");
    assert!(aps.pass);
    assert_eq!(aps.aps.as_ref().unwrap().ranks, vec![1, 0]);
    for r in v.records.iter().filter(|r| r.component == 0) {
        assert!((r.min_singular.unwrap() - 1.0).abs() < 1e-10);
        assert!(r.scaling_deviation < 1e-6);
    }
}

#[test]
fn aps_projection_is_idempotent_with_kernel_range() {
    let cfg = small(presets::dirac(2, true), 4);
    let b = run_condition_battery(&cfg).unwrap();
    let sweep = b.sweep.unwrap();
    let aps = ApsProjection::construct(&sweep).unwrap();
    for (s, rec) in aps.samples.iter().zip(&sweep.records) {
        assert!(s.idempotency < 1e-10);
        // q fixes the kernel traces and kills their orthogonal complement
        assert!(max_abs(&(&s.q * &rec.kernel.traces - &rec.kernel.traces)) < 1e-10);
        let trace = &sweep.points[s.point].trace;
        for rho in [0.5, 3.0] {
            let q = aps.extended(sweep.samples.iter().position(|x| x.eta == s.eta && x.point == s.point).unwrap(), trace, rho);
            assert!(max_abs(&(&q * &q - &q)) < 1e-10);
        }
    }
    // dbar closed form: q = 1 on eta < 0, q = 0 on eta > 0
    let b = run_condition_battery(&small(presets::dbar(BoundaryKind::Aps), 2)).unwrap();
    let sweep = b.sweep.unwrap();
    let aps = ApsProjection::construct(&sweep).unwrap();
    for s in &aps.samples {
        let want = if s.eta[0] < 0.0 { 1.0 } else { 0.0 };
        assert!((s.q[(0, 0)] - real(want)).norm() < 1e-12);
    }
}

#[test]
fn dirac_with_matrix_condition() {
    let cfg = small(presets::dirac(2, true), 4);
    let r = run_check(&cfg).unwrap();
    assert!(r.battery.pass);
    let v = r.lopatinskii.as_ref().unwrap();
    assert!(v.pass, "{:?}", v.records);
    assert!(r.atiyah_bott.as_ref().unwrap().rank_condition);
    // oracle: for a = 0 the kernel trace of the zero mode is the eta-sign
    // eigenvector (1, +-i)/sqrt 2 of sigma_y, so B = [1, 0] has min singular value 1/sqrt 2
    // at y where the potential vanishes
    for rec in v.records.iter().filter(|r| (r.y[0] - std::f64::consts::FRAC_PI_2).abs() < 1e-12) {
        assert!((rec.min_singular.unwrap() - 0.5f64.sqrt()).abs() < 1e-6, "{rec:?}");
    }
    assert!(v.max_scaling_deviation < 1e-6);
}

#[test]
fn mismatched_condition_is_structural_failure() {
    let mut cfg = small(presets::dirac(2, true), 2);
    let n = FiberModel::circle(2, 2).dim();
    cfg.boundary_condition.as_mut().unwrap().b = vec![CMat::zeros(2, n)];
    let r = run_check(&cfg).unwrap();
    let v = r.lopatinskii.unwrap();
    assert!(!v.pass);
    assert!(v.records.iter().all(|r| !r.square));
}

#[test]
fn aps_self_test_on_passing_models() {
    for cfg in [presets::dbar(BoundaryKind::Aps), presets::jordan(), {
        let mut d = presets::dirac(2, true);
        d.boundary_condition = presets::dbar(BoundaryKind::Aps).boundary_condition;
        d
    }] {
        let r = run_check(&small(cfg, 3)).unwrap();
        assert!(r.battery.pass);
        assert!(r.lopatinskii.unwrap().pass);
    }
}

#[test]
fn lopatinskii_min_singular_equals_direct_svd() {
    // independent recomputation of sigma(B) restricted to K on one sample
    let cfg = small(presets::dirac(2, false), 2);
    let b = run_condition_battery(&cfg).unwrap();
    let sweep = b.sweep.unwrap();
    let v = lopatinskii_check(&cfg, &b.model, &sweep, None).unwrap();
    let bm = &cfg.boundary_condition.as_ref().unwrap().b[0];
    for (rec, nr) in v.records.iter().zip(&sweep.records) {
        let direct = min_singular(&(bm * &nr.ambient_span));
        assert!((rec.min_singular.unwrap() - direct).abs() < 1e-8);
    }
}
