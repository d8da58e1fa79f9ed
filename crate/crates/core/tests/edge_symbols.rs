mod common;

use std::f64::consts::PI;
use std::sync::Arc;

use common::{physical_norm, random_edge_function, random_section, trace_of};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wedge_core::fiber::ConeGrid;
use wedge_core::linalg::{c, max_abs, real, CMat, CVec, C64};
use wedge_core::models;
use wedge_core::quadrature::{composite, Cutoff};
use wedge_core::symbols::*;

#[test]
fn trivial_action_norm_is_fourier_multiplier_norm() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..20 {
        let band = rng.gen_range(1..12);
        let u = random_edge_function(&mut rng, band, 3);
        // <eta>^{2s} for s = 0, 1, 2 expands into 1, 1 + eta^2, 1 + 2 eta^2 + eta^4
        for (s, w) in [(0.0, vec![1.0]), (1.0, vec![1.0, 1.0]), (2.0, vec![1.0, 2.0, 1.0])] {
            let a = edge_sobolev_norm(&u, s, Action::Trivial).unwrap();
            let b = physical_norm(&u, &w);
            assert!((a - b).abs() <= 1e-10 * b, "s = {s}: {a} vs {b}");
        }
    }
}

#[test]
fn dilation_norm_of_single_mode() {
    let grid = Arc::new(ConeGrid::log_uniform(1e-12, 60.0, 40.0).unwrap());
    let space = EdgeValueSpace::Cone { grid: grid.clone(), rank: 1, weight_t: 1.0 };
    for k in [0i64, 3, 10] {
        let band = k.unsigned_abs() as usize;
        let profile = CVec::from_fn(grid.len(), |j, _| real((-grid.nodes[j]).exp()));
        let coeffs = (-(band as i64)..=band as i64)
            .map(|e| if e == k { profile.clone() } else { CVec::zeros(grid.len()) })
            .collect();
        let u = EdgeFunction::new(band, coeffs, space.clone()).unwrap();
        for s in [0.0, 0.5, 1.0] {
            let got = edge_sobolev_norm(&u, s, Action::Dilation).unwrap();
            // 2 pi <k>^{2s} int <<k> x>^2 e^{-2x} dx by Gauss-Legendre panels
            let j = japanese(k as f64);
            let integral: f64 =
                composite(0.0, 60.0, 60, 20).iter().map(|&(x, w)| w * (1.0 + (j * x).powi(2)) * (-2.0 * x).exp()).sum();
            let want = (2.0 * PI * j.powf(2.0 * s) * integral).sqrt();
            assert!((got - want).abs() <= 1e-8 * want, "k = {k}, s = {s}: {got} vs {want}");
        }
    }
    // the action matters: trivial and dilation differ for k != 0
    let band = 2;
    let coeffs = (0..5).map(|i| CVec::from_fn(grid.len(), |j, _| real(if i == 4 { (-grid.nodes[j]).exp() } else { 0.0 }))).collect();
    let u = EdgeFunction::new(band, coeffs, space).unwrap();
    assert!(edge_sobolev_norm(&u, 0.0, Action::Dilation).unwrap() > 1.5 * edge_sobolev_norm(&u, 0.0, Action::Trivial).unwrap());
}

#[test]
fn dilation_needs_cone_values() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let u = random_edge_function(&mut rng, 2, 2);
    assert!(edge_sobolev_norm(&u, 1.0, Action::Dilation).is_err());
}

proptest! {
    #[test]
    fn sobolev_norms_are_monotone_in_s(seed in 0u64..1000, s1 in -2.0f64..3.0, ds in 0.0f64..2.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let u = random_edge_function(&mut rng, 6, 2);
        let lo = edge_sobolev_norm(&u, s1, Action::Trivial).unwrap();
        let hi = edge_sobolev_norm(&u, s1 + ds, Action::Trivial).unwrap();
        prop_assert!(hi >= lo * (1.0 - 1e-14));
    }

    #[test]
    fn bracket_bounds(r in -50.0f64..50.0, r0 in 1.1f64..5.0) {
        let b = MetricBracket::new(4.0, 1.0, r0).unwrap();
        prop_assert!(b.bracket(r) >= 1.0);
        if r.abs() >= r0 {
            prop_assert_eq!(b.bracket(r), r.abs());
        }
    }
}

#[test]
fn bracket_power_has_exact_slopes() {
    let r = symbol_estimate_check(&BracketPower { mu: 1.5, dim: 2 }, 1.5, 2, &EstimateOptions::default()).unwrap();
    assert!(r.pass);
    for e in &r.entries {
        let want = if e.alpha > 0 { None } else { Some(1.5 - e.beta as f64) };
        match want {
            Some(w) => assert!((e.slope.unwrap() - w).abs() < 1e-2, "{e:?}"),
            // y-derivatives of a y-independent symbol vanish
            None => assert!(e.slope.is_none()),
        }
    }
    let strict = symbol_estimate_check(&BracketPower { mu: 1.5, dim: 1 }, 1.0, 0, &EstimateOptions::default()).unwrap();
    assert!(!strict.pass);
}

#[test]
fn cutoff_symbol_orders() {
    let b = MetricBracket::default();
    let point = CutoffSymbol::at_point(b, EXTENSION_CUTOFF, 0.1);
    let r = symbol_estimate_check(&point, -4.0, 2, &EstimateOptions::default()).unwrap();
    assert!(r.pass);
    assert!(r.entries.iter().all(|e| e.slope.is_none()));

    let grid = Arc::new(ConeGrid::log_uniform(1e-7, 2.0, 30.0).unwrap());
    let cone = CutoffSymbol::on_cone(b, EXTENSION_CUTOFF, grid);
    let r = symbol_estimate_check(&cone, -0.5, 1, &EstimateOptions::default()).unwrap();
    assert!(r.pass, "{:?}", r.entries.iter().map(|e| e.slope).collect::<Vec<_>>());
    for e in r.entries.iter().filter(|e| e.alpha == 0) {
        assert!((e.slope.unwrap() - (-0.5 - e.beta as f64)).abs() < 0.05, "{e:?}");
    }
}

#[test]
fn complete_boundary_symbol_has_order_zero() {
    let (fiber, op) = models::dbar();
    let grid = Arc::new(ConeGrid::log_uniform(1e-3, 30.0, 6.0).unwrap());
    let p = BoundarySymbol::new(op, Arc::new(fiber), grid, false).unwrap();
    let r = symbol_estimate_check(&p, 0.0, 1, &EstimateOptions::default()).unwrap();
    assert!(r.pass);
    let s = r.entries.iter().find(|e| e.alpha == 0 && e.beta == 0).unwrap().slope.unwrap();
    assert!(s.abs() < 0.05, "{s}");
}

#[test]
fn twisted_homogeneity_of_model_symbols() {
    let samples: Vec<(f64, f64)> = [(0.0, 1.0), (1.0, -2.5), (2.0, 0.7)].to_vec();
    let (fiber, op) = models::dirac(1, true);
    let grid = Arc::new(ConeGrid::log_uniform(1e-3, 20.0, 6.0).unwrap());
    let normal = BoundarySymbol::new(op, Arc::new(fiber), grid.clone(), true).unwrap();
    assert!(twisted_homog_check(&normal, 1.0, &samples) <= 1e-8);

    for model in [models::dbar(), models::jordan(), models::shifted_euler(c(0.1, -0.2))] {
        let e = ExtensionSymbol::new(trace_of(model), EXTENSION_CUTOFF, grid.clone());
        let r = twisted_homog_check(&e, 0.0, &samples);
        assert!(r <= 1e-8, "{r:e}");
    }
    let constant = FnSymbol { f: |_, _| CMat::identity(2, 2) * real(3.0), mu: 0.0 };
    assert_eq!(twisted_homog_check(&constant, 0.0, &samples), 0.0);
}

#[test]
fn cutoff_derivatives_match_closed_forms() {
    let b = MetricBracket::default();
    let w = EXTENSION_CUTOFF;
    for &(x, y, eta) in &[(0.05, 0.3, 3.0), (0.1, 2.0, -2.2), (0.01, 1.0, 30.0), (0.2, 4.0, 1.3), (0.3, 0.0, 0.9)] {
        let (xdx, deta) = cutoff_symbol_derivatives(&b, &w, x, y, eta);
        let f = |xx: f64, ee: f64| w.eval(xx * b.eta_bracket(y, ee));
        let h = 1e-6;
        let fd_x = x * (f(x + h * x, eta) - f(x - h * x, eta)) / (2.0 * h * x);
        let fd_e = (f(x, eta + h) - f(x, eta - h)) / (2.0 * h);
        assert!((fd_x - xdx).abs() < 1e-6, "{x} {y} {eta}");
        assert!((fd_e - deta).abs() < 1e-6, "{x} {y} {eta}");
    }
}

#[test]
fn extension_support_and_boundary_limit() {
    let b = MetricBracket::default();
    for model in [models::dbar(), models::jordan()] {
        let t = trace_of(model);
        let f = random_section(t.dim(), 16, 11);
        let xs: Vec<f64> = (0..200).map(|k| 0.3 + 0.005 * k as f64).collect();
        let u = extension_apply(&f, &t, &b, &EXTENSION_CUTOFF, &xs, 64).unwrap();
        assert!(u.warning.is_none());
        for vals in &u.values {
            for (i, &x) in xs.iter().enumerate() {
                if x >= C0 {
                    assert!(vals.column(i).iter().all(|z| *z == C64::new(0.0, 0.0)));
                }
            }
        }
        let errs = boundary_limit_errors(&f, &t, &b, &EXTENSION_CUTOFF, &[1e-1, 1e-2, 1e-3], 128);
        assert!(errs[0] > errs[1] && errs[1] > errs[2], "{errs:?}");
        assert!(errs[2] <= 1e-3);
    }
}

#[test]
fn extension_of_constant_section_is_cutoff_profile() {
    let t = trace_of(models::dbar());
    let f = TraceSection::from_coeffs(0, CMat::from_element(1, 1, c(0.5, -1.0))).unwrap();
    let b = MetricBracket::default();
    for &x in &[1e-3, 0.1, 0.2, 0.3, 0.45, 0.6] {
        for &y in &[0.0, 1.0, 3.0] {
            let u = extension_value(&f, &t, &b, &EXTENSION_CUTOFF, x, y);
            let want = t.eval(&CVec::from_element(1, c(0.5, -1.0)), x) * real(EXTENSION_CUTOFF.eval(x));
            assert!((u - want).norm() < 1e-15);
        }
    }
}

#[test]
fn extension_trace_round_trip() {
    let b = MetricBracket::default();
    for model in [models::dbar(), models::jordan(), models::shifted_euler(c(0.0, 0.3))] {
        let t = trace_of(model);
        let f = random_section(t.dim(), 16, 5);
        let grid = ConeGrid::log_uniform(1e-6, 0.6, 20.0).unwrap();
        let u = extension_apply(&f, &t, &b, &EXTENSION_CUTOFF, &grid.nodes, 64).unwrap();
        let back = collar_trace(&u, &t, (1e-5, 1e-3), 16).unwrap();
        let err = max_abs(&(&back.coeffs - &f.coeffs));
        assert!(err <= 1e-6, "{err:e}");
    }
}

#[test]
fn truncated_input_warns() {
    let t = trace_of(models::dbar());
    let m = 64;
    let samples = CMat::from_fn(1, m, |_, j| real(1.0 / (1.2 - (2.0 * PI * j as f64 / m as f64).cos())));
    let f = TraceSection::from_samples(&samples, 4).unwrap();
    assert!(f.tail_mass > 1e-3);
    let u = extension_apply(&f, &t, &MetricBracket::default(), &EXTENSION_CUTOFF, &[0.1], 16).unwrap();
    assert!(u.warning.unwrap().contains("tail mass"));
    assert!(extension_apply(&f, &t, &MetricBracket::default(), &Cutoff::REFERENCE, &[0.1], 16).is_err());
}

#[test]
fn leibniz_trivial_cases_are_exact() {
    let a_eta = FnSymbol { f: |_, e: f64| CMat::from_element(1, 1, real(japanese(e).sqrt())), mu: 0.5 };
    let a_y = FnSymbol { f: |y: f64, _| CMat::from_element(1, 1, real(2.0 + y.cos())), mu: 0.0 };
    let freqs = [8, 16, 32, 64];
    let r = leibniz_remainder_check(&a_y, &a_eta, 1, &freqs, 256).unwrap();
    assert!(r.remainders.iter().all(|&v| v < 1e-12), "{:?}", r.remainders);
    let r = leibniz_remainder_check(&a_y, &a_y, 1, &freqs, 256).unwrap();
    assert!(r.slope.is_none() && r.pass);
}

#[test]
fn leibniz_remainder_of_cutoff_symbol_decays() {
    let grid = Arc::new(ConeGrid::log_uniform(1e-6, 1.0, 20.0).unwrap());
    let a1 = CutoffSymbol::on_cone(MetricBracket::default(), EXTENSION_CUTOFF, grid);
    let a2 = FnSymbol { f: |y: f64, _| CMat::from_element(1, 1, real(2.0 + y.cos())), mu: 0.0 };
    let r = leibniz_remainder_check(&a1, &a2, 1, &[8, 16, 32, 64, 128], 512).unwrap();
    assert!(r.pass, "{r:?}");
    let (s, sf) = (r.slope.unwrap(), r.slope_fine.unwrap());
    assert!(s <= -0.5 - 1.0 + 0.2);
    assert!((s - sf).abs() < 1e-6);
    // the second term of the expansion removes the leading remainder
    let r2 = leibniz_remainder_check(&a1, &a2, 2, &[8, 16, 32, 64, 128], 512).unwrap();
    assert!(r2.remainders[4] < r.remainders[4]);
}

#[test]
fn rough_sampler_is_a_differentiation_error() {
    let noisy = FnSymbol {
        f: |_, e: f64| CMat::from_element(1, 1, real(1.0 + 1e-3 * ((e * 1e7).sin()))),
        mu: 0.0,
    };
    assert!(symbol_estimate_check(&noisy, 0.0, 1, &EstimateOptions::default()).is_err());
}
