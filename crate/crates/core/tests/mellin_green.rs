use wedge_core::fiber::FiberModel;
use wedge_core::indicial::{adjoint_pencil, assemble_pencil, boundary_spectrum, build_trace_space, IndicialPencil, TraceElement, TraceSpace};
use wedge_core::linalg::{c, max_abs, real, CMat, CVec, C64, I};
use wedge_core::mellin::*;
use wedge_core::models;
use wedge_core::quadrature::Cutoff;

fn spaces(p: &IndicialPencil, fiber: &FiberModel) -> (TraceSpace, TraceSpace, IndicialPencil) {
    let ps = adjoint_pencil(p, fiber);
    let t = build_trace_space(p, &boundary_spectrum(p, Default::default()).unwrap()).unwrap();
    let ts = build_trace_space(&ps, &boundary_spectrum(&ps, Default::default()).unwrap()).unwrap();
    (t, ts, ps)
}

fn pure_log(sigma: C64, ell: usize) -> TraceElement {
    let mut coeffs = vec![CVec::from_element(1, real(0.0)); ell + 1];
    coeffs[ell] = CVec::from_element(1, real(1.0));
    TraceElement { sigma, root_index: 0, coeffs }
}

#[test]
fn singular_parts_match_numerical_mellin_transform() {
    let offsets = [c(0.3, 1.2), c(-0.7, 1.0), c(1.5, 2.0), c(0.0, 1.5), c(-1.2, 0.8)];
    for sigma0 in [real(0.0), c(0.0, 0.25), c(0.4, -0.1)] {
        for ell in 0..=2 {
            let e = pure_log(sigma0, ell);
            let sp = mellin_singular(&e, 0.5).unwrap();
            assert_eq!(sp.laurent.len(), ell + 1);
            let top = [1.0, -1.0, 2.0][ell];
            assert!((sp.laurent[ell][0] - real(top)).norm() < 1e-15);
            for off in offsets {
                let sigma = sigma0 + off;
                let decay = off.im;
                let full = mellin_quadrature(&|x| e.eval(x), 1, sigma, decay, &Cutoff::REFERENCE);
                let entire = mellin_entire_part(&|x| e.eval(x), 1, sigma, &Cutoff::REFERENCE);
                let closed = sp.eval(sigma);
                let rel = (&full - &entire - &closed).norm() / closed.norm();
                assert!(rel <= 1e-8, "sigma0={sigma0} ell={ell} sigma={sigma}: {rel:e}");
            }
        }
    }
}

#[test]
fn constant_transform_is_i_over_sigma() {
    let e = pure_log(real(0.0), 0);
    let sigma = c(0.5, 1.0);
    let v = mellin_singular(&e, 0.5).unwrap().eval(sigma)[0];
    assert!((v - I / sigma).norm() < 1e-15);
}

#[test]
fn dbar_pairing_oracles() {
    let (fiber, op) = models::dbar();
    let p = assemble_pencil(&op, &fiber, &[0.0]).unwrap();
    let (t, ts, _) = spaces(&p, &fiber);
    let rect = default_contour(&t, &ts, 0.05);
    let res = green_pairing(&t, &ts, &p, &fiber, &rect, PairingMode::Residue).unwrap().beta;
    let quad = green_pairing(&t, &ts, &p, &fiber, &rect, PairingMode::Quadrature).unwrap().beta;
    let direct = green_form_direct(&t, &ts, &p, &fiber, &Cutoff::REFERENCE, &Cutoff::REFERENCE);
    let u0 = t.basis[0].eval(1.0)[0];
    let v0 = ts.basis[0].eval(1.0)[0];
    // i u(0) conj(v(0)) for the half-line Green formula
    let classical = I * u0 * v0.conj();
    assert!((res[(0, 0)] - classical).norm() < 1e-10);
    assert!((quad[(0, 0)] - res[(0, 0)]).norm() < 1e-8);
    assert!((direct[(0, 0)] - classical).norm() < 1e-12);
}

#[test]
fn zero_vector_pairs_to_zero() {
    let (fiber, op) = models::dbar();
    let p = assemble_pencil(&op, &fiber, &[0.0]).unwrap();
    let (t, ts, _) = spaces(&p, &fiber);
    let b = green_pairing(&t, &ts, &p, &fiber, &default_contour(&t, &ts, 0.05), PairingMode::Residue)
        .unwrap()
        .beta;
    let zero = CVec::zeros(1);
    let one = CVec::from_element(1, real(1.0));
    assert_eq!((zero.transpose() * &b * one.map(|z| z.conj()))[(0, 0)], real(0.0));
}

fn check_model(p: &IndicialPencil, fiber: &FiberModel) {
    let (t, ts, _) = spaces(p, fiber);
    let rect = default_contour(&t, &ts, 0.05);
    let res = green_pairing(&t, &ts, p, fiber, &rect, PairingMode::Residue).unwrap().beta;
    let quad = green_pairing(&t, &ts, p, fiber, &rect, PairingMode::Quadrature).unwrap().beta;
    assert!(max_abs(&(&quad - &res)) <= 1e-8, "quadrature vs residue {:e}", max_abs(&(&quad - &res)));
    let direct = green_form_direct(&t, &ts, p, fiber, &Cutoff::REFERENCE, &Cutoff::new(0.3, 0.9));
    assert!(max_abs(&(&direct - &res)) <= 1e-9, "direct vs residue {:e}", max_abs(&(&direct - &res)));
    assert!(nondegeneracy(&res) >= 1e-6);
    assert!(skew_adjoint_check(&t, &ts, &res) <= 1e-8);
    assert!(sharp_spectrum_check(&t, &ts, &res).unwrap() <= 1e-8);
}

#[test]
fn jordan_pairing_is_consistent() {
    let (fiber, op) = models::jordan();
    check_model(&assemble_pencil(&op, &fiber, &[0.0]).unwrap(), &fiber);
}

#[test]
fn shifted_root_pairing_is_consistent() {
    let (fiber, op) = models::shifted_euler(c(0.0, -0.25));
    let p = assemble_pencil(&op, &fiber, &[0.0]).unwrap();
    check_model(&p, &fiber);
    let (t, ts, _) = spaces(&p, &fiber);
    let b = green_pairing(&t, &ts, &p, &fiber, &default_contour(&t, &ts, 0.05), PairingMode::Residue)
        .unwrap()
        .beta;
    assert!(skew_adjoint_check(&t, &ts, &b) <= 1e-10);
}

#[test]
fn dirac_pairing_is_consistent() {
    for y in [0.0, 1.0, std::f64::consts::FRAC_PI_2] {
        let (fiber, op) = models::dirac(4, true);
        check_model(&assemble_pencil(&op, &fiber, &[y]).unwrap(), &fiber);
    }
}

#[test]
fn pairing_does_not_depend_on_rectangle() {
    let (fiber, op) = models::jordan();
    let p = assemble_pencil(&op, &fiber, &[0.0]).unwrap();
    let (t, ts, _) = spaces(&p, &fiber);
    let rects = [
        default_contour(&t, &ts, 0.05),
        default_contour(&t, &ts, 0.3),
        RectContour { re_min: -2.0, re_max: 0.5, im_min: -0.45, im_max: 0.2, n_quad: 400 },
    ];
    for mode in [PairingMode::Residue, PairingMode::Quadrature] {
        let d = pairing_rectangle_independence(&t, &ts, &p, &fiber, &rects, mode).unwrap();
        assert!(d <= 1e-8, "{mode:?}: {d:e}");
    }
    assert_eq!(pairing_rectangle_independence(&t, &ts, &p, &fiber, &rects[..1], PairingMode::Residue).unwrap(), 0.0);
}

#[test]
fn pairing_does_not_depend_on_cutoffs() {
    let (fiber, op) = models::shifted_euler(c(0.1, -0.2));
    let p = assemble_pencil(&op, &fiber, &[0.0]).unwrap();
    let (t, ts, _) = spaces(&p, &fiber);
    let rect = default_contour(&t, &ts, 0.05);
    let a = green_pairing_with_cutoffs(&t, &ts, &p, &fiber, &rect, &Cutoff::REFERENCE, &Cutoff::REFERENCE).unwrap();
    let b = green_pairing_with_cutoffs(&t, &ts, &p, &fiber, &rect, &Cutoff::new(0.2, 0.7), &Cutoff::new(0.6, 1.8)).unwrap();
    assert!(max_abs(&(&a - &b)) <= 1e-8, "{:e}", max_abs(&(&a - &b)));
    let res = green_pairing(&t, &ts, &p, &fiber, &rect, PairingMode::Residue).unwrap().beta;
    assert!(max_abs(&(&a - &res)) <= 1e-8);
}

#[test]
fn too_tight_contour_is_an_error() {
    let (fiber, op) = models::dbar();
    let p = assemble_pencil(&op, &fiber, &[0.0]).unwrap();
    let (t, ts, _) = spaces(&p, &fiber);
    let rect = RectContour { re_min: -1e-9, re_max: 1.0, im_min: -0.1, im_max: 0.1, n_quad: 50 };
    assert!(green_pairing(&t, &ts, &p, &fiber, &rect, PairingMode::Residue).is_err());
    let _ = CMat::zeros(0, 0);
}
