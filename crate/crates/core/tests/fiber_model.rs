use std::f64::consts::PI;
use std::sync::Arc;

use proptest::prelude::*;
use wedge_core::fiber::{fiber_inner, kappa_apply, ConeFunction, ConeGrid, FiberModel};
use wedge_core::linalg::{c, real, CVec, C64};

fn cvec(parts: &[(f64, f64)]) -> CVec {
    CVec::from_iterator(parts.len(), parts.iter().map(|&(a, b)| c(a, b)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    /// Parseval: the coefficient inner product equals the trapezoid rule on
    /// point values, which is exact for trigonometric polynomials.
    #[test]
    fn circle_inner_product_matches_point_values(
        u in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 10),
        v in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 10),
    ) {
        let model = FiberModel::circle(2, 2);
        let (u, v) = (cvec(&u), cvec(&v));
        let m = 32;
        let mut quad = C64::new(0.0, 0.0);
        for j in 0..m {
            let th = 2.0 * PI * j as f64 / m as f64;
            let (a, b) = (model.evaluate(&u, th), model.evaluate(&v, th));
            quad += a.iter().zip(b.iter()).map(|(x, y)| x * y.conj()).sum::<C64>();
        }
        quad *= real(2.0 * PI / m as f64);
        let ip = fiber_inner(&u, &v, &model).unwrap();
        prop_assert!((ip - quad).norm() < 1e-12 * (1.0 + quad.norm()));
        prop_assert!((fiber_inner(&v, &u, &model).unwrap() - ip.conj()).norm() < 1e-13);
    }

    #[test]
    fn dilation_preserves_norm_of_decaying_functions(rho in 0.2f64..5.0, a in 0.5f64..3.0) {
        let fiber = Arc::new(FiberModel::point(1));
        let grid = Arc::new(ConeGrid::log_uniform(1e-9, 200.0, 60.0).unwrap());
        let u = ConeFunction::from_fn(fiber, grid, |x| CVec::from_element(1, c(x * (-a * x).exp(), 0.0))).unwrap();
        let k = kappa_apply(&u, rho).unwrap();
        // closed form: int (rho x)^2 e^{-2 a rho x} rho dx = 1 / (4 a^3)
        let want = (1.0 / (4.0 * a.powi(3))).sqrt();
        prop_assert!((k.norm() - want).abs() < 1e-6 * want, "{} vs {want}", k.norm());
        prop_assert!((u.norm() - want).abs() < 1e-6 * want);
    }
}

#[test]
fn mode_layout_and_dimensions() {
    let m = FiberModel::circle(2, 3);
    assert_eq!(m.mode_numbers(), vec![-3, -2, -1, 0, 1, 2, 3]);
    assert_eq!(m.dim(), 14);
    let mut seen: Vec<usize> = m.mode_numbers().iter().flat_map(|&k| (0..2).map(move |i| (k, i))).map(|(k, i)| m.index(k, i)).collect();
    seen.sort();
    assert_eq!(seen, (0..14).collect::<Vec<_>>());
    assert_eq!(FiberModel::point(3).dim(), 3);
}

#[test]
fn single_mode_evaluates_to_exponential() {
    let m = FiberModel::circle(1, 2);
    let mut u = CVec::zeros(m.dim());
    u[m.index(2, 0)] = real(1.0);
    for th in [0.0, 0.3, 2.0] {
        assert!((m.evaluate(&u, th)[0] - c(0.0, 2.0 * th).exp()).norm() < 1e-14);
    }
}
