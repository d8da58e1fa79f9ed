//! Oracles shared by the integration targets.
#![allow(dead_code)]

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wedge_core::fiber::FiberModel;
use wedge_core::indicial::{assemble_pencil, boundary_spectrum, build_trace_space, TraceSpace};
use wedge_core::linalg::{CMat, CVec, C64};
use wedge_core::operator::WedgeOp;
use wedge_core::symbols::{EdgeFunction, EdgeValueSpace, TraceSection};

pub fn trace_of(model: (FiberModel, WedgeOp)) -> TraceSpace {
    let (fiber, op) = model;
    let p = assemble_pencil(&op, &fiber, &[0.0]).unwrap();
    build_trace_space(&p, &boundary_spectrum(&p, Default::default()).unwrap()).unwrap()
}

pub fn random_edge_function(rng: &mut ChaCha8Rng, band: usize, dim: usize) -> EdgeFunction {
    let coeffs = (0..2 * band + 1)
        .map(|_| CVec::from_fn(dim, |_, _| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))))
        .collect();
    EdgeFunction::new(band, coeffs, EdgeValueSpace::Euclidean(dim)).unwrap()
}

/// `int_0^{2pi} sum_k c_k |u^{(k)}(y)|^2 dy` from physical-space samples of the
/// derivatives; the trapezoid rule is exact for these trigonometric polynomials.
pub fn physical_norm(u: &EdgeFunction, weights: &[f64]) -> f64 {
    let m = 8 * (u.band + 1);
    let mut acc = 0.0;
    for j in 0..m {
        let y = 2.0 * PI * j as f64 / m as f64;
        for (order, &w) in weights.iter().enumerate() {
            let mut d = CVec::zeros(u.space.dim());
            for (eta, cf) in u.frequencies().zip(&u.coeffs) {
                let factor = C64::new(0.0, eta as f64).powi(order as i32) * C64::new(0.0, eta as f64 * y).exp();
                d += cf * factor;
            }
            acc += w * d.norm_squared();
        }
    }
    (acc * 2.0 * PI / m as f64).sqrt()
}

pub fn random_section(dim: usize, band: usize, seed: u64) -> TraceSection {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let coeffs = CMat::from_fn(dim, 2 * band + 1, |_, _| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
    TraceSection::from_coeffs(band, coeffs).unwrap()
}
