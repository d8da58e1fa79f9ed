//! Closed-form model operators used by tests, examples and the demo.

use crate::fiber::FiberModel;
use crate::linalg::{c, real, CMat};
use crate::operator::{CoefField, WedgeOp};

pub fn pauli_x() -> CMat {
    CMat::from_row_slice(2, 2, &[real(0.0), real(1.0), real(1.0), real(0.0)])
}

pub fn pauli_y() -> CMat {
    CMat::from_row_slice(2, 2, &[real(0.0), c(0.0, -1.0), c(0.0, 1.0), real(0.0)])
}

pub fn pauli_z() -> CMat {
    CMat::from_row_slice(2, 2, &[real(1.0), real(0.0), real(0.0), real(-1.0)])
}

fn scalar(z: crate::linalg::C64) -> CMat {
    CMat::from_element(1, 1, z)
}

/// `D_x + i D_y` on the half-line times a circle edge.
pub fn dbar() -> (FiberModel, WedgeOp) {
    let op = WedgeOp {
        rank: 1,
        edge_dim: 1,
        a_x: CoefField::constant(scalar(real(1.0))),
        a_y: vec![CoefField::constant(scalar(c(0.0, 1.0)))],
        a_z: None,
        a_0: CoefField::zero(),
    };
    (FiberModel::point(1), op)
}

/// `x^{-1}(xD_x + b) + i D_y`: single indicial root at `sigma = -b`.
pub fn shifted_euler(b: crate::linalg::C64) -> (FiberModel, WedgeOp) {
    let (fiber, mut op) = dbar();
    op.a_0 = CoefField::constant(scalar(b));
    (fiber, op)
}

/// Pencil `(I, [[0,1],[0,0]])`: a length-two Jordan chain at `sigma = 0`.
pub fn jordan() -> (FiberModel, WedgeOp) {
    let id = CMat::identity(2, 2);
    let nil = CMat::from_row_slice(2, 2, &[real(0.0), real(1.0), real(0.0), real(0.0)]);
    let op = WedgeOp {
        rank: 2,
        edge_dim: 1,
        a_x: CoefField::constant(id.clone()),
        a_y: vec![CoefField::constant(id * c(0.0, 1.0))],
        a_z: None,
        a_0: CoefField::constant(nil),
    };
    (FiberModel::point(2), op)
}

/// Two-component Dirac operator on the cone over a circle fiber:
/// `sigma_x xD_x + sigma_y D_theta + sigma_z xD_y`, optionally with the
/// edge-dependent potential `0.1 cos(y)`.
pub fn dirac(modes: usize, potential: bool) -> (FiberModel, WedgeOp) {
    let mut a_0 = CoefField::zero();
    if potential {
        let half = CMat::identity(2, 2) * real(0.05);
        a_0 = a_0.with_term(vec![1], 0, half.clone()).with_term(vec![-1], 0, half);
    }
    let op = WedgeOp {
        rank: 2,
        edge_dim: 1,
        a_x: CoefField::constant(pauli_x()),
        a_y: vec![CoefField::constant(pauli_z())],
        a_z: Some(CoefField::constant(pauli_y())),
        a_0,
    };
    (FiberModel::circle(2, modes), op)
}

/// `dbar` plus a second component `D_x + i D_y + i x^{-1}`, whose decaying
/// solution `x e^{eta x}` vanishes at the tip faster than any trace
/// function: the minimal-domain normal family is not injective for `eta < 0`.
pub fn flat_counterexample() -> (FiberModel, WedgeOp) {
    let id = CMat::identity(2, 2);
    let b = CMat::from_row_slice(2, 2, &[real(0.0), real(0.0), real(0.0), c(0.0, 1.0)]);
    let op = WedgeOp {
        rank: 2,
        edge_dim: 1,
        a_x: CoefField::constant(id.clone()),
        a_y: vec![CoefField::constant(id * c(0.0, 1.0))],
        a_z: None,
        a_0: CoefField::constant(b),
    };
    (FiberModel::point(2), op)
}
