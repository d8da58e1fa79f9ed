//! Model geometry: the fiber `Z` (a point or a circle), the radial cone
//! `[0, x_max] x Z`, functions on it and the normalized dilation action
//! `(kappa_rho u)(x) = rho^{1/2} u(rho x)`.
//!
//! Circle fibers are stored in Fourier coordinates, modes `-n..=n`, one
//! `rank`-sized block per mode. Index of `(mode k, component c)` is
//! `(k + n) * rank + c`.

use std::f64::consts::PI;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Result, WedgeError};
use crate::linalg::{real, CMat, CVec, C64};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FiberKind {
    Point,
    Circle,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FiberModel {
    pub kind: FiberKind,
    pub rank: usize,
    pub modes: usize,
    /// Quadrature weights on the fiber grid (`2 modes + 1` equispaced nodes for
    /// a circle, a single node for a point).
    pub quad_weights: Vec<f64>,
}

impl FiberModel {
    pub fn build(kind: FiberKind, rank: usize, modes: usize) -> Result<Self> {
        if rank == 0 {
            return Err(WedgeError::Config("fiber rank must be at least 1".into()));
        }
        match kind {
            FiberKind::Point => {
                if modes != 0 {
                    return Err(WedgeError::Config(format!(
                        "point fiber requires modes = 0, got {modes}"
                    )));
                }
                Ok(Self { kind, rank, modes, quad_weights: vec![1.0] })
            }
            FiberKind::Circle => {
                let nodes = 2 * modes + 1;
                let w = 2.0 * PI / nodes as f64;
                Ok(Self { kind, rank, modes, quad_weights: vec![w; nodes] })
            }
        }
    }

    pub fn point(rank: usize) -> Self {
        Self::build(FiberKind::Point, rank, 0).expect("valid point fiber")
    }

    pub fn circle(rank: usize, modes: usize) -> Self {
        Self::build(FiberKind::Circle, rank, modes).expect("valid circle fiber")
    }

    pub fn grid_nodes(&self) -> usize {
        self.quad_weights.len()
    }

    pub fn theta_nodes(&self) -> Vec<f64> {
        let n = self.grid_nodes();
        (0..n).map(|j| 2.0 * PI * j as f64 / n as f64).collect()
    }

    /// Number of Fourier modes (`2n + 1`) or one for a point.
    pub fn mode_count(&self) -> usize {
        self.grid_nodes()
    }

    pub fn dim(&self) -> usize {
        self.rank * self.mode_count()
    }

    pub fn total_measure(&self) -> f64 {
        self.quad_weights.iter().sum()
    }

    /// Fourier mode numbers in storage order.
    pub fn mode_numbers(&self) -> Vec<i64> {
        let n = self.modes as i64;
        (-n..=n).collect()
    }

    pub fn index(&self, mode: i64, comp: usize) -> usize {
        ((mode + self.modes as i64) as usize) * self.rank + comp
    }

    /// Weight of each discrete coordinate in the `L^2(Z)` inner product.
    /// Fourier coordinates on the unit circle carry `2 pi` by Parseval.
    pub fn coordinate_weight(&self) -> f64 {
        match self.kind {
            FiberKind::Point => self.quad_weights[0],
            FiberKind::Circle => 2.0 * PI,
        }
    }

    pub fn gram(&self) -> CMat {
        CMat::identity(self.dim(), self.dim()) * real(self.coordinate_weight())
    }

    /// Adjoint of a fiber operator with respect to the fiber inner product.
    pub fn adjoint(&self, m: &CMat) -> CMat {
        // The Gram matrix is a multiple of the identity in these coordinates.
        m.adjoint()
    }

    /// Point values at angle `theta` of a discretized fiber vector.
    pub fn evaluate(&self, u: &CVec, theta: f64) -> CVec {
        let mut out = CVec::zeros(self.rank);
        for k in self.mode_numbers() {
            let ph = C64::from_polar(1.0, k as f64 * theta);
            for cpt in 0..self.rank {
                out[cpt] += u[self.index(k, cpt)] * ph;
            }
        }
        out
    }
}

/// Sesquilinear fiber inner product, conjugate-linear in the second slot.
pub fn fiber_inner(u: &CVec, v: &CVec, model: &FiberModel) -> Result<C64> {
    let n = model.dim();
    if u.len() != n {
        return Err(WedgeError::Shape { expected: n, got: u.len() });
    }
    if v.len() != n {
        return Err(WedgeError::Shape { expected: n, got: v.len() });
    }
    let s: C64 = u.iter().zip(v.iter()).map(|(a, b)| a * b.conj()).sum();
    Ok(s * model.coordinate_weight())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    Collocation,
    Shooting,
}

/// Radial grid on the truncated cone, uniform in `t = ln x`.
#[derive(Clone, Debug, PartialEq)]
pub struct ConeGrid {
    pub nodes: Vec<f64>,
    pub x_max: f64,
    pub scheme: Scheme,
    /// Step in `ln x`.
    pub log_step: f64,
}

impl ConeGrid {
    /// `per_unit_log` nodes per unit of `ln x` (rounded so both ends are hit).
    pub fn log_uniform(x_min: f64, x_max: f64, per_unit_log: f64) -> Result<Self> {
        if !(x_min > 0.0 && x_max > x_min && per_unit_log > 0.0) {
            return Err(WedgeError::Config(format!(
                "invalid cone grid: x_min={x_min}, x_max={x_max}, density={per_unit_log}"
            )));
        }
        let span = (x_max / x_min).ln();
        let steps = (span * per_unit_log).ceil().max(2.0) as usize;
        let h = span / steps as f64;
        let t0 = x_min.ln();
        let mut nodes: Vec<f64> = (0..=steps).map(|j| (t0 + h * j as f64).exp()).collect();
        *nodes.last_mut().unwrap() = x_max;
        Ok(Self { nodes, x_max, scheme: Scheme::Shooting, log_step: h })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn x_min(&self) -> f64 {
        self.nodes[0]
    }

    /// Same node density, every interval split in two.
    pub fn refined(&self) -> Self {
        let mut nodes = Vec::with_capacity(2 * self.len() - 1);
        for w in self.nodes.windows(2) {
            nodes.push(w[0]);
            nodes.push((w[0] * w[1]).sqrt());
        }
        nodes.push(*self.nodes.last().unwrap());
        Self { nodes, x_max: self.x_max, scheme: self.scheme, log_step: self.log_step / 2.0 }
    }

    /// Grid with every node multiplied by `s`.
    pub fn scaled(&self, s: f64) -> Self {
        Self {
            nodes: self.nodes.iter().map(|x| x * s).collect(),
            x_max: self.x_max * s,
            scheme: self.scheme,
            log_step: self.log_step,
        }
    }

    /// Quadrature weights for `int f dx` over `[x_min, x_max]` (trapezoid in `ln x`).
    pub fn dx_weights(&self) -> Vec<f64> {
        let n = self.len();
        let h = self.log_step;
        self.nodes
            .iter()
            .enumerate()
            .map(|(j, &x)| if j == 0 || j == n - 1 { 0.5 * h * x } else { h * x })
            .collect()
    }

    /// Barycentric Lagrange interpolation in `ln x` (10-point stencil).
    /// Beyond `x_max` the value is zero; below `x_min` the first node value is held.
    pub fn interpolate(&self, values: &CMat, x: f64) -> CVec {
        let rows = values.nrows();
        let n = self.len();
        if x > self.x_max * (1.0 + 1e-12) {
            return CVec::zeros(rows);
        }
        let t0 = self.nodes[0].ln();
        let s = (x.ln() - t0) / self.log_step;
        if s <= 0.0 {
            return values.column(0).into_owned();
        }
        let nearest = s.round();
        if (s - nearest).abs() < 1e-9 && (nearest as usize) < n {
            return values.column(nearest as usize).into_owned();
        }
        const W: usize = 10;
        let start = (s.floor() as isize - (W as isize / 2 - 1)).clamp(0, n as isize - W as isize) as usize;
        let mut weights = [0.0f64; W];
        // equispaced barycentric weights (-1)^j C(W-1, j)
        let mut binom = 1.0;
        for j in 0..W {
            let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
            weights[j] = sign * binom / (s - (start + j) as f64);
            binom = binom * (W - 1 - j) as f64 / (j + 1) as f64;
        }
        let denom: f64 = weights.iter().sum();
        let mut out = CVec::zeros(rows);
        for j in 0..W {
            out += values.column(start + j) * real(weights[j] / denom);
        }
        out
    }
}

/// Section of the discretized bundle over the cone: one column of fiber
/// coordinates per radial node.
#[derive(Clone, Debug)]
pub struct ConeFunction {
    pub values: CMat,
    pub fiber: Arc<FiberModel>,
    pub grid: Arc<ConeGrid>,
}

impl ConeFunction {
    pub fn new(values: CMat, fiber: Arc<FiberModel>, grid: Arc<ConeGrid>) -> Result<Self> {
        if values.nrows() != fiber.dim() {
            return Err(WedgeError::Shape { expected: fiber.dim(), got: values.nrows() });
        }
        if values.ncols() != grid.len() {
            return Err(WedgeError::Shape { expected: grid.len(), got: values.ncols() });
        }
        if values.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(WedgeError::Domain("cone function has non-finite entries".into()));
        }
        Ok(Self { values, fiber, grid })
    }

    pub fn from_fn(
        fiber: Arc<FiberModel>,
        grid: Arc<ConeGrid>,
        f: impl Fn(f64) -> CVec,
    ) -> Result<Self> {
        let n = fiber.dim();
        let mut values = CMat::zeros(n, grid.len());
        for (j, &x) in grid.nodes.iter().enumerate() {
            let v = f(x);
            if v.len() != n {
                return Err(WedgeError::Shape { expected: n, got: v.len() });
            }
            values.set_column(j, &v);
        }
        Self::new(values, fiber, grid)
    }

    /// Inner product of `x^{-1/2} L^2_b`, which for this weight is
    /// `int (u, v)_{L^2(Z)} dx`. The segment `[0, x_min]` is included by
    /// holding the first node value.
    pub fn inner(&self, other: &ConeFunction) -> C64 {
        let w = self.grid.dx_weights();
        let cw = self.fiber.coordinate_weight();
        let mut acc = C64::new(0.0, 0.0);
        for j in 0..self.grid.len() {
            let d = self.values.column(j).dotc(&other.values.column(j));
            // dotc conjugates the receiver; we want (u, v) = sum u conj(v)
            acc += d.conj() * w[j];
        }
        let x0 = self.grid.nodes[0];
        acc += self.values.column(0).dotc(&other.values.column(0)).conj() * x0;
        acc * cw
    }

    pub fn norm(&self) -> f64 {
        self.inner(self).re.max(0.0).sqrt()
    }

    /// Norm restricted to nodes with `x >= x_from`.
    pub fn tail_norm(&self, x_from: f64) -> f64 {
        let w = self.grid.dx_weights();
        let cw = self.fiber.coordinate_weight();
        let mut acc = 0.0;
        for (j, &x) in self.grid.nodes.iter().enumerate() {
            if x >= x_from {
                acc += self.values.column(j).norm_squared() * w[j];
            }
        }
        (acc * cw).sqrt()
    }

    pub fn scale(&self, s: C64) -> Self {
        Self { values: &self.values * s, fiber: self.fiber.clone(), grid: self.grid.clone() }
    }

    pub fn sub(&self, other: &ConeFunction) -> Self {
        Self { values: &self.values - &other.values, fiber: self.fiber.clone(), grid: self.grid.clone() }
    }

    /// Values resampled onto another grid.
    pub fn resample(&self, grid: Arc<ConeGrid>) -> Self {
        let mut values = CMat::zeros(self.values.nrows(), grid.len());
        for (j, &x) in grid.nodes.iter().enumerate() {
            values.set_column(j, &self.grid.interpolate(&self.values, x));
        }
        Self { values, fiber: self.fiber.clone(), grid }
    }
}

/// `(kappa_rho u)(x) = rho^{1/2} u(rho x)`, resampled onto the same grid.
pub fn kappa_apply(u: &ConeFunction, rho: f64) -> Result<ConeFunction> {
    if !(rho > 0.0) || !rho.is_finite() {
        return Err(WedgeError::Domain(format!("dilation parameter must be positive, got {rho}")));
    }
    if rho == 1.0 {
        return Ok(u.clone());
    }
    let s = rho.sqrt();
    let mut values = CMat::zeros(u.values.nrows(), u.grid.len());
    for (j, &x) in u.grid.nodes.iter().enumerate() {
        values.set_column(j, &(u.grid.interpolate(&u.values, rho * x) * real(s)));
    }
    ConeFunction::new(values, u.fiber.clone(), u.grid.clone())
}
