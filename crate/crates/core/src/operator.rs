//! First-order wedge operators frozen at the boundary,
//!
//! `A = x^{-1} (a_x xD_x + sum_j a_y[j] xD_{y_j} + a_z D_theta + a_0)`,
//!
//! with every coefficient a `rank x rank` matrix field on `Y x Z` given as a
//! finite Fourier table in the edge angles and the fiber angle.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Result, WedgeError};
use crate::fiber::{FiberKind, FiberModel};
use crate::linalg::{min_singular, CMat, C64};

/// Serde form of a complex matrix: rows of `[re, im]` pairs.
pub mod cmat_serde {
    use super::*;
    use serde::{Deserializer, Serializer};

    pub fn to_rows(m: &CMat) -> Vec<Vec<[f64; 2]>> {
        (0..m.nrows())
            .map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect())
            .collect()
    }

    pub fn from_rows(rows: &[Vec<[f64; 2]>]) -> std::result::Result<CMat, String> {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        if rows.iter().any(|row| row.len() != c) {
            return Err("ragged matrix rows".into());
        }
        Ok(CMat::from_fn(r, c, |i, j| C64::new(rows[i][j][0], rows[i][j][1])))
    }

    pub fn serialize<S: Serializer>(m: &CMat, s: S) -> std::result::Result<S::Ok, S::Error> {
        to_rows(m).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<CMat, D::Error> {
        let rows = Vec::<Vec<[f64; 2]>>::deserialize(d)?;
        from_rows(&rows).map_err(serde::de::Error::custom)
    }
}

/// One term `matrix * e^{i (y_modes . y + fiber_mode theta)}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoefTerm {
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub y_modes: Vec<i64>,
    #[serde(default)]
    pub fiber_mode: i64,
    #[serde(with = "cmat_serde")]
    pub matrix: CMat,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CoefField {
    pub terms: Vec<CoefTerm>,
}

impl CoefField {
    pub fn constant(m: CMat) -> Self {
        Self { terms: vec![CoefTerm { y_modes: vec![], fiber_mode: 0, matrix: m }] }
    }

    pub fn zero() -> Self {
        Self::default()
    }

    pub fn with_term(mut self, y_modes: Vec<i64>, fiber_mode: i64, m: CMat) -> Self {
        self.terms.push(CoefTerm { y_modes, fiber_mode, matrix: m });
        self
    }

    fn y_phase(term: &CoefTerm, y: &[f64]) -> C64 {
        let arg: f64 = term.y_modes.iter().zip(y).map(|(&k, &yy)| k as f64 * yy).sum();
        C64::from_polar(1.0, arg)
    }

    /// Fiber Fourier coefficient of order `m` at the edge point `y`.
    pub fn fiber_coefficient(&self, y: &[f64], m: i64, rank: usize) -> CMat {
        let mut out = CMat::zeros(rank, rank);
        for t in self.terms.iter().filter(|t| t.fiber_mode == m) {
            out += &t.matrix * Self::y_phase(t, y);
        }
        out
    }

    /// Pointwise value at `(y, theta)`.
    pub fn eval(&self, y: &[f64], theta: f64, rank: usize) -> CMat {
        let mut out = CMat::zeros(rank, rank);
        for t in &self.terms {
            let ph = Self::y_phase(t, y) * C64::from_polar(1.0, t.fiber_mode as f64 * theta);
            out += &t.matrix * ph;
        }
        out
    }

    pub fn is_y_independent(&self) -> bool {
        self.terms.iter().all(|t| t.y_modes.iter().all(|&k| k == 0))
    }

    /// Galerkin matrix of multiplication by the field (times `k` on mode `k`
    /// when `derivative` is set, i.e. composed with `D_theta`).
    pub fn discretize(&self, model: &FiberModel, y: &[f64], derivative: bool) -> CMat {
        let r = model.rank;
        let n = model.dim();
        let mut out = CMat::zeros(n, n);
        let modes = model.mode_numbers();
        for &kp in &modes {
            for &k in &modes {
                let coef = self.fiber_coefficient(y, kp - k, r);
                let scale = if derivative { k as f64 } else { 1.0 };
                if scale == 0.0 || coef.iter().all(|z| *z == C64::new(0.0, 0.0)) {
                    continue;
                }
                let (i0, j0) = (model.index(kp, 0), model.index(k, 0));
                out.view_mut((i0, j0), (r, r)).copy_from(&(coef * C64::new(scale, 0.0)));
            }
        }
        out
    }

    fn check(&self, name: &str, rank: usize, edge_dim: usize, kind: FiberKind) -> Result<()> {
        for t in &self.terms {
            if t.matrix.shape() != (rank, rank) {
                return Err(WedgeError::Config(format!(
                    "{name}: coefficient matrix is {}x{}, expected {rank}x{rank}",
                    t.matrix.nrows(),
                    t.matrix.ncols()
                )));
            }
            if t.y_modes.len() > edge_dim {
                return Err(WedgeError::Config(format!(
                    "{name}: {} edge modes given for edge dimension {edge_dim}",
                    t.y_modes.len()
                )));
            }
            if kind == FiberKind::Point && t.fiber_mode != 0 {
                return Err(WedgeError::Config(format!(
                    "{name}: fiber mode {} on a point fiber",
                    t.fiber_mode
                )));
            }
            if t.matrix.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
                return Err(WedgeError::Config(format!("{name}: non-finite coefficient")));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WedgeOp {
    pub rank: usize,
    pub edge_dim: usize,
    pub a_x: CoefField,
    pub a_y: Vec<CoefField>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a_z: Option<CoefField>,
    #[serde(default)]
    pub a_0: CoefField,
}

/// Fiber matrices of the operator frozen at an edge point.
#[derive(Clone, Debug)]
pub struct FrozenOp {
    pub m_a: CMat,
    pub m_b: CMat,
    /// One matrix per edge coordinate.
    pub m_y: Vec<CMat>,
}

impl WedgeOp {
    /// Structural validation against a fiber model.
    pub fn validate(&self, model: &FiberModel) -> Result<()> {
        if self.rank != model.rank {
            return Err(WedgeError::Config(format!(
                "operator rank {} does not match fiber rank {}",
                self.rank, model.rank
            )));
        }
        if self.edge_dim == 0 {
            return Err(WedgeError::Config("edge dimension must be at least 1".into()));
        }
        if self.a_y.len() != self.edge_dim {
            return Err(WedgeError::Config(format!(
                "{} edge coefficients for edge dimension {}",
                self.a_y.len(),
                self.edge_dim
            )));
        }
        if model.kind == FiberKind::Point && self.a_z.is_some() {
            return Err(WedgeError::Config("a_z given on a point fiber".into()));
        }
        self.a_x.check("a_x", self.rank, self.edge_dim, model.kind)?;
        for (j, f) in self.a_y.iter().enumerate() {
            f.check(&format!("a_y[{j}]"), self.rank, self.edge_dim, model.kind)?;
        }
        if let Some(f) = &self.a_z {
            f.check("a_z", self.rank, self.edge_dim, model.kind)?;
        }
        self.a_0.check("a_0", self.rank, self.edge_dim, model.kind)
    }

    /// `a_x` must be invertible at every fiber node over every sampled edge point.
    pub fn check_a_x_invertible(&self, model: &FiberModel, y: &[f64], tol: f64) -> Result<()> {
        let thetas = match model.kind {
            FiberKind::Point => vec![0.0],
            FiberKind::Circle => model.theta_nodes(),
        };
        for th in thetas {
            let s = min_singular(&self.a_x.eval(y, th, self.rank));
            if s < tol {
                return Err(WedgeError::WEllipticity(format!(
                    "a_x is singular (smallest singular value {s:.3e}) at theta = {th:.6}, y = {y:?}"
                )));
            }
        }
        Ok(())
    }

    pub fn freeze(&self, model: &FiberModel, y: &[f64]) -> FrozenOp {
        let m_a = self.a_x.discretize(model, y, false);
        let mut m_b = self.a_0.discretize(model, y, false);
        if let Some(az) = &self.a_z {
            m_b += az.discretize(model, y, true);
        }
        let m_y = self.a_y.iter().map(|f| f.discretize(model, y, false)).collect();
        FrozenOp { m_a, m_b, m_y }
    }

    /// Principal w-symbol `a_x xi + sum a_y eta + a_z zeta` at `(y, theta)`.
    pub fn w_symbol(&self, y: &[f64], theta: f64, xi: f64, eta: &[f64], zeta: f64) -> CMat {
        let r = self.rank;
        let mut s = self.a_x.eval(y, theta, r) * C64::new(xi, 0.0);
        for (f, &e) in self.a_y.iter().zip(eta) {
            s += f.eval(y, theta, r) * C64::new(e, 0.0);
        }
        if let Some(az) = &self.a_z {
            s += az.eval(y, theta, r) * C64::new(zeta, 0.0);
        }
        s
    }

    pub fn is_y_independent(&self) -> bool {
        self.a_x.is_y_independent()
            && self.a_y.iter().all(CoefField::is_y_independent)
            && self.a_z.as_ref().map_or(true, CoefField::is_y_independent)
            && self.a_0.is_y_independent()
    }
}

/// Equispaced samples of the edge circle `[0, 2 pi)`.
pub fn edge_samples(n: usize) -> Vec<f64> {
    (0..n).map(|j| 2.0 * PI * j as f64 / n as f64).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{c, max_abs, real};

    fn pauli() -> (CMat, CMat, CMat) {
        let sx = CMat::from_row_slice(2, 2, &[real(0.0), real(1.0), real(1.0), real(0.0)]);
        let sy = CMat::from_row_slice(2, 2, &[real(0.0), c(0.0, -1.0), c(0.0, 1.0), real(0.0)]);
        let sz = CMat::from_row_slice(2, 2, &[real(1.0), real(0.0), real(0.0), real(-1.0)]);
        (sx, sy, sz)
    }

    #[test]
    fn dirac_discretization_is_block_diagonal_per_mode() {
        let (sx, sy, sz) = pauli();
        let op = WedgeOp {
            rank: 2,
            edge_dim: 1,
            a_x: CoefField::constant(sx.clone()),
            a_y: vec![CoefField::constant(sz)],
            a_z: Some(CoefField::constant(sy.clone())),
            a_0: CoefField::zero(),
        };
        let model = FiberModel::circle(2, 3);
        op.validate(&model).unwrap();
        let f = op.freeze(&model, &[0.0]);
        for k in -3i64..=3 {
            let i0 = model.index(k, 0);
            let blk_b = f.m_b.view((i0, i0), (2, 2)).into_owned();
            assert!(max_abs(&(blk_b - &sy * real(k as f64))) < 1e-15);
            let blk_a = f.m_a.view((i0, i0), (2, 2)).into_owned();
            assert!(max_abs(&(blk_a - &sx)) < 1e-15);
        }
        // nothing couples distinct modes for constant coefficients
        let mut off = f.m_b.clone();
        for k in -3i64..=3 {
            let i0 = model.index(k, 0);
            off.view_mut((i0, i0), (2, 2)).fill(real(0.0));
        }
        assert_eq!(max_abs(&off), 0.0);
    }

    #[test]
    fn variable_coefficient_is_toeplitz() {
        // a(theta) = cos(theta)
        let half = CMat::from_element(1, 1, real(0.5));
        let f = CoefField::zero().with_term(vec![], 1, half.clone()).with_term(vec![], -1, half);
        let model = FiberModel::circle(1, 2);
        let m = f.discretize(&model, &[0.0], false);
        assert_eq!(m[(model.index(1, 0), model.index(0, 0))], real(0.5));
        assert_eq!(m[(model.index(-1, 0), model.index(0, 0))], real(0.5));
        assert_eq!(m[(model.index(0, 0), model.index(0, 0))], real(0.0));
        assert!((f.eval(&[0.0], 0.3, 1)[(0, 0)].re - 0.3f64.cos()).abs() < 1e-15);
    }

    #[test]
    fn validation_catches_shape_and_fiber_errors() {
        let model = FiberModel::point(1);
        let one = CMat::from_element(1, 1, real(1.0));
        let mut op = WedgeOp {
            rank: 1,
            edge_dim: 1,
            a_x: CoefField::constant(one.clone()),
            a_y: vec![CoefField::constant(one.clone() * c(0.0, 1.0))],
            a_z: None,
            a_0: CoefField::zero(),
        };
        op.validate(&model).unwrap();
        op.a_0 = CoefField::zero().with_term(vec![], 1, one.clone());
        assert!(matches!(op.validate(&model), Err(WedgeError::Config(_))));
        op.a_0 = CoefField::constant(CMat::zeros(2, 2));
        assert!(matches!(op.validate(&model), Err(WedgeError::Config(_))));
        op.a_0 = CoefField::zero();
        op.a_x = CoefField::constant(CMat::zeros(1, 1));
        assert!(matches!(
            op.check_a_x_invertible(&model, &[0.0], 1e-12),
            Err(WedgeError::WEllipticity(_))
        ));
    }
}
