//! Operator-valued edge symbols over a circle edge.
//!
//! Symbols act between discretized value spaces that carry either the trivial
//! group action or the dilation `kappa_lambda u(x) = lambda^{1/2} u(lambda x)`.
//! Implementations return the conjugated matrix `kappa~_lambda^{-1} a(y, eta) kappa_lambda`
//! directly: for multiplication and `xD_x`-type operators this is exact
//! substitution of `x / lambda` into the coefficients, so no interpolation enters
//! the estimates.

use std::f64::consts::PI;
use std::sync::Arc;

use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::cone::log_derivative_matrix;
use crate::error::{Result, WedgeError};
use crate::fiber::{ConeGrid, FiberModel};
use crate::indicial::TraceSpace;
use crate::linalg::{lstsq, real, svd, CMat, CVec, C64, I};
use crate::operator::WedgeOp;
use crate::quadrature::Cutoff;

/// `<eta> = (1 + |eta|^2)^{1/2}`.
pub fn japanese(eta: f64) -> f64 {
    (1.0 + eta * eta).sqrt()
}

/// Support bound of extension cutoffs.
pub const C0: f64 = 0.5;

/// Cutoff used by the extension operator; vanishes for `x >= C0`.
pub const EXTENSION_CUTOFF: Cutoff = Cutoff { flat: 0.25, zero: C0 };

/// Smooth step from 0 at `t <= 0` to 1 at `t >= 1`, built from `e^{-1/t}`.
fn transition(t: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else if t >= 1.0 {
        1.0
    } else {
        let a = (-1.0 / t).exp();
        let b = (-1.0 / (1.0 - t)).exp();
        a / (a + b)
    }
}

fn transition_deriv(t: f64) -> f64 {
    if t <= 0.0 || t >= 1.0 {
        return 0.0;
    }
    let a = (-1.0 / t).exp();
    let b = (-1.0 / (1.0 - t)).exp();
    a * b * (1.0 / (t * t) + 1.0 / ((1.0 - t) * (1.0 - t))) / ((a + b) * (a + b))
}

/// Edge metric `g^{11}(y) = g0 + g1 cos y` with the smoothed bracket `[r]`,
/// equal to 1 for `|r| <= 1` and to `|r|` for `|r| >= r0`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricBracket {
    pub g0: f64,
    pub g1: f64,
    pub r0: f64,
}

impl Default for MetricBracket {
    fn default() -> Self {
        Self { g0: 4.0, g1: 1.0, r0: 2.0 }
    }
}

impl MetricBracket {
    pub fn new(g0: f64, g1: f64, r0: f64) -> Result<Self> {
        let b = Self { g0, g1, r0 };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.g0 > self.g1.abs()) {
            return Err(WedgeError::Config(format!(
                "edge metric g0 + g1 cos y must be positive: g0 = {}, g1 = {}",
                self.g0, self.g1
            )));
        }
        if !(self.r0 > 1.0) {
            return Err(WedgeError::Config(format!("bracket onset r0 must exceed 1, got {}", self.r0)));
        }
        Ok(())
    }

    pub fn g11(&self, y: f64) -> f64 {
        self.g0 + self.g1 * y.cos()
    }

    fn blend(&self, a: f64) -> f64 {
        1.0 - transition((a - 1.0) / (self.r0 - 1.0))
    }

    pub fn bracket(&self, r: f64) -> f64 {
        let a = r.abs();
        let chi = self.blend(a);
        chi + (1.0 - chi) * a
    }

    pub fn bracket_deriv(&self, r: f64) -> f64 {
        let a = r.abs();
        let chi = self.blend(a);
        let dchi = -transition_deriv((a - 1.0) / (self.r0 - 1.0)) / (self.r0 - 1.0);
        (dchi * (1.0 - a) + (1.0 - chi)) * r.signum()
    }

    /// `[eta]_y = [ (g^{11}(y))^{1/2} |eta| ]`.
    pub fn eta_bracket(&self, y: f64, eta: f64) -> f64 {
        self.bracket(self.g11(y).sqrt() * eta)
    }

    pub fn eta_bracket_deta(&self, y: f64, eta: f64) -> f64 {
        let s = self.g11(y).sqrt();
        self.bracket_deriv(s * eta) * s
    }
}

/// `x d/dx` and `d/deta` of `omega(x [eta]_y)` in closed form.
pub fn cutoff_symbol_derivatives(b: &MetricBracket, omega: &Cutoff, x: f64, y: f64, eta: f64) -> (f64, f64) {
    let br = b.eta_bracket(y, eta);
    let d = omega.deriv(x * br);
    (x * br * d, x * b.eta_bracket_deta(y, eta) * d)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Action {
    Trivial,
    Dilation,
}

/// Operator-valued symbol on a one-dimensional edge.
pub trait TwistedSymbol: Sync {
    /// Nominal order `mu`.
    fn order(&self) -> f64;
    /// `(source, target)` actions.
    fn actions(&self) -> (Action, Action);
    /// `kappa~_lambda^{-1} a(y, eta) kappa_lambda`.
    fn twisted(&self, y: f64, eta: f64, lambda: f64) -> CMat;
    /// Square roots of the source norm weights (Euclidean if `None`).
    fn source_weights(&self) -> Option<&[f64]> {
        None
    }
    fn target_weights(&self) -> Option<&[f64]> {
        None
    }
    fn eval(&self, y: f64, eta: f64) -> CMat {
        self.twisted(y, eta, 1.0)
    }
}

/// `<eta>^mu` times the identity.
pub struct BracketPower {
    pub mu: f64,
    pub dim: usize,
}

impl TwistedSymbol for BracketPower {
    fn order(&self) -> f64 {
        self.mu
    }
    fn actions(&self) -> (Action, Action) {
        (Action::Trivial, Action::Trivial)
    }
    fn twisted(&self, _y: f64, eta: f64, _lambda: f64) -> CMat {
        CMat::identity(self.dim, self.dim) * real(japanese(eta).powf(self.mu))
    }
}

/// Matrix-valued symbol given by a closure, with trivial actions.
pub struct FnSymbol<F: Fn(f64, f64) -> CMat + Sync> {
    pub f: F,
    pub mu: f64,
}

impl<F: Fn(f64, f64) -> CMat + Sync> TwistedSymbol for FnSymbol<F> {
    fn order(&self) -> f64 {
        self.mu
    }
    fn actions(&self) -> (Action, Action) {
        (Action::Trivial, Action::Trivial)
    }
    fn twisted(&self, y: f64, eta: f64, _lambda: f64) -> CMat {
        (self.f)(y, eta)
    }
}

fn sqrt_dx_weights(grid: &ConeGrid) -> Vec<f64> {
    grid.dx_weights().into_iter().map(f64::sqrt).collect()
}

/// `omega(x [eta]_y)`, either as a multiplication operator `C -> L^2(R_+)`
/// with the dilation action on the target, or restricted to a fixed `x0`.
pub struct CutoffSymbol {
    pub bracket: MetricBracket,
    pub cutoff: Cutoff,
    grid: Option<Arc<ConeGrid>>,
    x0: f64,
    weights: Vec<f64>,
}

impl CutoffSymbol {
    pub fn on_cone(bracket: MetricBracket, cutoff: Cutoff, grid: Arc<ConeGrid>) -> Self {
        let weights = sqrt_dx_weights(&grid);
        Self { bracket, cutoff, grid: Some(grid), x0: 0.0, weights }
    }

    pub fn at_point(bracket: MetricBracket, cutoff: Cutoff, x0: f64) -> Self {
        Self { bracket, cutoff, grid: None, x0, weights: vec![] }
    }
}

impl TwistedSymbol for CutoffSymbol {
    fn order(&self) -> f64 {
        if self.grid.is_some() {
            -0.5
        } else {
            f64::NEG_INFINITY
        }
    }
    fn actions(&self) -> (Action, Action) {
        match self.grid {
            Some(_) => (Action::Trivial, Action::Dilation),
            None => (Action::Trivial, Action::Trivial),
        }
    }
    fn twisted(&self, y: f64, eta: f64, lambda: f64) -> CMat {
        let br = self.bracket.eta_bracket(y, eta);
        match &self.grid {
            Some(g) => {
                let s = lambda.powf(-0.5);
                CMat::from_fn(g.len(), 1, |j, _| real(s * self.cutoff.eval(g.nodes[j] / lambda * br)))
            }
            None => CMat::from_element(1, 1, real(self.cutoff.eval(self.x0 * br))),
        }
    }
    fn target_weights(&self) -> Option<&[f64]> {
        self.grid.as_ref().map(|_| self.weights.as_slice())
    }
}

/// Complete boundary symbol `p(y, eta) = M_A xD_x + M_B + x eta M_C(y)` of a
/// first-order edge operator, or the normal family `x^{-1} p` (order one).
/// Values are nodal on a radial grid, fiber-major within each node.
pub struct BoundarySymbol {
    op: WedgeOp,
    model: Arc<FiberModel>,
    grid: Arc<ConeGrid>,
    dt: CMat,
    normal: bool,
    src_w: Vec<f64>,
    tgt_w: Vec<f64>,
}

impl BoundarySymbol {
    pub fn new(op: WedgeOp, model: Arc<FiberModel>, grid: Arc<ConeGrid>, normal: bool) -> Result<Self> {
        op.validate(&model)?;
        if op.edge_dim != 1 {
            return Err(WedgeError::Config("edge symbols are sampled on a one-dimensional edge".into()));
        }
        let n = model.dim();
        let dt = log_derivative_matrix(&grid);
        let w = sqrt_dx_weights(&grid);
        let src_w: Vec<f64> = w.iter().flat_map(|&v| std::iter::repeat(v).take(n)).collect();
        // the target loses one power of <x> at infinity
        let tgt_w: Vec<f64> = w
            .iter()
            .zip(&grid.nodes)
            .flat_map(|(&v, &x)| std::iter::repeat(v / japanese(x)).take(n))
            .collect();
        Ok(Self { op, model, grid, dt, normal, src_w, tgt_w })
    }
}

impl TwistedSymbol for BoundarySymbol {
    fn order(&self) -> f64 {
        if self.normal {
            1.0
        } else {
            0.0
        }
    }
    fn actions(&self) -> (Action, Action) {
        (Action::Dilation, Action::Dilation)
    }
    fn twisted(&self, y: f64, eta: f64, lambda: f64) -> CMat {
        let f = self.op.freeze(&self.model, &[y]);
        let n = self.model.dim();
        let nx = self.grid.len();
        let mc = &f.m_y[0] * real(eta);
        let mut p = CMat::zeros(n * nx, n * nx);
        for j in 0..nx {
            let x = self.grid.nodes[j] / lambda;
            for k in 0..nx {
                let d = self.dt[(j, k)];
                if d != real(0.0) {
                    let blk = &f.m_a * (d * -I);
                    let mut view = p.view_mut((j * n, k * n), (n, n));
                    view += blk;
                }
            }
            let mut view = p.view_mut((j * n, j * n), (n, n));
            view += &f.m_b + &mc * real(x);
            if self.normal {
                let scaled = p.rows(j * n, n) / real(x);
                p.rows_mut(j * n, n).copy_from(&scaled);
            }
        }
        p
    }
    fn source_weights(&self) -> Option<&[f64]> {
        Some(&self.src_w)
    }
    fn target_weights(&self) -> Option<&[f64]> {
        Some(if self.normal { &self.src_w } else { &self.tgt_w })
    }
}

/// Normal family of the extension operator, `E(eta) c = omega(x |eta|) tau[c](x)`,
/// from trace coordinates (action `rho^g`) into the cone (dilation action).
pub struct ExtensionSymbol {
    pub trace: TraceSpace,
    pub cutoff: Cutoff,
    grid: Arc<ConeGrid>,
    weights: Vec<f64>,
}

impl ExtensionSymbol {
    pub fn new(trace: TraceSpace, cutoff: Cutoff, grid: Arc<ConeGrid>) -> Self {
        let n = trace.leading.nrows();
        let weights = sqrt_dx_weights(&grid).into_iter().flat_map(|v| std::iter::repeat(v).take(n)).collect();
        Self { trace, cutoff, grid, weights }
    }
}

impl TwistedSymbol for ExtensionSymbol {
    fn order(&self) -> f64 {
        0.0
    }
    fn actions(&self) -> (Action, Action) {
        (Action::Dilation, Action::Dilation)
    }
    fn twisted(&self, _y: f64, eta: f64, lambda: f64) -> CMat {
        let n = self.trace.leading.nrows();
        let d = self.trace.dim();
        let k = self.trace.kappa(lambda);
        let s = lambda.powf(-0.5);
        let mut m = CMat::zeros(n * self.grid.len(), d);
        for (j, &x) in self.grid.nodes.iter().enumerate() {
            let xs = x / lambda;
            let w = real(s * self.cutoff.eval(xs * eta.abs()));
            for mu in 0..d {
                let v = self.trace.eval(&k.column(mu).into_owned(), xs) * w;
                m.view_mut((j * n, mu), (n, 1)).copy_from(&v);
            }
        }
        m
    }
    fn source_weights(&self) -> Option<&[f64]> {
        None
    }
    fn target_weights(&self) -> Option<&[f64]> {
        Some(&self.weights)
    }
}

fn weigh(m: &CMat, sym: &dyn TwistedSymbol) -> CMat {
    let mut w = m.clone();
    if let Some(t) = sym.target_weights() {
        for (i, &v) in t.iter().enumerate() {
            let row = w.row(i) * real(v);
            w.set_row(i, &row);
        }
    }
    if let Some(s) = sym.source_weights() {
        for (j, &v) in s.iter().enumerate() {
            let col = w.column(j) / real(v);
            w.set_column(j, &col);
        }
    }
    w
}

/// Spectral norm; power iteration on `A^* A` once both sides exceed 64.
pub fn operator_norm(m: &CMat) -> f64 {
    if m.nrows().min(m.ncols()) <= 64 {
        return svd(m).s.first().copied().unwrap_or(0.0);
    }
    let mh = m.adjoint();
    let mut v = CVec::from_fn(m.ncols(), |i, _| C64::new(1.0 + (i as f64 * 0.37).sin(), (i as f64 * 0.11).cos()));
    let mut est = 0.0;
    for _ in 0..200 {
        let nv = v.norm();
        if nv == 0.0 {
            return 0.0;
        }
        v /= real(nv);
        let w = &mh * (m * &v);
        let next = w.norm().sqrt();
        if (next - est).abs() <= 1e-10 * next {
            return next;
        }
        est = next;
        v = w;
    }
    est
}

fn binom(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

fn central(f: &dyn Fn(f64) -> CMat, x: f64, k: usize, h: f64) -> CMat {
    let mut acc = f(x + 0.5 * k as f64 * h) * real(0.0);
    for j in 0..=k {
        let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
        acc += f(x + (0.5 * k as f64 - j as f64) * h) * real(sign * binom(k, j));
    }
    acc / real(h.powi(k as i32))
}

/// `k`-th derivative by central differences with one Richardson step.
/// Base step `scale * 1e-4^{1/k}`.
pub fn finite_difference(f: &dyn Fn(f64) -> CMat, x: f64, k: usize, scale: f64) -> Result<CMat> {
    if k == 0 {
        return Ok(f(x));
    }
    let h = scale * 1e-4f64.powf(1.0 / k as f64);
    let d1 = central(f, x, k, h);
    let d2 = central(f, x, k, 0.5 * h);
    let r = (&d2 * real(4.0) - &d1) / real(3.0);
    let fx = f(x).norm();
    let noise = 1e-9 * fx / (0.5 * h).powi(k as i32);
    let gap = (&d1 - &d2).norm();
    if !r.iter().all(|z| z.re.is_finite() && z.im.is_finite()) || gap > 0.05 * r.norm() + noise {
        return Err(WedgeError::Differentiation(format!(
            "order-{k} difference at {x:.6e} is unstable under step halving ({gap:.3e} vs {:.3e}); the sampler is not smooth",
            r.norm()
        )));
    }
    Ok(r)
}

/// `d_y^alpha d_eta^beta` of the twisted matrix at fixed `lambda`.
fn mixed_derivative(a: &dyn TwistedSymbol, y: f64, eta: f64, lambda: f64, alpha: usize, beta: usize) -> Result<CMat> {
    let eta_scale = eta.abs().max(1.0);
    let inner = |yy: f64| -> Result<CMat> {
        finite_difference(&|e: f64| a.twisted(yy, e, lambda), eta, beta, eta_scale)
    };
    if alpha == 0 {
        return inner(y);
    }
    // propagate inner failures through a cell
    let err = std::sync::Mutex::new(None);
    let g = |yy: f64| -> CMat {
        match inner(yy) {
            Ok(m) => m,
            Err(e) => {
                *err.lock().unwrap() = Some(e);
                CMat::from_element(1, 1, real(f64::NAN))
            }
        }
    };
    let r = finite_difference(&g, y, alpha, 1.0);
    if let Some(e) = err.into_inner().unwrap() {
        return Err(e);
    }
    r
}

#[derive(Clone, Debug, Serialize)]
pub struct EstimateOptions {
    pub eta_min: f64,
    pub eta_max: f64,
    pub eta_samples: usize,
    pub y_samples: usize,
    pub slope_tolerance: f64,
}

impl Default for EstimateOptions {
    fn default() -> Self {
        Self { eta_min: 10.0, eta_max: 1e3, eta_samples: 13, y_samples: 4, slope_tolerance: 0.1 }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct EstimateEntry {
    pub alpha: usize,
    pub beta: usize,
    /// Sign of `eta` on the sampled half-line.
    pub sign: i32,
    /// Fitted exponent of `<eta>`; `None` when the seminorm vanishes on the range.
    pub slope: Option<f64>,
    pub bound: f64,
    pub pass: bool,
    pub eta: Vec<f64>,
    pub norms: Vec<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct SymbolEstimateReport {
    pub mu: f64,
    pub source_action: Action,
    pub target_action: Action,
    pub entries: Vec<EstimateEntry>,
    pub pass: bool,
}

/// Least-squares slope of `ln v` against `ln u`.
pub fn fit_slope(u: &[f64], v: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = u.iter().zip(v).filter(|(_, &b)| b > 0.0).map(|(&a, &b)| (a.ln(), b.ln())).collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    Some(sxy / sxx)
}

/// Fits `ln || kappa~^{-1} D_y^alpha d_eta^beta a kappa ||` against `ln <eta>`
/// (with `lambda = <eta>`) and compares the slope with `mu - beta`.
pub fn symbol_estimate_check(
    a: &dyn TwistedSymbol,
    mu: f64,
    max_order: usize,
    opts: &EstimateOptions,
) -> Result<SymbolEstimateReport> {
    let etas: Vec<f64> = (0..opts.eta_samples)
        .map(|k| {
            let t = k as f64 / (opts.eta_samples - 1).max(1) as f64;
            opts.eta_min * (opts.eta_max / opts.eta_min).powf(t)
        })
        .collect();
    let ys: Vec<f64> = (0..opts.y_samples).map(|k| 2.0 * PI * k as f64 / opts.y_samples as f64).collect();
    let mut entries = vec![];
    for total in 0..=max_order {
        for alpha in 0..=total {
            let beta = total - alpha;
            for sign in [1i32, -1] {
                let norms: Vec<f64> = etas
                    .par_iter()
                    .map(|&e| {
                        let eta = sign as f64 * e;
                        let mut worst: f64 = 0.0;
                        for &y in &ys {
                            let d = mixed_derivative(a, y, eta, japanese(eta), alpha, beta)?;
                            worst = worst.max(operator_norm(&weigh(&d, a)));
                        }
                        Ok(worst)
                    })
                    .collect::<Result<_>>()?;
                let brackets: Vec<f64> = etas.iter().map(|&e| japanese(e)).collect();
                let top = norms.iter().cloned().fold(0.0, f64::max);
                let vanishes = top <= 1e-300;
                let slope = if vanishes { None } else { fit_slope(&brackets, &norms) };
                let bound = mu - beta as f64 + opts.slope_tolerance;
                let pass = slope.map_or(true, |s| s <= bound);
                entries.push(EstimateEntry { alpha, beta, sign, slope, bound, pass, eta: etas.clone(), norms });
            }
        }
    }
    let (s, t) = a.actions();
    let pass = entries.iter().all(|e| e.pass);
    Ok(SymbolEstimateReport { mu, source_action: s, target_action: t, entries, pass })
}

/// `max || a(y, rho eta) - rho^mu kappa~_rho a(y, eta) kappa_rho^{-1} || / || a(y, rho eta) ||`
/// over the samples and `rho in {2, 5}`.
pub fn twisted_homog_check(a: &dyn TwistedSymbol, mu: f64, samples: &[(f64, f64)]) -> f64 {
    samples
        .par_iter()
        .map(|&(y, eta)| {
            let mut worst: f64 = 0.0;
            for rho in [2.0, 5.0] {
                let lhs = a.eval(y, rho * eta);
                let rhs = a.twisted(y, eta, 1.0 / rho) * real(rho.powf(mu));
                let den = lhs.norm();
                let num = (&lhs - &rhs).norm();
                if den > 0.0 {
                    worst = worst.max(num / den);
                } else if num > 0.0 {
                    worst = f64::INFINITY;
                }
            }
            worst
        })
        .reduce(|| 0.0, f64::max)
}

/// Value space of edge functions.
#[derive(Clone, Debug)]
pub enum EdgeValueSpace {
    Euclidean(usize),
    /// Nodal values on a radial grid (`rank` components per node) with norm
    /// `int <x>^{2t} |v|^2 dx`.
    Cone { grid: Arc<ConeGrid>, rank: usize, weight_t: f64 },
}

impl EdgeValueSpace {
    pub fn dim(&self) -> usize {
        match self {
            Self::Euclidean(n) => *n,
            Self::Cone { grid, rank, .. } => grid.len() * rank,
        }
    }

    /// `|| kappa_lambda^{-1} v ||^2` (the action is ignored for `Trivial`).
    fn norm_sqr(&self, v: &CVec, action: Action, lambda: f64) -> Result<f64> {
        match (self, action) {
            (Self::Euclidean(_), Action::Trivial) => Ok(v.norm_squared()),
            (Self::Euclidean(_), Action::Dilation) => {
                Err(WedgeError::Domain("the dilation action needs cone-valued edge functions".into()))
            }
            (Self::Cone { grid, rank, weight_t }, act) => {
                let l = if act == Action::Dilation { lambda } else { 1.0 };
                let w = grid.dx_weights();
                let mut acc = 0.0;
                for (j, (&x, &wj)) in grid.nodes.iter().zip(&w).enumerate() {
                    let m = japanese(l * x).powf(2.0 * weight_t);
                    for a in 0..*rank {
                        acc += wj * m * v[j * rank + a].norm_sqr();
                    }
                }
                Ok(acc)
            }
        }
    }
}

/// Band-limited function on the circle edge, `u(y) = sum_eta u^(eta) e^{i eta y}`.
#[derive(Clone, Debug)]
pub struct EdgeFunction {
    pub band: usize,
    /// Coefficients for `eta = -band..=band`.
    pub coeffs: Vec<CVec>,
    pub space: EdgeValueSpace,
}

/// Forward DFT normalized as Fourier coefficients, `u^(eta) = M^{-1} sum_j u(y_j) e^{-i eta y_j}`.
/// Columns of `samples` are the values at `y_j = 2 pi j / M`; column `k` of the
/// result is the coefficient of frequency `k` for `k < M/2` and `k - M` above.
pub fn edge_dft(samples: &CMat) -> CMat {
    let m = samples.ncols();
    let mut planner = FftPlanner::<f64>::new();
    let fft = planner.plan_fft_forward(m);
    let mut out = CMat::zeros(samples.nrows(), m);
    for r in 0..samples.nrows() {
        let mut buf: Vec<C64> = samples.row(r).iter().cloned().collect();
        fft.process(&mut buf);
        for (k, z) in buf.into_iter().enumerate() {
            out[(r, k)] = z / real(m as f64);
        }
    }
    out
}

/// Frequency of DFT bin `k` out of `m`.
pub fn bin_frequency(k: usize, m: usize) -> i64 {
    if k <= m / 2 {
        k as i64
    } else {
        k as i64 - m as i64
    }
}

fn bin_of(eta: i64, m: usize) -> usize {
    eta.rem_euclid(m as i64) as usize
}

impl EdgeFunction {
    pub fn new(band: usize, coeffs: Vec<CVec>, space: EdgeValueSpace) -> Result<Self> {
        if coeffs.len() != 2 * band + 1 {
            return Err(WedgeError::Shape { expected: 2 * band + 1, got: coeffs.len() });
        }
        if let Some(c) = coeffs.iter().find(|c| c.len() != space.dim()) {
            return Err(WedgeError::Shape { expected: space.dim(), got: c.len() });
        }
        Ok(Self { band, coeffs, space })
    }

    pub fn frequencies(&self) -> impl Iterator<Item = i64> + '_ {
        let b = self.band as i64;
        -b..=b
    }

    pub fn sample(&self, y: f64) -> CVec {
        let mut out = CVec::zeros(self.space.dim());
        for (eta, c) in self.frequencies().zip(&self.coeffs) {
            out += c * (I * (eta as f64 * y)).exp();
        }
        out
    }

    /// Truncate samples at `y_j = 2 pi j / M` to `band`; also returns the
    /// relative `l^2` mass of the discarded frequencies.
    pub fn from_samples(samples: &CMat, band: usize, space: EdgeValueSpace) -> Result<(Self, f64)> {
        let m = samples.ncols();
        if m < 2 * band + 1 {
            return Err(WedgeError::Domain(format!("{m} samples cannot carry band {band}")));
        }
        let hat = edge_dft(samples);
        let b = band as i64;
        let mut kept = 0.0;
        let mut total = 0.0;
        for k in 0..m {
            let e = hat.column(k).norm_squared();
            total += e;
            if bin_frequency(k, m).abs() <= b {
                kept += e;
            }
        }
        let coeffs = (-b..=b).map(|eta| hat.column(bin_of(eta, m)).into_owned()).collect();
        let tail = if total > 0.0 { ((total - kept).max(0.0) / total).sqrt() } else { 0.0 };
        Ok((Self::new(band, coeffs, space)?, tail))
    }
}

/// `||u||^2 = 2 pi sum_eta <eta>^{2s} || kappa_{<eta>}^{-1} u^(eta) ||^2`.
pub fn edge_sobolev_norm(u: &EdgeFunction, s: f64, action: Action) -> Result<f64> {
    let mut acc = 0.0;
    for (eta, c) in u.frequencies().zip(&u.coeffs) {
        let j = japanese(eta as f64);
        acc += j.powf(2.0 * s) * u.space.norm_sqr(c, action, j)?;
    }
    Ok((2.0 * PI * acc).sqrt())
}

/// Section of the trace bundle over the circle edge, band-limited.
#[derive(Clone, Debug)]
pub struct TraceSection {
    pub band: usize,
    /// `dim T x (2 band + 1)`, frequencies `-band..=band`.
    pub coeffs: CMat,
    /// Relative mass discarded when the section was band-limited.
    pub tail_mass: f64,
}

impl TraceSection {
    pub fn from_coeffs(band: usize, coeffs: CMat) -> Result<Self> {
        if coeffs.ncols() != 2 * band + 1 {
            return Err(WedgeError::Shape { expected: 2 * band + 1, got: coeffs.ncols() });
        }
        Ok(Self { band, coeffs, tail_mass: 0.0 })
    }

    /// From samples at `y_j = 2 pi j / M` (one column per sample).
    pub fn from_samples(samples: &CMat, band: usize) -> Result<Self> {
        let (f, tail) = EdgeFunction::from_samples(samples, band, EdgeValueSpace::Euclidean(samples.nrows()))?;
        Ok(Self { band, coeffs: CMat::from_columns(&f.coeffs), tail_mass: tail })
    }

    pub fn frequency(&self, col: usize) -> i64 {
        col as i64 - self.band as i64
    }

    pub fn eval(&self, y: f64) -> CVec {
        let mut out = CVec::zeros(self.coeffs.nrows());
        for k in 0..self.coeffs.ncols() {
            out += self.coeffs.column(k) * (I * (self.frequency(k) as f64 * y)).exp();
        }
        out
    }
}

/// Collar function `u(x, y)` sampled on `x` nodes times `y_j = 2 pi j / M`.
#[derive(Clone, Debug)]
pub struct CollarFunction {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    /// One `N x len(x)` block per `y` sample.
    pub values: Vec<CMat>,
    pub warning: Option<String>,
}

fn check_cutoff(cutoff: &Cutoff) -> Result<()> {
    if cutoff.zero > C0 {
        return Err(WedgeError::Domain(format!(
            "extension cutoff must vanish for x >= {C0}; it is supported up to {}",
            cutoff.zero
        )));
    }
    Ok(())
}

/// Trace coordinates of `(E f)(x, y)`: `sum_eta e^{i eta y} omega(x [eta]_y) f^(eta)`.
pub fn extension_coefficients(f: &TraceSection, bracket: &MetricBracket, cutoff: &Cutoff, x: f64, y: f64) -> CVec {
    let mut c = CVec::zeros(f.coeffs.nrows());
    for k in 0..f.coeffs.ncols() {
        let eta = f.frequency(k) as f64;
        let w = cutoff.eval(x * bracket.eta_bracket(y, eta));
        if w != 0.0 {
            c += f.coeffs.column(k) * ((I * (eta * y)).exp() * w);
        }
    }
    c
}

pub fn extension_value(
    f: &TraceSection,
    trace: &TraceSpace,
    bracket: &MetricBracket,
    cutoff: &Cutoff,
    x: f64,
    y: f64,
) -> CVec {
    trace.eval(&extension_coefficients(f, bracket, cutoff, x, y), x)
}

/// Extension of a trace section to the collar `x < C0` over the circle edge.
pub fn extension_apply(
    f: &TraceSection,
    trace: &TraceSpace,
    bracket: &MetricBracket,
    cutoff: &Cutoff,
    x: &[f64],
    y_samples: usize,
) -> Result<CollarFunction> {
    check_cutoff(cutoff)?;
    bracket.validate()?;
    if f.coeffs.nrows() != trace.dim() {
        return Err(WedgeError::Shape { expected: trace.dim(), got: f.coeffs.nrows() });
    }
    let ys: Vec<f64> = (0..y_samples).map(|j| 2.0 * PI * j as f64 / y_samples as f64).collect();
    let n = trace.leading.nrows();
    let values = ys
        .par_iter()
        .map(|&y| {
            let mut m = CMat::zeros(n, x.len());
            for (i, &xi) in x.iter().enumerate() {
                m.set_column(i, &extension_value(f, trace, bracket, cutoff, xi, y));
            }
            m
        })
        .collect();
    let warning = (f.tail_mass > 1e-12)
        .then(|| format!("trace section is not band-limited; discarded tail mass {:.3e}", f.tail_mass));
    Ok(CollarFunction { x: x.to_vec(), y: ys, values, warning })
}

/// `sup_y |(E f)(eps, y) - tau[f(y)](eps)| / sup_y |tau[f(y)](eps)|` for each `eps`.
pub fn boundary_limit_errors(
    f: &TraceSection,
    trace: &TraceSpace,
    bracket: &MetricBracket,
    cutoff: &Cutoff,
    eps: &[f64],
    y_samples: usize,
) -> Vec<f64> {
    eps.iter()
        .map(|&e| {
            let mut num: f64 = 0.0;
            let mut den: f64 = 0.0;
            for j in 0..y_samples {
                let y = 2.0 * PI * j as f64 / y_samples as f64;
                let target = trace.eval(&f.eval(y), e);
                let u = extension_value(f, trace, bracket, cutoff, e, y);
                num = num.max((u - &target).norm());
                den = den.max(target.norm());
            }
            num / den.max(f64::MIN_POSITIVE)
        })
        .collect()
}

/// Trace of a collar function: per `y`, fit the nodes in `window` against the
/// trace basis; then transform over `y`.
pub fn collar_trace(u: &CollarFunction, trace: &TraceSpace, window: (f64, f64), band: usize) -> Result<TraceSection> {
    let idx: Vec<usize> = (0..u.x.len()).filter(|&i| u.x[i] >= window.0 && u.x[i] <= window.1).collect();
    let d = trace.dim();
    let n = trace.leading.nrows();
    if idx.len() * n < d {
        return Err(WedgeError::Resolution(format!(
            "{} collar nodes in [{:.1e}, {:.1e}] cannot determine {d} trace coordinates",
            idx.len(),
            window.0,
            window.1
        )));
    }
    let mut basis = CMat::zeros(idx.len() * n, d);
    for (r, &i) in idx.iter().enumerate() {
        for (mu, e) in trace.basis.iter().enumerate() {
            basis.view_mut((r * n, mu), (n, 1)).copy_from(&e.eval(u.x[i]));
        }
    }
    let mut coords = CMat::zeros(d, u.y.len());
    for (j, vals) in u.values.iter().enumerate() {
        let mut rhs = CMat::zeros(idx.len() * n, 1);
        for (r, &i) in idx.iter().enumerate() {
            rhs.view_mut((r * n, 0), (n, 1)).copy_from(&vals.column(i));
        }
        let c = lstsq(&basis, &rhs, 1e-14);
        coords.set_column(j, &c.column(0));
    }
    TraceSection::from_samples(&coords, band)
}

#[derive(Clone, Debug, Serialize)]
pub struct LeibnizReport {
    pub terms: usize,
    pub frequencies: Vec<f64>,
    /// `||R u_k|| / ||u_k||` at `M` and `2M` edge samples.
    pub remainders: Vec<f64>,
    pub remainders_fine: Vec<f64>,
    /// `None` when the remainder is at rounding level throughout.
    pub slope: Option<f64>,
    pub slope_fine: Option<f64>,
    pub expected: f64,
    pub pass: bool,
}

fn weighted_sq(v: &CVec, w: Option<&[f64]>) -> f64 {
    match w {
        Some(w) => v.iter().zip(w).map(|(z, &s)| z.norm_sqr() * s * s).sum(),
        None => v.norm_squared(),
    }
}

fn leibniz_remainder(
    a1: &dyn TwistedSymbol,
    a2: &dyn TwistedSymbol,
    terms: usize,
    k: i64,
    m: usize,
) -> Result<f64> {
    let ys: Vec<f64> = (0..m).map(|j| 2.0 * PI * j as f64 / m as f64).collect();
    let n_src = a2.eval(0.0, k as f64).ncols();
    let v0 = CVec::from_element(n_src, real(1.0 / (n_src as f64).sqrt()));
    let input = [(k, real(1.0)), (k + 1, real(0.5))];
    let op_apply = |sym: &(dyn Fn(f64, f64) -> Result<CMat> + Sync), modes: &[(i64, CVec)]| -> Result<Vec<CVec>> {
        ys.par_iter()
            .map(|&y| {
                let mut acc: Option<CVec> = None;
                for (eta, c) in modes {
                    let v = sym(y, *eta as f64)? * c * (I * (*eta as f64 * y)).exp();
                    acc = Some(match acc {
                        Some(a) => a + v,
                        None => v,
                    });
                }
                Ok(acc.unwrap_or_else(|| CVec::zeros(0)))
            })
            .collect()
    };
    let u_modes: Vec<(i64, CVec)> = input.iter().map(|&(e, c)| (e, &v0 * c)).collect();
    // op(a1) op(a2) u
    let inner = op_apply(&|y, e| Ok(a2.eval(y, e)), &u_modes)?;
    let samples = CMat::from_columns(&inner);
    let hat = edge_dft(&samples);
    let peak = (0..m).map(|c| hat.column(c).norm()).fold(0.0, f64::max);
    let v_modes: Vec<(i64, CVec)> = (0..m)
        .filter(|&c| hat.column(c).norm() > 1e-15 * peak)
        .map(|c| (bin_frequency(c, m), hat.column(c).into_owned()))
        .collect();
    let composed = op_apply(&|y, e| Ok(a1.eval(y, e)), &v_modes)?;
    // op of the truncated expansion
    let expansion = |y: f64, e: f64| -> Result<CMat> {
        let mut acc = a1.eval(y, e) * a2.eval(y, e);
        let mut fact = 1.0;
        for al in 1..terms {
            fact *= al as f64;
            let d1 = mixed_derivative(a1, y, e, 1.0, 0, al)?;
            let d2 = mixed_derivative(a2, y, e, 1.0, al, 0)? * (-I).powi(al as i32);
            acc += d1 * d2 / real(fact);
        }
        Ok(acc)
    };
    let approx = op_apply(&expansion, &u_modes)?;
    let w = a1.target_weights();
    let mut r = 0.0;
    for (a, b) in composed.iter().zip(&approx) {
        r += weighted_sq(&(a - b), w);
    }
    let r = (2.0 * PI * r / m as f64).sqrt();
    let unorm = (2.0 * PI * 1.25f64).sqrt();
    Ok(r / unorm)
}

/// Remainder of the `N`-term Leibniz expansion of `op(a1) op(a2)` on the
/// inputs `e^{iky}(1 + e^{iy}/2)`; slope fitted against `k`.
pub fn leibniz_remainder_check(
    a1: &dyn TwistedSymbol,
    a2: &dyn TwistedSymbol,
    terms: usize,
    freqs: &[i64],
    samples: usize,
) -> Result<LeibnizReport> {
    let coarse: Vec<f64> = freqs.iter().map(|&k| leibniz_remainder(a1, a2, terms, k, samples)).collect::<Result<_>>()?;
    let fine: Vec<f64> = freqs.iter().map(|&k| leibniz_remainder(a1, a2, terms, k, 2 * samples)).collect::<Result<_>>()?;
    let ks: Vec<f64> = freqs.iter().map(|&k| k as f64).collect();
    let rounding = |v: &[f64]| v.iter().all(|&r| r <= 1e-12);
    let slope = if rounding(&coarse) { None } else { fit_slope(&ks, &coarse) };
    let slope_fine = if rounding(&fine) { None } else { fit_slope(&ks, &fine) };
    let expected = a1.order() + a2.order() - terms as f64;
    let pass = [slope, slope_fine].iter().all(|s| s.map_or(true, |s| s <= expected + 0.2));
    Ok(LeibnizReport { terms, frequencies: ks, remainders: coarse, remainders_fine: fine, slope, slope_fine, expected, pass })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bracket_is_smooth_and_exact_outside_onset() {
        let b = MetricBracket::default();
        for k in -400..=400 {
            let r = k as f64 * 0.01;
            assert!(b.bracket(r) >= 1.0);
            if r.abs() >= b.r0 {
                assert_eq!(b.bracket(r), r.abs());
            }
            if r.abs() <= 1.0 {
                assert_eq!(b.bracket(r), 1.0);
            }
            let h = 1e-6;
            let fd = (b.bracket(r + h) - b.bracket(r - h)) / (2.0 * h);
            if (r.abs() - 1.0).abs() > 2e-6 && (r.abs() - 2.0).abs() > 2e-6 && r != 0.0 {
                assert!((fd - b.bracket_deriv(r)).abs() < 1e-6, "r = {r}");
            }
        }
    }

    #[test]
    fn metric_must_be_positive() {
        assert!(MetricBracket::new(1.0, 2.0, 2.0).is_err());
        assert!(MetricBracket::new(4.0, 1.0, 0.5).is_err());
    }

    #[test]
    fn transition_derivative() {
        for k in 1..100 {
            let t = k as f64 / 100.0;
            let h = 1e-6;
            let fd = (transition(t + h) - transition(t - h)) / (2.0 * h);
            assert!((fd - transition_deriv(t)).abs() < 1e-6);
        }
    }

    #[test]
    fn finite_difference_of_power() {
        let f = |e: f64| CMat::from_element(1, 1, real(e.powi(3)));
        let d = finite_difference(&f, 2.0, 1, 2.0).unwrap();
        assert!((d[(0, 0)].re - 12.0).abs() < 1e-8);
        let d2 = finite_difference(&f, 2.0, 2, 2.0).unwrap();
        assert!((d2[(0, 0)].re - 12.0).abs() < 1e-6);
    }

    #[test]
    fn power_iteration_matches_svd() {
        let m = CMat::from_fn(80, 70, |i, j| C64::new(((i * 7 + j * 3) as f64).sin(), (i as f64 - j as f64).cos() * 0.1));
        let exact = svd(&m).s[0];
        assert!((operator_norm(&m) - exact).abs() < 1e-7 * exact);
    }
}
