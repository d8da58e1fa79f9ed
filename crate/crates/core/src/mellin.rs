//! Mellin singular parts of trace functions and the Green pairing.
//!
//! For `u = x^{i sigma_0} sum_j v_j log^j x` and a cutoff equal to one near
//! the tip, the cut-off Mellin transform `int omega u x^{-i sigma} dx/x` has
//! principal part `sum_j v_j (-1)^j j! / s^{j+1}` with `s = i(sigma_0 - sigma)`.
//!
//! The pairing is `beta(u, v) = (1/2pi) int_{dR} (P(sigma) u^(sigma), v^(conj sigma)) d sigma`,
//! conjugate-linear in `v`. Since `P(sigma) u^` is entire for `u` in the kernel of
//! the boundary operator, only the principal parts contribute.

use serde::Serialize;

use crate::error::{Result, WedgeError};
use crate::fiber::FiberModel;
use crate::indicial::{IndicialPencil, TraceElement, TraceSpace};
use crate::linalg::{eigenvalues, inverse, real, spectral_norm, svd, CMat, CVec, C64, I};
use crate::quadrature::{composite, gauss_legendre, Cutoff};

#[derive(Clone, Debug)]
pub struct SingularPart {
    pub pole: C64,
    /// `laurent[k-1]` multiplies `1 / (i(pole - sigma))^k`.
    pub laurent: Vec<CVec>,
}

impl SingularPart {
    pub fn eval(&self, sigma: C64) -> CVec {
        let s = I * (self.pole - sigma);
        let mut out = CVec::zeros(self.laurent[0].len());
        let mut p = real(1.0);
        for c in &self.laurent {
            p /= s;
            out += c * p;
        }
        out
    }
}

pub fn mellin_singular(elem: &TraceElement, strip_halfwidth: f64) -> Result<SingularPart> {
    if elem.sigma.im.abs() >= strip_halfwidth {
        return Err(WedgeError::Domain(format!(
            "pole {:.6}{:+.6}i lies outside the strip",
            elem.sigma.re, elem.sigma.im
        )));
    }
    let mut fact = 1.0;
    let laurent = elem
        .coeffs
        .iter()
        .enumerate()
        .map(|(j, v)| {
            if j > 0 {
                fact *= j as f64;
            }
            let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
            v * real(sign * fact)
        })
        .collect();
    Ok(SingularPart { pole: elem.sigma, laurent })
}

fn transition_rule(cutoff: &Cutoff) -> Vec<(f64, f64)> {
    let hi = cutoff.zero.max(1.0);
    let mut pts = vec![];
    // split at 1 where the indicator jumps
    if cutoff.flat < 1.0 {
        pts.extend(composite(cutoff.flat, 1.0, 8, 16));
    }
    if hi > 1.0 {
        pts.extend(composite(cutoff.flat.max(1.0), hi, 8, 16));
    }
    pts
}

/// Entire part `int (omega - 1_{x<1}) u x^{-i sigma} dx/x` of the cut-off transform.
pub fn mellin_entire_part(u: &dyn Fn(f64) -> CVec, dim: usize, sigma: C64, cutoff: &Cutoff) -> CVec {
    let mut out = CVec::zeros(dim);
    for (x, w) in transition_rule(cutoff) {
        let ind = if x < 1.0 { 1.0 } else { 0.0 };
        let f = cutoff.eval(x) - ind;
        if f != 0.0 {
            out += u(x) * ((-I * sigma * x.ln()).exp() * (w * f / x));
        }
    }
    out
}

/// Full cut-off transform, continued analytically past the convergence half-plane.
pub fn mellin_cutoff(elem: &TraceElement, sigma: C64, cutoff: &Cutoff, strip_halfwidth: f64) -> Result<CVec> {
    let sp = mellin_singular(elem, strip_halfwidth)?;
    let dim = elem.coeffs[0].len();
    Ok(sp.eval(sigma) + mellin_entire_part(&|x| elem.eval(x), dim, sigma, cutoff))
}

/// Direct numerical cut-off Mellin transform (valid for `Im sigma > Im sigma_0`).
/// On `(0, flat]` the substitution `x = e^{-t}` is integrated with composite
/// Gauss-Legendre until the integrand has decayed below double precision.
pub fn mellin_quadrature(u: &dyn Fn(f64) -> CVec, dim: usize, sigma: C64, decay: f64, cutoff: &Cutoff) -> CVec {
    let t0 = -cutoff.flat.ln();
    let len = (45.0 + 10.0 * (1.0 + 1.0 / decay).ln()) / decay;
    let panels = ((len / 0.25).ceil() as usize).max(8);
    let mut out = CVec::zeros(dim);
    for (t, w) in composite(t0, t0 + len, panels, 16) {
        out += u((-t).exp()) * ((I * sigma * t).exp() * w);
    }
    for (x, w) in composite(cutoff.flat, cutoff.zero, 8, 16) {
        out += u(x) * ((-I * sigma * x.ln()).exp() * (w * cutoff.eval(x) / x));
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RectContour {
    pub re_min: f64,
    pub re_max: f64,
    pub im_min: f64,
    pub im_max: f64,
    pub n_quad: usize,
}

impl RectContour {
    /// Rectangle with `margin` around the given poles, clipped to the strip.
    pub fn around(poles: &[C64], margin: f64, n_quad: usize, strip_halfwidth: f64) -> Self {
        let (mut a, mut b, mut c, mut d) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
        if let Some(p) = poles.first() {
            (a, b, c, d) = (p.re, p.re, p.im, p.im);
        }
        for p in poles {
            a = a.min(p.re);
            b = b.max(p.re);
            c = c.min(p.im);
            d = d.max(p.im);
        }
        // poles close to a weight line get half the remaining gap instead
        let h = strip_halfwidth;
        let im_min = if c - margin > -h { c - margin } else { 0.5 * (c - h) };
        let im_max = if d + margin < h { d + margin } else { 0.5 * (d + h) };
        Self { re_min: a - margin, re_max: b + margin, im_min, im_max, n_quad }
    }

    fn distance(&self, p: C64) -> f64 {
        let dx = (p.re - self.re_min).min(self.re_max - p.re);
        let dy = (p.im - self.im_min).min(self.im_max - p.im);
        dx.min(dy)
    }

    pub fn validate(&self, poles: &[C64], strip_halfwidth: f64, root_tol: f64) -> Result<()> {
        if !(self.re_min < self.re_max && self.im_min < self.im_max) {
            return Err(WedgeError::Contour("rectangle has empty interior".into()));
        }
        if self.im_min <= -strip_halfwidth || self.im_max >= strip_halfwidth {
            return Err(WedgeError::Contour(format!(
                "rectangle Im range [{}, {}] leaves the strip",
                self.im_min, self.im_max
            )));
        }
        for p in poles {
            let d = self.distance(*p);
            if d < 10.0 * root_tol {
                return Err(WedgeError::Contour(format!(
                    "pole {:.6}{:+.6}i is {d:.3e} from (or outside) the contour",
                    p.re, p.im
                )));
            }
        }
        Ok(())
    }

    /// Counterclockwise Gauss-Legendre nodes `(sigma, d sigma weight)`.
    pub fn nodes(&self) -> Vec<(C64, C64)> {
        let (x, w) = gauss_legendre(self.n_quad);
        let corners = [
            C64::new(self.re_min, self.im_min),
            C64::new(self.re_max, self.im_min),
            C64::new(self.re_max, self.im_max),
            C64::new(self.re_min, self.im_max),
        ];
        let mut out = Vec::with_capacity(4 * self.n_quad);
        for k in 0..4 {
            let (a, b) = (corners[k], corners[(k + 1) % 4]);
            let half = (b - a) * 0.5;
            for (xi, wi) in x.iter().zip(&w) {
                out.push((a + half * (xi + 1.0), half * *wi));
            }
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum PairingMode {
    Residue,
    Quadrature,
}

/// `beta[(a, b)] = beta(tau_a, tau*_b)`.
#[derive(Clone, Debug)]
pub struct PairingMatrix {
    pub beta: CMat,
    pub mode: PairingMode,
}

fn poles_of(trace: &TraceSpace, trace_star: &TraceSpace) -> Vec<C64> {
    let mut p: Vec<C64> = trace.basis.iter().map(|e| e.sigma).collect();
    p.extend(trace_star.basis.iter().map(|e| e.sigma.conj()));
    p
}

/// Rectangle around both pole sets with the given margin and 400 nodes per side.
pub fn default_contour(trace: &TraceSpace, trace_star: &TraceSpace, margin: f64) -> RectContour {
    RectContour::around(&poles_of(trace, trace_star), margin, 400, 0.5)
}

fn residue_entry(
    pencil: &IndicialPencil,
    weight: f64,
    su: &SingularPart,
    sv: &SingularPart,
) -> C64 {
    let p1 = su.pole;
    let p2 = sv.pole.conj();
    let mut total = C64::new(0.0, 0.0);
    for (k0, ck) in su.laurent.iter().enumerate() {
        let k = k0 + 1;
        let ac = &pencil.m_a * ck;
        let bc = &pencil.m_b * ck;
        for (l0, dl) in sv.laurent.iter().enumerate() {
            let l = l0 + 1;
            let n = k + l;
            if n >= 3 {
                continue;
            }
            let a = dl.dotc(&ac) * weight;
            let b = dl.dotc(&bc) * weight;
            // sum of residues of (a sigma + b) / ((sigma-p1)^k (sigma-p2)^l)
            let res = if n == 1 { a * (p1 * k as f64 + p2 * l as f64) + b } else { a };
            total += res * I.powu(k as u32) * (-I).powu(l as u32);
        }
    }
    // (1/2pi) * 2 pi i * sum of residues
    I * total
}

pub fn green_pairing(
    trace: &TraceSpace,
    trace_star: &TraceSpace,
    pencil: &IndicialPencil,
    fiber: &FiberModel,
    contour: &RectContour,
    mode: PairingMode,
) -> Result<PairingMatrix> {
    contour.validate(&poles_of(trace, trace_star), 0.5, 1e-8)?;
    let su: Vec<SingularPart> =
        trace.basis.iter().map(|e| mellin_singular(e, 0.5)).collect::<Result<_>>()?;
    let sv: Vec<SingularPart> =
        trace_star.basis.iter().map(|e| mellin_singular(e, 0.5)).collect::<Result<_>>()?;
    let w = fiber.coordinate_weight();
    let mut beta = CMat::zeros(su.len(), sv.len());
    match mode {
        PairingMode::Residue => {
            for (a, u) in su.iter().enumerate() {
                for (b, v) in sv.iter().enumerate() {
                    beta[(a, b)] = residue_entry(pencil, w, u, v);
                }
            }
        }
        PairingMode::Quadrature => {
            let nodes = contour.nodes();
            for (sigma, ds) in nodes {
                let p = pencil.eval(sigma);
                let pu: Vec<CVec> = su.iter().map(|u| &p * u.eval(sigma)).collect();
                let vv: Vec<CVec> = sv.iter().map(|v| v.eval(sigma.conj())).collect();
                for (a, x) in pu.iter().enumerate() {
                    for (b, y) in vv.iter().enumerate() {
                        beta[(a, b)] += y.dotc(x) * (ds * w);
                    }
                }
            }
            beta /= real(2.0 * std::f64::consts::PI);
        }
    }
    Ok(PairingMatrix { beta, mode })
}

/// Quadrature-mode pairing with full cut-off Mellin transforms (entire parts
/// included), for checking independence of the cutoffs.
pub fn green_pairing_with_cutoffs(
    trace: &TraceSpace,
    trace_star: &TraceSpace,
    pencil: &IndicialPencil,
    fiber: &FiberModel,
    contour: &RectContour,
    omega: &Cutoff,
    omega_star: &Cutoff,
) -> Result<CMat> {
    contour.validate(&poles_of(trace, trace_star), 0.5, 1e-8)?;
    let w = fiber.coordinate_weight();
    let mut beta = CMat::zeros(trace.dim(), trace_star.dim());
    for (sigma, ds) in contour.nodes() {
        let p = pencil.eval(sigma);
        let pu: Vec<CVec> = trace
            .basis
            .iter()
            .map(|e| mellin_cutoff(e, sigma, omega, 0.5).map(|m| &p * m))
            .collect::<Result<_>>()?;
        let vv: Vec<CVec> = trace_star
            .basis
            .iter()
            .map(|e| mellin_cutoff(e, sigma.conj(), omega_star, 0.5))
            .collect::<Result<_>>()?;
        for (a, x) in pu.iter().enumerate() {
            for (b, y) in vv.iter().enumerate() {
                beta[(a, b)] += y.dotc(x) * (ds * w);
            }
        }
    }
    Ok(beta / real(2.0 * std::f64::consts::PI))
}

/// Real-space Green form `(A omega u, omega~ v) - (omega u, A* omega~ v)
/// = -i int (omega omega~)' (M_A u, v) dx` for `u`, `v` annihilated by the
/// boundary operator and its adjoint.
pub fn green_form_direct(
    trace: &TraceSpace,
    trace_star: &TraceSpace,
    pencil: &IndicialPencil,
    fiber: &FiberModel,
    omega: &Cutoff,
    omega_star: &Cutoff,
) -> CMat {
    let lo = omega.flat.min(omega_star.flat);
    let hi = omega.zero.max(omega_star.zero);
    let w = fiber.coordinate_weight();
    let mut beta = CMat::zeros(trace.dim(), trace_star.dim());
    for (x, q) in composite(lo, hi, 32, 16) {
        let d = omega.deriv(x) * omega_star.eval(x) + omega.eval(x) * omega_star.deriv(x);
        if d == 0.0 {
            continue;
        }
        let mu: Vec<CVec> = trace.basis.iter().map(|e| &pencil.m_a * e.eval(x)).collect();
        let vs: Vec<CVec> = trace_star.basis.iter().map(|e| e.eval(x)).collect();
        for (a, x_) in mu.iter().enumerate() {
            for (b, y) in vs.iter().enumerate() {
                beta[(a, b)] += y.dotc(x_) * (-I * d * q * w);
            }
        }
    }
    beta
}

/// Largest entrywise deviation of the pairing across rectangles.
pub fn pairing_rectangle_independence(
    trace: &TraceSpace,
    trace_star: &TraceSpace,
    pencil: &IndicialPencil,
    fiber: &FiberModel,
    contours: &[RectContour],
    mode: PairingMode,
) -> Result<f64> {
    let mats: Vec<CMat> = contours
        .iter()
        .map(|c| green_pairing(trace, trace_star, pencil, fiber, c, mode).map(|p| p.beta))
        .collect::<Result<_>>()?;
    let mut dev: f64 = 0.0;
    for m in mats.iter().skip(1) {
        dev = dev.max(crate::linalg::max_abs(&(m - &mats[0])));
    }
    Ok(dev)
}

/// `|| X^T B + B conj(X*) || / ||B||` where `X`, `X*` are `x d/dx` on the two
/// trace spaces: zero iff `beta(x d/dx u, v) + beta(u, x d/dx v) = 0`.
pub fn skew_adjoint_check(trace: &TraceSpace, trace_star: &TraceSpace, beta: &CMat) -> f64 {
    if beta.is_empty() {
        return 0.0;
    }
    let x = trace.x_dx();
    let xs = trace_star.x_dx();
    let r = x.transpose() * beta + beta * xs.map(|z| z.conj());
    spectral_norm(&r) / spectral_norm(beta).max(f64::MIN_POSITIVE)
}

/// The beta-adjoint `g# = conj(B^{-1} g^T B)` of `g` should have the spectrum of
/// `1 - g*`. Returns the largest distance between the sorted spectra.
pub fn sharp_spectrum_check(trace: &TraceSpace, trace_star: &TraceSpace, beta: &CMat) -> Result<f64> {
    if beta.is_empty() {
        return Ok(0.0);
    }
    let binv = inverse(beta).ok_or_else(|| WedgeError::NumericalRank("pairing matrix is singular".into()))?;
    let sharp = (binv * trace.g.transpose() * beta).map(|z| z.conj());
    let n = trace_star.dim();
    let target = CMat::identity(n, n) - &trace_star.g;
    let key = |z: &C64| (z.re * 1e6).round() as i64 * 1_000_000_000 + (z.im * 1e6).round() as i64;
    let mut a = eigenvalues(&sharp);
    let mut b = eigenvalues(&target);
    a.sort_by_key(key);
    b.sort_by_key(key);
    Ok(a.iter().zip(&b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max))
}

/// Ratio of smallest to largest singular value of the pairing matrix.
pub fn nondegeneracy(beta: &CMat) -> f64 {
    let s = svd(beta).s;
    match (s.first(), s.last()) {
        (Some(&hi), Some(&lo)) if hi > 0.0 => lo / hi,
        _ => 0.0,
    }
}
