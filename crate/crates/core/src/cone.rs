//! Normal family `A(eta) = x^{-1}(M_A xD_x + M_B + x M_C(eta))` on the model
//! cone, its decaying kernel, trace extraction and the conditions built on them.
//!
//! In `t = ln x` the equation `A(eta) u = 0` reads `u_t = (iK - i e^t C) u` with
//! `K = -M_A^{-1} M_B` and `C = M_A^{-1} M_C`. Solutions decaying at infinity
//! leave along the stable subspace of `-iC`. That subspace is carried inward
//! with RK4 and re-orthonormalized at every grid node. Behaviour at the tip is
//! read off a least-squares fit against the Frobenius ansatz
//! `x^{n + i sigma} log^j x`, `n = 0..=3`, over the roots of each decoupled block.

use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Result, WedgeError};
use crate::fiber::{ConeFunction, ConeGrid, FiberModel};
use crate::indicial::{adjoint_pencil, assemble_pencil, boundary_spectrum, build_trace_space, IndicialPencil, SpectrumOptions, TraceSpace};
use crate::linalg::{
    cluster, coupling_components, eigenvalues, fd_weights, generalized_eigenspace, max_principal_angle,
    min_singular, orthonormalize, real, solve, spectral_norm, submatrix, svd, CMat, CVec, C64, I,
};
use crate::operator::WedgeOp;

#[derive(Clone, Debug)]
pub struct ConeODESystem {
    pub m_a: CMat,
    pub m_b: CMat,
    /// Discretized `a_y[j]`.
    pub m_y: Vec<CMat>,
    pub eta: Vec<f64>,
}

pub fn assemble_normal(op: &WedgeOp, model: &FiberModel, y: &[f64], eta: &[f64]) -> Result<ConeODESystem> {
    if eta.len() != op.edge_dim {
        return Err(WedgeError::Shape { expected: op.edge_dim, got: eta.len() });
    }
    let p = assemble_pencil(op, model, y)?;
    let f = op.freeze(model, y);
    Ok(ConeODESystem { m_a: p.m_a, m_b: p.m_b, m_y: f.m_y, eta: eta.to_vec() })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ConeSettings {
    /// Radial nodes per unit of `ln x`.
    pub density: f64,
    /// `x_max = x_max_factor / decay rate`.
    pub x_max_factor: f64,
    /// `x_min = x_min_factor / |C|`.
    pub x_min_factor: f64,
    /// Fit window `[lo, hi] / |C|`.
    pub window: (f64, f64),
    /// Largest inadmissible-coefficient ratio still counted as kernel.
    pub admissibility_tol: f64,
    pub residual_tol: f64,
    pub tail_tol: f64,
    /// Smallest singular value of the rescaled trace matrix for injectivity.
    pub trace_rank_tol: f64,
}

impl Default for ConeSettings {
    fn default() -> Self {
        Self {
            density: 60.0,
            x_max_factor: 40.0,
            x_min_factor: 1e-7,
            window: (1e-4, 1e-2),
            admissibility_tol: 1e-5,
            residual_tol: 1e-6,
            tail_tol: 1e-6,
            trace_rank_tol: 1e-6,
        }
    }
}

impl ConeODESystem {
    pub fn m_c(&self) -> CMat {
        let n = self.m_a.nrows();
        let mut c = CMat::zeros(n, n);
        for (m, &e) in self.m_y.iter().zip(&self.eta) {
            c += m * real(e);
        }
        c
    }

    pub fn eta_norm(&self) -> f64 {
        self.eta.iter().map(|e| e * e).sum::<f64>().sqrt()
    }

    pub fn with_eta(&self, eta: &[f64]) -> Self {
        Self { eta: eta.to_vec(), ..self.clone() }
    }

    pub fn pencil(&self) -> IndicialPencil {
        IndicialPencil { m_a: self.m_a.clone(), m_b: self.m_b.clone() }
    }

    /// Formal adjoint `x^{-1}(M_A^* xD_x + M_B^* + x M_C^*)`.
    pub fn adjoint(&self, model: &FiberModel) -> Self {
        Self {
            m_a: model.adjoint(&self.m_a),
            m_b: model.adjoint(&self.m_b),
            m_y: self.m_y.iter().map(|m| model.adjoint(m)).collect(),
            eta: self.eta.clone(),
        }
    }

    pub fn blocks(&self) -> Vec<Vec<usize>> {
        let mut mats: Vec<&CMat> = vec![&self.m_a, &self.m_b];
        mats.extend(self.m_y.iter());
        coupling_components(&mats, self.m_a.nrows())
    }

    fn k_and_c(&self) -> Result<(CMat, CMat)> {
        let k = self.pencil().k_matrix()?;
        let c = solve(&self.m_a, &self.m_c())
            .ok_or_else(|| WedgeError::WEllipticity("leading coefficient M_A is singular".into()))?;
        Ok((k, c))
    }

    /// Spectral norm of `C = M_A^{-1} M_C`; the natural length scale is its inverse.
    pub fn scale(&self) -> Result<f64> {
        let (_, c) = self.k_and_c()?;
        let s = spectral_norm(&c);
        if s == 0.0 {
            return Err(WedgeError::Domain("normal family at eta = 0 has no decay scale".into()));
        }
        Ok(s)
    }

    /// Smallest `|Re lambda|` over the spectrum of `-iC`.
    pub fn decay_rate(&self) -> Result<f64> {
        let (_, c) = self.k_and_c()?;
        let s = spectral_norm(&c);
        let ev = eigenvalues(&(&c * (-I)));
        let rate = ev.iter().map(|l| l.re.abs()).fold(f64::INFINITY, f64::min);
        if !(rate > 1e-8 * s.max(f64::MIN_POSITIVE)) {
            return Err(WedgeError::DegenerateSymbol(format!(
                "-iM_A^(-1)M_C(eta) has an eigenvalue within {rate:.3e} of the imaginary axis at eta = {:?}",
                self.eta
            )));
        }
        Ok(rate)
    }

    /// Log-uniform grid scaled with the symbol: mapping `eta -> rho eta`
    /// divides every node by `rho`.
    pub fn default_grid(&self, settings: &ConeSettings) -> Result<ConeGrid> {
        let s = self.scale()?;
        let rate = self.decay_rate()?;
        ConeGrid::log_uniform(settings.x_min_factor / s, settings.x_max_factor / rate, settings.density)
    }

    /// `P u = M_A xD_x u + M_B u + x M_C u` (that is `x A u`) at each node,
    /// with `xD_x = -i d/dt` by ninth-order-accurate finite differences in `t`.
    pub fn apply_x(&self, u: &ConeFunction) -> ConeFunction {
        let grid = &u.grid;
        let n = grid.len();
        let mc = self.m_c();
        let dt = log_derivative(&u.values, grid);
        let mut out = CMat::zeros(u.values.nrows(), n);
        for j in 0..n {
            let x = grid.nodes[j];
            let uj = u.values.column(j);
            let col = &self.m_a * dt.column(j) * (-I) + &self.m_b * uj + &mc * uj * real(x);
            out.set_column(j, &col);
        }
        ConeFunction { values: out, fiber: u.fiber.clone(), grid: u.grid.clone() }
    }

    /// `A(eta) u`.
    pub fn apply(&self, u: &ConeFunction) -> ConeFunction {
        let mut p = self.apply_x(u);
        for (j, &x) in u.grid.nodes.iter().enumerate() {
            let col = p.values.column(j) / real(x);
            p.values.set_column(j, &col);
        }
        p
    }

    /// Largest `|P u|` relative to the size of its terms, over all nodes.
    pub fn residual(&self, u: &ConeFunction) -> f64 {
        let grid = &u.grid;
        let pu = self.apply_x(u);
        let dt = log_derivative(&u.values, grid);
        let (na, nb, nc) = (spectral_norm(&self.m_a), spectral_norm(&self.m_b), spectral_norm(&self.m_c()));
        let mut num: f64 = 0.0;
        let mut den: f64 = 0.0;
        for (j, &x) in grid.nodes.iter().enumerate() {
            num = num.max(pu.values.column(j).norm());
            den = den.max(na * dt.column(j).norm() + (nb + x * nc) * u.values.column(j).norm());
        }
        num / den.max(f64::MIN_POSITIVE)
    }
}

/// Nine-point stencils for `d/dt` on a log-uniform grid: centered in the
/// interior, one-sided near the ends. Entry `j` is `(start, weights)`.
fn log_stencils(grid: &ConeGrid) -> Vec<(usize, Vec<f64>)> {
    let n = grid.len();
    let h = grid.log_step;
    let w = 9.min(n);
    let mut cache: Vec<Option<Vec<f64>>> = vec![None; w];
    (0..n)
        .map(|j| {
            let start = j.saturating_sub(w / 2).min(n - w);
            let off = j - start;
            let wts = cache[off].get_or_insert_with(|| {
                let xs: Vec<f64> = (0..w).map(|k| (k as f64 - off as f64) * h).collect();
                fd_weights(0.0, &xs)
            });
            (start, wts.clone())
        })
        .collect()
}

fn log_derivative(values: &CMat, grid: &ConeGrid) -> CMat {
    let mut out = CMat::zeros(values.nrows(), grid.len());
    for (j, (start, wts)) in log_stencils(grid).into_iter().enumerate() {
        let mut d = CVec::zeros(values.nrows());
        for (k, &c) in wts.iter().enumerate() {
            if c != 0.0 {
                d += values.column(start + k) * real(c);
            }
        }
        out.set_column(j, &d);
    }
    out
}

/// `d/dt` as an `n x n` matrix acting on nodal values.
pub fn log_derivative_matrix(grid: &ConeGrid) -> CMat {
    let n = grid.len();
    let mut d = CMat::zeros(n, n);
    for (j, (start, wts)) in log_stencils(grid).into_iter().enumerate() {
        for (k, &c) in wts.iter().enumerate() {
            d[(j, start + k)] = real(c);
        }
    }
    d
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum RootClass {
    Strip,
    /// `Im sigma <= -1/2`: square integrable at the tip, not in the trace space.
    Flat,
    /// `Im sigma >= 1/2`.
    Inadmissible,
    /// Generic remainder exponent used by stand-alone extraction.
    Remainder,
}

#[derive(Clone, Debug)]
struct Exponent {
    /// Power `n + i sigma` of `x`.
    power: C64,
    logs: usize,
    n: usize,
    root: C64,
    class: RootClass,
}

fn classify(sigma: C64, h: f64) -> RootClass {
    if sigma.im >= h {
        RootClass::Inadmissible
    } else if sigma.im <= -h {
        RootClass::Flat
    } else {
        RootClass::Strip
    }
}

/// Frobenius exponents of a block; coincident powers keep the lowest shift.
fn block_exponents(roots: &[(C64, usize)], remainder: &[f64]) -> Vec<Exponent> {
    let mut out: Vec<Exponent> = vec![];
    let mut cands = vec![];
    for &(sigma, mult) in roots {
        for n in 0..=3usize {
            cands.push(Exponent { power: I * sigma + n as f64, logs: mult, n, root: sigma, class: classify(sigma, 0.5) });
        }
    }
    for &p in remainder {
        cands.push(Exponent { power: real(p), logs: 1, n: 1, root: real(0.0), class: RootClass::Remainder });
    }
    cands.sort_by_key(|e| e.n);
    for e in cands {
        if let Some(prev) = out.iter_mut().find(|o| (o.power - e.power).norm() < 1e-6) {
            prev.logs = prev.logs.max(e.logs);
        } else {
            out.push(e);
        }
    }
    out
}

struct Fit {
    /// Column descriptors `(exponent index, log power, local component)`.
    cols: Vec<(usize, usize, usize)>,
    /// Column norms on the window.
    norms: Vec<f64>,
    /// Normalized coefficients, one column per fitted sample vector.
    coef: CMat,
    rel_residual: f64,
}

fn ansatz_value(e: &Exponent, j: usize, x: f64) -> C64 {
    let l = x.ln();
    (e.power * l).exp() * l.powi(j as i32)
}

fn fit_block(exps: &[Exponent], d: usize, xs: &[f64], samples: &CMat) -> Fit {
    let mut cols = vec![];
    for (ei, e) in exps.iter().enumerate() {
        for j in 0..e.logs {
            for c in 0..d {
                cols.push((ei, j, c));
            }
        }
    }
    let rows = xs.len() * d;
    let mut f = CMat::zeros(rows, cols.len());
    for (k, &(ei, j, c)) in cols.iter().enumerate() {
        for (r, &x) in xs.iter().enumerate() {
            f[(r * d + c, k)] = ansatz_value(&exps[ei], j, x);
        }
    }
    let norms: Vec<f64> = (0..cols.len()).map(|k| f.column(k).norm().max(f64::MIN_POSITIVE)).collect();
    for (k, nrm) in norms.iter().enumerate() {
        let col = f.column(k) / real(*nrm);
        f.set_column(k, &col);
    }
    let coef = crate::linalg::lstsq(&f, samples, 1e-13);
    let resid = &f * &coef - samples;
    let mut rel: f64 = 0.0;
    for k in 0..samples.ncols() {
        rel = rel.max(resid.column(k).norm() / samples.column(k).norm().max(f64::MIN_POSITIVE));
    }
    Fit { cols, norms, coef, rel_residual: rel }
}

impl Fit {
    fn rows_of(&self, exps: &[Exponent], pred: impl Fn(&Exponent, usize) -> bool) -> Vec<usize> {
        self.cols
            .iter()
            .enumerate()
            .filter(|(_, &(ei, j, _))| pred(&exps[ei], j))
            .map(|(k, _)| k)
            .collect()
    }

    /// Evaluate the fitted expansion of sample combination `c`, skipping inadmissible terms.
    fn eval(&self, exps: &[Exponent], c: &CVec, d: usize, x: f64) -> CVec {
        let a = &self.coef * c;
        let mut out = CVec::zeros(d);
        for (k, &(ei, j, comp)) in self.cols.iter().enumerate() {
            if exps[ei].class == RootClass::Inadmissible {
                continue;
            }
            out[comp] += a[k] / self.norms[k] * ansatz_value(&exps[ei], j, x);
        }
        out
    }

    /// Leading strip coefficients `(root, log^0 coefficient vector in block coordinates)`.
    fn strip_leading(&self, exps: &[Exponent], c: &CVec, d: usize) -> Vec<(C64, CVec)> {
        let a = &self.coef * c;
        let mut out: Vec<(C64, CVec)> = vec![];
        for (k, &(ei, j, comp)) in self.cols.iter().enumerate() {
            let e = &exps[ei];
            if e.class != RootClass::Strip || e.n != 0 || j != 0 {
                continue;
            }
            let idx = match out.iter().position(|(r, _)| (*r - e.root).norm() < 1e-12) {
                Some(i) => i,
                None => {
                    out.push((e.root, CVec::zeros(d)));
                    out.len() - 1
                }
            };
            out[idx].1[comp] += a[k] / self.norms[k];
        }
        out
    }
}

/// Trace coordinates from leading strip coefficients given per block.
fn to_trace_coords(trace: &TraceSpace, leading: &[(C64, CVec)]) -> CVec {
    let n = trace.leading.nrows();
    let mut t = CVec::zeros(trace.dim());
    for &(col0, m) in &trace.root_blocks {
        let sigma = trace.basis[col0].sigma;
        let mut v = CVec::zeros(n);
        for (r, lv) in leading {
            if (*r - sigma).norm() < 1e-5 {
                v += lv;
            }
        }
        let w = trace.leading.columns(col0, m);
        t.rows_mut(col0, m).copy_from(&(w.adjoint() * v));
    }
    t
}

struct BlockData {
    comps: Vec<usize>,
    k: CMat,
    c: CMat,
    exps: Vec<Exponent>,
}

fn block_data(system: &ConeODESystem, remainder: &[f64], cluster_tol: f64) -> Result<Vec<BlockData>> {
    let (k, c) = system.k_and_c()?;
    let mut out = vec![];
    for comps in system.blocks() {
        let kb = submatrix(&k, &comps, &comps);
        let cb = submatrix(&c, &comps, &comps);
        let roots = cluster(&eigenvalues(&kb), cluster_tol);
        let exps = block_exponents(&roots, remainder);
        out.push(BlockData { comps, k: kb, c: cb, exps });
    }
    Ok(out)
}

fn window_nodes(grid: &ConeGrid, lo: f64, hi: f64) -> Result<(usize, usize)> {
    let first = grid.nodes.iter().position(|&x| x >= lo * (1.0 - 1e-12));
    let last = grid.nodes.iter().rposition(|&x| x <= hi * (1.0 + 1e-12));
    match (first, last) {
        (Some(a), Some(b)) if b > a + 8 => Ok((a, b)),
        _ => Err(WedgeError::Resolution(format!(
            "grid [{:.3e}, {:.3e}] does not resolve the fit window [{lo:.3e}, {hi:.3e}]",
            grid.x_min(),
            grid.x_max
        ))),
    }
}

fn rk4_interval(kb: &CMat, cb: &CMat, y: &CMat, t_from: f64, t_to: f64) -> CMat {
    let h_total = t_to - t_from;
    let stiff = spectral_norm(kb).max(t_from.max(t_to).exp() * spectral_norm(cb));
    let nsub = ((h_total.abs() * stiff / 0.02).ceil() as usize).max(1);
    let h = h_total / nsub as f64;
    let ik = kb * I;
    let ic = cb * I;
    let rhs = |t: f64, y: &CMat| -> CMat { &ik * y - &ic * y * real(t.exp()) };
    let mut y = y.clone();
    let mut t = t_from;
    for _ in 0..nsub {
        let k1 = rhs(t, &y);
        let k2 = rhs(t + 0.5 * h, &(&y + &k1 * real(0.5 * h)));
        let k3 = rhs(t + 0.5 * h, &(&y + &k2 * real(0.5 * h)));
        let k4 = rhs(t + h, &(&y + &k3 * real(h)));
        y += (k1 + k2 * real(2.0) + k3 * real(2.0) + k4) * real(h / 6.0);
        t += h;
    }
    y
}

/// Inward shooting of the decaying subspace: orthonormal bases `q[j]` at every
/// node and factors `r[j]` with `Phi(t_{j+1} -> t_j) q[j+1] = q[j] r[j]`.
fn shoot(kb: &CMat, cb: &CMat, stable: CMat, grid: &ConeGrid) -> (Vec<CMat>, Vec<CMat>) {
    let n = grid.len();
    let ts: Vec<f64> = grid.nodes.iter().map(|x| x.ln()).collect();
    let mut q = vec![CMat::zeros(0, 0); n];
    let mut r = vec![CMat::zeros(0, 0); n];
    q[n - 1] = stable;
    for j in (0..n - 1).rev() {
        let y = rk4_interval(kb, cb, &q[j + 1], ts[j + 1], ts[j]);
        let dec = y.qr();
        q[j] = dec.q();
        r[j] = dec.r();
    }
    (q, r)
}

fn stable_subspace(cb: &CMat, rate_floor: f64) -> Result<CMat> {
    let d = cb.nrows();
    let a = cb * (-I);
    let ev = eigenvalues(&a);
    if let Some(l) = ev.iter().find(|l| l.re.abs() <= rate_floor) {
        return Err(WedgeError::DegenerateSymbol(format!(
            "-iM_A^(-1)M_C has the eigenvalue {:.3e}{:+.3e}i on the imaginary axis",
            l.re, l.im
        )));
    }
    let mut cols: Vec<CVec> = vec![];
    for (lam, mult) in cluster(&ev, 1e-9 * (1.0 + spectral_norm(cb))) {
        if lam.re < 0.0 {
            let w = generalized_eigenspace(&a, lam, mult);
            cols.extend(w.column_iter().map(|c| c.into_owned()));
        }
    }
    if cols.is_empty() {
        return Ok(CMat::zeros(d, 0));
    }
    let m = cols.len();
    Ok(orthonormalize(&CMat::from_columns(&cols)).columns(0, m).into_owned())
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct KernelDiagnostics {
    /// Largest `A(eta)` residual over kernel elements.
    pub residual: f64,
    /// Largest `||u|_{[x_max/2, x_max]}|| / ||u||`.
    pub tail_fraction: f64,
    /// Largest inadmissible ratio among accepted directions.
    pub kernel_ratio_max: f64,
    /// Smallest inadmissible ratio among rejected directions.
    pub rejected_ratio_min: f64,
    /// Worst relative residual of the Frobenius fits.
    pub fit_residual: f64,
    pub x_max: f64,
}

#[derive(Clone, Debug)]
pub struct KernelBasis {
    pub eta: Vec<f64>,
    pub elements: Vec<ConeFunction>,
    /// Trace coordinates of the elements as columns (`dim T x dim`).
    pub traces: CMat,
    pub dim: usize,
    pub diagnostics: KernelDiagnostics,
}

impl KernelBasis {
    /// Orthonormal basis (in trace coordinates) of the image of the trace map.
    pub fn trace_span(&self) -> CMat {
        let d = svd(&self.traces);
        let top = d.s.first().copied().unwrap_or(0.0);
        let r = d.s.iter().filter(|&&s| s > 1e-10 * top.max(f64::MIN_POSITIVE)).count();
        d.u.columns(0, r).into_owned()
    }
}

/// Kernel of `A(eta)` on the maximal domain: decaying at infinity and built
/// only from tip exponents with `Im sigma < 1/2`.
pub fn kernel_max(
    system: &ConeODESystem,
    fiber: &Arc<FiberModel>,
    grid: &Arc<ConeGrid>,
    trace: &TraceSpace,
    settings: &ConeSettings,
) -> Result<KernelBasis> {
    if system.eta_norm() == 0.0 {
        return Err(WedgeError::Domain("kernel_max requires eta != 0".into()));
    }
    let s = system.scale()?;
    let rate_floor = 1e-8 * s;
    let (wlo, whi) = (settings.window.0 / s, settings.window.1 / s);
    let (ia, ib) = window_nodes(grid, wlo, whi)?;
    let xs: Vec<f64> = grid.nodes[ia..=ib].to_vec();
    let ndisc = system.m_a.nrows();
    let n_nodes = grid.len();
    let mut elements = vec![];
    let mut traces: Vec<CVec> = vec![];
    let mut diag = KernelDiagnostics { x_max: grid.x_max, rejected_ratio_min: f64::INFINITY, ..Default::default() };

    for blk in block_data(system, &[], 1e-6)? {
        let d = blk.comps.len();
        let stable = stable_subspace(&blk.c, rate_floor)?;
        let m = stable.ncols();
        if m == 0 {
            continue;
        }
        let (q, r) = shoot(&blk.k, &blk.c, stable, grid);
        // coefficient vectors of the basis solutions, parametrized at node ib
        let mut coeff = vec![CMat::zeros(m, m); n_nodes];
        coeff[ib] = CMat::identity(m, m);
        for j in (0..ib).rev() {
            coeff[j] = &r[j] * &coeff[j + 1];
        }
        for j in ib + 1..n_nodes {
            coeff[j] = r[j - 1]
                .clone()
                .solve_upper_triangular(&coeff[j - 1])
                .ok_or_else(|| WedgeError::NumericalRank("singular shooting factor".into()))?;
        }
        let mut samples = CMat::zeros(xs.len() * d, m);
        for (row, j) in (ia..=ib).enumerate() {
            let v = &q[j] * &coeff[j];
            samples.view_mut((row * d, 0), (d, m)).copy_from(&v);
        }
        let fit = fit_block(&blk.exps, d, &xs, &samples);
        diag.fit_residual = diag.fit_residual.max(fit.rel_residual);
        if fit.rel_residual > 1e-6 {
            return Err(WedgeError::Extraction(format!(
                "Frobenius fit residual {:.3e} on block {:?}; refine the grid or narrow the window",
                fit.rel_residual, blk.comps
            )));
        }
        // generalized SVD: inadmissible leading coefficients per unit sample norm
        let bad = fit.rows_of(&blk.exps, |e, _| e.class == RootClass::Inadmissible && e.n == 0);
        let qr = samples.clone().qr();
        let ru = qr.r();
        let rinv = ru
            .clone()
            .try_inverse()
            .ok_or_else(|| WedgeError::NumericalRank("decaying solutions are linearly dependent on the fit window".into()))?;
        let z = CMat::from_fn(bad.len(), m, |i, j| fit.coef[(bad[i], j)]);
        let (ratios, dirs) = if bad.is_empty() {
            (vec![0.0; m], CMat::identity(m, m))
        } else {
            let dec = svd(&(&z * &rinv));
            (dec.s, dec.v)
        };
        for k in 0..m {
            let ratio = ratios[k];
            if ratio >= settings.admissibility_tol {
                diag.rejected_ratio_min = diag.rejected_ratio_min.min(ratio);
                continue;
            }
            diag.kernel_ratio_max = diag.kernel_ratio_max.max(ratio);
            let c = &rinv * dirs.column(k);
            let mut values = CMat::zeros(ndisc, n_nodes);
            for j in 0..n_nodes {
                let local = if j < ia { fit.eval(&blk.exps, &c, d, grid.nodes[j]) } else { &q[j] * (&coeff[j] * &c) };
                for (li, &gi) in blk.comps.iter().enumerate() {
                    values[(gi, j)] = local[li];
                }
            }
            let mut u = ConeFunction::new(values, fiber.clone(), grid.clone())?;
            let nrm = u.norm();
            u = u.scale(real(1.0 / nrm));
            let lead: Vec<(C64, CVec)> = fit
                .strip_leading(&blk.exps, &c, d)
                .into_iter()
                .map(|(root, v)| {
                    let mut full = CVec::zeros(ndisc);
                    for (li, &gi) in blk.comps.iter().enumerate() {
                        full[gi] = v[li] / nrm;
                    }
                    (root, full)
                })
                .collect();
            traces.push(to_trace_coords(trace, &lead));
            elements.push(u);
        }
    }

    for u in &elements {
        diag.residual = diag.residual.max(system.residual(u));
        diag.tail_fraction = diag.tail_fraction.max(u.tail_norm(grid.x_max / 2.0) / u.norm());
    }
    if diag.residual > settings.residual_tol {
        return Err(WedgeError::Resolution(format!(
            "kernel residual {:.3e} exceeds {:.1e}; refine the radial grid",
            diag.residual, settings.residual_tol
        )));
    }
    if diag.tail_fraction > settings.tail_tol {
        return Err(WedgeError::Resolution(format!(
            "kernel tail fraction {:.3e} at x_max = {:.3e} exceeds {:.1e}; enlarge x_max",
            diag.tail_fraction, grid.x_max, settings.tail_tol
        )));
    }
    let dim = elements.len();
    let traces = if dim == 0 { CMat::zeros(trace.dim(), 0) } else { CMat::from_columns(&traces) };
    Ok(KernelBasis { eta: system.eta.clone(), elements, traces, dim, diagnostics: diag })
}

/// Trace coordinates of a maximal-domain function from its values on the fit window.
pub fn trace_extract(
    element: &ConeFunction,
    trace: &TraceSpace,
    system: &ConeODESystem,
    settings: &ConeSettings,
) -> Result<CVec> {
    let s = if system.eta_norm() > 0.0 { system.scale()? } else { 1.0 };
    let (ia, ib) = window_nodes(&element.grid, settings.window.0 / s, settings.window.1 / s)?;
    let xs: Vec<f64> = element.grid.nodes[ia..=ib].to_vec();
    let remainder = [0.5, 1.0, 1.5, 2.0, 2.5, 3.0];
    let ndisc = system.m_a.nrows();
    let mut lead = vec![];
    for blk in block_data(system, &remainder, 1e-6)? {
        let d = blk.comps.len();
        let mut samples = CMat::zeros(xs.len() * d, 1);
        for (row, j) in (ia..=ib).enumerate() {
            for (li, &gi) in blk.comps.iter().enumerate() {
                samples[(row * d + li, 0)] = element.values[(gi, j)];
            }
        }
        if samples.norm() == 0.0 {
            continue;
        }
        let fit = fit_block(&blk.exps, d, &xs, &samples);
        let c = CVec::from_element(1, real(1.0));
        let bad = fit.rows_of(&blk.exps, |e, _| e.class == RootClass::Inadmissible && e.n == 0);
        let ratio = bad.iter().map(|&k| fit.coef[(k, 0)].norm()).fold(0.0, f64::max) / samples.norm();
        if ratio > 1e-4 {
            return Err(WedgeError::Domain(format!(
                "function is not in the maximal domain (singular coefficient ratio {ratio:.3e})"
            )));
        }
        if fit.rel_residual > 1e-4 {
            return Err(WedgeError::Extraction(format!(
                "asymptotic fit residual {:.3e} on block {:?}",
                fit.rel_residual, blk.comps
            )));
        }
        for (root, v) in fit.strip_leading(&blk.exps, &c, d) {
            let mut full = CVec::zeros(ndisc);
            for (li, &gi) in blk.comps.iter().enumerate() {
                full[gi] = v[li];
            }
            lead.push((root, full));
        }
    }
    Ok(to_trace_coords(trace, &lead))
}

/// Injectivity of the trace map on a kernel, judged after rescaling to `|eta| = 1`.
pub fn trace_map_injective(kernel: &KernelBasis, trace: &TraceSpace, settings: &ConeSettings) -> (bool, f64) {
    if kernel.dim == 0 {
        return (true, f64::INFINITY);
    }
    if kernel.dim > trace.dim() {
        return (false, 0.0);
    }
    let e = kernel.eta.iter().map(|v| v * v).sum::<f64>().sqrt();
    let t = trace.kappa(1.0 / e) * &kernel.traces;
    let smin = min_singular(&t);
    (smin >= settings.trace_rank_tol, smin)
}

/// Injectivity of the minimal-domain normal family at one covector.
pub fn check_injectivity_min(
    system: &ConeODESystem,
    fiber: &Arc<FiberModel>,
    grid: &Arc<ConeGrid>,
    trace: &TraceSpace,
    settings: &ConeSettings,
) -> Result<bool> {
    let k = kernel_max(system, fiber, grid, trace, settings)?;
    Ok(trace_map_injective(&k, trace, settings).0)
}

/// Everything the conditions need at one edge point.
#[derive(Clone, Debug)]
pub struct EdgePoint {
    pub y: Vec<f64>,
    pub pencil: IndicialPencil,
    pub trace: TraceSpace,
    pub adj_pencil: IndicialPencil,
    pub adj_trace: TraceSpace,
    pub delta0: f64,
}

pub fn prepare_edge_point(op: &WedgeOp, model: &FiberModel, y: &[f64], opts: SpectrumOptions) -> Result<EdgePoint> {
    let pencil = assemble_pencil(op, model, y)?;
    let spec = boundary_spectrum(&pencil, opts)?;
    let trace = build_trace_space(&pencil, &spec)?;
    let adj_pencil = adjoint_pencil(&pencil, model);
    let adj_spec = boundary_spectrum(&adj_pencil, opts)?;
    let adj_trace = build_trace_space(&adj_pencil, &adj_spec)?;
    Ok(EdgePoint { y: y.to_vec(), pencil, trace, adj_pencil, adj_trace, delta0: spec.delta0() })
}

#[derive(Clone, Debug)]
pub struct NormalRecord {
    pub y: Vec<f64>,
    pub eta: Vec<f64>,
    pub kernel: KernelBasis,
    pub adj_kernel: KernelBasis,
    pub injective_min: bool,
    pub surjective_max: bool,
    pub trace_smin: f64,
    pub adj_trace_smin: f64,
    pub trace_dim: usize,
    /// Orthonormal basis of `K_eta` as leading coefficients in `C^N`.
    pub ambient_span: CMat,
}

impl NormalRecord {
    pub fn n_prime(&self) -> usize {
        self.kernel.dim
    }

    pub fn n_second(&self) -> usize {
        self.adj_kernel.dim
    }

    pub fn rank_identity(&self) -> bool {
        self.kernel.dim + self.adj_kernel.dim == self.trace_dim
    }
}

/// Kernels of `A(eta)` and its adjoint, with injectivity on the minimal domain
/// and surjectivity on the maximal domain.
pub fn normal_conditions(
    op: &WedgeOp,
    model: &Arc<FiberModel>,
    point: &EdgePoint,
    eta: &[f64],
    settings: &ConeSettings,
) -> Result<NormalRecord> {
    let system = assemble_normal(op, model, &point.y, eta)?;
    let adj = system.adjoint(model);
    let grid = Arc::new(system.default_grid(settings)?);
    let adj_grid = Arc::new(adj.default_grid(settings)?);
    let kernel = kernel_max(&system, model, &grid, &point.trace, settings)?;
    let adj_kernel = kernel_max(&adj, model, &adj_grid, &point.adj_trace, settings)?;
    let (inj, smin) = trace_map_injective(&kernel, &point.trace, settings);
    let (sur, smin_adj) = trace_map_injective(&adj_kernel, &point.adj_trace, settings);
    let span = kernel.trace_span();
    let ambient = if span.ncols() == 0 {
        CMat::zeros(point.trace.leading.nrows(), 0)
    } else {
        let a = &point.trace.leading * span;
        let r = a.ncols();
        orthonormalize(&a).columns(0, r).into_owned()
    };
    Ok(NormalRecord {
        y: point.y.clone(),
        eta: eta.to_vec(),
        kernel,
        adj_kernel,
        injective_min: inj,
        surjective_max: sur,
        trace_smin: smin,
        adj_trace_smin: smin_adj,
        trace_dim: point.trace.dim(),
        ambient_span: ambient,
    })
}

/// Surjectivity of the maximal-domain normal family at one covector, through
/// injectivity of the adjoint.
pub fn check_surjectivity_max(
    op: &WedgeOp,
    model: &Arc<FiberModel>,
    y: &[f64],
    eta: &[f64],
    settings: &ConeSettings,
) -> Result<bool> {
    let point = prepare_edge_point(op, model, y, SpectrumOptions::default())?;
    Ok(normal_conditions(op, model, &point, eta, settings)?.surjective_max)
}

fn smooth_test_functions(n: usize, s: f64) -> Vec<Box<dyn Fn(f64) -> CVec + Send + Sync>> {
    (0..3)
        .map(|k| {
            let b = 1.0 + 0.5 * k as f64;
            let v = CVec::from_fn(n, |i, _| C64::new(((i + k) as f64 * 0.7).cos(), ((i * (k + 2)) as f64 * 0.3).sin()));
            Box::new(move |x: f64| &v * real((s * x) / (1.0 + s * x) * (-b * s * x).exp()))
                as Box<dyn Fn(f64) -> CVec + Send + Sync>
        })
        .collect()
}

/// `max || A(rho eta) f - rho kappa_rho A(eta) kappa_rho^{-1} f || / || A(rho eta) f ||`
/// over smooth decaying test functions. `kappa_rho^{-1} f` is sampled on the
/// dilated grid `rho * grid`, so mapping back by `kappa_rho` needs no interpolation.
pub fn homogeneity_check(
    system: &ConeODESystem,
    fiber: &Arc<FiberModel>,
    grid: &Arc<ConeGrid>,
    rho: f64,
) -> Result<f64> {
    if !(rho > 0.0) || !rho.is_finite() {
        return Err(WedgeError::Domain(format!("dilation parameter must be positive, got {rho}")));
    }
    if rho == 1.0 {
        return Ok(0.0);
    }
    let scaled: Vec<f64> = system.eta.iter().map(|e| rho * e).collect();
    let big = system.with_eta(&scaled);
    let dilated = Arc::new(grid.scaled(rho));
    let s = rho.max(1.0) * system.eta_norm().max(f64::MIN_POSITIVE);
    let mut worst: f64 = 0.0;
    for f in smooth_test_functions(fiber.dim(), s) {
        let u = ConeFunction::from_fn(fiber.clone(), grid.clone(), &f)?;
        let lhs = big.apply(&u);
        let pulled = ConeFunction::from_fn(fiber.clone(), dilated.clone(), |x| f(x / rho) / real(rho.sqrt()))?;
        let inner = system.apply(&pulled);
        let rhs = ConeFunction::new(&inner.values * real(rho * rho.sqrt()), fiber.clone(), grid.clone())?;
        worst = worst.max(lhs.sub(&rhs).norm() / lhs.norm().max(f64::MIN_POSITIVE));
    }
    Ok(worst)
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepSample {
    pub component: usize,
    /// Index into `SweepReport::points`.
    pub point: usize,
    pub y: Vec<f64>,
    pub eta: Vec<f64>,
    pub n_prime: usize,
    pub n_second: usize,
    pub trace_dim: usize,
    pub injective_min: bool,
    pub surjective_max: bool,
    pub rank_identity: bool,
    pub trace_smin: f64,
    pub adj_trace_smin: f64,
    /// Principal angle to the previous sample of the same component.
    pub angle_to_previous: f64,
    pub residual: f64,
    pub tail_fraction: f64,
}

#[derive(Clone, Debug)]
pub struct SweepReport {
    pub component_labels: Vec<String>,
    pub samples: Vec<SweepSample>,
    pub records: Vec<NormalRecord>,
    pub points: Vec<EdgePoint>,
    /// Constant kernel dimension of each component.
    pub component_dims: Vec<usize>,
    pub max_angle: f64,
}

impl SweepReport {
    pub fn all_conditions_hold(&self) -> bool {
        self.samples.iter().all(|s| s.injective_min && s.surjective_max)
    }

    pub fn rank_identity_holds(&self) -> bool {
        self.samples.iter().all(|s| s.rank_identity)
    }
}

/// Covector samples on the unit cosphere: `(component, edge point index, eta)`.
/// For `q = 1` the two components `eta < 0` and `eta > 0` are taken over
/// every edge sample; for `q = 2` the circle of directions is sampled at the
/// first edge point.
pub fn cosphere_samples(edge_dim: usize, n_points: usize, samples: usize) -> Result<(Vec<String>, Vec<(usize, usize, Vec<f64>)>)> {
    match edge_dim {
        1 => {
            let mut v = vec![];
            for (comp, sign) in [(0usize, -1.0), (1, 1.0)] {
                for p in 0..n_points {
                    v.push((comp, p, vec![sign]));
                }
            }
            Ok((vec!["eta<0".into(), "eta>0".into()], v))
        }
        2 => {
            let v = (0..samples)
                .map(|k| {
                    let th = 2.0 * std::f64::consts::PI * k as f64 / samples as f64;
                    (0usize, 0usize, vec![th.cos(), th.sin()])
                })
                .collect();
            Ok((vec!["S^1".into()], v))
        }
        q => Err(WedgeError::Config(format!("cosphere sweeps support edge dimension 1 or 2, got {q}"))),
    }
}

pub fn kernel_bundle_sweep(
    op: &WedgeOp,
    model: &Arc<FiberModel>,
    edge_points: &[Vec<f64>],
    samples: usize,
    settings: &ConeSettings,
    opts: SpectrumOptions,
) -> Result<SweepReport> {
    let points: Vec<EdgePoint> = edge_points
        .par_iter()
        .map(|y| prepare_edge_point(op, model, y, opts))
        .collect::<Result<_>>()?;
    let (labels, tasks) = cosphere_samples(op.edge_dim, points.len(), samples)?;
    let records: Vec<NormalRecord> = tasks
        .par_iter()
        .map(|(_, p, eta)| normal_conditions(op, model, &points[*p], eta, settings))
        .collect::<Result<_>>()?;
    let ncomp = labels.len();
    let mut dims: Vec<Option<usize>> = vec![None; ncomp];
    let mut out = vec![];
    let mut max_angle: f64 = 0.0;
    for (i, ((comp, p, eta), rec)) in tasks.iter().zip(&records).enumerate() {
        match dims[*comp] {
            None => dims[*comp] = Some(rec.n_prime()),
            Some(d) if d != rec.n_prime() => {
                return Err(WedgeError::Smoothness(format!(
                    "kernel dimension jumps from {d} to {} within component {} at y = {:?}, eta = {eta:?}",
                    rec.n_prime(),
                    labels[*comp],
                    rec.y
                )))
            }
            _ => {}
        }
        // neighbours are cyclic within a component
        let prev = (0..tasks.len())
            .filter(|&j| tasks[j].0 == *comp)
            .collect::<Vec<_>>();
        let pos = prev.iter().position(|&j| j == i).unwrap();
        let pj = prev[(pos + prev.len() - 1) % prev.len()];
        let angle = if pj == i { 0.0 } else { max_principal_angle(&records[pj].ambient_span, &rec.ambient_span) };
        max_angle = max_angle.max(angle);
        out.push(SweepSample {
            component: *comp,
            point: *p,
            y: rec.y.clone(),
            eta: eta.clone(),
            n_prime: rec.n_prime(),
            n_second: rec.n_second(),
            trace_dim: rec.trace_dim,
            injective_min: rec.injective_min,
            surjective_max: rec.surjective_max,
            rank_identity: rec.rank_identity(),
            trace_smin: rec.trace_smin,
            adj_trace_smin: rec.adj_trace_smin,
            angle_to_previous: angle,
            residual: rec.kernel.diagnostics.residual.max(rec.adj_kernel.diagnostics.residual),
            tail_fraction: rec.kernel.diagnostics.tail_fraction.max(rec.adj_kernel.diagnostics.tail_fraction),
        });
    }
    Ok(SweepReport {
        component_labels: labels,
        samples: out,
        records,
        points,
        component_dims: dims.into_iter().map(|d| d.unwrap_or(0)).collect(),
        max_angle,
    })
}
