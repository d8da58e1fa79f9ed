//! Indicial family, boundary spectrum and trace space.
//!
//! With `xD_x x^{i sigma} = sigma x^{i sigma}` the frozen boundary operator
//! `M_A xD_x + M_B` becomes the linear pencil `M_A sigma + M_B`. Its roots are
//! the eigenvalues of `K = -M_A^{-1} M_B`, and the kernel of the boundary
//! operator on log-polynomials is `{ x^{iK} w }`: writing `N = K - sigma`,
//! `x^{iK} w = x^{i sigma} sum_j (i log x)^j N^j w / j!`.

use nalgebra::Schur;
use serde::Serialize;

use crate::error::{Result, WedgeError};
use crate::fiber::FiberModel;
use crate::linalg::{
    cluster, eigenvalues, generalized_eigenspace, jordan_partition, null_space, orthonormalize, real,
    solve, spectral_norm, svd, CMat, CVec, C64, I,
};
use crate::operator::WedgeOp;

#[derive(Clone, Debug, PartialEq)]
pub struct IndicialPencil {
    pub m_a: CMat,
    pub m_b: CMat,
}

impl IndicialPencil {
    pub fn new(m_a: CMat, m_b: CMat) -> Result<Self> {
        if m_a.shape() != m_b.shape() || m_a.nrows() != m_a.ncols() {
            return Err(WedgeError::Shape { expected: m_a.nrows(), got: m_b.nrows() });
        }
        Ok(Self { m_a, m_b })
    }

    pub fn dim(&self) -> usize {
        self.m_a.nrows()
    }

    pub fn eval(&self, sigma: C64) -> CMat {
        &self.m_a * sigma + &self.m_b
    }

    /// `K = -M_A^{-1} M_B`.
    pub fn k_matrix(&self) -> Result<CMat> {
        solve(&self.m_a, &(-&self.m_b)).ok_or_else(|| {
            WedgeError::WEllipticity("leading coefficient M_A is singular".into())
        })
    }
}

/// Pencil of the operator frozen at the edge point `y`.
pub fn assemble_pencil(op: &WedgeOp, model: &FiberModel, y: &[f64]) -> Result<IndicialPencil> {
    op.validate(model)?;
    op.check_a_x_invertible(model, y, 1e-12)?;
    let f = op.freeze(model, y);
    let smin = crate::linalg::min_singular(&f.m_a);
    if smin < 1e-12 * spectral_norm(&f.m_a).max(1.0) {
        return Err(WedgeError::WEllipticity(format!(
            "discretized a_x is singular (smallest singular value {smin:.3e}) at y = {y:?}"
        )));
    }
    IndicialPencil::new(f.m_a, f.m_b)
}

/// Adjoint pencil `(M_A^*, M_B^*)` with respect to the fiber inner product.
pub fn adjoint_pencil(pencil: &IndicialPencil, model: &FiberModel) -> IndicialPencil {
    IndicialPencil { m_a: model.adjoint(&pencil.m_a), m_b: model.adjoint(&pencil.m_b) }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SpectrumOptions {
    pub strip_halfwidth: f64,
    pub root_tol: f64,
    pub cluster_tol: f64,
    pub rank_rel_tol: f64,
}

impl Default for SpectrumOptions {
    fn default() -> Self {
        Self { strip_halfwidth: 0.5, root_tol: 1e-8, cluster_tol: 1e-6, rank_rel_tol: 1e-7 }
    }
}

#[derive(Clone, Debug)]
pub struct Root {
    pub sigma: C64,
    pub alg_mult: usize,
    /// Jordan chains `v_0, v_1, ...` with `P(sigma) v_0 = 0` and
    /// `P(sigma) v_{j+1} + M_A v_j = 0`.
    pub chains: Vec<Vec<CVec>>,
}

impl Root {
    pub fn chain_lengths(&self) -> Vec<usize> {
        self.chains.iter().map(Vec::len).collect()
    }
}

#[derive(Clone, Debug)]
pub struct BoundarySpectrum {
    /// Roots in the open strip, sorted by real then imaginary part.
    pub roots: Vec<Root>,
    /// Every eigenvalue cluster of the pencil (inside and outside the strip).
    pub all_roots: Vec<(C64, usize)>,
    pub strip_halfwidth: f64,
    pub options: SpectrumOptions,
    pub k: CMat,
}

impl BoundarySpectrum {
    pub fn trace_dim(&self) -> usize {
        self.roots.iter().map(|r| r.alg_mult).sum()
    }

    /// Distance of the strip roots to the weight lines.
    pub fn delta0(&self) -> f64 {
        self.roots
            .iter()
            .map(|r| self.strip_halfwidth - r.sigma.im.abs())
            .fold(self.strip_halfwidth, f64::min)
    }
}

/// Jordan chains of the nilpotent `n` restricted to the invariant subspace `w`.
fn jordan_chains(n_full: &CMat, w: &CMat, rel_tol: f64) -> Vec<Vec<CVec>> {
    let nw = w.adjoint() * n_full * w;
    let m = nw.ncols();
    let scale = spectral_norm(n_full);
    let sizes = jordan_partition(&nw, rel_tol, scale);
    let thresh = rel_tol * scale.max(1.0);
    let kernel_of_power = |p: usize| -> CMat {
        if p == 0 {
            return CMat::zeros(m, 0);
        }
        let mut q = CMat::identity(m, m);
        for _ in 0..p {
            q = &q * &nw;
        }
        let d = svd(&q);
        let rank = d.s.iter().filter(|&&s| s > thresh).count();
        d.v.columns(rank, m - rank).into_owned()
    };
    let mut chosen: Vec<CVec> = vec![];
    let mut chains = vec![];
    for &len in &sizes {
        let top_space = kernel_of_power(len);
        let mut excl: Vec<CVec> = kernel_of_power(len - 1).column_iter().map(|c| c.into_owned()).collect();
        excl.extend(chosen.iter().cloned());
        let proj = if excl.is_empty() {
            top_space.clone()
        } else {
            let e = orthonormalize(&CMat::from_columns(&excl));
            let e = e.columns(0, excl.len().min(m)).into_owned();
            &top_space - &e * (e.adjoint() * &top_space)
        };
        let d = svd(&proj);
        let coeff = d.v.column(0).into_owned();
        let mut top = &top_space * coeff;
        top /= real(top.norm());
        let mut chain = vec![top.clone()];
        for _ in 1..len {
            let next = &nw * chain.last().unwrap();
            chain.push(next);
        }
        chain.reverse();
        chosen.extend(chain.iter().cloned());
        chains.push(chain.into_iter().map(|v| w * v).collect());
    }
    chains
}

pub fn boundary_spectrum(pencil: &IndicialPencil, opts: SpectrumOptions) -> Result<BoundarySpectrum> {
    let k = pencil.k_matrix()?;
    let eigs = eigenvalues(&k);
    let h = opts.strip_halfwidth;
    for e in &eigs {
        let d = (e.im.abs() - h).abs();
        if d < opts.root_tol {
            return Err(WedgeError::WeightLine { root: format!("{:.12}{:+.12}i", e.re, e.im), distance: d });
        }
    }
    let all_roots = cluster(&eigs, opts.cluster_tol);
    let n = k.nrows();
    let mut roots = vec![];
    for &(sigma, mult) in all_roots.iter().filter(|(s, _)| s.im.abs() < h) {
        let w = generalized_eigenspace(&k, sigma, mult);
        let nmat = &k - CMat::identity(n, n) * sigma;
        roots.push(Root { sigma, alg_mult: mult, chains: jordan_chains(&nmat, &w, opts.rank_rel_tol) });
    }
    Ok(BoundarySpectrum { roots, all_roots, strip_halfwidth: h, options: opts, k })
}

/// One basis function `x^{i sigma} sum_j coeffs[j] log^j x` of the trace space.
#[derive(Clone, Debug)]
pub struct TraceElement {
    pub sigma: C64,
    pub root_index: usize,
    pub coeffs: Vec<CVec>,
}

impl TraceElement {
    pub fn log_degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn eval(&self, x: f64) -> CVec {
        let l = x.ln();
        let ph = (I * self.sigma * l).exp();
        let mut out = CVec::zeros(self.coeffs[0].len());
        let mut p = real(1.0);
        for c in &self.coeffs {
            out += c * p;
            p *= l;
        }
        out * ph
    }
}

#[derive(Clone, Debug)]
pub struct TraceSpace {
    pub basis: Vec<TraceElement>,
    /// Matrix of `x d/dx + 1/2` acting on coordinate vectors.
    pub g: CMat,
    /// Leading coefficients `w_a` (`u_a = x^{iK} w_a`) as columns.
    pub leading: CMat,
    /// Column ranges of the basis belonging to each strip root.
    pub root_blocks: Vec<(usize, usize)>,
    pub k: CMat,
}

impl TraceSpace {
    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    /// `x d/dx` on coordinates.
    pub fn x_dx(&self) -> CMat {
        let d = self.dim();
        &self.g - CMat::identity(d, d) * real(0.5)
    }

    /// Value at `x` of the trace function with coordinates `c`.
    pub fn eval(&self, c: &CVec, x: f64) -> CVec {
        let mut out = CVec::zeros(self.leading.nrows());
        for (e, &a) in self.basis.iter().zip(c.iter()) {
            out += e.eval(x) * a;
        }
        out
    }

    /// Action of `kappa_rho` on coordinates: `rho^g`.
    pub fn kappa(&self, rho: f64) -> CMat {
        crate::linalg::real_power(&self.g, rho)
    }
}

/// Apply `M_A xD_x + M_B` to `t -> f(e^t)` at `t`, with `xD_x = -i d/dt`
/// approximated by an eighth-order central difference of step `h`.
pub fn apply_boundary_operator(pencil: &IndicialPencil, f: &dyn Fn(f64) -> CVec, t: f64, h: f64) -> CVec {
    const C: [f64; 4] = [4.0 / 5.0, -1.0 / 5.0, 4.0 / 105.0, -1.0 / 280.0];
    let mut d = CVec::zeros(pencil.dim());
    for (k, &ck) in C.iter().enumerate() {
        let s = (k + 1) as f64 * h;
        d += (f((t + s).exp()) - f((t - s).exp())) * real(ck / h);
    }
    &pencil.m_a * (d * (-I)) + &pencil.m_b * f(t.exp())
}

/// Relative residual of the boundary operator on `u` over `t in [-2, 2]`.
pub fn boundary_residual(pencil: &IndicialPencil, sigma: C64, u: &dyn Fn(f64) -> CVec) -> f64 {
    let h = (0.02 / (1.0 + sigma.norm())).min(0.02);
    let scale = spectral_norm(&pencil.m_a) * (1.0 + sigma.norm()) + spectral_norm(&pencil.m_b);
    let mut worst_res: f64 = 0.0;
    let mut worst_u: f64 = 0.0;
    for j in 0..=40 {
        let t = -2.0 + 0.1 * j as f64;
        worst_res = worst_res.max(apply_boundary_operator(pencil, u, t, h).norm());
        worst_u = worst_u.max(u(t.exp()).norm());
    }
    worst_res / (scale * worst_u).max(f64::MIN_POSITIVE)
}

pub fn build_trace_space(pencil: &IndicialPencil, spectrum: &BoundarySpectrum) -> Result<TraceSpace> {
    let k = &spectrum.k;
    let n = k.nrows();
    let dim = spectrum.trace_dim();
    let mut basis = vec![];
    let mut leading = CMat::zeros(n, dim);
    let mut g = CMat::zeros(dim, dim);
    let mut root_blocks = vec![];
    let mut col = 0;
    for (ri, root) in spectrum.roots.iter().enumerate() {
        let m = root.alg_mult;
        let w = generalized_eigenspace(k, root.sigma, m);
        // Schur basis of K on the invariant subspace: orthonormal, triangular
        let kw = w.adjoint() * k * &w;
        let (q, t) = Schur::new(kw).unpack();
        let wq = &w * q;
        let nmat = k - CMat::identity(n, n) * root.sigma;
        for a in 0..m {
            let w0 = wq.column(a).into_owned();
            let mut coeffs = vec![w0.clone()];
            let mut v = w0;
            let mut fact = 1.0;
            for j in 1..m {
                v = &nmat * v;
                fact *= j as f64;
                if v.norm() <= 1e-12 * (1.0 + spectral_norm(&nmat)) {
                    break;
                }
                coeffs.push(&v * (I.powu(j as u32) / fact));
            }
            leading.set_column(col + a, &wq.column(a));
            basis.push(TraceElement { sigma: root.sigma, root_index: ri, coeffs });
        }
        let blk = t * I + CMat::identity(m, m) * real(0.5);
        g.view_mut((col, col), (m, m)).copy_from(&blk);
        root_blocks.push((col, m));
        col += m;
    }
    let ts = TraceSpace { basis, g, leading, root_blocks, k: k.clone() };
    for (a, e) in ts.basis.iter().enumerate() {
        let res = boundary_residual(pencil, e.sigma, &|x| e.eval(x));
        if !(res <= 1e-8) {
            return Err(WedgeError::NumericalRank(format!(
                "trace basis element {a} (sigma = {:.6}{:+.6}i, log degree {}) has boundary residual {res:.3e}",
                e.sigma.re,
                e.sigma.im,
                e.log_degree()
            )));
        }
    }
    Ok(ts)
}

/// `g` on its own (the trace space stores it).
pub fn g_matrix(trace: &TraceSpace) -> CMat {
    trace.g.clone()
}

/// Kernel of the pencil at `sigma` (for diagnostics).
pub fn pencil_kernel(pencil: &IndicialPencil, sigma: C64, rel_tol: f64) -> CMat {
    null_space(&pencil.eval(sigma), rel_tol)
}
