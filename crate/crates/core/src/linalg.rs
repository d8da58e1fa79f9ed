//! Dense complex linear algebra helpers shared by the spectral modules.

use nalgebra::{DMatrix, DVector, Schur, SVD};
use num_complex::Complex64;

pub type C64 = Complex64;
pub type CMat = DMatrix<C64>;
pub type CVec = DVector<C64>;

pub const I: C64 = C64::new(0.0, 1.0);

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn real(re: f64) -> C64 {
    C64::new(re, 0.0)
}

/// Singular value decomposition with singular values sorted descending.
pub struct SortedSvd {
    pub u: CMat,
    pub s: Vec<f64>,
    /// Right singular vectors as columns.
    pub v: CMat,
}

pub fn svd(m: &CMat) -> SortedSvd {
    let (r, cdim) = m.shape();
    if r == 0 || cdim == 0 {
        return SortedSvd { u: CMat::zeros(r, 0), s: vec![], v: CMat::zeros(cdim, 0) };
    }
    // nalgebra returns thin factors; pad the column count so full right
    // singular bases are available when rows < cols.
    let padded;
    let src = if r < cdim {
        padded = {
            let mut p = CMat::zeros(cdim, cdim);
            p.view_mut((0, 0), (r, cdim)).copy_from(m);
            p
        };
        &padded
    } else {
        m
    };
    let dec = SVD::new(src.clone(), true, true);
    let u = dec.u.expect("u requested");
    let vt = dec.v_t.expect("v_t requested");
    let mut order: Vec<usize> = (0..dec.singular_values.len()).collect();
    order.sort_by(|&a, &b| dec.singular_values[b].partial_cmp(&dec.singular_values[a]).unwrap());
    let s: Vec<f64> = order.iter().map(|&k| dec.singular_values[k]).collect();
    let v_all = vt.adjoint();
    let v = CMat::from_fn(cdim, order.len(), |i, j| v_all[(i, order[j])]);
    let u = CMat::from_fn(src.nrows(), order.len(), |i, j| u[(i, order[j])]);
    let u = u.rows(0, r).into_owned();
    SortedSvd { u, s, v }
}

pub fn spectral_norm(m: &CMat) -> f64 {
    svd(m).s.first().copied().unwrap_or(0.0)
}

/// Smallest singular value of an `n x k` matrix with `n >= k` (zero when `k > n`).
pub fn min_singular(m: &CMat) -> f64 {
    if m.ncols() == 0 {
        return f64::INFINITY;
    }
    if m.ncols() > m.nrows() {
        return 0.0;
    }
    svd(m).s.last().copied().unwrap_or(0.0)
}

pub fn eigenvalues(m: &CMat) -> Vec<C64> {
    let n = m.nrows();
    if n == 0 {
        return vec![];
    }
    let (_, t) = Schur::new(m.clone()).unpack();
    (0..n).map(|i| t[(i, i)]).collect()
}

/// Group values closer than `tol` (single linkage). Returns `(centroid, count)`
/// sorted by real part, then imaginary part.
pub fn cluster(values: &[C64], tol: f64) -> Vec<(C64, usize)> {
    let n = values.len();
    let mut label: Vec<usize> = (0..n).collect();
    fn find(l: &mut Vec<usize>, i: usize) -> usize {
        let mut r = i;
        while l[r] != r {
            r = l[r];
        }
        let mut k = i;
        while l[k] != r {
            let next = l[k];
            l[k] = r;
            k = next;
        }
        r
    }
    for i in 0..n {
        for j in (i + 1)..n {
            if (values[i] - values[j]).norm() < tol {
                let (a, b) = (find(&mut label, i), find(&mut label, j));
                if a != b {
                    label[a] = b;
                }
            }
        }
    }
    let mut groups: std::collections::BTreeMap<usize, Vec<C64>> = Default::default();
    for i in 0..n {
        let r = find(&mut label, i);
        groups.entry(r).or_default().push(values[i]);
    }
    let mut out: Vec<(C64, usize)> = groups
        .into_values()
        .map(|g| {
            let s: C64 = g.iter().sum();
            (s / g.len() as f64, g.len())
        })
        .collect();
    out.sort_by(|a, b| {
        a.0.re
            .partial_cmp(&b.0.re)
            .unwrap()
            .then(a.0.im.partial_cmp(&b.0.im).unwrap())
    });
    out
}

/// Orthonormal basis of the invariant subspace of `m` belonging to the
/// eigenvalue cluster at `center` with algebraic multiplicity `mult`: the
/// `mult` right singular vectors of `(m - center)^mult` with the smallest
/// singular values.
pub fn generalized_eigenspace(m: &CMat, center: C64, mult: usize) -> CMat {
    let n = m.nrows();
    let shifted = m - CMat::identity(n, n) * center;
    let mut p = CMat::identity(n, n);
    for _ in 0..mult {
        p = &p * &shifted;
    }
    let d = svd(&p);
    d.v.columns(n - mult, mult).into_owned()
}

/// Chain lengths of the nilpotent matrix `n` (sizes of its Jordan blocks),
/// longest first, using a relative singular-value threshold.
pub fn jordan_partition(n: &CMat, rel_tol: f64, scale: f64) -> Vec<usize> {
    let dim = n.nrows();
    if dim == 0 {
        return vec![];
    }
    let thresh = rel_tol * scale.max(1.0);
    let mut ranks = vec![dim];
    let mut p = CMat::identity(dim, dim);
    for _ in 0..dim {
        p = &p * n;
        let r = svd(&p).s.iter().filter(|&&s| s > thresh).count();
        ranks.push(r);
        if r == 0 {
            break;
        }
    }
    while ranks.len() < dim + 2 {
        ranks.push(0);
    }
    // number of blocks of size >= k is rank(N^{k-1}) - rank(N^k)
    let mut at_least: Vec<usize> = (1..ranks.len()).map(|k| ranks[k - 1] - ranks[k]).collect();
    at_least.push(0);
    let mut sizes = vec![];
    for k in 1..at_least.len() {
        let exact = at_least[k - 1] - at_least[k];
        for _ in 0..exact {
            sizes.push(k);
        }
    }
    sizes.sort_unstable_by(|a, b| b.cmp(a));
    sizes
}

pub fn orthonormalize(m: &CMat) -> CMat {
    if m.ncols() == 0 {
        return m.clone();
    }
    m.clone().qr().q()
}

/// Orthonormal basis of the numerical null space (singular values below
/// `rel_tol * largest`).
pub fn null_space(m: &CMat, rel_tol: f64) -> CMat {
    let cols = m.ncols();
    if cols == 0 {
        return CMat::zeros(0, 0);
    }
    if m.nrows() == 0 {
        return CMat::identity(cols, cols);
    }
    let d = svd(m);
    let top = d.s.first().copied().unwrap_or(0.0);
    let rank = d.s.iter().filter(|&&s| s > rel_tol * top.max(f64::MIN_POSITIVE)).count();
    d.v.columns(rank, cols - rank).into_owned()
}

/// Largest principal angle between the column spaces of `a` and `b`
/// (computed through the sine so small angles keep full precision).
/// Subspaces of different dimension are at angle pi/2.
pub fn max_principal_angle(a: &CMat, b: &CMat) -> f64 {
    if a.ncols() != b.ncols() {
        return std::f64::consts::FRAC_PI_2;
    }
    if a.ncols() == 0 {
        return 0.0;
    }
    let qa = orthonormalize(a);
    let qb = orthonormalize(b);
    let resid = &qb - &qa * (qa.adjoint() * &qb);
    spectral_norm(&resid).min(1.0).asin()
}

/// `rho^G = exp(G ln rho)`.
pub fn real_power(g: &CMat, rho: f64) -> CMat {
    if g.nrows() == 0 {
        return g.clone();
    }
    (g * real(rho.ln())).exp()
}

/// Least-squares solution of `a x = b` by SVD with relative truncation.
pub fn lstsq(a: &CMat, b: &CMat, rel_tol: f64) -> CMat {
    let d = svd(a);
    let top = d.s.first().copied().unwrap_or(0.0);
    let mut x = CMat::zeros(a.ncols(), b.ncols());
    let utb = d.u.adjoint() * b;
    for (k, &s) in d.s.iter().enumerate() {
        if s > rel_tol * top {
            let row = utb.row(k) / real(s);
            x += d.v.column(k) * row;
        }
    }
    x
}

pub fn solve(a: &CMat, b: &CMat) -> Option<CMat> {
    a.clone().lu().solve(b)
}

pub fn inverse(a: &CMat) -> Option<CMat> {
    a.clone().try_inverse()
}

pub fn max_abs(m: &CMat) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

/// Index sets that no matrix in `mats` couples (connected components of the
/// joint sparsity pattern), each sorted, ordered by smallest index.
pub fn coupling_components(mats: &[&CMat], n: usize) -> Vec<Vec<usize>> {
    let mut parent: Vec<usize> = (0..n).collect();
    fn root(p: &mut [usize], mut i: usize) -> usize {
        while p[i] != i {
            p[i] = p[p[i]];
            i = p[i];
        }
        i
    }
    for m in mats {
        for i in 0..n {
            for j in 0..n {
                if m[(i, j)] != C64::new(0.0, 0.0) {
                    let (a, b) = (root(&mut parent, i), root(&mut parent, j));
                    if a != b {
                        parent[a.max(b)] = a.min(b);
                    }
                }
            }
        }
    }
    let mut groups: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
    for i in 0..n {
        let r = root(&mut parent, i);
        groups.entry(r).or_default().push(i);
    }
    groups.into_values().collect()
}

pub fn submatrix(m: &CMat, rows: &[usize], cols: &[usize]) -> CMat {
    CMat::from_fn(rows.len(), cols.len(), |i, j| m[(rows[i], cols[j])])
}

/// First-derivative finite-difference weights at `z` for the nodes `xs`
/// (Fornberg's recursion).
pub fn fd_weights(z: f64, xs: &[f64]) -> Vec<f64> {
    let n = xs.len();
    let mut c = vec![[0.0f64; 2]; n];
    let mut c1 = 1.0;
    let mut c4 = xs[0] - z;
    c[0][0] = 1.0;
    for i in 1..n {
        let mn = i.min(1);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = xs[i] - z;
        for j in 0..i {
            let c3 = xs[i] - xs[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[i][k] = c1 * (k as f64 * c[i - 1][k - 1] - c5 * c[i - 1][k]) / c2;
                }
                c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
            }
            for k in (1..=mn).rev() {
                c[j][k] = (c4 * c[j][k] - k as f64 * c[j][k - 1]) / c3;
            }
            c[j][0] = c4 * c[j][0] / c3;
        }
        c1 = c2;
    }
    c.iter().map(|w| w[1]).collect()
}
