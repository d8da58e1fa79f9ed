//! Hypothesis battery for the boundary value problem: w-ellipticity, weight
//! line clearance, the normal-family conditions, APS projections and the
//! Lopatinskii verdict.

use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::cone::{assemble_normal, kernel_bundle_sweep, kernel_max, ConeSettings, SweepReport, SweepSample};
use crate::config::{BoundaryCondition, BoundaryKind, ProblemConfig};
use crate::error::{Result, WedgeError};
use crate::fiber::{FiberKind, FiberModel};
use crate::indicial::{assemble_pencil, boundary_spectrum, TraceSpace};
use crate::linalg::{cluster, eigenvalues, lstsq, max_abs, min_singular, real_power, svd, CMat};
use crate::operator::WedgeOp;

pub const RANK_NOTE: &str = "Rank equality is necessary, not sufficient";

/// Dilation used for the homogeneity consistency check of the verdict.
pub const SCALING_RHO: f64 = 2.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
    Skipped,
}

impl Status {
    fn from_bool(ok: bool) -> Self {
        if ok {
            Status::Pass
        } else {
            Status::Fail
        }
    }
}

/// Directions on the unit sphere in `R^d`, always including `+-e_k`.
pub fn sphere_points(d: usize, n: usize) -> Vec<Vec<f64>> {
    let mut pts = vec![];
    for k in 0..d {
        for s in [1.0, -1.0] {
            let mut v = vec![0.0; d];
            v[k] = s;
            pts.push(v);
        }
    }
    let tau = 2.0 * std::f64::consts::PI;
    match d {
        0 | 1 => {}
        2 => pts.extend((0..n).map(|k| {
            let t = tau * (k as f64 + 0.5) / n as f64;
            vec![t.cos(), t.sin()]
        })),
        3 => {
            // Fibonacci lattice
            let golden = (1.0 + 5f64.sqrt()) / 2.0;
            pts.extend((0..n).map(|k| {
                let z = 1.0 - 2.0 * (k as f64 + 0.5) / n as f64;
                let r = (1.0 - z * z).sqrt();
                let phi = tau * k as f64 / golden;
                vec![r * phi.cos(), r * phi.sin(), z]
            }));
        }
        _ => {
            // Kronecker sequence pushed through cosines, then normalized
            let alphas: Vec<f64> = [2.0f64, 3.0, 5.0, 7.0, 11.0, 13.0].iter().take(d).map(|p| p.sqrt().fract()).collect();
            pts.extend((1..=n).map(|k| {
                let v: Vec<f64> = alphas.iter().map(|a| (tau * (k as f64 * a).fract()).cos()).collect();
                let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                v.into_iter().map(|x| x / norm).collect()
            }));
        }
    }
    pts
}

/// Compass search on the unit sphere; returns the minimum, its location and
/// the number of evaluations.
fn refine_on_sphere(f: impl Fn(&[f64]) -> f64, mut v: Vec<f64>, mut fv: f64) -> (f64, Vec<f64>, usize) {
    let d = v.len();
    let mut h = 0.1;
    let mut evals = 0;
    while h > 1e-12 && fv > 0.0 && evals < 20_000 {
        let mut improved = false;
        for k in 0..d {
            for s in [h, -h] {
                let mut w = v.clone();
                w[k] += s;
                let n = w.iter().map(|x| x * x).sum::<f64>().sqrt();
                w.iter_mut().for_each(|x| *x /= n);
                let fw = f(&w);
                evals += 1;
                if fw < fv {
                    v = w;
                    fv = fw;
                    improved = true;
                }
            }
        }
        if !improved {
            h *= 0.5;
        }
    }
    (fv, v, evals)
}

#[derive(Clone, Debug, Serialize)]
pub struct WorstPoint {
    pub xi: f64,
    pub eta: Vec<f64>,
    pub zeta: f64,
    pub theta: f64,
    pub y: Vec<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct WEllipticityReport {
    pub min_singular: f64,
    pub tolerance: f64,
    pub samples: usize,
    pub worst: WorstPoint,
    pub pass: bool,
}

/// Smallest singular value of the w-symbol over sphere directions, fiber
/// nodes and edge points.
pub fn w_ellipticity_check(
    op: &WedgeOp,
    model: &FiberModel,
    edge_points: &[Vec<f64>],
    sphere_samples: usize,
    tol: f64,
) -> Result<WEllipticityReport> {
    if edge_points.is_empty() {
        return Err(WedgeError::Config("no edge points to sample".into()));
    }
    let q = op.edge_dim;
    let with_zeta = op.a_z.is_some();
    let d = 1 + q + usize::from(with_zeta);
    let dirs = sphere_points(d, sphere_samples);
    let thetas = match model.kind {
        FiberKind::Point => vec![0.0],
        FiberKind::Circle => model.theta_nodes(),
    };
    let per_point: Vec<(f64, WorstPoint, usize)> = edge_points
        .par_iter()
        .map(|y| {
            let smin = |th: f64, v: &[f64]| {
                let zeta = if with_zeta { v[d - 1] } else { 0.0 };
                min_singular(&op.w_symbol(y, th, v[0], &v[1..1 + q], zeta))
            };
            let mut best = (f64::INFINITY, vec![], 0.0);
            let mut count = 0usize;
            for &th in &thetas {
                let mut vals: Vec<(f64, &Vec<f64>)> = dirs.iter().map(|v| (smin(th, v), v)).collect();
                count += vals.len();
                vals.sort_by(|a, b| a.0.total_cmp(&b.0));
                // sampled minima can sit next to an exact zero; refine the worst few
                for (s0, v0) in vals.into_iter().take(3) {
                    let (s, v, n) = refine_on_sphere(|v| smin(th, v), v0.clone(), s0);
                    count += n;
                    if s < best.0 {
                        best = (s, v, th);
                    }
                }
            }
            let v = &best.1;
            let zeta = if with_zeta { v[d - 1] } else { 0.0 };
            let worst = WorstPoint { xi: v[0], eta: v[1..1 + q].to_vec(), zeta, theta: best.2, y: y.clone() };
            (best.0, worst, count)
        })
        .collect();
    let samples = per_point.iter().map(|p| p.2).sum();
    let (min_singular, worst, _) = per_point
        .into_iter()
        .fold(None, |acc: Option<(f64, WorstPoint, usize)>, p| match acc {
            Some(a) if a.0 <= p.0 => Some(a),
            _ => Some(p),
        })
        .expect("non-empty");
    Ok(WEllipticityReport { min_singular, tolerance: tol, samples, pass: min_singular >= tol, worst })
}

#[derive(Clone, Debug, Serialize)]
pub struct SpectrumRow {
    pub y: Vec<f64>,
    pub re: f64,
    pub im: f64,
    pub mult: usize,
    /// Jordan chain lengths; empty outside the strip.
    pub chain_lengths: Vec<usize>,
    pub in_strip: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct WeightLineReport {
    /// Smallest `| |Im sigma| - 1/2 |` over all roots and edge points.
    pub min_distance: f64,
    pub tolerance: f64,
    pub violations: Vec<String>,
    pub rows: Vec<SpectrumRow>,
    pub pass: bool,
}

pub fn weight_line_check(cfg: &ProblemConfig, model: &FiberModel, edge_points: &[Vec<f64>]) -> Result<WeightLineReport> {
    let opts = cfg.spectrum_options();
    let per: Vec<(f64, Vec<String>, Vec<SpectrumRow>)> = edge_points
        .par_iter()
        .map(|y| -> Result<_> {
            let pencil = assemble_pencil(&cfg.operator, model, y)?;
            let eigs = eigenvalues(&pencil.k_matrix()?);
            let mut dist = f64::INFINITY;
            let mut bad = vec![];
            for e in &eigs {
                let dd = (e.im.abs() - opts.strip_halfwidth).abs();
                dist = dist.min(dd);
                if dd < opts.root_tol {
                    bad.push(format!("sigma = {:.12}{:+.12}i at y = {y:?}", e.re, e.im));
                }
            }
            let rows = if bad.is_empty() {
                let spec = boundary_spectrum(&pencil, opts)?;
                spec.all_roots
                    .iter()
                    .map(|&(s, m)| {
                        let chains = spec.roots.iter().find(|r| r.sigma == s).map(|r| r.chain_lengths());
                        SpectrumRow {
                            y: y.clone(),
                            re: s.re,
                            im: s.im,
                            mult: m,
                            in_strip: chains.is_some(),
                            chain_lengths: chains.unwrap_or_default(),
                        }
                    })
                    .collect()
            } else {
                cluster(&eigs, opts.cluster_tol)
                    .into_iter()
                    .map(|(s, m)| SpectrumRow {
                        y: y.clone(),
                        re: s.re,
                        im: s.im,
                        mult: m,
                        chain_lengths: vec![],
                        in_strip: s.im.abs() < opts.strip_halfwidth,
                    })
                    .collect()
            };
            Ok((dist, bad, rows))
        })
        .collect::<Result<_>>()?;
    let mut min_distance = f64::INFINITY;
    let mut violations = vec![];
    let mut rows = vec![];
    for (d, b, r) in per {
        min_distance = min_distance.min(d);
        violations.extend(b);
        rows.extend(r);
    }
    Ok(WeightLineReport { min_distance, tolerance: opts.root_tol, pass: violations.is_empty(), violations, rows })
}

#[derive(Clone, Debug, Serialize)]
pub struct ConditionResult {
    pub label: String,
    pub name: String,
    pub status: Status,
    pub detail: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepSummary {
    pub component_labels: Vec<String>,
    pub component_dims: Vec<usize>,
    pub max_angle: f64,
    pub rank_identity: bool,
    pub samples: Vec<SweepSample>,
}

impl SweepSummary {
    pub fn from_report(r: &SweepReport) -> Self {
        Self {
            component_labels: r.component_labels.clone(),
            component_dims: r.component_dims.clone(),
            max_angle: r.max_angle,
            rank_identity: r.rank_identity_holds(),
            samples: r.samples.clone(),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct BatteryReport {
    pub conditions: Vec<ConditionResult>,
    pub w_ellipticity: WEllipticityReport,
    pub weight_line: Option<WeightLineReport>,
    pub sweep: Option<SweepSummary>,
    pub pass: bool,
}

pub struct Battery {
    pub report: BatteryReport,
    pub sweep: Option<SweepReport>,
    pub model: Arc<FiberModel>,
}

fn condition(label: &str, name: &str, status: Status, detail: String) -> ConditionResult {
    ConditionResult { label: label.into(), name: name.into(), status, detail }
}

/// Runs (9.1), (9.2) and (9.3) in order; later conditions are skipped once
/// an earlier one fails.
pub fn run_condition_battery(cfg: &ProblemConfig) -> Result<Battery> {
    let model = cfg.fiber_model()?;
    let points = cfg.edge_points();
    let tol = &cfg.tolerances;
    let w = w_ellipticity_check(&cfg.operator, &model, &points, cfg.grids.sphere_samples, tol.ellipticity)?;
    let mut conditions = vec![condition(
        "(9.1)",
        "w-ellipticity",
        Status::from_bool(w.pass),
        format!(
            "min singular value {:.6e} over {} samples (tolerance {:.1e}); worst at xi = {:.4}, eta = {:?}, zeta = {:.4}, theta = {:.4}, y = {:?}",
            w.min_singular, w.samples, w.tolerance, w.worst.xi, w.worst.eta, w.worst.zeta, w.worst.theta, w.worst.y
        ),
    )];
    let skip = |label: &str, name: &str| condition(label, name, Status::Skipped, "an earlier condition failed".into());
    if !w.pass {
        conditions.push(skip("(9.2)", "weight-line clearance"));
        conditions.push(skip("(9.3)", "normal-family injectivity and surjectivity"));
        return Ok(Battery {
            report: BatteryReport { conditions, w_ellipticity: w, weight_line: None, sweep: None, pass: false },
            sweep: None,
            model,
        });
    }

    let wl = weight_line_check(cfg, &model, &points)?;
    conditions.push(condition(
        "(9.2)",
        "weight-line clearance",
        Status::from_bool(wl.pass),
        if wl.pass {
            format!("closest root is {:.6e} from Im sigma = +-1/2", wl.min_distance)
        } else {
            format!("roots on the weight line: {}", wl.violations.join("; "))
        },
    ));
    if !wl.pass {
        conditions.push(skip("(9.3)", "normal-family injectivity and surjectivity"));
        return Ok(Battery {
            report: BatteryReport { conditions, w_ellipticity: w, weight_line: Some(wl), sweep: None, pass: false },
            sweep: None,
            model,
        });
    }

    let settings = cfg.cone_settings();
    let sweep = match kernel_bundle_sweep(
        &cfg.operator,
        &model,
        &points,
        cfg.grids.cosphere_samples,
        &settings,
        cfg.spectrum_options(),
    ) {
        Ok(s) => s,
        Err(e @ (WedgeError::Smoothness(_) | WedgeError::DegenerateSymbol(_))) => {
            conditions.push(condition("(9.3)", "normal-family injectivity and surjectivity", Status::Fail, e.to_string()));
            return Ok(Battery {
                report: BatteryReport { conditions, w_ellipticity: w, weight_line: Some(wl), sweep: None, pass: false },
                sweep: None,
                model,
            });
        }
        Err(e) => return Err(e),
    };
    let bad: Vec<String> = sweep
        .samples
        .iter()
        .filter(|s| !(s.injective_min && s.surjective_max))
        .map(|s| {
            let which = match (s.injective_min, s.surjective_max) {
                (false, false) => "injectivity and surjectivity",
                (false, true) => "injectivity on the minimal domain",
                _ => "surjectivity on the maximal domain",
            };
            format!("{which} fails at y = {:?}, eta = {:?}", s.y, s.eta)
        })
        .collect();
    let ok3 = bad.is_empty();
    conditions.push(condition(
        "(9.3)",
        "normal-family injectivity and surjectivity",
        Status::from_bool(ok3),
        if ok3 {
            format!(
                "{} covectors; kernel dims {:?} on components {:?}",
                sweep.samples.len(),
                sweep.component_dims,
                sweep.component_labels
            )
        } else {
            bad.join("; ")
        },
    ));
    let smooth = sweep.max_angle <= tol.continuity;
    conditions.push(condition(
        "bundle",
        "kernel-bundle continuity",
        Status::from_bool(smooth),
        format!(
            "largest principal angle between neighbouring samples {:.6e} (tolerance {:.1e})",
            sweep.max_angle, tol.continuity
        ),
    ));
    // continuity depends on the sampling density and is reported, not enforced
    let report = BatteryReport {
        pass: ok3,
        conditions,
        w_ellipticity: w,
        weight_line: Some(wl),
        sweep: Some(SweepSummary::from_report(&sweep)),
    };
    Ok(Battery { report, sweep: Some(sweep), model })
}

/// Orthogonal projection onto the kernel bundle in trace coordinates at each
/// unit-cosphere sample.
#[derive(Clone, Debug)]
pub struct ApsProjection {
    pub samples: Vec<ApsSample>,
}

#[derive(Clone, Debug)]
pub struct ApsSample {
    pub component: usize,
    pub point: usize,
    pub eta: Vec<f64>,
    /// Orthonormal basis of `K_eta` (`dim T x dim K`).
    pub basis: CMat,
    pub q: CMat,
    pub idempotency: f64,
}

impl ApsProjection {
    pub fn construct(sweep: &SweepReport) -> Result<Self> {
        let mut dims = vec![None; sweep.component_labels.len()];
        let mut samples = vec![];
        for (s, rec) in sweep.samples.iter().zip(&sweep.records) {
            let basis = rec.kernel.trace_span();
            let k = basis.ncols();
            match dims[s.component] {
                None => dims[s.component] = Some(k),
                Some(d) if d != k => {
                    return Err(WedgeError::Smoothness(format!(
                        "projection rank jumps from {d} to {k} on component {}",
                        sweep.component_labels[s.component]
                    )))
                }
                _ => {}
            }
            let q = &basis * basis.adjoint();
            let idempotency = max_abs(&(&q * &q - &q));
            samples.push(ApsSample { component: s.component, point: s.point, eta: s.eta.clone(), basis, q, idempotency });
        }
        Ok(Self { samples })
    }

    /// `q(rho eta) = rho^g q(eta) rho^{-g}`.
    pub fn extended(&self, i: usize, trace: &TraceSpace, rho: f64) -> CMat {
        trace.kappa(rho) * &self.samples[i].q * trace.kappa(1.0 / rho)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct LopatinskiiRecord {
    pub component: usize,
    pub y: Vec<f64>,
    pub eta: Vec<f64>,
    pub dim_kernel: usize,
    pub dim_range: usize,
    pub square: bool,
    /// `None` when the restricted map is empty.
    pub min_singular: Option<f64>,
    pub condition_number: Option<f64>,
    /// Min singular value at `2 eta` transported back, divided by `2^mu`.
    pub scaled_min_singular: Option<f64>,
    pub scaling_deviation: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct LopatinskiiVerdict {
    pub kind: BoundaryKind,
    pub iso_tolerance: f64,
    pub records: Vec<LopatinskiiRecord>,
    pub failing_components: Vec<String>,
    pub max_scaling_deviation: f64,
    pub pass: bool,
}

/// Symbols of `B`, `Pi` and the target action generator at one sample, in
/// trace coordinates on the source side.
struct BoundarySymbols {
    b: CMat,
    pi: CMat,
    a: CMat,
}

fn boundary_symbols(bc: &BoundaryCondition, comp: usize, trace: &TraceSpace, aps: Option<&ApsSample>) -> BoundarySymbols {
    let d = trace.dim();
    let pick = |v: &[CMat]| if v.len() == 1 { v[0].clone() } else { v[comp].clone() };
    match bc.kind {
        BoundaryKind::Identity => BoundarySymbols { b: CMat::identity(d, d), pi: CMat::identity(d, d), a: trace.g.clone() },
        BoundaryKind::Aps => BoundarySymbols {
            b: CMat::identity(d, d),
            pi: aps.expect("APS projection available").q.clone(),
            a: trace.g.clone(),
        },
        BoundaryKind::Matrix => {
            let b = pick(&bc.b) * &trace.leading;
            let g = b.nrows();
            let pi = if bc.pi.is_empty() { CMat::identity(g, g) } else { pick(&bc.pi) };
            let a = bc.a.clone().unwrap_or_else(|| CMat::zeros(g, g));
            BoundarySymbols { b, pi, a }
        }
    }
}

fn range_basis(pi: &CMat) -> CMat {
    let d = svd(pi);
    // nonzero singular values of a projection are at least 1
    let r = d.s.iter().filter(|&&s| s > 0.5).count();
    d.u.columns(0, r).into_owned()
}

fn restricted(sym: &BoundarySymbols, range: &CMat, kernel: &CMat) -> CMat {
    range.adjoint() * &sym.pi * &sym.b * kernel
}

fn singular_summary(m: &CMat) -> (Option<f64>, Option<f64>) {
    if m.nrows() == 0 || m.ncols() == 0 {
        return (None, None);
    }
    let d = svd(m);
    let k = m.nrows().min(m.ncols());
    let smin = d.s[k - 1];
    let smax = d.s[0];
    (Some(smin), Some(if smin > 0.0 { smax / smin } else { f64::INFINITY }))
}

/// `sigma(Pi B) : K -> G_Pi` at every sweep sample, with the verdict
/// re-evaluated at `2 eta` through the twisted homogeneity laws.
pub fn lopatinskii_check(
    cfg: &ProblemConfig,
    model: &Arc<FiberModel>,
    sweep: &SweepReport,
    aps: Option<&ApsProjection>,
) -> Result<LopatinskiiVerdict> {
    let bc = cfg
        .boundary_condition
        .as_ref()
        .ok_or_else(|| WedgeError::Config("no [boundary_condition] section".into()))?;
    if bc.kind == BoundaryKind::Aps && aps.is_none() {
        return Err(WedgeError::Config("APS boundary condition needs the projection field".into()));
    }
    let settings = cfg.cone_settings();
    let iso = cfg.tolerances.iso;
    let records: Vec<LopatinskiiRecord> = sweep
        .samples
        .par_iter()
        .zip(&sweep.records)
        .enumerate()
        .map(|(i, (s, rec))| -> Result<LopatinskiiRecord> {
            let point = &sweep.points[s.point];
            let trace = &point.trace;
            let sym = boundary_symbols(bc, s.component, trace, aps.map(|a| &a.samples[i]));
            let range = range_basis(&sym.pi);
            let kernel = rec.kernel.trace_span();
            let m = restricted(&sym, &range, &kernel);
            let square = m.nrows() == m.ncols();
            let (smin, cond) = singular_summary(&m);
            let ok = square && smin.map_or(true, |v| v >= iso);
            let (scaled, deviation) =
                scaled_singular(cfg, model, &point.y, &s.eta, trace, &sym, &range, &kernel, bc.mu, &settings)?;
            let deviation = match (smin, scaled) {
                (Some(a), Some(_)) => deviation / a.max(f64::MIN_POSITIVE),
                _ => deviation,
            };
            Ok(LopatinskiiRecord {
                component: s.component,
                y: point.y.clone(),
                eta: s.eta.clone(),
                dim_kernel: kernel.ncols(),
                dim_range: range.ncols(),
                square,
                min_singular: smin,
                condition_number: cond,
                scaled_min_singular: scaled,
                scaling_deviation: deviation,
                pass: ok,
            })
        })
        .collect::<Result<_>>()?;
    let mut failing: Vec<String> = records
        .iter()
        .filter(|r| !r.pass)
        .map(|r| sweep.component_labels[r.component].clone())
        .collect();
    failing.dedup();
    let max_dev = records.iter().map(|r| r.scaling_deviation).fold(0.0, f64::max);
    Ok(LopatinskiiVerdict {
        kind: bc.kind,
        iso_tolerance: iso,
        pass: failing.is_empty() && max_dev <= iso,
        records,
        failing_components: failing,
        max_scaling_deviation: max_dev,
    })
}

/// Recomputes the kernel at `rho eta`, evaluates `B` and `Pi` there through
/// `B(rho eta) = rho^mu rho^a B(eta) rho^{-g}` and `Pi(rho eta) = rho^a Pi rho^{-a}`,
/// and returns the transported min singular value divided by `rho^mu`
/// together with its absolute deviation from the unit-sphere value.
#[allow(clippy::too_many_arguments)]
fn scaled_singular(
    cfg: &ProblemConfig,
    model: &Arc<FiberModel>,
    y: &[f64],
    eta: &[f64],
    trace: &TraceSpace,
    sym: &BoundarySymbols,
    range: &CMat,
    kernel: &CMat,
    mu: f64,
    settings: &ConeSettings,
) -> Result<(Option<f64>, f64)> {
    let rho = SCALING_RHO;
    if kernel.ncols() == 0 {
        return Ok((None, 0.0));
    }
    let big: Vec<f64> = eta.iter().map(|e| rho * e).collect();
    let system = assemble_normal(&cfg.operator, model, y, &big)?;
    let grid = Arc::new(system.default_grid(settings)?);
    let k2 = kernel_max(&system, model, &grid, trace, settings)?.trace_span();
    if k2.ncols() != kernel.ncols() {
        return Ok((None, f64::INFINITY));
    }
    let transported = trace.kappa(rho) * kernel;
    let basis = &k2 * (k2.adjoint() * transported);
    let ra = real_power(&sym.a, rho);
    let ra_inv = real_power(&sym.a, 1.0 / rho);
    let b_rho = &ra * &sym.b * trace.kappa(1.0 / rho) * crate::linalg::real(rho.powf(mu));
    let pi_rho = &ra * &sym.pi * ra_inv;
    let image = pi_rho * b_rho * basis;
    let coords = lstsq(&(ra * range), &image, 1e-12);
    let (smin0, _) = singular_summary(&restricted(sym, range, kernel));
    let (s, _) = singular_summary(&coords);
    let scaled = s.map(|v| v / rho.powf(mu));
    let dev = match (scaled, smin0) {
        (Some(a), Some(b)) => (a - b).abs(),
        _ => 0.0,
    };
    Ok((scaled, dev))
}

#[derive(Clone, Debug, Serialize)]
pub struct RankRow {
    pub component: String,
    pub dim_kernel: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct AtiyahBottReport {
    pub rows: Vec<RankRow>,
    pub rank_condition: bool,
    pub note: String,
}

/// Kernel-bundle rank per cosphere component and the equal-rank condition.
pub fn atiyah_bott_rank_report(sweep: &SweepReport) -> AtiyahBottReport {
    let rows: Vec<RankRow> = sweep
        .component_labels
        .iter()
        .zip(&sweep.component_dims)
        .map(|(l, &d)| RankRow { component: l.clone(), dim_kernel: d })
        .collect();
    let rank_condition = rows.windows(2).all(|w| w[0].dim_kernel == w[1].dim_kernel);
    AtiyahBottReport { rows, rank_condition, note: RANK_NOTE.into() }
}

#[derive(Clone, Debug, Serialize)]
pub struct ApsSummary {
    pub ranks: Vec<usize>,
    pub max_idempotency: f64,
}

/// Battery plus, when a boundary condition is configured, the Lopatinskii
/// verdict and the rank table.
#[derive(Clone, Debug, Serialize)]
pub struct CheckReport {
    pub battery: BatteryReport,
    pub lopatinskii: Option<LopatinskiiVerdict>,
    pub atiyah_bott: Option<AtiyahBottReport>,
    pub aps: Option<ApsSummary>,
    pub pass: bool,
}

pub fn run_check(cfg: &ProblemConfig) -> Result<CheckReport> {
    let battery = run_condition_battery(cfg)?;
    let mut report =
        CheckReport { pass: battery.report.pass, battery: battery.report, lopatinskii: None, atiyah_bott: None, aps: None };
    let Some(sweep) = battery.sweep else { return Ok(report) };
    report.atiyah_bott = Some(atiyah_bott_rank_report(&sweep));
    let aps = ApsProjection::construct(&sweep)?;
    let mut ranks = vec![0; sweep.component_labels.len()];
    for s in &aps.samples {
        ranks[s.component] = s.basis.ncols();
    }
    report.aps = Some(ApsSummary {
        ranks,
        max_idempotency: aps.samples.iter().map(|s| s.idempotency).fold(0.0, f64::max),
    });
    // the verdict presupposes (9.3): without it K is not the trace image of a bundle
    if cfg.boundary_condition.is_some() && report.battery.pass {
        let v = lopatinskii_check(cfg, &battery.model, &sweep, Some(&aps))?;
        report.pass &= v.pass;
        report.lopatinskii = Some(v);
    }
    Ok(report)
}
