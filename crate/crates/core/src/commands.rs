//! The `wedgecheck` subcommands as library calls, each producing a
//! deterministic report.

use std::sync::Arc;

use serde::Serialize;

use crate::checker::{run_check, CheckReport, Status};
use crate::cone::{
    assemble_normal, homogeneity_check, kernel_bundle_sweep, normal_conditions, prepare_edge_point, KernelDiagnostics,
    SweepSample,
};
use crate::config::ProblemConfig;
use crate::error::{Result, WedgeError};
use crate::fiber::ConeGrid;
use crate::indicial::{assemble_pencil, boundary_residual, boundary_spectrum, build_trace_space};
use crate::linalg::{max_abs, min_singular, spectral_norm, CMat, C64};
use crate::mellin::{
    default_contour, green_pairing, nondegeneracy, pairing_rectangle_independence, skew_adjoint_check, PairingMode,
};
use crate::operator::cmat_serde;
use crate::report::{fmt_float, join_floats, join_ints, Artifact, Csv};
use crate::symbols::{
    boundary_limit_errors, collar_trace, extension_apply, symbol_estimate_check, twisted_homog_check, BoundarySymbol,
    EstimateOptions, SymbolEstimateReport, TraceSection, C0, EXTENSION_CUTOFF,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    Spectrum,
    Trace,
    Pairing,
    Kernel,
    Sweep,
    Check,
    SymbolsEstimate,
    SymbolsHomog,
    SymbolsExtend,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Spectrum => "spectrum",
            Command::Trace => "trace",
            Command::Pairing => "pairing",
            Command::Kernel => "kernel",
            Command::Sweep => "sweep",
            Command::Check => "check",
            Command::SymbolsEstimate => "symbols_estimate",
            Command::SymbolsHomog => "symbols_homog",
            Command::SymbolsExtend => "symbols_extend",
        }
    }
}

/// Flags shared by the subcommands.
#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    pub eta: Option<Vec<f64>>,
    /// Edge point; defaults to the origin.
    pub y: Option<Vec<f64>>,
    /// Cosphere samples per component (sweeps) or `|eta|` samples (symbols).
    pub samples: Option<usize>,
    /// Enable the quadrature and brute-force cross-checks.
    pub oracle: bool,
}

/// Result of one subcommand: the JSON report, its main CSV table and any
/// plot-data tables.
#[derive(Clone, Debug)]
pub struct Outcome {
    pub name: String,
    pub pass: bool,
    /// Labels of the failed conditions, when the subcommand has several.
    pub failures: Vec<String>,
    pub json: String,
    pub table: Csv,
    pub artifacts: Vec<Artifact>,
}

impl Outcome {
    fn new<T: Serialize>(name: &str, report: &T, pass: bool, table: Csv, plots: Vec<(&str, Csv)>) -> Result<Self> {
        let json = Artifact::json(name, report)?;
        let mut artifacts = vec![json.clone(), Artifact::csv(name, &table)];
        artifacts.extend(plots.iter().map(|(n, t)| Artifact::csv(n, t)));
        Ok(Self { name: name.into(), pass, failures: vec![], json: json.contents, table, artifacts })
    }
}

/// Process exit code for an error: 2 for unusable input, 1 otherwise.
pub fn exit_code(e: &WedgeError) -> i32 {
    match e {
        WedgeError::Config(_) | WedgeError::Io { .. } | WedgeError::Shape { .. } => 2,
        _ => 1,
    }
}

pub fn run(cmd: Command, cfg: &ProblemConfig, opts: &RunOptions) -> Result<Outcome> {
    let mut cfg = cfg.clone();
    if let Some(n) = opts.samples {
        if n == 0 {
            return Err(WedgeError::Config("--samples must be positive".into()));
        }
        match cfg.operator.edge_dim {
            1 => cfg.grids.edge_samples = n,
            _ => cfg.grids.cosphere_samples = n,
        }
    }
    let y = match &opts.y {
        Some(y) if y.len() != cfg.operator.edge_dim => {
            return Err(WedgeError::Config(format!("--y needs {} components", cfg.operator.edge_dim)))
        }
        Some(y) => y.clone(),
        None => vec![0.0; cfg.operator.edge_dim],
    };
    match cmd {
        Command::Spectrum => spectrum(&cfg, &y, opts),
        Command::Trace => trace(&cfg, &y, opts),
        Command::Pairing => pairing(&cfg, &y, opts),
        Command::Kernel => kernel(&cfg, &y, opts),
        Command::Sweep => sweep(&cfg),
        Command::Check => check(&cfg),
        Command::SymbolsEstimate => symbols_estimate(&cfg, opts),
        Command::SymbolsHomog => symbols_homog(&cfg, opts),
        Command::SymbolsExtend => symbols_extend(&cfg, &y),
    }
}

fn pair(z: C64) -> [f64; 2] {
    [z.re, z.im]
}

#[derive(Serialize)]
struct RootEntry {
    sigma: [f64; 2],
    mult: usize,
    chain_lengths: Vec<usize>,
    /// `min s(P(sigma)) / |P|`, with `--oracle`.
    pencil_min_singular: Option<f64>,
}

#[derive(Serialize)]
struct SpectrumReport {
    y: Vec<f64>,
    strip_halfwidth: f64,
    trace_dim: usize,
    weight_line_distance: f64,
    roots: Vec<RootEntry>,
    all_roots: Vec<([f64; 2], usize)>,
}

fn spectrum(cfg: &ProblemConfig, y: &[f64], opts: &RunOptions) -> Result<Outcome> {
    let model = cfg.fiber_model()?;
    let pencil = assemble_pencil(&cfg.operator, &model, y)?;
    let spec = boundary_spectrum(&pencil, cfg.spectrum_options())?;
    let scale = spectral_norm(&pencil.m_a) + spectral_norm(&pencil.m_b);
    let mut pass = true;
    let roots: Vec<RootEntry> = spec
        .roots
        .iter()
        .map(|r| {
            let check = opts.oracle.then(|| min_singular(&pencil.eval(r.sigma)) / (scale * (1.0 + r.sigma.norm())));
            pass &= check.map_or(true, |s| s < 1e-8);
            RootEntry { sigma: pair(r.sigma), mult: r.alg_mult, chain_lengths: r.chain_lengths(), pencil_min_singular: check }
        })
        .collect();
    let distance = spec.all_roots.iter().map(|(s, _)| (s.im.abs() - 0.5).abs()).fold(f64::INFINITY, f64::min);
    let mut table = Csv::new(&["re", "im", "mult", "chain_lengths"]);
    for r in &spec.roots {
        table.push(vec![fmt_float(r.sigma.re), fmt_float(r.sigma.im), r.alg_mult.to_string(), join_ints(&r.chain_lengths())]);
    }
    let mut plane = Csv::new(&["re", "im", "mult", "in_strip"]);
    for &(s, m) in &spec.all_roots {
        plane.push(vec![fmt_float(s.re), fmt_float(s.im), m.to_string(), (s.im.abs() < 0.5).to_string()]);
    }
    let report = SpectrumReport {
        y: y.to_vec(),
        strip_halfwidth: spec.strip_halfwidth,
        trace_dim: spec.trace_dim(),
        weight_line_distance: distance,
        roots,
        all_roots: spec.all_roots.iter().map(|&(s, m)| (pair(s), m)).collect(),
    };
    Outcome::new("spectrum", &report, pass, table, vec![("roots_plane", plane)])
}

#[derive(Serialize)]
struct TraceBasisEntry {
    sigma: [f64; 2],
    log_degree: usize,
    boundary_residual: Option<f64>,
}

#[derive(Serialize)]
struct TraceReport {
    y: Vec<f64>,
    dim: usize,
    #[serde(with = "cmat_serde")]
    g: CMat,
    #[serde(with = "cmat_serde")]
    leading: CMat,
    basis: Vec<TraceBasisEntry>,
}

fn trace(cfg: &ProblemConfig, y: &[f64], opts: &RunOptions) -> Result<Outcome> {
    let model = cfg.fiber_model()?;
    let pencil = assemble_pencil(&cfg.operator, &model, y)?;
    let spec = boundary_spectrum(&pencil, cfg.spectrum_options())?;
    let t = build_trace_space(&pencil, &spec)?;
    let mut pass = true;
    let basis: Vec<TraceBasisEntry> = t
        .basis
        .iter()
        .map(|e| {
            let res = opts.oracle.then(|| boundary_residual(&pencil, e.sigma, &|x| e.eval(x)));
            pass &= res.map_or(true, |r| r < 1e-8);
            TraceBasisEntry { sigma: pair(e.sigma), log_degree: e.log_degree(), boundary_residual: res }
        })
        .collect();
    let mut table = Csv::new(&["index", "re", "im", "log_degree"]);
    for (i, b) in basis.iter().enumerate() {
        table.push(vec![i.to_string(), fmt_float(b.sigma[0]), fmt_float(b.sigma[1]), b.log_degree.to_string()]);
    }
    let report = TraceReport { y: y.to_vec(), dim: t.dim(), g: t.g.clone(), leading: t.leading.clone(), basis };
    Outcome::new("trace", &report, pass, table, vec![])
}

#[derive(Serialize)]
struct PairingReport {
    y: Vec<f64>,
    #[serde(with = "cmat_serde")]
    beta: CMat,
    nondegeneracy: f64,
    skew_adjoint_residual: f64,
    /// Largest deviation from the quadrature pairing, with `--oracle`.
    quadrature_deviation: Option<f64>,
    rectangle_deviation: Option<f64>,
}

fn pairing(cfg: &ProblemConfig, y: &[f64], opts: &RunOptions) -> Result<Outcome> {
    let model = cfg.fiber_model()?;
    let point = prepare_edge_point(&cfg.operator, &model, y, cfg.spectrum_options())?;
    let contour = default_contour(&point.trace, &point.adj_trace, 0.05);
    let beta = green_pairing(&point.trace, &point.adj_trace, &point.pencil, &model, &contour, PairingMode::Residue)?.beta;
    let skew = skew_adjoint_check(&point.trace, &point.adj_trace, &beta);
    let (quad, rect) = if opts.oracle {
        let q = green_pairing(&point.trace, &point.adj_trace, &point.pencil, &model, &contour, PairingMode::Quadrature)?;
        let rects = [contour.clone(), default_contour(&point.trace, &point.adj_trace, 0.2), default_contour(&point.trace, &point.adj_trace, 0.4)];
        let r = pairing_rectangle_independence(&point.trace, &point.adj_trace, &point.pencil, &model, &rects, PairingMode::Quadrature)?;
        (Some(max_abs(&(&q.beta - &beta))), Some(r))
    } else {
        (None, None)
    };
    let nondeg = nondegeneracy(&beta);
    let pass = quad.map_or(true, |d| d < 1e-8) && rect.map_or(true, |d| d < 1e-8) && (beta.nrows() == 0 || nondeg > 1e-8);
    let mut table = Csv::new(&["row", "col", "re", "im"]);
    for i in 0..beta.nrows() {
        for j in 0..beta.ncols() {
            table.push(vec![i.to_string(), j.to_string(), fmt_float(beta[(i, j)].re), fmt_float(beta[(i, j)].im)]);
        }
    }
    let report = PairingReport {
        y: y.to_vec(),
        beta,
        nondegeneracy: nondeg,
        skew_adjoint_residual: skew,
        quadrature_deviation: quad,
        rectangle_deviation: rect,
    };
    Outcome::new("pairing", &report, pass, table, vec![])
}

#[derive(Serialize)]
struct KernelReport {
    y: Vec<f64>,
    eta: Vec<f64>,
    n_prime: usize,
    n_second: usize,
    trace_dim: usize,
    rank_identity: bool,
    injective_min: bool,
    surjective_max: bool,
    trace_min_singular: Option<f64>,
    adjoint_trace_min_singular: Option<f64>,
    #[serde(with = "cmat_serde")]
    kernel_traces: CMat,
    diagnostics: KernelDiagnostics,
    adjoint_diagnostics: KernelDiagnostics,
    /// Homogeneity residual at `rho = 2` and dimensions on a doubled grid, with `--oracle`.
    homogeneity_residual: Option<f64>,
    refined_dims: Option<(usize, usize)>,
}

fn finite(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

fn kernel(cfg: &ProblemConfig, y: &[f64], opts: &RunOptions) -> Result<Outcome> {
    let model = cfg.fiber_model()?;
    let q = cfg.operator.edge_dim;
    let eta = match &opts.eta {
        Some(e) if e.len() != q => return Err(WedgeError::Config(format!("--eta needs {q} components"))),
        Some(e) => e.clone(),
        None => {
            let mut e = vec![0.0; q];
            e[0] = -1.0;
            e
        }
    };
    let settings = cfg.cone_settings();
    let point = prepare_edge_point(&cfg.operator, &model, y, cfg.spectrum_options())?;
    let rec = normal_conditions(&cfg.operator, &model, &point, &eta, &settings)?;
    let (homog, refined) = if opts.oracle {
        let sys = assemble_normal(&cfg.operator, &model, y, &eta)?;
        let grid = Arc::new(sys.default_grid(&settings)?);
        let h = homogeneity_check(&sys, &model, &grid, 2.0)?;
        let mut fine = settings;
        fine.density *= 2.0;
        let r = normal_conditions(&cfg.operator, &model, &point, &eta, &fine)?;
        (Some(h), Some((r.n_prime(), r.n_second())))
    } else {
        (None, None)
    };
    let pass = rec.injective_min
        && rec.surjective_max
        && homog.map_or(true, |h| h < 1e-6)
        && refined.map_or(true, |d| d == (rec.n_prime(), rec.n_second()));

    let mut profile = Csv::new(&["x", "element", "abs", "re_first", "im_first"]);
    for (j, u) in rec.kernel.elements.iter().enumerate() {
        for (i, &x) in u.grid.nodes.iter().enumerate() {
            let col = u.values.column(i);
            profile.push(vec![
                fmt_float(x),
                j.to_string(),
                fmt_float(col.norm()),
                fmt_float(col[0].re),
                fmt_float(col[0].im),
            ]);
        }
    }
    let mut table = Csv::new(&["y", "eta", "n_prime", "n_second", "trace_dim", "injective_min", "surjective_max"]);
    table.push(vec![
        join_floats(y),
        join_floats(&eta),
        rec.n_prime().to_string(),
        rec.n_second().to_string(),
        rec.trace_dim.to_string(),
        rec.injective_min.to_string(),
        rec.surjective_max.to_string(),
    ]);
    let report = KernelReport {
        y: y.to_vec(),
        eta,
        n_prime: rec.n_prime(),
        n_second: rec.n_second(),
        trace_dim: rec.trace_dim,
        rank_identity: rec.rank_identity(),
        injective_min: rec.injective_min,
        surjective_max: rec.surjective_max,
        trace_min_singular: finite(rec.trace_smin),
        adjoint_trace_min_singular: finite(rec.adj_trace_smin),
        kernel_traces: rec.kernel.traces.clone(),
        diagnostics: rec.kernel.diagnostics.clone(),
        adjoint_diagnostics: rec.adj_kernel.diagnostics.clone(),
        homogeneity_residual: homog,
        refined_dims: refined,
    };
    Outcome::new("kernel", &report, pass, table, vec![("kernel_profile", profile)])
}

/// Angle of a unit covector: `atan2(eta_2, eta_1)`, and `0` or `pi` on a
/// one-dimensional edge.
pub fn cosphere_angle(eta: &[f64]) -> f64 {
    let e2 = eta.get(1).copied().unwrap_or(0.0);
    e2.atan2(eta[0])
}

fn sweep_tables(samples: &[SweepSample], labels: &[String]) -> (Csv, Csv) {
    let mut table = Csv::new(&[
        "component",
        "y",
        "eta",
        "n_prime",
        "n_second",
        "trace_dim",
        "injective_min",
        "surjective_max",
        "rank_identity",
        "trace_smin",
        "adj_trace_smin",
        "angle_to_previous",
    ]);
    let mut plot = Csv::new(&["component", "angle", "y", "n_prime", "n_second"]);
    for s in samples {
        table.push(vec![
            labels[s.component].clone(),
            join_floats(&s.y),
            join_floats(&s.eta),
            s.n_prime.to_string(),
            s.n_second.to_string(),
            s.trace_dim.to_string(),
            s.injective_min.to_string(),
            s.surjective_max.to_string(),
            s.rank_identity.to_string(),
            fmt_float(s.trace_smin),
            fmt_float(s.adj_trace_smin),
            fmt_float(s.angle_to_previous),
        ]);
        plot.push(vec![
            labels[s.component].clone(),
            fmt_float(cosphere_angle(&s.eta)),
            join_floats(&s.y),
            s.n_prime.to_string(),
            s.n_second.to_string(),
        ]);
    }
    (table, plot)
}

#[derive(Serialize)]
struct SweepOut {
    component_labels: Vec<String>,
    component_dims: Vec<usize>,
    max_angle: f64,
    continuity_tolerance: f64,
    rank_identity: bool,
    conditions_hold: bool,
    samples: Vec<SweepSample>,
}

fn sweep(cfg: &ProblemConfig) -> Result<Outcome> {
    let model = cfg.fiber_model()?;
    let r = kernel_bundle_sweep(
        &cfg.operator,
        &model,
        &cfg.edge_points(),
        cfg.grids.cosphere_samples,
        &cfg.cone_settings(),
        cfg.spectrum_options(),
    )?;
    let (table, plot) = sweep_tables(&r.samples, &r.component_labels);
    let out = SweepOut {
        component_labels: r.component_labels.clone(),
        component_dims: r.component_dims.clone(),
        max_angle: r.max_angle,
        continuity_tolerance: cfg.tolerances.continuity,
        rank_identity: r.rank_identity_holds(),
        conditions_hold: r.all_conditions_hold(),
        samples: r.samples.clone(),
    };
    let pass = out.conditions_hold && out.rank_identity && out.max_angle <= cfg.tolerances.continuity;
    Outcome::new("sweep", &out, pass, table, vec![("n_prime_vs_angle", plot)])
}

fn check(cfg: &ProblemConfig) -> Result<Outcome> {
    let r: CheckReport = run_check(cfg)?;
    let mut table = Csv::new(&["label", "name", "status"]);
    for c in &r.battery.conditions {
        let status = match c.status {
            Status::Pass => "pass",
            Status::Fail => "fail",
            Status::Skipped => "skipped",
        };
        table.push(vec![c.label.clone(), c.name.clone(), status.into()]);
    }
    if let Some(v) = &r.lopatinskii {
        table.push(vec!["(9.5)".into(), "Lopatinskii".into(), if v.pass { "pass" } else { "fail" }.into()]);
    }
    let mut plots = vec![];
    if let Some(wl) = &r.battery.weight_line {
        let mut roots = Csv::new(&["y", "re", "im", "mult", "in_strip", "chain_lengths"]);
        for row in &wl.rows {
            roots.push(vec![
                join_floats(&row.y),
                fmt_float(row.re),
                fmt_float(row.im),
                row.mult.to_string(),
                row.in_strip.to_string(),
                join_ints(&row.chain_lengths),
            ]);
        }
        plots.push(("roots_plane", roots));
    }
    if let Some(s) = &r.battery.sweep {
        plots.push(("n_prime_vs_angle", sweep_tables(&s.samples, &s.component_labels).1));
    }
    if let (Some(v), Some(s)) = (&r.lopatinskii, &r.battery.sweep) {
        let mut t = Csv::new(&["component", "angle", "y", "dim_kernel", "dim_range", "min_singular", "condition_number"]);
        let opt = |v: Option<f64>| v.map_or(String::new(), fmt_float);
        for rec in &v.records {
            t.push(vec![
                s.component_labels[rec.component].clone(),
                fmt_float(cosphere_angle(&rec.eta)),
                join_floats(&rec.y),
                rec.dim_kernel.to_string(),
                rec.dim_range.to_string(),
                opt(rec.min_singular),
                opt(rec.condition_number),
            ]);
        }
        plots.push(("min_singular_vs_angle", t));
    }
    let mut failures: Vec<String> =
        r.battery.conditions.iter().filter(|c| c.status == Status::Fail).map(|c| c.label.clone()).collect();
    if r.lopatinskii.as_ref().is_some_and(|v| !v.pass) {
        failures.push("(9.5)".into());
    }
    let mut out = Outcome::new("check", &r, r.pass, table, plots)?;
    out.failures = failures;
    Ok(out)
}

fn edge_symbol_grid() -> Result<Arc<ConeGrid>> {
    Ok(Arc::new(ConeGrid::log_uniform(1e-3, 30.0, 6.0)?))
}

#[derive(Serialize)]
struct EstimateOut {
    operator: SymbolEstimateReport,
}

/// Order-zero estimate of the complete boundary symbol between dilation spaces.
fn symbols_estimate(cfg: &ProblemConfig, opts: &RunOptions) -> Result<Outcome> {
    let model = cfg.fiber_model()?;
    let p = BoundarySymbol::new(cfg.operator.clone(), model, edge_symbol_grid()?, false)?;
    let mut eo = EstimateOptions::default();
    if let Some(n) = opts.samples {
        eo.eta_samples = n.max(2);
    }
    let r = symbol_estimate_check(&p, 0.0, 1, &eo)?;
    let mut table = Csv::new(&["alpha", "beta", "sign", "slope", "bound", "pass"]);
    for e in &r.entries {
        table.push(vec![
            e.alpha.to_string(),
            e.beta.to_string(),
            e.sign.to_string(),
            e.slope.map_or(String::new(), fmt_float),
            fmt_float(e.bound),
            e.pass.to_string(),
        ]);
    }
    let pass = r.pass;
    Outcome::new("symbols_estimate", &EstimateOut { operator: r }, pass, table, vec![])
}

#[derive(Serialize)]
struct HomogOut {
    samples: Vec<(f64, f64)>,
    residual: f64,
    tolerance: f64,
}

/// Twisted homogeneity of the normal family, order one.
fn symbols_homog(cfg: &ProblemConfig, opts: &RunOptions) -> Result<Outcome> {
    let model = cfg.fiber_model()?;
    let p = BoundarySymbol::new(cfg.operator.clone(), model, edge_symbol_grid()?, true)?;
    let etas = opts.eta.clone().unwrap_or_else(|| vec![1.0, -2.5, 0.7]);
    let samples: Vec<(f64, f64)> = etas.iter().enumerate().map(|(k, &e)| (k as f64, e)).collect();
    if samples.iter().any(|s| s.1 == 0.0) {
        return Err(WedgeError::Config("--eta values must be non-zero".into()));
    }
    let residual = twisted_homog_check(&p, 1.0, &samples);
    let tol = 1e-8;
    let mut table = Csv::new(&["residual", "tolerance"]);
    table.push(vec![fmt_float(residual), fmt_float(tol)]);
    Outcome::new("symbols_homog", &HomogOut { samples, residual, tolerance: tol }, residual <= tol, table, vec![])
}

#[derive(Serialize)]
struct ExtendOut {
    band: usize,
    support_radius: f64,
    support_violation: f64,
    boundary_limit: Vec<(f64, f64)>,
    round_trip_error: f64,
}

/// Extension of a fixed band-limited trace section at the trace space over `y`.
fn symbols_extend(cfg: &ProblemConfig, y: &[f64]) -> Result<Outcome> {
    if cfg.operator.edge_dim != 1 {
        return Err(WedgeError::Config("the extension operator is sampled on a one-dimensional edge".into()));
    }
    let model = cfg.fiber_model()?;
    let pencil = assemble_pencil(&cfg.operator, &model, y)?;
    let t = build_trace_space(&pencil, &boundary_spectrum(&pencil, cfg.spectrum_options())?)?;
    let band = 16;
    let coeffs = CMat::from_fn(t.dim(), 2 * band + 1, |i, k| {
        let freq = k as f64 - band as f64;
        C64::from_polar(1.0 / (1.0 + freq * freq), 0.7 * freq + i as f64)
    });
    let f = TraceSection::from_coeffs(band, coeffs)?;
    let bracket = cfg.grids.metric;
    let grid = ConeGrid::log_uniform(1e-6, 0.6, 20.0)?;
    let u = extension_apply(&f, &t, &bracket, &EXTENSION_CUTOFF, &grid.nodes, 64)?;
    let mut violation: f64 = 0.0;
    for vals in &u.values {
        for (i, &x) in grid.nodes.iter().enumerate() {
            if x >= C0 {
                violation = violation.max(vals.column(i).norm());
            }
        }
    }
    let eps = [1e-1, 1e-2, 1e-3];
    let errs = boundary_limit_errors(&f, &t, &bracket, &EXTENSION_CUTOFF, &eps, 128);
    let back = collar_trace(&u, &t, (1e-5, 1e-3), band)?;
    let round_trip = max_abs(&(&back.coeffs - &f.coeffs));
    let decreasing = errs.windows(2).all(|w| w[0] > w[1]);
    let pass = violation == 0.0 && decreasing && errs[2] <= 1e-3 && round_trip <= 1e-6;
    let mut profile = Csv::new(&["x", "abs_at_y0"]);
    for (i, &x) in grid.nodes.iter().enumerate() {
        profile.push(vec![fmt_float(x), fmt_float(u.values[0].column(i).norm())]);
    }
    let mut table = Csv::new(&["eps", "error"]);
    for (e, r) in eps.iter().zip(&errs) {
        table.push(vec![fmt_float(*e), fmt_float(*r)]);
    }
    let out = ExtendOut {
        band,
        support_radius: C0,
        support_violation: violation,
        boundary_limit: eps.iter().cloned().zip(errs.iter().cloned()).collect(),
        round_trip_error: round_trip,
    };
    Outcome::new("symbols_extend", &out, pass, table, vec![("extension_profile", profile)])
}
