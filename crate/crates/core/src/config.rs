//! Problem configuration: a TOML document with `[fiber]`, `[operator]`,
//! `[boundary_condition]`, `[grids]` and `[tolerances]` tables. Matrices are
//! nested arrays of `[re, im]` pairs.

use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::cone::ConeSettings;
use crate::error::{Result, WedgeError};
use crate::fiber::{FiberKind, FiberModel};
use crate::indicial::SpectrumOptions;
use crate::linalg::CMat;
use crate::operator::{cmat_serde, WedgeOp};
use crate::symbols::MetricBracket;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FiberSection {
    pub kind: FiberKind,
    pub rank: usize,
    #[serde(default)]
    pub modes: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundaryKind {
    /// `B = I` on the trace bundle and `Pi = I`.
    Identity,
    /// `B = I` with the projection onto the kernel bundle.
    Aps,
    /// User matrices acting on leading coefficients in `C^N`.
    Matrix,
}

mod cmat_list {
    use super::*;
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &[CMat], s: S) -> std::result::Result<S::Ok, S::Error> {
        let rows: Vec<_> = v.iter().map(cmat_serde::to_rows).collect();
        rows.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Vec<CMat>, D::Error> {
        let rows: Vec<Vec<Vec<[f64; 2]>>> = Vec::deserialize(d)?;
        rows.iter().map(|r| cmat_serde::from_rows(r).map_err(serde::de::Error::custom)).collect()
    }
}

mod opt_cmat {
    use super::*;
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &Option<CMat>, s: S) -> std::result::Result<S::Ok, S::Error> {
        v.as_ref().map(cmat_serde::to_rows).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Option<CMat>, D::Error> {
        let rows: Option<Vec<Vec<[f64; 2]>>> = Option::deserialize(d)?;
        rows.map(|r| cmat_serde::from_rows(&r).map_err(serde::de::Error::custom)).transpose()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundaryCondition {
    pub kind: BoundaryKind,
    /// Order of `B`.
    #[serde(default)]
    pub mu: f64,
    /// Principal symbol of `B` on each cosphere component (one matrix applies to all).
    #[serde(default, with = "cmat_list", skip_serializing_if = "Vec::is_empty")]
    pub b: Vec<CMat>,
    /// Projection symbol on the target bundle, per component; identity if empty.
    #[serde(default, with = "cmat_list", skip_serializing_if = "Vec::is_empty")]
    pub pi: Vec<CMat>,
    /// Generator of the group action on the target bundle; zero if absent.
    #[serde(default, with = "opt_cmat", skip_serializing_if = "Option::is_none")]
    pub a: Option<CMat>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Grids {
    /// Edge sample points per edge direction.
    pub edge_samples: usize,
    /// Covector directions for two-dimensional edges.
    pub cosphere_samples: usize,
    /// Points on the unit sphere for the w-symbol.
    pub sphere_samples: usize,
    /// Radial nodes per unit of `ln x`.
    pub radial_density: f64,
    pub x_max_factor: f64,
    pub x_min_factor: f64,
    pub fit_window: [f64; 2],
    /// Edge metric for the extension operator.
    pub metric: MetricBracket,
}

impl Default for Grids {
    fn default() -> Self {
        let c = ConeSettings::default();
        Self {
            edge_samples: 8,
            cosphere_samples: 16,
            sphere_samples: 64,
            radial_density: c.density,
            x_max_factor: c.x_max_factor,
            x_min_factor: c.x_min_factor,
            fit_window: [c.window.0, c.window.1],
            metric: MetricBracket::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    pub root: f64,
    pub cluster: f64,
    pub rank_rel: f64,
    pub ellipticity: f64,
    pub iso: f64,
    pub admissibility: f64,
    pub residual: f64,
    pub trace_rank: f64,
    /// Largest principal angle between adjacent kernel samples.
    pub continuity: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        let s = SpectrumOptions::default();
        let c = ConeSettings::default();
        Self {
            root: s.root_tol,
            cluster: s.cluster_tol,
            rank_rel: s.rank_rel_tol,
            ellipticity: 1e-6,
            iso: 1e-6,
            admissibility: c.admissibility_tol,
            residual: c.residual_tol,
            trace_rank: c.trace_rank_tol,
            continuity: 0.05,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    pub fiber: FiberSection,
    pub operator: WedgeOp,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub boundary_condition: Option<BoundaryCondition>,
    #[serde(default)]
    pub grids: Grids,
    #[serde(default)]
    pub tolerances: Tolerances,
}

impl ProblemConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| WedgeError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| WedgeError::Io { path: path.display().to_string(), source: e })?;
        Self::parse(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| WedgeError::Config(e.to_string()))
    }

    pub fn fiber_model(&self) -> Result<Arc<FiberModel>> {
        Ok(Arc::new(FiberModel::build(self.fiber.kind, self.fiber.rank, self.fiber.modes)?))
    }

    pub fn spectrum_options(&self) -> SpectrumOptions {
        SpectrumOptions {
            root_tol: self.tolerances.root,
            cluster_tol: self.tolerances.cluster,
            rank_rel_tol: self.tolerances.rank_rel,
            ..SpectrumOptions::default()
        }
    }

    pub fn cone_settings(&self) -> ConeSettings {
        ConeSettings {
            density: self.grids.radial_density,
            x_max_factor: self.grids.x_max_factor,
            x_min_factor: self.grids.x_min_factor,
            window: (self.grids.fit_window[0], self.grids.fit_window[1]),
            admissibility_tol: self.tolerances.admissibility,
            residual_tol: self.tolerances.residual,
            trace_rank_tol: self.tolerances.trace_rank,
            ..ConeSettings::default()
        }
    }

    /// Edge sample points: a uniform grid on the torus `(R / 2 pi Z)^q`.
    pub fn edge_points(&self) -> Vec<Vec<f64>> {
        let n = self.grids.edge_samples.max(1);
        let q = self.operator.edge_dim;
        let total = n.pow(q as u32);
        (0..total)
            .map(|mut k| {
                (0..q)
                    .map(|_| {
                        let i = k % n;
                        k /= n;
                        2.0 * std::f64::consts::PI * i as f64 / n as f64
                    })
                    .collect()
            })
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        let model = FiberModel::build(self.fiber.kind, self.fiber.rank, self.fiber.modes)?;
        self.operator.validate(&model)?;
        let g = &self.grids;
        if g.edge_samples == 0 || g.sphere_samples == 0 {
            return Err(WedgeError::Config("sample counts must be positive".into()));
        }
        if self.operator.edge_dim == 2 && g.cosphere_samples < 3 {
            return Err(WedgeError::Config("two-dimensional edges need at least 3 cosphere samples".into()));
        }
        if !(g.radial_density > 0.0 && g.x_max_factor > 0.0 && g.x_min_factor > 0.0) {
            return Err(WedgeError::Config("radial grid parameters must be positive".into()));
        }
        if !(g.fit_window[0] > g.x_min_factor && g.fit_window[0] < g.fit_window[1]) {
            return Err(WedgeError::Config(format!(
                "fit window {:?} must lie above x_min_factor {} and be increasing",
                g.fit_window, g.x_min_factor
            )));
        }
        g.metric.validate()?;
        let t = &self.tolerances;
        for (name, v) in [
            ("root", t.root),
            ("cluster", t.cluster),
            ("rank_rel", t.rank_rel),
            ("ellipticity", t.ellipticity),
            ("iso", t.iso),
            ("admissibility", t.admissibility),
            ("residual", t.residual),
            ("trace_rank", t.trace_rank),
            ("continuity", t.continuity),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(WedgeError::Config(format!("tolerance {name} must be positive, got {v}")));
            }
        }
        if let Some(bc) = &self.boundary_condition {
            let n = model.dim();
            let comps = if self.operator.edge_dim == 1 { 2 } else { 1 };
            match bc.kind {
                BoundaryKind::Matrix => {
                    if bc.b.is_empty() {
                        return Err(WedgeError::Config("boundary_condition.kind = \"matrix\" needs b".into()));
                    }
                    if bc.b.len() != 1 && bc.b.len() != comps {
                        return Err(WedgeError::Config(format!(
                            "b has {} matrices; give 1 or one per cosphere component ({comps})",
                            bc.b.len()
                        )));
                    }
                    let rows = bc.b[0].nrows();
                    for m in &bc.b {
                        if m.ncols() != n || m.nrows() != rows {
                            return Err(WedgeError::Config(format!(
                                "b must be {rows} x {n} (target x leading coefficients), got {} x {}",
                                m.nrows(),
                                m.ncols()
                            )));
                        }
                    }
                    if !bc.pi.is_empty() && bc.pi.len() != 1 && bc.pi.len() != comps {
                        return Err(WedgeError::Config(format!("pi has {} matrices", bc.pi.len())));
                    }
                    for p in &bc.pi {
                        if p.nrows() != rows || p.ncols() != rows {
                            return Err(WedgeError::Config(format!("pi must be {rows} x {rows}")));
                        }
                        let defect = crate::linalg::max_abs(&(p * p - p));
                        if defect > 1e-10 {
                            return Err(WedgeError::Config(format!("pi is not a projection (|pi^2 - pi| = {defect:.3e})")));
                        }
                    }
                    if let Some(a) = &bc.a {
                        if a.nrows() != rows || a.ncols() != rows {
                            return Err(WedgeError::Config(format!("a must be {rows} x {rows}")));
                        }
                    }
                }
                BoundaryKind::Identity | BoundaryKind::Aps => {
                    if !bc.b.is_empty() || !bc.pi.is_empty() || bc.a.is_some() {
                        return Err(WedgeError::Config(format!(
                            "boundary_condition.kind = {:?} takes no matrices",
                            bc.kind
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Configurations of the example models.
pub mod presets {
    use super::*;
    use crate::linalg::C64;
    use crate::models;

    fn wrap(fiber: FiberModel, op: WedgeOp, bc: Option<BoundaryCondition>) -> ProblemConfig {
        ProblemConfig {
            fiber: FiberSection { kind: fiber.kind, rank: fiber.rank, modes: fiber.modes },
            operator: op,
            boundary_condition: bc,
            grids: Grids::default(),
            tolerances: Tolerances::default(),
        }
    }

    fn bc(kind: BoundaryKind) -> Option<BoundaryCondition> {
        Some(BoundaryCondition { kind, mu: 0.0, b: vec![], pi: vec![], a: None })
    }

    pub fn dbar(kind: BoundaryKind) -> ProblemConfig {
        let (f, op) = models::dbar();
        wrap(f, op, bc(kind))
    }

    pub fn shifted(b: C64) -> ProblemConfig {
        let (f, op) = models::shifted_euler(b);
        wrap(f, op, None)
    }

    pub fn jordan() -> ProblemConfig {
        let (f, op) = models::jordan();
        wrap(f, op, bc(BoundaryKind::Aps))
    }

    /// Dirac model with `B` reading the first component of the zero mode.
    pub fn dirac(modes: usize, potential: bool) -> ProblemConfig {
        let (f, op) = models::dirac(modes, potential);
        let n = f.dim();
        let mut b = CMat::zeros(1, n);
        b[(0, f.index(0, 0))] = C64::new(1.0, 0.0);
        let mut cfg = wrap(
            f,
            op,
            Some(BoundaryCondition { kind: BoundaryKind::Matrix, mu: 0.0, b: vec![b], pi: vec![], a: None }),
        );
        cfg.grids.edge_samples = 16;
        cfg
    }

    pub fn flat_counterexample() -> ProblemConfig {
        let (f, op) = models::flat_counterexample();
        wrap(f, op, bc(BoundaryKind::Aps))
    }
}
