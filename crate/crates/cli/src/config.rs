//! Scenario files: one TOML document, strict schema, validated before any computation.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, ensure, Context};
use serde::{Deserialize, Serialize};

use gradest_core::nonlinearity::{fde_admissible_range, ValueRange};
use gradest_core::{
    BoundaryCondition, ExactSolution, Field, GeometryKind, ModelGeometry, Nonlinearity, SolverConfig, SweepSchedule,
    Window,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub geometry: GeometrySection,
    pub equation: EquationSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial: Option<InitialSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub solver: Option<SolverSection>,
    #[serde(default)]
    pub analysis: AnalysisSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometrySection {
    pub kind: GeometryKind,
    #[serde(default = "one")]
    pub n: usize,
    pub domain: [f64; 2],
    pub grid_points: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    Heat,
    Power,
    Custom,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EquationSection {
    pub preset: Preset,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
    /// Defaults per preset, see [`Resolved::alpha`].
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    /// Knots `s_i` and values `F(s_i)` of a custom nonlinearity.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub table_s: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub table_f: Option<Vec<f64>>,
}

/// Initial data: an exact solution sampled at `t0`, or a CSV with columns `r,u`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialSection {
    #[serde(default)]
    pub t0: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exact: Option<ExactSolution>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryKind {
    Periodic,
    /// Trace of `initial.exact`.
    DirichletExact,
    NeumannZero,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    pub dt: f64,
    pub horizon: f64,
    pub bc: BoundaryKind,
    #[serde(default = "default_tol")]
    pub newton_tol: f64,
    #[serde(default = "default_iter")]
    pub newton_max_iter: usize,
    #[serde(default = "default_floor")]
    pub positivity_floor: f64,
    #[serde(default = "one")]
    pub snapshot_stride: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportKind {
    General,
    FastDiffusion,
    PorousMediumLine,
    PorousMedium,
    Heat,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisSection {
    /// Value range `[m, M]` for `check`; taken from the initial data when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub range: Option<[f64; 2]>,
    #[serde(default)]
    pub windows: Vec<Window>,
    #[serde(default)]
    pub reports: Vec<ReportKind>,
    /// Evaluate the differential inequality on the solved trajectory.
    #[serde(default)]
    pub inequality: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub convergence: Option<ConvergenceSection>,
    /// Largest acceptable time-step residual relative to `max |u|` after `solve`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub residual_tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lemma: Option<LemmaSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSection>,
    #[serde(default)]
    pub seed: u64,
}

/// Refinement study against `initial.exact`: spatial with `dt = dt_factor · h²`, then temporal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvergenceSection {
    pub resolutions: Vec<usize>,
    #[serde(default = "default_dt_factor")]
    pub dt_factor: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LemmaSection {
    pub a: f64,
    pub b: f64,
    pub n: usize,
    #[serde(default = "default_samples")]
    pub samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub schedule: SweepSchedule,
    pub x0: f64,
    pub t0: f64,
    pub radii: Vec<f64>,
    #[serde(default = "default_sweep_points")]
    pub grid_points: usize,
    #[serde(default = "default_sweep_snapshots")]
    pub snapshots: usize,
    /// Left end of each generated domain; `geometry.domain[0]` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domain_start: Option<f64>,
    /// When set, the run fails unless the table's decrease verdict matches.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expect_decreasing: Option<bool>,
}

fn one() -> usize {
    1
}
fn default_tol() -> f64 {
    1e-10
}
fn default_iter() -> usize {
    50
}
fn default_floor() -> f64 {
    1e-12
}
fn default_dt_factor() -> f64 {
    0.5
}
fn default_samples() -> usize {
    100_000
}
fn default_sweep_points() -> usize {
    2001
}
fn default_sweep_snapshots() -> usize {
    32
}

/// A parsed scenario together with what it was read from.
#[derive(Debug, Clone)]
pub struct Loaded {
    pub config: ScenarioConfig,
    /// Directory that relative paths in the scenario resolve against.
    pub base: PathBuf,
}

impl ScenarioConfig {
    pub fn parse(text: &str) -> anyhow::Result<Self> {
        Ok(toml::from_str(text)?)
    }

    pub fn load(path: &Path) -> anyhow::Result<Loaded> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let config = Self::parse(&text).with_context(|| format!("parsing {}", path.display()))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(Loaded { config, base })
    }
}

/// Everything a command needs, checked up front.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub config: ScenarioConfig,
    pub geometry: Arc<ModelGeometry>,
    pub nl: Nonlinearity,
    /// Initial field, when an initial section is present.
    pub initial: Option<Field>,
    /// Raw bytes of a tabulated initial condition, hashed into every document.
    pub initial_bytes: Option<Vec<u8>>,
    pub solver: Option<SolverConfig>,
}

impl Resolved {
    pub fn new(loaded: &Loaded) -> anyhow::Result<Self> {
        let config = loaded.config.clone();
        let g = &config.geometry;
        let geometry = Arc::new(ModelGeometry::new(
            g.kind,
            g.n,
            g.domain[0],
            g.domain[1],
            g.grid_points,
        )?);
        let nl = nonlinearity(&config.equation)?;

        let mut initial = None;
        let mut initial_bytes = None;
        if let Some(init) = &config.initial {
            match (&init.exact, &init.csv) {
                (Some(e), None) => {
                    e.validate()?;
                    // constants solve every equation
                    ensure!(
                        matches!(e, ExactSolution::Constant { .. }) || e.nonlinearity() == nl,
                        "initial.exact solves {:?}, but the equation is {:?}",
                        e.nonlinearity(),
                        nl
                    );
                    let field = e.sample(&geometry, init.t0);
                    ensure!(
                        field.values.iter().all(|&v| v > 0.0 && v.is_finite()),
                        "initial.exact is not positive and finite on the grid at t0 = {}",
                        init.t0
                    );
                    initial = Some(field);
                }
                (None, Some(path)) => {
                    let path = loaded.base.join(path);
                    let bytes = std::fs::read(&path).with_context(|| format!("reading {}", path.display()))?;
                    initial = Some(Field::read_csv(geometry.clone(), bytes.as_slice(), init.t0)?);
                    initial_bytes = Some(bytes);
                }
                _ => bail!("initial: give exactly one of `exact` or `csv`"),
            }
        }

        let solver = match &config.solver {
            Some(s) => {
                let bc = match s.bc {
                    BoundaryKind::Periodic => BoundaryCondition::Periodic,
                    BoundaryKind::NeumannZero => BoundaryCondition::NeumannZero,
                    BoundaryKind::DirichletExact => {
                        let exact = config.initial.as_ref().and_then(|i| i.exact);
                        BoundaryCondition::DirichletExact(
                            exact.context("bc = \"dirichlet_exact\" needs initial.exact")?,
                        )
                    }
                };
                let cfg = SolverConfig {
                    dt: s.dt,
                    newton_tol: s.newton_tol,
                    newton_max_iter: s.newton_max_iter,
                    bc,
                    positivity_floor: s.positivity_floor,
                    snapshot_stride: s.snapshot_stride,
                };
                cfg.validate(&geometry)?;
                ensure!(
                    s.horizon > 0.0 && s.horizon.is_finite(),
                    "solver.horizon must be positive"
                );
                ensure!(initial.is_some(), "the solver section needs an initial section");
                Some(cfg)
            }
            None => None,
        };

        let a = &config.analysis;
        if let Some([m, big_m]) = a.range {
            ValueRange::new(m, big_m)?;
        }
        for w in &a.windows {
            ensure!(
                w.radius > 0.0 && w.duration > 0.0,
                "window at x0 = {} has non-positive R or T",
                w.x0
            );
        }
        for kind in &a.reports {
            check_report(*kind, &config.equation, &nl, g.n)?;
        }
        if let Some(tol) = a.residual_tol {
            ensure!(tol > 0.0, "analysis.residual_tol must be positive");
        }
        if let Some(c) = &a.convergence {
            ensure!(c.dt_factor > 0.0, "analysis.convergence.dt_factor must be positive");
            ensure!(
                c.resolutions.len() >= 3,
                "analysis.convergence needs at least 3 grid sizes"
            );
            ensure!(
                config.initial.as_ref().and_then(|i| i.exact).is_some() && config.solver.is_some(),
                "analysis.convergence needs initial.exact and a solver section"
            );
        }
        if let Some(l) = &a.lemma {
            ensure!(
                l.n >= 1 && l.samples >= 1,
                "analysis.lemma needs n >= 1 and samples >= 1"
            );
        }
        if let Some(s) = &a.sweep {
            s.schedule.validate()?;
            ensure!(!s.radii.is_empty(), "analysis.sweep.radii is empty");
            ensure!(s.snapshots >= 2, "analysis.sweep.snapshots must be at least 2");
            ensure!(
                config.initial.as_ref().and_then(|i| i.exact).is_some(),
                "the sweep samples initial.exact on each window"
            );
        }

        Ok(Resolved {
            config,
            geometry,
            nl,
            initial,
            initial_bytes,
            solver,
        })
    }

    pub fn exact(&self) -> Option<ExactSolution> {
        self.config.initial.as_ref().and_then(|i| i.exact)
    }

    /// `α` of the general estimate: the configured value, or the preset's natural choice
    /// on `range` (`1 + ln M` for heat, `0` for fast diffusion, `p/(p-1) M^{p-1}(1+δ)`
    /// for porous medium).
    pub fn alpha(&self, range: ValueRange) -> anyhow::Result<f64> {
        let eq = &self.config.equation;
        if let Some(a) = eq.alpha {
            return Ok(a);
        }
        match (eq.preset, eq.p) {
            (Preset::Heat, _) => Ok(1.0 + range.max.ln()),
            (Preset::Power, Some(1.0)) => Ok(1.0 + range.max.ln()),
            (Preset::Power, Some(p)) if p < 1.0 => Ok(0.0),
            (Preset::Power, Some(p)) => {
                let delta = eq
                    .delta
                    .context("porous medium needs equation.delta or equation.alpha")?;
                Ok(p / (p - 1.0) * range.max.powf(p - 1.0) * (1.0 + delta))
            }
            _ => bail!("equation.alpha is required for a custom nonlinearity"),
        }
    }
}

fn nonlinearity(eq: &EquationSection) -> anyhow::Result<Nonlinearity> {
    let tables = eq.table_s.is_some() || eq.table_f.is_some();
    match eq.preset {
        Preset::Heat => {
            ensure!(eq.p.is_none() && !tables, "the heat preset takes no p or table");
            Ok(Nonlinearity::heat())
        }
        Preset::Power => {
            ensure!(!tables, "the power preset takes no table");
            Ok(Nonlinearity::power(eq.p.context("the power preset needs equation.p")?)?)
        }
        Preset::Custom => {
            ensure!(eq.p.is_none(), "the custom preset takes no p");
            match (&eq.table_s, &eq.table_f) {
                (Some(s), Some(f)) => Ok(Nonlinearity::custom(s.clone(), f.clone())?),
                _ => bail!("the custom preset needs table_s and table_f"),
            }
        }
    }
}

fn check_report(kind: ReportKind, eq: &EquationSection, nl: &Nonlinearity, n: usize) -> anyhow::Result<()> {
    let p = nl.exponent();
    match kind {
        ReportKind::General => {
            if eq.preset == Preset::Custom {
                ensure!(
                    eq.alpha.is_some(),
                    "the general report on a custom table needs equation.alpha"
                );
            }
        }
        ReportKind::FastDiffusion => {
            ensure!(
                matches!(p, Some(p) if p < 1.0),
                "fast_diffusion report needs a power preset with p < 1"
            );
            fde_admissible_range(n)?;
        }
        ReportKind::PorousMediumLine => {
            ensure!(matches!(p, Some(p) if p > 1.0), "porous_medium_line report needs p > 1");
            ensure!(n == 1, "porous_medium_line report needs n = 1");
            ensure!(eq.delta.is_some(), "porous_medium_line report needs equation.delta");
        }
        ReportKind::PorousMedium => {
            ensure!(matches!(p, Some(p) if p > 1.0), "porous_medium report needs p > 1");
            ensure!(n >= 2, "porous_medium report needs n >= 2");
            ensure!(eq.delta.is_some(), "porous_medium report needs equation.delta");
        }
        ReportKind::Heat => ensure!(*nl == Nonlinearity::Heat, "heat report needs the heat preset"),
    }
    Ok(())
}
