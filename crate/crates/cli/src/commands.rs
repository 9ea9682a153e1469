//! The five subcommands. Each validates, computes, writes its documents under the
//! output directory and reports whether its checks passed.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, ensure, Context};
use rayon::prelude::*;
use serde::Serialize;

use gradest_core::estimates::{
    bound_ratio_fde, bound_ratio_heat_sz, bound_ratio_pme_n1, bound_ratio_pme_n2, bound_ratio_thm11,
    inequality_residual, liouville_sweep,
};
use gradest_core::matrix_lemma::{bruteforce_sup, supremum_bound, witness};
use gradest_core::nonlinearity::{condition_report, fde_admissible_range, fde_gamma, pme_pinch};
use gradest_core::solver::{convergence_study, residual, solve, ConvergenceReport, StudySetup};
use gradest_core::{
    ConditionReport, EstimateReport, InequalityResidualReport, ModelGeometry, Nonlinearity, PinchReport, SweepTable,
    Trajectory, ValueRange, Window,
};

use crate::config::{LemmaSection, ReportKind, Resolved, ScenarioConfig};
use crate::output::{content_hash, write_csv_atomic, write_document, Meta};

const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Pass,
    Fail,
}

impl Status {
    fn from(ok: bool) -> Self {
        if ok {
            Status::Pass
        } else {
            Status::Fail
        }
    }
}

/// What a command produced: its verdict, the files it wrote and a short human summary.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub status: Status,
    pub files: Vec<PathBuf>,
    pub summary: Vec<String>,
}

fn meta(command: &'static str, hash: String, passed: bool) -> Meta {
    Meta {
        command,
        version: VERSION,
        content_hash: hash,
        passed,
    }
}

fn hash_for(command: &str, res: &Resolved, extra: &[&[u8]]) -> anyhow::Result<String> {
    let mut chunks: Vec<&[u8]> = extra.to_vec();
    if let Some(b) = &res.initial_bytes {
        chunks.push(b);
    }
    content_hash(command, Some(&res.config), &chunks)
}

// ---------------------------------------------------------------- check

#[derive(Debug, Serialize)]
struct FdeRange {
    p: f64,
    lo: f64,
    hi: f64,
    admissible: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    gamma: Option<f64>,
}

#[derive(Debug, Serialize)]
struct CheckResult {
    conditions: ConditionReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    fast_diffusion: Option<FdeRange>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pinch: Option<PinchReport>,
}

fn check_range(res: &Resolved) -> anyhow::Result<ValueRange> {
    if let Some([m, big_m]) = res.config.analysis.range {
        return Ok(ValueRange::new(m, big_m)?);
    }
    let init = res
        .initial
        .as_ref()
        .context("check needs analysis.range or an initial section")?;
    Ok(ValueRange::of(init.values.iter().copied())?)
}

pub fn cmd_check(res: &Resolved, out: &Path) -> anyhow::Result<Outcome> {
    let n = res.config.geometry.n;
    let range = check_range(res)?;
    let alpha = res.alpha(range)?;
    let conditions = condition_report(&res.nl, range, alpha, n)?;
    let mut summary = vec![format!(
        "range [{}, {}], alpha = {alpha}: K = {}, delta = {}, tau = {}, gamma = {} (A {}, B {}, C {})",
        range.m,
        range.max,
        conditions.k_sup,
        conditions.delta,
        conditions.tau_min,
        conditions.gamma,
        verdict(conditions.satisfied_a),
        verdict(conditions.satisfied_b),
        verdict(conditions.satisfied_c),
    )];
    if conditions.c_mismatch {
        summary.push(format!(
            "note: the literal nonlinear condition gives gamma = {} and the opposite verdict",
            conditions.gamma_literal
        ));
    }
    let mut passed = conditions.passes();

    let power = match res.nl {
        Nonlinearity::Power { p } if p != 1.0 => Some(p),
        _ => None,
    };
    let mut fast_diffusion = None;
    let mut pinch = None;
    if let Some(p) = power.filter(|&p| p < 1.0) {
        let (lo, hi) = fde_admissible_range(n)?;
        let gamma = fde_gamma(n, p).ok();
        summary.push(format!(
            "fast diffusion: admissible range ({lo}, {hi}) for n = {n}, p = {p} {}",
            if gamma.is_some() { "inside" } else { "outside" }
        ));
        passed &= gamma.is_some();
        fast_diffusion = Some(FdeRange {
            p,
            lo,
            hi,
            admissible: gamma.is_some(),
            gamma,
        });
    }
    if let (Some(p), Some(delta)) = (power.filter(|&p| p > 1.0), res.config.equation.delta) {
        if n >= 2 {
            let report = pme_pinch(n, p, delta, range)?;
            summary.push(format!(
                "pinch: (M/m)^(p-1) = {} against threshold {}: {}",
                report.ratio,
                report.threshold,
                if report.holds { "holds" } else { "violated" }
            ));
            passed &= report.holds;
            pinch = Some(report);
        }
    }

    let result = CheckResult {
        conditions,
        fast_diffusion,
        pinch,
    };
    let path = out.join("check.toml");
    write_document(
        &path,
        &meta("check", hash_for("check", res, &[])?, passed),
        &result,
        Some(&res.config),
    )?;
    Ok(Outcome {
        status: Status::from(passed),
        files: vec![path],
        summary,
    })
}

fn verdict(ok: bool) -> &'static str {
    if ok {
        "ok"
    } else {
        "fails"
    }
}

// ---------------------------------------------------------------- lemma

#[derive(Debug, Serialize)]
struct LemmaResult {
    inputs: LemmaInputs,
    bound: f64,
    witness_value: f64,
    witness_error: f64,
    empirical: f64,
    empirical_over_bound: f64,
    dominated: bool,
    attained: bool,
}

#[derive(Debug, Serialize)]
struct LemmaInputs {
    a: f64,
    b: f64,
    n: usize,
    samples: usize,
    seed: u64,
}

/// Brute-force maximum of the quadratic form against the closed-form bound, plus the witness.
pub fn cmd_lemma(
    params: LemmaSection,
    seed: u64,
    config: Option<&ScenarioConfig>,
    out: &Path,
) -> anyhow::Result<Outcome> {
    let LemmaSection { a, b, n, samples } = params;
    let bound = supremum_bound(a, b, n);
    let w = witness(a, b, n)?;
    let empirical = bruteforce_sup(a, b, n, samples, seed)?;
    let witness_error = (w.value * w.value - bound).abs();
    let scale = bound.max(1.0);
    let dominated = empirical <= bound + 1e-9;
    let attained = witness_error <= 1e-12 * scale;
    let result = LemmaResult {
        inputs: LemmaInputs { a, b, n, samples, seed },
        bound,
        witness_value: w.value,
        witness_error,
        empirical,
        empirical_over_bound: empirical / bound,
        dominated,
        attained,
    };
    let inputs = format!("{a:e} {b:e} {n} {samples} {seed}");
    let hash = content_hash("lemma", config, &[inputs.as_bytes()])?;
    let passed = dominated && attained;
    let path = out.join("lemma.toml");
    write_document(&path, &meta("lemma", hash, passed), &result, config)?;
    Ok(Outcome {
        status: Status::from(passed),
        files: vec![path],
        summary: vec![format!(
            "a = {a}, b = {b}, n = {n}: bound {bound}, empirical {empirical} ({samples} samples), witness error {witness_error:e}"
        )],
    })
}

// ---------------------------------------------------------------- solve

#[derive(Debug, Serialize)]
struct Snapshot {
    file: String,
    time: f64,
}

#[derive(Debug, Serialize)]
struct SolveResult {
    snapshots: Vec<Snapshot>,
    min_u: f64,
    max_u: f64,
    mass_initial: f64,
    mass_final: f64,
    /// Largest centred-time defect over inner snapshots, relative to `max |u|`.
    residual_relative: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    residual_certified: Option<bool>,
    /// Relative sup-norm error against the exact solution at the final time.
    #[serde(skip_serializing_if = "Option::is_none")]
    exact_error: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    convergence: Option<ConvergenceReport>,
}

fn run_solver(res: &Resolved) -> anyhow::Result<Trajectory> {
    let cfg = res.solver.as_ref().context("this command needs a solver section")?;
    let horizon = res.config.solver.as_ref().map(|s| s.horizon).unwrap_or_default();
    let u0 = res.initial.as_ref().context("this command needs an initial section")?;
    Ok(solve(u0, &res.nl, horizon, cfg)?)
}

pub fn cmd_solve(res: &Resolved, out: &Path) -> anyhow::Result<Outcome> {
    let traj = run_solver(res)?;
    let width = (traj.len().max(2) - 1).to_string().len().max(5);
    let snapshots: Vec<Snapshot> = traj
        .fields
        .par_iter()
        .enumerate()
        .map(|(k, f)| {
            let file = format!("snapshots/u_{k:0width$}.csv");
            write_csv_atomic(&out.join(&file), |buf| f.write_csv(buf, "u"))?;
            Ok(Snapshot { file, time: f.time })
        })
        .collect::<anyhow::Result<_>>()?;

    let range = traj.value_range()?;
    let defects = if traj.len() >= 3 {
        residual(&traj, &res.nl)?
    } else {
        Vec::new()
    };
    let residual_relative = defects.iter().fold(0.0_f64, |m, &d| m.max(d)) / range.max;
    let residual_certified = res.config.analysis.residual_tol.map(|tol| residual_relative <= tol);

    let exact = res.exact();
    let exact_error = exact.map(|e| {
        let last = traj.last();
        let reference = e.sample(&traj.geometry, last.time);
        let scale = reference.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        last.values
            .iter()
            .zip(&reference.values)
            .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()))
            / scale
    });
    let convergence = match (&res.config.analysis.convergence, exact) {
        (Some(c), Some(e)) => {
            let g = &res.config.geometry;
            let s = res.config.solver.as_ref().expect("validated");
            let setup = StudySetup {
                kind: g.kind,
                n: g.n,
                domain: (g.domain[0], g.domain[1]),
                exact: e,
                t_start: res.initial.as_ref().expect("validated").time,
                horizon: s.horizon,
                dt_factor: c.dt_factor,
            };
            Some(convergence_study(&setup, &c.resolutions)?)
        }
        _ => None,
    };

    let mut summary = vec![format!(
        "{} snapshots to t = {}, u in [{}, {}], relative residual {residual_relative:e}",
        traj.len(),
        traj.last().time,
        range.m,
        range.max
    )];
    if let Some(err) = exact_error {
        summary.push(format!("error against the exact solution {err:e}"));
    }
    if let Some(c) = &convergence {
        summary.push(format!(
            "observed order: space {}, time {}",
            fmt_order(c.spatial.order, c.spatial.exact),
            fmt_order(c.temporal.order, c.temporal.exact)
        ));
    }
    let passed = residual_certified.unwrap_or(true);
    let result = SolveResult {
        snapshots,
        min_u: range.m,
        max_u: range.max,
        mass_initial: traj.fields[0].mass(),
        mass_final: traj.last().mass(),
        residual_relative,
        residual_certified,
        exact_error,
        convergence,
    };
    let path = out.join("manifest.toml");
    write_document(
        &path,
        &meta("solve", hash_for("solve", res, &[])?, passed),
        &result,
        Some(&res.config),
    )?;
    let mut files: Vec<PathBuf> = result.snapshots.iter().map(|s| out.join(&s.file)).collect();
    files.push(path);
    Ok(Outcome {
        status: Status::from(passed),
        files,
        summary,
    })
}

fn fmt_order(order: Option<f64>, exact: bool) -> String {
    match (order, exact) {
        (_, true) => "exact".into(),
        (Some(o), _) => format!("{o:.3}"),
        (None, _) => "n/a".into(),
    }
}

// ---------------------------------------------------------------- verify

#[derive(Debug, Serialize)]
struct Entry<T: Serialize> {
    ok: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    report: Option<T>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
}

impl<T: Serialize> Entry<T> {
    fn from_result(r: gradest_core::Result<T>, ok: impl Fn(&T) -> bool) -> Self {
        match r {
            Ok(report) => Entry {
                ok: ok(&report),
                report: Some(report),
                error: None,
            },
            Err(e) => Entry {
                ok: false,
                report: None,
                error: Some(e.to_string()),
            },
        }
    }
}

#[derive(Debug, Serialize)]
struct KindEntry {
    kind: ReportKind,
    #[serde(flatten)]
    entry: Entry<EstimateReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    details: Option<String>,
}

#[derive(Debug, Serialize)]
struct WindowResult {
    window: Window,
    reports: Vec<KindEntry>,
}

/// Spread of the inferred constant `Ĉ = lhs/rhs` of one report kind across windows.
#[derive(Debug, Serialize)]
struct Stability {
    kind: ReportKind,
    windows: usize,
    min_ratio: f64,
    max_ratio: f64,
    spread: f64,
}

#[derive(Debug, Serialize)]
struct VerifyResult {
    #[serde(skip_serializing_if = "Option::is_none")]
    inequality: Option<Entry<InequalityResidualReport>>,
    stability: Vec<Stability>,
    windows: Vec<WindowResult>,
}

fn report_for(
    kind: ReportKind,
    res: &Resolved,
    traj: &Trajectory,
    w: &Window,
    general: &dyn Fn() -> gradest_core::Result<(f64, ConditionReport)>,
) -> gradest_core::Result<EstimateReport> {
    let n = res.config.geometry.n;
    let p = res.nl.exponent().unwrap_or(1.0);
    let delta = res.config.equation.delta.unwrap_or(f64::NAN);
    match kind {
        ReportKind::General => {
            let (alpha, constants) = general()?;
            bound_ratio_thm11(traj, &res.nl, alpha, w, &constants)
        }
        ReportKind::FastDiffusion => bound_ratio_fde(traj, p, n, w),
        ReportKind::PorousMediumLine => bound_ratio_pme_n1(traj, p, delta, w),
        ReportKind::PorousMedium => bound_ratio_pme_n2(traj, p, delta, n, w),
        ReportKind::Heat => bound_ratio_heat_sz(traj, w),
    }
}

fn kind_name(kind: ReportKind) -> &'static str {
    match kind {
        ReportKind::General => "general",
        ReportKind::FastDiffusion => "fast_diffusion",
        ReportKind::PorousMediumLine => "porous_medium_line",
        ReportKind::PorousMedium => "porous_medium",
        ReportKind::Heat => "heat",
    }
}

pub fn cmd_verify(res: &Resolved, out: &Path) -> anyhow::Result<Outcome> {
    let a = &res.config.analysis;
    ensure!(
        a.inequality || (!a.windows.is_empty() && !a.reports.is_empty()),
        "verify needs analysis.inequality or both analysis.windows and analysis.reports"
    );
    let traj = run_solver(res)?;
    let n = res.config.geometry.n;
    let range = traj.value_range()?;
    let alpha = res.alpha(range);

    let inequality = if a.inequality {
        let k = traj.geometry.ricci_lower_bound();
        let r = match &alpha {
            Ok(alpha) => inequality_residual(&traj, &res.nl, *alpha, k, n),
            Err(e) => Err(gradest_core::Error::Parameter(e.to_string())),
        };
        Some(Entry::from_result(r, |r| r.passes))
    } else {
        None
    };

    let general = || -> gradest_core::Result<(f64, ConditionReport)> {
        let alpha = match &alpha {
            Ok(a) => *a,
            Err(e) => return Err(gradest_core::Error::Parameter(e.to_string())),
        };
        Ok((alpha, condition_report(&res.nl, range, alpha, n)?))
    };

    let windows: Vec<WindowResult> = a
        .windows
        .par_iter()
        .enumerate()
        .map(|(i, w)| {
            let reports = a
                .reports
                .iter()
                .map(|&kind| {
                    let entry = Entry::from_result(report_for(kind, res, &traj, w, &general), |r| r.ratio.is_finite());
                    let details = match &entry.report {
                        Some(r) => {
                            let file = format!("details/window_{i:03}_{}.csv", kind_name(kind));
                            write_csv_atomic(&out.join(&file), |buf| r.write_details_csv(buf))?;
                            Some(file)
                        }
                        None => None,
                    };
                    Ok(KindEntry { kind, entry, details })
                })
                .collect::<anyhow::Result<Vec<_>>>()?;
            Ok(WindowResult { window: *w, reports })
        })
        .collect::<anyhow::Result<_>>()?;

    let stability: Vec<Stability> = a
        .reports
        .iter()
        .enumerate()
        .filter_map(|(j, &kind)| {
            let ratios: Vec<f64> = windows
                .iter()
                .filter_map(|w| w.reports[j].entry.report.as_ref().map(|r| r.ratio))
                .filter(|r| r.is_finite())
                .collect();
            if ratios.is_empty() {
                return None;
            }
            let min_ratio = ratios.iter().copied().fold(f64::INFINITY, f64::min);
            let max_ratio = ratios.iter().copied().fold(0.0, f64::max);
            Some(Stability {
                kind,
                windows: ratios.len(),
                min_ratio,
                max_ratio,
                spread: if min_ratio > 0.0 {
                    max_ratio / min_ratio
                } else {
                    f64::NAN
                },
            })
        })
        .collect();

    let mut summary = Vec::new();
    if let Some(e) = &inequality {
        summary.push(match (&e.report, &e.error) {
            (Some(r), _) => format!(
                "inequality: normalized minimum {:e} against -{:e}: {}",
                r.normalized_min,
                r.epsilon,
                verdict(r.passes)
            ),
            (_, Some(err)) => format!("inequality: refused: {err}"),
            _ => unreachable!(),
        });
    }
    for (i, w) in windows.iter().enumerate() {
        for k in &w.reports {
            summary.push(match (&k.entry.report, &k.entry.error) {
                (Some(r), _) => format!(
                    "window {i} {}: lhs {:e}, rhs {:e}, ratio {:e}",
                    kind_name(k.kind),
                    r.lhs_sup,
                    r.rhs,
                    r.ratio
                ),
                (_, Some(err)) => format!("window {i} {}: refused: {err}", kind_name(k.kind)),
                _ => unreachable!(),
            });
        }
    }
    for s in &stability {
        summary.push(format!(
            "{}: ratio in [{:e}, {:e}] over {} windows",
            kind_name(s.kind),
            s.min_ratio,
            s.max_ratio,
            s.windows
        ));
    }

    let passed =
        inequality.as_ref().is_none_or(|e| e.ok) && windows.iter().all(|w| w.reports.iter().all(|k| k.entry.ok));
    let result = VerifyResult {
        inequality,
        stability,
        windows,
    };
    let path = out.join("verify.toml");
    write_document(
        &path,
        &meta("verify", hash_for("verify", res, &[])?, passed),
        &result,
        Some(&res.config),
    )?;
    let mut files = vec![path];
    for w in &result.windows {
        files.extend(w.reports.iter().filter_map(|k| k.details.as_ref().map(|f| out.join(f))));
    }
    Ok(Outcome {
        status: Status::from(passed),
        files,
        summary,
    })
}

// ---------------------------------------------------------------- sweep

#[derive(Debug, Serialize)]
struct SweepResult {
    table: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    expect_decreasing: Option<bool>,
    sweep: SweepTable,
}

/// Sample `initial.exact` on each double cube, generating the windows in parallel.
pub fn cmd_sweep(res: &Resolved, out: &Path) -> anyhow::Result<Outcome> {
    let s = res
        .config
        .analysis
        .sweep
        .as_ref()
        .context("sweep needs an analysis.sweep section")?;
    let exact = res.exact().context("sweep needs initial.exact")?;
    let g = &res.config.geometry;
    let lo = s.domain_start.unwrap_or(g.domain[0]);

    let generated: Vec<gradest_core::Result<Trajectory>> = s
        .radii
        .par_iter()
        .map(|&big_r| {
            let sw = s.schedule.window(s.x0, s.t0, big_r);
            let geom = Arc::new(ModelGeometry::new(g.kind, g.n, lo, s.x0 + sw.radius, s.grid_points)?);
            let t_start = sw.t0 - sw.duration;
            let times: Vec<f64> = (0..s.snapshots)
                .map(|k| t_start + sw.duration * k as f64 / (s.snapshots - 1) as f64)
                .collect();
            exact.trajectory(&geom, &times)
        })
        .collect();
    let mut generated = generated.into_iter();
    let table = liouville_sweep(s.schedule, s.x0, s.t0, &s.radii, |_| {
        generated.next().expect("one trajectory per radius")
    })?;

    let csv = "sweep.csv";
    write_csv_atomic(&out.join(csv), |buf| table.write_csv(buf))?;
    let passed = s.expect_decreasing.is_none_or(|want| want == table.decreasing);
    let mut summary: Vec<String> = table
        .rows
        .iter()
        .map(|r| {
            format!(
                "R = {}: M = {:e}, rhs = {:e}, lhs at centre = {:e}",
                r.radius, r.m_double, r.rhs, r.lhs_at_center
            )
        })
        .collect();
    summary.push(format!(
        "rhs {} in R",
        if table.decreasing {
            "strictly decreasing"
        } else {
            "not decreasing"
        }
    ));
    let result = SweepResult {
        table: csv.into(),
        expect_decreasing: s.expect_decreasing,
        sweep: table,
    };
    let path = out.join("sweep.toml");
    write_document(
        &path,
        &meta("sweep", hash_for("sweep", res, &[])?, passed),
        &result,
        Some(&res.config),
    )?;
    Ok(Outcome {
        status: Status::from(passed),
        files: vec![out.join(csv), path],
        summary,
    })
}

/// Resolve lemma parameters: command-line values override the scenario's.
pub fn lemma_params(
    config: Option<&ScenarioConfig>,
    a: Option<f64>,
    b: Option<f64>,
    n: Option<usize>,
    samples: Option<usize>,
) -> anyhow::Result<LemmaSection> {
    let base = config.and_then(|c| c.analysis.lemma);
    let pick = |cli: Option<f64>, cfg: Option<f64>, name: &str| {
        cli.or(cfg)
            .with_context(|| format!("lemma needs --{name} or analysis.lemma.{name}"))
    };
    let params = LemmaSection {
        a: pick(a, base.map(|l| l.a), "a")?,
        b: pick(b, base.map(|l| l.b), "b")?,
        n: n.or(base.map(|l| l.n)).context("lemma needs --n or analysis.lemma.n")?,
        samples: samples.or(base.map(|l| l.samples)).unwrap_or(100_000),
    };
    if params.n < 1 || params.samples < 1 {
        bail!("lemma needs n >= 1 and samples >= 1");
    }
    Ok(params)
}
