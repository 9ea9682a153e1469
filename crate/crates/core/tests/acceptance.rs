//! Acceptance checks. Each criterion prints one PASS/FAIL line; the process
//! exits non-zero if any criterion fails.

use std::f64::consts::PI;
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Instant;

use gradest_core::estimates::{
    bound_ratio_fde, bound_ratio_heat_sz, bound_ratio_pme_n1, fde_identity_defect, harnack_fields, inequality_residual,
    liouville_sweep, SweepWindow,
};
use gradest_core::matrix_lemma::{bruteforce_sup, supremum_bound, witness};
use gradest_core::nonlinearity::{condition_report, fde_admissible_range, fde_gamma, pme_pinch};
use gradest_core::solver::{convergence_study, residual, solve, StudySetup};
use gradest_core::{
    BoundaryCondition, ExactSolution, Field, GeometryKind, ModelGeometry, Nonlinearity, SolverConfig, SweepSchedule,
    Trajectory, ValueRange, Window,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn check(cond: bool, what: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(what.into())
    }
}

const BARENBLATT: ExactSolution = ExactSolution::FdeBarenblatt { p: 0.5, n: 3, c: 1.0 };
const HEAT_MODE: ExactSolution = ExactSolution::HeatMode {
    a: 2.0,
    b: 1.0,
    mu: 1.0,
};
const PME_PRESSURE: ExactSolution = ExactSolution::PmeQuadraticPressure {
    p: 2.0,
    t_blow: 1.0,
    n: 1,
};

fn geometry(kind: GeometryKind, n: usize, domain: (f64, f64), points: usize) -> Arc<ModelGeometry> {
    Arc::new(ModelGeometry::new(kind, n, domain.0, domain.1, points).unwrap())
}

fn boundary(kind: GeometryKind, e: ExactSolution) -> BoundaryCondition {
    if kind.is_periodic() {
        BoundaryCondition::Periodic
    } else {
        BoundaryCondition::DirichletExact(e)
    }
}

/// Solver run from exact data with `dt = dt_of(h)` and snapshots about every `every` time units.
fn run(e: ExactSolution, g: &Arc<ModelGeometry>, t0: f64, horizon: f64, dt: f64, every: f64) -> Trajectory {
    let stride = ((every / dt).round() as usize).max(1);
    let cfg = SolverConfig::new(dt, boundary(g.kind(), e)).with_stride(stride);
    solve(&e.sample(g, t0), &e.nonlinearity(), horizon, &cfg).unwrap()
}

fn criterion_1() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    let mut worst_excess = f64::NEG_INFINITY;
    let mut worst_witness = 0.0f64;
    for n in 2..=4 {
        for k in 0..20 {
            let a: f64 = rng.random_range(-2.0..2.0);
            let b: f64 = rng.random_range(-2.0..2.0);
            let bound = supremum_bound(a, b, n);
            let brute = bruteforce_sup(a, b, n, 100_000, 1000 * n as u64 + k).unwrap();
            worst_excess = worst_excess.max(brute - bound);
            check(
                brute <= bound + 1e-9,
                format!("n={n} a={a} b={b}: sampled {brute} > bound {bound}"),
            )?;
            let w = witness(a, b, n).unwrap();
            let rel = (w.value * w.value - bound).abs() / bound;
            worst_witness = worst_witness.max(rel);
            check(rel <= 1e-6, format!("n={n} a={a} b={b}: witness off by {rel}"))?;
        }
    }
    Ok(format!(
        "60 pairs, max(sampled - bound) = {worst_excess:.3e}, witness rel. error {worst_witness:.1e}"
    ))
}

fn criterion_2() -> Outcome {
    let range = fde_admissible_range(3).unwrap();
    check(range == (1.0 / 3.0, 1.0), format!("fde range {range:?}"))?;
    let gamma = fde_gamma(3, 0.5).unwrap();
    check(gamma == 0.5, format!("fde gamma {gamma}"))?;
    let (m, big_m) = (0.5, 7.0);
    let heat = condition_report(
        &Nonlinearity::Heat,
        ValueRange::new(m, big_m).unwrap(),
        1.0 + f64::ln(big_m),
        3,
    )
    .unwrap();
    check(
        heat.k_sup == 1.0 && heat.gamma == 2.0 && heat.passes(),
        format!("heat K = {}, gamma = {}", heat.k_sup, heat.gamma),
    )?;
    let holds = pme_pinch(2, 2.0, 0.1, ValueRange::new(1.0, 8.0).unwrap()).unwrap();
    let fails = pme_pinch(2, 2.0, 0.1, ValueRange::new(1.0, 9.0).unwrap()).unwrap();
    check(holds.holds, "pinch M=8 should hold")?;
    check(!fails.holds, "pinch M=9 should fail")?;
    check(
        (holds.threshold - 9.0 / 1.1).abs() <= 1e-15 * 9.0,
        format!("threshold {}", holds.threshold),
    )?;
    Ok(format!(
        "range (1/3, 1), gamma(3, 1/2) = 1/2, heat (K, gamma) = (1, 2), pinch threshold {:.4}: M=8 holds, M=9 fails",
        holds.threshold
    ))
}

fn criterion_3() -> Outcome {
    let cases = [
        (
            "barenblatt",
            BARENBLATT,
            GeometryKind::RadialEuclidean,
            3,
            (0.5, 4.0),
            (1.0, 2.0),
        ),
        (
            "heat_mode",
            HEAT_MODE,
            GeometryKind::Circle,
            1,
            (0.0, 2.0 * PI),
            (0.0, 1.0),
        ),
        (
            "pme_pressure",
            PME_PRESSURE,
            GeometryKind::Line,
            1,
            (0.5, 2.0),
            (0.0, 0.5),
        ),
    ];
    let mut summary = Vec::new();
    for (name, e, kind, n, domain, (t0, t1)) in cases {
        let mut defects = Vec::new();
        for level in 0..4 {
            let cells = 80usize << level;
            let points = if kind.is_periodic() { cells } else { cells + 1 };
            let g = geometry(kind, n, domain, points);
            let times: Vec<f64> = (0..=cells).map(|k| t0 + (t1 - t0) * k as f64 / cells as f64).collect();
            let traj = e.trajectory(&g, &times).unwrap();
            defects.push(
                residual(&traj, &e.nonlinearity())
                    .unwrap()
                    .into_iter()
                    .fold(0.0, f64::max),
            );
        }
        let ratios: Vec<f64> = defects.windows(2).map(|w| w[0] / w[1]).collect();
        for r in &ratios {
            check((r - 4.0).abs() <= 1.0, format!("{name}: defect ratios {ratios:?}"))?;
        }
        summary.push(format!("{name} {:.2}/{:.2}/{:.2}", ratios[0], ratios[1], ratios[2]));
    }
    Ok(format!("defect ratios {}", summary.join(", ")))
}

fn criterion_4() -> Outcome {
    let setup = StudySetup {
        kind: GeometryKind::Circle,
        n: 1,
        domain: (0.0, 2.0 * PI),
        exact: HEAT_MODE,
        t_start: 0.0,
        horizon: 1.0,
        dt_factor: 1.0,
    };
    let h = 2.0 * PI / 512.0;
    let err = setup.final_error(512, h * h).unwrap();
    check(err < 1e-3, format!("512-node error {err}"))?;
    let study = convergence_study(&setup, &[64, 128, 256]).unwrap();
    let spatial = study.spatial.order.unwrap_or(f64::NAN);
    let temporal = study.temporal.order.unwrap_or(f64::NAN);
    check((spatial - 2.0).abs() <= 0.3, format!("spatial order {spatial}"))?;
    check((temporal - 1.0).abs() <= 0.3, format!("temporal order {temporal}"))?;

    // mass on the circle, linear and nonlinear
    let g = geometry(GeometryKind::Circle, 1, (0.0, 2.0 * PI), 512);
    let mut worst_mass = 0.0f64;
    for nl in [
        Nonlinearity::Heat,
        Nonlinearity::Power { p: 0.5 },
        Nonlinearity::Power { p: 2.0 },
    ] {
        let u0 = HEAT_MODE.sample(&g, 0.0);
        let cfg = SolverConfig::new(h * h, BoundaryCondition::Periodic).with_stride(500);
        let traj = solve(&u0, &nl, 0.5, &cfg).unwrap();
        let m0 = traj.fields[0].mass();
        for f in &traj.fields {
            worst_mass = worst_mass.max((f.mass() - m0).abs() / m0);
        }
    }
    check(worst_mass <= 1e-8, format!("mass drift {worst_mass}"))?;

    // positivity and comparison on seeded ordered pairs
    let gc = geometry(GeometryKind::Circle, 1, (0.0, 1.0), 64);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst_order = f64::NEG_INFINITY;
    for pair in 0..10 {
        let nl = if pair % 2 == 0 {
            Nonlinearity::Power { p: 0.5 }
        } else {
            Nonlinearity::Power { p: 2.0 }
        };
        let u: Vec<f64> = (0..64).map(|_| rng.random_range(0.05..2.0)).collect();
        let v: Vec<f64> = u.iter().map(|x| x + rng.random_range(0.0..0.5)).collect();
        let cfg = SolverConfig::new(1e-3, BoundaryCondition::Periodic);
        let tu = solve(&Field::new(gc.clone(), u, 0.0).unwrap(), &nl, 0.05, &cfg).unwrap();
        let tv = solve(&Field::new(gc.clone(), v, 0.0).unwrap(), &nl, 0.05, &cfg).unwrap();
        for (a, b) in tu.fields.iter().zip(&tv.fields) {
            check(a.min() >= cfg.positivity_floor, format!("pair {pair}: positivity lost"))?;
            let scale = b.max();
            for (x, y) in a.values.iter().zip(&b.values) {
                worst_order = worst_order.max((x - y) / scale);
            }
        }
    }
    // ordering up to the Newton tolerance
    check(worst_order <= 1e-10, format!("comparison violated by {worst_order}"))?;
    Ok(format!(
        "error {err:.2e} at 512 nodes, orders space {spatial:.3} / time {temporal:.3}, mass drift {worst_mass:.1e}, \
         max (u - v)/|v| = {worst_order:.1e}"
    ))
}

fn criterion_5() -> Outcome {
    let mut lines = Vec::new();
    for (name, e, kind, n, domain, base, t0) in [
        (
            "heat_mode",
            HEAT_MODE,
            GeometryKind::Circle,
            1usize,
            (0.0, 2.0 * PI),
            64usize,
            0.0,
        ),
        (
            "barenblatt",
            BARENBLATT,
            GeometryKind::RadialEuclidean,
            3,
            (0.1, 4.0),
            64,
            1.0,
        ),
    ] {
        let nl = e.nonlinearity();
        let mut normalized = Vec::new();
        for level in 0..3 {
            let cells = base << level;
            let points = if kind.is_periodic() { cells } else { cells + 1 };
            let g = geometry(kind, n, domain, points);
            let h = g.spacing();
            let traj = run(e, &g, t0, 0.5, h * h, 0.0);
            let alpha = match e {
                ExactSolution::HeatMode { .. } => 1.0 + traj.value_range().unwrap().max.ln(),
                _ => 0.0,
            };
            let rep = inequality_residual(&traj, &nl, alpha, g.ricci_lower_bound(), n).unwrap();
            check(
                rep.passes,
                format!(
                    "{name} level {level}: min {} below -eps = {}",
                    rep.min_residual, -rep.epsilon
                ),
            )?;
            normalized.push(rep.normalized_min);
        }
        // the negative part, which is discretization error, shrinks under refinement
        let deficits: Vec<f64> = normalized.iter().map(|x| x.min(0.0)).collect();
        check(
            deficits.windows(2).all(|w| w[1] >= w[0]),
            format!("{name}: normalized minima {normalized:?}"),
        )?;
        lines.push(format!(
            "{name} normalized min {:.2e}/{:.2e}/{:.2e}",
            normalized[0], normalized[1], normalized[2]
        ));
    }
    Ok(lines.join(", "))
}

fn ratio_table(traj: &Trajectory, windows: &[Window], f: impl Fn(&Trajectory, &Window) -> f64) -> Vec<f64> {
    windows.iter().map(|w| f(traj, w)).collect()
}

fn stability(name: &str, coarse: &[f64], fine: &[f64]) -> Result<String, String> {
    let max = fine.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = fine.iter().copied().fold(f64::INFINITY, f64::min);
    check(min > 0.0 && max / min < 10.0, format!("{name}: spread {max}/{min}"))?;
    check(max < 50.0, format!("{name}: max ratio {max}"))?;
    let change = coarse
        .iter()
        .zip(fine)
        .map(|(a, b)| (a - b).abs() / b)
        .fold(0.0, f64::max);
    check(change < 0.05, format!("{name}: refinement change {change}"))?;
    Ok(format!(
        "{name} spread {:.2}, max {max:.3}, refinement {:.1}%",
        max / min,
        100.0 * change
    ))
}

fn window_grid(x0: f64, t0: f64, radii: &[f64], durations: &[f64]) -> Vec<Window> {
    radii
        .iter()
        .flat_map(|&r| durations.iter().map(move |&t| Window::new(x0, t0, r, t)))
        .collect()
}

fn criterion_6() -> Outcome {
    let mut lines = Vec::new();

    let windows = window_grid(2.0, 2.0, &[0.5, 1.0, 2.0], &[0.25, 1.0]);
    let tables: Vec<Vec<f64>> = [257, 513]
        .iter()
        .map(|&points| {
            let g = geometry(GeometryKind::RadialEuclidean, 3, (0.1, 4.0), points);
            let traj = run(BARENBLATT, &g, 1.0, 1.0, 0.1 * g.spacing(), 0.01);
            ratio_table(&traj, &windows, |t, w| bound_ratio_fde(t, 0.5, 3, w).unwrap().ratio)
        })
        .collect();
    lines.push(stability("fde", &tables[0], &tables[1])?);

    let windows = window_grid(1.25, 0.5, &[0.25, 0.5, 0.75], &[0.125, 0.5]);
    let tables: Vec<Vec<f64>> = [257, 513]
        .iter()
        .map(|&points| {
            let g = geometry(GeometryKind::Line, 1, (0.5, 2.0), points);
            let traj = run(PME_PRESSURE, &g, 0.0, 0.5, 0.1 * g.spacing(), 0.01);
            ratio_table(&traj, &windows, |t, w| {
                bound_ratio_pme_n1(t, 2.0, 0.5, w).unwrap().ratio
            })
        })
        .collect();
    lines.push(stability("pme_line", &tables[0], &tables[1])?);

    let windows = window_grid(1.0, 1.0, &[0.5, 1.0, 2.0], &[0.25, 1.0]);
    let tables: Vec<Vec<f64>> = [256, 512]
        .iter()
        .map(|&points| {
            let g = geometry(GeometryKind::Circle, 1, (0.0, 2.0 * PI), points);
            let traj = run(HEAT_MODE, &g, 0.0, 1.0, 0.1 * g.spacing(), 0.01);
            ratio_table(&traj, &windows, |t, w| bound_ratio_heat_sz(t, w).unwrap().ratio)
        })
        .collect();
    lines.push(stability("heat", &tables[0], &tables[1])?);
    Ok(lines.join("; "))
}

fn sampled(
    e: ExactSolution,
    kind: GeometryKind,
    n: usize,
    lo: f64,
) -> impl FnMut(&SweepWindow) -> gradest_core::Result<Trajectory> {
    move |w: &SweepWindow| {
        let g = geometry(kind, n, (lo, w.x0 + w.radius), 4001);
        let times: Vec<f64> = (0..=64)
            .map(|k| w.t0 - w.duration + w.duration * k as f64 / 64.0)
            .collect();
        e.trajectory(&g, &times)
    }
}

fn criterion_7() -> Outcome {
    let radii = [1.5, 2.0, 3.0, 4.0];
    let fde = SweepSchedule::Fde { p: 0.5, gauge: 1.0 };
    let constant = ExactSolution::Constant { c: 2.0 };
    for schedule in [fde, SweepSchedule::PmeLine { p: 2.0 }] {
        let table = liouville_sweep(
            schedule,
            1.0,
            40.0,
            &radii,
            sampled(constant, GeometryKind::Line, 1, -1.0),
        )
        .unwrap();
        check(
            table
                .rows
                .iter()
                .all(|r| r.lhs_at_center == 0.0 && r.rhs.is_finite() && r.rhs > 0.0),
            format!("constant sweep {schedule:?}: nonzero gradient"),
        )?;
    }
    let barenblatt = liouville_sweep(
        fde,
        1.0,
        40.0,
        &radii,
        sampled(BARENBLATT, GeometryKind::RadialEuclidean, 3, 0.1),
    )
    .unwrap();
    let rhs: Vec<f64> = barenblatt.rows.iter().map(|r| r.rhs).collect();
    check(barenblatt.decreasing, format!("Barenblatt rhs not decreasing: {rhs:?}"))?;

    // u = (1 + x)^{1/p} solves Δu^p = 0 and grows linearly in u^p
    let linear = |w: &SweepWindow| {
        let g = geometry(GeometryKind::Line, 1, (-0.95, w.x0 + w.radius), 4001);
        let u0 = Field::from_fn(g.clone(), 0.0, |x| (1.0 + x).powi(2));
        let fields = (0..=8)
            .map(|k| Field {
                time: w.t0 - w.duration + w.duration * k as f64 / 8.0,
                ..u0.clone()
            })
            .collect();
        Trajectory::new(g, fields)
    };
    let control = liouville_sweep(fde, 1.0, 40.0, &radii, linear).unwrap();
    let ctrl: Vec<f64> = control.rows.iter().map(|r| r.rhs).collect();
    check(!control.decreasing, format!("negative control decreased: {ctrl:?}"))?;
    Ok(format!(
        "constant gradients 0; Barenblatt rhs {:.3}/{:.3}/{:.3}/{:.3}; linear control rhs {:.2}/{:.2}/{:.2}/{:.2}",
        rhs[0], rhs[1], rhs[2], rhs[3], ctrl[0], ctrl[1], ctrl[2], ctrl[3]
    ))
}

fn criterion_8() -> Outcome {
    let mut worst = 0.0f64;
    let mut count = 0;
    let fde_trajectories = [
        run(
            BARENBLATT,
            &geometry(GeometryKind::RadialEuclidean, 3, (0.1, 4.0), 257),
            1.0,
            1.0,
            1e-3,
            0.01,
        ),
        BARENBLATT
            .trajectory(
                &geometry(GeometryKind::RadialEuclidean, 3, (0.5, 4.0), 321),
                &(0..=40).map(|k| 1.0 + 0.025 * k as f64).collect::<Vec<_>>(),
            )
            .unwrap(),
    ];
    for traj in &fde_trajectories {
        for f in &traj.fields {
            worst = worst.max(fde_identity_defect(f, 0.5));
            count += 1;
        }
    }
    check(worst <= 1e-12, format!("fde identity defect {worst}"))?;

    let g = geometry(GeometryKind::Circle, 1, (0.0, 2.0 * PI), 256);
    let heat = run(HEAT_MODE, &g, 0.0, 1.0, 1e-3, 0.05);
    let alpha = 1.0 + heat.value_range().unwrap().max.ln();
    for f in &heat.fields {
        let h = harnack_fields(f, &Nonlinearity::Heat, alpha, 1).unwrap();
        check(h.b.iter().all(|&b| b == 0.0), "heat b not identically 0")?;
        check(
            h.l.iter().zip(&h.g).all(|(&l, &g)| l == 2.0 * (alpha - g)),
            "heat L differs from 2(alpha - g)",
        )?;
    }
    Ok(format!(
        "fde identity max defect {worst:.1e} over {count} snapshots; heat b = 0 and L = 2(alpha - g) on {} snapshots",
        heat.len()
    ))
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() -> ExitCode {
    let criteria: [Criterion; 8] = [
        ("1 matrix lemma supremum", criterion_1),
        ("2 parameter ranges", criterion_2),
        ("3 oracle certification", criterion_3),
        ("4 solver accuracy and invariants", criterion_4),
        ("5 differential inequality", criterion_5),
        ("6 gradient estimate stability", criterion_6),
        ("7 Liouville mechanics", criterion_7),
        ("8 cross identities", criterion_8),
    ];
    let mut failed = 0;
    for (name, f) in criteria {
        let start = Instant::now();
        let outcome = f();
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS criterion {name} ({secs:.1}s): {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL criterion {name} ({secs:.1}s): {detail}");
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
