//! Implicit solver for `u_t = ΔF(u)` and a library of exact reference solutions.
//!
//! Each step solves `U - dt Δ_h F(U) = u` by damped Newton iteration on the
//! tridiagonal (cyclic on the circle) Jacobian `I - dt Δ_h diag(F'(U))`.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Field, GeometryKind, ModelGeometry};
use crate::nonlinearity::{Nonlinearity, ValueRange};

/// Closed-form positive solutions used as oracles.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ExactSolution {
    Constant {
        c: f64,
    },
    /// `A + B e^{-μ² t} cos(μ r)` for the heat equation, `A > |B|`.
    HeatMode {
        a: f64,
        b: f64,
        mu: f64,
    },
    /// `t^{-nβ} (C + κ r² t^{-2β})^{-1/(1-p)}` for `u_t = Δu^p`, `p < 1`.
    FdeBarenblatt {
        p: f64,
        n: usize,
        c: f64,
    },
    /// Pressure `v = a r²/(T - t)` with `a = 1/(2n(p-1) + 4)`, `u = ((p-1)v/p)^{1/(p-1)}`.
    PmeQuadraticPressure {
        p: f64,
        t_blow: f64,
        n: usize,
    },
    /// `(c + slope · x)^{1/p}` on the line: `Δu^p = 0`, positive for `c + slope · x > 0`.
    StationaryLinear {
        p: f64,
        c: f64,
        slope: f64,
    },
}

impl ExactSolution {
    pub fn validate(&self) -> Result<()> {
        match *self {
            ExactSolution::Constant { c } if !(c > 0.0 && c.is_finite()) => {
                Err(Error::Parameter(format!("constant solution needs c > 0, got {c}")))
            }
            ExactSolution::HeatMode { a, b, mu } if !(a > b.abs() && mu.is_finite()) => Err(Error::Parameter(format!(
                "heat mode needs A > |B|, got A = {a}, B = {b}, μ = {mu}"
            ))),
            ExactSolution::FdeBarenblatt { p, n, c } => {
                if !(p > 0.0 && p < 1.0) {
                    return Err(Error::Parameter(format!("Barenblatt profile needs 0 < p < 1, got {p}")));
                }
                if !(n as f64 * (p - 1.0) + 2.0 > 0.0) {
                    return Err(Error::Parameter(format!(
                        "Barenblatt profile needs n(p-1) + 2 > 0, got n = {n}, p = {p}"
                    )));
                }
                if !(c > 0.0) {
                    return Err(Error::Parameter(format!("Barenblatt profile needs C > 0, got {c}")));
                }
                Ok(())
            }
            ExactSolution::PmeQuadraticPressure { p, t_blow, n } => {
                if !(p > 1.0) || n < 1 || !t_blow.is_finite() {
                    return Err(Error::Parameter(format!(
                        "quadratic pressure solution needs p > 1 and n >= 1, got p = {p}, n = {n}"
                    )));
                }
                Ok(())
            }
            ExactSolution::StationaryLinear { p, c, slope } if !(p > 0.0 && c.is_finite() && slope.is_finite()) => {
                Err(Error::Parameter(format!("stationary solution needs p > 0, got {p}")))
            }
            _ => Ok(()),
        }
    }

    pub fn eval(&self, r: f64, t: f64) -> f64 {
        match *self {
            ExactSolution::Constant { c } => c,
            ExactSolution::HeatMode { a, b, mu } => a + b * (-mu * mu * t).exp() * (mu * r).cos(),
            ExactSolution::FdeBarenblatt { p, n, c } => {
                let beta = 1.0 / (n as f64 * (p - 1.0) + 2.0);
                let kappa = (1.0 - p) * beta / (2.0 * p);
                t.powf(-(n as f64) * beta) * (c + kappa * r * r * t.powf(-2.0 * beta)).powf(-1.0 / (1.0 - p))
            }
            ExactSolution::PmeQuadraticPressure { p, t_blow, n } => {
                let a = 1.0 / (2.0 * n as f64 * (p - 1.0) + 4.0);
                let v = a * r * r / (t_blow - t);
                ((p - 1.0) * v / p).powf(1.0 / (p - 1.0))
            }
            ExactSolution::StationaryLinear { p, c, slope } => (c + slope * r).powf(1.0 / p),
        }
    }

    /// The nonlinearity this solution solves.
    pub fn nonlinearity(&self) -> Nonlinearity {
        match *self {
            ExactSolution::Constant { .. } | ExactSolution::HeatMode { .. } => Nonlinearity::Heat,
            ExactSolution::FdeBarenblatt { p, .. }
            | ExactSolution::PmeQuadraticPressure { p, .. }
            | ExactSolution::StationaryLinear { p, .. } => Nonlinearity::Power { p },
        }
    }

    pub fn sample(&self, geom: &Arc<ModelGeometry>, t: f64) -> Field {
        Field::from_fn(geom.clone(), t, |r| self.eval(r, t))
    }

    /// The solution sampled on the grid at the given times.
    pub fn trajectory(&self, geom: &Arc<ModelGeometry>, times: &[f64]) -> Result<Trajectory> {
        self.validate()?;
        let fields = times.iter().map(|&t| self.sample(geom, t)).collect();
        Trajectory::new(geom.clone(), fields)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryCondition {
    Periodic,
    /// End values follow the trace of an exact solution.
    DirichletExact(ExactSolution),
    NeumannZero,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub dt: f64,
    pub newton_tol: f64,
    pub newton_max_iter: usize,
    pub bc: BoundaryCondition,
    pub positivity_floor: f64,
    /// Store every `snapshot_stride`-th step; the final state is always stored.
    pub snapshot_stride: usize,
}

impl SolverConfig {
    pub fn new(dt: f64, bc: BoundaryCondition) -> Self {
        SolverConfig {
            dt,
            newton_tol: 1e-10,
            newton_max_iter: 50,
            bc,
            positivity_floor: 1e-12,
            snapshot_stride: 1,
        }
    }

    pub fn with_stride(mut self, stride: usize) -> Self {
        self.snapshot_stride = stride;
        self
    }

    pub fn validate(&self, geom: &ModelGeometry) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::Parameter(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.newton_tol > 0.0) || self.newton_max_iter == 0 || !(self.positivity_floor > 0.0) {
            return Err(Error::Parameter(
                "Newton tolerance, iteration cap and floor must be positive".into(),
            ));
        }
        if self.snapshot_stride == 0 {
            return Err(Error::Parameter("snapshot stride must be at least 1".into()));
        }
        let periodic = geom.kind() == GeometryKind::Circle;
        match self.bc {
            BoundaryCondition::Periodic if !periodic => Err(Error::Parameter(
                "periodic boundary condition needs the circle geometry".into(),
            )),
            BoundaryCondition::DirichletExact(_) | BoundaryCondition::NeumannZero if periodic => Err(Error::Parameter(
                "the circle geometry takes the periodic boundary condition".into(),
            )),
            BoundaryCondition::DirichletExact(e) => e.validate(),
            _ => Ok(()),
        }
    }
}

/// Time-stamped positive fields on one grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub geometry: Arc<ModelGeometry>,
    pub fields: Vec<Field>,
}

impl Trajectory {
    pub fn new(geometry: Arc<ModelGeometry>, fields: Vec<Field>) -> Result<Self> {
        if fields.is_empty() {
            return Err(Error::Window("trajectory has no snapshots".into()));
        }
        for (k, f) in fields.iter().enumerate() {
            let same = Arc::ptr_eq(&f.geometry, &geometry) || *f.geometry == *geometry;
            if f.values.len() != geometry.points() || !same {
                return Err(Error::Shape(format!("snapshot {k} is not on the trajectory grid")));
            }
            let min = f.min();
            if !(min > 0.0) {
                return Err(Error::Positivity { min, floor: 0.0 });
            }
            if k > 0 && !(f.time > fields[k - 1].time) {
                return Err(Error::Window(format!("snapshot times not increasing at index {k}")));
            }
        }
        Ok(Trajectory { geometry, fields })
    }

    pub fn times(&self) -> Vec<f64> {
        self.fields.iter().map(|f| f.time).collect()
    }

    pub fn len(&self) -> usize {
        self.fields.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fields.is_empty()
    }

    pub fn last(&self) -> &Field {
        self.fields.last().expect("trajectory is never empty")
    }

    pub fn value_range(&self) -> Result<ValueRange> {
        ValueRange::of(self.fields.iter().flat_map(|f| f.values.iter().copied()))
    }

    pub fn min(&self) -> f64 {
        self.fields.iter().map(Field::min).fold(f64::INFINITY, f64::min)
    }
}

// Thomas algorithm; `lower[0]` and `upper[n-1]` are ignored.
fn solve_tridiagonal(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &[f64]) -> Vec<f64> {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    c[0] = upper[0] / diag[0];
    d[0] = rhs[0] / diag[0];
    for i in 1..n {
        let m = diag[i] - lower[i] * c[i - 1];
        c[i] = if i + 1 < n { upper[i] / m } else { 0.0 };
        d[i] = (rhs[i] - lower[i] * d[i - 1]) / m;
    }
    let mut x = d;
    for i in (0..n - 1).rev() {
        x[i] -= c[i] * x[i + 1];
    }
    x
}

// Cyclic tridiagonal solve by Sherman–Morrison; `lower[0]` couples row 0 to
// column n-1 and `upper[n-1]` couples row n-1 to column 0.
fn solve_cyclic(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &[f64]) -> Vec<f64> {
    let n = diag.len();
    let beta = lower[0];
    let alpha = upper[n - 1];
    let gamma = -diag[0];
    let mut bb = diag.to_vec();
    bb[0] = diag[0] - gamma;
    bb[n - 1] = diag[n - 1] - alpha * beta / gamma;
    let x = solve_tridiagonal(lower, &bb, upper, rhs);
    let mut u = vec![0.0; n];
    u[0] = gamma;
    u[n - 1] = alpha;
    let z = solve_tridiagonal(lower, &bb, upper, &u);
    let fact = (x[0] + beta * x[n - 1] / gamma) / (1.0 + z[0] + beta * z[n - 1] / gamma);
    x.iter().zip(&z).map(|(xi, zi)| xi - fact * zi).collect()
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

struct StepProblem<'a> {
    geom: &'a ModelGeometry,
    nl: &'a Nonlinearity,
    old: &'a [f64],
    dt: f64,
    // Dirichlet values at (first, last) node
    pinned: Option<(f64, f64)>,
}

impl StepProblem<'_> {
    fn residual(&self, u: &[f64]) -> Vec<f64> {
        let fu: Vec<f64> = u.iter().map(|&s| self.nl.f(s)).collect();
        let lap = self.geom.laplacian_values(&fu);
        let mut r: Vec<f64> = (0..u.len()).map(|i| u[i] - self.dt * lap[i] - self.old[i]).collect();
        if let Some((a, b)) = self.pinned {
            let last = u.len() - 1;
            r[0] = u[0] - a;
            r[last] = u[last] - b;
        }
        r
    }

    fn newton_direction(&self, u: &[f64], res: &[f64]) -> Vec<f64> {
        let n = u.len();
        let fp: Vec<f64> = u.iter().map(|&s| self.nl.fp(s)).collect();
        let mut lower = vec![0.0; n];
        let mut diag = vec![0.0; n];
        let mut upper = vec![0.0; n];
        for i in 0..n {
            let (cm, cp) = self.geom.stencil(i);
            let (l, r) = self.geom.neighbours(i);
            diag[i] = 1.0 + self.dt * fp[i] * (l.map_or(0.0, |_| cm) + r.map_or(0.0, |_| cp));
            if let Some(j) = l {
                lower[i] = -self.dt * cm * fp[j];
            }
            if let Some(j) = r {
                upper[i] = -self.dt * cp * fp[j];
            }
        }
        if self.pinned.is_some() {
            for i in [0, n - 1] {
                lower[i] = 0.0;
                upper[i] = 0.0;
                diag[i] = 1.0;
            }
        }
        let rhs: Vec<f64> = res.iter().map(|r| -r).collect();
        if self.geom.kind().is_periodic() {
            solve_cyclic(&lower, &diag, &upper, &rhs)
        } else {
            solve_tridiagonal(&lower, &diag, &upper, &rhs)
        }
    }
}

/// One backward Euler step of size `dt` from `u`.
///
/// The Newton residual is measured in the sup norm relative to `max |u|`.
pub fn step(u: &Field, nl: &Nonlinearity, cfg: &SolverConfig, dt: f64) -> Result<Field> {
    let geom = &*u.geometry;
    if u.values.len() != geom.points() {
        return Err(Error::Shape(format!(
            "{} values on a grid of {} points",
            u.values.len(),
            geom.points()
        )));
    }
    let floor = cfg.positivity_floor;
    let min = u.min();
    if !(min >= floor) {
        return Err(Error::Positivity { min, floor });
    }
    let t_new = u.time + dt;
    let pinned = match cfg.bc {
        BoundaryCondition::DirichletExact(e) => {
            let (lo, hi) = geom.domain();
            Some((e.eval(lo, t_new), e.eval(hi, t_new)))
        }
        _ => None,
    };
    let problem = StepProblem {
        geom,
        nl,
        old: &u.values,
        dt,
        pinned,
    };
    let tol = cfg.newton_tol * inf_norm(&u.values);
    let mut x = u.values.clone();
    if let Some((a, b)) = pinned {
        let last = x.len() - 1;
        x[0] = a;
        x[last] = b;
        if !(a >= floor && b >= floor) {
            return Err(Error::Positivity { min: a.min(b), floor });
        }
    }
    let mut res = problem.residual(&x);
    let mut norm = inf_norm(&res);
    for _ in 0..cfg.newton_max_iter {
        if norm <= tol {
            return Field::new(u.geometry.clone(), x, t_new);
        }
        let dir = problem.newton_direction(&x, &res);
        let mut lambda = 1.0;
        let mut accepted = false;
        let mut positivity_blocked = false;
        for _ in 0..40 {
            let cand: Vec<f64> = x.iter().zip(&dir).map(|(a, d)| a + lambda * d).collect();
            let cmin = cand.iter().copied().fold(f64::INFINITY, f64::min);
            if cmin >= floor {
                let cres = problem.residual(&cand);
                let cnorm = inf_norm(&cres);
                if cnorm < norm {
                    x = cand;
                    res = cres;
                    norm = cnorm;
                    accepted = true;
                    break;
                }
            } else {
                positivity_blocked = true;
            }
            lambda *= 0.5;
        }
        if !accepted {
            if positivity_blocked {
                let min = x.iter().copied().fold(f64::INFINITY, f64::min);
                return Err(Error::Positivity { min, floor });
            }
            break;
        }
    }
    if norm <= tol {
        return Field::new(u.geometry.clone(), x, t_new);
    }
    Err(Error::StepFailure {
        iterations: cfg.newton_max_iter,
        residual: norm,
    })
}

const MAX_HALVINGS: u32 = 10;

fn step_with_retry(u: &Field, nl: &Nonlinearity, cfg: &SolverConfig, dt: f64) -> Result<Field> {
    let mut err = match step(u, nl, cfg, dt) {
        Ok(f) => return Ok(f),
        Err(e @ (Error::StepFailure { .. } | Error::Positivity { .. })) => e,
        Err(e) => return Err(e),
    };
    'halving: for k in 1..=MAX_HALVINGS {
        let parts = 1usize << k;
        let sub = dt / parts as f64;
        let mut cur = u.clone();
        for j in 0..parts {
            match step(&cur, nl, cfg, sub) {
                Ok(mut f) => {
                    f.time = u.time + (j + 1) as f64 * sub;
                    cur = f;
                }
                Err(e @ (Error::StepFailure { .. } | Error::Positivity { .. })) => {
                    err = e;
                    continue 'halving;
                }
                Err(e) => return Err(e),
            }
        }
        cur.time = u.time + dt;
        return Ok(cur);
    }
    Err(err)
}

/// Integrate from `u0` over `horizon` with a uniform step `horizon / ceil(horizon / dt)`.
///
/// A failed step is retried with `2^k` substeps for `k = 1..=10`.
pub fn solve(u0: &Field, nl: &Nonlinearity, horizon: f64, cfg: &SolverConfig) -> Result<Trajectory> {
    cfg.validate(&u0.geometry)?;
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(Error::Parameter(format!("horizon must be positive, got {horizon}")));
    }
    let steps = (horizon / cfg.dt).ceil().max(1.0) as usize;
    let dt = horizon / steps as f64;
    let t0 = u0.time;
    let mut fields = vec![u0.clone()];
    let mut cur = u0.clone();
    for k in 1..=steps {
        cur = step_with_retry(&cur, nl, cfg, dt)?;
        cur.time = t0 + k as f64 * dt;
        if k % cfg.snapshot_stride == 0 || k == steps {
            fields.push(cur.clone());
        }
    }
    Trajectory::new(u0.geometry.clone(), fields)
}

/// Centred-time defect `max_i |(u_{k+1} - u_{k-1})/(t_{k+1} - t_{k-1}) - Δ_h F(u_k)|`
/// over interior nodes, one entry per inner snapshot.
pub fn residual(traj: &Trajectory, nl: &Nonlinearity) -> Result<Vec<f64>> {
    if traj.len() < 3 {
        return Err(Error::Window(format!("residual needs 3 snapshots, got {}", traj.len())));
    }
    let geom = &traj.geometry;
    Ok(traj
        .fields
        .windows(3)
        .map(|w| {
            let dt = w[2].time - w[0].time;
            let fu: Vec<f64> = w[1].values.iter().map(|&s| nl.f(s)).collect();
            let lap = geom.laplacian_values(&fu);
            geom.interior_nodes()
                .map(|i| ((w[2].values[i] - w[0].values[i]) / dt - lap[i]).abs())
                .fold(0.0, f64::max)
        })
        .collect())
}

/// Least-squares slope of `ln e` against `ln h`. `None` when any error is not
/// positive and finite or fewer than two points are given.
pub fn fit_order(steps: &[f64], errors: &[f64]) -> Option<f64> {
    if steps.len() != errors.len() || steps.len() < 2 {
        return None;
    }
    if errors.iter().chain(steps).any(|&e| !(e > 0.0 && e.is_finite())) {
        return None;
    }
    let xs: Vec<f64> = steps.iter().map(|h| h.ln()).collect();
    let ys: Vec<f64> = errors.iter().map(|e| e.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    Some(sxy / sxx)
}

/// Errors and fitted order of one refinement sequence.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OrderEstimate {
    pub steps: Vec<f64>,
    pub errors: Vec<f64>,
    /// Fitted order, absent when the scheme reproduces the solution exactly.
    pub order: Option<f64>,
    pub exact: bool,
}

impl OrderEstimate {
    fn from_errors(steps: Vec<f64>, errors: Vec<f64>) -> Self {
        let exact = errors.iter().all(|&e| e == 0.0);
        let order = if exact { None } else { fit_order(&steps, &errors) };
        OrderEstimate {
            steps,
            errors,
            order,
            exact,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceReport {
    pub spatial: OrderEstimate,
    pub temporal: OrderEstimate,
}

/// Problem description for a refinement study against an exact solution.
#[derive(Debug, Clone, PartialEq)]
pub struct StudySetup {
    pub kind: GeometryKind,
    pub n: usize,
    pub domain: (f64, f64),
    pub exact: ExactSolution,
    pub t_start: f64,
    pub horizon: f64,
    /// Spatial study uses `dt = dt_factor · h²`.
    pub dt_factor: f64,
}

impl StudySetup {
    fn boundary(&self) -> BoundaryCondition {
        if self.kind.is_periodic() {
            BoundaryCondition::Periodic
        } else {
            BoundaryCondition::DirichletExact(self.exact)
        }
    }

    /// Relative sup-norm error at the final time for one grid and step.
    pub fn final_error(&self, points: usize, dt: f64) -> Result<f64> {
        let geom = Arc::new(ModelGeometry::new(
            self.kind,
            self.n,
            self.domain.0,
            self.domain.1,
            points,
        )?);
        let nl = self.exact.nonlinearity();
        let cfg = SolverConfig::new(dt, self.boundary()).with_stride(usize::MAX);
        let traj = solve(&self.exact.sample(&geom, self.t_start), &nl, self.horizon, &cfg)?;
        let last = traj.last();
        let exact = self.exact.sample(&geom, last.time);
        let scale = inf_norm(&exact.values);
        let err = last
            .values
            .iter()
            .zip(&exact.values)
            .fold(0.0, |m: f64, (a, b)| m.max((a - b).abs()));
        Ok(err / scale)
    }
}

/// Observed spatial order (with `dt ∝ h²`) and temporal order (on the finest grid,
/// `dt = horizon/4, horizon/8, ...`) against the exact solution.
pub fn convergence_study(setup: &StudySetup, resolutions: &[usize]) -> Result<ConvergenceReport> {
    if resolutions.len() < 3 {
        return Err(Error::Parameter(format!(
            "convergence study needs at least 3 resolutions, got {}",
            resolutions.len()
        )));
    }
    setup.exact.validate()?;
    let mut hs = Vec::new();
    let mut errs = Vec::new();
    for &points in resolutions {
        let h = ModelGeometry::new(setup.kind, setup.n, setup.domain.0, setup.domain.1, points)?.spacing();
        hs.push(h);
        errs.push(setup.final_error(points, setup.dt_factor * h * h)?);
    }
    let finest = *resolutions.iter().max().unwrap();
    let mut dts = Vec::new();
    let mut terrs = Vec::new();
    for k in 0..resolutions.len() {
        let dt = setup.horizon / (4usize << k) as f64;
        dts.push(dt);
        terrs.push(setup.final_error(finest, dt)?);
    }
    Ok(ConvergenceReport {
        spatial: OrderEstimate::from_errors(hs, errs),
        temporal: OrderEstimate::from_errors(dts, terrs),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn circle(points: usize) -> Arc<ModelGeometry> {
        Arc::new(ModelGeometry::circle(2.0 * PI, points).unwrap())
    }

    #[test]
    fn tridiagonal_solvers_match_dense_products() {
        let n = 7;
        let lower: Vec<f64> = (0..n).map(|i| -0.3 - 0.01 * i as f64).collect();
        let upper: Vec<f64> = (0..n).map(|i| -0.2 + 0.02 * i as f64).collect();
        let diag: Vec<f64> = (0..n).map(|i| 2.0 + 0.1 * i as f64).collect();
        let x_true: Vec<f64> = (0..n).map(|i| (i as f64).sin() + 1.0).collect();
        let apply = |cyclic: bool| -> Vec<f64> {
            (0..n)
                .map(|i| {
                    let mut s = diag[i] * x_true[i];
                    if i > 0 {
                        s += lower[i] * x_true[i - 1];
                    } else if cyclic {
                        s += lower[0] * x_true[n - 1];
                    }
                    if i + 1 < n {
                        s += upper[i] * x_true[i + 1];
                    } else if cyclic {
                        s += upper[n - 1] * x_true[0];
                    }
                    s
                })
                .collect()
        };
        let x = solve_tridiagonal(&lower, &diag, &upper, &apply(false));
        let y = solve_cyclic(&lower, &diag, &upper, &apply(true));
        for i in 0..n {
            assert_relative_eq!(x[i], x_true[i], epsilon = 1e-13);
            assert_relative_eq!(y[i], x_true[i], epsilon = 1e-13);
        }
    }

    #[test]
    fn constant_is_a_fixed_point() {
        let g = circle(32);
        let u = Field::constant(g, 2.5, 0.0);
        for nl in [
            Nonlinearity::Heat,
            Nonlinearity::Power { p: 0.5 },
            Nonlinearity::Power { p: 2.0 },
        ] {
            let cfg = SolverConfig::new(0.1, BoundaryCondition::Periodic);
            let next = step(&u, &nl, &cfg, 0.1).unwrap();
            assert!(next.values.iter().all(|&v| v == 2.5));
            let traj = solve(&u, &nl, 1.0, &cfg).unwrap();
            assert!(traj.fields.iter().all(|f| f.values.iter().all(|&v| v == 2.5)));
        }
    }

    #[test]
    fn one_heat_step_tracks_the_mode() {
        let exact = ExactSolution::HeatMode {
            a: 2.0,
            b: 1.0,
            mu: 1.0,
        };
        let g = circle(128);
        let h = g.spacing();
        let dt = 1e-3;
        let cfg = SolverConfig::new(dt, BoundaryCondition::Periodic);
        let next = step(&exact.sample(&g, 0.0), &Nonlinearity::Heat, &cfg, dt).unwrap();
        let want = exact.sample(&g, dt);
        let err = next
            .values
            .iter()
            .zip(&want.values)
            .fold(0.0, |m: f64, (a, b)| m.max((a - b).abs()));
        assert!(err < dt * dt + dt * h * h, "err {err}");
    }

    #[test]
    fn exact_solutions_validate() {
        assert!(ExactSolution::HeatMode {
            a: 1.0,
            b: 1.0,
            mu: 1.0
        }
        .validate()
        .is_err());
        assert!(ExactSolution::FdeBarenblatt { p: 0.2, n: 3, c: 1.0 }
            .validate()
            .is_err());
        assert!(ExactSolution::FdeBarenblatt { p: 0.5, n: 3, c: 1.0 }.validate().is_ok());
        assert!(ExactSolution::PmeQuadraticPressure {
            p: 0.5,
            t_blow: 1.0,
            n: 1
        }
        .validate()
        .is_err());
        assert!(ExactSolution::Constant { c: 0.0 }.validate().is_err());
    }

    #[test]
    fn barenblatt_closed_form_for_n3_half() {
        // β = 2, κ = 1: u = t^{-6} (C + r² t^{-4})^{-2}
        let e = ExactSolution::FdeBarenblatt { p: 0.5, n: 3, c: 1.0 };
        let (r, t) = (0.7_f64, 1.3_f64);
        assert_relative_eq!(
            e.eval(r, t),
            t.powi(-6) * (1.0 + r * r * t.powi(-4)).powi(-2),
            max_relative = 1e-14
        );
    }

    #[test]
    fn stationary_linear_has_zero_residual_in_f() {
        let e = ExactSolution::StationaryLinear {
            p: 0.5,
            c: 1.0,
            slope: 2.0,
        };
        let g = Arc::new(ModelGeometry::line(0.0, 3.0, 31).unwrap());
        let traj = e.trajectory(&g, &[0.0, 0.5, 1.0]).unwrap();
        // F(u) = c + slope x is linear, so the discrete defect is rounding only
        assert!(residual(&traj, &e.nonlinearity()).unwrap()[0] < 1e-9);
    }

    #[test]
    fn config_rejects_mismatched_boundary() {
        let g = ModelGeometry::line(0.0, 1.0, 10).unwrap();
        assert!(SolverConfig::new(0.1, BoundaryCondition::Periodic)
            .validate(&g)
            .is_err());
        assert!(SolverConfig::new(0.0, BoundaryCondition::NeumannZero)
            .validate(&g)
            .is_err());
        let c = ModelGeometry::circle(1.0, 10).unwrap();
        assert!(SolverConfig::new(0.1, BoundaryCondition::NeumannZero)
            .validate(&c)
            .is_err());
    }

    #[test]
    fn residual_needs_three_snapshots() {
        let g = circle(16);
        let e = ExactSolution::Constant { c: 1.0 };
        let traj = e.trajectory(&g, &[0.0, 1.0]).unwrap();
        assert!(matches!(residual(&traj, &Nonlinearity::Heat), Err(Error::Window(_))));
        let traj = e.trajectory(&g, &[0.0, 1.0, 2.0, 3.0]).unwrap();
        assert_eq!(residual(&traj, &Nonlinearity::Heat).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn neumann_line_keeps_weighted_mass() {
        let g = Arc::new(ModelGeometry::line(0.0, 1.0, 41).unwrap());
        let u0 = Field::from_fn(g.clone(), 0.0, |x| 1.0 + 0.5 * (3.0 * x).sin());
        let cfg = SolverConfig::new(1e-3, BoundaryCondition::NeumannZero);
        let traj = solve(&u0, &Nonlinearity::Power { p: 2.0 }, 0.1, &cfg).unwrap();
        // trapezoid weights: the zero-flux half cells carry weight 1/2
        let mass = |f: &Field| {
            let v = &f.values;
            v.iter().sum::<f64>() - 0.5 * (v[0] + v[v.len() - 1])
        };
        let m0 = mass(&traj.fields[0]);
        assert_relative_eq!(mass(traj.last()), m0, max_relative = 1e-8);
    }

    #[test]
    fn trajectory_rejects_bad_input() {
        let g = circle(8);
        let a = Field::constant(g.clone(), 1.0, 1.0);
        let b = Field::constant(g.clone(), 1.0, 0.5);
        assert!(Trajectory::new(g.clone(), vec![a.clone(), b]).is_err());
        let neg = Field::constant(g.clone(), -1.0, 2.0);
        assert!(matches!(
            Trajectory::new(g, vec![a, neg]),
            Err(Error::Positivity { .. })
        ));
    }

    #[test]
    fn fit_order_of_exact_power_law() {
        let hs = [0.1, 0.05, 0.025];
        let es: Vec<f64> = hs.iter().map(|h| 3.0 * h * h).collect();
        assert_relative_eq!(fit_order(&hs, &es).unwrap(), 2.0, epsilon = 1e-12);
        assert!(fit_order(&hs, &[0.0, 0.0, 0.0]).is_none());
    }

    #[test]
    fn constant_study_is_exact() {
        let setup = StudySetup {
            kind: GeometryKind::Circle,
            n: 1,
            domain: (0.0, 1.0),
            exact: ExactSolution::Constant { c: 3.0 },
            t_start: 0.0,
            horizon: 0.1,
            dt_factor: 1.0,
        };
        let rep = convergence_study(&setup, &[16, 32, 64]).unwrap();
        assert!(rep.spatial.exact && rep.temporal.exact);
        assert!(rep.spatial.order.is_none());
    }
}
