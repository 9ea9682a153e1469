//! Discrete audit of the Hamilton-type gradient estimates.
//!
//! Everything here is evaluated on [`Trajectory`] data: the Harnack quantity
//! `w = |∇g|²/(α-g)²` with `g = G(u)`, its coefficients, the residual of the
//! differential inequality satisfied by `w`, localized bound ratios `Ĉ = lhs/rhs`
//! on space-time cubes, and the double-cube sweep driving the Liouville argument.
//!
//! Spatial gradients of `G(u)` use the chain rule `G'(u) ∂_r u` on the discrete
//! derivative of `u`, so algebraic identities between the two hold to rounding.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Field;
use crate::nonlinearity::{condition_report, fde_gamma, pme_pinch, ConditionReport, Nonlinearity, ValueRange};
use crate::solver::Trajectory;

/// Coefficient fields of the Harnack quantity at one time.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HarnackFields {
    pub alpha: f64,
    pub n: usize,
    pub time: f64,
    /// `G(u)`.
    pub g: Vec<f64>,
    /// `F'(u)`.
    pub gprime: Vec<f64>,
    /// `F''(u) u`.
    pub gsecond: Vec<f64>,
    /// Signed `∂_r G(u)`.
    pub grad_g: Vec<f64>,
    pub w: Vec<f64>,
    pub f: Vec<f64>,
    pub b: Vec<f64>,
    pub l: Vec<f64>,
    pub l1_signed: Vec<f64>,
}

/// Fill every coefficient field of the Harnack quantity for `u`.
pub fn harnack_fields(u: &Field, nl: &Nonlinearity, alpha: f64, n: usize) -> Result<HarnackFields> {
    let geom = &u.geometry;
    if u.values.len() != geom.points() {
        return Err(Error::Shape(format!(
            "{} values on a grid of {} points",
            u.values.len(),
            geom.points()
        )));
    }
    let du = geom.derivative_values(&u.values);
    let nm1 = n.saturating_sub(1) as f64;
    let size = u.values.len();
    let mut out = HarnackFields {
        alpha,
        n,
        time: u.time,
        g: Vec::with_capacity(size),
        gprime: Vec::with_capacity(size),
        gsecond: Vec::with_capacity(size),
        grad_g: Vec::with_capacity(size),
        w: Vec::with_capacity(size),
        f: Vec::with_capacity(size),
        b: Vec::with_capacity(size),
        l: Vec::with_capacity(size),
        l1_signed: Vec::with_capacity(size),
    };
    for (i, (&s, &ds)) in u.values.iter().zip(&du).enumerate() {
        let fp = nl.fp(s);
        if !(fp > 0.0 && fp.is_finite()) {
            return Err(Error::ConditionViolation {
                condition: "A",
                node: Some(i),
                detail: format!("F'({s}) = {fp}"),
            });
        }
        let g = nl.g(s);
        let gap = alpha - g;
        if !(gap > 0.0) {
            return Err(Error::ConditionViolation {
                condition: "B",
                node: Some(i),
                detail: format!("α - G(u) = {gap} at u = {s}"),
            });
        }
        let b = nl.elasticity(s);
        let grad = fp / s * ds;
        let f = 2.0 * fp / gap;
        out.g.push(g);
        out.gprime.push(fp);
        out.gsecond.push(nl.fpp(s) * s);
        out.grad_g.push(grad);
        out.w.push(grad * grad / (gap * gap));
        out.f.push(f);
        out.b.push(b);
        out.l.push(gap * (2.0 * (1.0 + b) - nm1 * b * b / f));
        out.l1_signed.push(2.0 - f + b);
    }
    Ok(out)
}

/// Largest interior defects of the two evolution identities for `g = G(u)` and `φ = ln u`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IdentityDefects {
    /// `g_t - g'Δg - |∇g|²`.
    pub g_identity: f64,
    /// `φ_t - ΔG(u) - ∇G(u)·∇φ`.
    pub phi_identity: f64,
}

impl IdentityDefects {
    pub fn max(&self) -> f64 {
        self.g_identity.max(self.phi_identity)
    }
}

/// Evaluate both identities with centred differences in time and space.
pub fn identity_check_g(traj: &Trajectory, nl: &Nonlinearity) -> Result<IdentityDefects> {
    if traj.len() < 3 {
        return Err(Error::Window(format!(
            "identity check needs 3 snapshots, got {}",
            traj.len()
        )));
    }
    let geom = &traj.geometry;
    let mut out = IdentityDefects {
        g_identity: 0.0,
        phi_identity: 0.0,
    };
    for win in traj.fields.windows(3) {
        let (prev, cur, next) = (&win[0], &win[1], &win[2]);
        let dt = next.time - prev.time;
        let g: Vec<f64> = cur.values.iter().map(|&s| nl.g(s)).collect();
        let lap_g = geom.laplacian_values(&g);
        let du = geom.derivative_values(&cur.values);
        for i in geom.interior_nodes() {
            let s = cur.values[i];
            let fp = nl.fp(s);
            let grad_g = fp / s * du[i];
            let grad_phi = du[i] / s;
            let g_t = (nl.g(next.values[i]) - nl.g(prev.values[i])) / dt;
            let phi_t = (next.values[i].ln() - prev.values[i].ln()) / dt;
            out.g_identity = out.g_identity.max((g_t - fp * lap_g[i] - grad_g * grad_g).abs());
            out.phi_identity = out.phi_identity.max((phi_t - lap_g[i] - grad_g * grad_phi).abs());
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InequalityResidualReport {
    pub min_residual: f64,
    pub node: usize,
    pub r: f64,
    pub time: f64,
    /// `max |L w²|` over the evaluated nodes.
    pub scale: f64,
    /// `min_residual / scale`, zero when the scale vanishes.
    pub normalized_min: f64,
    pub h: f64,
    /// Largest snapshot spacing.
    pub dt: f64,
    /// `10 · scale · (h² + dt)`.
    pub epsilon: f64,
    pub passes: bool,
}

fn require_conditions(report: &ConditionReport) -> Result<()> {
    let failed = if !report.satisfied_a {
        Some(("A", format!("sup F' = {}", report.k_sup)))
    } else if !report.satisfied_b {
        Some(("B", format!("inf (α - G) = {}", report.delta)))
    } else if !report.satisfied_c {
        Some(("C", format!("γ = {}", report.gamma)))
    } else {
        None
    };
    match failed {
        Some((condition, detail)) => Err(Error::ConditionViolation {
            condition,
            node: None,
            detail,
        }),
        None => Ok(()),
    }
}

/// Residual `g'Δw - w_t - Lw² + 2g'kw + L1 ∇g·∇w` of the differential inequality.
///
/// Evaluated on the inner snapshots at nodes whose stencil avoids the end nodes,
/// where `w` carries one-sided derivatives; the first and last snapshot only
/// feed the centred time difference.
pub fn inequality_residual(
    traj: &Trajectory,
    nl: &Nonlinearity,
    alpha: f64,
    k: f64,
    n: usize,
) -> Result<InequalityResidualReport> {
    if traj.len() < 3 {
        return Err(Error::Window(format!(
            "inequality residual needs 3 snapshots, got {}",
            traj.len()
        )));
    }
    let report = condition_report(nl, traj.value_range()?, alpha, n)?;
    require_conditions(&report)?;
    let geom = &traj.geometry;
    let fields = traj
        .fields
        .iter()
        .map(|u| harnack_fields(u, nl, alpha, n))
        .collect::<Result<Vec<_>>>()?;
    let mut best = (f64::INFINITY, 0usize, 0.0f64);
    let mut scale = 0.0f64;
    let mut dt_max = 0.0f64;
    for j in 1..fields.len() - 1 {
        let cur = &fields[j];
        let dt = fields[j + 1].time - fields[j - 1].time;
        dt_max = dt_max
            .max(fields[j + 1].time - cur.time)
            .max(cur.time - fields[j - 1].time);
        let lap_w = geom.laplacian_values(&cur.w);
        let grad_w = geom.derivative_values(&cur.w);
        let deep = |i: usize| geom.kind().is_periodic() || (i >= 2 && i + 2 < geom.points());
        for i in (0..geom.points()).filter(|&i| deep(i)) {
            let w = cur.w[i];
            let w_t = (fields[j + 1].w[i] - fields[j - 1].w[i]) / dt;
            let lw2 = cur.l[i] * w * w;
            let res = cur.gprime[i] * lap_w[i] - w_t - lw2
                + 2.0 * cur.gprime[i] * k * w
                + cur.l1_signed[i] * cur.grad_g[i] * grad_w[i];
            scale = scale.max(lw2.abs());
            if res < best.0 {
                best = (res, i, cur.time);
            }
        }
    }
    let h = geom.spacing();
    let epsilon = 10.0 * scale * (h * h + dt_max);
    Ok(InequalityResidualReport {
        min_residual: best.0,
        node: best.1,
        r: geom.nodes()[best.1],
        time: best.2,
        scale,
        normalized_min: if scale > 0.0 { best.0 / scale } else { 0.0 },
        h,
        dt: dt_max,
        epsilon,
        passes: best.0 >= -epsilon,
    })
}

/// Space-time cube `Q_{R,T} = B(x0, R) × [t0 - T, t0]`; `x0` is a coordinate,
/// snapped to the nearest grid node.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Window {
    pub x0: f64,
    pub t0: f64,
    #[serde(rename = "R")]
    pub radius: f64,
    #[serde(rename = "T")]
    pub duration: f64,
}

impl Window {
    pub fn new(x0: f64, t0: f64, radius: f64, duration: f64) -> Self {
        Window {
            x0,
            t0,
            radius,
            duration,
        }
    }
}

struct Resolved {
    full_nodes: Vec<usize>,
    half_nodes: Vec<usize>,
    full_snaps: Vec<usize>,
    half_snaps: Vec<usize>,
    m: f64,
    big_m: f64,
}

fn resolve(traj: &Trajectory, window: &Window) -> Result<Resolved> {
    if !(window.radius > 0.0 && window.duration > 0.0) {
        return Err(Error::Window(format!(
            "window needs R > 0 and T > 0, got R = {}, T = {}",
            window.radius, window.duration
        )));
    }
    let geom = &traj.geometry;
    let times = traj.times();
    let (first, last) = (times[0], times[times.len() - 1]);
    let tol = 1e-9 * (1.0 + window.t0.abs() + window.duration);
    let start = window.t0 - window.duration;
    if start < first - tol || window.t0 > last + tol {
        return Err(Error::Window(format!(
            "time window [{start}, {}] is not inside the trajectory's [{first}, {last}]",
            window.t0
        )));
    }
    let snaps = |from: f64| -> Vec<usize> {
        (0..times.len())
            .filter(|&k| times[k] >= from - tol && times[k] <= window.t0 + tol)
            .collect()
    };
    let full_snaps = snaps(start);
    let half_snaps = snaps(window.t0 - 0.5 * window.duration);
    if half_snaps.is_empty() {
        return Err(Error::Window("no snapshot inside the half cube".into()));
    }
    let centre = geom.nearest_node(window.x0);
    let full_nodes = geom.geodesic_ball(centre, window.radius)?;
    let half_nodes = geom.geodesic_ball(centre, 0.5 * window.radius)?;
    let mut m = f64::INFINITY;
    let mut big_m = f64::NEG_INFINITY;
    for &k in &full_snaps {
        for &i in &full_nodes {
            let v = traj.fields[k].values[i];
            m = m.min(v);
            big_m = big_m.max(v);
        }
    }
    Ok(Resolved {
        full_nodes,
        half_nodes,
        full_snaps,
        half_snaps,
        m,
        big_m,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RhsTerm {
    pub name: &'static str,
    pub value: f64,
}

/// One row of the per-node table at the snapshot attaining the supremum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NodeDetail {
    pub node: usize,
    pub r: f64,
    pub u: f64,
    pub lhs: f64,
}

/// Localized comparison of a gradient quantity with the estimate's right-hand side.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimateReport {
    pub estimate: &'static str,
    pub window: Window,
    /// `inf u` on `Q_{R,T}`.
    pub m_window: f64,
    /// `sup u` on `Q_{R,T}`.
    #[serde(rename = "M_window")]
    pub big_m_window: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    /// Supremum over `Q_{R/2,T/2}`.
    pub lhs_sup: f64,
    pub lhs_node: usize,
    pub lhs_time: f64,
    pub rhs: f64,
    /// Inferred constant `lhs_sup / rhs`.
    pub ratio: f64,
    pub rhs_terms: Vec<RhsTerm>,
    /// Nodewise defect of an exact algebraic identity, when the estimate has one.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub identity_defect: Option<f64>,
    pub nodes_in_window: usize,
    pub snapshots_in_window: usize,
    #[serde(skip)]
    pub details: Vec<NodeDetail>,
}

impl EstimateReport {
    /// Per-node table `node,r,u,lhs` with 17 significant digits.
    pub fn write_details_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["node", "r", "u", "lhs"])?;
        for d in &self.details {
            w.write_record([
                d.node.to_string(),
                format!("{:.16e}", d.r),
                format!("{:.16e}", d.u),
                format!("{:.16e}", d.lhs),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

struct Localized<'a> {
    traj: &'a Trajectory,
    window: Window,
    res: Resolved,
}

impl<'a> Localized<'a> {
    fn new(traj: &'a Trajectory, window: &Window) -> Result<Self> {
        Ok(Localized {
            traj,
            window: *window,
            res: resolve(traj, window)?,
        })
    }

    fn report(
        &self,
        estimate: &'static str,
        alpha: Option<f64>,
        terms: Vec<RhsTerm>,
        lhs_of: impl Fn(&Field) -> Result<Vec<f64>>,
    ) -> Result<EstimateReport> {
        let rhs: f64 = terms.iter().map(|t| t.value).sum();
        if !(rhs > 0.0 && rhs.is_finite()) {
            return Err(Error::Window(format!(
                "right-hand side {rhs} is not positive and finite"
            )));
        }
        let mut best = (f64::NEG_INFINITY, 0usize, 0usize);
        let mut lhs_at = Vec::with_capacity(self.res.half_snaps.len());
        for &k in &self.res.half_snaps {
            let lhs = lhs_of(&self.traj.fields[k])?;
            for &i in &self.res.half_nodes {
                if lhs[i].is_nan() {
                    return Err(Error::ConditionViolation {
                        condition: "B",
                        node: Some(i),
                        detail: format!("α - G(u) <= 0 at u = {}", self.traj.fields[k].values[i]),
                    });
                }
                if lhs[i] > best.0 {
                    best = (lhs[i], i, k);
                }
            }
            lhs_at.push((k, lhs));
        }
        let geom = &self.traj.geometry;
        let snap = &self.traj.fields[best.2];
        let lhs = &lhs_at.iter().find(|(k, _)| *k == best.2).unwrap().1;
        let details = self
            .res
            .half_nodes
            .iter()
            .map(|&i| NodeDetail {
                node: i,
                r: geom.nodes()[i],
                u: snap.values[i],
                lhs: lhs[i],
            })
            .collect();
        Ok(EstimateReport {
            estimate,
            window: self.window,
            m_window: self.res.m,
            big_m_window: self.res.big_m,
            alpha,
            lhs_sup: best.0,
            lhs_node: best.1,
            lhs_time: snap.time,
            rhs,
            ratio: best.0 / rhs,
            rhs_terms: terms,
            identity_defect: None,
            nodes_in_window: self.res.full_nodes.len(),
            snapshots_in_window: self.res.full_snaps.len(),
            details,
        })
    }

    fn sqrt_k(&self) -> f64 {
        self.traj.geometry.ricci_lower_bound().sqrt()
    }

    fn base_terms(&self) -> Vec<RhsTerm> {
        vec![
            RhsTerm {
                name: "1/R",
                value: 1.0 / self.window.radius,
            },
            RhsTerm {
                name: "1/sqrt(T)",
                value: 1.0 / self.window.duration.sqrt(),
            },
            RhsTerm {
                name: "sqrt(k)",
                value: self.sqrt_k(),
            },
        ]
    }
}

fn log_gradient(u: &Field) -> Vec<f64> {
    u.geometry
        .derivative_values(&u.values)
        .iter()
        .zip(&u.values)
        .map(|(d, s)| d.abs() / s)
        .collect()
}

// NaN where `α - G(u) <= 0`; the window check turns that into a condition error.
fn potential_ratio(u: &Field, nl: &Nonlinearity, alpha: f64) -> Vec<f64> {
    let du = u.geometry.derivative_values(&u.values);
    u.values
        .iter()
        .zip(&du)
        .map(|(&s, &d)| {
            let gap = alpha - nl.g(s);
            if gap > 0.0 {
                (nl.fp(s) / s * d).abs() / gap
            } else {
                f64::NAN
            }
        })
        .collect()
}

/// General estimate: `sup |∇G(u)|/(α - G(u))` against `1/R + 1/√T + √k`.
pub fn bound_ratio_thm11(
    traj: &Trajectory,
    nl: &Nonlinearity,
    alpha: f64,
    window: &Window,
    constants: &ConditionReport,
) -> Result<EstimateReport> {
    require_conditions(constants)?;
    let loc = Localized::new(traj, window)?;
    let terms = loc.base_terms();
    loc.report("general", Some(alpha), terms, |u| Ok(potential_ratio(u, nl, alpha)))
}

/// `max |a - b| / max(1, |b|)` for `a = |∇G(u)|/(-G(u))`, `b = (1-p)|∇u|/u` over all nodes.
pub fn fde_identity_defect(u: &Field, p: f64) -> f64 {
    let nl = Nonlinearity::Power { p };
    let du = u.geometry.derivative_values(&u.values);
    u.values
        .iter()
        .zip(&du)
        .map(|(&s, &d)| {
            let a = (nl.fp(s) / s * d).abs() / (-nl.g(s));
            let b = (1.0 - p) * d.abs() / s;
            (a - b).abs() / b.abs().max(1.0)
        })
        .fold(0.0, f64::max)
}

/// Fast diffusion: `sup |∇u|/u` against `1/R + M^{(1-p)/2}/√T + √k`.
pub fn bound_ratio_fde(traj: &Trajectory, p: f64, n: usize, window: &Window) -> Result<EstimateReport> {
    fde_gamma(n, p)?;
    let loc = Localized::new(traj, window)?;
    let m = loc.res.big_m;
    let terms = vec![
        RhsTerm {
            name: "1/R",
            value: 1.0 / window.radius,
        },
        RhsTerm {
            name: "M^((1-p)/2)/sqrt(T)",
            value: m.powf(0.5 * (1.0 - p)) / window.duration.sqrt(),
        },
        RhsTerm {
            name: "sqrt(k)",
            value: loc.sqrt_k(),
        },
    ];
    let mut report = loc.report("fast_diffusion", Some(0.0), terms, |u| Ok(log_gradient(u)))?;
    let defect = loc
        .res
        .half_snaps
        .iter()
        .map(|&k| fde_identity_defect(&traj.fields[k], p))
        .fold(0.0, f64::max);
    report.identity_defect = Some(defect);
    Ok(report)
}

/// Porous medium in one dimension with `α = p/(p-1) M^{p-1}(1+δ)`:
/// rhs `(1+δ)/(δR) + 1/√(M^{p-1} δ T)`.
pub fn bound_ratio_pme_n1(traj: &Trajectory, p: f64, delta: f64, window: &Window) -> Result<EstimateReport> {
    if traj.geometry.dimension() != 1 {
        return Err(Error::Domain {
            n: traj.geometry.dimension(),
            expected: "n = 1",
        });
    }
    if !(p > 1.0) {
        return Err(Error::Parameter(format!(
            "porous medium exponent must exceed 1, got {p}"
        )));
    }
    if !(delta > 0.0) {
        return Err(Error::Parameter(format!("delta must be positive, got {delta}")));
    }
    let loc = Localized::new(traj, window)?;
    let mp = loc.res.big_m.powf(p - 1.0);
    let alpha = p / (p - 1.0) * mp * (1.0 + delta);
    let terms = vec![
        RhsTerm {
            name: "(1+delta)/(delta R)",
            value: (1.0 + delta) / (delta * window.radius),
        },
        RhsTerm {
            name: "1/sqrt(M^(p-1) delta T)",
            value: 1.0 / (mp * delta * window.duration).sqrt(),
        },
    ];
    let nl = Nonlinearity::Power { p };
    loc.report("porous_medium_line", Some(alpha), terms, |u| {
        Ok(potential_ratio(u, &nl, alpha))
    })
}

/// Porous medium in dimension `n >= 2` under the pinch condition:
/// rhs `(δ+1)/(γδR) + 1/√(γδ M^{p-1} T) + √(k/δ)`.
pub fn bound_ratio_pme_n2(traj: &Trajectory, p: f64, delta: f64, n: usize, window: &Window) -> Result<EstimateReport> {
    let loc = Localized::new(traj, window)?;
    let range = ValueRange::new(loc.res.m, loc.res.big_m)?;
    let pinch = pme_pinch(n, p, delta, range)?;
    if !pinch.holds {
        return Err(Error::PinchViolated {
            ratio: pinch.ratio,
            threshold: pinch.threshold,
        });
    }
    let (gamma, alpha) = (pinch.gamma, pinch.alpha);
    let mp = range.max.powf(p - 1.0);
    let k = traj.geometry.ricci_lower_bound();
    let terms = vec![
        RhsTerm {
            name: "(delta+1)/(gamma delta R)",
            value: (delta + 1.0) / (gamma * delta * window.radius),
        },
        RhsTerm {
            name: "1/sqrt(gamma delta M^(p-1) T)",
            value: 1.0 / (gamma * delta * mp * window.duration).sqrt(),
        },
        RhsTerm {
            name: "sqrt(k/delta)",
            value: (k / delta).sqrt(),
        },
    ];
    let nl = Nonlinearity::Power { p };
    loc.report("porous_medium", Some(alpha), terms, |u| {
        Ok(potential_ratio(u, &nl, alpha))
    })
}

/// Heat equation: `sup (|∇u|/u)/(1 + ln(M/u))` against `1/R + 1/√T + √k`.
pub fn bound_ratio_heat_sz(traj: &Trajectory, window: &Window) -> Result<EstimateReport> {
    let loc = Localized::new(traj, window)?;
    let m = loc.res.big_m;
    let terms = loc.base_terms();
    loc.report("heat", Some(1.0 + m.ln()), terms, |u| {
        Ok(log_gradient(u)
            .iter()
            .zip(&u.values)
            .map(|(q, &s)| q / (1.0 + (m / s).ln()))
            .collect())
    })
}

/// Window schedule of the Liouville sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SweepSchedule {
    /// Fast diffusion with growth gauge `L(s) = s^q`, inverse `H(s) = s^{1/q}`:
    /// estimate cube `Q(H(R^{2/(1-p)})/2, R²)`, double cube `Q(H(R^{2/(1-p)}), 2R²)`.
    Fde { p: f64, gauge: f64 },
    /// Porous medium on the line: estimate cube `Q(R, R)`, double cube `Q(2R, 2R)`.
    PmeLine { p: f64 },
}

/// Geometry of one sweep step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepWindow {
    pub x0: f64,
    pub t0: f64,
    pub estimate_radius: f64,
    pub estimate_duration: f64,
    /// The double cube over which `M` is taken.
    pub radius: f64,
    pub duration: f64,
}

impl SweepSchedule {
    pub fn validate(&self) -> Result<()> {
        match *self {
            SweepSchedule::Fde { p, gauge } if !(p > 0.0 && p < 1.0 && gauge > 0.0) => Err(Error::Parameter(format!(
                "fast diffusion sweep needs 0 < p < 1 and a positive gauge, got p = {p}, q = {gauge}"
            ))),
            SweepSchedule::PmeLine { p } if !(p > 1.0) => {
                Err(Error::Parameter(format!("porous medium sweep needs p > 1, got {p}")))
            }
            _ => Ok(()),
        }
    }

    pub fn window(&self, x0: f64, t0: f64, big_r: f64) -> SweepWindow {
        match *self {
            SweepSchedule::Fde { p, gauge } => {
                let h = big_r.powf(2.0 / (1.0 - p)).powf(1.0 / gauge);
                SweepWindow {
                    x0,
                    t0,
                    estimate_radius: 0.5 * h,
                    estimate_duration: big_r * big_r,
                    radius: h,
                    duration: 2.0 * big_r * big_r,
                }
            }
            SweepSchedule::PmeLine { .. } => SweepWindow {
                x0,
                t0,
                estimate_radius: big_r,
                estimate_duration: big_r,
                radius: 2.0 * big_r,
                duration: 2.0 * big_r,
            },
        }
    }

    /// Bound on `|∇u|/u` at the centre, up to the estimate's constant.
    pub fn rhs(&self, w: &SweepWindow, m_double: f64) -> f64 {
        match *self {
            SweepSchedule::Fde { p, .. } => {
                1.0 / w.estimate_radius + m_double.powf(0.5 * (1.0 - p)) / w.estimate_duration.sqrt()
            }
            SweepSchedule::PmeLine { p } => {
                let q = m_double.powf(p - 1.0) / w.estimate_radius;
                q + q.sqrt()
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepRow {
    #[serde(rename = "R")]
    pub radius: f64,
    pub window: SweepWindow,
    pub m_double: f64,
    pub rhs: f64,
    /// Observed `|∇u|/u` at the grid point nearest `(x0, t0)`.
    pub lhs_at_center: f64,
    /// `rhs` is below the previous row's.
    pub decreasing: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepTable {
    pub schedule: SweepSchedule,
    pub rows: Vec<SweepRow>,
    /// The rhs sequence is strictly decreasing.
    pub decreasing: bool,
}

impl SweepTable {
    /// CSV with columns `R,M_double,rhs,lhs_at_center,decreasing`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["R", "M_double", "rhs", "lhs_at_center", "decreasing"])?;
        for row in &self.rows {
            w.write_record([
                format!("{:.16e}", row.radius),
                format!("{:.16e}", row.m_double),
                format!("{:.16e}", row.rhs),
                format!("{:.16e}", row.lhs_at_center),
                row.decreasing.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// For each `R`, obtain the solution on the double cube from `generator`, take its
/// maximum there and evaluate the schedule's bound at `(x0, t0)`.
pub fn liouville_sweep<G>(
    schedule: SweepSchedule,
    x0: f64,
    t0: f64,
    radii: &[f64],
    mut generator: G,
) -> Result<SweepTable>
where
    G: FnMut(&SweepWindow) -> Result<Trajectory>,
{
    schedule.validate()?;
    if radii.is_empty() || radii.iter().any(|&r| !(r > 0.0)) {
        return Err(Error::Parameter("sweep radii must be positive and nonempty".into()));
    }
    let mut rows: Vec<SweepRow> = Vec::with_capacity(radii.len());
    for &big_r in radii {
        let sw = schedule.window(x0, t0, big_r);
        let traj = generator(&sw)?;
        // The left end may be clipped (radial pole, positivity region); the right must reach.
        let (lo, hi) = traj.geometry.domain();
        let covered = traj.geometry.kind().is_periodic() || x0 + sw.radius <= hi + 1e-9 * sw.radius;
        if !covered {
            return Err(Error::Window(format!(
                "generated domain [{lo}, {hi}] does not reach radius {} around {x0}",
                sw.radius
            )));
        }
        let cube = Window::new(x0, t0, sw.radius, sw.duration);
        let res = resolve(&traj, &cube)?;
        let rhs = schedule.rhs(&sw, res.big_m);
        let centre = traj.geometry.nearest_node(x0);
        let snap = traj
            .fields
            .iter()
            .min_by(|a, b| (a.time - t0).abs().total_cmp(&(b.time - t0).abs()))
            .expect("trajectory is never empty");
        let lhs_at_center = log_gradient(snap)[centre];
        let decreasing = rows.last().is_none_or(|prev| rhs < prev.rhs);
        rows.push(SweepRow {
            radius: big_r,
            window: sw,
            m_double: res.big_m,
            rhs,
            lhs_at_center,
            decreasing,
        });
    }
    let decreasing = rows.iter().all(|r| r.decreasing);
    Ok(SweepTable {
        schedule,
        rows,
        decreasing,
    })
}
