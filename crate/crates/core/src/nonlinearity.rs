//! Diffusion nonlinearities `F`, the coupled potential `G` with `G'(s) = F'(s)/s`,
//! and the admissibility computations for the gradient estimates.
//!
//! Three kinds are supported: the heat equation (`F(s) = s`), power laws
//! (`F(s) = s^p`, fast diffusion for `p < 1`, porous medium for `p > 1`) and
//! custom tabulated `F` interpolated by a monotone cubic.

use serde::Serialize;

use crate::error::{Error, Result};

/// Number of log-uniform sample points used for custom nonlinearities.
pub const SAMPLE_POINTS: usize = 4097;

/// The equation's nonlinearity.
#[derive(Debug, Clone, PartialEq)]
pub enum Nonlinearity {
    /// `F(s) = s`, `G(s) = ln s`.
    Heat,
    /// `F(s) = s^p`, `G(s) = p/(p-1) s^(p-1)`; `p = 1` behaves as [`Nonlinearity::Heat`].
    Power { p: f64 },
    /// Tabulated `F`, interpolated with a monotone cubic.
    Custom(MonotoneTable),
}

impl Nonlinearity {
    pub fn heat() -> Self {
        Nonlinearity::Heat
    }

    pub fn power(p: f64) -> Result<Self> {
        if !(p.is_finite() && p > 0.0) {
            return Err(Error::InvalidNonlinearity(format!(
                "power exponent must be finite and positive, got {p}"
            )));
        }
        Ok(Nonlinearity::Power { p })
    }

    pub fn custom(s: Vec<f64>, f: Vec<f64>) -> Result<Self> {
        MonotoneTable::new(s, f).map(Nonlinearity::Custom)
    }

    /// Exponent of a power law, with heat reported as `p = 1`.
    pub fn exponent(&self) -> Option<f64> {
        match self {
            Nonlinearity::Heat => Some(1.0),
            Nonlinearity::Power { p } => Some(*p),
            Nonlinearity::Custom(_) => None,
        }
    }

    fn power_exponent(&self) -> Option<f64> {
        match self {
            Nonlinearity::Power { p } if *p != 1.0 => Some(*p),
            _ => None,
        }
    }

    fn is_heat(&self) -> bool {
        matches!(self, Nonlinearity::Heat) || matches!(self, Nonlinearity::Power { p } if *p == 1.0)
    }

    pub fn f(&self, s: f64) -> f64 {
        if self.is_heat() {
            return s;
        }
        match self {
            Nonlinearity::Custom(t) => t.value(s),
            _ => s.powf(self.power_exponent().unwrap()),
        }
    }

    /// `F'(s)`.
    pub fn fp(&self, s: f64) -> f64 {
        if self.is_heat() {
            return 1.0;
        }
        match self {
            Nonlinearity::Custom(t) => t.slope(s),
            _ => {
                let p = self.power_exponent().unwrap();
                p * s.powf(p - 1.0)
            }
        }
    }

    /// `F''(s)`.
    pub fn fpp(&self, s: f64) -> f64 {
        if self.is_heat() {
            return 0.0;
        }
        match self {
            Nonlinearity::Custom(t) => t.curvature(s),
            _ => {
                let p = self.power_exponent().unwrap();
                p * (p - 1.0) * s.powf(p - 2.0)
            }
        }
    }

    /// The potential `G` with `G' = F'/s`. Integration constants: `ln s` for heat,
    /// `p/(p-1) s^(p-1)` for power laws, `G(s_0) = 0` at the first knot of a table.
    pub fn g(&self, s: f64) -> f64 {
        if self.is_heat() {
            return s.ln();
        }
        match self {
            Nonlinearity::Custom(t) => t.potential(s),
            _ => {
                let p = self.power_exponent().unwrap();
                p / (p - 1.0) * s.powf(p - 1.0)
            }
        }
    }

    /// The elasticity `b(s) = s F''(s) / F'(s)`; exact `p - 1` for power laws.
    pub fn elasticity(&self, s: f64) -> f64 {
        if self.is_heat() {
            return 0.0;
        }
        match self {
            Nonlinearity::Custom(t) => s * t.curvature(s) / t.slope(s),
            _ => self.power_exponent().unwrap() - 1.0,
        }
    }

    fn has_closed_form(&self) -> bool {
        !matches!(self, Nonlinearity::Custom(_))
    }
}

/// Strictly increasing table `s -> F(s)` with a monotone (Fritsch–Carlson) cubic
/// Hermite interpolant. Outside the knots `F` is extended linearly.
#[derive(Debug, Clone, PartialEq)]
pub struct MonotoneTable {
    s: Vec<f64>,
    f: Vec<f64>,
    d: Vec<f64>,
    g: Vec<f64>,
}

impl MonotoneTable {
    pub fn new(s: Vec<f64>, f: Vec<f64>) -> Result<Self> {
        if s.len() != f.len() {
            return Err(Error::InvalidNonlinearity(format!(
                "table has {} abscissae but {} values",
                s.len(),
                f.len()
            )));
        }
        if s.len() < 2 {
            return Err(Error::InvalidNonlinearity("table needs at least two rows".into()));
        }
        if s.iter().chain(f.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidNonlinearity("table contains non-finite entries".into()));
        }
        if s[0] <= 0.0 {
            return Err(Error::InvalidNonlinearity("table abscissae must be positive".into()));
        }
        for k in 1..s.len() {
            if s[k] <= s[k - 1] {
                return Err(Error::InvalidNonlinearity(format!(
                    "abscissae not strictly increasing at row {k}"
                )));
            }
            if f[k] <= f[k - 1] {
                return Err(Error::InvalidNonlinearity(format!(
                    "F not strictly increasing at row {k}"
                )));
            }
        }

        let m = s.len();
        let h: Vec<f64> = s.windows(2).map(|w| w[1] - w[0]).collect();
        let delta: Vec<f64> = (0..m - 1).map(|k| (f[k + 1] - f[k]) / h[k]).collect();
        let mut d = vec![0.0; m];
        if m == 2 {
            d[0] = delta[0];
            d[1] = delta[0];
        } else {
            for k in 1..m - 1 {
                let w1 = 2.0 * h[k] + h[k - 1];
                let w2 = h[k] + 2.0 * h[k - 1];
                d[k] = (w1 + w2) / (w1 / delta[k - 1] + w2 / delta[k]);
            }
            d[0] = end_slope(h[0], h[1], delta[0], delta[1]);
            d[m - 1] = end_slope(h[m - 2], h[m - 3], delta[m - 2], delta[m - 3]);
        }

        let mut table = MonotoneTable {
            s,
            f,
            d,
            g: vec![0.0; m],
        };
        for k in 1..m {
            let prev = table.g[k - 1];
            table.g[k] = prev + table.segment_potential(k - 1, table.s[k]);
        }
        Ok(table)
    }

    pub fn knots(&self) -> (&[f64], &[f64]) {
        (&self.s, &self.f)
    }

    fn segment(&self, x: f64) -> usize {
        match self.s.partition_point(|&v| v <= x) {
            0 => 0,
            i => (i - 1).min(self.s.len() - 2),
        }
    }

    // Cubic coefficients in the local variable x - s_k.
    fn coeffs(&self, k: usize) -> [f64; 4] {
        let h = self.s[k + 1] - self.s[k];
        let delta = (self.f[k + 1] - self.f[k]) / h;
        let (d0, d1) = (self.d[k], self.d[k + 1]);
        [
            self.f[k],
            d0,
            (3.0 * delta - 2.0 * d0 - d1) / h,
            (d0 + d1 - 2.0 * delta) / (h * h),
        ]
    }

    fn value(&self, x: f64) -> f64 {
        let last = self.s.len() - 1;
        if x < self.s[0] {
            return self.f[0] + self.d[0] * (x - self.s[0]);
        }
        if x > self.s[last] {
            return self.f[last] + self.d[last] * (x - self.s[last]);
        }
        let k = self.segment(x);
        let [c0, c1, c2, c3] = self.coeffs(k);
        let t = x - self.s[k];
        c0 + t * (c1 + t * (c2 + t * c3))
    }

    fn slope(&self, x: f64) -> f64 {
        let last = self.s.len() - 1;
        if x < self.s[0] {
            return self.d[0];
        }
        if x > self.s[last] {
            return self.d[last];
        }
        let k = self.segment(x);
        let [_, c1, c2, c3] = self.coeffs(k);
        let t = x - self.s[k];
        c1 + t * (2.0 * c2 + 3.0 * c3 * t)
    }

    fn curvature(&self, x: f64) -> f64 {
        if x < self.s[0] || x > self.s[self.s.len() - 1] {
            return 0.0;
        }
        let k = self.segment(x);
        let [_, _, c2, c3] = self.coeffs(k);
        2.0 * c2 + 6.0 * c3 * (x - self.s[k])
    }

    // Exact integral of F'(σ)/σ over [s_k, x] for the cubic on segment k.
    fn segment_potential(&self, k: usize, x: f64) -> f64 {
        let a = self.s[k];
        let [_, c1, c2, c3] = self.coeffs(k);
        let a0 = c1 - 2.0 * c2 * a + 3.0 * c3 * a * a;
        let a1 = 2.0 * c2 - 6.0 * c3 * a;
        a0 * (x / a).ln() + a1 * (x - a) + 1.5 * c3 * (x * x - a * a)
    }

    fn potential(&self, x: f64) -> f64 {
        let last = self.s.len() - 1;
        if x < self.s[0] {
            return self.d[0] * (x / self.s[0]).ln();
        }
        if x > self.s[last] {
            return self.g[last] + self.d[last] * (x / self.s[last]).ln();
        }
        let k = self.segment(x);
        self.g[k] + self.segment_potential(k, x)
    }
}

// Three-point end slope, kept inside (0, 3δ] so the interpolant stays strictly increasing.
fn end_slope(h0: f64, h1: f64, delta0: f64, delta1: f64) -> f64 {
    let d = ((2.0 * h0 + h1) * delta0 - h0 * delta1) / (h0 + h1);
    if d <= 0.0 {
        0.5 * delta0
    } else if d > 3.0 * delta0 {
        3.0 * delta0
    } else {
        d
    }
}

/// The value range `[m, M]` of a positive solution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ValueRange {
    pub m: f64,
    #[serde(rename = "M")]
    pub max: f64,
}

impl ValueRange {
    pub fn new(m: f64, max: f64) -> Result<Self> {
        if m.is_finite() && max.is_finite() && m > 0.0 && m <= max {
            Ok(ValueRange { m, max })
        } else {
            Err(Error::InvalidRange { m, max })
        }
    }

    /// Range spanned by a set of values.
    pub fn of(values: impl IntoIterator<Item = f64>) -> Result<Self> {
        let (lo, hi) = values
            .into_iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
        ValueRange::new(lo, hi)
    }

    /// `count` log-uniform points from `m` to `M`, endpoints included exactly.
    pub fn log_samples(&self, count: usize) -> Vec<f64> {
        if self.m == self.max || count < 2 {
            return vec![self.m, self.max];
        }
        let (a, b) = (self.m.ln(), self.max.ln());
        let mut out: Vec<f64> = (0..count)
            .map(|i| (a + (b - a) * i as f64 / (count - 1) as f64).exp())
            .collect();
        out[0] = self.m;
        out[count - 1] = self.max;
        out
    }
}

/// Range of the coefficient `L1 = 2 - f + b` over the value range.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct L1Summary {
    pub signed_min: f64,
    pub signed_max: f64,
    /// Supremum of the majorant `2 + τ + f`.
    pub bound_sup: f64,
    /// The constant value `3 - p` quoted for fast diffusion with `α = 0`, when applicable.
    pub stated: Option<f64>,
}

/// Constants `K, δ, τ, γ` of the general gradient estimate over a value range.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionReport {
    pub n: usize,
    pub range: ValueRange,
    pub alpha: f64,
    /// `sup F'` over the range.
    #[serde(rename = "K")]
    pub k_sup: f64,
    /// `inf (α - G)`.
    pub delta: f64,
    /// `sup |s F''/F'|`.
    pub tau_min: f64,
    /// `inf [2(1+b) - (n-1) b²/f]`, the operative nonlinear condition.
    pub gamma: f64,
    /// `inf [2 + b(2 - (n-1) b (α-G)/F')]`, the condition as literally stated.
    pub gamma_literal: f64,
    pub satisfied_a: bool,
    pub satisfied_b: bool,
    pub satisfied_c: bool,
    pub satisfied_c_literal: bool,
    /// The two versions of the nonlinear condition disagree on the verdict.
    pub c_mismatch: bool,
    pub l1: L1Summary,
    pub method: &'static str,
}

impl ConditionReport {
    /// Conditions (A), (B) and the operative form of (C) all hold.
    pub fn passes(&self) -> bool {
        self.satisfied_a && self.satisfied_b && self.satisfied_c
    }
}

/// Pointwise coefficients of the nonlinear condition at one value `s`.
#[derive(Debug, Clone, Copy)]
struct PointCoefficients {
    fp: f64,
    gap: f64,
    b: f64,
    gamma: f64,
    gamma_literal: f64,
    l1_signed: f64,
    f: f64,
}

fn point_coefficients(nl: &Nonlinearity, s: f64, alpha: f64, n: usize) -> Result<PointCoefficients> {
    let fp = nl.fp(s);
    if !(fp > 0.0 && fp.is_finite()) {
        return Err(Error::InvalidNonlinearity(format!("F'({s}) = {fp} is not positive")));
    }
    let gap = alpha - nl.g(s);
    let b = nl.elasticity(s);
    let f = 2.0 * fp / gap;
    let nm1 = (n - 1) as f64;
    Ok(PointCoefficients {
        fp,
        gap,
        b,
        gamma: 2.0 * (1.0 + b) - nm1 * b * b * gap / (2.0 * fp),
        gamma_literal: 2.0 + b * (2.0 - nm1 * b * gap / fp),
        l1_signed: 2.0 - f + b,
        f,
    })
}

/// Evaluate the admissibility constants of the general estimate over `range`.
///
/// Heat and power presets are monotone in `s`, so endpoint evaluation is exact;
/// custom tables are sampled at [`SAMPLE_POINTS`] log-uniform points plus the endpoints.
/// A non-positive `α - G` is reported through `satisfied_b`, not as an error.
pub fn condition_report(nl: &Nonlinearity, range: ValueRange, alpha: f64, n: usize) -> Result<ConditionReport> {
    if n < 1 {
        return Err(Error::Domain { n, expected: "n >= 1" });
    }
    let points = if nl.has_closed_form() {
        vec![range.m, range.max]
    } else {
        range.log_samples(SAMPLE_POINTS)
    };
    let coeffs = points
        .iter()
        .map(|&s| point_coefficients(nl, s, alpha, n))
        .collect::<Result<Vec<_>>>()?;

    let min = |sel: fn(&PointCoefficients) -> f64| coeffs.iter().map(sel).fold(f64::INFINITY, f64::min);
    let max = |sel: fn(&PointCoefficients) -> f64| coeffs.iter().map(sel).fold(f64::NEG_INFINITY, f64::max);

    let k_sup = max(|c| c.fp);
    let delta = min(|c| c.gap);
    let tau_min = match nl.exponent() {
        Some(p) => (p - 1.0).abs(),
        None => max(|c| c.b.abs()),
    };
    let gamma = min(|c| c.gamma);
    let gamma_literal = min(|c| c.gamma_literal);
    let satisfied_b = delta > 0.0;
    let satisfied_c = satisfied_b && gamma > 0.0;
    let satisfied_c_literal = satisfied_b && gamma_literal > 0.0;

    let stated = match nl {
        Nonlinearity::Power { p } if *p < 1.0 && alpha == 0.0 => Some(3.0 - p),
        _ => None,
    };
    let l1 = L1Summary {
        signed_min: min(|c| c.l1_signed),
        signed_max: max(|c| c.l1_signed),
        bound_sup: 2.0 + tau_min + max(|c| c.f),
        stated,
    };

    Ok(ConditionReport {
        n,
        range,
        alpha,
        k_sup,
        delta,
        tau_min,
        gamma,
        gamma_literal,
        satisfied_a: k_sup.is_finite(),
        satisfied_b,
        satisfied_c,
        satisfied_c_literal,
        c_mismatch: satisfied_c != satisfied_c_literal,
        l1,
        method: if nl.has_closed_form() { "closed_form" } else { "sampled" },
    })
}

/// The open interval `(1 - 4/(n+3), 1)` of fast-diffusion exponents covered by the estimate.
pub fn fde_admissible_range(n: usize) -> Result<(f64, f64)> {
    if n < 1 {
        return Err(Error::Domain { n, expected: "n >= 1" });
    }
    // (n-1)/(n+3) is 1 - 4/(n+3) without the cancellation
    Ok(((n as f64 - 1.0) / (n as f64 + 3.0), 1.0))
}

/// `γ = ((n+3)p - (n-1))/2` for an admissible fast-diffusion exponent.
pub fn fde_gamma(n: usize, p: f64) -> Result<f64> {
    let (lo, hi) = fde_admissible_range(n)?;
    let bound = if !(p > lo) {
        Some("lower")
    } else if !(p < hi) {
        Some("upper")
    } else {
        None
    };
    if let Some(bound) = bound {
        return Err(Error::Inadmissible { n, p, lo, hi, bound });
    }
    Ok(((n as f64 + 3.0) * p - (n as f64 - 1.0)) / 2.0)
}

/// Outcome of the porous-medium pinch condition on `[m, M]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PinchReport {
    pub holds: bool,
    pub gamma: f64,
    pub alpha: f64,
    /// `(M/m)^(p-1)`.
    pub ratio: f64,
    /// `(4p/((n-1)(p-1)) + 1)/(1+δ)`.
    pub threshold: f64,
}

/// Pinch condition for the porous medium equation in dimension `n >= 2`.
pub fn pme_pinch(n: usize, p: f64, delta: f64, range: ValueRange) -> Result<PinchReport> {
    if n < 2 {
        return Err(Error::Parameter(format!("pinch condition needs n >= 2, got {n}")));
    }
    if !(p > 1.0 && p.is_finite()) {
        return Err(Error::Parameter(format!(
            "porous medium exponent must exceed 1, got {p}"
        )));
    }
    let nm1 = (n - 1) as f64;
    let delta_max = 4.0 / nm1;
    if !(delta > 0.0 && delta <= delta_max) {
        return Err(Error::Parameter(format!(
            "delta = {delta} outside (0, {delta_max}] for n = {n}"
        )));
    }
    let (m_pow, big_pow) = (range.m.powf(p - 1.0), range.max.powf(p - 1.0));
    let ratio = (range.max / range.m).powf(p - 1.0);
    let threshold = (4.0 * p / (nm1 * (p - 1.0)) + 1.0) / (1.0 + delta);
    let gamma = 2.0 * p - nm1 * (p - 1.0) / 2.0 * (big_pow * (1.0 + delta) - m_pow) / m_pow;
    Ok(PinchReport {
        holds: ratio < threshold,
        gamma,
        alpha: p / (p - 1.0) * big_pow * (1.0 + delta),
        ratio,
        threshold,
    })
}
