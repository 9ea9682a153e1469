//! Model geometries with known Ricci lower bounds.
//!
//! Flat 1D models (segment, circle) and radially symmetric constant-curvature
//! models in dimension `n >= 2`. Radial data reduces the Laplace–Beltrami operator
//! to `Δf = s⁻¹ (s f')'` with the volume weight `s(r)`.

use std::io::{Read, Write};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeometryKind {
    Line,
    Circle,
    RadialEuclidean,
    RadialHyperbolic,
    RadialSpherical,
}

impl GeometryKind {
    pub fn is_radial(self) -> bool {
        matches!(
            self,
            GeometryKind::RadialEuclidean | GeometryKind::RadialHyperbolic | GeometryKind::RadialSpherical
        )
    }

    pub fn is_periodic(self) -> bool {
        self == GeometryKind::Circle
    }
}

/// A uniform grid on one of the model geometries.
///
/// For the circle the domain `[r_lo, r_hi)` is one period of length `r_hi - r_lo`
/// and carries `points` distinct nodes; the other kinds include both endpoints.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelGeometry {
    kind: GeometryKind,
    n: usize,
    r_lo: f64,
    r_hi: f64,
    points: usize,
    h: f64,
    #[serde(skip)]
    nodes: Vec<f64>,
    #[serde(skip)]
    weights: Vec<f64>,
    // s at r_{i+1/2}
    #[serde(skip)]
    half_weights: Vec<f64>,
}

impl ModelGeometry {
    pub fn new(kind: GeometryKind, n: usize, r_lo: f64, r_hi: f64, points: usize) -> Result<Self> {
        if kind.is_radial() {
            if n < 2 {
                return Err(Error::Domain {
                    n,
                    expected: "n >= 2 for radial models",
                });
            }
            if !(r_lo > 0.0) {
                return Err(Error::Parameter(format!("radial models need r_lo > 0, got {r_lo}")));
            }
        } else if n != 1 {
            return Err(Error::Domain {
                n,
                expected: "n = 1 for line and circle",
            });
        }
        if kind == GeometryKind::RadialSpherical && r_hi >= std::f64::consts::PI {
            return Err(Error::Parameter(format!("spherical model needs r_hi < π, got {r_hi}")));
        }
        if !(r_lo.is_finite() && r_hi.is_finite() && r_hi > r_lo) {
            return Err(Error::Parameter(format!("empty domain [{r_lo}, {r_hi}]")));
        }
        if points < 3 {
            return Err(Error::Parameter(format!("need at least 3 grid points, got {points}")));
        }
        let h = if kind.is_periodic() {
            (r_hi - r_lo) / points as f64
        } else {
            (r_hi - r_lo) / (points - 1) as f64
        };
        let mut geom = ModelGeometry {
            kind,
            n,
            r_lo,
            r_hi,
            points,
            h,
            nodes: Vec::new(),
            weights: Vec::new(),
            half_weights: Vec::new(),
        };
        geom.nodes = (0..points).map(|i| r_lo + i as f64 * h).collect();
        if !kind.is_periodic() {
            geom.nodes[points - 1] = r_hi;
        }
        geom.weights = geom.nodes.iter().map(|&r| geom.weight(r)).collect();
        geom.half_weights = geom.nodes.iter().map(|&r| geom.weight(r + 0.5 * h)).collect();
        Ok(geom)
    }

    pub fn line(r_lo: f64, r_hi: f64, points: usize) -> Result<Self> {
        Self::new(GeometryKind::Line, 1, r_lo, r_hi, points)
    }

    pub fn circle(circumference: f64, points: usize) -> Result<Self> {
        Self::new(GeometryKind::Circle, 1, 0.0, circumference, points)
    }

    pub fn kind(&self) -> GeometryKind {
        self.kind
    }

    pub fn dimension(&self) -> usize {
        self.n
    }

    pub fn points(&self) -> usize {
        self.points
    }

    pub fn spacing(&self) -> f64 {
        self.h
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.r_lo, self.r_hi)
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// Volume weights `s(r_i)`.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `s(r) = 1, r^(n-1), sinh^(n-1) r, sin^(n-1) r`.
    pub fn weight(&self, r: f64) -> f64 {
        let e = self.n as i32 - 1;
        match self.kind {
            GeometryKind::Line | GeometryKind::Circle => 1.0,
            GeometryKind::RadialEuclidean => r.powi(e),
            GeometryKind::RadialHyperbolic => r.sinh().powi(e),
            GeometryKind::RadialSpherical => r.sin().powi(e),
        }
    }

    /// `k` in `Ric >= -k`: `n - 1` on the unit hyperbolic model, zero elsewhere.
    pub fn ricci_lower_bound(&self) -> f64 {
        match self.kind {
            GeometryKind::RadialHyperbolic => (self.n - 1) as f64,
            _ => 0.0,
        }
    }

    /// Circumference of the circle model.
    pub fn period(&self) -> Option<f64> {
        self.kind.is_periodic().then_some(self.r_hi - self.r_lo)
    }

    /// Neighbour indices of node `i`, wrapping on the circle.
    pub fn neighbours(&self, i: usize) -> (Option<usize>, Option<usize>) {
        let last = self.points - 1;
        if self.kind.is_periodic() {
            (
                Some(if i == 0 { last } else { i - 1 }),
                Some(if i == last { 0 } else { i + 1 }),
            )
        } else {
            ((i > 0).then(|| i - 1), (i < last).then(|| i + 1))
        }
    }

    /// Coefficients `(c₋, c₊)` with `(Δf)_i = c₋ (f_{i-1} - f_i) + c₊ (f_{i+1} - f_i)`.
    ///
    /// Non-periodic ends use a zero-flux half cell.
    pub fn stencil(&self, i: usize) -> (f64, f64) {
        let h2 = self.h * self.h;
        let s = self.weights[i];
        let last = self.points - 1;
        if self.kind.is_periodic() {
            let left = if i == 0 {
                self.weight(self.r_lo - 0.5 * self.h)
            } else {
                self.half_weights[i - 1]
            };
            return (left / (s * h2), self.half_weights[i] / (s * h2));
        }
        if i == 0 {
            (0.0, 2.0 * self.half_weights[0] / (s * h2))
        } else if i == last {
            (2.0 * self.half_weights[last - 1] / (s * h2), 0.0)
        } else {
            (self.half_weights[i - 1] / (s * h2), self.half_weights[i] / (s * h2))
        }
    }

    /// Whether node `i` is an interior node (every node on the circle).
    pub fn is_interior(&self, i: usize) -> bool {
        self.kind.is_periodic() || (i > 0 && i + 1 < self.points)
    }

    pub fn interior_nodes(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.points).filter(move |&i| self.is_interior(i))
    }

    /// Divergence-form Laplace–Beltrami operator on raw node values.
    pub fn laplacian_values(&self, f: &[f64]) -> Vec<f64> {
        (0..self.points)
            .map(|i| {
                let (cm, cp) = self.stencil(i);
                let (l, r) = self.neighbours(i);
                let left = l.map_or(0.0, |j| cm * (f[j] - f[i]));
                let right = r.map_or(0.0, |j| cp * (f[j] - f[i]));
                left + right
            })
            .collect()
    }

    /// Signed derivative `∂_r f`: centred in the interior, second-order one-sided at ends.
    pub fn derivative_values(&self, f: &[f64]) -> Vec<f64> {
        let n = self.points;
        let h = self.h;
        (0..n)
            .map(|i| match self.neighbours(i) {
                (Some(l), Some(r)) => (f[r] - f[l]) / (2.0 * h),
                (None, _) => (3.0 * (f[1] - f[0]) - (f[2] - f[1])) / (2.0 * h),
                (_, None) => (3.0 * (f[n - 1] - f[n - 2]) - (f[n - 2] - f[n - 3])) / (2.0 * h),
            })
            .collect()
    }

    /// Geodesic distance between two grid coordinates (arc distance on the circle).
    pub fn distance(&self, a: f64, b: f64) -> f64 {
        let d = (a - b).abs();
        match self.period() {
            Some(l) => {
                let d = d % l;
                d.min(l - d)
            }
            None => d,
        }
    }

    /// Index of the node closest to coordinate `x`.
    pub fn nearest_node(&self, x: f64) -> usize {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (i, &r) in self.nodes.iter().enumerate() {
            let d = self.distance(r, x);
            if d < best_d {
                best = i;
                best_d = d;
            }
        }
        best
    }

    /// Nodes within distance `radius` of node `x0`, clipped to the grid.
    pub fn geodesic_ball(&self, x0: usize, radius: f64) -> Result<Vec<usize>> {
        if x0 >= self.points {
            return Err(Error::Shape(format!("node {x0} outside grid of {}", self.points)));
        }
        if !(radius > 0.0) {
            return Err(Error::Window(format!("ball radius must be positive, got {radius}")));
        }
        let centre = self.nodes[x0];
        let slack = 1e-9 * self.h;
        let ball: Vec<usize> = (0..self.points)
            .filter(|&i| self.distance(self.nodes[i], centre) <= radius + slack)
            .collect();
        if ball.is_empty() {
            return Err(Error::Window(format!("empty ball of radius {radius} at node {x0}")));
        }
        Ok(ball)
    }

    /// Li–Yau type cutoff centred at node `x0` on the cube `B(x0, R) x [t0 - T, t0]`.
    pub fn cutoff_psi(&self, x0: usize, radius: f64, t0: f64, duration: f64) -> Result<Cutoff> {
        if x0 >= self.points {
            return Err(Error::Shape(format!("node {x0} outside grid of {}", self.points)));
        }
        if !(radius > 0.0 && duration > 0.0) {
            return Err(Error::Window(format!(
                "cutoff needs R > 0 and T > 0, got R = {radius}, T = {duration}"
            )));
        }
        Ok(Cutoff {
            centre: self.nodes[x0],
            radius,
            t0,
            duration,
        })
    }
}

/// A scalar field on a geometry's grid at one time.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    pub geometry: Arc<ModelGeometry>,
    pub values: Vec<f64>,
    pub time: f64,
}

impl Field {
    pub fn new(geometry: Arc<ModelGeometry>, values: Vec<f64>, time: f64) -> Result<Self> {
        if values.len() != geometry.points() {
            return Err(Error::Shape(format!(
                "{} values for a grid of {} points",
                values.len(),
                geometry.points()
            )));
        }
        Ok(Field { geometry, values, time })
    }

    pub fn from_fn(geometry: Arc<ModelGeometry>, time: f64, f: impl Fn(f64) -> f64) -> Self {
        let values = geometry.nodes().iter().map(|&r| f(r)).collect();
        Field { geometry, values, time }
    }

    pub fn constant(geometry: Arc<ModelGeometry>, value: f64, time: f64) -> Self {
        let values = vec![value; geometry.points()];
        Field { geometry, values, time }
    }

    fn check(&self) -> Result<()> {
        if self.values.len() != self.geometry.points() {
            return Err(Error::Shape(format!(
                "field of {} values on a grid of {} points",
                self.values.len(),
                self.geometry.points()
            )));
        }
        Ok(())
    }

    pub fn same_grid(&self, other: &Field) -> bool {
        Arc::ptr_eq(&self.geometry, &other.geometry) || self.geometry == other.geometry
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Weighted mass `Σ s_i u_i`.
    pub fn mass(&self) -> f64 {
        self.values
            .iter()
            .zip(self.geometry.weights())
            .map(|(u, s)| u * s)
            .sum()
    }

    /// Write `r,value` rows with 17 significant digits.
    pub fn write_csv<W: Write>(&self, out: W, value_header: &str) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["r", value_header])?;
        for (r, v) in self.geometry.nodes().iter().zip(&self.values) {
            w.write_record([format!("{r:.16e}"), format!("{v:.16e}")])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Read a two-column CSV written by [`Field::write_csv`] onto `geometry`.
    pub fn read_csv<R: Read>(geometry: Arc<ModelGeometry>, input: R, time: f64) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(input);
        let mut values = Vec::new();
        for (row, rec) in rdr.records().enumerate() {
            let rec = rec?;
            if rec.len() != 2 {
                return Err(Error::Io(format!("row {row}: expected 2 columns, got {}", rec.len())));
            }
            let r: f64 = rec[0]
                .trim()
                .parse()
                .map_err(|e| Error::Io(format!("row {row}: {e}")))?;
            let v: f64 = rec[1]
                .trim()
                .parse()
                .map_err(|e| Error::Io(format!("row {row}: {e}")))?;
            if let Some(&node) = geometry.nodes().get(row) {
                if (node - r).abs() > 1e-9 * geometry.spacing().max(1.0) {
                    return Err(Error::Shape(format!("row {row}: r = {r} does not match node {node}")));
                }
            }
            values.push(v);
        }
        Field::new(geometry, values, time)
    }
}

/// `Δ_h f` on the field's grid.
pub fn laplace_beltrami(f: &Field) -> Result<Field> {
    f.check()?;
    Ok(Field {
        geometry: f.geometry.clone(),
        values: f.geometry.laplacian_values(&f.values),
        time: f.time,
    })
}

/// `|∂_r f|`.
pub fn gradient_norm(f: &Field) -> Result<Field> {
    f.check()?;
    let values = f
        .geometry
        .derivative_values(&f.values)
        .into_iter()
        .map(f64::abs)
        .collect();
    Ok(Field {
        geometry: f.geometry.clone(),
        values,
        time: f.time,
    })
}

// C² quintic step: 0 at 0, 1 at 1, vanishing first and second derivatives at both ends.
fn smoothstep(y: f64) -> (f64, f64, f64) {
    if y <= 0.0 {
        (0.0, 0.0, 0.0)
    } else if y >= 1.0 {
        (1.0, 0.0, 0.0)
    } else {
        let y2 = y * y;
        (
            y2 * y * (10.0 - 15.0 * y + 6.0 * y2),
            30.0 * y2 * (1.0 - y) * (1.0 - y),
            60.0 * y * (1.0 - y) * (1.0 - 2.0 * y),
        )
    }
}

// Spatial profile: 1 on [0, 1/2], 0 on [1, ∞), the square of a reversed quintic step
// in between. Returns (χ, χ', χ'') in the scaled variable x = d/R.
fn spatial_profile(x: f64) -> (f64, f64, f64) {
    let y = 2.0 * x - 1.0;
    let (s, ds, dds) = smoothstep(y);
    let q = 1.0 - s;
    let dq = -2.0 * ds;
    let ddq = -4.0 * dds;
    (q * q, 2.0 * q * dq, 2.0 * (dq * dq + q * ddq))
}

// Temporal profile: 1 on [0, 1/2], 0 on [1, ∞).
fn temporal_profile(y: f64) -> (f64, f64) {
    let (s, ds, _) = smoothstep(2.0 * y - 1.0);
    (1.0 - s, -2.0 * ds)
}

/// Space-time cutoff `Ψ(r, t) = χ(d(r, x0)/R) η((t0 - t)/T)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Cutoff {
    pub centre: f64,
    pub radius: f64,
    pub t0: f64,
    pub duration: f64,
}

/// Sample constants of the cutoff's derivative bounds, scaled so that bounded
/// values are independent of `R` and `T`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CutoffConstants {
    /// `R · max |∂_r Ψ| / Ψ^{1/2}`.
    pub c_first: f64,
    /// `R² · max |∂²_r Ψ| / Ψ^{1/2}`.
    pub c_second: f64,
    /// `T² · max |∂_t Ψ|² / Ψ`.
    pub c_time: f64,
}

impl Cutoff {
    /// `(Ψ, ∂_r Ψ, ∂²_r Ψ, ∂_t Ψ)` at distance `d` from the centre and time `t`.
    pub fn eval_distance(&self, d: f64, t: f64) -> (f64, f64, f64, f64) {
        let (chi, dchi, ddchi) = spatial_profile(d / self.radius);
        let tau = (self.t0 - t) / self.duration;
        let (eta, deta) = if tau < 0.0 { (0.0, 0.0) } else { temporal_profile(tau) };
        (
            chi * eta,
            dchi / self.radius * eta,
            ddchi / (self.radius * self.radius) * eta,
            -chi * deta / self.duration,
        )
    }

    pub fn eval(&self, geom: &ModelGeometry, r: f64, t: f64) -> f64 {
        self.eval_distance(geom.distance(r, self.centre), t).0
    }

    /// Ψ sampled on the grid at each time; the window must lie inside `times`.
    pub fn sample(&self, geom: &Arc<ModelGeometry>, times: &[f64]) -> Result<Vec<Field>> {
        let (first, last) = match (times.first(), times.last()) {
            (Some(&a), Some(&b)) => (a, b),
            _ => return Err(Error::Window("no snapshot times".into())),
        };
        let tol = 1e-12 * (1.0 + self.t0.abs());
        if self.t0 - self.duration < first - tol || self.t0 > last + tol {
            return Err(Error::Window(format!(
                "cutoff window [{}, {}] exceeds the time range [{first}, {last}]",
                self.t0 - self.duration,
                self.t0
            )));
        }
        Ok(times
            .iter()
            .map(|&t| Field::from_fn(geom.clone(), t, |r| self.eval(geom, r, t)))
            .collect())
    }

    /// Derivative-to-power constants sampled on the grid over `times`.
    pub fn constants(&self, geom: &ModelGeometry, times: &[f64]) -> CutoffConstants {
        let mut out = CutoffConstants {
            c_first: 0.0,
            c_second: 0.0,
            c_time: 0.0,
        };
        for &t in times {
            for &r in geom.nodes() {
                let (psi, dr, drr, dt) = self.eval_distance(geom.distance(r, self.centre), t);
                if psi <= 0.0 {
                    continue;
                }
                let root = psi.sqrt();
                out.c_first = out.c_first.max(dr.abs() / root * self.radius);
                out.c_second = out.c_second.max(drr.abs() / root * self.radius * self.radius);
                out.c_time = out.c_time.max(dt * dt / psi * self.duration * self.duration);
            }
        }
        out
    }
}
