//! Extremal quadratic forms of `aA + b tr(A) I` over symmetric matrices.
//!
//! Over unit-Frobenius symmetric `A` and unit vectors `v`, the squared form
//! `[(aA + b tr(A) I)(v, v)]²` is bounded by `(a+b)² + (n-1)b²`, which controls
//! the Hessian terms of the Harnack-quantity inequality. This module computes the
//! bound, a matrix attaining it, and a seeded random search that can only approach it.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::error::{Error, Result};

pub const MIN_SIZE: usize = 2;
pub const MAX_SIZE: usize = 8;

/// Dense symmetric matrix, row-major, `2 <= n <= 8`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SymMatrix {
    n: usize,
    entries: Vec<f64>,
}

impl SymMatrix {
    pub fn new(n: usize, entries: Vec<f64>) -> Result<Self> {
        check_size(n)?;
        if entries.len() != n * n {
            return Err(Error::Shape(format!("{} entries for a {n}x{n} matrix", entries.len())));
        }
        for i in 0..n {
            for j in 0..i {
                let (a, b) = (entries[i * n + j], entries[j * n + i]);
                if a != b {
                    return Err(Error::Parameter(format!(
                        "matrix not symmetric at ({i}, {j}): {a} vs {b}"
                    )));
                }
            }
        }
        Ok(SymMatrix { n, entries })
    }

    pub fn identity(n: usize) -> Result<Self> {
        Self::diagonal(&vec![1.0; n])
    }

    pub fn diagonal(diag: &[f64]) -> Result<Self> {
        let n = diag.len();
        check_size(n)?;
        let mut entries = vec![0.0; n * n];
        for (i, &d) in diag.iter().enumerate() {
            entries[i * n + i] = d;
        }
        Ok(SymMatrix { n, entries })
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.n + j]
    }

    pub fn trace(&self) -> f64 {
        (0..self.n).map(|i| self.get(i, i)).sum()
    }

    pub fn is_zero(&self) -> bool {
        self.entries.iter().all(|&x| x == 0.0)
    }

    /// Quadratic form `A(v, v)`.
    pub fn form(&self, v: &[f64]) -> f64 {
        let n = self.n;
        let mut acc = 0.0;
        for i in 0..n {
            let row: f64 = (0..n).map(|j| self.entries[i * n + j] * v[j]).sum();
            acc += v[i] * row;
        }
        acc
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        let n = self.n;
        (0..n)
            .map(|i| (0..n).map(|j| self.entries[i * n + j] * v[j]).sum())
            .collect()
    }

    fn scaled(&self, factor: f64) -> SymMatrix {
        SymMatrix {
            n: self.n,
            entries: self.entries.iter().map(|x| x * factor).collect(),
        }
    }
}

fn check_size(n: usize) -> Result<()> {
    if (MIN_SIZE..=MAX_SIZE).contains(&n) {
        Ok(())
    } else {
        Err(Error::Domain {
            n,
            expected: "2 <= n <= 8",
        })
    }
}

/// Eigen-decomposition of a symmetric matrix.
#[derive(Debug, Clone)]
pub struct Eigen {
    pub values: Vec<f64>,
    /// `vectors[k]` is the unit eigenvector for `values[k]`.
    pub vectors: Vec<Vec<f64>>,
}

/// Cyclic Jacobi rotations. Sweeps until the off-diagonal mass is negligible
/// relative to the Frobenius norm.
pub fn jacobi_eigen(a: &SymMatrix) -> Eigen {
    let n = a.n;
    let mut m = a.entries.clone();
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    let norm_sq: f64 = m.iter().map(|x| x * x).sum();
    let threshold = (f64::EPSILON * f64::EPSILON) * norm_sq;

    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[i * n + j] * m[i * n + j])
            .sum();
        if off <= threshold {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let app = m[p * n + p];
                let aqq = m[q * n + q];
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[k * n + p];
                    let mkq = m[k * n + q];
                    m[k * n + p] = c * mkp - s * mkq;
                    m[k * n + q] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[p * n + k];
                    let mqk = m[q * n + k];
                    m[p * n + k] = c * mpk - s * mqk;
                    m[q * n + k] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }

    Eigen {
        values: (0..n).map(|i| m[i * n + i]).collect(),
        vectors: (0..n).map(|k| (0..n).map(|i| v[i * n + k]).collect()).collect(),
    }
}

/// `|A|² = Σ a_ij²`.
pub fn frobenius_sq(a: &SymMatrix) -> f64 {
    a.entries.iter().map(|x| x * x).sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Extremal {
    pub max: f64,
    pub min: f64,
}

/// Max and min of `(aA + b tr(A) I)(v, v)` over unit `v`: the extreme values of
/// `a λ_i + b Σ λ_k`.
pub fn extremal_quadratic(a_mat: &SymMatrix, a: f64, b: f64) -> Result<Extremal> {
    if a_mat.is_zero() {
        return Err(Error::Degenerate("zero matrix".into()));
    }
    let eig = jacobi_eigen(a_mat);
    let shift = b * eig.values.iter().sum::<f64>();
    let shifted = eig.values.iter().map(|l| a * l + shift);
    let (min, max) = shifted.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| (lo.min(x), hi.max(x)));
    Ok(Extremal { max, min })
}

/// `(a+b)² + (n-1)b²`, for `n >= 1`.
pub fn supremum_bound(a: f64, b: f64, n: usize) -> f64 {
    (a + b).powi(2) + (n as f64 - 1.0) * b * b
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Witness {
    pub matrix: SymMatrix,
    pub v: Vec<f64>,
    /// `(aA + b tr(A) I)(v, v)`; its square attains [`supremum_bound`].
    pub value: f64,
}

/// Unit-Frobenius diagonal matrix with spectrum proportional to `(a+b, b, ..., b)`
/// together with `v = e_1`.
pub fn witness(a: f64, b: f64, n: usize) -> Result<Witness> {
    check_size(n)?;
    if a == 0.0 && b == 0.0 {
        return Err(Error::Degenerate("(a, b) = (0, 0)".into()));
    }
    let norm = supremum_bound(a, b, n).sqrt();
    let mut diag = vec![b / norm; n];
    diag[0] = (a + b) / norm;
    let matrix = SymMatrix::diagonal(&diag)?;
    let mut v = vec![0.0; n];
    v[0] = 1.0;
    let value = a * matrix.form(&v) + b * matrix.trace();
    Ok(Witness { matrix, v, value })
}

fn random_symmetric(n: usize, rng: &mut ChaCha8Rng) -> SymMatrix {
    let mut entries = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let x: f64 = StandardNormal.sample(rng);
            let x = if i == j { x } else { x * std::f64::consts::FRAC_1_SQRT_2 };
            entries[i * n + j] = x;
            entries[j * n + i] = x;
        }
    }
    let a = SymMatrix { n, entries };
    let norm = frobenius_sq(&a).sqrt();
    a.scaled(1.0 / norm)
}

fn random_unit(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let v: Vec<f64> = (0..n).map(|_| StandardNormal.sample(rng)).collect();
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.into_iter().map(|x| x / norm).collect()
}

/// Empirical maximum of `[(aA + b tr(A) I)(v, v)/|A|]²` over `samples` random pairs:
/// `A` from the Gaussian orthogonal ensemble scaled to unit Frobenius norm, `v`
/// uniform on the sphere. Deterministic for a given seed.
pub fn bruteforce_sup(a: f64, b: f64, n: usize, samples: usize, seed: u64) -> Result<f64> {
    check_size(n)?;
    if samples == 0 {
        return Err(Error::Parameter("samples must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best = 0.0_f64;
    for _ in 0..samples {
        let mat = random_symmetric(n, &mut rng);
        let v = random_unit(n, &mut rng);
        let value = a * mat.form(&v) + b * mat.trace();
        best = best.max(value * value);
    }
    Ok(best)
}
