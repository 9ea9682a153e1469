use std::sync::Arc;

use gradest_core::estimates::harnack_fields;
use gradest_core::matrix_lemma::{extremal_quadratic, frobenius_sq, jacobi_eigen, supremum_bound};
use gradest_core::nonlinearity::{fde_admissible_range, fde_gamma, pme_pinch};
use gradest_core::solver::step;
use gradest_core::{
    BoundaryCondition, Field, GeometryKind, ModelGeometry, Nonlinearity, SolverConfig, SymMatrix, ValueRange,
};
use proptest::prelude::*;

fn sym_matrix() -> impl Strategy<Value = SymMatrix> {
    (2usize..=8).prop_flat_map(|n| {
        prop::collection::vec(-5.0f64..5.0, n * (n + 1) / 2).prop_filter_map("nonzero", move |upper| {
            let mut entries = vec![0.0; n * n];
            let mut k = 0;
            for i in 0..n {
                for j in i..n {
                    entries[i * n + j] = upper[k];
                    entries[j * n + i] = upper[k];
                    k += 1;
                }
            }
            let a = SymMatrix::new(n, entries).ok()?;
            (frobenius_sq(&a) > 1e-6).then_some(a)
        })
    })
}

proptest! {
    #[test]
    fn potential_derivative_matches_f_prime_over_s(p in 0.05f64..4.0, s in 0.05f64..20.0) {
        let nl = Nonlinearity::power(p).unwrap();
        let h = 1e-4 * s;
        let fd = (nl.g(s + h) - nl.g(s - h)) / (2.0 * h);
        let want = nl.fp(s) / s;
        prop_assert!((fd - want).abs() <= 1e-6 * want.abs());
    }

    #[test]
    fn power_elasticity_is_exact(p in 0.05f64..4.0, s in 1e-3f64..1e3) {
        let nl = Nonlinearity::power(p).unwrap();
        prop_assert_eq!(nl.elasticity(s), p - 1.0);
    }

    #[test]
    fn gamma_sign_tracks_admissibility(n in 1usize..=6, k in 1u32..=19) {
        let p = k as f64 / 20.0;
        let (lo, hi) = fde_admissible_range(n).unwrap();
        prop_assert_eq!(fde_gamma(n, p).is_ok(), p > lo && p < hi);
        if let Ok(g) = fde_gamma(n, p) {
            prop_assert!(g > 0.0);
        }
    }

    #[test]
    fn pinch_is_monotone_in_max(n in 2usize..6, p in 1.05f64..4.0, frac in 0.01f64..1.0,
                                 m in 0.1f64..10.0, spread in 1.0f64..20.0, shrink in 0.0f64..1.0) {
        let delta = frac * 4.0 / (n - 1) as f64;
        let big = pme_pinch(n, p, delta, ValueRange::new(m, m * spread).unwrap()).unwrap();
        let small_max = m + shrink * (m * spread - m);
        let small = pme_pinch(n, p, delta, ValueRange::new(m, small_max).unwrap()).unwrap();
        prop_assert!(!big.holds || small.holds);
        if big.holds {
            prop_assert!(big.gamma > 0.0);
        }
    }

    #[test]
    fn lemma_bound_dominates_every_direction(a_mat in sym_matrix(), a in -3.0f64..3.0, b in -3.0f64..3.0,
                                             raw in prop::collection::vec(-1.0f64..1.0, 8)) {
        let n = a_mat.size();
        let norm: f64 = raw[..n].iter().map(|x| x * x).sum::<f64>().sqrt();
        prop_assume!(norm > 1e-3);
        let v: Vec<f64> = raw[..n].iter().map(|x| x / norm).collect();
        let value = a * a_mat.form(&v) + b * a_mat.trace();
        let ext = extremal_quadratic(&a_mat, a, b).unwrap();
        let tol = 1e-9 * (1.0 + value.abs());
        prop_assert!(value <= ext.max + tol && value >= ext.min - tol);
        prop_assert!(value * value <= supremum_bound(a, b, n) * frobenius_sq(&a_mat) * (1.0 + 1e-12));
    }

    #[test]
    fn eigenpairs_have_small_residual(a_mat in sym_matrix()) {
        let eig = jacobi_eigen(&a_mat);
        let norm = frobenius_sq(&a_mat).sqrt();
        for (lambda, v) in eig.values.iter().zip(&eig.vectors) {
            let av = a_mat.mul_vec(v);
            let res: f64 = av.iter().zip(v).map(|(x, y)| (x - lambda * y).powi(2)).sum::<f64>().sqrt();
            prop_assert!(res <= 1e-10 * norm);
        }
        let sum_sq: f64 = eig.values.iter().map(|l| l * l).sum();
        prop_assert!((sum_sq - frobenius_sq(&a_mat)).abs() <= 1e-10 * frobenius_sq(&a_mat));
    }

    #[test]
    fn laplacian_is_self_adjoint(kind in prop::sample::select(vec![
                                     GeometryKind::Line, GeometryKind::RadialEuclidean,
                                     GeometryKind::RadialHyperbolic, GeometryKind::RadialSpherical]),
                                 f in prop::collection::vec(-1.0f64..1.0, 30),
                                 g in prop::collection::vec(-1.0f64..1.0, 30)) {
        let n = if kind.is_radial() { 3 } else { 1 };
        let geom = ModelGeometry::new(kind, n, 0.3, 2.5, 34).unwrap();
        // supported away from the two end nodes
        let pad = |x: &[f64]| [vec![0.0, 0.0], x.to_vec(), vec![0.0, 0.0]].concat();
        let (f, g) = (pad(&f), pad(&g));
        let (lf, lg) = (geom.laplacian_values(&f), geom.laplacian_values(&g));
        let s = geom.weights();
        let a: f64 = (0..34).map(|i| s[i] * f[i] * lg[i]).sum();
        let b: f64 = (0..34).map(|i| s[i] * g[i] * lf[i]).sum();
        let scale: f64 = (0..34).map(|i| s[i] * (f[i] * lg[i]).abs()).sum::<f64>().max(1e-300);
        prop_assert!((a - b).abs() <= 1e-10 * scale);
    }

    #[test]
    fn constants_are_fixed_points(c in 0.01f64..100.0, p in 0.2f64..3.0, dt in 1e-4f64..1.0) {
        let geom = Arc::new(ModelGeometry::circle(1.0, 24).unwrap());
        let u = Field::constant(geom, c, 0.0);
        let cfg = SolverConfig::new(dt, BoundaryCondition::Periodic);
        let next = step(&u, &Nonlinearity::power(p).unwrap(), &cfg, dt).unwrap();
        prop_assert!(next.values.iter().all(|&v| v == c));
    }

    #[test]
    fn harnack_fields_commute_with_rotation(values in prop::collection::vec(0.5f64..3.0, 32), shift in 0usize..32,
                                            lambda in 0.5f64..2.0) {
        let geom = Arc::new(ModelGeometry::circle(2.0, 32).unwrap());
        let scaled: Vec<f64> = values.iter().map(|v| lambda * v).collect();
        let mut rotated = scaled.clone();
        rotated.rotate_left(shift);
        let nl = Nonlinearity::Power { p: 0.6 };
        let a = harnack_fields(&Field::new(geom.clone(), scaled, 0.0).unwrap(), &nl, 0.0, 1).unwrap();
        let b = harnack_fields(&Field::new(geom, rotated, 0.0).unwrap(), &nl, 0.0, 1).unwrap();
        let mut w = a.w.clone();
        w.rotate_left(shift);
        prop_assert_eq!(w, b.w);
    }
}
