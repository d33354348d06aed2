use std::f64::consts::FRAC_PI_2;

use helfrich::ambient::{
    operator_norm, rotation_map, spontaneous, validate_affine_assumption, AffineMap, AmbientSpec, ScalarField,
};
use helfrich::curve::{fourier_curve, tangent};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

/// Largest singular value by one-sided Jacobi rotations, used as an oracle
/// independent of the power iteration under test.
fn jacobi_sigma_max(a: &DMatrix<f64>) -> f64 {
    let mut u = a.clone();
    let n = u.ncols();
    for _sweep in 0..100 {
        let mut off: f64 = 0.0;
        for p in 0..n {
            for q in p + 1..n {
                let alpha: f64 = u.column(p).norm_squared();
                let beta: f64 = u.column(q).norm_squared();
                let gamma: f64 = u.column(p).dot(&u.column(q));
                off = off.max(gamma.abs() / (alpha * beta).sqrt().max(1e-300));
                if gamma.abs() < 1e-300 {
                    continue;
                }
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let t = if zeta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for r in 0..u.nrows() {
                    let (up, uq) = (u[(r, p)], u[(r, q)]);
                    u[(r, p)] = c * up - s * uq;
                    u[(r, q)] = s * up + c * uq;
                }
            }
        }
        if off < 1e-15 {
            break;
        }
    }
    (0..n).map(|j| u.column(j).norm()).fold(0.0, f64::max)
}

fn matrix(n: usize) -> impl Strategy<Value = DMatrix<f64>> {
    proptest::collection::vec(-3.0f64..3.0, n * n).prop_map(move |v| DMatrix::from_row_slice(n, n, &v))
}

#[test]
fn small_operator_norms() {
    assert!((operator_norm(&DMatrix::identity(3, 3)) - 1.0).abs() < 1e-12);
    assert!((operator_norm(&DMatrix::from_diagonal(&DVector::from_vec(vec![3.0, 4.0]))) - 4.0).abs() < 1e-10);
    assert_eq!(operator_norm(&DMatrix::zeros(2, 2)), 0.0);
}

#[test]
fn affine_assumption_verdicts() {
    let v = validate_affine_assumption(&(-DMatrix::identity(2, 2)), 1.0);
    assert!(!v.psd && v.norm_ok && v.valid);
    let v = validate_affine_assumption(&(-2.0 * DMatrix::identity(2, 2)), 1.0);
    assert!(!v.psd && !v.norm_ok && !v.valid);
}

#[test]
fn inverse_quadratic_is_one_half_on_the_unit_circle() {
    let rows: Vec<Vec<f64>> = (0..64).map(|i| {
        let p = std::f64::consts::TAU * i as f64 / 64.0;
        vec![p.cos(), p.sin()]
    }).collect();
    let curve = helfrich::curve::DiscreteCurve::from_rows(&rows).unwrap();
    let spec = AmbientSpec::new(AffineMap::zero(2), ScalarField::InverseQuadratic, 1.0).unwrap();
    let sp = spontaneous(&curve, &spec).unwrap();
    assert!(sp.fhat.iter().all(|f| (f - 0.5).abs() < 1e-15));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn operator_norm_matches_jacobi_svd(l in matrix(3)) {
        let want = jacobi_sigma_max(&l);
        prop_assert!((operator_norm(&l) - want).abs() <= 1e-8 * want.max(1.0), "{} vs {}", operator_norm(&l), want);
    }

    #[test]
    fn operator_norm_is_absolutely_homogeneous(l in matrix(3), c in -5.0f64..5.0) {
        let lhs = operator_norm(&(c * &l));
        let rhs = c.abs() * operator_norm(&l);
        prop_assert!((lhs - rhs).abs() <= 1e-9 * rhs.max(1.0));
    }

    #[test]
    fn zero_map_is_always_admissible(lambda in 1e-6f64..1e6) {
        prop_assert!(validate_affine_assumption(&DMatrix::zeros(3, 3), lambda).valid);
    }

    #[test]
    fn spontaneous_is_linear_in_the_affine_map(
        l1 in matrix(2), l2 in matrix(2),
        m1 in proptest::array::uniform2(-2.0f64..2.0), m2 in proptest::array::uniform2(-2.0f64..2.0),
        a in -2.0f64..2.0, b in -2.0f64..2.0, seed in 0u64..100,
    ) {
        let curve = fourier_curve(2, 64, 3, 0.2, seed).unwrap();
        let t = tangent(&curve).unwrap();
        let f = ScalarField::InverseQuadratic;
        let field = |l: DMatrix<f64>, m: [f64; 2]| {
            let spec = AmbientSpec::new(AffineMap::new(l, DVector::from_column_slice(&m)).unwrap(), f.clone(), 1.0).unwrap();
            spontaneous(&curve, &spec).unwrap()
        };
        let s1 = field(l1.clone(), m1);
        let s2 = field(l2.clone(), m2);
        let mix = field(a * l1 + b * l2, [a * m1[0] + b * m2[0], a * m1[1] + b * m2[1]]);
        for i in 0..curve.len() {
            for d in 0..2 {
                let want = a * s1.cvec.get(i)[d] + b * s2.cvec.get(i)[d];
                prop_assert!((mix.cvec.get(i)[d] - want).abs() < 1e-12 * (1.0 + want.abs()));
                // c − f̂τ is the affine part and must be linear too.
                let strip = |s: &helfrich::ambient::Spontaneous| s.c.get(i)[d] - s.fhat[i] * t.get(i)[d];
                prop_assert!((strip(&mix) - (a * strip(&s1) + b * strip(&s2))).abs() < 1e-11);
            }
        }
    }

    #[test]
    fn scalar_field_gradients_pass_taylor_check(
        x in proptest::collection::vec(-10.0f64..10.0, 3),
        dir in proptest::collection::vec(-1.0f64..1.0, 3),
        c0 in -3.0f64..3.0,
    ) {
        let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        let x: Vec<f64> = if norm > 10.0 { x.iter().map(|v| v * 10.0 / norm).collect() } else { x };
        let dn = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
        prop_assume!(dn > 1e-3);
        let e: Vec<f64> = dir.iter().map(|v| v / dn).collect();
        let eps = 1e-5;
        for f in [ScalarField::Constant { c0 }, ScalarField::InverseQuadratic] {
            let mut g = vec![0.0; 3];
            f.gradient(&x, &mut g);
            let shifted: Vec<f64> = x.iter().zip(&e).map(|(a, b)| a + eps * b).collect();
            let df_e: f64 = g.iter().zip(&e).map(|(a, b)| a * b).sum();
            let defect = (f.value(&shifted) - f.value(&x) - eps * df_e).abs();
            prop_assert!(defect <= f.bounds()[2] * eps * eps / 2.0 + 1e-12, "{:?}: {}", f, defect);
        }
    }

    #[test]
    fn rotations_are_orthogonal_on_their_plane(theta in -10.0f64..10.0) {
        let r = rotation_map(theta, (0, 1), 3).unwrap();
        let block = r.l.view((0, 0), (2, 2)).into_owned();
        let gram = block.transpose() * &block;
        prop_assert!((gram - DMatrix::identity(2, 2)).abs().max() < 1e-14);
        prop_assert!(r.l.row(2).iter().chain(r.l.column(2).iter()).all(|&v| v == 0.0));
    }
}

#[test]
fn quarter_turn_sends_first_axis_to_second() {
    let r = rotation_map(FRAC_PI_2, (0, 1), 2).unwrap();
    let mut out = [0.0; 2];
    r.apply(&[1.0, 0.0], &mut out);
    assert!((out[0]).abs() < 1e-15 && (out[1] - 1.0).abs() < 1e-15);
    let id = rotation_map(0.0, (0, 1), 2).unwrap();
    assert_eq!(id.l, DMatrix::identity(2, 2));
}
