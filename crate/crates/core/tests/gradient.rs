use std::f64::consts::{PI, TAU};

use helfrich::ambient::{rotation_map, spontaneous, AffineMap, AmbientSpec, ScalarField};
use helfrich::curve::{fourier_curve, resample_uniform, DiscreteCurve, Geometry, NodeField};
use helfrich::energy::{energy, euler_lagrange, first_variation_fd, pairing, residual_norms};
use helfrich::verify::{gradient_curve, gradient_specs, smooth_field};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn circle(rho: f64, nodes: usize) -> DiscreteCurve {
    let rows: Vec<Vec<f64>> = (0..nodes)
        .map(|j| {
            let p = TAU * j as f64 / nodes as f64;
            vec![rho * p.cos(), rho * p.sin()]
        })
        .collect();
    DiscreteCurve::from_rows(&rows).unwrap()
}

fn relative_gap(curve: &DiscreteCurve, spec: &AmbientSpec, h: &NodeField, phi: &NodeField) -> f64 {
    let p = pairing(curve, h, phi).unwrap();
    let fd = first_variation_fd(curve, spec, phi, 1e-5).unwrap();
    (p - fd).abs() / (1.0 + fd.abs())
}

#[test]
fn constant_field_circle_energy() {
    for (c0, lambda) in [(0.0, 1.0), (0.7, 0.5), (-1.3, 2.0)] {
        let spec = AmbientSpec::elastic(2, c0, lambda).unwrap();
        let e = energy(&circle(1.0, 512), &spec).unwrap();
        let want = PI * (1.0 + c0 * c0) + TAU * lambda;
        assert!((e.total - want).abs() < 1e-3, "c0 {c0}: {} vs {want}", e.total);
    }
}

#[test]
fn energy_converges_at_second_order() {
    let spec = AmbientSpec::new(AffineMap::identity(2), ScalarField::InverseQuadratic, 1.0).unwrap();
    let fine = fourier_curve(2, 4096, 5, 0.3, 17).unwrap();
    let sub = |n: usize| {
        let rows: Vec<Vec<f64>> = (0..n).map(|i| fine.point(i * 4096 / n).to_vec()).collect();
        energy(&DiscreteCurve::from_rows(&rows).unwrap(), &spec).unwrap().total
    };
    let e: Vec<f64> = [128, 256, 512, 1024].iter().map(|&n| sub(n)).collect();
    let d: Vec<f64> = e.windows(2).map(|w| (w[0] - w[1]).abs()).collect();
    for w in d.windows(2) {
        let ratio = w[0] / w[1];
        assert!((3.5..4.6).contains(&ratio), "differences {d:?}");
    }
}

#[test]
fn elastic_operator_on_circles() {
    for (rho, c0, lambda) in [(0.8, 0.5, 1.0), (1.5, 0.0, 0.3), (2.0, 1.2, 0.1)] {
        let spec = AmbientSpec::elastic(2, c0, lambda).unwrap();
        let curve = circle(rho, 512);
        let h = euler_lagrange(&curve, &spec).unwrap().total;
        let k2 = 1.0 / (rho * rho);
        let scale = 0.5 * (k2 - 2.0 * lambda - c0 * c0);
        for i in 0..curve.len() {
            for d in 0..2 {
                let want = scale * (-curve.point(i)[d] * k2);
                assert!((h.get(i)[d] - want).abs() < 1e-4, "rho {rho}: {} vs {want}", h.get(i)[d]);
            }
        }
    }
}

#[test]
fn tangential_variation_is_second_order_small() {
    let spec = AmbientSpec::new(AffineMap::identity(2), ScalarField::InverseQuadratic, 1.0).unwrap();
    let curve = resample_uniform(&fourier_curve(2, 512, 4, 0.2, 4).unwrap(), 512).unwrap();
    let t = Geometry::new(&curve).unwrap().tangent().clone();
    let e = energy(&curve, &spec).unwrap().total;
    let fd = first_variation_fd(&curve, &spec, &t, 1e-5).unwrap();
    assert!(fd.abs() < 1e-3 * e, "{fd}");
}

#[test]
fn curvature_direction_is_flat_on_a_critical_circle() {
    let spec = AmbientSpec::elastic(2, 0.0, 0.5).unwrap();
    let curve = circle(1.0, 512);
    let k = Geometry::new(&curve).unwrap().curvature().clone();
    assert!(first_variation_fd(&curve, &spec, &k, 1e-5).unwrap().abs() < 1e-4);
    let r = residual_norms(&curve, &spec).unwrap();
    assert!(r.l2 < 1e-4 && r.sup < 1e-4);
}

#[test]
fn residual_ignores_sign() {
    let spec = AmbientSpec::new(AffineMap::translation(&[1.0, 0.0]), ScalarField::Constant { c0: 0.0 }, 1.0).unwrap();
    let curve = circle(0.6, 256);
    let g = Geometry::new(&curve).unwrap();
    let h = euler_lagrange(&curve, &spec).unwrap().total;
    assert_eq!(g.l2_norm(&h), g.l2_norm(&h.scaled(-1.0)));
    assert_eq!(h.sup_norm(), h.scaled(-1.0).sup_norm());
}

#[test]
fn strong_curves_converge_at_second_order() {
    let mut failures = Vec::new();
    for seed in 1..=10u64 {
        let dim = 2 + (seed % 2) as usize;
        let (_, spec) = gradient_specs(dim).unwrap()[(seed % 3) as usize].clone();
        let gap = |n: usize| {
            let curve = gradient_curve(seed, n, 0.3).unwrap();
            let phi = smooth_field(dim, n, 4, 1000 + seed);
            let h = euler_lagrange(&curve, &spec).unwrap().total;
            relative_gap(&curve, &spec, &h, &phi)
        };
        let (g512, g1024) = (gap(512), gap(1024));
        if g512 > 1e-7 && !(3.0..5.0).contains(&(g512 / g1024)) {
            failures.push((seed, g512, g1024));
        }
    }
    assert!(failures.is_empty(), "{failures:?}");
}

#[test]
fn dropping_the_transport_correction_breaks_consistency() {
    // H minus ∇ₛ(⟨c,τ⟩k): only differs from H where ⟨c,τ⟩ varies.
    let spec = AmbientSpec::new(AffineMap::zero(2), ScalarField::InverseQuadratic, 1.0).unwrap();
    let curve = gradient_curve(2, 512, 0.1).unwrap();
    let g = Geometry::new(&curve).unwrap();
    let sp = spontaneous(&curve, &spec).unwrap();
    let h = euler_lagrange(&curve, &spec).unwrap().total;
    let weighted = NodeField::from_fn(2, curve.len(), |i, out| {
        let ct: f64 = sp.c.get(i).iter().zip(g.tangent().get(i)).map(|(a, b)| a * b).sum();
        for d in 0..2 {
            out[d] = ct * g.curvature().get(i)[d];
        }
    });
    let altered = h.sub(&g.normal_derivative(&weighted));
    let phi = smooth_field(2, curve.len(), 4, 77);
    let good = relative_gap(&curve, &spec, &h, &phi);
    let bad = relative_gap(&curve, &spec, &altered, &phi);
    assert!(good < 1e-4, "{good}");
    assert!(bad > 100.0 * good && bad > 1e-3, "good {good}, altered {bad}");
}

fn random_spec(dim: usize) -> impl Strategy<Value = AmbientSpec> {
    (
        proptest::collection::vec(-1.0f64..1.0, dim * dim),
        proptest::collection::vec(-1.0f64..1.0, dim),
        prop_oneof![(-2.0f64..2.0).prop_map(|c0| ScalarField::Constant { c0 }), Just(ScalarField::InverseQuadratic)],
        0.1f64..3.0,
    )
        .prop_map(move |(l, m, f, lambda)| {
            let affine = AffineMap::new(DMatrix::from_row_slice(dim, dim, &l), DVector::from_vec(m)).unwrap();
            AmbientSpec::new(affine, f, lambda).unwrap()
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn gradient_is_normal_and_splits(seed in 0u64..1000, amp in 0.0f64..0.3, spec in random_spec(3)) {
        let curve = resample_uniform(&fourier_curve(3, 128, 4, amp, seed).unwrap(), 128).unwrap();
        let grad = euler_lagrange(&curve, &spec).unwrap();
        let g = Geometry::new(&curve).unwrap();
        let sup = grad.total.sup_norm();
        for i in 0..curve.len() {
            let along: f64 = grad.total.get(i).iter().zip(g.tangent().get(i)).map(|(a, b)| a * b).sum();
            prop_assert!(along.abs() <= 1e-10 * (1.0 + sup));
            for d in 0..3 {
                prop_assert!((grad.total.get(i)[d] + grad.vk.get(i)[d] + grad.vc.get(i)[d]).abs() <= 1e-12 * (1.0 + sup));
            }
        }
    }

    #[test]
    fn zero_field_energy_is_elastic_plus_length(seed in 0u64..1000, amp in 0.0f64..0.3, lambda in 0.01f64..10.0) {
        let curve = fourier_curve(2, 128, 4, amp, seed).unwrap();
        let e = energy(&curve, &AmbientSpec::elastic(2, 0.0, lambda).unwrap()).unwrap();
        let len = helfrich::curve::length(&curve).unwrap();
        prop_assert!((e.total - (e.elastic_only + lambda * len)).abs() <= 1e-12 * e.total.max(1.0));
    }

    #[test]
    fn rotation_specs_have_consistent_gradients(seed in 0u64..50, theta in 0.0f64..TAU) {
        let spec = AmbientSpec::new(rotation_map(theta, (0, 1), 2).unwrap(), ScalarField::Constant { c0: 0.6 }, 1.0).unwrap();
        let curve = gradient_curve(2 * seed, 512, 0.1).unwrap();
        let phi = smooth_field(2, 512, 4, seed + 9000);
        let h = euler_lagrange(&curve, &spec).unwrap().total;
        prop_assert!(relative_gap(&curve, &spec, &h, &phi) <= 1e-4);
    }
}
