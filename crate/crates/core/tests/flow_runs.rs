use std::f64::consts::TAU;

use helfrich::ambient::{AffineMap, AmbientSpec, ScalarField};
use helfrich::curve::{fourier_curve, resample_uniform, DiscreteCurve};
use helfrich::flow::{detect_circle, run, step, FlowConfig, FlowState, Integrator, Outcome};
use helfrich::stationary::circle_builder;
use helfrich::verify::{case_i_run, lifted_circle};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn config(dt: f64, t_max: f64) -> FlowConfig {
    FlowConfig { dt, t_max, record_every: 10, residual_tol: 1e-9, ..FlowConfig::default() }
}

fn mean_radius(curve: &DiscreteCurve) -> f64 {
    (0..curve.len()).map(|i| curve.point(i).iter().map(|x| x * x).sum::<f64>().sqrt()).sum::<f64>() / curve.len() as f64
}

#[test]
fn shrinking_circle_settles_at_unit_radius() {
    let result = case_i_run(128).unwrap();
    assert_eq!(result.outcome, Outcome::Converged);
    let fit = detect_circle(&result.state.curve);
    assert!(fit.is_circle && (fit.radius - 1.0).abs() < 1e-3, "{fit:?}");
}

#[test]
fn critical_circle_barely_moves_in_one_step() {
    let spec = AmbientSpec::elastic(2, 0.0, 0.5).unwrap();
    let dt = 1e-3;
    for nodes in [64, 128] {
        let curve = circle_builder(1.0, &[0.0, 0.0], (0, 1), 2, nodes).unwrap();
        let next = step(&FlowState::new(curve.clone()), &spec, &config(dt, 1.0)).unwrap();
        let moved = curve.points().iter().zip(next.curve.points()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let h = TAU / nodes as f64;
        assert!(moved <= h * h * dt, "N={nodes}: moved {moved:e}");
    }
}

#[test]
fn explicit_and_implicit_integrators_agree() {
    let spec = AmbientSpec::elastic(2, 0.0, 0.5).unwrap();
    let curve = resample_uniform(&fourier_curve(2, 32, 3, 0.15, 6).unwrap(), 32).unwrap();
    let t_max = 0.2;
    let imex = run(&curve, &spec, &config(2e-5, t_max)).unwrap();
    let rk4 = run(&curve, &spec, &FlowConfig { integrator: Integrator::ExplicitRk4, ..config(1.0, t_max) }).unwrap();
    assert!((imex.state.t - rk4.state.t).abs() < 1e-3);
    let (ei, er) = (imex.diagnostics.records.last().unwrap().energy.total, rk4.diagnostics.records.last().unwrap().energy.total);
    assert!((ei - er).abs() < 1e-3 * er, "imex {ei}, rk4 {er}");
    assert!((mean_radius(&imex.state.curve) - mean_radius(&rk4.state.curve)).abs() < 1e-3);
}

#[test]
fn energy_decreases_from_a_wiggly_start() {
    let spec = AmbientSpec::new(AffineMap::identity(2), ScalarField::Constant { c0: 0.3 }, 1.5).unwrap();
    let curve = resample_uniform(&fourier_curve(2, 128, 4, 0.3, 12).unwrap(), 128).unwrap();
    let result = run(&curve, &spec, &config(1e-3, 0.5)).unwrap();
    assert!(result.diagnostics.max_energy_increase <= 1e-10, "{}", result.diagnostics.max_energy_increase);
    let first = result.diagnostics.records.first().unwrap().energy.total;
    let last = result.diagnostics.records.last().unwrap().energy.total;
    assert!(last < first);
}

#[test]
fn radial_spec_keeps_origin_circles_round() {
    let spec = AmbientSpec::new(AffineMap::zero(3), ScalarField::InverseQuadratic, 0.5).unwrap();
    let curve = circle_builder(1.2, &[0.0, 0.0, 0.0], (0, 1), 3, 128).unwrap();
    let result = run(&curve, &spec, &config(1e-3, 1.0)).unwrap();
    for r in &result.diagnostics.records {
        let fit = r.circle.as_ref().expect("circle fit recorded");
        assert!(fit.eccentricity <= 1e-6, "t={}: {}", r.t, fit.eccentricity);
        assert!(r.centroid.iter().all(|c| c.abs() <= 1e-8), "t={}: {:?}", r.t, r.centroid);
    }
}

#[test]
fn lifted_circle_sits_above_the_plane() {
    let curve = lifted_circle(0.5f64.sqrt(), 64).unwrap();
    let fit = detect_circle(&curve);
    assert!((fit.radius - 0.5f64.sqrt()).abs() < 1e-10);
    assert!((fit.center[2] - 0.5f64.sqrt()).abs() < 1e-10);
}

#[test]
fn circle_detection_on_exact_and_perturbed_circles() {
    let exact = circle_builder(2.5, &[1.0, -1.0], (0, 1), 2, 256).unwrap();
    let fit = detect_circle(&exact);
    assert!(fit.is_circle && (fit.radius - 2.5).abs() < 1e-10 && fit.eccentricity <= 1e-10);

    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let noisy: Vec<f64> = exact.points().iter().map(|x| x + 1e-6 * rng.gen_range(-1.0..1.0)).collect();
    let fit = detect_circle(&DiscreteCurve::new(2, noisy).unwrap());
    assert!((fit.radius - 2.5).abs() < 1e-5);

    let ellipse = resample_uniform(&helfrich::curve::ellipse(2.0, 1.0, 2, 256).unwrap(), 256).unwrap();
    assert!(!detect_circle(&ellipse).is_circle);
}
