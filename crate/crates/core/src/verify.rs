//! Pinned numerical checks behind the `verify` command, plus the scenarios
//! they share with the test suite.

use std::f64::consts::{FRAC_1_SQRT_2, PI, TAU};
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::ambient::{rotation_map, AffineMap, AmbientSpec, ScalarField};
use crate::curve::{fourier_curve, resample_uniform, DiscreteCurve, NodeField};
use crate::energy::{euler_lagrange, first_variation_fd, pairing, residual_norms};
use crate::error::{Error, Result};
use crate::flow::{detect_circle, run, FlowConfig, Outcome, RunResult};
use crate::stationary::{
    case_i_spec, circle_builder, nonexistence_scan_case_ii, radius_case_i, radius_case_iii,
    rotation_polynomial, rotation_radii, rotation_spec,
};

pub const GRADIENT_NODES: usize = 512;
pub const GRADIENT_EPS: f64 = 1e-5;
pub const GRADIENT_TOL: f64 = 1e-4;
/// Size of the Fourier perturbation of the unit circle in the gradient check.
pub const GRADIENT_AMPLITUDE: f64 = 0.1;
pub const ORDER_NODES: [usize; 4] = [64, 128, 256, 512];
pub const EXAMPLE1_LAMBDA: f64 = 15.0 / 16.0;

#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    pub fn new(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Self { name: name.into(), passed, detail: detail.into() }
    }

    fn failed(name: impl Into<String>, e: Error) -> Self {
        Self::new(name, false, format!("error: {e}"))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Suite {
    Gradient,
    Circles,
    Example1,
    Monitors,
}

impl Suite {
    pub const ALL: [Suite; 4] = [Suite::Gradient, Suite::Circles, Suite::Example1, Suite::Monitors];

    pub fn name(self) -> &'static str {
        match self {
            Self::Gradient => "gradient",
            Self::Circles => "circles",
            Self::Example1 => "example1",
            Self::Monitors => "monitors",
        }
    }

    pub fn run(self) -> Vec<Check> {
        match self {
            Self::Gradient => gradient_suite(),
            Self::Circles => circles_suite(),
            Self::Example1 => example1_suite(),
            Self::Monitors => monitors_suite(),
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|suite| suite.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown suite {s:?}")))
    }
}

pub fn print_table<W: Write>(checks: &[Check], mut w: W) -> std::io::Result<()> {
    let width = checks.iter().map(|c| c.name.len()).max().unwrap_or(0);
    for c in checks {
        let status = if c.passed { "PASS" } else { "FAIL" };
        writeln!(w, "{status}  {:<width$}  {}", c.name, c.detail)?;
    }
    let passed = checks.iter().filter(|c| c.passed).count();
    writeln!(w, "{passed}/{} checks passed", checks.len())
}

/// Smooth periodic vector field with seeded Fourier modes 0..=`modes`, mode m
/// scaled by 1/(1+m²).
pub fn smooth_field(dim: usize, nodes: usize, modes: usize, seed: u64) -> NodeField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut coeffs = Vec::new();
    for m in 0..=modes {
        for d in 0..dim {
            let a: f64 = rng.gen_range(-1.0..1.0) / (1 + m * m) as f64;
            let phase: f64 = rng.gen_range(0.0..TAU);
            coeffs.push((m as f64, d, a, phase));
        }
    }
    NodeField::from_fn(dim, nodes, |i, out| {
        let u = TAU * i as f64 / nodes as f64;
        for &(m, d, a, phase) in &coeffs {
            out[d] += a * (m * u + phase).cos();
        }
    })
}

/// The three ambient families of the gradient check, in ℝ^`dim`.
pub fn gradient_specs(dim: usize) -> Result<[(&'static str, AmbientSpec); 3]> {
    Ok([
        ("constant_f", AmbientSpec::elastic(dim, 0.8, 1.0)?),
        ("identity_map", AmbientSpec::new(AffineMap::identity(dim), ScalarField::Constant { c0: 0.0 }, 1.0)?),
        ("rotation_inverse_quadratic", AmbientSpec::new(rotation_map(1.0, (0, 1), dim)?, ScalarField::InverseQuadratic, 1.0)?),
    ])
}

/// Random equal-chord Fourier curve: seed parity picks ℝ² or ℝ³.
pub fn gradient_curve(seed: u64, nodes: usize, amplitude: f64) -> Result<DiscreteCurve> {
    let dim = 2 + (seed % 2) as usize;
    resample_uniform(&fourier_curve(dim, 4 * nodes, 5, amplitude, seed)?, nodes)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GradientComparison {
    pub pairing: f64,
    pub finite_difference: f64,
    pub relative_error: f64,
}

pub fn compare_gradient(curve: &DiscreteCurve, spec: &AmbientSpec, phi: &NodeField, eps: f64) -> Result<GradientComparison> {
    let h = euler_lagrange(curve, spec)?.total;
    let p = pairing(curve, &h, phi)?;
    let fd = first_variation_fd(curve, spec, phi, eps)?;
    Ok(GradientComparison { pairing: p, finite_difference: fd, relative_error: (p - fd).abs() / fd.abs() })
}

fn gradient_suite() -> Vec<Check> {
    (1..=10u64)
        .map(|seed| {
            let name = format!("fd seed={seed}");
            let attempt = || -> Result<Check> {
                let curve = gradient_curve(seed, GRADIENT_NODES, GRADIENT_AMPLITUDE)?;
                let (label, spec) = gradient_specs(curve.dim())?.into_iter().nth((seed % 3) as usize).unwrap();
                let phi = smooth_field(curve.dim(), curve.len(), 4, 1000 + seed);
                let c = compare_gradient(&curve, &spec, &phi, GRADIENT_EPS)?;
                Ok(Check::new(
                    format!("{name} n={} {label}", curve.dim()),
                    c.relative_error < GRADIENT_TOL,
                    format!("rel {:.2e} (pairing {:.6e}, fd {:.6e})", c.relative_error, c.pairing, c.finite_difference),
                ))
            };
            attempt().unwrap_or_else(|e| Check::failed(name, e))
        })
        .collect()
}

/// Least-squares slope of log(value) against log(1/N).
pub fn observed_order(nodes: &[usize], values: &[f64]) -> f64 {
    let xs: Vec<f64> = nodes.iter().map(|&n| -(n as f64).ln()).collect();
    let ys: Vec<f64> = values.iter().map(|v| v.ln()).collect();
    let mx = xs.iter().sum::<f64>() / xs.len() as f64;
    let my = ys.iter().sum::<f64>() / ys.len() as f64;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

/// sup|H| on the planar origin-centred circle of radius ρ at each N.
pub fn circle_residuals(rho: f64, spec: &AmbientSpec, nodes: &[usize]) -> Result<Vec<f64>> {
    nodes
        .iter()
        .map(|&n| Ok(residual_norms(&circle_builder(rho, &[0.0, 0.0], (0, 1), 2, n)?, spec)?.sup))
        .collect()
}

fn order_checks(label: &str, rho: f64, spec: &AmbientSpec, bound: Option<f64>) -> Vec<Check> {
    let res = match circle_residuals(rho, spec, &ORDER_NODES) {
        Ok(r) => r,
        Err(e) => return vec![Check::failed(format!("{label} residual"), e)],
    };
    let order = observed_order(&ORDER_NODES, &res);
    let mut out = vec![Check::new(
        format!("{label} order"),
        (order - 2.0).abs() <= 0.2,
        format!("observed {order:.3} over N=64..512, residuals {}", sci(&res)),
    )];
    if let Some(b) = bound {
        let last = res[res.len() - 1];
        out.push(Check::new(format!("{label} residual N=512"), last <= b, format!("{last:.3e} (bound {b:.0e})")));
    }
    out
}

fn sci(values: &[f64]) -> String {
    let parts: Vec<String> = values.iter().map(|v| format!("{v:.2e}")).collect();
    format!("[{}]", parts.join(", "))
}

pub const CASE_II_POINTS: usize = 200;
pub const CASE_II_RANGE: (f64, f64) = (0.1, 10.0);

fn circles_suite() -> Vec<Check> {
    let mut out = Vec::new();

    match (radius_case_i(0.5, 0.0), case_i_spec(0.5, 0.0)) {
        (Ok(rho), Ok(spec)) => {
            out.push(Check::new("case i radius", (rho - 1.0).abs() < 1e-14, format!("ρ = {rho}")));
            out.extend(order_checks("case i", rho, &spec, Some(1e-4)));
        }
        (Err(e), _) | (_, Err(e)) => out.push(Check::failed("case i", e)),
    }

    let scan = |nodes| nonexistence_scan_case_ii(&[1.0, 0.0], 1.0, 0.0, CASE_II_RANGE, CASE_II_POINTS, nodes);
    match (scan(512), scan(1024)) {
        (Ok(a), Ok(b)) => {
            out.push(Check::new(
                "case ii floor",
                a.min_residual > 0.0,
                format!("min sup residual {:.6e} at ρ = {:.4}", a.min_residual, a.rho),
            ));
            let change = (b.min_residual - a.min_residual).abs() / a.min_residual;
            out.push(Check::new("case ii refinement", change < 0.05, format!("N=1024 floor {:.6e}, change {change:.2e}", b.min_residual)));
        }
        (Err(e), _) | (_, Err(e)) => out.push(Check::failed("case ii", e)),
    }

    match (radius_case_iii(1.0, 1.0), rotation_spec(0.0, 1.0, 1.0)) {
        (Ok(rho), Ok(spec)) => {
            let roots = rotation_radii(0.0, 1.0, 1.0);
            let agree = roots.len() == 1 && (roots[0] - rho).abs() < 1e-10;
            out.push(Check::new("case iii radius", agree, format!("closed form {rho:.12}, quartic roots {roots:.12?}")));
            out.extend(order_checks("case iii", rho, &spec, Some(1e-4)));
        }
        (Err(e), _) | (_, Err(e)) => out.push(Check::failed("case iii", e)),
    }

    let expected = ((13f64.sqrt() - 1.0) / 6.0).sqrt();
    let roots = rotation_radii(PI, 1.0, 1.0);
    out.push(Check::new(
        "case iv θ=π radius",
        roots.len() == 1 && (roots[0] - expected).abs() < 1e-10,
        format!("roots {roots:.9?}, closed form {expected:.9}"),
    ));
    for theta in [PI / 2.0, PI, 4.0] {
        let Ok(spec) = rotation_spec(theta, 1.0, 1.0) else { continue };
        for rho in rotation_radii(theta, 1.0, 1.0) {
            let q = rotation_polynomial(rho, theta, 1.0, 1.0);
            out.push(Check::new(format!("case iv θ={theta:.4} root"), q.abs() < 1e-10, format!("ρ = {rho:.9}, Q = {q:.1e}")));
            out.extend(order_checks(&format!("case iv θ={theta:.4} ρ={rho:.4}"), rho, &spec, None));
        }
    }
    out
}

pub fn example1_spec() -> Result<AmbientSpec> {
    AmbientSpec::new(AffineMap::zero(3), ScalarField::InverseQuadratic, EXAMPLE1_LAMBDA)
}

/// Circle of radius ρ in the (x₁, x₂) plane lifted by ρ along e₃.
pub fn lifted_circle(rho: f64, nodes: usize) -> Result<DiscreteCurve> {
    circle_builder(rho, &[0.0, 0.0, rho], (0, 1), 3, nodes)
}

/// Radius at which an origin-centred planar circle is critical for
/// f = 1/(1+|x|²), 𝚌 = 0: the zero of dE/dρ, found by bisection.
pub fn homothety_radius(lambda: f64) -> Result<f64> {
    let g = |r: f64| lambda - 0.5 / (r * r) + 0.5 * (1.0 - 3.0 * r * r) / (1.0 + r * r).powi(3);
    let (mut lo, mut hi) = (1e-3, 1e3);
    if !(g(lo) < 0.0 && g(hi) > 0.0) {
        return Err(Error::InvalidArgument(format!("no stationary radius bracketed for λ = {lambda}")));
    }
    while hi - lo > 1e-14 * hi {
        let mid = 0.5 * (lo + hi);
        if g(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

pub fn homothety_run(nodes: usize) -> Result<RunResult> {
    let curve = circle_builder(1.0, &[0.0; 3], (0, 1), 3, nodes)?;
    let cfg = FlowConfig { dt: 1e-3, t_max: 50.0, record_every: 100, residual_tol: 1e-8, ..FlowConfig::default() };
    run(&curve, &example1_spec()?, &cfg)
}

pub fn translation_config() -> FlowConfig {
    FlowConfig { dt: 1e-3, t_max: 1.0, record_every: 5, residual_tol: 1e-6, ..FlowConfig::default() }
}

pub fn translation_run(lambda: f64, nodes: usize) -> Result<RunResult> {
    let spec = AmbientSpec::new(AffineMap::zero(3), ScalarField::InverseQuadratic, lambda)?;
    run(&lifted_circle(FRAC_1_SQRT_2, nodes)?, &spec, &translation_config())
}

/// Largest node-wise distance between −H on the lifted circle and `target`.
pub fn lifted_velocity_error(lambda: f64, nodes: usize, target: &[f64]) -> Result<f64> {
    let spec = AmbientSpec::new(AffineMap::zero(3), ScalarField::InverseQuadratic, lambda)?;
    let h = euler_lagrange(&lifted_circle(FRAC_1_SQRT_2, nodes)?, &spec)?.total;
    Ok((0..h.len())
        .map(|i| h.get(i).iter().zip(target).map(|(v, t)| (-v - t).powi(2)).sum::<f64>().sqrt())
        .fold(0.0, f64::max))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TranslationSummary {
    pub displacement_e3: f64,
    pub off_axis: f64,
    pub radius_change: f64,
}

pub fn summarize_translation(result: &RunResult) -> Option<TranslationSummary> {
    let d = result.diagnostics.centroid_displacement()?;
    let first = result.diagnostics.records.first()?;
    let r0 = first.circle.as_ref().map(|c| c.radius)?;
    let r1 = detect_circle(&result.state.curve).radius;
    Some(TranslationSummary { displacement_e3: d[2], off_axis: d[0].hypot(d[1]), radius_change: (r1 - r0).abs() })
}

fn example1_suite() -> Vec<Check> {
    let mut out = Vec::new();
    match (homothety_radius(EXAMPLE1_LAMBDA), homothety_run(256)) {
        (Ok(oracle), Ok(res)) => {
            let records = &res.diagnostics.records;
            let ecc = records.iter().map(|r| r.circle.as_ref().map_or(f64::INFINITY, |c| c.eccentricity)).fold(0.0, f64::max);
            let drift = records.iter().map(|r| r.centroid.iter().map(|x| x * x).sum::<f64>().sqrt()).fold(0.0, f64::max);
            let radius = detect_circle(&res.state.curve).radius;
            out.push(Check::new("homothety outcome", res.outcome == Outcome::Converged, format!("{} at t = {:.3}", res.outcome.as_str(), res.state.t)));
            out.push(Check::new("homothety circularity", ecc <= 1e-6, format!("max eccentricity {ecc:.2e}")));
            out.push(Check::new("homothety centroid", drift <= 1e-8, format!("max |centroid| {drift:.2e}")));
            out.push(Check::new(
                "homothety radius",
                (radius - oracle).abs() <= 1e-3,
                format!("final {radius:.6}, stationary {oracle:.6}"),
            ));
        }
        (Err(e), _) | (_, Err(e)) => out.push(Check::failed("homothety", e)),
    }

    match lifted_velocity_error(EXAMPLE1_LAMBDA, 512, &[0.0, 0.0, 0.125]) {
        Ok(err) => out.push(Check::new("translation velocity", err <= 1e-3, format!("max |−H − e₃/8| = {err:.3e}"))),
        Err(e) => out.push(Check::failed("translation velocity", e)),
    }
    match translation_run(EXAMPLE1_LAMBDA, 256) {
        Ok(res) => {
            out.push(Check::new(
                "translation outcome",
                res.outcome == Outcome::TranslatingDetected,
                res.outcome.as_str(),
            ));
            match summarize_translation(&res) {
                Some(s) => {
                    out.push(Check::new(
                        "translation displacement",
                        (s.displacement_e3 - 0.125).abs() <= 0.005,
                        format!("Δx₃ = {:.5}, off-axis {:.1e}", s.displacement_e3, s.off_axis),
                    ));
                    out.push(Check::new("translation shape", s.radius_change <= 1e-3, format!("radius change {:.3e}", s.radius_change)));
                }
                None => out.push(Check::new("translation summary", false, "no circle fit at the first record")),
            }
        }
        Err(e) => out.push(Check::failed("translation run", e)),
    }
    out
}

pub fn case_i_run(nodes: usize) -> Result<RunResult> {
    let curve = circle_builder(2.0, &[0.0, 0.0], (0, 1), 2, nodes)?;
    let cfg = FlowConfig { dt: 1e-3, t_max: 100.0, record_every: 100, residual_tol: 1e-6, ..FlowConfig::default() };
    run(&curve, &case_i_spec(0.5, 0.0)?, &cfg)
}

/// L = I, M = 0, f ≡ ½ from an equal-chord 3:2 ellipse.
pub fn identity_map_run(nodes: usize) -> Result<RunResult> {
    let spec = AmbientSpec::new(AffineMap::identity(2), ScalarField::Constant { c0: 0.5 }, 1.0)?;
    let curve = resample_uniform(&crate::curve::ellipse(1.5, 1.0, 2, 4 * nodes)?, nodes)?;
    let cfg = FlowConfig { dt: 1e-3, t_max: 5.0, record_every: 50, residual_tol: 1e-8, ..FlowConfig::default() };
    run(&curve, &spec, &cfg)
}

/// f ≡ 1, 𝚌(x) = −0.2·Jx with J the quarter turn, λ = 0.02, from the circle of
/// radius 5: constant f exceeds √3·H0/π, so the properness bound applies.
pub fn proper_spec() -> Result<AmbientSpec> {
    let quarter = rotation_map(PI / 2.0, (0, 1), 2)?;
    AmbientSpec::new(AffineMap::new(quarter.l.scale(-0.2), quarter.m)?, ScalarField::Constant { c0: 1.0 }, 0.02)
}

pub fn proper_run(nodes: usize) -> Result<RunResult> {
    let curve = circle_builder(5.0, &[0.0, 0.0], (0, 1), 2, nodes)?;
    let cfg = FlowConfig { dt: 1e-2, t_max: 20.0, record_every: 50, residual_tol: 1e-8, ..FlowConfig::default() };
    run(&curve, &proper_spec()?, &cfg)
}

/// Bounds that need only the affine assumption.
pub const CORE_MONITORS: [&str; 5] = ["energy_split", "length_lower", "length_upper", "c_sup", "cvec_sup"];

fn core_monitor_check(label: &str, res: &RunResult) -> Check {
    let d = &res.diagnostics;
    let mut missing = 0;
    let mut violated = Vec::new();
    for r in &d.records {
        for name in CORE_MONITORS {
            match r.monitors.get(name) {
                Some(v) if v.applicable && v.holds => {}
                Some(v) if v.applicable => violated.push(format!("{name}@t={:.3}", r.t)),
                _ => missing += 1,
            }
        }
    }
    Check::new(
        format!("{label} core bounds"),
        d.affine.valid && missing == 0 && violated.is_empty() && !d.records.is_empty(),
        format!("{} records, {} violations, {missing} inapplicable {violated:?}", d.records.len(), violated.len()),
    )
}

fn monitor_everywhere(label: &str, res: &RunResult, name: &str) -> Check {
    let records = &res.diagnostics.records;
    let ok = !records.is_empty() && records.iter().all(|r| r.monitors.get(name).is_some_and(|v| v.applicable && v.holds));
    let worst = records.iter().filter_map(|r| r.monitors.get(name)).map(|v| v.margin).fold(f64::INFINITY, f64::min);
    Check::new(format!("{label} {name}"), ok, format!("smallest margin {worst:.3e}"))
}

fn monitors_suite() -> Vec<Check> {
    let mut out = Vec::new();
    let runs: [(&str, Result<RunResult>); 5] = [
        ("case i", case_i_run(128)),
        ("homothety", homothety_run(128)),
        ("translation", translation_run(EXAMPLE1_LAMBDA, 128)),
        ("identity map", identity_map_run(128)),
        ("proper", proper_run(128)),
    ];
    for (label, res) in &runs {
        match res {
            Ok(r) if r.outcome != Outcome::Aborted => {
                out.push(core_monitor_check(label, r));
                if *label == "identity map" {
                    out.push(monitor_everywhere(label, r, "position_invertible"));
                }
                if *label == "proper" {
                    let h0 = r.diagnostics.initial_energy;
                    let threshold = 3f64.sqrt() * h0 / PI;
                    out.push(Check::new("proper hypothesis", 1.0 > threshold, format!("f ≡ 1 against √3·H0/π = {threshold:.4}")));
                    out.push(monitor_everywhere(label, r, "position_proper"));
                }
                if *label == "translation" {
                    let inapplicable = r.diagnostics.records.iter().all(|rec| {
                        ["position_invertible", "position_proper"]
                            .iter()
                            .all(|n| rec.monitors.get(*n).is_some_and(|v| !v.applicable && !v.holds))
                    });
                    out.push(Check::new(
                        "decaying field inapplicable bounds",
                        inapplicable && r.diagnostics.properness_radius.is_none(),
                        "position bounds flagged inapplicable for 𝚌 = 0, decaying f",
                    ));
                }
            }
            Ok(r) => out.push(Check::new(format!("{label} run"), false, format!("aborted: {:?}", r.diagnostics.abort_reason))),
            Err(e) => out.push(Check::new(format!("{label} run"), false, format!("error: {e}"))),
        }
    }
    out
}

/// Minimum sup-residual of the case (ii) scan at `nodes`.
pub fn case_ii_floor(nodes: usize) -> Result<f64> {
    Ok(nonexistence_scan_case_ii(&[1.0, 0.0], 1.0, 0.0, CASE_II_RANGE, CASE_II_POINTS, nodes)?.min_residual)
}
