//! Time stepping of ∂ₜγ = −H(γ), run control and shape diagnostics.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, Matrix3, SymmetricEigen, Vector3};
use serde::{Deserialize, Serialize};

use crate::ambient::{validate_affine_assumption, validate_properness, AffineVerdict, AmbientSpec};
use crate::curve::{dot, resample_uniform, DiscreteCurve, NodeField};
use crate::energy::{evaluate, norms_of, AmbientLaplacian, EnergyReport, ResidualNorms};
use crate::error::{Error, Result};
use crate::fft::solve_biharmonic_shift;
use crate::monitors::{evaluate_all, monitor_curvature_derivatives, MonitorVerdict};

/// Chord ratio beyond which a resample is forced outside the regular cadence.
pub const FORCE_RESAMPLE_RATIO: f64 = 1.5;
pub const CIRCLE_TOL: f64 = 1e-4;
pub const PLATEAU_RECORDS: usize = 100;
pub const PLATEAU_TOL: f64 = 1e-3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Integrator {
    /// Classical RK4 with dt = C_stab·h⁴.
    ExplicitRk4,
    /// Implicit constant-coefficient biharmonic part, explicit remainder.
    ImexEuler,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FlowConfig {
    pub integrator: Integrator,
    /// Time step of the IMEX scheme.
    pub dt: f64,
    pub c_stab: f64,
    pub t_max: f64,
    pub resample_every: usize,
    /// Stop once the L² norm of H drops below this.
    pub residual_tol: f64,
    pub record_every: usize,
    pub seed: u64,
}

impl Default for FlowConfig {
    fn default() -> Self {
        Self {
            integrator: Integrator::ImexEuler,
            dt: 1e-3,
            c_stab: 0.1,
            t_max: 1.0,
            resample_every: 10,
            residual_tol: 1e-6,
            record_every: 10,
            seed: 0,
        }
    }
}

impl FlowConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidArgument(what.to_string()));
        if self.integrator == Integrator::ImexEuler && !(self.dt > 0.0 && self.dt.is_finite()) {
            return bad("flow.dt must be positive");
        }
        if !(self.c_stab > 0.0 && self.c_stab.is_finite()) {
            return bad("flow.c_stab must be positive");
        }
        if !(self.t_max > 0.0 && self.t_max.is_finite()) {
            return bad("flow.t_max must be positive");
        }
        if self.resample_every == 0 || self.record_every == 0 {
            return bad("flow.resample_every and flow.record_every must be at least 1");
        }
        if !(self.residual_tol >= 0.0) {
            return bad("flow.residual_tol must be non-negative");
        }
        Ok(())
    }

    /// Step size for a mesh of spacing `h`.
    pub fn time_step(&self, h: f64) -> f64 {
        match self.integrator {
            Integrator::ExplicitRk4 => self.c_stab * h.powi(4),
            Integrator::ImexEuler => self.dt,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FlowState {
    pub curve: DiscreteCurve,
    pub t: f64,
    pub step: usize,
}

impl FlowState {
    pub fn new(curve: DiscreteCurve) -> Self {
        Self { curve, t: 0.0, step: 0 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Converged,
    TMaxReached,
    TranslatingDetected,
    Aborted,
}

impl Outcome {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Converged => "converged",
            Self::TMaxReached => "t_max_reached",
            Self::TranslatingDetected => "translating_detected",
            Self::Aborted => "aborted",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CircleFit {
    pub is_circle: bool,
    pub center: Vec<f64>,
    pub radius: f64,
    /// Spread of the node distances from the centre, relative to the radius.
    pub eccentricity: f64,
    /// Largest distance from a node to the fitted circle, relative to the radius.
    pub max_deviation: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Record {
    pub t: f64,
    pub step: usize,
    pub energy: EnergyReport,
    pub residual: ResidualNorms,
    pub centroid: Vec<f64>,
    pub circle: Option<CircleFit>,
    pub monitors: BTreeMap<String, MonitorVerdict>,
    /// ∫|∇ₛᵐk|² for m = 1, 2, 3.
    pub curvature_derivatives: Vec<f64>,
    /// |ΔE/Δt + ∫|H|²| over the step that produced this record.
    pub dissipation_defect: Option<f64>,
    #[serde(skip)]
    pub curve: DiscreteCurve,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FlowDiagnostics {
    pub records: Vec<Record>,
    pub initial_energy: f64,
    pub properness_radius: Option<f64>,
    pub affine: AffineVerdict,
    /// Largest single-step energy increase (negative when energy always fell).
    pub max_energy_increase: f64,
    pub steps: usize,
    pub abort_reason: Option<String>,
}

impl FlowDiagnostics {
    /// Average centroid velocity between the first and last record.
    pub fn centroid_velocity(&self) -> Option<Vec<f64>> {
        velocity(self.records.first()?, self.records.last()?)
    }

    pub fn centroid_displacement(&self) -> Option<Vec<f64>> {
        let (a, b) = (self.records.first()?, self.records.last()?);
        Some(b.centroid.iter().zip(&a.centroid).map(|(x, y)| x - y).collect())
    }

    /// Any applicable monitor failing at any record.
    pub fn monitor_violations(&self) -> Vec<(f64, String)> {
        self.records
            .iter()
            .flat_map(|r| r.monitors.values().filter(|v| v.violated()).map(move |v| (r.t, v.name.clone())))
            .collect()
    }
}

fn velocity(a: &Record, b: &Record) -> Option<Vec<f64>> {
    let dt = b.t - a.t;
    if dt <= 0.0 {
        return None;
    }
    Some(b.centroid.iter().zip(&a.centroid).map(|(x, y)| (x - y) / dt).collect())
}

#[derive(Clone, Debug)]
pub struct RunResult {
    pub state: FlowState,
    pub diagnostics: FlowDiagnostics,
    pub outcome: Outcome,
}

/// One time step from `state`.
pub fn step(state: &FlowState, spec: &AmbientSpec, config: &FlowConfig) -> Result<FlowState> {
    config.validate()?;
    let (_, grad, geom) = evaluate(&state.curve, spec, AmbientLaplacian::Generic)?;
    let dt = config.time_step(geom.length() / state.curve.len() as f64);
    advance(state, spec, config, &grad.total, geom.length(), dt)
}

fn advance(
    state: &FlowState,
    spec: &AmbientSpec,
    config: &FlowConfig,
    h: &NodeField,
    length: f64,
    dt: f64,
) -> Result<FlowState> {
    let curve = &state.curve;
    let moved = match config.integrator {
        Integrator::ExplicitRk4 => {
            let vel = |c: &DiscreteCurve| -> Result<NodeField> {
                Ok(evaluate(c, spec, AmbientLaplacian::Generic)?.1.total.scaled(-1.0))
            };
            let k1 = h.scaled(-1.0);
            let k2 = vel(&curve.displaced(&k1, 0.5 * dt).map_err(blowup)?)?;
            let k3 = vel(&curve.displaced(&k2, 0.5 * dt).map_err(blowup)?)?;
            let k4 = vel(&curve.displaced(&k3, dt).map_err(blowup)?)?;
            let sum = k1.add(&k2.scaled(2.0)).add(&k3.scaled(2.0)).add(&k4);
            curve.displaced(&sum, dt / 6.0)
        }
        Integrator::ImexEuler => {
            let spacing = length / curve.len() as f64;
            let alpha = dt / spacing.powi(4);
            let delta = solve_biharmonic_shift(&h.scaled(-dt), alpha);
            curve.displaced(&delta, 1.0)
        }
    }
    .map_err(blowup)?;

    let step = state.step + 1;
    let curve = if step % config.resample_every == 0 || moved.chord_ratio() > FORCE_RESAMPLE_RATIO {
        resample_uniform(&moved, moved.len()).map_err(|e| Error::Blowup(format!("mesh unrecoverable: {e}")))?
    } else {
        moved
    };
    Ok(FlowState { curve, t: state.t + dt, step })
}

fn blowup(e: Error) -> Error {
    match e {
        Error::NonFinite(i) => Error::Blowup(format!("non-finite position at node {i}")),
        Error::Degenerate { index, length } => Error::Blowup(format!("chord {index} collapsed to {length:e}")),
        other => other,
    }
}

/// Integrates until the residual drops below tolerance or `t_max` is reached.
/// Numerical failure ends the run with outcome `aborted` and partial diagnostics.
pub fn run(curve0: &DiscreteCurve, spec: &AmbientSpec, config: &FlowConfig) -> Result<RunResult> {
    config.validate()?;
    spec.check_curve(curve0)?;
    let (e0, _, _) = evaluate(curve0, spec, AmbientLaplacian::Generic)?;
    let h0 = e0.total;
    let properness = validate_properness(spec, curve0)?;
    let mut diag = FlowDiagnostics {
        records: Vec::new(),
        initial_energy: h0,
        properness_radius: properness.radius,
        affine: validate_affine_assumption(&spec.affine.l, spec.lambda),
        max_energy_increase: f64::NEG_INFINITY,
        steps: 0,
        abort_reason: None,
    };

    let mut state = FlowState::new(curve0.clone());
    let mut previous: Option<(f64, f64, f64)> = None; // (energy, ‖H‖², dt)
    let t_end = config.t_max * (1.0 - 1e-12);
    let outcome = loop {
        let (report, grad, geom) = match evaluate(&state.curve, spec, AmbientLaplacian::Generic) {
            Ok(v) => v,
            Err(e) => break abort(&mut diag, e),
        };
        let residual = norms_of(&geom, &grad.total);
        if !report.total.is_finite() || !residual.l2.is_finite() {
            break abort(&mut diag, Error::Blowup("non-finite energy or gradient".into()));
        }
        let mut defect = None;
        if let Some((e_prev, h2_prev, dt_prev)) = previous {
            diag.max_energy_increase = diag.max_energy_increase.max(report.total - e_prev);
            defect = Some(((report.total - e_prev) / dt_prev + h2_prev).abs());
        }
        let done = residual.l2 < config.residual_tol;
        let out_of_time = state.t >= t_end;
        if state.step % config.record_every == 0 || done || out_of_time {
            match make_record(&state, spec, h0, properness.radius, report, residual, defect) {
                Ok(r) => {
                    log::info!("t={:.4e} step={} energy={:.10e} residual={:.3e}", r.t, r.step, r.energy.total, r.residual.l2);
                    diag.records.push(r)
                }
                Err(e) => break abort(&mut diag, e),
            }
        }
        if done {
            break Outcome::Converged;
        }
        if out_of_time {
            break if translating(&diag.records, config.residual_tol) {
                Outcome::TranslatingDetected
            } else {
                Outcome::TMaxReached
            };
        }
        let dt = config.time_step(geom.length() / state.curve.len() as f64).min(config.t_max - state.t);
        match advance(&state, spec, config, &grad.total, geom.length(), dt) {
            Ok(next) => {
                previous = Some((report.total, residual.l2 * residual.l2, dt));
                state = next;
                diag.steps = state.step;
            }
            Err(e) => break abort(&mut diag, e),
        }
    };
    if diag.max_energy_increase == f64::NEG_INFINITY {
        diag.max_energy_increase = 0.0;
    }
    Ok(RunResult { state, diagnostics: diag, outcome })
}

fn abort(diag: &mut FlowDiagnostics, e: Error) -> Outcome {
    log::warn!("flow aborted: {e}");
    diag.abort_reason = Some(e.to_string());
    Outcome::Aborted
}

fn make_record(
    state: &FlowState,
    spec: &AmbientSpec,
    h0: f64,
    radius: Option<f64>,
    energy: EnergyReport,
    residual: ResidualNorms,
    dissipation_defect: Option<f64>,
) -> Result<Record> {
    let fit = detect_circle(&state.curve);
    let monitors = evaluate_all(&state.curve, spec, h0, radius)?.into_iter().map(|v| (v.name.clone(), v)).collect();
    Ok(Record {
        t: state.t,
        step: state.step,
        energy,
        residual,
        centroid: state.curve.centroid(),
        circle: fit.is_circle.then_some(fit),
        monitors,
        curvature_derivatives: monitor_curvature_derivatives(&state.curve, 3)?,
        dissipation_defect,
        curve: state.curve.clone(),
    })
}

/// The residual has plateaued over the last `PLATEAU_RECORDS` records while the
/// centroid keeps moving faster than `10·tol`.
pub fn translating(records: &[Record], tol: f64) -> bool {
    if records.len() < PLATEAU_RECORDS {
        return false;
    }
    let window = &records[records.len() - PLATEAU_RECORDS..];
    let (lo, hi) = window
        .iter()
        .map(|r| r.residual.l2)
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    let plateau = hi > 0.0 && (hi - lo) / hi < PLATEAU_TOL;
    let speed = velocity(&window[0], &window[window.len() - 1]).map_or(0.0, |v| dot(&v, &v).sqrt());
    plateau && speed > 10.0 * tol
}

/// Least-squares circle in the best-fit plane of the nodes.
pub fn detect_circle(curve: &DiscreteCurve) -> CircleFit {
    let n = curve.len();
    let dim = curve.dim();
    let mean = curve.centroid();
    let centred: Vec<Vec<f64>> = (0..n).map(|i| curve.point(i).iter().zip(&mean).map(|(p, m)| p - m).collect()).collect();
    let cov = DMatrix::from_fn(dim, dim, |a, b| centred.iter().map(|p| p[a] * p[b]).sum::<f64>() / n as f64);
    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].partial_cmp(&eig.eigenvalues[a]).unwrap());
    let e1: Vec<f64> = eig.eigenvectors.column(order[0]).iter().cloned().collect();
    let e2: Vec<f64> = eig.eigenvectors.column(order[1]).iter().cloned().collect();

    let mut uv = Vec::with_capacity(n);
    let mut off_plane = Vec::with_capacity(n);
    for p in &centred {
        let (u, v) = (dot(p, &e1), dot(p, &e2));
        let rest: f64 = p.iter().zip(e1.iter().zip(&e2)).map(|(x, (a, b))| (x - u * a - v * b).powi(2)).sum();
        uv.push((u, v));
        off_plane.push(rest.sqrt());
    }

    // Algebraic fit u² + v² + Du + Ev + F = 0, then Gauss-Newton on distances.
    let mut ata = Matrix3::zeros();
    let mut atb = Vector3::zeros();
    for &(u, v) in &uv {
        let row = Vector3::new(u, v, 1.0);
        ata += row * row.transpose();
        atb -= row * (u * u + v * v);
    }
    let (mut a, mut b, mut r) = match ata.lu().solve(&atb) {
        Some(s) => {
            let (a, b) = (-0.5 * s[0], -0.5 * s[1]);
            (a, b, (a * a + b * b - s[2]).max(0.0).sqrt())
        }
        None => (0.0, 0.0, uv.iter().map(|&(u, v)| u.hypot(v)).sum::<f64>() / n as f64),
    };
    for _ in 0..20 {
        let mut jtj = Matrix3::zeros();
        let mut jtr = Vector3::zeros();
        for &(u, v) in &uv {
            let d = (u - a).hypot(v - b);
            if d == 0.0 {
                continue;
            }
            let row = Vector3::new(-(u - a) / d, -(v - b) / d, -1.0);
            jtj += row * row.transpose();
            jtr += row * (d - r);
        }
        let Some(delta) = jtj.lu().solve(&(-jtr)) else { break };
        a += delta[0];
        b += delta[1];
        r += delta[2];
        if delta.norm() <= 1e-15 * (1.0 + r.abs()) {
            break;
        }
    }

    let dists: Vec<f64> = uv.iter().map(|&(u, v)| (u - a).hypot(v - b)).collect();
    let max_dev = dists.iter().zip(&off_plane).map(|(d, z)| (d - r).hypot(*z)).fold(0.0, f64::max);
    let spread = dists.iter().cloned().fold(f64::MIN, f64::max) - dists.iter().cloned().fold(f64::MAX, f64::min);
    let center = (0..dim).map(|k| mean[k] + a * e1[k] + b * e2[k]).collect();
    CircleFit {
        is_circle: r > 0.0 && max_dev / r <= CIRCLE_TOL,
        center,
        radius: r,
        eccentricity: spread / r,
        max_deviation: max_dev / r,
    }
}
