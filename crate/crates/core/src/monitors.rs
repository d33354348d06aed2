//! A-priori bounds that hold along any family of curves whose energy stays
//! below the initial energy H0, evaluated as runtime verdicts.

use std::f64::consts::PI;

use serde::Serialize;

use crate::ambient::{condition_number, operator_norm, spontaneous_on, validate_affine_assumption, AmbientSpec};
use crate::curve::{DiscreteCurve, Geometry};
use crate::energy::energy_on;
use crate::error::Result;

const SLACK: f64 = 1e-9;
const MAX_CONDITION: f64 = 1e12;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MonitorVerdict {
    pub name: String,
    /// False when the bound's hypotheses are not met; `holds` is then false too.
    pub applicable: bool,
    pub holds: bool,
    pub lhs: f64,
    pub rhs: f64,
    pub margin: f64,
}

impl MonitorVerdict {
    pub fn new(name: &str, lhs: f64, rhs: f64) -> Self {
        Self {
            name: name.to_string(),
            applicable: true,
            holds: lhs <= rhs + SLACK * (1.0 + rhs.abs()),
            lhs,
            rhs,
            margin: rhs - lhs,
        }
    }

    pub fn inapplicable(name: &str, lhs: f64) -> Self {
        Self { name: name.to_string(), applicable: false, holds: false, lhs, rhs: f64::NAN, margin: f64::NAN }
    }

    pub fn violated(&self) -> bool {
        self.applicable && !self.holds
    }
}

struct Snapshot {
    elastic: f64,
    spontaneous: f64,
    length: f64,
    max_position: f64,
    max_c: f64,
    max_cvec: f64,
}

fn snapshot(curve: &DiscreteCurve, spec: &AmbientSpec) -> Result<Snapshot> {
    spec.check_curve(curve)?;
    let geom = Geometry::new(curve)?;
    let sp = spontaneous_on(curve, &geom, spec);
    let e = energy_on(&geom, &sp, spec);
    Ok(Snapshot {
        elastic: e.elastic_only,
        spontaneous: e.spontaneous_only,
        length: geom.length(),
        max_position: curve.max_radius(),
        max_c: sp.c.sup_norm(),
        max_cvec: sp.cvec.sup_norm(),
    })
}

fn assumption_ok(spec: &AmbientSpec) -> bool {
    validate_affine_assumption(&spec.affine.l, spec.lambda).valid
}

fn energy_split(s: &Snapshot, ok: bool, h0: f64) -> MonitorVerdict {
    let lhs = s.elastic + s.spontaneous;
    if ok {
        MonitorVerdict::new("energy_split", lhs, h0)
    } else {
        MonitorVerdict::inapplicable("energy_split", lhs)
    }
}

fn length(s: &Snapshot, ok: bool, spec: &AmbientSpec, h0: f64) -> (MonitorVerdict, MonitorVerdict) {
    let lower = 2.0 * PI * PI / h0;
    let upper = h0 / spec.lambda;
    if ok {
        (MonitorVerdict::new("length_lower", lower, s.length), MonitorVerdict::new("length_upper", s.length, upper))
    } else {
        (MonitorVerdict::inapplicable("length_lower", lower), MonitorVerdict::inapplicable("length_upper", s.length))
    }
}

fn position_invertible(s: &Snapshot, ok: bool, spec: &AmbientSpec, h0: f64) -> MonitorVerdict {
    const NAME: &str = "position_invertible";
    let l = &spec.affine.l;
    if !ok || condition_number(l) >= MAX_CONDITION {
        return MonitorVerdict::inapplicable(NAME, s.max_position);
    }
    let Some(inv) = l.clone().try_inverse() else {
        return MonitorVerdict::inapplicable(NAME, s.max_position);
    };
    let n = spec.dim() as f64;
    let lambda = spec.lambda;
    let c0 = spec.scalar.bounds()[0];
    let m2 = spec.affine.m.norm_squared();
    let rhs = n * h0 * (1.0 / lambda + operator_norm(&inv) / PI * ((m2 + 2.0 * c0 * c0) / lambda + 4.0).sqrt());
    MonitorVerdict::new(NAME, s.max_position, rhs)
}

fn position_proper(s: &Snapshot, ok: bool, spec: &AmbientSpec, h0: f64, radius: Option<f64>) -> MonitorVerdict {
    const NAME: &str = "position_proper";
    match radius {
        Some(r) if ok => MonitorVerdict::new(NAME, s.max_position, r + h0 / (2.0 * spec.lambda)),
        _ => MonitorVerdict::inapplicable(NAME, s.max_position),
    }
}

fn c_bounds(s: &Snapshot, ok: bool, spec: &AmbientSpec, h0: f64) -> (MonitorVerdict, MonitorVerdict) {
    if !ok {
        return (MonitorVerdict::inapplicable("c_sup", s.max_c), MonitorVerdict::inapplicable("cvec_sup", s.max_cvec));
    }
    let n = spec.dim() as f64;
    let lambda = spec.lambda;
    let [c0, c1, _] = spec.scalar.bounds();
    let lnorm = operator_norm(&spec.affine.l);
    let c_rhs = n / lambda
        * h0
        * (8.0 / (PI * PI) * lambda * lambda + 3.0 * lnorm * lnorm + 6.0 * lambda * c0 * c0 + 3.0 * c1 * c1).sqrt();
    let cvec_rhs = 2.0
        * n
        * h0
        * ((c0 / h0).powi(2) + 1.0 / (PI * PI) + lnorm * lnorm / (4.0 * lambda * lambda)).sqrt();
    (MonitorVerdict::new("c_sup", s.max_c, c_rhs), MonitorVerdict::new("cvec_sup", s.max_cvec, cvec_rhs))
}

/// ½∫|k|² + ½∫|c|² ≤ H0.
pub fn monitor_energy_split(curve: &DiscreteCurve, spec: &AmbientSpec, h0: f64) -> Result<MonitorVerdict> {
    Ok(energy_split(&snapshot(curve, spec)?, assumption_ok(spec), h0))
}

/// 2π²/H0 ≤ L and L ≤ H0/λ, as (lower, upper).
pub fn monitor_length(curve: &DiscreteCurve, spec: &AmbientSpec, h0: f64) -> Result<(MonitorVerdict, MonitorVerdict)> {
    Ok(length(&snapshot(curve, spec)?, assumption_ok(spec), spec, h0))
}

/// max|γ| ≤ nH0(1/λ + |L⁻¹|/π·√((|M|² + 2c0²)/λ + 4)); needs L invertible.
pub fn monitor_position_invertible(curve: &DiscreteCurve, spec: &AmbientSpec, h0: f64) -> Result<MonitorVerdict> {
    Ok(position_invertible(&snapshot(curve, spec)?, assumption_ok(spec), spec, h0))
}

/// max|γ| ≤ R + H0/(2λ) for a properness witness R.
pub fn monitor_position_proper(
    curve: &DiscreteCurve,
    spec: &AmbientSpec,
    h0: f64,
    radius: Option<f64>,
) -> Result<MonitorVerdict> {
    Ok(position_proper(&snapshot(curve, spec)?, assumption_ok(spec), spec, h0, radius))
}

/// Sup bounds on |c| and |c⃗|, as (c, c⃗).
pub fn monitor_c_bounds(curve: &DiscreteCurve, spec: &AmbientSpec, h0: f64) -> Result<(MonitorVerdict, MonitorVerdict)> {
    Ok(c_bounds(&snapshot(curve, spec)?, assumption_ok(spec), spec, h0))
}

/// Every bound at once, in a fixed order.
pub fn evaluate_all(curve: &DiscreteCurve, spec: &AmbientSpec, h0: f64, radius: Option<f64>) -> Result<Vec<MonitorVerdict>> {
    let s = snapshot(curve, spec)?;
    let ok = assumption_ok(spec);
    let (lo, hi) = length(&s, ok, spec, h0);
    let (c, cv) = c_bounds(&s, ok, spec, h0);
    Ok(vec![
        energy_split(&s, ok, h0),
        lo,
        hi,
        position_invertible(&s, ok, spec, h0),
        position_proper(&s, ok, spec, h0, radius),
        c,
        cv,
    ])
}

/// ∫|∇ₛᵐk|² ds for m = 1..=`max_order`, by repeated normal differentiation.
pub fn monitor_curvature_derivatives(curve: &DiscreteCurve, max_order: usize) -> Result<Vec<f64>> {
    let geom = Geometry::new(curve)?;
    let mut field = geom.curvature().clone();
    let mut out = Vec::with_capacity(max_order);
    for _ in 0..max_order.min(3) {
        field = geom.normal_derivative(&field);
        out.push(geom.inner(&field, &field));
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SeriesSummary {
    pub initial: f64,
    pub max: f64,
    pub last: f64,
    /// max − initial, the observed additive constant.
    pub excess: f64,
    pub finite: bool,
    /// The last value sits at or below the maximum and the second half of the
    /// series does not rise overall.
    pub eventually_decreasing: bool,
}

pub fn summarize_series(series: &[f64]) -> Option<SeriesSummary> {
    let (&initial, &last) = (series.first()?, series.last()?);
    let max = series.iter().cloned().fold(f64::MIN, f64::max);
    let mid = series[series.len() / 2];
    Some(SeriesSummary {
        initial,
        max,
        last,
        excess: max - initial,
        finite: series.iter().all(|v| v.is_finite()),
        eventually_decreasing: last <= max && last <= mid,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ambient::{AffineMap, ScalarField};
    use crate::stationary::circle_builder;

    fn unit_circle() -> DiscreteCurve {
        circle_builder(1.0, &[0.0, 0.0], (0, 1), 2, 256).unwrap()
    }

    #[test]
    fn energy_split_zero_field() {
        let spec = AmbientSpec::elastic(2, 0.0, 1.0).unwrap();
        let h0 = crate::energy::energy(&unit_circle(), &spec).unwrap().total;
        let v = monitor_energy_split(&unit_circle(), &spec, h0).unwrap();
        assert!(v.applicable && v.holds && v.margin > 0.0);
        let fake = monitor_energy_split(&unit_circle(), &spec, 0.0).unwrap();
        assert!(fake.applicable && !fake.holds);
    }

    #[test]
    fn length_bounds_on_unit_circle() {
        let spec = AmbientSpec::elastic(2, 0.0, 1.0).unwrap();
        let h0 = 3.0 * PI;
        let (lo, hi) = monitor_length(&unit_circle(), &spec, h0).unwrap();
        assert!((lo.lhs - 2.0 * PI / 3.0).abs() < 1e-12);
        assert!((hi.rhs - 3.0 * PI).abs() < 1e-12);
        assert!(lo.holds && hi.holds);
        let heavy = AmbientSpec::elastic(2, 0.0, 10.0).unwrap();
        let (_, hi) = monitor_length(&unit_circle(), &heavy, h0).unwrap();
        assert!(!hi.holds);
    }

    #[test]
    fn position_invertible_needs_invertible_map() {
        let zero = AmbientSpec::elastic(2, 0.0, 1.0).unwrap();
        assert!(!monitor_position_invertible(&unit_circle(), &zero, 10.0).unwrap().applicable);
        let id = AmbientSpec::new(AffineMap::identity(2), ScalarField::Constant { c0: 0.0 }, 1.0).unwrap();
        let v = monitor_position_invertible(&unit_circle(), &id, 10.0).unwrap();
        assert!(v.applicable && v.holds);
        assert!((v.rhs - 2.0 * 10.0 * (1.0 + 2.0 / PI)).abs() < 1e-9);
    }

    #[test]
    fn position_proper_needs_witness() {
        let spec = AmbientSpec::elastic(2, 5.0, 1.0).unwrap();
        assert!(!monitor_position_proper(&unit_circle(), &spec, 4.0, None).unwrap().applicable);
        let v = monitor_position_proper(&unit_circle(), &spec, 4.0, Some(1e-3)).unwrap();
        assert!((v.rhs - (1e-3 + 2.0)).abs() < 1e-15 && v.holds);
    }

    #[test]
    fn c_bounds_examples() {
        let spec = AmbientSpec::elastic(2, 0.0, 1.0).unwrap();
        let (c, cv) = monitor_c_bounds(&unit_circle(), &spec, 3.0 * PI).unwrap();
        assert!(c.holds && cv.holds && c.lhs == 0.0);
        let spec = AmbientSpec::elastic(2, 1.0, 1.0).unwrap();
        let h0 = crate::energy::energy(&unit_circle(), &spec).unwrap().total;
        let (c, _) = monitor_c_bounds(&unit_circle(), &spec, h0).unwrap();
        assert!((c.lhs - 1.0).abs() < 1e-12 && c.holds);
    }

    #[test]
    fn circle_has_flat_curvature_derivatives() {
        let norms = monitor_curvature_derivatives(&unit_circle(), 3).unwrap();
        assert_eq!(norms.len(), 3);
        assert!(norms.iter().all(|v| *v < 1e-12), "{norms:?}");
    }
}
