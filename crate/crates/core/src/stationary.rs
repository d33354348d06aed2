//! Round critical circles: closed-form radii, the rotation quartic, and scans.

use std::io::Write;

use serde::Serialize;

use crate::ambient::{rotation_map, AffineMap, AmbientSpec, ScalarField};
use crate::curve::DiscreteCurve;
use crate::energy::residual_norms;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CircleCase {
    /// L = 0, M = 0.
    TranslationZero,
    /// L = 0, M ≠ 0.
    TranslationNonzero,
    /// L the identity on the circle's plane.
    RotationFixingCircle,
    /// L a rotation of the circle's plane.
    RotationOfPlane,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CircleCriticality {
    pub case: CircleCase,
    /// Sorted ascending.
    pub radii: Vec<f64>,
    /// Coefficients of u⁴ − a u² − b u − 3 in u = 1/ρ, highest degree first.
    pub polynomial_coeffs: Option<[f64; 5]>,
    /// sup-norm of the discrete gradient on each circle.
    pub residual_check: Vec<f64>,
}

pub const U_MIN: f64 = 1e-6;
pub const U_MAX: f64 = 1e6;
const BRACKET_POINTS: usize = 4000;

pub fn radius_case_i(lambda: f64, c0: f64) -> Result<f64> {
    let s = 2.0 * lambda + c0 * c0;
    if !(s > 0.0) {
        return Err(Error::InvalidArgument(format!("2λ + c0² = {s} is not positive")));
    }
    Ok(1.0 / s.sqrt())
}

pub fn radius_case_iii(lambda: f64, c0: f64) -> Result<f64> {
    if !(lambda > 0.0) {
        return Err(Error::InvalidArgument(format!("lambda must be positive, got {lambda}")));
    }
    let p = 2.0 + 2.0 * lambda + c0 * c0;
    Ok((((p * p + 12.0).sqrt() - p) / 6.0).sqrt())
}

pub fn quartic_coeffs(theta: f64, lambda: f64, c0: f64) -> [f64; 5] {
    let a = 2.0 * theta.cos() + 2.0 * lambda + c0 * c0;
    let b = 4.0 * c0 * theta.sin();
    [1.0, 0.0, -a, -b, -3.0]
}

/// ρ⁻⁴ − (2cosθ + 2λ + c0²)ρ⁻² − 4c0 sinθ ρ⁻¹ − 3.
pub fn rotation_polynomial(rho: f64, theta: f64, lambda: f64, c0: f64) -> f64 {
    horner(&quartic_coeffs(theta, lambda, c0), 1.0 / rho)
}

fn horner(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().fold(0.0, |acc, c| acc * x + c)
}

/// Positive real roots ρ of the rotation polynomial, ascending. Sign changes
/// are bracketed on a log grid in u = 1/ρ and refined by bisection; roots of
/// even multiplicity are not detected.
pub fn rotation_radii(theta: f64, lambda: f64, c0: f64) -> Vec<f64> {
    let coeffs = quartic_coeffs(theta, lambda, c0);
    let q = |u: f64| horner(&coeffs, u);
    let log_span = (U_MAX / U_MIN).ln();
    let grid = |j: usize| U_MIN * (log_span * j as f64 / (BRACKET_POINTS - 1) as f64).exp();

    let mut roots_u: Vec<f64> = Vec::new();
    let mut lo = grid(0);
    let mut f_lo = q(lo);
    for j in 1..BRACKET_POINTS {
        let hi = grid(j);
        let f_hi = q(hi);
        if f_lo == 0.0 {
            roots_u.push(lo);
        } else if f_lo * f_hi < 0.0 {
            roots_u.push(bisect(&q, lo, hi, f_lo));
        }
        lo = hi;
        f_lo = f_hi;
    }
    if f_lo == 0.0 {
        roots_u.push(lo);
    }
    roots_u.dedup_by(|a, b| (*a - *b).abs() <= 1e-9 * b.abs());
    let mut radii: Vec<f64> = roots_u.into_iter().map(|u| 1.0 / u).collect();
    radii.sort_by(|a, b| a.partial_cmp(b).unwrap());
    radii
}

/// Bisects down to adjacent doubles, so the returned root is as exact as the
/// polynomial evaluation allows.
fn bisect(q: &impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, mut f_lo: f64) -> f64 {
    loop {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let f_mid = q(mid);
        if f_mid == 0.0 {
            return mid;
        }
        if f_mid * f_lo < 0.0 {
            hi = mid;
        } else {
            lo = mid;
            f_lo = f_mid;
        }
    }
    0.5 * (lo + hi)
}

/// Circle of radius ρ about `center` in span{e_i, e_j}, N nodes at equal angles,
/// oriented from e_i towards e_j.
pub fn circle_builder(rho: f64, center: &[f64], plane: (usize, usize), dim: usize, nodes: usize) -> Result<DiscreteCurve> {
    let (i, j) = plane;
    if !(i < dim && j < dim && i != j) {
        return Err(Error::InvalidPlane(i, j, dim));
    }
    if !(rho > 0.0) {
        return Err(Error::InvalidArgument(format!("radius must be positive, got {rho}")));
    }
    if center.len() != dim {
        return Err(Error::DimensionMismatch { expected: dim, got: center.len() });
    }
    let mut pts = Vec::with_capacity(dim * nodes);
    for k in 0..nodes {
        let s = std::f64::consts::TAU * k as f64 / nodes as f64;
        let start = pts.len();
        pts.extend_from_slice(center);
        pts[start + i] += rho * s.cos();
        pts[start + j] += rho * s.sin();
    }
    DiscreteCurve::new(dim, pts)
}

fn planar_circle(rho: f64, nodes: usize) -> Result<DiscreteCurve> {
    circle_builder(rho, &[0.0, 0.0], (0, 1), 2, nodes)
}

fn sup_residual(rho: f64, spec: &AmbientSpec, nodes: usize) -> Result<f64> {
    Ok(residual_norms(&planar_circle(rho, nodes)?, spec)?.sup)
}

pub fn case_i_spec(lambda: f64, c0: f64) -> Result<AmbientSpec> {
    AmbientSpec::elastic(2, c0, lambda)
}

pub fn case_ii_spec(m: &[f64], lambda: f64, c0: f64) -> Result<AmbientSpec> {
    AmbientSpec::new(AffineMap::translation(m), ScalarField::Constant { c0 }, lambda)
}

pub fn rotation_spec(theta: f64, lambda: f64, c0: f64) -> Result<AmbientSpec> {
    AmbientSpec::new(rotation_map(theta, (0, 1), 2)?, ScalarField::Constant { c0 }, lambda)
}

pub fn case_i(lambda: f64, c0: f64, nodes: usize) -> Result<CircleCriticality> {
    let rho = radius_case_i(lambda, c0)?;
    let spec = case_i_spec(lambda, c0)?;
    Ok(CircleCriticality {
        case: CircleCase::TranslationZero,
        radii: vec![rho],
        polynomial_coeffs: None,
        residual_check: vec![sup_residual(rho, &spec, nodes)?],
    })
}

pub fn case_iii(lambda: f64, c0: f64, nodes: usize) -> Result<CircleCriticality> {
    let rho = radius_case_iii(lambda, c0)?;
    let spec = rotation_spec(0.0, lambda, c0)?;
    Ok(CircleCriticality {
        case: CircleCase::RotationFixingCircle,
        radii: vec![rho],
        polynomial_coeffs: None,
        residual_check: vec![sup_residual(rho, &spec, nodes)?],
    })
}

/// All positive roots of the rotation polynomial, each with the residual of
/// the corresponding circle (a root is only a candidate).
pub fn radii_case_iv(theta: f64, lambda: f64, c0: f64, nodes: usize) -> Result<CircleCriticality> {
    if !(lambda > 0.0) {
        return Err(Error::InvalidArgument(format!("lambda must be positive, got {lambda}")));
    }
    let radii = rotation_radii(theta, lambda, c0);
    let spec = rotation_spec(theta, lambda, c0)?;
    let residual_check = radii.iter().map(|&r| sup_residual(r, &spec, nodes)).collect::<Result<_>>()?;
    Ok(CircleCriticality {
        case: CircleCase::RotationOfPlane,
        radii,
        polynomial_coeffs: Some(quartic_coeffs(theta, lambda, c0)),
        residual_check,
    })
}

/// `count` equally spaced angles covering [0, 2π], both ends included.
pub fn theta_grid(count: usize) -> Vec<f64> {
    (0..count).map(|i| std::f64::consts::TAU * i as f64 / (count - 1) as f64).collect()
}

pub fn sweep_figure1(lambda: f64, c0: f64, thetas: &[f64]) -> Vec<(f64, Vec<f64>)> {
    thetas.iter().map(|&t| (t, rotation_radii(t, lambda, c0))).collect()
}

pub fn write_figure1_csv<W: Write>(rows: &[(f64, Vec<f64>)], mut w: W) -> Result<()> {
    let width = rows.iter().map(|(_, r)| r.len()).max().unwrap_or(0).max(1);
    let header: Vec<String> = std::iter::once("theta".to_string()).chain((1..=width).map(|k| format!("rho_{k}"))).collect();
    writeln!(w, "{}", header.join(","))?;
    for (theta, radii) in rows {
        let mut cells = vec![format!("{theta:.16e}")];
        for k in 0..width {
            cells.push(radii.get(k).map(|r| format!("{r:.16e}")).unwrap_or_default());
        }
        writeln!(w, "{}", cells.join(","))?;
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ScanMinimum {
    pub min_residual: f64,
    pub rho: f64,
}

/// Smallest sup-residual over origin-centred planar circles with radii on a
/// log grid, for L = 0 and translation M.
pub fn nonexistence_scan_case_ii(
    m: &[f64],
    lambda: f64,
    c0: f64,
    rho_range: (f64, f64),
    points: usize,
    nodes: usize,
) -> Result<ScanMinimum> {
    if m.len() != 2 {
        return Err(Error::DimensionMismatch { expected: 2, got: m.len() });
    }
    let (a, b) = rho_range;
    if !(a > 0.0 && b > a) || points < 2 {
        return Err(Error::InvalidArgument(format!("bad radius range [{a}, {b}] with {points} points")));
    }
    let spec = case_ii_spec(m, lambda, c0)?;
    let mut best = ScanMinimum { min_residual: f64::INFINITY, rho: a };
    for j in 0..points {
        let rho = a * (b / a).powf(j as f64 / (points - 1) as f64);
        let r = sup_residual(rho, &spec, nodes)?;
        if r < best.min_residual {
            best = ScanMinimum { min_residual: r, rho };
        }
    }
    Ok(best)
}
