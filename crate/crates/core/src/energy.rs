//! Helfrich energy, its L² gradient and a finite-difference oracle for it.

use serde::Serialize;

use crate::ambient::{spontaneous_on, AmbientSpec, Spontaneous};
use crate::curve::{dot, DiscreteCurve, Geometry, NodeField};
use crate::error::{Error, Result};

/// Meshes whose largest spline segment exceeds this multiple of the smallest
/// are refused by the gradient.
pub const MAX_SEGMENT_RATIO: f64 = 2.0;
pub const MIN_GRADIENT_NODES: usize = 16;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EnergyReport {
    /// ½∫|k − c|² ds
    pub bending: f64,
    /// λ L(γ)
    pub length_term: f64,
    pub total: f64,
    /// ½∫|k|² ds
    pub elastic_only: f64,
    /// ½∫|c|² ds
    pub spontaneous_only: f64,
}

/// H = −(V_k + V_c), with V_k = −∇ₛ²k − ½|k|²k + λk the elastic part of the
/// velocity and V_c everything the spontaneous curvature adds.
#[derive(Clone, Debug, PartialEq)]
pub struct GradientField {
    pub total: NodeField,
    pub vk: NodeField,
    pub vc: NodeField,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum AmbientLaplacian {
    /// ∇ₛ²c⃗ by differencing the sampled field c⃗.
    #[default]
    Generic,
    /// ∇ₛ²c⃗ = (Lk)^⊥ − ⟨τ, Lτ⟩k, exact for affine c⃗.
    ClosedForm,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ResidualNorms {
    pub l2: f64,
    pub sup: f64,
}

pub fn energy(curve: &DiscreteCurve, spec: &AmbientSpec) -> Result<EnergyReport> {
    spec.check_curve(curve)?;
    let geom = Geometry::new(curve)?;
    let sp = spontaneous_on(curve, &geom, spec);
    Ok(energy_on(&geom, &sp, spec))
}

pub(crate) fn energy_on(geom: &Geometry, sp: &Spontaneous, spec: &AmbientSpec) -> EnergyReport {
    let k = geom.curvature();
    let c = &sp.c;
    let bending = 0.5
        * geom.integrate(|i| {
            let (ki, ci) = (k.get(i), c.get(i));
            ki.iter().zip(ci).map(|(a, b)| (a - b) * (a - b)).sum()
        });
    let length_term = spec.lambda * geom.length();
    EnergyReport {
        bending,
        length_term,
        total: bending + length_term,
        elastic_only: 0.5 * geom.integrate(|i| dot(k.get(i), k.get(i))),
        spontaneous_only: 0.5 * geom.integrate(|i| dot(c.get(i), c.get(i))),
    }
}

pub fn euler_lagrange(curve: &DiscreteCurve, spec: &AmbientSpec) -> Result<GradientField> {
    euler_lagrange_with(curve, spec, AmbientLaplacian::Generic)
}

pub fn euler_lagrange_with(curve: &DiscreteCurve, spec: &AmbientSpec, mode: AmbientLaplacian) -> Result<GradientField> {
    Ok(evaluate(curve, spec, mode)?.1)
}

/// Energy and gradient from one geometry pass.
pub(crate) fn evaluate(
    curve: &DiscreteCurve,
    spec: &AmbientSpec,
    mode: AmbientLaplacian,
) -> Result<(EnergyReport, GradientField, Geometry)> {
    spec.check_curve(curve)?;
    if curve.len() < MIN_GRADIENT_NODES {
        return Err(Error::TooFewNodes { min: MIN_GRADIENT_NODES, got: curve.len() });
    }
    let geom = Geometry::new(curve)?;
    let ratio = geom.segment_ratio();
    if ratio > MAX_SEGMENT_RATIO {
        return Err(Error::NonUniformMesh(ratio));
    }
    let sp = spontaneous_on(curve, &geom, spec);
    let report = energy_on(&geom, &sp, spec);
    let grad = gradient_on(&geom, &sp, spec, mode);
    Ok((report, grad, geom))
}

fn gradient_on(geom: &Geometry, sp: &Spontaneous, spec: &AmbientSpec, mode: AmbientLaplacian) -> GradientField {
    let n = geom.len();
    let dim = geom.dim();
    let lambda = spec.lambda;
    let k = geom.curvature();
    let tau = geom.tangent();
    let affine = &spec.affine;

    let lap_k = geom.normal_laplacian(k);
    let lap_cvec = match mode {
        AmbientLaplacian::Generic => geom.normal_laplacian(&sp.cvec),
        AmbientLaplacian::ClosedForm => {
            let lk = geom.project(&affine.linear_field(k));
            let ltau = affine.linear_field(tau);
            NodeField::from_fn(dim, n, |i, out| {
                let a = dot(tau.get(i), ltau.get(i));
                for d in 0..dim {
                    out[d] = lk.get(i)[d] - a * k.get(i)[d];
                }
            })
        }
    };
    let lt_k_minus_cvec = affine.transpose_field(&k.sub(&sp.cvec));
    let l_tau = affine.linear_field(tau);
    let lt_tau = affine.transpose_field(tau);

    let vk = NodeField::from_fn(dim, n, |i, out| {
        let ki = k.get(i);
        let s = lambda - 0.5 * dot(ki, ki);
        for d in 0..dim {
            out[d] = -lap_k.get(i)[d] + s * ki[d];
        }
    });

    // Zeroth-order spontaneous terms, projected below.
    let raw = NodeField::from_fn(dim, n, |i, out| {
        let ki = k.get(i);
        let ti = tau.get(i);
        let cv = sp.cvec.get(i);
        let f = sp.fhat[i];
        let df = sp.df.get(i);
        let shrink = -0.5 * dot(cv, cv) - 0.5 * f * f;
        let c_tau = dot(sp.c.get(i), ti);
        let df_tau = dot(df, ti);
        for d in 0..dim {
            out[d] = shrink * ki[d] - lt_k_minus_cvec.get(i)[d]
                + f * (lt_tau.get(i)[d] - l_tau.get(i)[d])
                + c_tau * df[d]
                - df_tau * cv[d];
        }
    });
    let raw = geom.project(&raw);
    let vc = NodeField::from_fn(dim, n, |i, out| {
        for d in 0..dim {
            out[d] = lap_cvec.get(i)[d] - raw.get(i)[d];
        }
    });
    let total = vk.add(&vc).scaled(-1.0);
    GradientField { total, vk, vc }
}

/// Central difference of the energy along γ ± εφ at fixed parametrisation.
pub fn first_variation_fd(curve: &DiscreteCurve, spec: &AmbientSpec, phi: &NodeField, eps: f64) -> Result<f64> {
    if !(1e-8..=1e-3).contains(&eps) {
        return Err(Error::InvalidArgument(format!("eps {eps:e} outside [1e-8, 1e-3]")));
    }
    let plus = curve.displaced(phi, eps)?;
    let minus = curve.displaced(phi, -eps)?;
    Ok((energy(&plus, spec)?.total - energy(&minus, spec)?.total) / (2.0 * eps))
}

/// ∫⟨X, Y⟩ ds with the curve's trapezoid weights.
pub fn pairing(curve: &DiscreteCurve, x: &NodeField, y: &NodeField) -> Result<f64> {
    curve.check_field(x)?;
    curve.check_field(y)?;
    Ok(Geometry::new(curve)?.inner(x, y))
}

pub fn residual_norms(curve: &DiscreteCurve, spec: &AmbientSpec) -> Result<ResidualNorms> {
    let (_, grad, geom) = evaluate(curve, spec, AmbientLaplacian::Generic)?;
    Ok(norms_of(&geom, &grad.total))
}

pub(crate) fn norms_of(geom: &Geometry, h: &NodeField) -> ResidualNorms {
    ResidualNorms { l2: geom.l2_norm(h), sup: h.sup_norm() }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{PI, TAU};

    fn circle(rho: f64, n: usize) -> DiscreteCurve {
        let pts = (0..n)
            .flat_map(|i| {
                let s = TAU * i as f64 / n as f64;
                [rho * s.cos(), rho * s.sin()]
            })
            .collect();
        DiscreteCurve::new(2, pts).unwrap()
    }

    #[test]
    fn unit_circle_energies() {
        let e = energy(&circle(1.0, 512), &AmbientSpec::elastic(2, 0.0, 1.0).unwrap()).unwrap();
        assert!((e.bending - PI).abs() < 1e-3);
        assert!((e.length_term - TAU).abs() < 1e-3);
        assert!((e.total - 3.0 * PI).abs() < 1e-3);
        let (c0, lambda) = (0.7, 0.4);
        let e = energy(&circle(1.0, 512), &AmbientSpec::elastic(2, c0, lambda).unwrap()).unwrap();
        assert!((e.total - (PI * (1.0 + c0 * c0) + TAU * lambda)).abs() < 1e-3);
    }

    #[test]
    fn total_is_bending_plus_length() {
        let c = crate::curve::fourier_curve(3, 128, 5, 0.1, 4).unwrap();
        let e = energy(&c, &AmbientSpec::elastic(3, 0.0, 0.6).unwrap()).unwrap();
        assert_eq!(e.total, e.bending + e.length_term);
        assert!((e.total - (e.elastic_only + e.length_term)).abs() <= 1e-12 * e.total);
    }

    #[test]
    fn zero_direction_gives_zero_variation() {
        let c = circle(1.0, 64);
        let spec = AmbientSpec::elastic(2, 0.3, 1.0).unwrap();
        let v = first_variation_fd(&c, &spec, &NodeField::zeros(2, 64), 1e-5).unwrap();
        assert_eq!(v, 0.0);
        assert!(first_variation_fd(&c, &spec, &NodeField::zeros(2, 64), 1e-2).is_err());
    }

    #[test]
    fn small_or_irregular_meshes_are_refused() {
        let spec = AmbientSpec::elastic(2, 0.0, 1.0).unwrap();
        assert!(matches!(euler_lagrange(&circle(1.0, 12), &spec), Err(Error::TooFewNodes { .. })));
        let pts = (0..64)
            .flat_map(|i| {
                let u = TAU * i as f64 / 64.0;
                let s = u + 0.9 * u.sin();
                [s.cos(), s.sin()]
            })
            .collect();
        let skewed = DiscreteCurve::new(2, pts).unwrap();
        assert!(matches!(euler_lagrange(&skewed, &spec), Err(Error::NonUniformMesh(_))));
    }

    #[test]
    fn gradient_is_normal_and_split_adds_up() {
        let c = crate::curve::resample_uniform(&crate::curve::fourier_curve(3, 256, 5, 0.1, 11).unwrap(), 128).unwrap();
        let spec = AmbientSpec::new(
            crate::ambient::rotation_map(1.0, (0, 1), 3).unwrap(),
            crate::ambient::ScalarField::InverseQuadratic,
            0.9,
        )
        .unwrap();
        let g = euler_lagrange(&c, &spec).unwrap();
        let t = crate::curve::tangent(&c).unwrap();
        let scale = 1.0 + g.total.sup_norm();
        for i in 0..c.len() {
            assert!(dot(g.total.get(i), t.get(i)).abs() <= 1e-10 * scale);
        }
        let back = g.vk.add(&g.vc).scaled(-1.0);
        assert!(back.sub(&g.total).sup_norm() <= 1e-12 * scale);
    }

    #[test]
    fn critical_circle_residual_is_small() {
        let spec = AmbientSpec::elastic(2, 0.0, 0.5).unwrap();
        let r = residual_norms(&circle(1.0, 256), &spec).unwrap();
        assert!(r.sup < 1e-3 && r.l2 < 1e-3, "{r:?}");
    }
}
