//! Ambient data inducing the spontaneous curvature `c = (Lγ + M) + f(γ) τ`.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::curve::{dot, DiscreteCurve, Geometry, NodeField};
use crate::energy;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct AffineMap {
    pub l: DMatrix<f64>,
    pub m: DVector<f64>,
}

impl AffineMap {
    pub fn new(l: DMatrix<f64>, m: DVector<f64>) -> Result<Self> {
        if !l.is_square() {
            return Err(Error::InvalidArgument(format!("L is {}x{}, not square", l.nrows(), l.ncols())));
        }
        if m.len() != l.nrows() {
            return Err(Error::DimensionMismatch { expected: l.nrows(), got: m.len() });
        }
        if l.iter().chain(m.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("non-finite entry in L or M".into()));
        }
        Ok(Self { l, m })
    }

    pub fn zero(dim: usize) -> Self {
        Self { l: DMatrix::zeros(dim, dim), m: DVector::zeros(dim) }
    }

    pub fn identity(dim: usize) -> Self {
        Self { l: DMatrix::identity(dim, dim), m: DVector::zeros(dim) }
    }

    pub fn translation(m: &[f64]) -> Self {
        Self { l: DMatrix::zeros(m.len(), m.len()), m: DVector::from_column_slice(m) }
    }

    pub fn dim(&self) -> usize {
        self.m.len()
    }

    pub fn apply(&self, x: &[f64], out: &mut [f64]) {
        let n = self.dim();
        for (r, o) in out.iter_mut().enumerate().take(n) {
            *o = self.m[r] + (0..n).map(|c| self.l[(r, c)] * x[c]).sum::<f64>();
        }
    }

    fn linear(&self, x: &[f64], out: &mut [f64]) {
        let n = self.dim();
        for (r, o) in out.iter_mut().enumerate().take(n) {
            *o = (0..n).map(|c| self.l[(r, c)] * x[c]).sum();
        }
    }

    fn linear_transpose(&self, x: &[f64], out: &mut [f64]) {
        let n = self.dim();
        for (c, o) in out.iter_mut().enumerate().take(n) {
            *o = (0..n).map(|r| self.l[(r, c)] * x[r]).sum();
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScalarField {
    Constant { c0: f64 },
    /// f(x) = 1/(1+|x|²).
    InverseQuadratic,
}

impl ScalarField {
    pub fn value(&self, x: &[f64]) -> f64 {
        match self {
            Self::Constant { c0 } => *c0,
            Self::InverseQuadratic => 1.0 / (1.0 + dot(x, x)),
        }
    }

    /// Gradient (df)ᵀ written into `out`.
    pub fn gradient(&self, x: &[f64], out: &mut [f64]) {
        match self {
            Self::Constant { .. } => out.iter_mut().for_each(|v| *v = 0.0),
            Self::InverseQuadratic => {
                let q = 1.0 + dot(x, x);
                let s = -2.0 / (q * q);
                for (o, xi) in out.iter_mut().zip(x) {
                    *o = s * xi;
                }
            }
        }
    }

    pub fn hessian(&self, x: &[f64]) -> DMatrix<f64> {
        let n = x.len();
        match self {
            Self::Constant { .. } => DMatrix::zeros(n, n),
            Self::InverseQuadratic => {
                let q = 1.0 + dot(x, x);
                DMatrix::from_fn(n, n, |i, j| {
                    let diag = if i == j { -2.0 / (q * q) } else { 0.0 };
                    diag + 8.0 * x[i] * x[j] / (q * q * q)
                })
            }
        }
    }

    /// Bounds `[c₀, c₁, c₂]` on sup|f|, sup|df|, sup|d²f|.
    pub fn bounds(&self) -> [f64; 3] {
        match self {
            Self::Constant { c0 } => [c0.abs(), 0.0, 0.0],
            // |df| peaks at |x| = 1/√3; |d²f| peaks at the origin.
            Self::InverseQuadratic => [1.0, 3.0 * 3f64.sqrt() / 8.0, 2.0],
        }
    }

    pub fn is_radial(&self) -> bool {
        true
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AmbientSpec {
    pub affine: AffineMap,
    pub scalar: ScalarField,
    pub lambda: f64,
}

impl AmbientSpec {
    pub fn new(affine: AffineMap, scalar: ScalarField, lambda: f64) -> Result<Self> {
        if !(lambda > 0.0) || !lambda.is_finite() {
            return Err(Error::InvalidArgument(format!("lambda must be positive, got {lambda}")));
        }
        if let ScalarField::Constant { c0 } = scalar {
            if !c0.is_finite() {
                return Err(Error::InvalidArgument("non-finite constant f".into()));
            }
        }
        Ok(Self { affine, scalar, lambda })
    }

    /// No affine part, constant f.
    pub fn elastic(dim: usize, c0: f64, lambda: f64) -> Result<Self> {
        Self::new(AffineMap::zero(dim), ScalarField::Constant { c0 }, lambda)
    }

    pub fn dim(&self) -> usize {
        self.affine.dim()
    }

    pub(crate) fn check_curve(&self, curve: &DiscreteCurve) -> Result<()> {
        if curve.dim() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: curve.dim() });
        }
        Ok(())
    }
}

/// Spontaneous curvature sampled along a curve.
#[derive(Clone, Debug)]
pub struct Spontaneous {
    /// c⃗ = Lγ + M.
    pub cvec: NodeField,
    /// f̂ = f(γ).
    pub fhat: Vec<f64>,
    /// c = c⃗ + f̂τ.
    pub c: NodeField,
    /// (df)ᵀ at γ.
    pub df: NodeField,
}

pub fn spontaneous(curve: &DiscreteCurve, spec: &AmbientSpec) -> Result<Spontaneous> {
    spec.check_curve(curve)?;
    let geom = Geometry::new(curve)?;
    Ok(spontaneous_on(curve, &geom, spec))
}

pub(crate) fn spontaneous_on(curve: &DiscreteCurve, geom: &Geometry, spec: &AmbientSpec) -> Spontaneous {
    let n = curve.len();
    let dim = curve.dim();
    let cvec = NodeField::from_fn(dim, n, |i, out| spec.affine.apply(curve.point(i), out));
    let fhat: Vec<f64> = (0..n).map(|i| spec.scalar.value(curve.point(i))).collect();
    let c = NodeField::from_fn(dim, n, |i, out| {
        let t = geom.tangent().get(i);
        for d in 0..dim {
            out[d] = cvec.get(i)[d] + fhat[i] * t[d];
        }
    });
    let df = NodeField::from_fn(dim, n, |i, out| spec.scalar.gradient(curve.point(i), out));
    Spontaneous { cvec, fhat, c, df }
}

impl AffineMap {
    /// L X node-wise.
    pub(crate) fn linear_field(&self, x: &NodeField) -> NodeField {
        NodeField::from_fn(x.dim(), x.len(), |i, out| self.linear(x.get(i), out))
    }

    /// Lᵀ X node-wise.
    pub(crate) fn transpose_field(&self, x: &NodeField) -> NodeField {
        NodeField::from_fn(x.dim(), x.len(), |i, out| self.linear_transpose(x.get(i), out))
    }
}

/// Largest singular value by power iteration on LᵀL.
pub fn operator_norm(l: &DMatrix<f64>) -> f64 {
    const TOL: f64 = 1e-10;
    const MAX_ITER: usize = 10_000;
    let n = l.ncols();
    if n == 0 || l.iter().all(|&v| v == 0.0) {
        return 0.0;
    }
    let gram = l.transpose() * l;
    // Deterministic start with no special alignment to coordinate axes.
    let mut v = DVector::from_fn(n, |i, _| 1.0 + 0.1 * (i as f64 + 1.0).sqrt());
    v /= v.norm();
    let mut mu = 0.0;
    for _ in 0..MAX_ITER {
        let w = &gram * &v;
        mu = v.dot(&w);
        let resid = (&w - mu * &v).norm();
        if resid <= TOL * mu.abs() {
            return mu.max(0.0).sqrt();
        }
        let wn = w.norm();
        if wn == 0.0 {
            return 0.0;
        }
        v = w / wn;
    }
    log::warn!("operator_norm: power iteration did not converge in {MAX_ITER} steps");
    mu.max(0.0).sqrt()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct AffineVerdict {
    pub psd: bool,
    pub norm_ok: bool,
    pub valid: bool,
}

/// Positive semi-definiteness is taken in the quadratic-form sense, i.e. of
/// the symmetric part, since only ⟨τ, Lτ⟩ ≥ 0 is ever used.
pub fn validate_affine_assumption(l: &DMatrix<f64>, lambda: f64) -> AffineVerdict {
    let sym = 0.5 * (l + l.transpose());
    let min_eig = if sym.nrows() == 0 {
        0.0
    } else {
        sym.symmetric_eigenvalues().iter().cloned().fold(f64::INFINITY, f64::min)
    };
    let psd = min_eig >= -1e-12;
    let norm_ok = operator_norm(l) <= lambda + 1e-12;
    AffineVerdict { psd, norm_ok, valid: psd || norm_ok }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Properness {
    pub radius: Option<f64>,
    pub holds: bool,
}

pub const PROPERNESS_GRID: usize = 1000;
const RADIAL_SAMPLES: usize = 64;
const ANGULAR_SAMPLES: usize = 64;

/// Searches R on a log grid over [1e-3, 1e3] for which |f| exceeds
/// √3·E(γ₀)/π on the sampled annulus R ≤ |x| ≤ R + E(γ₀)/(2λ).
pub fn validate_properness(spec: &AmbientSpec, curve0: &DiscreteCurve) -> Result<Properness> {
    let h0 = energy::energy(curve0, spec)?.total;
    let threshold = 3f64.sqrt() * h0 / std::f64::consts::PI;
    let width = h0 / (2.0 * spec.lambda);
    let dim = spec.dim();
    let mut x = vec![0.0; dim];
    for g in 0..PROPERNESS_GRID {
        let r0 = 1e-3 * 1e6f64.powf(g as f64 / (PROPERNESS_GRID - 1) as f64);
        let mut ok = true;
        'radii: for a in 0..RADIAL_SAMPLES {
            let r = r0 + width * a as f64 / (RADIAL_SAMPLES - 1) as f64;
            let angles = if spec.scalar.is_radial() { 1 } else { ANGULAR_SAMPLES };
            for b in 0..angles {
                let phi = std::f64::consts::TAU * b as f64 / angles as f64;
                x.iter_mut().for_each(|v| *v = 0.0);
                x[0] = r * phi.cos();
                x[1] = r * phi.sin();
                if !(spec.scalar.value(&x).abs() > threshold) {
                    ok = false;
                    break 'radii;
                }
            }
        }
        if ok {
            return Ok(Properness { radius: Some(r0), holds: true });
        }
    }
    Ok(Properness { radius: None, holds: false })
}

/// Rotation by θ in span{e_i, e_j}, zero on the orthogonal complement, M = 0.
pub fn rotation_map(theta: f64, plane: (usize, usize), dim: usize) -> Result<AffineMap> {
    let (i, j) = plane;
    if !(i < j && j < dim) {
        return Err(Error::InvalidPlane(i, j, dim));
    }
    let mut l = DMatrix::zeros(dim, dim);
    let (s, c) = theta.sin_cos();
    l[(i, i)] = c;
    l[(i, j)] = -s;
    l[(j, i)] = s;
    l[(j, j)] = c;
    Ok(AffineMap { l, m: DVector::zeros(dim) })
}

/// Condition number σ_max/σ_min, infinite for singular matrices.
pub fn condition_number(l: &DMatrix<f64>) -> f64 {
    let sv = l.clone().singular_values();
    let max = sv.iter().cloned().fold(0.0, f64::max);
    let min = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}
