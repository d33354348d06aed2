//! Closed polygonal curves in ℝⁿ and the discrete operators along them.
//!
//! Node `i` sits between segments `i-1` and `i`; segment `i` joins node `i` to
//! node `i+1` (indices mod N). Segment lengths are arclengths of the periodic
//! cubic spline through the nodes, so the stencils stay second order on the
//! slightly non-uniform meshes that appear between resamples.

use std::fmt::Write as _;
use std::io::{BufRead, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::spline::{equal_chord_nodes, PeriodicSpline};

pub const MIN_NODES: usize = 8;
pub const TOL_MESH: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq)]
pub struct DiscreteCurve {
    dim: usize,
    points: Vec<f64>,
}

impl DiscreteCurve {
    /// `points` is row-major, one row of `dim` coordinates per node.
    pub fn new(dim: usize, points: Vec<f64>) -> Result<Self> {
        if dim < 2 {
            return Err(Error::Dimension(dim));
        }
        if points.len() % dim != 0 {
            return Err(Error::InvalidArgument(format!(
                "{} coordinates do not split into rows of {dim}",
                points.len()
            )));
        }
        let n = points.len() / dim;
        if n < MIN_NODES {
            return Err(Error::TooFewNodes { min: MIN_NODES, got: n });
        }
        if let Some(i) = points.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(i / dim));
        }
        let curve = Self { dim, points };
        let chords = curve.chords();
        let mean = chords.iter().sum::<f64>() / n as f64;
        for (i, &c) in chords.iter().enumerate() {
            if !(c > 1e-12 * mean) {
                return Err(Error::Degenerate { index: i, length: c });
            }
        }
        Ok(curve)
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        if let Some(r) = rows.iter().find(|r| r.len() != dim) {
            return Err(Error::DimensionMismatch { expected: dim, got: r.len() });
        }
        Self::new(dim, rows.concat())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of nodes.
    pub fn len(&self) -> usize {
        self.points.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn chords(&self) -> Vec<f64> {
        let n = self.len();
        (0..n).map(|i| dist(self.point(i), self.point((i + 1) % n))).collect()
    }

    /// max chord / min chord.
    pub fn chord_ratio(&self) -> f64 {
        ratio(&self.chords())
    }

    pub fn centroid(&self) -> Vec<f64> {
        let n = self.len();
        let mut c = vec![0.0; self.dim];
        for i in 0..n {
            for (d, v) in self.point(i).iter().enumerate() {
                c[d] += v;
            }
        }
        c.iter_mut().for_each(|v| *v /= n as f64);
        c
    }

    pub fn max_radius(&self) -> f64 {
        (0..self.len()).map(|i| norm(self.point(i))).fold(0.0, f64::max)
    }

    /// γ + s·X, validated.
    pub fn displaced(&self, field: &NodeField, s: f64) -> Result<Self> {
        self.check_field(field)?;
        let pts = self.points.iter().zip(field.values.iter()).map(|(p, v)| p + s * v).collect();
        Self::new(self.dim, pts)
    }

    pub fn translated(&self, offset: &[f64]) -> Result<Self> {
        if offset.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: offset.len() });
        }
        let pts = self.points.iter().enumerate().map(|(k, p)| p + offset[k % self.dim]).collect();
        Self::new(self.dim, pts)
    }

    pub fn as_field(&self) -> NodeField {
        NodeField { dim: self.dim, values: self.points.clone() }
    }

    pub(crate) fn check_field(&self, field: &NodeField) -> Result<()> {
        if field.dim != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: field.dim });
        }
        if field.len() != self.len() {
            return Err(Error::InvalidArgument(format!(
                "field has {} nodes, curve has {}",
                field.len(),
                self.len()
            )));
        }
        Ok(())
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "# n={} N={}", self.dim, self.len())?;
        let mut line = String::new();
        for i in 0..self.len() {
            line.clear();
            for (d, v) in self.point(i).iter().enumerate() {
                if d > 0 {
                    line.push(',');
                }
                write!(line, "{v:.16e}").expect("write to string");
            }
            writeln!(w, "{line}")?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(r: R) -> Result<Self> {
        let mut header: Option<(usize, usize)> = None;
        let mut values = Vec::new();
        let mut rows = 0usize;
        for (lineno, line) in r.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('#') {
                if header.is_none() {
                    header = Some(parse_header(rest).ok_or_else(|| {
                        Error::Parse(format!("line {}: expected header `# n=<dim> N=<count>`", lineno + 1))
                    })?);
                }
                continue;
            }
            let (dim, _) = header.ok_or_else(|| Error::Parse("missing `# n=<dim> N=<count>` header".into()))?;
            let row: std::result::Result<Vec<f64>, _> = line.split(',').map(|s| s.trim().parse::<f64>()).collect();
            let row = row.map_err(|e| Error::Parse(format!("line {}: {e}", lineno + 1)))?;
            if row.len() != dim {
                return Err(Error::Parse(format!("line {}: expected {dim} columns, got {}", lineno + 1, row.len())));
            }
            values.extend(row);
            rows += 1;
        }
        let (dim, count) = header.ok_or_else(|| Error::Parse("empty curve file".into()))?;
        if rows != count {
            return Err(Error::Parse(format!("header declares N={count} but file has {rows} rows")));
        }
        Self::new(dim, values)
    }
}

fn parse_header(s: &str) -> Option<(usize, usize)> {
    let mut dim = None;
    let mut count = None;
    for tok in s.split_whitespace() {
        if let Some(v) = tok.strip_prefix("n=") {
            dim = v.parse().ok();
        } else if let Some(v) = tok.strip_prefix("N=") {
            count = v.parse().ok();
        }
    }
    Some((dim?, count?))
}

#[derive(Clone, Debug, PartialEq)]
pub struct NodeField {
    dim: usize,
    values: Vec<f64>,
}

impl NodeField {
    pub fn zeros(dim: usize, nodes: usize) -> Self {
        Self { dim, values: vec![0.0; dim * nodes] }
    }

    pub fn from_vec(dim: usize, values: Vec<f64>) -> Self {
        assert!(dim > 0 && values.len() % dim == 0, "field values must split into rows of {dim}");
        Self { dim, values }
    }

    pub fn from_fn(dim: usize, nodes: usize, mut f: impl FnMut(usize, &mut [f64])) -> Self {
        let mut out = Self::zeros(dim, nodes);
        for i in 0..nodes {
            f(i, out.get_mut(i));
        }
        out
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.values.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, i: usize) -> &[f64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    pub fn get_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.values[i * self.dim..(i + 1) * self.dim]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.values
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self { dim: self.dim, values: self.values.iter().map(|v| s * v).collect() }
    }

    pub fn add(&self, other: &Self) -> Self {
        self.combine(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.combine(other, |a, b| a - b)
    }

    fn combine(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Self {
        assert_eq!(self.values.len(), other.values.len(), "field shapes differ");
        Self { dim: self.dim, values: self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect() }
    }

    /// Largest node-wise Euclidean norm.
    pub fn sup_norm(&self) -> f64 {
        (0..self.len()).map(|i| norm(self.get(i))).fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

/// Per-curve discretisation data: spline segment lengths, trapezoid weights,
/// unit tangents and normal curvature.
#[derive(Clone, Debug)]
pub struct Geometry {
    dim: usize,
    segments: Vec<f64>,
    weights: Vec<f64>,
    tangent: NodeField,
    curvature: NodeField,
}

impl Geometry {
    pub fn new(curve: &DiscreteCurve) -> Result<Self> {
        let spline = PeriodicSpline::through(curve)?;
        let segments = spline.segment_arclengths();
        Ok(Self::with_segments(curve, segments))
    }

    fn with_segments(curve: &DiscreteCurve, segments: Vec<f64>) -> Self {
        let n = curve.len();
        let dim = curve.dim();
        let weights = (0..n).map(|i| 0.5 * (segments[(i + n - 1) % n] + segments[i])).collect();
        let tangent = NodeField::from_fn(dim, n, |i, out| {
            let next = curve.point((i + 1) % n);
            let prev = curve.point((i + n - 1) % n);
            for d in 0..dim {
                out[d] = next[d] - prev[d];
            }
            let len = norm(out);
            out.iter_mut().for_each(|v| *v /= len);
        });
        let mut geom = Self { dim, segments, weights, tangent, curvature: NodeField::zeros(dim, n) };
        let d2 = geom.second_difference(&curve.as_field());
        geom.curvature = geom.project(&d2);
        geom
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn segments(&self) -> &[f64] {
        &self.segments
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn tangent(&self) -> &NodeField {
        &self.tangent
    }

    pub fn curvature(&self) -> &NodeField {
        &self.curvature
    }

    pub fn length(&self) -> f64 {
        self.segments.iter().sum()
    }

    /// max segment / min segment.
    pub fn segment_ratio(&self) -> f64 {
        ratio(&self.segments)
    }

    pub fn project(&self, x: &NodeField) -> NodeField {
        NodeField::from_fn(self.dim, self.len(), |i, out| {
            let t = self.tangent.get(i);
            let xi = x.get(i);
            let p = dot(xi, t);
            for d in 0..self.dim {
                out[d] = xi[d] - p * t[d];
            }
        })
    }

    /// Central first difference in arclength.
    pub fn first_difference(&self, x: &NodeField) -> NodeField {
        let n = self.len();
        NodeField::from_fn(self.dim, n, |i, out| {
            let next = x.get((i + 1) % n);
            let prev = x.get((i + n - 1) % n);
            let span = 2.0 * self.weights[i];
            for d in 0..self.dim {
                out[d] = (next[d] - prev[d]) / span;
            }
        })
    }

    /// Three-point second difference on the (possibly non-uniform) mesh.
    pub fn second_difference(&self, x: &NodeField) -> NodeField {
        let n = self.len();
        NodeField::from_fn(self.dim, n, |i, out| {
            let next = x.get((i + 1) % n);
            let prev = x.get((i + n - 1) % n);
            let here = x.get(i);
            let hp = self.segments[i];
            let hm = self.segments[(i + n - 1) % n];
            for d in 0..self.dim {
                out[d] = 2.0 * ((next[d] - here[d]) / hp - (here[d] - prev[d]) / hm) / (hp + hm);
            }
        })
    }

    /// ∇ₛX = [∂ₛX]^⊥.
    pub fn normal_derivative(&self, x: &NodeField) -> NodeField {
        self.project(&self.first_difference(x))
    }

    /// ∇ₛ∇ₛX in the compact form [∂ₛ²X]^⊥ − ⟨∂ₛX, τ⟩k.
    pub fn normal_laplacian(&self, x: &NodeField) -> NodeField {
        let d1 = self.first_difference(x);
        let mut out = self.project(&self.second_difference(x));
        for i in 0..self.len() {
            let a = dot(d1.get(i), self.tangent.get(i));
            let k = self.curvature.get(i);
            for (o, kd) in out.get_mut(i).iter_mut().zip(k) {
                *o -= a * kd;
            }
        }
        out
    }

    /// Trapezoid rule ∫ g ds.
    pub fn integrate(&self, density: impl Fn(usize) -> f64) -> f64 {
        self.weights.iter().enumerate().map(|(i, w)| w * density(i)).sum()
    }

    /// ∫⟨X, Y⟩ ds.
    pub fn inner(&self, x: &NodeField, y: &NodeField) -> f64 {
        self.integrate(|i| dot(x.get(i), y.get(i)))
    }

    pub fn l2_norm(&self, x: &NodeField) -> f64 {
        self.inner(x, x).sqrt()
    }
}

/// Arclength of the periodic cubic spline through the nodes.
pub fn length(curve: &DiscreteCurve) -> Result<f64> {
    Ok(PeriodicSpline::through(curve)?.arclength())
}

/// Sum of chord lengths.
pub fn polygon_length(curve: &DiscreteCurve) -> f64 {
    curve.chords().iter().sum()
}

/// Resamples onto `n_out` nodes with equal chords along the periodic cubic
/// spline through the input, keeping node 0 in place.
pub fn resample_uniform(curve: &DiscreteCurve, n_out: usize) -> Result<DiscreteCurve> {
    if n_out < MIN_NODES {
        return Err(Error::TooFewNodes { min: MIN_NODES, got: n_out });
    }
    let spline = PeriodicSpline::through(curve)?;
    let pts = equal_chord_nodes(&spline, n_out)?;
    let out = DiscreteCurve::new(curve.dim(), pts)?;
    let r = out.chord_ratio();
    if r > 1.0 + TOL_MESH {
        return Err(Error::Resample(format!("chord ratio {r} after resampling")));
    }
    Ok(out)
}

pub fn tangent(curve: &DiscreteCurve) -> Result<NodeField> {
    Ok(Geometry::new(curve)?.tangent)
}

pub fn curvature(curve: &DiscreteCurve) -> Result<NodeField> {
    Ok(Geometry::new(curve)?.curvature)
}

pub fn normal_projection(x: &NodeField, curve: &DiscreteCurve) -> Result<NodeField> {
    curve.check_field(x)?;
    Ok(Geometry::new(curve)?.project(x))
}

pub fn normal_derivative(x: &NodeField, curve: &DiscreteCurve) -> Result<NodeField> {
    curve.check_field(x)?;
    Ok(Geometry::new(curve)?.normal_derivative(x))
}

/// Ellipse with semi-axes `a` (x₁) and `b` (x₂), sampled uniformly in the angle.
pub fn ellipse(a: f64, b: f64, dim: usize, nodes: usize) -> Result<DiscreteCurve> {
    let mut pts = vec![0.0; dim * nodes];
    for i in 0..nodes {
        let s = std::f64::consts::TAU * i as f64 / nodes as f64;
        pts[i * dim] = a * s.cos();
        pts[i * dim + 1] = b * s.sin();
    }
    DiscreteCurve::new(dim, pts)
}

/// Unit circle in the (x₁, x₂) plane plus seeded Fourier modes 2..=`modes`
/// in every coordinate, mode m scaled by `amplitude / m²`.
pub fn fourier_curve(dim: usize, nodes: usize, modes: usize, amplitude: f64, seed: u64) -> Result<DiscreteCurve> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut coeffs = Vec::new();
    for m in 2..=modes {
        for d in 0..dim {
            let a: f64 = rng.gen_range(-1.0..1.0) * amplitude / (m * m) as f64;
            let phase: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
            coeffs.push((m as f64, d, a, phase));
        }
    }
    let mut pts = vec![0.0; dim * nodes];
    for i in 0..nodes {
        let u = std::f64::consts::TAU * i as f64 / nodes as f64;
        let row = &mut pts[i * dim..(i + 1) * dim];
        row[0] = u.cos();
        row[1] = u.sin();
        for &(m, d, a, phase) in &coeffs {
            row[d] += a * (m * u + phase).cos();
        }
    }
    DiscreteCurve::new(dim, pts)
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn ratio(v: &[f64]) -> f64 {
    let max = v.iter().cloned().fold(f64::MIN, f64::max);
    let min = v.iter().cloned().fold(f64::MAX, f64::min);
    max / min
}
