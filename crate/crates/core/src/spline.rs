//! Periodic cubic spline through the nodes of a closed polyline, parametrised
//! by cumulative chord length.

use crate::curve::DiscreteCurve;
use crate::error::{Error, Result};

// 8-point Gauss-Legendre rule on [-1, 1].
const GL_NODES: [f64; 8] = [
    -0.960_289_856_497_536_3,
    -0.796_666_477_413_626_7,
    -0.525_532_409_916_329,
    -0.183_434_642_495_649_8,
    0.183_434_642_495_649_8,
    0.525_532_409_916_329,
    0.796_666_477_413_626_7,
    0.960_289_856_497_536_3,
];
const GL_WEIGHTS: [f64; 8] = [
    0.101_228_536_290_376_26,
    0.222_381_034_453_374_47,
    0.313_706_645_877_887_3,
    0.362_683_783_378_362,
    0.362_683_783_378_362,
    0.313_706_645_877_887_3,
    0.222_381_034_453_374_47,
    0.101_228_536_290_376_26,
];

#[derive(Clone, Debug)]
pub struct PeriodicSpline {
    dim: usize,
    /// knots[i] = parameter of node i; knots[N] = period.
    knots: Vec<f64>,
    y: Vec<f64>,
    /// Second derivatives at the knots, N × dim.
    m: Vec<f64>,
}

impl PeriodicSpline {
    pub fn through(curve: &DiscreteCurve) -> Result<Self> {
        let dim = curve.dim();
        let n = curve.len();
        let h = curve.chords();
        let mean = h.iter().sum::<f64>() / n as f64;
        for (i, &hi) in h.iter().enumerate() {
            if !(hi > 1e-12 * mean) {
                return Err(Error::Degenerate { index: i, length: hi });
            }
        }
        let mut knots = Vec::with_capacity(n + 1);
        let mut acc = 0.0;
        knots.push(0.0);
        for &hi in &h {
            acc += hi;
            knots.push(acc);
        }

        let y = curve.points().to_vec();
        let lower: Vec<f64> = (0..n).map(|i| h[(i + n - 1) % n]).collect();
        let diag: Vec<f64> = (0..n).map(|i| 2.0 * (h[(i + n - 1) % n] + h[i])).collect();
        let upper: Vec<f64> = h.clone();

        let mut m = vec![0.0; n * dim];
        let mut rhs = vec![0.0; n];
        for d in 0..dim {
            for i in 0..n {
                let ip = (i + 1) % n;
                let im = (i + n - 1) % n;
                let fwd = (y[ip * dim + d] - y[i * dim + d]) / h[i];
                let bwd = (y[i * dim + d] - y[im * dim + d]) / h[im];
                rhs[i] = 6.0 * (fwd - bwd);
            }
            let sol = solve_cyclic_tridiagonal(&lower, &diag, &upper, &rhs);
            for i in 0..n {
                m[i * dim + d] = sol[i];
            }
        }
        Ok(Self { dim, knots, y, m })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nodes(&self) -> usize {
        self.knots.len() - 1
    }

    pub fn period(&self) -> f64 {
        self.knots[self.nodes()]
    }

    /// Segment index and local offset for a parameter, wrapped into one period.
    fn locate(&self, t: f64) -> (usize, f64) {
        let p = self.period();
        let mut t = t.rem_euclid(p);
        if t >= p {
            t = 0.0;
        }
        let seg = match self.knots.binary_search_by(|k| k.partial_cmp(&t).unwrap()) {
            Ok(i) => i.min(self.nodes() - 1),
            Err(i) => i - 1,
        };
        (seg, t - self.knots[seg])
    }

    fn coefficients(&self, seg: usize, d: usize) -> (f64, f64, f64, f64) {
        let n = self.nodes();
        let dim = self.dim;
        let next = (seg + 1) % n;
        let h = self.knots[seg + 1] - self.knots[seg];
        let y0 = self.y[seg * dim + d];
        let y1 = self.y[next * dim + d];
        let m0 = self.m[seg * dim + d];
        let m1 = self.m[next * dim + d];
        let b = (y1 - y0) / h - h * (2.0 * m0 + m1) / 6.0;
        (y0, b, 0.5 * m0, (m1 - m0) / (6.0 * h))
    }

    pub fn eval(&self, t: f64, out: &mut [f64]) {
        let (seg, x) = self.locate(t);
        for (d, o) in out.iter_mut().enumerate().take(self.dim) {
            let (a, b, c, e) = self.coefficients(seg, d);
            *o = a + x * (b + x * (c + x * e));
        }
    }

    pub fn derivative(&self, t: f64, out: &mut [f64]) {
        let (seg, x) = self.locate(t);
        self.segment_derivative(seg, x, out);
    }

    fn segment_derivative(&self, seg: usize, x: f64, out: &mut [f64]) {
        for (d, o) in out.iter_mut().enumerate().take(self.dim) {
            let (_, b, c, e) = self.coefficients(seg, d);
            *o = b + x * (2.0 * c + x * 3.0 * e);
        }
    }

    fn speed(&self, seg: usize, x: f64, buf: &mut [f64]) -> f64 {
        self.segment_derivative(seg, x, buf);
        buf.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Arclength of segment `seg` between local offsets `a` and `b`.
    fn partial_arclength(&self, seg: usize, a: f64, b: f64) -> f64 {
        let mut buf = vec![0.0; self.dim];
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        GL_NODES
            .iter()
            .zip(GL_WEIGHTS.iter())
            .map(|(&x, &w)| w * self.speed(seg, mid + half * x, &mut buf))
            .sum::<f64>()
            * half
    }

    pub fn segment_arclength(&self, seg: usize) -> f64 {
        let h = self.knots[seg + 1] - self.knots[seg];
        self.partial_arclength(seg, 0.0, h)
    }

    pub fn segment_arclengths(&self) -> Vec<f64> {
        (0..self.nodes()).map(|i| self.segment_arclength(i)).collect()
    }

    pub fn arclength(&self) -> f64 {
        self.segment_arclengths().iter().sum()
    }
}

/// Solves the periodic tridiagonal system
/// `lower[i] x[i-1] + diag[i] x[i] + upper[i] x[i+1] = rhs[i]` (indices mod N)
/// by the Sherman-Morrison correction of a plain Thomas sweep.
pub fn solve_cyclic_tridiagonal(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &[f64]) -> Vec<f64> {
    let n = diag.len();
    let alpha = upper[n - 1]; // entry (N-1, 0)
    let beta = lower[0]; // entry (0, N-1)
    let gamma = -diag[0];
    let mut bb = diag.to_vec();
    bb[0] -= gamma;
    bb[n - 1] -= alpha * beta / gamma;
    let x = thomas(lower, &bb, upper, rhs);
    let mut u = vec![0.0; n];
    u[0] = gamma;
    u[n - 1] = alpha;
    let z = thomas(lower, &bb, upper, &u);
    let fact = (x[0] + beta * x[n - 1] / gamma) / (1.0 + z[0] + beta * z[n - 1] / gamma);
    x.iter().zip(z.iter()).map(|(xi, zi)| xi - fact * zi).collect()
}

fn thomas(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &[f64]) -> Vec<f64> {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    c[0] = upper[0] / diag[0];
    d[0] = rhs[0] / diag[0];
    for i in 1..n {
        let den = diag[i] - lower[i] * c[i - 1];
        c[i] = upper[i] / den;
        d[i] = (rhs[i] - lower[i] * d[i - 1]) / den;
    }
    let mut x = vec![0.0; n];
    x[n - 1] = d[n - 1];
    for i in (0..n - 1).rev() {
        x[i] = d[i] - c[i] * x[i + 1];
    }
    x
}

/// Places `n_out` nodes on the spline so that all consecutive chords are equal,
/// starting at the spline's first node.
pub fn equal_chord_nodes(spline: &PeriodicSpline, n_out: usize) -> Result<Vec<f64>> {
    let period = spline.period();
    let total = spline.arclength();
    let target = |c: f64| -> Result<f64> { Ok(march(spline, c, n_out, None)? - period) };

    let guess = total / n_out as f64;
    let (mut lo, mut hi) = (0.95 * guess, guess);
    let mut f_lo = target(lo)?;
    let mut f_hi = target(hi)?;
    let mut expand = 0;
    while f_lo > 0.0 {
        lo *= 0.9;
        f_lo = target(lo)?;
        expand += 1;
        if expand > 60 {
            return Err(Error::Resample("cannot bracket the common chord length".into()));
        }
    }
    while f_hi < 0.0 {
        hi *= 1.1;
        f_hi = target(hi)?;
        expand += 1;
        if expand > 60 {
            return Err(Error::Resample("cannot bracket the common chord length".into()));
        }
    }

    // Illinois variant of regula falsi.
    let tol = 1e-14 * period;
    let mut chord = hi;
    let mut side = 0i8;
    for _ in 0..200 {
        chord = (lo * f_hi - hi * f_lo) / (f_hi - f_lo);
        if !(chord > lo && chord < hi) {
            chord = 0.5 * (lo + hi);
        }
        let f = target(chord)?;
        if f.abs() <= tol || (hi - lo) <= 1e-15 * hi {
            break;
        }
        if f > 0.0 {
            hi = chord;
            f_hi = f;
            if side == 1 {
                f_lo *= 0.5;
            }
            side = 1;
        } else {
            lo = chord;
            f_lo = f;
            if side == -1 {
                f_hi *= 0.5;
            }
            side = -1;
        }
    }

    let mut params = Vec::with_capacity(n_out);
    march(spline, chord, n_out, Some(&mut params))?;
    let dim = spline.dim();
    let mut out = vec![0.0; n_out * dim];
    for (j, &t) in params.iter().enumerate() {
        spline.eval(t, &mut out[j * dim..(j + 1) * dim]);
    }
    Ok(out)
}

/// Walks `steps` chords of length `chord` from parameter 0 and returns the
/// parameter reached by the last one.
fn march(spline: &PeriodicSpline, chord: f64, steps: usize, mut params: Option<&mut Vec<f64>>) -> Result<f64> {
    let dim = spline.dim();
    let mut anchor = vec![0.0; dim];
    let mut p = vec![0.0; dim];
    let mut dp = vec![0.0; dim];
    let mut t = 0.0;
    spline.eval(0.0, &mut anchor);
    if let Some(ps) = params.as_deref_mut() {
        ps.push(0.0);
    }

    // g(t) = |S(t) - anchor| - chord, increasing just past the anchor.
    let g = |s: f64, anchor: &[f64], p: &mut [f64], dp: &mut [f64]| -> (f64, f64) {
        spline.eval(s, p);
        spline.derivative(s, dp);
        let mut dist2 = 0.0;
        let mut radial = 0.0;
        for d in 0..dim {
            let r = p[d] - anchor[d];
            dist2 += r * r;
            radial += r * dp[d];
        }
        let dist = dist2.sqrt();
        (dist - chord, if dist > 0.0 { radial / dist } else { 1.0 })
    };

    for j in 1..=steps {
        let mut lo = t;
        let mut hi = t + chord;
        let mut tries = 0;
        while g(hi, &anchor, &mut p, &mut dp).0 < 0.0 {
            hi += 0.5 * chord;
            tries += 1;
            if tries > 100 {
                return Err(Error::Resample("chord walk does not advance".into()));
            }
        }
        let mut s = 0.5 * (lo + hi);
        for _ in 0..100 {
            let (val, slope) = g(s, &anchor, &mut p, &mut dp);
            if val > 0.0 {
                hi = s;
            } else {
                lo = s;
            }
            let mut next = s - val / slope;
            if !(next > lo && next < hi) || !next.is_finite() {
                next = 0.5 * (lo + hi);
            }
            let moved = (next - s).abs();
            s = next;
            if moved <= 1e-16 * (1.0 + s.abs()) || hi - lo <= 1e-16 * (1.0 + s.abs()) {
                break;
            }
        }
        t = s;
        if j < steps {
            spline.eval(t, &mut anchor);
            if let Some(ps) = params.as_deref_mut() {
                ps.push(t);
            }
        }
    }
    Ok(t)
}
