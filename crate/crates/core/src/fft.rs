use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

use crate::curve::NodeField;

/// Applies (I + α D⁴)⁻¹ to every coordinate of a periodic node field, where D⁴
/// is the five-point stencil (1, −4, 6, −4, 1).
pub(crate) fn solve_biharmonic_shift(field: &NodeField, alpha: f64) -> NodeField {
    let n = field.len();
    let dim = field.dim();
    let mut planner = FftPlanner::<f64>::new();
    let forward = planner.plan_fft_forward(n);
    let inverse = planner.plan_fft_inverse(n);
    let symbol: Vec<f64> = (0..n)
        .map(|m| {
            let s = 2.0 - 2.0 * (std::f64::consts::TAU * m as f64 / n as f64).cos();
            1.0 + alpha * s * s
        })
        .collect();
    let mut out = NodeField::zeros(dim, n);
    let mut buf = vec![Complex64::new(0.0, 0.0); n];
    for d in 0..dim {
        for (i, b) in buf.iter_mut().enumerate() {
            *b = Complex64::new(field.get(i)[d], 0.0);
        }
        forward.process(&mut buf);
        for (b, s) in buf.iter_mut().zip(&symbol) {
            *b /= s * n as f64;
        }
        inverse.process(&mut buf);
        for (i, b) in buf.iter().enumerate() {
            out.get_mut(i)[d] = b.re;
        }
    }
    out
}
