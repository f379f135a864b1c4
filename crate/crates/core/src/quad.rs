//! Quadrature rules used across the toolkit.
//!
//! The angular data grid uses composite trapezoid weights (the data only
//! exist at the measured angles). Basis-internal inner products use a
//! Gauss-Legendre rule on [0, 2π]: the integrands are polynomials times
//! e^{2θ}, and the trapezoid rule tops out around 1e-3 accuracy at any
//! practical resolution while Gauss-Legendre reaches machine precision.

use std::f64::consts::PI;

/// Gauss-Legendre nodes and weights on `[a, b]`.
///
/// Newton iteration on the Legendre recurrence; nodes are symmetric and
/// deterministic.
pub fn gauss_legendre(n: usize, a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 2);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        // Tricomi initial guess
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let (_, dp) = legendre_with_derivative(n, x);
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    for i in 0..n {
        nodes[i] = mid + half * nodes[i];
        weights[i] *= half;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Composite trapezoid weights for a uniform grid of `n` points spanning
/// `[0, len]` inclusive.
pub fn trapezoid_weights(n: usize, len: f64) -> Vec<f64> {
    assert!(n >= 2);
    let h = len / (n - 1) as f64;
    let mut w = vec![h; n];
    w[0] = 0.5 * h;
    w[n - 1] = 0.5 * h;
    w
}
