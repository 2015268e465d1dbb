//! Gauss rules on an interval and collapsed Gauss rules on triangles.

use std::f64::consts::PI;

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, z);
            let dz = p / d;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, z);
        x[i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * d * d);
    }
    x.reverse();
    w.reverse();
    (x, w)
}

/// `P_n(z)` and `P_n'(z)`.
pub fn legendre_with_derivative(n: usize, z: f64) -> (f64, f64) {
    if n == 0 {
        return (1.0, 0.0);
    }
    let (mut p0, mut p1) = (1.0, z);
    for k in 1..n {
        let p2 = ((2 * k + 1) as f64 * z * p1 - k as f64 * p0) / (k + 1) as f64;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (z * p1 - p0) / (z * z - 1.0);
    (p1, d)
}

/// Quadrature on the triangle `(-1,-1), (1,-1), (-1,1)`; weights sum to 2.
#[derive(Clone, Debug)]
pub struct TriQuad {
    pub points: Vec<[f64; 2]>,
    pub weights: Vec<f64>,
}

/// Collapsed Gauss rule exact for polynomials of total degree `degree`.
pub fn tri_quadrature(degree: usize) -> TriQuad {
    let n = degree / 2 + 2;
    let (x, w) = gauss_legendre(n);
    let mut points = Vec::with_capacity(n * n);
    let mut weights = Vec::with_capacity(n * n);
    for (i, &u) in x.iter().enumerate() {
        for (j, &v) in x.iter().enumerate() {
            let r = 0.5 * (1.0 + u) * (1.0 - v) - 1.0;
            points.push([r, v]);
            weights.push(w[i] * w[j] * 0.5 * (1.0 - v));
        }
    }
    TriQuad { points, weights }
}
