use super::quad::gauss_legendre;
use super::{Cell, PolyField, Shape};
use crate::error::{Error, Result};

/// A polynomial trace on a segment, stored as coefficients in the
/// `L^2(edge)`-orthonormal Legendre basis of the arclength parameter.
#[derive(Clone, Debug, PartialEq)]
pub struct EdgePoly {
    pub length: f64,
    pub ncomp: usize,
    pub degree: usize,
    /// component-major, `degree + 1` coefficients per component
    pub coeffs: Vec<f64>,
}

impl EdgePoly {
    pub fn comp(&self, c: usize) -> &[f64] {
        &self.coeffs[c * (self.degree + 1)..(c + 1) * (self.degree + 1)]
    }

    /// Value at arclength `s` from the start point.
    pub fn eval(&self, s: f64) -> Vec<f64> {
        let t = 2.0 * s / self.length - 1.0;
        let l = legendre_orthonormal(self.degree, t, self.length);
        (0..self.ncomp)
            .map(|c| self.comp(c).iter().zip(&l).map(|(a, b)| a * b).sum())
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TraceMode {
    Value,
    /// `v.n` for vectors, `sigma n` for matrices
    NormalComponent,
    /// `grad q . n` for scalars
    NormalDerivative,
}

/// `sqrt((2k+1)/L) P_k(t)` for `k = 0..=kmax`, orthonormal on an edge of
/// length `L` parametrised by `t in [-1, 1]`.
pub fn legendre_orthonormal(kmax: usize, t: f64, length: f64) -> Vec<f64> {
    let mut p = vec![0.0; kmax + 1];
    p[0] = 1.0;
    if kmax >= 1 {
        p[1] = t;
    }
    for k in 1..kmax {
        p[k + 1] = ((2 * k + 1) as f64 * t * p[k] - k as f64 * p[k - 1]) / (k + 1) as f64;
    }
    for (k, v) in p.iter_mut().enumerate() {
        *v *= ((2 * k + 1) as f64 / length).sqrt();
    }
    p
}

type PointMap<'a> = Box<dyn Fn([f64; 2]) -> Vec<f64> + 'a>;

/// Trace on edge `i` of `cell`, counterclockwise, outward normal.
pub fn edge_trace(f: &PolyField, cell: &Cell, edge: usize, mode: TraceMode) -> Result<EdgePoly> {
    if edge > 2 {
        return Err(Error::Dimension(format!("edge index {edge}")));
    }
    let (a, b) = cell.edge(edge);
    segment_trace(f, a, b, mode)
}

/// Trace on the segment `a -> b`; the normal is the tangent turned clockwise.
pub fn segment_trace(f: &PolyField, a: [f64; 2], b: [f64; 2], mode: TraceMode) -> Result<EdgePoly> {
    let len = ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt();
    let t = [(b[0] - a[0]) / len, (b[1] - a[1]) / len];
    let n = [t[1], -t[0]];
    let (g, ncomp): (PointMap<'_>, usize) = match (mode, f.shape()) {
        (TraceMode::Value, s) => (Box::new(|x| f.eval(x)), s.ncomp()),
        (TraceMode::NormalComponent, Shape::Vector2) => (
            Box::new(move |x| {
                let v = f.eval(x);
                vec![v[0] * n[0] + v[1] * n[1]]
            }),
            1,
        ),
        (TraceMode::NormalComponent, Shape::SymMatrix2) => (
            Box::new(move |x| {
                let v = f.eval(x);
                vec![v[0] * n[0] + v[1] * n[1], v[1] * n[0] + v[2] * n[1]]
            }),
            2,
        ),
        (TraceMode::NormalComponent, Shape::Matrix2) => (
            Box::new(move |x| {
                let v = f.eval(x);
                vec![v[0] * n[0] + v[1] * n[1], v[2] * n[0] + v[3] * n[1]]
            }),
            2,
        ),
        (TraceMode::NormalDerivative, Shape::Scalar) => {
            let (fx, fy) = (f.dx(), f.dy());
            (
                Box::new(move |x| vec![fx.eval(x)[0] * n[0] + fy.eval(x)[0] * n[1]]),
                1,
            )
        }
        (m, s) => return Err(Error::Shape(format!("{m:?} trace of {s:?}"))),
    };
    let degree = f.degree();
    let (xq, wq) = gauss_legendre(degree + 1);
    let mut coeffs = vec![0.0; ncomp * (degree + 1)];
    for (tq, w) in xq.iter().zip(&wq) {
        let s = 0.5 * (tq + 1.0);
        let x = [a[0] + s * (b[0] - a[0]), a[1] + s * (b[1] - a[1])];
        let vals = g(x);
        let l = legendre_orthonormal(degree, *tq, len);
        for c in 0..ncomp {
            for k in 0..=degree {
                coeffs[c * (degree + 1) + k] += 0.5 * len * w * vals[c] * l[k];
            }
        }
    }
    Ok(EdgePoly {
        length: len,
        ncomp,
        degree,
        coeffs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::{Frame, PolyField};

    #[test]
    fn trace_reproduces_values() {
        let k = Cell::new([[0.0, 0.0], [2.0, 0.5], [0.3, 1.0]]).unwrap();
        let mut q = PolyField::zeros(Shape::Scalar, 3, k.frame);
        q.coeffs_mut().iter_mut().enumerate().for_each(|(i, c)| *c = 0.3 * i as f64 - 1.0);
        for e in 0..3 {
            let tr = edge_trace(&q, &k, e, TraceMode::Value).unwrap();
            let (a, b) = k.edge(e);
            for s in [0.0, 0.3, 0.77] {
                let x = [a[0] + s * (b[0] - a[0]), a[1] + s * (b[1] - a[1])];
                let v = tr.eval(s * tr.length)[0];
                assert!((v - q.eval(x)[0]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn normal_derivative_of_linear() {
        let f = PolyField::affine(0.0, 1.0, 2.0, Frame::IDENTITY);
        let tr = segment_trace(&f, [0.0, 0.0], [1.0, 0.0], TraceMode::NormalDerivative).unwrap();
        // n = (0, -1)
        assert!((tr.eval(0.4)[0] + 2.0).abs() < 1e-14);
    }
}
