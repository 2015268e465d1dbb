//! Orthonormal (Dubiner) bases on triangles.
//!
//! The basis is evaluated by three-term recurrences on the collapsed
//! coordinates, carried out on second-order jets so that values, gradients
//! and Hessians come out together without any monomial expansion.

use std::ops::{Add, Mul, Sub};

use super::{nmon, Cell, Frame, PolyField, Shape};
use crate::error::{Error, Result};

/// Value, first and second derivatives of a function of two variables.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Jet {
    pub v: f64,
    pub x: f64,
    pub y: f64,
    pub xx: f64,
    pub xy: f64,
    pub yy: f64,
}

impl Jet {
    pub fn constant(v: f64) -> Jet {
        Jet { v, ..Default::default() }
    }

    pub fn scale(self, a: f64) -> Jet {
        Jet {
            v: a * self.v,
            x: a * self.x,
            y: a * self.y,
            xx: a * self.xx,
            xy: a * self.xy,
            yy: a * self.yy,
        }
    }

    /// Change of variables `u = G x` applied to derivatives: given the jet in
    /// `u`, returns the jet in `x` where `g[a][b] = du_a / dx_b`.
    pub fn chain(self, g: [[f64; 2]; 2]) -> Jet {
        let gx = self.x * g[0][0] + self.y * g[1][0];
        let gy = self.x * g[0][1] + self.y * g[1][1];
        let h = [[self.xx, self.xy], [self.xy, self.yy]];
        let mut hx = [[0.0; 2]; 2];
        for a in 0..2 {
            for c in 0..2 {
                let mut s = 0.0;
                for b in 0..2 {
                    for d in 0..2 {
                        s += g[b][a] * h[b][d] * g[d][c];
                    }
                }
                hx[a][c] = s;
            }
        }
        Jet {
            v: self.v,
            x: gx,
            y: gy,
            xx: hx[0][0],
            xy: hx[0][1],
            yy: hx[1][1],
        }
    }
}

impl Add for Jet {
    type Output = Jet;
    fn add(self, o: Jet) -> Jet {
        Jet {
            v: self.v + o.v,
            x: self.x + o.x,
            y: self.y + o.y,
            xx: self.xx + o.xx,
            xy: self.xy + o.xy,
            yy: self.yy + o.yy,
        }
    }
}

impl Sub for Jet {
    type Output = Jet;
    fn sub(self, o: Jet) -> Jet {
        self + o.scale(-1.0)
    }
}

impl Mul for Jet {
    type Output = Jet;
    fn mul(self, o: Jet) -> Jet {
        Jet {
            v: self.v * o.v,
            x: self.x * o.v + self.v * o.x,
            y: self.y * o.v + self.v * o.y,
            xx: self.xx * o.v + 2.0 * self.x * o.x + self.v * o.xx,
            xy: self.xy * o.v + self.x * o.y + self.y * o.x + self.v * o.xy,
            yy: self.yy * o.v + 2.0 * self.y * o.y + self.v * o.yy,
        }
    }
}

/// Algebra needed by the recurrences; implemented for jets and for
/// monomial polynomials so the same code produces both.
trait Ring: Clone {
    fn add(&self, o: &Self) -> Self;
    fn mul(&self, o: &Self) -> Self;
    fn scale(&self, a: f64) -> Self;
}

impl Ring for Jet {
    fn add(&self, o: &Self) -> Self {
        *self + *o
    }
    fn mul(&self, o: &Self) -> Self {
        *self * *o
    }
    fn scale(&self, a: f64) -> Self {
        Jet::scale(*self, a)
    }
}

impl Ring for PolyField {
    fn add(&self, o: &Self) -> Self {
        PolyField::add(self, o)
    }
    fn mul(&self, o: &Self) -> Self {
        self.mul_scalar(o)
    }
    fn scale(&self, a: f64) -> Self {
        PolyField::scale(self, a)
    }
}

/// Orthonormal basis of `P_p` on the triangle `(-1,-1), (1,-1), (-1,1)`,
/// given the coordinate functions `r`, `s` and the constant one.
fn dubiner<T: Ring>(p: usize, r: &T, s: &T, one: &T) -> Vec<T> {
    // e = r + (1 + s)/2 and c = (1 - s)/2 keep P_i(a) c^i polynomial
    let e = r.add(&one.add(s).scale(0.5));
    let c = one.add(&s.scale(-1.0)).scale(0.5);
    let c2 = c.mul(&c);
    let mut qi: Vec<T> = Vec::with_capacity(p + 1);
    qi.push(one.clone());
    if p >= 1 {
        qi.push(e.clone());
    }
    for n in 1..p {
        let a = e.mul(&qi[n]).scale((2 * n + 1) as f64);
        let b = c2.mul(&qi[n - 1]).scale(-(n as f64));
        qi.push(a.add(&b).scale(1.0 / (n + 1) as f64));
    }
    // Jacobi P_j^{(alpha, 0)}(s) for each alpha = 2i + 1
    let jacobi = |alpha: f64, jmax: usize| -> Vec<T> {
        let mut pj: Vec<T> = vec![one.clone()];
        if jmax >= 1 {
            pj.push(s.scale(0.5 * (alpha + 2.0)).add(&one.scale(0.5 * alpha)));
        }
        for n in 2..=jmax {
            let nf = n as f64;
            let a1 = 2.0 * nf * (nf + alpha) * (2.0 * nf + alpha - 2.0);
            let a2 = (2.0 * nf + alpha - 1.0) * alpha * alpha;
            let a3 = (2.0 * nf + alpha - 1.0) * (2.0 * nf + alpha) * (2.0 * nf + alpha - 2.0);
            let a4 = 2.0 * (nf + alpha - 1.0) * (nf - 1.0) * (2.0 * nf + alpha);
            let t = s
                .scale(a3)
                .add(&one.scale(a2))
                .mul(&pj[n - 1])
                .add(&pj[n - 2].scale(-a4))
                .scale(1.0 / a1);
            pj.push(t);
        }
        pj
    };
    let jac: Vec<Vec<T>> = (0..=p).map(|i| jacobi((2 * i + 1) as f64, p - i)).collect();
    let mut out = Vec::with_capacity(nmon(p));
    for d in 0..=p {
        for j in 0..=d {
            let i = d - j;
            let norm = (((2 * i + 1) * (i + j + 1)) as f64 / 2.0).sqrt();
            out.push(qi[i].mul(&jac[i][j]).scale(norm));
        }
    }
    out
}

/// Affine data taking a cell to the modal reference triangle.
#[derive(Clone, Debug)]
pub struct ModalMap {
    v0: [f64; 2],
    /// d(r, s) / dx
    g: [[f64; 2]; 2],
    /// sqrt(2 / |K|), making the pulled-back basis orthonormal on the cell
    scale: f64,
}

impl ModalMap {
    pub fn new(cell: &Cell) -> ModalMap {
        let [v0, v1, v2] = cell.vertices;
        let m = [[v1[0] - v0[0], v2[0] - v0[0]], [v1[1] - v0[1], v2[1] - v0[1]]];
        let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
        let inv = [[m[1][1] / det, -m[0][1] / det], [-m[1][0] / det, m[0][0] / det]];
        let g = [[2.0 * inv[0][0], 2.0 * inv[0][1]], [2.0 * inv[1][0], 2.0 * inv[1][1]]];
        ModalMap {
            v0,
            g,
            scale: (2.0 / cell.area()).sqrt(),
        }
    }

    pub fn to_reference(&self, x: [f64; 2]) -> [f64; 2] {
        let d = [x[0] - self.v0[0], x[1] - self.v0[1]];
        [
            self.g[0][0] * d[0] + self.g[0][1] * d[1] - 1.0,
            self.g[1][0] * d[0] + self.g[1][1] * d[1] - 1.0,
        ]
    }

    /// Jets (physical derivatives) of the `L^2(K)`-orthonormal scalar basis
    /// of degree `p` at the physical point `x`.
    pub fn jets(&self, p: usize, x: [f64; 2]) -> Vec<Jet> {
        let rs = self.to_reference(x);
        reference_jets(p, rs)
            .into_iter()
            .map(|j| j.chain(self.g).scale(self.scale))
            .collect()
    }
}

/// Jets in the modal reference variables `(r, s)`.
pub fn reference_jets(p: usize, rs: [f64; 2]) -> Vec<Jet> {
    let r = Jet { v: rs[0], x: 1.0, ..Default::default() };
    let s = Jet { v: rs[1], y: 1.0, ..Default::default() };
    dubiner(p, &r, &s, &Jet::constant(1.0))
}

/// `L^2(K)`-orthonormal basis of `P_p(K)` of the requested shape, written as
/// monomial fields in the cell frame. Matrix-valued members are built from
/// the Frobenius-orthonormal units `E11`, `(E12 + E21)/sqrt 2`, `E22`
/// (symmetric) or the four matrix units. Ordering is component-major.
pub fn orthonormal_cell_basis(cell: &Cell, shape: Shape, p: usize) -> Result<Vec<PolyField>> {
    let scalars = scalar_basis_monomial(cell, p)?;
    let frame = cell.frame;
    let zero = PolyField::zeros(Shape::Scalar, p, frame);
    let nc = shape.ncomp();
    let mut out = Vec::with_capacity(nc * scalars.len());
    for c in 0..nc {
        let factor = if shape == Shape::SymMatrix2 && c == 1 {
            1.0 / 2f64.sqrt()
        } else {
            1.0
        };
        for q in &scalars {
            let mut comps = vec![zero.clone(); nc];
            comps[c] = q.scale(factor);
            out.push(PolyField::from_components(shape, &comps)?);
        }
    }
    Ok(out)
}

fn scalar_basis_monomial(cell: &Cell, p: usize) -> Result<Vec<PolyField>> {
    let map = ModalMap::new(cell);
    let frame = cell.frame;
    if !(frame.scale > 0.0) {
        return Err(Error::Shape("cell frame has no scale".into()));
    }
    // (r, s) as affine functions of the frame variables
    let o = map.to_reference(frame.origin);
    let sc = frame.scale;
    let r = lin(o[0], map.g[0][0] * sc, map.g[0][1] * sc, frame);
    let s = lin(o[1], map.g[1][0] * sc, map.g[1][1] * sc, frame);
    let one = PolyField::constant(1.0, frame);
    Ok(dubiner(p, &r, &s, &one)
        .into_iter()
        .map(|q| q.scale(map.scale).with_degree(p))
        .collect())
}

fn lin(c0: f64, c1: f64, c2: f64, frame: Frame) -> PolyField {
    let mut f = PolyField::zeros(Shape::Scalar, 1, frame);
    f.coeffs_mut().copy_from_slice(&[c0, c1, c2]);
    f
}

#[cfg(test)]
mod tests {
    use super::super::quad::tri_quadrature;
    use super::*;
    use crate::poly::l2_inner;

    #[test]
    fn reference_basis_is_orthonormal() {
        let p = 10;
        let q = tri_quadrature(2 * p);
        let n = nmon(p);
        let mut g = vec![0.0; n * n];
        for (pt, w) in q.points.iter().zip(&q.weights) {
            let j = reference_jets(p, *pt);
            for a in 0..n {
                for b in 0..n {
                    g[a * n + b] += w * j[a].v * j[b].v;
                }
            }
        }
        for a in 0..n {
            for b in 0..n {
                let e = if a == b { 1.0 } else { 0.0 };
                assert!((g[a * n + b] - e).abs() < 1e-12, "{a},{b}: {}", g[a * n + b]);
            }
        }
    }

    #[test]
    fn jets_match_monomial_form() {
        let k = Cell::new([[0.1, 0.0], [1.0, 0.3], [0.4, 0.8]]).unwrap();
        let map = ModalMap::new(&k);
        let basis = scalar_basis_monomial(&k, 4).unwrap();
        let x = [0.45, 0.35];
        let jets = map.jets(4, x);
        for (f, j) in basis.iter().zip(&jets) {
            assert!((f.eval(x)[0] - j.v).abs() < 1e-11);
            assert!((f.dx().eval(x)[0] - j.x).abs() < 1e-10);
            assert!((f.dx().dy().eval(x)[0] - j.xy).abs() < 1e-9);
            assert!((f.dy().dy().eval(x)[0] - j.yy).abs() < 1e-9);
        }
    }

    #[test]
    fn symmetric_basis_gram_is_identity() {
        let k = Cell::new([[0.0, 0.0], [1.0, 0.0], [0.2, 0.9]]).unwrap();
        let b = orthonormal_cell_basis(&k, Shape::SymMatrix2, 3).unwrap();
        assert_eq!(b.len(), 30);
        for (i, f) in b.iter().enumerate() {
            for (j, g) in b.iter().enumerate() {
                let e = if i == j { 1.0 } else { 0.0 };
                assert!((l2_inner(f, g, &k).unwrap() - e).abs() < 1e-10);
            }
        }
    }
}
