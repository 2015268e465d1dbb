use super::{mon_exps, mon_index, nmon, apply_diff, DiffOp, Frame, PolyField, Shape};
use crate::error::{Error, Result};

/// A straight triangle with counterclockwise vertices. Edge `i` joins
/// vertices `i+1` and `i+2` (mod 3) and is traversed counterclockwise.
#[derive(Clone, Debug, PartialEq)]
pub struct Cell {
    pub vertices: [[f64; 2]; 3],
    /// Local frame (centroid, diameter) used for fields living on the cell.
    pub frame: Frame,
}

fn factorial(n: usize) -> f64 {
    (1..=n).fold(1.0, |a, k| a * k as f64)
}

impl Cell {
    pub fn new(vertices: [[f64; 2]; 3]) -> Result<Cell> {
        if vertices.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("cell vertices"));
        }
        let c = Cell {
            vertices,
            frame: Frame::IDENTITY,
        };
        let a = c.signed_area();
        let d = c.diameter();
        if !(a > 1e-14 * d * d) {
            return Err(Error::Topology(format!(
                "cell {vertices:?} is degenerate or clockwise"
            )));
        }
        let g = c.centroid();
        Ok(Cell {
            vertices,
            frame: Frame { origin: g, scale: d },
        })
    }

    /// The reference triangle `(-1/2, 0), (1/2, 0), (0, sqrt(3)/2)`, with
    /// fields written directly in its coordinates.
    pub fn reference() -> Cell {
        Cell {
            vertices: [[-0.5, 0.0], [0.5, 0.0], [0.0, 3f64.sqrt() / 2.0]],
            frame: Frame::IDENTITY,
        }
    }

    pub fn with_frame(mut self, frame: Frame) -> Cell {
        self.frame = frame;
        self
    }

    pub fn signed_area(&self) -> f64 {
        let [a, b, c] = self.vertices;
        0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
    }

    pub fn area(&self) -> f64 {
        self.signed_area().abs()
    }

    pub fn centroid(&self) -> [f64; 2] {
        let [a, b, c] = self.vertices;
        [(a[0] + b[0] + c[0]) / 3.0, (a[1] + b[1] + c[1]) / 3.0]
    }

    pub fn diameter(&self) -> f64 {
        (0..3).map(|i| self.edge_length(i)).fold(0.0, f64::max)
    }

    /// Endpoints of edge `i` in counterclockwise order.
    pub fn edge(&self, i: usize) -> ([f64; 2], [f64; 2]) {
        (self.vertices[(i + 1) % 3], self.vertices[(i + 2) % 3])
    }

    pub fn edge_length(&self, i: usize) -> f64 {
        let (a, b) = self.edge(i);
        ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt()
    }

    pub fn tangent(&self, i: usize) -> [f64; 2] {
        let (a, b) = self.edge(i);
        let l = self.edge_length(i);
        [(b[0] - a[0]) / l, (b[1] - a[1]) / l]
    }

    /// Outward unit normal of edge `i`.
    pub fn normal(&self, i: usize) -> [f64; 2] {
        let t = self.tangent(i);
        [t[1], -t[0]]
    }

    /// Barycentric coordinates of a physical point.
    pub fn bary_at(&self, x: [f64; 2]) -> [f64; 3] {
        let [a, b, c] = self.vertices;
        let det = 2.0 * self.signed_area();
        let l1 = ((b[0] - x[0]) * (c[1] - x[1]) - (c[0] - x[0]) * (b[1] - x[1])) / det;
        let l2 = ((c[0] - x[0]) * (a[1] - x[1]) - (a[0] - x[0]) * (c[1] - x[1])) / det;
        [l1, l2, 1.0 - l1 - l2]
    }

    /// The barycentric coordinates as affine fields in `frame`.
    pub fn bary_fields(&self, frame: Frame) -> [PolyField; 3] {
        let o = self.bary_at([0.0, 0.0]);
        let ex = self.bary_at([1.0, 0.0]);
        let ey = self.bary_at([0.0, 1.0]);
        let f = |k: usize| PolyField::affine(o[k], ex[k] - o[k], ey[k] - o[k], frame);
        [f(0), f(1), f(2)]
    }

    /// Affine map `x = J xhat + b` from the reference triangle onto this cell
    /// (reference vertex `k` goes to vertex `k`).
    pub fn reference_map(&self) -> ([[f64; 2]; 2], [f64; 2]) {
        let r = Cell::reference().vertices;
        let v = self.vertices;
        // columns of J from the two edge vectors
        let (r1, r2) = (sub(r[1], r[0]), sub(r[2], r[0]));
        let (v1, v2) = (sub(v[1], v[0]), sub(v[2], v[0]));
        let det = r1[0] * r2[1] - r2[0] * r1[1];
        let rinv = [[r2[1] / det, -r2[0] / det], [-r1[1] / det, r1[0] / det]];
        let mut j = [[0.0; 2]; 2];
        for a in 0..2 {
            for b in 0..2 {
                j[a][b] = v1[a] * rinv[0][b] + v2[a] * rinv[1][b];
            }
        }
        let b = [
            v[0][0] - j[0][0] * r[0][0] - j[0][1] * r[0][1],
            v[0][1] - j[1][0] * r[0][0] - j[1][1] * r[0][1],
        ];
        (j, b)
    }

    /// Exact integrals of `xi^i eta^j` over the cell for `i + j <= maxdeg`,
    /// where `xi` are the local variables of `frame`.
    pub fn monomial_moments(&self, frame: Frame, maxdeg: usize) -> Vec<f64> {
        let loc: Vec<[f64; 2]> = self.vertices.iter().map(|&v| frame.local(v)).collect();
        let xi = [loc[0][0], loc[1][0], loc[2][0]];
        let eta = [loc[0][1], loc[1][1], loc[2][1]];
        let mut out = vec![0.0; nmon(maxdeg)];
        // homogeneous barycentric polynomials, stored by (a, b) with c = d - a - b
        let mut row = Homog::one();
        for i in 0..=maxdeg {
            if i > 0 {
                row = row.times_linear(xi);
            }
            let mut h = row.clone();
            for j in 0..=(maxdeg - i) {
                if j > 0 {
                    h = h.times_linear(eta);
                }
                out[mon_index(i, j)] = h.integrate(self);
            }
        }
        out
    }
}

fn sub(a: [f64; 2], b: [f64; 2]) -> [f64; 2] {
    [a[0] - b[0], a[1] - b[1]]
}

/// Homogeneous polynomial in the barycentric coordinates.
#[derive(Clone)]
struct Homog {
    d: usize,
    c: Vec<f64>,
}

impl Homog {
    fn one() -> Homog {
        Homog { d: 0, c: vec![1.0] }
    }

    fn idx(d: usize, a: usize, b: usize) -> usize {
        // a runs 0..=d, b runs 0..=d-a
        a * (d + 1) - a * a.saturating_sub(1) / 2 + b
    }

    fn times_linear(&self, w: [f64; 3]) -> Homog {
        let d = self.d + 1;
        let mut c = vec![0.0; (d + 1) * (d + 2) / 2];
        for a in 0..=self.d {
            for b in 0..=(self.d - a) {
                let v = self.c[Self::idx(self.d, a, b)];
                if v == 0.0 {
                    continue;
                }
                c[Self::idx(d, a + 1, b)] += v * w[0];
                c[Self::idx(d, a, b + 1)] += v * w[1];
                c[Self::idx(d, a, b)] += v * w[2];
            }
        }
        Homog { d, c }
    }

    fn integrate(&self, cell: &Cell) -> f64 {
        let mut s = 0.0;
        for a in 0..=self.d {
            for b in 0..=(self.d - a) {
                let c = self.d - a - b;
                s += self.c[Self::idx(self.d, a, b)] * integrate_bary(a, b, c, cell);
            }
        }
        s
    }
}

/// `int_K l1^a l2^b l3^c = 2|K| a! b! c! / (a+b+c+2)!`
pub fn integrate_bary(a: usize, b: usize, c: usize, cell: &Cell) -> f64 {
    2.0 * cell.area() * factorial(a) * factorial(b) * factorial(c) / factorial(a + b + c + 2)
}

/// `int_K f : g` (Frobenius product for matrix fields). Both fields must share
/// a shape and a frame.
pub fn l2_inner(f: &PolyField, g: &PolyField, cell: &Cell) -> Result<f64> {
    if f.shape() != g.shape() {
        return Err(Error::Shape(format!("{:?} vs {:?}", f.shape(), g.shape())));
    }
    if f.frame() != g.frame() {
        return Err(Error::Shape("fields live in different frames".into()));
    }
    let (pf, pg) = (f.degree(), g.degree());
    let mom = cell.monomial_moments(f.frame(), pf + pg);
    let (nf, ng) = (nmon(pf), nmon(pg));
    let (ef, eg) = (mon_exps(pf), mon_exps(pg));
    let w = f.shape().weights();
    let mut s = 0.0;
    for (c, wc) in w.iter().enumerate() {
        let fc = &f.coeffs()[c * nf..(c + 1) * nf];
        let gc = &g.coeffs()[c * ng..(c + 1) * ng];
        let mut part = 0.0;
        for (a, &(i1, j1)) in ef.iter().enumerate() {
            if fc[a] == 0.0 {
                continue;
            }
            let mut inner = 0.0;
            for (b, &(i2, j2)) in eg.iter().enumerate() {
                inner += gc[b] * mom[mon_index(i1 + i2, j1 + j2)];
            }
            part += fc[a] * inner;
        }
        s += wc * part;
    }
    Ok(s)
}

/// `(f, g) + (div f, div g)` for vector or matrix fields.
pub fn hdiv_inner(f: &PolyField, g: &PolyField, cell: &Cell) -> Result<f64> {
    let op = match f.shape() {
        Shape::Vector2 => DiffOp::DivVector,
        Shape::Matrix2 | Shape::SymMatrix2 => DiffOp::DivTensor,
        s => return Err(Error::Shape(format!("H(div) product of {s:?}"))),
    };
    let df = apply_diff(op, f)?;
    let dg = apply_diff(op, g)?;
    Ok(l2_inner(f, g, cell)? + l2_inner(&df, &dg, cell)?)
}

#[cfg(test)]
mod tests {
    use super::super::quad::tri_quadrature;
    use super::*;

    fn skew_cell() -> Cell {
        Cell::new([[0.2, 0.1], [1.3, 0.4], [0.5, 1.1]]).unwrap()
    }

    #[test]
    fn bary_integral_values() {
        let k = Cell::new([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]).unwrap();
        assert!((integrate_bary(1, 1, 1, &k) - 1.0 / 120.0).abs() < 1e-16);
        assert!((integrate_bary(0, 0, 0, &k) - 0.5).abs() < 1e-16);
    }

    #[test]
    fn moments_match_quadrature() {
        let k = skew_cell();
        let mom = k.monomial_moments(k.frame, 8);
        let q = tri_quadrature(8);
        let v = k.vertices;
        for (idx, &(i, j)) in mon_exps(8).iter().enumerate() {
            let mut s = 0.0;
            for (p, w) in q.points.iter().zip(&q.weights) {
                let (u, t) = ((p[0] + 1.0) / 2.0, (p[1] + 1.0) / 2.0);
                let x = [
                    v[0][0] + u * (v[1][0] - v[0][0]) + t * (v[2][0] - v[0][0]),
                    v[0][1] + u * (v[1][1] - v[0][1]) + t * (v[2][1] - v[0][1]),
                ];
                let xi = k.frame.local(x);
                s += w * xi[0].powi(i as i32) * xi[1].powi(j as i32);
            }
            s *= k.area() / 2.0;
            assert!((s - mom[idx]).abs() < 1e-15, "{i},{j}: {s} vs {}", mom[idx]);
        }
    }

    #[test]
    fn reference_map_hits_vertices() {
        let k = skew_cell();
        let (j, b) = k.reference_map();
        for (r, v) in Cell::reference().vertices.iter().zip(k.vertices.iter()) {
            let x = [j[0][0] * r[0] + j[0][1] * r[1] + b[0], j[1][0] * r[0] + j[1][1] * r[1] + b[1]];
            assert!((x[0] - v[0]).abs() < 1e-14 && (x[1] - v[1]).abs() < 1e-14);
        }
    }

    #[test]
    fn clockwise_cell_rejected() {
        assert!(Cell::new([[0.0, 0.0], [0.0, 1.0], [1.0, 0.0]]).is_err());
    }

    #[test]
    fn normals_point_outward() {
        let k = skew_cell();
        let g = k.centroid();
        for i in 0..3 {
            let (a, _) = k.edge(i);
            let n = k.normal(i);
            assert!((a[0] - g[0]) * n[0] + (a[1] - g[1]) * n[1] > 0.0);
        }
    }
}
