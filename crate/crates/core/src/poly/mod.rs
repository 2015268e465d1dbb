//! Polynomial fields on triangles.
//!
//! A [`PolyField`] stores monomial coefficients in a local frame
//! `xi = (x - origin) / scale`; the monomials are ordered by total degree
//! and then by the power of the second variable, so that the coefficients of
//! a lower-degree field are a prefix of those of a higher-degree one.

mod cell;
mod edge;
pub mod modal;
pub mod quad;

pub use cell::{hdiv_inner, integrate_bary, l2_inner, Cell};
pub use edge::{edge_trace, legendre_orthonormal, segment_trace, EdgePoly, TraceMode};
pub use modal::{orthonormal_cell_basis, Jet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Shape {
    Scalar,
    /// components `(v1, v2)`
    Vector2,
    /// row-major `(m11, m12, m21, m22)`
    Matrix2,
    /// `(s11, s12, s22)`
    SymMatrix2,
}

impl Shape {
    pub fn ncomp(self) -> usize {
        match self {
            Shape::Scalar => 1,
            Shape::Vector2 => 2,
            Shape::Matrix2 => 4,
            Shape::SymMatrix2 => 3,
        }
    }

    /// Weights turning the component-wise sum into the Frobenius product.
    pub fn weights(self) -> &'static [f64] {
        match self {
            Shape::Scalar => &[1.0],
            Shape::Vector2 => &[1.0, 1.0],
            Shape::Matrix2 => &[1.0, 1.0, 1.0, 1.0],
            Shape::SymMatrix2 => &[1.0, 2.0, 1.0],
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Frame {
    pub origin: [f64; 2],
    pub scale: f64,
}

impl Frame {
    pub const IDENTITY: Frame = Frame {
        origin: [0.0, 0.0],
        scale: 1.0,
    };

    pub fn local(&self, x: [f64; 2]) -> [f64; 2] {
        [
            (x[0] - self.origin[0]) / self.scale,
            (x[1] - self.origin[1]) / self.scale,
        ]
    }

    pub fn global(&self, xi: [f64; 2]) -> [f64; 2] {
        [
            self.origin[0] + self.scale * xi[0],
            self.origin[1] + self.scale * xi[1],
        ]
    }
}

/// Number of monomials of total degree at most `p`.
pub fn nmon(p: usize) -> usize {
    (p + 1) * (p + 2) / 2
}

/// Position of `xi^i eta^j` in the graded ordering.
pub fn mon_index(i: usize, j: usize) -> usize {
    let d = i + j;
    d * (d + 1) / 2 + j
}

/// Exponents in the graded ordering.
pub fn mon_exps(p: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::with_capacity(nmon(p));
    for d in 0..=p {
        for j in 0..=d {
            out.push((d - j, j));
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq)]
pub struct PolyField {
    shape: Shape,
    degree: usize,
    frame: Frame,
    coeffs: Vec<f64>,
}

impl PolyField {
    pub fn zeros(shape: Shape, degree: usize, frame: Frame) -> Self {
        PolyField {
            shape,
            degree,
            frame,
            coeffs: vec![0.0; shape.ncomp() * nmon(degree)],
        }
    }

    pub fn from_coeffs(shape: Shape, degree: usize, frame: Frame, coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.len() != shape.ncomp() * nmon(degree) {
            return Err(Error::Dimension(format!(
                "{:?} of degree {} needs {} coefficients, got {}",
                shape,
                degree,
                shape.ncomp() * nmon(degree),
                coeffs.len()
            )));
        }
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFinite("polynomial coefficients"));
        }
        Ok(PolyField {
            shape,
            degree,
            frame,
            coeffs,
        })
    }

    pub fn constant(v: f64, frame: Frame) -> Self {
        let mut f = Self::zeros(Shape::Scalar, 0, frame);
        f.coeffs[0] = v;
        f
    }

    /// The scalar `xi^i eta^j` in `frame`.
    pub fn monomial(i: usize, j: usize, frame: Frame) -> Self {
        let mut f = Self::zeros(Shape::Scalar, i + j, frame);
        f.coeffs[mon_index(i, j)] = 1.0;
        f
    }

    /// `a0 + ax x + ay y` in physical coordinates, expressed in `frame`.
    pub fn affine(a0: f64, ax: f64, ay: f64, frame: Frame) -> Self {
        let mut f = Self::zeros(Shape::Scalar, 1, frame);
        f.coeffs[0] = a0 + ax * frame.origin[0] + ay * frame.origin[1];
        f.coeffs[1] = ax * frame.scale;
        f.coeffs[2] = ay * frame.scale;
        f
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }
    pub fn degree(&self) -> usize {
        self.degree
    }
    pub fn frame(&self) -> Frame {
        self.frame
    }
    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }
    pub fn coeffs_mut(&mut self) -> &mut [f64] {
        &mut self.coeffs
    }

    pub fn coeff(&self, c: usize, i: usize, j: usize) -> f64 {
        if i + j > self.degree {
            return 0.0;
        }
        self.coeffs[c * nmon(self.degree) + mon_index(i, j)]
    }

    pub fn comp(&self, c: usize) -> PolyField {
        let n = nmon(self.degree);
        PolyField {
            shape: Shape::Scalar,
            degree: self.degree,
            frame: self.frame,
            coeffs: self.coeffs[c * n..(c + 1) * n].to_vec(),
        }
    }

    /// Stacks scalar components into a field of the given shape.
    pub fn from_components(shape: Shape, comps: &[PolyField]) -> Result<Self> {
        if comps.len() != shape.ncomp() {
            return Err(Error::Shape(format!(
                "{:?} needs {} components, got {}",
                shape,
                shape.ncomp(),
                comps.len()
            )));
        }
        let frame = comps[0].frame;
        if comps.iter().any(|c| c.frame != frame || c.shape != Shape::Scalar) {
            return Err(Error::Shape("components must be scalars in one frame".into()));
        }
        let degree = comps.iter().map(|c| c.degree).max().unwrap_or(0);
        let n = nmon(degree);
        let mut coeffs = vec![0.0; n * comps.len()];
        for (k, c) in comps.iter().enumerate() {
            coeffs[k * n..k * n + c.coeffs.len()].copy_from_slice(&c.coeffs);
        }
        Ok(PolyField {
            shape,
            degree,
            frame,
            coeffs,
        })
    }

    pub fn components(&self) -> Vec<PolyField> {
        (0..self.shape.ncomp()).map(|c| self.comp(c)).collect()
    }

    /// Pads with zeros or truncates to `degree`.
    pub fn with_degree(&self, degree: usize) -> PolyField {
        let (n_old, n_new) = (nmon(self.degree), nmon(degree));
        let nc = self.shape.ncomp();
        let mut coeffs = vec![0.0; nc * n_new];
        let m = n_old.min(n_new);
        for c in 0..nc {
            coeffs[c * n_new..c * n_new + m].copy_from_slice(&self.coeffs[c * n_old..c * n_old + m]);
        }
        PolyField {
            shape: self.shape,
            degree,
            frame: self.frame,
            coeffs,
        }
    }

    pub fn coeff_norm(&self) -> f64 {
        self.coeffs.iter().map(|c| c * c).sum::<f64>().sqrt()
    }

    /// Euclidean norm of the coefficients of total degree above `d`.
    pub fn mass_above(&self, d: usize) -> f64 {
        if d >= self.degree {
            return 0.0;
        }
        let n = nmon(self.degree);
        let start = nmon(d);
        let mut s = 0.0;
        for c in 0..self.shape.ncomp() {
            for k in start..n {
                s += self.coeffs[c * n + k].powi(2);
            }
        }
        s.sqrt()
    }

    pub fn eval(&self, x: [f64; 2]) -> Vec<f64> {
        let xi = self.frame.local(x);
        self.eval_local(xi)
    }

    pub fn eval_local(&self, xi: [f64; 2]) -> Vec<f64> {
        let p = self.degree;
        let mut px = vec![1.0; p + 1];
        let mut py = vec![1.0; p + 1];
        for k in 1..=p {
            px[k] = px[k - 1] * xi[0];
            py[k] = py[k - 1] * xi[1];
        }
        let n = nmon(p);
        let exps = mon_exps(p);
        (0..self.shape.ncomp())
            .map(|c| {
                exps.iter()
                    .enumerate()
                    .map(|(k, &(i, j))| self.coeffs[c * n + k] * px[i] * py[j])
                    .sum()
            })
            .collect()
    }

    fn same_frame(&self, other: &PolyField) {
        assert!(
            self.frame == other.frame,
            "polynomial fields live in different frames"
        );
    }

    pub fn add(&self, other: &PolyField) -> PolyField {
        self.axpy(1.0, other)
    }

    pub fn sub(&self, other: &PolyField) -> PolyField {
        self.axpy(-1.0, other)
    }

    /// `self + a * other`
    pub fn axpy(&self, a: f64, other: &PolyField) -> PolyField {
        assert_eq!(self.shape, other.shape, "shape mismatch in sum");
        self.same_frame(other);
        let d = self.degree.max(other.degree);
        let mut out = self.with_degree(d);
        let o = other.with_degree(d);
        for (x, y) in out.coeffs.iter_mut().zip(o.coeffs.iter()) {
            *x += a * y;
        }
        out
    }

    pub fn scale(&self, a: f64) -> PolyField {
        let mut out = self.clone();
        out.coeffs.iter_mut().for_each(|c| *c *= a);
        out
    }

    /// Component-wise product with a scalar polynomial.
    pub fn mul_scalar(&self, s: &PolyField) -> PolyField {
        assert_eq!(s.shape, Shape::Scalar, "multiplier must be scalar");
        self.same_frame(s);
        let d = self.degree + s.degree;
        let n = nmon(d);
        let (ns, no) = (nmon(s.degree), nmon(self.degree));
        let es = mon_exps(s.degree);
        let eo = mon_exps(self.degree);
        let mut out = PolyField::zeros(self.shape, d, self.frame);
        for c in 0..self.shape.ncomp() {
            for (a, &(i1, j1)) in eo.iter().enumerate() {
                let fa = self.coeffs[c * no + a];
                if fa == 0.0 {
                    continue;
                }
                for (b, &(i2, j2)) in es.iter().enumerate() {
                    out.coeffs[c * n + mon_index(i1 + i2, j1 + j2)] += fa * s.coeffs[b];
                }
            }
        }
        debug_assert_eq!(ns, s.coeffs.len());
        out
    }

    fn partial(&self, dir: usize) -> PolyField {
        let d = self.degree.saturating_sub(1);
        let mut out = PolyField::zeros(self.shape, d, self.frame);
        if self.degree == 0 {
            return out;
        }
        let (n_in, n_out) = (nmon(self.degree), nmon(d));
        let inv = 1.0 / self.frame.scale;
        for c in 0..self.shape.ncomp() {
            for (k, &(i, j)) in mon_exps(self.degree).iter().enumerate() {
                let v = self.coeffs[c * n_in + k];
                if dir == 0 && i > 0 {
                    out.coeffs[c * n_out + mon_index(i - 1, j)] += v * i as f64 * inv;
                } else if dir == 1 && j > 0 {
                    out.coeffs[c * n_out + mon_index(i, j - 1)] += v * j as f64 * inv;
                }
            }
        }
        out
    }

    /// Derivative in the physical `x` direction.
    pub fn dx(&self) -> PolyField {
        self.partial(0)
    }

    /// Derivative in the physical `y` direction.
    pub fn dy(&self) -> PolyField {
        self.partial(1)
    }

    /// The polynomial `zeta -> f(A zeta + b)` where `f` is read in its own
    /// local variables; the result is labelled with `new_frame`.
    pub fn substitute(&self, a: [[f64; 2]; 2], b: [f64; 2], new_frame: Frame) -> PolyField {
        let p = self.degree;
        let l1 = lin(a[0][0], a[0][1], b[0], new_frame);
        let l2 = lin(a[1][0], a[1][1], b[1], new_frame);
        let mut pow1 = vec![PolyField::constant(1.0, new_frame)];
        let mut pow2 = vec![PolyField::constant(1.0, new_frame)];
        for k in 1..=p {
            pow1.push(pow1[k - 1].mul_scalar(&l1));
            pow2.push(pow2[k - 1].mul_scalar(&l2));
        }
        let n_in = nmon(p);
        let mut comps = Vec::with_capacity(self.shape.ncomp());
        for c in 0..self.shape.ncomp() {
            let mut acc = PolyField::zeros(Shape::Scalar, p, new_frame);
            for (k, &(i, j)) in mon_exps(p).iter().enumerate() {
                let v = self.coeffs[c * n_in + k];
                if v != 0.0 {
                    acc = acc.axpy(v, &pow1[i].mul_scalar(&pow2[j]));
                }
            }
            comps.push(acc.with_degree(p));
        }
        PolyField::from_components(self.shape, &comps).expect("consistent components")
    }

    /// The same function written in another frame.
    pub fn reframe(&self, new_frame: Frame) -> PolyField {
        if new_frame == self.frame {
            return self.clone();
        }
        // xi_old = (o_new - o_old + s_new zeta) / s_old
        let r = new_frame.scale / self.frame.scale;
        let b = [
            (new_frame.origin[0] - self.frame.origin[0]) / self.frame.scale,
            (new_frame.origin[1] - self.frame.origin[1]) / self.frame.scale,
        ];
        self.substitute([[r, 0.0], [0.0, r]], b, new_frame)
    }

    /// Restriction to the line `t -> start + t dir`, as one power series in
    /// `t` per component.
    pub fn restrict_to_line(&self, start: [f64; 2], dir: [f64; 2]) -> Vec<Vec<f64>> {
        let s0 = self.frame.local(start);
        let inv = 1.0 / self.frame.scale;
        let g = self.substitute(
            [[dir[0] * inv, 0.0], [dir[1] * inv, 0.0]],
            s0,
            Frame::IDENTITY,
        );
        (0..self.shape.ncomp())
            .map(|c| (0..=self.degree).map(|k| g.coeff(c, k, 0)).collect())
            .collect()
    }
}

fn lin(a1: f64, a2: f64, b: f64, frame: Frame) -> PolyField {
    let mut f = PolyField::zeros(Shape::Scalar, 1, frame);
    f.coeffs[0] = b;
    f.coeffs[1] = a1;
    f.coeffs[2] = a2;
    f
}

/// Differential and algebraic operators acting on polynomial fields.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum DiffOp {
    Grad,
    /// `q -> (q_y, -q_x)`; applied row by row to a vector field.
    CurlScalar,
    /// `v -> d_x v2 - d_y v1`
    RotVector,
    DivVector,
    /// row-wise divergence of a matrix field
    DivTensor,
    Airy,
    Sym,
    Sskw,
    Mskw,
    Perp,
}

impl DiffOp {
    pub fn from_tag(tag: &str) -> Result<DiffOp> {
        Ok(match tag {
            "grad" => DiffOp::Grad,
            "curl_scalar" => DiffOp::CurlScalar,
            "rot_vector" => DiffOp::RotVector,
            "div_vector" => DiffOp::DivVector,
            "div_tensor" => DiffOp::DivTensor,
            "airy" => DiffOp::Airy,
            "sym" => DiffOp::Sym,
            "sskw" => DiffOp::Sskw,
            "mskw" => DiffOp::Mskw,
            "perp" => DiffOp::Perp,
            other => return Err(Error::Config(format!("unknown operator tag {other:?}"))),
        })
    }
}

fn wrong(op: DiffOp, s: Shape) -> Error {
    Error::Shape(format!("{op:?} cannot act on {s:?}"))
}

/// Applies `op` to `f`.
pub fn apply_diff(op: DiffOp, f: &PolyField) -> Result<PolyField> {
    use Shape::*;
    let s = f.shape;
    let frame = f.frame;
    let c = |k: usize| f.comp(k);
    let out = match (op, s) {
        (DiffOp::Grad, Scalar) => PolyField::from_components(Vector2, &[f.dx(), f.dy()])?,
        (DiffOp::CurlScalar, Scalar) => {
            PolyField::from_components(Vector2, &[f.dy(), f.dx().scale(-1.0)])?
        }
        (DiffOp::CurlScalar, Vector2) => {
            let (a, b) = (c(0), c(1));
            PolyField::from_components(
                Matrix2,
                &[a.dy(), a.dx().scale(-1.0), b.dy(), b.dx().scale(-1.0)],
            )?
        }
        (DiffOp::RotVector, Vector2) => c(1).dx().sub(&c(0).dy()),
        (DiffOp::DivVector, Vector2) => c(0).dx().add(&c(1).dy()),
        (DiffOp::DivTensor, Matrix2) => PolyField::from_components(
            Vector2,
            &[c(0).dx().add(&c(1).dy()), c(2).dx().add(&c(3).dy())],
        )?,
        (DiffOp::DivTensor, SymMatrix2) => PolyField::from_components(
            Vector2,
            &[c(0).dx().add(&c(1).dy()), c(1).dx().add(&c(2).dy())],
        )?,
        (DiffOp::Airy, Scalar) => {
            let (fx, fy) = (f.dx(), f.dy());
            PolyField::from_components(SymMatrix2, &[fy.dy(), fx.dy().scale(-1.0), fx.dx()])?
        }
        (DiffOp::Sym, Matrix2) => {
            PolyField::from_components(SymMatrix2, &[c(0), c(1).add(&c(2)).scale(0.5), c(3)])?
        }
        (DiffOp::Sym, SymMatrix2) => f.clone(),
        (DiffOp::Sskw, Matrix2) => c(1).sub(&c(2)).scale(0.5),
        (DiffOp::Sskw, SymMatrix2) => PolyField::zeros(Scalar, f.degree, frame),
        (DiffOp::Mskw, Scalar) => {
            let z = PolyField::zeros(Scalar, f.degree, frame);
            PolyField::from_components(Matrix2, &[z.clone(), f.clone(), f.scale(-1.0), z])?
        }
        (DiffOp::Perp, Vector2) => PolyField::from_components(Vector2, &[c(1).scale(-1.0), c(0)])?,
        _ => return Err(wrong(op, s)),
    };
    Ok(out)
}

/// Full 2x2 matrix field from a symmetric one.
pub fn sym_to_full(f: &PolyField) -> Result<PolyField> {
    match f.shape {
        Shape::SymMatrix2 => {
            PolyField::from_components(Shape::Matrix2, &[f.comp(0), f.comp(1), f.comp(1), f.comp(2)])
        }
        Shape::Matrix2 => Ok(f.clone()),
        s => Err(Error::Shape(format!("{s:?} is not a matrix field"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q_sample(frame: Frame) -> PolyField {
        // 1 + 2 xi - eta^2 + 3 xi^2 eta + xi^4
        let mut q = PolyField::zeros(Shape::Scalar, 4, frame);
        let c = q.coeffs_mut();
        c[mon_index(0, 0)] = 1.0;
        c[mon_index(1, 0)] = 2.0;
        c[mon_index(0, 2)] = -1.0;
        c[mon_index(2, 1)] = 3.0;
        c[mon_index(4, 0)] = 1.0;
        q
    }

    #[test]
    fn div_airy_vanishes() {
        let q = q_sample(Frame::IDENTITY);
        let a = apply_diff(DiffOp::Airy, &q).unwrap();
        let d = apply_diff(DiffOp::DivTensor, &a).unwrap();
        assert!(d.coeff_norm() < 1e-14);
    }

    #[test]
    fn rot_grad_and_div_curl_vanish() {
        let q = q_sample(Frame { origin: [0.3, -0.2], scale: 0.5 });
        let g = apply_diff(DiffOp::Grad, &q).unwrap();
        assert!(apply_diff(DiffOp::RotVector, &g).unwrap().coeff_norm() < 1e-12);
        let c = apply_diff(DiffOp::CurlScalar, &q).unwrap();
        assert!(apply_diff(DiffOp::DivVector, &c).unwrap().coeff_norm() < 1e-12);
    }

    #[test]
    fn airy_of_x_squared() {
        // airy(x^2 / 2) = [[0, 0], [0, 1]]
        let q = PolyField::monomial(2, 0, Frame::IDENTITY).scale(0.5);
        let a = apply_diff(DiffOp::Airy, &q).unwrap();
        assert_eq!(a.eval([0.3, 0.7]), vec![0.0, 0.0, 1.0]);
    }

    #[test]
    fn reframe_preserves_values() {
        let q = q_sample(Frame { origin: [0.3, -0.2], scale: 0.5 });
        let r = q.reframe(Frame { origin: [1.0, 2.0], scale: 3.0 });
        for x in [[0.1, 0.2], [1.5, -0.4], [2.0, 2.0]] {
            let (a, b) = (q.eval(x)[0], r.eval(x)[0]);
            assert!((a - b).abs() < 1e-11 * (1.0 + a.abs()));
        }
    }

    #[test]
    fn physical_derivative_respects_scale() {
        let f = PolyField::affine(1.0, 2.0, -3.0, Frame { origin: [0.5, 0.5], scale: 0.25 });
        assert!((f.dx().eval([0.0, 0.0])[0] - 2.0).abs() < 1e-14);
        assert!((f.dy().eval([9.0, 1.0])[0] + 3.0).abs() < 1e-14);
        assert!((f.eval([1.0, 1.0])[0] - 0.0).abs() < 1e-14);
    }

    #[test]
    fn unknown_tag_is_rejected() {
        assert!(DiffOp::from_tag("laplace").is_err());
        assert!(apply_diff(DiffOp::Airy, &PolyField::zeros(Shape::Vector2, 1, Frame::IDENTITY)).is_err());
    }
}
