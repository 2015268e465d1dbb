use ndarray::{concatenate, Array1, Array2, Axis};

use super::{
    block_cross, broken_airy, div_block, flux_moment_rows, l2_coefficients, loop_sets, paired_degree, same_mesh,
};
use crate::error::{Error, Result};
use crate::fespace::{broken_field, edge_points, p1_gamma_dim, FESpace, Family};
use crate::linalg::{self, Mat, Vector};
use crate::mesh::Mesh;
use crate::poly::{apply_diff, DiffOp, Frame, PolyField, Shape};

/// A field to be projected: either one polynomial on the whole domain or a
/// member of a discrete space.
#[derive(Clone, Debug)]
pub enum FieldSource<'a> {
    Poly(PolyField),
    Discrete { space: &'a FESpace, coeffs: &'a [f64] },
}

impl FieldSource<'_> {
    pub fn shape(&self) -> Shape {
        match self {
            FieldSource::Poly(f) => f.shape(),
            FieldSource::Discrete { space, .. } => space.family().shape(),
        }
    }

    /// The field restricted to cell `k`.
    pub fn on_cell(&self, mesh: &Mesh, k: usize) -> Result<PolyField> {
        match self {
            FieldSource::Poly(f) => Ok(f.clone()),
            FieldSource::Discrete { space, coeffs } => {
                if coeffs.len() != space.dim() {
                    return Err(Error::Dimension("coefficient count of a discrete field".into()));
                }
                let b = space.block(k);
                let x: Vector = b.cols.iter().map(|&c| coeffs[c]).collect();
                let local = b.mat.dot(&x);
                broken_field(space.family().shape(), &mesh.cell(k), space.degree(), local.as_slice().unwrap())
            }
        }
    }

    fn expect(&self, shape: Shape) -> Result<()> {
        if self.shape() != shape {
            return Err(Error::Shape(format!("expected a {shape:?} field, got {:?}", self.shape())));
        }
        Ok(())
    }

    /// Broken `L^2` moments of `op(field)` at degree `p`.
    fn broken_moments(&self, mesh: &Mesh, p: usize, op: Option<DiffOp>) -> Result<Vector> {
        let mut out = Vec::new();
        for k in 0..mesh.nt() {
            let f = self.on_cell(mesh, k)?;
            let f = match op {
                Some(op) => apply_diff(op, &f)?,
                None => f,
            };
            out.extend(l2_coefficients(mesh, k, p, &f));
        }
        Ok(Array1::from(out))
    }

    /// `<sigma n, r_l>` over each edge set, for a symmetric field.
    fn flux_moments(&self, mesh: &Mesh, sets: &[Vec<usize>]) -> Result<Vector> {
        let mut out = Array1::zeros(3 * sets.len());
        for (j, edges) in sets.iter().enumerate() {
            for &e in edges {
                let (k, i) = mesh.edge_cells(e)[0];
                let n = mesh.cell(k).normal(i);
                let f = self.on_cell(mesh, k)?;
                for (x, w, _) in edge_points(mesh, e, f.degree() / 2 + 2) {
                    let s = f.eval(x);
                    let t = [s[0] * n[0] + s[1] * n[1], s[1] * n[0] + s[2] * n[1]];
                    let rs = [[1.0, 0.0], [0.0, 1.0], [-x[1], x[0]]];
                    for (l, r) in rs.iter().enumerate() {
                        out[3 * j + l] += w * (t[0] * r[0] + t[1] * r[1]);
                    }
                }
            }
        }
        Ok(out)
    }
}

/// `L^2` projection onto the displacement space.
pub fn project_v(v: &FESpace, f: &FieldSource) -> Result<Vector> {
    if v.family() != Family::V {
        return Err(Error::Shape("project_v expects a displacement space".into()));
    }
    f.expect(Shape::Vector2)?;
    let b = f.broken_moments(v.mesh(), v.degree(), None)?;
    // the displacement bases are orthonormal in broken coordinates
    v.transpose_apply(b.as_slice().unwrap())
}

/// `H^2`-type projection onto the potential space: matches `airy` against
/// the whole space and, when affine functions belong to it, the moments
/// against them.
pub fn project_q(q: &FESpace, f: &FieldSource) -> Result<Vector> {
    if q.family() != Family::Q {
        return Err(Error::Shape("project_q expects a potential space".into()));
    }
    f.expect(Shape::Scalar)?;
    let mesh = q.mesh();
    let d = q.degree();
    let a = broken_airy(q);
    let rhs_a = f.broken_moments(mesh, d - 2, Some(DiffOp::Airy))?;
    let (m, rhs_m) = if p1_gamma_dim(q.topology()) == 3 {
        let fq = f.broken_moments(mesh, d, None)?;
        let mut rows = Array2::zeros((3, q.dim()));
        let mut rhs = Array1::zeros(3);
        let affine = [(1.0, 0.0, 0.0), (0.0, 1.0, 0.0), (0.0, 0.0, 1.0)];
        for (l, &(c, x, y)) in affine.iter().enumerate() {
            let lf = FieldSource::Poly(PolyField::affine(c, x, y, Frame::IDENTITY));
            let lb = lf.broken_moments(mesh, d, None)?;
            rows.row_mut(l).assign(&q.transpose_apply(lb.as_slice().unwrap())?);
            rhs[l] = lb.dot(&fq);
        }
        (rows, rhs)
    } else {
        (Array2::zeros((0, q.dim())), Array1::zeros(0))
    };
    // Stacking is exact: the affine rows act only on the kernel of airy.
    let lhs = concatenate![Axis(0), a, m];
    let rhs = concatenate![Axis(0), rhs_a, rhs_m];
    let ls = linalg::solve_least_squares(lhs.view(), rhs.insert_axis(Axis(1)).view())?;
    if ls.rank != q.dim() {
        return Err(Error::Unisolvency("potential projection system is singular".into()));
    }
    Ok(ls.x.column(0).to_owned())
}

/// Projection onto the stress space defined by the moments against
/// `airy Q`, the divergence moments against `V` and the rigid-motion
/// fluxes through the loops of the reduced index set.
pub fn project_sigma(sigma: &FESpace, q: &FESpace, v: &FESpace, f: &FieldSource) -> Result<Vector> {
    same_mesh(sigma, q)?;
    same_mesh(sigma, v)?;
    f.expect(Shape::SymMatrix2)?;
    let mesh = sigma.mesh();
    let p = sigma.degree();
    let dv = paired_degree(sigma);
    if q.degree() != p + 2 || v.degree() != dv {
        return Err(Error::Dimension("projection spaces have mismatched degrees".into()));
    }
    let z = sigma.dense_basis();
    let a = broken_airy(q);
    let sets = loop_sets(sigma, &sigma.topology().i_star);
    let fm = flux_moment_rows(mesh, p, &sets);
    let b = block_cross(v, sigma, |k| div_block(mesh, k, p, dv))?;
    let lhs = concatenate![Axis(0), a.t().dot(&z), b, fm.dot(&z)];
    let fs = f.broken_moments(mesh, p, None)?;
    let fd = f.broken_moments(mesh, dv, Some(DiffOp::DivTensor))?;
    let rhs = concatenate![
        Axis(0),
        a.t().dot(&fs),
        v.transpose_apply(fd.as_slice().unwrap())?,
        f.flux_moments(mesh, &sets)?
    ];
    solve_unisolvent(&lhs, &rhs, sigma.dim(), "stress projection")
}

fn solve_unisolvent(lhs: &Mat, rhs: &Vector, dim: usize, what: &str) -> Result<Vector> {
    let scale: Vec<f64> = lhs.rows().into_iter().map(|r| r.dot(&r).sqrt().max(1e-300)).collect();
    let mut l = lhs.clone();
    let mut r = rhs.clone();
    for (i, s) in scale.iter().enumerate() {
        l.row_mut(i).mapv_inplace(|x| x / s);
        r[i] /= s;
    }
    let ls = linalg::solve_least_squares_tol(l.view(), r.insert_axis(Axis(1)).view(), Some(1e-12))?;
    if ls.rank != dim {
        return Err(Error::Unisolvency(format!("{what}: rank {} of {dim}", ls.rank)));
    }
    if ls.residual > 1e-8 {
        return Err(Error::Numerical(format!("{what}: inconsistent system (residual {:.3e})", ls.residual)));
    }
    Ok(ls.x.column(0).to_owned())
}
