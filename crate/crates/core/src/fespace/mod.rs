//! Global finite element spaces over broken cellwise orthonormal bases.
//!
//! Every space is stored as a coefficient matrix over the broken basis,
//! split into per-cell blocks so that large spaces never need a dense
//! global matrix. The broken bases are the Dubiner functions of each cell:
//! scalars `psi_i`, vectors `psi_i e_c`, and symmetric tensors `psi_i E_c`
//! with `E_0 = e11`, `E_1 = (e12 + e21)/sqrt 2`, `E_2 = e22`.

mod checks;
mod potential;
mod sigma;

use ndarray::{s, Array1, Array2};

pub use checks::{euler_dimension_check, huzhang_combinatorial_check, CombinatorialReport, EulerReport};
pub use potential::{build_q, build_q_tol, p1_gamma_dim, q_constraints};
pub use sigma::{
    arnold_winther_variant, build_sigma, sigma_constraints, sigma_trace_constraints, SigmaDofs,
};

use crate::error::{Error, Result};
use crate::linalg::{self, Mat, Vector};
use crate::mesh::{BcMode, BoundaryTopology, Mesh};
use crate::poly::modal::ModalMap;
use crate::poly::quad::{gauss_legendre, tri_quadrature};
use crate::poly::{nmon, orthonormal_cell_basis, Cell, PolyField, Shape};

/// Scale of the symmetric component units in the broken tensor basis.
pub const SYM_W: [f64; 3] = [1.0, std::f64::consts::FRAC_1_SQRT_2, 1.0];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Family {
    Sigma,
    /// stresses with divergence one degree lower
    SigmaAw,
    Q,
    V,
}

impl Family {
    pub fn shape(self) -> Shape {
        match self {
            Family::Sigma | Family::SigmaAw => Shape::SymMatrix2,
            Family::Q => Shape::Scalar,
            Family::V => Shape::Vector2,
        }
    }
}

/// Coefficients of the global basis functions on one cell: `mat` has one
/// row per broken basis function of the cell and one column per entry of
/// `cols` (global basis indices).
#[derive(Clone, Debug)]
pub struct Block {
    pub cols: Vec<usize>,
    pub mat: Mat,
}

/// Global degrees of freedom of the stress space.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DofKind {
    /// coordinate `k` of the admissible vertex values at vertex `v`
    Vertex { v: usize, k: usize },
    /// moment of `(sigma n)_c` against the `k`-th edge Legendre polynomial
    Edge { e: usize, c: usize, k: usize },
    /// interior moment number `k` of a cell
    Interior { cell: usize, k: usize },
}

#[derive(Clone, Debug)]
pub struct FESpace {
    family: Family,
    degree: usize,
    bc: BcMode,
    mesh: Mesh,
    topo: BoundaryTopology,
    dim: usize,
    blocks: Vec<Block>,
    dofs: Vec<DofKind>,
    rank_gap: Option<f64>,
}

impl FESpace {
    fn from_dense(
        family: Family,
        degree: usize,
        bc: BcMode,
        mesh: &Mesh,
        topo: BoundaryTopology,
        basis: &Mat,
        rank_gap: Option<f64>,
    ) -> FESpace {
        let n = family.shape().ncomp() * nmon(degree);
        let dim = basis.ncols();
        let blocks = (0..mesh.nt())
            .map(|k| Block {
                cols: (0..dim).collect(),
                mat: basis.slice(s![k * n..(k + 1) * n, ..]).to_owned(),
            })
            .collect();
        FESpace {
            family,
            degree,
            bc,
            mesh: mesh.clone(),
            topo,
            dim,
            blocks,
            dofs: Vec::new(),
            rank_gap,
        }
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn bc(&self) -> BcMode {
        self.bc
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    pub fn topology(&self) -> &BoundaryTopology {
        &self.topo
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Broken basis functions per cell.
    pub fn local_dim(&self) -> usize {
        self.family.shape().ncomp() * nmon(self.degree)
    }

    pub fn broken_dim(&self) -> usize {
        self.local_dim() * self.mesh.nt()
    }

    pub fn block(&self, k: usize) -> &Block {
        &self.blocks[k]
    }

    /// Descriptors of the global DOFs (stress space built from DOFs only).
    pub fn dofs(&self) -> &[DofKind] {
        &self.dofs
    }

    /// Singular-value gap of the null-space computation, when one was used.
    pub fn rank_gap(&self) -> Option<f64> {
        self.rank_gap
    }

    /// The full `broken_dim x dim` coefficient matrix.
    pub fn dense_basis(&self) -> Mat {
        let n = self.local_dim();
        let mut out = Array2::zeros((self.broken_dim(), self.dim));
        for (k, b) in self.blocks.iter().enumerate() {
            for (j, &c) in b.cols.iter().enumerate() {
                for i in 0..n {
                    out[[k * n + i, c]] += b.mat[[i, j]];
                }
            }
        }
        out
    }

    /// Broken coefficients of the field with global coefficients `x`.
    pub fn to_broken(&self, x: &[f64]) -> Result<Vector> {
        if x.len() != self.dim {
            return Err(Error::Dimension(format!("{} coefficients for a space of dimension {}", x.len(), self.dim)));
        }
        let n = self.local_dim();
        let mut out = Array1::zeros(self.broken_dim());
        for (k, b) in self.blocks.iter().enumerate() {
            let xs: Vector = b.cols.iter().map(|&c| x[c]).collect();
            out.slice_mut(s![k * n..(k + 1) * n]).assign(&b.mat.dot(&xs));
        }
        Ok(out)
    }

    /// `B^T y` for a broken vector `y`.
    pub fn transpose_apply(&self, y: &[f64]) -> Result<Vector> {
        if y.len() != self.broken_dim() {
            return Err(Error::Dimension("broken vector length".into()));
        }
        let n = self.local_dim();
        let mut out = Array1::zeros(self.dim);
        for (k, b) in self.blocks.iter().enumerate() {
            let yk = Array1::from(y[k * n..(k + 1) * n].to_vec());
            let z = b.mat.t().dot(&yk);
            for (j, &c) in b.cols.iter().enumerate() {
                out[c] += z[j];
            }
        }
        Ok(out)
    }

    /// The restriction of a global field to cell `k` as a polynomial in the
    /// cell frame.
    pub fn cell_field(&self, k: usize, x: &[f64]) -> Result<PolyField> {
        let b = self.to_broken(x)?;
        let n = self.local_dim();
        broken_field(self.family.shape(), &self.mesh.cell(k), self.degree, &b.to_vec()[k * n..(k + 1) * n])
    }

    /// Same space with another basis: columns of `self` times `m`.
    pub fn with_basis_transform(&self, family: Family, m: &Mat) -> Result<FESpace> {
        if m.nrows() != self.dim {
            return Err(Error::Dimension("basis transform rows".into()));
        }
        let blocks = self
            .blocks
            .iter()
            .map(|b| {
                let rows = m.select(ndarray::Axis(0), &b.cols);
                Block {
                    cols: (0..m.ncols()).collect(),
                    mat: b.mat.dot(&rows),
                }
            })
            .collect();
        Ok(FESpace {
            family,
            degree: self.degree,
            bc: self.bc,
            mesh: self.mesh.clone(),
            topo: self.topo.clone(),
            dim: m.ncols(),
            blocks,
            dofs: Vec::new(),
            rank_gap: self.rank_gap,
        })
    }
}

/// Quadrature points and weights on a physical cell, exact for degree
/// `degree`.
pub fn cell_quadrature(cell: &Cell, degree: usize) -> Vec<([f64; 2], f64)> {
    let q = tri_quadrature(degree);
    let [v0, v1, v2] = cell.vertices;
    let scale = cell.area() / 2.0;
    q.points
        .iter()
        .zip(&q.weights)
        .map(|(&[r, s], &w)| {
            let (l1, l2) = ((r + 1.0) / 2.0, (s + 1.0) / 2.0);
            let l0 = 1.0 - l1 - l2;
            let x = [
                l0 * v0[0] + l1 * v1[0] + l2 * v2[0],
                l0 * v0[1] + l1 * v1[1] + l2 * v2[1],
            ];
            (x, w * scale)
        })
        .collect()
}

/// Gauss points on the segment `a -> b`: `(point, weight, t in [-1, 1])`.
pub fn segment_points(a: [f64; 2], b: [f64; 2], n: usize) -> Vec<([f64; 2], f64, f64)> {
    let len = ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt();
    let (x, w) = gauss_legendre(n);
    x.iter()
        .zip(&w)
        .map(|(&t, &wt)| {
            let s = 0.5 * (t + 1.0);
            ([a[0] + s * (b[0] - a[0]), a[1] + s * (b[1] - a[1])], 0.5 * len * wt, t)
        })
        .collect()
}

/// Gauss points on global edge `e`, walked from its low to its high vertex.
pub fn edge_points(mesh: &Mesh, e: usize, n: usize) -> Vec<([f64; 2], f64, f64)> {
    let [a, b] = mesh.edges()[e];
    segment_points(mesh.vertices()[a], mesh.vertices()[b], n)
}

/// Divergence of the broken symmetric basis of degree `p` in the broken
/// vector basis of degree `p - 1` on one cell.
pub fn div_matrix(cell: &Cell, p: usize) -> Mat {
    let (ns, nv) = (nmon(p), nmon(p - 1));
    let map = ModalMap::new(cell);
    let mut gx = Array2::<f64>::zeros((nv, ns));
    let mut gy = Array2::<f64>::zeros((nv, ns));
    for (x, w) in cell_quadrature(cell, 2 * p) {
        let jp = map.jets(p, x);
        let jv = map.jets(p - 1, x);
        for a in 0..nv {
            let wa = w * jv[a].v;
            for i in 0..ns {
                gx[[a, i]] += wa * jp[i].x;
                gy[[a, i]] += wa * jp[i].y;
            }
        }
    }
    let mut d = Array2::zeros((2 * nv, 3 * ns));
    let r = SYM_W[1];
    d.slice_mut(s![..nv, ..ns]).assign(&gx);
    d.slice_mut(s![..nv, ns..2 * ns]).assign(&(&gy * r));
    d.slice_mut(s![nv.., ns..2 * ns]).assign(&(&gx * r));
    d.slice_mut(s![nv.., 2 * ns..]).assign(&gy);
    d
}

/// Polynomial form (cell frame) of the broken coefficients of one cell.
pub fn broken_field(shape: Shape, cell: &Cell, p: usize, coeffs: &[f64]) -> Result<PolyField> {
    let basis = orthonormal_cell_basis(cell, shape, p)?;
    if coeffs.len() != basis.len() {
        return Err(Error::Dimension("local coefficient count".into()));
    }
    let mut out = PolyField::zeros(shape, p, cell.frame);
    for (c, f) in coeffs.iter().zip(&basis) {
        if *c != 0.0 {
            out = out.axpy(*c, f);
        }
    }
    Ok(out)
}

/// Broken coefficients of the three rigid motions `(1,0), (0,1), (-y, x)`
/// in the vector basis of degree `p`.
pub fn rm_coefficients(mesh: &Mesh, p: usize) -> Mat {
    let n = nmon(p);
    let mut r = Array2::zeros((2 * n * mesh.nt(), 3));
    for k in 0..mesh.nt() {
        let cell = mesh.cell(k);
        let map = ModalMap::new(&cell);
        for (x, w) in cell_quadrature(&cell, p + 1) {
            let j = map.jets(p, x);
            let vals = [[1.0, 0.0], [0.0, 1.0], [-x[1], x[0]]];
            for i in 0..n {
                for (m, v) in vals.iter().enumerate() {
                    r[[k * 2 * n + i, m]] += w * j[i].v * v[0];
                    r[[k * 2 * n + n + i, m]] += w * j[i].v * v[1];
                }
            }
        }
    }
    r
}

/// Broken vector space of degree `p`; with full traction the rigid motions
/// are factored out by taking the orthogonal complement.
pub fn build_v(mesh: &Mesh, p: usize, bc: BcMode) -> Result<FESpace> {
    let topo = mesh.boundary_topology(bc)?;
    let n = 2 * nmon(p);
    if quotient_by_rm(&topo) {
        let basis = linalg::orthonormal_complement(&rm_coefficients(mesh, p))?;
        return Ok(FESpace::from_dense(Family::V, p, bc, mesh, topo, &basis, None));
    }
    let blocks = (0..mesh.nt())
        .map(|k| Block {
            cols: (k * n..(k + 1) * n).collect(),
            mat: Array2::eye(n),
        })
        .collect();
    Ok(FESpace {
        family: Family::V,
        degree: p,
        bc,
        mesh: mesh.clone(),
        topo,
        dim: n * mesh.nt(),
        blocks,
        dofs: Vec::new(),
        rank_gap: None,
    })
}

/// Displacements are taken modulo rigid motions exactly when the whole
/// boundary carries traction conditions.
pub fn quotient_by_rm(topo: &BoundaryTopology) -> bool {
    topo.gamma_n.is_empty()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::{apply_diff, DiffOp};

    #[test]
    fn v_dimensions() {
        let t = Mesh::unit_triangle().unwrap();
        assert_eq!(build_v(&t, 2, BcMode::None).unwrap().dim(), 12);
        assert_eq!(build_v(&t, 2, BcMode::FullTraction).unwrap().dim(), 9);
        let c = Mesh::crisscross(1).unwrap();
        assert_eq!(build_v(&c, 2, BcMode::None).unwrap().dim(), 48);
    }

    #[test]
    fn traction_v_is_orthogonal_to_rm() {
        let c = Mesh::crisscross(1).unwrap();
        let v = build_v(&c, 1, BcMode::FullTraction).unwrap();
        let r = rm_coefficients(&c, 1);
        let m = r.t().dot(&v.dense_basis());
        assert!(linalg::max_abs(m.view()) < 1e-12);
    }

    #[test]
    fn div_matrix_matches_symbolic() {
        let cell = Cell::new([[0.1, 0.0], [1.2, 0.3], [0.4, 0.9]]).unwrap();
        let p = 4;
        let d = div_matrix(&cell, p);
        let sb = orthonormal_cell_basis(&cell, Shape::SymMatrix2, p).unwrap();
        let vb = orthonormal_cell_basis(&cell, Shape::Vector2, p - 1).unwrap();
        for (j, s) in sb.iter().enumerate().step_by(7) {
            let dv = apply_diff(DiffOp::DivTensor, s).unwrap();
            for (i, v) in vb.iter().enumerate() {
                let exact = crate::poly::l2_inner(&dv, v, &cell).unwrap();
                assert!((exact - d[[i, j]]).abs() < 1e-10, "{i} {j}");
            }
        }
    }
}
