//! Analysis of the discrete complex: inf-sup constants, cohomology,
//! commuting projections, Hodge decompositions and the mixed elasticity
//! solver.
//!
//! Everything works in broken coordinates, where the cellwise Dubiner bases
//! are `L^2`-orthonormal, so the `L^2` inner product is the Euclidean one and
//! only the divergence and the Airy operator need cell matrices.

mod cohomology;
mod elasticity;
mod hodge;
mod infsup;
mod projection;

pub use cohomology::{cohomology_dim, harmonic_basis, CohomologyReport, HarmonicBasis};
pub use elasticity::{compliance_block, solve_hellinger_reissner, HrSolution, Lame};
pub use hodge::{hodge_decompose, min_norm_div_inverse, DivInverse, HodgeConstants, HodgeOperator, HodgeParts};
pub use infsup::{assemble, infsup_beta, infsup_constrained, InfSupResult, SaddleSystem};
pub use projection::{project_q, project_sigma, project_v, FieldSource};

use ndarray::{s, Array1, Array2, Axis};

use crate::error::{Error, Result};
use crate::fespace::{cell_quadrature, div_matrix, edge_points, FESpace, Family, SYM_W};
use crate::linalg::{Mat, Vector};
use crate::mesh::Mesh;
use crate::poly::modal::ModalMap;
use crate::poly::{nmon, PolyField, Shape};

/// Rows of the degree-`p` divergence matrix that survive when the
/// displacement degree is `dv <= p - 1`.
pub(crate) fn v_rows(p: usize, dv: usize) -> Vec<usize> {
    let full = nmon(p - 1);
    (0..2).flat_map(|c| (0..nmon(dv)).map(move |i| c * full + i)).collect()
}

/// Cell divergence from broken stresses of degree `p` to broken
/// displacements of degree `dv`.
pub(crate) fn div_block(mesh: &Mesh, k: usize, p: usize, dv: usize) -> Mat {
    let d = div_matrix(&mesh.cell(k), p);
    if dv + 1 == p {
        d
    } else {
        d.select(Axis(0), &v_rows(p, dv))
    }
}

/// Displacement degree paired with a stress space.
pub(crate) fn paired_degree(sigma: &FESpace) -> usize {
    match sigma.family() {
        Family::SigmaAw => sigma.degree() - 2,
        _ => sigma.degree() - 1,
    }
}

/// Block-diagonal broken divergence as a dense matrix.
pub(crate) fn broken_div(mesh: &Mesh, p: usize, dv: usize) -> Mat {
    let (ns, nv) = (3 * nmon(p), 2 * nmon(dv));
    let mut d = Array2::zeros((nv * mesh.nt(), ns * mesh.nt()));
    for k in 0..mesh.nt() {
        d.slice_mut(s![k * nv..(k + 1) * nv, k * ns..(k + 1) * ns])
            .assign(&div_block(mesh, k, p, dv));
    }
    d
}

/// Airy operator on one cell, from the scalar basis of degree `dq` to the
/// symmetric basis of degree `dq - 2`.
pub(crate) fn airy_block(mesh: &Mesh, k: usize, dq: usize) -> Mat {
    let cell = mesh.cell(k);
    let map = ModalMap::new(&cell);
    let (nq, ns) = (nmon(dq), nmon(dq - 2));
    let mut h = Array2::zeros((3 * ns, nq));
    for (x, w) in cell_quadrature(&cell, 2 * dq - 4) {
        let jq = map.jets(dq, x);
        let js = map.jets(dq - 2, x);
        for i in 0..ns {
            let wi = w * js[i].v;
            for j in 0..nq {
                h[[i, j]] += wi * jq[j].yy;
                h[[ns + i, j]] -= wi * std::f64::consts::SQRT_2 * jq[j].xy;
                h[[2 * ns + i, j]] += wi * jq[j].xx;
            }
        }
    }
    h
}

/// Broken stress coordinates of `airy` applied to every basis function of
/// the potential space.
pub(crate) fn broken_airy(q: &FESpace) -> Mat {
    let mesh = q.mesh();
    let ns = 3 * nmon(q.degree() - 2);
    let mut out = Array2::zeros((ns * mesh.nt(), q.dim()));
    for k in 0..mesh.nt() {
        let b = q.block(k);
        let m = airy_block(mesh, k, q.degree()).dot(&b.mat);
        for (j, &c) in b.cols.iter().enumerate() {
            for i in 0..ns {
                out[[k * ns + i, c]] += m[[i, j]];
            }
        }
    }
    out
}

/// `H^2` Gram matrix of the scalar basis of degree `d` on one cell.
pub(crate) fn h2_gram(mesh: &Mesh, k: usize, d: usize) -> Mat {
    let cell = mesh.cell(k);
    let map = ModalMap::new(&cell);
    let n = nmon(d);
    let mut g = Array2::zeros((n, n));
    for (x, w) in cell_quadrature(&cell, 2 * d) {
        let j = map.jets(d, x);
        for a in 0..n {
            for b in 0..n {
                g[[a, b]] += w
                    * (j[a].v * j[b].v
                        + j[a].x * j[b].x
                        + j[a].y * j[b].y
                        + j[a].xx * j[b].xx
                        + 2.0 * j[a].xy * j[b].xy
                        + j[a].yy * j[b].yy);
            }
        }
    }
    g
}

/// Rows evaluating `<sigma n, r_l>` over each edge set (three rows per set,
/// `r = (1,0), (0,1), (-y,x)`), on broken stresses of degree `p`. The
/// normal is the outward normal of the cell owning each boundary edge.
pub(crate) fn flux_moment_rows(mesh: &Mesh, p: usize, sets: &[Vec<usize>]) -> Mat {
    let n = nmon(p);
    let nloc = 3 * n;
    let mut m = Array2::zeros((3 * sets.len(), nloc * mesh.nt()));
    for (j, edges) in sets.iter().enumerate() {
        for &e in edges {
            let (k, i) = mesh.edge_cells(e)[0];
            let cell = mesh.cell(k);
            let nr = cell.normal(i);
            let map = ModalMap::new(&cell);
            for (x, w, _) in edge_points(mesh, e, p / 2 + 2) {
                let jets = map.jets(p, x);
                let rs = [[1.0, 0.0], [0.0, 1.0], [-x[1], x[0]]];
                // E_c n for the three symmetric units
                let en = [[nr[0], 0.0], [SYM_W[1] * nr[1], SYM_W[1] * nr[0]], [0.0, nr[1]]];
                for (l, r) in rs.iter().enumerate() {
                    for (c, t) in en.iter().enumerate() {
                        let f = w * (t[0] * r[0] + t[1] * r[1]);
                        for a in 0..n {
                            m[[3 * j + l, k * nloc + c * n + a]] += f * jets[a].v;
                        }
                    }
                }
            }
        }
    }
    m
}

/// Loops of the boundary (as edge lists) for the given loop indices.
pub(crate) fn loop_sets(sigma: &FESpace, loops: &[usize]) -> Vec<Vec<usize>> {
    loops.iter().map(|&m| sigma.topology().components[m].clone()).collect()
}

/// `L^2` moments of a polynomial field against the broken basis of degree
/// `p` of its shape on cell `k`.
pub(crate) fn l2_coefficients(mesh: &Mesh, k: usize, p: usize, f: &PolyField) -> Vec<f64> {
    let cell = mesh.cell(k);
    let map = ModalMap::new(&cell);
    let n = nmon(p);
    let nc = f.shape().ncomp();
    let mut out = vec![0.0; nc * n];
    let scale: Vec<f64> = match f.shape() {
        Shape::SymMatrix2 => vec![1.0, std::f64::consts::SQRT_2, 1.0],
        s => vec![1.0; s.ncomp()],
    };
    for (x, w) in cell_quadrature(&cell, p + f.degree()) {
        let jets = map.jets(p, x);
        let v = f.eval(x);
        for c in 0..nc {
            let wc = w * v[c] * scale[c];
            for a in 0..n {
                out[c * n + a] += wc * jets[a].v;
            }
        }
    }
    out
}

/// Broken coefficients of degree `from` padded with zeros to degree `to`
/// (the Dubiner bases are hierarchical).
pub(crate) fn embed(x: &[f64], ncomp: usize, nt: usize, from: usize, to: usize) -> Vector {
    let (a, b) = (nmon(from), nmon(to));
    let mut out = Array1::zeros(ncomp * b * nt);
    for k in 0..nt {
        for c in 0..ncomp {
            for i in 0..a {
                out[k * ncomp * b + c * b + i] = x[k * ncomp * a + c * a + i];
            }
        }
    }
    out
}

/// `sum_k S_k^T L_k S_k` over the blocks of `space`.
pub(crate) fn block_gram(space: &FESpace, local: impl Fn(usize) -> Mat) -> Mat {
    let mut out = Array2::zeros((space.dim(), space.dim()));
    for k in 0..space.mesh().nt() {
        let b = space.block(k);
        let m = b.mat.t().dot(&local(k).dot(&b.mat));
        for (i, &ci) in b.cols.iter().enumerate() {
            for (j, &cj) in b.cols.iter().enumerate() {
                out[[ci, cj]] += m[[i, j]];
            }
        }
    }
    out
}

/// `sum_k V_k^T L_k S_k` for a row space `v` and column space `s`.
pub(crate) fn block_cross(v: &FESpace, s: &FESpace, local: impl Fn(usize) -> Mat) -> Result<Mat> {
    same_mesh(v, s)?;
    let mut out = Array2::zeros((v.dim(), s.dim()));
    for k in 0..s.mesh().nt() {
        let (bv, bs) = (v.block(k), s.block(k));
        let m = bv.mat.t().dot(&local(k).dot(&bs.mat));
        for (i, &ci) in bv.cols.iter().enumerate() {
            for (j, &cj) in bs.cols.iter().enumerate() {
                out[[ci, cj]] += m[[i, j]];
            }
        }
    }
    Ok(out)
}

pub(crate) fn same_mesh(a: &FESpace, b: &FESpace) -> Result<()> {
    if a.mesh().vertices() != b.mesh().vertices() || a.mesh().cells() != b.mesh().cells() {
        return Err(Error::Dimension("spaces live on different meshes".into()));
    }
    Ok(())
}

pub(crate) fn norm(v: &Vector) -> f64 {
    v.dot(v).sqrt()
}
