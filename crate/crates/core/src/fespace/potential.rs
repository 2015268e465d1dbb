//! The C^1 potential space, C^2 at vertices, as the null space of its
//! continuity and boundary constraints.

use ndarray::{s, Array2};

use super::{edge_points, FESpace, Family};
use crate::error::{Error, Result};
use crate::linalg::{self, Mat};
use crate::mesh::{BcMode, BoundaryTopology, Mesh};
use crate::poly::modal::{Jet, ModalMap};
use crate::poly::{legendre_orthonormal, nmon};

/// Dimension of the affine functions in the kernel of `airy` under the
/// boundary conditions: all of `P_1` when the whole boundary is of
/// displacement type, nothing otherwise.
pub fn p1_gamma_dim(topo: &BoundaryTopology) -> usize {
    if topo.gamma_d.is_empty() {
        3
    } else {
        0
    }
}

fn jet_grad_n(j: &Jet, n: [f64; 2]) -> f64 {
    j.x * n[0] + j.y * n[1]
}

/// Constraint rows over `[broken q coefficients | affine data]`, where the
/// affine data holds three coefficients per traction component after the
/// first. On the first traction component `q` and its normal derivative
/// vanish; on every further one they agree with an affine function, so the
/// gradient is constant along it.
pub fn q_constraints(mesh: &Mesh, d: usize, topo: &BoundaryTopology) -> (Mat, usize) {
    let n = nmon(d);
    let nq = n * mesh.nt();
    let naux = 3 * topo.gamma_d.len().saturating_sub(1);
    let maps: Vec<ModalMap> = (0..mesh.nt()).map(|k| ModalMap::new(&mesh.cell(k))).collect();
    let mut rows: Vec<Vec<(usize, f64)>> = Vec::new();
    for (v, inc) in mesh.vertex_cells().iter().enumerate() {
        let x = mesh.vertices()[v];
        let (k0, _) = inc[0];
        let j0 = maps[k0].jets(d, x);
        for &(k, _) in &inc[1..] {
            let jk = maps[k].jets(d, x);
            let parts: [fn(&Jet) -> f64; 6] = [|j| j.v, |j| j.x, |j| j.y, |j| j.xx, |j| j.xy, |j| j.yy];
            for f in parts {
                let mut r = Vec::with_capacity(2 * n);
                for i in 0..n {
                    r.push((k0 * n + i, f(&j0[i])));
                    r.push((k * n + i, -f(&jk[i])));
                }
                rows.push(r);
            }
        }
    }
    // traction component of each edge and its affine-data offset
    let mut comp_of = vec![None; mesh.ne()];
    for (c, edges) in topo.gamma_d.iter().enumerate() {
        for &e in edges {
            comp_of[e] = Some(c);
        }
    }
    let frames: Vec<([f64; 2], f64)> = topo
        .gamma_d
        .iter()
        .map(|edges| {
            let pts: Vec<[f64; 2]> = edges
                .iter()
                .flat_map(|&e| mesh.edges()[e].map(|v| mesh.vertices()[v]))
                .collect();
            let c = [
                pts.iter().map(|p| p[0]).sum::<f64>() / pts.len() as f64,
                pts.iter().map(|p| p[1]).sum::<f64>() / pts.len() as f64,
            ];
            let r = pts
                .iter()
                .map(|p| ((p[0] - c[0]).powi(2) + (p[1] - c[1]).powi(2)).sqrt())
                .fold(0.0, f64::max)
                .max(1e-300);
            (c, r)
        })
        .collect();
    for e in 0..mesh.ne() {
        let inc = mesh.edge_cells(e);
        let comp = comp_of[e];
        if inc.len() == 1 && comp.is_none() {
            continue;
        }
        let nr = mesh.edge_normal(e);
        let len = mesh.edge_length(e);
        let pts = edge_points(mesh, e, d + 2);
        for deriv in [false, true] {
            let kmax = if deriv { d - 1 } else { d };
            for kk in 0..=kmax {
                let mut r = Vec::new();
                for (side, &(k, _)) in inc.iter().enumerate() {
                    let sgn = if side == 0 { 1.0 } else { -1.0 };
                    for &(x, w, t) in &pts {
                        let l = legendre_orthonormal(kmax, t, len)[kk];
                        let jets = maps[k].jets(d, x);
                        for i in 0..n {
                            let f = if deriv { jet_grad_n(&jets[i], nr) } else { jets[i].v };
                            r.push((k * n + i, sgn * w * l * f));
                        }
                    }
                }
                if let Some(c) = comp.filter(|&c| c > 0) {
                    let (o, rad) = frames[c];
                    let base = nq + 3 * (c - 1);
                    for &(x, w, t) in &pts {
                        let l = legendre_orthonormal(kmax, t, len)[kk];
                        if deriv {
                            r.push((base + 1, -w * l * nr[0] / rad));
                            r.push((base + 2, -w * l * nr[1] / rad));
                        } else {
                            r.push((base, -w * l));
                            r.push((base + 1, -w * l * (x[0] - o[0]) / rad));
                            r.push((base + 2, -w * l * (x[1] - o[1]) / rad));
                        }
                    }
                }
                rows.push(r);
            }
        }
    }
    let mut m: Mat = Array2::zeros((rows.len(), nq + naux));
    for (i, r) in rows.iter().enumerate() {
        for &(c, v) in r {
            m[[i, c]] += v;
        }
        let nrm = m.row(i).dot(&m.row(i)).sqrt();
        if nrm > 0.0 {
            m.row_mut(i).mapv_inplace(|x| x / nrm);
        }
    }
    (m, naux)
}

/// The potential space of degree `d >= 5`.
pub fn build_q(mesh: &Mesh, d: usize, bc: BcMode) -> Result<FESpace> {
    build_q_tol(mesh, d, bc, None)
}

pub fn build_q_tol(mesh: &Mesh, d: usize, bc: BcMode, tol: Option<f64>) -> Result<FESpace> {
    if d < 5 {
        return Err(Error::Config(format!("potential degree must be at least 5, got {d}")));
    }
    let topo = mesh.boundary_topology(bc)?;
    let (m, _) = q_constraints(mesh, d, &topo);
    let nq = nmon(d) * mesh.nt();
    let ns = linalg::null_space(m.view(), tol)?;
    let qpart = ns.basis.slice(s![..nq, ..]).to_owned();
    let (basis, info) = linalg::range_basis(qpart.view(), tol)?;
    if info.rank != ns.basis.ncols() {
        return Err(Error::Numerical("affine boundary data not determined by the potential".into()));
    }
    Ok(FESpace::from_dense(Family::Q, d, bc, mesh, topo, &basis, Some(ns.gap)))
}
