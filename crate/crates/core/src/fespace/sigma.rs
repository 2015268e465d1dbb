//! The symmetric stress space: vertex values, normal edge moments and
//! interior moments, glued across cells by shared degrees of freedom.

use ndarray::{s, Array2};
use ndarray_linalg::{Inverse, JobSvd, SVDDC};

use super::{cell_quadrature, div_matrix, edge_points, Block, DofKind, FESpace, Family, SYM_W};
use crate::error::{Error, Result};
use crate::linalg::{self, Mat};
use crate::mesh::{BcMode, BoundaryTopology, Mesh};
use crate::poly::modal::ModalMap;
use crate::poly::{legendre_orthonormal, nmon};

/// Local DOF matrices and boundary data of the stress space.
#[derive(Clone, Debug)]
pub struct SigmaDofs {
    pub p: usize,
    /// per cell: DOF functionals (rows) applied to the broken basis
    pub d: Vec<Mat>,
    /// per cell: inverse of `d`, columns are the local nodal functions
    pub e: Vec<Mat>,
    /// per vertex: orthonormal basis of admissible vertex values
    pub vertex_free: Vec<Mat>,
    /// per vertex: orthonormal rows of the traction conditions at the vertex
    pub vertex_fixed: Vec<Mat>,
}

impl SigmaDofs {
    pub fn new(mesh: &Mesh, p: usize, topo: &BoundaryTopology) -> Result<SigmaDofs> {
        if p < 3 {
            return Err(Error::Config(format!("stress degree must be at least 3, got {p}")));
        }
        let mut d = Vec::with_capacity(mesh.nt());
        let mut e = Vec::with_capacity(mesh.nt());
        for k in 0..mesh.nt() {
            let dk = local_dof_matrix(mesh, k, p);
            let (_, sv, _) = dk.clone().svddc(JobSvd::None)?;
            let cond = sv[0] / sv[sv.len() - 1];
            if !(cond < 1e13) {
                return Err(Error::Unisolvency(format!(
                    "local DOF matrix of cell {k} is singular (condition {cond:.2e})"
                )));
            }
            e.push(dk.inv()?);
            d.push(dk);
        }
        let mut vertex_free = Vec::with_capacity(mesh.nv());
        let mut vertex_fixed = Vec::with_capacity(mesh.nv());
        let mut rows: Vec<Vec<[f64; 3]>> = vec![Vec::new(); mesh.nv()];
        for ed in mesh.boundary_edges() {
            if topo.is_traction(ed) {
                let n = mesh.edge_normal(ed);
                for &v in &mesh.edges()[ed] {
                    rows[v].push([n[0], n[1], 0.0]);
                    rows[v].push([0.0, n[0], n[1]]);
                }
            }
        }
        for r in rows {
            if r.is_empty() {
                vertex_free.push(Array2::eye(3));
                vertex_fixed.push(Array2::zeros((0, 3)));
                continue;
            }
            let m = Array2::from_shape_fn((r.len(), 3), |(i, j)| r[i][j]);
            let ns = linalg::null_space(m.view(), None)?;
            let rank = 3 - ns.basis.ncols();
            let (_, _, vt) = m.svddc(JobSvd::All)?;
            let vt = vt.expect("requested V^T");
            vertex_fixed.push(vt.slice(s![..rank, ..]).to_owned());
            vertex_free.push(ns.basis);
        }
        Ok(SigmaDofs {
            p,
            d,
            e,
            vertex_free,
            vertex_fixed,
        })
    }

    pub fn edge_dofs(&self) -> usize {
        2 * (self.p - 1)
    }

    pub fn interior_dofs(&self) -> usize {
        3 * nmon(self.p - 2)
    }

    /// First local row of the DOFs of local edge `i`.
    pub fn edge_offset(&self, i: usize) -> usize {
        9 + i * self.edge_dofs()
    }

    pub fn interior_offset(&self) -> usize {
        9 + 3 * self.edge_dofs()
    }
}

/// Rows: 9 vertex values, then per local edge the moments of `(sigma n)_c`
/// against Legendre polynomials of degree `<= p - 2` (global edge frame),
/// then the interior moments against `l_{i+1} l_{i+2} psi_m t_i t_i^T`.
fn local_dof_matrix(mesh: &Mesh, k: usize, p: usize) -> Mat {
    let cell = mesh.cell(k);
    let map = ModalMap::new(&cell);
    let n = nmon(p);
    let mut d = Array2::zeros((3 * n, 3 * n));
    for j in 0..3 {
        let jets = map.jets(p, cell.vertices[j]);
        for c in 0..3 {
            for i in 0..n {
                d[[3 * j + c, c * n + i]] = SYM_W[c] * jets[i].v;
            }
        }
    }
    let ne = 2 * (p - 1);
    for i in 0..3 {
        let e = mesh.cell_edges()[k][i];
        let nr = mesh.edge_normal(e);
        let len = mesh.edge_length(e);
        let off = 9 + i * ne;
        for (x, w, t) in edge_points(mesh, e, p + 2) {
            let leg = legendre_orthonormal(p - 2, t, len);
            let jets = map.jets(p, x);
            for (kk, l) in leg.iter().enumerate() {
                for a in 0..n {
                    let v = w * l * jets[a].v;
                    // (sigma n)_0 = s11 n0 + s12 n1, (sigma n)_1 = s12 n0 + s22 n1
                    d[[off + kk, a]] += v * nr[0];
                    d[[off + kk, n + a]] += v * SYM_W[1] * nr[1];
                    d[[off + (p - 1) + kk, n + a]] += v * SYM_W[1] * nr[0];
                    d[[off + (p - 1) + kk, 2 * n + a]] += v * nr[1];
                }
            }
        }
    }
    let off = 9 + 3 * ne;
    let ni = nmon(p - 2);
    for (x, w) in cell_quadrature(&cell, 2 * p) {
        let lam = cell.bary_at(x);
        let jets = map.jets(p, x);
        let tj = map.jets(p - 2, x);
        for i in 0..3 {
            let t = cell.tangent(i);
            let b = lam[(i + 1) % 3] * lam[(i + 2) % 3];
            let tt = [t[0] * t[0], 2.0 * SYM_W[1] * t[0] * t[1], t[1] * t[1]];
            for m in 0..ni {
                let wm = w * b * tj[m].v;
                for a in 0..n {
                    for c in 0..3 {
                        d[[off + i * ni + m, c * n + a]] += wm * tt[c] * jets[a].v;
                    }
                }
            }
        }
    }
    d
}

/// The stress space of degree `p` with the given boundary conditions.
pub fn build_sigma(mesh: &Mesh, p: usize, bc: BcMode) -> Result<FESpace> {
    let topo = mesh.boundary_topology(bc)?;
    let dofs = SigmaDofs::new(mesh, p, &topo)?;
    let mut kinds = Vec::new();
    let mut vstart = Vec::with_capacity(mesh.nv());
    for v in 0..mesh.nv() {
        vstart.push(kinds.len());
        for k in 0..dofs.vertex_free[v].ncols() {
            kinds.push(DofKind::Vertex { v, k });
        }
    }
    let mut estart = vec![usize::MAX; mesh.ne()];
    for e in 0..mesh.ne() {
        if topo.is_traction(e) {
            continue;
        }
        estart[e] = kinds.len();
        for c in 0..2 {
            for k in 0..=(p - 2) {
                kinds.push(DofKind::Edge { e, c, k });
            }
        }
    }
    let ni = dofs.interior_dofs();
    let mut cstart = Vec::with_capacity(mesh.nt());
    for cell in 0..mesh.nt() {
        cstart.push(kinds.len());
        for k in 0..ni {
            kinds.push(DofKind::Interior { cell, k });
        }
    }
    let nloc = 3 * nmon(p);
    let mut blocks = Vec::with_capacity(mesh.nt());
    for k in 0..mesh.nt() {
        // local DOF values as a linear map of the global DOFs in `cols`
        let mut cols = Vec::new();
        let mut t_entries: Vec<(usize, usize, f64)> = Vec::new();
        for (j, &v) in mesh.cells()[k].iter().enumerate() {
            let nv = &dofs.vertex_free[v];
            for q in 0..nv.ncols() {
                let col = cols.len();
                cols.push(vstart[v] + q);
                for c in 0..3 {
                    t_entries.push((3 * j + c, col, nv[[c, q]]));
                }
            }
        }
        for i in 0..3 {
            let e = mesh.cell_edges()[k][i];
            if estart[e] == usize::MAX {
                continue;
            }
            for r in 0..dofs.edge_dofs() {
                let col = cols.len();
                cols.push(estart[e] + r);
                t_entries.push((dofs.edge_offset(i) + r, col, 1.0));
            }
        }
        for r in 0..ni {
            let col = cols.len();
            cols.push(cstart[k] + r);
            t_entries.push((dofs.interior_offset() + r, col, 1.0));
        }
        let mut t = Array2::zeros((nloc, cols.len()));
        for (r, c, v) in t_entries {
            t[[r, c]] = v;
        }
        blocks.push(Block {
            cols,
            mat: dofs.e[k].dot(&t),
        });
    }
    Ok(FESpace {
        family: Family::Sigma,
        degree: p,
        bc,
        mesh: mesh.clone(),
        topo,
        dim: kinds.len(),
        blocks,
        dofs: kinds,
        rank_gap: None,
    })
}

/// Conformity and boundary constraints of the stress space in broken
/// coordinates, one normalised row per condition. Rows are built from the
/// DOF functionals, so they are linearly independent and their null space
/// is exactly the stress space.
pub fn sigma_constraints(mesh: &Mesh, dofs: &SigmaDofs, topo: &BoundaryTopology) -> Mat {
    let p = dofs.p;
    let nloc = 3 * nmon(p);
    let nb = nloc * mesh.nt();
    let mut rows: Vec<Vec<(usize, f64)>> = Vec::new();
    let local_row = |k: usize, r: usize| -> Vec<(usize, f64)> {
        (0..nloc).map(|a| (k * nloc + a, dofs.d[k][[r, a]])).collect()
    };
    for (v, inc) in mesh.vertex_cells().iter().enumerate() {
        let (k0, j0) = inc[0];
        for &(k, j) in &inc[1..] {
            for c in 0..3 {
                let mut r = local_row(k0, 3 * j0 + c);
                r.extend(local_row(k, 3 * j + c).into_iter().map(|(i, x)| (i, -x)));
                rows.push(r);
            }
        }
        let fixed = &dofs.vertex_fixed[v];
        for q in 0..fixed.nrows() {
            let mut r = Vec::new();
            for c in 0..3 {
                r.extend(local_row(k0, 3 * j0 + c).into_iter().map(|(i, x)| (i, fixed[[q, c]] * x)));
            }
            rows.push(r);
        }
    }
    for e in 0..mesh.ne() {
        let inc = mesh.edge_cells(e);
        let (k0, i0) = inc[0];
        if inc.len() == 2 {
            let (k1, i1) = inc[1];
            for r in 0..dofs.edge_dofs() {
                let mut row = local_row(k0, dofs.edge_offset(i0) + r);
                row.extend(
                    local_row(k1, dofs.edge_offset(i1) + r)
                        .into_iter()
                        .map(|(i, x)| (i, -x)),
                );
                rows.push(row);
            }
        } else if topo.is_traction(e) {
            for r in 0..dofs.edge_dofs() {
                rows.push(local_row(k0, dofs.edge_offset(i0) + r));
            }
        }
    }
    assemble_rows(&rows, nb)
}

fn assemble_rows(rows: &[Vec<(usize, f64)>], ncols: usize) -> Mat {
    let mut j: Mat = Array2::zeros((rows.len(), ncols));
    for (i, r) in rows.iter().enumerate() {
        for &(c, v) in r {
            j[[i, c]] += v;
        }
        let nrm = j.row(i).dot(&j.row(i)).sqrt();
        if nrm > 0.0 {
            j.row_mut(i).mapv_inplace(|x| x / nrm);
        }
    }
    j
}

/// The same space described without any DOFs: vertex values agree across
/// cells, full normal traces agree across interior edges and vanish on
/// traction edges. Rows are redundant; used as an independent oracle.
pub fn sigma_trace_constraints(mesh: &Mesh, p: usize, topo: &BoundaryTopology) -> Mat {
    let n = nmon(p);
    let nloc = 3 * n;
    let maps: Vec<ModalMap> = (0..mesh.nt()).map(|k| ModalMap::new(&mesh.cell(k))).collect();
    let mut rows: Vec<Vec<(usize, f64)>> = Vec::new();
    for (v, inc) in mesh.vertex_cells().iter().enumerate() {
        let x = mesh.vertices()[v];
        let (k0, _) = inc[0];
        let j0 = maps[k0].jets(p, x);
        for &(k, _) in &inc[1..] {
            let jk = maps[k].jets(p, x);
            for c in 0..3 {
                let mut r = Vec::new();
                for i in 0..n {
                    r.push((k0 * nloc + c * n + i, SYM_W[c] * j0[i].v));
                    r.push((k * nloc + c * n + i, -SYM_W[c] * jk[i].v));
                }
                rows.push(r);
            }
        }
    }
    for e in 0..mesh.ne() {
        let inc = mesh.edge_cells(e);
        if inc.len() == 1 && !topo.is_traction(e) {
            continue;
        }
        let nr = mesh.edge_normal(e);
        let len = mesh.edge_length(e);
        let pts = edge_points(mesh, e, p + 2);
        for comp in 0..2 {
            for kk in 0..=p {
                let mut r = Vec::new();
                for (side, &(k, _)) in inc.iter().enumerate() {
                    let sgn = if side == 0 { 1.0 } else { -1.0 };
                    for &(x, w, t) in &pts {
                        let l = legendre_orthonormal(p, t, len)[kk];
                        let jets = maps[k].jets(p, x);
                        for a in 0..n {
                            let v = sgn * w * l * jets[a].v;
                            if comp == 0 {
                                r.push((k * nloc + a, v * nr[0]));
                                r.push((k * nloc + n + a, v * SYM_W[1] * nr[1]));
                            } else {
                                r.push((k * nloc + n + a, v * SYM_W[1] * nr[0]));
                                r.push((k * nloc + 2 * n + a, v * nr[1]));
                            }
                        }
                    }
                }
                rows.push(r);
            }
        }
    }
    assemble_rows(&rows, nloc * mesh.nt())
}

/// Stresses whose divergence has degree `p - 2`: the null space of the
/// top-degree divergence coefficients inside the stress space.
pub fn arnold_winther_variant(sigma: &FESpace) -> Result<FESpace> {
    if !matches!(sigma.family(), Family::Sigma) {
        return Err(Error::Shape("expected a stress space".into()));
    }
    let p = sigma.degree();
    let mesh = sigma.mesh();
    let (lo, hi) = (nmon(p - 2), nmon(p - 1));
    let per = 2 * (hi - lo);
    let mut g = Array2::zeros((per * mesh.nt(), sigma.dim()));
    for k in 0..mesh.nt() {
        let d = div_matrix(&mesh.cell(k), p);
        let mut rows = Vec::with_capacity(per);
        for c in 0..2 {
            rows.extend((lo..hi).map(|i| c * hi + i));
        }
        let top = d.select(ndarray::Axis(0), &rows);
        let b = sigma.block(k);
        let m = top.dot(&b.mat);
        for (j, &col) in b.cols.iter().enumerate() {
            for r in 0..per {
                g[[k * per + r, col]] += m[[r, j]];
            }
        }
    }
    let ns = linalg::null_space(g.view(), None)?;
    let mut out = sigma.with_basis_transform(Family::SigmaAw, &ns.basis)?;
    out.rank_gap = Some(ns.gap);
    Ok(out)
}
