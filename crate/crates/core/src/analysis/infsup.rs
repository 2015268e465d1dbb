use ndarray::{s, Array2, Axis};
use serde::Serialize;

use super::{block_cross, block_gram, div_block, paired_degree, same_mesh};
use crate::error::{Error, Result};
use crate::fespace::{quotient_by_rm, rm_coefficients, sigma_constraints, FESpace, Family, SigmaDofs};
use crate::linalg::{self, Mat};
use crate::mesh::{BcMode, Mesh};
use crate::poly::nmon;

/// The three matrices of the discrete saddle point problem.
#[derive(Clone, Debug)]
pub struct SaddleSystem {
    /// `(tau_j, tau_i)_div`
    pub a: Mat,
    /// `(div tau_j, v_i)`
    pub b: Mat,
    /// `(v_j, v_i)`
    pub c: Mat,
}

impl SaddleSystem {
    pub fn dim_sigma(&self) -> usize {
        self.a.nrows()
    }

    pub fn dim_v(&self) -> usize {
        self.c.nrows()
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct InfSupResult {
    pub beta: f64,
    pub nu: f64,
    pub dim_sigma: usize,
    pub dim_v: usize,
    pub residual: f64,
}

/// Assembles `A`, `B` and `C` for a stress space and its displacement space.
pub fn assemble(sigma: &FESpace, v: &FESpace) -> Result<SaddleSystem> {
    same_mesh(sigma, v)?;
    if !matches!(sigma.family(), Family::Sigma | Family::SigmaAw) || v.family() != Family::V {
        return Err(Error::Shape("assemble expects a stress and a displacement space".into()));
    }
    let p = sigma.degree();
    let dv = v.degree();
    if dv != paired_degree(sigma) {
        return Err(Error::Dimension(format!(
            "displacement degree {dv} does not match stress degree {p}"
        )));
    }
    let mesh = sigma.mesh();
    let divs: Vec<Mat> = (0..mesh.nt()).map(|k| div_block(mesh, k, p, dv)).collect();
    let ns = sigma.local_dim();
    let a = block_gram(sigma, |k| {
        let mut g = divs[k].t().dot(&divs[k]);
        for i in 0..ns {
            g[[i, i]] += 1.0;
        }
        g
    });
    let b = block_cross(v, sigma, |k| divs[k].clone())?;
    let c = block_gram(v, |_| Array2::eye(v.local_dim()));
    Ok(SaddleSystem {
        a: linalg::symmetrize(&a),
        b,
        c: linalg::symmetrize(&c),
    })
}

/// `beta^2` as the smallest eigenvalue of `B A^{-1} B^T p = nu C p`.
pub fn infsup_beta(sys: &SaddleSystem) -> Result<InfSupResult> {
    let l = linalg::cholesky(&sys.a, "A")?;
    let x = linalg::solve_lower(&l, &sys.b.t().to_owned())?;
    let schur = linalg::symmetrize(&x.t().dot(&x));
    let eig = linalg::smallest_gen_eig(&schur, &sys.c)?;
    finish(eig.value, eig.residual, sys.dim_sigma(), sys.dim_v())
}

fn finish(nu: f64, residual: f64, dim_sigma: usize, dim_v: usize) -> Result<InfSupResult> {
    if nu < -1e-12 {
        return Err(Error::Numerical(format!(
            "divergence is not onto the displacement space (smallest eigenvalue {nu:.3e})"
        )));
    }
    let nu = nu.max(0.0);
    Ok(InfSupResult {
        beta: nu.sqrt(),
        nu,
        dim_sigma,
        dim_v,
        residual,
    })
}

/// Inf-sup constant without forming a basis of the stress space.
///
/// With `Z` an orthonormal basis of the stress space inside the broken
/// space, `P = Z Z^T` and `D` the broken divergence, the Schur complement
/// has the eigenvalues `kappa / (1 + kappa)` where `kappa` runs over the
/// eigenvalues of `K = D P D^T`. `P = I - Y^T Y` with `Y` an orthonormal
/// basis of the constraint rows, obtained from a Cholesky factor of
/// `J J^T`. With `arnold_winther` the top-degree divergence rows are added
/// to the constraints and the displacement degree drops to `p - 2`.
pub fn infsup_constrained(mesh: &Mesh, p: usize, bc: BcMode, arnold_winther: bool) -> Result<InfSupResult> {
    let topo = mesh.boundary_topology(bc)?;
    let dofs = SigmaDofs::new(mesh, p, &topo)?;
    let j = sigma_constraints(mesh, &dofs, &topo);
    let nt = mesh.nt();
    let nloc = 3 * nmon(p);
    let dv = if arnold_winther { p - 2 } else { p - 1 };
    let nv = 2 * nmon(dv);
    let y = if j.nrows() == 0 {
        j
    } else {
        let jjt = linalg::symmetrize(&j.dot(&j.t()));
        let r = linalg::cholesky(&jjt, "constraint Gram matrix")?;
        linalg::solve_lower(&r, &j)?
    };
    let mut removed = y.nrows();
    let divs: Vec<Mat> = (0..nt).map(|k| div_block(mesh, k, p, dv)).collect();
    // W = D Y^T, one cell at a time
    let cell_times = |blocks: &[Mat], rows: usize, m: &Mat| -> Mat {
        let mut out = Array2::zeros((rows * nt, m.nrows()));
        for k in 0..nt {
            let yk = m.slice(s![.., k * nloc..(k + 1) * nloc]);
            out.slice_mut(s![k * rows..(k + 1) * rows, ..]).assign(&blocks[k].dot(&yk.t()));
        }
        out
    };
    let w = cell_times(&divs, nv, &y);
    let mut k_mat = Array2::zeros((nv * nt, nv * nt));
    for k in 0..nt {
        k_mat
            .slice_mut(s![k * nv..(k + 1) * nv, k * nv..(k + 1) * nv])
            .assign(&divs[k].dot(&divs[k].t()));
    }
    k_mat -= &w.dot(&w.t());
    if arnold_winther {
        let (lo, hi) = (nmon(p - 2), nmon(p - 1));
        let top: Vec<usize> = (0..2).flat_map(|c| (lo..hi).map(move |i| c * hi + i)).collect();
        let per = top.len();
        let mut g = Array2::zeros((per * nt, nloc * nt));
        for k in 0..nt {
            let d = crate::fespace::div_matrix(&mesh.cell(k), p).select(Axis(0), &top);
            g.slice_mut(s![k * per..(k + 1) * per, k * nloc..(k + 1) * nloc]).assign(&d);
        }
        // project the new rows onto the current stress space and orthonormalise
        let gp = &g - &g.dot(&y.t()).dot(&y);
        let (u, info) = linalg::range_basis(gp.t(), None)?;
        removed += info.rank;
        let du = cell_times(&divs, nv, &u.t().to_owned());
        k_mat -= &du.dot(&du.t());
    }
    let mut dim_v = nv * nt;
    if quotient_by_rm(&topo) {
        k_mat = linalg::complement_congruence(&k_mat, &rm_coefficients(mesh, dv))?;
        dim_v -= 3;
    }
    let k_mat = linalg::symmetrize(&k_mat);
    let (kappa, x) = linalg::smallest_sym_eig(&k_mat)?;
    let res = k_mat.dot(&x) - &x * kappa;
    let residual = linalg::vec_norm(&res) / ((linalg::norm1(k_mat.view()) + kappa.abs()) * linalg::vec_norm(&x));
    if kappa < -1e-12 * linalg::norm1(k_mat.view()) {
        return Err(Error::Numerical(format!(
            "divergence is not onto the displacement space (smallest eigenvalue {kappa:.3e})"
        )));
    }
    let kappa = kappa.max(0.0);
    finish(kappa / (1.0 + kappa), residual, nloc * nt - removed, dim_v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fespace::{arnold_winther_variant, build_sigma, build_v};

    fn schur(mesh: &Mesh, p: usize, bc: BcMode, aw: bool) -> InfSupResult {
        let mut s = build_sigma(mesh, p, bc).unwrap();
        let dv = if aw {
            s = arnold_winther_variant(&s).unwrap();
            p - 2
        } else {
            p - 1
        };
        let v = build_v(mesh, dv, bc).unwrap();
        infsup_beta(&assemble(&s, &v).unwrap()).unwrap()
    }

    #[test]
    fn unit_triangle_system() {
        let t = Mesh::unit_triangle().unwrap();
        let s = build_sigma(&t, 3, BcMode::None).unwrap();
        let v = build_v(&t, 2, BcMode::None).unwrap();
        let sys = assemble(&s, &v).unwrap();
        assert_eq!((sys.dim_sigma(), sys.dim_v()), (30, 12));
        linalg::cholesky(&sys.a, "A").unwrap();
        let s = build_sigma(&t, 3, BcMode::FullTraction).unwrap();
        let v = build_v(&t, 2, BcMode::FullTraction).unwrap();
        let sys = assemble(&s, &v).unwrap();
        assert_eq!(linalg::rank(sys.b.view(), None).unwrap().rank, 9);
    }

    #[test]
    fn routes_agree() {
        for mesh in [Mesh::unit_triangle().unwrap(), Mesh::crisscross(1).unwrap()] {
            for bc in [BcMode::None, BcMode::FullTraction] {
                for p in [3, 4] {
                    let a = schur(&mesh, p, bc, false);
                    let b = infsup_constrained(&mesh, p, bc, false).unwrap();
                    assert_eq!((a.dim_sigma, a.dim_v), (b.dim_sigma, b.dim_v));
                    assert!((a.nu - b.nu).abs() < 1e-9, "{a:?} {b:?}");
                    assert!(a.beta > 0.0 && a.beta <= 1.0 + 1e-10);
                }
            }
        }
    }

    #[test]
    fn arnold_winther_routes_agree() {
        for mesh in [Mesh::unit_triangle().unwrap(), Mesh::crisscross(1).unwrap()] {
            for bc in [BcMode::None, BcMode::FullTraction] {
                let a = schur(&mesh, 3, bc, true);
                let b = infsup_constrained(&mesh, 3, bc, true).unwrap();
                assert_eq!((a.dim_sigma, a.dim_v), (b.dim_sigma, b.dim_v));
                assert!((a.nu - b.nu).abs() < 1e-9, "{a:?} {b:?}");
            }
        }
    }
}
