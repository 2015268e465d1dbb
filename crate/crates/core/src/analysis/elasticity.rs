use ndarray::{s, Array1, Array2};
use ndarray_linalg::Solve;
use serde::Serialize;

use super::projection::FieldSource;
use super::{assemble, block_gram, infsup_beta, paired_degree, same_mesh};
use crate::error::{Error, Result};
use crate::fespace::{edge_points, FESpace, SYM_W};
use crate::linalg::{self, Mat};
use crate::poly::modal::ModalMap;
use crate::poly::{nmon, Shape};

#[derive(Clone, Copy, Debug, Serialize)]
pub struct Lame {
    pub mu: f64,
    pub lambda: f64,
}

/// Compliance tensor on the broken symmetric basis of degree `p` of one
/// cell: `(1 / 2 mu) (I - k e e^T)` per monomial with `e = (1, 0, 1)` and
/// `k = lambda / (2 lambda + 2 mu)`.
pub fn compliance_block(lame: Lame, p: usize) -> Mat {
    let n = nmon(p);
    let k = lame.lambda / (2.0 * lame.lambda + 2.0 * lame.mu);
    let mut m = Array2::zeros((3 * n, 3 * n));
    for i in 0..n {
        for c in 0..3 {
            m[[c * n + i, c * n + i]] = 1.0;
        }
        for a in [0, 2] {
            for b in [0, 2] {
                m[[a * n + i, b * n + i]] -= k;
            }
        }
    }
    m / (2.0 * lame.mu)
}

#[derive(Clone, Debug, Serialize)]
pub struct HrSolution {
    pub sigma: Vec<f64>,
    pub u: Vec<f64>,
    /// `||K x - b|| / ||b||` of the saddle point system
    pub residual: f64,
}

/// Mixed elasticity: `(A sigma, tau) + (div tau, u) = <tau n, u0>` on the
/// displacement side of the boundary and `(div sigma, v) = (f, v)`.
pub fn solve_hellinger_reissner(
    sigma: &FESpace,
    v: &FESpace,
    lame: Lame,
    f: &FieldSource,
    u0: Option<&FieldSource>,
) -> Result<HrSolution> {
    same_mesh(sigma, v)?;
    if !(lame.mu > 0.0 && lame.lambda > 0.0) {
        return Err(Error::Config("Lame parameters must be positive".into()));
    }
    if f.shape() != Shape::Vector2 || u0.is_some_and(|g| g.shape() != Shape::Vector2) {
        return Err(Error::Shape("load and boundary data must be vector fields".into()));
    }
    let mesh = sigma.mesh();
    let (p, dv) = (sigma.degree(), paired_degree(sigma));
    let sys = assemble(sigma, v)?;
    let comp = compliance_block(lame, p);
    let a = linalg::symmetrize(&block_gram(sigma, |_| comp.clone()));
    let (ns, nv) = (sigma.dim(), v.dim());
    let mut k = Array2::zeros((ns + nv, ns + nv));
    k.slice_mut(s![..ns, ..ns]).assign(&a);
    k.slice_mut(s![..ns, ns..]).assign(&sys.b.t());
    k.slice_mut(s![ns.., ..ns]).assign(&sys.b);
    let mut rhs = Array1::zeros(ns + nv);
    let mut fb = Vec::new();
    for c in 0..mesh.nt() {
        fb.extend(super::l2_coefficients(mesh, c, dv, &f.on_cell(mesh, c)?));
    }
    rhs.slice_mut(s![ns..]).assign(&v.transpose_apply(&fb)?);
    if let Some(g) = u0 {
        let n = nmon(p);
        let mut gb = vec![0.0; 3 * n * mesh.nt()];
        for e in mesh.boundary_edges() {
            if sigma.topology().is_traction(e) {
                continue;
            }
            let (c, i) = mesh.edge_cells(e)[0];
            let cell = mesh.cell(c);
            let nr = cell.normal(i);
            let map = ModalMap::new(&cell);
            let gc = g.on_cell(mesh, c)?;
            for (x, w, _) in edge_points(mesh, e, (p + gc.degree()) / 2 + 1) {
                let val = gc.eval(x);
                let jets = map.jets(p, x);
                let en = [[nr[0], 0.0], [SYM_W[1] * nr[1], SYM_W[1] * nr[0]], [0.0, nr[1]]];
                for (comp_i, t) in en.iter().enumerate() {
                    let wt = w * (t[0] * val[0] + t[1] * val[1]);
                    for a in 0..n {
                        gb[c * 3 * n + comp_i * n + a] += wt * jets[a].v;
                    }
                }
            }
        }
        rhs.slice_mut(s![..ns]).assign(&sigma.transpose_apply(&gb)?);
    }
    let x = k.solve(&rhs).map_err(|_| singular(&sys))?;
    let r = k.dot(&x) - &rhs;
    let bn = linalg::vec_norm(&rhs);
    let residual = if bn > 0.0 { linalg::vec_norm(&r) / bn } else { linalg::vec_norm(&r) };
    if !residual.is_finite() || residual > 1e-6 {
        return Err(singular(&sys));
    }
    Ok(HrSolution {
        sigma: x.slice(s![..ns]).to_vec(),
        u: x.slice(s![ns..]).to_vec(),
        residual,
    })
}

fn singular(sys: &super::SaddleSystem) -> Error {
    match infsup_beta(sys) {
        Ok(r) => Error::Numerical(format!("saddle point system is singular (beta = {:.3e})", r.beta)),
        Err(e) => Error::Numerical(format!("saddle point system is singular ({e})")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::l2_coefficients;
    use crate::fespace::{build_sigma, build_v};
    use crate::mesh::{BcMode, Mesh};
    use crate::poly::{apply_diff, DiffOp, Frame, PolyField};

    /// Displacement `u`, stress `C eps(u)` and load `div C eps(u)`.
    fn manufactured(lame: Lame, d: usize) -> (PolyField, PolyField, PolyField) {
        let mut c = vec![0.0; 2 * nmon(d)];
        for (i, x) in c.iter_mut().enumerate() {
            *x = ((i * 7 + 3) % 11) as f64 / 11.0 - 0.4;
        }
        let u = PolyField::from_coeffs(Shape::Vector2, d, Frame::IDENTITY, c).unwrap();
        let (u0, u1) = (u.comp(0), u.comp(1));
        let div = u0.dx().add(&u1.dy());
        let e01 = u0.dy().add(&u1.dx()).scale(0.5);
        let s00 = u0.dx().scale(2.0 * lame.mu).axpy(lame.lambda, &div);
        let s11 = u1.dy().scale(2.0 * lame.mu).axpy(lame.lambda, &div);
        let s01 = e01.scale(2.0 * lame.mu);
        let sigma = PolyField::from_components(Shape::SymMatrix2, &[s00, s01, s11]).unwrap();
        let f = apply_diff(DiffOp::DivTensor, &sigma).unwrap();
        (u, sigma, f)
    }

    #[test]
    fn patch_test_is_exact() {
        let mesh = Mesh::crisscross(1).unwrap();
        let bc = BcMode::None;
        for p in [3, 4] {
            let s = build_sigma(&mesh, p, bc).unwrap();
            let v = build_v(&mesh, p - 1, bc).unwrap();
            for ratio in [1.0, 1e3, 1e6] {
                let lame = Lame { mu: 1.0, lambda: ratio };
                let (u, st, f) = manufactured(lame, p + 1);
                let sol = solve_hellinger_reissner(&s, &v, lame, &FieldSource::Poly(f), Some(&FieldSource::Poly(u)))
                    .unwrap();
                assert!(sol.residual < 1e-9, "{}", sol.residual);
                let got = s.to_broken(&sol.sigma).unwrap();
                let mut want = Vec::new();
                for k in 0..mesh.nt() {
                    want.extend(l2_coefficients(&mesh, k, p, &st));
                }
                let want = Array1::from(want);
                let d = crate::analysis::broken_div(&mesh, p, p - 1);
                let hdiv = |x: &Array1<f64>| (x.dot(x) + d.dot(x).dot(&d.dot(x))).sqrt();
                let e = hdiv(&(&got - &want)) / hdiv(&want);
                assert!(e < 1e-8, "p={p} ratio={ratio} err={e}");
            }
        }
    }

    #[test]
    fn zero_load_gives_zero() {
        let mesh = Mesh::unit_triangle().unwrap();
        let bc = BcMode::FullTraction;
        let s = build_sigma(&mesh, 3, bc).unwrap();
        let v = build_v(&mesh, 2, bc).unwrap();
        let f = PolyField::zeros(Shape::Vector2, 0, Frame::IDENTITY);
        let sol = solve_hellinger_reissner(&s, &v, Lame { mu: 1.0, lambda: 1.0 }, &FieldSource::Poly(f), None).unwrap();
        assert!(sol.sigma.iter().chain(&sol.u).all(|x| x.abs() < 1e-14));
    }
}
