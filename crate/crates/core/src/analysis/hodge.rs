use ndarray::{concatenate, Array1, Array2, ArrayView1, Axis};
use ndarray_linalg::Inverse;
use serde::Serialize;

use super::cohomology::HarmonicBasis;
use super::{
    assemble, block_gram, broken_airy, broken_div, embed, flux_moment_rows, h2_gram, l2_coefficients, loop_sets, norm,
    paired_degree, same_mesh,
};
use crate::error::{Error, Result};
use crate::fespace::{p1_gamma_dim, rm_coefficients, FESpace};
use crate::poly::{Frame, PolyField};
use crate::linalg::{self, Mat, Vector};

#[derive(Clone, Debug, Serialize)]
pub struct DivInverse {
    pub coeffs: Vec<f64>,
    pub norm_div: f64,
    /// `||div sigma - u|| / ||u||`
    pub div_residual: f64,
    /// largest mismatch of the prescribed fluxes
    pub moment_residual: f64,
}

/// Minimum-`H(div)` stress with `div sigma = u` and, optionally, prescribed
/// rigid-motion fluxes `omega[j][l]` through the displacement-side chains.
pub fn min_norm_div_inverse(sigma: &FESpace, v: &FESpace, u: &[f64], omega: Option<&Mat>) -> Result<DivInverse> {
    same_mesh(sigma, v)?;
    let mesh = sigma.mesh();
    let (p, dv) = (sigma.degree(), paired_degree(sigma));
    if v.degree() != dv {
        return Err(Error::Dimension("displacement degree does not match".into()));
    }
    let ub = v.to_broken(u)?;
    let sets = sigma.topology().gamma_n.clone();
    let target_omega = match omega {
        None => None,
        Some(w) => {
            if w.dim() != (sets.len(), 3) {
                return Err(Error::Dimension(format!(
                    "expected {}x3 flux data, got {:?}",
                    sets.len(),
                    w.dim()
                )));
            }
            let rm = rm_coefficients(mesh, dv).t().dot(&ub);
            for l in 0..3 {
                let sum: f64 = w.column(l).sum();
                if (sum - rm[l]).abs() > 1e-9 * rm[l].abs().max(1.0) {
                    return Err(Error::Precondition(format!(
                        "flux data for rigid motion {l} sum to {sum:.6e}, but the load gives {:.6e}",
                        rm[l]
                    )));
                }
            }
            Some(Array1::from_iter(w.iter().copied()))
        }
    };
    let sys = assemble(sigma, v)?;
    let l = linalg::cholesky(&sys.a, "A")?;
    let z = sigma.dense_basis();
    let dz = broken_div(mesh, p, dv).dot(&z);
    let mut lhs = dz.clone();
    let mut rhs = ub.clone();
    let fm = flux_moment_rows(mesh, p, &sets).dot(&z);
    if let Some(w) = &target_omega {
        lhs = concatenate![Axis(0), lhs, fm];
        rhs = concatenate![Axis(0), rhs, w.view()];
    }
    // c = L^{-T} y turns the A-norm into the Euclidean norm of y
    let m = linalg::solve_lower(&l, &lhs.t().to_owned())?.t().to_owned();
    let ls = linalg::solve_least_squares(m.view(), rhs.view().insert_axis(Axis(1)))?;
    let c = linalg::solve_lower_t(&l, &ls.x)?.column(0).to_owned();
    let div_residual = norm(&(dz.dot(&c) - &ub)) / norm(&ub).max(f64::MIN_POSITIVE);
    if div_residual > 1e-9 && norm(&ub) > 0.0 {
        return Err(Error::Numerical(format!(
            "u is not in the discrete range of div (residual {div_residual:.3e})"
        )));
    }
    let moment_residual = match &target_omega {
        Some(w) => (fm.dot(&c) - w).iter().fold(0.0f64, |a, x| a.max(x.abs())),
        None => 0.0,
    };
    let norm_div = c.dot(&sys.a.dot(&c)).max(0.0).sqrt();
    Ok(DivInverse {
        coeffs: c.to_vec(),
        norm_div,
        div_residual,
        moment_residual,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct HodgeParts {
    /// coefficients in the columns of the low-order harmonic basis
    pub phi3: Vec<f64>,
    /// potential coefficients
    pub q: Vec<f64>,
    /// stress coefficients of the part orthogonal to the divergence kernel
    pub tau: Vec<f64>,
    pub norm_sigma: f64,
    pub norm_div_sigma: f64,
    pub norm_phi3: f64,
    pub norm_q_h2: f64,
    pub norm_airy_q: f64,
    pub norm_tau: f64,
    /// `||sigma - phi3 - airy q - tau|| / ||sigma||` in `H(div)`
    pub reconstruction: f64,
    /// `(||phi3|| + ||q||_2) / ||sigma||`
    pub potential_constant: f64,
    /// `||tau|| / ||div sigma||`
    pub tau_constant: f64,
}

/// Worst-case ratios of the decomposition over the whole stress space.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct HodgeConstants {
    /// `sup (||phi3||^2 + ||q||_2^2)^{1/2} / ||sigma||_div`
    pub potential: f64,
    /// `sup ||tau||_div / ||div sigma||`
    pub tau: f64,
}

/// The decomposition as a set of precomputed linear maps.
pub struct HodgeOperator {
    /// broken divergence
    d: Mat,
    /// stress basis in broken coordinates and its pseudo-inverse
    z: Mat,
    z_pinv: Mat,
    /// orthonormal broken basis of the stress space
    zo: Mat,
    /// kernel of the divergence in the coordinates of `zo`, and in broken
    /// coordinates
    kernel_y: Mat,
    kernel: Mat,
    flux: Mat,
    moments: Mat,
    moments_pinv: Mat,
    /// harmonic forms in broken coordinates of degree `p`
    harmonic: Mat,
    airy: Mat,
    airy_pinv: Mat,
    /// `H^2` Gram matrix of the potential space
    h2: Mat,
    /// removes the `H^2`-projection onto affine potentials
    affine_fix: Option<Mat>,
}

impl HodgeOperator {
    pub fn new(sigma: &FESpace, q: &FESpace, harmonic: &HarmonicBasis) -> Result<HodgeOperator> {
        same_mesh(sigma, q)?;
        let mesh = sigma.mesh();
        let (p, dv) = (sigma.degree(), paired_degree(sigma));
        if q.degree() != p + 2 || harmonic.degree > p {
            return Err(Error::Dimension("decomposition spaces have mismatched degrees".into()));
        }
        let z = sigma.dense_basis();
        let (zo, _) = linalg::range_basis(z.view(), None)?;
        let d = broken_div(mesh, p, dv);
        let kernel_y = linalg::null_space(d.dot(&zo).view(), None)?.basis;
        let sets = loop_sets(sigma, &sigma.topology().i_star);
        let flux = flux_moment_rows(mesh, p, &sets);
        let nh = harmonic.broken.ncols();
        if harmonic.moments.dim() != (3 * sets.len(), nh) {
            return Err(Error::Dimension("harmonic basis does not match the loop set".into()));
        }
        if nh > 0 && linalg::rank(harmonic.moments.view(), None)?.rank < nh {
            return Err(Error::Numerical("flux matrix of the harmonic forms is singular".into()));
        }
        let mut hb = Array2::zeros((d.ncols(), nh));
        for j in 0..nh {
            let col = harmonic.broken.column(j).to_vec();
            hb.column_mut(j).assign(&embed(&col, 3, mesh.nt(), harmonic.degree, p));
        }
        let airy = broken_airy(q);
        let h2 = linalg::symmetrize(&block_gram(q, |k| h2_gram(mesh, k, q.degree())));
        let affine_fix = if p1_gamma_dim(q.topology()) == 3 {
            let zq = q.dense_basis();
            let mut aff = Array2::zeros((zq.nrows(), 3));
            for (l, &(c, x, y)) in [(1.0, 0.0, 0.0), (0.0, 1.0, 0.0), (0.0, 0.0, 1.0)].iter().enumerate() {
                let f = PolyField::affine(c, x, y, Frame::IDENTITY);
                let mut b = Vec::new();
                for k in 0..mesh.nt() {
                    b.extend(l2_coefficients(mesh, k, q.degree(), &f));
                }
                aff.column_mut(l).assign(&Array1::from(b));
            }
            let ls = linalg::solve_least_squares(zq.view(), aff.view())?;
            if ls.residual > 1e-9 {
                return Err(Error::Numerical("affine functions are missing from the potential space".into()));
            }
            let a = ls.x;
            let ga = h2.dot(&a);
            let small = linalg::symmetrize(&a.t().dot(&ga)).inv()?;
            Some(Array2::eye(q.dim()) - a.dot(&small).dot(&ga.t()))
        } else {
            None
        };
        Ok(HodgeOperator {
            z_pinv: linalg::pinv(z.view(), None)?,
            z,
            kernel: zo.dot(&kernel_y),
            d,
            zo,
            kernel_y,
            flux,
            moments: harmonic.moments.clone(),
            moments_pinv: linalg::pinv(harmonic.moments.view(), None)?,
            harmonic: hb,
            airy_pinv: linalg::pinv(airy.view(), None)?,
            airy,
            h2,
            affine_fix,
        })
    }

    fn hdiv(&self, x: &Vector) -> f64 {
        let dx = self.d.dot(x);
        (x.dot(x) + dx.dot(&dx)).sqrt()
    }

    /// Potential coefficients of a divergence-free remainder; with affine
    /// functions in the space, the one of least `H^2` norm.
    fn potential(&self, rho: &Mat) -> Mat {
        let qc = self.airy_pinv.dot(rho);
        match &self.affine_fix {
            Some(f) => f.dot(&qc),
            None => qc,
        }
    }

    pub fn decompose(&self, coeffs: &[f64]) -> Result<HodgeParts> {
        if coeffs.len() != self.z.ncols() {
            return Err(Error::Dimension("stress coefficient count".into()));
        }
        let sb = self.z.dot(&ArrayView1::from(coeffs));
        let norm_sigma = self.hdiv(&sb);
        let tiny = norm_sigma.max(f64::MIN_POSITIVE);
        // step 1: on the kernel the H(div) product is the L^2 product
        let tilde = self.kernel.dot(&self.kernel.t().dot(&sb));
        let tau_b = &sb - &tilde;
        // step 2: match the loop fluxes with the low-order harmonic forms
        let kappa = self.flux.dot(&tilde);
        let phi3 = self.moments_pinv.dot(&kappa);
        if norm(&(self.moments.dot(&phi3) - &kappa)) > 1e-8 * norm(&kappa).max(tiny) {
            return Err(Error::Numerical("loop fluxes are not matched by the harmonic forms".into()));
        }
        let phi_b = self.harmonic.dot(&phi3);
        // step 3: the remainder is an Airy stress
        let rho = &tilde - &phi_b;
        let qc = self.potential(&rho.clone().insert_axis(Axis(1))).column(0).to_owned();
        let airy_b = self.airy.dot(&qc);
        let miss = norm(&(&airy_b - &rho));
        if miss > 1e-8 * tiny {
            return Err(Error::Numerical(format!(
                "divergence-free remainder is not an Airy stress (residual {:.3e})",
                miss / tiny
            )));
        }
        let tau = self.z_pinv.dot(&tau_b);
        let recon = &sb - &phi_b - &airy_b - &self.z.dot(&tau);
        let norm_div_sigma = norm(&self.d.dot(&sb));
        let norm_phi3 = norm(&phi_b);
        let norm_q_h2 = qc.dot(&self.h2.dot(&qc)).max(0.0).sqrt();
        let norm_tau = self.hdiv(&tau_b);
        Ok(HodgeParts {
            phi3: phi3.to_vec(),
            q: qc.to_vec(),
            tau: tau.to_vec(),
            norm_sigma,
            norm_div_sigma,
            norm_phi3,
            norm_q_h2,
            norm_airy_q: norm(&airy_b),
            norm_tau,
            reconstruction: self.hdiv(&recon) / tiny,
            potential_constant: (norm_phi3 + norm_q_h2) / tiny,
            tau_constant: if norm_div_sigma > 0.0 { norm_tau / norm_div_sigma } else { 0.0 },
        })
    }

    /// The two constants of the decomposition as operator norms, from
    /// generalized eigenvalue problems on the stress space.
    pub fn constants(&self) -> Result<HodgeConstants> {
        let r = self.zo.ncols();
        let dz = self.d.dot(&self.zo);
        let mut a = dz.t().dot(&dz);
        for i in 0..r {
            a[[i, i]] += 1.0;
        }
        let a = linalg::symmetrize(&a);
        // tau lives on the complement of the kernel, where div tau = div sigma
        let w = linalg::orthonormal_complement(&self.kernel_y)?;
        let tau = if w.ncols() == 0 {
            0.0
        } else {
            let dw = dz.dot(&w);
            let (kmin, _) = linalg::smallest_sym_eig(&linalg::symmetrize(&dw.t().dot(&dw)))?;
            if kmin <= 0.0 {
                f64::INFINITY
            } else {
                (1.0 + 1.0 / kmin).sqrt()
            }
        };
        let t = self.kernel.dot(&self.kernel_y.t());
        let mc = self.moments_pinv.dot(&self.flux.dot(&t));
        let mq = self.potential(&(&t - &self.harmonic.dot(&mc)));
        let b = linalg::symmetrize(&(mc.t().dot(&mc) + mq.t().dot(&self.h2.dot(&mq))));
        let potential = linalg::largest_gen_eigenvalue(&b, &a)?.max(0.0).sqrt();
        Ok(HodgeConstants { potential, tau })
    }
}

/// Splits `sigma` into a low-order harmonic part, an Airy part and a part
/// orthogonal to the divergence-free stresses.
pub fn hodge_decompose(sigma: &FESpace, q: &FESpace, harmonic: &HarmonicBasis, coeffs: &[f64]) -> Result<HodgeParts> {
    HodgeOperator::new(sigma, q, harmonic)?.decompose(coeffs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::{harmonic_basis, infsup_beta, l2_coefficients};
    use crate::fespace::{build_q, build_sigma, build_v};
    use crate::mesh::{BcMode, Mesh};
    use crate::poly::Shape;
    use crate::refpoincare::PoincareOps;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
    }

    #[test]
    fn zero_data_gives_zero_stress() {
        let mesh = Mesh::crisscross(1).unwrap();
        let s = build_sigma(&mesh, 3, BcMode::None).unwrap();
        let v = build_v(&mesh, 2, BcMode::None).unwrap();
        let r = min_norm_div_inverse(&s, &v, &vec![0.0; v.dim()], None).unwrap();
        assert!(r.coeffs.iter().all(|c| c.abs() < 1e-14));
    }

    #[test]
    fn bound_by_inf_sup_constant() {
        let mesh = Mesh::unit_triangle().unwrap();
        let bc = BcMode::FullTraction;
        let s = build_sigma(&mesh, 4, bc).unwrap();
        let v = build_v(&mesh, 3, bc).unwrap();
        let beta = infsup_beta(&assemble(&s, &v).unwrap()).unwrap().beta;
        for seed in 0..4 {
            let u = random(v.dim(), seed);
            let r = min_norm_div_inverse(&s, &v, &u, None).unwrap();
            assert!(r.div_residual < 1e-9);
            let un = u.iter().map(|x| x * x).sum::<f64>().sqrt();
            assert!(r.norm_div <= un / beta * (1.0 + 1e-9));
        }
    }

    #[test]
    fn agrees_with_cell_inversion() {
        let mesh = Mesh::unit_triangle().unwrap();
        let bc = BcMode::FullTraction;
        let p = 4;
        let s = build_sigma(&mesh, p, bc).unwrap();
        let v = build_v(&mesh, p - 1, bc).unwrap();
        let u = random(v.dim(), 11);
        let cell = mesh.cell(0);
        let uf = crate::fespace::broken_field(Shape::Vector2, &cell, p - 1, v.to_broken(&u).unwrap().as_slice().unwrap())
            .unwrap();
        let local = PoincareOps::new(p).unwrap().invert_div_cell(&uf, &cell).unwrap();
        let lb = Array1::from(l2_coefficients(&mesh, 0, p, &local.sigma));
        // the cellwise solution lies in the global space
        let z = s.dense_basis();
        let fit = linalg::solve_least_squares(z.view(), lb.view().insert_axis(Axis(1))).unwrap();
        assert!(fit.residual < 1e-9);
        let r = min_norm_div_inverse(&s, &v, &u, None).unwrap();
        let d = broken_div(&mesh, p, p - 1);
        let diff = d.dot(&(&s.to_broken(&r.coeffs).unwrap() - &lb));
        assert!(norm(&diff) < 1e-9 * norm(&lb));
    }

    #[test]
    fn prescribed_fluxes() {
        let mesh = Mesh::square_annulus().unwrap();
        let bc = BcMode::None;
        let s = build_sigma(&mesh, 3, bc).unwrap();
        let v = build_v(&mesh, 2, bc).unwrap();
        let u = random(v.dim(), 2);
        let ub = v.to_broken(&u).unwrap();
        let total = rm_coefficients(&mesh, 2).t().dot(&ub);
        let nj = s.topology().gamma_n.len();
        assert_eq!(nj, 2);
        let mut w = Array2::from_shape_vec((nj, 3), random(3 * nj, 4)).unwrap();
        for l in 0..3 {
            w[[nj - 1, l]] = total[l] - w.column(l).slice(ndarray::s![..nj - 1]).sum();
        }
        let r = min_norm_div_inverse(&s, &v, &u, Some(&w)).unwrap();
        assert!(r.moment_residual < 1e-8 && r.div_residual < 1e-9);
        w[[0, 0]] += 1.0;
        assert!(matches!(min_norm_div_inverse(&s, &v, &u, Some(&w)), Err(Error::Precondition(_))));
    }

    #[test]
    fn exact_case_is_pure_airy() {
        let mesh = Mesh::crisscross(1).unwrap();
        let bc = BcMode::None;
        let s = build_sigma(&mesh, 3, bc).unwrap();
        let q = build_q(&mesh, 5, bc).unwrap();
        let h = harmonic_basis(&s, &q, None).unwrap();
        let q0 = random(q.dim(), 8);
        let target = broken_airy(&q).dot(&Array1::from(q0));
        let c = linalg::solve_least_squares(s.dense_basis().view(), target.view().insert_axis(Axis(1))).unwrap();
        let parts = hodge_decompose(&s, &q, &h, c.x.column(0).as_slice().unwrap()).unwrap();
        assert!(parts.norm_tau < 1e-9 * parts.norm_sigma);
        assert!(parts.phi3.is_empty());
        assert!(parts.reconstruction < 1e-9);
        assert!((parts.norm_airy_q - parts.norm_sigma).abs() < 1e-9 * parts.norm_sigma);
    }

    #[test]
    fn annulus_decomposition() {
        let mesh = Mesh::square_annulus().unwrap();
        let bc = BcMode::None;
        let s3 = build_sigma(&mesh, 3, bc).unwrap();
        let h3 = harmonic_basis(&s3, &build_q(&mesh, 5, bc).unwrap(), None).unwrap();
        let s = build_sigma(&mesh, 4, bc).unwrap();
        let q = build_q(&mesh, 6, bc).unwrap();
        let sigma = random(s.dim(), 21);
        let parts = hodge_decompose(&s, &q, &h3, &sigma).unwrap();
        assert!(parts.reconstruction < 1e-8, "{parts:?}");
        assert_eq!(parts.phi3.len(), 3);
        // with harmonic forms of the same degree the three parts are orthogonal
        let h4 = harmonic_basis(&s, &q, None).unwrap();
        let parts = hodge_decompose(&s, &q, &h4, &sigma).unwrap();
        let phi = h4.broken.dot(&Array1::from(parts.phi3.clone()));
        let aq = broken_airy(&q).dot(&Array1::from(parts.q.clone()));
        let tau = s.to_broken(&parts.tau).unwrap();
        let d = broken_div(&mesh, 4, 3);
        let ip = |a: &Vector, b: &Vector| a.dot(b) + d.dot(a).dot(&d.dot(b));
        let scale = parts.norm_sigma * parts.norm_sigma;
        assert!(ip(&phi, &aq).abs() < 1e-9 * scale);
        assert!(ip(&phi, &tau).abs() < 1e-9 * scale);
        assert!(ip(&aq, &tau).abs() < 1e-9 * scale);
    }
}
