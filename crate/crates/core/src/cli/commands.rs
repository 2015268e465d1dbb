use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{fmt_f64, par_map, to_json, Csv, Method, Output, RunConfig};
use crate::analysis::{
    assemble, broken_div, cohomology_dim, harmonic_basis, infsup_beta, infsup_constrained,
    l2_coefficients, project_v, solve_hellinger_reissner, FieldSource, HodgeOperator, InfSupResult, Lame,
};
use crate::error::Result;
use crate::fespace::{arnold_winther_variant, build_q_tol, build_sigma, build_v, euler_dimension_check};
use crate::linalg::{self, Vector};
use crate::mesh::{BcMode, Mesh};
use crate::poly::{apply_diff, nmon, DiffOp, Frame, PolyField, Shape};

/// Deterministic generator for one configuration.
pub(crate) fn rng_for(seed: u64, tags: &[u64]) -> ChaCha8Rng {
    let mut s = seed ^ 0x9e37_79b9_7f4a_7c15;
    for &t in tags {
        s = s.rotate_left(17).wrapping_mul(0x100_0000_01b3) ^ t;
    }
    ChaCha8Rng::seed_from_u64(s)
}

pub(crate) fn random_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

pub(crate) fn random_poly(rng: &mut ChaCha8Rng, shape: Shape, d: usize) -> PolyField {
    let c = random_vec(rng, shape.ncomp() * nmon(d));
    PolyField::from_coeffs(shape, d, Frame::IDENTITY, c).expect("coefficient count matches")
}

/// Configurations `(mesh name, mesh, bc, p)` in output order.
fn grid(cfg: &RunConfig) -> Result<Vec<(String, Mesh, BcMode, usize)>> {
    let mut out = Vec::new();
    for (name, mesh) in cfg.mesh_levels()? {
        for &bc in &cfg.bcs {
            for p in cfg.degree_list() {
                out.push((name.clone(), mesh.clone(), bc, p));
            }
        }
    }
    Ok(out)
}

pub fn infsup_one(mesh: &Mesh, p: usize, bc: BcMode, aw: bool, method: Method) -> Result<InfSupResult> {
    match method {
        Method::Fast => infsup_constrained(mesh, p, bc, aw),
        Method::Schur => {
            let mut s = build_sigma(mesh, p, bc)?;
            if aw {
                s = arnold_winther_variant(&s)?;
            }
            let v = build_v(mesh, if aw { p - 2 } else { p - 1 }, bc)?;
            infsup_beta(&assemble(&s, &v)?)
        }
    }
}

pub fn infsup(cfg: &RunConfig, aw: bool, method: Method) -> Result<Output> {
    let items = grid(cfg)?;
    let rows = par_map(&items, |(_, mesh, bc, p)| infsup_one(mesh, *p, *bc, aw, method));
    let mut csv = Csv::new(&["mesh", "bc", "h", "p", "dim_sigma", "dim_v", "beta", "nu", "residual"]);
    for ((name, mesh, bc, p), r) in items.iter().zip(rows) {
        let r = r?;
        csv.row(&[
            name.clone(),
            bc.name().to_string(),
            fmt_f64(mesh.h()),
            p.to_string(),
            r.dim_sigma.to_string(),
            r.dim_v.to_string(),
            fmt_f64(r.beta),
            fmt_f64(r.nu),
            fmt_f64(r.residual),
        ]);
    }
    Ok(Output {
        text: csv.finish(),
        ok: true,
    })
}

#[derive(Serialize)]
struct HodgeRow {
    mesh: String,
    bc: BcMode,
    p: usize,
    sample: usize,
    phi3: Vec<f64>,
    norm_sigma: f64,
    norm_div_sigma: f64,
    norm_phi3: f64,
    norm_q_h2: f64,
    norm_tau: f64,
    reconstruction: f64,
    potential_constant: f64,
    tau_constant: f64,
    /// operator norms over the whole space
    sup_potential_constant: f64,
    sup_tau_constant: f64,
}

pub fn hodge(cfg: &RunConfig, samples: usize) -> Result<Output> {
    let items = grid(cfg)?;
    let rows = par_map(&items, |(name, mesh, bc, p)| -> Result<Vec<HodgeRow>> {
        let s3 = build_sigma(mesh, 3, *bc)?;
        let h3 = harmonic_basis(&s3, &build_q_tol(mesh, 5, *bc, cfg.tol)?, cfg.tol)?;
        let s = build_sigma(mesh, *p, *bc)?;
        let q = build_q_tol(mesh, p + 2, *bc, cfg.tol)?;
        let op = HodgeOperator::new(&s, &q, &h3)?;
        let c = op.constants()?;
        let mut rng = rng_for(cfg.seed, &[*p as u64]);
        let mut out = Vec::new();
        for sample in 0..samples {
            let x = random_vec(&mut rng, s.dim());
            let parts = op.decompose(&x)?;
            out.push(HodgeRow {
                mesh: name.clone(),
                bc: *bc,
                p: *p,
                sample,
                phi3: parts.phi3,
                norm_sigma: parts.norm_sigma,
                norm_div_sigma: parts.norm_div_sigma,
                norm_phi3: parts.norm_phi3,
                norm_q_h2: parts.norm_q_h2,
                norm_tau: parts.norm_tau,
                reconstruction: parts.reconstruction,
                potential_constant: parts.potential_constant,
                tau_constant: parts.tau_constant,
                sup_potential_constant: c.potential,
                sup_tau_constant: c.tau,
            });
        }
        Ok(out)
    });
    let mut all = Vec::new();
    for r in rows {
        all.extend(r?);
    }
    let ok = all.iter().all(|r| r.reconstruction <= 1e-8);
    #[derive(Serialize)]
    struct Body {
        passed: bool,
        results: Vec<HodgeRow>,
    }
    Ok(Output {
        text: to_json(cfg, Body { passed: ok, results: all })?,
        ok,
    })
}

/// Displacement `u` of degree `d`, stress `C eps(u)` and load `div C eps(u)`.
pub(crate) fn manufactured(lame: Lame, d: usize, rng: &mut ChaCha8Rng) -> (PolyField, PolyField, PolyField) {
    let u = random_poly(rng, Shape::Vector2, d);
    let (u0, u1) = (u.comp(0), u.comp(1));
    let div = u0.dx().add(&u1.dy());
    let s00 = u0.dx().scale(2.0 * lame.mu).axpy(lame.lambda, &div);
    let s11 = u1.dy().scale(2.0 * lame.mu).axpy(lame.lambda, &div);
    let s01 = u0.dy().add(&u1.dx()).scale(lame.mu);
    let sigma = PolyField::from_components(Shape::SymMatrix2, &[s00, s01, s11]).expect("three components");
    let f = apply_diff(DiffOp::DivTensor, &sigma).expect("symmetric field");
    (u, sigma, f)
}

#[derive(Serialize)]
pub(crate) struct SolveRow {
    pub mesh: String,
    pub bc: BcMode,
    pub p: usize,
    pub mu: f64,
    pub lambda: f64,
    pub dim_sigma: usize,
    pub dim_v: usize,
    pub residual: f64,
    /// relative `H(div)` error of the stress
    pub sigma_error: f64,
    /// relative error of the displacement against the projection of the
    /// exact one
    pub u_error: f64,
}

pub(crate) fn solve_one(name: &str, mesh: &Mesh, bc: BcMode, p: usize, lame: Lame, seed: u64) -> Result<SolveRow> {
    let s = build_sigma(mesh, p, bc)?;
    let v = build_v(mesh, p - 1, bc)?;
    let mut rng = rng_for(seed, &[p as u64, lame.lambda.to_bits()]);
    let (u, st, f) = manufactured(lame, p + 1, &mut rng);
    let sol = solve_hellinger_reissner(&s, &v, lame, &FieldSource::Poly(f), Some(&FieldSource::Poly(u.clone())))?;
    let got = s.to_broken(&sol.sigma)?;
    let mut want = Vec::new();
    for k in 0..mesh.nt() {
        want.extend(l2_coefficients(mesh, k, p, &st));
    }
    let want = Vector::from(want);
    let d = broken_div(mesh, p, p - 1);
    let hdiv = |x: &Vector| (x.dot(x) + d.dot(x).dot(&d.dot(x))).sqrt();
    let sigma_error = hdiv(&(&got - &want)) / hdiv(&want).max(f64::MIN_POSITIVE);
    let pu = project_v(&v, &FieldSource::Poly(u))?;
    let uh = Vector::from(sol.u.clone());
    let u_error = linalg::vec_norm(&(&uh - &pu)) / linalg::vec_norm(&pu).max(f64::MIN_POSITIVE);
    Ok(SolveRow {
        mesh: name.to_string(),
        bc,
        p,
        mu: lame.mu,
        lambda: lame.lambda,
        dim_sigma: s.dim(),
        dim_v: v.dim(),
        residual: sol.residual,
        sigma_error,
        u_error,
    })
}

pub fn solve(cfg: &RunConfig, mu: f64, lambda: f64) -> Result<Output> {
    let items = grid(cfg)?;
    let lame = Lame { mu, lambda };
    let rows = par_map(&items, |(name, mesh, bc, p)| solve_one(name, mesh, *bc, *p, lame, cfg.seed));
    let results = rows.into_iter().collect::<Result<Vec<_>>>()?;
    #[derive(Serialize)]
    struct Body {
        results: Vec<SolveRow>,
    }
    Ok(Output {
        text: to_json(cfg, Body { results })?,
        ok: true,
    })
}

#[derive(Serialize)]
struct ComplexRow {
    mesh: String,
    bc: BcMode,
    p: usize,
    dim_sigma: usize,
    dim_q: usize,
    dim_v: usize,
    i_star: usize,
    p1_gamma: usize,
    euler_identity: bool,
    kernel_dim: usize,
    airy_rank: usize,
    cohomology_dim: usize,
    expected_cohomology_dim: usize,
    kernel_gap: f64,
    airy_gap: f64,
    passed: bool,
}

pub fn complex_check(cfg: &RunConfig) -> Result<Output> {
    let items = grid(cfg)?;
    let rows = par_map(&items, |(name, mesh, bc, p)| -> Result<ComplexRow> {
        let e = euler_dimension_check(mesh, *p, *bc)?;
        let s = build_sigma(mesh, *p, *bc)?;
        let q = build_q_tol(mesh, p + 2, *bc, cfg.tol)?;
        let c = cohomology_dim(&s, &q, cfg.tol)?;
        let expected = 3 * e.i_star;
        Ok(ComplexRow {
            mesh: name.clone(),
            bc: *bc,
            p: *p,
            dim_sigma: e.dim_sigma,
            dim_q: e.dim_q,
            dim_v: e.dim_v,
            i_star: e.i_star,
            p1_gamma: e.p1_gamma,
            euler_identity: e.holds,
            kernel_dim: c.kernel_dim,
            airy_rank: c.airy_rank,
            cohomology_dim: c.dim,
            expected_cohomology_dim: expected,
            kernel_gap: c.kernel_gap,
            airy_gap: c.airy_gap,
            passed: e.holds && c.dim == expected,
        })
    });
    let results = rows.into_iter().collect::<Result<Vec<_>>>()?;
    let ok = results.iter().all(|r| r.passed);
    #[derive(Serialize)]
    struct Body {
        passed: bool,
        results: Vec<ComplexRow>,
    }
    Ok(Output {
        text: to_json(cfg, Body { passed: ok, results })?,
        ok,
    })
}
