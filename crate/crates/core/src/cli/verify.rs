//! Verification suites behind `elastic-complex verify`.

use clap::ValueEnum;
use serde::Serialize;

use super::commands::{random_poly, random_vec, rng_for, solve_one};
use super::{par_map, to_json, CommonArgs, Output, RunConfig};
use crate::analysis::{
    broken_airy, broken_div, cohomology_dim, harmonic_basis, project_q, project_sigma, project_v,
    FieldSource, HodgeOperator, Lame,
};
use crate::error::Result;
use crate::fespace::{
    arnold_winther_variant, build_q_tol, build_sigma, build_v, euler_dimension_check, huzhang_combinatorial_check,
    DofKind, FESpace,
};
use crate::linalg::{self, Mat, Vector};
use crate::mesh::{BcMode, Mesh};
use crate::poly::{apply_diff, edge_trace, l2_inner, nmon, Cell, DiffOp, Frame, PolyField, Shape, TraceMode};
use crate::refpoincare::{rigid_motions, PoincareOps};

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Suite {
    Poincare,
    Spaces,
    Exactness,
    Projections,
    Hodge,
    Elasticity,
}

/// One measured quantity against its bound.
#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub bound: f64,
    pub relation: &'static str,
    pub passed: bool,
}

impl Check {
    fn le(name: String, value: f64, bound: f64) -> Check {
        Check { name, value, bound, relation: "<=", passed: value <= bound }
    }

    fn ge(name: String, value: f64, bound: f64) -> Check {
        Check { name, value, bound, relation: ">=", passed: value >= bound }
    }

    fn eq(name: String, value: usize, expected: usize) -> Check {
        Check {
            name,
            value: value as f64,
            bound: expected as f64,
            relation: "==",
            passed: value == expected,
        }
    }
}

const BUILTINS: &str = "unit_triangle,crisscross(1),square_annulus";

pub fn config(suite: Suite, args: &CommonArgs) -> Result<RunConfig> {
    let both = "displacement,traction";
    let (mesh, p, bc) = match suite {
        Suite::Poincare => ("unit_triangle", (0, 6), "displacement"),
        Suite::Spaces => (BUILTINS, (3, 6), both),
        Suite::Exactness => (BUILTINS, (3, 5), both),
        Suite::Projections => (BUILTINS, (3, 4), both),
        Suite::Hodge => ("square_annulus", (3, 6), "displacement"),
        Suite::Elasticity => ("crisscross(1)", (3, 4), "displacement"),
    };
    let name = format!("verify {}", suite.to_possible_value().expect("named").get_name());
    RunConfig::resolve(&name, args, mesh, p, bc)
}

pub fn run(suite: Suite, cfg: &RunConfig, samples: Option<usize>, aw: bool) -> Result<Output> {
    let checks = match suite {
        Suite::Poincare => poincare(cfg, samples.unwrap_or(50))?,
        Suite::Spaces => spaces(cfg)?,
        Suite::Exactness => exactness(cfg, aw)?,
        Suite::Projections => projections(cfg, samples.unwrap_or(10))?,
        Suite::Hodge => hodge(cfg, samples.unwrap_or(20))?,
        Suite::Elasticity => elasticity(cfg)?,
    };
    let passed = checks.iter().all(|c| c.passed);
    #[derive(Serialize)]
    struct Body {
        suite: Suite,
        passed: bool,
        checks: Vec<Check>,
    }
    Ok(Output {
        text: to_json(cfg, Body { suite, passed, checks })?,
        ok: passed,
    })
}

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

fn collect(rows: Vec<Result<Vec<Check>>>) -> Result<Vec<Check>> {
    let mut out = Vec::new();
    for r in rows {
        out.extend(r?);
    }
    Ok(out)
}

/// Symmetric fields of degree `p` on `cell` with vanishing normal trace, as
/// orthonormal columns of monomial coefficients.
pub(crate) fn zero_trace_basis(cell: &Cell, p: usize) -> Result<Mat> {
    let n = 3 * nmon(p);
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for k in 0..n {
        let mut e = PolyField::zeros(Shape::SymMatrix2, p, cell.frame);
        e.coeffs_mut()[k] = 1.0;
        let mut col = Vec::new();
        for i in 0..3 {
            col.extend(edge_trace(&e, cell, i, TraceMode::NormalComponent)?.coeffs);
        }
        rows.push(col);
    }
    let t = Mat::from_shape_fn((rows[0].len(), n), |(i, j)| rows[j][i]);
    Ok(linalg::null_space(t.view(), None)?.basis)
}

fn poincare(cfg: &RunConfig, samples: usize) -> Result<Vec<Check>> {
    let (lo, hi) = cfg.degrees;
    let ops = PoincareOps::new(hi.max(1))?;
    let cell = ops.reference_cell().clone();
    let rm = rigid_motions(&cell)?;
    let l2 = |f: &PolyField| -> Result<f64> { Ok(l2_inner(f, f, &cell)?.max(0.0).sqrt()) };
    let diff = |a: &PolyField, b: &PolyField| -> Result<f64> {
        let d = a.degree().max(b.degree());
        l2(&a.with_degree(d).sub(&b.with_degree(d)))
    };
    let [b1, b2, b3] = cell.bary_fields(Frame::IDENTITY);
    let bubble = b1.mul_scalar(&b2).mul_scalar(&b3);
    let bubble_sq = bubble.mul_scalar(&bubble);
    let mut checks = Vec::new();
    for p in lo..=hi {
        let mut rng = rng_for(cfg.seed, &[p as u64]);
        let zt = zero_trace_basis(&cell, p)?;
        // [div P2, trace of P2, P1 airy, homotopy, P1 degree, P2 degree]
        let mut worst = [0.0f64; 6];
        for _ in 0..samples {
            if p >= 1 {
                let mut u = random_poly(&mut rng, Shape::Vector2, p);
                for r in &rm {
                    let r = r.with_degree(p);
                    u = u.axpy(-l2_inner(&u, &r, &cell)?, &r);
                }
                let s = ops.p2(&u)?;
                let un = l2(&u)?;
                worst[0] = worst[0].max(diff(&apply_diff(DiffOp::DivTensor, &s)?, &u)? / un);
                for e in 0..3 {
                    let tr = edge_trace(&s, &cell, e, TraceMode::NormalComponent)?;
                    let m = tr.coeffs.iter().fold(0.0f64, |a, c| a.max(c.abs()));
                    worst[1] = worst[1].max(m / un);
                }
                worst[5] = worst[5].max(s.mass_above(p + 1) / s.coeff_norm().max(f64::MIN_POSITIVE));
            }
            if p >= 4 {
                let q = bubble_sq.mul_scalar(&random_poly(&mut rng, Shape::Scalar, p - 4));
                let sig = apply_diff(DiffOp::Airy, &q)?.with_degree(p);
                let q1 = ops.p1(&sig)?;
                worst[2] = worst[2].max(diff(&q1, &q)? / l2(&q)?);
                worst[4] = worst[4].max(q1.mass_above(p + 2) / q1.coeff_norm().max(f64::MIN_POSITIVE));
            }
            if zt.ncols() > 0 {
                let c = zt.dot(&Vector::from(random_vec(&mut rng, zt.ncols())));
                let sigma = PolyField::from_coeffs(Shape::SymMatrix2, p, Frame::IDENTITY, c.to_vec())?;
                let q1 = ops.p1(&sigma)?;
                let div = apply_diff(DiffOp::DivTensor, &sigma)?.with_degree(p - 1);
                let lhs = apply_diff(DiffOp::Airy, &q1)?;
                let w = ops.p2(&div)?;
                let d = lhs.degree().max(w.degree());
                let lhs = lhs.with_degree(d).add(&w.with_degree(d));
                worst[3] = worst[3].max(diff(&lhs, &sigma)? / l2(&sigma)?);
                let scale = q1.coeff_norm().max(sigma.coeff_norm());
                worst[4] = worst[4].max(q1.mass_above(p + 2) / scale);
            }
        }
        checks.push(Check::le(format!("p={p} div P2 u - u"), worst[0], 1e-9));
        checks.push(Check::le(format!("p={p} normal trace of P2 u"), worst[1], 1e-9));
        checks.push(Check::le(format!("p={p} P1 airy q - q"), worst[2], 1e-8));
        checks.push(Check::le(format!("p={p} airy P1 + P2 div - I"), worst[3], 1e-8));
        checks.push(Check::le(format!("p={p} P1 mass above p+2"), worst[4], 1e-10));
        checks.push(Check::le(format!("p={p} P2 mass above p+1"), worst[5], 1e-10));
    }
    Ok(checks)
}

fn spaces(cfg: &RunConfig) -> Result<Vec<Check>> {
    let t = Mesh::unit_triangle()?;
    let c = Mesh::crisscross(1)?;
    let mut checks = vec![
        Check::eq("dim Sigma^3 on unit_triangle".into(), build_sigma(&t, 3, BcMode::None)?.dim(), 30),
        Check::eq("dim Sigma^3 on crisscross(1)".into(), build_sigma(&c, 3, BcMode::None)?.dim(), 83),
    ];
    let interior = build_sigma(&t, 3, BcMode::None)?
        .dofs()
        .iter()
        .filter(|d| matches!(d, DofKind::Interior { .. }))
        .count();
    checks.push(Check::eq("interior stresses of degree 3".into(), interior, 9));
    checks.push(Check::eq(
        "zero-trace stresses of degree 3 (SVD)".into(),
        zero_trace_basis(&Cell::reference(), 3)?.ncols(),
        9,
    ));
    for (name, mesh) in cfg.mesh_levels()? {
        let ok = huzhang_combinatorial_check(&mesh).is_ok();
        checks.push(Check::eq(format!("{name} 2|E_I| + |E_B| = 3|T|"), ok as usize, 1));
    }
    let rows = par_map(&grid(cfg)?, |(name, mesh, bc, p)| -> Result<Vec<Check>> {
        let e = euler_dimension_check(mesh, *p, *bc)?;
        let lhs = e.dim_sigma + e.p1_gamma;
        let rhs = e.dim_q + e.dim_v + 3 * e.i_star;
        Ok(vec![Check::eq(
            format!("{name} {} p={p} dim identity (Sigma + P1 vs Q + V + 3|I*|)", bc.name()),
            lhs,
            rhs,
        )])
    });
    checks.extend(collect(rows)?);
    Ok(checks)
}

fn stress_space(mesh: &Mesh, p: usize, bc: BcMode, aw: bool) -> Result<FESpace> {
    let s = build_sigma(mesh, p, bc)?;
    if aw {
        arnold_winther_variant(&s)
    } else {
        Ok(s)
    }
}

fn exactness(cfg: &RunConfig, aw: bool) -> Result<Vec<Check>> {
    let rows = par_map(&grid(cfg)?, |(name, mesh, bc, p)| -> Result<Vec<Check>> {
        let s = stress_space(mesh, *p, *bc, aw)?;
        let q = build_q_tol(mesh, p + 2, *bc, cfg.tol)?;
        let r = cohomology_dim(&s, &q, cfg.tol)?;
        let tag = format!("{name} {} p={p}", bc.name());
        Ok(vec![
            Check::eq(format!("{tag} cohomology dimension"), r.dim, 3 * s.topology().i_star.len()),
            Check::ge(format!("{tag} kernel rank gap"), r.kernel_gap, 1e4),
            Check::ge(format!("{tag} airy rank gap"), r.airy_gap, 1e4),
        ])
    });
    collect(rows)
}

fn rel(a: &Vector, b: &Vector) -> f64 {
    linalg::vec_norm(&(a - b)) / linalg::vec_norm(b).max(f64::MIN_POSITIVE)
}

fn projections(cfg: &RunConfig, samples: usize) -> Result<Vec<Check>> {
    let rows = par_map(&grid(cfg)?, |(name, mesh, bc, p)| -> Result<Vec<Check>> {
        let (p, bc) = (*p, *bc);
        let s = build_sigma(mesh, p, bc)?;
        let q = build_q_tol(mesh, p + 2, bc, cfg.tol)?;
        let v = build_v(mesh, p - 1, bc)?;
        let fine = build_v(mesh, p + 1, BcMode::None)?;
        let aq = broken_airy(&q);
        let d = broken_div(mesh, p, p - 1);
        let mut rng = rng_for(cfg.seed, &[p as u64, mesh.nt() as u64]);
        let mut w = [0.0f64; 5];
        for _ in 0..samples {
            let qt = random_poly(&mut rng, Shape::Scalar, p + 2);
            let pq = project_q(&q, &FieldSource::Poly(qt.clone()))?;
            let ps = project_sigma(&s, &q, &v, &FieldSource::Poly(apply_diff(DiffOp::Airy, &qt)?))?;
            w[0] = w[0].max(rel(&s.to_broken(ps.as_slice().unwrap())?, &aq.dot(&pq)));

            let st = random_poly(&mut rng, Shape::SymMatrix2, p + 2);
            let ps = project_sigma(&s, &q, &v, &FieldSource::Poly(st.clone()))?;
            let pv = project_v(&v, &FieldSource::Poly(apply_diff(DiffOp::DivTensor, &st)?))?;
            let lhs = d.dot(&s.to_broken(ps.as_slice().unwrap())?);
            w[1] = w[1].max(rel(&lhs, &v.to_broken(pv.as_slice().unwrap())?));

            let again = project_sigma(&s, &q, &v, &FieldSource::Discrete { space: &s, coeffs: ps.as_slice().unwrap() })?;
            w[2] = w[2].max(rel(&again, &ps));
            let qq = project_q(&q, &FieldSource::Discrete { space: &q, coeffs: pq.as_slice().unwrap() })?;
            w[2] = w[2].max(rel(&aq.dot(&qq), &aq.dot(&pq)));
            let vv = project_v(&v, &FieldSource::Discrete { space: &v, coeffs: pv.as_slice().unwrap() })?;
            w[2] = w[2].max(rel(&vv, &pv));

            let x = random_vec(&mut rng, fine.dim());
            let px = project_v(&v, &FieldSource::Discrete { space: &fine, coeffs: &x })?;
            let xn = x.iter().map(|a| a * a).sum::<f64>().sqrt();
            w[3] = w[3].max(linalg::vec_norm(&px) / xn);
        }
        let tag = format!("{name} {} p={p}", bc.name());
        Ok(vec![
            Check::le(format!("{tag} Pi_Sigma airy - airy Pi_Q"), w[0], 1e-8),
            Check::le(format!("{tag} div Pi_Sigma - Pi_V div"), w[1], 1e-8),
            Check::le(format!("{tag} idempotence"), w[2], 1e-9),
            Check::le(format!("{tag} Pi_V Rayleigh quotient"), w[3], 1.0 + 1e-10),
        ])
    });
    collect(rows)
}

fn hodge(cfg: &RunConfig, samples: usize) -> Result<Vec<Check>> {
    let mut checks = Vec::new();
    for (name, mesh) in cfg.mesh_levels()? {
        for &bc in &cfg.bcs {
            let s3 = build_sigma(&mesh, 3, bc)?;
            let q5 = build_q_tol(&mesh, 5, bc, cfg.tol)?;
            let h3 = harmonic_basis(&s3, &q5, cfg.tol)?;
            let tag = format!("{name} {}", bc.name());
            let dres = linalg::max_abs(broken_div(&mesh, 3, 2).dot(&h3.broken).view());
            let ares = linalg::max_abs(broken_airy(&q5).t().dot(&h3.broken).view());
            checks.push(Check::le(format!("{tag} harmonic forms: divergence"), dres, 1e-9));
            checks.push(Check::le(format!("{tag} harmonic forms: airy orthogonality"), ares, 1e-9));
            let degrees = cfg.degree_list();
            let per_p = par_map(&degrees, |&p| -> Result<(f64, f64, f64)> {
                let s = build_sigma(&mesh, p, bc)?;
                let q = build_q_tol(&mesh, p + 2, bc, cfg.tol)?;
                let op = HodgeOperator::new(&s, &q, &h3)?;
                let mut rng = rng_for(cfg.seed, &[p as u64, mesh.nt() as u64]);
                let mut rec = 0.0f64;
                for _ in 0..samples {
                    let x = random_vec(&mut rng, s.dim());
                    let parts = op.decompose(&x)?;
                    rec = rec.max(parts.reconstruction);
                }
                let c = op.constants()?;
                Ok((rec, c.tau, c.potential))
            });
            let mut ct = Vec::new();
            let mut cp = Vec::new();
            for (p, r) in degrees.iter().zip(per_p) {
                let (rec, t, c) = r?;
                checks.push(Check::le(format!("{tag} p={p} reconstruction"), rec, 1e-8));
                checks.push(Check::le(format!("{tag} p={p} tau constant is finite"), t, f64::MAX));
                checks.push(Check::le(format!("{tag} p={p} potential constant is finite"), c, f64::MAX));
                ct.push(t);
                cp.push(c);
            }
            let spread = |v: &[f64]| {
                let hi = v.iter().cloned().fold(f64::MIN, f64::max);
                let lo = v.iter().cloned().fold(f64::MAX, f64::min);
                if lo > 0.0 { hi / lo } else { f64::INFINITY }
            };
            checks.push(Check::le(format!("{tag} spread of sup ||tau|| / ||div sigma|| over p"), spread(&ct), 4.0));
            checks.push(Check::le(
                format!("{tag} spread of sup (||phi||^2 + ||q||_2^2)^(1/2) / ||sigma|| over p"),
                spread(&cp),
                4.0,
            ));
        }
    }
    Ok(checks)
}

fn elasticity(cfg: &RunConfig) -> Result<Vec<Check>> {
    let mut items = Vec::new();
    for g in grid(cfg)? {
        for ratio in [1.0, 1e3, 1e6] {
            items.push((g.clone(), ratio));
        }
    }
    let rows = par_map(&items, |((name, mesh, bc, p), ratio)| -> Result<Vec<Check>> {
        let r = solve_one(name, mesh, *bc, *p, Lame { mu: 1.0, lambda: *ratio }, cfg.seed)?;
        let tag = format!("{name} {} p={p} lambda/mu={ratio:e}", bc.name());
        Ok(vec![
            Check::le(format!("{tag} solver residual"), r.residual, 1e-9),
            Check::le(format!("{tag} stress error"), r.sigma_error, 1e-8),
        ])
    });
    collect(rows)
}
