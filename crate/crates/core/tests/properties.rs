use elastic_complex::analysis::{
    assemble, harmonic_basis, hodge_decompose, infsup_beta, project_sigma, project_v, FieldSource,
};
use elastic_complex::fespace::{build_q, build_sigma, build_v, euler_dimension_check, quotient_by_rm, rm_coefficients};
use elastic_complex::linalg;
use elastic_complex::mesh::{BcMode, BcTag, Mesh};
use elastic_complex::poly::{apply_diff, integrate_bary, l2_inner, nmon, Cell, DiffOp, Frame, PolyField, Shape};
use elastic_complex::poly::quad::gauss_legendre;
use elastic_complex::refpoincare::{rigid_motions, PoincareOps};
use proptest::prelude::*;

fn config(cases: u32) -> ProptestConfig {
    ProptestConfig {
        failure_persistence: None,
        ..ProptestConfig::with_cases(cases)
    }
}

fn coeffs(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0f64..1.0, n)
}

fn ccw_triangle() -> impl Strategy<Value = [[f64; 2]; 3]> {
    prop::array::uniform3(prop::array::uniform2(-3.0f64..3.0)).prop_filter_map("degenerate", |mut v| {
        let a = (v[1][0] - v[0][0]) * (v[2][1] - v[0][1]) - (v[2][0] - v[0][0]) * (v[1][1] - v[0][1]);
        let d2 = (0..3)
            .map(|i| (v[i][0] - v[(i + 1) % 3][0]).powi(2) + (v[i][1] - v[(i + 1) % 3][1]).powi(2))
            .fold(0.0, f64::max);
        if a.abs() < 0.05 * d2 {
            return None;
        }
        if a < 0.0 {
            v.swap(1, 2);
        }
        Some(v)
    })
}

fn field_l2(f: &PolyField, cell: &Cell) -> f64 {
    l2_inner(f, f, cell).unwrap().max(0.0).sqrt()
}

proptest! {
    #![proptest_config(config(24))]

    #[test]
    fn coefficient_count_matches_shape(p in 0usize..8, extra in 1usize..4) {
        for shape in [Shape::Scalar, Shape::Vector2, Shape::Matrix2, Shape::SymMatrix2] {
            let n = shape.ncomp() * (p + 1) * (p + 2) / 2;
            prop_assert!(PolyField::from_coeffs(shape, p, Frame::IDENTITY, vec![0.0; n]).is_ok());
            prop_assert!(PolyField::from_coeffs(shape, p, Frame::IDENTITY, vec![0.0; n + extra]).is_err());
        }
        prop_assert_eq!(Shape::SymMatrix2.ncomp(), 3);
        prop_assert_eq!(Shape::Matrix2.ncomp(), 4);
    }

    #[test]
    fn cell_normals_are_unit_and_outward(v in ccw_triangle()) {
        let cell = Cell::new(v).unwrap();
        prop_assert!(cell.signed_area() > 0.0);
        let g = cell.centroid();
        for i in 0..3 {
            let (n, t) = (cell.normal(i), cell.tangent(i));
            prop_assert!((n[0].hypot(n[1]) - 1.0).abs() < 1e-12);
            prop_assert!((t[0].hypot(t[1]) - 1.0).abs() < 1e-12);
            let (a, _) = cell.edge(i);
            prop_assert!(n[0] * (a[0] - g[0]) + n[1] * (a[1] - g[1]) > 0.0);
        }
        let mut cw = v;
        cw.swap(1, 2);
        prop_assert!(Cell::new(cw).is_err());
    }

    #[test]
    fn bary_integrals_match_products(v in ccw_triangle(), a in 0usize..4, b in 0usize..4, c in 0usize..4) {
        let cell = Cell::new(v).unwrap();
        let [l1, l2, l3] = cell.bary_fields(cell.frame);
        let mut f = PolyField::constant(1.0, cell.frame);
        for _ in 0..a { f = f.mul_scalar(&l1); }
        for _ in 0..b { f = f.mul_scalar(&l2); }
        for _ in 0..c { f = f.mul_scalar(&l3); }
        let one = PolyField::constant(1.0, cell.frame);
        let direct = l2_inner(&f, &one, &cell).unwrap();
        let closed = integrate_bary(a, b, c, &cell);
        // the product expansion cancels; the integrand is bounded by 1, so scale by the area
        let area = integrate_bary(0, 0, 0, &cell);
        prop_assert!((direct - closed).abs() <= 1e-10 * area, "{} vs {}", direct, closed);
    }

    #[test]
    fn bary_integrals_match_gauss(v in ccw_triangle(), a in 0usize..9, b in 0usize..9, c in 0usize..9) {
        prop_assume!(a + b + c <= 16);
        let cell = Cell::new(v).unwrap();
        // collapsed 20-point Gauss rule: l1 = s, l2 = (1 - s) t, jacobian 1 - s
        let (z, w) = gauss_legendre(20);
        let mut q = 0.0;
        for (zi, wi) in z.iter().zip(&w) {
            let s = (zi + 1.0) / 2.0;
            for (zj, wj) in z.iter().zip(&w) {
                let t = (zj + 1.0) / 2.0;
                let (l1, l2) = (s, (1.0 - s) * t);
                let l3 = 1.0 - l1 - l2;
                q += wi * wj / 4.0 * (1.0 - s) * l1.powi(a as i32) * l2.powi(b as i32) * l3.powi(c as i32);
            }
        }
        q *= 2.0 * cell.area();
        let closed = integrate_bary(a, b, c, &cell);
        prop_assert!((q - closed).abs() <= 1e-12 * closed, "{} vs {}", q, closed);
    }

    #[test]
    fn p2_inverts_divergence_within_degree(p in 1usize..6, c in coeffs(2 * nmon(5))) {
        let ops = PoincareOps::new(6).unwrap();
        let cell = ops.reference_cell().clone();
        let mut u = PolyField::from_coeffs(Shape::Vector2, p, Frame::IDENTITY, c[..2 * nmon(p)].to_vec()).unwrap();
        for r in rigid_motions(&cell).unwrap() {
            let r = r.reframe(u.frame()).with_degree(p);
            u = u.axpy(-l2_inner(&u, &r, &cell).unwrap(), &r);
        }
        prop_assume!(field_l2(&u, &cell) > 1e-6);
        let s = ops.p2(&u).unwrap();
        prop_assert!(s.degree() <= p + 1);
        let d = apply_diff(DiffOp::DivTensor, &s).unwrap().with_degree(p).sub(&u);
        prop_assert!(field_l2(&d, &cell) <= 1e-9 * field_l2(&u, &cell));
    }

    #[test]
    fn p1_output_degree(p in 2usize..6, c in coeffs(3 * nmon(5))) {
        let ops = PoincareOps::new(6).unwrap();
        let sigma = PolyField::from_coeffs(Shape::SymMatrix2, p, Frame::IDENTITY, c[..3 * nmon(p)].to_vec()).unwrap();
        if let Ok(q) = ops.p1(&sigma) {
            prop_assert!(q.mass_above(p + 2) <= 1e-10 * q.coeff_norm().max(sigma.coeff_norm()));
        }
    }

    #[test]
    fn refinement_keeps_topology(levels in 0usize..3, kind in 0usize..3) {
        let mut m = match kind {
            0 => Mesh::unit_triangle().unwrap(),
            1 => Mesh::crisscross(1).unwrap(),
            _ => Mesh::square_annulus().unwrap(),
        };
        let holes = usize::from(kind == 2) as i64;
        for _ in 0..levels {
            m = m.refine_uniform();
        }
        prop_assert_eq!(m.nv() as i64 - m.ne() as i64 + m.nt() as i64, 1 - holes);
        for e in 0..m.ne() {
            let n = m.edge_cells(e).len();
            prop_assert_eq!(n, if m.is_boundary(e) { 1 } else { 2 });
        }
    }

    #[test]
    fn huzhang_dof_count(levels in 0usize..2, p in 3usize..6) {
        let mut m = Mesh::crisscross(1).unwrap();
        for _ in 0..levels {
            m = m.refine_uniform();
        }
        let want = 3 * m.nv() + 2 * (p - 1) * m.ne() + 3 * p * (p - 1) / 2 * m.nt();
        prop_assert_eq!(build_sigma(&m, p, BcMode::None).unwrap().dim(), want);
    }
}

proptest! {
    #![proptest_config(config(12))]

    #[test]
    fn reduced_index_set_on_random_tags(bits in prop::collection::vec(any::<bool>(), 16)) {
        let mut m = Mesh::square_annulus().unwrap();
        m.set_tags(|e, _| if bits[e % bits.len()] { BcTag::N } else { BcTag::D });
        let t = m.boundary_topology(BcMode::FileTags).unwrap();
        prop_assert_eq!(t.i_star.len(), t.i_set.len().saturating_sub(1));
        let e = euler_dimension_check(&m, 3, BcMode::FileTags).unwrap();
        prop_assert!(e.holds, "{:?}", e);
    }

    #[test]
    fn stress_traces_are_continuous(p in 3usize..5, c in coeffs(200), traction in any::<bool>()) {
        let mesh = Mesh::crisscross(1).unwrap();
        let bc = if traction { BcMode::FullTraction } else { BcMode::FullDisplacement };
        let s = build_sigma(&mesh, p, bc).unwrap();
        let x: Vec<f64> = (0..s.dim()).map(|i| c[i % c.len()]).collect();
        let fields: Vec<PolyField> = (0..mesh.nt()).map(|k| s.cell_field(k, &x).unwrap()).collect();
        let sn = |f: &PolyField, x: [f64; 2], n: [f64; 2]| {
            let m = f.eval(x);
            [m[0] * n[0] + m[1] * n[1], m[1] * n[0] + m[2] * n[1]]
        };
        for e in 0..mesh.ne() {
            let [a, b] = mesh.edges()[e];
            let (pa, pb) = (mesh.vertices()[a], mesh.vertices()[b]);
            let n = mesh.edge_normal(e);
            for k in 0..=6 {
                let t = k as f64 / 6.0;
                let x = [pa[0] + t * (pb[0] - pa[0]), pa[1] + t * (pb[1] - pa[1])];
                let cells = mesh.edge_cells(e);
                let v0 = sn(&fields[cells[0].0], x, n);
                if cells.len() == 2 {
                    let v1 = sn(&fields[cells[1].0], x, n);
                    prop_assert!((v0[0] - v1[0]).abs() < 1e-9 && (v0[1] - v1[1]).abs() < 1e-9);
                } else if traction {
                    prop_assert!(v0[0].abs() < 1e-9 && v0[1].abs() < 1e-9);
                }
            }
        }
        // full tensor continuity at vertices
        for (vi, adj) in mesh.vertex_cells().iter().enumerate() {
            let x = mesh.vertices()[vi];
            let first = fields[adj[0].0].eval(x);
            for &(k, _) in &adj[1..] {
                let other = fields[k].eval(x);
                for c in 0..3 {
                    prop_assert!((first[c] - other[c]).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn potentials_are_c1(c in coeffs(300)) {
        let mesh = Mesh::crisscross(1).unwrap();
        let q = build_q(&mesh, 5, BcMode::None).unwrap();
        let x: Vec<f64> = (0..q.dim()).map(|i| c[i % c.len()]).collect();
        let fields: Vec<PolyField> = (0..mesh.nt()).map(|k| q.cell_field(k, &x).unwrap()).collect();
        for e in mesh.interior_edges() {
            let [a, b] = mesh.edges()[e];
            let (pa, pb) = (mesh.vertices()[a], mesh.vertices()[b]);
            let cells = mesh.edge_cells(e);
            let (f0, f1) = (&fields[cells[0].0], &fields[cells[1].0]);
            for k in 0..=6 {
                let t = k as f64 / 6.0;
                let x = [pa[0] + t * (pb[0] - pa[0]), pa[1] + t * (pb[1] - pa[1])];
                prop_assert!((f0.eval(x)[0] - f1.eval(x)[0]).abs() < 1e-9);
                prop_assert!((f0.dx().eval(x)[0] - f1.dx().eval(x)[0]).abs() < 1e-9);
                prop_assert!((f0.dy().eval(x)[0] - f1.dy().eval(x)[0]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn saddle_blocks_and_beta(p in 3usize..6, traction in any::<bool>()) {
        let mesh = Mesh::unit_triangle().unwrap();
        let bc = if traction { BcMode::FullTraction } else { BcMode::FullDisplacement };
        let s = build_sigma(&mesh, p, bc).unwrap();
        let v = build_v(&mesh, p - 1, bc).unwrap();
        let sys = assemble(&s, &v).unwrap();
        for m in [&sys.a, &sys.c] {
            prop_assert!(linalg::max_abs((m - &m.t()).view()) < 1e-12 * linalg::max_abs(m.view()));
            prop_assert!(linalg::cholesky(m, "block").is_ok());
        }
        prop_assert_eq!(linalg::rank(sys.b.view(), None).unwrap().rank, v.dim());
        let r = infsup_beta(&sys).unwrap();
        prop_assert!((r.beta - r.nu.sqrt()).abs() < 1e-14);
        prop_assert!(r.beta > 0.0 && r.beta <= 1.0 + 1e-10);
        if quotient_by_rm(s.topology()) {
            let rm = rm_coefficients(&mesh, p - 1);
            let cols = v.dense_basis();
            prop_assert!(linalg::max_abs(rm.t().dot(&cols).view()) < 1e-10);
        }
    }

    #[test]
    fn projections_are_idempotent(p in 3usize..5, c in coeffs(400), seed in 0usize..7) {
        let mesh = Mesh::crisscross(1).unwrap();
        let bc = BcMode::FullDisplacement;
        let s = build_sigma(&mesh, p, bc).unwrap();
        let q = build_q(&mesh, p + 2, bc).unwrap();
        let v = build_v(&mesh, p - 1, bc).unwrap();
        let fine = build_sigma(&mesh, p + 1, BcMode::None).unwrap();
        let x: Vec<f64> = (0..fine.dim()).map(|i| c[(i + seed) % c.len()]).collect();
        let once = project_sigma(&s, &q, &v, &FieldSource::Discrete { space: &fine, coeffs: &x }).unwrap();
        let twice = project_sigma(&s, &q, &v, &FieldSource::Discrete { space: &s, coeffs: once.as_slice().unwrap() }).unwrap();
        prop_assert!(linalg::vec_norm(&(&once - &twice)) <= 1e-9 * linalg::vec_norm(&once).max(1.0));
        let vf = build_v(&mesh, p + 1, BcMode::None).unwrap();
        let y: Vec<f64> = (0..vf.dim()).map(|i| c[(3 * i + seed) % c.len()]).collect();
        let pv = project_v(&v, &FieldSource::Discrete { space: &vf, coeffs: &y }).unwrap();
        let pv2 = project_v(&v, &FieldSource::Discrete { space: &v, coeffs: pv.as_slice().unwrap() }).unwrap();
        prop_assert!(linalg::vec_norm(&(&pv - &pv2)) <= 1e-9 * linalg::vec_norm(&pv).max(1.0));
    }
}

proptest! {
    #![proptest_config(config(6))]

    #[test]
    fn hodge_parts_reconstruct(p in 3usize..5, c in coeffs(600)) {
        let mesh = Mesh::square_annulus().unwrap();
        let bc = BcMode::FullDisplacement;
        let s3 = build_sigma(&mesh, 3, bc).unwrap();
        let h3 = harmonic_basis(&s3, &build_q(&mesh, 5, bc).unwrap(), None).unwrap();
        let s = build_sigma(&mesh, p, bc).unwrap();
        let q = build_q(&mesh, p + 2, bc).unwrap();
        let x: Vec<f64> = (0..s.dim()).map(|i| c[i % c.len()]).collect();
        let parts = hodge_decompose(&s, &q, &h3, &x).unwrap();
        prop_assert!(parts.reconstruction <= 1e-8);
        prop_assert_eq!(parts.phi3.len(), 3);
    }
}
