//! Poincare-type operators on the reference triangle and the
//! polynomial-preserving right inverses built from them.
//!
//! Conventions: `curl q = (q_y, -q_x)` (row-wise on vectors),
//! `v^perp = (-v2, v1)`, `airy q = [[q_yy, -q_xy], [-q_xy, q_xx]]`.
//! With these, `C_div` carries a plus sign and `S1 = 2 sskw`, which is what
//! makes `div C_div = I`, `curl C_curl + C_div div = I` and
//! `div S0 + S1 curl = 0` hold simultaneously.

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};
use crate::linalg::{self, Mat};
use crate::poly::quad::gauss_legendre;
use crate::poly::{
    apply_diff, l2_inner, mon_exps, mon_index, nmon, sym_to_full, Cell, DiffOp, Frame, PolyField,
    Shape,
};

fn factorial(n: usize) -> f64 {
    (1..=n).fold(1.0, |a, k| a * k as f64)
}

fn binom(n: usize, k: usize) -> f64 {
    factorial(n) / (factorial(k) * factorial(n - k))
}

/// `int_0^1 t^m (1-t)^n dt`
fn beta_int(m: usize, n: usize) -> f64 {
    factorial(m) * factorial(n) / factorial(m + n + 1)
}

/// A linear map between polynomial spaces, as a matrix on monomial
/// coefficients.
#[derive(Clone, Debug)]
pub struct OperatorMatrix {
    pub in_shape: Shape,
    pub in_degree: usize,
    pub out_shape: Shape,
    pub out_degree: usize,
    pub matrix: Mat,
}

/// Tabulates `op` on the monomial basis of `in_shape` fields of degree
/// `in_degree`; outputs are padded or truncated to `out_degree`.
pub fn operator_matrix<F>(
    op: F,
    in_shape: Shape,
    in_degree: usize,
    out_shape: Shape,
    out_degree: usize,
) -> Result<OperatorMatrix>
where
    F: Fn(&PolyField) -> Result<PolyField>,
{
    let n_in = in_shape.ncomp() * nmon(in_degree);
    let n_out = out_shape.ncomp() * nmon(out_degree);
    let mut m = Array2::zeros((n_out, n_in));
    for k in 0..n_in {
        let mut e = PolyField::zeros(in_shape, in_degree, Frame::IDENTITY);
        e.coeffs_mut()[k] = 1.0;
        let y = op(&e)?;
        if y.shape() != out_shape {
            return Err(Error::Shape(format!("operator produced {:?}", y.shape())));
        }
        let y = y.with_degree(out_degree);
        for (i, v) in y.coeffs().iter().enumerate() {
            m[[i, k]] = *v;
        }
    }
    Ok(OperatorMatrix {
        in_shape,
        in_degree,
        out_shape,
        out_degree,
        matrix: m,
    })
}

/// Result of inverting the divergence on a physical cell.
#[derive(Clone, Debug)]
pub struct CellInversion {
    /// symmetric field in the cell frame with `div sigma = u` and zero
    /// normal trace
    pub sigma: PolyField,
    /// `h^-1 ||sigma|| + |sigma|_1`
    pub diagnostic: f64,
    /// `diagnostic / ||u||`
    pub constant: f64,
}

/// Cached data for the reference-cell operators up to a maximal degree.
pub struct PoincareOps {
    p_max: usize,
    cell: Cell,
    /// `int theta y1^k y2^l`, indexed by `mon_index(k, l)`
    theta_mom: Vec<f64>,
    /// orthonormal rigid motions on the reference cell
    rm: Vec<PolyField>,
    /// pseudo-inverse of the boundary-trace fit, per input degree
    lift_pinv: Vec<Mat>,
    /// pseudo-inverse of `r -> airy(b^2 r)`, per input degree
    airy_pinv: Vec<Mat>,
    bubble_sq: PolyField,
}

impl PoincareOps {
    /// Prepares operators for inputs of degree up to `p_max`.
    pub fn new(p_max: usize) -> Result<PoincareOps> {
        let cell = Cell::reference();
        let frame = Frame::IDENTITY;
        let [l1, l2, l3] = cell.bary_fields(frame);
        let bubble = l1.mul_scalar(&l2).mul_scalar(&l3);
        let theta = bubble.scale(60.0 / cell.area());
        let mdeg = p_max + 8;
        let mom = cell.monomial_moments(frame, mdeg + 3);
        let theta_mom = mon_exps(mdeg)
            .iter()
            .map(|&(k, l)| {
                mon_exps(3)
                    .iter()
                    .map(|&(i, j)| theta.coeff(0, i, j) * mom[mon_index(i + k, j + l)])
                    .sum()
            })
            .collect();
        let rm = rigid_motions(&cell)?;
        let bubble_sq = bubble.mul_scalar(&bubble);
        let mut ops = PoincareOps {
            p_max,
            cell,
            theta_mom,
            rm,
            lift_pinv: Vec::new(),
            airy_pinv: Vec::new(),
            bubble_sq,
        };
        // divergence right inverse lifts tensors of degree up to p_max + 1
        for m in 0..=(p_max + 1) {
            let a = ops.lift_matrix(m);
            ops.lift_pinv.push(linalg::pinv(a.view(), Some(1e-12))?);
        }
        for m in 0..=p_max {
            let a = ops.airy_bubble_matrix(m)?;
            ops.airy_pinv.push(linalg::pinv(a.view(), Some(1e-12))?);
        }
        Ok(ops)
    }

    pub fn p_max(&self) -> usize {
        self.p_max
    }

    pub fn reference_cell(&self) -> &Cell {
        &self.cell
    }

    fn check_ref(&self, f: &PolyField, what: &str) -> Result<()> {
        if f.frame() != Frame::IDENTITY {
            return Err(Error::Shape(format!("{what} must be given in reference coordinates")));
        }
        if f.degree() > self.p_max + 2 {
            return Err(Error::Dimension(format!(
                "{what} has degree {} beyond the prepared range",
                f.degree()
            )));
        }
        Ok(())
    }

    fn mu(&self, k: usize, l: usize) -> f64 {
        self.theta_mom[mon_index(k, l)]
    }

    /// `W_c[g](x) = int theta(y) (x - y)_c int_0^1 t^k g(y + t(x - y)) dt dy`
    fn kernel(&self, g: &PolyField, k: usize) -> [PolyField; 2] {
        let p = g.degree();
        let frame = Frame::IDENTITY;
        let mut out = [
            PolyField::zeros(Shape::Scalar, p + 1, frame),
            PolyField::zeros(Shape::Scalar, p + 1, frame),
        ];
        for &(a, b) in &mon_exps(p) {
            let gab = g.coeff(0, a, b);
            if gab == 0.0 {
                continue;
            }
            for i in 0..=a {
                for j in 0..=b {
                    let w = gab * binom(a, i) * binom(b, j) * beta_int(i + j + k, a + b - i - j);
                    let (ya, yb) = (a - i, b - j);
                    for (c, o) in out.iter_mut().enumerate() {
                        let (di, dj) = if c == 0 { (1, 0) } else { (0, 1) };
                        let cf = o.coeffs_mut();
                        cf[mon_index(i + di, j + dj)] += w * self.mu(ya, yb);
                        cf[mon_index(i, j)] -= w * self.mu(ya + di, yb + dj);
                    }
                }
            }
        }
        out
    }

    /// Poincare operator for `curl`: vector field to scalar potential.
    pub fn c_curl(&self, v: &PolyField) -> Result<PolyField> {
        self.check_ref(v, "c_curl input")?;
        if v.shape() != Shape::Vector2 {
            return Err(Error::Shape(format!("c_curl of {:?}", v.shape())));
        }
        // (x - y) . v^perp with v^perp = (-v2, v1)
        let w0 = self.kernel(&v.comp(1), 0);
        let w1 = self.kernel(&v.comp(0), 0);
        Ok(w1[1].sub(&w0[0]))
    }

    /// Poincare operator for `div`: scalar to vector field, `div C_div = I`.
    pub fn c_div(&self, q: &PolyField) -> Result<PolyField> {
        self.check_ref(q, "c_div input")?;
        if q.shape() != Shape::Scalar {
            return Err(Error::Shape(format!("c_div of {:?}", q.shape())));
        }
        let [a, b] = self.kernel(q, 1);
        PolyField::from_components(Shape::Vector2, &[a, b])
    }

    /// `C_div` applied to each component of a vector field; row `r` of the
    /// result is `C_div(u_r)`.
    pub fn c_div_rows(&self, u: &PolyField) -> Result<PolyField> {
        if u.shape() != Shape::Vector2 {
            return Err(Error::Shape(format!("row-wise c_div of {:?}", u.shape())));
        }
        let r0 = self.c_div(&u.comp(0))?;
        let r1 = self.c_div(&u.comp(1))?;
        PolyField::from_components(Shape::Matrix2, &[r0.comp(0), r0.comp(1), r1.comp(0), r1.comp(1)])
    }

    /// Divergence right inverse into symmetric fields, raising degree by one.
    pub fn bgg_ldiv(&self, u: &PolyField) -> Result<PolyField> {
        let m = self.c_div_rows(u)?;
        let w = self.c_div(&s1(&m)?)?;
        let cw = apply_diff(DiffOp::CurlScalar, &w)?;
        apply_diff(DiffOp::Sym, &cw.add(&m))
    }

    fn rm_part(&self, u: &PolyField) -> Result<PolyField> {
        let d = u.degree().max(1);
        let ud = u.with_degree(d);
        let mut out = PolyField::zeros(Shape::Vector2, d, Frame::IDENTITY);
        for r in &self.rm {
            let c = l2_inner(&ud, &r.with_degree(d), &self.cell)?;
            out = out.axpy(c, &r.with_degree(d));
        }
        Ok(out)
    }

    /// Potential `q` of degree `deg(tau) + 2` with `(airy q) n = tau n` on the
    /// boundary, for `tau` whose normal trace has no rigid-motion moments.
    pub fn lift_ln(&self, tau: &PolyField) -> Result<PolyField> {
        self.check_ref(tau, "lift input")?;
        if tau.shape() != Shape::SymMatrix2 {
            return Err(Error::Shape(format!("lift of {:?}", tau.shape())));
        }
        let m = tau.degree();
        if m > self.p_max + 1 {
            return Err(Error::Dimension(format!("lift degree {m} beyond prepared range")));
        }
        let rhs = self.lift_rhs(tau);
        let q = self.lift_pinv[m].dot(&rhs);
        let fit = self.lift_matrix(m).dot(&q);
        let res = (&fit - &rhs).mapv(|v| v * v).sum().sqrt();
        let scale = rhs.mapv(|v| v * v).sum().sqrt();
        if res > 1e-8 * scale.max(1e-300) && res > 1e-14 {
            return Err(Error::Precondition(format!(
                "normal trace does not close up (lift residual {:.2e})",
                res / scale
            )));
        }
        PolyField::from_coeffs(Shape::Scalar, m + 2, Frame::IDENTITY, q.to_vec())
    }

    fn boundary_path(&self) -> Vec<([f64; 2], [f64; 2], [f64; 2])> {
        let v = self.cell.vertices;
        (0..3)
            .map(|k| {
                let (a, b) = (v[k], v[(k + 1) % 3]);
                let len = ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt();
                let t = [(b[0] - a[0]) / len, (b[1] - a[1]) / len];
                (a, t, [t[1], -t[0]])
            })
            .collect()
    }

    fn sample_params(m: usize) -> Vec<f64> {
        let (x, _) = gauss_legendre(m + 5);
        x.iter().map(|t| 0.5 * (t + 1.0)).collect()
    }

    /// Rows: value and normal derivative of the monomials of degree `m + 2`
    /// at the sample points of the three edges.
    fn lift_matrix(&self, m: usize) -> Mat {
        let d = m + 2;
        let exps = mon_exps(d);
        let params = Self::sample_params(m);
        let path = self.boundary_path();
        let rows = 2 * 3 * params.len();
        let mut a = Array2::zeros((rows, exps.len()));
        let mut r = 0;
        for &(p0, t, n) in &path {
            for &s in &params {
                let x = [p0[0] + s * t[0], p0[1] + s * t[1]];
                for (k, &(i, j)) in exps.iter().enumerate() {
                    let v = x[0].powi(i as i32) * x[1].powi(j as i32);
                    let dx = if i > 0 { i as f64 * x[0].powi(i as i32 - 1) * x[1].powi(j as i32) } else { 0.0 };
                    let dy = if j > 0 { j as f64 * x[0].powi(i as i32) * x[1].powi(j as i32 - 1) } else { 0.0 };
                    a[[r, k]] = v;
                    a[[r + 1, k]] = dx * n[0] + dy * n[1];
                }
                r += 2;
            }
        }
        a
    }

    /// Boundary data `(f, g)` sampled like [`Self::lift_matrix`]: `v` is the
    /// running integral of `tau n` from the first vertex, `f` the running
    /// integral of `v . n` and `g = -v . t`.
    fn lift_rhs(&self, tau: &PolyField) -> Array1<f64> {
        let m = tau.degree();
        let params = Self::sample_params(m);
        let path = self.boundary_path();
        let mut out = Array1::zeros(2 * 3 * params.len());
        let (mut v_start, mut f_start) = ([0.0, 0.0], 0.0);
        let mut r = 0;
        for &(p0, t, n) in &path {
            let series = tau.restrict_to_line(p0, t);
            // tau n as power series in arclength
            let tn: Vec<Vec<f64>> = vec![
                (0..=m).map(|k| series[0][k] * n[0] + series[1][k] * n[1]).collect(),
                (0..=m).map(|k| series[1][k] * n[0] + series[2][k] * n[1]).collect(),
            ];
            // v(s) = v_start + int_0^s tau n
            let v: Vec<Vec<f64>> = (0..2)
                .map(|c| {
                    let mut s = vec![v_start[c]];
                    s.extend((0..=m).map(|k| tn[c][k] / (k + 1) as f64));
                    s
                })
                .collect();
            // v . n, then f(s) = f_start + int_0^s v . n
            let vn: Vec<f64> = (0..=m + 1).map(|k| v[0][k] * n[0] + v[1][k] * n[1]).collect();
            let mut f = vec![f_start];
            f.extend((0..=m + 1).map(|k| vn[k] / (k + 1) as f64));
            let vt: Vec<f64> = (0..=m + 1).map(|k| v[0][k] * t[0] + v[1][k] * t[1]).collect();
            let ev = |c: &[f64], s: f64| c.iter().rev().fold(0.0, |acc, a| acc * s + a);
            for &s in &params {
                out[r] = ev(&f, s);
                out[r + 1] = -ev(&vt, s);
                r += 2;
            }
            v_start = [ev(&v[0], 1.0), ev(&v[1], 1.0)];
            f_start = ev(&f, 1.0);
        }
        out
    }

    /// Polynomial-preserving right inverse of `div` into symmetric fields
    /// with vanishing normal trace; raises degree by one.
    pub fn p2(&self, u: &PolyField) -> Result<PolyField> {
        self.check_ref(u, "p2 input")?;
        if u.shape() != Shape::Vector2 {
            return Err(Error::Shape(format!("p2 of {:?}", u.shape())));
        }
        let rm = self.rm_part(u)?;
        let un = self.l2_norm(u)?;
        let rn = self.l2_norm(&rm)?;
        if rn > 1e-8 * un && rn > 1e-14 {
            return Err(Error::Precondition(format!(
                "input is not orthogonal to rigid motions (relative component {:.2e})",
                rn / un
            )));
        }
        self.p2_unchecked(&u.sub(&rm.with_degree(u.degree())).with_degree(u.degree()))
    }

    fn p2_unchecked(&self, u: &PolyField) -> Result<PolyField> {
        let tau = self.bgg_ldiv(u)?;
        let q = self.lift_ln(&tau)?;
        let out = tau.sub(&apply_diff(DiffOp::Airy, &q)?);
        Ok(out.with_degree(u.degree() + 1))
    }

    fn l2_norm(&self, f: &PolyField) -> Result<f64> {
        Ok(l2_inner(f, f, &self.cell)?.max(0.0).sqrt())
    }

    /// Columns: coefficients of `airy(b^2 x^a)` for `|a| <= m - 3`, in the
    /// symmetric monomial basis of degree `m + 1`.
    fn airy_bubble_matrix(&self, m: usize) -> Result<Mat> {
        let out_deg = m + 1;
        let ncols = if m >= 3 { nmon(m - 3) } else { 0 };
        let nrows = 3 * nmon(out_deg);
        let mut a = Array2::zeros((nrows, ncols));
        if ncols > 0 {
            for (k, &(i, j)) in mon_exps(m - 3).iter().enumerate() {
                let q = self.bubble_sq.mul_scalar(&PolyField::monomial(i, j, Frame::IDENTITY));
                let s = apply_diff(DiffOp::Airy, &q)?.with_degree(out_deg);
                for (r, v) in s.coeffs().iter().enumerate() {
                    a[[r, k]] = *v;
                }
            }
        }
        Ok(a)
    }

    /// The clamped potential `q` (vanishing with its gradient on the
    /// boundary) with `airy q = sigma`. The search space allows one degree
    /// more than needed, so any mass above `deg(sigma) + 2` in the result is
    /// a direct measure of failed polynomial preservation.
    pub fn airy_inverse(&self, sigma: &PolyField) -> Result<PolyField> {
        self.check_ref(sigma, "airy_inverse input")?;
        if sigma.shape() != Shape::SymMatrix2 {
            return Err(Error::Shape(format!("airy_inverse of {:?}", sigma.shape())));
        }
        let m = sigma.degree();
        if m > self.p_max {
            return Err(Error::Dimension(format!("airy_inverse degree {m} beyond prepared range")));
        }
        let rhs = Array1::from(sigma.with_degree(m + 1).coeffs().to_vec());
        let r = self.airy_pinv[m].dot(&rhs);
        let q = if m >= 3 {
            let rp = PolyField::from_coeffs(Shape::Scalar, m - 3, Frame::IDENTITY, r.to_vec())?;
            self.bubble_sq.mul_scalar(&rp)
        } else {
            PolyField::zeros(Shape::Scalar, m + 3, Frame::IDENTITY)
        };
        let back = apply_diff(DiffOp::Airy, &q)?;
        let err = self.l2_norm(&back.sub(&sigma.with_degree(back.degree())))?;
        let sn = self.l2_norm(sigma)?;
        if err > 1e-8 * sn && err > 1e-14 {
            return Err(Error::Precondition(format!(
                "field is not the Airy image of a clamped potential (relative residual {:.2e})",
                err / sn
            )));
        }
        Ok(q.with_degree(m + 3))
    }

    /// Left inverse of `airy` on clamped potentials, with
    /// `airy P1 + P2 div = I` on fields with vanishing normal trace.
    pub fn p1(&self, sigma: &PolyField) -> Result<PolyField> {
        self.check_ref(sigma, "p1 input")?;
        if sigma.shape() != Shape::SymMatrix2 {
            return Err(Error::Shape(format!("p1 of {:?}", sigma.shape())));
        }
        let p = sigma.degree();
        let d = apply_diff(DiffOp::DivTensor, sigma)?;
        let corrected = if p == 0 {
            sigma.clone()
        } else {
            let d = d.with_degree(p - 1);
            let rm = self.rm_part(&d)?.with_degree(p - 1);
            let w = self.p2_unchecked(&d.sub(&rm))?;
            sigma.sub(&w.with_degree(p))
        };
        self.airy_inverse(&corrected)
    }

    /// Symmetric `sigma` on `cell` with `div sigma = u` and vanishing normal
    /// trace, obtained from the reference operator through
    /// `sigma = J sigma_hat J^T` and `u_hat = J^{-1} u`.
    pub fn invert_div_cell(&self, u: &PolyField, cell: &Cell) -> Result<CellInversion> {
        if u.shape() != Shape::Vector2 {
            return Err(Error::Shape(format!("invert_div_cell of {:?}", u.shape())));
        }
        let (j, b) = cell.reference_map();
        let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
        let jinv = [[j[1][1] / det, -j[0][1] / det], [-j[1][0] / det, j[0][0] / det]];
        let fr = u.frame();
        let s = fr.scale;
        let a = [[j[0][0] / s, j[0][1] / s], [j[1][0] / s, j[1][1] / s]];
        let off = [(b[0] - fr.origin[0]) / s, (b[1] - fr.origin[1]) / s];
        let uref = u.substitute(a, off, Frame::IDENTITY);
        let (u0, u1) = (uref.comp(0), uref.comp(1));
        let uhat = PolyField::from_components(
            Shape::Vector2,
            &[
                u0.scale(jinv[0][0]).add(&u1.scale(jinv[0][1])),
                u0.scale(jinv[1][0]).add(&u1.scale(jinv[1][1])),
            ],
        )?;
        let shat = sym_to_full(&self.p2(&uhat)?)?;
        // J S J^T, component by component
        let sc: Vec<PolyField> = shat.components();
        let entry = |r: usize, c: usize| -> PolyField {
            let mut acc = PolyField::zeros(Shape::Scalar, shat.degree(), Frame::IDENTITY);
            for k in 0..2 {
                for l in 0..2 {
                    acc = acc.axpy(j[r][k] * j[c][l], &sc[2 * k + l]);
                }
            }
            acc
        };
        let sref = PolyField::from_components(Shape::SymMatrix2, &[entry(0, 0), entry(0, 1), entry(1, 1)])?;
        // back to the cell frame: xhat = J^{-1}(o + s_K xi - b)
        let cf = cell.frame;
        let ai = [
            [cf.scale * jinv[0][0], cf.scale * jinv[0][1]],
            [cf.scale * jinv[1][0], cf.scale * jinv[1][1]],
        ];
        let d = [cf.origin[0] - b[0], cf.origin[1] - b[1]];
        let bi = [
            jinv[0][0] * d[0] + jinv[0][1] * d[1],
            jinv[1][0] * d[0] + jinv[1][1] * d[1],
        ];
        let sigma = sref.substitute(ai, bi, cf);
        let h = cell.diameter();
        let l2 = |f: &PolyField| -> Result<f64> { Ok(l2_inner(f, f, cell)?.max(0.0).sqrt()) };
        let semi = (l2_inner(&sigma.dx(), &sigma.dx(), cell)? + l2_inner(&sigma.dy(), &sigma.dy(), cell)?)
            .max(0.0)
            .sqrt();
        let diagnostic = l2(&sigma)? / h + semi;
        let un = l2(&u.reframe(cf))?;
        Ok(CellInversion {
            sigma,
            diagnostic,
            constant: if un > 0.0 { diagnostic / un } else { 0.0 },
        })
    }
}

/// `S1 = 2 sskw`, matrix to scalar.
pub fn s1(m: &PolyField) -> Result<PolyField> {
    Ok(apply_diff(DiffOp::Sskw, m)?.scale(2.0))
}

/// `T1 = mskw / 2`, the pseudo-inverse of `S1`.
pub fn t1(u: &PolyField) -> Result<PolyField> {
    Ok(apply_diff(DiffOp::Mskw, u)?.scale(0.5))
}

/// `L^2`-orthonormal basis of the rigid motions `(1,0), (0,1), (-y, x)`.
pub fn rigid_motions(cell: &Cell) -> Result<Vec<PolyField>> {
    let f = cell.frame;
    let one = PolyField::affine(1.0, 0.0, 0.0, f);
    let zero = PolyField::affine(0.0, 0.0, 0.0, f);
    let raw = [
        PolyField::from_components(Shape::Vector2, &[one.clone(), zero.clone()])?,
        PolyField::from_components(Shape::Vector2, &[zero.clone(), one.clone()])?,
        PolyField::from_components(
            Shape::Vector2,
            &[PolyField::affine(0.0, 0.0, -1.0, f), PolyField::affine(0.0, 1.0, 0.0, f)],
        )?,
    ];
    let mut out: Vec<PolyField> = Vec::new();
    for r in raw.iter() {
        let mut v = r.clone();
        for _ in 0..2 {
            for q in &out {
                let c = l2_inner(&v, q, cell)?;
                v = v.axpy(-c, q);
            }
        }
        let n = l2_inner(&v, &v, cell)?.sqrt();
        out.push(v.scale(1.0 / n));
    }
    Ok(out)
}
