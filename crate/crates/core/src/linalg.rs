//! Dense linear algebra on top of LAPACK: null spaces, minimum-norm least
//! squares and the smallest eigenpair of a symmetric-definite pencil.

use ndarray::{s, Array1, Array2, ArrayView2, Axis};
use ndarray_linalg::{Cholesky, Diag, Eigh, EigValsh, JobSvd, SolveTriangular, SVDDC, UPLO};

use crate::error::{Error, Result};

pub type Mat = Array2<f64>;
pub type Vector = Array1<f64>;

/// Default relative rank tolerance.
pub const RANK_TOL: f64 = 1e-10;
/// Allowed relative asymmetry before a matrix is rejected as non-symmetric.
pub const SYM_TOL: f64 = 1e-12;
/// Above this size the smallest eigenpair is found by inverse Lanczos
/// on a Cholesky factor instead of a full dense decomposition.
pub const DENSE_EIG_LIMIT: usize = 700;

pub fn check_finite(m: ArrayView2<f64>, what: &'static str) -> Result<()> {
    if m.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what))
    }
}

pub fn max_abs(m: ArrayView2<f64>) -> f64 {
    m.iter().fold(0.0f64, |a, v| a.max(v.abs()))
}

fn check_symmetric(m: ArrayView2<f64>) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(Error::Dimension(format!(
            "expected square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    let scale = max_abs(m).max(1.0);
    let mut worst = 0.0f64;
    for i in 0..m.nrows() {
        for j in 0..i {
            worst = worst.max((m[[i, j]] - m[[j, i]]).abs());
        }
    }
    if worst > SYM_TOL * scale {
        return Err(Error::Asymmetric(worst / scale));
    }
    Ok(())
}

/// `(M + M^T) / 2`
pub fn symmetrize(m: &Mat) -> Mat {
    let t = m.t();
    (m + &t) * 0.5
}

/// Singular values (descending) and the full right factor `V^T`.
fn svd_right(m: ArrayView2<f64>) -> Result<(Vector, Mat)> {
    let (r, c) = m.dim();
    if r == 0 || c == 0 {
        return Ok((Array1::zeros(0), Array2::eye(c)));
    }
    let (_, sv, vt) = m.to_owned().svddc(JobSvd::All)?;
    Ok((sv, vt.expect("requested V^T")))
}

#[derive(Debug, Clone)]
pub struct RankInfo {
    pub rank: usize,
    pub singular_values: Vec<f64>,
    /// Ratio between the last retained and the first dropped singular value
    /// (infinite when nothing is dropped or nothing is retained).
    pub gap: f64,
}

fn rank_from(sv: &[f64], tol: f64) -> RankInfo {
    let smax = sv.first().copied().unwrap_or(0.0);
    let rank = if smax == 0.0 {
        0
    } else {
        sv.iter().take_while(|&&s| s > tol * smax).count()
    };
    let gap = if rank == 0 || rank == sv.len() {
        f64::INFINITY
    } else {
        sv[rank - 1] / sv[rank].max(f64::MIN_POSITIVE)
    };
    RankInfo {
        rank,
        singular_values: sv.to_vec(),
        gap,
    }
}

pub fn rank(m: ArrayView2<f64>, tol: Option<f64>) -> Result<RankInfo> {
    check_finite(m, "matrix")?;
    let (r, c) = m.dim();
    if r == 0 || c == 0 {
        return Ok(rank_from(&[], 0.0));
    }
    let (_, sv, _) = m.to_owned().svddc(JobSvd::None)?;
    Ok(rank_from(sv.as_slice().unwrap(), tol.unwrap_or(RANK_TOL)))
}

#[derive(Debug, Clone)]
pub struct NullSpace {
    /// Orthonormal columns spanning the kernel.
    pub basis: Mat,
    pub rank: usize,
    pub gap: f64,
    pub singular_values: Vec<f64>,
}

/// Orthonormal basis of `ker M`, with rank decided relative to the largest
/// singular value.
pub fn null_space(m: ArrayView2<f64>, tol: Option<f64>) -> Result<NullSpace> {
    check_finite(m, "matrix")?;
    let c = m.ncols();
    let (sv, vt) = svd_right(m)?;
    let info = rank_from(sv.as_slice().unwrap(), tol.unwrap_or(RANK_TOL));
    let basis = vt.slice(s![info.rank.., ..]).t().to_owned();
    debug_assert_eq!(basis.ncols(), c - info.rank);
    Ok(NullSpace {
        basis,
        rank: info.rank,
        gap: info.gap,
        singular_values: info.singular_values,
    })
}

/// Orthonormal basis of the column space.
pub fn range_basis(m: ArrayView2<f64>, tol: Option<f64>) -> Result<(Mat, RankInfo)> {
    check_finite(m, "matrix")?;
    let (r, c) = m.dim();
    if r == 0 || c == 0 {
        return Ok((Array2::zeros((r, 0)), rank_from(&[], 0.0)));
    }
    let (u, sv, _) = m.to_owned().svddc(JobSvd::Some)?;
    let info = rank_from(sv.as_slice().unwrap(), tol.unwrap_or(RANK_TOL));
    let u = u.expect("requested U");
    Ok((u.slice(s![.., ..info.rank]).to_owned(), info))
}

/// Moore-Penrose pseudo-inverse with a relative cutoff.
pub fn pinv(m: ArrayView2<f64>, tol: Option<f64>) -> Result<Mat> {
    check_finite(m, "matrix")?;
    let (r, c) = m.dim();
    if r == 0 || c == 0 {
        return Ok(Array2::zeros((c, r)));
    }
    let (u, sv, vt) = m.to_owned().svddc(JobSvd::Some)?;
    let (u, vt) = (u.unwrap(), vt.unwrap());
    let info = rank_from(sv.as_slice().unwrap(), tol.unwrap_or(RANK_TOL));
    let k = info.rank;
    let mut vs = vt.slice(s![..k, ..]).t().to_owned();
    for j in 0..k {
        vs.column_mut(j).mapv_inplace(|v| v / sv[j]);
    }
    Ok(vs.dot(&u.slice(s![.., ..k]).t()))
}

#[derive(Debug, Clone)]
pub struct LeastSquares {
    pub x: Mat,
    /// `||M x - b|| / ||b||` (absolute when `b = 0`).
    pub residual: f64,
    pub rank: usize,
}

/// Minimum-norm least-squares solution of `M x = b` for every column of `b`.
pub fn solve_least_squares(m: ArrayView2<f64>, b: ArrayView2<f64>) -> Result<LeastSquares> {
    solve_least_squares_tol(m, b, None)
}

pub fn solve_least_squares_tol(
    m: ArrayView2<f64>,
    b: ArrayView2<f64>,
    tol: Option<f64>,
) -> Result<LeastSquares> {
    check_finite(m, "matrix")?;
    check_finite(b, "right-hand side")?;
    if m.nrows() != b.nrows() {
        return Err(Error::Dimension(format!(
            "least squares: {} rows vs {} rhs rows",
            m.nrows(),
            b.nrows()
        )));
    }
    let (r, c) = m.dim();
    if r == 0 || c == 0 {
        return Ok(LeastSquares {
            x: Array2::zeros((c, b.ncols())),
            residual: if b.iter().any(|v| *v != 0.0) { 1.0 } else { 0.0 },
            rank: 0,
        });
    }
    let (u, sv, vt) = m.to_owned().svddc(JobSvd::Some)?;
    let (u, vt) = (u.unwrap(), vt.unwrap());
    let info = rank_from(sv.as_slice().unwrap(), tol.unwrap_or(RANK_TOL));
    let k = info.rank;
    let mut utb = u.slice(s![.., ..k]).t().dot(&b);
    for i in 0..k {
        utb.row_mut(i).mapv_inplace(|v| v / sv[i]);
    }
    let x = vt.slice(s![..k, ..]).t().dot(&utb);
    let res = &m.dot(&x) - &b;
    let bn = fro(b);
    let rn = fro(res.view());
    Ok(LeastSquares {
        x,
        residual: if bn > 0.0 { rn / bn } else { rn },
        rank: k,
    })
}

pub fn fro(m: ArrayView2<f64>) -> f64 {
    m.iter().map(|v| v * v).sum::<f64>().sqrt()
}

pub fn norm1(m: ArrayView2<f64>) -> f64 {
    m.axis_iter(Axis(1))
        .map(|c| c.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Lower Cholesky factor; `what` names the matrix in the error.
pub fn cholesky(m: &Mat, what: &'static str) -> Result<Mat> {
    check_finite(m.view(), what)?;
    m.cholesky(UPLO::Lower)
        .map_err(|_| Error::NotPositiveDefinite(what))
}

/// Solves `L X = B` with `L` lower triangular.
pub fn solve_lower(l: &Mat, b: &Mat) -> Result<Mat> {
    Ok(l.solve_triangular(UPLO::Lower, Diag::NonUnit, b)?)
}

/// Solves `L^T X = B` with `L` lower triangular.
pub fn solve_lower_t(l: &Mat, b: &Mat) -> Result<Mat> {
    let u = l.t().as_standard_layout().to_owned();
    Ok(u.solve_triangular(UPLO::Upper, Diag::NonUnit, b)?)
}

fn solve_lower_vec(l: &Mat, b: &Vector) -> Result<Vector> {
    Ok(l.solve_triangular(UPLO::Lower, Diag::NonUnit, b)?)
}

fn solve_upper_vec(u: &Mat, b: &Vector) -> Result<Vector> {
    Ok(u.solve_triangular(UPLO::Upper, Diag::NonUnit, b)?)
}

#[derive(Debug, Clone)]
pub struct GenEig {
    pub value: f64,
    pub vector: Vector,
    /// `||M x - v C x|| / ((||M||_1 + |v| ||C||_1) ||x||)`
    pub residual: f64,
}

/// Smallest eigenpair of the symmetric pencil `M x = v C x` with `C`
/// positive definite.
pub fn smallest_gen_eig(m: &Mat, c: &Mat) -> Result<GenEig> {
    check_finite(m.view(), "M")?;
    check_finite(c.view(), "C")?;
    check_symmetric(m.view())?;
    check_symmetric(c.view())?;
    if m.dim() != c.dim() {
        return Err(Error::Dimension(format!(
            "pencil sizes {:?} and {:?}",
            m.dim(),
            c.dim()
        )));
    }
    let n = m.nrows();
    if n == 0 {
        return Err(Error::Dimension("empty pencil".into()));
    }
    let ms = symmetrize(m);
    let identity = {
        let mut d = c.clone();
        for i in 0..n {
            d[[i, i]] -= 1.0;
        }
        max_abs(d.view()) <= 1e-13
    };
    let (value, vector) = if identity {
        smallest_sym_eig(&ms)?
    } else {
        let l = cholesky(c, "C")?;
        let half = solve_lower(&l, &ms)?;
        let red = symmetrize(&solve_lower(&l, &half.t().to_owned())?);
        let (v, y) = smallest_sym_eig(&red)?;
        let x = solve_lower_t(&l, &y.insert_axis(Axis(1)).to_owned())?;
        (v, x.column(0).to_owned())
    };
    let r = ms.dot(&vector) - c.dot(&vector) * value;
    let denom = (norm1(ms.view()) + value.abs() * norm1(c.view())) * vec_norm(&vector);
    Ok(GenEig {
        value,
        residual: vec_norm(&r) / denom.max(f64::MIN_POSITIVE),
        vector,
    })
}

/// Largest `lambda` with `B x = lambda A x`, for symmetric `B` and
/// positive definite `A`.
pub fn largest_gen_eigenvalue(b: &Mat, a: &Mat) -> Result<f64> {
    if a.nrows() == 0 {
        return Ok(0.0);
    }
    let l = cholesky(a, "A")?;
    let y = solve_lower(&l, b)?;
    let x = symmetrize(&solve_lower(&l, &y.t().to_owned())?);
    let vals = x.eigvalsh(UPLO::Lower)?;
    Ok(vals[vals.len() - 1])
}

pub fn vec_norm(v: &Vector) -> f64 {
    v.dot(v).sqrt()
}

/// Smallest eigenpair of a symmetric matrix.
pub fn smallest_sym_eig(m: &Mat) -> Result<(f64, Vector)> {
    let n = m.nrows();
    if n > DENSE_EIG_LIMIT {
        if let Ok(l) = m.cholesky(UPLO::Lower) {
            if let Some(pair) = inverse_lanczos(m, &l)? {
                return Ok(pair);
            }
        }
    }
    let (vals, vecs) = m.eigh(UPLO::Lower)?;
    Ok((vals[0], vecs.column(0).to_owned()))
}

/// Lanczos with full reorthogonalisation applied to `M^{-1}`, using the
/// Cholesky factor `L` of `M`. Returns `None` if it fails to converge.
fn inverse_lanczos(m: &Mat, l: &Mat) -> Result<Option<(f64, Vector)>> {
    let n = m.nrows();
    let lt = l.t().as_standard_layout().to_owned();
    let apply = |v: &Vector| -> Result<Vector> { solve_upper_vec(&lt, &solve_lower_vec(l, v)?) };
    let max_steps = n.min(400);
    let mut q: Vec<Vector> = Vec::new();
    let mut alpha: Vec<f64> = Vec::new();
    let mut beta: Vec<f64> = Vec::new();
    let mut v = Array1::from_shape_fn(n, |i| 1.0 + 0.5 * ((i as f64) * 0.7548776662).sin());
    v /= vec_norm(&v);
    for k in 0..max_steps {
        let mut w = apply(&v)?;
        let a = v.dot(&w);
        q.push(v.clone());
        alpha.push(a);
        for _ in 0..2 {
            for qi in &q {
                let proj = qi.dot(&w);
                w.scaled_add(-proj, qi);
            }
        }
        let b = vec_norm(&w);
        let check = k + 1 == max_steps || b <= 1e-14 * a.abs() || (k + 1) % 5 == 0;
        if check {
            let kk = alpha.len();
            let mut t = Array2::<f64>::zeros((kk, kk));
            for i in 0..kk {
                t[[i, i]] = alpha[i];
                if i + 1 < kk {
                    t[[i, i + 1]] = beta[i];
                    t[[i + 1, i]] = beta[i];
                }
            }
            let (tv, ts) = t.eigh(UPLO::Lower)?;
            let theta = tv[kk - 1];
            let s_last = ts[[kk - 1, kk - 1]];
            if b * s_last.abs() <= 1e-13 * theta.abs() || b <= 1e-14 * a.abs() {
                let mut y = Array1::<f64>::zeros(n);
                for i in 0..kk {
                    y.scaled_add(ts[[i, kk - 1]], &q[i]);
                }
                y /= vec_norm(&y);
                let value = y.dot(&m.dot(&y));
                return Ok(Some((value, y)));
            }
        }
        if b == 0.0 {
            break;
        }
        beta.push(b);
        v = w / b;
    }
    Ok(None)
}

/// Householder vectors `v_j` with `H_{k-1} ... H_0 r = [R; 0]`.
fn reflectors(r: &Mat) -> Result<Vec<Vector>> {
    let (n, k) = r.dim();
    if k > n {
        return Err(Error::Dimension("complement of an over-full set".into()));
    }
    let mut a = r.clone();
    let mut vs: Vec<Vector> = Vec::with_capacity(k);
    for j in 0..k {
        let mut v = Array1::<f64>::zeros(n);
        for i in j..n {
            v[i] = a[[i, j]];
        }
        let alpha = vec_norm(&v);
        if alpha == 0.0 {
            return Err(Error::Numerical("rank-deficient set in complement".into()));
        }
        let sign = if v[j] >= 0.0 { 1.0 } else { -1.0 };
        v[j] += sign * alpha;
        let vn = vec_norm(&v);
        v /= vn;
        for c in j..k {
            let d: f64 = (j..n).map(|i| v[i] * a[[i, c]]).sum();
            for i in j..n {
                a[[i, c]] -= 2.0 * d * v[i];
            }
        }
        vs.push(v);
    }
    Ok(vs)
}

/// Orthonormal basis of the orthogonal complement of the column space of
/// `r` (full column rank assumed), via Householder reflections.
pub fn orthonormal_complement(r: &Mat) -> Result<Mat> {
    let (n, k) = r.dim();
    let vs = reflectors(r)?;
    // Q = H_0 H_1 ... H_{k-1}; the trailing n - k columns span the complement.
    let mut out = Array2::<f64>::zeros((n, n - k));
    for c in 0..(n - k) {
        out[[k + c, c]] = 1.0;
    }
    for v in vs.iter().rev() {
        let d = v.dot(&out);
        for i in 0..n {
            if v[i] != 0.0 {
                let vi = v[i];
                let mut row = out.row_mut(i);
                row.scaled_add(-2.0 * vi, &d);
            }
        }
    }
    Ok(out)
}

/// `Q^T M Q` for the complement basis `Q` of [`orthonormal_complement`],
/// computed by applying the reflections from both sides.
pub fn complement_congruence(m: &Mat, r: &Mat) -> Result<Mat> {
    let (n, k) = r.dim();
    if m.dim() != (n, n) {
        return Err(Error::Dimension("congruence of a mismatched matrix".into()));
    }
    let mut a = m.clone();
    for v in reflectors(r)? {
        let w = a.dot(&v);
        let vw = v.dot(&w);
        for i in 0..n {
            for j in 0..n {
                a[[i, j]] += -2.0 * v[i] * w[j] - 2.0 * w[i] * v[j] + 4.0 * vw * v[i] * v[j];
            }
        }
    }
    Ok(a.slice(s![k.., k..]).to_owned())
}
