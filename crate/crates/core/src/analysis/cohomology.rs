use serde::Serialize;

use super::{broken_airy, broken_div, flux_moment_rows, loop_sets, paired_degree, same_mesh};
use crate::error::{Error, Result};
use crate::fespace::{FESpace, Family};
use crate::linalg::{self, Mat};

#[derive(Clone, Debug, Serialize)]
pub struct CohomologyReport {
    /// `dim ker(div)` on the stress space
    pub kernel_dim: usize,
    /// rank of `airy` from the potential space
    pub airy_rank: usize,
    pub dim: usize,
    /// singular-value gaps of the two rank decisions
    pub kernel_gap: f64,
    pub airy_gap: f64,
}

/// Orthonormal broken coordinates of the divergence-free stresses and of
/// the image of `airy`, with the rank information of both.
struct Kernels {
    kernel: Mat,
    kernel_gap: f64,
    airy_range: Mat,
    airy_gap: f64,
}

fn check_pair(sigma: &FESpace, q: &FESpace) -> Result<()> {
    same_mesh(sigma, q)?;
    if !matches!(sigma.family(), Family::Sigma | Family::SigmaAw) || q.family() != Family::Q {
        return Err(Error::Shape("expected a stress space and a potential space".into()));
    }
    if q.degree() != sigma.degree() + 2 {
        return Err(Error::Dimension(format!(
            "potential degree {} does not match stress degree {}",
            q.degree(),
            sigma.degree()
        )));
    }
    Ok(())
}

fn kernels(sigma: &FESpace, q: &FESpace, tol: Option<f64>) -> Result<Kernels> {
    check_pair(sigma, q)?;
    let mesh = sigma.mesh();
    let (qs, info) = linalg::range_basis(sigma.dense_basis().view(), tol)?;
    if info.rank != sigma.dim() {
        return Err(Error::Numerical("stress basis is rank deficient".into()));
    }
    let d = broken_div(mesh, sigma.degree(), paired_degree(sigma));
    let ns = linalg::null_space(d.dot(&qs).view(), tol)?;
    let kernel = qs.dot(&ns.basis);
    let (airy_range, ainfo) = linalg::range_basis(broken_airy(q).view(), tol)?;
    Ok(Kernels {
        kernel,
        kernel_gap: ns.gap,
        airy_range,
        airy_gap: ainfo.gap,
    })
}

/// `dim ker(div) - rank(airy)` with a shared relative rank tolerance.
pub fn cohomology_dim(sigma: &FESpace, q: &FESpace, tol: Option<f64>) -> Result<CohomologyReport> {
    let k = kernels(sigma, q, tol)?;
    let (kernel_dim, airy_rank) = (k.kernel.ncols(), k.airy_range.ncols());
    if airy_rank > kernel_dim {
        return Err(Error::Numerical(format!(
            "airy image ({airy_rank}) larger than the divergence kernel ({kernel_dim})"
        )));
    }
    Ok(CohomologyReport {
        kernel_dim,
        airy_rank,
        dim: kernel_dim - airy_rank,
        kernel_gap: k.kernel_gap,
        airy_gap: k.airy_gap,
    })
}

/// Discrete harmonic stresses.
#[derive(Clone, Debug)]
pub struct HarmonicBasis {
    pub degree: usize,
    /// `L^2`-orthonormal columns in broken coordinates
    pub broken: Mat,
    /// the same columns as coefficients of the stress space
    pub coeffs: Mat,
    /// `<phi n, r_l>` over each loop in the reduced index set, three rows
    /// per loop
    pub moments: Mat,
}

/// Divergence-free stresses orthogonal to the image of `airy`. On
/// divergence-free fields the `H(div)` and `L^2` products agree, so this is
/// the `L^2` complement of the Airy image inside the kernel.
pub fn harmonic_basis(sigma: &FESpace, q: &FESpace, tol: Option<f64>) -> Result<HarmonicBasis> {
    let k = kernels(sigma, q, tol)?;
    let a = &k.airy_range;
    // cosines of the angles between the two subspaces are 1 or 0
    let cos = a.t().dot(&k.kernel);
    let broken = k.kernel.dot(&linalg::null_space(cos.view(), Some(1e-6))?.basis);
    let expected = k.kernel.ncols().saturating_sub(a.ncols());
    if broken.ncols() != expected {
        return Err(Error::Numerical(format!(
            "harmonic space has {} columns, expected {expected}",
            broken.ncols()
        )));
    }
    let coeffs = linalg::solve_least_squares(sigma.dense_basis().view(), broken.view())?.x;
    let rows = flux_moment_rows(sigma.mesh(), sigma.degree(), &loop_sets(sigma, &sigma.topology().i_star));
    Ok(HarmonicBasis {
        degree: sigma.degree(),
        moments: rows.dot(&broken),
        broken,
        coeffs,
    })
}
