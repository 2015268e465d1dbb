use serde::Serialize;

use super::{build_q, build_sigma, build_v, p1_gamma_dim};
use crate::error::{Error, Result};
use crate::mesh::{BcMode, Mesh};

/// Measured dimensions for the identity
/// `dim Sigma = dim Q + dim V + 3 |I*| - dim P1_Gamma`.
#[derive(Clone, Debug, Serialize)]
pub struct EulerReport {
    pub p: usize,
    pub dim_sigma: usize,
    pub dim_q: usize,
    pub dim_v: usize,
    pub i_star: usize,
    pub p1_gamma: usize,
    pub holds: bool,
}

impl EulerReport {
    pub fn check(&self) -> Result<()> {
        if self.holds {
            Ok(())
        } else {
            Err(Error::Numerical(format!(
                "dimension identity fails at p = {}: {} != {} + {} + 3*{} - {}",
                self.p, self.dim_sigma, self.dim_q, self.dim_v, self.i_star, self.p1_gamma
            )))
        }
    }
}

pub fn euler_dimension_check(mesh: &Mesh, p: usize, bc: BcMode) -> Result<EulerReport> {
    let s = build_sigma(mesh, p, bc)?;
    let q = build_q(mesh, p + 2, bc)?;
    let v = build_v(mesh, p - 1, bc)?;
    let topo = s.topology();
    let (i_star, p1) = (topo.i_star.len(), p1_gamma_dim(topo));
    let holds = s.dim() + p1 == q.dim() + v.dim() + 3 * i_star;
    Ok(EulerReport {
        p,
        dim_sigma: s.dim(),
        dim_q: q.dim(),
        dim_v: v.dim(),
        i_star,
        p1_gamma: p1,
        holds,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct CombinatorialReport {
    pub interior_edges: usize,
    pub boundary_edges: usize,
    pub cells: usize,
}

/// Checks `2 |E_I| + |E_B| = 3 |T|`.
pub fn huzhang_combinatorial_check(mesh: &Mesh) -> Result<CombinatorialReport> {
    let r = CombinatorialReport {
        interior_edges: mesh.interior_edges().len(),
        boundary_edges: mesh.boundary_edges().len(),
        cells: mesh.nt(),
    };
    if 2 * r.interior_edges + r.boundary_edges != 3 * r.cells {
        return Err(Error::Topology(format!(
            "edge count identity fails: 2*{} + {} != 3*{}",
            r.interior_edges, r.boundary_edges, r.cells
        )));
    }
    Ok(r)
}
