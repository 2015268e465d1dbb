//! C interface to `elastic-complex`.
//!
//! Meshes are opaque handles created by `ec_mesh_new` or `ec_mesh_refine`
//! and released with `ec_mesh_free`. Every other call returns an
//! `EcStatus`; when it is not `EC_STATUS_OK` the message of the failure is
//! kept per thread and can be copied out with `ec_last_error`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};

use elastic_complex::analysis::{cohomology_dim, harmonic_basis, infsup_constrained, HodgeOperator};
use elastic_complex::fespace::{build_q, build_sigma, euler_dimension_check};
use elastic_complex::mesh::{BcMode, Mesh, MeshKind};
use elastic_complex::Error;

/// Highest degree accepted by the calls below.
pub const EC_P_MAX: usize = 12;

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EcStatus {
    Ok = 0,
    NullPointer = 1,
    /// bad name, degree, file or mesh
    InvalidArgument = 2,
    Numerical = 3,
    /// a Rust panic was caught at the boundary
    Panic = 4,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EcBc {
    Displacement = 0,
    Traction = 1,
    /// the boundary tags stored in the mesh file
    FileTags = 2,
}

impl From<EcBc> for BcMode {
    fn from(b: EcBc) -> BcMode {
        match b {
            EcBc::Displacement => BcMode::FullDisplacement,
            EcBc::Traction => BcMode::FullTraction,
            EcBc::FileTags => BcMode::FileTags,
        }
    }
}

/// Opaque mesh handle.
pub struct EcMesh {
    inner: Mesh,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, Default)]
pub struct EcInfSup {
    pub beta: f64,
    pub nu: f64,
    pub residual: f64,
    pub dim_sigma: usize,
    pub dim_v: usize,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, Default)]
pub struct EcComplexReport {
    pub dim_sigma: usize,
    pub dim_q: usize,
    pub dim_v: usize,
    pub i_star: usize,
    pub p1_gamma: usize,
    pub cohomology_dim: usize,
    pub euler_identity: bool,
    pub kernel_gap: f64,
    pub airy_gap: f64,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, Default)]
pub struct EcHodgeConstants {
    /// bound of the harmonic and potential parts by the stress
    pub potential: f64,
    /// bound of the remaining part by the divergence
    pub tau: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

enum Fail {
    Null(&'static str),
    Arg(String),
    Lib(Error),
}

impl From<Error> for Fail {
    fn from(e: Error) -> Fail {
        Fail::Lib(e)
    }
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> EcStatus {
    let status = match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => EcStatus::Ok,
        Ok(Err(Fail::Null(what))) => {
            set_error(format!("{what} is null"));
            EcStatus::NullPointer
        }
        Ok(Err(Fail::Arg(msg))) => {
            set_error(msg);
            EcStatus::InvalidArgument
        }
        Ok(Err(Fail::Lib(e))) => {
            set_error(e.to_string());
            match e {
                Error::Dimension(_) | Error::Shape(_) | Error::Precondition(_) => EcStatus::InvalidArgument,
                e if e.is_config() => EcStatus::InvalidArgument,
                _ => EcStatus::Numerical,
            }
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            EcStatus::Panic
        }
    };
    if status == EcStatus::Ok {
        set_error(String::new());
    }
    status
}

unsafe fn mesh_ref<'a>(m: *const EcMesh) -> Result<&'a Mesh, Fail> {
    // SAFETY: the caller passes a handle from `ec_mesh_new` or null
    unsafe { m.as_ref() }.map(|m| &m.inner).ok_or(Fail::Null("mesh"))
}

fn check_degree(p: usize) -> Result<(), Fail> {
    if (3..=EC_P_MAX).contains(&p) {
        Ok(())
    } else {
        Err(Fail::Arg(format!("degree {p} outside 3..={EC_P_MAX}")))
    }
}

fn write_out<T>(out: *mut T, value: T) -> Result<(), Fail> {
    if out.is_null() {
        return Err(Fail::Null("out"));
    }
    // SAFETY: non-null and, per the contract of every caller, writable
    unsafe { out.write(value) };
    Ok(())
}

/// Builds a mesh from a built-in name (`unit_triangle`, `crisscross(n)`,
/// `square_annulus`) or a path to a `tri-mesh v1` file.
///
/// # Safety
/// `name` must be a NUL-terminated string and `out` a writable pointer.
/// The handle stored in `*out` must be released with `ec_mesh_free`.
#[no_mangle]
pub unsafe extern "C" fn ec_mesh_new(name: *const c_char, out: *mut *mut EcMesh) -> EcStatus {
    guard(|| {
        if name.is_null() {
            return Err(Fail::Null("name"));
        }
        // SAFETY: checked for null; NUL termination is the caller's promise
        let name = unsafe { CStr::from_ptr(name) }
            .to_str()
            .map_err(|_| Fail::Arg("mesh name is not UTF-8".into()))?;
        if out.is_null() {
            return Err(Fail::Null("out"));
        }
        let mesh = Mesh::build(&MeshKind::parse(name)?)?;
        write_out(out, Box::into_raw(Box::new(EcMesh { inner: mesh })))
    })
}

/// One uniform refinement of `mesh` as a new handle.
///
/// # Safety
/// `mesh` must be a live handle and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn ec_mesh_refine(mesh: *const EcMesh, out: *mut *mut EcMesh) -> EcStatus {
    guard(|| {
        let m = unsafe { mesh_ref(mesh) }?;
        if out.is_null() {
            return Err(Fail::Null("out"));
        }
        write_out(out, Box::into_raw(Box::new(EcMesh { inner: m.refine_uniform() })))
    })
}

/// Releases a handle; null is ignored.
///
/// # Safety
/// `mesh` must be null or a handle not freed before.
#[no_mangle]
pub unsafe extern "C" fn ec_mesh_free(mesh: *mut EcMesh) {
    if !mesh.is_null() {
        // SAFETY: created by Box::into_raw in this crate
        drop(unsafe { Box::from_raw(mesh) });
    }
}

/// Vertex, edge and cell counts.
///
/// # Safety
/// `mesh` must be a live handle; the three outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn ec_mesh_counts(
    mesh: *const EcMesh,
    nv: *mut usize,
    ne: *mut usize,
    nt: *mut usize,
) -> EcStatus {
    guard(|| {
        let m = unsafe { mesh_ref(mesh) }?;
        if nv.is_null() || ne.is_null() || nt.is_null() {
            return Err(Fail::Null("count output"));
        }
        write_out(nv, m.nv())?;
        write_out(ne, m.ne())?;
        write_out(nt, m.nt())
    })
}

/// Discrete inf-sup constant of the stress space of degree `p` (or its
/// Arnold-Winther subspace) against the displacements.
///
/// # Safety
/// `mesh` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ec_infsup(
    mesh: *const EcMesh,
    p: usize,
    bc: EcBc,
    arnold_winther: bool,
    out: *mut EcInfSup,
) -> EcStatus {
    guard(|| {
        let m = unsafe { mesh_ref(mesh) }?;
        check_degree(p)?;
        if out.is_null() {
            return Err(Fail::Null("out"));
        }
        let r = infsup_constrained(m, p, bc.into(), arnold_winther)?;
        write_out(
            out,
            EcInfSup {
                beta: r.beta,
                nu: r.nu,
                residual: r.residual,
                dim_sigma: r.dim_sigma,
                dim_v: r.dim_v,
            },
        )
    })
}

/// Space dimensions, the Euler-type identity and the cohomology dimension.
///
/// # Safety
/// `mesh` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ec_complex_check(
    mesh: *const EcMesh,
    p: usize,
    bc: EcBc,
    out: *mut EcComplexReport,
) -> EcStatus {
    guard(|| {
        let m = unsafe { mesh_ref(mesh) }?;
        check_degree(p)?;
        if out.is_null() {
            return Err(Fail::Null("out"));
        }
        let bc = bc.into();
        let e = euler_dimension_check(m, p, bc)?;
        let c = cohomology_dim(&build_sigma(m, p, bc)?, &build_q(m, p + 2, bc)?, None)?;
        write_out(
            out,
            EcComplexReport {
                dim_sigma: e.dim_sigma,
                dim_q: e.dim_q,
                dim_v: e.dim_v,
                i_star: e.i_star,
                p1_gamma: e.p1_gamma,
                cohomology_dim: c.dim,
                euler_identity: e.holds,
                kernel_gap: c.kernel_gap,
                airy_gap: c.airy_gap,
            },
        )
    })
}

/// Worst-case constants of the decomposition with degree-3 harmonic forms.
///
/// # Safety
/// `mesh` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ec_hodge_constants(
    mesh: *const EcMesh,
    p: usize,
    bc: EcBc,
    out: *mut EcHodgeConstants,
) -> EcStatus {
    guard(|| {
        let m = unsafe { mesh_ref(mesh) }?;
        check_degree(p)?;
        if out.is_null() {
            return Err(Fail::Null("out"));
        }
        let bc = bc.into();
        let h3 = harmonic_basis(&build_sigma(m, 3, bc)?, &build_q(m, 5, bc)?, None)?;
        let op = HodgeOperator::new(&build_sigma(m, p, bc)?, &build_q(m, p + 2, bc)?, &h3)?;
        let c = op.constants()?;
        write_out(
            out,
            EcHodgeConstants {
                potential: c.potential,
                tau: c.tau,
            },
        )
    })
}

/// Copies the message of the last failure on this thread into `buf` and
/// returns its length without the terminating NUL. Nothing is written when
/// `buf` is null or `len` is too small; call again with a larger buffer.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn ec_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let e = e.borrow();
        let bytes = e.as_bytes();
        if !buf.is_null() && len > bytes.len() {
            // SAFETY: `len` bytes are writable and bytes.len() + 1 <= len
            unsafe {
                std::ptr::copy_nonoverlapping(bytes.as_ptr(), buf.cast::<u8>(), bytes.len());
                *buf.add(bytes.len()) = 0;
            }
        }
        bytes.len()
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn ec_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}
