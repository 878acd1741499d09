//! C interface to `hamflow`.
//!
//! Systems are opaque handles created with `hf_system_new` and released with
//! `hf_system_free`. Every fallible call returns an `HfStatus`; on failure the
//! message is kept per thread and read back with `hf_last_error`.
//! Points are `double[4]`, matrices `double[16]` in row-major order.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use hamflow::flow::{integrate_tangent, IntegratorConfig, Method};
use hamflow::lyapunov::upper_exponent;
use hamflow::perturb::{build_bumps, certificate_report, Universal};
use hamflow::{catalog, Error, HamiltonianSystem, Mat4, Vec4};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HfStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    NotRegular = 3,
    Escaped = 4,
    IntegrationFailed = 5,
    TrivialSplitting = 6,
    CertificateViolated = 7,
    Failed = 8,
    Panicked = 9,
}

/// Opaque Hamiltonian system.
pub struct HfSystem {
    sys: HamiltonianSystem,
}

/// Certificate of the bump perturbation `H = y3 - alpha l l~ phi`.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct HfCertificate {
    pub c0: f64,
    pub c1: f64,
    pub c2: f64,
    pub c_u: f64,
    pub rotation_error: f64,
    pub flow_state_error: f64,
    /// Number of violated bounds; zero when the certificate holds.
    pub violations: u32,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn status_of(err: &Error) -> HfStatus {
    match err {
        Error::Parameter(_) | Error::Config(_) | Error::Validity(_) => HfStatus::InvalidArgument,
        Error::Regularity { .. } | Error::Transversality(_) => HfStatus::NotRegular,
        Error::Escape { .. } => HfStatus::Escaped,
        Error::Step { .. } | Error::EnergyDrift { .. } => HfStatus::IntegrationFailed,
        Error::TrivialSplitting { .. } => HfStatus::TrivialSplitting,
        Error::Certificate { .. } => HfStatus::CertificateViolated,
        _ => HfStatus::Failed,
    }
}

/// Runs `f`, converting errors and panics into a status and the last-error text.
fn guard(f: impl FnOnce() -> Result<(), HfStatus>) -> HfStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error(String::new());
            HfStatus::Ok
        }
        Ok(Err(s)) => s,
        Err(_) => {
            set_error("internal panic".into());
            HfStatus::Panicked
        }
    }
}

fn fail(err: Error) -> HfStatus {
    let s = status_of(&err);
    set_error(err.to_string());
    s
}

fn null(what: &str) -> HfStatus {
    set_error(format!("{what} is null"));
    HfStatus::NullPointer
}

unsafe fn point(y: *const f64) -> Result<Vec4, HfStatus> {
    if y.is_null() {
        return Err(null("point"));
    }
    Ok(Vec4::from_column_slice(std::slice::from_raw_parts(y, 4)))
}

unsafe fn system<'a>(s: *const HfSystem) -> Result<&'a HamiltonianSystem, HfStatus> {
    s.as_ref().map(|h| &h.sys).ok_or_else(|| null("system"))
}

fn integrator(dt: f64) -> IntegratorConfig {
    IntegratorConfig::default().with_dt(dt).with_method(Method::ImplicitMidpoint)
}

unsafe fn write_mat(m: &Mat4, out: *mut f64) {
    let out = std::slice::from_raw_parts_mut(out, 16);
    for i in 0..4 {
        for j in 0..4 {
            out[4 * i + j] = m[(i, j)];
        }
    }
}

/// Builds a system from a catalog id such as `"hyperbolic-drift"` or
/// `"quadratic(1,1,1,1)"`. On success `*out` owns a new handle.
///
/// # Safety
/// `id` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn hf_system_new(id: *const c_char, out: *mut *mut HfSystem) -> HfStatus {
    guard(|| {
        if id.is_null() {
            return Err(null("id"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let id = CStr::from_ptr(id).to_str().map_err(|_| {
            set_error("id is not UTF-8".into());
            HfStatus::InvalidArgument
        })?;
        let sys = catalog::system(id).map_err(fail)?;
        *out = Box::into_raw(Box::new(HfSystem { sys }));
        Ok(())
    })
}

/// Releases a handle from `hf_system_new`. Null is ignored.
///
/// # Safety
/// `sys` must come from `hf_system_new` and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn hf_system_free(sys: *mut HfSystem) {
    if !sys.is_null() {
        drop(Box::from_raw(sys));
    }
}

/// # Safety
/// `y` points to 4 doubles, `out` to one.
#[no_mangle]
pub unsafe extern "C" fn hf_energy(sys: *const HfSystem, y: *const f64, out: *mut f64) -> HfStatus {
    guard(|| {
        let s = system(sys)?;
        let y = point(y)?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = s.energy(&y).map_err(fail)?;
        Ok(())
    })
}

/// `X_H(y) = J grad H(y)`.
///
/// # Safety
/// `y` and `out` point to 4 doubles each.
#[no_mangle]
pub unsafe extern "C" fn hf_vector_field(sys: *const HfSystem, y: *const f64, out: *mut f64) -> HfStatus {
    guard(|| {
        let s = system(sys)?;
        let y = point(y)?;
        if out.is_null() {
            return Err(null("out"));
        }
        let x = s.vector_field(&y).map_err(fail)?;
        std::slice::from_raw_parts_mut(out, 4).copy_from_slice(x.as_slice());
        Ok(())
    })
}

/// Time-`t` map from `y0` with step `dt`: the endpoint in `y_out` and the
/// fundamental matrix in `f_out`. `f_out` may be null.
///
/// # Safety
/// `y0` and `y_out` point to 4 doubles, `f_out` to 16 or is null.
#[no_mangle]
pub unsafe extern "C" fn hf_integrate(
    sys: *const HfSystem,
    y0: *const f64,
    t: f64,
    dt: f64,
    y_out: *mut f64,
    f_out: *mut f64,
) -> HfStatus {
    guard(|| {
        let s = system(sys)?;
        let y0 = point(y0)?;
        if y_out.is_null() {
            return Err(null("y_out"));
        }
        let st = integrate_tangent(s, &y0, t, &integrator(dt)).map_err(fail)?;
        std::slice::from_raw_parts_mut(y_out, 4).copy_from_slice(st.y.as_slice());
        if !f_out.is_null() {
            write_mat(&st.f, f_out);
        }
        Ok(())
    })
}

/// Upper Lyapunov exponent of the transversal cocycle over `[0, t]`.
///
/// # Safety
/// `y0` points to 4 doubles, `out` to one.
#[no_mangle]
pub unsafe extern "C" fn hf_upper_exponent(sys: *const HfSystem, y0: *const f64, t: f64, dt: f64, out: *mut f64) -> HfStatus {
    guard(|| {
        let s = system(sys)?;
        let y0 = point(y0)?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = upper_exponent(s, &y0, t, &integrator(dt)).map_err(fail)?.lambda_plus;
        Ok(())
    })
}

/// Certificate of the bump perturbation with amplitude `alpha`, radius `r`
/// and inner fraction `nu`. Violated bounds are counted, not reported as errors.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn hf_certify_bump(
    alpha: f64,
    r: f64,
    nu: f64,
    epsilon: f64,
    grid: usize,
    out: *mut HfCertificate,
) -> HfStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let profile = build_bumps(r, nu, Universal::default()).and_then(|p| p.with_alpha(alpha)).map_err(fail)?;
        let c = certificate_report(&profile, epsilon, grid, &IntegratorConfig::default()).map_err(fail)?;
        *out = HfCertificate {
            c0: c.c0,
            c1: c.c1,
            c2: c.c2,
            c_u: c.c_u,
            rotation_error: c.rotation_error,
            flow_state_error: c.flow_state_error,
            violations: c.violations().len() as u32,
        };
        Ok(())
    })
}

/// Copies the calling thread's last error message into `buf` (NUL-terminated,
/// truncated to `len`). Returns the full message length without the NUL.
///
/// # Safety
/// `buf` points to `len` writable bytes or is null.
#[no_mangle]
pub unsafe extern "C" fn hf_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            ptr::copy_nonoverlapping(msg.as_ptr(), buf as *mut u8, n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}
