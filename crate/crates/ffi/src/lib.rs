//! C ABI for qplab.
//!
//! Conventions:
//! - Every function returns a [`QplStatus`]; results come back through out
//!   pointers, which are written only on success.
//! - Operators and rotors are opaque handles created by `*_new`/`*_from_*`
//!   and released with the matching `*_free`. Freeing NULL is a no-op.
//! - On failure, [`qpl_last_error`] returns a message for the calling thread.
//! - Panics never cross the boundary; they surface as [`QplStatus::Panic`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use qplab::cocycle::lyapunov_theta_avg;
use qplab::kickedrotor::{floquet_step, FloquetOperator, KickedRotorSpec, RotorState};
use qplab::model::OperatorSpec;
use qplab::spectra::{build_finite, duality_check, eigvals, BoundaryCondition};
use qplab::Error;

/// Result codes shared by every entry point.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum QplStatus {
    Ok = 0,
    /// A required pointer argument was NULL.
    NullPointer = 1,
    /// A string argument was not valid UTF-8.
    InvalidUtf8 = 2,
    /// Malformed or out-of-domain input (bad JSON, invalid parameters,
    /// refused or unsupported requests).
    Config = 3,
    /// A numerical routine failed.
    Numerical = 4,
    /// The problem exceeds a size limit.
    Size = 5,
    /// The output buffer is too small; the required length was written.
    BufferTooSmall = 6,
    /// Internal panic; the handle involved should be freed.
    Panic = 7,
}

/// Boundary conditions for finite sections.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum QplBoundary {
    Dirichlet = 0,
    Periodic = 1,
    Antiperiodic = 2,
}

impl From<QplBoundary> for BoundaryCondition {
    fn from(b: QplBoundary) -> Self {
        match b {
            QplBoundary::Dirichlet => BoundaryCondition::Dirichlet,
            QplBoundary::Periodic => BoundaryCondition::Periodic,
            QplBoundary::Antiperiodic => BoundaryCondition::Antiperiodic,
        }
    }
}

/// Opaque operator handle.
pub struct QplOperator {
    spec: OperatorSpec,
}

/// Opaque kicked-rotor handle: a Floquet operator and its current state.
pub struct QplRotor {
    op: FloquetOperator,
    state: RotorState,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).expect("NULs removed"));
}

struct Failure(QplStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match e {
            Error::Numerical(_) | Error::Io { .. } => QplStatus::Numerical,
            Error::Size { .. } => QplStatus::Size,
            _ => QplStatus::Config,
        };
        Failure(status, e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(QplStatus::NullPointer, format!("{what} is NULL"))
}

/// Runs `body`, recording failures and containing panics.
fn guard(body: impl FnOnce() -> Result<(), Failure>) -> QplStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => {
            set_error("");
            QplStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(panic) => {
            let msg = panic
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| panic.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            QplStatus::Panic
        }
    }
}

unsafe fn text<'a>(s: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if s.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(s).to_str().map_err(|e| Failure(QplStatus::InvalidUtf8, format!("{what}: {e}")))
}

unsafe fn out<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| null(what))
}

/// Message describing the last failure on this thread (empty after a
/// success). The pointer stays valid until the next qplab call on the same
/// thread.
#[no_mangle]
pub extern "C" fn qpl_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn qpl_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Parses an operator from its JSON description.
///
/// # Safety
/// `json` must be NULL or a NUL-terminated string; `out_op` must be NULL
/// or point to writable storage for a handle.
#[no_mangle]
pub unsafe extern "C" fn qpl_operator_from_json(json: *const c_char, out_op: *mut *mut QplOperator) -> QplStatus {
    guard(|| {
        let spec = OperatorSpec::from_json(text(json, "json")?)?;
        *out(out_op, "out")? = Box::into_raw(Box::new(QplOperator { spec }));
        Ok(())
    })
}

/// Creates the almost Mathieu operator `Δ + λ cos 2π(θ + nω)`.
///
/// # Safety
/// `out_op` must be NULL or point to writable storage for a handle.
#[no_mangle]
pub unsafe extern "C" fn qpl_operator_almost_mathieu(
    coupling: f64,
    omega: f64,
    theta: f64,
    out_op: *mut *mut QplOperator,
) -> QplStatus {
    guard(|| {
        let spec = OperatorSpec::almost_mathieu(coupling, omega, theta)?;
        *out(out_op, "out")? = Box::into_raw(Box::new(QplOperator { spec }));
        Ok(())
    })
}

/// Releases an operator handle.
///
/// # Safety
/// `op` must be NULL or a handle from this library that was not freed yet.
#[no_mangle]
pub unsafe extern "C" fn qpl_operator_free(op: *mut QplOperator) {
    if !op.is_null() {
        drop(Box::from_raw(op));
    }
}

/// θ-averaged Lyapunov exponent at `energy` from `samples` phases and
/// products of length `k`.
///
/// # Safety
/// `op` must be NULL or a live handle; `gamma` must be NULL or writable.
#[no_mangle]
pub unsafe extern "C" fn qpl_lyapunov(
    op: *const QplOperator,
    energy: f64,
    k: usize,
    samples: usize,
    gamma: *mut f64,
) -> QplStatus {
    guard(|| {
        let op = op.as_ref().ok_or_else(|| null("operator"))?;
        let g = out(gamma, "gamma")?;
        *g = lyapunov_theta_avg(&op.spec, energy, k, samples)?.gamma;
        Ok(())
    })
}

/// Sorted eigenvalues of the finite section on `[−N, N]`.
///
/// `*len` always receives the number of eigenvalues. When `capacity` is
/// smaller (including a NULL `values` with zero capacity), nothing is copied
/// and `QPL_STATUS_BUFFER_TOO_SMALL` is returned.
///
/// # Safety
/// `op` must be NULL or a live handle; `values` must be NULL or point to
/// `capacity` writable doubles; `len` must be NULL or writable.
#[no_mangle]
pub unsafe extern "C" fn qpl_spectrum(
    op: *const QplOperator,
    half_width: usize,
    boundary: QplBoundary,
    values: *mut f64,
    capacity: usize,
    len: *mut usize,
) -> QplStatus {
    guard(|| {
        let op = op.as_ref().ok_or_else(|| null("operator"))?;
        let len = out(len, "len")?;
        let ev = eigvals(&build_finite(&op.spec, half_width, boundary.into())?)?;
        *len = ev.len();
        if capacity < ev.len() || values.is_null() {
            return Err(Failure(QplStatus::BufferTooSmall, format!("need room for {} eigenvalues", ev.len())));
        }
        ptr::copy_nonoverlapping(ev.as_ptr(), values, ev.len());
        Ok(())
    })
}

/// Scaled Hausdorff distance between `σ(H_λ)` and `(λ/2)σ(H_{4/λ})`.
///
/// # Safety
/// `distance` must be NULL or writable.
#[no_mangle]
pub unsafe extern "C" fn qpl_duality_distance(
    coupling: f64,
    omega: f64,
    half_width: usize,
    samples: usize,
    distance: *mut f64,
) -> QplStatus {
    guard(|| {
        let d = out(distance, "distance")?;
        *d = duality_check(coupling, omega, half_width, samples)?.scaled_distance;
        Ok(())
    })
}

/// Creates a kicked rotor on momenta `[−N, N]`, starting from `δ₀`.
///
/// # Safety
/// `out_rotor` must be NULL or point to writable storage for a handle.
#[no_mangle]
pub unsafe extern "C" fn qpl_rotor_new(kappa: f64, a: f64, b: f64, half_width: usize, out_rotor: *mut *mut QplRotor) -> QplStatus {
    guard(|| {
        let spec = KickedRotorSpec::new(kappa, a, b)?;
        let rotor = QplRotor { op: FloquetOperator::new(spec, half_width)?, state: RotorState::delta(half_width, 0)? };
        *out(out_rotor, "out")? = Box::into_raw(Box::new(rotor));
        Ok(())
    })
}

/// Releases a rotor handle.
///
/// # Safety
/// `rotor` must be NULL or a handle from this library that was not freed yet.
#[no_mangle]
pub unsafe extern "C" fn qpl_rotor_free(rotor: *mut QplRotor) {
    if !rotor.is_null() {
        drop(Box::from_raw(rotor));
    }
}

/// Advances the rotor by `periods` Floquet steps.
///
/// # Safety
/// `rotor` must be NULL or a live handle not used concurrently.
#[no_mangle]
pub unsafe extern "C" fn qpl_rotor_step(rotor: *mut QplRotor, periods: usize) -> QplStatus {
    guard(|| {
        let r = rotor.as_mut().ok_or_else(|| null("rotor"))?;
        for _ in 0..periods {
            floquet_step(&mut r.state, &r.op)?;
        }
        Ok(())
    })
}

/// Current `⟨n²⟩`, norm, period count and boundary flag of the rotor state.
/// Any of the out pointers may be NULL.
///
/// # Safety
/// `rotor` must be NULL or a live handle; non-NULL out pointers must be
/// writable.
#[no_mangle]
pub unsafe extern "C" fn qpl_rotor_moments(
    rotor: *const QplRotor,
    second_moment: *mut f64,
    norm: *mut f64,
    periods: *mut usize,
    flagged: *mut bool,
) -> QplStatus {
    guard(|| {
        let r = rotor.as_ref().ok_or_else(|| null("rotor"))?;
        if let Some(p) = second_moment.as_mut() {
            *p = r.state.second_moment();
        }
        if let Some(p) = norm.as_mut() {
            *p = r.state.norm();
        }
        if let Some(p) = periods.as_mut() {
            *p = r.state.t;
        }
        if let Some(p) = flagged.as_mut() {
            *p = r.state.flagged;
        }
        Ok(())
    })
}
