//! C interface to `pdmp-core`.
//!
//! Models and value fields are opaque handles owned by the caller and released with the
//! matching `*_free` function. Every fallible call returns a [`PdmpStatus`]; on failure the
//! message is kept per thread and read back with [`pdmp_last_error_message`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use pdmp_core::model::epsilon_interior;
use pdmp_core::solver::{solve_penalized_dual, solve_primal, ValueField};
use pdmp_core::{Error, ModelSpec, Numerics, Point};

/// Result codes of the C interface.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PdmpStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    InvalidModel = 3,
    InvalidArgument = 4,
    NumericalFailure = 5,
    Internal = 6,
}

/// Parsed model.
pub struct PdmpModel {
    spec: ModelSpec,
}

/// Solved value field on a lattice.
pub struct PdmpValueField {
    field: ValueField,
    iterations: usize,
    residual: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = CString::new(msg.into().replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(msg));
}

fn status_of(e: &Error) -> PdmpStatus {
    if e.is_numerical() {
        PdmpStatus::NumericalFailure
    } else {
        match e {
            Error::Config(_) => PdmpStatus::InvalidArgument,
            _ => PdmpStatus::InvalidModel,
        }
    }
}

fn guard(f: impl FnOnce() -> Result<(), (PdmpStatus, String)>) -> PdmpStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => PdmpStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("panic inside pdmp");
            PdmpStatus::Internal
        }
    }
}

fn core_err(e: Error) -> (PdmpStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> (PdmpStatus, String) {
    (PdmpStatus::NullPointer, format!("{what} is null"))
}

fn numerics(grid_n: usize, tol: f64) -> Result<Numerics, (PdmpStatus, String)> {
    let num = Numerics { grid_n, tol, ..Numerics::default() };
    num.check().map_err(|e| (PdmpStatus::InvalidArgument, e.to_string()))?;
    Ok(num)
}

/// Parses a model from a NUL-terminated JSON string.
///
/// # Safety
/// `json` must be a valid C string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn pdmp_model_from_json(json: *const c_char, out: *mut *mut PdmpModel) -> PdmpStatus {
    guard(|| {
        if json.is_null() {
            return Err(null("json"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let text = CStr::from_ptr(json).to_str().map_err(|e| (PdmpStatus::InvalidUtf8, e.to_string()))?;
        let spec = ModelSpec::from_json(text).map_err(core_err)?;
        *out = Box::into_raw(Box::new(PdmpModel { spec }));
        Ok(())
    })
}

/// Releases a model; null is ignored.
///
/// # Safety
/// `model` must come from [`pdmp_model_from_json`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn pdmp_model_free(model: *mut PdmpModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// State-space dimension, 0 for a null model.
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn pdmp_model_dim(model: *const PdmpModel) -> usize {
    model.as_ref().map_or(0, |m| m.spec.dim())
}

/// Minimal boundary-hitting time over the boundary reset atoms and interior actions
/// (infinite when none reaches the boundary).
///
/// # Safety
/// `model` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn pdmp_model_epsilon_interior(model: *const PdmpModel, out: *mut f64) -> PdmpStatus {
    guard(|| {
        let m = model.as_ref().ok_or_else(|| null("model"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = epsilon_interior(&m.spec, &Numerics::default()).map_err(core_err)?;
        Ok(())
    })
}

/// Solves for the value function on a lattice with `grid_n` intervals per axis.
///
/// # Safety
/// `model` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn pdmp_solve_primal(
    model: *const PdmpModel,
    grid_n: usize,
    tol: f64,
    out: *mut *mut PdmpValueField,
) -> PdmpStatus {
    guard(|| {
        let m = model.as_ref().ok_or_else(|| null("model"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let sol = solve_primal(&m.spec, &numerics(grid_n, tol)?).map_err(core_err)?;
        *out = Box::into_raw(Box::new(PdmpValueField {
            field: sol.field,
            iterations: sol.iterations,
            residual: sol.sup_residual,
        }));
        Ok(())
    })
}

/// Solves the penalized dual problem at penalty level `n`.
///
/// # Safety
/// `model` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn pdmp_solve_dual(
    model: *const PdmpModel,
    grid_n: usize,
    tol: f64,
    n: f64,
    out: *mut *mut PdmpValueField,
) -> PdmpStatus {
    guard(|| {
        let m = model.as_ref().ok_or_else(|| null("model"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        if !(n > 0.0 && n.is_finite()) {
            return Err((PdmpStatus::InvalidArgument, format!("penalty level {n} must be positive")));
        }
        let sol = solve_penalized_dual(&m.spec, &numerics(grid_n, tol)?, n).map_err(core_err)?;
        *out = Box::into_raw(Box::new(PdmpValueField {
            field: sol.field,
            iterations: sol.iterations,
            residual: sol.sup_residual,
        }));
        Ok(())
    })
}

/// Interpolated value at `x[0..dim]` for action pair `pair` (0 for primal fields).
///
/// # Safety
/// `field` must be a live handle, `x` must point to `dim` doubles and `out` be valid.
#[no_mangle]
pub unsafe extern "C" fn pdmp_field_eval(
    field: *const PdmpValueField,
    x: *const f64,
    dim: usize,
    pair: usize,
    out: *mut f64,
) -> PdmpStatus {
    guard(|| {
        let f = field.as_ref().ok_or_else(|| null("field"))?;
        if x.is_null() {
            return Err(null("x"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let d = f.field.grid.dim();
        if dim != d {
            return Err((PdmpStatus::InvalidArgument, format!("point has {dim} coordinates, field has {d}")));
        }
        let pairs = f.field.space.pairs();
        if pair >= pairs {
            return Err((PdmpStatus::InvalidArgument, format!("pair {pair} out of range ({pairs} pairs)")));
        }
        let p = Point::from_slice(std::slice::from_raw_parts(x, dim));
        *out = f.field.eval_pair(&p, pair);
        Ok(())
    })
}

/// Number of sweeps the solver used, 0 for a null field.
///
/// # Safety
/// `field` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn pdmp_field_iterations(field: *const PdmpValueField) -> usize {
    field.as_ref().map_or(0, |f| f.iterations)
}

/// Last sup-norm change between sweeps, NaN for a null field.
///
/// # Safety
/// `field` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn pdmp_field_residual(field: *const PdmpValueField) -> f64 {
    field.as_ref().map_or(f64::NAN, |f| f.residual)
}

/// Releases a value field; null is ignored.
///
/// # Safety
/// `field` must come from a solve call and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn pdmp_field_free(field: *mut PdmpValueField) {
    if !field.is_null() {
        drop(Box::from_raw(field));
    }
}

/// Copies the last error message of this thread into `buf` (NUL-terminated, truncated to
/// `len`) and returns its full length in bytes, or 0 when there is none. A null `buf` only
/// queries the length.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn pdmp_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let e = e.borrow();
        let Some(msg) = e.as_ref() else { return 0 };
        let bytes = msg.as_bytes();
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len - 1);
            ptr::copy_nonoverlapping(bytes.as_ptr().cast::<c_char>(), buf, n);
            *buf.add(n) = 0;
        }
        bytes.len()
    })
}
