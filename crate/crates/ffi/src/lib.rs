//! C ABI for the `osde` estimator.
//!
//! Every fallible call returns an [`OsdeStatus`]; on failure a description is
//! available from [`osde_last_error_message`] on the same thread. Estimates
//! are opaque [`OsdeEstimate`] handles released with [`osde_estimate_free`].
//! Strings returned by the library are released with [`osde_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use osde::basis::{fit_scaling, phi};
use osde::design::WeightedSample;
use osde::estimator::{fit, project_to_density, Method, ValidDensity, MIN_GRID};
use osde::io::CoefficientExport;
use osde::theory::{minimax_lower_bound, SobolevParams};
use osde::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OsdeStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Domain = 3,
    Degenerate = 4,
    Parse = 5,
    Projection = 6,
    Index = 7,
    Internal = 99,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OsdeMethod {
    Truncated = 0,
    Smoothed = 1,
    IidBaseline = 2,
}

/// Opaque fitted and projected estimate.
pub struct OsdeEstimate {
    density: ValidDensity,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> OsdeStatus {
    match e {
        Error::Domain { .. } => OsdeStatus::Domain,
        Error::Degenerate(_) => OsdeStatus::Degenerate,
        Error::Parse(_) | Error::Json(_) | Error::Csv(_) => OsdeStatus::Parse,
        Error::Projection { .. } => OsdeStatus::Projection,
        Error::Index { .. } => OsdeStatus::Index,
        _ => OsdeStatus::InvalidArgument,
    }
}

enum Failure {
    Null(&'static str),
    Lib(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

fn guard(body: impl FnOnce() -> Result<(), Failure>) -> OsdeStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => {
            set_error("");
            OsdeStatus::Ok
        }
        Ok(Err(Failure::Null(what))) => {
            set_error(&format!("null pointer: {what}"));
            OsdeStatus::NullPointer
        }
        Ok(Err(Failure::Lib(e))) => {
            set_error(&e.to_string());
            status_of(&e)
        }
        Err(_) => {
            set_error("internal panic");
            OsdeStatus::Internal
        }
    }
}

unsafe fn handle<'a>(h: *const OsdeEstimate) -> Result<&'a OsdeEstimate, Failure> {
    h.as_ref().ok_or(Failure::Null("estimate"))
}

unsafe fn out_ref<'a, T>(p: *mut T) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or(Failure::Null("output"))
}

fn boxed(est: osde::estimator::DensityEstimate) -> Result<*mut OsdeEstimate, Failure> {
    let density = project_to_density(&est, MIN_GRID)?;
    Ok(Box::into_raw(Box::new(OsdeEstimate { density })))
}

/// Fits an estimate to `n` observations `x` with sampling weights `w`.
///
/// `w` may be null, meaning every weight is `population_size / n`. A NaN
/// `delta` selects `-1/n`. `margin` widens the fitted range on both sides as
/// a fraction of the data range.
///
/// # Safety
/// `x` (and `w` when not null) must point to `n` readable doubles and `out`
/// to a writable handle pointer.
#[no_mangle]
pub unsafe extern "C" fn osde_fit(
    x: *const f64,
    w: *const f64,
    n: usize,
    population_size: usize,
    delta: f64,
    method: OsdeMethod,
    margin: f64,
    out: *mut *mut OsdeEstimate,
) -> OsdeStatus {
    guard(|| {
        if x.is_null() {
            return Err(Failure::Null("x"));
        }
        let out = out_ref(out)?;
        if n == 0 {
            return Err(Error::InvalidArgument("n must be positive".into()).into());
        }
        let values = std::slice::from_raw_parts(x, n).to_vec();
        let weights = if w.is_null() {
            vec![population_size as f64 / n as f64; n]
        } else {
            std::slice::from_raw_parts(w, n).to_vec()
        };
        let delta = if delta.is_nan() { -1.0 / n as f64 } else { delta };
        let scaling = fit_scaling(&values, margin)?;
        let sample = WeightedSample::new(values, weights, population_size, delta)?;
        let method = match method {
            OsdeMethod::Truncated => Method::Truncated,
            OsdeMethod::Smoothed => Method::Smoothed,
            OsdeMethod::IidBaseline => Method::IidBaseline,
        };
        *out = boxed(fit(&sample, &scaling, method)?)?;
        Ok(())
    })
}

/// Loads an estimate from its JSON export.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn osde_estimate_from_json(json: *const c_char, out: *mut *mut OsdeEstimate) -> OsdeStatus {
    guard(|| {
        if json.is_null() {
            return Err(Failure::Null("json"));
        }
        let out = out_ref(out)?;
        let text = CStr::from_ptr(json)
            .to_str()
            .map_err(|_| Error::Parse("export is not valid UTF-8".into()))?;
        *out = boxed(CoefficientExport::from_json(text)?.to_estimate()?)?;
        Ok(())
    })
}

/// Serializes the estimate (coefficients only) to JSON. Release the result
/// with [`osde_string_free`].
///
/// # Safety
/// `est` must be a live handle and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn osde_estimate_to_json(est: *const OsdeEstimate, out: *mut *mut c_char) -> OsdeStatus {
    guard(|| {
        let est = handle(est)?;
        let out = out_ref(out)?;
        let json = CoefficientExport::from_estimate(&est.density.base).to_json()?;
        *out = CString::new(json).expect("json has no NUL").into_raw();
        Ok(())
    })
}

/// Projected density at scaled point `u` in `[0, 1]`.
///
/// # Safety
/// `est` must be a live handle and `out` a writable double.
#[no_mangle]
pub unsafe extern "C" fn osde_estimate_eval(est: *const OsdeEstimate, u: f64, out: *mut f64) -> OsdeStatus {
    guard(|| {
        *out_ref(out)? = handle(est)?.density.evaluate(u)?;
        Ok(())
    })
}

/// Projected density on the original scale; zero outside the fitted range.
///
/// # Safety
/// `est` must be a live handle and `out` a writable double.
#[no_mangle]
pub unsafe extern "C" fn osde_estimate_eval_x(est: *const OsdeEstimate, x: f64, out: *mut f64) -> OsdeStatus {
    guard(|| {
        let d = &handle(est)?.density;
        let u = d.base.scaling.forward(x);
        *out_ref(out)? = if (0.0..=1.0).contains(&u) {
            d.evaluate(u)? / d.base.scaling.width()
        } else {
            0.0
        };
        Ok(())
    })
}

/// Unprojected series value at `u` (may be negative).
///
/// # Safety
/// `est` must be a live handle and `out` a writable double.
#[no_mangle]
pub unsafe extern "C" fn osde_estimate_eval_raw(est: *const OsdeEstimate, u: f64, out: *mut f64) -> OsdeStatus {
    guard(|| {
        *out_ref(out)? = handle(est)?.density.base.evaluate(u)?;
        Ok(())
    })
}

/// Square root of the plug-in design variance at `u`.
///
/// # Safety
/// `est` must be a live handle and `out` a writable double.
#[no_mangle]
pub unsafe extern "C" fn osde_estimate_design_sd(est: *const OsdeEstimate, u: f64, out: *mut f64) -> OsdeStatus {
    guard(|| {
        *out_ref(out)? = handle(est)?.density.base.design_sd(u)?;
        Ok(())
    })
}

/// Fills `values[i]` with the projected density at `i / (grid - 1)`.
///
/// # Safety
/// `est` must be a live handle and `values` must hold `grid` doubles.
#[no_mangle]
pub unsafe extern "C" fn osde_estimate_grid(est: *const OsdeEstimate, grid: usize, values: *mut f64) -> OsdeStatus {
    guard(|| {
        let est = handle(est)?;
        if values.is_null() {
            return Err(Failure::Null("values"));
        }
        let projected = project_to_density(&est.density.base, grid)?;
        std::slice::from_raw_parts_mut(values, grid).copy_from_slice(projected.grid_values());
        Ok(())
    })
}

/// Truncation point `J`, or 0 for a null handle.
///
/// # Safety
/// `est` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn osde_estimate_cutoff(est: *const OsdeEstimate) -> usize {
    est.as_ref().map_or(0, |e| e.density.base.cutoff())
}

/// Projection constant `c`, or NaN for a null handle.
///
/// # Safety
/// `est` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn osde_estimate_shift(est: *const OsdeEstimate) -> f64 {
    est.as_ref().map_or(f64::NAN, |e| e.density.shift())
}

/// # Safety
/// `est` must be null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn osde_estimate_free(est: *mut OsdeEstimate) {
    if !est.is_null() {
        drop(Box::from_raw(est));
    }
}

/// # Safety
/// `s` must be null or a string returned by this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn osde_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Message for the last failed call on this thread (empty after success).
/// Valid until the next library call on the same thread.
#[no_mangle]
pub extern "C" fn osde_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Basis function `phi_j(u)`.
///
/// # Safety
/// `out` must be a writable double.
#[no_mangle]
pub unsafe extern "C" fn osde_phi(j: usize, u: f64, out: *mut f64) -> OsdeStatus {
    guard(|| {
        *out_ref(out)? = phi(j, u)?;
        Ok(())
    })
}

/// Minimax MISE lower bound `P(k, Q, b) N^(-2k/(2k+1))`.
///
/// # Safety
/// `out` must be a writable double.
#[no_mangle]
pub unsafe extern "C" fn osde_minimax_lower_bound(k: f64, q: f64, b: f64, population_size: u64, out: *mut f64) -> OsdeStatus {
    guard(|| {
        let p = SobolevParams::new(k, q, b, 1.0)?;
        *out_ref(out)? = minimax_lower_bound(&p, population_size)?;
        Ok(())
    })
}
