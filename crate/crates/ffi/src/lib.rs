//! C ABI over `choquard-core`.
//!
//! Parameters live behind an opaque [`ChoquardParams`] handle. Every fallible call
//! returns a [`ChoquardStatus`]; on failure [`choquard_last_error`] describes the cause.
//! Strings returned through `char **` are owned by the caller and released with
//! [`choquard_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use choquard_core::ansatz::{weighted_m_laplace_closed_form, PowerLogProfile};
use choquard_core::exponents::{candidate_gamma_range, classify_existence, derive_exponents, Existence, ProblemParams};
use choquard_core::verify::{run_verification, Preset, VerifyConfig};
use choquard_core::Error;

/// Result of every fallible call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ChoquardStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    /// Parameters fail to parse or violate the baseline bounds.
    InvalidParams = 3,
    /// The operation does not apply to these parameters.
    Precondition = 4,
    /// A numerical method missed its tolerance.
    Numerical = 5,
    /// Any other failure, including a caught panic.
    Internal = 6,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ChoquardExistence {
    Yes = 0,
    No = 1,
    Undetermined = 2,
}

/// Opaque, validated parameter tuple `(N, m, p, q, alpha, beta)`.
pub struct ChoquardParams {
    inner: ProblemParams,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(err: &Error) -> ChoquardStatus {
    match err {
        Error::Violation(_) | Error::Parse(_) => ChoquardStatus::InvalidParams,
        e if e.is_numerical() => ChoquardStatus::Numerical,
        Error::Precondition(_) | Error::EmptyRange { .. } | Error::NotIntegrable { .. } | Error::Domain(_) => {
            ChoquardStatus::Precondition
        }
        _ => ChoquardStatus::Internal,
    }
}

/// Runs `f`, recording errors and turning panics into [`ChoquardStatus::Internal`].
fn guard<F: FnOnce() -> Result<(), (ChoquardStatus, String)>>(f: F) -> ChoquardStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            ChoquardStatus::Ok
        }
        Ok(Err((status, msg))) => {
            set_error(&msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            ChoquardStatus::Internal
        }
    }
}

fn core_err(e: Error) -> (ChoquardStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> (ChoquardStatus, String) {
    (ChoquardStatus::NullPointer, format!("{what} is null"))
}

unsafe fn read_str<'a>(s: *const c_char, what: &str) -> Result<&'a str, (ChoquardStatus, String)> {
    if s.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(s).to_str().map_err(|_| (ChoquardStatus::InvalidUtf8, format!("{what} is not UTF-8")))
}

unsafe fn params_ref<'a>(p: *const ChoquardParams) -> Result<&'a ProblemParams, (ChoquardStatus, String)> {
    p.as_ref().map(|h| &h.inner).ok_or_else(|| null("params"))
}

unsafe fn write_string(out: *mut *mut c_char, s: String) -> Result<(), (ChoquardStatus, String)> {
    let c = CString::new(s).map_err(|_| (ChoquardStatus::Internal, "output contains NUL".to_string()))?;
    *out = c.into_raw();
    Ok(())
}

/// Parses `"N,m,p,q,alpha,beta"` (decimals or fractions such as `20/9`).
///
/// # Safety
/// `tuple` must be a NUL-terminated string and `out` a valid pointer. On success `*out`
/// holds a handle to release with [`choquard_params_free`]; on failure it is set to null.
#[no_mangle]
pub unsafe extern "C" fn choquard_params_new(tuple: *const c_char, out: *mut *mut ChoquardParams) -> ChoquardStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let inner: ProblemParams = read_str(tuple, "tuple")?.parse().map_err(core_err)?;
        *out = Box::into_raw(Box::new(ChoquardParams { inner }));
        Ok(())
    })
}

/// Built-in parameter set by name, e.g. `"thm2-case1"`.
///
/// # Safety
/// Same contract as [`choquard_params_new`].
#[no_mangle]
pub unsafe extern "C" fn choquard_params_preset(name: *const c_char, out: *mut *mut ChoquardParams) -> ChoquardStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let name = read_str(name, "name")?;
        let preset = Preset::ALL
            .into_iter()
            .find(|p| p.name() == name)
            .ok_or_else(|| (ChoquardStatus::InvalidParams, format!("unknown preset {name}")))?;
        *out = Box::into_raw(Box::new(ChoquardParams { inner: preset.params() }));
        Ok(())
    })
}

/// Releases a handle. Null is accepted.
///
/// # Safety
/// `params` must come from this library and must not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn choquard_params_free(params: *mut ChoquardParams) {
    if !params.is_null() {
        drop(Box::from_raw(params));
    }
}

/// Exact existence verdict.
///
/// # Safety
/// `params` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn choquard_classify(
    params: *const ChoquardParams,
    out: *mut ChoquardExistence,
) -> ChoquardStatus {
    guard(|| {
        let p = params_ref(params)?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = match classify_existence(p).exists {
            Existence::Yes => ChoquardExistence::Yes,
            Existence::No => ChoquardExistence::No,
            Existence::Undetermined => ChoquardExistence::Undetermined,
        };
        Ok(())
    })
}

/// `sigma = (m+alpha+beta)/(p+q-m+1)`.
///
/// # Safety
/// `params` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn choquard_sigma(params: *const ChoquardParams, out: *mut f64) -> ChoquardStatus {
    guard(|| {
        let p = params_ref(params)?;
        *out.as_mut().ok_or_else(|| null("out"))? = derive_exponents(p).sigma;
        Ok(())
    })
}

/// Open interval of admissible decay exponents.
///
/// # Safety
/// `params` must be a live handle; `lower` and `upper` valid pointers.
#[no_mangle]
pub unsafe extern "C" fn choquard_gamma_range(
    params: *const ChoquardParams,
    lower: *mut f64,
    upper: *mut f64,
) -> ChoquardStatus {
    guard(|| {
        let p = params_ref(params)?;
        let (lo, hi) = (lower.as_mut().ok_or_else(|| null("lower"))?, upper.as_mut().ok_or_else(|| null("upper"))?);
        let r = candidate_gamma_range(p).map_err(core_err)?;
        *lo = r.lower_f64();
        *hi = r.upper_f64();
        Ok(())
    })
}

/// Weighted m-Laplacian of `kappa r^{-gamma} (log 5/r)^{-tau}` at `r`.
///
/// # Safety
/// `params` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn choquard_closed_form(
    params: *const ChoquardParams,
    kappa: f64,
    gamma: f64,
    tau: f64,
    r: f64,
    out: *mut f64,
) -> ChoquardStatus {
    guard(|| {
        let p = params_ref(params)?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let u = PowerLogProfile::new(kappa, gamma, tau).map_err(core_err)?;
        *out = weighted_m_laplace_closed_form(&u, p, r).map_err(core_err)?;
        Ok(())
    })
}

/// Derived exponents as JSON.
///
/// # Safety
/// `params` must be a live handle and `out` a valid pointer; free the result with
/// [`choquard_string_free`].
#[no_mangle]
pub unsafe extern "C" fn choquard_derive_json(params: *const ChoquardParams, out: *mut *mut c_char) -> ChoquardStatus {
    guard(|| {
        let p = params_ref(params)?;
        if out.is_null() {
            return Err(null("out"));
        }
        let json = serde_json_string(&derive_exponents(p))?;
        write_string(out, json)
    })
}

fn serde_json_string<T: serde::Serialize>(v: &T) -> Result<String, (ChoquardStatus, String)> {
    serde_json::to_string_pretty(v).map_err(|e| (ChoquardStatus::Internal, e.to_string()))
}

/// Full verification report as JSON with default thresholds. A NaN `gamma` selects
/// the default decay exponent of the pointwise check. `*passed` is set to 1 when no
/// check failed.
///
/// # Safety
/// `params` must be a live handle; `out` and `passed` valid pointers. Free the string
/// with [`choquard_string_free`].
#[no_mangle]
pub unsafe extern "C" fn choquard_verify_json(
    params: *const ChoquardParams,
    gamma: f64,
    out: *mut *mut c_char,
    passed: *mut i32,
) -> ChoquardStatus {
    guard(|| {
        let p = params_ref(params)?;
        if out.is_null() {
            return Err(null("out"));
        }
        let passed = passed.as_mut().ok_or_else(|| null("passed"))?;
        let gamma = (!gamma.is_nan()).then_some(gamma);
        let preset = Preset::ALL.into_iter().find(|x| x.params() == *p);
        let gamma = gamma.or_else(|| preset.and_then(Preset::gamma));
        let report = run_verification(p, gamma, preset, &VerifyConfig::default()).map_err(core_err)?;
        *passed = i32::from(report.passed());
        write_string(out, report.to_json().map_err(core_err)?)
    })
}

/// Releases a string returned by this library. Null is accepted.
///
/// # Safety
/// `s` must come from this library and must not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn choquard_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Message of the last failed call on this thread; empty after a success. The pointer
/// stays valid until the next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn choquard_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}
