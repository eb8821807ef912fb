//! C ABI over sigmalab.
//!
//! Objects are opaque handles created by `sl_*_new`/`sl_*_from_json` and
//! released by the matching `sl_*_free`. Every fallible call returns an
//! [`SlStatus`] and writes its result through an out pointer; the message of
//! the last failure on the calling thread is available from
//! [`sl_last_error_message`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};

use sigmalab::measure::{MeasureOnHalfLine, MeasureSpec};
use sigmalab::scenario::Scenario;
use sigmalab::{lawlib, Error};

/// Status codes returned by every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SlStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Config = 3,
    ExcessCensoring = 4,
    Numerical = 5,
    Io = 6,
    Panic = 7,
}

/// Opaque scenario handle.
pub struct SlScenario {
    inner: Scenario,
}

/// Opaque measure handle.
pub struct SlMeasure {
    inner: MeasureOnHalfLine,
}

/// Verdict of a scenario run.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct SlSummary {
    pub n: u64,
    pub censored: u64,
    pub ks: f64,
    pub dkw_eps: f64,
    pub slack: f64,
    pub pass: bool,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn status_of(e: &Error) -> SlStatus {
    match e {
        Error::Config { .. } | Error::InvalidSpec(_) | Error::InvalidMeasure(_) | Error::Json(_) => SlStatus::Config,
        Error::ExcessCensoring { .. } => SlStatus::ExcessCensoring,
        Error::Io(_) | Error::Csv(_) => SlStatus::Io,
        _ => SlStatus::Numerical,
    }
}

/// Runs `f`, turning errors and panics into status codes.
fn guard(f: impl FnOnce() -> Result<(), (SlStatus, String)>) -> SlStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => SlStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("panic inside sigmalab".into());
            SlStatus::Panic
        }
    }
}

fn lib<T>(r: sigmalab::Result<T>) -> Result<T, (SlStatus, String)> {
    r.map_err(|e| (status_of(&e), e.to_string()))
}

fn null(what: &str) -> (SlStatus, String) {
    (SlStatus::NullPointer, format!("{what} is null"))
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, (SlStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p).to_str().map_err(|_| (SlStatus::InvalidUtf8, format!("{what} is not UTF-8")))
}

unsafe fn put<T>(out: *mut T, v: T, what: &str) -> Result<(), (SlStatus, String)> {
    if out.is_null() {
        return Err(null(what));
    }
    out.write(v);
    Ok(())
}

/// Copies the last error message of this thread into `buf` (NUL-terminated,
/// truncated to `len`) and returns the full message length in bytes.
///
/// # Safety
/// `buf` must be null or valid for `len` bytes.
#[no_mangle]
pub unsafe extern "C" fn sl_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            std::ptr::copy_nonoverlapping(msg.as_ptr().cast::<c_char>(), buf, n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn sl_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Parses and validates a scenario document.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn sl_scenario_from_json(json: *const c_char, out: *mut *mut SlScenario) -> SlStatus {
    guard(|| {
        let text = str_arg(json, "json")?;
        let inner = lib(Scenario::from_json(text))?;
        put(out, Box::into_raw(Box::new(SlScenario { inner })), "out")
    })
}

/// Overrides the number of paths.
///
/// # Safety
/// `s` must be a live scenario handle.
#[no_mangle]
pub unsafe extern "C" fn sl_scenario_set_paths(s: *mut SlScenario, n_paths: u64) -> SlStatus {
    guard(|| {
        let s = s.as_mut().ok_or_else(|| null("scenario"))?;
        lib(s.inner.apply_overrides(Some(n_paths), None))
    })
}

/// Overrides the seed.
///
/// # Safety
/// `s` must be a live scenario handle.
#[no_mangle]
pub unsafe extern "C" fn sl_scenario_set_seed(s: *mut SlScenario, seed: u64) -> SlStatus {
    guard(|| {
        let s = s.as_mut().ok_or_else(|| null("scenario"))?;
        lib(s.inner.apply_overrides(None, Some(seed)))
    })
}

/// Runs the scenario and writes its verdict.
///
/// # Safety
/// `s` must be a live scenario handle and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn sl_scenario_run(s: *const SlScenario, out: *mut SlSummary) -> SlStatus {
    guard(|| {
        let s = s.as_ref().ok_or_else(|| null("scenario"))?;
        let o = lib(s.inner.run(None))?;
        let sum = SlSummary {
            n: o.summary.n as u64,
            censored: o.summary.censored as u64,
            ks: o.summary.ks,
            dkw_eps: o.summary.dkw_eps,
            slack: o.summary.slack,
            pass: o.summary.pass,
        };
        put(out, sum, "out")
    })
}

/// Releases a scenario handle; null is ignored.
///
/// # Safety
/// `s` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn sl_scenario_free(s: *mut SlScenario) {
    if !s.is_null() {
        drop(Box::from_raw(s));
    }
}

fn new_measure(out: *mut *mut SlMeasure, m: sigmalab::Result<MeasureOnHalfLine>) -> SlStatus {
    guard(|| {
        let inner = lib(m)?;
        // SAFETY: the caller of the public constructor vouches for `out`.
        unsafe { put(out, Box::into_raw(Box::new(SlMeasure { inner })), "out") }
    })
}

/// Exponential law with the given rate.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn sl_measure_exponential(rate: f64, out: *mut *mut SlMeasure) -> SlStatus {
    new_measure(out, MeasureOnHalfLine::exponential(rate))
}

/// Uniform law on `[0, b]`.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn sl_measure_uniform(b: f64, out: *mut *mut SlMeasure) -> SlStatus {
    new_measure(out, MeasureOnHalfLine::uniform(b))
}

/// Measure from a JSON description such as `{"kind": "lomax", "alpha": 2}`.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn sl_measure_from_json(json: *const c_char, out: *mut *mut SlMeasure) -> SlStatus {
    let text = match guard_value(|| str_arg(json, "json").map(str::to_owned)) {
        Ok(t) => t,
        Err(status) => return status,
    };
    let spec: sigmalab::Result<MeasureSpec> = serde_json::from_str(&text).map_err(Error::from);
    new_measure(out, spec.and_then(|s| s.build(None)))
}

fn guard_value<T>(f: impl FnOnce() -> Result<T, (SlStatus, String)>) -> Result<T, SlStatus> {
    let mut slot = None;
    let status = guard(|| {
        slot = Some(f()?);
        Ok(())
    });
    slot.ok_or(status)
}

unsafe fn measure_eval(
    m: *const SlMeasure,
    x: f64,
    out: *mut f64,
    f: impl FnOnce(&MeasureOnHalfLine, f64) -> sigmalab::Result<f64>,
) -> SlStatus {
    guard(|| {
        let m = m.as_ref().ok_or_else(|| null("measure"))?;
        let v = lib(f(&m.inner, x))?;
        put(out, v, "out")
    })
}

/// `P(V > x)`.
///
/// # Safety
/// `m` must be a live measure handle and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn sl_measure_survival(m: *const SlMeasure, x: f64, out: *mut f64) -> SlStatus {
    measure_eval(m, x, out, |m, x| Ok(m.survival(x)))
}

/// The transform `ψ(x) = ∫_{[0,x]} z / P(V ≥ z) dP(z)`.
///
/// # Safety
/// `m` must be a live measure handle and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn sl_measure_dual_hl_psi(m: *const SlMeasure, x: f64, out: *mut f64) -> SlStatus {
    measure_eval(m, x, out, |m, x| m.dual_hl_psi(x))
}

/// The embedding barrier `φ`, the right inverse of `ψ`.
///
/// # Safety
/// `m` must be a live measure handle and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn sl_measure_dual_hl_phi(m: *const SlMeasure, z: f64, out: *mut f64) -> SlStatus {
    measure_eval(m, z, out, |m, z| m.dual_hl_phi(z))
}

/// Releases a measure handle; null is ignored.
///
/// # Safety
/// `m` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn sl_measure_free(m: *mut SlMeasure) {
    if !m.is_null() {
        drop(Box::from_raw(m));
    }
}

/// `c_{p,q} = B(1/q, 1/p - 1/q) / q` for `q > p > 0`.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn sl_spq_constant(p: f64, q: f64, out: *mut f64) -> SlStatus {
    guard(|| {
        let v = lib(lawlib::spq_constant(p, q))?;
        put(out, v, "out")
    })
}

/// `P(S_∞ > a) = (x0 / a) ∧ 1`.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn sl_doob_maximal_survival(x0: f64, a: f64, out: *mut f64) -> SlStatus {
    guard(|| {
        let v = lib(lawlib::doob_maximal_survival(x0, a))?;
        put(out, v, "out")
    })
}
