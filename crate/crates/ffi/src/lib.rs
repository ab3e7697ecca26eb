//! C ABI over `jca_core`.
//!
//! Scenarios and run results are opaque handles owned by the caller and
//! released with the matching `*_free`. Every function returns a
//! [`JcaStatus`]; on failure [`jca_last_error`] describes the problem for the
//! calling thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use jca_core::engine::{classify_regime, run, Regime, RunTrace};
use jca_core::error::{EngineError, ScenarioError, TraceIoError};
use jca_core::trace_io::emit_trace;
use jca_core::{table1_scenario, CarrierId, DecayPolicy, Rate, Scenario, UeId, UtilityFunction};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JcaStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    ParseError = 3,
    ValidationError = 4,
    IoError = 5,
    EngineError = 6,
    NotFound = 7,
    InvalidArgument = 8,
    Panic = 99,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JcaRegime {
    Abundant = 0,
    Borderline = 1,
    Scarce = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JcaUtilityKind {
    /// Parameters `a`, `b`.
    Sigmoidal = 0,
    /// Parameters `k`, `r_max`.
    Logarithmic = 1,
}

pub struct JcaScenario {
    inner: Scenario,
}

pub struct JcaTrace {
    inner: RunTrace,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl ToString) {
    let msg = msg.to_string().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).unwrap_or_default());
}

fn fail(status: JcaStatus, msg: impl ToString) -> JcaStatus {
    set_error(msg);
    status
}

fn guard(f: impl FnOnce() -> JcaStatus) -> JcaStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(_) => fail(JcaStatus::Panic, "internal panic"),
    }
}

fn scenario_status(e: &ScenarioError) -> JcaStatus {
    match e {
        ScenarioError::Io { .. } => JcaStatus::IoError,
        ScenarioError::Parse { .. } => JcaStatus::ParseError,
        ScenarioError::Invalid(_) => JcaStatus::ValidationError,
    }
}

fn engine_status(e: &EngineError) -> JcaStatus {
    match e {
        EngineError::Invalid(_) => JcaStatus::ValidationError,
        _ => JcaStatus::EngineError,
    }
}

unsafe fn str_arg<'a>(p: *const c_char) -> Result<&'a str, JcaStatus> {
    if p.is_null() {
        return Err(fail(JcaStatus::NullPointer, "null string argument"));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|e| fail(JcaStatus::InvalidUtf8, e))
}

fn emit_scenario(s: Scenario, out: *mut *mut JcaScenario) -> JcaStatus {
    unsafe { *out = Box::into_raw(Box::new(JcaScenario { inner: s })) };
    JcaStatus::Ok
}

/// Message of the last failure on this thread; empty if none. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn jca_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Parses and validates a scenario from JSON text.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn jca_scenario_from_json(json: *const c_char, out: *mut *mut JcaScenario) -> JcaStatus {
    guard(|| {
        if out.is_null() {
            return fail(JcaStatus::NullPointer, "null output pointer");
        }
        let text = match str_arg(json) {
            Ok(t) => t,
            Err(s) => return s,
        };
        match Scenario::from_json_str(text) {
            Ok(s) => emit_scenario(s, out),
            Err(e) => fail(scenario_status(&e), e),
        }
    })
}

/// Loads a scenario file.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn jca_scenario_load(path: *const c_char, out: *mut *mut JcaScenario) -> JcaStatus {
    guard(|| {
        if out.is_null() {
            return fail(JcaStatus::NullPointer, "null output pointer");
        }
        let path = match str_arg(path) {
            Ok(p) => p,
            Err(s) => return s,
        };
        match Scenario::load(path) {
            Ok(s) => emit_scenario(s, out),
            Err(e) => fail(scenario_status(&e), e),
        }
    })
}

/// The built-in two-carrier, twelve-UE scenario.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn jca_scenario_table1(r1: f64, r2: f64, out: *mut *mut JcaScenario) -> JcaStatus {
    guard(|| {
        if out.is_null() {
            return fail(JcaStatus::NullPointer, "null output pointer");
        }
        let s = table1_scenario(r1, r2);
        match s.validate() {
            Ok(()) => emit_scenario(s, out),
            Err(e) => fail(JcaStatus::ValidationError, e),
        }
    })
}

/// # Safety
/// `s` must come from a `jca_scenario_*` constructor and not be used again.
#[no_mangle]
pub unsafe extern "C" fn jca_scenario_free(s: *mut JcaScenario) {
    if !s.is_null() {
        drop(Box::from_raw(s));
    }
}

unsafe fn scenario_mut<'a>(s: *mut JcaScenario) -> Result<&'a mut Scenario, JcaStatus> {
    s.as_mut()
        .map(|s| &mut s.inner)
        .ok_or_else(|| fail(JcaStatus::NullPointer, "null scenario"))
}

/// # Safety
/// `s` must be a live scenario handle.
#[no_mangle]
pub unsafe extern "C" fn jca_scenario_set_capacity(s: *mut JcaScenario, carrier: u32, capacity: f64) -> JcaStatus {
    guard(|| {
        let s = match scenario_mut(s) {
            Ok(s) => s,
            Err(st) => return st,
        };
        if !(capacity.is_finite() && capacity > 0.0) {
            return fail(JcaStatus::InvalidArgument, format!("capacity must be finite and > 0, got {capacity}"));
        }
        if s.set_capacity(CarrierId(carrier), capacity) {
            JcaStatus::Ok
        } else {
            fail(JcaStatus::NotFound, format!("no carrier {carrier}"))
        }
    })
}

/// Sets the bid decay from `off`, `exp:h1,h2` or `rat:h3`.
///
/// # Safety
/// `s` must be a live scenario handle and `policy` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn jca_scenario_set_decay(s: *mut JcaScenario, policy: *const c_char) -> JcaStatus {
    guard(|| {
        let s = match scenario_mut(s) {
            Ok(s) => s,
            Err(st) => return st,
        };
        let text = match str_arg(policy) {
            Ok(t) => t,
            Err(st) => return st,
        };
        match text.parse::<DecayPolicy>() {
            Ok(p) => {
                s.settings.decay = p;
                JcaStatus::Ok
            }
            Err(e) => fail(JcaStatus::InvalidArgument, e),
        }
    })
}

/// # Safety
/// `s` must be a live scenario handle.
#[no_mangle]
pub unsafe extern "C" fn jca_scenario_set_delta(s: *mut JcaScenario, delta: f64) -> JcaStatus {
    guard(|| {
        let s = match scenario_mut(s) {
            Ok(s) => s,
            Err(st) => return st,
        };
        if !(delta.is_finite() && delta > 0.0) {
            return fail(JcaStatus::InvalidArgument, format!("delta must be finite and > 0, got {delta}"));
        }
        s.settings.delta = delta;
        JcaStatus::Ok
    })
}

/// # Safety
/// `s` must be a live scenario handle.
#[no_mangle]
pub unsafe extern "C" fn jca_scenario_set_max_iterations(s: *mut JcaScenario, max_iterations: u64) -> JcaStatus {
    guard(|| {
        let s = match scenario_mut(s) {
            Ok(s) => s,
            Err(st) => return st,
        };
        if max_iterations == 0 {
            return fail(JcaStatus::InvalidArgument, "max_iterations must be at least 1");
        }
        s.settings.max_iterations = max_iterations;
        JcaStatus::Ok
    })
}

/// # Safety
/// `s` must be a live scenario handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn jca_scenario_regime(s: *const JcaScenario, out: *mut JcaRegime) -> JcaStatus {
    guard(|| {
        let (Some(s), false) = (s.as_ref(), out.is_null()) else {
            return fail(JcaStatus::NullPointer, "null argument");
        };
        match classify_regime(&s.inner) {
            Ok(r) => {
                *out = match r.regime {
                    Regime::Abundant => JcaRegime::Abundant,
                    Regime::Borderline => JcaRegime::Borderline,
                    Regime::Scarce => JcaRegime::Scarce,
                };
                JcaStatus::Ok
            }
            Err(e) => fail(engine_status(&e), e),
        }
    })
}

/// Runs the distributed iteration to convergence or the iteration cap.
///
/// # Safety
/// `s` must be a live scenario handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn jca_run(s: *const JcaScenario, out: *mut *mut JcaTrace) -> JcaStatus {
    guard(|| {
        let (Some(s), false) = (s.as_ref(), out.is_null()) else {
            return fail(JcaStatus::NullPointer, "null argument");
        };
        match run(&s.inner) {
            Ok(t) => {
                *out = Box::into_raw(Box::new(JcaTrace { inner: t }));
                JcaStatus::Ok
            }
            Err(e) => fail(engine_status(&e), e),
        }
    })
}

/// # Safety
/// `t` must come from [`jca_run`] and not be used again.
#[no_mangle]
pub unsafe extern "C" fn jca_trace_free(t: *mut JcaTrace) {
    if !t.is_null() {
        drop(Box::from_raw(t));
    }
}

unsafe fn with_trace<T>(t: *const JcaTrace, out: *mut T, f: impl FnOnce(&RunTrace) -> Result<T, JcaStatus>) -> JcaStatus {
    guard(|| {
        let (Some(t), false) = (t.as_ref(), out.is_null()) else {
            return fail(JcaStatus::NullPointer, "null argument");
        };
        match f(&t.inner) {
            Ok(v) => {
                *out = v;
                JcaStatus::Ok
            }
            Err(s) => s,
        }
    })
}

/// # Safety
/// `t` must be a live trace handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn jca_trace_converged(t: *const JcaTrace, out: *mut bool) -> JcaStatus {
    with_trace(t, out, |t| Ok(t.converged))
}

/// # Safety
/// `t` must be a live trace handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn jca_trace_iterations(t: *const JcaTrace, out: *mut u64) -> JcaStatus {
    with_trace(t, out, |t| Ok(t.iterations_used))
}

/// Final price of a carrier.
///
/// # Safety
/// `t` must be a live trace handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn jca_trace_price(t: *const JcaTrace, carrier: u32, out: *mut f64) -> JcaStatus {
    with_trace(t, out, |t| {
        t.price(CarrierId(carrier))
            .ok_or_else(|| fail(JcaStatus::NotFound, format!("no carrier {carrier}")))
    })
}

/// Final rate of one UE on one carrier.
///
/// # Safety
/// `t` must be a live trace handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn jca_trace_rate(t: *const JcaTrace, ue: u32, carrier: u32, out: *mut f64) -> JcaStatus {
    with_trace(t, out, |t| {
        t.allocation
            .get(UeId(ue), CarrierId(carrier))
            .ok_or_else(|| fail(JcaStatus::NotFound, format!("UE {ue} has no rate on carrier {carrier}")))
    })
}

/// Final total rate of one UE across carriers.
///
/// # Safety
/// `t` must be a live trace handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn jca_trace_total_rate(t: *const JcaTrace, ue: u32, out: *mut f64) -> JcaStatus {
    with_trace(t, out, |t| {
        t.allocation
            .totals()
            .get(&UeId(ue))
            .copied()
            .ok_or_else(|| fail(JcaStatus::NotFound, format!("no UE {ue}")))
    })
}

/// Writes the per-iteration trace CSV.
///
/// # Safety
/// `t` must be a live trace handle and `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn jca_trace_write_csv(t: *const JcaTrace, path: *const c_char) -> JcaStatus {
    guard(|| {
        let Some(t) = t.as_ref() else {
            return fail(JcaStatus::NullPointer, "null trace");
        };
        let path = match str_arg(path) {
            Ok(p) => p,
            Err(s) => return s,
        };
        match emit_trace(&t.inner, path) {
            Ok(()) => JcaStatus::Ok,
            Err(e @ TraceIoError::Io(_)) => fail(JcaStatus::IoError, e),
            Err(e) => fail(JcaStatus::EngineError, e),
        }
    })
}

fn utility(kind: JcaUtilityKind, p1: f64, p2: f64) -> Result<UtilityFunction, JcaStatus> {
    let u = match kind {
        JcaUtilityKind::Sigmoidal => UtilityFunction::sigmoidal(p1, p2),
        JcaUtilityKind::Logarithmic => UtilityFunction::logarithmic(p1, p2),
    };
    u.map_err(|e| fail(JcaStatus::InvalidArgument, e))
}

/// Normalized utility `U(r)`.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn jca_utility_evaluate(kind: JcaUtilityKind, p1: f64, p2: f64, r: f64, out: *mut f64) -> JcaStatus {
    guard(|| {
        if out.is_null() {
            return fail(JcaStatus::NullPointer, "null output pointer");
        }
        let u = match utility(kind, p1, p2) {
            Ok(u) => u,
            Err(s) => return s,
        };
        match Rate::new(r) {
            Ok(r) => {
                *out = u.evaluate(r);
                JcaStatus::Ok
            }
            Err(e) => fail(JcaStatus::InvalidArgument, e),
        }
    })
}

/// Rate at which the log-utility slope equals `price`, clamped to `[1e-6, r_cap]`.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn jca_utility_inverse_log_slope(
    kind: JcaUtilityKind,
    p1: f64,
    p2: f64,
    price: f64,
    r_cap: f64,
    out: *mut f64,
) -> JcaStatus {
    guard(|| {
        if out.is_null() {
            return fail(JcaStatus::NullPointer, "null output pointer");
        }
        let u = match utility(kind, p1, p2) {
            Ok(u) => u,
            Err(s) => return s,
        };
        match u.inverse_log_slope(price, r_cap, jca_core::utility::DEFAULT_TOL) {
            Ok(r) => {
                *out = r.value();
                JcaStatus::Ok
            }
            Err(e) => fail(JcaStatus::InvalidArgument, e),
        }
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn jca_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}
