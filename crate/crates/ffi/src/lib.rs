//! C ABI over the keyext library.
//!
//! Handles are opaque and owned by the caller, who frees each with its
//! `_free` function. Every call returns a [`KeyextStatus`]; on failure the
//! message is kept per thread and read with [`keyext_last_error`]. Strings
//! in are NUL-terminated UTF-8. Strings out are copied into caller buffers
//! with the two-call pattern: a call with a short buffer reports the needed
//! size and returns `KEYEXT_STATUS_BUFFER_TOO_SMALL`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use keyext::bounds::{efx_classical_bound, BoundParams};
use keyext::ciphers::{Construction, ConstructionKind};
use keyext::harness::{random_instance, run_attack, verify, ExperimentConfig, ExperimentReport, VerifyOptions};
use keyext::Error;

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum KeyextStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Config = 3,
    QubitCap = 4,
    Unsupported = 5,
    BufferTooSmall = 6,
    Io = 7,
    /// A panic was caught at the boundary.
    Internal = 8,
}

/// A keyed construction instance.
pub struct KeyextConstruction {
    inner: Construction,
}

/// A validated experiment config.
pub struct KeyextExperiment {
    config: ExperimentConfig,
}

/// The report of an experiment run.
pub struct KeyextReport {
    report: ExperimentReport,
    json: String,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: impl Into<String>) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg.into());
}

fn status_of(err: &Error) -> KeyextStatus {
    match err {
        Error::InvalidParameter { .. } | Error::Components { .. } | Error::SizeMismatch(_) | Error::Unreachable(_) => {
            KeyextStatus::InvalidArgument
        }
        Error::Config { .. } | Error::Schema(_) => KeyextStatus::Config,
        Error::QubitCap { .. } => KeyextStatus::QubitCap,
        Error::Unsupported(_) => KeyextStatus::Unsupported,
        Error::Io(_) | Error::Json(_) => KeyextStatus::Io,
        Error::UnknownRegister(_) | Error::DegenerateState => KeyextStatus::Internal,
    }
}

/// Runs `body`, mapping errors and panics to a status.
fn guard(body: impl FnOnce() -> Result<(), KeyextStatus>) -> KeyextStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => {
            set_error("");
            KeyextStatus::Ok
        }
        Ok(Err(status)) => status,
        Err(_) => {
            set_error("panic inside keyext");
            KeyextStatus::Internal
        }
    }
}

fn fail(err: Error) -> KeyextStatus {
    set_error(err.to_string());
    status_of(&err)
}

fn null(name: &str) -> KeyextStatus {
    set_error(format!("`{name}` is null"));
    KeyextStatus::NullPointer
}

unsafe fn read_str<'a>(p: *const c_char, name: &str) -> Result<&'a str, KeyextStatus> {
    if p.is_null() {
        return Err(null(name));
    }
    CStr::from_ptr(p).to_str().map_err(|_| {
        set_error(format!("`{name}` is not UTF-8"));
        KeyextStatus::InvalidArgument
    })
}

unsafe fn write_out<T>(out: *mut T, value: T, name: &str) -> Result<(), KeyextStatus> {
    if out.is_null() {
        return Err(null(name));
    }
    out.write(value);
    Ok(())
}

/// Copies `s` and a NUL into `buf`; `needed` receives `len(s) + 1`.
unsafe fn copy_str(s: &str, buf: *mut c_char, len: usize, needed: *mut usize) -> Result<(), KeyextStatus> {
    if !needed.is_null() {
        needed.write(s.len() + 1);
    }
    if buf.is_null() || len < s.len() + 1 {
        return Err(KeyextStatus::BufferTooSmall);
    }
    ptr::copy_nonoverlapping(s.as_ptr(), buf as *mut u8, s.len());
    buf.add(s.len()).write(0);
    Ok(())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn keyext_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Copies the calling thread's last error message into `buf`. Leaves the
/// message in place, so a size query can precede the read.
///
/// # Safety
/// `buf` must be writable for `len` bytes; `needed` may be null.
#[no_mangle]
pub unsafe extern "C" fn keyext_last_error(buf: *mut c_char, len: usize, needed: *mut usize) -> KeyextStatus {
    let msg = LAST_ERROR.with(|e| e.borrow().clone());
    match copy_str(&msg, buf, len, needed) {
        Ok(()) => KeyextStatus::Ok,
        Err(status) => status,
    }
}

/// A random instance of `kind` (e.g. "EFX", "TWO_XOR", "EM") with ideal
/// ciphers, deterministic in `seed`.
///
/// # Safety
/// `kind` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn keyext_construction_random(
    kind: *const c_char,
    n: u32,
    kappa: u32,
    seed: u64,
    out: *mut *mut KeyextConstruction,
) -> KeyextStatus {
    guard(|| {
        let kind: ConstructionKind = read_str(kind, "kind")?.parse().map_err(fail)?;
        let inner = random_instance(kind, n, kappa, seed).map_err(fail)?;
        write_out(out, Box::into_raw(Box::new(KeyextConstruction { inner })), "out")
    })
}

/// One online encryption query.
///
/// # Safety
/// `handle` must come from `keyext_construction_random`; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn keyext_construction_encrypt(
    handle: *const KeyextConstruction,
    x: u32,
    out: *mut u32,
) -> KeyextStatus {
    guard(|| {
        let h = handle.as_ref().ok_or_else(|| null("handle"))?;
        let y = h.inner.encrypt(x).map_err(fail)?;
        write_out(out, y, "out")
    })
}

/// Online queries made so far, forward plus backward.
///
/// # Safety
/// `handle` must be a live construction handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn keyext_construction_queries(handle: *const KeyextConstruction, out: *mut u64) -> KeyextStatus {
    guard(|| {
        let h = handle.as_ref().ok_or_else(|| null("handle"))?;
        write_out(out, h.inner.online_forward() + h.inner.online_backward(), "out")
    })
}

/// # Safety
/// `handle` must be null or come from `keyext_construction_random`, and
/// must not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn keyext_construction_free(handle: *mut KeyextConstruction) {
    if !handle.is_null() {
        drop(Box::from_raw(handle));
    }
}

/// Parses and validates a TOML experiment config.
///
/// # Safety
/// `toml` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn keyext_experiment_from_toml(
    toml: *const c_char,
    out: *mut *mut KeyextExperiment,
) -> KeyextStatus {
    guard(|| {
        let config = ExperimentConfig::from_toml(read_str(toml, "toml")?).map_err(fail)?;
        write_out(out, Box::into_raw(Box::new(KeyextExperiment { config })), "out")
    })
}

/// Overrides the base seed of an experiment.
///
/// # Safety
/// `handle` must be a live experiment handle.
#[no_mangle]
pub unsafe extern "C" fn keyext_experiment_set_seed(handle: *mut KeyextExperiment, seed: u64) -> KeyextStatus {
    guard(|| {
        let h = handle.as_mut().ok_or_else(|| null("handle"))?;
        h.config.seed = seed;
        Ok(())
    })
}

/// Runs every trial of the experiment.
///
/// # Safety
/// `handle` must be a live experiment handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn keyext_experiment_run(handle: *const KeyextExperiment, out: *mut *mut KeyextReport) -> KeyextStatus {
    guard(|| {
        let h = handle.as_ref().ok_or_else(|| null("handle"))?;
        let report = run_attack(&h.config).map_err(fail)?;
        let json = report.to_json().map_err(fail)?;
        write_out(out, Box::into_raw(Box::new(KeyextReport { report, json })), "out")
    })
}

/// # Safety
/// `handle` must be null or a live experiment handle, unused afterwards.
#[no_mangle]
pub unsafe extern "C" fn keyext_experiment_free(handle: *mut KeyextExperiment) {
    if !handle.is_null() {
        drop(Box::from_raw(handle));
    }
}

/// Trial and success counts of a report.
///
/// # Safety
/// `handle` must be a live report handle; both outputs writable.
#[no_mangle]
pub unsafe extern "C" fn keyext_report_counts(
    handle: *const KeyextReport,
    trials: *mut u64,
    successes: *mut u64,
) -> KeyextStatus {
    guard(|| {
        let h = handle.as_ref().ok_or_else(|| null("handle"))?;
        write_out(trials, h.report.summary.trials, "trials")?;
        write_out(successes, h.report.summary.successes, "successes")
    })
}

/// Copies the JSON report into `buf`.
///
/// # Safety
/// `handle` must be a live report handle; `buf` writable for `len` bytes;
/// `needed` may be null.
#[no_mangle]
pub unsafe extern "C" fn keyext_report_json(
    handle: *const KeyextReport,
    buf: *mut c_char,
    len: usize,
    needed: *mut usize,
) -> KeyextStatus {
    guard(|| {
        let h = handle.as_ref().ok_or_else(|| null("handle"))?;
        copy_str(&h.json, buf, len, needed).inspect_err(|_| {
            set_error(format!("buffer of {len} bytes, {} needed", h.json.len() + 1));
        })
    })
}

/// # Safety
/// `handle` must be null or a live report handle, unused afterwards.
#[no_mangle]
pub unsafe extern "C" fn keyext_report_free(handle: *mut KeyextReport) {
    if !handle.is_null() {
        drop(Box::from_raw(handle));
    }
}

/// Both classical EFX advantage bounds at (n, κ, D, T).
///
/// # Safety
/// `small_d` and `any_d` must be writable.
#[no_mangle]
pub unsafe extern "C" fn keyext_efx_bound(
    n: u32,
    kappa: u32,
    d: f64,
    t: f64,
    small_d: *mut f64,
    any_d: *mut f64,
) -> KeyextStatus {
    guard(|| {
        let b = efx_classical_bound(&BoundParams::new(n, kappa, d, t)).map_err(fail)?;
        write_out(small_d, b.small_d, "small_d")?;
        write_out(any_d, b.any_d, "any_d")
    })
}

/// Runs every verification suite; `passed` receives 1 or 0.
///
/// # Safety
/// `passed` must be writable.
#[no_mangle]
pub unsafe extern "C" fn keyext_verify(seed: u64, passed: *mut i32) -> KeyextStatus {
    guard(|| {
        let summary = verify(&[], &VerifyOptions { seed, ..Default::default() }).map_err(fail)?;
        write_out(passed, summary.passed as i32, "passed")
    })
}
