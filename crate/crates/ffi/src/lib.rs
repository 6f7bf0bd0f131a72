//! C ABI over the `asso` separation library.
//!
//! Every fallible call returns an [`AssoStatus`]. On failure the message is
//! kept per thread and can be read with [`asso_last_error`]. Handles are
//! opaque; free them with the matching `*_free` function.
//!
//! Sample buffers are copied in and out. A copy-out call fails with
//! `ASSO_STATUS_OUT_OF_RANGE` when the destination is shorter than needed;
//! query the length first.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use asso::{separate, AssoConfig, AssoError, SampledSignal, SeparationResult, StopReason};

/// Status codes. The nonzero library classes match the CLI exit codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AssoStatus {
    Ok = 0,
    NullPointer = 1,
    Usage = 2,
    Io = 3,
    Config = 4,
    Numeric = 5,
    OutOfRange = 6,
    Utf8 = 7,
    Panic = 8,
}

/// Why extraction stopped.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AssoStop {
    BelowThreshold = 0,
    MaxComponents = 1,
    NoPeak = 2,
    EmptyRidge = 3,
    DegenerateWindow = 4,
}

/// Separation settings.
pub struct AssoConfigHandle {
    inner: AssoConfig,
}

/// Output of one separation run.
pub struct AssoResultHandle {
    inner: SeparationResult,
    len: usize,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let mut msg = msg.into();
    msg.retain(|c| c != '\0');
    let c = CString::new(msg).expect("interior nul removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

fn status_of(err: &AssoError) -> AssoStatus {
    match err.exit_code() {
        2 => AssoStatus::Usage,
        3 => AssoStatus::Io,
        4 => AssoStatus::Config,
        _ => AssoStatus::Numeric,
    }
}

struct Fail(AssoStatus, String);

impl From<AssoError> for Fail {
    fn from(e: AssoError) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> AssoStatus {
    clear_error();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => AssoStatus::Ok,
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            AssoStatus::Panic
        }
    }
}

fn null(what: &str) -> Fail {
    Fail(AssoStatus::NullPointer, format!("{what} is null"))
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Fail(AssoStatus::Utf8, format!("{what} is not valid UTF-8")))
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn copy_out(src: &[f64], out: *mut f64, capacity: usize) -> Result<(), Fail> {
    if out.is_null() {
        return Err(null("out"));
    }
    if capacity < src.len() {
        return Err(Fail(
            AssoStatus::OutOfRange,
            format!("buffer holds {capacity} values, {} needed", src.len()),
        ));
    }
    ptr::copy_nonoverlapping(src.as_ptr(), out, src.len());
    Ok(())
}

fn component(res: &AssoResultHandle, k: usize) -> Result<&asso::RecoveredComponent, Fail> {
    res.inner.components.get(k).ok_or_else(|| {
        Fail(
            AssoStatus::OutOfRange,
            format!("component {k} out of range ({} extracted)", res.inner.components.len()),
        )
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn asso_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message for the last failed call on this thread, or NULL.
///
/// The pointer stays valid until the next library call on the same thread.
#[no_mangle]
pub extern "C" fn asso_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Creates a configuration with default settings.
///
/// # Safety
/// `out` must be a valid pointer to writable storage for one handle pointer.
#[no_mangle]
pub unsafe extern "C" fn asso_config_new(out: *mut *mut AssoConfigHandle) -> AssoStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = Box::into_raw(Box::new(AssoConfigHandle { inner: AssoConfig::default() }));
        Ok(())
    })
}

/// Parses a configuration from TOML text.
///
/// # Safety
/// `toml` must be a NUL-terminated string; `out` as in [`asso_config_new`].
#[no_mangle]
pub unsafe extern "C" fn asso_config_from_toml(toml: *const c_char, out: *mut *mut AssoConfigHandle) -> AssoStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let text = str_arg(toml, "toml")?;
        let inner = AssoConfig::from_toml_str(text)?;
        *out = Box::into_raw(Box::new(AssoConfigHandle { inner }));
        Ok(())
    })
}

/// Sets one key, using the same `key=value` syntax as the CLI `--set` flag.
///
/// # Safety
/// `config` must come from this library; `key` and `value` must be
/// NUL-terminated strings.
#[no_mangle]
pub unsafe extern "C" fn asso_config_set(
    config: *mut AssoConfigHandle,
    key: *const c_char,
    value: *const c_char,
) -> AssoStatus {
    guard(|| {
        let cfg = config.as_mut().ok_or_else(|| null("config"))?;
        let key = str_arg(key, "key")?;
        let value = str_arg(value, "value")?;
        let mut next = cfg.inner.clone();
        next.set(key, value)?;
        next.validate()?;
        cfg.inner = next;
        Ok(())
    })
}

/// Releases a configuration. NULL is ignored.
///
/// # Safety
/// `config` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn asso_config_free(config: *mut AssoConfigHandle) {
    if !config.is_null() {
        drop(Box::from_raw(config));
    }
}

/// Separates `len` uniformly sampled values taken at `sample_rate` Hz.
///
/// `config` may be NULL for the defaults. On success `*out` receives a new
/// result handle.
///
/// # Safety
/// `samples` must point to `len` readable doubles; `config` must be NULL or
/// come from this library; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn asso_separate(
    samples: *const f64,
    len: usize,
    sample_rate: f64,
    config: *const AssoConfigHandle,
    out: *mut *mut AssoResultHandle,
) -> AssoStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        if samples.is_null() {
            return Err(null("samples"));
        }
        let default;
        let cfg = match config.as_ref() {
            Some(c) => &c.inner,
            None => {
                default = AssoConfig::default();
                &default
            }
        };
        let data = std::slice::from_raw_parts(samples, len).to_vec();
        let x = SampledSignal::new(data, sample_rate, 0.0)?;
        let inner = separate(&x, cfg)?;
        *out = Box::into_raw(Box::new(AssoResultHandle { inner, len }));
        Ok(())
    })
}

/// Number of input samples; every full-length output has this size.
///
/// # Safety
/// `result` must come from this library.
#[no_mangle]
pub unsafe extern "C" fn asso_result_len(result: *const AssoResultHandle) -> usize {
    result.as_ref().map_or(0, |r| r.len)
}

/// Number of extracted components.
///
/// # Safety
/// `result` must come from this library.
#[no_mangle]
pub unsafe extern "C" fn asso_result_component_count(result: *const AssoResultHandle) -> usize {
    result.as_ref().map_or(0, |r| r.inner.components.len())
}

/// Why extraction stopped.
///
/// # Safety
/// `result` must come from this library; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn asso_result_stop_reason(result: *const AssoResultHandle, out: *mut AssoStop) -> AssoStatus {
    guard(|| {
        let r = handle(result, "result")?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = match r.inner.diagnostics.stop_reason {
            StopReason::BelowThreshold { .. } => AssoStop::BelowThreshold,
            StopReason::MaxComponents => AssoStop::MaxComponents,
            StopReason::NoPeak => AssoStop::NoPeak,
            StopReason::EmptyRidge => AssoStop::EmptyRidge,
            StopReason::DegenerateWindow { .. } => AssoStop::DegenerateWindow,
        };
        Ok(())
    })
}

/// Copies the trend into `out` (capacity `cap`, at least the result length).
///
/// # Safety
/// `result` must come from this library; `out` must hold `cap` doubles.
#[no_mangle]
pub unsafe extern "C" fn asso_result_trend(result: *const AssoResultHandle, out: *mut f64, cap: usize) -> AssoStatus {
    guard(|| copy_out(&handle(result, "result")?.inner.trend, out, cap))
}

/// Copies the residual into `out`.
///
/// # Safety
/// As for [`asso_result_trend`].
#[no_mangle]
pub unsafe extern "C" fn asso_result_residual(
    result: *const AssoResultHandle,
    out: *mut f64,
    cap: usize,
) -> AssoStatus {
    guard(|| copy_out(&handle(result, "result")?.inner.residual, out, cap))
}

/// Copies component `k`, zero outside its support, into `out`.
///
/// # Safety
/// As for [`asso_result_trend`].
#[no_mangle]
pub unsafe extern "C" fn asso_result_component(
    result: *const AssoResultHandle,
    k: usize,
    out: *mut f64,
    cap: usize,
) -> AssoStatus {
    guard(|| {
        let r = handle(result, "result")?;
        let c = component(r, k)?;
        copy_out(&c.zero_extended(r.len), out, cap)
    })
}

/// Support of component `k` as the half-open sample range `[start, end)`.
///
/// # Safety
/// `result` must come from this library; `start` and `end` must be writable.
#[no_mangle]
pub unsafe extern "C" fn asso_result_support(
    result: *const AssoResultHandle,
    k: usize,
    start: *mut usize,
    end: *mut usize,
) -> AssoStatus {
    guard(|| {
        let c = component(handle(result, "result")?, k)?;
        if start.is_null() || end.is_null() {
            return Err(null("start/end"));
        }
        let s = c.ridge.support();
        *start = s.start;
        *end = s.end;
        Ok(())
    })
}

/// Copies the ridge frequency of component `k` (Hz, one value per support
/// sample) into `out`.
///
/// # Safety
/// As for [`asso_result_trend`].
#[no_mangle]
pub unsafe extern "C" fn asso_result_ridge(
    result: *const AssoResultHandle,
    k: usize,
    out: *mut f64,
    cap: usize,
) -> AssoStatus {
    guard(|| copy_out(component(handle(result, "result")?, k)?.ridge.eta(), out, cap))
}

/// Copies the chirp-rate track of component `k` (Hz/s) into `out`.
///
/// # Safety
/// As for [`asso_result_trend`].
#[no_mangle]
pub unsafe extern "C" fn asso_result_chirp_rate(
    result: *const AssoResultHandle,
    k: usize,
    out: *mut f64,
    cap: usize,
) -> AssoStatus {
    guard(|| copy_out(component(handle(result, "result")?, k)?.chirp_track.values(), out, cap))
}

/// Releases a result. NULL is ignored.
///
/// # Safety
/// `result` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn asso_result_free(result: *mut AssoResultHandle) {
    if !result.is_null() {
        drop(Box::from_raw(result));
    }
}
