//! C interface to the simulator: opaque handles, integer status codes,
//! UTF-8 strings the caller releases with `sdl_string_free`.
//!
//! Conventions, mirrored in the generated header:
//! - Every fallible call returns an [`SdlStatus`]; `SDL_STATUS_OK` is 0.
//! - On failure, `sdl_last_error_message` returns a thread-local message
//!   describing the most recent error on the calling thread.
//! - Out-parameters are written only on success.
//! - Handles are created and released by exactly one matching pair of
//!   `*_new`/`*_from_*` and `*_free` calls; `free` functions accept null.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe, UnwindSafe};
use std::slice;

use securedl::aggregation::{coordinate_median, krum, mean, trimmed_mean};
use securedl::sim::{csv_string, json_string, run, RunOutput, SimConfig};
use securedl::Error;

/// Status code of every fallible call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SdlStatus {
    Ok = 0,
    /// A required pointer argument was null.
    NullArgument = 1,
    /// A string argument was not valid UTF-8.
    Utf8Error = 2,
    /// A parameter or configuration value is out of contract.
    InvalidArgument = 3,
    /// A value does not fit the fixed-point encoding.
    RangeError = 4,
    /// The secure protocol itself failed.
    ProtocolError = 5,
    /// Shared vectors disagree on party count or dimension.
    ShareMismatch = 6,
    /// The preprocessing material ran out.
    TapeExhausted = 7,
    IoError = 8,
    /// Configuration or manifest JSON could not be parsed or produced.
    JsonError = 9,
    /// A panic was caught at the boundary; the handle state is still
    /// valid but the call did nothing.
    Panic = 10,
}

/// Opaque simulation configuration.
pub struct SdlConfig {
    inner: SimConfig,
}

/// Opaque result of one finished simulation.
pub struct SdlRun {
    output: RunOutput,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("NUL stripped");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn fail(e: &Error) -> SdlStatus {
    set_error(e.to_string());
    match e {
        Error::Config(_) | Error::Parse(_) => SdlStatus::InvalidArgument,
        Error::Range { .. } => SdlStatus::RangeError,
        Error::Protocol(_) => SdlStatus::ProtocolError,
        Error::ShareMismatch(_) => SdlStatus::ShareMismatch,
        Error::TapeExhausted { .. } => SdlStatus::TapeExhausted,
        Error::Io(_) => SdlStatus::IoError,
        Error::Json(_) => SdlStatus::JsonError,
    }
}

fn null_argument(what: &str) -> SdlStatus {
    set_error(format!("{what} must not be null"));
    SdlStatus::NullArgument
}

/// Runs `f` with panics converted to [`SdlStatus::Panic`].
fn guarded<F: FnOnce() -> SdlStatus + UnwindSafe>(f: F) -> SdlStatus {
    catch_unwind(f).unwrap_or_else(|p| {
        let msg = p
            .downcast_ref::<&str>()
            .map(|s| s.to_string())
            .or_else(|| p.downcast_ref::<String>().cloned())
            .unwrap_or_else(|| "panic at the C boundary".into());
        set_error(msg);
        SdlStatus::Panic
    })
}

/// Hands `s` to the caller as a malloc-style C string.
fn give_string(s: String) -> *mut c_char {
    CString::new(s.replace('\0', " "))
        .expect("NUL stripped")
        .into_raw()
}

/// Library version as a static string; do not free.
#[no_mangle]
pub extern "C" fn sdl_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Message of the most recent error on this thread, or null if none.
/// Valid until the next failing call on the same thread; do not free.
#[no_mangle]
pub extern "C" fn sdl_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(std::ptr::null(), |c| c.as_ptr()))
}

/// Releases a string returned by this library. Null is a no-op.
///
/// # Safety
/// `s` must have been returned by a function of this library and not
/// already freed.
#[no_mangle]
pub unsafe extern "C" fn sdl_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(unsafe { CString::from_raw(s) });
    }
}

/// Creates a configuration with the library defaults.
///
/// # Safety
/// `out` must point to writable memory for one pointer.
#[no_mangle]
pub unsafe extern "C" fn sdl_config_new(out: *mut *mut SdlConfig) -> SdlStatus {
    if out.is_null() {
        return null_argument("out");
    }
    let cfg = Box::new(SdlConfig {
        inner: SimConfig::default(),
    });
    unsafe { *out = Box::into_raw(cfg) };
    SdlStatus::Ok
}

/// Parses and validates a JSON configuration. Fields left out of the
/// JSON take their defaults.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` must point to writable
/// memory for one pointer.
#[no_mangle]
pub unsafe extern "C" fn sdl_config_from_json(
    json: *const c_char,
    out: *mut *mut SdlConfig,
) -> SdlStatus {
    if json.is_null() {
        return null_argument("json");
    }
    if out.is_null() {
        return null_argument("out");
    }
    let text = match unsafe { CStr::from_ptr(json) }.to_str() {
        Ok(t) => t,
        Err(e) => {
            set_error(format!("configuration JSON is not UTF-8: {e}"));
            return SdlStatus::Utf8Error;
        }
    };
    let inner: SimConfig = match serde_json::from_str(text) {
        Ok(cfg) => cfg,
        Err(e) => return fail(&Error::Json(e)),
    };
    if let Err(e) = inner.validate() {
        return fail(&e);
    }
    unsafe { *out = Box::into_raw(Box::new(SdlConfig { inner })) };
    SdlStatus::Ok
}

/// Serializes the configuration, including every defaulted field.
///
/// # Safety
/// `cfg` must be a live configuration handle; `out` must point to
/// writable memory for one pointer.
#[no_mangle]
pub unsafe extern "C" fn sdl_config_to_json(
    cfg: *const SdlConfig,
    out: *mut *mut c_char,
) -> SdlStatus {
    if cfg.is_null() {
        return null_argument("cfg");
    }
    if out.is_null() {
        return null_argument("out");
    }
    match serde_json::to_string_pretty(&unsafe { &*cfg }.inner) {
        Ok(s) => {
            unsafe { *out = give_string(s) };
            SdlStatus::Ok
        }
        Err(e) => fail(&Error::Json(e)),
    }
}

/// Releases a configuration handle. Null is a no-op.
///
/// # Safety
/// `cfg` must have come from this library and not already be freed.
#[no_mangle]
pub unsafe extern "C" fn sdl_config_free(cfg: *mut SdlConfig) {
    if !cfg.is_null() {
        drop(unsafe { Box::from_raw(cfg) });
    }
}

/// Runs one full simulation under `cfg`. Blocking; desk-scale runs take
/// seconds to minutes depending on the rule and round count.
///
/// # Safety
/// `cfg` must be a live configuration handle; `out` must point to
/// writable memory for one pointer.
#[no_mangle]
pub unsafe extern "C" fn sdl_run_new(cfg: *const SdlConfig, out: *mut *mut SdlRun) -> SdlStatus {
    if cfg.is_null() {
        return null_argument("cfg");
    }
    if out.is_null() {
        return null_argument("out");
    }
    let inner = unsafe { &*cfg }.inner.clone();
    guarded(AssertUnwindSafe(move || match run(&inner) {
        Ok(output) => {
            unsafe { *out = Box::into_raw(Box::new(SdlRun { output })) };
            SdlStatus::Ok
        }
        Err(e) => fail(&e),
    }))
}

/// Number of completed rounds.
///
/// # Safety
/// `run` must be a live run handle; `out` must point to writable memory
/// for one `size_t`.
#[no_mangle]
pub unsafe extern "C" fn sdl_run_round_count(run: *const SdlRun, out: *mut usize) -> SdlStatus {
    if run.is_null() {
        return null_argument("run");
    }
    if out.is_null() {
        return null_argument("out");
    }
    unsafe { *out = (*run).output.rounds.len() };
    SdlStatus::Ok
}

/// Mean honest test accuracy after the final round.
///
/// # Safety
/// `run` must be a live run handle; `out` must point to writable memory
/// for one `double`.
#[no_mangle]
pub unsafe extern "C" fn sdl_run_final_accuracy(run: *const SdlRun, out: *mut f64) -> SdlStatus {
    if run.is_null() {
        return null_argument("run");
    }
    if out.is_null() {
        return null_argument("out");
    }
    unsafe { *out = (*run).output.final_metrics().mean_acc };
    SdlStatus::Ok
}

/// Per-round metrics as CSV, one header line plus one line per round.
///
/// # Safety
/// `run` must be a live run handle; `out` must point to writable memory
/// for one pointer.
#[no_mangle]
pub unsafe extern "C" fn sdl_run_metrics_csv(
    run: *const SdlRun,
    out: *mut *mut c_char,
) -> SdlStatus {
    if run.is_null() {
        return null_argument("run");
    }
    if out.is_null() {
        return null_argument("out");
    }
    unsafe { *out = give_string(csv_string(&(*run).output.rounds)) };
    SdlStatus::Ok
}

/// Run manifest as JSON: full configuration, seed, build id, and the
/// final round's metrics.
///
/// # Safety
/// `run` must be a live run handle; `out` must point to writable memory
/// for one pointer.
#[no_mangle]
pub unsafe extern "C" fn sdl_run_manifest_json(
    run: *const SdlRun,
    out: *mut *mut c_char,
) -> SdlStatus {
    if run.is_null() {
        return null_argument("run");
    }
    if out.is_null() {
        return null_argument("out");
    }
    match json_string(&unsafe { &*run }.output) {
        Ok(s) => {
            unsafe { *out = give_string(s) };
            SdlStatus::Ok
        }
        Err(e) => fail(&e),
    }
}

/// Releases a run handle. Null is a no-op.
///
/// # Safety
/// `run` must have come from `sdl_run_new` and not already be freed.
#[no_mangle]
pub unsafe extern "C" fn sdl_run_free(run: *mut SdlRun) {
    if !run.is_null() {
        drop(unsafe { Box::from_raw(run) });
    }
}

/// Plaintext aggregation rule for [`sdl_aggregate`].
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SdlAggregateRule {
    /// Coordinatewise mean; `robustness` is ignored.
    Mean = 0,
    /// Krum selection tolerating `robustness` Byzantine updates.
    Krum = 1,
    /// Coordinatewise median; `robustness` is ignored.
    CoordinateMedian = 2,
    /// Coordinatewise mean after dropping the `robustness` lowest and
    /// highest values per coordinate.
    TrimmedMean = 3,
}

/// Aggregates `n` updates of dimension `d`, laid out row-major in
/// `updates`, into `out`.
///
/// # Safety
/// `updates` must point to `n * d` readable doubles and `out` to `d`
/// writable doubles.
#[no_mangle]
pub unsafe extern "C" fn sdl_aggregate(
    rule: SdlAggregateRule,
    updates: *const f64,
    n: usize,
    d: usize,
    robustness: usize,
    out: *mut f64,
) -> SdlStatus {
    if updates.is_null() {
        return null_argument("updates");
    }
    if out.is_null() {
        return null_argument("out");
    }
    if n == 0 || d == 0 {
        set_error(format!(
            "need at least one update and one coordinate, got n={n}, d={d}"
        ));
        return SdlStatus::InvalidArgument;
    }
    let flat = unsafe { slice::from_raw_parts(updates, n * d) };
    let rows: Vec<Vec<f64>> = flat.chunks_exact(d).map(<[f64]>::to_vec).collect();
    guarded(AssertUnwindSafe(move || {
        let result = match rule {
            SdlAggregateRule::Mean => mean(&rows),
            SdlAggregateRule::Krum => krum(&rows, robustness),
            SdlAggregateRule::CoordinateMedian => coordinate_median(&rows),
            SdlAggregateRule::TrimmedMean => trimmed_mean(&rows, robustness),
        };
        match result {
            Ok(v) => {
                unsafe { slice::from_raw_parts_mut(out, d) }.copy_from_slice(&v);
                SdlStatus::Ok
            }
            Err(e) => fail(&e),
        }
    }))
}
