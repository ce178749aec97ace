//! C interface to `supermode-lab`.
//!
//! Every function returns an [`SmlStatus`]; results come back through out
//! pointers. Handles are opaque and owned by the caller, who releases them
//! with the matching `*_free`. After a failure, [`sml_last_error`] describes
//! it on the calling thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use supermode_lab::config::{parse_config, parse_config_file, ConfigError, RunConfig};
use supermode_lab::run::{run, RunOutput};
use supermode_lab::squeezing::{count_below, quadrature_variance, Quadrature};

/// Outcome of a call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SmlStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    Io = 3,
    Config = 4,
    Numeric = 5,
    /// The report holds no such result; add the analysis to the config.
    MissingResult = 6,
    BufferTooSmall = 7,
    Panic = 8,
}

/// Parsed run configuration.
pub struct SmlConfig(RunConfig);

/// Completed run: the report and the supermode basis it was computed from.
pub struct SmlReport(RunOutput);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: impl Into<String>) {
    let text = message.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(text).ok());
}

fn fail(status: SmlStatus, message: impl Into<String>) -> SmlStatus {
    set_error(message);
    status
}

/// Runs `body`, turning a panic into [`SmlStatus::Panic`].
fn guard(body: impl FnOnce() -> SmlStatus) -> SmlStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(status) => status,
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            fail(SmlStatus::Panic, format!("internal error: {msg}"))
        }
    }
}

unsafe fn read_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, SmlStatus> {
    if p.is_null() {
        return Err(fail(SmlStatus::NullArgument, format!("{what} is NULL")));
    }
    CStr::from_ptr(p).to_str().map_err(|_| fail(SmlStatus::InvalidUtf8, format!("{what} is not valid UTF-8")))
}

fn config_status(e: &ConfigError) -> SmlStatus {
    match e {
        ConfigError::Io { .. } => SmlStatus::Io,
        _ => SmlStatus::Config,
    }
}

fn store_config(result: Result<RunConfig, ConfigError>, out: *mut *mut SmlConfig) -> SmlStatus {
    match result {
        Ok(c) => {
            unsafe { *out = Box::into_raw(Box::new(SmlConfig(c))) };
            SmlStatus::Ok
        }
        Err(e) => fail(config_status(&e), e.to_string()),
    }
}

/// Message for the last failed call on this thread, or NULL. The pointer
/// stays valid until the next call into this library from the same thread.
#[no_mangle]
pub extern "C" fn sml_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn sml_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Parses a JSON config held in memory.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn sml_config_from_json(json: *const c_char, out: *mut *mut SmlConfig) -> SmlStatus {
    guard(|| {
        if out.is_null() {
            return fail(SmlStatus::NullArgument, "out is NULL");
        }
        match read_str(json, "json") {
            Ok(text) => store_config(parse_config(text), out),
            Err(s) => s,
        }
    })
}

/// Parses a JSON config file.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn sml_config_from_file(path: *const c_char, out: *mut *mut SmlConfig) -> SmlStatus {
    guard(|| {
        if out.is_null() {
            return fail(SmlStatus::NullArgument, "out is NULL");
        }
        match read_str(path, "path") {
            Ok(p) => store_config(parse_config_file(Path::new(p)), out),
            Err(s) => s,
        }
    })
}

/// Replaces the scale factor of the config (must be at least 1).
///
/// # Safety
/// `config` must come from `sml_config_from_*` and not be freed.
#[no_mangle]
pub unsafe extern "C" fn sml_config_set_kappa(config: *mut SmlConfig, kappa: f64) -> SmlStatus {
    guard(|| {
        let Some(c) = config.as_mut() else { return fail(SmlStatus::NullArgument, "config is NULL") };
        if !(kappa >= 1.0 && kappa.is_finite()) {
            return fail(SmlStatus::Config, format!("kappa must be >= 1, got {kappa}"));
        }
        c.0.numerics.kappa = Some(kappa);
        SmlStatus::Ok
    })
}

/// # Safety
/// `config` must be NULL or come from `sml_config_from_*`, freed once.
#[no_mangle]
pub unsafe extern "C" fn sml_config_free(config: *mut SmlConfig) {
    if !config.is_null() {
        drop(Box::from_raw(config));
    }
}

/// Runs every analysis of the config.
///
/// # Safety
/// `config` must be a live config handle and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn sml_run(config: *const SmlConfig, out: *mut *mut SmlReport) -> SmlStatus {
    guard(|| {
        let Some(c) = config.as_ref() else { return fail(SmlStatus::NullArgument, "config is NULL") };
        if out.is_null() {
            return fail(SmlStatus::NullArgument, "out is NULL");
        }
        match run(&c.0) {
            Ok(o) => {
                *out = Box::into_raw(Box::new(SmlReport(o)));
                SmlStatus::Ok
            }
            Err(e) => {
                let status = if e.is_config_error() { SmlStatus::Config } else { SmlStatus::Numeric };
                fail(status, e.to_string())
            }
        }
    })
}

/// # Safety
/// `report` must be NULL or come from `sml_run`, freed once.
#[no_mangle]
pub unsafe extern "C" fn sml_report_free(report: *mut SmlReport) {
    if !report.is_null() {
        drop(Box::from_raw(report));
    }
}

unsafe fn with_report(report: *const SmlReport, body: impl FnOnce(&RunOutput) -> SmlStatus) -> SmlStatus {
    guard(|| match report.as_ref() {
        Some(r) => body(&r.0),
        None => fail(SmlStatus::NullArgument, "report is NULL"),
    })
}

/// Leading eigenvalue of the run. Needs a basis (any analysis except the
/// length sweep).
///
/// # Safety
/// `report` must be a live report handle and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn sml_report_lambda0(report: *const SmlReport, out: *mut f64) -> SmlStatus {
    with_report(report, |r| {
        if out.is_null() {
            return fail(SmlStatus::NullArgument, "out is NULL");
        }
        match &r.basis {
            Some(b) => {
                *out = b.lambda0();
                SmlStatus::Ok
            }
            None => fail(SmlStatus::MissingResult, "the run computed no supermodes"),
        }
    })
}

/// Copies the significant eigenvalues, largest magnitude first. `len`
/// receives the count; with `buffer` NULL only the count is returned.
///
/// # Safety
/// `buffer` must be NULL or hold `capacity` doubles; `len` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sml_report_eigenvalues(
    report: *const SmlReport,
    buffer: *mut f64,
    capacity: usize,
    len: *mut usize,
) -> SmlStatus {
    with_report(report, |r| {
        if len.is_null() {
            return fail(SmlStatus::NullArgument, "len is NULL");
        }
        let Some(b) = &r.basis else { return fail(SmlStatus::MissingResult, "the run computed no supermodes") };
        let values = &b.eigenvalues[..b.n_significant];
        *len = values.len();
        if buffer.is_null() {
            return SmlStatus::Ok;
        }
        if capacity < values.len() {
            return fail(SmlStatus::BufferTooSmall, format!("need {} doubles, got {capacity}", values.len()));
        }
        ptr::copy_nonoverlapping(values.as_ptr(), buffer, values.len());
        SmlStatus::Ok
    })
}

/// Threshold irradiance (W/m²) and average power (W). Needs the threshold
/// analysis in the config. Either out pointer may be NULL.
///
/// # Safety
/// `report` must be a live report handle; out pointers NULL or writable.
#[no_mangle]
pub unsafe extern "C" fn sml_report_threshold(report: *const SmlReport, irradiance: *mut f64, power: *mut f64) -> SmlStatus {
    with_report(report, |r| {
        let Some(t) = &r.report.threshold else {
            return fail(SmlStatus::MissingResult, "the config has no threshold analysis");
        };
        if !irradiance.is_null() {
            *irradiance = t.report.p_thr;
        }
        if !power.is_null() {
            *power = t.report.power_thr;
        }
        SmlStatus::Ok
    })
}

/// Number of supermodes squeezed below `bound_db` (negative) at pump ratio
/// `r` and noise frequency `w` (in units of the cavity linewidth).
///
/// # Safety
/// `report` must be a live report handle and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn sml_report_squeezed_count(
    report: *const SmlReport,
    r: f64,
    w: f64,
    bound_db: f64,
    out: *mut usize,
) -> SmlStatus {
    with_report(report, |rep| {
        if out.is_null() {
            return fail(SmlStatus::NullArgument, "out is NULL");
        }
        let Some(b) = &rep.basis else { return fail(SmlStatus::MissingResult, "the run computed no supermodes") };
        match count_below(&b.ratios(), r, w, bound_db) {
            Ok(n) => {
                *out = n;
                SmlStatus::Ok
            }
            Err(e) => fail(SmlStatus::Config, e.to_string()),
        }
    })
}

/// The full report as pretty-printed JSON. Release with [`sml_string_free`].
///
/// # Safety
/// `report` must be a live report handle and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn sml_report_json(report: *const SmlReport, out: *mut *mut c_char) -> SmlStatus {
    with_report(report, |r| {
        if out.is_null() {
            return fail(SmlStatus::NullArgument, "out is NULL");
        }
        match serde_json::to_string_pretty(&r.report).map(CString::new) {
            Ok(Ok(s)) => {
                *out = s.into_raw();
                SmlStatus::Ok
            }
            Ok(Err(e)) => fail(SmlStatus::Panic, e.to_string()),
            Err(e) => fail(SmlStatus::Numeric, e.to_string()),
        }
    })
}

/// # Safety
/// `s` must be NULL or a string returned by this library, freed once.
#[no_mangle]
pub unsafe extern "C" fn sml_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Noise variance of one supermode relative to shot noise. `lam_ratio` is
/// `Λ_k/Λ₀`; `squeezed_quadrature` nonzero selects the quadrature measured
/// with the LO shifted by π/2.
///
/// # Safety
/// `out` must be a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn sml_quadrature_variance(
    lam_ratio: f64,
    r: f64,
    w: f64,
    squeezed_quadrature: bool,
    out: *mut f64,
) -> SmlStatus {
    guard(|| {
        if out.is_null() {
            return fail(SmlStatus::NullArgument, "out is NULL");
        }
        let q = if squeezed_quadrature { Quadrature::Minus } else { Quadrature::Plus };
        match quadrature_variance(lam_ratio, r, w, q) {
            Ok(v) => {
                *out = v;
                SmlStatus::Ok
            }
            Err(e) => fail(SmlStatus::Config, e.to_string()),
        }
    })
}
