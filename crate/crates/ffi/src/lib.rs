//! C ABI over the qpcd detector.
//!
//! Handles are opaque and owned by the caller, who releases them with the
//! matching `_free` function. Every fallible call returns a [`QpcdStatus`];
//! on failure [`qpcd_last_error`] describes the most recent error on the
//! calling thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use qpcd::config::PipelineConfig;
use qpcd::pipeline::{detect_series, with_thread_limit, DetectReport};
use qpcd::signal::AnnotatedSeries;
use qpcd::transport::{wasserstein_exact, wasserstein_sinkhorn, EmpiricalMeasure, OtConfig};
use qpcd::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QpcdStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    InvalidArgument = 3,
    SeriesTooShort = 4,
    Io = 5,
    Json = 6,
    Internal = 7,
    Panic = 8,
}

/// Pipeline configuration.
pub struct QpcdConfig {
    inner: PipelineConfig,
}

/// Outcome of one detection run.
pub struct QpcdDetection {
    inner: DetectReport,
}

/// Scalar summary of a detection.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct QpcdSummary {
    pub change_detected: bool,
    pub statistic: f64,
    pub threshold: f64,
    /// Window position of the maximum, in embedded points.
    pub argmax_tau: usize,
    pub n_flagged: usize,
    pub n_series: usize,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

fn status_of(err: &Error) -> QpcdStatus {
    match err {
        Error::Stage { source, .. } => status_of(source),
        Error::SeriesTooShort { .. } => QpcdStatus::SeriesTooShort,
        Error::Io { .. } => QpcdStatus::Io,
        Error::Json(_) => QpcdStatus::Json,
        Error::InvalidParameter(_)
        | Error::DimensionMismatch { .. }
        | Error::InvalidMeasure(_)
        | Error::Annotation(_)
        | Error::Csv { .. }
        | Error::Empty(_) => QpcdStatus::InvalidArgument,
        Error::WindowOutOfRange { .. } => QpcdStatus::Internal,
    }
}

struct Failure(QpcdStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(QpcdStatus::NullPointer, format!("{what} is null"))
}

fn invalid(msg: impl Into<String>) -> Failure {
    Failure(QpcdStatus::InvalidArgument, msg.into())
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> QpcdStatus {
    clear_error();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => QpcdStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("panic: {msg}"));
            QpcdStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure(QpcdStatus::InvalidUtf8, format!("{what} is not UTF-8")))
}

unsafe fn slice_arg<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn out_arg<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| null(what))
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

/// Message for the last failed call on this thread, or null. The pointer
/// stays valid until the next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn qpcd_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn qpcd_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Default configuration.
///
/// # Safety
/// `out` must be a valid pointer to writable storage.
#[no_mangle]
pub unsafe extern "C" fn qpcd_config_new(out: *mut *mut QpcdConfig) -> QpcdStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = Box::into_raw(Box::new(QpcdConfig {
            inner: PipelineConfig::default(),
        }));
        Ok(())
    })
}

/// Configuration parsed from JSON; absent keys take their defaults.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn qpcd_config_from_json(json: *const c_char, out: *mut *mut QpcdConfig) -> QpcdStatus {
    guard(|| {
        let text = str_arg(json, "json")?;
        let out = out_arg(out, "out")?;
        let inner = PipelineConfig::from_json(text)?;
        *out = Box::into_raw(Box::new(QpcdConfig { inner }));
        Ok(())
    })
}

/// Applies a `dotted.key=value` override. The configuration is unchanged
/// when the override is rejected.
///
/// # Safety
/// `cfg` must come from this library and `assignment` be NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn qpcd_config_set(cfg: *mut QpcdConfig, assignment: *const c_char) -> QpcdStatus {
    guard(|| {
        let cfg = cfg.as_mut().ok_or_else(|| null("cfg"))?;
        let text = str_arg(assignment, "assignment")?;
        let mut next = cfg.inner.clone();
        next.apply_override(text)?;
        cfg.inner = next;
        Ok(())
    })
}

/// Configuration as JSON; release with [`qpcd_string_free`].
///
/// # Safety
/// `cfg` must come from this library and `out` be writable.
#[no_mangle]
pub unsafe extern "C" fn qpcd_config_to_json(cfg: *const QpcdConfig, out: *mut *mut c_char) -> QpcdStatus {
    guard(|| {
        let cfg = handle(cfg, "cfg")?;
        let out = out_arg(out, "out")?;
        *out = to_c_string(cfg.inner.to_json());
        Ok(())
    })
}

/// # Safety
/// `cfg` must come from this library or be null, and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn qpcd_config_free(cfg: *mut QpcdConfig) {
    if !cfg.is_null() {
        drop(Box::from_raw(cfg));
    }
}

/// Runs the full pipeline on `len` samples recorded at `sample_rate` Hz.
/// `QPCD_THREADS` caps the worker threads as for the command line tool.
///
/// # Safety
/// `cfg` must come from this library, `samples` point to `len` doubles and
/// `out` be writable.
#[no_mangle]
pub unsafe extern "C" fn qpcd_detect(
    cfg: *const QpcdConfig,
    samples: *const f64,
    len: usize,
    sample_rate: f64,
    out: *mut *mut QpcdDetection,
) -> QpcdStatus {
    guard(|| {
        let cfg = handle(cfg, "cfg")?;
        let samples = slice_arg(samples, len, "samples")?;
        let out = out_arg(out, "out")?;
        let series = AnnotatedSeries::new("ffi", samples.to_vec(), sample_rate)?;
        let (inner, _) = with_thread_limit(|| detect_series(&cfg.inner, &series))??;
        *out = Box::into_raw(Box::new(QpcdDetection { inner }));
        Ok(())
    })
}

/// # Safety
/// `det` must come from this library and `out` be writable.
#[no_mangle]
pub unsafe extern "C" fn qpcd_detection_summary(det: *const QpcdDetection, out: *mut QpcdSummary) -> QpcdStatus {
    guard(|| {
        let r = &handle(det, "det")?.inner.result;
        *out_arg(out, "out")? = QpcdSummary {
            change_detected: r.change_detected,
            statistic: r.statistic.value,
            threshold: r.threshold,
            argmax_tau: r.statistic.argmax_tau,
            n_flagged: r.flagged.len(),
            n_series: r.series.values.len(),
        };
        Ok(())
    })
}

/// Half-open sample range `[start, end)` of flagged interval `index`.
///
/// # Safety
/// `det` must come from this library; `start` and `end` must be writable.
#[no_mangle]
pub unsafe extern "C" fn qpcd_detection_flagged(
    det: *const QpcdDetection,
    index: usize,
    start: *mut usize,
    end: *mut usize,
) -> QpcdStatus {
    guard(|| {
        let flagged = &handle(det, "det")?.inner.result.flagged;
        let start = out_arg(start, "start")?;
        let end = out_arg(end, "end")?;
        let &(s, e) = flagged
            .get(index)
            .ok_or_else(|| invalid(format!("flagged index {index} out of range 0..{}", flagged.len())))?;
        *start = s;
        *end = e;
        Ok(())
    })
}

/// Copies up to `cap` series values into `buf` and stores the full length
/// in `total`. Pass `cap = 0` to query the length.
///
/// # Safety
/// `det` must come from this library, `buf` hold `cap` doubles and `total`
/// be writable.
#[no_mangle]
pub unsafe extern "C" fn qpcd_detection_series(
    det: *const QpcdDetection,
    buf: *mut f64,
    cap: usize,
    total: *mut usize,
) -> QpcdStatus {
    guard(|| {
        let values = &handle(det, "det")?.inner.result.series.values;
        *out_arg(total, "total")? = values.len();
        let n = cap.min(values.len());
        if n > 0 {
            if buf.is_null() {
                return Err(null("buf"));
            }
            ptr::copy_nonoverlapping(values.as_ptr(), buf, n);
        }
        Ok(())
    })
}

/// Canonical report JSON, without timings; release with
/// [`qpcd_string_free`].
///
/// # Safety
/// `det` must come from this library and `out` be writable.
#[no_mangle]
pub unsafe extern "C" fn qpcd_detection_to_json(det: *const QpcdDetection, out: *mut *mut c_char) -> QpcdStatus {
    guard(|| {
        let det = handle(det, "det")?;
        let out = out_arg(out, "out")?;
        *out = to_c_string(det.inner.canonical_json());
        Ok(())
    })
}

/// # Safety
/// `det` must come from this library or be null, and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn qpcd_detection_free(det: *mut QpcdDetection) {
    if !det.is_null() {
        drop(Box::from_raw(det));
    }
}

/// `W_p` between uniform measures on `n` and `m` row-major points of
/// dimension `dim`. Exact when `exact` is set, otherwise Sinkhorn with
/// default settings.
///
/// # Safety
/// `x` must point to `n * dim` doubles, `y` to `m * dim` and `out` be
/// writable.
#[no_mangle]
pub unsafe extern "C" fn qpcd_wasserstein(
    x: *const f64,
    n: usize,
    y: *const f64,
    m: usize,
    dim: usize,
    p: f64,
    exact: bool,
    out: *mut f64,
) -> QpcdStatus {
    guard(|| {
        if dim == 0 {
            return Err(invalid("dim must be >= 1"));
        }
        if !(p >= 1.0 && p.is_finite()) {
            return Err(invalid(format!("p must be finite and >= 1, got {p}")));
        }
        let xs = slice_arg(x, n.checked_mul(dim).ok_or_else(|| invalid("n * dim overflows"))?, "x")?;
        let ys = slice_arg(y, m.checked_mul(dim).ok_or_else(|| invalid("m * dim overflows"))?, "y")?;
        let out = out_arg(out, "out")?;
        let a = EmpiricalMeasure::uniform(xs.chunks_exact(dim))?;
        let b = EmpiricalMeasure::uniform(ys.chunks_exact(dim))?;
        let cost = if exact {
            wasserstein_exact(&a, &b, p)?
        } else {
            let cfg = OtConfig { p, ..OtConfig::default() };
            wasserstein_sinkhorn(&a, &b, &cfg)?.cost
        };
        *out = cost.max(0.0).powf(1.0 / p);
        Ok(())
    })
}

fn to_c_string(s: String) -> *mut c_char {
    CString::new(s.replace('\0', " ")).expect("no interior NUL").into_raw()
}

/// # Safety
/// `s` must come from this library or be null, and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn qpcd_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
