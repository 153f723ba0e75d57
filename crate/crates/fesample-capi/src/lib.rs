//! C ABI over the `fesample` estimators.
//!
//! Conventions:
//! - Models are opaque handles created by `fes_model_*` constructors and
//!   released with [`fes_model_free`]. A null handle is rejected, never
//!   dereferenced.
//! - Every fallible call returns a [`FesStatus`]; outputs are written through
//!   pointers only on `FES_STATUS_OK`. [`fes_last_error`] returns a
//!   thread-local message describing the most recent failure on this thread.
//! - Panics are caught at the boundary and surface as
//!   `FES_STATUS_INTERNAL_ERROR`; they never unwind into the caller.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use fesample::magnet;
use fesample::meanfield::{variational_free_energy, MeanFieldConfig};
use fesample::model::{exact_free_energy_auto, free_energy_exact_mrf, Model};
use fesample::sampler::{estimate_free_energy, estimate_free_energy_mrf, EstimatorConfig};
use fesample::{io, Error};

/// Status code returned by every fallible entry point.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FesStatus {
    /// Success; outputs are valid.
    Ok = 0,
    /// A required pointer argument was null.
    NullArgument = 1,
    /// A string argument was not valid UTF-8.
    InvalidUtf8 = 2,
    /// File could not be read or written.
    Io = 3,
    /// Input text could not be parsed as a model.
    Parse = 4,
    /// The model or a parameter is structurally invalid.
    InvalidInput = 5,
    /// The request needs an exact enumeration larger than the guard allows.
    TooLarge = 6,
    /// The computation failed (solver or estimator error).
    Failed = 7,
    /// A panic was caught at the boundary; state is unchanged.
    InternalError = 8,
}

/// Opaque model handle (an Ising model or a binary Markov random field).
pub struct FesModel {
    inner: Model,
}

/// Which estimator backs [`fes_estimate`]'s per-sample oracle.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FesBackend {
    /// Exact enumeration on each sampled subset.
    Exact = 0,
    /// Mean-field variational lower bound.
    MeanField = 1,
    /// Cut-decomposition grid maximizer.
    MaxEntGrid = 2,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_last_error(message: &str) {
    let sanitized = message.replace('\0', " ");
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(sanitized).unwrap_or_default();
    });
}

fn status_of(err: &Error) -> FesStatus {
    match err {
        Error::Io(_) => FesStatus::Io,
        Error::Parse(_) | Error::Json(_) | Error::Csv(_) => FesStatus::Parse,
        Error::DimensionMismatch(_)
        | Error::InvalidModel(_)
        | Error::InvalidSubset(_)
        | Error::MarginalOutOfRange { .. }
        | Error::ParameterOutOfRange(_) => FesStatus::InvalidInput,
        Error::EnumerationTooLarge { .. } | Error::GridTooLarge { .. } => FesStatus::TooLarge,
        Error::NotEnoughRepeats { .. } | Error::OracleFailure(_) => FesStatus::Failed,
    }
}

fn fail(err: &Error) -> FesStatus {
    set_last_error(&err.to_string());
    status_of(err)
}

/// Run `body` with panics converted to `InternalError`.
fn guarded<F: FnOnce() -> FesStatus>(body: F) -> FesStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(status) => status,
        Err(_) => {
            set_last_error("internal panic caught at the C boundary");
            FesStatus::InternalError
        }
    }
}

/// # Safety
/// `ptr` must be null or a valid, NUL-terminated C string.
unsafe fn utf8_arg<'a>(ptr: *const c_char) -> Result<&'a str, FesStatus> {
    if ptr.is_null() {
        set_last_error("string argument is null");
        return Err(FesStatus::NullArgument);
    }
    unsafe { CStr::from_ptr(ptr) }.to_str().map_err(|_| {
        set_last_error("string argument is not valid UTF-8");
        FesStatus::InvalidUtf8
    })
}

/// # Safety
/// `handle` must be null or a pointer returned by a `fes_model_*` constructor
/// that has not been freed.
unsafe fn model_arg<'a>(handle: *const FesModel) -> Result<&'a Model, FesStatus> {
    if handle.is_null() {
        set_last_error("model handle is null");
        return Err(FesStatus::NullArgument);
    }
    Ok(unsafe { &(*handle).inner })
}

fn write_out<T>(out: *mut T, value: T) -> FesStatus {
    if out.is_null() {
        set_last_error("output pointer is null");
        return FesStatus::NullArgument;
    }
    unsafe { out.write(value) };
    FesStatus::Ok
}

/// Message describing the most recent error on the calling thread, or an
/// empty string. The pointer stays valid until the next failing call on the
/// same thread.
#[no_mangle]
pub extern "C" fn fes_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn fes_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

fn install_model(model: Model, out: *mut *mut FesModel) -> FesStatus {
    write_out(out, Box::into_raw(Box::new(FesModel { inner: model })))
}

/// Load a model from a file holding either edge-list text or model JSON.
///
/// # Safety
/// `path` must be a valid NUL-terminated string; `out` must be a valid
/// pointer. On success `*out` owns the model and must be released with
/// [`fes_model_free`].
#[no_mangle]
pub unsafe extern "C" fn fes_model_from_file(
    path: *const c_char,
    out: *mut *mut FesModel,
) -> FesStatus {
    guarded(|| {
        let path = match unsafe { utf8_arg(path) } {
            Ok(p) => p,
            Err(status) => return status,
        };
        match io::read_model(Path::new(path)) {
            Ok(model) => install_model(model, out),
            Err(e) => fail(&e),
        }
    })
}

/// Parse a model from in-memory text (edge list or JSON).
///
/// # Safety
/// `text` must be a valid NUL-terminated string; `out` must be a valid
/// pointer. On success `*out` owns the model and must be released with
/// [`fes_model_free`].
#[no_mangle]
pub unsafe extern "C" fn fes_model_from_text(
    text: *const c_char,
    out: *mut *mut FesModel,
) -> FesStatus {
    guarded(|| {
        let text = match unsafe { utf8_arg(text) } {
            Ok(t) => t,
            Err(status) => return status,
        };
        match io::parse_model(text) {
            Ok(model) => install_model(model, out),
            Err(e) => fail(&e),
        }
    })
}

/// Release a model handle. Null is a no-op.
///
/// # Safety
/// `model` must be null or an unfreed pointer from a `fes_model_*`
/// constructor; it must not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn fes_model_free(model: *mut FesModel) {
    if !model.is_null() {
        drop(unsafe { Box::from_raw(model) });
    }
}

/// Number of vertices, or 0 for a null handle.
///
/// # Safety
/// `model` must be null or a live model handle.
#[no_mangle]
pub unsafe extern "C" fn fes_model_n(model: *const FesModel) -> usize {
    match unsafe { model_arg(model) } {
        Ok(m) => m.n(),
        Err(_) => 0,
    }
}

/// True for an Ising model, false for a general Markov random field (or a
/// null handle).
///
/// # Safety
/// `model` must be null or a live model handle.
#[no_mangle]
pub unsafe extern "C" fn fes_model_is_ising(model: *const FesModel) -> bool {
    matches!(unsafe { model_arg(model) }, Ok(Model::Ising(_)))
}

/// Exact free energy by enumeration (closed form where available). Fails
/// with `FES_STATUS_TOO_LARGE` when the model exceeds `enum_guard` vertices
/// and no closed form applies.
///
/// # Safety
/// `model` must be a live model handle; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn fes_free_energy_exact(
    model: *const FesModel,
    enum_guard: usize,
    out: *mut f64,
) -> FesStatus {
    guarded(|| {
        let model = match unsafe { model_arg(model) } {
            Ok(m) => m,
            Err(status) => return status,
        };
        let value = match model {
            Model::Ising(m) => exact_free_energy_auto(m, enum_guard),
            Model::Mrf(m) => free_energy_exact_mrf(m, enum_guard),
        };
        match value {
            Ok(v) => write_out(out, v),
            Err(e) => fail(&e),
        }
    })
}

/// Mean-field variational lower bound on the free energy (Ising only).
/// `restarts` of 0 selects the default multistart schedule.
///
/// # Safety
/// `model` must be a live model handle; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn fes_mean_field(
    model: *const FesModel,
    restarts: usize,
    seed: u64,
    out: *mut f64,
) -> FesStatus {
    guarded(|| {
        let model = match unsafe { model_arg(model) } {
            Ok(m) => m,
            Err(status) => return status,
        };
        let Model::Ising(ising) = model else {
            set_last_error("mean-field lower bound needs an Ising model");
            return FesStatus::InvalidInput;
        };
        let mut config = MeanFieldConfig::default();
        if restarts > 0 {
            config.restarts = restarts;
        }
        match variational_free_energy(ising, &config, seed) {
            Ok(result) => write_out(out, result.value),
            Err(e) => fail(&e),
        }
    })
}

/// Median-boosted sample estimate of the free energy from `repeats`
/// independent `q`-vertex samples, using exact enumeration on each sample.
/// `repeats` must be odd; `repeats` of 0 selects the default of 11.
///
/// # Safety
/// `model` must be a live model handle; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn fes_estimate(
    model: *const FesModel,
    q: usize,
    repeats: usize,
    seed: u64,
    out: *mut f64,
) -> FesStatus {
    guarded(|| {
        let model = match unsafe { model_arg(model) } {
            Ok(m) => m,
            Err(status) => return status,
        };
        let mut config = EstimatorConfig::new(q, seed);
        if repeats > 0 {
            config.repeats = repeats;
        }
        let value = match model {
            Model::Ising(m) => estimate_free_energy(m, &config),
            Model::Mrf(m) => estimate_free_energy_mrf(m, &config),
        };
        match value {
            Ok(estimate) => write_out(out, estimate.estimate),
            Err(e) => fail(&e),
        }
    })
}

/// Magnetization estimate from three exact free-energy queries at field
/// shifts `{−ν, 0, +ν}` (Ising only). Writes the estimate and the
/// derivative bracket it was read from.
///
/// # Safety
/// `model` must be a live model handle; `out_value`, `out_lower`, and
/// `out_upper` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn fes_magnetization(
    model: *const FesModel,
    nu: f64,
    enum_guard: usize,
    out_value: *mut f64,
    out_lower: *mut f64,
    out_upper: *mut f64,
) -> FesStatus {
    guarded(|| {
        let model = match unsafe { model_arg(model) } {
            Ok(m) => m,
            Err(status) => return status,
        };
        let Model::Ising(ising) = model else {
            set_last_error("magnetization needs an Ising model");
            return FesStatus::InvalidInput;
        };
        match magnet::estimate_magnetization_exact(ising, nu, enum_guard) {
            Ok(est) => {
                let (lo, hi) = est.bracket;
                let status = write_out(out_lower, lo);
                if status != FesStatus::Ok {
                    return status;
                }
                let status = write_out(out_upper, hi);
                if status != FesStatus::Ok {
                    return status;
                }
                write_out(out_value, est.value)
            }
            Err(e) => fail(&e),
        }
    })
}
