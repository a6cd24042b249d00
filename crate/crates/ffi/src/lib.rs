//! C ABI for the groklab core: opaque model handles, status codes, and
//! JSON-string results so other languages can bind without knowing any Rust
//! types. The generated header lives in `include/groklab.h`.
//!
//! Conventions:
//! - Every function that can fail returns a [`GroklabStatus`]; details of the
//!   most recent failure on the current thread come from
//!   [`groklab_last_error_message`].
//! - Strings returned through `*mut *mut c_char` are NUL-terminated, owned by
//!   the caller, and must be released with [`groklab_string_free`].
//! - Handles from [`groklab_model_load`] must be released with
//!   [`groklab_model_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};

use groklab::experiment::{run_training, RunConfig};
use groklab::network::{load_checkpoint, ModelState};
use groklab::{analytic, metrics, Error};

/// Result codes for every fallible entry point.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GroklabStatus {
    Ok = 0,
    /// A required pointer argument was NULL.
    NullArgument = 1,
    /// A string argument was not valid UTF-8.
    InvalidUtf8 = 2,
    /// Arguments were structurally valid but semantically wrong.
    InvalidArgument = 3,
    /// Filesystem failure.
    Io = 4,
    /// JSON, config, or checkpoint contents could not be parsed/validated.
    Parse = 5,
    /// A forward pass or training step produced non-finite values.
    Numeric = 6,
    /// The training run aborted; the summary JSON carries the details.
    RunFailed = 7,
    /// A panic was caught at the FFI boundary.
    Panic = 8,
}

/// Opaque handle to a loaded checkpoint.
pub struct GroklabModel {
    model: ModelState,
    seed: u64,
    epoch: u64,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::new("").unwrap());
}

fn set_last_error(msg: &str) {
    let sanitized: String = msg.chars().filter(|&c| c != '\0').collect();
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(sanitized).expect("NULs stripped");
    });
}

fn status_of(err: &Error) -> GroklabStatus {
    match err {
        Error::InvalidArgument(_)
        | Error::Degenerate(_)
        | Error::DegenerateDataset(_)
        | Error::DegenerateSplit(_)
        | Error::DegenerateWeights
        | Error::ConstantSequence => GroklabStatus::InvalidArgument,
        Error::Config(_) | Error::Checkpoint(_) | Error::Json(_) => GroklabStatus::Parse,
        Error::NumericOverflow { .. } => GroklabStatus::Numeric,
        Error::Io(_) => GroklabStatus::Io,
    }
}

fn fail(err: &Error) -> GroklabStatus {
    set_last_error(&err.to_string());
    status_of(err)
}

/// Runs `f` with panics converted to [`GroklabStatus::Panic`].
fn guarded(f: impl FnOnce() -> GroklabStatus) -> GroklabStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => status,
        Err(_) => {
            set_last_error("panic caught at FFI boundary");
            GroklabStatus::Panic
        }
    }
}

/// # Safety
/// `ptr` must be NULL or a NUL-terminated string valid for reads.
unsafe fn utf8_arg<'a>(ptr: *const c_char) -> Result<&'a str, GroklabStatus> {
    if ptr.is_null() {
        set_last_error("NULL string argument");
        return Err(GroklabStatus::NullArgument);
    }
    CStr::from_ptr(ptr).to_str().map_err(|e| {
        set_last_error(&format!("invalid UTF-8 argument: {e}"));
        GroklabStatus::InvalidUtf8
    })
}

fn emit_string(out: *mut *mut c_char, text: String) -> GroklabStatus {
    let sanitized: String = text.chars().filter(|&c| c != '\0').collect();
    let cstr = CString::new(sanitized).expect("NULs stripped");
    unsafe { *out = cstr.into_raw() };
    GroklabStatus::Ok
}

/// Library version as a static NUL-terminated string; never freed.
#[no_mangle]
pub extern "C" fn groklab_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Message for the most recent failure on this thread. The pointer stays
/// valid until the next failing call on the same thread; do not free it.
#[no_mangle]
pub extern "C" fn groklab_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Frees a string returned through a `*mut *mut c_char` out-parameter.
///
/// # Safety
/// `s` must be NULL or a pointer previously returned by this library and not
/// yet freed.
#[no_mangle]
pub unsafe extern "C" fn groklab_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Loads a checkpoint JSON file into an opaque model handle.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn groklab_model_load(
    path: *const c_char,
    out: *mut *mut GroklabModel,
) -> GroklabStatus {
    guarded(|| {
        if out.is_null() {
            set_last_error("NULL out pointer");
            return GroklabStatus::NullArgument;
        }
        let path = match utf8_arg(path) {
            Ok(s) => PathBuf::from(s),
            Err(status) => return status,
        };
        match load_checkpoint(&path) {
            Ok((model, seed, epoch)) => {
                let handle = Box::new(GroklabModel { model, seed, epoch });
                *out = Box::into_raw(handle);
                GroklabStatus::Ok
            }
            Err(e) => fail(&e),
        }
    })
}

/// Releases a model handle.
///
/// # Safety
/// `model` must be NULL or a pointer from [`groklab_model_load`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn groklab_model_free(model: *mut GroklabModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Number of weight matrices; 0 if `model` is NULL.
///
/// # Safety
/// `model` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn groklab_model_num_layers(model: *const GroklabModel) -> usize {
    model.as_ref().map_or(0, |m| m.model.weights.len())
}

/// Modulus `P` of the task the model was trained on; 0 if NULL.
///
/// # Safety
/// `model` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn groklab_model_modulus(model: *const GroklabModel) -> usize {
    model.as_ref().map_or(0, |m| m.model.arch.output_dim)
}

/// Epoch recorded in the checkpoint; 0 if NULL.
///
/// # Safety
/// `model` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn groklab_model_epoch(model: *const GroklabModel) -> u64 {
    model.as_ref().map_or(0, |m| m.epoch)
}

/// Seed recorded in the checkpoint; 0 if NULL.
///
/// # Safety
/// `model` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn groklab_model_seed(model: *const GroklabModel) -> u64 {
    model.as_ref().map_or(0, |m| m.seed)
}

/// Classifies the pair `(i, j)`: writes the argmax class to `out_label`.
///
/// # Safety
/// `model` must be a live handle; `out_label` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn groklab_model_predict(
    model: *const GroklabModel,
    i: u64,
    j: u64,
    out_label: *mut u64,
) -> GroklabStatus {
    guarded(|| {
        let (Some(handle), false) = (model.as_ref(), out_label.is_null()) else {
            set_last_error("NULL model or out pointer");
            return GroklabStatus::NullArgument;
        };
        let p = handle.model.arch.output_dim;
        match handle.model.forward_pairs(&[(i as usize, j as usize)], p) {
            Ok(logits) => {
                let row = logits.row(0);
                let mut best = 0usize;
                for (c, &v) in row.iter().enumerate().skip(1) {
                    if v > row[best] {
                        best = c;
                    }
                }
                *out_label = best as u64;
                GroklabStatus::Ok
            }
            Err(e) => fail(&e),
        }
    })
}

/// Writes the `P` output logits for the pair `(i, j)` into `out`, which must
/// have room for `len >= P` doubles.
///
/// # Safety
/// `model` must be a live handle; `out` must be valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn groklab_model_logits(
    model: *const GroklabModel,
    i: u64,
    j: u64,
    out: *mut f64,
    len: usize,
) -> GroklabStatus {
    guarded(|| {
        let (Some(handle), false) = (model.as_ref(), out.is_null()) else {
            set_last_error("NULL model or out pointer");
            return GroklabStatus::NullArgument;
        };
        let p = handle.model.arch.output_dim;
        if len < p {
            set_last_error(&format!("buffer of {len} doubles cannot hold {p} logits"));
            return GroklabStatus::InvalidArgument;
        }
        match handle.model.forward_pairs(&[(i as usize, j as usize)], p) {
            Ok(logits) => {
                for (q, &v) in logits.row(0).iter().enumerate() {
                    *out.add(q) = v;
                }
                GroklabStatus::Ok
            }
            Err(e) => fail(&e),
        }
    })
}

/// Shannon entropy (nats) of one layer's weight distribution.
///
/// # Safety
/// `model` must be a live handle; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn groklab_model_layer_entropy(
    model: *const GroklabModel,
    layer: usize,
    out: *mut f64,
) -> GroklabStatus {
    guarded(|| {
        let (Some(handle), false) = (model.as_ref(), out.is_null()) else {
            set_last_error("NULL model or out pointer");
            return GroklabStatus::NullArgument;
        };
        let Some(weights) = handle.model.weights.get(layer) else {
            set_last_error(&format!(
                "layer {layer} out of range for {} layers",
                handle.model.weights.len()
            ));
            return GroklabStatus::InvalidArgument;
        };
        match metrics::layer_entropy(weights.view()) {
            Ok(s) => {
                *out = s;
                GroklabStatus::Ok
            }
            Err(e) => fail(&e),
        }
    })
}

/// Exhaustively verifies the closed-form construction; on success writes the
/// report as a JSON string to `out_json` (free with [`groklab_string_free`]).
///
/// # Safety
/// `out_json` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn groklab_verify_analytic(
    p: usize,
    n: usize,
    seed: u64,
    out_json: *mut *mut c_char,
) -> GroklabStatus {
    guarded(|| {
        if out_json.is_null() {
            set_last_error("NULL out pointer");
            return GroklabStatus::NullArgument;
        }
        match analytic::verify_analytic(p, n, seed) {
            Ok(report) => match serde_json::to_string(&report) {
                Ok(json) => emit_string(out_json, json),
                Err(e) => fail(&Error::from(e)),
            },
            Err(e) => fail(&e),
        }
    })
}

/// Trains one run from a JSON config string, writing artifacts under
/// `out_dir`. The run summary JSON lands in `out_summary_json` (free with
/// [`groklab_string_free`]); an aborted run reports
/// [`GroklabStatus::RunFailed`] and still emits the summary.
///
/// # Safety
/// `config_json` and `out_dir` must be NUL-terminated strings;
/// `out_summary_json` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn groklab_train(
    config_json: *const c_char,
    out_dir: *const c_char,
    out_summary_json: *mut *mut c_char,
) -> GroklabStatus {
    guarded(|| {
        if out_summary_json.is_null() {
            set_last_error("NULL out pointer");
            return GroklabStatus::NullArgument;
        }
        let config_text = match utf8_arg(config_json) {
            Ok(s) => s,
            Err(status) => return status,
        };
        let out_dir = match utf8_arg(out_dir) {
            Ok(s) => Path::new(s).to_path_buf(),
            Err(status) => return status,
        };
        let mut config: RunConfig = match serde_json::from_str(config_text) {
            Ok(c) => c,
            Err(e) => return fail(&Error::from(e)),
        };
        if config.format_version != Some(groklab::FORMAT_VERSION) {
            set_last_error("config must carry format_version 1");
            return GroklabStatus::Parse;
        }
        config.out_dir = Some(out_dir);
        match run_training(&config) {
            Ok((_, summary)) => {
                let ok = summary.status.is_ok();
                let json = match serde_json::to_string(&summary) {
                    Ok(j) => j,
                    Err(e) => return fail(&Error::from(e)),
                };
                let status = emit_string(out_summary_json, json);
                if status != GroklabStatus::Ok {
                    status
                } else if ok {
                    GroklabStatus::Ok
                } else {
                    set_last_error("run aborted; see summary JSON");
                    GroklabStatus::RunFailed
                }
            }
            Err(e) => fail(&e),
        }
    })
}
