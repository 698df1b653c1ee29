//! C ABI over the classifier: load a weights archive, run eval-mode
//! inference, free the handle.
//!
//! Every entry point returns an [`EcgtnStatus`]. On failure a message is
//! stored per thread and can be read with [`ecgtn_last_error`]. Panics are
//! caught at the boundary and reported as [`EcgtnStatus::Panic`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use ecg_tinynet::archive::{self, ArchiveError};
use ecg_tinynet::model::{predict, ModelError, ModelParams};
use ecg_tinynet::tensor::Tensor;

/// Result codes shared by all functions.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EcgtnStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    CorruptArchive = 4,
    LeadMismatch = 5,
    BufferTooSmall = 6,
    Numeric = 7,
    Panic = 8,
}

/// Opaque model handle.
pub struct EcgtnModel {
    params: ModelParams<f32>,
    names: Vec<CString>,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn fail(status: EcgtnStatus, msg: impl Into<String>) -> EcgtnStatus {
    set_error(msg);
    status
}

fn guard(f: impl FnOnce() -> EcgtnStatus) -> EcgtnStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(_) => fail(EcgtnStatus::Panic, "internal panic"),
    }
}

fn archive_status(e: &ArchiveError) -> EcgtnStatus {
    match e {
        ArchiveError::Io { .. } => EcgtnStatus::Io,
        _ => EcgtnStatus::CorruptArchive,
    }
}

/// Message of the last failed call on this thread, or NULL. The pointer is
/// valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn ecgtn_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn ecgtn_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Load a weights archive. On success `*out` owns a new handle that must be
/// released with [`ecgtn_model_free`].
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ecgtn_model_load(path: *const c_char, out: *mut *mut EcgtnModel) -> EcgtnStatus {
    guard(|| {
        if path.is_null() || out.is_null() {
            return fail(EcgtnStatus::NullPointer, "null argument");
        }
        *out = ptr::null_mut();
        let Ok(p) = CStr::from_ptr(path).to_str() else {
            return fail(EcgtnStatus::InvalidArgument, "path is not UTF-8");
        };
        match archive::load_weights(Path::new(p)) {
            Ok(params) => {
                let cfg = params.config();
                let names = (0..cfg.num_classes)
                    .map(|i| CString::new(cfg.class_name(i).replace('\0', " ")).expect("no NUL"))
                    .collect();
                *out = Box::into_raw(Box::new(EcgtnModel { params, names }));
                EcgtnStatus::Ok
            }
            Err(e) => fail(archive_status(&e), e.to_string()),
        }
    })
}

/// Release a handle. NULL is ignored.
///
/// # Safety
/// `model` must come from [`ecgtn_model_load`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn ecgtn_model_free(model: *mut EcgtnModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Number of output classes, or 0 for NULL.
///
/// # Safety
/// `model` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ecgtn_model_num_classes(model: *const EcgtnModel) -> usize {
    model.as_ref().map_or(0, |m| m.params.config().num_classes)
}

/// Number of input leads the model expects, or 0 for NULL.
///
/// # Safety
/// `model` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ecgtn_model_input_leads(model: *const EcgtnModel) -> usize {
    model.as_ref().map_or(0, |m| m.params.config().input_leads)
}

/// Name of class `index`, or NULL when out of range. Owned by the handle.
///
/// # Safety
/// `model` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ecgtn_model_class_name(model: *const EcgtnModel, index: usize) -> *const c_char {
    model
        .as_ref()
        .and_then(|m| m.names.get(index))
        .map_or(ptr::null(), |s| s.as_ptr())
}

/// Eval-mode class probabilities for `batch` records.
///
/// `signal` holds `batch * leads * samples` floats, record-major then
/// lead-major, already preprocessed. `probs` receives `batch * num_classes`
/// floats; `probs_len` is its capacity in elements.
///
/// # Safety
/// `signal` and `probs` must point to at least the stated number of floats.
#[no_mangle]
pub unsafe extern "C" fn ecgtn_predict(
    model: *const EcgtnModel,
    signal: *const f32,
    batch: usize,
    leads: usize,
    samples: usize,
    probs: *mut f32,
    probs_len: usize,
) -> EcgtnStatus {
    guard(|| {
        let Some(m) = model.as_ref() else {
            return fail(EcgtnStatus::NullPointer, "null model");
        };
        if signal.is_null() || probs.is_null() {
            return fail(EcgtnStatus::NullPointer, "null buffer");
        }
        if batch == 0 || leads == 0 || samples == 0 {
            return fail(EcgtnStatus::InvalidArgument, "batch, leads and samples must be positive");
        }
        let k = m.params.config().num_classes;
        let Some(need) = batch.checked_mul(k) else {
            return fail(EcgtnStatus::InvalidArgument, "output size overflows");
        };
        if probs_len < need {
            return fail(
                EcgtnStatus::BufferTooSmall,
                format!("probs holds {probs_len} floats, {need} needed"),
            );
        }
        let Some(n) = batch.checked_mul(leads).and_then(|v| v.checked_mul(samples)) else {
            return fail(EcgtnStatus::InvalidArgument, "input size overflows");
        };
        let data = std::slice::from_raw_parts(signal, n).to_vec();
        if data.iter().any(|v| !v.is_finite()) {
            return fail(EcgtnStatus::Numeric, "input contains non-finite values");
        }
        let x = match Tensor::new(data, &[batch, leads, samples]) {
            Ok(x) => x,
            Err(e) => return fail(EcgtnStatus::InvalidArgument, e.to_string()),
        };
        match predict(&m.params, &x) {
            Ok(p) => {
                std::slice::from_raw_parts_mut(probs, need).copy_from_slice(p.data());
                EcgtnStatus::Ok
            }
            Err(e @ ModelError::LeadMismatch { .. }) => fail(EcgtnStatus::LeadMismatch, e.to_string()),
            Err(e) => fail(EcgtnStatus::InvalidArgument, e.to_string()),
        }
    })
}
