//! C ABI for the lifelog prediction pipeline.
//!
//! Exposes checkpoint inference, the three voting ensembles, logit margins,
//! and macro-F1 scoring behind opaque handles with integer status codes.
//! Every function catches panics at the boundary; on any non-OK status the
//! thread-local message from [`mislstm_last_error_message`] describes what
//! went wrong.
//!
//! The generated header lands in `include/mislstm.h` at build time.

#![allow(non_camel_case_types)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use mislstm_core::ensemble::{EnsemblePool, MarginKind};
use mislstm_core::evaluation::macro_f1;
use mislstm_core::model::{predict, DayModel, UNKNOWN_SUBJECT};
use mislstm_core::training::load_checkpoint;
use mislstm_core::types::{
    DayFeatureGrid, HeadLogits, MINUTES_PER_DAY, N_CONTINUOUS, N_DISCRETE, N_HEADS, TOTAL_LOGITS,
    WINDOWS_PER_DAY,
};
use ndarray::Array2;

/// Status codes returned by every fallible function.
#[repr(i32)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum mislstm_status {
    MISLSTM_OK = 0,
    MISLSTM_ERR_INVALID_ARGUMENT = 1,
    MISLSTM_ERR_IO = 2,
    MISLSTM_ERR_DATA = 3,
    MISLSTM_ERR_PANIC = 4,
}

use mislstm_status::*;

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::new("").unwrap());
}

fn set_error(msg: &str) {
    let sanitized: String = msg.chars().filter(|&c| c != '\0').collect();
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(sanitized).unwrap());
}

fn fail(status: mislstm_status, msg: &str) -> mislstm_status {
    set_error(msg);
    status
}

fn guard(f: impl FnOnce() -> mislstm_status) -> mislstm_status {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => status,
        Err(_) => fail(MISLSTM_ERR_PANIC, "internal panic"),
    }
}

/// Opaque handle to a loaded checkpoint.
pub struct mislstm_model {
    inner: DayModel<f32>,
}

/// Opaque handle to an aligned pool of per-model day logits.
pub struct mislstm_pool {
    inner: EnsemblePool,
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn mislstm_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Copy the last error message for this thread into `buf` (truncated to
/// `len - 1` bytes, always NUL-terminated). Returns the full message
/// length, or -1 when `buf` is null or `len` is 0.
#[no_mangle]
pub extern "C" fn mislstm_last_error_message(buf: *mut c_char, len: usize) -> isize {
    if buf.is_null() || len == 0 {
        return -1;
    }
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        let bytes = msg.as_bytes();
        let n = bytes.len().min(len - 1);
        unsafe {
            std::ptr::copy_nonoverlapping(bytes.as_ptr(), buf as *mut u8, n);
            *buf.add(n) = 0;
        }
        bytes.len() as isize
    })
}

/// Load a checkpoint directory (`params.bin` + `meta.json`).
///
/// # Safety
/// `checkpoint_dir` must be a valid NUL-terminated path and `out` a valid
/// pointer; the returned handle must be freed with `mislstm_model_free`.
#[no_mangle]
pub unsafe extern "C" fn mislstm_model_load(
    checkpoint_dir: *const c_char,
    out: *mut *mut mislstm_model,
) -> mislstm_status {
    guard(|| {
        if checkpoint_dir.is_null() || out.is_null() {
            return fail(MISLSTM_ERR_INVALID_ARGUMENT, "null argument");
        }
        let dir = match unsafe { CStr::from_ptr(checkpoint_dir) }.to_str() {
            Ok(s) => s,
            Err(_) => return fail(MISLSTM_ERR_INVALID_ARGUMENT, "path is not valid UTF-8"),
        };
        match load_checkpoint(Path::new(dir)) {
            Ok((model, _meta)) => {
                unsafe {
                    *out = Box::into_raw(Box::new(mislstm_model { inner: model }));
                }
                MISLSTM_OK
            }
            Err(e) => fail(MISLSTM_ERR_IO, &format!("checkpoint load failed: {e}")),
        }
    })
}

/// Free a model handle (null is a no-op).
///
/// # Safety
/// `model` must come from `mislstm_model_load` and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn mislstm_model_free(model: *mut mislstm_model) {
    if !model.is_null() {
        drop(unsafe { Box::from_raw(model) });
    }
}

/// Number of subjects the checkpoint was trained with, or -1 on null.
///
/// # Safety
/// `model` must be a live handle from `mislstm_model_load`.
#[no_mangle]
pub unsafe extern "C" fn mislstm_model_subject_count(model: *const mislstm_model) -> i32 {
    if model.is_null() {
        return -1;
    }
    unsafe { &*model }.inner.model_config.n_subjects as i32
}

/// Run one preprocessed day through the model.
///
/// `continuous` holds 7x1440 standardized values (row-major), `discrete`
/// 9x144 scaled counts, `subject` a 0-based id or -1 for an unseen
/// participant. `out_logits` receives 13 raw scores in head order
/// (Q1 Q2 Q3 | S1 x3 | S2 S3).
///
/// # Safety
/// Pointers must reference buffers of the documented sizes.
#[no_mangle]
pub unsafe extern "C" fn mislstm_model_predict_day(
    model: *const mislstm_model,
    continuous: *const f32,
    discrete: *const f32,
    subject: i32,
    out_logits: *mut f32,
) -> mislstm_status {
    guard(|| {
        if model.is_null() || continuous.is_null() || discrete.is_null() || out_logits.is_null() {
            return fail(MISLSTM_ERR_INVALID_ARGUMENT, "null argument");
        }
        let model = unsafe { &*model };
        let cont =
            unsafe { std::slice::from_raw_parts(continuous, N_CONTINUOUS * MINUTES_PER_DAY) };
        let disc = unsafe { std::slice::from_raw_parts(discrete, N_DISCRETE * WINDOWS_PER_DAY) };
        let grid = DayFeatureGrid {
            continuous: Array2::from_shape_vec((N_CONTINUOUS, MINUTES_PER_DAY), cont.to_vec())
                .unwrap(),
            discrete: Array2::from_shape_vec((N_DISCRETE, WINDOWS_PER_DAY), disc.to_vec())
                .unwrap(),
            observed_mask: Array2::from_elem((N_CONTINUOUS, MINUTES_PER_DAY), true),
        };
        if let Err(e) = grid.validate() {
            return fail(MISLSTM_ERR_DATA, &format!("invalid grid: {e}"));
        }
        let subject = if subject < 0 {
            UNKNOWN_SUBJECT
        } else {
            subject as usize
        };
        match model.inner.infer_day(&grid, subject) {
            Ok(logits) => {
                let flat = logits.to_flat();
                unsafe {
                    std::ptr::copy_nonoverlapping(flat.as_ptr(), out_logits, TOTAL_LOGITS);
                }
                MISLSTM_OK
            }
            Err(e) => fail(MISLSTM_ERR_DATA, &format!("inference failed: {e}")),
        }
    })
}

/// Argmax the 13 raw scores of `logits` into 6 class indices.
///
/// # Safety
/// `logits` must hold 13 floats and `out_classes` 6 bytes.
#[no_mangle]
pub unsafe extern "C" fn mislstm_logits_to_classes(
    logits: *const f32,
    out_classes: *mut u8,
) -> mislstm_status {
    guard(|| {
        if logits.is_null() || out_classes.is_null() {
            return fail(MISLSTM_ERR_INVALID_ARGUMENT, "null argument");
        }
        let flat = unsafe { std::slice::from_raw_parts(logits, TOTAL_LOGITS) };
        let parsed = match HeadLogits::from_flat(flat) {
            Ok(l) => l,
            Err(e) => return fail(MISLSTM_ERR_DATA, &format!("bad logits: {e}")),
        };
        let label = predict(&parsed);
        for (i, &class) in label.classes().iter().enumerate() {
            unsafe { *out_classes.add(i) = class as u8 };
        }
        MISLSTM_OK
    })
}

/// Build an ensemble pool from a flat logit array laid out as
/// `[model][day][13]`. `best_index` selects the reference model.
///
/// # Safety
/// `logits` must hold `n_models * n_days * 13` floats; the handle must be
/// freed with `mislstm_pool_free`.
#[no_mangle]
pub unsafe extern "C" fn mislstm_pool_create(
    n_models: usize,
    n_days: usize,
    logits: *const f32,
    best_index: usize,
    out: *mut *mut mislstm_pool,
) -> mislstm_status {
    guard(|| {
        if logits.is_null() || out.is_null() {
            return fail(MISLSTM_ERR_INVALID_ARGUMENT, "null argument");
        }
        if n_models == 0 || n_days == 0 || best_index >= n_models {
            return fail(
                MISLSTM_ERR_INVALID_ARGUMENT,
                "need n_models >= 1, n_days >= 1, best_index < n_models",
            );
        }
        let flat =
            unsafe { std::slice::from_raw_parts(logits, n_models * n_days * TOTAL_LOGITS) };
        let mut models = Vec::with_capacity(n_models);
        for m in 0..n_models {
            let mut days = Vec::with_capacity(n_days);
            for d in 0..n_days {
                let offset = (m * n_days + d) * TOTAL_LOGITS;
                let head = match HeadLogits::from_flat(&flat[offset..offset + TOTAL_LOGITS]) {
                    Ok(h) => h,
                    Err(e) => {
                        return fail(
                            MISLSTM_ERR_DATA,
                            &format!("bad logits at model {m} day {d}: {e}"),
                        )
                    }
                };
                days.push((format!("d{d:06}"), head));
            }
            models.push((format!("m{m}"), days));
        }
        match EnsemblePool::new(models) {
            Ok(mut pool) => {
                pool.best_index = best_index;
                pool.margin_kind = MarginKind::Top2;
                unsafe {
                    *out = Box::into_raw(Box::new(mislstm_pool { inner: pool }));
                }
                MISLSTM_OK
            }
            Err(e) => fail(MISLSTM_ERR_DATA, &format!("pool build failed: {e}")),
        }
    })
}

/// Free a pool handle (null is a no-op).
///
/// # Safety
/// `pool` must come from `mislstm_pool_create` and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn mislstm_pool_free(pool: *mut mislstm_pool) {
    if !pool.is_null() {
        drop(unsafe { Box::from_raw(pool) });
    }
}

/// Fit per-model, per-head margin thresholds at the given quantile.
///
/// # Safety
/// `pool` must be a live handle from `mislstm_pool_create`.
#[no_mangle]
pub unsafe extern "C" fn mislstm_pool_fit_thresholds(
    pool: *mut mislstm_pool,
    quantile: f64,
) -> mislstm_status {
    guard(|| {
        if pool.is_null() {
            return fail(MISLSTM_ERR_INVALID_ARGUMENT, "null pool");
        }
        match unsafe { &mut *pool }.inner.fit_thresholds(quantile) {
            Ok(()) => MISLSTM_OK,
            Err(e) => fail(MISLSTM_ERR_DATA, &format!("threshold fit failed: {e}")),
        }
    })
}

/// Voting strategies for [`mislstm_pool_vote`].
#[repr(i32)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum mislstm_vote_method {
    MISLSTM_VOTE_SOFT = 0,
    MISLSTM_VOTE_HARD = 1,
    MISLSTM_VOTE_UALRE = 2,
}

/// Run one voting strategy over the pool. `out_classes` receives
/// `n_days * 6` class indices, day-major. UALRE requires fitted
/// thresholds.
///
/// # Safety
/// `pool` must be live and `out_classes` sized `n_days * 6`.
#[no_mangle]
pub unsafe extern "C" fn mislstm_pool_vote(
    pool: *const mislstm_pool,
    method: mislstm_vote_method,
    out_classes: *mut u8,
) -> mislstm_status {
    guard(|| {
        if pool.is_null() || out_classes.is_null() {
            return fail(MISLSTM_ERR_INVALID_ARGUMENT, "null argument");
        }
        let pool = &unsafe { &*pool }.inner;
        let votes = match method {
            mislstm_vote_method::MISLSTM_VOTE_SOFT => pool.soft_vote(),
            mislstm_vote_method::MISLSTM_VOTE_HARD => pool.hard_vote(),
            mislstm_vote_method::MISLSTM_VOTE_UALRE => match pool.ualre() {
                Ok(v) => v,
                Err(e) => return fail(MISLSTM_ERR_DATA, &format!("{e}")),
            },
        };
        for (d, label) in votes.iter().enumerate() {
            for (h, &class) in label.classes().iter().enumerate() {
                unsafe { *out_classes.add(d * N_HEADS + h) = class as u8 };
            }
        }
        MISLSTM_OK
    })
}

/// Top-two logit margin of one score vector.
///
/// # Safety
/// `scores` must hold `len` floats; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mislstm_logit_margin(
    scores: *const f32,
    len: usize,
    out: *mut f64,
) -> mislstm_status {
    guard(|| {
        if scores.is_null() || out.is_null() {
            return fail(MISLSTM_ERR_INVALID_ARGUMENT, "null argument");
        }
        let scores = unsafe { std::slice::from_raw_parts(scores, len) };
        match mislstm_core::ensemble::logit_margin(scores) {
            Ok(margin) => {
                unsafe { *out = margin };
                MISLSTM_OK
            }
            Err(e) => fail(MISLSTM_ERR_INVALID_ARGUMENT, &format!("{e}")),
        }
    })
}

/// Macro-F1 of predictions against labels (class indices in
/// `0..n_classes`).
///
/// # Safety
/// `predictions` and `labels` must hold `len` values each.
#[no_mangle]
pub unsafe extern "C" fn mislstm_macro_f1(
    predictions: *const u32,
    labels: *const u32,
    len: usize,
    n_classes: u32,
    out: *mut f64,
) -> mislstm_status {
    guard(|| {
        if predictions.is_null() || labels.is_null() || out.is_null() {
            return fail(MISLSTM_ERR_INVALID_ARGUMENT, "null argument");
        }
        let p: Vec<usize> = unsafe { std::slice::from_raw_parts(predictions, len) }
            .iter()
            .map(|&v| v as usize)
            .collect();
        let l: Vec<usize> = unsafe { std::slice::from_raw_parts(labels, len) }
            .iter()
            .map(|&v| v as usize)
            .collect();
        match macro_f1(&p, &l, n_classes as usize) {
            Ok(f1) => {
                unsafe { *out = f1 };
                MISLSTM_OK
            }
            Err(e) => fail(MISLSTM_ERR_DATA, &format!("{e}")),
        }
    })
}
