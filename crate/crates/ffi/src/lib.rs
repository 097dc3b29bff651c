//! C ABI for `modify-core`.
//!
//! Every fallible function returns a [`ModifyStatus`] and writes results
//! through out-pointers. On failure a message is kept per thread and can be
//! read with [`modify_last_error_message`]. Objects are opaque handles
//! created by `*_new`/`*_parse`/`modify_train` and released with the
//! matching `*_free`. Panics never cross the boundary.
//!
//! The C header is generated into `include/modify.h` at build time.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use modify_core::augment::{rgb_shuffle, ChannelPermutation};
use modify_core::cli::config::{parse_config, TrainConfig};
use modify_core::image::Image;
use modify_core::lossbank::{DifficultyDegree, LossBank};
use modify_core::scheduler::{da_degree, no_gate, CapabilityTracker, GateThresholds};
use modify_core::trainer::{train, RunResult};
use modify_core::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModifyStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Config = 3,
    Divergence = 4,
    Data = 5,
    Panic = 6,
}

pub struct ModifyLossBank(LossBank);

pub struct ModifyCapabilityTracker(CapabilityTracker);

pub struct ModifyConfig {
    text: Option<String>,
    overrides: Vec<(String, String)>,
    cfg: TrainConfig,
}

pub struct ModifyRunResult(RunResult);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

enum Fail {
    Null(&'static str),
    Core(Error),
}

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail::Core(e)
    }
}

fn status_of(e: &Error) -> ModifyStatus {
    match e {
        Error::Config { .. } => ModifyStatus::Config,
        Error::Divergence { .. } => ModifyStatus::Divergence,
        Error::Format(_) | Error::Io(_) => ModifyStatus::Data,
        _ => ModifyStatus::InvalidArgument,
    }
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> ModifyStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            ModifyStatus::Ok
        }
        Ok(Err(Fail::Null(what))) => {
            set_error(format!("null pointer passed for `{what}`"));
            ModifyStatus::NullPointer
        }
        Ok(Err(Fail::Core(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("internal panic: {msg}"));
            ModifyStatus::Panic
        }
    }
}

unsafe fn out<'a, T>(p: *mut T, what: &'static str) -> Result<&'a mut T, Fail> {
    p.as_mut().ok_or(Fail::Null(what))
}

unsafe fn get<'a, T>(p: *const T, what: &'static str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or(Fail::Null(what))
}

unsafe fn string(p: *const c_char, what: &'static str) -> Result<String, Fail> {
    if p.is_null() {
        return Err(Fail::Null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map(str::to_owned)
        .map_err(|_| Fail::Core(Error::InvalidArgument(format!("`{what}` is not valid UTF-8"))))
}

unsafe fn free_box<T>(p: *mut T) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn modify_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Static name of a status code, e.g. `"config"`.
#[no_mangle]
pub extern "C" fn modify_status_name(status: ModifyStatus) -> *const c_char {
    let s: &'static str = match status {
        ModifyStatus::Ok => "ok\0",
        ModifyStatus::NullPointer => "null pointer\0",
        ModifyStatus::InvalidArgument => "invalid argument\0",
        ModifyStatus::Config => "config\0",
        ModifyStatus::Divergence => "divergence\0",
        ModifyStatus::Data => "data\0",
        ModifyStatus::Panic => "panic\0",
    };
    s.as_ptr().cast()
}

/// Byte length of this thread's last error message, 0 if the last call succeeded.
#[no_mangle]
pub extern "C" fn modify_last_error_length() -> usize {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(0, |c| c.as_bytes().len()))
}

/// Copy the last error message into `buf` (always NUL-terminated when
/// `cap > 0`, truncated if needed). Returns the full message length.
///
/// # Safety
/// `buf` must be null or point to `cap` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn modify_last_error_message(buf: *mut c_char, cap: usize) -> usize {
    LAST_ERROR.with(|e| {
        let e = e.borrow();
        let bytes = e.as_ref().map_or(&[][..], |c| c.as_bytes());
        if !buf.is_null() && cap > 0 {
            let n = bytes.len().min(cap - 1);
            ptr::copy_nonoverlapping(bytes.as_ptr().cast(), buf, n);
            *buf.add(n) = 0;
        }
        bytes.len()
    })
}

/// # Safety
/// `out_bank` must be a valid pointer to a handle slot.
#[no_mangle]
pub unsafe extern "C" fn modify_loss_bank_new(
    n: usize,
    alpha: f64,
    lambda: f64,
    out_bank: *mut *mut ModifyLossBank,
) -> ModifyStatus {
    guard(|| {
        let slot = out(out_bank, "out_bank")?;
        *slot = Box::into_raw(Box::new(ModifyLossBank(LossBank::new(n, alpha, lambda)?)));
        Ok(())
    })
}

/// # Safety
/// `bank` must be null or a handle from [`modify_loss_bank_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn modify_loss_bank_free(bank: *mut ModifyLossBank) {
    free_box(bank)
}

/// # Safety
/// Pointers must be valid; `bank` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn modify_loss_bank_len(bank: *const ModifyLossBank, out_len: *mut usize) -> ModifyStatus {
    guard(|| {
        *out(out_len, "out_len")? = get(bank, "bank")?.0.len();
        Ok(())
    })
}

/// Momentum write `V[id] = lambda * V[id] + (1 - lambda) * loss`.
///
/// # Safety
/// `bank` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn modify_loss_bank_update(bank: *mut ModifyLossBank, id: usize, loss: f64) -> ModifyStatus {
    guard(|| {
        out(bank, "bank")?.0.update(id, loss)?;
        Ok(())
    })
}

/// Fraction of bank entries strictly below `loss`.
///
/// # Safety
/// Pointers must be valid; `bank` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn modify_loss_bank_difficulty(
    bank: *const ModifyLossBank,
    loss: f64,
    out_d: *mut f64,
) -> ModifyStatus {
    guard(|| {
        let d = get(bank, "bank")?.0.difficulty(loss)?.value();
        *out(out_d, "out_d")? = d;
        Ok(())
    })
}

/// # Safety
/// Pointers must be valid; `bank` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn modify_loss_bank_value(
    bank: *const ModifyLossBank,
    id: usize,
    out_value: *mut f64,
) -> ModifyStatus {
    guard(|| {
        let v = get(bank, "bank")?.0.value(id)?;
        *out(out_value, "out_value")? = v;
        Ok(())
    })
}

/// # Safety
/// `out_tracker` must be a valid pointer to a handle slot.
#[no_mangle]
pub unsafe extern "C" fn modify_capability_tracker_new(out_tracker: *mut *mut ModifyCapabilityTracker) -> ModifyStatus {
    guard(|| {
        *out(out_tracker, "out_tracker")? = Box::into_raw(Box::new(ModifyCapabilityTracker(CapabilityTracker::new())));
        Ok(())
    })
}

/// # Safety
/// `tracker` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn modify_capability_tracker_free(tracker: *mut ModifyCapabilityTracker) {
    free_box(tracker)
}

/// Record `loss` and return the min-max normalized capability.
///
/// # Safety
/// Pointers must be valid; `tracker` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn modify_capability_tracker_observe(
    tracker: *mut ModifyCapabilityTracker,
    loss: f64,
    out_capability: *mut f64,
) -> ModifyStatus {
    guard(|| {
        let out_c = out(out_capability, "out_capability")?;
        *out_c = out(tracker, "tracker")?.0.capability(loss)?;
        Ok(())
    })
}

/// Augmentation probability `1 - d`.
///
/// # Safety
/// `out_degree` must be valid.
#[no_mangle]
pub unsafe extern "C" fn modify_da_degree(d: f64, out_degree: *mut f64) -> ModifyStatus {
    guard(|| {
        *out(out_degree, "out_degree")? = da_degree(DifficultyDegree::new(d)?);
        Ok(())
    })
}

/// Gate weight, 1.0 iff `t_easy < d < t_hard`, else 0.0.
///
/// # Safety
/// `out_weight` must be valid.
#[no_mangle]
pub unsafe extern "C" fn modify_no_gate(d: f64, t_easy: f64, t_hard: f64, out_weight: *mut f64) -> ModifyStatus {
    guard(|| {
        let th = GateThresholds::new(t_easy, t_hard)?;
        *out(out_weight, "out_weight")? = no_gate(DifficultyDegree::new(d)?, th).value();
        Ok(())
    })
}

/// Permute the channels of an interleaved RGB buffer in place: output
/// channel `c` takes input channel `perm[c]`.
///
/// # Safety
/// `data` must point to `3 * n_pixels` doubles and `perm` to 3 bytes.
#[no_mangle]
pub unsafe extern "C" fn modify_rgb_shuffle(data: *mut f64, n_pixels: usize, perm: *const u8) -> ModifyStatus {
    guard(|| {
        if data.is_null() {
            return Err(Fail::Null("data"));
        }
        if perm.is_null() {
            return Err(Fail::Null("perm"));
        }
        let p = ChannelPermutation::new([*perm, *perm.add(1), *perm.add(2)])?;
        let buf = std::slice::from_raw_parts_mut(data, 3 * n_pixels);
        let img = Image::new(1, n_pixels, 3, buf.to_vec())?;
        buf.copy_from_slice(rgb_shuffle(&img, p)?.data());
        Ok(())
    })
}

/// Parse `key = value` config text; it must set `mode`.
///
/// # Safety
/// `text` must be NUL-terminated; `out_config` must be valid.
#[no_mangle]
pub unsafe extern "C" fn modify_config_parse(text: *const c_char, out_config: *mut *mut ModifyConfig) -> ModifyStatus {
    guard(|| {
        let slot = out(out_config, "out_config")?;
        let text = Some(string(text, "text")?);
        let cfg = parse_config(text.as_deref(), &[])?;
        *slot = Box::into_raw(Box::new(ModifyConfig { text, overrides: Vec::new(), cfg }));
        Ok(())
    })
}

/// Override one key (same names as the config file). The handle is left
/// unchanged when the result would be invalid.
///
/// # Safety
/// `config` must be a live handle; `key` and `value` NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn modify_config_set(
    config: *mut ModifyConfig,
    key: *const c_char,
    value: *const c_char,
) -> ModifyStatus {
    guard(|| {
        let c = out(config, "config")?;
        let (k, v) = (string(key, "key")?, string(value, "value")?);
        let mut overrides = c.overrides.clone();
        overrides.push((k, v));
        c.cfg = parse_config(c.text.as_deref(), &overrides)?;
        c.overrides = overrides;
        Ok(())
    })
}

/// # Safety
/// `config` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn modify_config_free(config: *mut ModifyConfig) {
    free_box(config)
}

/// Rendered `key = value` text of the effective config; free with
/// [`modify_string_free`].
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn modify_config_to_text(
    config: *const ModifyConfig,
    out_text: *mut *mut c_char,
) -> ModifyStatus {
    guard(|| {
        let text = get(config, "config")?.cfg.to_kv_text();
        *out(out_text, "out_text")? = CString::new(text).unwrap_or_default().into_raw();
        Ok(())
    })
}

/// # Safety
/// `s` must be null or a string returned by this library.
#[no_mangle]
pub unsafe extern "C" fn modify_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Generate the dataset, train and evaluate. Single-threaded and blocking.
///
/// # Safety
/// `config` must be a live handle; `out_result` must be valid.
#[no_mangle]
pub unsafe extern "C" fn modify_train(
    config: *const ModifyConfig,
    out_result: *mut *mut ModifyRunResult,
) -> ModifyStatus {
    guard(|| {
        let slot = out(out_result, "out_result")?;
        let r = train(&get(config, "config")?.cfg)?;
        *slot = Box::into_raw(Box::new(ModifyRunResult(r)));
        Ok(())
    })
}

/// # Safety
/// `result` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn modify_run_result_free(result: *mut ModifyRunResult) {
    free_box(result)
}

/// Number of evaluation domains (source first, then targets).
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn modify_run_result_domain_count(
    result: *const ModifyRunResult,
    out_count: *mut usize,
) -> ModifyStatus {
    guard(|| {
        *out(out_count, "out_count")? = get(result, "result")?.0.accuracies.len();
        Ok(())
    })
}

/// Accuracy on domain `index`; `out_is_source` may be null.
///
/// # Safety
/// `result` and `out_accuracy` must be valid.
#[no_mangle]
pub unsafe extern "C" fn modify_run_result_accuracy(
    result: *const ModifyRunResult,
    index: usize,
    out_accuracy: *mut f64,
    out_is_source: *mut bool,
) -> ModifyStatus {
    guard(|| {
        let acc = &get(result, "result")?.0.accuracies;
        let d = acc.get(index).ok_or(Fail::Core(Error::IdOutOfRange { id: index, len: acc.len() }))?;
        *out(out_accuracy, "out_accuracy")? = d.accuracy;
        if let Some(s) = out_is_source.as_mut() {
            *s = d.is_source;
        }
        Ok(())
    })
}

/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn modify_run_result_mean_target_accuracy(
    result: *const ModifyRunResult,
    out_accuracy: *mut f64,
) -> ModifyStatus {
    guard(|| {
        *out(out_accuracy, "out_accuracy")? = get(result, "result")?.0.mean_target_accuracy();
        Ok(())
    })
}

/// Number of optimizer iterations the run took (including skipped steps).
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn modify_run_result_iterations(
    result: *const ModifyRunResult,
    out_iterations: *mut usize,
) -> ModifyStatus {
    guard(|| {
        *out(out_iterations, "out_iterations")? = get(result, "result")?.0.iterations.len();
        Ok(())
    })
}
