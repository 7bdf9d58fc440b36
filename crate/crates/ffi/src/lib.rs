//! C ABI over the core library: load models and tensor trains, predict,
//! tensorize and gauge-randomize.
//!
//! Every fallible function returns a [`TtsStatus`]; on failure the message
//! is kept in a thread-local slot readable with [`tts_last_error`]. Handles
//! are opaque and must be released with [`tts_model_free`]; strings
//! returned by the library are released with [`tts_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use ttshield::data::Dataset;
use ttshield::predictors::{Model, Scorer};
use ttshield::tensorize::{tensorize_model, BlackBox, TensorizeConfig};
use ttshield::tt::TensorTrain;
use ttshield::Error;

/// Result codes. Zero is success.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TtsStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Shape = 3,
    Domain = 4,
    Argument = 5,
    Parse = 6,
    Io = 7,
    Json = 8,
    Access = 9,
    Training = 10,
    UnsupportedEmbedding = 11,
    Other = 98,
    Panic = 99,
}

impl From<&Error> for TtsStatus {
    fn from(e: &Error) -> Self {
        match e.kind() {
            "shape" => TtsStatus::Shape,
            "domain" | "degenerate" => TtsStatus::Domain,
            "argument" | "config" => TtsStatus::Argument,
            "parse" | "validation" | "csv" => TtsStatus::Parse,
            "io" => TtsStatus::Io,
            "json" => TtsStatus::Json,
            "access" => TtsStatus::Access,
            "training" => TtsStatus::Training,
            "unsupported_embedding" => TtsStatus::UnsupportedEmbedding,
            _ => TtsStatus::Other,
        }
    }
}

/// Opaque handle to a trained model or a tensor train.
pub struct TtsModel {
    inner: Inner,
}

enum Inner {
    Model(Model),
    Tt(TensorTrain),
}

impl TtsModel {
    fn scorer(&self) -> &dyn Scorer {
        match &self.inner {
            Inner::Model(m) => m,
            Inner::Tt(t) => t,
        }
    }

    fn features(&self) -> usize {
        match &self.inner {
            Inner::Model(m) => m.features(),
            Inner::Tt(t) => t.num_inputs(),
        }
    }
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(CString::new(msg).expect("nul bytes removed")));
}

fn clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

/// Run `f`, converting errors and panics into status codes.
fn guard(f: impl FnOnce() -> Result<(), (TtsStatus, String)>) -> TtsStatus {
    clear_error();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => TtsStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("internal panic: {msg}"));
            TtsStatus::Panic
        }
    }
}

fn core_err(e: Error) -> (TtsStatus, String) {
    (TtsStatus::from(&e), e.to_string())
}

fn null(what: &str) -> (TtsStatus, String) {
    (TtsStatus::NullPointer, format!("{what} is null"))
}

unsafe fn read_str<'a>(s: *const c_char, what: &str) -> Result<&'a str, (TtsStatus, String)> {
    if s.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(s)
        .to_str()
        .map_err(|_| (TtsStatus::InvalidUtf8, format!("{what} is not UTF-8")))
}

unsafe fn handle<'a>(m: *const TtsModel) -> Result<&'a TtsModel, (TtsStatus, String)> {
    m.as_ref().ok_or_else(|| null("model handle"))
}

fn parse_document(text: &str) -> Result<TtsModel, Error> {
    let v: serde_json::Value = serde_json::from_str(text)?;
    let inner = if v.get("cores").is_some() {
        Inner::Tt(TensorTrain::from_json(text)?)
    } else {
        Inner::Model(Model::from_json(text)?)
    };
    Ok(TtsModel { inner })
}

fn emit(out: *mut *mut TtsModel, m: TtsModel) {
    // SAFETY: callers checked `out` for null.
    unsafe { *out = Box::into_raw(Box::new(m)) };
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn tts_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failure on this thread, or null. The pointer stays
/// valid until the next library call on the same thread.
#[no_mangle]
pub extern "C" fn tts_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Load a model or tensor train from its JSON document.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn tts_model_load(json: *const c_char, out: *mut *mut TtsModel) -> TtsStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let text = read_str(json, "json")?;
        emit(out, parse_document(text).map_err(core_err)?);
        Ok(())
    })
}

/// Load a model or tensor train from a JSON file.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn tts_model_load_file(path: *const c_char, out: *mut *mut TtsModel) -> TtsStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let path = read_str(path, "path")?;
        let text = std::fs::read_to_string(path).map_err(|e| core_err(e.into()))?;
        emit(out, parse_document(&text).map_err(core_err)?);
        Ok(())
    })
}

/// Release a handle. Null is ignored.
///
/// # Safety
/// `model` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn tts_model_free(model: *mut TtsModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Number of raw input features, or 0 for a null handle.
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn tts_model_num_features(model: *const TtsModel) -> usize {
    model.as_ref().map_or(0, |m| m.features())
}

/// 1 for a tensor train, 0 for a model or a null handle.
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn tts_model_is_tt(model: *const TtsModel) -> i32 {
    model.as_ref().map_or(0, |m| matches!(m.inner, Inner::Tt(_)) as i32)
}

/// Class-1 probability of `n` raw features.
///
/// # Safety
/// `x` must hold `n` doubles and `out` be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn tts_model_predict(model: *const TtsModel, x: *const f64, n: usize, out: *mut f64) -> TtsStatus {
    guard(|| {
        let m = handle(model)?;
        if x.is_null() || out.is_null() {
            return Err(null("x or out"));
        }
        let row = std::slice::from_raw_parts(x, n);
        *out = m.scorer().score(row).map_err(core_err)?;
        Ok(())
    })
}

/// Probabilities of `rows` row-major samples with `cols` features each.
///
/// # Safety
/// `x` must hold `rows * cols` doubles and `out` room for `rows`.
#[no_mangle]
pub unsafe extern "C" fn tts_model_predict_batch(
    model: *const TtsModel,
    x: *const f64,
    rows: usize,
    cols: usize,
    out: *mut f64,
) -> TtsStatus {
    guard(|| {
        let m = handle(model)?;
        if rows == 0 {
            return Ok(());
        }
        if x.is_null() || out.is_null() {
            return Err(null("x or out"));
        }
        let total = rows.checked_mul(cols).ok_or((TtsStatus::Argument, "rows * cols overflows".to_string()))?;
        let xs = std::slice::from_raw_parts(x, total);
        let outs = std::slice::from_raw_parts_mut(out, rows);
        for (o, row) in outs.iter_mut().zip(xs.chunks(cols.max(1))) {
            *o = m.scorer().score(row).map_err(core_err)?;
        }
        Ok(())
    })
}

/// Tensorize a model using `rows` row-major samples as the pivot pool.
/// `bins` discretizes construction queries; 0 queries raw scores.
///
/// # Safety
/// `data` must hold `rows * cols` doubles and `out` be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn tts_tensorize(
    model: *const TtsModel,
    data: *const f64,
    rows: usize,
    cols: usize,
    bins: u32,
    seed: u64,
    out: *mut *mut TtsModel,
) -> TtsStatus {
    guard(|| {
        let m = handle(model)?;
        if data.is_null() || out.is_null() {
            return Err(null("data or out"));
        }
        let Inner::Model(model) = &m.inner else {
            return Err((TtsStatus::Argument, "handle is already a tensor train".into()));
        };
        let total = rows.checked_mul(cols).ok_or((TtsStatus::Argument, "rows * cols overflows".to_string()))?;
        let values = std::slice::from_raw_parts(data, total).to_vec();
        let pool = Dataset::new(cols, values, vec![0; rows]).map_err(core_err)?;
        let access = if bins == 0 { BlackBox::Sbb } else { BlackBox::Wbb(bins as usize) };
        let cfg = match model {
            Model::Lr(_) => TensorizeConfig::lr(access),
            Model::Mlp(_) => TensorizeConfig::mlp(access),
        };
        let tt = tensorize_model(model, &pool, &cfg, seed).map_err(core_err)?.tt;
        emit(out, TtsModel { inner: Inner::Tt(tt) });
        Ok(())
    })
}

/// Gauge-randomized copy of a tensor train.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn tts_tt_gauge_randomize(tt: *const TtsModel, seed: u64, out: *mut *mut TtsModel) -> TtsStatus {
    guard(|| {
        let m = handle(tt)?;
        if out.is_null() {
            return Err(null("out"));
        }
        let Inner::Tt(t) = &m.inner else {
            return Err((TtsStatus::Argument, "handle is not a tensor train".into()));
        };
        emit(out, TtsModel { inner: Inner::Tt(t.gauge_randomize(seed)) });
        Ok(())
    })
}

/// JSON document of a handle; release with [`tts_string_free`].
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn tts_model_to_json(model: *const TtsModel, out: *mut *mut c_char) -> TtsStatus {
    guard(|| {
        let m = handle(model)?;
        if out.is_null() {
            return Err(null("out"));
        }
        let text = match &m.inner {
            Inner::Model(x) => x.to_json(),
            Inner::Tt(t) => t.to_json(),
        }
        .map_err(core_err)?;
        *out = CString::new(text).map_err(|_| (TtsStatus::Json, "document contains NUL".to_string()))?.into_raw();
        Ok(())
    })
}

/// Release a string returned by the library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn tts_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
