use std::ffi::{CStr, CString};
use std::ptr;

use ttshield::cohorts::{generate_cohorts, preset};
use ttshield::predictors::{lr_train, LrHyper, Model, Scorer};
use ttshield_ffi::*;

fn lr_document() -> (String, Vec<f64>, usize) {
    let cohorts = generate_cohorts(&preset("desk").unwrap(), 4).unwrap();
    let d = &cohorts[0].data;
    let m = lr_train(d, &LrHyper::default(), 1).unwrap();
    (Model::Lr(m).to_json().unwrap(), d.values().to_vec(), d.features())
}

fn load(doc: &str) -> *mut TtsModel {
    let c = CString::new(doc).unwrap();
    let mut h = ptr::null_mut();
    assert_eq!(unsafe { tts_model_load(c.as_ptr(), &mut h) }, TtsStatus::Ok);
    assert!(!h.is_null());
    h
}

fn last_error() -> String {
    let p = tts_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn predictions_match_the_core_library() {
    let (doc, values, p) = lr_document();
    let h = load(&doc);
    let model = Model::from_json(&doc).unwrap();
    assert_eq!(unsafe { tts_model_num_features(h) }, p);
    assert_eq!(unsafe { tts_model_is_tt(h) }, 0);
    let mut out = 0.0;
    assert_eq!(unsafe { tts_model_predict(h, values.as_ptr(), p, &mut out) }, TtsStatus::Ok);
    assert_eq!(out, model.score(&values[..p]).unwrap());
    let mut batch = vec![0.0; 5];
    assert_eq!(unsafe { tts_model_predict_batch(h, values.as_ptr(), 5, p, batch.as_mut_ptr()) }, TtsStatus::Ok);
    for (i, b) in batch.iter().enumerate() {
        assert_eq!(*b, model.score(&values[i * p..(i + 1) * p]).unwrap());
    }
    unsafe { tts_model_free(h) };
}

#[test]
fn tensorize_gauge_and_round_trip() {
    let (doc, values, p) = lr_document();
    let h = load(&doc);
    let rows = values.len() / p;
    let mut tt = ptr::null_mut();
    assert_eq!(unsafe { tts_tensorize(h, values.as_ptr(), rows, p, 0, 7, &mut tt) }, TtsStatus::Ok);
    assert_eq!(unsafe { tts_model_is_tt(tt) }, 1);
    let mut g = ptr::null_mut();
    assert_eq!(unsafe { tts_tt_gauge_randomize(tt, 3, &mut g) }, TtsStatus::Ok);
    let (mut a, mut b) = (0.0, 0.0);
    for i in 0..20 {
        let x = values[i * p..].as_ptr();
        unsafe {
            assert_eq!(tts_model_predict(tt, x, p, &mut a), TtsStatus::Ok);
            assert_eq!(tts_model_predict(g, x, p, &mut b), TtsStatus::Ok);
        }
        assert!((a - b).abs() < 1e-8);
    }
    let mut s = ptr::null_mut();
    assert_eq!(unsafe { tts_model_to_json(g, &mut s) }, TtsStatus::Ok);
    let text = unsafe { CStr::from_ptr(s) }.to_str().unwrap().to_owned();
    unsafe { tts_string_free(s) };
    let again = load(&text);
    let mut c = 0.0;
    assert_eq!(unsafe { tts_model_predict(again, values.as_ptr(), p, &mut c) }, TtsStatus::Ok);
    assert_eq!(unsafe { tts_model_predict(g, values.as_ptr(), p, &mut b) }, TtsStatus::Ok);
    assert_eq!(b, c);
    // a tensor train cannot be tensorized again
    let mut none = ptr::null_mut();
    assert_eq!(unsafe { tts_tensorize(g, values.as_ptr(), rows, p, 2, 1, &mut none) }, TtsStatus::Argument);
    assert!(none.is_null());
    unsafe {
        tts_model_free(h);
        tts_model_free(tt);
        tts_model_free(g);
        tts_model_free(again);
    }
}

#[test]
fn errors_set_codes_and_messages() {
    let mut h = ptr::null_mut();
    let bad = CString::new("{not json").unwrap();
    assert_eq!(unsafe { tts_model_load(bad.as_ptr(), &mut h) }, TtsStatus::Json);
    assert!(last_error().contains("json"));
    assert_eq!(unsafe { tts_model_load(ptr::null(), &mut h) }, TtsStatus::NullPointer);
    let missing = CString::new("/nonexistent/model.json").unwrap();
    assert_eq!(unsafe { tts_model_load_file(missing.as_ptr(), &mut h) }, TtsStatus::Io);

    let (doc, values, p) = lr_document();
    let m = load(&doc);
    let mut out = 0.0;
    assert_eq!(unsafe { tts_model_predict(m, values.as_ptr(), p - 1, &mut out) }, TtsStatus::Shape);
    assert!(!last_error().is_empty());
    assert_eq!(unsafe { tts_model_predict(ptr::null(), values.as_ptr(), p, &mut out) }, TtsStatus::NullPointer);
    // success clears the slot
    assert_eq!(unsafe { tts_model_predict(m, values.as_ptr(), p, &mut out) }, TtsStatus::Ok);
    assert!(tts_last_error().is_null());
    unsafe { tts_model_free(m) };
    unsafe { tts_model_free(ptr::null_mut()) };
}

#[test]
fn last_error_is_per_thread() {
    let bad = CString::new("[]").unwrap();
    let mut h = ptr::null_mut();
    assert_ne!(unsafe { tts_model_load(bad.as_ptr(), &mut h) }, TtsStatus::Ok);
    std::thread::spawn(|| assert!(tts_last_error().is_null())).join().unwrap();
    assert!(!tts_last_error().is_null());
}

#[test]
fn version_matches_the_crate() {
    let v = unsafe { CStr::from_ptr(tts_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}
