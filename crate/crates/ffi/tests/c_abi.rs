use std::ffi::{CStr, CString};
use std::ptr;

use lucenet_ffi::*;

fn last_error() -> String {
    let p = lucenet_last_error();
    assert!(!p.is_null(), "expected an error message");
    let s = unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned();
    unsafe { lucenet_string_free(p) };
    s
}

fn small_model(seed: u64) -> *mut LucenetModel {
    let layout = [1usize, 1];
    let mut m = ptr::null_mut();
    let st = unsafe { lucenet_model_build(16, 4, 2, layout.as_ptr(), layout.len(), seed, &mut m) };
    assert_eq!(st, LucenetStatus::Ok);
    assert!(!m.is_null());
    m
}

#[test]
fn metrics_match_reference_counts() {
    let mut out = LucenetMetrics { sensitivity: 0.0, specificity: 0.0, accuracy: 0.0 };
    assert_eq!(unsafe { lucenet_metrics(16, 1, 22, 1, &mut out) }, LucenetStatus::Ok);
    assert!((out.sensitivity - 16.0 / 17.0).abs() < 1e-12);
    assert!((out.specificity - 22.0 / 23.0).abs() < 1e-12);
    assert!((out.accuracy - 38.0 / 40.0).abs() < 1e-12);
    assert_eq!(unsafe { lucenet_metrics(0, 1, 3, 0, &mut out) }, LucenetStatus::Ok);
    assert!(out.sensitivity.is_nan());
}

#[test]
fn auc_and_single_class_error() {
    let scores = [0.9, 0.8, 0.3, 0.8];
    let labels = [1u8, 0, 0, 1];
    let mut auc = 0.0;
    assert_eq!(unsafe { lucenet_auc(scores.as_ptr(), labels.as_ptr(), 4, &mut auc) }, LucenetStatus::Ok);
    // Pairs: (0.9>0.8, 0.9>0.3, 0.8=0.8, 0.8>0.3) -> 3.5 / 4.
    assert!((auc - 0.875).abs() < 1e-12);
    let ones = [1u8; 4];
    assert_eq!(unsafe { lucenet_auc(scores.as_ptr(), ones.as_ptr(), 4, &mut auc) }, LucenetStatus::InvalidArgument);
    assert!(last_error().contains("both classes"));
}

#[test]
fn build_predict_save_load_round_trip() {
    let m = small_model(7);
    assert_eq!(unsafe { lucenet_model_input_size(m) }, 16);
    let pixels: Vec<f32> = (0..2 * 256).map(|i| (i % 17) as f32 / 17.0).collect();
    let mut logits = [0.0f32; 2];
    assert_eq!(unsafe { lucenet_model_predict(m, pixels.as_ptr(), 2, logits.as_mut_ptr()) }, LucenetStatus::Ok);

    let dir = tempfile::tempdir().unwrap();
    let path = CString::new(dir.path().join("m.ckpt").to_str().unwrap()).unwrap();
    assert_eq!(unsafe { lucenet_model_save(m, path.as_ptr()) }, LucenetStatus::Ok);
    let mut loaded = ptr::null_mut();
    assert_eq!(unsafe { lucenet_model_load(path.as_ptr(), &mut loaded) }, LucenetStatus::Ok);
    let mut again = [0.0f32; 2];
    assert_eq!(unsafe { lucenet_model_predict(loaded, pixels.as_ptr(), 2, again.as_mut_ptr()) }, LucenetStatus::Ok);
    assert_eq!(logits, again);

    let (mut a, mut b) = (ptr::null_mut(), ptr::null_mut());
    unsafe {
        assert_eq!(lucenet_model_fingerprint(m, &mut a), LucenetStatus::Ok);
        assert_eq!(lucenet_model_fingerprint(loaded, &mut b), LucenetStatus::Ok);
        assert_eq!(CStr::from_ptr(a), CStr::from_ptr(b));
        assert_eq!(CStr::from_ptr(a).to_bytes().len(), 64);
        lucenet_string_free(a);
        lucenet_string_free(b);
        lucenet_model_free(m);
        lucenet_model_free(loaded);
    }
}

#[test]
fn saliency_is_nonnegative_and_checks_size() {
    let m = small_model(3);
    let pixels = vec![0.5f32; 256];
    let mut map = vec![-1.0f32; 256];
    assert_eq!(unsafe { lucenet_saliency(m, pixels.as_ptr(), 16, 16, map.as_mut_ptr()) }, LucenetStatus::Ok);
    assert!(map.iter().all(|&v| v >= 0.0 && v.is_finite()));
    let mut wrong = vec![0.0f32; 64];
    assert_eq!(unsafe { lucenet_saliency(m, pixels.as_ptr(), 8, 8, wrong.as_mut_ptr()) }, LucenetStatus::Shape);
    assert!(!last_error().is_empty());
    unsafe { lucenet_model_free(m) };
}

#[test]
fn errors_carry_status_and_message() {
    let mut m = ptr::null_mut();
    let missing = CString::new("/nonexistent/model.ckpt").unwrap();
    assert_eq!(unsafe { lucenet_model_load(missing.as_ptr(), &mut m) }, LucenetStatus::Io);
    assert!(last_error().contains("/nonexistent/model.ckpt"));

    let dir = tempfile::tempdir().unwrap();
    let junk = dir.path().join("junk.ckpt");
    std::fs::write(&junk, b"not a checkpoint").unwrap();
    let junk = CString::new(junk.to_str().unwrap()).unwrap();
    assert_eq!(unsafe { lucenet_model_load(junk.as_ptr(), &mut m) }, LucenetStatus::Format);
    assert!(last_error().contains("magic"));

    assert_eq!(unsafe { lucenet_model_load(ptr::null(), &mut m) }, LucenetStatus::NullPointer);
    assert_eq!(unsafe { lucenet_model_save(ptr::null(), missing.as_ptr()) }, LucenetStatus::NullPointer);
    let layout = [1usize];
    assert_eq!(unsafe { lucenet_model_build(16, 0, 2, layout.as_ptr(), 1, 0, &mut m) }, LucenetStatus::InvalidArgument);

    // A success clears the message.
    let mut out = LucenetMetrics { sensitivity: 0.0, specificity: 0.0, accuracy: 0.0 };
    assert_eq!(unsafe { lucenet_metrics(1, 1, 1, 1, &mut out) }, LucenetStatus::Ok);
    assert!(lucenet_last_error().is_null());
    unsafe { lucenet_string_free(ptr::null_mut()) };
    unsafe { lucenet_model_free(ptr::null_mut()) };
}

#[test]
fn version_is_static() {
    let v = unsafe { CStr::from_ptr(lucenet_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}
