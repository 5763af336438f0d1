use std::ffi::{CStr, CString};
use std::ptr;

use qckmeans_ffi::*;

fn last_error() -> String {
    let p = qck_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn run_round_trip() {
    unsafe {
        let name = CString::new("circles").unwrap();
        let mut data = ptr::null_mut();
        assert_eq!(qck_dataset_synthetic(name.as_ptr(), 120, 3, &mut data), QckStatus::Ok);
        assert_eq!(qck_dataset_rows(data), 120);
        assert_eq!(qck_dataset_cols(data), 2);

        let mut cfg = ptr::null_mut();
        assert_eq!(qck_config_new(3, &mut cfg), QckStatus::Ok);
        assert_eq!(qck_config_set_candidates(cfg, 4), QckStatus::Ok);
        assert_eq!(qck_config_set_analytic(cfg, true), QckStatus::Ok);

        let mut res = ptr::null_mut();
        assert_eq!(qck_run(data, cfg, 7, &mut res), QckStatus::Ok);
        assert_eq!(qck_result_k(res), 3);
        assert_eq!(qck_result_dim(res), 2);
        assert_eq!(qck_result_len(res), 120);
        assert_eq!(qck_result_q_peak(res), qck_q_peak(4, 120));
        assert!(qck_result_sse(res).is_finite());

        let mut centroids = [0.0; 6];
        assert_eq!(qck_result_centroids(res, centroids.as_mut_ptr(), 6), QckStatus::Ok);
        assert!(centroids.iter().all(|c| c.is_finite()));
        let mut assignment = vec![0usize; 120];
        assert_eq!(qck_result_assignment(res, assignment.as_mut_ptr(), 120), QckStatus::Ok);
        assert!(assignment.iter().all(|&a| a < 3));

        let mut json = ptr::null_mut();
        assert_eq!(qck_result_to_json(res, &mut json), QckStatus::Ok);
        let text = CStr::from_ptr(json).to_str().unwrap().to_owned();
        qck_string_free(json);
        let parsed: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(parsed["q_peak"], qck_result_q_peak(res));

        // Same seed through the same handles gives the same answer.
        let mut again = ptr::null_mut();
        assert_eq!(qck_run(data, cfg, 7, &mut again), QckStatus::Ok);
        assert_eq!(qck_result_sse(again), qck_result_sse(res));

        qck_result_free(again);
        qck_result_free(res);
        qck_config_free(cfg);
        qck_dataset_free(data);
    }
}

#[test]
fn buffer_dataset_and_values() {
    let values = [0.0, 1.0, 2.0, 3.0, 4.0, 5.0];
    unsafe {
        let mut data = ptr::null_mut();
        assert_eq!(qck_dataset_from_buffer(values.as_ptr(), 3, 2, &mut data), QckStatus::Ok);
        let mut copy = [0.0; 6];
        assert_eq!(qck_dataset_values(data, copy.as_mut_ptr(), 6), QckStatus::Ok);
        assert_eq!(copy, values);
        assert_eq!(qck_dataset_values(data, copy.as_mut_ptr(), 5), QckStatus::BufferTooSmall);
        qck_dataset_free(data);
    }
}

#[test]
fn errors_map_to_codes() {
    unsafe {
        let mut data = ptr::null_mut();
        let nan = [f64::NAN, 1.0];
        assert_eq!(qck_dataset_from_buffer(nan.as_ptr(), 1, 2, &mut data), QckStatus::InvalidData);
        assert!(data.is_null());
        assert!(!last_error().is_empty());

        assert_eq!(qck_dataset_from_buffer(ptr::null(), 1, 2, &mut data), QckStatus::NullPointer);

        let missing = CString::new("/nonexistent/qckmeans.csv").unwrap();
        assert_eq!(qck_dataset_from_csv(missing.as_ptr(), false, b',' as _, &mut data), QckStatus::Io);

        let bad = CString::new("nope").unwrap();
        assert_eq!(qck_dataset_synthetic(bad.as_ptr(), 50, 0, &mut data), QckStatus::InvalidParameter);

        let json = CString::new("{\"k\": ").unwrap();
        let mut cfg = ptr::null_mut();
        assert_eq!(qck_config_from_json(json.as_ptr(), &mut cfg), QckStatus::Json);

        assert_eq!(qck_config_new(3, &mut cfg), QckStatus::Ok);
        assert_eq!(qck_config_set_noise(cfg, 1.5, 0.0, 0.0), QckStatus::InvalidParameter);
        qck_config_free(cfg);

        assert!(qck_result_sse(ptr::null()).is_nan());
        qck_result_free(ptr::null_mut());
    }
}

#[test]
fn capacity_is_reported() {
    unsafe {
        let name = CString::new("blobs").unwrap();
        let mut data = ptr::null_mut();
        assert_eq!(qck_dataset_synthetic(name.as_ptr(), 100, 0, &mut data), QckStatus::Ok);
        let json = CString::new(r#"{"k": 10, "candidates": 6, "formulation": "coupled", "analytic": true}"#).unwrap();
        let mut cfg = ptr::null_mut();
        assert_eq!(qck_config_from_json(json.as_ptr(), &mut cfg), QckStatus::Ok);
        let mut res = ptr::null_mut();
        assert_eq!(qck_run(data, cfg, 0, &mut res), QckStatus::Capacity);
        assert!(res.is_null());
        assert!(!last_error().is_empty());
        qck_config_free(cfg);
        qck_dataset_free(data);
    }
}

#[test]
fn config_json_round_trip() {
    unsafe {
        let mut cfg = ptr::null_mut();
        assert_eq!(qck_config_new(4, &mut cfg), QckStatus::Ok);
        assert_eq!(qck_config_set_solver(cfg, QckSolver::Exhaustive), QckStatus::Ok);
        assert_eq!(qck_config_set_frequencies(cfg, 12), QckStatus::Ok);
        let mut json = ptr::null_mut();
        assert_eq!(qck_config_to_json(cfg, &mut json), QckStatus::Ok);
        let v: serde_json::Value = serde_json::from_str(CStr::from_ptr(json).to_str().unwrap()).unwrap();
        assert_eq!(v["k"], 4);
        assert_eq!(v["m"], 12);
        assert_eq!(v["solver"], "exhaustive");
        qck_string_free(json);
        qck_config_free(cfg);
    }
}

#[test]
fn header_declares_exports() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/qckmeans.h")).unwrap();
    for sym in ["qck_run", "qck_dataset_from_buffer", "qck_last_error_message", "QckStatus", "QCK_STATUS_CAPACITY"] {
        assert!(header.contains(sym), "{sym} missing from header");
    }
}
