use std::ffi::{CStr, CString};
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use osde_ffi::*;

fn data() -> (Vec<f64>, Vec<f64>) {
    let x: Vec<f64> = (0..150).map(|i| (0.41 * i as f64).sin() + 0.3 * (1.7 * i as f64).cos()).collect();
    (x, vec![8.0; 150])
}

fn fitted(method: OsdeMethod) -> *mut OsdeEstimate {
    let (x, w) = data();
    let mut est = ptr::null_mut();
    let status = unsafe { osde_fit(x.as_ptr(), w.as_ptr(), x.len(), 1200, f64::NAN, method, 0.01, &mut est) };
    assert_eq!(status, OsdeStatus::Ok);
    assert!(!est.is_null());
    est
}

fn last_error() -> String {
    unsafe { CStr::from_ptr(osde_last_error_message()) }.to_string_lossy().into_owned()
}

#[test]
fn fit_matches_library() {
    let (x, w) = data();
    let est = fitted(OsdeMethod::Truncated);
    let scaling = osde::basis::fit_scaling(&x, 0.01).unwrap();
    let sample = osde::design::WeightedSample::new(x, w, 1200, -1.0 / 150.0).unwrap();
    let direct = osde::estimator::fit(&sample, &scaling, osde::estimator::Method::Truncated).unwrap();
    let valid = osde::estimator::project_to_density(&direct, 256).unwrap();
    unsafe {
        assert_eq!(osde_estimate_cutoff(est), direct.cutoff());
        assert_eq!(osde_estimate_shift(est), valid.shift());
        for u in [0.0, 0.25, 0.6, 1.0] {
            let (mut f, mut raw, mut sd) = (0.0, 0.0, 0.0);
            assert_eq!(osde_estimate_eval(est, u, &mut f), OsdeStatus::Ok);
            assert_eq!(osde_estimate_eval_raw(est, u, &mut raw), OsdeStatus::Ok);
            assert_eq!(osde_estimate_design_sd(est, u, &mut sd), OsdeStatus::Ok);
            assert_eq!(f, valid.evaluate(u).unwrap());
            assert_eq!(raw, direct.evaluate(u).unwrap());
            assert_eq!(sd, direct.design_sd(u).unwrap());
        }
        let mut outside = 1.0;
        assert_eq!(osde_estimate_eval_x(est, 1e6, &mut outside), OsdeStatus::Ok);
        assert_eq!(outside, 0.0);
        osde_estimate_free(est);
    }
}

#[test]
fn json_round_trip() {
    let est = fitted(OsdeMethod::Smoothed);
    unsafe {
        let mut json = ptr::null_mut();
        assert_eq!(osde_estimate_to_json(est, &mut json), OsdeStatus::Ok);
        let mut back = ptr::null_mut();
        assert_eq!(osde_estimate_from_json(json, &mut back), OsdeStatus::Ok);
        let mut a = vec![0.0; 1024];
        let mut b = vec![0.0; 1024];
        assert_eq!(osde_estimate_grid(est, 1024, a.as_mut_ptr()), OsdeStatus::Ok);
        assert_eq!(osde_estimate_grid(back, 1024, b.as_mut_ptr()), OsdeStatus::Ok);
        assert_eq!(a, b);
        osde_string_free(json);
        osde_estimate_free(back);
        osde_estimate_free(est);
    }
}

#[test]
fn errors_map_to_status_codes() {
    unsafe {
        let mut out = 0.0;
        assert_eq!(osde_phi(1, 1.5, &mut out), OsdeStatus::Domain);
        assert!(last_error().contains("unit interval"));
        assert_eq!(osde_phi(1, 0.25, &mut out), OsdeStatus::Ok);
        assert!((out - 1.0).abs() < 1e-15);
        assert!(last_error().is_empty());

        assert_eq!(osde_phi(1, 0.5, ptr::null_mut()), OsdeStatus::NullPointer);
        assert_eq!(osde_estimate_eval(ptr::null(), 0.5, &mut out), OsdeStatus::NullPointer);

        let x = [1.0, 1.0, 1.0];
        let mut est = ptr::null_mut();
        let s = osde_fit(x.as_ptr(), ptr::null(), 3, 30, f64::NAN, OsdeMethod::Truncated, 0.0, &mut est);
        assert_eq!(s, OsdeStatus::Degenerate);
        assert!(est.is_null());

        let bad = CString::new(r#"{"format_version": 1}"#).unwrap();
        assert_eq!(osde_estimate_from_json(bad.as_ptr(), &mut est), OsdeStatus::Parse);

        let weights = [0.5, 0.5, 0.5];
        let x = [1.0, 2.0, 3.0];
        let s = osde_fit(x.as_ptr(), weights.as_ptr(), 3, 30, f64::NAN, OsdeMethod::Truncated, 0.0, &mut est);
        assert_eq!(s, OsdeStatus::InvalidArgument);

        assert_eq!(osde_estimate_cutoff(ptr::null()), 0);
        assert!(osde_estimate_shift(ptr::null()).is_nan());
        osde_estimate_free(ptr::null_mut());
        osde_string_free(ptr::null_mut());
    }
}

#[test]
fn theory_through_abi() {
    let mut out = 0.0;
    unsafe {
        assert_eq!(osde_minimax_lower_bound(1.0, 1.0, 2.0, 1000, &mut out), OsdeStatus::Ok);
    }
    let expected = (1.0 / (4.0 * std::f64::consts::PI)).powf(2.0 / 3.0) / 100.0;
    assert!((out - expected).abs() / expected < 1e-12);
    unsafe {
        assert_eq!(osde_minimax_lower_bound(0.0, 1.0, 2.0, 1000, &mut out), OsdeStatus::InvalidArgument);
    }
}

#[test]
fn header_declares_the_api() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/osde.h")).unwrap();
    for name in [
        "osde_fit",
        "osde_estimate_from_json",
        "osde_estimate_to_json",
        "osde_estimate_eval",
        "osde_estimate_eval_x",
        "osde_estimate_eval_raw",
        "osde_estimate_design_sd",
        "osde_estimate_grid",
        "osde_estimate_cutoff",
        "osde_estimate_shift",
        "osde_estimate_free",
        "osde_string_free",
        "osde_last_error_message",
        "osde_phi",
        "osde_minimax_lower_bound",
        "OSDE_STATUS_OK",
        "typedef struct OsdeEstimate OsdeEstimate;",
    ] {
        assert!(header.contains(name), "{name} missing from header");
    }
}

fn static_lib() -> Option<PathBuf> {
    // target/<profile>/deps/abi-<hash> -> target/<profile>/libosde_ffi.a
    let exe = std::env::current_exe().ok()?;
    let lib = exe.parent()?.parent()?.join("libosde_ffi.a");
    lib.exists().then_some(lib)
}

#[test]
fn c_program_links_against_static_library() {
    let Some(lib) = static_lib() else {
        panic!("libosde_ffi.a not found next to the test binary");
    };
    let dir = tempfile::tempdir().unwrap();
    let exe = dir.path().join("smoke");
    let manifest = env!("CARGO_MANIFEST_DIR");
    let status = Command::new("cc")
        .arg(format!("{manifest}/tests/c/smoke.c"))
        .arg(format!("-I{manifest}/include"))
        .arg("-std=c11")
        .arg("-Wall")
        .arg("-Werror")
        .arg("-o")
        .arg(&exe)
        .arg(&lib)
        .args(["-lm", "-lpthread", "-ldl"])
        .status()
        .expect("run cc");
    assert!(status.success(), "C compile failed");
    let out = Command::new(&exe).output().unwrap();
    assert!(out.status.success(), "C program exited with {:?}", out.status.code());
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("J="));
}
