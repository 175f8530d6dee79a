use std::ffi::{CStr, CString};
use std::ptr;

use qstab_ffi::*;

fn last_error() -> String {
    let p = qs_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn opa(k1: f64, k2: f64, chi: f64) -> *mut QsSystem {
    let mut sys = ptr::null_mut();
    assert_eq!(unsafe { qs_opa_new(k1, k2, chi, &mut sys) }, QsStatus::Ok);
    assert!(!sys.is_null());
    sys
}

#[test]
fn certify_opa_round_trip() {
    let sys = opa(1.0, 1.0, 0.1);
    let (mut n, mut m, mut p) = (0, 0, 0);
    unsafe {
        assert_eq!(qs_system_dims(sys, &mut n, &mut m, &mut p), QsStatus::Ok);
        assert_eq!((n, m, p), (2, 2, 2));

        let mut norm = 0.0;
        assert_eq!(qs_hinf_norm(sys, &mut norm), QsStatus::Ok);
        assert!((norm - 2.0).abs() < 1e-6);

        let mut cert = ptr::null_mut();
        assert_eq!(qs_certify(sys, 4.5, 0.1, 0.04, &mut cert), QsStatus::Ok);
        let mut verdict = QsVerdict::FailedHurwitz;
        assert_eq!(qs_certificate_verdict(cert, &mut verdict), QsStatus::Ok);
        assert_eq!(verdict, QsVerdict::Certified);

        let mut k = QsConstants::default();
        assert_eq!(qs_certificate_constants(cert, &mut k), QsStatus::Ok);
        assert!(k.c1 >= 1.0 && k.c2 > 0.0 && k.c > 0.0);

        let mut json = ptr::null_mut();
        assert_eq!(qs_certificate_to_json(cert, &mut json), QsStatus::Ok);
        let text = CStr::from_ptr(json).to_str().unwrap().to_owned();
        qs_string_free(json);
        assert_eq!(
            qstab::io::certificate_from_json(&text).unwrap().verdict,
            qstab::Verdict::Certified
        );

        qs_certificate_free(cert);
        qs_system_free(sys);
    }
}

#[test]
fn small_gain_failure_is_a_verdict() {
    let sys = opa(1.0, 1.0, 0.1);
    unsafe {
        let mut cert = ptr::null_mut();
        assert_eq!(qs_certify(sys, 3.0, 0.1, 0.04, &mut cert), QsStatus::Ok);
        let mut verdict = QsVerdict::Certified;
        qs_certificate_verdict(cert, &mut verdict);
        assert_eq!(verdict, QsVerdict::FailedSmallGain);
        let mut k = QsConstants::default();
        assert_eq!(
            qs_certificate_constants(cert, &mut k),
            QsStatus::Unavailable
        );
        assert!(last_error().contains("not certified"));
        qs_certificate_free(cert);
        qs_system_free(sys);
    }
}

#[test]
fn errors_are_reported() {
    let mut sys = ptr::null_mut();
    unsafe {
        assert_eq!(
            qs_opa_new(-1.0, 1.0, 0.1, &mut sys),
            QsStatus::InvalidArgument
        );
        assert!(sys.is_null());
        assert!(!last_error().is_empty());

        assert_eq!(
            qs_opa_new(1.0, 1.0, 0.1, ptr::null_mut()),
            QsStatus::NullPointer
        );
        assert_eq!(
            qs_certify(ptr::null(), 1.0, 0.0, 0.0, &mut ptr::null_mut()),
            QsStatus::NullPointer
        );

        let bad = CString::new("{\"m1\": 3}").unwrap();
        assert_eq!(qs_system_from_json(bad.as_ptr(), &mut sys), QsStatus::Parse);

        // success clears the message
        let mut v = 0.0;
        assert_eq!(qs_opa_hinf(1.0, 0.5, 0.1, &mut v), QsStatus::Ok);
        assert_eq!(v, 4.0);
        assert!(qs_last_error_message().is_null());
    }
}

#[test]
fn system_from_json() {
    // single damped mode: M = 0, N1 = 1, E = 1
    let one = "[[[1.0, 0.0]]]";
    let zero = "[[[0.0, 0.0]]]";
    let json = format!(
        "{{\"m1\":{zero},\"m2\":{zero},\"n1\":{one},\"n2\":{zero},\"e1\":{one},\"e2\":{zero}}}"
    );
    let json = CString::new(json).unwrap();
    let mut sys = ptr::null_mut();
    unsafe {
        assert_eq!(qs_system_from_json(json.as_ptr(), &mut sys), QsStatus::Ok);
        let mut norm = 0.0;
        assert_eq!(qs_hinf_norm(sys, &mut norm), QsStatus::Ok);
        assert!(norm.is_finite() && norm > 0.0);
        qs_system_free(sys);
    }
}

#[test]
fn region_cap_and_version() {
    let mut cap = 0.0;
    unsafe {
        assert_eq!(
            qs_opa_region_cap(1.0, 1.0, 0.1, 4.5, 0.1, 0.04, 0.0, &mut cap),
            QsStatus::Ok
        );
        assert!((cap - 1.0).abs() < 1e-12);
        assert_eq!(
            qs_opa_region_cap(1.0, 1.0, 0.1, 4.5, 0.1, 0.04, -1.0, &mut cap),
            QsStatus::InvalidArgument
        );
    }
    let v = unsafe { CStr::from_ptr(qs_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn header_declares_api() {
    let header =
        std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/qstab.h")).unwrap();
    for name in [
        "qs_certify",
        "qs_last_error_message",
        "qs_string_free",
        "QsConstants",
        "QS_STATUS_OK",
    ] {
        assert!(header.contains(name), "{name} missing from header");
    }
}

#[test]
fn header_compiles_as_c() {
    let header = concat!(env!("CARGO_MANIFEST_DIR"), "/include/qstab.h");
    let Ok(status) = std::process::Command::new("cc")
        .args(["-fsyntax-only", "-Wall", "-Werror", "-x", "c", header])
        .status()
    else {
        eprintln!("no C compiler; skipped");
        return;
    };
    assert!(status.success());
}
