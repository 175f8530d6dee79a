//! C interface to the qstab engine.
//!
//! Every fallible call returns a [`QsStatus`]; on failure the message is kept
//! per thread and read back with [`qs_last_error_message`]. Handles are
//! opaque and must be released with their `_free` function.

// `!(x > 0.0)` is used on purpose so NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use qstab::certify::{certify, hinf_condition};
use qstab::io::{certificate_to_json, SystemSpec};
use qstab::opa::{build_opa, closed_form_hinf, region_z2_cap};
use qstab::{Error, LinearQuantumSystem, OpaParams, SectorBounds, StabilityCertificate, Verdict};

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum QsStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    /// Malformed JSON or matrix shapes.
    Parse = 3,
    Numerical = 4,
    /// No Lyapunov certificate found although the gain condition holds.
    Infeasible = 5,
    /// Requested quantity is absent for this verdict.
    Unavailable = 6,
    Panic = 7,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum QsVerdict {
    Certified = 0,
    FailedHurwitz = 1,
    FailedSmallGain = 2,
}

/// Constants of a certified run.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct QsConstants {
    pub lambda_tilde: f64,
    pub lambda: f64,
    pub c: f64,
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
}

/// Opaque linear quantum system.
pub struct QsSystem(LinearQuantumSystem);

/// Opaque certificate.
pub struct QsCertificate(StabilityCertificate);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn status_of(err: &Error) -> QsStatus {
    match err.root() {
        Error::InvalidParameter(_) | Error::IndexOutOfRange { .. } => QsStatus::InvalidArgument,
        Error::Dimension { .. } | Error::Config(_) | Error::Json(_) => QsStatus::Parse,
        Error::QmiInfeasible(_) => QsStatus::Infeasible,
        _ => QsStatus::Numerical,
    }
}

fn guard(f: impl FnOnce() -> Result<(), (QsStatus, String)>) -> QsStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            QsStatus::Ok
        }
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            QsStatus::Panic
        }
    }
}

fn lift(e: Error) -> (QsStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> (QsStatus, String) {
    (QsStatus::NullPointer, format!("{what} is null"))
}

unsafe fn get<'a, T>(p: *const T, what: &str) -> Result<&'a T, (QsStatus, String)> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn put<T>(out: *mut T, value: T) -> Result<(), (QsStatus, String)> {
    if out.is_null() {
        return Err(null("output pointer"));
    }
    out.write(value);
    Ok(())
}

/// Message of the last failed call on this thread, or null. The pointer
/// stays valid until the next qstab call on the same thread.
#[no_mangle]
pub extern "C" fn qs_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn qs_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Two-mode degenerate parametric amplifier with pump strength `chi`.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn qs_opa_new(
    kappa1: f64,
    kappa2: f64,
    chi: f64,
    out: *mut *mut QsSystem,
) -> QsStatus {
    guard(|| {
        let params = OpaParams::new(kappa1, kappa2, chi).map_err(lift)?;
        let (sys, _) = build_opa(&params).map_err(lift)?;
        put(out, Box::into_raw(Box::new(QsSystem(sys))))
    })
}

/// System from JSON with keys `m1, m2, n1, n2, e1, e2`, each a row-major
/// array of `[re, im]` pairs.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn qs_system_from_json(
    json: *const c_char,
    out: *mut *mut QsSystem,
) -> QsStatus {
    guard(|| {
        if json.is_null() {
            return Err(null("json"));
        }
        let text = CStr::from_ptr(json)
            .to_str()
            .map_err(|e| (QsStatus::Parse, format!("json is not UTF-8: {e}")))?;
        let spec: SystemSpec = serde_json::from_str(text).map_err(|e| lift(e.into()))?;
        let sys = spec.build().map_err(lift)?;
        put(out, Box::into_raw(Box::new(QsSystem(sys))))
    })
}

/// Number of modes `n`, inputs `m` and channels `p`.
///
/// # Safety
/// `sys` must come from this library; out pointers may be null to skip.
#[no_mangle]
pub unsafe extern "C" fn qs_system_dims(
    sys: *const QsSystem,
    n: *mut usize,
    m: *mut usize,
    p: *mut usize,
) -> QsStatus {
    guard(|| {
        let s = &get(sys, "system")?.0;
        for (dst, v) in [(n, s.n), (m, s.m), (p, s.p)] {
            if !dst.is_null() {
                dst.write(v);
            }
        }
        Ok(())
    })
}

/// # Safety
/// `sys` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn qs_system_free(sys: *mut QsSystem) {
    if !sys.is_null() {
        drop(Box::from_raw(sys));
    }
}

/// H∞ norm of the reduced channel map.
///
/// # Safety
/// `sys` must come from this library; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn qs_hinf_norm(sys: *const QsSystem, out: *mut f64) -> QsStatus {
    guard(|| {
        let s = &get(sys, "system")?.0;
        let check = hinf_condition(s, 1.0).map_err(lift)?;
        put(out, check.reduced)
    })
}

/// Runs the certification pipeline. A Hurwitz or small-gain failure is still
/// `QS_STATUS_OK` with the verdict recorded in the certificate.
///
/// # Safety
/// `sys` must come from this library; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn qs_certify(
    sys: *const QsSystem,
    gamma: f64,
    delta1: f64,
    delta2: f64,
    out: *mut *mut QsCertificate,
) -> QsStatus {
    guard(|| {
        let s = &get(sys, "system")?.0;
        let bounds = SectorBounds::new(gamma, delta1, delta2).map_err(lift)?;
        let cert = certify(s, &bounds).map_err(lift)?;
        put(out, Box::into_raw(Box::new(QsCertificate(cert))))
    })
}

/// # Safety
/// `cert` must come from this library; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn qs_certificate_verdict(
    cert: *const QsCertificate,
    out: *mut QsVerdict,
) -> QsStatus {
    guard(|| {
        let v = match get(cert, "certificate")?.0.verdict {
            Verdict::Certified => QsVerdict::Certified,
            Verdict::FailedHurwitz => QsVerdict::FailedHurwitz,
            Verdict::FailedSmallGain => QsVerdict::FailedSmallGain,
        };
        put(out, v)
    })
}

/// `QS_STATUS_UNAVAILABLE` unless the verdict is certified.
///
/// # Safety
/// `cert` must come from this library; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn qs_certificate_constants(
    cert: *const QsCertificate,
    out: *mut QsConstants,
) -> QsStatus {
    guard(|| {
        let k = get(cert, "certificate")?.0.constants.ok_or((
            QsStatus::Unavailable,
            "no constants: system was not certified".to_string(),
        ))?;
        put(
            out,
            QsConstants {
                lambda_tilde: k.lambda_tilde,
                lambda: k.lambda,
                c: k.c,
                c1: k.c1,
                c2: k.c2,
                c3: k.c3,
            },
        )
    })
}

/// Spectral abscissa of the drift matrix.
///
/// # Safety
/// `cert` must come from this library; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn qs_certificate_abscissa(
    cert: *const QsCertificate,
    out: *mut f64,
) -> QsStatus {
    guard(|| put(out, get(cert, "certificate")?.0.abscissa))
}

/// Certificate as JSON; release with [`qs_string_free`].
///
/// # Safety
/// `cert` must come from this library; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn qs_certificate_to_json(
    cert: *const QsCertificate,
    out: *mut *mut c_char,
) -> QsStatus {
    guard(|| {
        let text = certificate_to_json(&get(cert, "certificate")?.0).map_err(lift)?;
        let s = CString::new(text).map_err(|e| (QsStatus::Numerical, e.to_string()))?;
        put(out, s.into_raw())
    })
}

/// # Safety
/// `cert` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn qs_certificate_free(cert: *mut QsCertificate) {
    if !cert.is_null() {
        drop(Box::from_raw(cert));
    }
}

/// # Safety
/// `s` must be a string returned by this library, or null.
#[no_mangle]
pub unsafe extern "C" fn qs_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Closed-form H∞ norm of the amplifier, `max(2/κ1, 2/κ2)`.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn qs_opa_hinf(
    kappa1: f64,
    kappa2: f64,
    chi: f64,
    out: *mut f64,
) -> QsStatus {
    guard(|| {
        let params = OpaParams::new(kappa1, kappa2, chi).map_err(lift)?;
        put(out, closed_form_hinf(&params))
    })
}

/// Largest admissible `|z2|²` at a given `|z1|²` (0 outside the region).
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn qs_opa_region_cap(
    kappa1: f64,
    kappa2: f64,
    chi: f64,
    gamma: f64,
    delta1: f64,
    delta2: f64,
    z1sq: f64,
    out: *mut f64,
) -> QsStatus {
    guard(|| {
        let params = OpaParams::new(kappa1, kappa2, chi).map_err(lift)?;
        let bounds = SectorBounds::new(gamma, delta1, delta2).map_err(lift)?;
        if !(z1sq >= 0.0) {
            return Err((
                QsStatus::InvalidArgument,
                format!("z1sq must be nonnegative, got {z1sq}"),
            ));
        }
        put(out, region_z2_cap(&params, &bounds, z1sq))
    })
}
