use std::ffi::CString;
use std::ptr;

use hamflow_ffi::*;

fn new_system(id: &str) -> (HfStatus, *mut HfSystem) {
    let id = CString::new(id).unwrap();
    let mut h = ptr::null_mut();
    let s = unsafe { hf_system_new(id.as_ptr(), &mut h) };
    (s, h)
}

fn last_error() -> String {
    let mut buf = vec![0u8; 256];
    let n = unsafe { hf_last_error(buf.as_mut_ptr().cast(), buf.len()) };
    buf.truncate(n.min(255));
    String::from_utf8(buf).unwrap()
}

#[test]
fn hyperbolic_handle_round_trip() {
    let (s, h) = new_system("hyperbolic-drift");
    assert_eq!(s, HfStatus::Ok);
    assert!(!h.is_null());
    let y = [0.1, 0.2, 0.3, 0.4];
    let mut e = 0.0;
    let mut x = [0.0; 4];
    unsafe {
        assert_eq!(hf_energy(h, y.as_ptr(), &mut e), HfStatus::Ok);
        assert_eq!(hf_vector_field(h, y.as_ptr(), x.as_mut_ptr()), HfStatus::Ok);
    }
    assert!((e - (0.3 + 0.5 * (0.04 - 0.16))).abs() < 1e-15);
    assert_eq!(x, [1.0, -0.4, 0.0, -0.2]);

    let mut yt = [0.0; 4];
    let mut f = [0.0; 16];
    let y0 = [0.0, 0.3, 0.0, 0.0];
    unsafe {
        assert_eq!(hf_integrate(h, y0.as_ptr(), 1.0, 1e-3, yt.as_mut_ptr(), f.as_mut_ptr()), HfStatus::Ok);
        assert_eq!(hf_integrate(h, y0.as_ptr(), 1.0, 1e-3, yt.as_mut_ptr(), ptr::null_mut()), HfStatus::Ok);
    }
    assert!((yt[1] - 0.3 * 1f64.cosh()).abs() < 1e-6);
    // Row-major: F[1][3] = d y2(1) / d y4(0) = -sinh 1.
    assert!((f[4 + 3] + 1f64.sinh()).abs() < 1e-6);

    let mut lambda = 0.0;
    unsafe {
        assert_eq!(hf_upper_exponent(h, [0.0; 4].as_ptr(), 10.0, 1e-3, &mut lambda), HfStatus::Ok);
        hf_system_free(h);
    }
    assert!((lambda - 1.0).abs() < 1e-6);
}

#[test]
fn errors_map_to_status_codes() {
    let (s, h) = new_system("no-such-system");
    assert_eq!(s, HfStatus::InvalidArgument);
    assert!(h.is_null());
    assert!(last_error().contains("no-such-system"));

    let (_, q) = new_system("quadratic(1,1,1,1)");
    let mut out = 0.0;
    unsafe {
        assert_eq!(hf_upper_exponent(q, [0.0; 4].as_ptr(), 1.0, 1e-3, &mut out), HfStatus::NotRegular);
        assert_eq!(hf_upper_exponent(q, [1.0, 0.0, 0.0, 0.0].as_ptr(), -1.0, 1e-3, &mut out), HfStatus::InvalidArgument);
        assert_eq!(hf_energy(q, ptr::null(), &mut out), HfStatus::NullPointer);
        assert_eq!(hf_energy(ptr::null(), [0.0; 4].as_ptr(), &mut out), HfStatus::NullPointer);
        hf_system_free(q);
        hf_system_free(ptr::null_mut());
    }
    let (_, e) = new_system("elliptic-drift");
    unsafe {
        let st = hf_upper_exponent(e, [0.0, 0.1, 0.0, 0.0].as_ptr(), 5.0, 1e-3, &mut out);
        assert_eq!(st, HfStatus::Ok);
        assert_eq!(last_error(), "");
        hf_system_free(e);
    }
}

#[test]
fn last_error_truncates_safely() {
    let _ = new_system("no-such-system");
    let full = unsafe { hf_last_error(ptr::null_mut(), 0) };
    let mut small = [0x7fu8; 8];
    let n = unsafe { hf_last_error(small.as_mut_ptr().cast(), small.len()) };
    assert_eq!(n, full);
    assert_eq!(small[7], 0);
}

#[test]
fn bump_certificate_counts_violations() {
    let mut c = HfCertificate::default();
    unsafe {
        assert_eq!(hf_certify_bump(0.01, 0.1, 0.5, 0.5, 1296, &mut c), HfStatus::Ok);
    }
    assert_eq!(c.violations, 0);
    assert!(c.c2 > 0.0 && c.rotation_error < 1e-6);
    unsafe {
        assert_eq!(hf_certify_bump(10.0, 0.1, 0.5, 0.5, 1296, &mut c), HfStatus::Ok);
        assert_eq!(hf_certify_bump(0.01, 2.0, 0.5, 0.5, 1296, &mut c), HfStatus::InvalidArgument);
    }
    assert!(c.violations > 0 || c.c2 > 0.5);
}

#[test]
fn header_declares_every_export() {
    let header = include_str!("../include/hamflow.h");
    for name in [
        "hf_system_new",
        "hf_system_free",
        "hf_energy",
        "hf_vector_field",
        "hf_integrate",
        "hf_upper_exponent",
        "hf_certify_bump",
        "hf_last_error",
        "typedef struct HfSystem HfSystem",
        "HF_STATUS_OK = 0",
    ] {
        assert!(header.contains(name), "{name}");
    }
}
