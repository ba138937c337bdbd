use std::ffi::CStr;
use std::ptr;

use mapber_ffi::*;

fn model(delta: f64, sigma2: f64) -> *mut MapberModel {
    let mut m = ptr::null_mut();
    assert_eq!(
        unsafe { mapber_model_new(delta, sigma2, &mut m) },
        MapberStatus::Ok
    );
    assert!(!m.is_null());
    m
}

fn last_error() -> String {
    let mut buf = vec![0 as std::ffi::c_char; 256];
    unsafe { mapber_last_error_message(buf.as_mut_ptr(), buf.len()) };
    unsafe { CStr::from_ptr(buf.as_ptr()) }
        .to_string_lossy()
        .into_owned()
}

#[test]
fn scalar_functions() {
    let mut v = 0.0;
    assert_eq!(unsafe { mapber_q_tail(1.0, &mut v) }, MapberStatus::Ok);
    assert!((v - 0.15865525393145705).abs() < 1e-16);
    assert_eq!(unsafe { mapber_q_inv(v, &mut v) }, MapberStatus::Ok);
    assert!((v - 1.0).abs() < 1e-12);
    assert_eq!(unsafe { mapber_phi(0.0, &mut v) }, MapberStatus::Ok);
    assert!((v - 0.3989422804014327).abs() < 1e-16);
    assert_eq!(unsafe { mapber_q_inv(1.5, &mut v) }, MapberStatus::Domain);
    assert!(last_error().contains("domain"), "{}", last_error());
    assert_eq!(
        unsafe { mapber_phi(0.0, ptr::null_mut()) },
        MapberStatus::NullPointer
    );
}

#[test]
fn model_lifecycle_and_errors() {
    let mut m = ptr::null_mut();
    assert_eq!(
        unsafe { mapber_model_new(-1.0, 0.1, &mut m) },
        MapberStatus::Parameter
    );
    assert!(m.is_null());
    assert_eq!(
        unsafe { mapber_model_new(1.0, 0.1, ptr::null_mut()) },
        MapberStatus::NullPointer
    );
    assert_eq!(
        unsafe { mapber_model_from_snr_db(2.0, 10.0, &mut m) },
        MapberStatus::Ok
    );
    let (mut d, mut s2) = (0.0, 0.0);
    assert_eq!(
        unsafe { mapber_model_params(m, &mut d, &mut s2) },
        MapberStatus::Ok
    );
    assert_eq!((d, s2), (2.0, 0.1));
    let mut v = 0.0;
    assert_eq!(
        unsafe { mapber_theta0(ptr::null(), &mut v) },
        MapberStatus::NullPointer
    );
    unsafe { mapber_model_free(m) };
    unsafe { mapber_model_free(ptr::null_mut()) };
}

#[test]
fn bounds_agree_with_core() {
    let m = model(1.0, 0.1);
    let p = mapber::ModelParams::new(1.0, 0.1).unwrap();
    let mut b = ptr::null_mut();
    assert_eq!(
        unsafe { mapber_bounds_compute(m, &mut b) },
        MapberStatus::Ok
    );
    let mut vals = MapberBoundValues::default();
    assert_eq!(
        unsafe { mapber_bounds_values(b, &mut vals) },
        MapberStatus::Ok
    );
    assert_eq!(vals.theta0, mapber::bounds::theta0(p).unwrap());
    assert_eq!(
        vals.theta_star,
        mapber::bounds::replica_theta_star(p).unwrap()
    );
    assert_eq!(vals.critical_point_count, 1);

    let mut v = 0.0;
    assert_eq!(unsafe { mapber_theta_star(m, &mut v) }, MapberStatus::Ok);
    assert_eq!(v, vals.theta_star);
    assert_eq!(unsafe { mapber_ell_prime(m, v, &mut v) }, MapberStatus::Ok);
    assert!(v.abs() < 1e-9);
    assert_eq!(unsafe { mapber_ell(m, 0.0, &mut v) }, MapberStatus::Domain);
    let mut r = MapberRegime::ThreeCritical;
    assert_eq!(unsafe { mapber_regime(m, &mut r) }, MapberStatus::Ok);
    assert_eq!(r, MapberRegime::UniqueCritical);
    unsafe {
        mapber_bounds_free(b);
        mapber_model_free(m);
    }
}

#[test]
fn tanaka_and_simulation() {
    let m = model(2.0, 0.1);
    let mut t = MapberTanakaResult::default();
    assert_eq!(
        unsafe { mapber_tanaka_solve(m, 100.0, 0.5, 10_000, &mut t) },
        MapberStatus::Ok
    );
    assert!(t.ber > 0.0 && t.ber < 1e-4 && t.iterations > 0);
    assert_eq!(
        unsafe { mapber_tanaka_solve(m, 100.0, 0.5, 1, &mut t) },
        MapberStatus::NonConvergence
    );

    let mut r = MapberSimReport::default();
    assert_eq!(
        unsafe { mapber_simulate(m, MapberDetector::Map, 8, 50, 7, &mut r) },
        MapberStatus::Ok
    );
    assert_eq!(r.bits_total, 400);
    assert!(r.ci_lo <= r.ber_hat && r.ber_hat <= r.ci_hi);
    assert_eq!(
        unsafe { mapber_simulate(m, MapberDetector::Map, 40, 1, 7, &mut r) },
        MapberStatus::Budget
    );
    unsafe { mapber_model_free(m) };
}

#[test]
fn version_is_static_c_string() {
    let v = unsafe { CStr::from_ptr(mapber_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}
