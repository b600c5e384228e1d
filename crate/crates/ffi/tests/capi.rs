use std::ffi::CStr;
use std::ptr;

use circsine_ffi::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(cs_last_error()) }.to_string_lossy().into_owned()
}

#[test]
fn brownian_handle_round_trip() {
    let mut bm = ptr::null_mut();
    unsafe {
        assert_eq!(cs_brownian_new(7, 8, 50.0, &mut bm), CsStatus::Ok);
        let (mut x, mut y) = (f64::NAN, f64::NAN);
        assert_eq!(cs_brownian_point(bm, 0.0, &mut x, &mut y), CsStatus::Ok);
        assert_eq!((x, y), (0.0, 1.0));
        assert_eq!(cs_brownian_point(bm, 1.5, &mut x, &mut y), CsStatus::Ok);
        assert!(y > 0.0 && x.is_finite());
        assert_eq!(cs_brownian_point(bm, 60.0, &mut x, &mut y), CsStatus::Numerical);
        assert!(last_error().contains("horizon"));
        cs_brownian_free(bm);
    }
}

#[test]
fn null_and_range_errors() {
    unsafe {
        assert_eq!(cs_brownian_new(1, 8, 10.0, ptr::null_mut()), CsStatus::NullPointer);
        assert!(last_error().contains("null"));
        let mut bm = ptr::null_mut();
        assert_eq!(cs_brownian_new(1, 30, 10.0, &mut bm), CsStatus::InvalidArgument);
        assert!(bm.is_null());
        cs_brownian_free(ptr::null_mut());
        cs_coupled_pair_free(ptr::null_mut());
        cs_spectrum_free(ptr::null_mut());
    }
}

#[test]
fn coupled_walk_starts_at_i_with_increasing_times() {
    unsafe {
        let mut bm = ptr::null_mut();
        assert_eq!(cs_brownian_new(3, 10, 200.0, &mut bm), CsStatus::Ok);
        let mut pair = ptr::null_mut();
        assert_eq!(cs_coupled_pair_new(bm, 3, 8, 2.0, &mut pair), CsStatus::Ok);
        let (mut x, mut y, mut tau) = (0.0, 0.0, 0.0);
        let mut prev = -1.0;
        for j in 0..8 {
            assert_eq!(cs_coupled_pair_vertex(pair, j, &mut x, &mut y, &mut tau), CsStatus::Ok);
            if j == 0 {
                assert_eq!((x, y, tau), (0.0, 1.0, 0.0));
            }
            assert!(tau > prev);
            prev = tau;
            // the vertex is the path at its stopping time
            let (mut bx, mut by) = (0.0, 0.0);
            assert_eq!(cs_brownian_point(bm, tau, &mut bx, &mut by), CsStatus::Ok);
            assert_eq!((bx, by), (x, y));
        }
        assert_eq!(cs_coupled_pair_vertex(pair, 8, &mut x, &mut y, &mut tau), CsStatus::OutOfRange);
        let (mut q, mut inf) = (0.0, true);
        assert_eq!(cs_coupled_pair_limit(pair, &mut q, &mut inf), CsStatus::Ok);
        assert!(!inf && q.is_finite());
        cs_coupled_pair_free(pair);
        cs_brownian_free(bm);
    }
}

#[test]
fn circ_spectrum_is_periodic() {
    unsafe {
        let mut s = ptr::null_mut();
        assert_eq!(cs_circ_spectrum(11, 2, 2.0, 6, &mut s), CsStatus::Ok);
        let mut w = 0;
        assert_eq!(cs_spectrum_window(s, &mut w), CsStatus::Ok);
        assert_eq!(w, 6);
        let (mut a, mut b) = (0.0, 0.0);
        // period 2 pi n with index shift n
        assert_eq!(cs_spectrum_lambda(s, 0, &mut a), CsStatus::Ok);
        assert_eq!(cs_spectrum_lambda(s, 2, &mut b), CsStatus::Ok);
        assert!((b - a - 4.0 * std::f64::consts::PI).abs() < 1e-7);
        assert_eq!(cs_spectrum_lambda(s, 100, &mut a), CsStatus::OutOfRange);
        cs_spectrum_free(s);
        assert_eq!(cs_circ_spectrum(1, 0, 2.0, 6, &mut s), CsStatus::InvalidArgument);
    }
}

#[test]
fn version_is_the_crate_version() {
    let v = unsafe { CStr::from_ptr(cs_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn header_declares_every_export() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/circsine.h")).unwrap();
    let src = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/src/lib.rs")).unwrap();
    let names: Vec<&str> = src
        .lines()
        .filter_map(|l| l.split("extern \"C\" fn ").nth(1))
        .map(|rest| rest.split('(').next().unwrap())
        .collect();
    assert!(names.len() >= 12);
    for n in names {
        assert!(header.contains(&format!("{n}(")), "{n} missing from header");
    }
    assert!(header.contains("typedef struct CsSpectrum CsSpectrum;"));
}
