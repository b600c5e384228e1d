//! C interface to `circsine`.
//!
//! Every function returns a [`CsStatus`]; results come back through out
//! pointers. Handles are opaque and must be released with their `_free`
//! function. After a non-`Ok` status, [`cs_last_error`] describes the failure
//! on the calling thread.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use circsine::couple::{coupled_pair, CoupledPair, TauOptions};
use circsine::dirac::make_spec;
use circsine::hgeom::BoundaryPt;
use circsine::paths::{sample_walk, BmConfig, HypBm};
use circsine::rng::RngStreams;
use circsine::spectrum::{eigs_transfer, SpectrumResult};
use circsine::tol::Tolerances;
use circsine::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CsStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Numerical = 3,
    OutOfRange = 4,
    Panic = 5,
}

/// Hyperbolic Brownian motion started at `i`.
pub struct CsBrownian(HypBm);

/// Coupled walk read off a Brownian path, with the path's boundary limit.
pub struct CsCoupledPair(CoupledPair);

/// Indexed eigenvalues `lambda_k`, `-window <= k <= window + 1`.
pub struct CsSpectrum(SpectrumResult);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> CsStatus {
    set_error(&e.to_string());
    match e {
        Error::InvalidArgument(_) | Error::ParameterConstraint(_) | Error::NegativeRadius(_) => {
            CsStatus::InvalidArgument
        }
        _ => CsStatus::Numerical,
    }
}

fn guard(f: impl FnOnce() -> CsStatus) -> CsStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(_) => {
            set_error("panic inside circsine");
            CsStatus::Panic
        }
    }
}

macro_rules! non_null {
    ($($p:expr),+) => {
        $(if $p.is_null() {
            set_error(concat!("null pointer: ", stringify!($p)));
            return CsStatus::NullPointer;
        })+
    };
}

/// Message of the last failure on this thread. The pointer stays valid until
/// the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn cs_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version, a static string.
#[no_mangle]
pub extern "C" fn cs_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// New Brownian path with base step `2^-level` and extension cap
/// `horizon_cap`.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn cs_brownian_new(seed: u64, level: u32, horizon_cap: f64, out: *mut *mut CsBrownian) -> CsStatus {
    non_null!(out);
    if level > 24 || !(horizon_cap > 0.0) {
        set_error("need level <= 24 and horizon_cap > 0");
        return CsStatus::InvalidArgument;
    }
    guard(|| {
        let bm = HypBm::new(seed, BmConfig { level, horizon_cap });
        *out = Box::into_raw(Box::new(CsBrownian(bm)));
        CsStatus::Ok
    })
}

/// Point of the path at time `t`.
///
/// # Safety
/// `bm` must come from [`cs_brownian_new`]; `x` and `y` must be valid for
/// writes.
#[no_mangle]
pub unsafe extern "C" fn cs_brownian_point(bm: *mut CsBrownian, t: f64, x: *mut f64, y: *mut f64) -> CsStatus {
    non_null!(bm, x, y);
    guard(|| match (*bm).0.point(t) {
        Ok(p) => {
            *x = p.x;
            *y = p.y;
            CsStatus::Ok
        }
        Err(e) => status_of(&e),
    })
}

/// # Safety
/// `bm` must come from [`cs_brownian_new`] or be null.
#[no_mangle]
pub unsafe extern "C" fn cs_brownian_free(bm: *mut CsBrownian) {
    if !bm.is_null() {
        drop(Box::from_raw(bm));
    }
}

/// Coupled walk of `n` vertices at `beta` on the path of `bm`; the coupling
/// uniforms come from `seed`.
///
/// # Safety
/// `bm` must come from [`cs_brownian_new`]; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn cs_coupled_pair_new(
    bm: *mut CsBrownian,
    seed: u64,
    n: usize,
    beta: f64,
    out: *mut *mut CsCoupledPair,
) -> CsStatus {
    non_null!(bm, out);
    guard(|| {
        let tol = Tolerances::DEFAULT;
        match coupled_pair(&mut (*bm).0, &RngStreams::new(seed), n, beta, &TauOptions::default(), tol.boundary_y) {
            Ok(p) => {
                *out = Box::into_raw(Box::new(CsCoupledPair(p)));
                CsStatus::Ok
            }
            Err(e) => status_of(&e),
        }
    })
}

/// Vertex `j` of the walk and its stopping time, `0 <= j < n`.
///
/// # Safety
/// `pair` must come from [`cs_coupled_pair_new`]; the out pointers must be
/// valid for writes.
#[no_mangle]
pub unsafe extern "C" fn cs_coupled_pair_vertex(
    pair: *const CsCoupledPair,
    j: usize,
    x: *mut f64,
    y: *mut f64,
    tau: *mut f64,
) -> CsStatus {
    non_null!(pair, x, y, tau);
    let p = &(*pair).0;
    if j >= p.n() {
        set_error("vertex index out of range");
        return CsStatus::OutOfRange;
    }
    let v = p.tau.walk[j];
    *x = v.x;
    *y = v.y;
    *tau = p.tau.taus[p.n() - j];
    CsStatus::Ok
}

/// Boundary limit of the path; `is_infinite` is set instead of `value` for
/// the point at infinity.
///
/// # Safety
/// `pair` must come from [`cs_coupled_pair_new`]; the out pointers must be
/// valid for writes.
#[no_mangle]
pub unsafe extern "C" fn cs_coupled_pair_limit(pair: *const CsCoupledPair, value: *mut f64, is_infinite: *mut bool) -> CsStatus {
    non_null!(pair, value, is_infinite);
    match (*pair).0.eta1.eta.value() {
        Some(q) => {
            *value = q;
            *is_infinite = false;
        }
        None => {
            *value = f64::INFINITY;
            *is_infinite = true;
        }
    }
    CsStatus::Ok
}

/// # Safety
/// `pair` must come from [`cs_coupled_pair_new`] or be null.
#[no_mangle]
pub unsafe extern "C" fn cs_coupled_pair_free(pair: *mut CsCoupledPair) {
    if !pair.is_null() {
        drop(Box::from_raw(pair));
    }
}

/// Spectrum of the operator of an independent Beta walk of `n` vertices,
/// computed from its transfer matrices.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn cs_circ_spectrum(
    seed: u64,
    n: usize,
    beta: f64,
    window: usize,
    out: *mut *mut CsSpectrum,
) -> CsStatus {
    non_null!(out);
    if window == 0 {
        set_error("window must be positive");
        return CsStatus::InvalidArgument;
    }
    guard(|| {
        let r = sample_walk(seed, n, beta).and_then(|w| {
            let spec = make_spec(BoundaryPt::INFINITY, w.end)?;
            eigs_transfer(&spec, &circsine::dirac::PiecewisePath { points: w.points }, window)
        });
        match r {
            Ok(s) => {
                *out = Box::into_raw(Box::new(CsSpectrum(s)));
                CsStatus::Ok
            }
            Err(e) => status_of(&e),
        }
    })
}

/// Window `w` of the index range `-w..=w+1`.
///
/// # Safety
/// `s` must come from [`cs_circ_spectrum`]; `window` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn cs_spectrum_window(s: *const CsSpectrum, window: *mut usize) -> CsStatus {
    non_null!(s, window);
    *window = (*s).0.window;
    CsStatus::Ok
}

/// Eigenvalue `lambda_k`, `-window <= k <= window + 1`.
///
/// # Safety
/// `s` must come from [`cs_circ_spectrum`]; `lambda` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn cs_spectrum_lambda(s: *const CsSpectrum, k: i64, lambda: *mut f64) -> CsStatus {
    non_null!(s, lambda);
    match (*s).0.lambda(k) {
        Some(l) => {
            *lambda = l;
            CsStatus::Ok
        }
        None => {
            set_error("eigenvalue index out of range");
            CsStatus::OutOfRange
        }
    }
}

/// # Safety
/// `s` must come from [`cs_circ_spectrum`] or be null.
#[no_mangle]
pub unsafe extern "C" fn cs_spectrum_free(s: *mut CsSpectrum) {
    if !s.is_null() {
        drop(Box::from_raw(s));
    }
}
