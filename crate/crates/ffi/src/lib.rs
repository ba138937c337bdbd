//! C interface to the analytic bounds, the replica solver and the Monte
//! Carlo simulators.
//!
//! Every function returns a [`MapberStatus`] and writes its result through
//! an out-pointer. On failure the message is kept per thread and can be read
//! with [`mapber_last_error_message`]. Panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use mapber::bounds::{self, BoundSummary, Regime};
use mapber::mc_sim::{monte_carlo_ber, Detector};
use mapber::scalar_math;
use mapber::tanaka::{solve_tanaka, TanakaState};
use mapber::{Error, ModelParams};

/// Result codes. Zero is success.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MapberStatus {
    Ok = 0,
    NullPointer = 1,
    Domain = 2,
    Parameter = 3,
    Evaluation = 4,
    Budget = 5,
    DegenerateTangency = 6,
    Infeasible = 7,
    NonConvergence = 8,
    Divergence = 9,
    Internal = 10,
    Panic = 11,
}

impl From<&Error> for MapberStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::Domain { .. } => MapberStatus::Domain,
            Error::Parameter(_) => MapberStatus::Parameter,
            Error::Evaluation { .. } => MapberStatus::Evaluation,
            Error::Budget(_) => MapberStatus::Budget,
            Error::DegenerateTangency { .. } => MapberStatus::DegenerateTangency,
            Error::Infeasible(_) => MapberStatus::Infeasible,
            Error::NonConvergence { .. } => MapberStatus::NonConvergence,
            Error::Divergence(_) => MapberStatus::Divergence,
            Error::Internal(_) => MapberStatus::Internal,
        }
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MapberRegime {
    UniqueCritical = 0,
    ThreeCritical = 1,
}

impl From<Regime> for MapberRegime {
    fn from(r: Regime) -> Self {
        match r {
            Regime::UniqueCritical => MapberRegime::UniqueCritical,
            Regime::ThreeCritical => MapberRegime::ThreeCritical,
        }
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MapberDetector {
    Map = 0,
    Bro = 1,
    MfGenie = 2,
}

impl From<MapberDetector> for Detector {
    fn from(d: MapberDetector) -> Self {
        match d {
            MapberDetector::Map => Detector::Map,
            MapberDetector::Bro => Detector::Bro,
            MapberDetector::MfGenie => Detector::MfGenie,
        }
    }
}

/// Opaque model parameters `(delta, sigma^2)`.
pub struct MapberModel {
    params: ModelParams,
}

/// Opaque bundle of the analytic quantities for one model.
pub struct MapberBounds {
    summary: BoundSummary,
}

/// Plain view of a [`MapberBounds`].
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct MapberBoundValues {
    pub theta0: f64,
    pub tau0: f64,
    pub theta_star: f64,
    pub mfb: f64,
    pub critical_point_count: usize,
}

/// Converged replica state at finite `B`.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct MapberTanakaResult {
    pub overlap_m: f64,
    pub q: f64,
    pub field_mean: f64,
    pub field_var: f64,
    pub b: f64,
    pub ber: f64,
    pub iterations: usize,
    pub clamp_events: usize,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct MapberSimReport {
    pub n: usize,
    pub trials: u64,
    pub bit_errors: u64,
    pub bits_total: u64,
    pub ber_hat: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub non_converged: u64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

/// Runs `f`, records any error or panic, and maps it to a status.
fn guard(f: impl FnOnce() -> Result<(), MapberStatus>) -> MapberStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => MapberStatus::Ok,
        Ok(Err(s)) => s,
        Err(_) => {
            set_last_error("panic inside mapber".into());
            MapberStatus::Panic
        }
    }
}

fn fail(e: Error) -> MapberStatus {
    let s = MapberStatus::from(&e);
    set_last_error(e.to_string());
    s
}

fn null(what: &str) -> MapberStatus {
    set_last_error(format!("null pointer: {what}"));
    MapberStatus::NullPointer
}

unsafe fn write<T>(out: *mut T, v: T) -> Result<(), MapberStatus> {
    if out.is_null() {
        return Err(null("out"));
    }
    out.write(v);
    Ok(())
}

unsafe fn model<'a>(m: *const MapberModel) -> Result<&'a MapberModel, MapberStatus> {
    m.as_ref().ok_or_else(|| null("model"))
}

/// Copies the last error message of this thread into `buf` (NUL-terminated,
/// truncated to `len`). Returns the full message length without the NUL,
/// or 0 if there is none.
///
/// # Safety
/// `buf` must be valid for `len` bytes or null.
#[no_mangle]
pub unsafe extern "C" fn mapber_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let e = e.borrow();
        let Some(msg) = e.as_ref() else { return 0 };
        let bytes = msg.as_bytes();
        if !buf.is_null() && len > 0 {
            let k = bytes.len().min(len - 1);
            ptr::copy_nonoverlapping(bytes.as_ptr().cast::<c_char>(), buf, k);
            *buf.add(k) = 0;
        }
        bytes.len()
    })
}

/// Static version string.
#[no_mangle]
pub extern "C" fn mapber_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// # Safety
/// `out` must be valid for a write.
#[no_mangle]
pub unsafe extern "C" fn mapber_phi(x: f64, out: *mut f64) -> MapberStatus {
    guard(|| write(out, scalar_math::phi(x).map_err(fail)?))
}

/// # Safety
/// `out` must be valid for a write.
#[no_mangle]
pub unsafe extern "C" fn mapber_q_tail(x: f64, out: *mut f64) -> MapberStatus {
    guard(|| write(out, scalar_math::q_tail(x).map_err(fail)?))
}

/// # Safety
/// `out` must be valid for a write.
#[no_mangle]
pub unsafe extern "C" fn mapber_q_inv(p: f64, out: *mut f64) -> MapberStatus {
    guard(|| write(out, scalar_math::q_inv(p).map_err(fail)?))
}

/// Creates a model from `delta = m/n` and the noise variance.
///
/// # Safety
/// `out` must be valid for a write. Free the handle with
/// [`mapber_model_free`].
#[no_mangle]
pub unsafe extern "C" fn mapber_model_new(
    delta: f64,
    sigma2: f64,
    out: *mut *mut MapberModel,
) -> MapberStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let params = ModelParams::new(delta, sigma2).map_err(fail)?;
        write(out, Box::into_raw(Box::new(MapberModel { params })))
    })
}

/// Creates a model from `delta` and the SNR in dB.
///
/// # Safety
/// As [`mapber_model_new`].
#[no_mangle]
pub unsafe extern "C" fn mapber_model_from_snr_db(
    delta: f64,
    snr_db: f64,
    out: *mut *mut MapberModel,
) -> MapberStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let params = ModelParams::from_snr_db(delta, snr_db).map_err(fail)?;
        write(out, Box::into_raw(Box::new(MapberModel { params })))
    })
}

/// # Safety
/// `m` must come from a model constructor and not be used afterwards. Null
/// is accepted.
#[no_mangle]
pub unsafe extern "C" fn mapber_model_free(m: *mut MapberModel) {
    if !m.is_null() {
        drop(Box::from_raw(m));
    }
}

/// # Safety
/// `m` must be a live model handle and the out-pointers valid for writes.
#[no_mangle]
pub unsafe extern "C" fn mapber_model_params(
    m: *const MapberModel,
    delta: *mut f64,
    sigma2: *mut f64,
) -> MapberStatus {
    guard(|| {
        let p = model(m)?.params;
        write(delta, p.delta())?;
        write(sigma2, p.sigma2())
    })
}

/// Evaluates `f` on the model behind `m` and writes the result.
unsafe fn with_model<T>(
    m: *const MapberModel,
    out: *mut T,
    f: impl FnOnce(ModelParams) -> Result<T, MapberStatus>,
) -> MapberStatus {
    guard(|| {
        let p = model(m)?.params;
        write(out, f(p)?)
    })
}

/// `ell(theta)` for `theta` in `(0, 1)`.
///
/// # Safety
/// `m` must be a live model handle and `out` valid for a write.
#[no_mangle]
pub unsafe extern "C" fn mapber_ell(
    m: *const MapberModel,
    theta: f64,
    out: *mut f64,
) -> MapberStatus {
    with_model(m, out, |p| bounds::ell(theta, p).map_err(fail))
}

/// Derivative of `ell` at `theta`.
///
/// # Safety
/// `m` must be a live model handle and `out` valid for a write.
#[no_mangle]
pub unsafe extern "C" fn mapber_ell_prime(
    m: *const MapberModel,
    theta: f64,
    out: *mut f64,
) -> MapberStatus {
    with_model(m, out, |p| bounds::ell_prime(theta, p).map_err(fail))
}

/// Upper bound `theta0` on the MAP bit error rate.
///
/// # Safety
/// `m` must be a live model handle and `out` valid for a write.
#[no_mangle]
pub unsafe extern "C" fn mapber_theta0(m: *const MapberModel, out: *mut f64) -> MapberStatus {
    with_model(m, out, |p| bounds::theta0(p).map_err(fail))
}

/// Threshold `tau0` with `Q(tau0) = theta0`.
///
/// # Safety
/// `m` must be a live model handle and `out` valid for a write.
#[no_mangle]
pub unsafe extern "C" fn mapber_tau0(m: *const MapberModel, out: *mut f64) -> MapberStatus {
    with_model(m, out, |p| bounds::tau0(p).map_err(fail))
}

/// Replica prediction of the MAP bit error rate.
///
/// # Safety
/// `m` must be a live model handle and `out` valid for a write.
#[no_mangle]
pub unsafe extern "C" fn mapber_theta_star(m: *const MapberModel, out: *mut f64) -> MapberStatus {
    with_model(m, out, |p| bounds::replica_theta_star(p).map_err(fail))
}

/// Matched-filter bound.
///
/// # Safety
/// `m` must be a live model handle and `out` valid for a write.
#[no_mangle]
pub unsafe extern "C" fn mapber_mfb(m: *const MapberModel, out: *mut f64) -> MapberStatus {
    with_model(m, out, |p| Ok(bounds::mfb(p)))
}

/// Whether `ell` has one or three critical points.
///
/// # Safety
/// `m` must be a live model handle and `out` valid for a write.
#[no_mangle]
pub unsafe extern "C" fn mapber_regime(
    m: *const MapberModel,
    out: *mut MapberRegime,
) -> MapberStatus {
    with_model(m, out, |p| {
        Ok(bounds::classify_uniqueness(p).map_err(fail)?.into())
    })
}

/// Computes every analytic quantity for a model.
///
/// # Safety
/// `m` must be a live model handle and `out` valid for a write. Free the
/// result with [`mapber_bounds_free`].
#[no_mangle]
pub unsafe extern "C" fn mapber_bounds_compute(
    m: *const MapberModel,
    out: *mut *mut MapberBounds,
) -> MapberStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let summary = BoundSummary::compute(model(m)?.params).map_err(fail)?;
        write(out, Box::into_raw(Box::new(MapberBounds { summary })))
    })
}

/// # Safety
/// `b` must be a live bounds handle and `out` valid for a write.
#[no_mangle]
pub unsafe extern "C" fn mapber_bounds_values(
    b: *const MapberBounds,
    out: *mut MapberBoundValues,
) -> MapberStatus {
    guard(|| {
        let s = &b.as_ref().ok_or_else(|| null("bounds"))?.summary;
        write(
            out,
            MapberBoundValues {
                theta0: s.theta0,
                tau0: s.tau0,
                theta_star: s.theta_star,
                mfb: s.mfb,
                critical_point_count: s.critical_points.len(),
            },
        )
    })
}

/// # Safety
/// `b` must come from [`mapber_bounds_compute`] and not be used afterwards.
/// Null is accepted.
#[no_mangle]
pub unsafe extern "C" fn mapber_bounds_free(b: *mut MapberBounds) {
    if !b.is_null() {
        drop(Box::from_raw(b));
    }
}

/// Solves the finite-`B` replica system from its default starting point.
///
/// # Safety
/// `m` must be a live model handle and `out` valid for a write.
#[no_mangle]
pub unsafe extern "C" fn mapber_tanaka_solve(
    m: *const MapberModel,
    b: f64,
    damping: f64,
    max_iters: usize,
    out: *mut MapberTanakaResult,
) -> MapberStatus {
    guard(|| {
        let p = model(m)?.params;
        let init = TanakaState::initial(p, b).map_err(fail)?;
        let sol = solve_tanaka(p, b, damping, init, max_iters).map_err(fail)?;
        let s = sol.state;
        write(
            out,
            MapberTanakaResult {
                overlap_m: s.overlap_m,
                q: s.q,
                field_mean: s.field_mean,
                field_var: s.field_var,
                b: s.b,
                ber: s.ber(),
                iterations: sol.iterations,
                clamp_events: sol.clamp_events,
            },
        )
    })
}

/// Monte Carlo bit error rate over `trials` seeded instances of size `n`.
///
/// # Safety
/// `m` must be a live model handle and `out` valid for a write.
#[no_mangle]
pub unsafe extern "C" fn mapber_simulate(
    m: *const MapberModel,
    detector: MapberDetector,
    n: usize,
    trials: u64,
    seed: u64,
    out: *mut MapberSimReport,
) -> MapberStatus {
    guard(|| {
        let p = model(m)?.params;
        let r = monte_carlo_ber(detector.into(), p, n, trials, seed).map_err(fail)?;
        write(
            out,
            MapberSimReport {
                n: r.n,
                trials: r.trials,
                bit_errors: r.bit_errors,
                bits_total: r.bits_total,
                ber_hat: r.ber_hat,
                ci_lo: r.ci95.0,
                ci_hi: r.ci95.1,
                non_converged: r.non_converged,
            },
        )
    })
}
