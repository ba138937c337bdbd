//! Closed-form and scalar-root quantities of the large-system analysis.
//!
//! The central object is
//!
//! ```text
//! ell(theta) = sqrt(delta) * sqrt(4 theta + sigma^2) - 2 phi(Q^{-1}(theta)),   theta in (0, 1)
//! ```
//!
//! a high-probability lower bound on the best normalized residual among
//! hypotheses at Hamming distance `theta n` from the truth. Its largest
//! crossing with `ell(0+) = sigma sqrt(delta)` is the BER upper bound
//! `theta0`; its minimizer is the replica-symmetric prediction `theta_star`.
//!
//! Most computations run in the tail coordinate `u = Q^{-1}(theta)` where
//! `ell` becomes `sqrt(delta) sqrt(4 Q(u) + sigma^2) - 2 phi(u)`. That form
//! never calls the tail inverse and stays accurate when `theta` is far below
//! `1e-15`, which is where the high-SNR results live.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{snr_db_to_sigma2, ModelParams};
use crate::roots::{bisect, grid, scan, Bracket};
use crate::scalar_math::{density, tail, tail_inv};

/// Number of critical points of `ell`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Regime {
    UniqueCritical,
    ThreeCritical,
}

impl Regime {
    pub fn as_str(&self) -> &'static str {
        match self {
            Regime::UniqueCritical => "UniqueCritical",
            Regime::ThreeCritical => "ThreeCritical",
        }
    }
}

impl std::fmt::Display for Regime {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A critical point of `ell`, in both coordinates. `theta = Q(u)` underflows
/// to zero once `u` exceeds about 38.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CriticalPoint {
    pub u: f64,
    pub theta: f64,
}

fn check_theta(func: &'static str, theta: f64) -> Result<()> {
    if theta > 0.0 && theta < 1.0 {
        Ok(())
    } else {
        Err(Error::domain(
            func,
            format!("theta = {theta} not in (0, 1)"),
        ))
    }
}

fn check_finite(func: &'static str, u: f64) -> Result<()> {
    if u.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(func, format!("non-finite argument {u}")))
    }
}

pub fn ell(theta: f64, params: ModelParams) -> Result<f64> {
    check_theta("ell", theta)?;
    let u = tail_inv(theta);
    Ok(params.delta().sqrt() * (4.0 * theta + params.sigma2()).sqrt() - 2.0 * density(u))
}

/// Continuous extension of `ell` at zero, `sigma sqrt(delta)`.
pub fn ell_at_zero(params: ModelParams) -> f64 {
    params.sigma() * params.delta().sqrt()
}

pub fn ell_prime(theta: f64, params: ModelParams) -> Result<f64> {
    check_theta("ell_prime", theta)?;
    Ok(
        2.0 * params.delta().sqrt() / (4.0 * theta + params.sigma2()).sqrt()
            - 2.0 * tail_inv(theta),
    )
}

/// `ell` in the tail coordinate, `ell(Q(u))`.
pub fn ell_of_u(u: f64, params: ModelParams) -> f64 {
    params.delta().sqrt() * (4.0 * tail(u) + params.sigma2()).sqrt() - 2.0 * density(u)
}

/// `ell(Q(u)) - sigma sqrt(delta)` without cancellation.
pub(crate) fn excess_of_u(u: f64, params: ModelParams) -> f64 {
    excess_parts(tail(u), density(u), params)
}

/// `ell(theta) - sigma sqrt(delta)` without cancellation.
pub(crate) fn excess_of_theta(theta: f64, params: ModelParams) -> f64 {
    excess_parts(theta, density(tail_inv(theta)), params)
}

#[inline]
fn excess_parts(theta: f64, dens: f64, params: ModelParams) -> f64 {
    let sigma = params.sigma();
    params.delta().sqrt() * 4.0 * theta / ((4.0 * theta + params.sigma2()).sqrt() + sigma)
        - 2.0 * dens
}

/// `F(u) = u^2 (4 Q(u) + sigma^2)`. For `u > 0`, `u` is a critical point of
/// `ell(Q(u))` exactly when `F(u) = delta`.
pub fn aux_f(u: f64, sigma2: f64) -> Result<f64> {
    check_finite("aux_f", u)?;
    check_finite("aux_f", sigma2)?;
    Ok(f_of(u, sigma2))
}

/// `G(u) = 4 Q(u) - 2 u phi(u)`; `F'(u) = 2 u (G(u) + sigma^2)`.
pub fn aux_g(u: f64) -> Result<f64> {
    check_finite("aux_g", u)?;
    Ok(g_of(u))
}

/// `H(u) = 2 u^3 phi(u)`, the value of `F` at a root of `G + sigma^2`.
pub fn aux_h(u: f64) -> Result<f64> {
    check_finite("aux_h", u)?;
    Ok(2.0 * u * u * u * density(u))
}

#[inline]
fn f_of(u: f64, sigma2: f64) -> f64 {
    u * u * (4.0 * tail(u) + sigma2)
}

#[inline]
fn g_of(u: f64) -> f64 {
    4.0 * tail(u) - 2.0 * u * density(u)
}

/// Fine-scan limit for the tail coordinate. Beyond it `Q(u)` underflows and
/// `F(u) = u^2 sigma^2` is monotone.
const U_FINE_LIMIT: f64 = 40.0;
const U_SCAN_STEP: f64 = 1e-4;

/// All critical points of `ell`, sorted by increasing `theta`.
///
/// Sign-change scan of `F(u) - delta` on `(0, U_max]`,
/// `U_max = max(10, 2 sqrt(delta / sigma^2))`, at step `1e-4`, each bracket
/// refined by bisection to `|F(u) - delta| <= 1e-12`.
pub fn critical_points(params: ModelParams) -> Result<Vec<CriticalPoint>> {
    let (delta, sigma2) = (params.delta(), params.sigma2());
    let h = |u: f64| f_of(u, sigma2) - delta;
    let u_max = (2.0 * (delta / sigma2).sqrt()).max(10.0);
    let fine_end = u_max.min(U_FINE_LIMIT);

    let mut brackets = scan(h, grid(0.0, fine_end, U_SCAN_STEP));
    let last_fine = grid(0.0, fine_end, U_SCAN_STEP).last().unwrap_or(0.0);
    if u_max > last_fine {
        let (a, b) = (h(last_fine), h(u_max));
        if (a > 0.0) != (b > 0.0) {
            brackets.push(Bracket {
                lo: last_fine,
                hi: u_max,
                f_lo: a,
            });
        }
    }
    if brackets.len() % 2 == 0 {
        return Err(Error::DegenerateTangency {
            roots: brackets.len(),
        });
    }
    let mut points: Vec<CriticalPoint> = brackets
        .into_iter()
        .map(|b| {
            let u = bisect(h, b, 0.0, 1e-12);
            CriticalPoint { u, theta: tail(u) }
        })
        .collect();
    points.sort_by(|a, b| b.u.total_cmp(&a.u));
    Ok(points)
}

/// The critical point with the smallest `ell`; solves
/// `theta = Q(sqrt(delta / (sigma^2 + 4 theta)))`.
pub fn replica_point(params: ModelParams) -> Result<CriticalPoint> {
    let points = critical_points(params)?;
    points
        .into_iter()
        .min_by(|a, b| ell_of_u(a.u, params).total_cmp(&ell_of_u(b.u, params)))
        .ok_or_else(|| Error::Internal("no critical point".into()))
}

pub fn replica_theta_star(params: ModelParams) -> Result<f64> {
    replica_point(params).map(|p| p.theta)
}

const THETA_TOP: f64 = 1.0 - 1e-9;
const THETA_STEP: f64 = 1e-5;
const U_CEILING: f64 = 37.0;

/// Upper bound on the BER of the MAP detector: the largest `theta` in
/// `(0, 1)` with `ell(theta) = sigma sqrt(delta)`.
///
/// Descending scan from `1 - 1e-9` at step `1e-5`. Roots below `1e-5`
/// are picked up by continuing the scan in the tail coordinate up to
/// `u = 37`.
pub fn theta0(params: ModelParams) -> Result<f64> {
    theta0_point(params).map(|p| p.theta)
}

/// Like [`theta0`], also returning the tail coordinate of the root.
pub fn theta0_point(params: ModelParams) -> Result<CriticalPoint> {
    let f_theta = |t: f64| excess_of_theta(t, params);
    let f_u = |u: f64| excess_of_u(u, params);

    if f_theta(THETA_TOP) <= 0.0 {
        return Err(Error::Infeasible(format!(
            "ell(1-) does not exceed sigma sqrt(delta) for {params:?}"
        )));
    }

    let theta_brackets = scan(f_theta, grid(THETA_TOP, THETA_STEP, THETA_STEP));
    // Continue from the last theta grid point so no interval is skipped.
    let theta_last = grid(THETA_TOP, THETA_STEP, THETA_STEP)
        .last()
        .unwrap_or(THETA_TOP);
    let u_start = tail_inv(theta_last);
    let u_brackets = scan(f_u, grid(u_start, U_CEILING, U_SCAN_STEP));
    let total = theta_brackets.len() + u_brackets.len();

    let root = if let Some(&b) = theta_brackets.first() {
        let theta = bisect(f_theta, b, 0.0, 0.0);
        CriticalPoint {
            u: tail_inv(theta),
            theta,
        }
    } else if let Some(&b) = u_brackets.first() {
        let u = bisect(f_u, b, 0.0, 0.0);
        CriticalPoint { u, theta: tail(u) }
    } else {
        return Err(Error::Infeasible(format!(
            "no crossing of ell with sigma sqrt(delta) above Q({U_CEILING}) for {params:?}"
        )));
    };

    if total != 1 && classify_uniqueness(params)? == Regime::UniqueCritical {
        return Err(Error::Internal(format!(
            "{total} crossings found although ell has a unique critical point"
        )));
    }
    Ok(root)
}

/// Residual of the tail-coordinate form of the `theta0` equation,
///
/// ```text
/// sqrt(delta snr) (sqrt(1 + 4 snr Q(tau)) - 1) - 2 snr phi(tau),
/// ```
///
/// which is `snr * (ell(Q(tau)) - sigma sqrt(delta))`. The density term
/// carries the factor `snr`; without it the roots do not coincide with
/// `Q^{-1}(theta0)` unless `snr = 1`.
pub fn tau_residual(tau: f64, params: ModelParams) -> f64 {
    params.snr() * excess_of_u(tau, params)
}

/// Smallest real root of [`tau_residual`]; `Q(tau0) = theta0`.
pub fn tau0(params: ModelParams) -> Result<f64> {
    let f = |t: f64| tau_residual(t, params);
    for (start, stop) in [(-10.0, 10.0), (-20.0, U_CEILING)] {
        if let Some(b) = crate::roots::scan_first(f, grid(start, stop, U_SCAN_STEP)) {
            return Ok(bisect(f, b, 0.0, 0.0));
        }
    }
    Err(Error::Infeasible(format!(
        "tau equation has no root in [-20, {U_CEILING}] for {params:?}"
    )))
}

/// Matched-filter (single-user genie) lower bound `Q(sqrt(delta snr))`.
pub fn mfb(params: ModelParams) -> f64 {
    tail((params.delta() / params.sigma2()).sqrt())
}

/// Roots `u_A <= sqrt(3) <= u_B` of `G(u) + sigma^2 = 0`, the local maximum
/// and minimum of `F`. `None` when `sigma^2 >= -G(sqrt 3)` and `F` is
/// increasing.
pub fn f_turning_points(sigma2: f64) -> Option<(f64, f64)> {
    let s3 = 3f64.sqrt();
    let g = |u: f64| g_of(u) + sigma2;
    if g(s3) >= 0.0 {
        return None;
    }
    let left = Bracket {
        lo: 1e-8,
        hi: s3,
        f_lo: g(1e-8),
    };
    let right = Bracket {
        lo: s3,
        hi: U_FINE_LIMIT,
        f_lo: g(s3),
    };
    Some((bisect(g, left, 0.0, 0.0), bisect(g, right, 0.0, 0.0)))
}

/// Whether `ell` has one or three critical points.
///
/// Three exactly when `sigma^2 < -G(sqrt 3)` and `delta` lies between the
/// local minimum `F(u_B)` and the local maximum `F(u_A)` of `F`.
pub fn classify_uniqueness(params: ModelParams) -> Result<Regime> {
    let sigma2 = params.sigma2();
    let Some((ua, ub)) = f_turning_points(sigma2) else {
        return Ok(Regime::UniqueCritical);
    };
    if !(ua < ub) || g_of(ua) + sigma2 > 1e-9 || g_of(ub) + sigma2 > 1e-9 {
        return Err(Error::Internal(format!(
            "turning points of F not bracketed for sigma2 = {sigma2}"
        )));
    }
    let (local_max, local_min) = (f_of(ua, sigma2), f_of(ub, sigma2));
    if (local_min..=local_max).contains(&params.delta()) {
        Ok(Regime::ThreeCritical)
    } else {
        Ok(Regime::UniqueCritical)
    }
}

/// All analytic quantities for one parameter pair.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundSummary {
    pub params: ModelParams,
    pub theta0: f64,
    pub tau0: f64,
    pub theta_star: f64,
    pub critical_points: Vec<CriticalPoint>,
    pub regime: Regime,
    pub mfb: f64,
}

impl BoundSummary {
    pub fn compute(params: ModelParams) -> Result<Self> {
        let critical_points = critical_points(params)?;
        let star = critical_points
            .iter()
            .min_by(|a, b| ell_of_u(a.u, params).total_cmp(&ell_of_u(b.u, params)))
            .copied()
            .ok_or_else(|| Error::Internal("no critical point".into()))?;
        Ok(Self {
            params,
            theta0: theta0(params)?,
            tau0: tau0(params)?,
            theta_star: star.theta,
            regime: classify_uniqueness(params)?,
            mfb: mfb(params),
            critical_points,
        })
    }

    pub fn critical_thetas(&self) -> Vec<f64> {
        self.critical_points.iter().map(|p| p.theta).collect()
    }
}

/// One SNR point of the analytic BER curves. Numeric fields are `None` when
/// the corresponding computation failed; `error` then carries the reason.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurveRow {
    pub snr_db: f64,
    pub mfb: f64,
    pub replica: Option<f64>,
    pub theta0: Option<f64>,
    pub regime: Option<Regime>,
    pub error: Option<String>,
}

fn curve_row(delta: f64, snr_db: f64) -> CurveRow {
    match ModelParams::new(delta, snr_db_to_sigma2(snr_db)) {
        Ok(p) => curve_row_for(p, snr_db),
        Err(e) => CurveRow {
            snr_db,
            mfb: f64::NAN,
            replica: None,
            theta0: None,
            regime: None,
            error: Some(e.to_string()),
        },
    }
}

/// Curve quantities at `params`, labelled with `snr_db`.
pub fn curve_row_for(params: ModelParams, snr_db: f64) -> CurveRow {
    let mut errors = Vec::new();
    let mut keep = |r: Result<f64>| r.map_err(|e| errors.push(e.to_string())).ok();
    let replica = keep(replica_theta_star(params));
    let theta0 = keep(theta0(params));
    let regime = match classify_uniqueness(params) {
        Ok(r) => Some(r),
        Err(e) => {
            errors.push(e.to_string());
            None
        }
    };
    CurveRow {
        snr_db,
        mfb: mfb(params),
        replica,
        theta0,
        regime,
        error: (!errors.is_empty()).then(|| errors.join("; ")),
    }
}

/// Analytic curves over an SNR grid (dB). Grid points are evaluated in
/// parallel; rows come back in grid order.
pub fn ber_curves(delta: f64, snr_db_grid: &[f64]) -> Result<Vec<CurveRow>> {
    if snr_db_grid.is_empty() {
        return Err(Error::Parameter("empty SNR grid".into()));
    }
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::Parameter(format!(
            "delta must be positive, got {delta}"
        )));
    }
    Ok(snr_db_grid
        .par_iter()
        .map(|&db| curve_row(delta, db))
        .collect())
}

/// SNR (dB) at which a BER curve bends down most sharply: the grid point
/// with the most negative second difference of `log10(BER)`.
pub fn kink_location(snr_db: &[f64], ber: &[f64]) -> Option<f64> {
    if snr_db.len() != ber.len() || snr_db.len() < 3 {
        return None;
    }
    let logs: Vec<f64> = ber.iter().map(|b| b.log10()).collect();
    (1..logs.len() - 1)
        .filter_map(|i| {
            let h1 = snr_db[i] - snr_db[i - 1];
            let h2 = snr_db[i + 1] - snr_db[i];
            let d2 =
                ((logs[i + 1] - logs[i]) / h2 - (logs[i] - logs[i - 1]) / h1) / (0.5 * (h1 + h2));
            d2.is_finite().then_some((snr_db[i], d2))
        })
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .map(|(x, _)| x)
}
