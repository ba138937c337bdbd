//! Finite-`B` replica saddle-point system for the postulated posterior mean
//! estimator, and its `B -> infinity` link to the replica BER prediction.
//!
//! For inverse temperature `B` the system reads
//!
//! ```text
//! m = E[tanh(sqrt(F) Z + E)],   q = E[tanh^2(sqrt(F) Z + E)],
//! E = delta B / (1 + B (1 - q)),
//! F = delta B^2 (sigma^2 + 4 BER + q - 1) / (1 + B (1 - q))^2,   BER = (1 - m) / 2.
//! ```
//!
//! MAP detection is the limit `B -> infinity`. That limit is not taken
//! numerically; [`b_infinity_consistency`] checks the analytic reduction
//! instead.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::scalar_math::{gauss_expectation, tail, QuadratureRule};

/// One point of the `(m, q, E, F)` iteration at inverse temperature `b`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TanakaState {
    pub overlap_m: f64,
    pub q: f64,
    pub field_mean: f64,
    pub field_var: f64,
    pub b: f64,
}

impl TanakaState {
    /// `m = 0`, `q = 1/2`, with `E` and `F` from the closure equations.
    pub fn initial(params: ModelParams, b: f64) -> Result<Self> {
        check_b(b)?;
        let (field_mean, field_var, _) = closure(0.0, 0.5, b, params);
        Ok(Self {
            overlap_m: 0.0,
            q: 0.5,
            field_mean,
            field_var,
            b,
        })
    }

    pub fn ber(&self) -> f64 {
        (1.0 - self.overlap_m) / 2.0
    }

    fn max_abs_diff(&self, other: &Self) -> f64 {
        [
            self.overlap_m - other.overlap_m,
            self.q - other.q,
            self.field_mean - other.field_mean,
            self.field_var - other.field_var,
        ]
        .iter()
        .fold(0.0, |acc: f64, d| acc.max(d.abs()))
    }

    fn is_finite(&self) -> bool {
        self.overlap_m.is_finite()
            && self.q.is_finite()
            && self.field_mean.is_finite()
            && self.field_var.is_finite()
    }
}

/// Result of one sweep. `clamped` is set when the `F` radicand came out
/// negative and was replaced by zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    pub state: TanakaState,
    pub clamped: bool,
}

/// A converged solve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TanakaSolution {
    pub state: TanakaState,
    pub iterations: usize,
    /// Number of sweeps in which the `F` radicand was clamped.
    pub clamp_events: usize,
}

pub const DEFAULT_DAMPING: f64 = 0.5;
pub const DEFAULT_MAX_ITERS: usize = 10_000;
const TOLERANCE: f64 = 1e-10;

/// Quadrature used by default: 16-point Gauss-Legendre panels of width
/// 0.02 on `[-10, 10]`. At large `B` the integrands are steep sigmoids that
/// Gauss-Hermite rules of moderate order do not resolve.
pub fn default_rule() -> QuadratureRule {
    QuadratureRule::composite_legendre(10.0, 1000, 16).expect("valid composite rule")
}

fn check_b(b: f64) -> Result<()> {
    if b > 0.0 && b.is_finite() {
        Ok(())
    } else {
        Err(Error::Parameter(format!(
            "B must be positive and finite, got {b}"
        )))
    }
}

/// `(E, F, clamped)` from `(m, q)`.
fn closure(m: f64, q: f64, b: f64, params: ModelParams) -> (f64, f64, bool) {
    let ber = (1.0 - m) / 2.0;
    let denom = 1.0 + b * (1.0 - q);
    let radicand = params.sigma2() + 4.0 * ber + q - 1.0;
    let clamped = radicand < 0.0;
    let e = params.delta() * b / denom;
    let f = params.delta() * b * b * radicand.max(0.0) / (denom * denom);
    (e, f, clamped)
}

/// One full sweep: the two expectations at the current `(E, F)`, then the
/// closure at the updated `(m, q)`.
pub fn tanaka_step(
    state: TanakaState,
    params: ModelParams,
    rule: &QuadratureRule,
) -> Result<StepOutcome> {
    check_b(state.b)?;
    if !state.is_finite() || state.field_var < 0.0 {
        return Err(Error::Divergence(format!("invalid state {state:?}")));
    }
    let s = state.field_var.sqrt();
    let e = state.field_mean;
    let m = gauss_expectation(|z| (s * z + e).tanh(), rule)
        .map_err(|err| Error::Divergence(err.to_string()))?;
    let q = gauss_expectation(|z| (s * z + e).tanh().powi(2), rule)
        .map_err(|err| Error::Divergence(err.to_string()))?;
    // Rounding can push the sums a hair past the tanh ranges.
    let m = m.clamp(-1.0, 1.0);
    let q = q.clamp(0.0, 1.0);
    let (field_mean, field_var, clamped) = closure(m, q, state.b, params);
    let next = TanakaState {
        overlap_m: m,
        q,
        field_mean,
        field_var,
        b: state.b,
    };
    if !next.is_finite() {
        return Err(Error::Divergence(format!("non-finite iterate {next:?}")));
    }
    Ok(StepOutcome {
        state: next,
        clamped,
    })
}

/// Damped Picard iteration with the default quadrature.
pub fn solve_tanaka(
    params: ModelParams,
    b: f64,
    damping: f64,
    init: TanakaState,
    max_iters: usize,
) -> Result<TanakaSolution> {
    solve_tanaka_with(params, b, damping, init, max_iters, &default_rule())
}

/// Damped Picard iteration `x <- (1 - damping) x + damping step(x)` until
/// the max-norm change is at most `1e-10`.
pub fn solve_tanaka_with(
    params: ModelParams,
    b: f64,
    damping: f64,
    init: TanakaState,
    max_iters: usize,
    rule: &QuadratureRule,
) -> Result<TanakaSolution> {
    check_b(b)?;
    if !(damping > 0.0 && damping <= 1.0) {
        return Err(Error::Parameter(format!(
            "damping must be in (0, 1], got {damping}"
        )));
    }
    let mut x = TanakaState { b, ..init };
    let mut clamp_events = 0;
    for it in 1..=max_iters {
        let step = tanaka_step(x, params, rule)?;
        clamp_events += step.clamped as usize;
        let t = step.state;
        let next = TanakaState {
            overlap_m: (1.0 - damping) * x.overlap_m + damping * t.overlap_m,
            q: (1.0 - damping) * x.q + damping * t.q,
            field_mean: (1.0 - damping) * x.field_mean + damping * t.field_mean,
            field_var: (1.0 - damping) * x.field_var + damping * t.field_var,
            b,
        };
        let change = next.max_abs_diff(&x);
        x = next;
        if change <= TOLERANCE {
            return Ok(TanakaSolution {
                state: x,
                iterations: it,
                clamp_events,
            });
        }
    }
    Err(Error::NonConvergence {
        iterations: max_iters,
        last: x,
    })
}

/// Residual of the `B -> infinity` reduction at a candidate BER.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConsistencyReport {
    pub ber: f64,
    /// `c = sqrt((sigma^2 + 4 ber) / delta)`.
    pub c: f64,
    /// `|ber - Q(1/c)|`.
    pub residual: f64,
}

/// With `q -> 1` and `E, F -> infinity` the first equation collapses to
/// `1 - 2 BER = 1 - 2 Q(1/c)`. Returns how far `ber` is from satisfying it.
pub fn b_infinity_consistency(ber: f64, params: ModelParams) -> Result<ConsistencyReport> {
    if !(ber > 0.0 && ber < 1.0) {
        return Err(Error::domain(
            "b_infinity_consistency",
            format!("ber = {ber} not in (0, 1)"),
        ));
    }
    let c = ((params.sigma2() + 4.0 * ber) / params.delta()).sqrt();
    Ok(ConsistencyReport {
        ber,
        c,
        residual: (ber - tail(1.0 / c)).abs(),
    })
}
