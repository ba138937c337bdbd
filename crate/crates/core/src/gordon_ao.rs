//! The auxiliary optimization behind the lower bound on shell costs.
//!
//! For `g` with `m` entries and `h` with `n` entries, all iid `N(0, 1/n)`,
//! the auxiliary objective at error norm `alpha = ||x - x0||` is
//!
//! ```text
//! sqrt(alpha^2 + sigma^2) ||g|| - (2 / sqrt(n)) sum_{i <= k} h_(i),   k = round(alpha^2 n / 4),
//! ```
//!
//! with `h_(1) >= h_(2) >= ...`. It concentrates on `ell(alpha^2 / 4)`.

use rayon::prelude::*;
use serde::Serialize;

use crate::bounds::{critical_points, ell, ell_of_u};
use crate::error::{Error, Result};
use crate::mc_sim::{c_star_all_shells, SHELL_MAX_N};
use crate::model::{gen_instance, keyed_rng, normals, stream, ModelParams};
use crate::scalar_math::{density, neumaier_sum, tail_inv, NeumaierSum};

/// Sufficient statistics of one `(g, h)` draw.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AoSample {
    pub n: usize,
    pub m: usize,
    pub g_norm: f64,
    /// `n + 1` entries; entry `k` is `(2 / sqrt(n))` times the sum of the `k`
    /// largest entries of `h`. Entry 0 is zero.
    pub h_sorted_prefix_sums: Vec<f64>,
}

pub fn draw_ao_sample(params: ModelParams, n: usize, seed: u64, trial: u64) -> Result<AoSample> {
    if n == 0 {
        return Err(Error::Parameter("n must be at least 1".into()));
    }
    let m = params.receivers(n);
    let scale = 1.0 / (n as f64).sqrt();
    let g = normals(&mut keyed_rng(seed, trial, stream::AO_G), m, scale);
    let mut h = normals(&mut keyed_rng(seed, trial, stream::AO_H), n, scale);
    h.sort_unstable_by(|a, b| b.total_cmp(a));
    let mut prefix = Vec::with_capacity(n + 1);
    prefix.push(0.0);
    let mut acc = NeumaierSum::default();
    for v in h {
        acc.add(v);
        prefix.push(2.0 * scale * acc.total());
    }
    Ok(AoSample {
        n,
        m,
        g_norm: neumaier_sum(g.iter().map(|x| x * x)).sqrt(),
        h_sorted_prefix_sums: prefix,
    })
}

/// `k = round(alpha^2 n / 4)`, ties to even.
pub fn shell_size(alpha: f64, n: usize) -> usize {
    (alpha * alpha * n as f64 / 4.0).round_ties_even() as usize
}

/// The auxiliary objective at `alpha in (0, 2]`. Error vectors between
/// `+-1` symbols have norm at most `2 sqrt(n)`, hence the upper limit after
/// normalization.
pub fn ao_objective(alpha: f64, sample: &AoSample, sigma2: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha <= 2.0) {
        return Err(Error::domain(
            "ao_objective",
            format!("alpha = {alpha} not in (0, 2]"),
        ));
    }
    if !(sigma2 >= 0.0 && sigma2.is_finite()) {
        return Err(Error::domain(
            "ao_objective",
            format!("sigma2 = {sigma2} invalid"),
        ));
    }
    let k = shell_size(alpha, sample.n).min(sample.n);
    Ok((alpha * alpha + sigma2).sqrt() * sample.g_norm - sample.h_sorted_prefix_sums[k])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OrderStatReport {
    pub theta: f64,
    pub k: usize,
    pub mean: f64,
    pub std_error: f64,
    /// `phi(Q^{-1}(theta))`.
    pub analytic: f64,
}

/// Monte Carlo mean of `(1/n) sum_{i <= k} gamma_(i)` for standard normal
/// `gamma` and `k = round(theta n)`, against its limit `phi(Q^{-1}(theta))`.
pub fn order_stat_concentration(
    theta: f64,
    n: usize,
    trials: u64,
    seed: u64,
) -> Result<OrderStatReport> {
    if !(theta > 0.0 && theta < 1.0) {
        return Err(Error::domain(
            "order_stat_concentration",
            format!("theta = {theta} not in (0, 1)"),
        ));
    }
    let k = (theta * n as f64).round_ties_even() as usize;
    if k == 0 {
        return Err(Error::Parameter(format!(
            "theta * n = {} rounds to 0",
            theta * n as f64
        )));
    }
    if trials < 2 {
        return Err(Error::Parameter("at least two trials are needed".into()));
    }
    let values: Vec<f64> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut v = normals(&mut keyed_rng(seed, t, stream::ORDER_STAT), n, 1.0);
            v.select_nth_unstable_by(k - 1, |a, b| b.total_cmp(a));
            neumaier_sum(v[..k].iter().copied()) / n as f64
        })
        .collect();
    let (mean, std_error) = mean_and_stderr(&values);
    Ok(OrderStatReport {
        theta,
        k,
        mean,
        std_error,
        analytic: density(tail_inv(theta)),
    })
}

pub(crate) fn mean_and_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = neumaier_sum(values.iter().copied()) / n;
    let var = neumaier_sum(values.iter().map(|v| (v - mean) * (v - mean))) / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// One row of the trial-level AO table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AoRow {
    pub trial: u64,
    pub alpha: f64,
    pub ao_value: f64,
    pub ell_value: f64,
}

/// AO objective and `ell(alpha^2/4)` for each trial and each `alpha` of the
/// grid. Rows are ordered by trial, then grid position.
pub fn ao_table(
    params: ModelParams,
    n: usize,
    trials: u64,
    seed: u64,
    alphas: &[f64],
) -> Result<Vec<AoRow>> {
    let ells = alphas
        .iter()
        .map(|&a| {
            let theta = a * a / 4.0;
            if theta < 1.0 {
                ell(theta, params)
            } else {
                Ok(ell_at_one(params))
            }
        })
        .collect::<Result<Vec<f64>>>()?;
    let per_trial = (0..trials)
        .into_par_iter()
        .map(|t| {
            let s = draw_ao_sample(params, n, seed, t)?;
            alphas
                .iter()
                .zip(&ells)
                .map(|(&alpha, &ell_value)| {
                    Ok(AoRow {
                        trial: t,
                        alpha,
                        ao_value: ao_objective(alpha, &s, params.sigma2())?,
                        ell_value,
                    })
                })
                .collect::<Result<Vec<AoRow>>>()
        })
        .collect::<Result<Vec<Vec<AoRow>>>>()?;
    Ok(per_trial.into_iter().flatten().collect())
}

/// `lim_{theta -> 1} ell(theta) = sqrt(delta) sqrt(4 + sigma^2)`.
fn ell_at_one(params: ModelParams) -> f64 {
    params.delta().sqrt() * (4.0 + params.sigma2()).sqrt()
}

/// `inf ell(theta)` over `theta in [theta_lo, 1)`: the smaller of the left
/// end value, the limit at 1 and every interior critical value.
pub fn ell_min_over(theta_lo: f64, params: ModelParams) -> Result<f64> {
    let mut best = ell_at_one(params);
    if theta_lo > 0.0 {
        if theta_lo < 1.0 {
            best = best.min(ell(theta_lo, params)?);
        }
    } else {
        best = best.min(crate::bounds::ell_at_zero(params));
    }
    for c in critical_points(params)? {
        if c.theta >= theta_lo {
            best = best.min(ell_of_u(c.u, params));
        }
    }
    Ok(best)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ShellCheckReport {
    pub n: usize,
    pub trials: u64,
    pub alpha_min: f64,
    pub eta: f64,
    /// `inf { ell(alpha^2/4) : alpha >= alpha_min }`.
    pub ell_floor: f64,
    pub violations: u64,
    pub fraction: f64,
}

/// Fraction of trials in which the smallest shell cost over all shells with
/// `alpha = 2 sqrt(k/n) >= alpha0 + eps` falls below the asymptotic floor
/// minus `eta`. A finite-size diagnostic; the bound holds only in the limit.
pub fn gmt_shell_check(
    params: ModelParams,
    n: usize,
    alpha0: f64,
    eps: f64,
    eta: f64,
    trials: u64,
    seed: u64,
) -> Result<ShellCheckReport> {
    if n > SHELL_MAX_N {
        return Err(Error::Parameter(format!(
            "shell search needs n <= {SHELL_MAX_N}, got {n}"
        )));
    }
    if trials == 0 {
        return Err(Error::Parameter("trials must be positive".into()));
    }
    let alpha_min = alpha0 + eps;
    if !(alpha_min <= 2.0) {
        return Err(Error::Parameter(format!(
            "alpha0 + eps = {alpha_min} > 2 leaves no shell"
        )));
    }
    let k_min = (alpha_min.max(0.0).powi(2) * n as f64 / 4.0).ceil() as usize;
    if k_min > n {
        return Err(Error::Parameter(
            "no shell satisfies the alpha constraint".into(),
        ));
    }
    let ell_floor = ell_min_over(alpha_min.max(0.0).powi(2) / 4.0, params)?;
    let violations = (0..trials)
        .into_par_iter()
        .map(|t| {
            let inst = gen_instance(params, n, seed, t)?;
            let shells = c_star_all_shells(&inst)?;
            let min = shells[k_min..]
                .iter()
                .cloned()
                .fold(f64::INFINITY, f64::min);
            Ok((min < ell_floor - eta) as u64)
        })
        .try_reduce(|| 0, |a, b| Ok(a + b))?;
    Ok(ShellCheckReport {
        n,
        trials,
        alpha_min,
        eta,
        ell_floor,
        violations,
        fraction: violations as f64 / trials as f64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bounds::replica_theta_star;
    use proptest::prelude::*;

    fn params() -> ModelParams {
        ModelParams::new(1.0, 0.1).unwrap()
    }

    #[test]
    fn sample_statistics() {
        let s = draw_ao_sample(params(), 4000, 1, 0).unwrap();
        assert_eq!(s.m, 4000);
        assert_eq!(s.h_sorted_prefix_sums.len(), 4001);
        assert!(s.g_norm > 0.95 && s.g_norm < 1.05);
        assert_eq!(s, draw_ao_sample(params(), 4000, 1, 0).unwrap());
        assert_ne!(s, draw_ao_sample(params(), 4000, 1, 1).unwrap());
        // Increments are 2/sqrt(n) times a descending sequence.
        let inc: Vec<f64> = s
            .h_sorted_prefix_sums
            .windows(2)
            .map(|w| w[1] - w[0])
            .collect();
        assert!(inc.windows(2).all(|w| w[1] <= w[0] + 1e-15));
    }

    #[test]
    fn full_sum_has_mean_zero() {
        let totals: Vec<f64> = (0..200)
            .map(|t| {
                *draw_ao_sample(params(), 400, 2, t)
                    .unwrap()
                    .h_sorted_prefix_sums
                    .last()
                    .unwrap()
            })
            .collect();
        let (mean, se) = mean_and_stderr(&totals);
        assert!(mean.abs() <= 4.0 * se, "{mean} {se}");
    }

    #[test]
    fn objective_edge_cases() {
        let s = draw_ao_sample(params(), 100, 3, 0).unwrap();
        // k = round(0.01 * 100 / 4) = 0.
        let v = ao_objective(0.1, &s, 0.1).unwrap();
        assert_eq!(v, (0.1f64 * 0.1 + 0.1).sqrt() * s.g_norm);
        assert!(ao_objective(0.0, &s, 0.1).is_err());
        assert!(ao_objective(2.1, &s, 0.1).is_err());
        assert!(ao_objective(2.0, &s, 0.1).is_ok());
        for a in [0.3, 0.9, 1.5] {
            assert!(ao_objective(a, &s, 0.2).unwrap() > ao_objective(a, &s, 0.1).unwrap());
        }
    }

    #[test]
    fn cardinality_identity_on_exact_points() {
        let n = 400;
        for k in 0..=n {
            let alpha = 2.0 * (k as f64 / n as f64).sqrt();
            assert_eq!(shell_size(alpha, n), k);
        }
        assert_eq!(shell_size(1.0, 2), 0); // 0.5 ties to even
        assert_eq!(shell_size(1.0, 6), 2); // 1.5 ties to even
    }

    #[test]
    fn pointwise_concentration() {
        let p = params();
        for alpha in [0.2, 0.4, 0.6, 0.8] {
            let vals: Vec<f64> = (0..100)
                .map(|t| ao_objective(alpha, &draw_ao_sample(p, 4000, 9, t).unwrap(), 0.1).unwrap())
                .collect();
            let (mean, _) = mean_and_stderr(&vals);
            let target = ell(alpha * alpha / 4.0, p).unwrap();
            assert!(
                ((mean - target) / target).abs() <= 0.02,
                "alpha={alpha}: {mean} vs {target}"
            );
        }
    }

    #[test]
    fn min_over_alpha_tracks_min_ell() {
        let p = params();
        let alphas: Vec<f64> = (1..=100).map(|i| i as f64 * 0.02).collect();
        let rows = ao_table(p, 4000, 50, 5, &alphas).unwrap();
        assert_eq!(rows.len(), 50 * alphas.len());
        let means: Vec<f64> = (0..alphas.len())
            .map(|i| {
                rows.iter()
                    .skip(i)
                    .step_by(alphas.len())
                    .map(|r| r.ao_value)
                    .sum::<f64>()
                    / 50.0
            })
            .collect();
        let ao_min = means.iter().cloned().fold(f64::INFINITY, f64::min);
        let ell_min = ell(replica_theta_star(p).unwrap(), p).unwrap();
        assert!(
            ((ao_min - ell_min) / ell_min).abs() <= 0.02,
            "{ao_min} vs {ell_min}"
        );
    }

    #[test]
    fn order_statistics() {
        let r = order_stat_concentration(0.25, 4000, 200, 17).unwrap();
        assert_eq!(r.k, 1000);
        assert!((r.mean - r.analytic).abs() <= 3.0 * r.std_error, "{r:?}");
        let small = order_stat_concentration(0.25, 4000, 20, 17).unwrap();
        let ratio = small.std_error / r.std_error;
        assert!(ratio > 2.0 && ratio < 5.5, "{ratio}");
        let near_one = order_stat_concentration(1.0 - 1e-6, 2000, 20, 3).unwrap();
        assert!(near_one.mean.abs() < 0.1 && near_one.analytic < 1e-5);
        assert!(order_stat_concentration(1e-5, 100, 10, 0).is_err());
    }

    #[test]
    fn ell_floor_examples() {
        let p = params();
        let star = replica_theta_star(p).unwrap();
        let floor = ell_min_over(star / 2.0, p).unwrap();
        assert!((floor - ell(star, p).unwrap()).abs() < 1e-15);
        let right = ell_min_over(0.3, p).unwrap();
        assert!((right - ell(0.3, p).unwrap()).abs() < 1e-15);
    }

    #[test]
    fn shell_check_errors_and_slack() {
        let p = params();
        assert!(gmt_shell_check(p, 21, 0.1, 0.1, 0.1, 1, 0).is_err());
        assert!(gmt_shell_check(p, 16, 1.8, 0.3, 0.1, 1, 0).is_err());
        let r = gmt_shell_check(p, 16, 0.1, 0.05, 0.5, 50, 0).unwrap();
        assert_eq!(r.violations, 0);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn objective_monotone_in_noise(alpha in 0.01f64..2.0, s1 in 0.0f64..1.0, ds in 1e-6f64..1.0, trial in 0u64..50) {
            let s = draw_ao_sample(params(), 64, 4, trial).unwrap();
            prop_assert!(ao_objective(alpha, &s, s1 + ds).unwrap() >= ao_objective(alpha, &s, s1).unwrap());
        }
    }
}
