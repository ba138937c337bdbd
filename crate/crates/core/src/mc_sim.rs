//! Finite-size detectors and the Monte Carlo harness.
//!
//! * exhaustive MAP over `{+1, -1}^n` in Gray-code order,
//! * box relaxation solved by projected gradient, then thresholded,
//! * the matched-filter genie for one bit with all others known,
//! * the exact minimum residual on a Hamming shell around `x0`.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{
    ber_of, gen_instance, genie_sample, DetectionResult, GenieSample, Instance, ModelParams,
};

/// Largest `n` accepted by the exhaustive MAP search.
pub const MAP_MAX_N: usize = 24;
/// Largest `n` accepted by the shell enumerators.
pub const SHELL_MAX_N: usize = 20;

/// Full residual recomputation interval for incremental updates.
const RESYNC_EVERY: u64 = 4096;

const BRO_TOL: f64 = 1e-10;
const BRO_MAX_ITERS: usize = 100_000;
const POWER_TOL: f64 = 1e-10;

/// Two-sided 95% normal quantile.
const Z95: f64 = 1.959_963_984_540_054;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Detector {
    #[serde(rename = "map")]
    Map,
    #[serde(rename = "bro")]
    Bro,
    #[serde(rename = "mf")]
    MfGenie,
}

impl Detector {
    pub fn as_str(&self) -> &'static str {
        match self {
            Detector::Map => "map",
            Detector::Bro => "bro",
            Detector::MfGenie => "mf",
        }
    }
}

impl std::fmt::Display for Detector {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Detector {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "map" => Ok(Detector::Map),
            "bro" => Ok(Detector::Bro),
            "mf" | "mf_genie" | "mf-genie" => Ok(Detector::MfGenie),
            other => Err(Error::Parameter(format!("unknown detector {other:?}"))),
        }
    }
}

/// Column-major sweep helper: `r += c * a_j` and returns the new `||r||^2`.
#[inline]
fn axpy_norm2(r: &mut [f64], col: &[f64], c: f64) -> f64 {
    let mut s = 0.0;
    for (ri, &a) in r.iter_mut().zip(col) {
        *ri += c * a;
        s += *ri * *ri;
    }
    s
}

#[inline]
fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum()
}

/// Symbol vector for a codeword index: bit `j` set means `x_j = -1`.
fn codeword(index: u64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|j| if (index >> j) & 1 == 1 { -1.0 } else { 1.0 })
        .collect()
}

/// Exact MAP solution with its residual norm and codeword index.
#[derive(Debug, Clone, PartialEq)]
pub struct MapOutcome {
    pub x_hat: Vec<f64>,
    /// `||y - A x_hat||`.
    pub objective: f64,
    pub index: u64,
}

/// Exhaustive minimization of `||y - A x||` over `{+1, -1}^n`.
///
/// Codewords are visited in reflected Gray-code order starting from all
/// `+1`, so consecutive residuals differ by `+-2 a_j`. Exact ties go to the
/// smaller codeword index.
pub fn map_search(instance: &Instance) -> Result<MapOutcome> {
    let n = instance.n();
    if n > MAP_MAX_N {
        return Err(Error::Budget(format!(
            "exhaustive MAP needs n <= {MAP_MAX_N}, got {n}"
        )));
    }
    let mut x = vec![1.0; n];
    let mut r = instance.residual(&x);
    let mut best = (norm2(&r), 0u64);
    let mut gray = 0u64;
    for i in 1..(1u64 << n) {
        let j = i.trailing_zeros() as usize;
        gray ^= 1 << j;
        let cur = if i % RESYNC_EVERY == 0 {
            x[j] = -x[j];
            r = instance.residual(&x);
            norm2(&r)
        } else {
            // x_j: s -> -s changes y - A x by 2 s a_j.
            let s = x[j];
            x[j] = -s;
            axpy_norm2(&mut r, instance.column(j), 2.0 * s)
        };
        if cur < best.0 || (cur == best.0 && gray < best.1) {
            best = (cur, gray);
        }
    }
    let x_hat = codeword(best.1, n);
    let objective = instance.residual_norm(&x_hat);
    Ok(MapOutcome {
        x_hat,
        objective,
        index: best.1,
    })
}

pub fn map_detect(instance: &Instance) -> Result<DetectionResult> {
    let out = map_search(instance)?;
    ber_of(&out.x_hat, instance.x0())
}

/// Solution of the box-relaxed least-squares problem.
#[derive(Debug, Clone, PartialEq)]
pub struct BroOutcome {
    /// Minimizer of `||y - A x||` over `[-1, 1]^n` (last iterate).
    pub x_relaxed: Vec<f64>,
    /// `sign(x_relaxed)` with `sign(0) = +1`.
    pub x_hat: Vec<f64>,
    /// `||y - A x_relaxed||`.
    pub objective: f64,
    pub iterations: usize,
    /// Final projected-gradient norm `L ||x - P(x - grad / L)||`.
    pub pg_norm: f64,
    pub converged: bool,
}

/// Gram matrix `A^T A` (row-major, symmetric) and `A^T y`.
fn normal_equations(instance: &Instance) -> (Vec<f64>, Vec<f64>) {
    let n = instance.n();
    let mut gram = vec![0.0; n * n];
    for i in 0..n {
        let ai = instance.column(i);
        for j in i..n {
            let v: f64 = ai.iter().zip(instance.column(j)).map(|(a, b)| a * b).sum();
            gram[i * n + j] = v;
            gram[j * n + i] = v;
        }
    }
    let aty = (0..n)
        .map(|j| {
            instance
                .column(j)
                .iter()
                .zip(instance.y())
                .map(|(a, b)| a * b)
                .sum()
        })
        .collect();
    (gram, aty)
}

fn mat_vec(mat: &[f64], v: &[f64], out: &mut [f64]) {
    let n = v.len();
    for (i, o) in out.iter_mut().enumerate() {
        *o = mat[i * n..(i + 1) * n]
            .iter()
            .zip(v)
            .map(|(a, b)| a * b)
            .sum();
    }
}

/// Largest eigenvalue of a symmetric positive semidefinite matrix by power
/// iteration, to relative change `1e-10`.
fn largest_eigenvalue(mat: &[f64], n: usize) -> f64 {
    let mut v = vec![1.0 / (n as f64).sqrt(); n];
    let mut w = vec![0.0; n];
    let mut lambda = 0.0;
    for _ in 0..10_000 {
        mat_vec(mat, &v, &mut w);
        let norm = norm2(&w).sqrt();
        if norm == 0.0 {
            return 0.0;
        }
        let next: f64 = v.iter().zip(&w).map(|(a, b)| a * b).sum();
        for (vi, wi) in v.iter_mut().zip(&w) {
            *vi = wi / norm;
        }
        if (next - lambda).abs() <= POWER_TOL * next.abs() {
            return norm.max(next);
        }
        lambda = next;
    }
    lambda
}

/// Projected gradient on `f(x) = ||y - A x||^2 / 2` over `[-1, 1]^n`, step
/// `1/L` with `L = lambda_max(A^T A)`, started at `0`. Stops when the
/// projected-gradient norm is at most `1e-10` or after `1e5` iterations.
pub fn bro_solve(instance: &Instance) -> BroOutcome {
    let n = instance.n();
    let (gram, aty) = normal_equations(instance);
    // Power iteration converges from below; a slightly larger L keeps the
    // step safe.
    let l = largest_eigenvalue(&gram, n) * (1.0 + 1e-9);
    let mut x = vec![0.0; n];
    let mut grad = vec![0.0; n];
    let mut iterations = 0;
    let mut pg_norm = f64::INFINITY;
    if l > 0.0 {
        while iterations < BRO_MAX_ITERS {
            mat_vec(&gram, &x, &mut grad);
            let mut step2 = 0.0;
            for j in 0..n {
                let g = grad[j] - aty[j];
                let next = (x[j] - g / l).clamp(-1.0, 1.0);
                step2 += (next - x[j]) * (next - x[j]);
                x[j] = next;
            }
            iterations += 1;
            pg_norm = l * step2.sqrt();
            if pg_norm <= BRO_TOL {
                break;
            }
        }
    } else {
        pg_norm = 0.0;
    }
    let x_hat: Vec<f64> = x
        .iter()
        .map(|&v| if v >= 0.0 { 1.0 } else { -1.0 })
        .collect();
    BroOutcome {
        objective: instance.residual_norm(&x),
        x_relaxed: x,
        x_hat,
        iterations,
        pg_norm,
        converged: pg_norm <= BRO_TOL,
    }
}

pub fn bro_detect(instance: &Instance) -> Result<DetectionResult> {
    let out = bro_solve(instance);
    ber_of(&out.x_hat, instance.x0())
}

/// Gradient of `||y - A x||^2 / 2` at `x`.
pub fn bro_gradient(instance: &Instance, x: &[f64]) -> Vec<f64> {
    let r = instance.residual(x);
    (0..instance.n())
        .map(|j| {
            -instance
                .column(j)
                .iter()
                .zip(&r)
                .map(|(a, b)| a * b)
                .sum::<f64>()
        })
        .collect()
}

/// Matched-filter decision for bit `j` with every other symbol known:
/// `sign(a_j^T (y - sum_{i != j} x0_i a_i))`, `sign(0) = +1`. Returns
/// whether the decision equals `x0_j`.
pub fn mf_genie_detect(instance: &Instance, bit_index: usize) -> Result<bool> {
    let n = instance.n();
    if bit_index >= n {
        return Err(Error::Parameter(format!(
            "bit index {bit_index} >= n = {n}"
        )));
    }
    let x0 = instance.x0();
    let mut y_tilde = instance.y().to_vec();
    for i in (0..n).filter(|&i| i != bit_index) {
        for (yt, &a) in y_tilde.iter_mut().zip(instance.column(i)) {
            *yt -= x0[i] * a;
        }
    }
    let stat: f64 = instance
        .column(bit_index)
        .iter()
        .zip(&y_tilde)
        .map(|(a, b)| a * b)
        .sum();
    Ok(decide(stat) == x0[bit_index])
}

/// Same decision from the genie's reduced sample `x0_j a_j + sigma z`.
pub fn mf_genie_decide(sample: &GenieSample) -> bool {
    let stat: f64 = sample
        .column
        .iter()
        .zip(&sample.noise)
        .map(|(a, z)| a * (sample.bit * a + sample.sigma * z))
        .sum();
    decide(stat) == sample.bit
}

#[inline]
fn decide(stat: f64) -> f64 {
    if stat >= 0.0 {
        1.0
    } else {
        -1.0
    }
}

/// Revolving-door order of the `k`-subsets of `{0, .., n-1}` as bitmasks.
/// Consecutive subsets differ by one element leaving and one entering.
fn revolving_door(n: usize, k: usize) -> Vec<u32> {
    if k == 0 {
        return vec![0];
    }
    if k == n {
        return vec![((1u64 << n) - 1) as u32];
    }
    let mut out = revolving_door(n - 1, k);
    let top = 1u32 << (n - 1);
    out.extend(
        revolving_door(n - 1, k - 1)
            .into_iter()
            .rev()
            .map(|m| m | top),
    );
    out
}

fn check_shell_budget(n: usize) -> Result<()> {
    if n > SHELL_MAX_N {
        Err(Error::Budget(format!(
            "shell enumeration needs n <= {SHELL_MAX_N}, got {n}"
        )))
    } else {
        Ok(())
    }
}

/// `min ||y - A x|| / sqrt(n)` over all `x` at Hamming distance exactly `k`
/// from `x0`.
pub fn c_star_shell(instance: &Instance, k: usize) -> Result<f64> {
    let n = instance.n();
    check_shell_budget(n)?;
    if k > n {
        return Err(Error::Parameter(format!("shell index {k} > n = {n}")));
    }
    let x0 = instance.x0();
    let combos = revolving_door(n, k);
    let flipped = |mask: u32| -> Vec<f64> {
        (0..n)
            .map(|j| if (mask >> j) & 1 == 1 { -x0[j] } else { x0[j] })
            .collect()
    };
    let mut x = flipped(combos[0]);
    let mut r = instance.residual(&x);
    let mut best = norm2(&r);
    for (step, w) in combos.windows(2).enumerate() {
        let diff = w[0] ^ w[1];
        if (step as u64 + 1) % RESYNC_EVERY == 0 {
            x = flipped(w[1]);
            r = instance.residual(&x);
            best = best.min(norm2(&r));
            continue;
        }
        let mut cur = 0.0;
        let mut bits = diff;
        while bits != 0 {
            let j = bits.trailing_zeros() as usize;
            bits &= bits - 1;
            let s = x[j];
            x[j] = -s;
            cur = axpy_norm2(&mut r, instance.column(j), 2.0 * s);
        }
        best = best.min(cur);
    }
    Ok(best.sqrt() / (n as f64).sqrt())
}

/// [`c_star_shell`] for every `k = 0..=n` in one Gray-code sweep.
pub fn c_star_all_shells(instance: &Instance) -> Result<Vec<f64>> {
    let n = instance.n();
    check_shell_budget(n)?;
    let x0 = instance.x0();
    let mut x = x0.to_vec();
    let mut r = instance.residual(&x);
    let mut best = vec![f64::INFINITY; n + 1];
    best[0] = norm2(&r);
    let mut weight = 0usize;
    let mut gray = 0u64;
    for i in 1..(1u64 << n) {
        let j = i.trailing_zeros() as usize;
        gray ^= 1 << j;
        let s = x[j];
        x[j] = -s;
        if (gray >> j) & 1 == 1 {
            weight += 1;
        } else {
            weight -= 1;
        }
        let cur = if i % RESYNC_EVERY == 0 {
            r = instance.residual(&x);
            norm2(&r)
        } else {
            axpy_norm2(&mut r, instance.column(j), 2.0 * s)
        };
        if cur < best[weight] {
            best[weight] = cur;
        }
    }
    let scale = 1.0 / (n as f64).sqrt();
    Ok(best.into_iter().map(|v| v.sqrt() * scale).collect())
}

/// Wilson score interval at 95% for `successes` out of `total`.
pub fn wilson_interval(successes: u64, total: u64) -> (f64, f64) {
    if total == 0 {
        return (0.0, 1.0);
    }
    let nt = total as f64;
    let p = successes as f64 / nt;
    let z2 = Z95 * Z95;
    let denom = 1.0 + z2 / nt;
    let center = (p + z2 / (2.0 * nt)) / denom;
    let half = Z95 * (p * (1.0 - p) / nt + z2 / (4.0 * nt * nt)).sqrt() / denom;
    (
        (center - half).max(0.0).min(p),
        (center + half).min(1.0).max(p),
    )
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonteCarloReport {
    pub detector: Detector,
    pub params: ModelParams,
    pub n: usize,
    pub trials: u64,
    pub bit_errors: u64,
    pub bits_total: u64,
    pub ber_hat: f64,
    pub ci95: (f64, f64),
    pub seed: u64,
    /// BRO trials that hit the iteration cap; their last iterate is used.
    pub non_converged: u64,
}

impl MonteCarloReport {
    /// `sqrt(p (1 - p) / N)` at the pooled estimate.
    pub fn std_error(&self) -> f64 {
        let p = self.ber_hat;
        (p * (1.0 - p) / self.bits_total as f64).sqrt()
    }

    pub fn ci_halfwidth(&self) -> f64 {
        0.5 * (self.ci95.1 - self.ci95.0)
    }
}

/// Bit errors and BRO cap hits for one trial.
fn run_trial(
    detector: Detector,
    params: ModelParams,
    n: usize,
    seed: u64,
    trial: u64,
) -> Result<(u64, u64)> {
    match detector {
        Detector::Map => {
            let inst = gen_instance(params, n, seed, trial)?;
            Ok((map_detect(&inst)?.errors as u64, 0))
        }
        Detector::Bro => {
            let inst = gen_instance(params, n, seed, trial)?;
            let out = bro_solve(&inst);
            let errors = ber_of(&out.x_hat, inst.x0())?.errors as u64;
            Ok((errors, (!out.converged) as u64))
        }
        Detector::MfGenie => {
            let bit = (trial % n as u64) as usize;
            let sample = genie_sample(params, n, seed, trial, bit)?;
            Ok(((!mf_genie_decide(&sample)) as u64, 0))
        }
    }
}

/// Pooled BER over `trials` independent instances. Trial `t` uses the
/// instance `gen_instance(params, n, seed, t)`; the genie detects bit
/// `t mod n`. Counts are integers, so the report does not depend on how
/// trials are scheduled across threads.
pub fn monte_carlo_ber(
    detector: Detector,
    params: ModelParams,
    n: usize,
    trials: u64,
    seed: u64,
) -> Result<MonteCarloReport> {
    if trials == 0 {
        return Err(Error::Parameter("trials must be positive".into()));
    }
    if n == 0 {
        return Err(Error::Parameter("n must be positive".into()));
    }
    match detector {
        Detector::Map if n > MAP_MAX_N => {
            return Err(Error::Budget(format!(
                "exhaustive MAP needs n <= {MAP_MAX_N}, got {n}"
            )))
        }
        _ => {}
    }
    let (bit_errors, non_converged) = (0..trials)
        .into_par_iter()
        .map(|t| run_trial(detector, params, n, seed, t))
        .try_reduce(|| (0, 0), |a, b| Ok((a.0 + b.0, a.1 + b.1)))?;
    let bits_total = match detector {
        Detector::MfGenie => trials,
        _ => trials * n as u64,
    };
    Ok(MonteCarloReport {
        detector,
        params,
        n,
        trials,
        bit_errors,
        bits_total,
        ber_hat: bit_errors as f64 / bits_total as f64,
        ci95: wilson_interval(bit_errors, bits_total),
        seed,
        non_converged,
    })
}
