//! Problem parametrization, reproducible instance sampling and the BER
//! metric.
//!
//! The observation model is `y = A x0 + sigma z` with `A` an `m x n` matrix
//! of iid `N(0, 1/n)` entries, `x0` uniform on `{+1, -1}^n` and `z` iid
//! standard normal. With this normalization the SNR is `1 / sigma^2`.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar_math::tail_inv;

/// Large-system parameters: antenna ratio `delta = m / n` and noise variance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    delta: f64,
    sigma2: f64,
}

impl ModelParams {
    pub fn new(delta: f64, sigma2: f64) -> Result<Self> {
        if !(delta > 0.0 && delta.is_finite()) {
            return Err(Error::Parameter(format!(
                "delta must be positive, got {delta}"
            )));
        }
        if !(sigma2 > 0.0 && sigma2.is_finite()) {
            return Err(Error::Parameter(format!(
                "sigma2 must be positive, got {sigma2}"
            )));
        }
        Ok(Self { delta, sigma2 })
    }

    pub fn from_snr_db(delta: f64, snr_db: f64) -> Result<Self> {
        Self::new(delta, snr_db_to_sigma2(snr_db))
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }

    pub fn sigma(&self) -> f64 {
        self.sigma2.sqrt()
    }

    pub fn snr(&self) -> f64 {
        1.0 / self.sigma2
    }

    pub fn snr_db(&self) -> f64 {
        10.0 * (1.0 / self.sigma2).log10()
    }

    /// Number of receive antennas for `n` transmitters, `round(delta * n)`
    /// with ties to even.
    pub fn receivers(&self, n: usize) -> usize {
        (self.delta * n as f64).round_ties_even() as usize
    }
}

pub fn snr_db_to_sigma2(snr_db: f64) -> f64 {
    10f64.powf(-snr_db / 10.0)
}

/// Stream tags for the keyed generator. Every random quantity in the crate
/// draws from its own `(seed, trial, tag)` stream, so no two consumers share
/// state and trials can be evaluated in any order.
pub(crate) mod stream {
    pub const SYMBOLS: u64 = 0;
    pub const NOISE: u64 = 1;
    pub const AO_G: u64 = 2;
    pub const AO_H: u64 = 3;
    pub const ORDER_STAT: u64 = 4;
    #[cfg(test)]
    pub const PROBE: u64 = 5;
    /// Column `j` of the channel uses `CHANNEL_BASE + j`.
    pub const CHANNEL_BASE: u64 = 1 << 32;
}

/// Counter-based generator for one `(seed, trial, tag)` stream.
pub(crate) fn keyed_rng(seed: u64, trial: u64, tag: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&trial.to_le_bytes());
    key[16..24].copy_from_slice(b"mapber01");
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(tag);
    rng
}

/// Uniform on the open interval `(0, 1)`.
#[inline]
pub(crate) fn uniform_open(rng: &mut impl RngCore) -> f64 {
    ((rng.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
}

/// Standard normal by inversion of the tail function.
#[inline]
pub(crate) fn std_normal(rng: &mut impl RngCore) -> f64 {
    tail_inv(uniform_open(rng))
}

pub(crate) fn normals(rng: &mut impl RngCore, len: usize, scale: f64) -> Vec<f64> {
    (0..len).map(|_| scale * std_normal(rng)).collect()
}

pub(crate) fn symbols(rng: &mut impl RngCore, len: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(len);
    let mut word = 0u64;
    for i in 0..len {
        if i % 64 == 0 {
            word = rng.next_u64();
        }
        out.push(if (word >> (i % 64)) & 1 == 0 {
            1.0
        } else {
            -1.0
        });
    }
    out
}

/// One sampled finite problem. The channel is stored column-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    params: ModelParams,
    n: usize,
    m: usize,
    channel: Vec<f64>,
    x0: Vec<f64>,
    noise: Vec<f64>,
    y: Vec<f64>,
}

impl Instance {
    /// Assembles an instance from parts, recomputing `y`.
    /// `channel_col_major` has length `m * n`.
    pub fn from_parts(
        params: ModelParams,
        n: usize,
        m: usize,
        channel_col_major: Vec<f64>,
        x0: Vec<f64>,
        noise: Vec<f64>,
    ) -> Result<Self> {
        if n == 0 || m == 0 {
            return Err(Error::Parameter(format!("empty instance: n={n}, m={m}")));
        }
        if channel_col_major.len() != m * n || x0.len() != n || noise.len() != m {
            return Err(Error::Parameter("instance dimensions do not agree".into()));
        }
        if x0.iter().any(|&v| v != 1.0 && v != -1.0) {
            return Err(Error::Parameter("x0 entries must be +1 or -1".into()));
        }
        let mut inst = Self {
            params,
            n,
            m,
            channel: channel_col_major,
            x0,
            noise,
            y: Vec::new(),
        };
        inst.y = inst.assemble_y();
        Ok(inst)
    }

    fn assemble_y(&self) -> Vec<f64> {
        let sigma = self.params.sigma();
        let mut y: Vec<f64> = self.noise.iter().map(|z| sigma * z).collect();
        for (j, &xj) in self.x0.iter().enumerate() {
            for (yi, aij) in y.iter_mut().zip(self.column(j)) {
                *yi += aij * xj;
            }
        }
        y
    }

    /// The same channel and symbols with the noise vector set to zero.
    pub fn noiseless(&self) -> Self {
        let mut out = self.clone();
        out.noise.iter_mut().for_each(|z| *z = 0.0);
        out.y = out.assemble_y();
        out
    }

    pub fn params(&self) -> ModelParams {
        self.params
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn column(&self, j: usize) -> &[f64] {
        &self.channel[j * self.m..(j + 1) * self.m]
    }

    pub fn entry(&self, row: usize, col: usize) -> f64 {
        self.channel[col * self.m + row]
    }

    pub fn x0(&self) -> &[f64] {
        &self.x0
    }

    pub fn noise(&self) -> &[f64] {
        &self.noise
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    /// `y - A x`.
    pub fn residual(&self, x: &[f64]) -> Vec<f64> {
        let mut r = self.y.clone();
        for (j, &xj) in x.iter().enumerate() {
            for (ri, aij) in r.iter_mut().zip(self.column(j)) {
                *ri -= aij * xj;
            }
        }
        r
    }

    /// `||y - A x||_2`.
    pub fn residual_norm(&self, x: &[f64]) -> f64 {
        self.residual(x).iter().map(|r| r * r).sum::<f64>().sqrt()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&InstanceJson::from(self)).expect("instance serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let raw: InstanceJson = serde_json::from_str(text)
            .map_err(|e| Error::Parameter(format!("instance JSON: {e}")))?;
        if raw.schema != 1 {
            return Err(Error::Parameter(format!(
                "unsupported schema {}",
                raw.schema
            )));
        }
        let params = ModelParams::new(raw.delta, raw.sigma2)?;
        if raw.channel.len() != raw.m * raw.n {
            return Err(Error::Parameter("channel length is not m * n".into()));
        }
        let mut col_major = vec![0.0; raw.m * raw.n];
        for i in 0..raw.m {
            for j in 0..raw.n {
                col_major[j * raw.m + i] = raw.channel[i * raw.n + j];
            }
        }
        Self::from_parts(params, raw.n, raw.m, col_major, raw.x0, raw.noise)
    }
}

/// Replay layout: the channel is a flat row-major array of `m * n` reals.
#[derive(Serialize, Deserialize)]
struct InstanceJson {
    schema: u32,
    delta: f64,
    sigma2: f64,
    n: usize,
    m: usize,
    channel: Vec<f64>,
    x0: Vec<f64>,
    noise: Vec<f64>,
    y: Vec<f64>,
}

impl From<&Instance> for InstanceJson {
    fn from(inst: &Instance) -> Self {
        let mut row_major = Vec::with_capacity(inst.m * inst.n);
        for i in 0..inst.m {
            for j in 0..inst.n {
                row_major.push(inst.entry(i, j));
            }
        }
        Self {
            schema: 1,
            delta: inst.params.delta,
            sigma2: inst.params.sigma2,
            n: inst.n,
            m: inst.m,
            channel: row_major,
            x0: inst.x0.clone(),
            noise: inst.noise.clone(),
            y: inst.y.clone(),
        }
    }
}

/// Draws the instance for `(seed, trial_index)`. Each channel column, the
/// symbol vector and the noise come from separate keyed streams.
pub fn gen_instance(
    params: ModelParams,
    n: usize,
    seed: u64,
    trial_index: u64,
) -> Result<Instance> {
    let m = checked_receivers(params, n)?;
    let scale = 1.0 / (n as f64).sqrt();
    let mut channel = Vec::with_capacity(m * n);
    for j in 0..n {
        channel.extend(column_for(seed, trial_index, j, m, scale));
    }
    let x0 = symbols(&mut keyed_rng(seed, trial_index, stream::SYMBOLS), n);
    let noise = normals(&mut keyed_rng(seed, trial_index, stream::NOISE), m, 1.0);
    Instance::from_parts(params, n, m, channel, x0, noise)
}

fn checked_receivers(params: ModelParams, n: usize) -> Result<usize> {
    if n == 0 {
        return Err(Error::Parameter("n must be at least 1".into()));
    }
    let m = params.receivers(n);
    if m == 0 {
        return Err(Error::Parameter(format!(
            "round(delta * n) = 0 for delta={}, n={n}",
            params.delta()
        )));
    }
    Ok(m)
}

fn column_for(seed: u64, trial: u64, j: usize, m: usize, scale: f64) -> Vec<f64> {
    normals(
        &mut keyed_rng(seed, trial, stream::CHANNEL_BASE + j as u64),
        m,
        scale,
    )
}

/// The part of an instance that a genie-aided detector of bit `j` sees:
/// column `a_j`, the symbol `x0_j` and the noise. Identical to the
/// corresponding pieces of [`gen_instance`] for the same arguments, without
/// drawing the other `n - 1` columns.
#[derive(Debug, Clone, PartialEq)]
pub struct GenieSample {
    pub column: Vec<f64>,
    pub bit: f64,
    pub noise: Vec<f64>,
    pub sigma: f64,
}

pub fn genie_sample(
    params: ModelParams,
    n: usize,
    seed: u64,
    trial_index: u64,
    bit_index: usize,
) -> Result<GenieSample> {
    let m = checked_receivers(params, n)?;
    if bit_index >= n {
        return Err(Error::Parameter(format!(
            "bit index {bit_index} >= n = {n}"
        )));
    }
    let column = column_for(seed, trial_index, bit_index, m, 1.0 / (n as f64).sqrt());
    let x0 = symbols(&mut keyed_rng(seed, trial_index, stream::SYMBOLS), n);
    let noise = normals(&mut keyed_rng(seed, trial_index, stream::NOISE), m, 1.0);
    Ok(GenieSample {
        column,
        bit: x0[bit_index],
        noise,
        sigma: params.sigma(),
    })
}

/// Outcome of a hard-decision detector.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectionResult {
    pub x_hat: Vec<f64>,
    pub errors: usize,
    pub ber: f64,
}

/// Hamming distance between two `+-1` vectors, normalized by `n`.
pub fn ber_of(x_hat: &[f64], x0: &[f64]) -> Result<DetectionResult> {
    if x_hat.len() != x0.len() {
        return Err(Error::Parameter(format!(
            "length mismatch: {} vs {}",
            x_hat.len(),
            x0.len()
        )));
    }
    if x_hat.is_empty() {
        return Err(Error::Parameter("empty symbol vectors".into()));
    }
    if x_hat.iter().chain(x0).any(|&v| v != 1.0 && v != -1.0) {
        return Err(Error::Parameter("entries must be +1 or -1".into()));
    }
    let errors = x_hat.iter().zip(x0).filter(|(a, b)| a != b).count();
    Ok(DetectionResult {
        x_hat: x_hat.to_vec(),
        errors,
        ber: errors as f64 / x0.len() as f64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn params_validation_and_snr() {
        assert!(ModelParams::new(0.0, 1.0).is_err());
        assert!(ModelParams::new(1.0, -1.0).is_err());
        assert!(ModelParams::new(f64::NAN, 1.0).is_err());
        let p = ModelParams::from_snr_db(1.0, 10.0).unwrap();
        assert!((p.sigma2() - 0.1).abs() < 1e-15);
        assert!((p.snr() - 10.0).abs() < 1e-12);
        assert!((p.snr_db() - 10.0).abs() < 1e-12);
        for db in [-3.0, 0.0, 6.5, 17.0] {
            let q = ModelParams::from_snr_db(1.2, db).unwrap();
            assert!((q.snr_db() - db).abs() < 1e-12);
        }
    }

    #[test]
    fn receivers_round_ties_even() {
        assert_eq!(ModelParams::new(0.5, 1.0).unwrap().receivers(5), 2);
        assert_eq!(ModelParams::new(0.5, 1.0).unwrap().receivers(7), 4);
        assert_eq!(ModelParams::new(1.2, 1.0).unwrap().receivers(10), 12);
    }

    #[test]
    fn instance_is_deterministic() {
        let p = ModelParams::new(1.0, 0.1).unwrap();
        let a = gen_instance(p, 12, 99, 3).unwrap();
        let b = gen_instance(p, 12, 99, 3).unwrap();
        assert_eq!(a, b);
        let c = gen_instance(p, 12, 99, 4).unwrap();
        assert_ne!(a.y(), c.y());
        assert_ne!(a.column(0), c.column(0));
    }

    #[test]
    fn construction_identity() {
        let p = ModelParams::new(1.0, 0.1).unwrap();
        let inst = gen_instance(p, 8, 7, 0).unwrap();
        assert_eq!(inst.m(), 8);
        let sigma = p.sigma();
        for i in 0..inst.m() {
            let mut v = sigma * inst.noise()[i];
            for j in 0..inst.n() {
                v += inst.entry(i, j) * inst.x0()[j];
            }
            assert!((inst.y()[i] - v).abs() <= 1e-12);
        }
    }

    #[test]
    fn too_small_n_is_rejected() {
        let p = ModelParams::new(0.1, 0.1).unwrap();
        assert!(matches!(gen_instance(p, 4, 1, 0), Err(Error::Parameter(_))));
        assert!(gen_instance(p, 0, 1, 0).is_err());
    }

    #[test]
    fn channel_variance_is_one_over_n() {
        // Law of large numbers over 4000 columns of 20 rows each.
        let n = 4000;
        let p = ModelParams::new(0.005, 0.1).unwrap();
        let inst = gen_instance(p, n, 2024, 0).unwrap();
        let count = (inst.m() * n) as f64;
        let mean = inst.channel.iter().sum::<f64>() / count;
        let var = inst.channel.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / (count - 1.0);
        assert!(
            ((var * n as f64) - 1.0).abs() < 0.05,
            "n * var = {}",
            var * n as f64
        );
    }

    #[test]
    fn symbols_are_balanced() {
        let x = symbols(&mut keyed_rng(5, 0, stream::SYMBOLS), 20_000);
        let plus = x.iter().filter(|&&v| v == 1.0).count() as f64;
        assert!((plus / 20_000.0 - 0.5).abs() < 0.015);
    }

    #[test]
    fn genie_sample_matches_full_instance() {
        let p = ModelParams::new(1.5, 0.3).unwrap();
        let inst = gen_instance(p, 10, 11, 6).unwrap();
        for j in [0, 4, 9] {
            let g = genie_sample(p, 10, 11, 6, j).unwrap();
            assert_eq!(g.column, inst.column(j));
            assert_eq!(g.bit, inst.x0()[j]);
            assert_eq!(g.noise, inst.noise());
        }
        assert!(genie_sample(p, 10, 11, 6, 10).is_err());
    }

    #[test]
    fn json_round_trip() {
        let p = ModelParams::new(0.75, 0.2).unwrap();
        let inst = gen_instance(p, 4, 3, 1).unwrap();
        let text = inst.to_json();
        assert!(text.contains("\"schema\": 1"));
        let back = Instance::from_json(&text).unwrap();
        assert_eq!(back, inst);
    }

    #[test]
    fn ber_examples() {
        let x0 = [1.0, -1.0, 1.0, 1.0];
        assert_eq!(ber_of(&x0, &x0).unwrap().ber, 0.0);
        let neg: Vec<f64> = x0.iter().map(|v| -v).collect();
        assert_eq!(ber_of(&neg, &x0).unwrap().ber, 1.0);
        let one = [1.0, 1.0, 1.0, 1.0];
        let r = ber_of(&one, &x0).unwrap();
        assert_eq!((r.errors, r.ber), (1, 0.25));
        assert!(ber_of(&one[..3], &x0).is_err());
        assert!(ber_of(&[0.5, 1.0, 1.0, 1.0], &x0).is_err());
    }

    #[test]
    fn squared_distance_is_four_n_ber_exhaustively() {
        for n in 1..=10usize {
            let x0: Vec<f64> = (0..n)
                .map(|i| if i % 3 == 0 { -1.0 } else { 1.0 })
                .collect();
            for code in 0u32..(1 << n) {
                let x: Vec<f64> = (0..n)
                    .map(|i| if code >> i & 1 == 1 { -1.0 } else { 1.0 })
                    .collect();
                let r = ber_of(&x, &x0).unwrap();
                let d2: f64 = x.iter().zip(&x0).map(|(a, b)| (a - b).powi(2)).sum();
                assert!((d2 - 4.0 * n as f64 * r.ber).abs() < 1e-12);
            }
        }
    }
}
