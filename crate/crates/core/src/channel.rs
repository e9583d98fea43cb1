//! Simulated measurement data and the BI-AWGN reference channel.
//!
//! Alice's samples are standard normal and Bob sees them through additive
//! Gaussian noise of variance `1/snr`. Each heterodyne quadrature is one real
//! sample, so a coherent state contributes two entries.
//!
//! All randomness comes from ChaCha8 streams: a 64-bit seed fixes the key and
//! the frame index selects one of the 2^64 independent streams of that key,
//! so frames never share generator output and can be simulated in any order.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Deterministic generator used for every simulated random source.
pub type SeededRng = ChaCha8Rng;

/// Generator for frame `stream` of the experiment keyed by `seed`.
pub fn frame_rng(seed: u64, stream: u64) -> SeededRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelParams {
    pub snr: f64,
    pub n_samples: usize,
}

impl ChannelParams {
    pub fn new(snr: f64, n_samples: usize) -> Result<Self> {
        if !(snr.is_finite() && snr > 0.0) {
            return invalid(format!("SNR must be finite and positive, got {snr}"));
        }
        if n_samples == 0 {
            return invalid("need at least one sample");
        }
        Ok(Self { snr, n_samples })
    }

    pub fn from_snr_db(snr_db: f64, n_samples: usize) -> Result<Self> {
        Self::new(db_to_linear(snr_db), n_samples)
    }

    /// `1 / snr`.
    pub fn noise_variance(&self) -> f64 {
        1.0 / self.snr
    }
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

/// Alice's `x ~ N(0, 1)` and Bob's `y = x + n`, `n ~ N(0, 1/snr)`.
pub fn generate_gaussian_pair<R: Rng>(params: &ChannelParams, rng: &mut R) -> (Vec<f64>, Vec<f64>) {
    let sd = params.noise_variance().sqrt();
    let mut x = Vec::with_capacity(params.n_samples);
    let mut y = Vec::with_capacity(params.n_samples);
    for _ in 0..params.n_samples {
        let xi: f64 = rng.sample(StandardNormal);
        let ni: f64 = rng.sample(StandardNormal);
        x.push(xi);
        y.push(xi + sd * ni);
    }
    (x, y)
}

/// BPSK over AWGN with noise variance `1/snr`; returns the exact LLRs `2r/s2`.
pub fn generate_biawgn<R: Rng>(params: &ChannelParams, bits: &[u8], rng: &mut R) -> Vec<f64> {
    let s2 = params.noise_variance();
    let sd = s2.sqrt();
    bits.iter()
        .map(|&b| {
            let n: f64 = rng.sample(StandardNormal);
            let r = if b == 0 { 1.0 } else { -1.0 } + sd * n;
            2.0 * r / s2
        })
        .collect()
}

/// Uniform random bits, one per byte.
pub fn generate_raw_key<R: Rng>(n: usize, rng: &mut R) -> Vec<u8> {
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let word: u64 = rng.random();
        let take = (n - out.len()).min(64);
        out.extend((0..take).map(|k| ((word >> k) & 1) as u8));
    }
    out
}

/// Sidecar describing a pair of measurement files.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleDescriptor {
    pub n_samples: usize,
    pub noise_variance: f64,
}

/// Reads a file of little-endian f64 values.
pub fn read_samples(path: &Path) -> Result<Vec<f64>> {
    let bytes = std::fs::read(path)?;
    if bytes.len() % 8 != 0 {
        return invalid(format!(
            "{}: size {} is not a multiple of 8 bytes",
            path.display(),
            bytes.len()
        ));
    }
    let samples: Vec<f64> = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    if let Some(pos) = samples.iter().position(|v| !v.is_finite()) {
        return invalid(format!("{}: non-finite sample at index {pos}", path.display()));
    }
    Ok(samples)
}

pub fn write_samples(path: &Path, samples: &[f64]) -> Result<()> {
    let bytes: Vec<u8> = samples.iter().flat_map(|v| v.to_le_bytes()).collect();
    std::fs::write(path, bytes)?;
    Ok(())
}

pub fn read_descriptor(path: &Path) -> Result<SampleDescriptor> {
    let d: SampleDescriptor = serde_json::from_str(&std::fs::read_to_string(path)?)?;
    if !(d.noise_variance.is_finite() && d.noise_variance > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "descriptor noise variance must be positive, got {}",
            d.noise_variance
        )));
    }
    Ok(d)
}

/// Loads `x`, `y` and the descriptor, checking the lengths agree.
pub fn load_measurements(x: &Path, y: &Path, descriptor: &Path) -> Result<(Vec<f64>, Vec<f64>, SampleDescriptor)> {
    let d = read_descriptor(descriptor)?;
    let xs = read_samples(x)?;
    let ys = read_samples(y)?;
    if xs.len() != ys.len() || xs.len() != d.n_samples {
        return invalid(format!(
            "descriptor says {} samples, files hold {} and {}",
            d.n_samples,
            xs.len(),
            ys.len()
        ));
    }
    Ok((xs, ys, d))
}
