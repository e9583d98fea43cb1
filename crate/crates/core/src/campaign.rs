//! Monte-Carlo campaigns over SNR, MDR dimension and code rate.
//!
//! Every frame draws its data from `frame_rng(point_seed, frame_index)`. The
//! point seed depends on the campaign seed, the SNR and the code, not on the
//! dimension or channel, so curves for different dimensions see the same
//! measurements and raw keys. Frames are simulated in parallel and folded in
//! frame order, which makes the tables independent of the worker count.

use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{db_to_linear, frame_rng, generate_gaussian_pair, ChannelParams};
use crate::code::CodeSpec;
use crate::decoder::DecoderConfig;
use crate::error::{invalid, Error, Result};
use crate::mdr::MdrConfig;
use crate::protocol::{reconcile_biawgn_frame, reconcile_frame_with, Authenticated, ReconcileContext, ReconciliationReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ChannelKind {
    /// Gaussian measurements reconciled through MDR.
    Mdr,
    /// Reference binary-input AWGN channel with exact LLRs.
    Biawgn,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignConfig {
    pub k: usize,
    pub rate_indices: Vec<usize>,
    pub dims: Vec<usize>,
    pub snr_db: Vec<f64>,
    pub channel: ChannelKind,
    pub n_frames: usize,
    /// 0 means one worker per available core.
    pub workers: usize,
    pub seed: u64,
    pub code_seed: u64,
    pub decoder: DecoderConfig,
}

impl CampaignConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_frames == 0 {
            return invalid("n_frames must be at least 1");
        }
        if self.rate_indices.is_empty() || self.snr_db.is_empty() {
            return invalid("need at least one rate and one SNR");
        }
        if self.channel == ChannelKind::Mdr && self.dims.is_empty() {
            return invalid("need at least one MDR dimension");
        }
        for &i in &self.rate_indices {
            let spec = CodeSpec::new(self.k, i)?;
            for &d in &self.dims {
                crate::algebra::validate_dim(d)?;
                if self.channel == ChannelKind::Mdr && !spec.n().is_multiple_of(d) {
                    return invalid(format!("block length {} is not a multiple of dimension {d}", spec.n()));
                }
            }
        }
        if let Some(s) = self.snr_db.iter().find(|s| !s.is_finite()) {
            return invalid(format!("non-finite SNR {s}"));
        }
        self.decoder.validate()
    }
}

/// Aggregated metrics of one operating point. `dim` is 0 for the BI-AWGN
/// reference channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointResult {
    pub snr_db: f64,
    pub dim: usize,
    pub rate: f64,
    pub n_frames: usize,
    pub fer: f64,
    pub ber: f64,
    pub mean_iters: f64,
    pub mean_decode_s: f64,
    pub k: usize,
    pub rate_index: usize,
    pub frame_errors: usize,
    pub bit_errors: usize,
}

impl PointResult {
    /// The metrics that must not depend on timing or worker count.
    pub fn statistics(&self) -> (usize, usize, u64, u64) {
        (self.frame_errors, self.bit_errors, self.fer.to_bits(), self.mean_iters.to_bits())
    }
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed shared by all dimensions and channels at one SNR and code.
pub fn point_seed(seed: u64, snr_db: f64, spec: &CodeSpec) -> u64 {
    [snr_db.to_bits(), spec.k as u64, spec.rate_index as u64]
        .into_iter()
        .fold(splitmix(seed), |acc, v| splitmix(acc ^ v))
}

/// Which simulated channel a point uses.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PointChannel {
    Mdr { dim: usize },
    Biawgn,
}

fn simulate_frame(
    ctx: &ReconcileContext,
    decoder: &mut crate::decoder::Decoder<'_>,
    channel: PointChannel,
    snr: f64,
    seed: u64,
    frame: u64,
) -> Result<ReconciliationReport> {
    let mut rng = frame_rng(seed, frame);
    match channel {
        PointChannel::Mdr { dim } => {
            let params = ChannelParams::new(snr, ctx.spec.n())?;
            let (x, y) = generate_gaussian_pair(&params, &mut rng);
            let mdr = MdrConfig::new(dim, params.noise_variance())?;
            Ok(reconcile_frame_with(ctx, decoder, &x, &y, &mdr, &mut rng, &mut Authenticated)?.report)
        }
        PointChannel::Biawgn => Ok(reconcile_biawgn_frame(ctx, decoder, snr, &mut rng)?.report),
    }
}

/// Simulates `n_frames` frames at one operating point.
pub fn run_point(
    ctx: &ReconcileContext,
    channel: PointChannel,
    snr_db: f64,
    n_frames: usize,
    workers: usize,
    seed: u64,
) -> Result<PointResult> {
    if n_frames == 0 {
        return invalid("n_frames must be at least 1");
    }
    let snr = db_to_linear(snr_db);
    let pseed = point_seed(seed, snr_db, &ctx.spec);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::InvalidArgument(format!("cannot start worker pool: {e}")))?;
    let reports: Vec<Result<ReconciliationReport>> = pool.install(|| {
        (0..n_frames as u64)
            .into_par_iter()
            .map_init(
                || ctx.new_decoder(),
                |dec, f| match dec {
                    Ok(dec) => simulate_frame(ctx, dec, channel, snr, pseed, f),
                    Err(e) => Err(Error::InvalidArgument(e.to_string())),
                },
            )
            .collect()
    });
    let mut frame_errors = 0;
    let mut bit_errors = 0;
    let mut iterations = 0;
    let mut seconds = 0.0;
    for r in reports {
        let r = r?;
        frame_errors += usize::from(!r.frame_ok);
        bit_errors += r.bit_errors_vs_truth.unwrap_or(0);
        iterations += r.iterations_used;
        seconds += r.decode_seconds;
    }
    let nf = n_frames as f64;
    Ok(PointResult {
        snr_db,
        dim: match channel {
            PointChannel::Mdr { dim } => dim,
            PointChannel::Biawgn => 0,
        },
        rate: ctx.spec.rate(),
        n_frames,
        fer: frame_errors as f64 / nf,
        ber: bit_errors as f64 / (nf * ctx.spec.n() as f64),
        mean_iters: iterations as f64 / nf,
        mean_decode_s: seconds / nf,
        k: ctx.spec.k,
        rate_index: ctx.spec.rate_index,
        frame_errors,
        bit_errors,
    })
}

/// Runs every (rate, dimension, SNR) combination of the campaign.
pub fn run_campaign(cfg: &CampaignConfig) -> Result<Vec<PointResult>> {
    cfg.validate()?;
    let mut out = Vec::new();
    for &i in &cfg.rate_indices {
        let ctx = ReconcileContext::new(CodeSpec::new(cfg.k, i)?, cfg.code_seed, cfg.decoder)?;
        let channels: Vec<PointChannel> = match cfg.channel {
            ChannelKind::Mdr => cfg.dims.iter().map(|&dim| PointChannel::Mdr { dim }).collect(),
            ChannelKind::Biawgn => vec![PointChannel::Biawgn],
        };
        for ch in channels {
            for &snr_db in &cfg.snr_db {
                out.push(run_point(&ctx, ch, snr_db, cfg.n_frames, cfg.workers, cfg.seed)?);
            }
        }
    }
    Ok(out)
}

/// Column order of the results table.
pub const CSV_COLUMNS: [&str; 8] = ["snr_db", "dim", "rate", "n_frames", "fer", "ber", "mean_iters", "mean_decode_s"];

/// Writes the results as CSV, preceded by one `#` comment line holding the
/// configuration as JSON.
pub fn write_csv<W: Write>(mut out: W, results: &[PointResult], config: &serde_json::Value) -> Result<()> {
    writeln!(out, "# {}", serde_json::to_string(config)?)?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_COLUMNS)?;
    for r in results {
        w.write_record([
            r.snr_db.to_string(),
            r.dim.to_string(),
            r.rate.to_string(),
            r.n_frames.to_string(),
            r.fer.to_string(),
            r.ber.to_string(),
            r.mean_iters.to_string(),
            r.mean_decode_s.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv(path: &Path) -> Result<Vec<Vec<String>>> {
    let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_path(path)?;
    let header: Vec<String> = r.headers()?.iter().map(String::from).collect();
    if header != CSV_COLUMNS {
        return invalid(format!("unexpected CSV header {header:?}"));
    }
    r.records()
        .map(|rec| Ok(rec?.iter().map(String::from).collect()))
        .collect()
}
