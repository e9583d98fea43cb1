//! Command-line front end.
//!
//! Every subcommand takes the same option set. Options may also come from a
//! JSON file given with `--config` whose keys are the long flag names (dashes
//! or underscores); flags on the command line win. The fully resolved options
//! are echoed into every output so a run can be repeated from its artifacts:
//! the echoed object is itself a valid `--config` file.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::campaign::{run_campaign, run_point, write_csv, CampaignConfig, ChannelKind, PointChannel, PointResult};
use crate::channel::{frame_rng, load_measurements, read_samples};
use crate::code::{build_rate_adaptive, save_alist, CodeSpec};
use crate::decoder::{DecoderConfig, Evaluation, Schedule};
use crate::integrity::pack_bits_msb;
use crate::mdr::MdrConfig;
use crate::protocol::{reconcile_frame_with, Authenticated, ReconcileContext};
use crate::Error;

/// `k` at and above which the default iteration cap is the full-scale one.
pub const FULL_SCALE_K: usize = 20_000;
pub const DESK_MAX_ITERS: usize = 200;
pub const FULL_MAX_ITERS: usize = 500;

#[derive(Debug, Parser)]
#[command(name = "cvrecon", version, about = "CV-QKD information reconciliation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build a rate-adaptive code and write it as alist plus a JSON sidecar.
    GenCode(Options),
    /// Monte-Carlo FER/BER/iteration campaign over an SNR grid.
    Simulate(Options),
    /// Paired direct vs lookup-table decoding runs.
    BenchLookup(Options),
    /// Reconcile measurement files and write the accepted key bits.
    Reconcile(Options),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CommandName {
    GenCode,
    Simulate,
    BenchLookup,
    Reconcile,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum OneOrMany<T> {
    One(T),
    Many(Vec<T>),
}

fn one_or_many<'de, D, T>(d: D) -> Result<Option<Vec<T>>, D::Error>
where
    D: serde::Deserializer<'de>,
    T: Deserialize<'de>,
{
    Ok(Option::<OneOrMany<T>>::deserialize(d)?.map(|v| match v {
        OneOrMany::One(x) => vec![x],
        OneOrMany::Many(xs) => xs,
    }))
}

/// Options shared by all subcommands. Lists take comma-separated values.
#[derive(Debug, Clone, Default, PartialEq, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Options {
    /// JSON file with default values for any of these options.
    #[arg(long, value_name = "FILE")]
    #[serde(skip)]
    pub config: Option<PathBuf>,

    /// Information bits per frame.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,

    /// Target code rate(s); the rate index is round(k/R) - 5k.
    #[arg(long, value_delimiter = ',', conflicts_with = "rate_index")]
    #[serde(alias = "target_rate", deserialize_with = "one_or_many")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rate: Option<Vec<f64>>,

    /// Rate index(es) i, giving N = 5k + i.
    #[arg(long, value_delimiter = ',')]
    #[serde(deserialize_with = "one_or_many")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rate_index: Option<Vec<usize>>,

    /// MDR dimension(s): 1, 2, 4 or 8.
    #[arg(long, value_delimiter = ',')]
    #[serde(deserialize_with = "one_or_many")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dim: Option<Vec<usize>>,

    /// SNR grid in dB.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    #[serde(deserialize_with = "one_or_many")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub snr_db: Option<Vec<f64>>,

    /// Simulated channel.
    #[arg(long, value_enum)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub channel: Option<ChannelKind>,

    /// Frames per operating point.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub frames: Option<usize>,

    /// Worker threads; 0 uses every core.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,

    /// Seed of the simulated data and raw keys.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,

    /// Seed of the extension checks of the code.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub code_seed: Option<u64>,

    #[arg(long, value_enum)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub schedule: Option<Schedule>,

    #[arg(long = "eval", value_enum)]
    #[serde(alias = "evaluation")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eval: Option<Evaluation>,

    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_iters: Option<usize>,

    /// Saturation bound of decoder messages.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub llr_clamp: Option<f64>,

    /// Entries per lookup table.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lookup_resolution: Option<usize>,

    /// Alice's samples (little-endian f64).
    #[arg(long, value_name = "FILE")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub x: Option<PathBuf>,

    /// Bob's samples (little-endian f64).
    #[arg(long, value_name = "FILE")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub y: Option<PathBuf>,

    /// JSON descriptor {n_samples, noise_variance} of the sample files.
    #[arg(long, value_name = "FILE")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub descriptor: Option<PathBuf>,

    /// Noise variance of the sample files, if no descriptor is given.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub noise_variance: Option<f64>,

    /// Main output file. A JSON companion is written next to it.
    #[arg(long, value_name = "FILE")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

macro_rules! fill {
    ($dst:ident, $src:ident; $($f:ident),*) => {
        $( if $dst.$f.is_none() { $dst.$f = $src.$f; } )*
    };
}

impl Options {
    /// Fills every unset option from `other`.
    pub fn or(mut self, other: Options) -> Options {
        fill!(self, other; k, rate, rate_index, dim, snr_db, channel, frames, workers, seed, code_seed,
              schedule, eval, max_iters, llr_clamp, lookup_resolution, x, y, descriptor, noise_variance, out);
        self
    }

    /// Reads a config file: either an options object or an artifact holding
    /// one under `"config"`.
    pub fn from_file(path: &Path) -> Result<Options, CliError> {
        let text = fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let mut value: serde_json::Value =
            serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        if let Some(inner) = value.get_mut("config") {
            value = inner.take();
        }
        if let Some(obj) = value.as_object_mut() {
            // flag spellings are accepted as keys
            let keys: Vec<String> = obj.keys().filter(|k| k.contains('-')).cloned().collect();
            for key in keys {
                let v = obj.remove(&key).unwrap();
                obj.insert(key.replace('-', "_"), v);
            }
        }
        serde_json::from_value(value).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }
}

/// Failure classes with distinct exit codes.
#[derive(Debug)]
pub enum CliError {
    /// Bad or inconsistent options (exit code 2).
    Config(String),
    /// Failure while doing the work (exit code 1).
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Runtime(m) => write!(f, "error: {m}"),
        }
    }
}

fn config_err(e: Error) -> CliError {
    CliError::Config(e.to_string())
}

fn runtime_err(e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(e.to_string())
}

/// Options after defaults, with every field needed by the command filled.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Resolved {
    pub command: CommandName,
    pub options: Options,
    pub specs: Vec<CodeSpec>,
    pub decoder: DecoderConfig,
}

fn require<T: Clone>(v: &Option<T>, name: &str) -> Result<T, CliError> {
    v.clone().ok_or_else(|| CliError::Config(format!("--{name} is required")))
}

fn single<T: Copy>(v: &[T], name: &str) -> Result<T, CliError> {
    match v {
        [x] => Ok(*x),
        _ => Err(CliError::Config(format!("--{name} takes exactly one value here"))),
    }
}

/// Merges the config file, applies defaults and validates.
pub fn resolve(command: CommandName, cli: Options) -> Result<Resolved, CliError> {
    let mut o = match &cli.config {
        Some(path) => cli.clone().or(Options::from_file(path)?),
        None => cli,
    };
    o.config = None;

    let k = *o.k.get_or_insert(200);
    if o.rate.is_none() && o.rate_index.is_none() {
        o.rate_index = Some(vec![0]);
    }
    let specs: Vec<CodeSpec> = match (&o.rate, &o.rate_index) {
        (Some(_), Some(_)) => return Err(CliError::Config("give either --rate or --rate-index".into())),
        (Some(rates), None) => rates
            .iter()
            .map(|&r| CodeSpec::from_target_rate(k, r))
            .collect::<crate::Result<_>>()
            .map_err(config_err)?,
        (None, Some(idx)) => idx
            .iter()
            .map(|&i| CodeSpec::new(k, i))
            .collect::<crate::Result<_>>()
            .map_err(config_err)?,
        (None, None) => unreachable!(),
    };
    if specs.is_empty() {
        return Err(CliError::Config("no code rate given".into()));
    }
    // echo the resolved indices so the echo does not depend on rounding again
    o.rate = None;
    o.rate_index = Some(specs.iter().map(|s| s.rate_index).collect());

    let defaults = DecoderConfig::default();
    let decoder = DecoderConfig {
        max_iterations: *o.max_iters.get_or_insert(if k >= FULL_SCALE_K {
            FULL_MAX_ITERS
        } else {
            DESK_MAX_ITERS
        }),
        schedule: *o.schedule.get_or_insert(defaults.schedule),
        evaluation: *o.eval.get_or_insert(defaults.evaluation),
        llr_clamp: *o.llr_clamp.get_or_insert(defaults.llr_clamp),
        lookup_resolution: *o.lookup_resolution.get_or_insert(defaults.lookup_resolution),
    };
    decoder.validate().map_err(config_err)?;

    o.dim.get_or_insert_with(|| vec![8]);
    o.channel.get_or_insert(ChannelKind::Mdr);
    o.frames.get_or_insert(100);
    o.workers.get_or_insert(0);
    o.seed.get_or_insert(0);
    o.code_seed.get_or_insert(0);
    for &d in o.dim.as_deref().unwrap() {
        crate::algebra::validate_dim(d).map_err(config_err)?;
    }

    match command {
        CommandName::GenCode => {
            single(&specs, "rate")?;
            require(&o.out, "out")?;
        }
        CommandName::Simulate => {
            require(&o.snr_db, "snr-db")?;
        }
        CommandName::BenchLookup => {
            single(&specs, "rate")?;
            single(o.snr_db.as_deref().unwrap_or(&[]), "snr-db")?;
            if o.channel == Some(ChannelKind::Mdr) {
                single(o.dim.as_deref().unwrap(), "dim")?;
            }
        }
        CommandName::Reconcile => {
            single(&specs, "rate")?;
            single(o.dim.as_deref().unwrap(), "dim")?;
            require(&o.x, "x")?;
            require(&o.y, "y")?;
            require(&o.out, "out")?;
            match (&o.descriptor, o.noise_variance) {
                (None, None) => return Err(CliError::Config("give --descriptor or --noise-variance".into())),
                (Some(_), Some(_)) => {
                    return Err(CliError::Config("give only one of --descriptor and --noise-variance".into()))
                }
                (None, Some(v)) if !(v.is_finite() && v > 0.0) => {
                    return Err(CliError::Config(format!("noise variance must be positive, got {v}")))
                }
                _ => {}
            }
        }
    }
    if let Some(out) = &o.out {
        if out.extension().is_some_and(|e| e == "json") {
            return Err(CliError::Config(
                "--out must not end in .json; the JSON companion takes that name".into(),
            ));
        }
    }
    Ok(Resolved {
        command,
        options: o,
        specs,
        decoder,
    })
}

/// Path of the JSON written next to `out`.
pub fn companion_path(out: &Path) -> PathBuf {
    out.with_extension("json")
}

fn write_json(path: &Path, value: &serde_json::Value) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).map_err(runtime_err)?;
    fs::write(path, text + "\n").map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))
}

fn echo(r: &Resolved) -> serde_json::Value {
    serde_json::to_value(&r.options).expect("options serialize")
}

/// Parses `args` (including the program name) and runs the command.
pub fn run_from<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let (name, opts) = match cli.command {
        Command::GenCode(o) => (CommandName::GenCode, o),
        Command::Simulate(o) => (CommandName::Simulate, o),
        Command::BenchLookup(o) => (CommandName::BenchLookup, o),
        Command::Reconcile(o) => (CommandName::Reconcile, o),
    };
    match resolve(name, opts).and_then(|r| execute(&r)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code())
        }
    }
}

pub fn execute(r: &Resolved) -> Result<(), CliError> {
    match r.command {
        CommandName::GenCode => cmd_gen_code(r),
        CommandName::Simulate => cmd_simulate(r),
        CommandName::BenchLookup => cmd_bench_lookup(r),
        CommandName::Reconcile => cmd_reconcile(r),
    }
}

pub fn cmd_gen_code(r: &Resolved) -> Result<(), CliError> {
    let spec = r.specs[0];
    let seed = r.options.code_seed.unwrap();
    let out = r.options.out.as_ref().unwrap();
    let h = build_rate_adaptive(&spec, seed).map_err(runtime_err)?;
    fs::write(out, save_alist(&h)).map_err(|e| CliError::Runtime(format!("{}: {e}", out.display())))?;
    let sidecar = serde_json::json!({
        "k": spec.k,
        "i": spec.rate_index,
        "R": spec.rate(),
        "N": spec.n(),
        "M": spec.m(),
        "seed": seed,
        "config": echo(r),
    });
    write_json(&companion_path(out), &sidecar)
}

fn campaign_config(r: &Resolved) -> CampaignConfig {
    let o = &r.options;
    CampaignConfig {
        k: o.k.unwrap(),
        rate_indices: r.specs.iter().map(|s| s.rate_index).collect(),
        dims: o.dim.clone().unwrap(),
        snr_db: o.snr_db.clone().unwrap_or_default(),
        channel: o.channel.unwrap(),
        n_frames: o.frames.unwrap(),
        workers: o.workers.unwrap(),
        seed: o.seed.unwrap(),
        code_seed: o.code_seed.unwrap(),
        decoder: r.decoder,
    }
}

pub fn cmd_simulate(r: &Resolved) -> Result<(), CliError> {
    let cfg = campaign_config(r);
    cfg.validate().map_err(config_err)?;
    let results = run_campaign(&cfg).map_err(runtime_err)?;
    let config = echo(r);
    match &r.options.out {
        Some(out) => {
            let f = fs::File::create(out).map_err(|e| CliError::Runtime(format!("{}: {e}", out.display())))?;
            write_csv(std::io::BufWriter::new(f), &results, &config).map_err(runtime_err)?;
            let doc = serde_json::json!({
                "config": config,
                "seed": cfg.seed,
                "columns": crate::campaign::CSV_COLUMNS,
                "results": results,
            });
            write_json(&companion_path(out), &doc)
        }
        None => write_csv(std::io::stdout().lock(), &results, &config).map_err(runtime_err),
    }
}

/// Outcome of a paired direct/lookup run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BenchReport {
    pub direct: PointResult,
    pub lookup: PointResult,
    pub workers: usize,
    /// Wall-clock seconds per frame times the worker count.
    pub direct_s_per_frame_per_worker: f64,
    pub lookup_s_per_frame_per_worker: f64,
    /// Ratio of summed decoder time, direct over lookup.
    pub decode_speedup: f64,
    /// Ratio of wall time, direct over lookup.
    pub wall_speedup: f64,
    pub fer_delta: f64,
    /// Half-width of the 95% confidence interval of the FER difference.
    pub fer_delta_ci95: f64,
    pub fer_within_ci: bool,
    /// (lookup - direct) / direct mean iterations.
    pub noi_delta_rel: f64,
}

/// Runs the same frames with direct and with lookup evaluation.
#[allow(clippy::too_many_arguments)]
pub fn bench_lookup(
    spec: CodeSpec,
    code_seed: u64,
    decoder: DecoderConfig,
    channel: PointChannel,
    snr_db: f64,
    n_frames: usize,
    workers: usize,
    seed: u64,
) -> crate::Result<BenchReport> {
    let ctx_for = |evaluation| ReconcileContext::new(spec, code_seed, DecoderConfig { evaluation, ..decoder });
    let direct_ctx = ctx_for(Evaluation::Direct)?;
    let lookup_ctx = ReconcileContext::with_code(
        spec,
        direct_ctx.code.clone(),
        DecoderConfig {
            evaluation: Evaluation::Lookup,
            ..decoder
        },
    )?;
    let threads = if workers == 0 {
        std::thread::available_parallelism().map_or(1, |n| n.get())
    } else {
        workers
    };
    let t0 = Instant::now();
    let direct = run_point(&direct_ctx, channel, snr_db, n_frames, workers, seed)?;
    let direct_wall = t0.elapsed().as_secs_f64();
    let t0 = Instant::now();
    let lookup = run_point(&lookup_ctx, channel, snr_db, n_frames, workers, seed)?;
    let lookup_wall = t0.elapsed().as_secs_f64();

    let nf = n_frames as f64;
    let fer_delta = lookup.fer - direct.fer;
    let var = (direct.fer * (1.0 - direct.fer) + lookup.fer * (1.0 - lookup.fer)) / nf;
    // a zero-variance pair only agrees if the FERs are equal
    let ci = 1.96 * var.sqrt();
    Ok(BenchReport {
        workers: threads,
        direct_s_per_frame_per_worker: direct_wall * threads as f64 / nf,
        lookup_s_per_frame_per_worker: lookup_wall * threads as f64 / nf,
        decode_speedup: direct.mean_decode_s / lookup.mean_decode_s,
        wall_speedup: direct_wall / lookup_wall,
        fer_delta,
        fer_delta_ci95: ci,
        fer_within_ci: fer_delta.abs() <= ci,
        noi_delta_rel: if direct.mean_iters > 0.0 {
            (lookup.mean_iters - direct.mean_iters) / direct.mean_iters
        } else {
            0.0
        },
        direct,
        lookup,
    })
}

pub fn cmd_bench_lookup(r: &Resolved) -> Result<(), CliError> {
    let o = &r.options;
    let channel = match o.channel.unwrap() {
        ChannelKind::Mdr => {
            let dim = o.dim.as_ref().unwrap()[0];
            if !r.specs[0].n().is_multiple_of(dim) {
                return Err(CliError::Config(format!(
                    "block length {} is not a multiple of dimension {dim}",
                    r.specs[0].n()
                )));
            }
            PointChannel::Mdr { dim }
        }
        ChannelKind::Biawgn => PointChannel::Biawgn,
    };
    let report = bench_lookup(
        r.specs[0],
        o.code_seed.unwrap(),
        r.decoder,
        channel,
        o.snr_db.as_ref().unwrap()[0],
        o.frames.unwrap(),
        o.workers.unwrap(),
        o.seed.unwrap(),
    )
    .map_err(runtime_err)?;
    let doc = serde_json::json!({ "config": echo(r), "seed": o.seed.unwrap(), "report": report });
    match &o.out {
        Some(out) => write_json(out, &doc),
        None => {
            let text = serde_json::to_string_pretty(&doc).map_err(runtime_err)?;
            writeln!(std::io::stdout().lock(), "{text}").map_err(runtime_err)
        }
    }
}

/// Per-frame line of the reconcile report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameSummary {
    pub frame: usize,
    pub accepted: bool,
    pub converged: bool,
    pub iterations: usize,
    pub leaked_bits: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReconcileSummary {
    pub k: usize,
    pub rate_index: usize,
    pub rate: f64,
    pub n: usize,
    pub dim: usize,
    pub noise_variance: f64,
    pub frames_attempted: usize,
    pub frames_accepted: usize,
    pub key_bits: usize,
    pub unused_samples: usize,
    pub leaked_bits: usize,
    pub frames: Vec<FrameSummary>,
}

/// Reconciles consecutive blocks of `N` samples. Returns the key bits (the
/// first `k` bits of each accepted frame, one bit per byte) and the summary.
#[allow(clippy::too_many_arguments)]
pub fn reconcile_samples(
    x: &[f64],
    y: &[f64],
    noise_variance: f64,
    spec: CodeSpec,
    dim: usize,
    decoder: DecoderConfig,
    code_seed: u64,
    seed: u64,
) -> crate::Result<(Vec<u8>, ReconcileSummary)> {
    if x.len() != y.len() {
        return Err(Error::InvalidArgument(format!(
            "x holds {} samples but y holds {}",
            x.len(),
            y.len()
        )));
    }
    let mdr = MdrConfig::new(dim, noise_variance)?;
    let n = spec.n();
    if !n.is_multiple_of(dim) {
        return Err(Error::InvalidArgument(format!("block length {n} is not a multiple of dimension {dim}")));
    }
    let ctx = ReconcileContext::new(spec, code_seed, decoder)?;
    let mut dec = ctx.new_decoder()?;
    let mut key = Vec::new();
    let mut frames = Vec::new();
    for (f, (xb, yb)) in x.chunks_exact(n).zip(y.chunks_exact(n)).enumerate() {
        let mut rng = frame_rng(seed, f as u64);
        let out = reconcile_frame_with(&ctx, &mut dec, xb, yb, &mdr, &mut rng, &mut Authenticated)?;
        if let Some(bits) = &out.key {
            key.extend_from_slice(&bits[..spec.k]);
        }
        frames.push(FrameSummary {
            frame: f,
            accepted: out.report.frame_ok,
            converged: out.report.converged,
            iterations: out.report.iterations_used,
            leaked_bits: out.report.leakage.total_binary_leakage(),
        });
    }
    let summary = ReconcileSummary {
        k: spec.k,
        rate_index: spec.rate_index,
        rate: spec.rate(),
        n,
        dim,
        noise_variance,
        frames_attempted: frames.len(),
        frames_accepted: frames.iter().filter(|f| f.accepted).count(),
        key_bits: key.len(),
        unused_samples: x.len() % n,
        leaked_bits: frames.iter().map(|f| f.leaked_bits).sum(),
        frames,
    };
    Ok((key, summary))
}

pub fn cmd_reconcile(r: &Resolved) -> Result<(), CliError> {
    let o = &r.options;
    let (xp, yp) = (o.x.as_ref().unwrap(), o.y.as_ref().unwrap());
    let (x, y, noise_variance) = match &o.descriptor {
        Some(d) => {
            let (x, y, desc) = load_measurements(xp, yp, d).map_err(runtime_err)?;
            (x, y, desc.noise_variance)
        }
        None => (
            read_samples(xp).map_err(runtime_err)?,
            read_samples(yp).map_err(runtime_err)?,
            o.noise_variance.unwrap(),
        ),
    };
    let (key, summary) = reconcile_samples(
        &x,
        &y,
        noise_variance,
        r.specs[0],
        o.dim.as_ref().unwrap()[0],
        r.decoder,
        o.code_seed.unwrap(),
        o.seed.unwrap(),
    )
    .map_err(runtime_err)?;
    if summary.unused_samples > 0 {
        eprintln!(
            "{} trailing samples do not fill a frame of {} and were not used",
            summary.unused_samples, summary.n
        );
    }
    let out = o.out.as_ref().unwrap();
    fs::write(out, pack_bits_msb(&key)).map_err(|e| CliError::Runtime(format!("{}: {e}", out.display())))?;
    let doc = serde_json::json!({ "config": echo(r), "seed": o.seed.unwrap(), "report": summary });
    write_json(&companion_path(out), &doc)
}
