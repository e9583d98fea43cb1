//! Syndrome-based sum-product decoding with LLR messages.
//!
//! The check-node rule carries the syndrome as a sign:
//!
//! ```text
//! L_c(i <- j) = (-1)^{s_j} * 2 atanh( prod_{l in M(j) \ i} tanh(L_v(l -> j) / 2) )
//! ```
//!
//! so a zero syndrome gives ordinary codeword decoding. Two schedules are
//! available: flooding (all checks, then all variables) and layered (checks in
//! row order, each one updating the posteriors it touches before the next
//! check runs). Either `tanh`/`atanh` are evaluated directly or read from
//! precomputed nearest-entry tables.
//!
//! The arithmetic order is fixed: the product for each outgoing edge multiplies
//! the other factors left to right in row order, and an extrinsic variable
//! message is the posterior minus the incoming message. Results therefore do not
//! depend on threads or call order.

use serde::{Deserialize, Serialize};

use crate::code::{satisfies, ParityCheckMatrix, Syndrome};
use crate::error::{invalid, Result};
use crate::mdr::LlrFrame;

/// Largest `|tanh|` product fed to `atanh`, keeping its output finite.
pub const MAX_TANH_PRODUCT: f64 = 1.0 - f64::EPSILON;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Schedule {
    Flooding,
    Layered,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Evaluation {
    Direct,
    Lookup,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecoderConfig {
    pub max_iterations: usize,
    pub schedule: Schedule,
    pub evaluation: Evaluation,
    /// Saturation magnitude of every stored message.
    pub llr_clamp: f64,
    /// Entries per lookup table.
    pub lookup_resolution: usize,
}

impl Default for DecoderConfig {
    fn default() -> Self {
        Self {
            max_iterations: 200,
            schedule: Schedule::Flooding,
            evaluation: Evaluation::Lookup,
            llr_clamp: 38.0,
            lookup_resolution: 1 << 16,
        }
    }
}

impl DecoderConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iterations == 0 {
            return invalid("max_iterations must be at least 1");
        }
        if !(self.llr_clamp.is_finite() && self.llr_clamp > 0.0) {
            return invalid(format!("llr_clamp must be finite and positive, got {}", self.llr_clamp));
        }
        if self.evaluation == Evaluation::Lookup && self.lookup_resolution < 2 {
            return invalid("lookup_resolution must be at least 2");
        }
        Ok(())
    }
}

/// Precomputed `tanh(x/2)` on `[0, clamp]` and `2 atanh(p)` on `[0, tanh(clamp/2)]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LookupTables {
    clamp: f64,
    tanh: Vec<f64>,
    tanh_scale: f64,
    atanh: Vec<f64>,
    atanh_scale: f64,
}

impl LookupTables {
    pub fn new(llr_clamp: f64, resolution: usize) -> Result<Self> {
        if !(llr_clamp.is_finite() && llr_clamp > 0.0) || resolution < 2 {
            return invalid("lookup tables need a positive clamp and at least 2 entries");
        }
        let last = (resolution - 1) as f64;
        let x_step = llr_clamp / last;
        let tanh: Vec<f64> = (0..resolution).map(|k| (k as f64 * x_step / 2.0).tanh()).collect();
        let p_top = (llr_clamp / 2.0).tanh();
        let p_step = p_top / last;
        let atanh = (0..resolution)
            .map(|k| (2.0 * (k as f64 * p_step).min(MAX_TANH_PRODUCT).atanh()).min(llr_clamp))
            .collect();
        Ok(Self {
            clamp: llr_clamp,
            tanh,
            tanh_scale: 1.0 / x_step,
            atanh,
            atanh_scale: 1.0 / p_step,
        })
    }

    pub fn for_config(cfg: &DecoderConfig) -> Result<Self> {
        Self::new(cfg.llr_clamp, cfg.lookup_resolution)
    }

    pub fn resolution(&self) -> usize {
        self.tanh.len()
    }

    pub fn clamp(&self) -> f64 {
        self.clamp
    }

    /// `tanh(x/2)` from the nearest table entry.
    #[inline]
    pub fn tanh_half(&self, x: f64) -> f64 {
        let idx = ((x.abs() * self.tanh_scale + 0.5) as usize).min(self.tanh.len() - 1);
        self.tanh[idx].copysign(x)
    }

    /// `2 atanh(p)` from the nearest table entry.
    #[inline]
    pub fn atanh_twice(&self, p: f64) -> f64 {
        let idx = ((p.abs() * self.atanh_scale + 0.5) as usize).min(self.atanh.len() - 1);
        self.atanh[idx].copysign(p)
    }
}

/// Outcome of one decoding attempt.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DecodeResult {
    pub bits: Vec<u8>,
    pub converged: bool,
    pub iterations_used: usize,
    pub syndrome_matched: bool,
}

trait Kernel {
    fn tanh_half(&self, x: f64) -> f64;
    fn atanh_twice(&self, p: f64) -> f64;
}

struct Direct;

impl Kernel for Direct {
    #[inline]
    fn tanh_half(&self, x: f64) -> f64 {
        (x / 2.0).tanh()
    }
    #[inline]
    fn atanh_twice(&self, p: f64) -> f64 {
        2.0 * p.atanh()
    }
}

impl Kernel for LookupTables {
    #[inline]
    fn tanh_half(&self, x: f64) -> f64 {
        LookupTables::tanh_half(self, x)
    }
    #[inline]
    fn atanh_twice(&self, p: f64) -> f64 {
        LookupTables::atanh_twice(self, p)
    }
}

#[inline]
fn clamp(x: f64, c: f64) -> f64 {
    x.clamp(-c, c)
}

/// Check-node update for one check. `input` holds the variable-to-check
/// messages, `tanhs` is scratch of the same length.
#[inline]
fn check_update<K: Kernel>(k: &K, input: &[f64], negate: bool, c: f64, tanhs: &mut [f64], out: &mut [f64]) {
    for (t, &x) in tanhs.iter_mut().zip(input) {
        *t = k.tanh_half(x);
    }
    for i in 0..input.len() {
        let mut p = 1.0;
        for (l, &t) in tanhs.iter().enumerate() {
            if l != i {
                p *= t;
            }
        }
        let p = p.clamp(-MAX_TANH_PRODUCT, MAX_TANH_PRODUCT);
        let m = clamp(k.atanh_twice(p), c);
        out[i] = if negate { -m } else { m };
    }
}

/// Hard decision with ties going to bit 0.
#[inline]
pub fn hard_bit(l: f64) -> u8 {
    u8::from(l < 0.0)
}

/// Reusable decoder state for one parity-check matrix.
///
/// Messages are stored per edge in row-major order.
pub struct Decoder<'a> {
    h: &'a ParityCheckMatrix,
    cfg: DecoderConfig,
    tables: Option<&'a LookupTables>,
    channel: Vec<f64>,
    negate: Vec<bool>,
    syndrome: Syndrome,
    v2c: Vec<f64>,
    c2v: Vec<f64>,
    posterior: Vec<f64>,
    bits: Vec<u8>,
    scratch_t: Vec<f64>,
    scratch_out: Vec<f64>,
    iterations: usize,
}

impl<'a> Decoder<'a> {
    /// `tables` is required for lookup evaluation and ignored otherwise.
    pub fn new(h: &'a ParityCheckMatrix, cfg: DecoderConfig, tables: Option<&'a LookupTables>) -> Result<Self> {
        cfg.validate()?;
        let tables = match cfg.evaluation {
            Evaluation::Direct => None,
            Evaluation::Lookup => match tables {
                Some(t) if t.clamp() == cfg.llr_clamp && t.resolution() == cfg.lookup_resolution => Some(t),
                Some(_) => return invalid("lookup tables do not match the decoder configuration"),
                None => return invalid("lookup evaluation needs lookup tables"),
            },
        };
        let e = h.edge_count();
        let d = h.max_row_degree();
        Ok(Self {
            h,
            cfg,
            tables,
            channel: vec![0.0; h.n_vars()],
            negate: vec![false; h.n_checks()],
            syndrome: Syndrome::zeros(h.n_checks()),
            v2c: vec![0.0; e],
            c2v: vec![0.0; e],
            posterior: vec![0.0; h.n_vars()],
            bits: vec![0; h.n_vars()],
            scratch_t: vec![0.0; d],
            scratch_out: vec![0.0; d],
            iterations: 0,
        })
    }

    pub fn config(&self) -> &DecoderConfig {
        &self.cfg
    }

    /// Loads channel LLRs and the target syndrome and resets all messages.
    pub fn start(&mut self, channel_llrs: &[f64], s: &Syndrome) -> Result<()> {
        if channel_llrs.len() != self.h.n_vars() {
            return invalid(format!(
                "{} LLRs for a code of length {}",
                channel_llrs.len(),
                self.h.n_vars()
            ));
        }
        if s.len() != self.h.n_checks() {
            return invalid(format!("syndrome of length {} for {} checks", s.len(), self.h.n_checks()));
        }
        if let Some(l) = channel_llrs.iter().find(|l| !l.is_finite()) {
            return invalid(format!("non-finite channel LLR {l}"));
        }
        let c = self.cfg.llr_clamp;
        for (dst, &l) in self.channel.iter_mut().zip(channel_llrs) {
            *dst = clamp(l, c);
        }
        for (n, &b) in self.negate.iter_mut().zip(&s.bits) {
            *n = b & 1 == 1;
        }
        self.syndrome.bits.clone_from(&s.bits);
        self.posterior.copy_from_slice(&self.channel);
        for i in 0..self.h.n_vars() {
            for &e in self.h.col_edges(i) {
                self.v2c[e as usize] = self.channel[i];
            }
        }
        self.c2v.fill(0.0);
        self.iterations = 0;
        self.refresh_bits();
        Ok(())
    }

    fn refresh_bits(&mut self) {
        for (b, &l) in self.bits.iter_mut().zip(&self.posterior) {
            *b = hard_bit(l);
        }
    }

    /// Whether the current hard decisions satisfy the syndrome.
    pub fn syndrome_matched(&self) -> bool {
        satisfies(self.h, &self.bits, &self.syndrome)
    }

    /// Runs one full iteration of the configured schedule.
    pub fn iterate(&mut self) {
        match (self.cfg.schedule, self.tables) {
            (Schedule::Flooding, None) => self.flooding(&Direct),
            (Schedule::Flooding, Some(t)) => self.flooding(t),
            (Schedule::Layered, None) => self.layered(&Direct),
            (Schedule::Layered, Some(t)) => self.layered(t),
        }
        self.iterations += 1;
        self.refresh_bits();
    }

    fn flooding<K: Kernel>(&mut self, k: &K) {
        let c = self.cfg.llr_clamp;
        let h = self.h;
        for j in 0..h.n_checks() {
            let r = h.row_edges(j);
            let d = r.len();
            check_update(
                k,
                &self.v2c[r.clone()],
                self.negate[j],
                c,
                &mut self.scratch_t[..d],
                &mut self.c2v[r],
            );
        }
        for i in 0..h.n_vars() {
            let edges = h.col_edges(i);
            let mut total = self.channel[i];
            for &e in edges {
                total += self.c2v[e as usize];
            }
            self.posterior[i] = total;
            for &e in edges {
                self.v2c[e as usize] = clamp(total - self.c2v[e as usize], c);
            }
        }
    }

    fn layered<K: Kernel>(&mut self, k: &K) {
        let c = self.cfg.llr_clamp;
        let h = self.h;
        for j in 0..h.n_checks() {
            let r = h.row_edges(j);
            let vars = h.row(j);
            let d = vars.len();
            // the posterior keeps the unclamped extrinsic; only the check sees the clamp
            for (e, &v) in r.clone().zip(vars) {
                self.v2c[e] = clamp(self.posterior[v as usize] - self.c2v[e], c);
            }
            check_update(
                k,
                &self.v2c[r.clone()],
                self.negate[j],
                c,
                &mut self.scratch_t[..d],
                &mut self.scratch_out[..d],
            );
            for (t, (e, &v)) in r.zip(vars).enumerate() {
                let q = self.posterior[v as usize] - self.c2v[e];
                self.c2v[e] = self.scratch_out[t];
                self.posterior[v as usize] = q + self.scratch_out[t];
            }
        }
    }

    /// Check-to-variable messages, row-major edge order.
    pub fn check_to_var(&self) -> &[f64] {
        &self.c2v
    }

    /// Variable-to-check messages, row-major edge order.
    pub fn var_to_check(&self) -> &[f64] {
        &self.v2c
    }

    pub fn posteriors(&self) -> &[f64] {
        &self.posterior
    }

    pub fn hard_decisions(&self) -> &[u8] {
        &self.bits
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    /// Decodes one frame. The syndrome is tested on the channel hard decisions
    /// and after every iteration.
    pub fn decode(&mut self, channel_llrs: &[f64], s: &Syndrome) -> Result<DecodeResult> {
        self.start(channel_llrs, s)?;
        let mut matched = self.syndrome_matched();
        while !matched && self.iterations < self.cfg.max_iterations {
            self.iterate();
            matched = self.syndrome_matched();
        }
        Ok(DecodeResult {
            bits: self.bits.clone(),
            converged: matched,
            iterations_used: self.iterations,
            syndrome_matched: matched,
        })
    }
}

/// One-shot decode. Builds lookup tables when the configuration asks for them;
/// reuse a [`Decoder`] to avoid that cost per frame.
pub fn decode(h: &ParityCheckMatrix, channel_llrs: &LlrFrame, s: &Syndrome, cfg: &DecoderConfig) -> Result<DecodeResult> {
    let tables = match cfg.evaluation {
        Evaluation::Lookup => Some(build_lookup_tables(cfg)?),
        Evaluation::Direct => None,
    };
    Decoder::new(h, *cfg, tables.as_ref())?.decode(&channel_llrs.llrs, s)
}

pub fn build_lookup_tables(cfg: &DecoderConfig) -> Result<LookupTables> {
    cfg.validate()?;
    LookupTables::for_config(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::code::{build_rate_adaptive, syndrome, CodeSpec};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn cfg(schedule: Schedule, evaluation: Evaluation, iters: usize) -> DecoderConfig {
        DecoderConfig {
            max_iterations: iters,
            schedule,
            evaluation,
            ..DecoderConfig::default()
        }
    }

    fn all_configs(iters: usize) -> Vec<DecoderConfig> {
        let mut v = Vec::new();
        for s in [Schedule::Flooding, Schedule::Layered] {
            for e in [Evaluation::Direct, Evaluation::Lookup] {
                v.push(cfg(s, e, iters));
            }
        }
        v
    }

    #[test]
    fn single_check_pulls_toward_flip() {
        let h = ParityCheckMatrix::from_rows(2, &[vec![0, 1]]).unwrap();
        let c = cfg(Schedule::Flooding, Evaluation::Direct, 1);
        let mut dec = Decoder::new(&h, c, None).unwrap();
        dec.start(&[4.0, 4.0], &Syndrome { bits: vec![1] }).unwrap();
        dec.iterate();
        for &m in dec.check_to_var() {
            assert!((m + 4.0).abs() < 1e-12, "{m}");
        }
    }

    #[test]
    fn noiseless_input_converges_immediately() {
        let h = build_rate_adaptive(&CodeSpec::new(40, 20).unwrap(), 1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let bits: Vec<u8> = (0..h.n_vars()).map(|_| rng.random_range(0..2)).collect();
        let s = syndrome(&h, &bits).unwrap();
        let llrs = LlrFrame::new(bits.iter().map(|&b| if b == 0 { 100.0 } else { -100.0 }).collect()).unwrap();
        for c in all_configs(10) {
            let r = decode(&h, &llrs, &s, &c).unwrap();
            assert!(r.converged && r.syndrome_matched);
            assert!(r.iterations_used <= 1);
            assert_eq!(r.bits, bits);
        }
    }

    #[test]
    fn corrects_noisy_frames() {
        let h = build_rate_adaptive(&CodeSpec::new(200, 0).unwrap(), 1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let s2: f64 = 1.0; // 0 dB, well above the rate-0.2 threshold
        for c in all_configs(100) {
            let tables = LookupTables::for_config(&c).unwrap();
            let mut dec = Decoder::new(&h, c, Some(&tables)).unwrap();
            for _ in 0..5 {
                let bits: Vec<u8> = (0..h.n_vars()).map(|_| rng.random_range(0..2)).collect();
                let llrs: Vec<f64> = bits
                    .iter()
                    .map(|&b| {
                        let r = if b == 0 { 1.0 } else { -1.0 } + s2.sqrt() * rng.sample::<f64, _>(StandardNormal);
                        2.0 * r / s2
                    })
                    .collect();
                let s = syndrome(&h, &bits).unwrap();
                let r = dec.decode(&llrs, &s).unwrap();
                assert!(r.converged, "{c:?}");
                assert_eq!(r.bits, bits);
            }
        }
    }

    #[test]
    fn messages_stay_clamped_and_finite() {
        let h = build_rate_adaptive(&CodeSpec::new(40, 40).unwrap(), 3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for c in all_configs(30) {
            let tables = LookupTables::for_config(&c).unwrap();
            let mut dec = Decoder::new(&h, c, Some(&tables)).unwrap();
            let llrs: Vec<f64> = (0..h.n_vars()).map(|_| rng.random_range(-1e6..1e6)).collect();
            let s = Syndrome {
                bits: (0..h.n_checks()).map(|_| rng.random_range(0..2)).collect(),
            };
            dec.start(&llrs, &s).unwrap();
            for _ in 0..30 {
                dec.iterate();
                for &m in dec.check_to_var().iter().chain(dec.var_to_check()) {
                    assert!(m.is_finite() && m.abs() <= c.llr_clamp);
                }
                assert!(dec.posteriors().iter().all(|p| p.is_finite()));
            }
        }
    }

    #[test]
    fn input_validation() {
        let h = ParityCheckMatrix::from_rows(3, &[vec![0, 1], vec![1, 2]]).unwrap();
        let c = cfg(Schedule::Flooding, Evaluation::Direct, 5);
        let mut dec = Decoder::new(&h, c, None).unwrap();
        assert!(dec.decode(&[1.0; 2], &Syndrome::zeros(2)).is_err());
        assert!(dec.decode(&[1.0; 3], &Syndrome::zeros(3)).is_err());
        assert!(dec.decode(&[1.0, f64::NAN, 1.0], &Syndrome::zeros(2)).is_err());
        assert!(Decoder::new(&h, cfg(Schedule::Flooding, Evaluation::Lookup, 5), None).is_err());
        let wrong = LookupTables::new(20.0, 16).unwrap();
        assert!(Decoder::new(&h, cfg(Schedule::Flooding, Evaluation::Lookup, 5), Some(&wrong)).is_err());
        assert!(DecoderConfig { max_iterations: 0, ..c }.validate().is_err());
        assert!(DecoderConfig { llr_clamp: f64::INFINITY, ..c }.validate().is_err());
        assert!(DecoderConfig { lookup_resolution: 1, evaluation: Evaluation::Lookup, ..c }.validate().is_err());
        assert!(LlrFrame::new(vec![f64::INFINITY]).is_err());
    }

    #[test]
    fn lookup_tables_track_direct_values() {
        let t = LookupTables::new(38.0, 1 << 16).unwrap();
        assert_eq!(t.tanh_half(0.0), 0.0);
        assert_eq!(t.atanh_twice(0.0), 0.0);
        let step = 38.0 / 65535.0;
        for k in [1usize, 10, 1000, 30000, 65535] {
            let x = k as f64 * step;
            assert_eq!(t.tanh_half(x), (x / 2.0).tanh());
            assert_eq!(t.tanh_half(-x), -(x / 2.0).tanh());
        }
        // nearest-entry error is bounded by half a step times the slope (<= 1/2)
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..1000 {
            let x: f64 = rng.random_range(-38.0..38.0);
            assert!((t.tanh_half(x) - (x / 2.0).tanh()).abs() <= step / 4.0 + 1e-15);
            let p: f64 = rng.random_range(-0.99..0.99);
            let exact = 2.0 * f64::atanh(p);
            // slope of 2 atanh is 2/(1-p^2) <= 101 on this range
            assert!((t.atanh_twice(p) - exact).abs() <= 101.0 / 65535.0);
        }
        assert!(t.atanh_twice(1.0) <= 38.0 && t.atanh_twice(1.0) > 30.0);
    }

    #[test]
    fn flipping_a_pattern_complements_decisions() {
        let h = build_rate_adaptive(&CodeSpec::new(100, 50).unwrap(), 4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for c in all_configs(20) {
            let tables = LookupTables::for_config(&c).unwrap();
            let mut dec = Decoder::new(&h, c, Some(&tables)).unwrap();
            let llrs: Vec<f64> = (0..h.n_vars()).map(|_| rng.random_range(-3.0..3.0)).collect();
            let s = Syndrome {
                bits: (0..h.n_checks()).map(|_| rng.random_range(0..2)).collect(),
            };
            let z: Vec<u8> = (0..h.n_vars()).map(|_| rng.random_range(0..2)).collect();
            let flipped: Vec<f64> = llrs.iter().zip(&z).map(|(&l, &b)| if b == 1 { -l } else { l }).collect();
            let s2 = s.xor(&syndrome(&h, &z).unwrap());
            let a = dec.decode(&llrs, &s).unwrap();
            let b = dec.decode(&flipped, &s2).unwrap();
            assert_eq!(a.iterations_used, b.iterations_used);
            assert_eq!(a.converged, b.converged);
            let expect: Vec<u8> = a.bits.iter().zip(&z).map(|(x, y)| x ^ y).collect();
            assert_eq!(b.bits, expect);
        }
    }

    #[test]
    fn decoding_is_deterministic() {
        let h = build_rate_adaptive(&CodeSpec::new(100, 0).unwrap(), 4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let llrs: Vec<f64> = (0..h.n_vars()).map(|_| rng.random_range(-1.0..3.0)).collect();
        let s = Syndrome::zeros(h.n_checks());
        for c in all_configs(50) {
            let tables = LookupTables::for_config(&c).unwrap();
            let mut dec = Decoder::new(&h, c, Some(&tables)).unwrap();
            let a = dec.decode(&llrs, &s).unwrap();
            let post_a = dec.posteriors().to_vec();
            let b = dec.decode(&llrs, &s).unwrap();
            assert_eq!(a, b);
            assert_eq!(post_a, dec.posteriors());
        }
    }
}
