//! Independent oracles shared by the integration and acceptance tests.

#![allow(dead_code)]

use cvrecon::code::ParityCheckMatrix;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Plain codeword sum-product decoder over a dense matrix, flooding schedule.
///
/// Messages live in dense `m x n` arrays. The arithmetic order is that of the
/// sparse decoder: tanh products run left to right skipping the target,
/// posteriors add the channel value first and then checks in index order.
pub struct ReferenceSpa {
    pub h: Vec<Vec<bool>>,
    pub clamp: f64,
    pub channel: Vec<f64>,
    /// variable-to-check, `q[j][i]`
    pub q: Vec<Vec<f64>>,
    /// check-to-variable, `r[j][i]`
    pub r: Vec<Vec<f64>>,
    pub total: Vec<f64>,
}

impl ReferenceSpa {
    pub fn new(h: Vec<Vec<bool>>, clamp: f64, llrs: &[f64]) -> Self {
        let m = h.len();
        let n = llrs.len();
        let channel: Vec<f64> = llrs.iter().map(|l| l.clamp(-clamp, clamp)).collect();
        let q = (0..m)
            .map(|j| (0..n).map(|i| if h[j][i] { channel[i] } else { 0.0 }).collect())
            .collect();
        Self {
            r: vec![vec![0.0; n]; m],
            total: channel.clone(),
            h,
            clamp,
            channel,
            q,
        }
    }

    pub fn n(&self) -> usize {
        self.channel.len()
    }

    pub fn step(&mut self) {
        let (m, n, c) = (self.h.len(), self.n(), self.clamp);
        for j in 0..m {
            let members: Vec<usize> = (0..n).filter(|&i| self.h[j][i]).collect();
            let t: Vec<f64> = members.iter().map(|&i| (self.q[j][i] / 2.0).tanh()).collect();
            for (a, &i) in members.iter().enumerate() {
                let mut p = 1.0;
                for (b, tb) in t.iter().enumerate() {
                    if b != a {
                        p *= tb;
                    }
                }
                let p = p.clamp(-(1.0 - f64::EPSILON), 1.0 - f64::EPSILON);
                self.r[j][i] = (2.0 * p.atanh()).clamp(-c, c);
            }
        }
        for i in 0..n {
            let mut t = self.channel[i];
            for j in 0..m {
                if self.h[j][i] {
                    t += self.r[j][i];
                }
            }
            self.total[i] = t;
            for j in 0..m {
                if self.h[j][i] {
                    self.q[j][i] = (t - self.r[j][i]).clamp(-c, c);
                }
            }
        }
    }

    pub fn hard(&self) -> Vec<u8> {
        self.total.iter().map(|&l| u8::from(l < 0.0)).collect()
    }

    pub fn is_codeword(&self) -> bool {
        let x = self.hard();
        self.h
            .iter()
            .all(|row| row.iter().zip(&x).filter(|(&e, &b)| e && b == 1).count() % 2 == 0)
    }

    /// Runs until the hard decisions form a codeword or `max` iterations.
    pub fn decode(&mut self, max: usize) -> (Vec<u8>, bool, usize) {
        let mut it = 0;
        let mut ok = self.is_codeword();
        while !ok && it < max {
            self.step();
            it += 1;
            ok = self.is_codeword();
        }
        (self.hard(), ok, it)
    }
}

pub fn dense(h: &ParityCheckMatrix) -> Vec<Vec<bool>> {
    (0..h.n_checks())
        .map(|j| {
            let mut row = vec![false; h.n_vars()];
            for &v in h.row(j) {
                row[v as usize] = true;
            }
            row
        })
        .collect()
}

/// Random `(dv, dc)`-regular matrix by socket matching, without repeated
/// edges.
pub fn regular_code(n: usize, dv: usize, dc: usize, seed: u64) -> ParityCheckMatrix {
    assert_eq!((n * dv) % dc, 0);
    let m = n * dv / dc;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    'attempt: loop {
        let mut sockets: Vec<usize> = (0..n).flat_map(|v| std::iter::repeat_n(v, dv)).collect();
        sockets.shuffle(&mut rng);
        let mut rows: Vec<Vec<usize>> = sockets.chunks(dc).map(|c| c.to_vec()).collect();
        // repair duplicate entries by swapping with random other sockets
        for _ in 0..100 * m {
            let bad = (0..m).find(|&j| {
                let mut r = rows[j].clone();
                r.sort_unstable();
                r.windows(2).any(|w| w[0] == w[1])
            });
            let Some(j) = bad else {
                return ParityCheckMatrix::from_rows(n, &rows).unwrap();
            };
            let a = rng.random_range(0..dc);
            let j2 = rng.random_range(0..m);
            let b = rng.random_range(0..dc);
            let (x, y) = (rows[j][a], rows[j2][b]);
            rows[j][a] = y;
            rows[j2][b] = x;
        }
        continue 'attempt;
    }
}

/// Exact BI-AWGN LLRs for `bits` with noise variance `s2`.
pub fn bpsk_llrs<R: Rng>(bits: &[u8], s2: f64, rng: &mut R) -> Vec<f64> {
    bits.iter()
        .map(|&b| {
            let r = if b == 0 { 1.0 } else { -1.0 } + s2.sqrt() * rng.sample::<f64, _>(StandardNormal);
            2.0 * r / s2
        })
        .collect()
}

/// Noise variance of a rate-`rate` BPSK code at the given Eb/N0 in dB.
pub fn ebn0_noise_variance(ebn0_db: f64, rate: f64) -> f64 {
    1.0 / (2.0 * rate * 10f64.powf(ebn0_db / 10.0))
}

/// Steps the sparse flooding decoder (direct evaluation, zero syndrome) and
/// the reference side by side for `iters` iterations and reports the first
/// message, posterior or decision that differs in any bit.
pub fn lockstep_mismatch(h: &ParityCheckMatrix, llrs: &[f64], iters: usize) -> Option<String> {
    use cvrecon::code::Syndrome;
    use cvrecon::decoder::{Decoder, DecoderConfig, Evaluation, Schedule};

    let cfg = DecoderConfig {
        max_iterations: iters,
        schedule: Schedule::Flooding,
        evaluation: Evaluation::Direct,
        ..DecoderConfig::default()
    };
    let mut dec = Decoder::new(h, cfg, None).unwrap();
    dec.start(llrs, &Syndrome::zeros(h.n_checks())).unwrap();
    let mut reference = ReferenceSpa::new(dense(h), cfg.llr_clamp, llrs);
    for it in 1..=iters {
        dec.iterate();
        reference.step();
        for j in 0..h.n_checks() {
            for (e, &v) in h.row_edges(j).zip(h.row(j)) {
                let v = v as usize;
                if dec.check_to_var()[e].to_bits() != reference.r[j][v].to_bits() {
                    return Some(format!("c2v check {j} var {v} iteration {it}"));
                }
                if dec.var_to_check()[e].to_bits() != reference.q[j][v].to_bits() {
                    return Some(format!("v2c check {j} var {v} iteration {it}"));
                }
            }
        }
        for (i, (a, b)) in dec.posteriors().iter().zip(&reference.total).enumerate() {
            if a.to_bits() != b.to_bits() {
                return Some(format!("posterior {i} iteration {it}"));
            }
        }
        if dec.hard_decisions() != &reference.hard()[..] {
            return Some(format!("hard decisions iteration {it}"));
        }
    }
    None
}

/// The three-variable toy code `x0 + x1 = s0`, `x1 + x2 = s1`.
pub fn toy_code() -> ParityCheckMatrix {
    ParityCheckMatrix::from_rows(3, &[vec![0, 1], vec![1, 2]]).unwrap()
}

/// Tally of a fault-injection run.
#[derive(Debug, Default, Clone, Copy, PartialEq, Eq)]
pub struct FaultTally {
    pub frames: usize,
    pub accepted: usize,
    pub false_accepts: usize,
    pub converged_to_wrong_word: usize,
    pub ledger_mismatches: usize,
}

/// Reconciles `n_frames` frames whose classical messages are tampered with
/// in transit: syndrome bit flips (kind 0), CRC bit flips (kind 1), or both
/// (kind 2), in rotation.
pub fn fault_campaign(n_frames: usize, seed: u64) -> FaultTally {
    use cvrecon::channel::{frame_rng, generate_gaussian_pair, ChannelParams};
    use cvrecon::code::CodeSpec;
    use cvrecon::decoder::DecoderConfig;
    use cvrecon::mdr::MdrConfig;
    use cvrecon::protocol::{reconcile_frame_with, ReconcileContext, TranscriptItem};

    let spec = CodeSpec::new(200, 200).unwrap();
    let ctx = ReconcileContext::new(spec, 3, DecoderConfig::default()).unwrap();
    let params = ChannelParams::from_snr_db(6.0, spec.n()).unwrap();
    let mdr = MdrConfig::new(8, params.noise_variance()).unwrap();
    let mut dec = ctx.new_decoder().unwrap();
    let mut tally = FaultTally::default();
    for f in 0..n_frames as u64 {
        let mut rng = frame_rng(seed, f);
        let (x, y) = generate_gaussian_pair(&params, &mut rng);
        let mut fault_rng = frame_rng(seed ^ 0x5eed, f);
        let kind = f % 3;
        let n_flips = fault_rng.random_range(1..=3);
        // kind 0 hits extension checks, whose flips the decoder can always
        // satisfy by flipping a degree-1 variable, so only the CRC stands guard
        let (lo, hi) = if kind == 0 { (4 * spec.k, spec.m()) } else { (0, spec.m()) };
        let flips: Vec<usize> = rand::seq::index::sample(&mut fault_rng, hi - lo, n_flips)
            .into_iter()
            .map(|b| lo + b)
            .collect();
        let crc_bit = fault_rng.random_range(0..32);
        let mut tamper = |item: TranscriptItem| match item {
            TranscriptItem::Syndrome(mut s) if kind != 1 => {
                for &b in &flips {
                    s.bits[b] ^= 1;
                }
                TranscriptItem::Syndrome(s)
            }
            TranscriptItem::Crc(c) if kind != 0 => TranscriptItem::Crc(cvrecon::integrity::CrcValue(c.0 ^ (1 << crc_bit))),
            other => other,
        };
        let out = reconcile_frame_with(&ctx, &mut dec, &x, &y, &mdr, &mut rng, &mut tamper).unwrap();
        let r = &out.report;
        tally.frames += 1;
        tally.accepted += usize::from(r.frame_ok);
        let wrong = r.bit_errors_vs_truth != Some(0);
        tally.false_accepts += usize::from(r.frame_ok && wrong);
        tally.converged_to_wrong_word += usize::from(r.converged && wrong);
        tally.ledger_mismatches += usize::from(r.leakage.total_binary_leakage() != spec.n() - spec.k + 32);
    }
    tally
}

/// Largest gap between the empirical `P(bit = 0)` and the mean predicted
/// probability over LLR bins holding at least `min_count` samples. Returns
/// the gap and the number of bins checked.
pub fn llr_calibration_gap(llrs: &[f64], bits: &[u8], width: f64, min_count: usize) -> (f64, usize) {
    use std::collections::BTreeMap;
    let mut bins: BTreeMap<i64, (usize, usize, f64)> = BTreeMap::new();
    for (&l, &b) in llrs.iter().zip(bits) {
        let e = bins.entry((l / width).floor() as i64).or_default();
        e.0 += 1;
        e.1 += usize::from(b == 0);
        e.2 += 1.0 / (1.0 + (-l).exp());
    }
    let mut worst: f64 = 0.0;
    let mut checked = 0;
    for (count, zeros, predicted) in bins.values() {
        if *count >= min_count {
            checked += 1;
            worst = worst.max((*zeros as f64 / *count as f64 - predicted / *count as f64).abs());
        }
    }
    (worst, checked)
}
