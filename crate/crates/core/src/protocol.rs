//! Reverse reconciliation between Bob (whose raw key wins) and Alice.
//!
//! One frame runs as follows:
//!
//! 1. Bob draws a random raw key.
//! 2. Bob publishes one MDR rotation per block of his samples.
//! 3. Alice turns her samples and the rotations into channel LLRs.
//! 4. Bob publishes the syndrome of his raw key.
//! 5. Alice decodes; if the syndrome is met she returns the CRC of her word.
//! 6. Bob keeps the frame only if the CRC equals the CRC of his raw key.
//!
//! Alice is built from her own samples and the transcript alone. Every
//! classical message passes through a [`ClassicalChannel`], which records it and
//! can be replaced to inject faults.

use std::time::Instant;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::algebra::validate_dim;
use crate::channel::generate_raw_key;
use crate::code::{build_rate_adaptive, syndrome, CodeSpec, ParityCheckMatrix, Syndrome};
use crate::decoder::{DecodeResult, Decoder, DecoderConfig, Evaluation, LookupTables};
use crate::error::{invalid, Error, Result};
use crate::integrity::{crc32_of_bits, crc_match, pack_bits_msb, unpack_bits_msb, CrcValue};
use crate::mdr::{mdr_decode_frame, mdr_encode_frame, MdrBlockMessage, MdrConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    BobToAlice,
    AliceToBob,
}

impl Direction {
    fn tag(self) -> u8 {
        match self {
            Direction::BobToAlice => 0,
            Direction::AliceToBob => 1,
        }
    }
}

/// One message on the classical channel.
#[derive(Debug, Clone, PartialEq)]
pub enum TranscriptItem {
    Mdr { dim: usize, blocks: Vec<MdrBlockMessage> },
    Syndrome(Syndrome),
    Crc(CrcValue),
}

impl TranscriptItem {
    pub fn direction(&self) -> Direction {
        match self {
            TranscriptItem::Crc(_) => Direction::AliceToBob,
            _ => Direction::BobToAlice,
        }
    }

    fn tag(&self) -> u8 {
        match self {
            TranscriptItem::Mdr { .. } => 1,
            TranscriptItem::Syndrome(_) => 2,
            TranscriptItem::Crc(_) => 3,
        }
    }

    fn payload(&self) -> Vec<u8> {
        let mut out = Vec::new();
        match self {
            TranscriptItem::Mdr { dim, blocks } => {
                out.push(*dim as u8);
                out.extend_from_slice(&(blocks.len() as u32).to_le_bytes());
                for b in blocks {
                    b.write_to(&mut out);
                }
            }
            TranscriptItem::Syndrome(s) => {
                out.extend_from_slice(&(s.len() as u32).to_le_bytes());
                out.extend(pack_bits_msb(&s.bits));
            }
            TranscriptItem::Crc(c) => out.extend_from_slice(&c.to_be_bytes()),
        }
        out
    }

    fn from_payload(tag: u8, p: &[u8]) -> Result<Self> {
        let bad = |m: &str| Error::Transcript(m.to_string());
        let u32_at = |at: usize| -> Result<usize> {
            p.get(at..at + 4)
                .map(|b| u32::from_le_bytes(b.try_into().unwrap()) as usize)
                .ok_or_else(|| bad("truncated length field"))
        };
        match tag {
            1 => {
                let dim = *p.first().ok_or_else(|| bad("empty MDR record"))? as usize;
                validate_dim(dim).map_err(|_| bad("bad MDR dimension"))?;
                let count = u32_at(1)?;
                let size = MdrBlockMessage::encoded_len(dim);
                if p.len() != 5 + count * size {
                    return Err(bad("MDR record length does not match block count"));
                }
                let blocks = p[5..]
                    .chunks_exact(size)
                    .map(|c| MdrBlockMessage::read_from(c, dim))
                    .collect::<Result<_>>()?;
                Ok(TranscriptItem::Mdr { dim, blocks })
            }
            2 => {
                let n = u32_at(0)?;
                if p.len() != 4 + n.div_ceil(8) {
                    return Err(bad("syndrome record length does not match bit count"));
                }
                Ok(TranscriptItem::Syndrome(Syndrome {
                    bits: unpack_bits_msb(&p[4..], n),
                }))
            }
            3 => {
                let b: [u8; 4] = p.try_into().map_err(|_| bad("CRC record must be 4 bytes"))?;
                Ok(TranscriptItem::Crc(CrcValue::from_be_bytes(b)))
            }
            t => Err(bad(&format!("unknown record tag {t}"))),
        }
    }

    /// Key-relevant bits this item discloses (syndrome and CRC only).
    pub fn leaked_bits(&self) -> usize {
        match self {
            TranscriptItem::Mdr { .. } => 0,
            TranscriptItem::Syndrome(s) => s.len(),
            TranscriptItem::Crc(_) => 32,
        }
    }
}

/// Everything exchanged for one frame, in order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ClassicalTranscript {
    pub items: Vec<TranscriptItem>,
}

impl ClassicalTranscript {
    pub fn mdr_messages(&self) -> Option<&[MdrBlockMessage]> {
        self.items.iter().find_map(|i| match i {
            TranscriptItem::Mdr { blocks, .. } => Some(&blocks[..]),
            _ => None,
        })
    }

    pub fn syndrome(&self) -> Option<&Syndrome> {
        self.items.iter().find_map(|i| match i {
            TranscriptItem::Syndrome(s) => Some(s),
            _ => None,
        })
    }

    pub fn crc(&self) -> Option<CrcValue> {
        self.items.iter().find_map(|i| match i {
            TranscriptItem::Crc(c) => Some(*c),
            _ => None,
        })
    }

    /// Records of `[tag u8][direction u8][payload length u32 LE][payload]`.
    ///
    /// Payloads: MDR is `[dim u8][count u32 LE]` then per block the rotation
    /// coordinates and the norm as f64 LE; a syndrome is `[bits u32 LE]` and the
    /// bits packed MSB first; a CRC is four bytes big-endian.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        for item in &self.items {
            let payload = item.payload();
            out.push(item.tag());
            out.push(item.direction().tag());
            out.extend_from_slice(&(payload.len() as u32).to_le_bytes());
            out.extend(payload);
        }
        out
    }

    pub fn from_bytes(mut bytes: &[u8]) -> Result<Self> {
        let mut items = Vec::new();
        while !bytes.is_empty() {
            if bytes.len() < 6 {
                return Err(Error::Transcript("truncated record header".into()));
            }
            let (tag, dir) = (bytes[0], bytes[1]);
            let len = u32::from_le_bytes(bytes[2..6].try_into().unwrap()) as usize;
            let payload = bytes
                .get(6..6 + len)
                .ok_or_else(|| Error::Transcript("truncated record payload".into()))?;
            let item = TranscriptItem::from_payload(tag, payload)?;
            if item.direction().tag() != dir {
                return Err(Error::Transcript(format!("record {tag} has wrong direction {dir}")));
            }
            items.push(item);
            bytes = &bytes[6 + len..];
        }
        Ok(Self { items })
    }

    /// Leakage as read off the transcript itself.
    pub fn leaked_bits(&self) -> usize {
        self.items.iter().map(TranscriptItem::leaked_bits).sum()
    }
}

/// Carries classical messages between the roles.
pub trait ClassicalChannel {
    /// Returns what the receiver gets for `item`.
    fn transmit(&mut self, item: TranscriptItem) -> TranscriptItem;
}

/// Delivers every message unchanged.
#[derive(Debug, Default, Clone, Copy)]
pub struct Authenticated;

impl ClassicalChannel for Authenticated {
    fn transmit(&mut self, item: TranscriptItem) -> TranscriptItem {
        item
    }
}

impl<F: FnMut(TranscriptItem) -> TranscriptItem> ClassicalChannel for F {
    fn transmit(&mut self, item: TranscriptItem) -> TranscriptItem {
        self(item)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LeakageLedger {
    pub syndrome_bits: usize,
    pub crc_bits: usize,
    /// Rotation coordinates plus norms; informational only.
    pub mdr_disclosed_reals: usize,
}

impl LeakageLedger {
    pub fn total_binary_leakage(&self) -> usize {
        self.syndrome_bits + self.crc_bits
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReconciliationReport {
    pub frame_ok: bool,
    pub converged: bool,
    pub syndrome_matched: bool,
    pub iterations_used: usize,
    /// Bits where Alice's decoder output differs from Bob's raw key.
    pub bit_errors_vs_truth: Option<usize>,
    pub leakage: LeakageLedger,
    pub decode_seconds: f64,
}

/// Report plus the reconciled key, present only when Bob accepted the frame.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameOutcome {
    pub report: ReconciliationReport,
    pub key: Option<Vec<u8>>,
    pub transcript: ClassicalTranscript,
}

/// Code, decoder settings and lookup tables shared by all frames.
pub struct ReconcileContext {
    pub spec: CodeSpec,
    pub code: ParityCheckMatrix,
    pub decoder: DecoderConfig,
    pub tables: Option<LookupTables>,
}

impl ReconcileContext {
    pub fn new(spec: CodeSpec, code_seed: u64, decoder: DecoderConfig) -> Result<Self> {
        let code = build_rate_adaptive(&spec, code_seed)?;
        Self::with_code(spec, code, decoder)
    }

    pub fn with_code(spec: CodeSpec, code: ParityCheckMatrix, decoder: DecoderConfig) -> Result<Self> {
        spec.validate()?;
        decoder.validate()?;
        if code.n_vars() != spec.n() || code.n_checks() != spec.m() {
            return invalid(format!(
                "matrix is {}x{}, spec needs {}x{}",
                code.n_checks(),
                code.n_vars(),
                spec.m(),
                spec.n()
            ));
        }
        let tables = match decoder.evaluation {
            Evaluation::Lookup => Some(LookupTables::for_config(&decoder)?),
            Evaluation::Direct => None,
        };
        Ok(Self {
            spec,
            code,
            decoder,
            tables,
        })
    }

    pub fn new_decoder(&self) -> Result<Decoder<'_>> {
        Decoder::new(&self.code, self.decoder, self.tables.as_ref())
    }
}

/// Bob's side of one frame.
pub struct Bob<'a> {
    code: &'a ParityCheckMatrix,
    raw_key: Vec<u8>,
}

impl<'a> Bob<'a> {
    /// Step 1: draws the raw key.
    pub fn new<R: Rng>(code: &'a ParityCheckMatrix, rng: &mut R) -> Self {
        Self {
            code,
            raw_key: generate_raw_key(code.n_vars(), rng),
        }
    }

    pub fn with_raw_key(code: &'a ParityCheckMatrix, raw_key: Vec<u8>) -> Result<Self> {
        if raw_key.len() != code.n_vars() {
            return invalid("raw key length does not match the code");
        }
        Ok(Self { code, raw_key })
    }

    pub fn raw_key(&self) -> &[u8] {
        &self.raw_key
    }

    /// Step 2.
    pub fn mdr_message(&self, y: &[f64], cfg: &MdrConfig) -> Result<TranscriptItem> {
        Ok(TranscriptItem::Mdr {
            dim: cfg.dim,
            blocks: mdr_encode_frame(y, &self.raw_key, cfg)?,
        })
    }

    /// Step 4.
    pub fn syndrome_message(&self) -> Result<TranscriptItem> {
        Ok(TranscriptItem::Syndrome(syndrome(self.code, &self.raw_key)?))
    }

    /// Step 6.
    pub fn accepts(&self, crc: CrcValue) -> bool {
        crc_match(crc, crc32_of_bits(&self.raw_key))
    }
}

/// What Alice produces in step 5.
#[derive(Debug, Clone)]
pub struct AliceResult {
    pub decode: DecodeResult,
    pub crc: Option<CrcValue>,
    pub decode_seconds: f64,
}

/// Alice's side: her samples plus whatever Bob sent.
pub struct Alice<'a> {
    x: &'a [f64],
    noise_variance: f64,
}

impl<'a> Alice<'a> {
    pub fn new(x: &'a [f64], noise_variance: f64) -> Self {
        Self { x, noise_variance }
    }

    /// Step 3.
    pub fn channel_llrs(&self, mdr: &TranscriptItem) -> Result<Vec<f64>> {
        let TranscriptItem::Mdr { dim, blocks } = mdr else {
            return Err(Error::Transcript("expected MDR messages".into()));
        };
        let cfg = MdrConfig::new(*dim, self.noise_variance)?;
        Ok(mdr_decode_frame(self.x, blocks, &cfg)?.llrs)
    }

    /// Step 5 given channel LLRs.
    pub fn decode(decoder: &mut Decoder<'_>, llrs: &[f64], s: &TranscriptItem) -> Result<AliceResult> {
        let TranscriptItem::Syndrome(s) = s else {
            return Err(Error::Transcript("expected a syndrome".into()));
        };
        let t0 = Instant::now();
        let decode = decoder.decode(llrs, s)?;
        let decode_seconds = t0.elapsed().as_secs_f64();
        let crc = decode.converged.then(|| crc32_of_bits(&decode.bits));
        Ok(AliceResult {
            decode,
            crc,
            decode_seconds,
        })
    }
}

/// Runs the frame after Alice has her channel LLRs: steps 4 to 6.
fn finish_frame(
    bob: &Bob<'_>,
    decoder: &mut Decoder<'_>,
    llrs: &[f64],
    channel: &mut dyn ClassicalChannel,
    mut transcript: ClassicalTranscript,
    mdr_reals: usize,
) -> Result<FrameOutcome> {
    let s = channel.transmit(bob.syndrome_message()?);
    transcript.items.push(s.clone());
    let alice = Alice::decode(decoder, llrs, &s)?;
    let accepted = match alice.crc {
        Some(crc) => {
            let delivered = channel.transmit(TranscriptItem::Crc(crc));
            transcript.items.push(delivered.clone());
            match delivered {
                TranscriptItem::Crc(c) => bob.accepts(c),
                _ => false,
            }
        }
        None => false,
    };
    let bit_errors = alice
        .decode
        .bits
        .iter()
        .zip(bob.raw_key())
        .filter(|(a, b)| a != b)
        .count();
    let report = ReconciliationReport {
        frame_ok: accepted && alice.decode.converged,
        converged: alice.decode.converged,
        syndrome_matched: alice.decode.syndrome_matched,
        iterations_used: alice.decode.iterations_used,
        bit_errors_vs_truth: Some(bit_errors),
        leakage: LeakageLedger {
            syndrome_bits: bob.code.n_checks(),
            crc_bits: 32,
            mdr_disclosed_reals: mdr_reals,
        },
        decode_seconds: alice.decode_seconds,
    };
    let key = report.frame_ok.then_some(alice.decode.bits);
    Ok(FrameOutcome {
        report,
        key,
        transcript,
    })
}

/// Reconciles one frame of `N` samples over an authenticated channel.
pub fn reconcile_frame<R: Rng>(
    ctx: &ReconcileContext,
    x: &[f64],
    y: &[f64],
    mdr_cfg: &MdrConfig,
    rng: &mut R,
) -> Result<FrameOutcome> {
    let mut decoder = ctx.new_decoder()?;
    reconcile_frame_with(ctx, &mut decoder, x, y, mdr_cfg, rng, &mut Authenticated)
}

/// [`reconcile_frame`] with a reusable decoder and an explicit channel.
pub fn reconcile_frame_with<R: Rng>(
    ctx: &ReconcileContext,
    decoder: &mut Decoder<'_>,
    x: &[f64],
    y: &[f64],
    mdr_cfg: &MdrConfig,
    rng: &mut R,
    channel: &mut dyn ClassicalChannel,
) -> Result<FrameOutcome> {
    let n = ctx.spec.n();
    if x.len() != n || y.len() != n {
        return invalid(format!(
            "frame needs {n} samples per party, got {} and {}",
            x.len(),
            y.len()
        ));
    }
    mdr_cfg.validate()?;
    if !n.is_multiple_of(mdr_cfg.dim) {
        return invalid(format!("frame length {n} is not a multiple of dimension {}", mdr_cfg.dim));
    }
    let bob = Bob::new(&ctx.code, rng);
    let mdr = channel.transmit(bob.mdr_message(y, mdr_cfg)?);
    let alice = Alice::new(x, mdr_cfg.noise_variance);
    let llrs = alice.channel_llrs(&mdr)?;
    let reals = n + n / mdr_cfg.dim;
    let transcript = ClassicalTranscript { items: vec![mdr] };
    finish_frame(&bob, decoder, &llrs, channel, transcript, reals)
}

/// Reference path: Bob's raw key crosses a BI-AWGN channel and Alice receives
/// exact LLRs instead of running MDR.
pub fn reconcile_biawgn_frame<R: Rng>(
    ctx: &ReconcileContext,
    decoder: &mut Decoder<'_>,
    snr: f64,
    rng: &mut R,
) -> Result<FrameOutcome> {
    let params = crate::channel::ChannelParams::new(snr, ctx.spec.n())?;
    let bob = Bob::new(&ctx.code, rng);
    let llrs = crate::channel::generate_biawgn(&params, bob.raw_key(), rng);
    finish_frame(&bob, decoder, &llrs, &mut Authenticated, ClassicalTranscript::default(), 0)
}
