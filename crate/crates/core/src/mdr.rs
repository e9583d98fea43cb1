//! Multidimensional reconciliation.
//!
//! Bob splits his measurements `y` into blocks of `d` samples, maps `d` raw key
//! bits to the unit vector `u` with `u_i = (-1)^{b_i} / sqrt(d)` and publishes
//! the rotation `r = u * (y/|y|)^-1` together with `|y|`. Since `r` has unit
//! norm whatever the bits are, it reveals nothing about `u` on its own.
//!
//! Alice applies the same rotation to her block, `v = r * x`. Left
//! multiplication by a unit element is orthogonal, so with `y = x + n`,
//! `x ~ N(0, I)` and `n ~ N(0, s2 I)` the likelihood of `u` is proportional to
//! `exp(|y| <v, u> / s2)`, which factors over the components and gives the
//! exact per-bit LLR
//!
//! ```text
//! L_i = 2 |y| v_i / (sqrt(d) s2)
//! ```
//!
//! Positive LLRs favour bit 0.

use serde::{Deserialize, Serialize};

use crate::algebra::{validate_dim, CdElement, DEGENERATE_NORM};
use crate::error::{invalid, Error, Result};

/// Rotation dimension and noise variance of the quantum measurements.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MdrConfig {
    pub dim: usize,
    pub noise_variance: f64,
}

impl MdrConfig {
    pub fn new(dim: usize, noise_variance: f64) -> Result<Self> {
        let cfg = Self {
            dim,
            noise_variance,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        validate_dim(self.dim)?;
        if !(self.noise_variance.is_finite() && self.noise_variance > 0.0) {
            return invalid(format!(
                "noise variance must be finite and positive, got {}",
                self.noise_variance
            ));
        }
        Ok(())
    }
}

/// What Bob publishes for one block of `dim` samples.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MdrBlockMessage {
    pub rotation: CdElement,
    pub receiver_norm: f64,
}

impl MdrBlockMessage {
    /// Size in bytes of the serialized form for a given dimension.
    pub fn encoded_len(dim: usize) -> usize {
        8 * (dim + 1)
    }

    /// Little-endian f64 rotation coordinates followed by the norm.
    pub fn write_to(&self, out: &mut Vec<u8>) {
        for c in self.rotation.coords() {
            out.extend_from_slice(&c.to_le_bytes());
        }
        out.extend_from_slice(&self.receiver_norm.to_le_bytes());
    }

    pub fn read_from(bytes: &[u8], dim: usize) -> Result<Self> {
        validate_dim(dim)?;
        if bytes.len() != Self::encoded_len(dim) {
            return Err(Error::Transcript(format!(
                "MDR block needs {} bytes, got {}",
                Self::encoded_len(dim),
                bytes.len()
            )));
        }
        let mut vals = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()));
        let coords: Vec<f64> = vals.by_ref().take(dim).collect();
        let receiver_norm = vals.next().unwrap();
        if !(receiver_norm.is_finite() && receiver_norm >= 0.0) {
            return Err(Error::Transcript(format!("bad block norm {receiver_norm}")));
        }
        Ok(Self {
            rotation: CdElement::new(&coords)?,
            receiver_norm,
        })
    }
}

/// Channel LLRs for one frame. Positive means bit 0 is more likely.
#[derive(Debug, Clone, PartialEq)]
pub struct LlrFrame {
    pub llrs: Vec<f64>,
}

impl LlrFrame {
    pub fn new(llrs: Vec<f64>) -> Result<Self> {
        if let Some(l) = llrs.iter().find(|l| !l.is_finite()) {
            return invalid(format!("non-finite LLR {l}"));
        }
        Ok(Self { llrs })
    }

    pub fn frame_len(&self) -> usize {
        self.llrs.len()
    }

    /// Bit 1 where the LLR is negative; zero decides for bit 0.
    pub fn hard_decision(&self) -> Vec<u8> {
        self.llrs.iter().map(|&l| u8::from(l < 0.0)).collect()
    }
}

fn check_block(block: &CdElement, cfg: &MdrConfig) -> Result<()> {
    cfg.validate()?;
    if block.dim() != cfg.dim {
        return invalid(format!(
            "block dimension {} does not match configured {}",
            block.dim(),
            cfg.dim
        ));
    }
    Ok(())
}

/// Bob's side for a single block.
pub fn mdr_encode_block(y_block: &CdElement, bits: &[u8], cfg: &MdrConfig) -> Result<MdrBlockMessage> {
    check_block(y_block, cfg)?;
    if bits.len() != cfg.dim {
        return invalid(format!("expected {} bits, got {}", cfg.dim, bits.len()));
    }
    let norm = y_block.norm();
    if norm < DEGENERATE_NORM {
        return Err(Error::Degenerate(format!("block norm {norm} is too small")));
    }
    let amp = 1.0 / (cfg.dim as f64).sqrt();
    let u: Vec<f64> = bits
        .iter()
        .map(|&b| if b == 0 { amp } else { -amp })
        .collect();
    let u = CdElement::new(&u)?;
    let rotation = u.multiply(&y_block.scale(1.0 / norm).inverse()?)?;
    Ok(MdrBlockMessage {
        rotation,
        receiver_norm: norm,
    })
}

/// Alice's side for a single block: the `dim` LLRs of Bob's bits.
pub fn mdr_decode_block(x_block: &CdElement, msg: &MdrBlockMessage, cfg: &MdrConfig) -> Result<Vec<f64>> {
    check_block(x_block, cfg)?;
    if msg.rotation.dim() != cfg.dim {
        return invalid(format!(
            "rotation dimension {} does not match configured {}",
            msg.rotation.dim(),
            cfg.dim
        ));
    }
    let v = msg.rotation.multiply(x_block)?;
    let gain = 2.0 * msg.receiver_norm / ((cfg.dim as f64).sqrt() * cfg.noise_variance);
    Ok(v.coords().iter().map(|vi| gain * vi).collect())
}

fn check_frame_len(n: usize, cfg: &MdrConfig) -> Result<()> {
    if !n.is_multiple_of(cfg.dim) {
        return invalid(format!(
            "frame length {n} is not a multiple of dimension {}",
            cfg.dim
        ));
    }
    Ok(())
}

pub fn mdr_encode_frame(y: &[f64], raw_bits: &[u8], cfg: &MdrConfig) -> Result<Vec<MdrBlockMessage>> {
    cfg.validate()?;
    if y.len() != raw_bits.len() {
        return invalid(format!(
            "{} samples but {} raw bits",
            y.len(),
            raw_bits.len()
        ));
    }
    check_frame_len(y.len(), cfg)?;
    y.chunks_exact(cfg.dim)
        .zip(raw_bits.chunks_exact(cfg.dim))
        .map(|(yb, bits)| mdr_encode_block(&CdElement::new(yb)?, bits, cfg))
        .collect()
}

pub fn mdr_decode_frame(x: &[f64], msgs: &[MdrBlockMessage], cfg: &MdrConfig) -> Result<LlrFrame> {
    cfg.validate()?;
    check_frame_len(x.len(), cfg)?;
    if x.len() / cfg.dim != msgs.len() {
        return invalid(format!(
            "{} blocks of samples but {} messages",
            x.len() / cfg.dim,
            msgs.len()
        ));
    }
    let mut llrs = Vec::with_capacity(x.len());
    for (xb, msg) in x.chunks_exact(cfg.dim).zip(msgs) {
        llrs.extend(mdr_decode_block(&CdElement::new(xb)?, msg, cfg)?);
    }
    LlrFrame::new(llrs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    const DIMS: [usize; 4] = [1, 2, 4, 8];

    fn cfg(dim: usize, s2: f64) -> MdrConfig {
        MdrConfig::new(dim, s2).unwrap()
    }

    #[test]
    fn one_dimensional_block_is_a_sign_flip() {
        let msg = mdr_encode_block(&CdElement::new(&[2.0]).unwrap(), &[1], &cfg(1, 1.0)).unwrap();
        assert_eq!(msg.rotation.coords(), &[-1.0]);
        assert_eq!(msg.receiver_norm, 2.0);
        let msg = mdr_encode_block(&CdElement::new(&[-0.5]).unwrap(), &[1], &cfg(1, 1.0)).unwrap();
        assert_eq!(msg.rotation.coords(), &[1.0]);
        let l = mdr_decode_block(&CdElement::new(&[-0.3]).unwrap(), &msg, &cfg(1, 1.0)).unwrap();
        // 2 * 0.5 * (-0.3) / 1
        assert!((l[0] + 0.3).abs() < 1e-15);
    }

    #[test]
    fn two_dimensional_hand_example() {
        let msg = mdr_encode_block(&CdElement::new(&[1.0, 0.0]).unwrap(), &[0, 0], &cfg(2, 1.0)).unwrap();
        let h = 1.0 / 2f64.sqrt();
        assert!((msg.rotation.coords()[0] - h).abs() < 1e-15);
        assert!((msg.rotation.coords()[1] - h).abs() < 1e-15);
        assert_eq!(msg.receiver_norm, 1.0);
    }

    #[test]
    fn rotation_maps_normalized_y_to_u() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for dim in DIMS {
            for _ in 0..200 {
                let y: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
                let bits: Vec<u8> = (0..dim).map(|_| rng.random_range(0..2)).collect();
                let y = CdElement::new(&y).unwrap();
                let msg = mdr_encode_block(&y, &bits, &cfg(dim, 0.5)).unwrap();
                assert!((msg.rotation.norm() - 1.0).abs() < 1e-9);
                let u = msg.rotation.multiply(&y.scale(1.0 / y.norm())).unwrap();
                for (ui, b) in u.coords().iter().zip(&bits) {
                    let expect = if *b == 0 { 1.0 } else { -1.0 } / (dim as f64).sqrt();
                    assert!((ui - expect).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn zero_block_is_rejected() {
        let err = mdr_encode_block(&CdElement::new(&[0.0; 4]).unwrap(), &[0; 4], &cfg(4, 1.0)).unwrap_err();
        assert!(matches!(err, Error::Degenerate(_)));
    }

    #[test]
    fn length_errors() {
        let c = cfg(4, 1.0);
        assert!(mdr_encode_frame(&[1.0; 6], &[0; 6], &c).is_err());
        assert!(mdr_encode_frame(&[1.0; 8], &[0; 4], &c).is_err());
        let msgs = mdr_encode_frame(&[1.0; 8], &[0; 8], &c).unwrap();
        assert!(mdr_decode_frame(&[1.0; 4], &msgs, &c).is_err());
        assert!(mdr_decode_block(&CdElement::new(&[1.0; 2]).unwrap(), &msgs[0], &c).is_err());
        assert!(MdrConfig::new(3, 1.0).is_err());
        assert!(MdrConfig::new(2, 0.0).is_err());
        assert!(MdrConfig::new(2, f64::INFINITY).is_err());
    }

    #[test]
    fn single_octonion_block_per_eight_samples() {
        let y: Vec<f64> = (1..=8).map(f64::from).collect();
        assert_eq!(mdr_encode_frame(&y, &[0; 8], &cfg(8, 1.0)).unwrap().len(), 1);
    }

    #[test]
    fn noiseless_round_trip_all_dims() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for dim in DIMS {
            let n = 64;
            let y: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
            let bits: Vec<u8> = (0..n).map(|_| rng.random_range(0..2)).collect();
            let c = cfg(dim, 1e-3);
            let msgs = mdr_encode_frame(&y, &bits, &c).unwrap();
            let llr = mdr_decode_frame(&y, &msgs, &c).unwrap();
            assert_eq!(llr.hard_decision(), bits);
        }
    }

    #[test]
    fn llr_magnitude_shrinks_with_noise() {
        let y = CdElement::new(&[0.3, -1.2, 0.7, 0.1]).unwrap();
        let msg = mdr_encode_block(&y, &[0, 1, 1, 0], &cfg(4, 1.0)).unwrap();
        let mut prev = f64::INFINITY;
        for s2 in [0.1, 1.0, 10.0, 100.0] {
            let l = mdr_decode_block(&y, &msg, &cfg(4, s2)).unwrap();
            let m = l.iter().map(|v| v.abs()).sum::<f64>();
            assert!(m < prev);
            prev = m;
        }
    }

    #[test]
    fn message_serialization() {
        let y = CdElement::new(&[0.3, -1.2, 0.7, 0.1]).unwrap();
        let msg = mdr_encode_block(&y, &[0, 1, 1, 0], &cfg(4, 1.0)).unwrap();
        let mut buf = Vec::new();
        msg.write_to(&mut buf);
        assert_eq!(buf.len(), MdrBlockMessage::encoded_len(4));
        assert_eq!(&buf[32..], &y.norm().to_le_bytes());
        assert_eq!(MdrBlockMessage::read_from(&buf, 4).unwrap(), msg);
        assert!(MdrBlockMessage::read_from(&buf[..39], 4).is_err());
    }

    #[test]
    fn rotation_components_are_centred() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let trials = 100_000;
        let c = cfg(8, 1.0);
        let bits = [0, 1, 1, 0, 1, 0, 0, 0];
        let mut sums = [0.0; 8];
        for _ in 0..trials {
            let y: Vec<f64> = (0..8).map(|_| rng.sample(StandardNormal)).collect();
            let msg = mdr_encode_block(&CdElement::new(&y).unwrap(), &bits, &c).unwrap();
            assert!((msg.rotation.norm() - 1.0).abs() < 1e-9);
            for (s, r) in sums.iter_mut().zip(msg.rotation.coords()) {
                *s += r;
            }
        }
        // each component has variance 1/8 under a uniform rotation
        let sd = (1.0 / 8.0 / trials as f64).sqrt();
        for s in sums {
            assert!((s / trials as f64).abs() < 4.0 * sd, "mean {}", s / trials as f64);
        }
    }
}
