//! CRC-32 over bit sequences.
//!
//! The bits are packed MSB-first into octets, the last octet zero padded, and
//! run through CRC-32/ISO-HDLC (the zlib/PNG variant). Both parties must use
//! exactly these parameters or honest frames will be rejected.

use std::fmt;

use serde::{Deserialize, Serialize};

/// A 32-bit checksum value.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CrcValue(pub u32);

impl fmt::Debug for CrcValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "CrcValue({:#010x})", self.0)
    }
}

impl CrcValue {
    /// Wire form: four bytes, big-endian.
    pub fn to_be_bytes(self) -> [u8; 4] {
        self.0.to_be_bytes()
    }

    pub fn from_be_bytes(b: [u8; 4]) -> Self {
        Self(u32::from_be_bytes(b))
    }
}

/// Rocksoft-style CRC-32 parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Crc32Params {
    pub poly: u32,
    pub init: u32,
    pub reflect_in: bool,
    pub reflect_out: bool,
    pub xor_out: u32,
}

/// CRC-32/ISO-HDLC: check value 0xCBF43926.
pub const ISO_HDLC: Crc32Params = Crc32Params {
    poly: 0x04C1_1DB7,
    init: 0xFFFF_FFFF,
    reflect_in: true,
    reflect_out: true,
    xor_out: 0xFFFF_FFFF,
};

/// Table-driven CRC-32 engine for one parameter set.
#[derive(Clone)]
pub struct Crc32 {
    params: Crc32Params,
    table: [u32; 256],
}

impl Crc32 {
    pub fn new(params: Crc32Params) -> Self {
        let mut table = [0u32; 256];
        if params.reflect_in {
            let poly = params.poly.reverse_bits();
            for (i, t) in table.iter_mut().enumerate() {
                let mut crc = i as u32;
                for _ in 0..8 {
                    crc = if crc & 1 != 0 { (crc >> 1) ^ poly } else { crc >> 1 };
                }
                *t = crc;
            }
        } else {
            for (i, t) in table.iter_mut().enumerate() {
                let mut crc = (i as u32) << 24;
                for _ in 0..8 {
                    crc = if crc & 0x8000_0000 != 0 {
                        (crc << 1) ^ params.poly
                    } else {
                        crc << 1
                    };
                }
                *t = crc;
            }
        }
        Self { params, table }
    }

    pub fn params(&self) -> Crc32Params {
        self.params
    }

    /// Register contents after feeding `data`, starting from `register`,
    /// before output reflection and the final XOR.
    pub fn update(&self, mut register: u32, data: &[u8]) -> u32 {
        if self.params.reflect_in {
            for &b in data {
                register = (register >> 8) ^ self.table[((register ^ b as u32) & 0xFF) as usize];
            }
        } else {
            for &b in data {
                register = (register << 8) ^ self.table[(((register >> 24) ^ b as u32) & 0xFF) as usize];
            }
        }
        register
    }

    fn finish(&self, register: u32) -> u32 {
        // A reflected register already holds the reflected value.
        let out = if self.params.reflect_in == self.params.reflect_out {
            register
        } else {
            register.reverse_bits()
        };
        out ^ self.params.xor_out
    }

    pub fn checksum(&self, data: &[u8]) -> CrcValue {
        CrcValue(self.finish(self.update(self.params.init, data)))
    }
}

/// Packs bits (one per byte, 0 or 1) MSB-first, zero padding the last octet.
pub fn pack_bits_msb(bits: &[u8]) -> Vec<u8> {
    bits.chunks(8)
        .map(|chunk| {
            chunk
                .iter()
                .enumerate()
                .fold(0u8, |acc, (k, &b)| acc | ((b & 1) << (7 - k)))
        })
        .collect()
}

/// Inverse of [`pack_bits_msb`] for the first `n_bits` bits.
pub fn unpack_bits_msb(bytes: &[u8], n_bits: usize) -> Vec<u8> {
    (0..n_bits).map(|k| (bytes[k / 8] >> (7 - k % 8)) & 1).collect()
}

fn iso_hdlc() -> &'static Crc32 {
    static ENGINE: std::sync::OnceLock<Crc32> = std::sync::OnceLock::new();
    ENGINE.get_or_init(|| Crc32::new(ISO_HDLC))
}

/// CRC-32/ISO-HDLC of a bit sequence.
pub fn crc32_of_bits(bits: &[u8]) -> CrcValue {
    iso_hdlc().checksum(&pack_bits_msb(bits))
}

pub fn crc32_of_bytes(bytes: &[u8]) -> CrcValue {
    iso_hdlc().checksum(bytes)
}

pub fn crc_match(a: CrcValue, b: CrcValue) -> bool {
    a == b
}
