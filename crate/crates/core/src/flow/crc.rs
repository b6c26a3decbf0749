//! Parameterized CRC-16.
//!
//! Follows the usual "Rocksoft" parameter model: an MSB-first register with
//! optional input/output reflection and a final XOR. The default parameters
//! are CRC-16/CCITT-FALSE.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(default)]
pub struct HashParams {
    pub polynomial: u16,
    pub init: u16,
    pub reflect_in: bool,
    pub reflect_out: bool,
    pub final_xor: u16,
}

impl HashParams {
    pub const CCITT_FALSE: HashParams = HashParams {
        polynomial: 0x1021,
        init: 0xFFFF,
        reflect_in: false,
        reflect_out: false,
        final_xor: 0x0000,
    };
}

impl Default for HashParams {
    fn default() -> Self {
        HashParams::CCITT_FALSE
    }
}

/// Table-driven CRC-16 engine for one parameter set.
#[derive(Debug, Clone)]
pub struct Crc16 {
    params: HashParams,
    table: [u16; 256],
}

impl Crc16 {
    pub fn new(params: HashParams) -> Self {
        let mut table = [0u16; 256];
        for (i, slot) in table.iter_mut().enumerate() {
            let mut crc = (i as u16) << 8;
            for _ in 0..8 {
                crc = if crc & 0x8000 != 0 {
                    (crc << 1) ^ params.polynomial
                } else {
                    crc << 1
                };
            }
            *slot = crc;
        }
        Crc16 { params, table }
    }

    pub fn params(&self) -> &HashParams {
        &self.params
    }

    pub fn checksum(&self, bytes: &[u8]) -> u16 {
        let mut crc = self.params.init;
        for &b in bytes {
            let b = if self.params.reflect_in {
                b.reverse_bits()
            } else {
                b
            };
            let idx = ((crc >> 8) as u8 ^ b) as usize;
            crc = (crc << 8) ^ self.table[idx];
        }
        if self.params.reflect_out {
            crc = crc.reverse_bits();
        }
        crc ^ self.params.final_xor
    }
}

impl Default for Crc16 {
    fn default() -> Self {
        Crc16::new(HashParams::default())
    }
}

/// One-shot CRC-16. Builds the lookup table on every call; keep a [`Crc16`]
/// around when hashing many keys.
pub fn crc16(bytes: &[u8], params: &HashParams) -> u16 {
    Crc16::new(*params).checksum(bytes)
}
