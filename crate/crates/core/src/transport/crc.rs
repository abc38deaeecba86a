//! CRC-24A (polynomial 0x864CFB), zero initial state, MSB-first.

use crate::error::{Error, Result};

pub const CRC24A_POLY: u32 = 0x86_4CFB;
pub const CRC_LEN: usize = 24;

pub fn crc24a(bits: &[u8]) -> u32 {
    let mut reg: u32 = 0;
    for &b in bits {
        let top = ((reg >> 23) & 1) as u8 ^ (b & 1);
        reg = (reg << 1) & 0xFF_FFFF;
        if top == 1 {
            reg ^= CRC24A_POLY;
        }
    }
    reg
}

/// Appends the 24 parity bits, MSB first. `expected_len` is the transport
/// block size the payload must have.
pub fn crc_attach(payload: &[u8], expected_len: usize) -> Result<Vec<u8>> {
    if payload.len() != expected_len {
        return Err(Error::Dimension {
            what: "transport block",
            expected: expected_len,
            got: payload.len(),
        });
    }
    let crc = crc24a(payload);
    let mut out = Vec::with_capacity(payload.len() + CRC_LEN);
    out.extend_from_slice(payload);
    out.extend((0..CRC_LEN).rev().map(|i| ((crc >> i) & 1) as u8));
    Ok(out)
}

/// True when the trailing 24 bits are the CRC of the rest.
pub fn crc_check(block: &[u8]) -> bool {
    block.len() >= CRC_LEN && crc24a(block) == 0
}
