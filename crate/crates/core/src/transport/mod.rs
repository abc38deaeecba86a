//! Bit-level chain used to count block errors: CRC-24A, tail-biting
//! convolutional code, circular-buffer rate matching, time interleaving
//! and Gray QPSK.

pub mod convolutional;
pub mod crc;
pub mod golden;
pub mod qpsk;
pub mod rate_match;

use num_complex::Complex64;

use crate::error::{Error, Result};

pub use convolutional::{encode, viterbi_decode};
pub use crc::{crc_attach, crc_check};
pub use qpsk::{hard_demap, qpsk_map, soft_demap};
pub use rate_match::{de_rate_match, rate_match};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransportConfig {
    pub tbs: usize,
    pub crc_len: usize,
    /// Ten data symbols of 576 QPSK symbols, two bits each.
    pub coded_bits_target: usize,
    /// Number of data symbols the interleaver spreads over.
    pub interleaver_columns: usize,
}

impl Default for TransportConfig {
    fn default() -> Self {
        Self {
            tbs: 3496,
            crc_len: crc::CRC_LEN,
            coded_bits_target: 10 * 576 * 2,
            interleaver_columns: 10,
        }
    }
}

impl TransportConfig {
    pub fn validate(&self) -> Result<()> {
        if self.crc_len != crc::CRC_LEN {
            return Err(Error::Unsupported(format!("only a {}-bit CRC is implemented", crc::CRC_LEN)));
        }
        if self.tbs + self.crc_len > self.coded_bits_target {
            return Err(Error::InvalidArgument(format!(
                "block of {} bits does not fit in {} coded bits",
                self.tbs + self.crc_len,
                self.coded_bits_target
            )));
        }
        if self.coded_bits_target % (2 * self.interleaver_columns) != 0 {
            return Err(Error::InvalidArgument(
                "coded bits must fill whole interleaver rows of QPSK symbols".into(),
            ));
        }
        Ok(())
    }

    pub fn coded_len(&self) -> usize {
        3 * (self.tbs + self.crc_len)
    }

    pub fn n_symbols(&self) -> usize {
        self.coded_bits_target / 2
    }
}

/// Result of decoding one transport block.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Decoded {
    pub payload: Vec<u8>,
    pub crc_ok: bool,
}

/// Payload bits to interleaved QPSK symbols, in grid data order.
pub fn encode_block(payload: &[u8], cfg: &TransportConfig) -> Result<Vec<Complex64>> {
    cfg.validate()?;
    let block = crc_attach(payload, cfg.tbs)?;
    let matched = rate_match(&encode(&block), cfg.coded_bits_target)?;
    rate_match::interleave(&qpsk_map(&matched)?, cfg.interleaver_columns)
}

/// LLRs in grid data order (two per QPSK symbol) to payload and CRC verdict.
pub fn decode_block(llrs: &[f32], cfg: &TransportConfig) -> Result<Decoded> {
    if llrs.len() != cfg.coded_bits_target {
        return Err(Error::Dimension {
            what: "LLR count",
            expected: cfg.coded_bits_target,
            got: llrs.len(),
        });
    }
    let pairs: Vec<[f32; 2]> = llrs.chunks_exact(2).map(|p| [p[0], p[1]]).collect();
    let ordered: Vec<f32> = rate_match::deinterleave(&pairs, cfg.interleaver_columns)?
        .into_iter()
        .flatten()
        .collect();
    let block = viterbi_decode(&de_rate_match(&ordered, cfg.coded_len()));
    Ok(Decoded {
        crc_ok: crc_check(&block),
        payload: block[..cfg.tbs].to_vec(),
    })
}

/// A block is in error if any payload bit differs or the CRC failed.
pub fn block_error(tx_payload: &[u8], rx_payload: &[u8], crc_ok: bool) -> bool {
    !crc_ok || tx_payload != rx_payload
}
