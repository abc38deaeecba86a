//! Golden-vector files: plain text, one hex-encoded bitstring per line.
//! Bits are packed MSB-first into nibbles; the last nibble is zero-padded.
//! Blank lines and lines starting with `#` are ignored.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

pub fn bits_to_hex(bits: &[u8]) -> String {
    bits.chunks(4)
        .map(|nib| {
            let v = nib.iter().enumerate().fold(0u32, |acc, (i, &b)| acc | ((b as u32 & 1) << (3 - i)));
            char::from_digit(v, 16).unwrap().to_ascii_uppercase()
        })
        .collect()
}

/// Decodes `n_bits` bits from a hex string. Fails if the string is too
/// short or has non-zero padding.
pub fn hex_to_bits(hex: &str, n_bits: usize) -> Option<Vec<u8>> {
    let digits: Vec<u32> = hex.trim().chars().map(|c| c.to_digit(16)).collect::<Option<_>>()?;
    if digits.len() != n_bits.div_ceil(4) {
        return None;
    }
    let bits: Vec<u8> = digits
        .iter()
        .flat_map(|d| (0..4).rev().map(move |i| ((d >> i) & 1) as u8))
        .collect();
    if bits[n_bits..].iter().any(|&b| b != 0) {
        return None;
    }
    Some(bits[..n_bits].to_vec())
}

pub fn write_golden(path: &Path, vectors: &[Vec<u8>]) -> Result<()> {
    let mut text = String::new();
    for v in vectors {
        text.push_str(&bits_to_hex(v));
        text.push('\n');
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Reads every hex line of a golden file.
pub fn read_golden_lines(path: &Path) -> Result<Vec<String>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let lines: Vec<String> = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_owned)
        .collect();
    if let Some(bad) = lines.iter().find(|l| !l.chars().all(|c| c.is_ascii_hexdigit())) {
        return Err(Error::format(path, format!("not a hex line: {bad:?}")));
    }
    Ok(lines)
}
