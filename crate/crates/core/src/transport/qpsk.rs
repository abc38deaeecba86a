//! Gray-mapped unit-energy QPSK: the first bit of a pair drives the
//! in-phase sign and the second the quadrature sign, with bit 0 mapping to
//! +1/sqrt(2). So `00 -> (1+j)/sqrt(2)`, `10 -> (-1+j)/sqrt(2)`,
//! `01 -> (1-j)/sqrt(2)`, `11 -> (-1-j)/sqrt(2)`.

use std::f64::consts::FRAC_1_SQRT_2;

use num_complex::Complex64;

use crate::error::{Error, Result};

pub fn qpsk_map(bits: &[u8]) -> Result<Vec<Complex64>> {
    if bits.len() % 2 != 0 {
        return Err(Error::Dimension {
            what: "QPSK bit count (must be even)",
            expected: bits.len() + 1,
            got: bits.len(),
        });
    }
    let amp = |b: u8| if b & 1 == 0 { FRAC_1_SQRT_2 } else { -FRAC_1_SQRT_2 };
    Ok(bits.chunks_exact(2).map(|p| Complex64::new(amp(p[0]), amp(p[1]))).collect())
}

pub fn hard_demap(symbols: &[Complex64]) -> Vec<u8> {
    symbols
        .iter()
        .flat_map(|s| [(s.re < 0.0) as u8, (s.im < 0.0) as u8])
        .collect()
}

/// Exact LLRs (`log P(0)/P(1)`) for Gray QPSK in complex Gaussian noise of
/// total variance `noise_var`. Max-log and exact coincide for this mapping.
pub fn soft_demap(symbols: &[Complex64], noise_var: f64) -> Vec<f32> {
    let mut out = Vec::with_capacity(2 * symbols.len());
    soft_demap_into(symbols, noise_var, &mut out);
    out
}

pub fn soft_demap_into(symbols: &[Complex64], noise_var: f64, out: &mut Vec<f32>) {
    let scale = 2.0 * std::f64::consts::SQRT_2 / noise_var.max(1e-12);
    for s in symbols {
        out.push((scale * s.re) as f32);
        out.push((scale * s.im) as f32);
    }
}
