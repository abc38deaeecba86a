//! DMRS generation from cyclically extended Zadoff-Chu base sequences.
//!
//! Group/sequence hopping is not modelled: the root `q` and cyclic shift
//! `alpha` are configured directly and every DMRS symbol of the subframe
//! carries the same sequence.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::{DMRS_SYMBOLS, N_SC_PER_PRB, N_SUBCARRIERS};

/// Shortest sequence built from a Zadoff-Chu root (three PRBs).
pub const MIN_ZC_SEQUENCE_LEN: usize = 3 * N_SC_PER_PRB;

#[derive(Debug, Clone, PartialEq)]
pub struct DmrsConfig {
    pub m_sc: usize,
    /// Sequence-group number. Recorded only; `q` is configured directly.
    pub group_index: u32,
    /// Base-sequence number within the group. Recorded only.
    pub sequence_index: u32,
    pub root: usize,
    pub cyclic_shift: f64,
}

impl Default for DmrsConfig {
    fn default() -> Self {
        Self {
            m_sc: N_SUBCARRIERS,
            group_index: 0,
            sequence_index: 0,
            root: 25,
            cyclic_shift: 0.0,
        }
    }
}

impl DmrsConfig {
    pub fn validate(&self) -> Result<usize> {
        if self.m_sc % N_SC_PER_PRB != 0 {
            return Err(Error::InvalidArgument(format!(
                "DMRS length {} is not a multiple of {N_SC_PER_PRB}",
                self.m_sc
            )));
        }
        let n_zc = zc_length(self.m_sc)?;
        if self.root == 0 || self.root >= n_zc || gcd(self.root, n_zc) != 1 {
            return Err(Error::InvalidArgument(format!(
                "root {} must be coprime with and below {n_zc}",
                self.root
            )));
        }
        if !(0.0..2.0 * PI).contains(&self.cyclic_shift) {
            return Err(Error::InvalidArgument(format!(
                "cyclic shift {} outside [0, 2pi)",
                self.cyclic_shift
            )));
        }
        Ok(n_zc)
    }
}

fn gcd(mut a: usize, mut b: usize) -> usize {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

fn is_prime(n: usize) -> bool {
    if n < 2 {
        return false;
    }
    let mut d = 2;
    while d * d <= n {
        if n % d == 0 {
            return false;
        }
        d += 1;
    }
    true
}

/// Largest prime strictly below `m_sc`.
pub fn zc_length(m_sc: usize) -> Result<usize> {
    if m_sc < MIN_ZC_SEQUENCE_LEN {
        return Err(Error::Unsupported(format!(
            "DMRS length {m_sc} needs a computer-generated base sequence (below {MIN_ZC_SEQUENCE_LEN})"
        )));
    }
    Ok((2..m_sc).rev().find(|&n| is_prime(n)).expect("m_sc >= 36 has a prime below it"))
}

/// `x_q(m) = exp(-j*pi*q*m*(m+1)/n_zc)` for `m` in `0..n_zc`.
pub fn zc_root_sequence(q: usize, n_zc: usize) -> Result<Vec<Complex64>> {
    if q == 0 || q >= n_zc {
        return Err(Error::InvalidArgument(format!(
            "root {q} outside [1, {n_zc})"
        )));
    }
    Ok((0..n_zc)
        .map(|m| {
            // reduce q*m*(m+1) mod 2*n_zc exactly before converting to a phase
            let k = ((q as u128 * m as u128 * (m as u128 + 1)) % (2 * n_zc as u128)) as f64;
            Complex64::from_polar(1.0, -PI * k / n_zc as f64)
        })
        .collect())
}

/// Cyclic extension of the root sequence to `m_sc` elements.
pub fn base_sequence(q: usize, m_sc: usize) -> Result<Vec<Complex64>> {
    let n_zc = zc_length(m_sc)?;
    let root = zc_root_sequence(q, n_zc)?;
    Ok((0..m_sc).map(|n| root[n % n_zc]).collect())
}

pub fn apply_cyclic_shift(base: &[Complex64], alpha: f64) -> Vec<Complex64> {
    base.iter()
        .enumerate()
        .map(|(n, &r)| r * Complex64::from_polar(1.0, alpha * n as f64))
        .collect()
}

/// The four DMRS sequences of one subframe, one per DMRS symbol.
pub fn dmrs_for_subframe(cfg: &DmrsConfig) -> Result<Vec<Vec<Complex64>>> {
    cfg.validate()?;
    let seq = apply_cyclic_shift(&base_sequence(cfg.root, cfg.m_sc)?, cfg.cyclic_shift);
    Ok(vec![seq; DMRS_SYMBOLS.len()])
}

/// Periodic cross-correlation `sum_n a[n] * conj(b[(n + lag) mod N])` for every lag.
pub fn periodic_correlation(a: &[Complex64], b: &[Complex64]) -> Vec<Complex64> {
    let n = a.len();
    assert_eq!(n, b.len());
    (0..n)
        .map(|lag| (0..n).map(|i| a[i] * b[(i + lag) % n].conj()).sum())
        .collect()
}
