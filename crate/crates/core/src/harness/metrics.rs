//! EVM, BLER and channel MSE accumulation, and the metrics CSV.

use std::fmt::Write as _;
use std::path::Path;

use num_complex::Complex64;

use crate::error::{Error, Result};

/// `100 * sqrt(sum |ideal - measured|^2 / sum |ideal|^2)`.
pub fn evm(ideal: &[Complex64], measured: &[Complex64]) -> Result<f64> {
    if ideal.len() != measured.len() || ideal.is_empty() {
        return Err(Error::Dimension { what: "EVM symbol count", expected: ideal.len().max(1), got: measured.len() });
    }
    let mut acc = EvmAccumulator::default();
    acc.add(ideal, measured);
    acc.percent()
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct EvmAccumulator {
    pub error_power: f64,
    pub reference_power: f64,
}

impl EvmAccumulator {
    pub fn add(&mut self, ideal: &[Complex64], measured: &[Complex64]) {
        for (i, m) in ideal.iter().zip(measured) {
            self.error_power += (i - m).norm_sqr();
            self.reference_power += i.norm_sqr();
        }
    }

    pub fn percent(&self) -> Result<f64> {
        if self.reference_power == 0.0 {
            return Err(Error::ZeroReference);
        }
        Ok(100.0 * (self.error_power / self.reference_power).sqrt())
    }
}

/// Running totals for one (speed, SNR, estimator) point.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PointAccumulator {
    pub blocks: usize,
    pub block_errors: usize,
    pub evm: EvmAccumulator,
    pub mse_sum: f64,
}

impl PointAccumulator {
    pub fn add(&mut self, block_error: bool, ideal: &[Complex64], measured: &[Complex64], mse: f64) {
        self.blocks += 1;
        self.block_errors += block_error as usize;
        self.evm.add(ideal, measured);
        self.mse_sum += mse;
    }

    pub fn finish(&self, speed_kmph: f64, snr_db: f64, estimator: &str) -> Result<MetricsRow> {
        if self.blocks == 0 {
            return Err(Error::InvalidArgument(format!("no blocks at {speed_kmph} km/h, {snr_db} dB")));
        }
        Ok(MetricsRow {
            speed_kmph,
            snr_db,
            estimator: estimator.to_owned(),
            bler: self.block_errors as f64 / self.blocks as f64,
            evm_pct: self.evm.percent()?,
            mse: self.mse_sum / self.blocks as f64,
            blocks: self.blocks,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRow {
    pub speed_kmph: f64,
    pub snr_db: f64,
    pub estimator: String,
    pub bler: f64,
    pub evm_pct: f64,
    pub mse: f64,
    pub blocks: usize,
}

pub const CSV_HEADER: &str = "speed_kmph,snr_db,estimator,bler,evm_pct,mse,blocks";

pub fn to_csv(rows: &[MetricsRow]) -> String {
    let mut s = String::from(CSV_HEADER);
    s.push('\n');
    for r in rows {
        writeln!(s, "{},{},{},{},{},{},{}", r.speed_kmph, r.snr_db, r.estimator, r.bler, r.evm_pct, r.mse, r.blocks).unwrap();
    }
    s
}

pub fn parse_csv(text: &str) -> std::result::Result<Vec<MetricsRow>, String> {
    let mut lines = text.lines();
    if lines.next().map(str::trim) != Some(CSV_HEADER) {
        return Err("missing or unexpected CSV header".into());
    }
    lines
        .filter(|l| !l.trim().is_empty())
        .enumerate()
        .map(|(i, l)| {
            let f: Vec<&str> = l.split(',').collect();
            let bad = || format!("row {}: malformed {l:?}", i + 1);
            if f.len() != 7 {
                return Err(bad());
            }
            let num = |s: &str| s.parse::<f64>().map_err(|_| bad());
            Ok(MetricsRow {
                speed_kmph: num(f[0])?,
                snr_db: num(f[1])?,
                estimator: f[2].to_owned(),
                bler: num(f[3])?,
                evm_pct: num(f[4])?,
                mse: num(f[5])?,
                blocks: f[6].parse().map_err(|_| bad())?,
            })
        })
        .collect()
}

pub fn write_csv(path: &Path, rows: &[MetricsRow]) -> Result<()> {
    std::fs::write(path, to_csv(rows)).map_err(|e| Error::io(path, e))
}

pub fn read_csv(path: &Path) -> Result<Vec<MetricsRow>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_csv(&text).map_err(|r| Error::format(path, r))
}
