//! Run configuration and its plain-text `key=value` file format.
//!
//! Lines are `key=value`; blank lines and lines starting with `#` are
//! ignored. Lists are comma separated and numeric ranges may be written
//! `start:step:stop` (inclusive).

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::chanest::{EqualizerMode, DEFAULT_WINDOW};
use crate::channel::DEFAULT_CARRIER_HZ;
use crate::error::{Error, Result};
use crate::grid::N_PRB;
use crate::nn::{AdamConfig, TrainConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Estimator {
    Perfect,
    Ls,
    Ann,
}

impl Estimator {
    pub const ALL: [Estimator; 3] = [Estimator::Perfect, Estimator::Ls, Estimator::Ann];

    pub fn name(self) -> &'static str {
        match self {
            Estimator::Perfect => "perfect",
            Estimator::Ls => "ls",
            Estimator::Ann => "ann",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|e| e.name() == s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DelayProfile {
    Eva,
    /// Single zero-delay tap.
    Flat,
}

impl DelayProfile {
    pub fn name(self) -> &'static str {
        match self {
            DelayProfile::Eva => "eva",
            DelayProfile::Flat => "flat",
        }
    }
}

/// Which records `eval` scores.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvalRecords {
    /// Only records outside the training split.
    Holdout,
    All,
}

impl EvalRecords {
    pub fn name(self) -> &'static str {
        match self {
            EvalRecords::Holdout => "holdout",
            EvalRecords::All => "all",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub bandwidth_mhz: f64,
    pub nslrb: usize,
    pub tbs: usize,
    pub n_subframes: usize,
    pub snr_db: Vec<f64>,
    pub speeds_kmph: Vec<f64>,
    pub modulation: String,
    pub delay_profile: DelayProfile,
    pub n_rx: usize,
    pub carrier_freq_hz: f64,
    pub seed: u64,
    pub estimators: Vec<Estimator>,
    pub equalizer: EqualizerMode,
    pub avg_window: (usize, usize),
    pub dmrs_root: usize,
    pub dmrs_cyclic_shift: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub train_split: f64,
    pub adam: AdamConfig,
    pub eval_records: EvalRecords,
    pub out_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        let train = TrainConfig::default();
        Self {
            bandwidth_mhz: 10.0,
            nslrb: N_PRB,
            tbs: 3496,
            n_subframes: 500,
            snr_db: (-2..=5).map(f64::from).collect(),
            speeds_kmph: vec![100.0, 200.0, 300.0, 400.0],
            modulation: "qpsk".into(),
            delay_profile: DelayProfile::Eva,
            n_rx: 2,
            carrier_freq_hz: DEFAULT_CARRIER_HZ,
            seed: 1,
            estimators: Estimator::ALL.to_vec(),
            equalizer: EqualizerMode::MrcNormalized,
            avg_window: DEFAULT_WINDOW,
            dmrs_root: 25,
            dmrs_cyclic_shift: 0.0,
            epochs: train.epochs,
            batch_size: train.batch_size,
            train_split: train.train_split,
            adam: train.adam,
            eval_records: EvalRecords::All,
            out_dir: PathBuf::from("out"),
        }
    }
}

fn parse_f64(s: &str) -> std::result::Result<f64, String> {
    s.trim().parse().map_err(|_| format!("{s:?} is not a number"))
}

fn parse_usize(s: &str) -> std::result::Result<usize, String> {
    s.trim().parse().map_err(|_| format!("{s:?} is not a non-negative integer"))
}

fn parse_bool(s: &str) -> std::result::Result<bool, String> {
    match s.trim() {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        other => Err(format!("{other:?} is not a boolean")),
    }
}

/// `a,b,c` or `start:step:stop`, or a mix: `-2:1:0,5`.
pub fn parse_number_list(s: &str) -> std::result::Result<Vec<f64>, String> {
    let mut out = Vec::new();
    for item in s.split(',').map(str::trim).filter(|t| !t.is_empty()) {
        let parts: Vec<&str> = item.split(':').collect();
        match parts.as_slice() {
            [v] => out.push(parse_f64(v)?),
            [a, step, b] => {
                let (a, step, b) = (parse_f64(a)?, parse_f64(step)?, parse_f64(b)?);
                if !(step > 0.0) || !a.is_finite() || !b.is_finite() {
                    return Err(format!("bad range {item:?}"));
                }
                let n = ((b - a) / step + 1e-9).floor();
                if n < 0.0 || n > 1e6 {
                    return Err(format!("bad range {item:?}"));
                }
                out.extend((0..=n as usize).map(|i| a + step * i as f64));
            }
            _ => return Err(format!("bad list item {item:?}")),
        }
    }
    if out.is_empty() {
        return Err("empty list".into());
    }
    Ok(out)
}

fn join(v: &[f64]) -> String {
    v.iter().map(f64::to_string).collect::<Vec<_>>().join(",")
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::Config {
                line: i + 1,
                reason: format!("expected key=value, got {line:?}"),
            })?;
            let key = key.trim();
            cfg.set(key, value.trim()).map_err(|reason| Error::Config {
                line: i + 1,
                reason: if reason.starts_with("unknown key") { reason } else { format!("{key}: {reason}") },
            })?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text).map_err(|e| match e {
            Error::Config { line, reason } => Error::format(path, format!("line {line}: {reason}")),
            other => other,
        })
    }

    /// Applies one `key=value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> std::result::Result<(), String> {
        match key {
            "bandwidth_mhz" => self.bandwidth_mhz = parse_f64(value)?,
            "nslrb" => self.nslrb = parse_usize(value)?,
            "tbs" => self.tbs = parse_usize(value)?,
            "n_subframes" => self.n_subframes = parse_usize(value)?,
            "snr_db" => self.snr_db = parse_number_list(value)?,
            "speeds_kmph" => self.speeds_kmph = parse_number_list(value)?,
            "modulation" => self.modulation = value.to_ascii_lowercase(),
            "delay_profile" => {
                self.delay_profile = match value.to_ascii_lowercase().as_str() {
                    "eva" => DelayProfile::Eva,
                    "flat" => DelayProfile::Flat,
                    other => return Err(format!("unknown delay profile {other:?}")),
                }
            }
            "mimo" => {
                let (tx, rx) = value.split_once(['x', 'X']).ok_or(format!("mimo must look like 1x2, got {value:?}"))?;
                if parse_usize(tx)? != 1 {
                    return Err("only one transmit antenna is supported".into());
                }
                self.n_rx = parse_usize(rx)?;
            }
            "carrier_freq_hz" => self.carrier_freq_hz = parse_f64(value)?,
            "seed" => self.seed = value.parse().map_err(|_| format!("{value:?} is not a u64 seed"))?,
            "estimators" => {
                self.estimators = value
                    .split(',')
                    .map(|s| Estimator::parse(s.trim()).ok_or(format!("unknown estimator {s:?}")))
                    .collect::<std::result::Result<_, _>>()?
            }
            "equalizer" => self.equalizer = value.parse().map_err(|e: Error| e.to_string())?,
            "avg_window_freq" => self.avg_window.0 = parse_usize(value)?,
            "avg_window_time" => self.avg_window.1 = parse_usize(value)?,
            "dmrs_root" => self.dmrs_root = parse_usize(value)?,
            "dmrs_cyclic_shift" => self.dmrs_cyclic_shift = parse_f64(value)?,
            "epochs" => self.epochs = parse_usize(value)?,
            "batch_size" => self.batch_size = parse_usize(value)?,
            "train_split" => self.train_split = parse_f64(value)?,
            "learning_rate" => self.adam.learning_rate = parse_f64(value)?,
            "beta1" => self.adam.beta1 = parse_f64(value)?,
            "beta2" => self.adam.beta2 = parse_f64(value)?,
            "epsilon" => self.adam.epsilon = parse_f64(value)?,
            "adam_bias_correction" => self.adam.bias_correction = parse_bool(value)?,
            "eval_records" => {
                self.eval_records = match value {
                    "holdout" => EvalRecords::Holdout,
                    "all" => EvalRecords::All,
                    other => return Err(format!("eval_records must be holdout or all, got {other:?}")),
                }
            }
            "out_dir" => self.out_dir = PathBuf::from(value),
            other => return Err(format!("unknown key {other:?}")),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if self.bandwidth_mhz != 10.0 || self.nslrb != N_PRB {
            return Err(Error::Unsupported(format!(
                "only the 10 MHz / {N_PRB} PRB numerology is implemented (got {} MHz, {} PRB)",
                self.bandwidth_mhz, self.nslrb
            )));
        }
        if self.modulation != "qpsk" {
            return Err(Error::Unsupported(format!("modulation {:?}", self.modulation)));
        }
        if self.n_subframes == 0 || self.n_rx == 0 {
            return Err(Error::InvalidArgument("n_subframes and receive antennas must be positive".into()));
        }
        if self.snr_db.iter().any(|s| s.is_nan() || *s == f64::NEG_INFINITY) {
            return Err(Error::InvalidArgument("SNR values must be numbers or inf".into()));
        }
        if self.speeds_kmph.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::InvalidArgument("speeds must be finite and non-negative".into()));
        }
        if self.estimators.is_empty() {
            return Err(Error::InvalidArgument("no estimator selected".into()));
        }
        if !(self.train_split > 0.0 && self.train_split <= 1.0) {
            return Err(Error::InvalidArgument("train_split must be in (0, 1]".into()));
        }
        if self.batch_size < 2 {
            return Err(Error::InvalidArgument("batch_size must be at least 2".into()));
        }
        self.transport().validate()
    }

    pub fn transport(&self) -> crate::transport::TransportConfig {
        crate::transport::TransportConfig { tbs: self.tbs, ..Default::default() }
    }

    pub fn train_config(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            epochs: self.epochs,
            batch_size: self.batch_size,
            train_split: self.train_split,
            seed,
            adam: self.adam.clone(),
        }
    }

    /// Every setting as `key=value` lines in a form [`RunConfig::parse`] accepts.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let mut kv = |k: &str, v: String| writeln!(s, "{k}={v}").unwrap();
        kv("bandwidth_mhz", self.bandwidth_mhz.to_string());
        kv("nslrb", self.nslrb.to_string());
        kv("tbs", self.tbs.to_string());
        kv("n_subframes", self.n_subframes.to_string());
        kv("snr_db", join(&self.snr_db));
        kv("speeds_kmph", join(&self.speeds_kmph));
        kv("modulation", self.modulation.clone());
        kv("delay_profile", self.delay_profile.name().into());
        kv("mimo", format!("1x{}", self.n_rx));
        kv("carrier_freq_hz", self.carrier_freq_hz.to_string());
        kv("seed", self.seed.to_string());
        kv("estimators", self.estimators.iter().map(|e| e.name()).collect::<Vec<_>>().join(","));
        kv("equalizer", self.equalizer.name().into());
        kv("avg_window_freq", self.avg_window.0.to_string());
        kv("avg_window_time", self.avg_window.1.to_string());
        kv("dmrs_root", self.dmrs_root.to_string());
        kv("dmrs_cyclic_shift", self.dmrs_cyclic_shift.to_string());
        kv("epochs", self.epochs.to_string());
        kv("batch_size", self.batch_size.to_string());
        kv("train_split", self.train_split.to_string());
        kv("learning_rate", self.adam.learning_rate.to_string());
        kv("beta1", self.adam.beta1.to_string());
        kv("beta2", self.adam.beta2.to_string());
        kv("epsilon", self.adam.epsilon.to_string());
        kv("adam_bias_correction", self.adam.bias_correction.to_string());
        kv("eval_records", self.eval_records.name().into());
        kv("out_dir", self.out_dir.display().to_string());
        s
    }
}
