//! Time-varying multipath channel: EVA tapped delay line with Jakes Doppler
//! (sum of sinusoids), independent fading per receive antenna, and AWGN.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::grid::{ResourceGrid, N_SUBCARRIERS, N_SYMBOLS};
use crate::scfdma::{ModemConfig, Waveform};

pub const SPEED_OF_LIGHT: f64 = 2.998e8;
pub const DEFAULT_CARRIER_HZ: f64 = 5.9e9;
pub const SINUSOIDS_PER_TAP: usize = 32;

/// Gains are evaluated exactly every this many samples and linearly
/// interpolated in between.
const GAIN_STEP: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tap {
    pub delay_ns: f64,
    pub power_db: f64,
}

/// Extended Vehicular A power delay profile.
pub fn eva_profile() -> Vec<Tap> {
    const EVA: [(f64, f64); 9] = [
        (0.0, 0.0),
        (30.0, -1.5),
        (150.0, -1.4),
        (310.0, -3.6),
        (370.0, -0.6),
        (710.0, -9.1),
        (1090.0, -7.0),
        (1730.0, -12.0),
        (2510.0, -16.9),
    ];
    EVA.iter()
        .map(|&(delay_ns, power_db)| Tap { delay_ns, power_db })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelConfig {
    pub profile: Vec<Tap>,
    pub speed_kmph: f64,
    pub carrier_freq: f64,
    pub n_rx: usize,
    pub seed: u64,
    /// `None` disables noise.
    pub snr_db: Option<f64>,
}

impl Default for ChannelConfig {
    fn default() -> Self {
        Self {
            profile: eva_profile(),
            speed_kmph: 100.0,
            carrier_freq: DEFAULT_CARRIER_HZ,
            n_rx: 2,
            seed: 0,
            snr_db: None,
        }
    }
}

impl ChannelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.profile.is_empty() {
            return Err(Error::InvalidArgument("empty delay profile".into()));
        }
        if self.n_rx == 0 {
            return Err(Error::InvalidArgument("need at least one receive antenna".into()));
        }
        if !(self.carrier_freq > 0.0) {
            return Err(Error::InvalidArgument("carrier frequency must be positive".into()));
        }
        doppler_from_speed(self.speed_kmph, self.carrier_freq).map(|_| ())
    }

    /// Linear tap powers scaled to sum to one.
    pub fn normalized_powers(&self) -> Vec<f64> {
        let lin: Vec<f64> = self.profile.iter().map(|t| 10f64.powf(t.power_db / 10.0)).collect();
        let total: f64 = lin.iter().sum();
        lin.iter().map(|p| p / total).collect()
    }

    /// Tap delays rounded to whole samples.
    pub fn delay_samples(&self, sample_rate: f64) -> Vec<usize> {
        self.profile
            .iter()
            .map(|t| (t.delay_ns * 1e-9 * sample_rate).round() as usize)
            .collect()
    }
}

/// Maximum Doppler shift for a speed in km/h.
pub fn doppler_from_speed(speed_kmph: f64, carrier_hz: f64) -> Result<f64> {
    if !(speed_kmph >= 0.0) {
        return Err(Error::InvalidArgument(format!("negative speed {speed_kmph} km/h")));
    }
    Ok(speed_kmph / 3.6 * carrier_hz / SPEED_OF_LIGHT)
}

/// One Rayleigh-faded tap: `g(t) = sqrt(P/N) * sum_n exp(j(2*pi*fd*cos(a_n)*t + phi_n))`
/// with arrival angles `a_n = (2*pi*n + theta)/N`, a random offset `theta`
/// and random phases `phi_n`.
#[derive(Debug, Clone)]
pub struct FadingTap {
    amplitude: f64,
    omegas: Vec<f64>,
    phases: Vec<f64>,
}

impl FadingTap {
    pub fn new(power: f64, doppler_hz: f64, rng: &mut impl Rng) -> Self {
        let n = SINUSOIDS_PER_TAP;
        let theta = rng.random_range(-PI..PI);
        let omegas = (0..n)
            .map(|i| 2.0 * PI * doppler_hz * ((2.0 * PI * i as f64 + theta) / n as f64).cos())
            .collect();
        let phases = (0..n).map(|_| rng.random_range(0.0..2.0 * PI)).collect();
        Self {
            amplitude: (power / n as f64).sqrt(),
            omegas,
            phases,
        }
    }

    pub fn gain_at(&self, t: f64) -> Complex64 {
        let sum: Complex64 = self
            .omegas
            .iter()
            .zip(&self.phases)
            .map(|(w, p)| Complex64::from_polar(1.0, w * t + p))
            .sum();
        sum * self.amplitude
    }

    /// Gains at `t0 + i*dt` for `i in 0..count`, by phasor recursion.
    pub fn gains_uniform(&self, t0: f64, dt: f64, count: usize) -> Vec<Complex64> {
        let mut phasors: Vec<Complex64> = self
            .omegas
            .iter()
            .zip(&self.phases)
            .map(|(w, p)| Complex64::from_polar(self.amplitude, w * t0 + p))
            .collect();
        let steps: Vec<Complex64> = self.omegas.iter().map(|w| Complex64::from_polar(1.0, w * dt)).collect();
        let mut out = Vec::with_capacity(count);
        for _ in 0..count {
            out.push(phasors.iter().sum());
            phasors.iter_mut().zip(&steps).for_each(|(p, s)| *p *= s);
        }
        out
    }
}

/// Ground truth for one propagated subframe.
#[derive(Debug, Clone)]
pub struct ChannelRealization {
    /// Frequency response per receive antenna, sampled at each symbol's FFT-window midpoint.
    pub h: Vec<ResourceGrid>,
    /// Tap gains per antenna, per tap, at each symbol midpoint.
    pub tap_gains: Vec<Vec<[Complex64; N_SYMBOLS]>>,
    pub delays: Vec<usize>,
    pub doppler_hz: f64,
}

/// Draws the faded taps for every receive antenna from `cfg.seed`.
pub fn draw_taps(cfg: &ChannelConfig) -> Result<Vec<Vec<FadingTap>>> {
    cfg.validate()?;
    let fd = doppler_from_speed(cfg.speed_kmph, cfg.carrier_freq)?;
    let powers = cfg.normalized_powers();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    Ok((0..cfg.n_rx)
        .map(|_| powers.iter().map(|&p| FadingTap::new(p, fd, &mut rng)).collect())
        .collect())
}

/// Frequency response of a set of taps on the allocated subcarriers.
pub fn frequency_response(gains: &[Complex64], delays: &[usize], modem: &ModemConfig) -> Vec<Complex64> {
    let n = modem.fft_size as f64;
    (0..N_SUBCARRIERS)
        .map(|k| {
            let bin = modem.subcarrier_bin(k) as f64;
            gains
                .iter()
                .zip(delays)
                .map(|(g, &d)| g * Complex64::from_polar(1.0, -2.0 * PI * bin * d as f64 / n))
                .sum()
        })
        .collect()
}

/// Passes one subframe through the faded tapped delay line of every
/// receive antenna. Samples before the subframe start are taken as zero.
pub fn propagate(wf: &Waveform, cfg: &ChannelConfig, modem: &ModemConfig) -> Result<(Vec<Waveform>, ChannelRealization)> {
    let expected = modem.samples_per_subframe();
    if wf.samples.len() != expected {
        return Err(Error::Dimension {
            what: "waveform length",
            expected,
            got: wf.samples.len(),
        });
    }
    let taps = draw_taps(cfg)?;
    let fs = modem.sample_rate;
    let delays = cfg.delay_samples(fs);
    let n = wf.samples.len();
    let n_coarse = n / GAIN_STEP + 2;
    let mids = modem.symbol_midpoints();

    let mut outputs = Vec::with_capacity(cfg.n_rx);
    let mut h = Vec::with_capacity(cfg.n_rx);
    let mut tap_gains = Vec::with_capacity(cfg.n_rx);
    for ant_taps in &taps {
        let mut y = vec![Complex64::new(0.0, 0.0); n];
        for (tap, &d) in ant_taps.iter().zip(&delays) {
            let coarse = tap.gains_uniform(0.0, GAIN_STEP as f64 / fs, n_coarse);
            for (i, out) in y.iter_mut().enumerate().skip(d) {
                let c = i / GAIN_STEP;
                let frac = (i % GAIN_STEP) as f64 / GAIN_STEP as f64;
                let g = coarse[c] + (coarse[c + 1] - coarse[c]) * frac;
                *out += g * wf.samples[i - d];
            }
        }
        outputs.push(Waveform { samples: y, sample_rate: fs });

        let mut per_tap = Vec::with_capacity(ant_taps.len());
        for tap in ant_taps {
            let mut g = [Complex64::new(0.0, 0.0); N_SYMBOLS];
            for (s, &m) in mids.iter().enumerate() {
                g[s] = tap.gain_at(m / fs);
            }
            per_tap.push(g);
        }
        let mut grid = ResourceGrid::zeros();
        for s in 0..N_SYMBOLS {
            let gains: Vec<Complex64> = per_tap.iter().map(|g| g[s]).collect();
            grid.column_mut(s).copy_from_slice(&frequency_response(&gains, &delays, modem));
        }
        h.push(grid);
        tap_gains.push(per_tap);
    }
    Ok((
        outputs,
        ChannelRealization {
            h,
            tap_gains,
            delays,
            doppler_hz: doppler_from_speed(cfg.speed_kmph, cfg.carrier_freq)?,
        },
    ))
}

/// Noise variance for an SNR in dB against a reference signal power.
pub fn noise_variance(snr_db: f64, signal_power_ref: f64) -> f64 {
    signal_power_ref / 10f64.powf(snr_db / 10.0)
}

/// Adds circularly-symmetric complex Gaussian noise. `snr_db = None` (or
/// `+inf`) leaves the waveform untouched.
pub fn add_awgn(wf: &Waveform, snr_db: Option<f64>, signal_power_ref: f64, seed: u64) -> Waveform {
    let var = match snr_db {
        Some(snr) if snr.is_finite() => noise_variance(snr, signal_power_ref),
        _ => return wf.clone(),
    };
    let sigma = (var / 2.0).sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let samples = wf
        .samples
        .iter()
        .map(|&s| {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            s + Complex64::new(re, im) * sigma
        })
        .collect();
    Waveform {
        samples,
        sample_rate: wf.sample_rate,
    }
}
