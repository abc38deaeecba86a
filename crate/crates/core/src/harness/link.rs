//! One subframe through the whole link: transport coding, grid mapping,
//! SC-FDMA, fading and noise, then estimation, equalization and decoding.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::{DelayProfile, RunConfig};
use super::dataset::Record;
use super::seed::{item_seed, Purpose};
use crate::chanest::{average_2d, equalize, estimate_all, interpolate_grid, ls_at_pilots, noise_level, EqualizerMode};
use crate::channel::{add_awgn, eva_profile, noise_variance, propagate, ChannelConfig, ChannelRealization, Tap};
use crate::dmrs::{dmrs_for_subframe, DmrsConfig};
use crate::error::Result;
use crate::grid::{data_symbol_indices, map_subframe, GridConfig, ResourceGrid};
use crate::scfdma::{Modem, ModemConfig, Waveform};
use crate::transport::{decode_block, encode_block, qpsk::soft_demap_into, Decoded, TransportConfig};

/// Average symbol power on every occupied resource element.
pub const SIGNAL_POWER_REF: f64 = 1.0;

/// Static parts of the link, built once per run.
#[derive(Debug, Clone)]
pub struct Link {
    pub modem: Modem,
    pub grid: GridConfig,
    pub dmrs: Vec<Vec<Complex64>>,
    pub transport: TransportConfig,
    pub profile: Vec<Tap>,
    pub n_rx: usize,
    pub carrier_freq: f64,
    pub window: (usize, usize),
    pub equalizer: EqualizerMode,
}

/// Decoder output plus the equalized, de-spread data symbols in grid data
/// order.
#[derive(Debug, Clone)]
pub struct Reception {
    pub decoded: Decoded,
    pub symbols: Vec<Complex64>,
}

/// True noise variance per resource element, zero when noise is off.
pub fn true_noise_variance(snr_db: f64) -> f64 {
    if snr_db.is_finite() {
        noise_variance(snr_db, SIGNAL_POWER_REF)
    } else {
        0.0
    }
}

impl Link {
    pub fn new(cfg: &RunConfig) -> Result<Self> {
        cfg.validate()?;
        let dmrs_cfg = DmrsConfig { root: cfg.dmrs_root, cyclic_shift: cfg.dmrs_cyclic_shift, ..Default::default() };
        Ok(Self {
            modem: Modem::new(ModemConfig::default())?,
            grid: GridConfig::default(),
            dmrs: dmrs_for_subframe(&dmrs_cfg)?,
            transport: cfg.transport(),
            profile: match cfg.delay_profile {
                DelayProfile::Eva => eva_profile(),
                DelayProfile::Flat => vec![Tap { delay_ns: 0.0, power_db: 0.0 }],
            },
            n_rx: cfg.n_rx,
            carrier_freq: cfg.carrier_freq_hz,
            window: cfg.avg_window,
            equalizer: cfg.equalizer,
        })
    }

    /// Transmitted symbols of every data resource element, in grid data order.
    pub fn data_symbols(&self, payload: &[u8]) -> Result<Vec<Complex64>> {
        encode_block(payload, &self.transport)
    }

    /// Payload to the transmitted grid (before transform precoding) and waveform.
    pub fn transmit(&self, payload: &[u8]) -> Result<(ResourceGrid, Waveform)> {
        let grid = map_subframe(&self.data_symbols(payload)?, &self.dmrs, &self.grid)?;
        let wf = self.modem.modulate(&grid);
        Ok((grid, wf))
    }

    pub fn channel_config(&self, speed_kmph: f64, seed: u64) -> ChannelConfig {
        ChannelConfig {
            profile: self.profile.clone(),
            speed_kmph,
            carrier_freq: self.carrier_freq,
            n_rx: self.n_rx,
            seed,
            snr_db: None,
        }
    }

    /// Fading, noise and demodulation. Returns the received frequency grid
    /// per antenna and the channel ground truth.
    pub fn propagate(&self, wf: &Waveform, channel: &ChannelConfig, snr_db: f64, noise_seeds: &[u64]) -> Result<(Vec<ResourceGrid>, ChannelRealization)> {
        let (faded, truth) = propagate(wf, channel, self.modem.config())?;
        let rx = faded
            .iter()
            .zip(noise_seeds)
            .map(|(w, &seed)| self.modem.ofdm_demodulate(&add_awgn(w, Some(snr_db), SIGNAL_POWER_REF, seed)))
            .collect::<Result<Vec<_>>>()?;
        Ok((rx, truth))
    }

    /// Generates the dataset record of one (speed, SNR, subframe) item.
    pub fn simulate(&self, master_seed: u64, speed_kmph: f64, snr_db: f64, subframe: usize) -> Result<Record> {
        let seed = |p, lane| item_seed(master_seed, speed_kmph, snr_db, subframe, p, lane);
        let mut rng = ChaCha8Rng::seed_from_u64(seed(Purpose::Payload, 0));
        let payload: Vec<u8> = (0..self.transport.tbs).map(|_| rng.random_range(0..2u8)).collect();
        let (_, wf) = self.transmit(&payload)?;
        let channel = self.channel_config(speed_kmph, seed(Purpose::Fading, 0));
        let noise_seeds: Vec<u64> = (0..self.n_rx as u64).map(|a| seed(Purpose::Noise, a)).collect();
        let (rx, truth) = self.propagate(&wf, &channel, snr_db, &noise_seeds)?;
        let est = estimate_all(&rx, &self.dmrs, &truth, &self.grid, self.window)?;
        let mut rec = Record {
            speed_kmph,
            snr_db,
            subframe: subframe as u32,
            payload,
            h_noisy: est.h_noisy,
            h_perf: est.h_perf,
            rx,
        };
        rec.quantize();
        Ok(rec)
    }

    /// Averaged and interpolated LS estimate per antenna, and the noise
    /// variance measured on the pilots. The raw residual against the
    /// window mean is scaled by `n/(n-1)` for an `n`-cell window.
    pub fn ls_estimate(&self, rx: &[ResourceGrid]) -> Result<(Vec<ResourceGrid>, f64)> {
        let cells = (self.window.0 * self.window.1) as f64;
        let mut h = Vec::with_capacity(rx.len());
        let mut noise = 0.0;
        for y in rx {
            let raw = ls_at_pilots(y, &self.dmrs, &self.grid)?;
            let avg = average_2d(&raw, self.window)?;
            noise += noise_level(&raw, &avg);
            h.push(interpolate_grid(&avg, &self.grid)?);
        }
        let correction = if cells > 1.0 { cells / (cells - 1.0) } else { 1.0 };
        Ok((h, correction * noise / rx.len().max(1) as f64))
    }

    /// Gain the estimate predicts for one equalized symbol, and the residual
    /// error power around it.
    fn predicted_gain(&self, gains: &[f64], noise_var: f64) -> (f64, f64) {
        let n = gains.len() as f64;
        match self.equalizer {
            EqualizerMode::MrcNormalized => {
                let mu = gains.iter().map(|&g| if g + noise_var > 0.0 { g / (g + noise_var) } else { 0.0 }).sum::<f64>() / n;
                (mu, mu * (1.0 - mu))
            }
            EqualizerMode::Paper => {
                let mu = gains.iter().sum::<f64>() / n;
                (mu, mu * noise_var)
            }
        }
    }

    /// Equalizes with `h`, undoes transform precoding and decodes. The
    /// returned symbols are the de-spread equalizer output; LLRs are formed
    /// after dividing out the per-symbol gain the estimate predicts. In
    /// unnormalized mode, whose output carries the combined channel power, the
    /// returned symbols are divided by that gain as well.
    pub fn receive(&self, rx: &[ResourceGrid], h: &[ResourceGrid], noise_var: f64) -> Result<Reception> {
        let eq = equalize(rx, h, noise_var, self.equalizer)?;
        let despread = self.modem.transform_decode(&eq.grid);
        let cols = data_symbol_indices(&self.grid);
        let n_sc = self.grid.n_subcarriers();
        let mut symbols = Vec::with_capacity(cols.len() * n_sc);
        let mut llrs = Vec::with_capacity(2 * cols.len() * n_sc);
        let mut scaled = Vec::with_capacity(n_sc);
        for &sym in &cols {
            let (mu, resid) = self.predicted_gain(&eq.gain[sym * n_sc..(sym + 1) * n_sc], noise_var);
            let col = despread.column(sym);
            scaled.clear();
            if mu > 0.0 {
                scaled.extend(col.iter().map(|v| v / mu));
                soft_demap_into(&scaled, (resid / (mu * mu)).max(1e-6), &mut llrs);
            } else {
                scaled.resize(n_sc, Complex64::new(0.0, 0.0));
                llrs.resize(llrs.len() + 2 * n_sc, 0.0);
            }
            match self.equalizer {
                EqualizerMode::MrcNormalized => symbols.extend_from_slice(col),
                EqualizerMode::Paper => symbols.extend_from_slice(&scaled),
            }
        }
        Ok(Reception { decoded: decode_block(&llrs, &self.transport)?, symbols })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chanest::channel_mse;
    use crate::transport::block_error;

    fn cfg() -> RunConfig {
        RunConfig::default()
    }

    #[test]
    fn simulate_is_deterministic_and_shaped() {
        let link = Link::new(&cfg()).unwrap();
        let a = link.simulate(3, 200.0, 2.0, 4).unwrap();
        let b = link.simulate(3, 200.0, 2.0, 4).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.payload.len(), 3496);
        assert_eq!(a.rx.len(), 2);
        assert_eq!(a.h_noisy[0].dims(), (576, 14));
        assert_ne!(a, link.simulate(3, 200.0, 2.0, 5).unwrap());
    }

    #[test]
    fn perfect_receiver_noiseless_static() {
        let link = Link::new(&cfg()).unwrap();
        let rec = link.simulate(1, 0.0, f64::INFINITY, 0).unwrap();
        let out = link.receive(&rec.rx, &rec.h_perf, 0.0).unwrap();
        assert!(!block_error(&rec.payload, &out.decoded.payload, out.decoded.crc_ok));
        let tx = link.data_symbols(&rec.payload).unwrap();
        let err: f64 = tx.iter().zip(&out.symbols).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>() / tx.len() as f64;
        // only f32 storage rounding remains
        assert!(err < 1e-9, "{err}");
    }

    #[test]
    fn ls_noise_estimate_tracks_true_variance() {
        let mut c = cfg();
        c.delay_profile = DelayProfile::Flat;
        let link = Link::new(&c).unwrap();
        let rec = link.simulate(2, 0.0, 0.0, 0).unwrap();
        let (h, nv) = link.ls_estimate(&rec.rx).unwrap();
        assert!((nv - 1.0).abs() < 0.1, "{nv}");
        assert!(channel_mse(&h, &rec.h_perf) < channel_mse(&rec.h_noisy, &rec.h_perf));
    }

    #[test]
    fn moderate_snr_decodes_with_ls() {
        let link = Link::new(&cfg()).unwrap();
        let mut errors = 0;
        for sf in 0..10 {
            let rec = link.simulate(4, 100.0, 10.0, sf).unwrap();
            let (h, nv) = link.ls_estimate(&rec.rx).unwrap();
            let out = link.receive(&rec.rx, &h, nv).unwrap();
            errors += block_error(&rec.payload, &out.decoded.payload, out.decoded.crc_ok) as usize;
        }
        assert_eq!(errors, 0);
    }
}
