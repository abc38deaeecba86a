//! SC-FDMA modem for the 10 MHz numerology: 1024-point FFT at 15.36 Msps,
//! normal cyclic prefix. Data symbols are DFT-spread over the 576 allocated
//! subcarriers; DMRS symbols are already frequency-domain sequences and are
//! mapped directly. All transforms are unitary.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::grid::{ResourceGrid, DMRS_SYMBOLS, N_SUBCARRIERS, N_SYMBOLS};

#[derive(Debug, Clone, PartialEq)]
pub struct ModemConfig {
    pub fft_size: usize,
    pub sample_rate: f64,
    pub cp_lengths: [usize; N_SYMBOLS],
    pub transform_precoding: bool,
}

impl Default for ModemConfig {
    fn default() -> Self {
        let mut cp_lengths = [72; N_SYMBOLS];
        cp_lengths[0] = 80;
        cp_lengths[7] = 80;
        Self {
            fft_size: 1024,
            sample_rate: 15.36e6,
            cp_lengths,
            transform_precoding: true,
        }
    }
}

impl ModemConfig {
    pub fn samples_per_subframe(&self) -> usize {
        self.cp_lengths.iter().sum::<usize>() + N_SYMBOLS * self.fft_size
    }

    /// Index of the first sample of each symbol's cyclic prefix.
    pub fn symbol_starts(&self) -> [usize; N_SYMBOLS] {
        let mut starts = [0; N_SYMBOLS];
        let mut t = 0;
        for (s, start) in starts.iter_mut().enumerate() {
            *start = t;
            t += self.cp_lengths[s] + self.fft_size;
        }
        starts
    }

    /// Sample time (relative to subframe start) of the middle of each
    /// symbol's FFT window.
    pub fn symbol_midpoints(&self) -> [f64; N_SYMBOLS] {
        let starts = self.symbol_starts();
        let mut mids = [0.0; N_SYMBOLS];
        for s in 0..N_SYMBOLS {
            mids[s] = (starts[s] + self.cp_lengths[s]) as f64 + self.fft_size as f64 / 2.0;
        }
        mids
    }

    /// FFT bin carrying allocated subcarrier `k`. The allocation sits
    /// symmetrically around DC with the DC bin left empty.
    pub fn subcarrier_bin(&self, k: usize) -> usize {
        let half = N_SUBCARRIERS / 2;
        if k < half {
            self.fft_size - half + k
        } else {
            k - half + 1
        }
    }

    pub fn validate(&self) -> Result<()> {
        if N_SUBCARRIERS + 1 > self.fft_size {
            return Err(Error::Unsupported(format!(
                "FFT size {} cannot hold {N_SUBCARRIERS} subcarriers",
                self.fft_size
            )));
        }
        if self.cp_lengths.iter().any(|&cp| cp > self.fft_size) {
            return Err(Error::Unsupported("cyclic prefix longer than symbol".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Waveform {
    pub samples: Vec<Complex64>,
    pub sample_rate: f64,
}

impl Waveform {
    pub fn mean_power(&self) -> f64 {
        if self.samples.is_empty() {
            return 0.0;
        }
        self.samples.iter().map(|s| s.norm_sqr()).sum::<f64>() / self.samples.len() as f64
    }

    pub fn energy(&self) -> f64 {
        self.samples.iter().map(|s| s.norm_sqr()).sum()
    }
}

/// Planned transforms for one numerology. Cheap to clone.
#[derive(Clone)]
pub struct Modem {
    cfg: ModemConfig,
    fft: Arc<dyn Fft<f64>>,
    ifft: Arc<dyn Fft<f64>>,
    dft: Arc<dyn Fft<f64>>,
    idft: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for Modem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Modem").field("cfg", &self.cfg).finish()
    }
}

fn is_dmrs(symbol: usize) -> bool {
    DMRS_SYMBOLS.contains(&symbol)
}

impl Modem {
    pub fn new(cfg: ModemConfig) -> Result<Self> {
        cfg.validate()?;
        let mut planner = FftPlanner::new();
        Ok(Self {
            fft: planner.plan_fft_forward(cfg.fft_size),
            ifft: planner.plan_fft_inverse(cfg.fft_size),
            dft: planner.plan_fft_forward(N_SUBCARRIERS),
            idft: planner.plan_fft_inverse(N_SUBCARRIERS),
            cfg,
        })
    }

    pub fn config(&self) -> &ModemConfig {
        &self.cfg
    }

    /// DFT-spreads every data column; DMRS columns pass through.
    pub fn transform_precode(&self, grid: &ResourceGrid) -> ResourceGrid {
        self.spread(grid, &self.dft)
    }

    /// Inverse of [`Modem::transform_precode`].
    pub fn transform_decode(&self, grid: &ResourceGrid) -> ResourceGrid {
        self.spread(grid, &self.idft)
    }

    fn spread(&self, grid: &ResourceGrid, plan: &Arc<dyn Fft<f64>>) -> ResourceGrid {
        let mut out = grid.clone();
        if !self.cfg.transform_precoding {
            return out;
        }
        let scale = 1.0 / (N_SUBCARRIERS as f64).sqrt();
        for sym in (0..N_SYMBOLS).filter(|&s| !is_dmrs(s)) {
            let col = out.column_mut(sym);
            plan.process(col);
            col.iter_mut().for_each(|v| *v *= scale);
        }
        out
    }

    /// Frequency-domain grid to time-domain samples (IFFT and cyclic prefix per symbol).
    pub fn ofdm_modulate(&self, freq_grid: &ResourceGrid) -> Waveform {
        let n = self.cfg.fft_size;
        let scale = 1.0 / (n as f64).sqrt();
        let mut samples = Vec::with_capacity(self.cfg.samples_per_subframe());
        let mut buf = vec![Complex64::new(0.0, 0.0); n];
        for sym in 0..N_SYMBOLS {
            buf.fill(Complex64::new(0.0, 0.0));
            for (k, &v) in freq_grid.column(sym).iter().enumerate() {
                buf[self.cfg.subcarrier_bin(k)] = v;
            }
            self.ifft.process(&mut buf);
            buf.iter_mut().for_each(|v| *v *= scale);
            let cp = self.cfg.cp_lengths[sym];
            samples.extend_from_slice(&buf[n - cp..]);
            samples.extend_from_slice(&buf);
        }
        Waveform {
            samples,
            sample_rate: self.cfg.sample_rate,
        }
    }

    /// Strips the cyclic prefixes and returns the frequency-domain grid
    /// without undoing transform precoding.
    pub fn ofdm_demodulate(&self, wf: &Waveform) -> Result<ResourceGrid> {
        let expected = self.cfg.samples_per_subframe();
        if wf.samples.len() != expected {
            return Err(Error::Dimension {
                what: "waveform length",
                expected,
                got: wf.samples.len(),
            });
        }
        let n = self.cfg.fft_size;
        let scale = 1.0 / (n as f64).sqrt();
        let mut grid = ResourceGrid::zeros();
        let mut buf = vec![Complex64::new(0.0, 0.0); n];
        for (sym, &start) in self.cfg.symbol_starts().iter().enumerate() {
            let body = start + self.cfg.cp_lengths[sym];
            buf.copy_from_slice(&wf.samples[body..body + n]);
            self.fft.process(&mut buf);
            for (k, cell) in grid.column_mut(sym).iter_mut().enumerate() {
                *cell = buf[self.cfg.subcarrier_bin(k)] * scale;
            }
        }
        Ok(grid)
    }

    pub fn modulate(&self, grid: &ResourceGrid) -> Waveform {
        self.ofdm_modulate(&self.transform_precode(grid))
    }

    pub fn demodulate(&self, wf: &Waveform) -> Result<ResourceGrid> {
        Ok(self.transform_decode(&self.ofdm_demodulate(wf)?))
    }
}

pub fn modulate(grid: &ResourceGrid, cfg: &ModemConfig) -> Result<Waveform> {
    Ok(Modem::new(cfg.clone())?.modulate(grid))
}

pub fn demodulate(wf: &Waveform, cfg: &ModemConfig) -> Result<ResourceGrid> {
    Modem::new(cfg.clone())?.demodulate(wf)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_grid(seed: u64) -> ResourceGrid {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        ResourceGrid::from_fn(|_, _| {
            Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
        })
    }

    #[test]
    fn default_numerology() {
        let cfg = ModemConfig::default();
        assert_eq!(cfg.samples_per_subframe(), 15360);
        assert_eq!(cfg.symbol_starts()[1], 1104);
        assert_eq!(cfg.subcarrier_bin(0), 1024 - 288);
        assert_eq!(cfg.subcarrier_bin(288), 1);
        let mut bins: Vec<_> = (0..576).map(|k| cfg.subcarrier_bin(k)).collect();
        bins.sort_unstable();
        bins.dedup();
        assert_eq!(bins.len(), 576);
        assert!(!bins.contains(&0));
    }

    #[test]
    fn zero_grid_gives_zero_waveform() {
        let modem = Modem::new(ModemConfig::default()).unwrap();
        let wf = modem.modulate(&ResourceGrid::zeros());
        assert_eq!(wf.samples.len(), 15360);
        assert_eq!(wf.energy(), 0.0);
        let back = modem
            .demodulate(&Waveform { samples: vec![Complex64::new(0.0, 0.0); 15360], sample_rate: 15.36e6 })
            .unwrap();
        assert_eq!(back.energy(), 0.0);
    }

    #[test]
    fn linearity_in_scale() {
        let modem = Modem::new(ModemConfig::default()).unwrap();
        let g = random_grid(1);
        let mut g2 = g.clone();
        let c = Complex64::new(0.3, -1.7);
        g2.scale(c);
        let a = modem.modulate(&g);
        let b = modem.modulate(&g2);
        for (x, y) in a.samples.iter().zip(&b.samples) {
            assert!((x * c - y).norm() < 1e-12);
        }
    }

    #[test]
    fn round_trip_and_parseval() {
        let modem = Modem::new(ModemConfig::default()).unwrap();
        for seed in 0..10 {
            let g = random_grid(seed);
            let wf = modem.modulate(&g);
            let back = modem.demodulate(&wf).unwrap();
            assert!(back.max_abs_diff(&g) < 1e-9);
            // energy without the cyclic prefixes equals grid energy
            let cfg = modem.config();
            let body_energy: f64 = cfg
                .symbol_starts()
                .iter()
                .enumerate()
                .map(|(s, &st)| {
                    let b = st + cfg.cp_lengths[s];
                    wf.samples[b..b + cfg.fft_size].iter().map(|v| v.norm_sqr()).sum::<f64>()
                })
                .sum();
            assert!((body_energy - g.energy()).abs() / g.energy() < 1e-6);
        }
    }

    #[test]
    fn cyclic_prefix_copies_symbol_tail() {
        let modem = Modem::new(ModemConfig::default()).unwrap();
        let wf = modem.modulate(&random_grid(7));
        let cfg = modem.config();
        for (s, &st) in cfg.symbol_starts().iter().enumerate() {
            let cp = cfg.cp_lengths[s];
            let end = st + cp + cfg.fft_size;
            assert_eq!(&wf.samples[st..st + cp], &wf.samples[end - cp..end]);
        }
    }

    #[test]
    fn wrong_length_rejected() {
        let modem = Modem::new(ModemConfig::default()).unwrap();
        let wf = Waveform { samples: vec![Complex64::new(0.0, 0.0); 100], sample_rate: 15.36e6 };
        assert!(matches!(modem.demodulate(&wf), Err(Error::Dimension { .. })));
    }

    #[test]
    fn delay_within_cp_is_phase_ramp() {
        let modem = Modem::new(ModemConfig::default()).unwrap();
        let freq = random_grid(3);
        let wf = modem.ofdm_modulate(&freq);
        let delay = 17;
        let mut delayed = vec![Complex64::new(0.0, 0.0); delay];
        delayed.extend_from_slice(&wf.samples[..wf.samples.len() - delay]);
        let rx = modem
            .ofdm_demodulate(&Waveform { samples: delayed, sample_rate: wf.sample_rate })
            .unwrap();
        let n = 1024.0;
        for sym in 0..N_SYMBOLS {
            for k in 0..N_SUBCARRIERS {
                let bin = modem.config().subcarrier_bin(k) as f64;
                let ramp = Complex64::from_polar(1.0, -2.0 * std::f64::consts::PI * delay as f64 * bin / n);
                assert!((rx.get(k, sym) - freq.get(k, sym) * ramp).norm() < 1e-9);
            }
        }
    }
}
