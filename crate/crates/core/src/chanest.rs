//! Classical DMRS-based channel estimation and equalization.
//!
//! Per receive antenna: least-squares estimates on the DMRS symbols, an
//! optional sliding-window average over the pilot lattice, a noise-level
//! estimate from the difference of the two, and linear interpolation in
//! time to the full grid. Antennas are only combined by [`equalize`].

use num_complex::Complex64;

use crate::channel::ChannelRealization;
use crate::error::{Error, Result};
use crate::grid::{GridConfig, ResourceGrid, N_SUBCARRIERS, N_SYMBOLS};

/// Default averaging window: seven subcarriers, one DMRS symbol.
pub const DEFAULT_WINDOW: (usize, usize) = (7, 1);

/// Channel values on the DMRS symbols of one antenna.
#[derive(Debug, Clone, PartialEq)]
pub struct PilotEstimate {
    /// One column of 576 values per DMRS symbol.
    pub values: Vec<Vec<Complex64>>,
    pub positions: Vec<usize>,
}

/// Channel matrices for every receive antenna of one subframe.
#[derive(Debug, Clone)]
pub struct EstimateSet {
    pub h_perf: Vec<ResourceGrid>,
    pub h_prac: Vec<ResourceGrid>,
    pub h_noisy: Vec<ResourceGrid>,
    /// Mean noise variance estimated from the pilots, averaged over antennas.
    pub noise_var: f64,
}

/// `H~(i,k) = Y(i,k) / X(i,k)` on every DMRS cell.
pub fn ls_at_pilots(rx_grid: &ResourceGrid, tx_dmrs: &[Vec<Complex64>], cfg: &GridConfig) -> Result<PilotEstimate> {
    if tx_dmrs.len() != cfg.dmrs_symbol_indices.len() {
        return Err(Error::Dimension {
            what: "DMRS sequence count",
            expected: cfg.dmrs_symbol_indices.len(),
            got: tx_dmrs.len(),
        });
    }
    let values = cfg
        .dmrs_symbol_indices
        .iter()
        .zip(tx_dmrs)
        .map(|(&sym, x)| {
            if x.len() != N_SUBCARRIERS {
                return Err(Error::Dimension {
                    what: "DMRS sequence length",
                    expected: N_SUBCARRIERS,
                    got: x.len(),
                });
            }
            rx_grid
                .column(sym)
                .iter()
                .zip(x)
                .enumerate()
                .map(|(sc, (y, x))| {
                    if x.norm_sqr() == 0.0 {
                        Err(Error::ZeroPilot { subcarrier: sc, symbol: sym })
                    } else {
                        Ok(y / x)
                    }
                })
                .collect()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PilotEstimate {
        values,
        positions: cfg.dmrs_symbol_indices.clone(),
    })
}

/// Replaces every pilot with the mean of the pilots in a centered
/// `freq_span` x `time_span` window. The window is truncated at the edges
/// of the pilot lattice, so edge pilots average fewer values.
pub fn average_2d(p: &PilotEstimate, window: (usize, usize)) -> Result<PilotEstimate> {
    let (fs, ts) = window;
    if fs == 0 || ts == 0 || fs % 2 == 0 || ts % 2 == 0 {
        return Err(Error::InvalidArgument(format!(
            "averaging window {window:?} must have odd positive spans"
        )));
    }
    let (fh, th) = (fs / 2, ts / 2);
    let n_cols = p.values.len();
    let n_rows = p.values.first().map_or(0, Vec::len);

    let values = (0..n_cols)
        .map(|c| {
            let c_lo = c.saturating_sub(th);
            let c_hi = (c + th).min(n_cols - 1);
            (0..n_rows)
                .map(|r| {
                    let r_lo = r.saturating_sub(fh);
                    let r_hi = (r + fh).min(n_rows - 1);
                    let sum: Complex64 = (c_lo..=c_hi).flat_map(|cc| &p.values[cc][r_lo..=r_hi]).sum();
                    let count = (c_hi - c_lo + 1) * (r_hi - r_lo + 1);
                    sum / count as f64
                })
                .collect()
        })
        .collect();
    Ok(PilotEstimate {
        values,
        positions: p.positions.clone(),
    })
}

/// Mean squared difference between raw and averaged pilot estimates.
pub fn noise_level(raw: &PilotEstimate, averaged: &PilotEstimate) -> f64 {
    let mut sum = 0.0;
    let mut count = 0usize;
    for (a, b) in raw.values.iter().zip(&averaged.values) {
        for (x, y) in a.iter().zip(b) {
            sum += (x - y).norm_sqr();
            count += 1;
        }
    }
    if count == 0 {
        0.0
    } else {
        sum / count as f64
    }
}

/// Linear interpolation in time between pilot symbols, holding the first
/// and last pilot values outward. Pilot symbols pass through unchanged.
pub fn interpolate_grid(p: &PilotEstimate, cfg: &GridConfig) -> Result<ResourceGrid> {
    if p.positions.len() < 2 || p.values.len() != p.positions.len() {
        return Err(Error::InvalidArgument(format!(
            "interpolation needs at least two pilot columns, got {}",
            p.values.len()
        )));
    }
    if p.positions.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidArgument("pilot positions must be strictly increasing".into()));
    }
    let n_sc = cfg.n_subcarriers();
    let mut grid = ResourceGrid::zeros();
    let first = p.positions[0];
    let last = *p.positions.last().unwrap();
    for sym in 0..N_SYMBOLS {
        let col = grid.column_mut(sym);
        if sym <= first {
            col.copy_from_slice(&p.values[0][..n_sc]);
        } else if sym >= last {
            col.copy_from_slice(&p.values[p.values.len() - 1][..n_sc]);
        } else {
            let j = p.positions.iter().rposition(|&s| s <= sym).unwrap();
            let (s0, s1) = (p.positions[j], p.positions[j + 1]);
            if s0 == sym {
                col.copy_from_slice(&p.values[j][..n_sc]);
                continue;
            }
            let w = (sym - s0) as f64 / (s1 - s0) as f64;
            for (k, v) in col.iter_mut().enumerate() {
                *v = p.values[j][k] + (p.values[j + 1][k] - p.values[j][k]) * w;
            }
        }
    }
    Ok(grid)
}

/// The ground-truth response exported by the channel model.
pub fn perfect_estimate(real: &ChannelRealization) -> Vec<ResourceGrid> {
    real.h.clone()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EqualizerMode {
    /// `sum_r Y_r * conj(H_r)`.
    #[default]
    Paper,
    /// `sum_r Y_r * conj(H_r) / (sum_r |H_r|^2 + noise_var)`.
    MrcNormalized,
}

impl EqualizerMode {
    pub fn name(self) -> &'static str {
        match self {
            EqualizerMode::Paper => "paper",
            EqualizerMode::MrcNormalized => "mrc-normalized",
        }
    }
}

impl std::str::FromStr for EqualizerMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "paper" => Ok(EqualizerMode::Paper),
            "mrc-normalized" => Ok(EqualizerMode::MrcNormalized),
            other => Err(Error::InvalidArgument(format!("unknown equalizer mode {other:?}"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Equalized {
    pub grid: ResourceGrid,
    /// Per-antenna-combined channel gain `sum_r |H_r|^2` for every cell.
    pub gain: Vec<f64>,
    /// Cells where the normalized equalizer had nothing to divide by.
    pub erased: Vec<bool>,
}

pub fn equalize(rx: &[ResourceGrid], h: &[ResourceGrid], noise_var: f64, mode: EqualizerMode) -> Result<Equalized> {
    if rx.len() != h.len() || rx.is_empty() {
        return Err(Error::Dimension {
            what: "antenna count",
            expected: rx.len(),
            got: h.len(),
        });
    }
    let n = N_SUBCARRIERS * N_SYMBOLS;
    let mut out = vec![Complex64::new(0.0, 0.0); n];
    let mut gain = vec![0.0; n];
    for (y, hh) in rx.iter().zip(h) {
        for (i, (yv, hv)) in y.cells().iter().zip(hh.cells()).enumerate() {
            out[i] += yv * hv.conj();
            gain[i] += hv.norm_sqr();
        }
    }
    let mut erased = vec![false; n];
    if mode == EqualizerMode::MrcNormalized {
        for i in 0..n {
            let denom = gain[i] + noise_var;
            if denom > 0.0 {
                out[i] /= denom;
            } else {
                out[i] = Complex64::new(0.0, 0.0);
                erased[i] = true;
            }
        }
    }
    Ok(Equalized {
        grid: ResourceGrid::from_cells(out)?,
        gain,
        erased,
    })
}

/// Runs the full classical chain for every antenna: perfect, averaged and
/// interpolated (`h_prac`), and raw interpolated (`h_noisy`) estimates.
pub fn estimate_all(
    rx: &[ResourceGrid],
    tx_dmrs: &[Vec<Complex64>],
    truth: &ChannelRealization,
    cfg: &GridConfig,
    window: (usize, usize),
) -> Result<EstimateSet> {
    let mut h_prac = Vec::with_capacity(rx.len());
    let mut h_noisy = Vec::with_capacity(rx.len());
    let mut noise = 0.0;
    for y in rx {
        let raw = ls_at_pilots(y, tx_dmrs, cfg)?;
        let avg = average_2d(&raw, window)?;
        noise += noise_level(&raw, &avg);
        h_prac.push(interpolate_grid(&avg, cfg)?);
        h_noisy.push(interpolate_grid(&raw, cfg)?);
    }
    Ok(EstimateSet {
        h_perf: perfect_estimate(truth),
        h_prac,
        h_noisy,
        noise_var: noise / rx.len().max(1) as f64,
    })
}

/// Mean squared error between two sets of per-antenna channel matrices.
pub fn channel_mse(a: &[ResourceGrid], b: &[ResourceGrid]) -> f64 {
    let mut sum = 0.0;
    let mut count = 0usize;
    for (x, y) in a.iter().zip(b) {
        for (u, v) in x.cells().iter().zip(y.cells()) {
            sum += (u - v).norm_sqr();
            count += 1;
        }
    }
    sum / count.max(1) as f64
}
