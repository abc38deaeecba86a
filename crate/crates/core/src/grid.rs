//! Sidelink subframe resource grid: 48 PRBs by 14 SC-FDMA symbols, with the
//! four DMRS symbols at 0-based positions 2, 5, 8 and 11.

use num_complex::Complex64;

use crate::error::{Error, Result};

pub const N_SC_PER_PRB: usize = 12;
pub const N_PRB: usize = 48;
pub const N_SUBCARRIERS: usize = N_PRB * N_SC_PER_PRB;
pub const N_SYMBOLS: usize = 14;
pub const DMRS_SYMBOLS: [usize; 4] = [2, 5, 8, 11];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GridConfig {
    pub n_prb: usize,
    pub n_sc_per_prb: usize,
    pub n_symbols: usize,
    pub dmrs_symbol_indices: Vec<usize>,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            n_prb: N_PRB,
            n_sc_per_prb: N_SC_PER_PRB,
            n_symbols: N_SYMBOLS,
            dmrs_symbol_indices: DMRS_SYMBOLS.to_vec(),
        }
    }
}

impl GridConfig {
    pub fn n_subcarriers(&self) -> usize {
        self.n_prb * self.n_sc_per_prb
    }

    /// Checks the full sidelink layout: 576 subcarriers and the Rel. 15
    /// four-DMRS pattern.
    pub fn validate(&self) -> Result<()> {
        if self.n_subcarriers() != N_SUBCARRIERS {
            return Err(Error::Unsupported(format!(
                "grid must span {N_SUBCARRIERS} subcarriers, got {}",
                self.n_subcarriers()
            )));
        }
        if self.n_symbols != N_SYMBOLS {
            return Err(Error::Unsupported(format!(
                "subframe must have {N_SYMBOLS} symbols, got {}",
                self.n_symbols
            )));
        }
        if self.dmrs_symbol_indices != DMRS_SYMBOLS {
            return Err(Error::Unsupported(format!(
                "only the DMRS layout {DMRS_SYMBOLS:?} is supported, got {:?}",
                self.dmrs_symbol_indices
            )));
        }
        Ok(())
    }
}

/// Symbol indices that carry data: the complement of the DMRS positions.
pub fn data_symbol_indices(cfg: &GridConfig) -> Vec<usize> {
    (0..cfg.n_symbols)
        .filter(|s| !cfg.dmrs_symbol_indices.contains(s))
        .collect()
}

/// One subframe of frequency-domain cells. Storage is symbol-major so each
/// symbol column is a contiguous slice of 576 subcarriers.
#[derive(Debug, Clone, PartialEq)]
pub struct ResourceGrid {
    cells: Vec<Complex64>,
}

impl Default for ResourceGrid {
    fn default() -> Self {
        Self::zeros()
    }
}

impl ResourceGrid {
    pub fn zeros() -> Self {
        Self {
            cells: vec![Complex64::new(0.0, 0.0); N_SUBCARRIERS * N_SYMBOLS],
        }
    }

    /// Builds a grid from symbol-major cells (`cells[symbol * 576 + subcarrier]`).
    pub fn from_cells(cells: Vec<Complex64>) -> Result<Self> {
        if cells.len() != N_SUBCARRIERS * N_SYMBOLS {
            return Err(Error::Dimension {
                what: "resource grid cells",
                expected: N_SUBCARRIERS * N_SYMBOLS,
                got: cells.len(),
            });
        }
        Ok(Self { cells })
    }

    pub fn from_fn(mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut grid = Self::zeros();
        for sym in 0..N_SYMBOLS {
            for sc in 0..N_SUBCARRIERS {
                grid.cells[sym * N_SUBCARRIERS + sc] = f(sc, sym);
            }
        }
        grid
    }

    pub const fn dims(&self) -> (usize, usize) {
        (N_SUBCARRIERS, N_SYMBOLS)
    }

    #[inline]
    pub fn get(&self, subcarrier: usize, symbol: usize) -> Complex64 {
        self.cells[symbol * N_SUBCARRIERS + subcarrier]
    }

    #[inline]
    pub fn set(&mut self, subcarrier: usize, symbol: usize, value: Complex64) {
        self.cells[symbol * N_SUBCARRIERS + subcarrier] = value;
    }

    pub fn column(&self, symbol: usize) -> &[Complex64] {
        &self.cells[symbol * N_SUBCARRIERS..(symbol + 1) * N_SUBCARRIERS]
    }

    pub fn column_mut(&mut self, symbol: usize) -> &mut [Complex64] {
        &mut self.cells[symbol * N_SUBCARRIERS..(symbol + 1) * N_SUBCARRIERS]
    }

    pub fn cells(&self) -> &[Complex64] {
        &self.cells
    }

    pub fn cells_mut(&mut self) -> &mut [Complex64] {
        &mut self.cells
    }

    pub fn is_finite(&self) -> bool {
        self.cells.iter().all(|c| c.re.is_finite() && c.im.is_finite())
    }

    pub fn energy(&self) -> f64 {
        self.cells.iter().map(|c| c.norm_sqr()).sum()
    }

    pub fn scale(&mut self, factor: Complex64) {
        self.cells.iter_mut().for_each(|c| *c *= factor);
    }

    pub fn max_abs_diff(&self, other: &ResourceGrid) -> f64 {
        self.cells
            .iter()
            .zip(&other.cells)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }
}

/// Places DMRS sequences on their symbols and fills the remaining symbols
/// with data, symbol by symbol in ascending order, subcarriers ascending
/// within each symbol.
pub fn map_subframe(
    data_syms: &[Complex64],
    dmrs_syms: &[Vec<Complex64>],
    cfg: &GridConfig,
) -> Result<ResourceGrid> {
    cfg.validate()?;
    let data_cols = data_symbol_indices(cfg);
    let n_sc = cfg.n_subcarriers();
    if data_syms.len() != data_cols.len() * n_sc {
        return Err(Error::Dimension {
            what: "data symbols",
            expected: data_cols.len() * n_sc,
            got: data_syms.len(),
        });
    }
    if dmrs_syms.len() != cfg.dmrs_symbol_indices.len() {
        return Err(Error::Dimension {
            what: "DMRS sequence count",
            expected: cfg.dmrs_symbol_indices.len(),
            got: dmrs_syms.len(),
        });
    }
    let mut grid = ResourceGrid::zeros();
    for (seq, &sym) in dmrs_syms.iter().zip(&cfg.dmrs_symbol_indices) {
        if seq.len() != n_sc {
            return Err(Error::Dimension {
                what: "DMRS sequence length",
                expected: n_sc,
                got: seq.len(),
            });
        }
        grid.column_mut(sym).copy_from_slice(seq);
    }
    for (chunk, &sym) in data_syms.chunks_exact(n_sc).zip(&data_cols) {
        grid.column_mut(sym).copy_from_slice(chunk);
    }
    Ok(grid)
}

/// Column-major selection of whole symbols: 576 rows by `symbol_indices.len()`
/// columns, stored one column after another.
#[derive(Debug, Clone, PartialEq)]
pub struct SymbolColumns {
    pub n_rows: usize,
    pub columns: Vec<Vec<Complex64>>,
}

impl SymbolColumns {
    pub fn n_cols(&self) -> usize {
        self.columns.len()
    }

    /// Concatenation of all columns in order.
    pub fn flatten(&self) -> Vec<Complex64> {
        self.columns.iter().flatten().copied().collect()
    }
}

pub fn extract_positions(grid: &ResourceGrid, symbol_indices: &[usize]) -> Result<SymbolColumns> {
    let columns = symbol_indices
        .iter()
        .map(|&sym| {
            if sym >= N_SYMBOLS {
                Err(Error::IndexOutOfRange {
                    index: sym,
                    limit: N_SYMBOLS,
                })
            } else {
                Ok(grid.column(sym).to_vec())
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SymbolColumns {
        n_rows: N_SUBCARRIERS,
        columns,
    })
}
