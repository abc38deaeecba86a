//! Dataset files, one per (speed, SNR) point.
//!
//! Layout (little-endian):
//!
//! ```text
//! "CVXD" u32 version
//! u32 n_subcarriers, u32 n_symbols, u32 n_rx, u32 payload_bits
//! f64 speed_kmph, f64 snr_db, u32 n_records
//! n_records x {
//!     u32 subframe
//!     payload bits packed MSB-first, ceil(payload_bits / 8) bytes
//!     n_rx x { h_noisy, h_perf, rx }
//! }
//! ```
//!
//! Each matrix is `n_symbols * n_subcarriers` complex values, symbol-major,
//! stored as interleaved re/im `f32`. `rx` is the received frequency grid
//! before any equalization or de-spreading.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::{ResourceGrid, N_SUBCARRIERS, N_SYMBOLS};

pub const MAGIC: &[u8; 4] = b"CVXD";
pub const VERSION: u32 = 1;
const GRID_CELLS: usize = N_SUBCARRIERS * N_SYMBOLS;

#[derive(Debug, Clone, PartialEq)]
pub struct Record {
    pub speed_kmph: f64,
    pub snr_db: f64,
    pub subframe: u32,
    pub payload: Vec<u8>,
    /// Per receive antenna.
    pub h_noisy: Vec<ResourceGrid>,
    pub h_perf: Vec<ResourceGrid>,
    pub rx: Vec<ResourceGrid>,
}

impl Record {
    /// Rounds every matrix to `f32` precision, as a stored record would be.
    pub fn quantize(&mut self) {
        for g in self.h_noisy.iter_mut().chain(&mut self.h_perf).chain(&mut self.rx) {
            for v in g.cells_mut() {
                *v = Complex64::new(v.re as f32 as f64, v.im as f32 as f64);
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetHeader {
    pub n_rx: usize,
    pub payload_bits: usize,
    pub speed_kmph: f64,
    pub snr_db: f64,
    pub n_records: usize,
}

/// File name used for one (speed, SNR) point.
pub fn file_name(speed_kmph: f64, snr_db: f64) -> String {
    format!("speed{speed_kmph}_snr{snr_db}.cvxd")
}

pub fn file_path(dir: &Path, speed_kmph: f64, snr_db: f64) -> PathBuf {
    dir.join(file_name(speed_kmph, snr_db))
}

pub struct DatasetWriter {
    path: PathBuf,
    out: BufWriter<File>,
    header: DatasetHeader,
    written: usize,
}

impl DatasetWriter {
    pub fn create(path: &Path, header: DatasetHeader) -> Result<Self> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = Self { path: path.to_owned(), out: BufWriter::new(file), header, written: 0 };
        let h = w.header.clone();
        let mut buf = Vec::with_capacity(48);
        buf.extend_from_slice(MAGIC);
        for v in [VERSION, N_SUBCARRIERS as u32, N_SYMBOLS as u32, h.n_rx as u32, h.payload_bits as u32] {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        buf.extend_from_slice(&h.speed_kmph.to_le_bytes());
        buf.extend_from_slice(&h.snr_db.to_le_bytes());
        buf.extend_from_slice(&(h.n_records as u32).to_le_bytes());
        w.put(&buf)?;
        Ok(w)
    }

    fn put(&mut self, bytes: &[u8]) -> Result<()> {
        self.out.write_all(bytes).map_err(|e| Error::io(&self.path, e))
    }

    pub fn write(&mut self, r: &Record) -> Result<()> {
        let h = &self.header;
        if r.payload.len() != h.payload_bits || [&r.h_noisy, &r.h_perf, &r.rx].iter().any(|g| g.len() != h.n_rx) {
            return Err(Error::InvalidArgument(format!("record shape does not match {}", self.path.display())));
        }
        if self.written == h.n_records {
            return Err(Error::InvalidArgument(format!("{}: more records than declared", self.path.display())));
        }
        let mut buf = Vec::with_capacity(4 + h.payload_bits / 8 + 1 + h.n_rx * 3 * GRID_CELLS * 8);
        buf.extend_from_slice(&r.subframe.to_le_bytes());
        for chunk in r.payload.chunks(8) {
            buf.push(chunk.iter().enumerate().fold(0u8, |acc, (i, &b)| acc | ((b & 1) << (7 - i))));
        }
        for a in 0..h.n_rx {
            for g in [&r.h_noisy[a], &r.h_perf[a], &r.rx[a]] {
                for v in g.cells() {
                    buf.extend_from_slice(&(v.re as f32).to_le_bytes());
                    buf.extend_from_slice(&(v.im as f32).to_le_bytes());
                }
            }
        }
        self.put(&buf)?;
        self.written += 1;
        Ok(())
    }

    pub fn finish(mut self) -> Result<()> {
        if self.written != self.header.n_records {
            return Err(Error::InvalidArgument(format!(
                "{}: {} records written, {} declared",
                self.path.display(),
                self.written,
                self.header.n_records
            )));
        }
        self.out.flush().map_err(|e| Error::io(&self.path, e))
    }
}

/// Streams records from a dataset file.
pub struct DatasetReader {
    path: PathBuf,
    input: BufReader<File>,
    pub header: DatasetHeader,
    read: usize,
}

impl DatasetReader {
    pub fn open(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut r = Self {
            path: path.to_owned(),
            input: BufReader::new(file),
            header: DatasetHeader { n_rx: 0, payload_bits: 0, speed_kmph: 0.0, snr_db: 0.0, n_records: 0 },
            read: 0,
        };
        let mut head = [0u8; 44];
        r.fill(&mut head)?;
        if &head[..4] != MAGIC {
            return Err(Error::format(path, "not a dataset file (bad magic)"));
        }
        let u = |i: usize| u32::from_le_bytes(head[i..i + 4].try_into().unwrap()) as usize;
        let f = |i: usize| f64::from_le_bytes(head[i..i + 8].try_into().unwrap());
        if u(4) != VERSION as usize {
            return Err(Error::format(path, format!("unsupported dataset version {}", u(4))));
        }
        if u(8) != N_SUBCARRIERS || u(12) != N_SYMBOLS {
            return Err(Error::format(path, format!("grid is {}x{}, expected {N_SUBCARRIERS}x{N_SYMBOLS}", u(8), u(12))));
        }
        r.header = DatasetHeader { n_rx: u(16), payload_bits: u(20), speed_kmph: f(24), snr_db: f(32), n_records: u(40) };
        if r.header.n_rx == 0 || r.header.n_rx > 16 {
            return Err(Error::format(path, format!("implausible antenna count {}", r.header.n_rx)));
        }
        Ok(r)
    }

    fn fill(&mut self, buf: &mut [u8]) -> Result<()> {
        self.input.read_exact(buf).map_err(|e| match e.kind() {
            std::io::ErrorKind::UnexpectedEof => Error::format(&self.path, "truncated file"),
            _ => Error::io(&self.path, e),
        })
    }

    fn read_record(&mut self) -> Result<Record> {
        let h = self.header.clone();
        let mut sf = [0u8; 4];
        self.fill(&mut sf)?;
        let mut packed = vec![0u8; h.payload_bits.div_ceil(8)];
        self.fill(&mut packed)?;
        let payload = (0..h.payload_bits).map(|i| (packed[i / 8] >> (7 - i % 8)) & 1).collect();
        let mut raw = vec![0u8; GRID_CELLS * 8];
        let mut grids: [Vec<ResourceGrid>; 3] = Default::default();
        for _ in 0..h.n_rx {
            for g in grids.iter_mut() {
                self.fill(&mut raw)?;
                let cells = raw
                    .chunks_exact(8)
                    .map(|c| {
                        let re = f32::from_le_bytes(c[..4].try_into().unwrap());
                        let im = f32::from_le_bytes(c[4..].try_into().unwrap());
                        Complex64::new(re as f64, im as f64)
                    })
                    .collect();
                g.push(ResourceGrid::from_cells(cells)?);
            }
        }
        let [h_noisy, h_perf, rx] = grids;
        Ok(Record {
            speed_kmph: h.speed_kmph,
            snr_db: h.snr_db,
            subframe: u32::from_le_bytes(sf),
            payload,
            h_noisy,
            h_perf,
            rx,
        })
    }
}

impl Iterator for DatasetReader {
    type Item = Result<Record>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.read == self.header.n_records {
            return None;
        }
        self.read += 1;
        let r = self.read_record();
        if r.is_err() {
            // stop after the first failure
            self.read = self.header.n_records;
        }
        Some(r)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(sf: u32, n_rx: usize) -> Record {
        let g = |a: usize, k: f64| {
            ResourceGrid::from_fn(|sc, sym| Complex64::new(sc as f64 * 0.001 + k + a as f64, sym as f64 * -0.5 + sf as f64))
        };
        Record {
            speed_kmph: 300.0,
            snr_db: -2.0,
            subframe: sf,
            payload: (0..13).map(|i| ((i * 7 + sf as usize) % 3 == 0) as u8).collect(),
            h_noisy: (0..n_rx).map(|a| g(a, 0.25)).collect(),
            h_perf: (0..n_rx).map(|a| g(a, 0.5)).collect(),
            rx: (0..n_rx).map(|a| g(a, 0.75)).collect(),
        }
    }

    fn header(n: usize) -> DatasetHeader {
        DatasetHeader { n_rx: 2, payload_bits: 13, speed_kmph: 300.0, snr_db: -2.0, n_records: n }
    }

    #[test]
    fn round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = file_path(dir.path(), 300.0, -2.0);
        assert!(path.ends_with("speed300_snr-2.cvxd"));
        let recs: Vec<Record> = (0..3).map(|i| record(i, 2)).collect();
        let mut w = DatasetWriter::create(&path, header(3)).unwrap();
        for r in &recs {
            w.write(r).unwrap();
        }
        w.finish().unwrap();
        let bytes = std::fs::read(&path).unwrap();
        assert_eq!(&bytes[..4], b"CVXD");
        assert_eq!(bytes.len(), 44 + 3 * (4 + 2 + 2 * 3 * 576 * 14 * 8));

        let reader = DatasetReader::open(&path).unwrap();
        assert_eq!(reader.header, header(3));
        let back: Vec<Record> = reader.collect::<Result<_>>().unwrap();
        for (mut want, got) in recs.into_iter().zip(back) {
            want.quantize();
            assert_eq!(want, got);
        }
    }

    #[test]
    fn count_and_shape_checked() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.cvxd");
        let mut w = DatasetWriter::create(&path, header(2)).unwrap();
        assert!(w.write(&record(0, 1)).is_err());
        w.write(&record(0, 2)).unwrap();
        assert!(w.finish().is_err());
    }

    #[test]
    fn truncated_and_foreign_files_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.cvxd");
        let mut w = DatasetWriter::create(&path, header(1)).unwrap();
        w.write(&record(0, 2)).unwrap();
        w.finish().unwrap();
        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() - 10]).unwrap();
        let mut r = DatasetReader::open(&path).unwrap();
        assert!(matches!(r.next(), Some(Err(Error::Format { .. }))));
        assert!(r.next().is_none());

        std::fs::write(&path, b"CVXM\x01\x00\x00\x00").unwrap();
        assert!(DatasetReader::open(&path).is_err());
        let missing = DatasetReader::open(&dir.path().join("none.cvxd")).err().unwrap();
        assert!(missing.to_string().contains("none.cvxd"));
    }
}
