//! Binary model checkpoint.
//!
//! Layout (all integers and floats little-endian):
//!
//! ```text
//! "CVXM" u32 version
//! u32 in_ch, u32 n_convs, n_convs x (u32 out_ch, u32 kh, u32 kw), u8 relu, u8 relu_after_last_block
//! u64 seed, u32 epochs, u32 batch_size, f64 train_split
//! f64 learning_rate, f64 beta1, f64 beta2, f64 epsilon, u8 bias_correction
//! per layer in order: conv weights, conv bias | bn gamma, beta, running_mean, running_var | dense weights, bias
//!   each array as u32 length followed by f32 values
//! ```

use std::path::Path;

use super::adam::AdamConfig;
use super::layers::BatchNorm2d;
use super::model::{build_model, ArchConfig, ConvSpec, Layer, Model};
use super::train::TrainConfig;
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"CVXM";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub model: Model<f32>,
    pub train: TrainConfig,
}

struct Writer(Vec<u8>);

impl Writer {
    fn u8(&mut self, v: u8) {
        self.0.push(v);
    }
    fn u32(&mut self, v: usize) {
        self.0.extend_from_slice(&(v as u32).to_le_bytes());
    }
    fn u64(&mut self, v: u64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn f64(&mut self, v: f64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn array(&mut self, v: &[f32]) {
        self.u32(v.len());
        for x in v {
            self.0.extend_from_slice(&x.to_le_bytes());
        }
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> std::result::Result<&'a [u8], String> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len()).ok_or("truncated file")?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }
    fn u8(&mut self) -> std::result::Result<u8, String> {
        Ok(self.take(1)?[0])
    }
    fn u32(&mut self) -> std::result::Result<usize, String> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()) as usize)
    }
    fn u64(&mut self) -> std::result::Result<u64, String> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn f64(&mut self) -> std::result::Result<f64, String> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn array_into(&mut self, out: &mut [f32]) -> std::result::Result<(), String> {
        let n = self.u32()?;
        if n != out.len() {
            return Err(format!("array of {n} values where {} expected", out.len()));
        }
        for (o, c) in out.iter_mut().zip(self.take(4 * n)?.chunks_exact(4)) {
            *o = f32::from_le_bytes(c.try_into().unwrap());
        }
        Ok(())
    }
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer(Vec::new());
        w.0.extend_from_slice(MAGIC);
        w.u32(VERSION as usize);
        let a = &self.model.arch;
        w.u32(a.in_ch);
        w.u32(a.convs.len());
        for c in &a.convs {
            w.u32(c.out_ch);
            w.u32(c.kh);
            w.u32(c.kw);
        }
        w.u8(a.relu as u8);
        w.u8(a.relu_after_last_block as u8);
        let t = &self.train;
        w.u64(t.seed);
        w.u32(t.epochs);
        w.u32(t.batch_size);
        w.f64(t.train_split);
        w.f64(t.adam.learning_rate);
        w.f64(t.adam.beta1);
        w.f64(t.adam.beta2);
        w.f64(t.adam.epsilon);
        w.u8(t.adam.bias_correction as u8);
        for layer in &self.model.layers {
            match layer {
                Layer::Conv(c) => {
                    w.array(&c.weights);
                    w.array(&c.bias);
                }
                Layer::BatchNorm(b) => {
                    w.array(&b.gamma);
                    w.array(&b.beta);
                    w.array(&b.running_mean);
                    w.array(&b.running_var);
                }
                Layer::Relu => {}
                Layer::Dense(d) => {
                    w.array(&d.weights);
                    w.array(&d.bias);
                }
            }
        }
        w.0
    }

    pub fn from_bytes(buf: &[u8]) -> std::result::Result<Self, String> {
        let mut r = Reader { buf, pos: 0 };
        if r.take(4)? != MAGIC {
            return Err("not a model checkpoint (bad magic)".into());
        }
        let version = r.u32()?;
        if version != VERSION as usize {
            return Err(format!("unsupported checkpoint version {version}"));
        }
        let in_ch = r.u32()?;
        let n_convs = r.u32()?;
        if n_convs > 64 {
            return Err(format!("implausible layer count {n_convs}"));
        }
        let mut convs = Vec::with_capacity(n_convs);
        for _ in 0..n_convs {
            convs.push(ConvSpec { out_ch: r.u32()?, kh: r.u32()?, kw: r.u32()? });
        }
        let arch = ArchConfig { in_ch, convs, relu: r.u8()? != 0, relu_after_last_block: r.u8()? != 0 };
        let seed = r.u64()?;
        let epochs = r.u32()?;
        let batch_size = r.u32()?;
        let train_split = r.f64()?;
        let adam = AdamConfig {
            learning_rate: r.f64()?,
            beta1: r.f64()?,
            beta2: r.f64()?,
            epsilon: r.f64()?,
            bias_correction: r.u8()? != 0,
        };
        let mut model = build_model::<f32>(&arch, 0).map_err(|e| e.to_string())?;
        for layer in &mut model.layers {
            match layer {
                Layer::Conv(c) => {
                    r.array_into(&mut c.weights)?;
                    r.array_into(&mut c.bias)?;
                }
                Layer::BatchNorm(b) => {
                    let BatchNorm2d { gamma, beta, running_mean, running_var, .. } = b;
                    r.array_into(gamma)?;
                    r.array_into(beta)?;
                    r.array_into(running_mean)?;
                    r.array_into(running_var)?;
                }
                Layer::Relu => {}
                Layer::Dense(d) => {
                    r.array_into(&mut d.weights)?;
                    r.array_into(&mut d.bias)?;
                }
            }
        }
        if r.pos != buf.len() {
            return Err("trailing bytes after checkpoint".into());
        }
        Ok(Self { model, train: TrainConfig { epochs, batch_size, train_split, seed, adam } })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let buf = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&buf).map_err(|reason| Error::format(path, reason))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::layers::Mode;
    use crate::nn::tensor::Tensor;

    fn trained_like() -> Checkpoint {
        let mut model = build_model::<f32>(&ArchConfig::default(), 11).unwrap();
        // push some batch statistics into the running buffers
        let x = Tensor::from_vec([2, 2, 16, 4], (0..256).map(|i| (i as f32 * 0.37).sin()).collect()).unwrap();
        model.forward(&x, Mode::Train).unwrap();
        Checkpoint { model, train: TrainConfig { seed: 77, ..Default::default() } }
    }

    #[test]
    fn round_trip_is_exact() {
        let ck = trained_like();
        let bytes = ck.to_bytes();
        assert_eq!(&bytes[..4], b"CVXM");
        assert_eq!(u32::from_le_bytes(bytes[4..8].try_into().unwrap()), VERSION);
        let back = Checkpoint::from_bytes(&bytes).unwrap();
        assert_eq!(back, ck);
        assert_eq!(back.to_bytes(), bytes);
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.cvxm");
        let ck = trained_like();
        ck.save(&path).unwrap();
        assert_eq!(Checkpoint::load(&path).unwrap(), ck);
    }

    #[test]
    fn corrupt_inputs_rejected() {
        let bytes = trained_like().to_bytes();
        assert!(Checkpoint::from_bytes(&bytes[..bytes.len() - 1]).is_err());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(Checkpoint::from_bytes(&bad).is_err());
        let mut extra = bytes;
        extra.push(0);
        assert!(Checkpoint::from_bytes(&extra).is_err());
        let missing = Checkpoint::load(Path::new("/nonexistent/model.cvxm")).unwrap_err();
        assert!(missing.to_string().contains("/nonexistent/model.cvxm"));
    }
}
