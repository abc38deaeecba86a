//! Layer primitives with exact backward passes.
//!
//! Convolutions run on zero-padded planes laid out with a fixed row pitch
//! `width + kw - 1`, so every kernel tap becomes one long contiguous
//! multiply-add over the whole plane. Output columns past `width` are
//! scratch and are cropped.

use rand::Rng;

use super::tensor::{Real, Tensor};
use crate::error::{Error, Result};

const BLOCK: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Infer,
}

/// 2-D cross-correlation layer with stride 1 and "same" zero padding.
#[derive(Debug, Clone, PartialEq)]
pub struct Conv2d<T> {
    pub in_ch: usize,
    pub out_ch: usize,
    pub kh: usize,
    pub kw: usize,
    /// `(out_ch, in_ch, kh, kw)` row-major.
    pub weights: Vec<T>,
    pub bias: Vec<T>,
}

impl<T: Real> Conv2d<T> {
    pub fn zeros(in_ch: usize, out_ch: usize, kh: usize, kw: usize) -> Result<Self> {
        if kh % 2 == 0 || kw % 2 == 0 {
            return Err(Error::InvalidArgument(format!("kernel {kh}x{kw} must have odd sides")));
        }
        Ok(Self {
            in_ch,
            out_ch,
            kh,
            kw,
            weights: vec![T::zero(); out_ch * in_ch * kh * kw],
            bias: vec![T::zero(); out_ch],
        })
    }

    /// He-uniform initialization over the fan-in; zero bias.
    pub fn init(in_ch: usize, out_ch: usize, kh: usize, kw: usize, rng: &mut impl Rng) -> Result<Self> {
        let mut layer = Self::zeros(in_ch, out_ch, kh, kw)?;
        let bound = (6.0 / (in_ch * kh * kw) as f64).sqrt();
        layer.weights.iter_mut().for_each(|w| *w = T::lit(rng.random_range(-bound..bound)));
        Ok(layer)
    }

    #[inline]
    fn w(&self, oc: usize, ic: usize, ki: usize, kj: usize) -> T {
        self.weights[((oc * self.in_ch + ic) * self.kh + ki) * self.kw + kj]
    }
}

#[derive(Debug, Clone)]
pub struct ConvGrads<T> {
    pub grad_x: Tensor<T>,
    pub grad_w: Vec<T>,
    pub grad_b: Vec<T>,
}

struct PadGeom {
    h: usize,
    w: usize,
    ph: usize,
    pw: usize,
    pitch: usize,
    /// Output plane in padded pitch.
    wide_len: usize,
    /// Padded input plane plus slack so the last tap stays in bounds.
    padded_len: usize,
}

impl PadGeom {
    fn new(h: usize, w: usize, kh: usize, kw: usize) -> Self {
        let pitch = w + kw - 1;
        Self {
            h,
            w,
            ph: kh / 2,
            pw: kw / 2,
            pitch,
            wide_len: h * pitch,
            padded_len: (h + kh - 1) * pitch + kw - 1,
        }
    }

    fn pad_into<T: Real>(&self, plane: &[T], out: &mut [T]) {
        out.fill(T::zero());
        for r in 0..self.h {
            let dst = (r + self.ph) * self.pitch + self.pw;
            out[dst..dst + self.w].copy_from_slice(&plane[r * self.w..(r + 1) * self.w]);
        }
    }

    fn widen_into<T: Real>(&self, plane: &[T], out: &mut [T]) {
        out.fill(T::zero());
        for r in 0..self.h {
            out[r * self.pitch..r * self.pitch + self.w].copy_from_slice(&plane[r * self.w..(r + 1) * self.w]);
        }
    }

    fn crop_wide<T: Real>(&self, wide: &[T], out: &mut [T]) {
        for r in 0..self.h {
            out[r * self.w..(r + 1) * self.w].copy_from_slice(&wide[r * self.pitch..r * self.pitch + self.w]);
        }
    }

    fn crop_padded<T: Real>(&self, padded: &[T], out: &mut [T]) {
        for r in 0..self.h {
            let src = (r + self.ph) * self.pitch + self.pw;
            out[r * self.w..(r + 1) * self.w].copy_from_slice(&padded[src..src + self.w]);
        }
    }
}

/// `acc[t] += sum_taps w * src[t + off]` over blocks small enough to stay in cache.
fn correlate_accumulate<T: Real>(acc: &mut [T], src: &[T], taps: &[(usize, T)]) {
    let len = acc.len();
    let mut start = 0;
    while start < len {
        let end = (start + BLOCK).min(len);
        let a = &mut acc[start..end];
        for &(off, w) in taps {
            let s = &src[start + off..end + off];
            for (x, &y) in a.iter_mut().zip(s) {
                *x = *x + w * y;
            }
        }
        start = end;
    }
}

/// `dst[t + off] += w * src[t]` for every tap.
fn scatter_accumulate<T: Real>(dst: &mut [T], src: &[T], taps: &[(usize, T)]) {
    let len = src.len();
    let mut start = 0;
    while start < len {
        let end = (start + BLOCK).min(len);
        let s = &src[start..end];
        for &(off, w) in taps {
            let d = &mut dst[start + off..end + off];
            for (x, &y) in d.iter_mut().zip(s) {
                *x = *x + w * y;
            }
        }
        start = end;
    }
}

fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    let mut partial = [T::zero(); 8];
    let chunks = a.len() / 8;
    for c in 0..chunks {
        let (x, y) = (&a[c * 8..c * 8 + 8], &b[c * 8..c * 8 + 8]);
        for k in 0..8 {
            partial[k] = partial[k] + x[k] * y[k];
        }
    }
    let mut sum = partial.iter().fold(T::zero(), |s, &v| s + v);
    for k in chunks * 8..a.len() {
        sum = sum + a[k] * b[k];
    }
    sum
}

fn check_channels<T: Real>(x: &Tensor<T>, expected: usize, what: &'static str) -> Result<()> {
    if x.channels() != expected {
        return Err(Error::Dimension {
            what,
            expected,
            got: x.channels(),
        });
    }
    Ok(())
}

pub fn conv_forward<T: Real>(x: &Tensor<T>, layer: &Conv2d<T>) -> Result<Tensor<T>> {
    check_channels(x, layer.in_ch, "convolution input channels")?;
    let [n, _, h, w] = x.shape();
    let g = PadGeom::new(h, w, layer.kh, layer.kw);
    let mut out = Tensor::zeros([n, layer.out_ch, h, w]);
    let mut padded = vec![T::zero(); layer.in_ch * g.padded_len];
    let mut wide = vec![T::zero(); g.wide_len];
    let mut taps = Vec::with_capacity(layer.kh * layer.kw);
    for b in 0..n {
        for ic in 0..layer.in_ch {
            g.pad_into(x.plane(b, ic), &mut padded[ic * g.padded_len..(ic + 1) * g.padded_len]);
        }
        for oc in 0..layer.out_ch {
            wide.fill(layer.bias[oc]);
            for ic in 0..layer.in_ch {
                taps.clear();
                for ki in 0..layer.kh {
                    for kj in 0..layer.kw {
                        taps.push((ki * g.pitch + kj, layer.w(oc, ic, ki, kj)));
                    }
                }
                correlate_accumulate(&mut wide, &padded[ic * g.padded_len..(ic + 1) * g.padded_len], &taps);
            }
            g.crop_wide(&wide, out.plane_mut(b, oc));
        }
    }
    Ok(out)
}

pub fn conv_backward<T: Real>(grad_out: &Tensor<T>, x: &Tensor<T>, layer: &Conv2d<T>) -> Result<ConvGrads<T>> {
    check_channels(x, layer.in_ch, "convolution input channels")?;
    check_channels(grad_out, layer.out_ch, "convolution output gradient channels")?;
    let [n, _, h, w] = x.shape();
    if grad_out.shape() != [n, layer.out_ch, h, w] {
        return Err(Error::Dimension {
            what: "convolution output gradient",
            expected: n * layer.out_ch * h * w,
            got: grad_out.data().len(),
        });
    }
    let g = PadGeom::new(h, w, layer.kh, layer.kw);
    let mut grad_x = Tensor::zeros(x.shape());
    let mut grad_w = vec![T::zero(); layer.weights.len()];
    let mut grad_b = vec![T::zero(); layer.out_ch];
    let mut padded = vec![T::zero(); layer.in_ch * g.padded_len];
    let mut wide_g = vec![T::zero(); layer.out_ch * g.wide_len];
    let mut grad_pad = vec![T::zero(); g.padded_len];
    let mut taps = Vec::with_capacity(layer.kh * layer.kw);
    for b in 0..n {
        for ic in 0..layer.in_ch {
            g.pad_into(x.plane(b, ic), &mut padded[ic * g.padded_len..(ic + 1) * g.padded_len]);
        }
        for oc in 0..layer.out_ch {
            let plane = grad_out.plane(b, oc);
            grad_b[oc] = grad_b[oc] + plane.iter().copied().sum::<T>();
            g.widen_into(plane, &mut wide_g[oc * g.wide_len..(oc + 1) * g.wide_len]);
        }
        for oc in 0..layer.out_ch {
            let go = &wide_g[oc * g.wide_len..(oc + 1) * g.wide_len];
            for ic in 0..layer.in_ch {
                let p = &padded[ic * g.padded_len..(ic + 1) * g.padded_len];
                for ki in 0..layer.kh {
                    for kj in 0..layer.kw {
                        let off = ki * g.pitch + kj;
                        let idx = ((oc * layer.in_ch + ic) * layer.kh + ki) * layer.kw + kj;
                        grad_w[idx] = grad_w[idx] + dot(go, &p[off..off + g.wide_len]);
                    }
                }
            }
        }
        for ic in 0..layer.in_ch {
            grad_pad.fill(T::zero());
            for oc in 0..layer.out_ch {
                taps.clear();
                for ki in 0..layer.kh {
                    for kj in 0..layer.kw {
                        taps.push((ki * g.pitch + kj, layer.w(oc, ic, ki, kj)));
                    }
                }
                scatter_accumulate(&mut grad_pad, &wide_g[oc * g.wide_len..(oc + 1) * g.wide_len], &taps);
            }
            g.crop_padded(&grad_pad, grad_x.plane_mut(b, ic));
        }
    }
    Ok(ConvGrads { grad_x, grad_w, grad_b })
}

/// Per-channel batch normalization.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchNorm2d<T> {
    pub gamma: Vec<T>,
    pub beta: Vec<T>,
    pub running_mean: Vec<T>,
    pub running_var: Vec<T>,
    /// Weight of the current batch in the running statistics.
    pub momentum: T,
    pub eps: T,
}

impl<T: Real> BatchNorm2d<T> {
    pub fn new(channels: usize) -> Self {
        Self {
            gamma: vec![T::one(); channels],
            beta: vec![T::zero(); channels],
            running_mean: vec![T::zero(); channels],
            running_var: vec![T::one(); channels],
            momentum: T::lit(0.1),
            eps: T::lit(1e-5),
        }
    }

    pub fn channels(&self) -> usize {
        self.gamma.len()
    }
}

#[derive(Debug, Clone)]
pub struct BnCache<T> {
    pub x_hat: Tensor<T>,
    pub inv_std: Vec<T>,
}

/// Train mode normalizes with batch statistics and updates the running
/// statistics; infer mode uses the running statistics and returns no cache.
pub fn batchnorm_forward<T: Real>(x: &Tensor<T>, layer: &mut BatchNorm2d<T>, mode: Mode) -> Result<(Tensor<T>, Option<BnCache<T>>)> {
    check_channels(x, layer.channels(), "batch norm channels")?;
    let [n, c, _, _] = x.shape();
    let plane = x.plane_len();
    let mut out = Tensor::zeros(x.shape());
    match mode {
        Mode::Infer => {
            for ch in 0..c {
                let inv = T::one() / (layer.running_var[ch] + layer.eps).sqrt();
                let (g, bt, mu) = (layer.gamma[ch], layer.beta[ch], layer.running_mean[ch]);
                for b in 0..n {
                    let src = x.plane(b, ch);
                    for (o, &v) in out.plane_mut(b, ch).iter_mut().zip(src) {
                        *o = g * (v - mu) * inv + bt;
                    }
                }
            }
            Ok((out, None))
        }
        Mode::Train => {
            if n < 2 {
                return Err(Error::InvalidArgument("batch norm training needs a batch of at least 2".into()));
            }
            let count = T::from_usize(n * plane).unwrap();
            let mut x_hat = Tensor::zeros(x.shape());
            let mut inv_std = vec![T::zero(); c];
            for ch in 0..c {
                let mut sum = 0.0f64;
                for b in 0..n {
                    sum += x.plane(b, ch).iter().map(|v| v.to_f64().unwrap()).sum::<f64>();
                }
                let mean = sum / (n * plane) as f64;
                let mut sq = 0.0f64;
                for b in 0..n {
                    sq += x.plane(b, ch).iter().map(|v| (v.to_f64().unwrap() - mean).powi(2)).sum::<f64>();
                }
                let var = sq / (n * plane) as f64;
                let inv = T::one() / (T::lit(var) + layer.eps).sqrt();
                inv_std[ch] = inv;
                let mu = T::lit(mean);
                let (g, bt) = (layer.gamma[ch], layer.beta[ch]);
                for b in 0..n {
                    let src = x.plane(b, ch);
                    let dst = out.plane_mut(b, ch).iter_mut().zip(x_hat.plane_mut(b, ch));
                    for ((o, xh), &v) in dst.zip(src) {
                        *xh = (v - mu) * inv;
                        *o = g * *xh + bt;
                    }
                }
                let m = layer.momentum;
                let unbiased = T::lit(var) * count / (count - T::one());
                layer.running_mean[ch] = (T::one() - m) * layer.running_mean[ch] + m * mu;
                layer.running_var[ch] = (T::one() - m) * layer.running_var[ch] + m * unbiased;
            }
            Ok((out, Some(BnCache { x_hat, inv_std })))
        }
    }
}

pub struct BnGrads<T> {
    pub grad_x: Tensor<T>,
    pub grad_gamma: Vec<T>,
    pub grad_beta: Vec<T>,
}

pub fn batchnorm_backward<T: Real>(grad_out: &Tensor<T>, cache: &BnCache<T>, layer: &BatchNorm2d<T>) -> Result<BnGrads<T>> {
    if grad_out.shape() != cache.x_hat.shape() {
        return Err(Error::Dimension {
            what: "batch norm gradient",
            expected: cache.x_hat.data().len(),
            got: grad_out.data().len(),
        });
    }
    let [n, c, _, _] = grad_out.shape();
    let m = T::from_usize(n * grad_out.plane_len()).unwrap();
    let mut grad_x = Tensor::zeros(grad_out.shape());
    let mut grad_gamma = vec![T::zero(); c];
    let mut grad_beta = vec![T::zero(); c];
    for ch in 0..c {
        let (mut dg, mut db) = (T::zero(), T::zero());
        for b in 0..n {
            db = db + grad_out.plane(b, ch).iter().copied().sum::<T>();
            dg = dg + dot(grad_out.plane(b, ch), cache.x_hat.plane(b, ch));
        }
        grad_gamma[ch] = dg;
        grad_beta[ch] = db;
        let k = layer.gamma[ch] * cache.inv_std[ch] / m;
        for b in 0..n {
            let go = grad_out.plane(b, ch);
            let xh = cache.x_hat.plane(b, ch);
            for ((o, &g), &x) in grad_x.plane_mut(b, ch).iter_mut().zip(go).zip(xh) {
                *o = k * (m * g - db - x * dg);
            }
        }
    }
    Ok(BnGrads { grad_x, grad_gamma, grad_beta })
}

pub fn relu_forward<T: Real>(x: &Tensor<T>) -> Tensor<T> {
    x.map(|v| if v > T::zero() { v } else { T::zero() })
}

pub fn relu_backward<T: Real>(grad_out: &Tensor<T>, x: &Tensor<T>) -> Tensor<T> {
    let data = grad_out
        .data()
        .iter()
        .zip(x.data())
        .map(|(&g, &v)| if v > T::zero() { g } else { T::zero() })
        .collect();
    Tensor::from_vec(x.shape(), data).expect("same shape")
}

/// Channel-mixing affine map applied independently at every position.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense<T> {
    pub in_ch: usize,
    pub out_ch: usize,
    /// `(out_ch, in_ch)` row-major.
    pub weights: Vec<T>,
    pub bias: Vec<T>,
}

impl<T: Real> Dense<T> {
    pub fn identity(ch: usize) -> Self {
        let mut weights = vec![T::zero(); ch * ch];
        (0..ch).for_each(|i| weights[i * ch + i] = T::one());
        Self {
            in_ch: ch,
            out_ch: ch,
            weights,
            bias: vec![T::zero(); ch],
        }
    }

    pub fn init(in_ch: usize, out_ch: usize, rng: &mut impl Rng) -> Self {
        let bound = (3.0 / in_ch as f64).sqrt();
        Self {
            in_ch,
            out_ch,
            weights: (0..in_ch * out_ch).map(|_| T::lit(rng.random_range(-bound..bound))).collect(),
            bias: vec![T::zero(); out_ch],
        }
    }
}

pub struct DenseGrads<T> {
    pub grad_x: Tensor<T>,
    pub grad_w: Vec<T>,
    pub grad_b: Vec<T>,
}

pub fn dense_forward<T: Real>(x: &Tensor<T>, layer: &Dense<T>) -> Result<Tensor<T>> {
    check_channels(x, layer.in_ch, "dense input channels")?;
    let [n, _, h, w] = x.shape();
    let mut out = Tensor::zeros([n, layer.out_ch, h, w]);
    for b in 0..n {
        for o in 0..layer.out_ch {
            let mut acc = vec![layer.bias[o]; h * w];
            for i in 0..layer.in_ch {
                let wt = layer.weights[o * layer.in_ch + i];
                for (a, &v) in acc.iter_mut().zip(x.plane(b, i)) {
                    *a = *a + wt * v;
                }
            }
            out.plane_mut(b, o).copy_from_slice(&acc);
        }
    }
    Ok(out)
}

pub fn dense_backward<T: Real>(grad_out: &Tensor<T>, x: &Tensor<T>, layer: &Dense<T>) -> Result<DenseGrads<T>> {
    check_channels(x, layer.in_ch, "dense input channels")?;
    check_channels(grad_out, layer.out_ch, "dense output gradient channels")?;
    let n = x.batch();
    let mut grad_x = Tensor::zeros(x.shape());
    let mut grad_w = vec![T::zero(); layer.weights.len()];
    let mut grad_b = vec![T::zero(); layer.out_ch];
    for b in 0..n {
        for o in 0..layer.out_ch {
            let go = grad_out.plane(b, o);
            grad_b[o] = grad_b[o] + go.iter().copied().sum::<T>();
            for i in 0..layer.in_ch {
                let idx = o * layer.in_ch + i;
                grad_w[idx] = grad_w[idx] + dot(go, x.plane(b, i));
                let wt = layer.weights[idx];
                for (d, &g) in grad_x.plane_mut(b, i).iter_mut().zip(go) {
                    *d = *d + wt * g;
                }
            }
        }
    }
    Ok(DenseGrads { grad_x, grad_w, grad_b })
}
