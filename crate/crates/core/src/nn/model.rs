//! The channel-denoising network: four convolution + batch-norm blocks and
//! a position-wise dense layer mapping back to the (re, im) channel pair.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::layers::*;
use super::loss::mse_loss;
use super::tensor::{Real, Tensor};
use crate::error::{Error, Result};
use crate::grid::{ResourceGrid, N_SUBCARRIERS, N_SYMBOLS};

use num_complex::Complex64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvSpec {
    pub out_ch: usize,
    pub kh: usize,
    pub kw: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ArchConfig {
    pub in_ch: usize,
    pub convs: Vec<ConvSpec>,
    /// ReLU after each batch norm except (by default) the last.
    pub relu: bool,
    pub relu_after_last_block: bool,
}

impl Default for ArchConfig {
    fn default() -> Self {
        let spec = |out_ch, kh, kw| ConvSpec { out_ch, kh, kw };
        Self {
            in_ch: 2,
            convs: vec![spec(16, 9, 3), spec(8, 5, 3), spec(4, 5, 3), spec(2, 3, 3)],
            relu: true,
            relu_after_last_block: false,
        }
    }
}

impl ArchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.convs.is_empty() {
            return Err(Error::InvalidArgument("network needs at least one convolution".into()));
        }
        if self.in_ch == 0 || self.convs.iter().any(|c| c.out_ch == 0 || c.kh % 2 == 0 || c.kw % 2 == 0) {
            return Err(Error::InvalidArgument("convolutions need channels and odd kernels".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Layer<T> {
    Conv(Conv2d<T>),
    BatchNorm(BatchNorm2d<T>),
    Relu,
    Dense(Dense<T>),
}

impl<T: Real> Layer<T> {
    pub fn name(&self) -> &'static str {
        match self {
            Layer::Conv(_) => "conv",
            Layer::BatchNorm(_) => "batchnorm",
            Layer::Relu => "relu",
            Layer::Dense(_) => "dense",
        }
    }

    fn params(&self) -> Vec<&[T]> {
        match self {
            Layer::Conv(c) => vec![&c.weights, &c.bias],
            Layer::BatchNorm(b) => vec![&b.gamma, &b.beta],
            Layer::Relu => vec![],
            Layer::Dense(d) => vec![&d.weights, &d.bias],
        }
    }

    fn params_mut(&mut self) -> Vec<&mut [T]> {
        match self {
            Layer::Conv(c) => vec![&mut c.weights, &mut c.bias],
            Layer::BatchNorm(b) => vec![&mut b.gamma, &mut b.beta],
            Layer::Relu => vec![],
            Layer::Dense(d) => vec![&mut d.weights, &mut d.bias],
        }
    }
}

enum Cache<T> {
    Input(Tensor<T>),
    Bn(BnCache<T>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Model<T> {
    pub arch: ArchConfig,
    pub layers: Vec<Layer<T>>,
}

/// Gradients for every trainable buffer, in [`Model::params`] order.
pub type Gradients<T> = Vec<Vec<T>>;

pub fn build_model<T: Real>(arch: &ArchConfig, seed: u64) -> Result<Model<T>> {
    arch.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut layers = Vec::new();
    let mut ch = arch.in_ch;
    let last = arch.convs.len() - 1;
    for (i, spec) in arch.convs.iter().enumerate() {
        layers.push(Layer::Conv(Conv2d::init(ch, spec.out_ch, spec.kh, spec.kw, &mut rng)?));
        layers.push(Layer::BatchNorm(BatchNorm2d::new(spec.out_ch)));
        if arch.relu && (i != last || arch.relu_after_last_block) {
            layers.push(Layer::Relu);
        }
        ch = spec.out_ch;
    }
    layers.push(Layer::Dense(Dense::init(ch, arch.in_ch, &mut rng)));
    Ok(Model {
        arch: arch.clone(),
        layers,
    })
}

impl<T: Real> Model<T> {
    pub fn params(&self) -> Vec<&[T]> {
        self.layers.iter().flat_map(Layer::params).collect()
    }

    pub fn params_mut(&mut self) -> Vec<&mut [T]> {
        self.layers.iter_mut().flat_map(Layer::params_mut).collect()
    }

    pub fn param_count(&self) -> usize {
        self.params().iter().map(|p| p.len()).sum()
    }

    pub fn param_shapes(&self) -> Vec<usize> {
        self.params().iter().map(|p| p.len()).collect()
    }

    pub fn forward(&mut self, x: &Tensor<T>, mode: Mode) -> Result<Tensor<T>> {
        let mut h = x.clone();
        for layer in &mut self.layers {
            h = match layer {
                Layer::Conv(c) => conv_forward(&h, c)?,
                Layer::BatchNorm(b) => batchnorm_forward(&h, b, mode)?.0,
                Layer::Relu => relu_forward(&h),
                Layer::Dense(d) => dense_forward(&h, d)?,
            };
        }
        Ok(h)
    }

    /// Train-mode forward pass, loss against `target`, and backward pass.
    pub fn loss_and_gradients(&mut self, x: &Tensor<T>, target: &Tensor<T>) -> Result<(T, Gradients<T>)> {
        let mut caches = Vec::with_capacity(self.layers.len());
        let mut h = x.clone();
        for layer in &mut self.layers {
            h = match layer {
                Layer::Conv(c) => {
                    let y = conv_forward(&h, c)?;
                    caches.push(Cache::Input(h));
                    y
                }
                Layer::BatchNorm(b) => {
                    let (y, cache) = batchnorm_forward(&h, b, Mode::Train)?;
                    caches.push(Cache::Bn(cache.expect("train mode caches")));
                    y
                }
                Layer::Relu => {
                    let y = relu_forward(&h);
                    caches.push(Cache::Input(h));
                    y
                }
                Layer::Dense(d) => {
                    let y = dense_forward(&h, d)?;
                    caches.push(Cache::Input(h));
                    y
                }
            };
        }
        let (loss, mut grad) = mse_loss(&h, target)?;

        let mut grads: Vec<Vec<Vec<T>>> = Vec::with_capacity(self.layers.len());
        for (layer, cache) in self.layers.iter().zip(caches).rev() {
            match (layer, cache) {
                (Layer::Conv(c), Cache::Input(input)) => {
                    let g = conv_backward(&grad, &input, c)?;
                    grad = g.grad_x;
                    grads.push(vec![g.grad_w, g.grad_b]);
                }
                (Layer::BatchNorm(b), Cache::Bn(cache)) => {
                    let g = batchnorm_backward(&grad, &cache, b)?;
                    grad = g.grad_x;
                    grads.push(vec![g.grad_gamma, g.grad_beta]);
                }
                (Layer::Relu, Cache::Input(input)) => {
                    grad = relu_backward(&grad, &input);
                    grads.push(vec![]);
                }
                (Layer::Dense(d), Cache::Input(input)) => {
                    let g = dense_backward(&grad, &input, d)?;
                    grad = g.grad_x;
                    grads.push(vec![g.grad_w, g.grad_b]);
                }
                _ => unreachable!("cache kind follows layer kind"),
            }
        }
        grads.reverse();
        Ok((loss, grads.into_iter().flatten().collect()))
    }

    /// Inference on one channel matrix.
    pub fn predict(&mut self, h_noisy: &ResourceGrid) -> Result<ResourceGrid> {
        let x = grid_to_tensor::<T>(h_noisy);
        let y = self.forward(&x, Mode::Infer)?;
        tensor_to_grid(&y, 0)
    }
}

/// Complex grid to a `(1, 2, 576, 14)` tensor of real and imaginary parts.
pub fn grid_to_tensor<T: Real>(grid: &ResourceGrid) -> Tensor<T> {
    let mut data = vec![T::zero(); 2 * N_SUBCARRIERS * N_SYMBOLS];
    let plane = N_SUBCARRIERS * N_SYMBOLS;
    for sym in 0..N_SYMBOLS {
        for (sc, v) in grid.column(sym).iter().enumerate() {
            data[sc * N_SYMBOLS + sym] = T::lit(v.re);
            data[plane + sc * N_SYMBOLS + sym] = T::lit(v.im);
        }
    }
    Tensor::from_vec([1, 2, N_SUBCARRIERS, N_SYMBOLS], data).expect("fixed shape")
}

/// Sample `index` of a `(n, 2, 576, 14)` tensor back to a complex grid.
pub fn tensor_to_grid<T: Real>(t: &Tensor<T>, index: usize) -> Result<ResourceGrid> {
    let [n, c, h, w] = t.shape();
    if c != 2 || h != N_SUBCARRIERS || w != N_SYMBOLS || index >= n {
        return Err(Error::Dimension {
            what: "channel tensor",
            expected: 2 * N_SUBCARRIERS * N_SYMBOLS,
            got: c * h * w,
        });
    }
    let (re, im) = (t.plane(index, 0), t.plane(index, 1));
    Ok(ResourceGrid::from_fn(|sc, sym| {
        let i = sc * N_SYMBOLS + sym;
        Complex64::new(re[i].to_f64().unwrap(), im[i].to_f64().unwrap())
    }))
}

/// Mean squared error of one complex grid against another.
pub fn grid_loss(pred: &ResourceGrid, target: &ResourceGrid) -> f64 {
    let a = grid_to_tensor::<f64>(pred);
    let b = grid_to_tensor::<f64>(target);
    mse_loss(&a, &b).map(|(l, _)| l).unwrap_or(f64::NAN)
}
