//! Mini-batch training with Adam on MSE loss. Deterministic given the seed:
//! batches are drawn from a seeded shuffle and the arithmetic is
//! single-threaded.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::adam::{adam_step, AdamConfig, AdamState};
use super::model::Model;
use super::tensor::{Real, Tensor};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub train_split: f64,
    pub seed: u64,
    pub adam: AdamConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 20,
            batch_size: 32,
            train_split: 0.3,
            seed: 0,
            adam: AdamConfig::default(),
        }
    }
}

/// One input/target pair, each a `(1, 2, 576, 14)` tensor.
#[derive(Debug, Clone)]
pub struct TrainSample<T> {
    /// Samples sharing a stratum (e.g. one speed/SNR point) are split together.
    pub stratum: u64,
    pub input: Tensor<T>,
    pub target: Tensor<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    /// Mean training loss of each epoch.
    pub loss_history: Vec<f64>,
    pub steps: u64,
}

/// Picks `round(fraction * count)` members (at least one) of every stratum
/// with a seeded shuffle. Input is `(stratum, count)`; output lists the
/// chosen member indices per stratum, ascending.
pub fn stratified_split(strata: &[(u64, usize)], fraction: f64, seed: u64) -> Vec<Vec<usize>> {
    strata
        .iter()
        .map(|&(id, count)| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ id.wrapping_mul(0x9E37_79B9_7F4A_7C15));
            let mut idx: Vec<usize> = (0..count).collect();
            idx.shuffle(&mut rng);
            let take = ((fraction * count as f64).round() as usize).clamp(count.min(1), count);
            let mut chosen = idx[..take].to_vec();
            chosen.sort_unstable();
            chosen
        })
        .collect()
}

/// Trains on every given sample. `on_epoch` sees the epoch index and its
/// mean loss.
pub fn fit<T: Real>(
    model: &mut Model<T>,
    samples: &[TrainSample<T>],
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(usize, f64),
) -> Result<TrainReport> {
    if samples.is_empty() {
        return Err(Error::InvalidArgument("training set is empty".into()));
    }
    if cfg.batch_size < 2 {
        return Err(Error::InvalidArgument("batch size must be at least 2".into()));
    }
    let mut state = AdamState::new(cfg.adam.clone(), &model.param_shapes());
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..samples.len()).collect();
    let mut history = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        let mut counted = 0usize;
        for batch in order.chunks(cfg.batch_size) {
            // batch norm needs two samples; a trailing singleton is skipped
            if batch.len() < 2 {
                continue;
            }
            let x = Tensor::stack(&batch.iter().map(|&i| &samples[i].input).collect::<Vec<_>>())?;
            let y = Tensor::stack(&batch.iter().map(|&i| &samples[i].target).collect::<Vec<_>>())?;
            let (loss, grads) = model.loss_and_gradients(&x, &y)?;
            let grad_refs: Vec<&[T]> = grads.iter().map(Vec::as_slice).collect();
            adam_step(&mut model.params_mut(), &grad_refs, &mut state);
            total += loss.to_f64().unwrap() * batch.len() as f64;
            counted += batch.len();
        }
        let mean = total / counted.max(1) as f64;
        on_epoch(epoch, mean);
        history.push(mean);
    }
    Ok(TrainReport {
        loss_history: history,
        steps: state.t,
    })
}

/// Stratified split by `cfg.train_split`, then [`fit`] on the chosen part.
/// Returns the report and the indices of the training samples.
pub fn train<T: Real>(model: &mut Model<T>, dataset: &[TrainSample<T>], cfg: &TrainConfig) -> Result<(TrainReport, Vec<usize>)> {
    if dataset.is_empty() {
        return Err(Error::InvalidArgument("dataset is empty".into()));
    }
    let mut strata: Vec<(u64, Vec<usize>)> = Vec::new();
    for (i, s) in dataset.iter().enumerate() {
        match strata.iter_mut().find(|(id, _)| *id == s.stratum) {
            Some((_, members)) => members.push(i),
            None => strata.push((s.stratum, vec![i])),
        }
    }
    let counts: Vec<(u64, usize)> = strata.iter().map(|(id, m)| (*id, m.len())).collect();
    let picks = stratified_split(&counts, cfg.train_split, cfg.seed);
    let mut chosen: Vec<usize> = strata
        .iter()
        .zip(&picks)
        .flat_map(|((_, members), p)| p.iter().map(move |&j| members[j]))
        .collect();
    chosen.sort_unstable();
    let subset: Vec<TrainSample<T>> = chosen.iter().map(|&i| dataset[i].clone()).collect();
    let report = fit(model, &subset, cfg, |_, _| {})?;
    Ok((report, chosen))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::layers::Mode;
    use crate::nn::model::{build_model, ArchConfig, ConvSpec};
    use rand::Rng;

    fn small_arch() -> ArchConfig {
        ArchConfig {
            in_ch: 2,
            convs: vec![ConvSpec { out_ch: 4, kh: 3, kw: 3 }, ConvSpec { out_ch: 2, kh: 3, kw: 3 }],
            relu: true,
            relu_after_last_block: false,
        }
    }

    fn denoise_set(n: usize, seed: u64) -> Vec<TrainSample<f32>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|i| {
                let a: f32 = rng.random_range(-1.0..1.0);
                let clean: Vec<f32> = (0..2 * 16 * 6).map(|k| a * ((k % 16) as f32 * 0.3).cos()).collect();
                let noisy: Vec<f32> = clean.iter().map(|v| v + rng.random_range(-0.5..0.5)).collect();
                TrainSample {
                    stratum: (i % 3) as u64,
                    input: Tensor::from_vec([1, 2, 16, 6], noisy).unwrap(),
                    target: Tensor::from_vec([1, 2, 16, 6], clean).unwrap(),
                }
            })
            .collect()
    }

    #[test]
    fn split_counts_and_determinism() {
        let strata = [(1, 100), (2, 10), (3, 1)];
        let a = stratified_split(&strata, 0.3, 9);
        assert_eq!(a.iter().map(Vec::len).collect::<Vec<_>>(), vec![30, 3, 1]);
        assert_eq!(a, stratified_split(&strata, 0.3, 9));
        assert_ne!(a, stratified_split(&strata, 0.3, 10));
    }

    #[test]
    fn loss_decreases_and_is_reproducible() {
        let data = denoise_set(60, 1);
        let cfg = TrainConfig { epochs: 15, batch_size: 8, train_split: 0.5, seed: 3, adam: AdamConfig { learning_rate: 1e-2, ..Default::default() } };
        let mut m1 = build_model::<f32>(&small_arch(), 2).unwrap();
        let (r1, idx) = train(&mut m1, &data, &cfg).unwrap();
        assert_eq!(idx.len(), 30);
        assert!(r1.loss_history.last().unwrap() < &r1.loss_history[0]);
        let mut m2 = build_model::<f32>(&small_arch(), 2).unwrap();
        let (r2, _) = train(&mut m2, &data, &cfg).unwrap();
        assert_eq!(r1, r2);
        assert_eq!(m1, m2);
    }

    #[test]
    fn bias_only_fit_converges() {
        // zero input and a constant target: the network only has to learn offsets
        let target = Tensor::from_vec([1, 2, 8, 4], vec![0.75f32; 64]).unwrap();
        let data: Vec<_> = (0..16)
            .map(|_| TrainSample { stratum: 0, input: Tensor::zeros([1, 2, 8, 4]), target: target.clone() })
            .collect();
        let cfg = TrainConfig { epochs: 150, batch_size: 4, train_split: 1.0, seed: 1, adam: AdamConfig { learning_rate: 2e-2, ..Default::default() } };
        let mut m = build_model::<f32>(&small_arch(), 4).unwrap();
        let report = fit(&mut m, &data, &cfg, |_, _| {}).unwrap();
        assert!(*report.loss_history.last().unwrap() < 1e-3, "{:?}", report.loss_history.last());
    }

    #[test]
    fn running_statistics_track_batch_statistics() {
        let data = denoise_set(48, 5);
        let cfg = TrainConfig { epochs: 1, batch_size: 8, train_split: 1.0, seed: 2, adam: AdamConfig::default() };
        let mut m = build_model::<f32>(&small_arch(), 6).unwrap();
        let probe_x = Tensor::stack(&data.iter().take(16).map(|s| &s.input).collect::<Vec<_>>()).unwrap();
        let gap = |m: &Model<f32>| {
            let mut a = m.clone();
            let mut b = m.clone();
            let inf = a.forward(&probe_x, Mode::Infer).unwrap();
            let tr = b.forward(&probe_x, Mode::Train).unwrap();
            inf.data().iter().zip(tr.data()).map(|(x, y)| ((x - y) as f64).powi(2)).sum::<f64>() / inf.data().len() as f64
        };
        let mut gaps = vec![gap(&m)];
        for _ in 0..3 {
            fit(&mut m, &data, &cfg, |_, _| {}).unwrap();
            gaps.push(gap(&m));
        }
        assert!(gaps[3] < gaps[0], "{gaps:?}");
    }

    #[test]
    fn empty_dataset_rejected() {
        let mut m = build_model::<f32>(&small_arch(), 0).unwrap();
        assert!(train(&mut m, &[], &TrainConfig::default()).is_err());
    }
}
