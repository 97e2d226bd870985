//! Mini-batch Adam training of the residual denoiser.

use ndarray::{Array1, Array2};
use rand::seq::SliceRandom;

use super::cnn::{backward, forward_batch, residual_loss, BnMode, DenoiserWeights, FeatureInput, LayerGrad};
use super::dataset::TrainingPair;
use crate::error::{Error, Result};
use crate::rng;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Multiplicative learning-rate decay applied after each epoch.
    pub lr_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_eps: f64,
    pub bn_momentum: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 8,
            batch_size: 8,
            learning_rate: 1e-3,
            lr_decay: 0.85,
            beta1: 0.9,
            beta2: 0.999,
            adam_eps: 1e-8,
            bn_momentum: 0.1,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainReport {
    pub weights: DenoiserWeights,
    /// Mean batch loss of every epoch.
    pub epoch_losses: Vec<f64>,
    pub initial_loss: f64,
    pub final_loss: f64,
}

struct Moments {
    m: Vec<LayerGrad>,
    v: Vec<LayerGrad>,
    t: i32,
}

fn zeros_like(weights: &DenoiserWeights) -> Vec<LayerGrad> {
    weights
        .layers
        .iter()
        .map(|l| LayerGrad {
            kernel: Array2::zeros(l.kernel.dim()),
            bias: Array1::zeros(l.bias.len()),
            bn: l.bn.as_ref().map(|b| (Array1::zeros(b.gamma.len()), Array1::zeros(b.gamma.len()))),
        })
        .collect()
}

fn adam_update<D: ndarray::Dimension>(
    p: &mut ndarray::Array<f64, D>,
    g: &ndarray::Array<f64, D>,
    m: &mut ndarray::Array<f64, D>,
    v: &mut ndarray::Array<f64, D>,
    cfg: &TrainConfig,
    lr_t: f64,
) {
    ndarray::Zip::from(p).and(g).and(m).and(v).for_each(|p, &g, m, v| {
        *m = cfg.beta1 * *m + (1.0 - cfg.beta1) * g;
        *v = cfg.beta2 * *v + (1.0 - cfg.beta2) * g * g;
        *p -= lr_t * *m / (v.sqrt() + cfg.adam_eps);
    });
}

impl Moments {
    fn step(&mut self, weights: &mut DenoiserWeights, grads: &[LayerGrad], cfg: &TrainConfig, lr: f64) {
        self.t += 1;
        let lr_t = lr * (1.0 - cfg.beta2.powi(self.t)).sqrt() / (1.0 - cfg.beta1.powi(self.t));
        for (((layer, g), m), v) in weights.layers.iter_mut().zip(grads).zip(&mut self.m).zip(&mut self.v) {
            adam_update(&mut layer.kernel, &g.kernel, &mut m.kernel, &mut v.kernel, cfg, lr_t);
            adam_update(&mut layer.bias, &g.bias, &mut m.bias, &mut v.bias, cfg, lr_t);
            if let (Some(bn), Some((dg, db)), Some((mg, mb)), Some((vg, vb))) =
                (layer.bn.as_mut(), &g.bn, m.bn.as_mut(), v.bn.as_mut())
            {
                adam_update(&mut bn.gamma, dg, mg, vg, cfg, lr_t);
                adam_update(&mut bn.beta, db, mb, vb, cfg, lr_t);
            }
        }
    }
}

fn inputs_of(pairs: &[&TrainingPair], noise_channel: bool) -> (Vec<FeatureInput>, Vec<Array2<f64>>) {
    pairs
        .iter()
        .map(|p| {
            let input = FeatureInput::new(&p.noisy, noise_channel.then_some(p.noise_level));
            let target = (&p.noisy - &p.clean).into_shape_with_order((1, p.noisy.len())).expect("contiguous");
            (input, target)
        })
        .unzip()
}

/// Loss `J` of the batch and its parameter gradients.
pub fn batch_gradients(weights: &DenoiserWeights, batch: &[&TrainingPair]) -> (f64, Vec<LayerGrad>, super::cnn::ForwardCache) {
    let (inputs, targets) = inputs_of(batch, weights.arch.noise_channel);
    let (out, cache) = forward_batch(weights, &inputs, BnMode::Batch);
    let (loss, d_out) = residual_loss(&out, &targets);
    let grads = backward(weights, &cache, &d_out);
    (loss, grads, cache)
}

/// Train `init` on `data`. Deterministic for a given `cfg.seed`.
pub fn cnn_train(init: DenoiserWeights, data: &[TrainingPair], cfg: &TrainConfig) -> Result<TrainReport> {
    init.validate()?;
    if data.is_empty() || cfg.batch_size == 0 || cfg.epochs == 0 {
        return Err(Error::InvalidArgument("training needs data, batch_size >= 1 and epochs >= 1".into()));
    }
    let mut weights = init;
    let mut rng = rng::seeded(cfg.seed);
    let mut moments = Moments { m: zeros_like(&weights), v: zeros_like(&weights), t: 0 };
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut lr = cfg.learning_rate;
    let mut initial = None;
    let mut epoch_losses = Vec::with_capacity(cfg.epochs);

    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        let mut batches = 0usize;
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<&TrainingPair> = chunk.iter().map(|&i| &data[i]).collect();
            let (loss, grads, cache) = batch_gradients(&weights, &batch);
            let init_loss = *initial.get_or_insert(loss);
            if !loss.is_finite() || loss > 10.0 * init_loss.max(f64::MIN_POSITIVE) {
                return Err(Error::Diverged { epoch, loss, initial: init_loss });
            }
            total += loss;
            batches += 1;
            moments.step(&mut weights, &grads, cfg, lr);
            for (layer, stats) in weights.layers.iter_mut().zip(&cache.batch_stats) {
                if let (Some(bn), Some((mean, var))) = (layer.bn.as_mut(), stats) {
                    let a = cfg.bn_momentum;
                    bn.running_mean = &bn.running_mean * (1.0 - a) + mean * a;
                    bn.running_var = &bn.running_var * (1.0 - a) + var * a;
                }
            }
        }
        let mean = total / batches as f64;
        log::debug!("epoch {epoch}: loss {mean:.6e}");
        epoch_losses.push(mean);
        lr *= cfg.lr_decay;
    }
    let final_loss = *epoch_losses.last().expect("at least one epoch");
    Ok(TrainReport { weights, epoch_losses, initial_loss: initial.unwrap_or(0.0), final_loss })
}
