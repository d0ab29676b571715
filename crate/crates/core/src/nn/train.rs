//! Mini-batch training with adaptive-moment updates.

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::RngSeed;
use crate::series::Pair;

use super::model::{ModelParams, PreparedPair};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: RngSeed,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// Cap on pairs visited per epoch (a fresh random subset each epoch);
    /// 0 visits every pair.
    pub max_pairs_per_epoch: usize,
    /// Anneals the step size along a half cosine to zero over the run.
    pub cosine_decay: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 20,
            batch_size: 64,
            learning_rate: 1e-2,
            seed: RngSeed(0),
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            max_pairs_per_epoch: 1024,
            cosine_decay: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::InvalidConfig("epochs and batch_size must be positive".into()));
        }
        if !(self.learning_rate >= 0.0) || !self.learning_rate.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "learning_rate must be finite and nonnegative, got {}",
                self.learning_rate
            )));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) || !(self.epsilon > 0.0) {
            return Err(Error::InvalidConfig("optimizer moments must lie in [0,1), epsilon > 0".into()));
        }
        Ok(())
    }
}

/// Adaptive-moment optimizer state for a flat list of tensors.
#[derive(Debug, Clone)]
pub struct Adam {
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    step: i32,
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
}

impl Adam {
    pub fn new(params: &ModelParams, cfg: &TrainConfig) -> Self {
        let zeros: Vec<Vec<f64>> = params.tensors().iter().map(|t| vec![0.0; t.len()]).collect();
        Self {
            m: zeros.clone(),
            v: zeros,
            step: 0,
            lr: cfg.learning_rate,
            beta1: cfg.beta1,
            beta2: cfg.beta2,
            eps: cfg.epsilon,
        }
    }

    pub fn set_learning_rate(&mut self, lr: f64) {
        self.lr = lr;
    }

    pub fn update(&mut self, params: &mut ModelParams, grads: &[Vec<f64>]) {
        self.step += 1;
        let bc1 = 1.0 - self.beta1.powi(self.step);
        let bc2 = 1.0 - self.beta2.powi(self.step);
        for (((t, g), m), v) in params
            .tensors_mut()
            .into_iter()
            .zip(grads)
            .zip(&mut self.m)
            .zip(&mut self.v)
        {
            for (((p, &gi), mi), vi) in t.data_mut().iter_mut().zip(g).zip(m.iter_mut()).zip(v.iter_mut()) {
                *mi = self.beta1 * *mi + (1.0 - self.beta1) * gi;
                *vi = self.beta2 * *vi + (1.0 - self.beta2) * gi * gi;
                let mhat = *mi / bc1;
                let vhat = *vi / bc2;
                *p -= self.lr * mhat / (vhat.sqrt() + self.eps);
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub params: ModelParams,
    /// Mean loss of each epoch, accumulated during the epoch.
    pub loss_trace: Vec<f64>,
}

/// Mean loss and summed gradient over `batch`, accumulated in index order.
fn batch_gradient(params: &ModelParams, batch: &[&PreparedPair]) -> Result<(f64, Vec<Vec<f64>>)> {
    let per_example: Vec<(f64, Vec<Vec<f64>>)> = batch
        .par_iter()
        .map(|p| params.loss_and_grad(p))
        .collect::<Result<_>>()?;
    let mut total = 0.0;
    let mut sum: Vec<Vec<f64>> = params.tensors().iter().map(|t| vec![0.0; t.len()]).collect();
    for (loss, g) in &per_example {
        total += loss;
        for (acc, gi) in sum.iter_mut().zip(g) {
            for (a, b) in acc.iter_mut().zip(gi) {
                *a += b;
            }
        }
    }
    let n = batch.len() as f64;
    for acc in &mut sum {
        for a in acc.iter_mut() {
            *a /= n;
        }
    }
    Ok((total, sum))
}

/// Mean binary cross-entropy of `params` over `pairs`.
pub fn mean_loss(params: &ModelParams, pairs: &[Pair<f64>]) -> Result<f64> {
    if pairs.is_empty() {
        return Err(Error::EmptyTrainingSet);
    }
    let prepared = prepare_all(params, pairs)?;
    let losses: Vec<f64> = prepared
        .par_iter()
        .map(|p| params.loss_and_grad(p).map(|(l, _)| l))
        .collect::<Result<_>>()?;
    Ok(losses.iter().sum::<f64>() / losses.len() as f64)
}

pub fn prepare_all(params: &ModelParams, pairs: &[Pair<f64>]) -> Result<Vec<PreparedPair>> {
    pairs.par_iter().map(|p| params.prepare(p)).collect()
}

/// Minimizes mean binary cross-entropy between window scores and labels.
pub fn train(pairs: &[Pair<f64>], init: ModelParams, cfg: &TrainConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    if pairs.is_empty() {
        return Err(Error::EmptyTrainingSet);
    }
    let prepared = prepare_all(&init, pairs)?;
    let mut params = init;
    let mut adam = Adam::new(&params, cfg);
    let mut loss_trace = Vec::with_capacity(cfg.epochs);
    let mut order: Vec<usize> = (0..prepared.len()).collect();
    let per_epoch = match cfg.max_pairs_per_epoch {
        0 => order.len(),
        m => m.min(order.len()),
    };
    let total_steps = (cfg.epochs * per_epoch.div_ceil(cfg.batch_size)) as f64;
    let mut step = 0usize;
    for epoch in 0..cfg.epochs {
        let mut rng = cfg.seed.derive(epoch as u64).rng();
        order.shuffle(&mut rng);
        let take = per_epoch;
        let mut epoch_loss = 0.0;
        for chunk in order[..take].chunks(cfg.batch_size) {
            if cfg.cosine_decay {
                let phase = std::f64::consts::PI * step as f64 / total_steps;
                adam.set_learning_rate(cfg.learning_rate * 0.5 * (1.0 + phase.cos()));
            }
            step += 1;
            let batch: Vec<&PreparedPair> = chunk.iter().map(|&i| &prepared[i]).collect();
            let (loss, grads) = batch_gradient(&params, &batch)?;
            epoch_loss += loss;
            adam.update(&mut params, &grads);
        }
        loss_trace.push(epoch_loss / take as f64);
    }
    Ok(TrainOutcome { params, loss_trace })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::model::{BranchSet, ModelConfig};
    use crate::nn::tcn::TcnConfig;
    use crate::nn::tensor::Tensor;

    fn small_config() -> ModelConfig {
        ModelConfig {
            dims: 1,
            encoder: TcnConfig {
                in_channels: 1,
                hidden_channels: 4,
                num_blocks: 2,
                kernel_size: 3,
                embedding_dim: 4,
            },
            branches: BranchSet::all(),
            decompose: true,
            lambda: 100.0,
        }
    }

    /// Noisy constant contexts; label-1 windows carry a spike in the suspect span.
    fn toy_set(n: usize) -> Vec<Pair<f64>> {
        use rand::Rng;
        let mut rng = RngSeed(11).rng();
        (0..n)
            .map(|i| {
                let mut full: Vec<f64> = (0..24).map(|_| 1.0 + 0.05 * rng.random_range(-1.0..1.0)).collect();
                let label = (i % 2) as u8;
                if label == 1 {
                    let t = rng.random_range(18..24);
                    full[t] += 3.0;
                }
                Pair {
                    source_id: format!("toy{i}"),
                    start: 0,
                    context_len: 18,
                    label,
                    full: vec![full],
                }
            })
            .collect()
    }

    #[test]
    fn zero_learning_rate_keeps_params() {
        let init = ModelParams::init(small_config(), RngSeed(1)).unwrap();
        let cfg = TrainConfig {
            epochs: 2,
            batch_size: 4,
            learning_rate: 0.0,
            ..TrainConfig::default()
        };
        let out = train(&toy_set(8), init.clone(), &cfg).unwrap();
        assert_eq!(out.params, init);
    }

    #[test]
    fn zero_head_balanced_loss_is_ln2() {
        let mut init = ModelParams::init(small_config(), RngSeed(1)).unwrap();
        init.head_w = Tensor::new(vec![1, 4], vec![0.0; 4]);
        init.head_b = Tensor::vector(vec![0.0]);
        let l = mean_loss(&init, &toy_set(10)).unwrap();
        assert!((l - std::f64::consts::LN_2).abs() < 1e-6);
    }

    #[test]
    fn empty_set() {
        let init = ModelParams::init(small_config(), RngSeed(1)).unwrap();
        assert!(matches!(train(&[], init, &TrainConfig::default()), Err(Error::EmptyTrainingSet)));
    }

    #[test]
    fn learns_separable_toy_set() {
        let pairs = toy_set(40);
        // Separability of the raw data: the largest standardized suspect
        // deviation splits the classes by a threshold.
        let dev = |p: &Pair<f64>| {
            let ctx = &p.full[0][..18];
            let mean = ctx.iter().sum::<f64>() / 18.0;
            let sd = (ctx.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 18.0).sqrt();
            p.full[0][18..].iter().map(|v| ((v - mean) / sd).abs()).fold(0.0, f64::max)
        };
        let max_normal = pairs.iter().filter(|p| p.label == 0).map(dev).fold(0.0, f64::max);
        let min_anom = pairs.iter().filter(|p| p.label == 1).map(dev).fold(f64::INFINITY, f64::min);
        assert!(max_normal < min_anom);

        let init = ModelParams::init(small_config(), RngSeed(2)).unwrap();
        let cfg = TrainConfig {
            epochs: 50,
            batch_size: 8,
            learning_rate: 1e-2,
            max_pairs_per_epoch: 0,
            cosine_decay: false,
            ..TrainConfig::default()
        };
        let out = train(&pairs, init, &cfg).unwrap();
        let last = *out.loss_trace.last().unwrap();
        assert!(last < 0.1, "trace {:?}", out.loss_trace);
        let again = train(&pairs, ModelParams::init(small_config(), RngSeed(2)).unwrap(), &cfg).unwrap();
        assert_eq!(
            out.loss_trace.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
            again.loss_trace.iter().map(|v| v.to_bits()).collect::<Vec<_>>()
        );
        assert_eq!(out.params, again.params);
    }
}
