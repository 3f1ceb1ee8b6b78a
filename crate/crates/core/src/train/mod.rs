//! Surrogate-gradient training of [`SnnModel`].

mod backward;
mod gradcheck;
mod loss;
pub mod surrogate;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use backward::{backward, backward_factored, Gradients, SampleGradient};
pub use gradcheck::{grad_check, GradCheckReport, ParamError, ParamRef};
pub use loss::{loss, loss_and_grad, LossKind};
pub use surrogate::{relaxed_spike, surrogate_grad, surrogate_spike, SurrogateMode, DEFAULT_K_SLOPE};

use crate::error::{Error, Result};
use crate::rng::mix_seed;
use crate::scalar::Real;
use crate::snn::{decode_population, FeatureVector, ForwardMode, SnnModel};

pub const DEFAULT_LEARNING_RATE: f64 = 0.5;
pub const DEFAULT_EPOCHS: usize = 50;
pub const DEFAULT_BATCH_SIZE: usize = 16;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig<T> {
    /// Surrogate slope `k`.
    pub k_slope: T,
    pub learning_rate: T,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub loss_kind: LossKind,
    /// Treat the subtractive reset as a constant during backpropagation.
    pub reset_detach: bool,
    /// Heavy-ball momentum; 0 disables it.
    pub momentum: T,
}

impl<T: Real> Default for TrainConfig<T> {
    fn default() -> Self {
        Self {
            k_slope: T::of(DEFAULT_K_SLOPE),
            learning_rate: T::of(DEFAULT_LEARNING_RATE),
            epochs: DEFAULT_EPOCHS,
            batch_size: DEFAULT_BATCH_SIZE,
            seed: 0,
            loss_kind: LossKind::CrossEntropy,
            reset_detach: true,
            momentum: T::zero(),
        }
    }
}

impl<T: Real> TrainConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.k_slope > T::zero()) {
            return Err(Error::config("train.k_slope", "must be > 0"));
        }
        if !(self.learning_rate >= T::zero()) {
            return Err(Error::config("train.learning_rate", "must be >= 0"));
        }
        if self.batch_size == 0 {
            return Err(Error::config("train.batch_size", "must be >= 1"));
        }
        if !(self.momentum >= T::zero() && self.momentum < T::one()) {
            return Err(Error::config("train.momentum", "must lie in [0, 1)"));
        }
        Ok(())
    }
}

/// One labeled training example.
pub type Sample = (FeatureVector, usize);

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub mean_loss: f64,
    pub accuracy: f64,
}

/// Mini-batch SGD with optional momentum.
#[derive(Clone, Debug)]
pub struct Trainer<T> {
    cfg: TrainConfig<T>,
    epoch: usize,
    velocity_in: Vec<T>,
    velocity_out: Vec<T>,
}

impl<T: Real> Trainer<T> {
    pub fn new(cfg: TrainConfig<T>) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            cfg,
            epoch: 0,
            velocity_in: Vec::new(),
            velocity_out: Vec::new(),
        })
    }

    pub fn config(&self) -> &TrainConfig<T> {
        &self.cfg
    }

    pub fn epochs_done(&self) -> usize {
        self.epoch
    }

    /// Runs one epoch in place. Metrics are measured on the forward passes
    /// that produce each batch's gradients.
    pub fn train_epoch(&mut self, model: &mut SnnModel<T>, data: &[Sample]) -> Result<EpochMetrics> {
        if data.is_empty() {
            return Err(Error::Input("training set is empty".into()));
        }
        let cfg = self.cfg.clone();
        let mut order: Vec<usize> = (0..data.len()).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(mix_seed(cfg.seed, self.epoch as u64)));

        let mut loss_sum = 0.0;
        let mut correct = 0usize;
        for batch in order.chunks(cfg.batch_size) {
            // per-sample work may run in parallel; reduction below is index-ordered
            let grads: Vec<(SampleGradient<T>, bool)> = batch
                .par_iter()
                .map(|&idx| {
                    let (f, label) = &data[idx];
                    let fwd = model.forward_traced(f, ForwardMode::Hard)?;
                    let hit = decode_population(&fwd.class_sums) == *label;
                    Ok((backward_factored(model, &fwd, *label, &cfg)?, hit))
                })
                .collect::<Result<_>>()?;
            for (g, hit) in &grads {
                loss_sum += g.loss.as_f64();
                correct += *hit as usize;
            }
            self.apply(model, batch, data, &grads);
        }
        let metrics = EpochMetrics {
            epoch: self.epoch,
            mean_loss: loss_sum / data.len() as f64,
            accuracy: correct as f64 / data.len() as f64,
        };
        self.epoch += 1;
        Ok(metrics)
    }

    fn apply(&mut self, model: &mut SnnModel<T>, batch: &[usize], data: &[Sample], grads: &[(SampleGradient<T>, bool)]) {
        let scale = self.cfg.learning_rate / T::of_usize(batch.len());
        if scale == T::zero() {
            return;
        }
        let h = model.hidden;
        if self.cfg.momentum == T::zero() {
            for (&idx, (g, _)) in batch.iter().zip(grads) {
                for (r, v) in data[idx].0.nonzero() {
                    let step = scale * T::of(v as f64);
                    for (w, &d) in model.weights_in[r * h..(r + 1) * h].iter_mut().zip(&g.input_current) {
                        *w -= step * d;
                    }
                }
                for (w, &d) in model.weights_out.iter_mut().zip(&g.weights_out) {
                    *w -= scale * d;
                }
            }
            return;
        }

        let mu = self.cfg.momentum;
        let lr = self.cfg.learning_rate;
        let inv_b = T::one() / T::of_usize(batch.len());
        let mut g_in = vec![T::zero(); model.weights_in.len()];
        let mut g_out = vec![T::zero(); model.weights_out.len()];
        for (&idx, (g, _)) in batch.iter().zip(grads) {
            for (r, v) in data[idx].0.nonzero() {
                let v = T::of(v as f64);
                for (dst, &d) in g_in[r * h..(r + 1) * h].iter_mut().zip(&g.input_current) {
                    *dst += v * d;
                }
            }
            for (dst, &d) in g_out.iter_mut().zip(&g.weights_out) {
                *dst += d;
            }
        }
        if self.velocity_in.len() != g_in.len() {
            self.velocity_in = vec![T::zero(); g_in.len()];
            self.velocity_out = vec![T::zero(); g_out.len()];
        }
        for ((w, v), g) in model.weights_in.iter_mut().zip(&mut self.velocity_in).zip(&g_in) {
            *v = mu * *v + *g * inv_b;
            *w -= lr * *v;
        }
        for ((w, v), g) in model.weights_out.iter_mut().zip(&mut self.velocity_out).zip(&g_out) {
            *v = mu * *v + *g * inv_b;
            *w -= lr * *v;
        }
    }
}

/// One epoch from a fresh optimizer state; `epoch` selects the shuffle.
pub fn train_epoch<T: Real>(
    model: &SnnModel<T>,
    data: &[Sample],
    cfg: &TrainConfig<T>,
    epoch: usize,
) -> Result<(SnnModel<T>, EpochMetrics)> {
    let mut trainer = Trainer::new(cfg.clone())?;
    trainer.epoch = epoch;
    let mut next = model.clone();
    let metrics = trainer.train_epoch(&mut next, data)?;
    Ok((next, metrics))
}

/// Fraction of samples classified correctly.
pub fn evaluate<T: Real>(model: &SnnModel<T>, data: &[Sample]) -> Result<f64> {
    if data.is_empty() {
        return Ok(0.0);
    }
    let hits: Vec<bool> = data
        .par_iter()
        .map(|(f, label)| Ok(model.predict(f)? == *label))
        .collect::<Result<_>>()?;
    Ok(hits.iter().filter(|&&h| h).count() as f64 / data.len() as f64)
}

/// Mean loss of the hard-forward model over `data`.
pub fn mean_loss<T: Real>(model: &SnnModel<T>, data: &[Sample], kind: LossKind) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::Input("dataset is empty".into()));
    }
    let losses: Vec<f64> = data
        .par_iter()
        .map(|(f, label)| Ok(loss(&model.forward(f)?.class_sums, *label, kind, model.rate_scale())?.as_f64()))
        .collect::<Result<_>>()?;
    Ok(losses.iter().sum::<f64>() / data.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::snn::{SnnConfig, SolverConfig, SolverMode};

    fn toy() -> (SnnModel<f64>, Vec<Sample>) {
        let cfg = SnnConfig {
            hidden: 16,
            population: 4,
            beta: 0.9,
            u_th: 1.0,
            t_sim: 10,
            solver: SolverConfig { bin: 1, t_fix: 4, mode: SolverMode::Additive },
        };
        let model = SnnModel::init(4, 2, &cfg, 1).unwrap();
        let mut data = Vec::new();
        for i in 0..40u32 {
            let a = 3 + i % 4;
            let values = if i % 2 == 0 { vec![a, a + 1, 0, 1] } else { vec![0, 1, a, a + 1] };
            data.push((FeatureVector { values }, (i % 2) as usize));
        }
        (model, data)
    }

    #[test]
    fn zero_learning_rate_leaves_model() {
        let (m, data) = toy();
        let cfg = TrainConfig { learning_rate: 0.0, ..Default::default() };
        let (next, metrics) = train_epoch(&m, &data, &cfg, 0).unwrap();
        assert_eq!(next, m);
        assert!(metrics.mean_loss.is_finite());
        assert!((0.0..=1.0).contains(&metrics.accuracy));
    }

    #[test]
    fn one_epoch_reduces_loss_on_separable_toy() {
        let (m, data) = toy();
        let cfg = TrainConfig { learning_rate: 0.5, batch_size: 4, seed: 3, ..Default::default() };
        let before = mean_loss(&m, &data, cfg.loss_kind).unwrap();
        let (next, _) = train_epoch(&m, &data, &cfg, 0).unwrap();
        let after = mean_loss(&next, &data, cfg.loss_kind).unwrap();
        assert!(after < before, "{after} !< {before}");
    }

    #[test]
    fn training_is_deterministic() {
        let (m, data) = toy();
        let cfg = TrainConfig { seed: 9, batch_size: 5, momentum: 0.5, ..Default::default() };
        let run = || {
            let mut model = m.clone();
            let mut t = Trainer::new(cfg.clone()).unwrap();
            let metrics: Vec<EpochMetrics> = (0..3).map(|_| t.train_epoch(&mut model, &data).unwrap()).collect();
            (model, metrics)
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn empty_dataset_rejected() {
        let (m, _) = toy();
        assert!(matches!(train_epoch(&m, &[], &TrainConfig::default(), 0), Err(Error::Input(_))));
    }
}
