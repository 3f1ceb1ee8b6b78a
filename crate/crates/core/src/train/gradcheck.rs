//! Central finite-difference verification of [`backward`](super::backward).
//!
//! Runs in the relaxed forward mode with the reset term kept in the graph, so
//! the loss is a smooth function of every weight and the surrogate factor is
//! its exact derivative.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::backward::backward;
use super::loss::loss;
use super::TrainConfig;
use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::snn::{FeatureVector, ForwardMode, SnnModel};

/// Parameter budget above which a seeded subsample is checked.
pub const MAX_CHECKED_PARAMS: usize = 500;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ParamRef {
    WeightIn(usize),
    WeightOut(usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamError {
    pub param: ParamRef,
    pub analytic: f64,
    pub numeric: f64,
    pub rel_error: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub epsilon: f64,
    pub errors: Vec<ParamError>,
}

fn relaxed_loss<T: Real>(model: &SnnModel<T>, f: &FeatureVector, label: usize, cfg: &TrainConfig<T>) -> Result<T> {
    let out = model.forward_with(f, ForwardMode::Relaxed { k: cfg.k_slope }, false)?;
    loss(&out.class_sums, label, cfg.loss_kind, model.rate_scale())
}

fn param_mut<T>(m: &mut SnnModel<T>, p: ParamRef) -> &mut T {
    match p {
        ParamRef::WeightIn(i) => &mut m.weights_in[i],
        ParamRef::WeightOut(i) => &mut m.weights_out[i],
    }
}

pub fn grad_check<T: Real>(
    model: &SnnModel<T>,
    f: &FeatureVector,
    label: usize,
    epsilon: T,
    cfg: &TrainConfig<T>,
) -> Result<GradCheckReport> {
    if !(epsilon > T::zero()) {
        return Err(Error::config("gradcheck.epsilon", "must be > 0"));
    }
    let cfg = TrainConfig {
        reset_detach: false,
        ..cfg.clone()
    };
    let fwd = model.forward_traced(f, ForwardMode::Relaxed { k: cfg.k_slope })?;
    let grads = backward(model, f, &fwd, label, &cfg)?;

    let n_in = model.weights_in.len();
    let total = model.num_parameters();
    let indices: Vec<usize> = if total > MAX_CHECKED_PARAMS {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let mut v = rand::seq::index::sample(&mut rng, total, MAX_CHECKED_PARAMS).into_vec();
        v.sort_unstable();
        v
    } else {
        (0..total).collect()
    };

    let mut probe = model.clone();
    let two_eps = T::of(2.0) * epsilon;
    let mut errors = Vec::with_capacity(indices.len());
    for idx in indices {
        let (param, analytic) = if idx < n_in {
            (ParamRef::WeightIn(idx), grads.weights_in[idx])
        } else {
            (ParamRef::WeightOut(idx - n_in), grads.weights_out[idx - n_in])
        };
        let original = *param_mut(&mut probe, param);
        *param_mut(&mut probe, param) = original + epsilon;
        let plus = relaxed_loss(&probe, f, label, &cfg)?;
        *param_mut(&mut probe, param) = original - epsilon;
        let minus = relaxed_loss(&probe, f, label, &cfg)?;
        *param_mut(&mut probe, param) = original;
        let numeric = ((plus - minus) / two_eps).as_f64();
        let analytic = analytic.as_f64();
        let denom = analytic.abs().max(numeric.abs()).max(1e-8);
        errors.push(ParamError {
            param,
            analytic,
            numeric,
            rel_error: (analytic - numeric).abs() / denom,
        });
    }
    Ok(GradCheckReport {
        max_rel_error: errors.iter().map(|e| e.rel_error).fold(0.0, f64::max),
        epsilon: epsilon.as_f64(),
        errors,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::snn::{SnnConfig, SolverConfig, SolverMode};

    fn small(hidden: usize, t_sim: usize, seed: u64) -> SnnModel<f64> {
        let cfg = SnnConfig {
            hidden,
            population: 2,
            beta: 0.9,
            u_th: 1.0,
            t_sim,
            solver: SolverConfig { bin: 1, t_fix: 1, mode: SolverMode::Additive },
        };
        SnnModel::init(3, 2, &cfg, seed).unwrap()
    }

    #[test]
    fn zero_weights_give_zero_error() {
        let mut m = small(4, 5, 1);
        m.weights_in.iter_mut().for_each(|w| *w = 0.0);
        m.weights_out.iter_mut().for_each(|w| *w = 0.0);
        let r = grad_check(&m, &FeatureVector { values: vec![1, 2, 3] }, 0, 1e-5, &TrainConfig::default()).unwrap();
        assert!(r.max_rel_error <= 1e-6, "{}", r.max_rel_error);
    }

    /// 3*10 + 10*2 = 50 parameters with every membrane kept near threshold,
    /// so no gradient sits at the finite-difference roundoff floor.
    fn well_conditioned(seed: u64) -> SnnModel<f64> {
        let cfg = SnnConfig {
            hidden: 10,
            population: 1,
            beta: 0.9,
            u_th: 1.0,
            t_sim: 6,
            solver: SolverConfig { bin: 1, t_fix: 1, mode: SolverMode::Additive },
        };
        let mut m = SnnModel::init(3, 2, &cfg, seed).unwrap();
        m.weights_in.iter_mut().for_each(|w| *w = 0.05 + 0.15 * (*w as f64).abs());
        m.weights_out.iter_mut().for_each(|w| *w *= 4.0);
        m
    }

    #[test]
    fn small_model_matches_finite_differences() {
        for seed in 0..4 {
            let m = well_conditioned(seed);
            assert_eq!(m.num_parameters(), 50);
            let r = grad_check(&m, &FeatureVector { values: vec![1, 1, 1] }, 1, 1e-5, &TrainConfig::default()).unwrap();
            assert_eq!(r.errors.len(), 50);
            let worst = r.errors.iter().max_by(|a, b| a.rel_error.total_cmp(&b.rel_error)).unwrap();
            assert!(r.max_rel_error <= 1e-4, "{worst:?}");
        }
    }

    #[test]
    fn unscaled_model_matches_finite_differences_loosely() {
        let m = small(8, 6, 4);
        let f = FeatureVector { values: vec![2, 1, 3] };
        let r = grad_check(&m, &f, 1, 1e-5, &TrainConfig::default()).unwrap();
        assert_eq!(r.errors.len(), m.num_parameters());
        // absolute agreement; relative error is roundoff-limited on tiny entries
        for e in &r.errors {
            assert!((e.analytic - e.numeric).abs() <= 1e-9, "{e:?}");
        }
    }

    #[test]
    fn coarse_epsilon_is_less_accurate() {
        let m = well_conditioned(0);
        let f = FeatureVector { values: vec![1, 1, 1] };
        let cfg = TrainConfig::default();
        let fine = grad_check(&m, &f, 1, 1e-5, &cfg).unwrap();
        let coarse = grad_check(&m, &f, 1, 1e-1, &cfg).unwrap();
        assert!(coarse.max_rel_error > fine.max_rel_error);
    }

    #[test]
    fn large_models_are_subsampled() {
        let cfg = SnnConfig { hidden: 40, population: 4, t_sim: 3, ..SnnConfig::default() };
        let m = SnnModel::<f64>::init(10, 3, &SnnConfig { solver: SolverConfig { bin: 1, t_fix: 1, mode: SolverMode::Additive }, ..cfg }, 2).unwrap();
        let f = FeatureVector { values: vec![1; 10] };
        let r = grad_check(&m, &f, 0, 1e-5, &TrainConfig::default()).unwrap();
        assert_eq!(r.errors.len(), MAX_CHECKED_PARAMS);
    }

    #[test]
    fn non_positive_epsilon_rejected() {
        let m = small(2, 2, 0);
        assert!(grad_check(&m, &FeatureVector { values: vec![1, 1, 1] }, 0, 0.0, &TrainConfig::default()).is_err());
    }
}
