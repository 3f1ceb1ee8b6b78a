//! Reverse-mode differentiation of the unrolled two-layer LIF dynamics.
//!
//! With `x = u - u_th` and `g(x) = 1/(k|x| + 1)^2` standing in for the spike
//! derivative, the adjoints run backwards over the simulation steps:
//!
//! ```text
//! dL/du_o(t) = (dL/ds_o(t) [- u_th dL/du_o(t+1)]) g(x_o(t)) + beta dL/du_o(t+1)
//! dL/ds_h(t) = W_out dL/du_o(t) [- u_th dL/du_h(t+1)]
//! dL/du_h(t) = dL/ds_h(t) g(x_h(t)) + beta dL/du_h(t+1)
//! ```
//!
//! The bracketed reset terms are dropped when the reset is detached. The
//! static input current collects `sum_t dL/du_h(t)`.

use serde::{Deserialize, Serialize};

use super::loss::loss_and_grad;
use super::surrogate::surrogate_grad;
use super::TrainConfig;
use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::snn::{FeatureVector, ForwardOutput, SnnModel};

/// Dense parameter gradients in the model's row-major layouts.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Gradients<T> {
    pub weights_in: Vec<T>,
    pub weights_out: Vec<T>,
}

/// Gradient of one sample in factored form: the `weights_in` gradient is the
/// outer product of the feature vector with `input_current`.
#[derive(Clone, Debug, PartialEq)]
pub struct SampleGradient<T> {
    pub loss: T,
    pub input_current: Vec<T>,
    pub weights_out: Vec<T>,
}

impl<T: Real> SampleGradient<T> {
    pub fn densify(&self, feature: &FeatureVector) -> Gradients<T> {
        let h = self.input_current.len();
        let mut weights_in = vec![T::zero(); feature.len() * h];
        for (r, v) in feature.nonzero() {
            let v = T::of(v as f64);
            for (dst, &g) in weights_in[r * h..(r + 1) * h].iter_mut().zip(&self.input_current) {
                *dst = v * g;
            }
        }
        Gradients {
            weights_in,
            weights_out: self.weights_out.clone(),
        }
    }
}

/// Backpropagates the loss of one traced forward pass.
pub fn backward_factored<T: Real>(
    model: &SnnModel<T>,
    fwd: &ForwardOutput<T>,
    label: usize,
    cfg: &TrainConfig<T>,
) -> Result<SampleGradient<T>> {
    let mem = fwd
        .record
        .membranes
        .as_ref()
        .ok_or_else(|| Error::State("forward pass kept no membrane traces; use forward_traced".into()))?;
    let (loss, g_sums) = loss_and_grad(&fwd.class_sums, label, cfg.loss_kind, model.rate_scale())?;

    let (h, o, p, steps) = (model.hidden, model.outputs(), model.population, model.t_sim);
    let (beta, th, k) = (model.beta, model.u_th, cfg.k_slope);
    let detach = cfg.reset_detach;

    let mut carry_o = vec![T::zero(); o];
    let mut carry_h = vec![T::zero(); h];
    let mut delta_o = vec![T::zero(); o];
    let mut d_current = vec![T::zero(); h];
    let mut d_wout = vec![T::zero(); h * o];

    for t in (0..steps).rev() {
        let u_o = &mem.output[t * o..(t + 1) * o];
        for j in 0..o {
            let mut ds = g_sums[j / p];
            if !detach {
                ds -= th * carry_o[j];
            }
            delta_o[j] = ds * surrogate_grad(u_o[j] - th, k) + beta * carry_o[j];
        }

        let s_h = fwd.record.hidden_at(t);
        let u_h = &mem.hidden[t * h..(t + 1) * h];
        for i in 0..h {
            let row = &model.weights_out[i * o..(i + 1) * o];
            if s_h[i] != T::zero() {
                let s = s_h[i];
                for (dst, &d) in d_wout[i * o..(i + 1) * o].iter_mut().zip(&delta_o) {
                    *dst += s * d;
                }
            }
            let mut ds: T = row.iter().zip(&delta_o).map(|(&w, &d)| w * d).sum();
            if !detach {
                ds -= th * carry_h[i];
            }
            let delta_h = ds * surrogate_grad(u_h[i] - th, k) + beta * carry_h[i];
            d_current[i] += delta_h;
            carry_h[i] = delta_h;
        }
        std::mem::swap(&mut carry_o, &mut delta_o);
    }

    Ok(SampleGradient {
        loss,
        input_current: d_current,
        weights_out: d_wout,
    })
}

/// Dense gradients of the loss for one sample.
pub fn backward<T: Real>(
    model: &SnnModel<T>,
    feature: &FeatureVector,
    fwd: &ForwardOutput<T>,
    label: usize,
    cfg: &TrainConfig<T>,
) -> Result<Gradients<T>> {
    if feature.len() != model.input_dim {
        return Err(Error::Shape(format!("feature length {}, model expects {}", feature.len(), model.input_dim)));
    }
    Ok(backward_factored(model, fwd, label, cfg)?.densify(feature))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::snn::{ForwardMode, SnnConfig, SolverConfig, SolverMode};
    use crate::train::LossKind;

    fn cfg_model(hidden: usize, p: usize, t_sim: usize) -> SnnConfig<f64> {
        SnnConfig { hidden, population: p, beta: 0.9, u_th: 1.0, t_sim, solver: SolverConfig { bin: 1, t_fix: 1, mode: SolverMode::Additive } }
    }

    #[test]
    fn dead_network_has_zero_output_gradient() {
        let m = SnnModel::from_weights(3, 2, &cfg_model(4, 2, 6), vec![0.0; 12], vec![0.0; 16]).unwrap();
        let f = FeatureVector { values: vec![1, 2, 3] };
        let fwd = m.forward_traced(&f, ForwardMode::Hard).unwrap();
        let g = backward(&m, &f, &fwd, 0, &TrainConfig::default()).unwrap();
        assert!(g.weights_out.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn missing_traces_is_state_error() {
        let m = SnnModel::from_weights(1, 1, &cfg_model(1, 1, 2), vec![0.5], vec![0.5]).unwrap();
        let f = FeatureVector { values: vec![1] };
        let fwd = m.forward(&f).unwrap();
        assert!(matches!(backward(&m, &f, &fwd, 0, &TrainConfig::default()), Err(Error::State(_))));
    }

    #[test]
    fn two_step_chain_matches_hand_unrolling() {
        let (w_in, f_val, w_out) = (0.7f64, 2.0f64, [1.5f64, 0.4]);
        let (beta, th, k) = (0.9f64, 1.0f64, 25.0f64);
        let m = SnnModel::from_weights(1, 2, &cfg_model(1, 1, 2), vec![w_in], w_out.to_vec()).unwrap();
        let f = FeatureVector { values: vec![2] };
        let cfg = TrainConfig { k_slope: k, loss_kind: LossKind::CrossEntropy, reset_detach: true, ..Default::default() };
        let fwd = m.forward_traced(&f, ForwardMode::Hard).unwrap();
        let g = backward(&m, &f, &fwd, 1, &cfg).unwrap();

        let hs = |x: f64| if x > 0.0 { 1.0 } else { 0.0 };
        let sg = |x: f64| 1.0 / (k * x.abs() + 1.0).powi(2);
        let i = w_in * f_val;
        let uh0 = i;
        let sh0 = hs(uh0 - th);
        let uh1 = beta * uh0 + i - sh0 * th;
        let sh1 = hs(uh1 - th);
        let uo0 = w_out.map(|w| w * sh0);
        let so0 = uo0.map(|u| hs(u - th));
        let uo1 = [0, 1].map(|j| beta * uo0[j] + w_out[j] * sh1 - so0[j] * th);
        let so1 = uo1.map(|u| hs(u - th));
        let rates = [0, 1].map(|j| (so0[j] + so1[j]) / 2.0);
        let z: f64 = rates.iter().map(|r| r.exp()).sum();
        let gs = [0, 1].map(|j| (rates[j].exp() / z - (j == 1) as u8 as f64) / 2.0);
        let a1 = [0, 1].map(|j| gs[j] * sg(uo1[j] - th));
        let a0 = [0, 1].map(|j| gs[j] * sg(uo0[j] - th) + beta * a1[j]);
        let dw_out = [0, 1].map(|j| sh0 * a0[j] + sh1 * a1[j]);
        let b1 = (w_out[0] * a1[0] + w_out[1] * a1[1]) * sg(uh1 - th);
        let b0 = (w_out[0] * a0[0] + w_out[1] * a0[1]) * sg(uh0 - th) + beta * b1;
        let dw_in = f_val * (b0 + b1);

        assert!((g.weights_in[0] - dw_in).abs() < 1e-10, "{} vs {dw_in}", g.weights_in[0]);
        for j in 0..2 {
            assert!((g.weights_out[j] - dw_out[j]).abs() < 1e-10);
        }
        assert!(dw_in != 0.0);
    }

    #[test]
    fn detached_gradients_stay_finite() {
        let m = SnnModel::<f64>::init(6, 3, &cfg_model(8, 2, 12), 9).unwrap();
        let f = FeatureVector { values: vec![50, 0, 13, 7, 90, 2] };
        for mode in [ForwardMode::Hard, ForwardMode::Relaxed { k: 25.0 }] {
            let fwd = m.forward_traced(&f, mode).unwrap();
            let g = backward(&m, &f, &fwd, 2, &TrainConfig::default()).unwrap();
            assert!(g.weights_in.iter().chain(&g.weights_out).all(|v| v.is_finite()));
        }
    }
}
