use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::lif::heaviside;
use super::solver::{FeatureVector, SolverConfig};
use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::train::surrogate::relaxed_spike;

pub const DEFAULT_HIDDEN: usize = 128;
pub const DEFAULT_POPULATION: usize = 100;
pub const DEFAULT_LIF_BETA: f64 = 0.9;
pub const DEFAULT_LIF_U_TH: f64 = 1.0;
pub const DEFAULT_T_SIM: usize = 30;

/// Architecture hyperparameters of the classifier.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SnnConfig<T> {
    pub hidden: usize,
    /// Output neurons per class.
    pub population: usize,
    pub beta: T,
    pub u_th: T,
    pub t_sim: usize,
    pub solver: SolverConfig,
}

impl<T: Real> Default for SnnConfig<T> {
    fn default() -> Self {
        Self {
            hidden: DEFAULT_HIDDEN,
            population: DEFAULT_POPULATION,
            beta: T::of(DEFAULT_LIF_BETA),
            u_th: T::of(DEFAULT_LIF_U_TH),
            t_sim: DEFAULT_T_SIM,
            solver: SolverConfig::default(),
        }
    }
}

/// FC -> LIF(hidden) -> FC -> LIF(classes x population), no biases.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SnnModel<T> {
    pub input_dim: usize,
    pub hidden: usize,
    pub classes: usize,
    pub population: usize,
    /// Row-major `input_dim x hidden`.
    pub weights_in: Vec<T>,
    /// Row-major `hidden x (classes * population)`.
    pub weights_out: Vec<T>,
    pub beta: T,
    pub u_th: T,
    pub t_sim: usize,
    pub solver: SolverConfig,
}

/// How output spikes are produced during a forward pass.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum ForwardMode<T> {
    /// Heaviside spikes.
    Hard,
    /// Fast-sigmoid activation with slope `k`, used for gradient checking.
    Relaxed { k: T },
}

impl<T: Real> ForwardMode<T> {
    #[inline]
    fn activate(self, x: T) -> T {
        match self {
            ForwardMode::Hard => heaviside(x),
            ForwardMode::Relaxed { k } => relaxed_spike(x, k),
        }
    }
}

/// Per-step layer activity of one inference.
#[derive(Clone, Debug, PartialEq)]
pub struct SpikeRecord<T> {
    pub t_sim: usize,
    pub hidden: usize,
    pub outputs: usize,
    /// `t_sim x hidden`, step-major.
    pub hidden_spikes: Vec<T>,
    /// `t_sim x outputs`, step-major.
    pub output_spikes: Vec<T>,
    /// Membrane traces, kept when requested for training.
    pub membranes: Option<Membranes<T>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Membranes<T> {
    pub input_current: Vec<T>,
    pub hidden: Vec<T>,
    pub output: Vec<T>,
}

impl<T: Real> SpikeRecord<T> {
    pub fn hidden_at(&self, t: usize) -> &[T] {
        &self.hidden_spikes[t * self.hidden..(t + 1) * self.hidden]
    }

    pub fn output_at(&self, t: usize) -> &[T] {
        &self.output_spikes[t * self.outputs..(t + 1) * self.outputs]
    }

    /// Number of hidden (neuron, step) pairs that emitted a spike.
    pub fn hidden_spike_events(&self) -> u64 {
        self.hidden_spikes.iter().filter(|&&s| s != T::zero()).count() as u64
    }

    pub fn output_spike_events(&self) -> u64 {
        self.output_spikes.iter().filter(|&&s| s != T::zero()).count() as u64
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ForwardOutput<T> {
    /// Output spikes summed over each class population and over time.
    pub class_sums: Vec<T>,
    pub record: SpikeRecord<T>,
}

impl<T: Real> SnnModel<T> {
    /// Uniform initialization in `+-1/sqrt(fan_in)` from ChaCha8 seeded with `seed`.
    pub fn init(input_dim: usize, classes: usize, cfg: &SnnConfig<T>, seed: u64) -> Result<Self> {
        let outputs = classes * cfg.population;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut draw = |n: usize, fan_in: usize| -> Vec<T> {
            let bound = 1.0 / (fan_in as f64).sqrt();
            (0..n).map(|_| T::of(rng.random_range(-bound..bound))).collect()
        };
        let weights_in = draw(input_dim * cfg.hidden, input_dim.max(1));
        let weights_out = draw(cfg.hidden * outputs, cfg.hidden.max(1));
        Self::from_weights(input_dim, classes, cfg, weights_in, weights_out)
    }

    pub fn from_weights(
        input_dim: usize,
        classes: usize,
        cfg: &SnnConfig<T>,
        weights_in: Vec<T>,
        weights_out: Vec<T>,
    ) -> Result<Self> {
        let m = Self {
            input_dim,
            hidden: cfg.hidden,
            classes,
            population: cfg.population,
            weights_in,
            weights_out,
            beta: cfg.beta,
            u_th: cfg.u_th,
            t_sim: cfg.t_sim,
            solver: cfg.solver,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn config(&self) -> SnnConfig<T> {
        SnnConfig {
            hidden: self.hidden,
            population: self.population,
            beta: self.beta,
            u_th: self.u_th,
            t_sim: self.t_sim,
            solver: self.solver,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.hidden == 0 || self.classes == 0 || self.population == 0 || self.t_sim == 0 {
            return Err(Error::config("snn", "all dimensions and t_sim must be positive"));
        }
        if !(self.beta > T::zero() && self.beta < T::one()) {
            return Err(Error::config("snn.beta", "must lie in (0, 1)"));
        }
        if !(self.u_th > T::zero()) {
            return Err(Error::config("snn.u_th", "must be > 0"));
        }
        self.solver.validate()?;
        if self.weights_in.len() != self.input_dim * self.hidden {
            return Err(Error::Shape(format!(
                "weights_in has {} entries, expected {}x{}",
                self.weights_in.len(),
                self.input_dim,
                self.hidden
            )));
        }
        if self.weights_out.len() != self.hidden * self.outputs() {
            return Err(Error::Shape(format!(
                "weights_out has {} entries, expected {}x{}",
                self.weights_out.len(),
                self.hidden,
                self.outputs()
            )));
        }
        Ok(())
    }

    pub fn outputs(&self) -> usize {
        self.classes * self.population
    }

    pub fn num_parameters(&self) -> usize {
        self.weights_in.len() + self.weights_out.len()
    }

    /// Normalizer turning class sums into rates in `[0, 1]`.
    pub fn rate_scale(&self) -> T {
        T::of_usize(self.population * self.t_sim)
    }

    /// Static hidden current `weights_in^T f`.
    pub fn input_current(&self, f: &FeatureVector) -> Result<Vec<T>> {
        if f.len() != self.input_dim {
            return Err(Error::Shape(format!("feature length {}, model expects {}", f.len(), self.input_dim)));
        }
        let h = self.hidden;
        let mut current = vec![T::zero(); h];
        for (r, v) in f.nonzero() {
            let v = T::of(v as f64);
            for (acc, &w) in current.iter_mut().zip(&self.weights_in[r * h..(r + 1) * h]) {
                *acc += v * w;
            }
        }
        Ok(current)
    }

    pub fn forward(&self, f: &FeatureVector) -> Result<ForwardOutput<T>> {
        self.forward_with(f, ForwardMode::Hard, false)
    }

    /// Forward pass keeping membrane traces for backpropagation.
    pub fn forward_traced(&self, f: &FeatureVector, mode: ForwardMode<T>) -> Result<ForwardOutput<T>> {
        self.forward_with(f, mode, true)
    }

    pub fn forward_with(&self, f: &FeatureVector, mode: ForwardMode<T>, keep_membranes: bool) -> Result<ForwardOutput<T>> {
        let current = self.input_current(f)?;
        let (h, o, steps) = (self.hidden, self.outputs(), self.t_sim);
        let (beta, th) = (self.beta, self.u_th);

        let mut u_h = vec![T::zero(); h];
        let mut s_h = vec![T::zero(); h];
        let mut u_o = vec![T::zero(); o];
        let mut s_o = vec![T::zero(); o];
        let mut i_o = vec![T::zero(); o];
        let mut class_sums = vec![T::zero(); self.classes];
        let mut hidden_spikes = Vec::with_capacity(steps * h);
        let mut output_spikes = Vec::with_capacity(steps * o);
        let mut mem_h = Vec::new();
        let mut mem_o = Vec::new();

        for _ in 0..steps {
            for i in 0..h {
                u_h[i] = beta * u_h[i] + current[i] - s_h[i] * th;
                s_h[i] = mode.activate(u_h[i] - th);
            }
            i_o.iter_mut().for_each(|v| *v = T::zero());
            for (i, &s) in s_h.iter().enumerate() {
                if s == T::zero() {
                    continue;
                }
                let row = &self.weights_out[i * o..(i + 1) * o];
                if s == T::one() {
                    for (acc, &w) in i_o.iter_mut().zip(row) {
                        *acc += w;
                    }
                } else {
                    for (acc, &w) in i_o.iter_mut().zip(row) {
                        *acc += s * w;
                    }
                }
            }
            for j in 0..o {
                u_o[j] = beta * u_o[j] + i_o[j] - s_o[j] * th;
                s_o[j] = mode.activate(u_o[j] - th);
            }
            for (c, sum) in class_sums.iter_mut().enumerate() {
                *sum += s_o[c * self.population..(c + 1) * self.population].iter().copied().sum::<T>();
            }
            hidden_spikes.extend_from_slice(&s_h);
            output_spikes.extend_from_slice(&s_o);
            if keep_membranes {
                mem_h.extend_from_slice(&u_h);
                mem_o.extend_from_slice(&u_o);
            }
        }

        Ok(ForwardOutput {
            class_sums,
            record: SpikeRecord {
                t_sim: steps,
                hidden: h,
                outputs: o,
                hidden_spikes,
                output_spikes,
                membranes: keep_membranes.then_some(Membranes {
                    input_current: current,
                    hidden: mem_h,
                    output: mem_o,
                }),
            },
        })
    }

    pub fn predict(&self, f: &FeatureVector) -> Result<usize> {
        Ok(decode_population(&self.forward(f)?.class_sums))
    }
}

/// Index of the largest class sum; ties go to the lowest index.
pub fn decode_population<T: Real>(class_sums: &[T]) -> usize {
    let mut best = 0;
    for (i, &v) in class_sums.iter().enumerate().skip(1) {
        if v > class_sums[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(hidden: usize, p: usize, t_sim: usize) -> SnnConfig<f64> {
        SnnConfig {
            hidden,
            population: p,
            beta: 0.9,
            u_th: 1.0,
            t_sim,
            solver: SolverConfig { bin: 1, t_fix: 1, mode: super::super::solver::SolverMode::Additive },
        }
    }

    fn chain(w_out: f64) -> SnnModel<f64> {
        SnnModel::from_weights(1, 1, &cfg(1, 1, 4), vec![0.6], vec![w_out]).unwrap()
    }

    /// Both layers iterated by hand with the output driven by same-step hidden spikes.
    fn hand_chain(w_out: f64, steps: usize) -> f64 {
        let (mut uh, mut sh, mut uo, mut so, mut sum) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for _ in 0..steps {
            uh = 0.9 * uh + 0.6 - sh;
            sh = if uh > 1.0 { 1.0 } else { 0.0 };
            uo = 0.9 * uo + w_out * sh - so;
            so = if uo > 1.0 { 1.0 } else { 0.0 };
            sum += so;
        }
        sum
    }

    #[test]
    fn zero_weights_are_silent() {
        let m = SnnModel::from_weights(3, 2, &cfg(4, 2, 5), vec![0.0; 12], vec![0.0; 16]).unwrap();
        let out = m.forward(&FeatureVector { values: vec![3, 1, 7] }).unwrap();
        assert_eq!(out.class_sums, vec![0.0, 0.0]);
        assert_eq!(out.record.hidden_spike_events(), 0);
    }

    #[test]
    fn single_chain_counts() {
        let f = FeatureVector { values: vec![1] };
        let out = chain(10.0).forward(&f).unwrap();
        let hidden: Vec<f64> = (0..4).map(|t| out.record.hidden_at(t)[0]).collect();
        assert_eq!(hidden, vec![0.0, 1.0, 0.0, 1.0]);
        // output fires at t = 2, 3, 4 (residual after subtractive reset keeps it above threshold at t = 3)
        assert_eq!(hand_chain(10.0, 4), 3.0);
        assert_eq!(out.class_sums, vec![3.0]);
        // one output spike per hidden spike when the weight leaves no residual above threshold
        assert_eq!(hand_chain(1.5, 4), 2.0);
        assert_eq!(chain(1.5).forward(&f).unwrap().class_sums, vec![2.0]);
    }

    #[test]
    fn duplicated_population_doubles_sums() {
        let base = SnnModel::init(5, 3, &cfg(6, 1, 8), 3).unwrap();
        let mut dup_out = Vec::new();
        for i in 0..6 {
            for c in 0..3 {
                let w = base.weights_out[i * 3 + c];
                dup_out.extend([w, w]);
            }
        }
        let dup = SnnModel::from_weights(5, 3, &cfg(6, 2, 8), base.weights_in.clone(), dup_out).unwrap();
        let f = FeatureVector { values: vec![2, 0, 5, 1, 3] };
        let a = base.forward(&f).unwrap().class_sums;
        let b = dup.forward(&f).unwrap().class_sums;
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(2.0 * x, *y);
        }
        assert_eq!(decode_population(&a), decode_population(&b));
    }

    #[test]
    fn shape_errors() {
        let m = chain(1.0);
        assert!(matches!(m.forward(&FeatureVector { values: vec![1, 2] }), Err(Error::Shape(_))));
        assert!(SnnModel::from_weights(2, 1, &cfg(1, 1, 4), vec![0.1], vec![0.2]).is_err());
    }

    #[test]
    fn decode_examples() {
        assert_eq!(decode_population(&[0.0, 3.0, 1.0]), 1);
        assert_eq!(decode_population(&[2.0, 2.0, 2.0]), 0);
        assert_eq!(decode_population(&[5.0]), 0);
        let sums = [1.0, 4.0, 3.5];
        assert_eq!(decode_population(&sums), decode_population(&sums.map(|v| v * 7.25)));
    }

    #[test]
    fn forward_is_deterministic() {
        let m = SnnModel::<f64>::init(8, 2, &cfg(16, 3, 10), 11).unwrap();
        let f = FeatureVector { values: vec![4, 0, 1, 9, 2, 0, 0, 3] };
        assert_eq!(m.forward(&f).unwrap(), m.forward(&f).unwrap());
        assert_eq!(m, SnnModel::init(8, 2, &cfg(16, 3, 10), 11).unwrap());
    }

    #[test]
    fn init_respects_fan_in_bound() {
        let m = SnnModel::<f64>::init(25, 2, &cfg(16, 2, 4), 5).unwrap();
        assert!(m.weights_in.iter().all(|w| w.abs() <= 0.2));
        assert!(m.weights_out.iter().all(|w| w.abs() <= 0.25));
    }
}
