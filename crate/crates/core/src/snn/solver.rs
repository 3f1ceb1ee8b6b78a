//! Additive solvers: collapse the train dimension, then bin time.

use serde::{Deserialize, Serialize};

use crate::encode::SpikeTensor;
use crate::error::{Error, Result};

pub const DEFAULT_BIN: usize = 20;
pub const DEFAULT_T_FIX: usize = 2000;

/// Non-negative counts laid out channel-major, `data[c * steps + t]`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    pub channels: usize,
    pub steps: usize,
    pub data: Vec<u32>,
}

impl Counts {
    pub fn get(&self, c: usize, t: usize) -> u32 {
        self.data[c * self.steps + t]
    }

    pub fn channel(&self, c: usize) -> &[u32] {
        &self.data[c * self.steps..(c + 1) * self.steps]
    }

    pub fn total(&self) -> u64 {
        self.data.iter().map(|&v| v as u64).sum()
    }
}

/// Flattened classifier input.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub values: Vec<u32>,
}

impl FeatureVector {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Indices and values of the non-zero entries.
    pub fn nonzero(&self) -> impl Iterator<Item = (usize, u32)> + '_ {
        self.values.iter().copied().enumerate().filter(|&(_, v)| v != 0)
    }

    /// Inverse of [`flatten`].
    pub fn unflatten(&self, channels: usize) -> Result<Counts> {
        if channels == 0 || self.values.len() % channels != 0 {
            return Err(Error::Shape(format!("{} features do not split into {channels} channels", self.values.len())));
        }
        Ok(Counts {
            channels,
            steps: self.values.len() / channels,
            data: self.values.clone(),
        })
    }
}

/// Sum over the train dimension: `out[c][t] = sum_n x[c][n][t]`.
pub fn multi_train_sum(x: &SpikeTensor) -> Counts {
    let (c_n, n_n, steps) = (x.channels(), x.trains(), x.steps());
    let mut data = vec![0u32; c_n * steps];
    for (t, col) in x.columns().enumerate() {
        for c in 0..c_n {
            data[c * steps + t] = col[c * n_n..(c + 1) * n_n].iter().map(|&b| b as u32).sum();
        }
    }
    Counts {
        channels: c_n,
        steps,
        data,
    }
}

/// Length-adjusts to `t_fix` (zero pad on the right or truncate the tail),
/// then sums non-overlapping windows of `bin` steps.
pub fn multi_step_sum(x: &Counts, bin: usize, t_fix: usize) -> Result<Counts> {
    check_bins(bin, t_fix)?;
    let bins = t_fix / bin;
    let mut data = vec![0u32; x.channels * bins];
    for c in 0..x.channels {
        let ch = x.channel(c);
        for (t, &v) in ch.iter().take(t_fix).enumerate() {
            data[c * bins + t / bin] += v;
        }
    }
    Ok(Counts {
        channels: x.channels,
        steps: bins,
        data,
    })
}

fn check_bins(bin: usize, t_fix: usize) -> Result<()> {
    if bin == 0 {
        return Err(Error::config("solver.bin", "must be >= 1"));
    }
    if t_fix == 0 || t_fix % bin != 0 {
        return Err(Error::config("solver.t_fix", format!("must be a positive multiple of the bin ({bin})")));
    }
    Ok(())
}

/// Channel-major concatenation.
pub fn flatten(x: &Counts) -> FeatureVector {
    FeatureVector { values: x.data.clone() }
}

/// Feature path used by the classifier.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverMode {
    /// Multi-train sum, then multi-step sum.
    Additive,
    /// No solvers: raw bits flattened in (channel, train, step) order.
    Raw,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub bin: usize,
    pub t_fix: usize,
    pub mode: SolverMode,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            bin: DEFAULT_BIN,
            t_fix: DEFAULT_T_FIX,
            mode: SolverMode::Additive,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        check_bins(self.bin, self.t_fix)
    }

    /// Feature length for a tensor with `channels` x `trains`.
    pub fn input_dim(&self, channels: usize, trains: usize) -> usize {
        match self.mode {
            SolverMode::Additive => channels * (self.t_fix / self.bin),
            SolverMode::Raw => channels * trains * self.t_fix,
        }
    }

    pub fn features(&self, x: &SpikeTensor) -> Result<FeatureVector> {
        self.validate()?;
        match self.mode {
            SolverMode::Additive => Ok(flatten(&multi_step_sum(&multi_train_sum(x), self.bin, self.t_fix)?)),
            SolverMode::Raw => {
                let (c_n, n_n) = (x.channels(), x.trains());
                let keep = x.steps().min(self.t_fix);
                let mut values = vec![0u32; c_n * n_n * self.t_fix];
                for t in 0..keep {
                    for c in 0..c_n {
                        for n in 0..n_n {
                            values[(c * n_n + n) * self.t_fix + t] = x.get(c, n, t) as u32;
                        }
                    }
                }
                Ok(FeatureVector { values })
            }
        }
    }
}
