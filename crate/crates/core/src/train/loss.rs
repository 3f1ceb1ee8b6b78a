use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum LossKind {
    /// Softmax cross-entropy over class rates.
    #[default]
    CrossEntropy,
    /// Mean squared error against a one-hot rate target.
    Mse,
}

impl std::str::FromStr for LossKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ce" | "cross-entropy" => Ok(LossKind::CrossEntropy),
            "mse" => Ok(LossKind::Mse),
            other => Err(Error::config("train.loss", format!("unknown loss `{other}` (ce | mse)"))),
        }
    }
}

impl std::fmt::Display for LossKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            LossKind::CrossEntropy => "ce",
            LossKind::Mse => "mse",
        })
    }
}

/// Loss value and its gradient with respect to the raw class sums.
/// Class sums are divided by `scale` (population x steps) first.
pub fn loss_and_grad<T: Real>(class_sums: &[T], label: usize, kind: LossKind, scale: T) -> Result<(T, Vec<T>)> {
    let k = class_sums.len();
    if label >= k {
        return Err(Error::Input(format!("label {label} outside 0..{k}")));
    }
    let rates: Vec<T> = class_sums.iter().map(|&s| s / scale).collect();
    match kind {
        LossKind::CrossEntropy => {
            let max = rates.iter().copied().fold(T::neg_infinity(), T::max);
            let exps: Vec<T> = rates.iter().map(|&r| (r - max).exp()).collect();
            let z: T = exps.iter().copied().sum();
            let loss = z.ln() - (rates[label] - max);
            let grad = exps
                .iter()
                .enumerate()
                .map(|(c, &e)| (e / z - if c == label { T::one() } else { T::zero() }) / scale)
                .collect();
            Ok((loss, grad))
        }
        LossKind::Mse => {
            let kk = T::of_usize(k);
            let mut loss = T::zero();
            let mut grad = Vec::with_capacity(k);
            for (c, &r) in rates.iter().enumerate() {
                let d = r - if c == label { T::one() } else { T::zero() };
                loss += d * d / kk;
                grad.push(T::of(2.0) * d / kk / scale);
            }
            Ok((loss, grad))
        }
    }
}

pub fn loss<T: Real>(class_sums: &[T], label: usize, kind: LossKind, scale: T) -> Result<T> {
    loss_and_grad(class_sums, label, kind, scale).map(|(l, _)| l)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_sums_give_ln_k() {
        let l = loss(&[7.0f64; 4], 2, LossKind::CrossEntropy, 10.0).unwrap();
        assert!((l - 4f64.ln()).abs() < 1e-14);
    }

    #[test]
    fn confident_sum_drives_ce_to_zero() {
        let l = loss(&[1e4f64, 0.0, 0.0], 0, LossKind::CrossEntropy, 1.0).unwrap();
        assert!(l < 1e-12);
    }

    #[test]
    fn mse_zero_at_target() {
        assert_eq!(loss(&[0.0f64, 30.0, 0.0], 1, LossKind::Mse, 30.0).unwrap(), 0.0);
    }

    #[test]
    fn bad_label() {
        assert!(matches!(loss(&[1.0f64, 2.0], 2, LossKind::Mse, 1.0), Err(Error::Input(_))));
    }

    #[test]
    fn gradients_match_finite_differences() {
        let sums = [3.0f64, 11.0, 5.0];
        for kind in [LossKind::CrossEntropy, LossKind::Mse] {
            let (_, g) = loss_and_grad(&sums, 1, kind, 20.0).unwrap();
            for c in 0..3 {
                let (mut a, mut b) = (sums, sums);
                a[c] += 1e-5;
                b[c] -= 1e-5;
                let fd = (loss(&a, 1, kind, 20.0).unwrap() - loss(&b, 1, kind, 20.0).unwrap()) / 2e-5;
                assert!((fd - g[c]).abs() < 1e-9, "{kind}: {fd} vs {}", g[c]);
            }
        }
    }
}
