//! Fast-sigmoid surrogate for the spike nonlinearity.

use serde::{Deserialize, Serialize};

use crate::scalar::Real;
use crate::snn::heaviside;

pub const DEFAULT_K_SLOPE: f64 = 25.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SurrogateMode {
    /// Heaviside forward, surrogate backward.
    HardForward,
    /// Fast-sigmoid forward; its exact derivative is the surrogate.
    RelaxedForward,
}

/// `x / (1 + k|x|)` with `x = u - u_th`.
#[inline]
pub fn relaxed_spike<T: Real>(x: T, k: T) -> T {
    x / (T::one() + k * x.abs())
}

/// `1 / (k|x| + 1)^2`, the derivative of [`relaxed_spike`].
#[inline]
pub fn surrogate_grad<T: Real>(x: T, k: T) -> T {
    let d = k * x.abs() + T::one();
    T::one() / (d * d)
}

/// Returns `(activation, gradient_factor)` for membrane `u`.
pub fn surrogate_spike<T: Real>(u: T, u_th: T, k: T, mode: SurrogateMode) -> (T, T) {
    let x = u - u_th;
    let act = match mode {
        SurrogateMode::HardForward => heaviside(x),
        SurrogateMode::RelaxedForward => relaxed_spike(x, k),
    };
    (act, surrogate_grad(x, k))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn factor_peaks_at_threshold() {
        assert_eq!(surrogate_spike(1.0f64, 1.0, 25.0, SurrogateMode::HardForward), (0.0, 1.0));
    }

    #[test]
    fn factor_one_above_threshold() {
        let (act, g) = surrogate_spike(2.0f64, 1.0, 25.0, SurrogateMode::HardForward);
        assert_eq!(act, 1.0);
        assert!((g - 1.0 / 676.0).abs() < 1e-15);
        assert!((g - 1.479e-3).abs() < 1e-6);
    }

    #[test]
    fn relaxed_is_odd_and_saturates() {
        let k = 25.0f64;
        for x in [0.01, 0.3, 2.0, 1e6] {
            assert_eq!(relaxed_spike(x, k), -relaxed_spike(-x, k));
        }
        assert!((relaxed_spike(1e12, k) - 1.0 / k).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn factor_in_unit_interval_and_mode_independent(u in -50f64..50.0, th in 0.1f64..5.0, k in 0.1f64..100.0) {
            let (_, a) = surrogate_spike(u, th, k, SurrogateMode::HardForward);
            let (_, b) = surrogate_spike(u, th, k, SurrogateMode::RelaxedForward);
            prop_assert_eq!(a, b);
            prop_assert!(a > 0.0 && a <= 1.0);
        }

        #[test]
        fn factor_is_derivative_of_relaxed(x in -3f64..3.0, k in 0.5f64..40.0) {
            prop_assume!(x.abs() > 1e-3);
            let h = 1e-6;
            let fd = (relaxed_spike(x + h, k) - relaxed_spike(x - h, k)) / (2.0 * h);
            prop_assert!((fd - surrogate_grad(x, k)).abs() <= 1e-6 * surrogate_grad(x, k).max(1e-3));
        }
    }
}
