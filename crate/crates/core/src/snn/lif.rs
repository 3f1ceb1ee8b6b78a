use crate::scalar::Real;

/// One LIF update with subtractive reset:
/// `u' = beta * u + i_in - s_prev * u_th`, `s' = [u' > u_th]`.
pub fn lif_step<T: Real>(u: &[T], s_prev: &[T], i_in: &[T], beta: T, u_th: T) -> (Vec<T>, Vec<T>) {
    let mut u_next = u.to_vec();
    let mut s = vec![T::zero(); u.len()];
    lif_step_in_place(&mut u_next, s_prev, i_in, beta, u_th, &mut s);
    (u_next, s)
}

#[inline]
fn lif_step_in_place<T: Real>(u: &mut [T], s_prev: &[T], i_in: &[T], beta: T, u_th: T, s_out: &mut [T]) {
    debug_assert!(u.len() == s_prev.len() && u.len() == i_in.len() && u.len() == s_out.len());
    for i in 0..u.len() {
        u[i] = beta * u[i] + i_in[i] - s_prev[i] * u_th;
        s_out[i] = heaviside(u[i] - u_th);
    }
}

/// 1 for strictly positive input, else 0.
#[inline]
pub fn heaviside<T: Real>(x: T) -> T {
    if x > T::zero() {
        T::one()
    } else {
        T::zero()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn rest_stays_at_rest() {
        let (u, s) = lif_step(&[0.0f64], &[0.0], &[0.0], 0.9, 1.0);
        assert_eq!((u[0], s[0]), (0.0, 0.0));
    }

    #[test]
    fn period_two_firing() {
        // hand iteration of u(t) = 0.9 u(t-1) + 0.6 - s(t-1)
        let expected = [(0.6, 0.0), (1.14, 1.0), (0.626, 0.0), (1.1634, 1.0)];
        let (mut u, mut s) = (vec![0.0f64], vec![0.0f64]);
        for (want_u, want_s) in expected {
            let (nu, ns) = lif_step(&u, &s, &[0.6], 0.9, 1.0);
            assert!((nu[0] - want_u).abs() < 1e-12, "{} vs {want_u}", nu[0]);
            assert_eq!(ns[0], want_s);
            u = nu;
            s = ns;
        }
    }

    #[test]
    fn threshold_is_strict() {
        let (u, s) = lif_step(&[0.0f64], &[0.0], &[1.0], 0.9, 1.0);
        assert_eq!(u[0], 1.0);
        assert_eq!(s[0], 0.0);
    }

    proptest! {
        #[test]
        fn matches_scalar_recurrence(inputs in prop::collection::vec(-2f64..3.0, 1..80), beta in 0.05f64..0.99, u_th in 0.1f64..2.0) {
            let (mut u, mut s) = (vec![0.0f64], vec![0.0f64]);
            let (mut ru, mut rs) = (0.0f64, 0.0f64);
            for &i in &inputs {
                let (nu, ns) = lif_step(&u, &s, &[i], beta, u_th);
                ru = beta * ru + i - rs * u_th;
                rs = if ru > u_th { 1.0 } else { 0.0 };
                prop_assert!((nu[0] - ru).abs() <= 1e-12 * ru.abs().max(1.0));
                prop_assert_eq!(ns[0], rs);
                u = nu;
                s = ns;
            }
        }
    }
}
