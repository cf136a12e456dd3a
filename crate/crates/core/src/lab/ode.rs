//! Fixed-step RK4 integration to a steady state.

use crate::num::Scalar;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SteadyState<T> {
    pub step: T,
    pub max_steps: usize,
    /// Integration stops once every derivative is below this in magnitude.
    pub tolerance: T,
}

impl<T: Scalar> Default for SteadyState<T> {
    fn default() -> Self {
        SteadyState {
            step: T::lit(0.01),
            max_steps: 200_000,
            tolerance: T::lit(1e-8).max(T::epsilon().sqrt()),
        }
    }
}

impl<T: Scalar> SteadyState<T> {
    /// Integrates `dx/dt = f(x)` from `x0`. Returns the state once it is
    /// stationary, or `None` if it diverges or never settles.
    pub fn integrate<F>(&self, mut f: F, x0: &[T]) -> Option<Vec<T>>
    where
        F: FnMut(&[T], &mut [T]),
    {
        let n = x0.len();
        let mut x = x0.to_vec();
        let (mut k1, mut k2, mut k3, mut k4) =
            (vec![T::zero(); n], vec![T::zero(); n], vec![T::zero(); n], vec![T::zero(); n]);
        let mut tmp = vec![T::zero(); n];
        let h = self.step;
        let half = h * T::lit(0.5);
        let sixth = h / T::lit(6.0);
        for _ in 0..self.max_steps {
            f(&x, &mut k1);
            if !k1.iter().all(|v| v.is_finite()) {
                return None;
            }
            if k1.iter().all(|v| v.abs() <= self.tolerance) {
                return Some(x);
            }
            for i in 0..n {
                tmp[i] = x[i] + half * k1[i];
            }
            f(&tmp, &mut k2);
            for i in 0..n {
                tmp[i] = x[i] + half * k2[i];
            }
            f(&tmp, &mut k3);
            for i in 0..n {
                tmp[i] = x[i] + h * k3[i];
            }
            f(&tmp, &mut k4);
            for i in 0..n {
                x[i] = x[i] + sixth * (k1[i] + T::lit(2.0) * (k2[i] + k3[i]) + k4[i]);
            }
        }
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn relaxes_to_the_fixed_point() {
        // dx/dt = 3 - x, dy/dt = x - 2y
        let x = SteadyState::<f64>::default()
            .integrate(
                |v, out| {
                    out[0] = 3.0 - v[0];
                    out[1] = v[0] - 2.0 * v[1];
                },
                &[0.0, 0.0],
            )
            .unwrap();
        assert!((x[0] - 3.0).abs() < 1e-7 && (x[1] - 1.5).abs() < 1e-7);
    }

    #[test]
    fn divergence_is_reported() {
        let out = SteadyState::<f64>::default().integrate(|v, out| out[0] = v[0] * v[0], &[1.0]);
        assert!(out.is_none());
    }
}
