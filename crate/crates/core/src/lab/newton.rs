//! Damped Newton iteration with a finite-difference Jacobian.

use thiserror::Error;

use crate::num::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum NewtonFailure {
    #[error("residual is not finite at the starting point")]
    NonFinite,
    #[error("Jacobian is singular")]
    Singular,
    #[error("line search could not reduce the residual")]
    Stalled,
    #[error("iteration limit reached")]
    MaxIterations,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NewtonSolution<T> {
    pub x: Vec<T>,
    /// Largest absolute residual at `x`.
    pub residual: T,
    pub iterations: usize,
}

/// Absolute residual tolerance used by default: `1e-10`, or a thousand
/// machine epsilons when that is coarser (the `f32` case).
pub fn default_tolerance<T: Scalar>() -> T {
    T::lit(1e-10).max(T::epsilon() * T::lit(1e3))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonSolver<T> {
    pub tolerance: T,
    pub max_iterations: usize,
    /// Extra full steps taken after reaching the tolerance, kept only while
    /// they shrink the residual.
    pub polish_steps: usize,
}

impl<T: Scalar> Default for NewtonSolver<T> {
    fn default() -> Self {
        NewtonSolver {
            tolerance: default_tolerance(),
            max_iterations: 100,
            polish_steps: 2,
        }
    }
}

fn max_abs<T: Scalar>(v: &[T]) -> T {
    v.iter().fold(T::zero(), |m, &x| {
        if x.is_nan() {
            T::infinity()
        } else {
            m.max(x.abs())
        }
    })
}

fn half_sq_norm<T: Scalar>(v: &[T]) -> T {
    let s = v.iter().fold(T::zero(), |acc, &x| acc + x * x);
    if s.is_finite() {
        s * T::lit(0.5)
    } else {
        T::infinity()
    }
}

impl<T: Scalar> NewtonSolver<T> {
    /// Solves `f(x) = 0` from `x0`. `f` writes the residual vector into its
    /// second argument, which has the same length as `x`.
    pub fn solve<F>(&self, mut f: F, x0: &[T]) -> Result<NewtonSolution<T>, NewtonFailure>
    where
        F: FnMut(&[T], &mut [T]),
    {
        let n = x0.len();
        let mut x = x0.to_vec();
        let mut fx = vec![T::zero(); n];
        f(&x, &mut fx);
        if n == 0 {
            return Ok(NewtonSolution { x, residual: T::zero(), iterations: 0 });
        }
        if !fx.iter().all(|v| v.is_finite()) {
            return Err(NewtonFailure::NonFinite);
        }
        let mut jac = vec![T::zero(); n * n];
        let mut step = vec![T::zero(); n];
        let mut trial = vec![T::zero(); n];
        let mut f_trial = vec![T::zero(); n];
        let sqrt_eps = T::epsilon().sqrt();
        let mut converged_at = None;
        for iter in 0..self.max_iterations {
            if converged_at.is_none() && max_abs(&fx) <= self.tolerance {
                converged_at = Some(iter);
            }
            if let Some(at) = converged_at {
                if iter >= at + self.polish_steps {
                    break;
                }
            }
            // Forward-difference Jacobian, column by column.
            for j in 0..n {
                let h = sqrt_eps * x[j].abs().max(T::one());
                trial.copy_from_slice(&x);
                trial[j] = x[j] + h;
                let h = trial[j] - x[j];
                f(&trial, &mut f_trial);
                for i in 0..n {
                    jac[i * n + j] = (f_trial[i] - fx[i]) / h;
                }
            }
            for i in 0..n {
                step[i] = -fx[i];
            }
            if !lu_solve(&mut jac, &mut step, n) {
                if converged_at.is_some() {
                    break;
                }
                return Err(NewtonFailure::Singular);
            }
            let phi = half_sq_norm(&fx);
            if converged_at.is_some() {
                for i in 0..n {
                    trial[i] = x[i] + step[i];
                }
                f(&trial, &mut f_trial);
                if half_sq_norm(&f_trial) < phi {
                    x.copy_from_slice(&trial);
                    fx.copy_from_slice(&f_trial);
                    continue;
                }
                break;
            }
            let mut alpha = T::one();
            let mut accepted = false;
            for _ in 0..40 {
                for i in 0..n {
                    trial[i] = x[i] + alpha * step[i];
                }
                f(&trial, &mut f_trial);
                let phi_t = half_sq_norm(&f_trial);
                if phi_t <= (T::one() - T::lit(2e-4) * alpha) * phi {
                    accepted = true;
                    break;
                }
                alpha = alpha * T::lit(0.5);
            }
            if !accepted {
                return Err(NewtonFailure::Stalled);
            }
            x.copy_from_slice(&trial);
            fx.copy_from_slice(&f_trial);
        }
        let residual = max_abs(&fx);
        if residual <= self.tolerance {
            Ok(NewtonSolution {
                x,
                residual,
                iterations: converged_at.unwrap_or(self.max_iterations),
            })
        } else {
            Err(NewtonFailure::MaxIterations)
        }
    }
}

/// Solves `a x = b` in place by LU decomposition with partial pivoting.
/// `a` is row-major `n x n` and is overwritten; `b` receives the solution.
/// Returns `false` when a pivot vanishes.
pub fn lu_solve<T: Scalar>(a: &mut [T], b: &mut [T], n: usize) -> bool {
    let scale = a.iter().fold(T::zero(), |m, v| m.max(v.abs()));
    let tiny = scale * T::epsilon() * T::lit(n as f64);
    for k in 0..n {
        let (p, pivot) = (k..n)
            .map(|r| (r, a[r * n + k].abs()))
            .fold((k, -T::one()), |best, cur| if cur.1 > best.1 { cur } else { best });
        if !(pivot > tiny) || !pivot.is_finite() {
            return false;
        }
        if p != k {
            for c in 0..n {
                a.swap(k * n + c, p * n + c);
            }
            b.swap(k, p);
        }
        let d = a[k * n + k];
        for r in k + 1..n {
            let factor = a[r * n + k] / d;
            if factor == T::zero() {
                continue;
            }
            a[r * n + k] = factor;
            for c in k + 1..n {
                let v = a[k * n + c];
                a[r * n + c] = a[r * n + c] - factor * v;
            }
            b[r] = b[r] - factor * b[k];
        }
    }
    for k in (0..n).rev() {
        let mut s = b[k];
        for c in k + 1..n {
            s = s - a[k * n + c] * b[c];
        }
        b[k] = s / a[k * n + k];
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lu_solves_a_pivoting_system() {
        let mut a = vec![0.0, 2.0, 1.0, 1.0, 1.0, 1.0, 2.0, 1.0, 3.0];
        let mut b = vec![5.0, 5.0, 12.0];
        assert!(lu_solve(&mut a, &mut b, 3));
        for (got, want) in b.iter().zip([1.0, 1.0, 3.0]) {
            assert!((got - want as f64).abs() < 1e-12, "{b:?}");
        }
    }

    #[test]
    fn lu_reports_singular() {
        let mut a = vec![1.0, 2.0, 2.0, 4.0];
        let mut b = vec![1.0, 2.0];
        assert!(!lu_solve(&mut a, &mut b, 2));
    }

    #[test]
    fn newton_finds_the_positive_root_of_a_coupled_system() {
        // x^2 + y^2 = 4, x = y
        let sol = NewtonSolver::<f64>::default()
            .solve(
                |v, out| {
                    out[0] = v[0] * v[0] + v[1] * v[1] - 4.0;
                    out[1] = v[0] - v[1];
                },
                &[1.0, 0.5],
            )
            .unwrap();
        let r = 2f64.sqrt();
        assert!((sol.x[0] - r).abs() < 1e-12 && (sol.x[1] - r).abs() < 1e-12);
    }

    #[test]
    fn newton_in_single_precision() {
        let solver = NewtonSolver::<f32>::default();
        assert!(solver.tolerance > 1e-5 && solver.tolerance < 1e-3);
        let sol = solver.solve(|v, out| out[0] = v[0] * v[0] - 2.0, &[1.0f32]).unwrap();
        assert!((sol.x[0] - 2f32.sqrt()).abs() < 1e-5);
    }

    #[test]
    fn newton_fails_without_a_root() {
        let err = NewtonSolver::<f64>::default()
            .solve(|v, out| out[0] = v[0] * v[0] + 1.0, &[1.0])
            .unwrap_err();
        assert!(matches!(err, NewtonFailure::Stalled | NewtonFailure::Singular | NewtonFailure::MaxIterations));
    }
}
