//! Scalar abstraction for the numerical parts of the crate.
//!
//! Graph algorithms are index based and never touch floating point. Expression
//! evaluation, the equilibrium solver, the ODE integrator and the correlation
//! statistics are generic over [`Scalar`] so they can run in `f32` or `f64`.

use std::fmt::{Debug, Display};

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating point type usable by the numerical modules.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + Debug + Display + Default + Send + Sync + 'static
{
    /// Converts an `f64` literal, panicking only if the target type cannot
    /// represent finite values at all (never the case for `f32`/`f64`).
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("scalar type cannot represent literal")
    }

    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl<T> Scalar for T where
    T: Float + FromPrimitive + ToPrimitive + Debug + Display + Default + Send + Sync + 'static
{
}

#[cfg(test)]
mod tests {
    use super::*;

    fn halve<T: Scalar>(x: T) -> T {
        x * T::lit(0.5)
    }

    #[test]
    fn literal_conversion_works_for_both_widths() {
        assert_eq!(halve(3.0f64), 1.5);
        assert_eq!(halve(3.0f32), 1.5f32);
        assert_eq!(2.5f32.to_f64_lossy(), 2.5);
    }
}
