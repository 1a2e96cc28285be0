//! Scalar abstraction for the geometry core.

use num_traits::{Float, FromPrimitive, NumCast};

/// Floating-point scalar the geometry core is generic over: f32 or f64.
pub trait Real:
    Float + FromPrimitive + NumCast + Default + std::fmt::Debug + std::fmt::Display + Send + Sync + 'static
{
    /// Lift an `f64` literal into this scalar type.
    #[inline]
    fn of(v: f64) -> Self {
        Self::from_f64(v).expect("finite literal")
    }

    #[inline]
    fn two() -> Self {
        Self::one() + Self::one()
    }

    #[inline]
    fn half() -> Self {
        Self::one() / Self::two()
    }
}

impl<T> Real for T where
    T: Float + FromPrimitive + NumCast + Default + std::fmt::Debug + std::fmt::Display + Send + Sync + 'static
{
}

/// Wrap an angle to the principal range (-pi, pi].
pub fn wrap_angle<F: Real>(a: F) -> F {
    let pi = F::of(std::f64::consts::PI);
    let tau = pi + pi;
    let mut a = a % tau;
    if a <= -pi {
        a = a + tau;
    } else if a > pi {
        a = a - tau;
    }
    a
}
