//! Scalar abstraction shared by the geometry, kinematics and network code.

use std::fmt::Debug;

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Floating point scalar usable throughout the crate (`f32` or `f64`).
pub trait Real:
    Float + FloatConst + FromPrimitive + ToPrimitive + Debug + Default + Send + Sync + 'static
{
    /// Lossy conversion from an `f64` literal.
    #[inline]
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("literal representable in scalar type")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// `sign(v) * |v|^e`, the signed power used by the superquadric parameterization.
#[inline]
pub fn signed_pow<T: Real>(v: T, e: T) -> T {
    if v == T::zero() {
        T::zero()
    } else {
        v.signum() * v.abs().powf(e)
    }
}

/// `|v|^e` with `0^e = 0` for every positive exponent.
#[inline]
pub fn abs_pow<T: Real>(v: T, e: T) -> T {
    let a = v.abs();
    if a == T::zero() {
        T::zero()
    } else {
        a.powf(e)
    }
}
