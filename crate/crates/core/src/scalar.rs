//! Scalar abstraction shared by every numeric routine in the crate.

use std::fmt::{Debug, Display};

use nalgebra::RealField;
use num_complex::Complex;
use num_traits::{FromPrimitive, ToPrimitive};
use rustfft::FftNum;

/// Real floating point type usable by the estimators: `f32` or `f64`.
///
/// Linear algebra goes through [`RealField`], transforms through [`FftNum`].
/// Both traits expose `abs`, so call sites use [`Real::magnitude`] instead.
pub trait Real: RealField + FftNum + FromPrimitive + ToPrimitive + Copy + Default + Display + Debug {
    /// Converts an `f64` literal; panics only for values the type cannot hold.
    fn lit(v: f64) -> Self {
        <Self as FromPrimitive>::from_f64(v).expect("literal representable in scalar type")
    }

    fn from_usize_lossy(v: usize) -> Self {
        <Self as FromPrimitive>::from_usize(v).expect("integer representable in scalar type")
    }

    fn as_f64(self) -> f64 {
        ToPrimitive::to_f64(&self).unwrap_or(f64::NAN)
    }

    fn magnitude(self) -> Self {
        nalgebra::ComplexField::abs(self)
    }

    /// Machine epsilon of the scalar type.
    fn eps() -> Self {
        Self::default_epsilon()
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Complex number over the crate scalar.
pub type Cplx<T> = Complex<T>;

pub(crate) fn cnan<T: Real>() -> Complex<T> {
    let nan = T::lit(f64::NAN);
    Complex::new(nan, nan)
}

pub(crate) fn cabs<T: Real>(z: Complex<T>) -> T {
    z.re.hypot(z.im)
}

/// `e^{j phase}`.
pub(crate) fn cis<T: Real>(phase: T) -> Complex<T> {
    Complex::new(phase.cos(), phase.sin())
}
