//! Scalar abstraction shared by every solver in the crate.

use std::fmt::{Debug, Display, LowerExp};
use std::iter::Sum;

use num_complex::Complex;
use num_traits::{Float, FloatConst, FromPrimitive, NumAssign};
use rustfft::FftNum;

/// Real floating point type the numerical core is generic over (`f32` or `f64`).
///
/// `FftNum` brings `num_traits::Signed` along, whose `abs`/`signum` collide with
/// the `Float` methods of the same name; call those as `Float::abs(x)`.
pub trait Real:
    Float
    + NumAssign
    + FloatConst
    + FromPrimitive
    + FftNum
    + Default
    + Debug
    + Display
    + LowerExp
    + Sum
    + Send
    + Sync
    + 'static
{
    /// Converts an `f64` literal. Panics only if the target cannot represent finite values.
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("literal does not fit the scalar type")
    }

    fn from_usize_lossy(n: usize) -> Self {
        Self::from_usize(n).expect("integer does not fit the scalar type")
    }

    fn from_i64_lossy(n: i64) -> Self {
        Self::from_i64(n).expect("integer does not fit the scalar type")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// Machine epsilon of the format, as used for relative tolerances.
    fn eps() -> Self {
        Self::epsilon()
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Field element of a dense matrix: a real scalar or a complex number over one.
pub trait Entry:
    Copy
    + Debug
    + Send
    + Sync
    + PartialEq
    + std::ops::Add<Output = Self>
    + std::ops::Sub<Output = Self>
    + std::ops::Mul<Output = Self>
    + std::ops::Div<Output = Self>
    + std::ops::Neg<Output = Self>
    + std::ops::AddAssign
    + std::ops::SubAssign
    + std::ops::MulAssign
    + 'static
{
    type Real: Real;
    fn zero_entry() -> Self;
    fn one_entry() -> Self;
    fn from_real(r: Self::Real) -> Self;
    fn modulus(self) -> Self::Real;
    fn scale(self, r: Self::Real) -> Self;
}

impl<T: Real> Entry for T {
    type Real = T;
    fn zero_entry() -> Self {
        T::zero()
    }
    fn one_entry() -> Self {
        T::one()
    }
    fn from_real(r: T) -> Self {
        r
    }
    fn modulus(self) -> T {
        Float::abs(self)
    }
    fn scale(self, r: T) -> Self {
        self * r
    }
}

impl<T: Real> Entry for Complex<T> {
    type Real = T;
    fn zero_entry() -> Self {
        Complex::new(T::zero(), T::zero())
    }
    fn one_entry() -> Self {
        Complex::new(T::one(), T::zero())
    }
    fn from_real(r: T) -> Self {
        Complex::new(r, T::zero())
    }
    fn modulus(self) -> T {
        self.norm()
    }
    fn scale(self, r: T) -> Self {
        self * r
    }
}

/// Shorthand for the complex type over a [`Real`].
pub type Cx<T> = Complex<T>;

pub(crate) fn cx<T: Real>(re: T, im: T) -> Complex<T> {
    Complex::new(re, im)
}
