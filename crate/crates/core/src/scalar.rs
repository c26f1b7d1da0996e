//! Scalar abstraction shared by every numerical module.

use std::fmt::{Debug, Display, LowerExp};
use std::iter::Sum;

use num_complex::Complex;
use num_traits::{Float, FloatConst};
use rustfft::FftPlanner;

/// Real floating-point type the crate computes in (`f32` or `f64`).
///
/// Besides the usual float traits this carries a batched FFT hook, so the
/// spectral code can stay generic without dragging `rustfft::FftNum` (whose
/// `Signed` supertrait makes `abs` ambiguous) into every bound.
pub trait Scalar:
    Float + FloatConst + Sum + Default + Debug + Display + LowerExp + Send + Sync + 'static
{
    /// In-place unnormalized DFT of every contiguous chunk of length `len`.
    fn fft_batch(buf: &mut [Complex<Self>], len: usize, inverse: bool);
}

macro_rules! impl_scalar {
    ($t:ty) => {
        impl Scalar for $t {
            fn fft_batch(buf: &mut [Complex<Self>], len: usize, inverse: bool) {
                let mut planner = FftPlanner::<$t>::new();
                let plan = if inverse {
                    planner.plan_fft_inverse(len)
                } else {
                    planner.plan_fft_forward(len)
                };
                plan.process(buf);
            }
        }
    };
}

impl_scalar!(f32);
impl_scalar!(f64);

/// Converts an `f64` literal into `T`.
#[inline]
pub fn lit<T: Scalar>(x: f64) -> T {
    T::from(x).expect("literal representable in target float type")
}

#[inline]
pub(crate) fn to_f64<T: Scalar>(x: T) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

/// Tolerance scaled to the working precision: `max(tol, factor * eps)`.
#[inline]
pub(crate) fn tol_floor<T: Scalar>(tol: f64, factor: f64) -> T {
    let eps = T::epsilon();
    let t = lit::<T>(tol);
    let f = lit::<T>(factor) * eps;
    if t > f {
        t
    } else {
        f
    }
}
