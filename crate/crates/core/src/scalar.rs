//! Scalar abstraction shared by the numeric modules.
//!
//! Everything below the experiment harness is written against [`Real`] so the
//! same code runs in `f32` (embedded-style receivers) and `f64` (analysis).

use std::fmt::{Debug, Display};

use num_traits::{Float, FromPrimitive, NumAssign};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

/// Floating-point scalar usable throughout the crate: `f32` or `f64`.
pub trait Real:
    Float + FromPrimitive + NumAssign + Debug + Display + Default + Send + Sync + 'static
{
    /// Lossy conversion from an `f64` literal.
    fn lit(x: f64) -> Self;

    /// Widening conversion used for reporting and statistics.
    fn to_f64_lossy(self) -> f64;

    /// One draw from N(0, 1).
    fn std_normal<R: Rng + ?Sized>(rng: &mut R) -> Self;

    /// `out[L] = Σ_k received[k + L] · reference[k]` computed with an FFT.
    ///
    /// Callers guarantee `reference.len() <= received.len()` and both non-empty.
    fn fft_correlate(received: &[Self], reference: &[Self]) -> Vec<Self>;
}

macro_rules! impl_real {
    ($t:ty) => {
        impl Real for $t {
            #[inline]
            fn lit(x: f64) -> Self {
                x as $t
            }

            #[inline]
            fn to_f64_lossy(self) -> f64 {
                self as f64
            }

            #[inline]
            fn std_normal<R: Rng + ?Sized>(rng: &mut R) -> Self {
                <StandardNormal as Distribution<$t>>::sample(&StandardNormal, rng)
            }

            fn fft_correlate(received: &[Self], reference: &[Self]) -> Vec<Self> {
                crate::ranging::fft_correlate_impl(received, reference)
            }
        }
    };
}

impl_real!(f32);
impl_real!(f64);

/// Machine epsilon scaled for relative rank tests.
pub(crate) fn rank_eps<F: Real>() -> F {
    F::epsilon() * F::lit(64.0)
}
