//! Scalar abstraction for the numeric kernels.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, NumAssign, NumCast};

/// Floating-point scalar the numeric kernels are generic over.
///
/// `f32` and `f64` both satisfy the bound. Cluster assignments, ranked lists
/// and aggregated metrics are the stable contract of this crate; raw
/// embedding coordinates may differ between scalar types.
pub trait Real: Float + NumAssign + NumCast + Sum + Debug + Display + Default + Send + Sync + 'static {}

impl<T> Real for T where
    T: Float + NumAssign + NumCast + Sum + Debug + Display + Default + Send + Sync + 'static
{
}

/// Shorthand for converting an `f64` constant into the working scalar.
#[inline]
pub fn real<F: Real>(x: f64) -> F {
    F::from(x).expect("finite f64 constant representable in scalar type")
}
