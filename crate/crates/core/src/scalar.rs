//! Scalar abstraction shared by every numeric routine in the crate.

use std::fmt::{Debug, Display, LowerExp};
use std::iter::Sum;
use std::str::FromStr;

use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};

/// Real scalar type the networks, solvers and verifiers are generic over.
///
/// Implemented for `f32` and `f64`. `Display` must print the shortest string
/// that parses back to the identical value (true for the std float types), so
/// model files round-trip bit-exactly.
pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + Sum
    + Default
    + Debug
    + Display
    + LowerExp
    + FromStr
    + Send
    + Sync
    + 'static
{
    /// Lossy conversion from an `f64` literal or measurement.
    fn of(v: f64) -> Self;

    /// Lossy conversion back to `f64`, used for reporting.
    fn to_f64_lossy(self) -> f64;

    /// Name written to reports.
    const NAME: &'static str;
}

impl Scalar for f64 {
    #[inline]
    fn of(v: f64) -> Self {
        v
    }
    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self
    }
    const NAME: &'static str = "f64";
}

impl Scalar for f32 {
    #[inline]
    fn of(v: f64) -> Self {
        v as f32
    }
    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self as f64
    }
    const NAME: &'static str = "f32";
}

/// Index of the largest entry; ties resolve to the lowest index.
pub fn argmax<T: Scalar>(values: &[T]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// `values[label] - max_{i != label} values[i]`; `+inf` for a single class.
pub fn label_margin<T: Scalar>(values: &[T], label: usize) -> T {
    let mut other = T::neg_infinity();
    for (i, &v) in values.iter().enumerate() {
        if i != label && v > other {
            other = v;
        }
    }
    values[label] - other
}
