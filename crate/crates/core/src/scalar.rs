//! Scalar abstraction for the numeric core.

use std::fmt::{Debug, Display};

use num_traits::{Float, FromPrimitive};

/// Floating-point scalar the policy, losses, and trainer are generic over.
///
/// Implemented by `f32` and `f64` through the blanket impl; everything the
/// numeric core needs comes from `num_traits::Float`.
pub trait Scalar:
    Float + FromPrimitive + Debug + Display + Default + Send + Sync + 'static
{
}

impl<T> Scalar for T where
    T: Float + FromPrimitive + Debug + Display + Default + Send + Sync + 'static
{
}

/// Convert from f64, panicking only for exotic scalar types that cannot
/// represent ordinary constants.
pub fn from_f64<S: Scalar>(x: f64) -> S {
    S::from_f64(x).expect("scalar conversion from f64")
}

/// Convert a count to the scalar type.
pub fn from_usize<S: Scalar>(n: usize) -> S {
    S::from_usize(n).expect("scalar conversion from usize")
}

/// Convert to f64 for reporting.
pub fn to_f64<S: Scalar>(x: S) -> f64 {
    x.to_f64().expect("scalar conversion to f64")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trips_both_widths() {
        assert_eq!(to_f64(from_f64::<f32>(0.5)), 0.5);
        assert_eq!(to_f64(from_f64::<f64>(0.5)), 0.5);
        assert_eq!(from_usize::<f64>(7), 7.0);
    }
}
