//! Plain-text number formatting shared by the CSV writers.

use crate::scalar::Scalar;

/// Scientific notation with 15 significant digits; round-trips `f64`.
pub fn num<T: Scalar>(x: T) -> String {
    format!("{:.14e}", x)
}
