//! Scalar abstraction shared by the deterministic parts of the crate.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Floating point type usable by the PGF, mechanism, ODE and scaling code.
///
/// Implemented for `f32` and `f64`. Monte Carlo sampling always works in
/// `f64` internally and converts parameters through [`ToPrimitive`].
pub trait Real:
    Float + FloatConst + FromPrimitive + ToPrimitive + Sum + Default + Debug + Display + Send + Sync + 'static
{
    /// Converts an `f64` literal into `Self`.
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable")
    }

    fn from_u64_lossy(n: u64) -> Self {
        Self::from_u64(n).expect("integer representable as float")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().expect("float convertible to f64")
    }

    /// Machine epsilon of the type, used to scale clamping thresholds.
    fn eps() -> Self {
        Self::epsilon()
    }
}

impl<T> Real for T where
    T: Float + FloatConst + FromPrimitive + ToPrimitive + Sum + Default + Debug + Display + Send + Sync + 'static
{
}
