//! Scalar abstraction: all numeric kernels are generic over `Scalar`,
//! implemented for `f32` and `f64`.

use ndarray::ScalarOperand;
use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};
use std::fmt::{Debug, Display};
use std::iter::Sum;

/// Floating-point scalar usable throughout the crate.
///
/// Default tolerances quoted in the documentation are calibrated for `f64`;
/// `f32` users should widen them accordingly.
pub trait Scalar:
    Float + NumAssign + FromPrimitive + ToPrimitive + ScalarOperand + Sum + Debug + Display + Send + Sync + 'static
{
    /// Lossy conversion from `f64` (panics only on `NaN`-free exotic types, never for f32/f64).
    fn real(v: f64) -> Self {
        Self::from_f64(v).expect("f64 is representable")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().expect("scalar converts to f64")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}
