use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};

/// Real scalar the image, profile and tensor types are generic over: `f32` or `f64`.
pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + Sum
    + Default
    + Debug
    + Display
    + Send
    + Sync
    + 'static
{
    /// Lossy conversion from `f64`; panics only for non-representable values,
    /// which cannot occur between the two float widths.
    #[inline]
    fn of(v: f64) -> Self {
        Self::from_f64(v).expect("f64 converts to every float scalar")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().expect("float scalar converts to f64")
    }

    #[inline]
    fn of_usize(v: usize) -> Self {
        Self::of(v as f64)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}
