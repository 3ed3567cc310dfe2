//! Scalar abstraction shared by every numerical routine in the crate.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};

/// Floating-point scalar the toolkit can run on (`f32` or `f64`).
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + NumAssign + Sum + Debug + Display + Send + Sync + 'static
{
    /// Lossy conversion from `f64`; constants in the crate are written as `f64` literals.
    #[inline]
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().expect("scalar converts to f64")
    }

    /// Total order used wherever a canonical ordering of values is needed.
    fn total_cmp_s(&self, other: &Self) -> std::cmp::Ordering;
}

impl Scalar for f32 {
    fn total_cmp_s(&self, other: &Self) -> std::cmp::Ordering {
        self.total_cmp(other)
    }
}

impl Scalar for f64 {
    fn total_cmp_s(&self, other: &Self) -> std::cmp::Ordering {
        self.total_cmp(other)
    }
}

/// Sums in index order. All reductions in the crate go through this so that
/// results do not depend on how per-node work was scheduled.
#[inline]
pub fn ordered_sum<T: Scalar, I: IntoIterator<Item = T>>(values: I) -> T {
    let mut acc = T::zero();
    for v in values {
        acc += v;
    }
    acc
}

pub(crate) fn factorial(d: usize) -> usize {
    (1..=d).product()
}
