//! Numeric abstraction for metric values.
//!
//! Every metric in this crate is a ratio of counts or a mean of token
//! distances, so it can be computed exactly with rationals as well as with
//! floats. Tests lean on the exact path to check aggregation identities
//! without tolerances.

use std::fmt::Debug;

use num_rational::Ratio;
use num_traits::{FromPrimitive, Num, ToPrimitive};

/// A metric value type: `f64`, `f32`, or an exact rational.
pub trait Scalar: Num + FromPrimitive + ToPrimitive + Clone + PartialOrd + Debug + 'static {
    #[inline]
    fn from_count(n: usize) -> Self {
        Self::from_usize(n).expect("count representable in scalar type")
    }

    /// `num / den`; callers guarantee `den > 0`.
    #[inline]
    fn ratio(num: usize, den: usize) -> Self {
        Self::from_count(num) / Self::from_count(den)
    }

    #[inline]
    fn abs_diff(&self, other: &Self) -> Self {
        if self >= other {
            self.clone() - other.clone()
        } else {
            other.clone() - self.clone()
        }
    }

    #[inline]
    fn to_f64_lossy(&self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl<T> Scalar for T where
    T: Num + FromPrimitive + ToPrimitive + Clone + PartialOrd + Debug + 'static
{
}

/// Unweighted mean; `None` for an empty input.
pub fn mean<S: Scalar>(values: impl IntoIterator<Item = S>) -> Option<S> {
    let mut n = 0usize;
    let mut sum = S::zero();
    for v in values {
        sum = sum + v;
        n += 1;
    }
    (n > 0).then(|| sum / S::from_count(n))
}

/// Exact rational used by tests and audits.
pub type Exact = Ratio<i64>;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mean_of_empty_is_none() {
        assert_eq!(mean::<f64>(Vec::new()), None);
    }

    #[test]
    fn exact_mean() {
        let m = mean([Exact::new(1, 3), Exact::new(2, 3), Exact::from_integer(1)]).unwrap();
        assert_eq!(m, Exact::new(2, 3));
    }

    #[test]
    fn abs_diff_half_integral() {
        let a = Exact::new(5, 2);
        assert_eq!(a.abs_diff(&Exact::from_integer(4)), Exact::new(3, 2));
        assert_eq!(2.0f64.abs_diff(&2.5), 0.5);
    }
}
