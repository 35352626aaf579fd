//! Number types the recurrences run over: `f64` in production, exact
//! rationals in tests.

use std::fmt::Debug;
use std::ops::Neg;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Num, Signed, ToPrimitive, Zero};

/// Coefficients below this fraction of the largest one are trimmed from `f64` polynomials.
pub const TRIM_REL: f64 = 1e-10;

pub trait Scalar: Clone + Debug + PartialOrd + Num + Neg<Output = Self> {
    /// Whether `self` counts as zero next to a quantity of size `scale`.
    fn negligible(&self, scale: &Self) -> bool;
    fn magnitude(&self) -> Self;
    fn to_f64(&self) -> f64;
    /// Factor that brings `self` back near 1 when it drifts far from it.
    /// Exact types never rescale.
    fn renormalizer(&self) -> Option<Self>;
    /// Equality up to `rel · scale` for floats; exact for rationals.
    fn within(&self, other: &Self, scale: &Self, rel: f64) -> bool;
}

impl Scalar for f64 {
    fn negligible(&self, scale: &Self) -> bool {
        self.abs() <= TRIM_REL * scale.abs()
    }
    fn magnitude(&self) -> Self {
        self.abs()
    }
    fn to_f64(&self) -> f64 {
        *self
    }
    fn renormalizer(&self) -> Option<Self> {
        let m = self.abs();
        if m > 1e8 || (m < 1e-8 && m > 0.0) {
            Some(1.0 / self)
        } else {
            None
        }
    }
    fn within(&self, other: &Self, scale: &Self, rel: f64) -> bool {
        (self - other).abs() <= rel * scale.abs()
    }
}

impl Scalar for BigRational {
    fn negligible(&self, _scale: &Self) -> bool {
        self.is_zero()
    }
    fn magnitude(&self) -> Self {
        self.abs()
    }
    fn to_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }
    fn renormalizer(&self) -> Option<Self> {
        None
    }
    fn within(&self, other: &Self, _scale: &Self, _rel: f64) -> bool {
        self == other
    }
}

/// Exact rational `p/q`.
pub fn ratio(p: i64, q: i64) -> BigRational {
    BigRational::new(BigInt::from(p), BigInt::from(q))
}
