//! Exact arithmetic shared by the oracles and bound calculators.

use num_bigint::BigInt;
use num_traits::{ToPrimitive, Zero};

pub type Rational = num_rational::BigRational;

pub fn int(v: impl Into<BigInt>) -> Rational {
    Rational::from_integer(v.into())
}

pub fn ratio(num: impl Into<BigInt>, den: impl Into<BigInt>) -> Rational {
    Rational::new(num.into(), den.into())
}

/// Lossy conversion for display and plotting.
pub fn to_f64(r: &Rational) -> f64 {
    if r.is_zero() {
        return 0.0;
    }
    r.to_f64().unwrap_or(f64::NAN)
}

/// Best rational approximation of a finite `f64`, exact for binary fractions.
pub fn from_f64(v: f64) -> Option<Rational> {
    Rational::from_float(v)
}

/// Returns the value as `i128` if it is an integer that fits.
pub fn as_integer(r: &Rational) -> Option<i128> {
    if r.is_integer() {
        r.to_integer().to_i128()
    } else {
        None
    }
}
