//! Exact rational helpers.
//!
//! Every size, cost, LP weight and matching value in this crate is a
//! [`Rational`] (arbitrary-precision numerator and denominator).

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

pub type Rational = BigRational;

pub fn int(n: i64) -> Rational {
    Rational::from_integer(BigInt::from(n))
}

/// `num / den`, reduced. Panics on a zero denominator.
pub fn frac(num: i64, den: i64) -> Rational {
    Rational::new(BigInt::from(num), BigInt::from(den))
}

/// Parses `"p"` or `"p/q"` (optional sign, optional surrounding whitespace).
pub fn parse(text: &str) -> Result<Rational> {
    let text = text.trim();
    let bad = || Error::InvalidInput(format!("not a rational number: {text:?}"));
    let (num, den) = match text.split_once('/') {
        Some((n, d)) => (n.trim(), d.trim()),
        None => (text, "1"),
    };
    let num: BigInt = num.parse().map_err(|_| bad())?;
    let den: BigInt = den.parse().map_err(|_| bad())?;
    if den.is_zero() {
        return Err(bad());
    }
    Ok(Rational::new(num, den))
}

pub fn to_f64(value: &Rational) -> f64 {
    value.to_f64().unwrap_or(f64::NAN)
}

/// Human-readable decimal with 15 significant digits. The exact rational is
/// the authoritative value; this string is only for reading.
pub fn decimal(value: &Rational) -> String {
    let x = to_f64(value);
    if x == 0.0 {
        return "0".to_string();
    }
    let mag = x.abs();
    if !(1e-5..1e15).contains(&mag) {
        return format!("{x:.14e}");
    }
    let digits = (14 - mag.log10().floor() as i32).max(0) as usize;
    let s = format!("{x:.digits$}");
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

/// Least common multiple of the denominators.
pub fn common_denominator<'a>(values: impl IntoIterator<Item = &'a Rational>) -> BigInt {
    values.into_iter().fold(BigInt::from(1), |acc, v| acc.lcm(v.denom()))
}

/// Whether `value <= (1 + sqrt 2) / 2`, decided exactly: `2v - 1 <= sqrt 2`
/// holds iff `2v - 1 <= 0` or `(2v - 1)^2 <= 2`.
pub fn at_most_rounding_bound(value: &Rational) -> bool {
    let lhs = value * int(2) - int(1);
    !lhs.is_positive() || &lhs * &lhs <= int(2)
}

/// Whether `num <= (1 + sqrt 2) / 2 * den` for `den >= 0`.
pub fn ratio_within_rounding_bound(num: &Rational, den: &Rational) -> bool {
    // 2 num - den <= sqrt2 * den
    let lhs = num * int(2) - den;
    if !lhs.is_positive() {
        return true;
    }
    if den.is_negative() {
        return false;
    }
    &lhs * &lhs <= den * den * int(2)
}

/// (1 + sqrt 2) / 2 as a float, for display only.
pub const ROUNDING_BOUND_F64: f64 = 1.207_106_781_186_547_5;
