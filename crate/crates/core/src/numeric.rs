//! Numeric backends.
//!
//! Every algorithm in the crate is written once against [`Value`] and
//! instantiated with `f64` (fast, approximate) or [`Rational`] (exact).

use std::fmt::{Debug, Display};
use std::ops::{AddAssign, DivAssign, MulAssign, Neg, SubAssign};
use std::str::FromStr;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};

/// Arbitrary-precision rational number.
pub type Rational = num_rational::BigRational;

/// A number field usable as matrix entries and solution values.
pub trait Value:
    Clone
    + Debug
    + Display
    + PartialEq
    + PartialOrd
    + Send
    + Sync
    + 'static
    + Zero
    + One
    + Neg<Output = Self>
    + for<'a> AddAssign<&'a Self>
    + for<'a> SubAssign<&'a Self>
    + for<'a> MulAssign<&'a Self>
    + for<'a> DivAssign<&'a Self>
    + CanonicalText
{
    /// `true` for backends where arithmetic is exact.
    const EXACT: bool;

    /// Short name used in diagnostics and result exports.
    const NAME: &'static str;

    fn from_rational(value: &Rational) -> Self;

    /// Exact for rationals (every finite float is a dyadic rational).
    /// Returns `None` for NaN and infinities.
    fn from_f64(value: f64) -> Option<Self>;

    fn as_float(&self) -> f64;

    /// Exact rational view, when one exists.
    fn to_rational(&self) -> Option<Rational>;

    fn abs_value(&self) -> Self;

    fn from_usize(value: usize) -> Self {
        Self::from_rational(&Rational::from_integer(BigInt::from(value)))
    }

    fn add_ref(&self, other: &Self) -> Self {
        let mut out = self.clone();
        out += other;
        out
    }

    fn sub_ref(&self, other: &Self) -> Self {
        let mut out = self.clone();
        out -= other;
        out
    }

    fn mul_ref(&self, other: &Self) -> Self {
        let mut out = self.clone();
        out *= other;
        out
    }

    fn div_ref(&self, other: &Self) -> Self {
        let mut out = self.clone();
        out /= other;
        out
    }

    fn is_exactly_zero(&self) -> bool {
        self.is_zero()
    }

    /// Larger of the two; `self` on ties.
    fn max_ref<'a>(&'a self, other: &'a Self) -> &'a Self {
        if other > self {
            other
        } else {
            self
        }
    }
}

impl Value for f64 {
    const EXACT: bool = false;
    const NAME: &'static str = "float";

    fn from_rational(value: &Rational) -> Self {
        rational_to_f64(value)
    }

    fn from_f64(value: f64) -> Option<Self> {
        value.is_finite().then_some(value)
    }

    fn as_float(&self) -> f64 {
        *self
    }

    fn to_rational(&self) -> Option<Rational> {
        Rational::from_float(*self)
    }

    fn abs_value(&self) -> Self {
        f64::abs(*self)
    }

    fn from_usize(value: usize) -> Self {
        value as f64
    }
}

impl Value for Rational {
    const EXACT: bool = true;
    const NAME: &'static str = "rational";

    fn from_rational(value: &Rational) -> Self {
        value.clone()
    }

    fn from_f64(value: f64) -> Option<Self> {
        Rational::from_float(value)
    }

    fn as_float(&self) -> f64 {
        rational_to_f64(self)
    }

    fn to_rational(&self) -> Option<Rational> {
        Some(self.clone())
    }

    fn abs_value(&self) -> Self {
        Signed::abs(self)
    }
}

/// Round a rational to the nearest double.
pub fn rational_to_f64(value: &Rational) -> f64 {
    ToPrimitive::to_f64(value).unwrap_or_else(|| {
        if value.is_negative() {
            f64::NEG_INFINITY
        } else {
            f64::INFINITY
        }
    })
}

/// Error returned when a numeric literal cannot be read.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid numeric literal '{0}'")]
pub struct LiteralError(pub String);

/// Parse a decimal literal (`12`, `0.25`, `1e-3`, `-2.5E4`) or a fraction
/// `p/q` into an exact rational. Decimal text is read digit-for-digit, so
/// `0.1` is exactly `1/10`.
pub fn parse_rational(text: &str) -> Result<Rational, LiteralError> {
    let err = || LiteralError(text.to_string());
    let text = text.trim();
    if let Some((num, den)) = text.split_once('/') {
        let num = parse_rational(num)?;
        let den = parse_rational(den)?;
        if den.is_zero() {
            return Err(err());
        }
        return Ok(num / den);
    }
    let (negative, body) = match text.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, text.strip_prefix('+').unwrap_or(text)),
    };
    let (mantissa, exponent) = match body.find(['e', 'E']) {
        Some(pos) => {
            let exp: i64 = body[pos + 1..].parse().map_err(|_| err())?;
            if exp.abs() > 100_000 {
                return Err(err());
            }
            (&body[..pos], exp)
        }
        None => (body, 0),
    };
    let (int_part, frac_part) = match mantissa.split_once('.') {
        Some((i, f)) => (i, f),
        None => (mantissa, ""),
    };
    if int_part.is_empty() && frac_part.is_empty() {
        return Err(err());
    }
    if !int_part.chars().chain(frac_part.chars()).all(|c| c.is_ascii_digit()) {
        return Err(err());
    }
    let digits = format!("{int_part}{frac_part}");
    let mut numer = BigInt::from_str(if digits.is_empty() { "0" } else { &digits }).map_err(|_| err())?;
    let scale = exponent - frac_part.len() as i64;
    let ten = BigInt::from(10u32);
    let mut denom = BigInt::one();
    if scale >= 0 {
        numer *= num_traits::pow(ten, scale as usize);
    } else {
        denom = num_traits::pow(ten, (-scale) as usize);
    }
    if negative {
        numer = -numer;
    }
    Ok(Rational::new(numer, denom))
}

/// `true` when the rational has a finite decimal expansion (denominator of
/// the form 2^a 5^b).
pub fn is_terminating_decimal(value: &Rational) -> bool {
    let mut d = value.denom().clone();
    let two = BigInt::from(2u32);
    let five = BigInt::from(5u32);
    while d.is_even() {
        d /= &two;
    }
    while (&d % &five).is_zero() {
        d /= &five;
    }
    d.is_one()
}

/// Decimal rendering of a rational with a terminating expansion, e.g.
/// `1/8` → `0.125`. Returns `None` otherwise.
pub fn rational_to_decimal(value: &Rational) -> Option<String> {
    if !is_terminating_decimal(value) {
        return None;
    }
    if value.is_integer() {
        return Some(value.to_integer().to_string());
    }
    let ten = BigInt::from(10u32);
    let mut places = 0usize;
    let mut scaled = Signed::abs(value);
    while !scaled.is_integer() {
        scaled *= Rational::from_integer(ten.clone());
        places += 1;
    }
    let digits = scaled.to_integer().to_string();
    let digits = format!("{digits:0>width$}", width = places + 1);
    let (int_part, frac_part) = digits.split_at(digits.len() - places);
    let sign = if value.is_negative() { "-" } else { "" };
    Some(format!("{sign}{int_part}.{frac_part}"))
}

/// Format a double like C's `%.17g`: 17 significant digits, trailing zeros
/// removed, fixed notation for exponents in `[-5, 17)`. Reading the output
/// back yields the identical bit pattern.
pub fn format_f64_17g(value: f64) -> String {
    if value == 0.0 {
        return if value.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    if !value.is_finite() {
        return if value.is_nan() {
            "nan".into()
        } else if value > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        };
    }
    let sci = format!("{value:.16e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent marker");
    let exp: i32 = exp.parse().expect("exponent");
    let negative = mantissa.starts_with('-');
    let digits: String = mantissa.chars().filter(|c| c.is_ascii_digit()).collect();
    let sign = if negative { "-" } else { "" };
    if (-5..17).contains(&exp) {
        let out = if exp >= 0 {
            let split = (exp + 1) as usize;
            let (i, f) = digits.split_at(split);
            format!("{i}.{f}")
        } else {
            format!("0.{}{}", "0".repeat((-exp - 1) as usize), digits)
        };
        let out = out.trim_end_matches('0').trim_end_matches('.');
        format!("{sign}{out}")
    } else {
        let (lead, rest) = digits.split_at(1);
        let rest = rest.trim_end_matches('0');
        let esign = if exp < 0 { '-' } else { '+' };
        if rest.is_empty() {
            format!("{sign}{lead}e{esign}{:02}", exp.abs())
        } else {
            format!("{sign}{lead}.{rest}e{esign}{:02}", exp.abs())
        }
    }
}

/// Canonical text of a value: rationals as `p/q` (or `p` when integral),
/// floats via [`format_f64_17g`].
pub trait CanonicalText {
    fn canonical_text(&self) -> String;
}

impl CanonicalText for f64 {
    fn canonical_text(&self) -> String {
        format_f64_17g(*self)
    }
}

impl CanonicalText for Rational {
    fn canonical_text(&self) -> String {
        if self.is_integer() {
            self.to_integer().to_string()
        } else {
            format!("{}/{}", self.numer(), self.denom())
        }
    }
}

/// Read a value from explicit-format text (decimal or `p/q`).
pub fn parse_value<V: Value>(text: &str) -> Result<V, LiteralError> {
    parse_rational(text).map(|q| V::from_rational(&q))
}
