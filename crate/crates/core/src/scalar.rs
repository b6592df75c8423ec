//! Scalar abstraction shared by every map and orbit type.
//!
//! All public entry points are generic over [`Scalar`]. Exact rationals
//! ([`Rational`]) are the default everywhere results are certified; binary
//! floats exist as a projection for fast orbit scans and plotting.

use std::fmt::{Debug, Display};
use std::hash::Hash;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{FromPrimitive, Num, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

/// Arbitrary-precision rational number, always in lowest terms with a
/// positive denominator.
pub type Rational = BigRational;

/// Number type a map can be evaluated in.
pub trait Scalar: Clone + Debug + PartialOrd + Num + Signed + Send + Sync + 'static {
    /// `true` when arithmetic is exact (no rounding).
    const EXACT: bool;

    fn from_rational(r: &Rational) -> Self;

    fn to_f64(&self) -> f64;

    /// Largest integer not exceeding `self`.
    fn floor(&self) -> Self;

    fn from_i64(v: i64) -> Self;

    fn is_integer(&self) -> bool {
        self.floor() == *self
    }

    fn half() -> Self {
        Self::one() / (Self::one() + Self::one())
    }
}

/// Scalars with a total order and structural equality, usable as set keys.
pub trait ExactScalar: Scalar + Ord + Eq + Hash + Display {}

impl Scalar for Rational {
    const EXACT: bool = true;

    fn from_rational(r: &Rational) -> Self {
        r.clone()
    }

    fn to_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }

    fn floor(&self) -> Self {
        BigRational::floor(self)
    }

    fn from_i64(v: i64) -> Self {
        Rational::from_integer(BigInt::from(v))
    }

    fn is_integer(&self) -> bool {
        BigRational::is_integer(self)
    }
}

impl ExactScalar for Rational {}

macro_rules! impl_float_scalar {
    ($t:ty) => {
        impl Scalar for $t {
            const EXACT: bool = false;

            fn from_rational(r: &Rational) -> Self {
                <$t as FromPrimitive>::from_f64(ToPrimitive::to_f64(r).unwrap_or(f64::NAN)).unwrap_or(<$t>::NAN)
            }

            fn to_f64(&self) -> f64 {
                *self as f64
            }

            fn floor(&self) -> Self {
                <$t>::floor(*self)
            }

            fn from_i64(v: i64) -> Self {
                v as $t
            }
        }
    };
}

impl_float_scalar!(f32);
impl_float_scalar!(f64);

/// Builds `p/q` exactly. Panics on a zero denominator.
pub fn ratio(p: i64, q: i64) -> Rational {
    Rational::new(BigInt::from(p), BigInt::from(q))
}

/// Parses `"p/q"`, `"p"` or a plain decimal such as `"0.3"` or `"-1.25"`
/// into an exact rational. Decimals are read digit by digit, never through
/// a float.
pub fn parse_rational(text: &str) -> Result<Rational> {
    let s = text.trim();
    let bad = || Error::Parse(format!("not a rational number: {text:?}"));
    if s.is_empty() {
        return Err(bad());
    }
    if let Some((num, den)) = s.split_once('/') {
        let num = BigInt::from_str_radix(num.trim(), 10).map_err(|_| bad())?;
        let den = BigInt::from_str_radix(den.trim(), 10).map_err(|_| bad())?;
        if den.is_zero() {
            return Err(Error::Parse(format!("zero denominator in {text:?}")));
        }
        return Ok(Rational::new(num, den));
    }
    if let Some((int_part, frac_part)) = s.split_once('.') {
        let negative = int_part.starts_with('-');
        let int_digits = int_part.trim_start_matches(['-', '+']);
        if frac_part.is_empty() || !frac_part.bytes().all(|b| b.is_ascii_digit()) {
            return Err(bad());
        }
        if !int_digits.bytes().all(|b| b.is_ascii_digit()) {
            return Err(bad());
        }
        let digits = format!("{int_digits}{frac_part}");
        let mantissa = BigInt::from_str_radix(&digits, 10).map_err(|_| bad())?;
        let scale = num_traits::pow(BigInt::from(10u8), frac_part.len());
        let value = Rational::new(mantissa, scale);
        return Ok(if negative { -value } else { value });
    }
    let n = BigInt::from_str_radix(s, 10).map_err(|_| bad())?;
    Ok(Rational::from_integer(n))
}

/// Renders a rational as `"p/q"`, including integers (`"3/1"`).
pub fn format_rational(r: &Rational) -> String {
    format!("{}/{}", r.numer(), r.denom())
}

/// Total bit length of numerator and denominator.
pub fn bit_size(r: &Rational) -> u64 {
    r.numer().bits() + r.denom().bits()
}

/// Serde adapter for a single rational stored as a `"p/q"` string.
pub mod pq {
    use super::{format_rational, parse_rational, Rational};
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(r: &Rational, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&format_rational(r))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Rational, D::Error> {
        let text = String::deserialize(d)?;
        parse_rational(&text).map_err(serde::de::Error::custom)
    }
}

/// Serde adapter for a list of `"p/q"` strings.
pub mod pq_vec {
    use super::{format_rational, parse_rational, Rational};
    use serde::ser::SerializeSeq;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &[Rational], s: S) -> Result<S::Ok, S::Error> {
        let mut seq = s.serialize_seq(Some(v.len()))?;
        for r in v {
            seq.serialize_element(&format_rational(r))?;
        }
        seq.end()
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Rational>, D::Error> {
        let texts = Vec::<String>::deserialize(d)?;
        texts
            .iter()
            .map(|t| parse_rational(t).map_err(serde::de::Error::custom))
            .collect()
    }
}
