//! Exact rational numbers and their text form.
//!
//! Every probability in the crate is a [`Q`]. The canonical text form is
//! `"num/den"`; parsing also accepts plain integers and finite decimals such
//! as `0.125`, which are converted exactly.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use std::str::FromStr;

use crate::error::Error;

/// Exact rational scalar used throughout.
pub type Q = BigRational;

/// `n / d` as an exact rational. Panics if `d == 0`.
pub fn q(n: i64, d: i64) -> Q {
    Q::new(BigInt::from(n), BigInt::from(d))
}

/// The integer `n` as a rational.
pub fn qi(n: i64) -> Q {
    Q::from_integer(BigInt::from(n))
}

pub fn zero() -> Q {
    Q::zero()
}

pub fn one() -> Q {
    Q::one()
}

/// Parse `"a/b"`, `"a"`, or a finite decimal like `"-0.375"`.
pub fn parse_q(s: &str) -> Result<Q, Error> {
    let t = s.trim();
    let bad = || Error::Parse(format!("not a rational number: {s:?}"));
    if t.is_empty() {
        return Err(bad());
    }
    if let Some((n, d)) = t.split_once('/') {
        let n = BigInt::from_str(n.trim()).map_err(|_| bad())?;
        let d = BigInt::from_str(d.trim()).map_err(|_| bad())?;
        if d.is_zero() {
            return Err(Error::Parse(format!("zero denominator in {s:?}")));
        }
        return Ok(Q::new(n, d));
    }
    if let Some((int_part, frac_part)) = t.split_once('.') {
        let negative = int_part.starts_with('-');
        let int_digits = int_part.trim_start_matches(['-', '+']);
        let all_digits = |x: &str| x.chars().all(|c| c.is_ascii_digit());
        if !all_digits(int_digits) || !all_digits(frac_part) {
            return Err(bad());
        }
        if int_digits.is_empty() && frac_part.is_empty() {
            return Err(bad());
        }
        let digits = format!("{int_digits}{frac_part}");
        let mag = if digits.is_empty() {
            BigInt::zero()
        } else {
            BigInt::from_str(&digits).map_err(|_| bad())?
        };
        let den = num_traits::pow(BigInt::from(10), frac_part.len());
        let v = Q::new(mag, den);
        return Ok(if negative { -v } else { v });
    }
    let n = BigInt::from_str(t).map_err(|_| bad())?;
    Ok(Q::from_integer(n))
}

/// Canonical `"num/den"` form (always with a denominator).
pub fn fmt_q(x: &Q) -> String {
    format!("{}/{}", x.numer(), x.denom())
}

/// Lossy conversion, for display only.
pub fn to_f64(x: &Q) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

pub fn sum(xs: &[Q]) -> Q {
    xs.iter().fold(Q::zero(), |acc, x| acc + x)
}

pub fn is_probability_vector(xs: &[Q]) -> bool {
    !xs.is_empty() && xs.iter().all(|x| !x.is_negative()) && sum(xs).is_one()
}

/// Parse a comma-separated list of rationals.
pub fn parse_q_list(s: &str) -> Result<Vec<Q>, Error> {
    s.split(',').map(parse_q).collect()
}

/// Serde adapter storing a single rational as a `"num/den"` string.
pub mod serde_q {
    use super::*;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(x: &Q, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&fmt_q(x))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Q, D::Error> {
        let s = String::deserialize(d)?;
        parse_q(&s).map_err(serde::de::Error::custom)
    }
}

/// Serde adapter for `Vec<Q>`.
pub mod serde_qvec {
    use super::*;
    use serde::ser::SerializeSeq;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(xs: &[Q], s: S) -> Result<S::Ok, S::Error> {
        let mut seq = s.serialize_seq(Some(xs.len()))?;
        for x in xs {
            seq.serialize_element(&fmt_q(x))?;
        }
        seq.end()
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Q>, D::Error> {
        let v = Vec::<String>::deserialize(d)?;
        v.iter()
            .map(|s| parse_q(s).map_err(serde::de::Error::custom))
            .collect()
    }
}

/// Serde adapter for `Vec<Vec<Q>>`.
pub mod serde_qmat {
    use super::*;
    use serde::ser::SerializeSeq;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(m: &[Vec<Q>], s: S) -> Result<S::Ok, S::Error> {
        let mut seq = s.serialize_seq(Some(m.len()))?;
        for row in m {
            let r: Vec<String> = row.iter().map(fmt_q).collect();
            seq.serialize_element(&r)?;
        }
        seq.end()
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Vec<Q>>, D::Error> {
        let v = Vec::<Vec<String>>::deserialize(d)?;
        v.iter()
            .map(|row| {
                row.iter()
                    .map(|s| parse_q(s).map_err(serde::de::Error::custom))
                    .collect()
            })
            .collect()
    }
}
