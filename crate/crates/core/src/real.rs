//! Exact rational numbers and the literal syntax used in JSON inputs.
//!
//! Accepted literal forms: integers (`3`, `-2`), decimals with optional
//! exponent (`0.1`, `1.5e-3`), fractions (`1/3`) and integer powers (`2^-8`).
//! Decimals are read exactly, so `0.1` is `1/10`, not the nearest binary
//! double.

use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::de::{self, Deserializer, Visitor};
use serde::{Deserialize, Serialize, Serializer};

use crate::error::{Error, Result};

pub type Rational = BigRational;

/// Largest exponent magnitude accepted in `b^e` and `1e-k` literals.
const MAX_EXPONENT: u32 = 4096;
const MAX_LITERAL_LEN: usize = 4096;

pub fn rat(num: i64, den: i64) -> Rational {
    Rational::new(BigInt::from(num), BigInt::from(den))
}

pub fn int(n: i64) -> Rational {
    Rational::from_integer(BigInt::from(n))
}

pub fn to_f64(r: &Rational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

/// Exact rational for the shortest decimal that round-trips `x`.
pub fn from_f64(x: f64) -> Result<Rational> {
    if !x.is_finite() {
        return Err(Error::invalid(format!("non-finite number {x}")));
    }
    parse_real(&format!("{x:e}"))
}

pub fn pow2(e: i32) -> Rational {
    let p = Rational::from_integer(BigInt::one() << e.unsigned_abs());
    if e >= 0 {
        p
    } else {
        p.recip()
    }
}

fn parse_int(s: &str) -> Result<BigInt> {
    let digits = s.strip_prefix(['+', '-']).unwrap_or(s);
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return Err(Error::invalid(format!("bad integer literal {s:?}")));
    }
    s.trim_start_matches('+')
        .parse::<BigInt>()
        .map_err(|e| Error::invalid(format!("bad integer literal {s:?}: {e}")))
}

fn parse_exponent(s: &str) -> Result<i32> {
    let e: i64 = s
        .trim_start_matches('+')
        .parse()
        .map_err(|_| Error::invalid(format!("bad exponent {s:?}")))?;
    if e.unsigned_abs() > MAX_EXPONENT as u64 {
        return Err(Error::invalid(format!("exponent {e} out of range")));
    }
    Ok(e as i32)
}

fn ten_pow(e: i32) -> Rational {
    let p = Rational::from_integer(num_traits::pow(BigInt::from(10), e.unsigned_abs() as usize));
    if e >= 0 {
        p
    } else {
        p.recip()
    }
}

fn parse_decimal(s: &str) -> Result<Rational> {
    let (mantissa, exp) = match s.find(['e', 'E']) {
        Some(i) => (&s[..i], parse_exponent(&s[i + 1..])?),
        None => (s, 0),
    };
    let (neg, body) = match mantissa.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, mantissa.strip_prefix('+').unwrap_or(mantissa)),
    };
    let (whole, frac) = match body.split_once('.') {
        Some((w, f)) => (w, f),
        None => (body, ""),
    };
    if whole.is_empty() && frac.is_empty() {
        return Err(Error::invalid(format!("bad decimal literal {s:?}")));
    }
    if !whole.bytes().chain(frac.bytes()).all(|b| b.is_ascii_digit()) {
        return Err(Error::invalid(format!("bad decimal literal {s:?}")));
    }
    let digits = format!("{whole}{frac}");
    let n: BigInt = if digits.is_empty() {
        BigInt::zero()
    } else {
        digits.parse().map_err(|_| Error::invalid(format!("bad decimal literal {s:?}")))?
    };
    let frac_len = i32::try_from(frac.len()).map_err(|_| Error::invalid("literal too long"))?;
    let shift = exp
        .checked_sub(frac_len)
        .filter(|e| e.unsigned_abs() <= 2 * MAX_EXPONENT)
        .ok_or_else(|| Error::invalid(format!("exponent out of range in {s:?}")))?;
    let v = Rational::from_integer(n) * ten_pow(shift);
    Ok(if neg { -v } else { v })
}

/// Parses a real literal exactly. Never panics.
pub fn parse_real(input: &str) -> Result<Rational> {
    let s = input.trim();
    if s.is_empty() {
        return Err(Error::invalid("empty number literal"));
    }
    if s.len() > MAX_LITERAL_LEN {
        return Err(Error::invalid("number literal too long"));
    }
    if let Some((num, den)) = s.split_once('/') {
        let n = parse_int(num.trim())?;
        let d = parse_int(den.trim())?;
        if d.is_zero() {
            return Err(Error::invalid(format!("zero denominator in {s:?}")));
        }
        return Ok(Rational::new(n, d));
    }
    if let Some((base, exp)) = s.split_once('^') {
        let b = parse_int(base.trim())?;
        let e = parse_exponent(exp.trim())?;
        if b.is_zero() && e < 0 {
            return Err(Error::invalid(format!("zero to a negative power in {s:?}")));
        }
        if b.abs().bits() as u64 * e.unsigned_abs() as u64 > 1 << 16 {
            return Err(Error::invalid(format!("power too large in {s:?}")));
        }
        let p = Rational::from_integer(num_traits::pow(b, e.unsigned_abs() as usize));
        return Ok(if e >= 0 { p } else { p.recip() });
    }
    parse_decimal(s)
}

/// A JSON-facing real: accepts a JSON number or a string literal.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Real(pub Rational);

impl Real {
    pub fn value(&self) -> &Rational {
        &self.0
    }

    pub fn to_f64(&self) -> f64 {
        to_f64(&self.0)
    }
}

impl From<Rational> for Real {
    fn from(r: Rational) -> Self {
        Real(r)
    }
}

impl fmt::Display for Real {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.denom().is_one() {
            write!(f, "{}", self.0.numer())
        } else {
            write!(f, "{}/{}", self.0.numer(), self.0.denom())
        }
    }
}

impl Serialize for Real {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_string())
    }
}

struct RealVisitor;

impl Visitor<'_> for RealVisitor {
    type Value = Real;

    fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("a number or a numeric string such as \"1/3\" or \"2^-8\"")
    }

    fn visit_i64<E: de::Error>(self, v: i64) -> std::result::Result<Real, E> {
        Ok(Real(Rational::from_integer(BigInt::from(v))))
    }

    fn visit_u64<E: de::Error>(self, v: u64) -> std::result::Result<Real, E> {
        Ok(Real(Rational::from_integer(BigInt::from(v))))
    }

    fn visit_f64<E: de::Error>(self, v: f64) -> std::result::Result<Real, E> {
        from_f64(v).map(Real).map_err(E::custom)
    }

    fn visit_str<E: de::Error>(self, v: &str) -> std::result::Result<Real, E> {
        parse_real(v).map(Real).map_err(E::custom)
    }
}

impl<'de> Deserialize<'de> for Real {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        deserializer.deserialize_any(RealVisitor)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn literal_forms() {
        assert_eq!(parse_real("1/3").unwrap(), rat(1, 3));
        assert_eq!(parse_real("2^-8").unwrap(), rat(1, 256));
        assert_eq!(parse_real("0.1").unwrap(), rat(1, 10));
        assert_eq!(parse_real("-1.5e-3").unwrap(), rat(-3, 2000));
        assert_eq!(parse_real(" 7 ").unwrap(), int(7));
        assert_eq!(parse_real(".5").unwrap(), rat(1, 2));
    }

    #[test]
    fn rejects_garbage() {
        for s in ["", "1/0", "abc", "1e99999", "2^99999", "0^-1", "--1", ".", "1.2.3", "1/"] {
            assert!(parse_real(s).is_err(), "{s:?} accepted");
        }
    }

    #[test]
    fn float_conversion_uses_shortest_decimal() {
        assert_eq!(from_f64(0.1).unwrap(), rat(1, 10));
        assert_eq!(from_f64(0.75).unwrap(), rat(3, 4));
        assert!(from_f64(f64::NAN).is_err());
    }

    #[test]
    fn json_accepts_numbers_and_strings() {
        let v: Vec<Real> = serde_json::from_str(r#"[0.25, "1/3", 2, "2^-3"]"#).unwrap();
        assert_eq!(v[0].0, rat(1, 4));
        assert_eq!(v[1].0, rat(1, 3));
        assert_eq!(v[2].0, int(2));
        assert_eq!(v[3].0, rat(1, 8));
        assert_eq!(serde_json::to_string(&v[1]).unwrap(), "\"1/3\"");
    }
}
