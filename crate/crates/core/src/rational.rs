//! Exact rational helpers. Rates, moments, `k = n/m` and `λ` are carried as
//! arbitrary-precision fractions so the lattice parameters come from integer
//! gcds rather than floating-point rationalization.

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

pub type Rational = BigRational;

pub fn int(v: u64) -> Rational {
    Rational::from_integer(BigInt::from(v))
}

pub fn frac(num: i64, den: i64) -> Rational {
    Rational::new(BigInt::from(num), BigInt::from(den))
}

pub fn to_f64(r: &Rational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

pub fn bigint_to_u64(v: &BigInt, what: &str) -> Result<u64> {
    v.to_u64().ok_or_else(|| Error::validation(format!("{what} = {v} does not fit in 64 bits")))
}

pub fn floor_u64(r: &Rational) -> Result<u64> {
    if r.is_negative() {
        return Err(Error::domain(format!("expected a nonnegative value, got {r}")));
    }
    bigint_to_u64(&r.floor().to_integer(), "floor")
}

pub fn ceil_u64(r: &Rational) -> Result<u64> {
    if r.is_negative() {
        return Err(Error::domain(format!("expected a nonnegative value, got {r}")));
    }
    bigint_to_u64(&r.ceil().to_integer(), "ceil")
}

/// Least common multiple of the denominators.
pub fn denominator_lcm<'a>(values: impl IntoIterator<Item = &'a Rational>) -> BigInt {
    values.into_iter().fold(BigInt::one(), |acc, v| acc.lcm(v.denom()))
}

/// Parses `"3"`, `"9/5"` or a plain decimal such as `"0.25"` exactly.
pub fn parse_rational(text: &str) -> Result<Rational> {
    let s = text.trim();
    let bad = || Error::validation(format!("cannot parse {text:?} as a rational number"));
    if s.is_empty() {
        return Err(bad());
    }
    if let Some((num, den)) = s.split_once('/') {
        let num: BigInt = num.trim().parse().map_err(|_| bad())?;
        let den: BigInt = den.trim().parse().map_err(|_| bad())?;
        if den.is_zero() {
            return Err(Error::validation(format!("zero denominator in {text:?}")));
        }
        return Ok(Rational::new(num, den));
    }
    if let Some((whole, fraction)) = s.split_once('.') {
        let negative = whole.starts_with('-');
        let digits = format!("{}{}", whole.trim_start_matches(['-', '+']), fraction);
        if digits.is_empty() || !digits.chars().all(|c| c.is_ascii_digit()) {
            return Err(bad());
        }
        let mut value =
            Rational::new(digits.parse::<BigInt>().map_err(|_| bad())?, BigInt::from(10u32).pow(fraction.len() as u32));
        if negative {
            value = -value;
        }
        return Ok(value);
    }
    s.parse::<BigInt>().map(Rational::from_integer).map_err(|_| bad())
}

pub fn parse_rational_list(text: &str) -> Result<Vec<Rational>> {
    text.split(',').map(parse_rational).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_forms() {
        assert_eq!(parse_rational("3").unwrap(), int(3));
        assert_eq!(parse_rational("9/5").unwrap(), frac(9, 5));
        assert_eq!(parse_rational("0.25").unwrap(), frac(1, 4));
        assert_eq!(parse_rational("-1.5").unwrap(), frac(-3, 2));
        assert_eq!(parse_rational(" 12/8 ").unwrap(), frac(3, 2));
        assert!(parse_rational("").is_err());
        assert!(parse_rational("1/0").is_err());
        assert!(parse_rational("abc").is_err());
        assert!(parse_rational("1.2.3").is_err());
    }

    #[test]
    fn lcm_of_denominators() {
        let v = [frac(1, 2), frac(3, 4), frac(5, 6)];
        assert_eq!(denominator_lcm(&v), BigInt::from(12));
    }

    #[test]
    fn floor_and_ceil() {
        assert_eq!(floor_u64(&frac(1600, 31)).unwrap(), 51);
        assert_eq!(ceil_u64(&frac(1600, 31)).unwrap(), 52);
        assert_eq!(ceil_u64(&int(7)).unwrap(), 7);
        assert!(floor_u64(&frac(-1, 2)).is_err());
    }
}
