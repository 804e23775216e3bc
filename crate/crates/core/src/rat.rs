//! Exact rational scalars and the "p/q" string form used in files and reports.

use num_bigint::BigInt;
use num_traits::ToPrimitive;
use std::str::FromStr;
use thiserror::Error;

pub type Rat = num_rational::BigRational;

#[derive(Debug, Error, PartialEq, Eq)]
#[error("'{text}' is not a rational number (expected an integer or \"p/q\")")]
pub struct RatParseError {
    pub text: String,
}

/// The rational `n` as an exact value.
pub fn rat_int(n: i64) -> Rat {
    Rat::from_integer(BigInt::from(n))
}

/// The rational `num/den`. Panics on a zero denominator; test/construction helper.
pub fn rat(num: i64, den: i64) -> Rat {
    Rat::new(BigInt::from(num), BigInt::from(den))
}

/// Parses "3/2", "-3/2", or "3" exactly. Whitespace around the token is accepted.
pub fn parse_rat(text: &str) -> Result<Rat, RatParseError> {
    let trimmed = text.trim();
    if trimmed.is_empty() {
        return Err(RatParseError { text: text.to_owned() });
    }
    Rat::from_str(trimmed).map_err(|_| RatParseError { text: text.to_owned() })
}

/// Renders a rational as "p/q", or "p" when the denominator is one.
/// This is the inverse of [`parse_rat`] on reduced values.
pub fn format_rat(value: &Rat) -> String {
    value.to_string()
}

/// Nearest double; the only place exactness is allowed to end.
pub fn rat_to_f64(value: &Rat) -> f64 {
    value.to_f64().unwrap_or(f64::NAN)
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_traits::One;

    #[test]
    fn parse_round_trips() {
        for text in ["3/2", "-3/2", "7", "0", "-12", "355/113"] {
            let v = parse_rat(text).unwrap();
            assert_eq!(format_rat(&v), text);
        }
    }

    #[test]
    fn parse_normalizes() {
        assert_eq!(parse_rat("6/4").unwrap(), rat(3, 2));
        assert_eq!(parse_rat(" 2/2 ").unwrap(), Rat::one());
        assert_eq!(format_rat(&parse_rat("4/2").unwrap()), "2");
    }

    #[test]
    fn parse_rejects_junk() {
        for text in ["", "1/0", "a/b", "1.5", "1/2/3", "--3"] {
            assert!(parse_rat(text).is_err(), "{text:?} should not parse");
        }
    }

    #[test]
    fn float_conversion() {
        assert_eq!(rat_to_f64(&rat(3, 8)), 0.375);
        assert_eq!(rat_to_f64(&rat(-1, 4)), -0.25);
    }
}
