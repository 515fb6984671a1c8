//! Exact rational helpers shared by the algebraic modules.

use num::bigint::BigInt;
use num::rational::BigRational;
use num::{One, ToPrimitive, Zero};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum RatError {
    #[error("invalid rational literal `{0}`")]
    Parse(String),
    #[error("zero denominator in `{0}`")]
    ZeroDenominator(String),
}

/// Parses `"p/q"` or a plain integer into an exact rational.
pub fn parse_ratio(s: &str) -> Result<BigRational, RatError> {
    let s = s.trim();
    let (num, den) = match s.split_once('/') {
        Some((n, d)) => (n.trim(), Some(d.trim())),
        None => (s, None),
    };
    let n: BigInt = num.parse().map_err(|_| RatError::Parse(s.to_string()))?;
    let d: BigInt = match den {
        Some(d) => d.parse().map_err(|_| RatError::Parse(s.to_string()))?,
        None => BigInt::one(),
    };
    if d.is_zero() {
        return Err(RatError::ZeroDenominator(s.to_string()));
    }
    Ok(BigRational::new(n, d))
}

/// Renders a rational as `p/q` (or `p` when integral), matching the wire format.
pub fn ratio_to_string(r: &BigRational) -> String {
    if r.denom().is_one() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

pub fn ratio(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

pub fn int(n: i64) -> BigRational {
    BigRational::from(BigInt::from(n))
}

/// Largest integer ≤ r.
pub fn floor_int(r: &BigRational) -> BigInt {
    r.floor().to_integer()
}

/// Fractional part in [0, 1).
pub fn fract(r: &BigRational) -> BigRational {
    r - r.floor()
}

pub fn is_integer(r: &BigRational) -> bool {
    r.denom().is_one()
}

/// Distance from r to the nearest integer (the standard circle metric).
pub fn circle_dist(r: &BigRational) -> BigRational {
    let f = fract(r);
    let complement = BigRational::one() - &f;
    if f <= complement {
        f
    } else {
        complement
    }
}

pub fn to_f64(r: &BigRational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

/// Binomial coefficient for arbitrary integer n and k ≥ 0 (integer-valued for all n).
pub fn binom(n: i64, k: u32) -> BigInt {
    let mut num = BigInt::one();
    for i in 0..k as i64 {
        num *= BigInt::from(n - i);
    }
    let mut den = BigInt::one();
    for i in 1..=k as i64 {
        den *= BigInt::from(i);
    }
    num / den
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_render_round_trip() {
        for s in ["3/5", "-7/4", "12", "0", "-1"] {
            let r = parse_ratio(s).unwrap();
            assert_eq!(ratio_to_string(&r), s);
        }
        assert!(parse_ratio("1/0").is_err());
        assert!(parse_ratio("a/b").is_err());
        // Non-canonical input normalizes.
        assert_eq!(ratio_to_string(&parse_ratio("4/8").unwrap()), "1/2");
    }

    #[test]
    fn fract_and_floor() {
        assert_eq!(fract(&ratio(7, 5)), ratio(2, 5));
        assert_eq!(fract(&ratio(-1, 5)), ratio(4, 5));
        assert_eq!(floor_int(&ratio(-1, 5)), BigInt::from(-1));
        assert_eq!(fract(&int(3)), int(0));
    }

    #[test]
    fn circle_metric_symmetry() {
        assert_eq!(circle_dist(&ratio(1, 5)), ratio(1, 5));
        assert_eq!(circle_dist(&ratio(4, 5)), ratio(1, 5));
        assert_eq!(circle_dist(&ratio(1, 2)), ratio(1, 2));
        assert_eq!(circle_dist(&int(2)), int(0));
    }

    #[test]
    fn binomials_at_negative_arguments() {
        assert_eq!(binom(4, 2), BigInt::from(6));
        assert_eq!(binom(-1, 2), BigInt::from(1));
        assert_eq!(binom(-2, 3), BigInt::from(-4));
        assert_eq!(binom(3, 0), BigInt::from(1));
        assert_eq!(binom(2, 3), BigInt::from(0));
    }
}
