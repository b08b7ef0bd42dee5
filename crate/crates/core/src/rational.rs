//! Exact rational scalars and their `"p/q"` text form.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

/// Exact rational scalar used for every probability and mixing weight.
pub type Q = BigRational;

pub fn int(v: i64) -> Q {
    Q::from_integer(BigInt::from(v))
}

pub fn ratio(p: i64, q: i64) -> Q {
    Q::new(BigInt::from(p), BigInt::from(q))
}

/// `1 / 2^k`.
pub fn inv_pow2(k: usize) -> Q {
    Q::new(BigInt::one(), BigInt::one() << k)
}

pub fn pow2(k: usize) -> Q {
    Q::from_integer(BigInt::one() << k)
}

/// Formats in lowest terms with an explicit denominator, e.g. `"20/1"`.
pub fn format(q: &Q) -> String {
    format!("{}/{}", q.numer(), q.denom())
}

/// Parses `"p/q"` or a bare integer `"p"`.
pub fn parse(s: &str) -> Result<Q> {
    let bad = || Error::Rational(s.to_string());
    let t = s.trim();
    let (p, q) = match t.split_once('/') {
        Some((p, q)) => (p.trim(), q.trim()),
        None => (t, "1"),
    };
    if p.is_empty() || q.is_empty() || q.starts_with(['-', '+']) {
        return Err(bad());
    }
    let p: BigInt = p.parse().map_err(|_| bad())?;
    let q: BigInt = q.parse().map_err(|_| bad())?;
    if q.is_zero() {
        return Err(bad());
    }
    Ok(Q::new(p, q))
}

pub fn to_f64(q: &Q) -> f64 {
    match q.to_f64() {
        Some(v) if v.is_finite() => v,
        // numerator/denominator too large for a direct conversion
        _ => {
            let shift = q.denom().bits().max(q.numer().bits()).saturating_sub(1000);
            let n = (q.numer() >> shift).to_f64().unwrap_or(0.0);
            let d = (q.denom() >> shift).to_f64().unwrap_or(1.0);
            n / d
        }
    }
}

/// Decimal rendering with `digits` fractional digits, truncated toward zero.
pub fn to_decimal(q: &Q, digits: usize) -> String {
    let neg = q.is_negative();
    let a = q.abs();
    let scale = BigInt::from(10).pow(digits as u32);
    let scaled = (a.numer() * &scale) / a.denom();
    let whole = &scaled / &scale;
    let frac = &scaled % &scale;
    let sign = if neg { "-" } else { "" };
    if digits == 0 {
        return format!("{sign}{whole}");
    }
    format!("{sign}{whole}.{:0>width$}", frac.to_string(), width = digits)
}

pub fn in_unit_interval(q: &Q) -> bool {
    !q.is_negative() && *q <= Q::one()
}
