//! Exact rational helpers. Values always print as `p/q`.

use crate::error::{BxError, Result};
use num_rational::Ratio;
use num_traits::{ToPrimitive, Zero};

pub type Rational = Ratio<i64>;

pub fn rat(n: i64, d: i64) -> Rational {
    Ratio::new(n, d)
}

pub fn int(n: i64) -> Rational {
    Ratio::from_integer(n)
}

/// `p/q` with the denominator always present (`6/1`).
pub fn fmt_rational(r: &Rational) -> String {
    format!("{}/{}", r.numer(), r.denom())
}

/// Accepts `p/q`, `p`, or a finite decimal such as `0.4`.
pub fn parse_rational(s: &str) -> Result<Rational> {
    let s = s.trim();
    let bad = || BxError::Parse(format!("not a rational: {s:?}"));
    if let Some((p, q)) = s.split_once('/') {
        let p: i64 = p.trim().parse().map_err(|_| bad())?;
        let q: i64 = q.trim().parse().map_err(|_| bad())?;
        if q == 0 {
            return Err(bad());
        }
        return Ok(Ratio::new(p, q));
    }
    if let Some((ip, fp)) = s.split_once('.') {
        if fp.is_empty() || fp.len() > 12 || !fp.bytes().all(|b| b.is_ascii_digit()) {
            return Err(bad());
        }
        let neg = ip.starts_with('-');
        let ip_abs = ip.trim_start_matches('-');
        let whole: i64 = if ip_abs.is_empty() { 0 } else { ip_abs.parse().map_err(|_| bad())? };
        let den = 10i64.pow(fp.len() as u32);
        let frac: i64 = fp.parse().map_err(|_| bad())?;
        let mag = whole.checked_mul(den).and_then(|x| x.checked_add(frac)).ok_or_else(bad)?;
        return Ok(Ratio::new(if neg { -mag } else { mag }, den));
    }
    let p: i64 = s.parse().map_err(|_| bad())?;
    Ok(Ratio::from_integer(p))
}

/// Display-only decimal rendering.
pub fn to_decimal(r: &Rational, places: usize) -> String {
    if r.denom().is_zero() {
        return "nan".into();
    }
    let v = r.numer().to_f64().unwrap_or(f64::NAN) / r.denom().to_f64().unwrap_or(f64::NAN);
    format!("{v:.places$}")
}
