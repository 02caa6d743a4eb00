//! Numeric literals in model documents.
//!
//! A literal is a JSON number, a decimal string (`"0.25"`, `"1e-3"`) or a
//! rational string (`"3/4"`). Every literal keeps its exact rational value;
//! decimals are read in base ten without rounding.

use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde_json::Value;

use crate::error::{Error, Result};

#[derive(Clone, Debug)]
pub struct Number {
    exact: BigRational,
    value: f64,
    /// Written as `num/den` in the source document.
    rational_form: bool,
}

impl Number {
    pub fn from_rational(r: BigRational) -> Self {
        let value = r.to_f64().unwrap_or(f64::NAN);
        Number {
            exact: r,
            value,
            rational_form: true,
        }
    }

    pub fn from_f64(x: f64) -> Self {
        let exact = BigRational::from_float(x).unwrap_or_else(BigRational::zero);
        Number {
            exact,
            value: x,
            rational_form: false,
        }
    }

    pub fn exact(&self) -> &BigRational {
        &self.exact
    }

    pub fn value(&self) -> f64 {
        self.value
    }

    pub fn is_rational_form(&self) -> bool {
        self.rational_form
    }

    pub fn is_integer(&self) -> bool {
        self.exact.is_integer()
    }

    pub fn is_zero(&self) -> bool {
        self.exact.is_zero()
    }

    pub fn parse_str(text: &str) -> Result<Self> {
        let t = text.trim();
        if let Some((n, d)) = t.split_once('/') {
            let num: BigInt = n
                .trim()
                .parse()
                .map_err(|_| Error::Schema(format!("bad rational numerator in {text:?}")))?;
            let den: BigInt = d
                .trim()
                .parse()
                .map_err(|_| Error::Schema(format!("bad rational denominator in {text:?}")))?;
            if den.is_zero() {
                return Err(Error::Schema(format!("zero denominator in {text:?}")));
            }
            return Ok(Self::from_rational(BigRational::new(num, den)));
        }
        let exact = parse_decimal(t)
            .ok_or_else(|| Error::Schema(format!("not a number: {text:?}")))?;
        let value: f64 = t
            .parse()
            .map_err(|_| Error::Schema(format!("not a number: {text:?}")))?;
        Ok(Number {
            exact,
            value,
            rational_form: false,
        })
    }

    pub fn from_json(v: &Value, field: &str) -> Result<Self> {
        match v {
            Value::Number(n) => Self::parse_str(&n.to_string())
                .map_err(|_| Error::Schema(format!("{field}: unreadable number {n}"))),
            Value::String(s) => {
                Self::parse_str(s).map_err(|e| Error::Schema(format!("{field}: {e}")))
            }
            other => Err(Error::Schema(format!(
                "{field}: expected a number, found {other}"
            ))),
        }
    }

    /// JSON form: `"num/den"` when `exact_mode`, otherwise a plain number.
    pub fn to_json(&self, exact_mode: bool) -> Value {
        if exact_mode {
            Value::String(format!("{}/{}", self.exact.numer(), self.exact.denom()))
        } else {
            serde_json::Number::from_f64(self.value)
                .map(Value::Number)
                .unwrap_or(Value::Null)
        }
    }
}

/// Equality by value; the source spelling does not matter.
impl PartialEq for Number {
    fn eq(&self, other: &Self) -> bool {
        self.exact == other.exact && self.value == other.value
    }
}

impl fmt::Display for Number {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.rational_form {
            write!(f, "{}/{}", self.exact.numer(), self.exact.denom())
        } else {
            write!(f, "{}", self.value)
        }
    }
}

/// Exact base-ten reading of `[sign] digits [. digits] [e [sign] digits]`.
fn parse_decimal(t: &str) -> Option<BigRational> {
    let (mantissa, exponent) = match t.find(['e', 'E']) {
        Some(i) => (&t[..i], t[i + 1..].parse::<i32>().ok()?),
        None => (t, 0),
    };
    let (negative, digits) = match mantissa.as_bytes().first()? {
        b'-' => (true, &mantissa[1..]),
        b'+' => (false, &mantissa[1..]),
        _ => (false, mantissa),
    };
    let (int_part, frac_part) = digits.split_once('.').unwrap_or((digits, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return None;
    }
    if !int_part.bytes().chain(frac_part.bytes()).all(|b| b.is_ascii_digit()) {
        return None;
    }
    let all: String = format!("{int_part}{frac_part}");
    let mut num: BigInt = all.parse().ok()?;
    if negative {
        num = -num;
    }
    let scale = exponent - frac_part.len() as i32;
    let ten = BigInt::from(10);
    let r = if scale >= 0 {
        BigRational::from_integer(num * num_traits::pow(ten, scale as usize))
    } else {
        BigRational::new(num, num_traits::pow(ten, (-scale) as usize))
    };
    Some(r)
}

/// `Some(r)` when `r` is strictly between 0 and 1.
pub(crate) fn in_open_unit(r: &BigRational) -> bool {
    r.is_positive() && r < &BigRational::one()
}
