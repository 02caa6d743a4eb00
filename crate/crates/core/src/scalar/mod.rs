//! Numeric modes.
//!
//! Every computation in the crate is generic over [`Scalar`]. Two carriers
//! exist: `f64` for scalable float work, and [`Surd`] for exact work on
//! models whose kernels are rational. Square roots of rationals are exact
//! surds, so affinities, densities and the Hellinger identity can be
//! compared with strict equality in exact mode.

mod surd;

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Mul, Sub};

use num_rational::BigRational;
use num_traits::ToPrimitive;

pub use surd::Surd;

pub trait Scalar:
    Clone
    + fmt::Debug
    + PartialEq
    + Send
    + Sync
    + 'static
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
{
    /// True for the exact carrier; comparisons ignore tolerances.
    const EXACT: bool;

    fn zero() -> Self;
    fn one() -> Self;
    fn from_rational(r: &BigRational) -> Self;
    fn from_f64(x: f64) -> Self;
    fn to_f64(&self) -> f64;

    /// Square root. In exact mode the argument must be a nonnegative rational.
    fn sqrt(&self) -> Self;

    /// Division. In exact mode the divisor must be a single nonzero term.
    fn div(&self, rhs: &Self) -> Self;

    fn cmp_value(&self, other: &Self) -> Ordering;

    fn is_zero(&self) -> bool;

    /// Equality under the mode's comparison rule: exact in exact mode,
    /// absolute tolerance `tol` in float mode.
    fn close_to(&self, other: &Self, tol: f64) -> bool;

    /// Rational text (`num/den`) in exact mode, shortest round-trip decimal in float mode.
    fn to_text(&self) -> String;

    fn product<I: IntoIterator<Item = Self>>(items: I) -> Self {
        items.into_iter().fold(Self::one(), |acc, x| acc * x)
    }

    fn le(&self, other: &Self) -> bool {
        self.cmp_value(other) != Ordering::Greater
    }

    /// `self <= other`, with float slack `tol` in float mode.
    fn le_within(&self, other: &Self, tol: f64) -> bool {
        if Self::EXACT {
            self.le(other)
        } else {
            self.to_f64() <= other.to_f64() + tol
        }
    }
}

impl Scalar for f64 {
    const EXACT: bool = false;

    fn zero() -> Self {
        0.0
    }
    fn one() -> Self {
        1.0
    }
    fn from_rational(r: &BigRational) -> Self {
        r.to_f64().unwrap_or(f64::NAN)
    }
    fn from_f64(x: f64) -> Self {
        x
    }
    fn to_f64(&self) -> f64 {
        *self
    }
    fn sqrt(&self) -> Self {
        f64::sqrt(*self)
    }
    fn div(&self, rhs: &Self) -> Self {
        self / rhs
    }
    fn cmp_value(&self, other: &Self) -> Ordering {
        self.total_cmp(other)
    }
    fn is_zero(&self) -> bool {
        *self == 0.0
    }
    fn close_to(&self, other: &Self, tol: f64) -> bool {
        (self - other).abs() <= tol
    }
    fn to_text(&self) -> String {
        format!("{self:?}")
    }

    /// Log-space accumulation; long products of affinities underflow otherwise.
    fn product<I: IntoIterator<Item = Self>>(items: I) -> Self {
        let mut log = 0.0;
        for x in items {
            if x == 0.0 {
                return 0.0;
            }
            log += x.ln();
        }
        log.exp()
    }
}

impl Scalar for Surd {
    const EXACT: bool = true;

    fn zero() -> Self {
        Surd::zero()
    }
    fn one() -> Self {
        Surd::one()
    }
    fn from_rational(r: &BigRational) -> Self {
        Surd::rational(r.clone())
    }
    fn from_f64(x: f64) -> Self {
        Surd::rational(BigRational::from_float(x).expect("finite float"))
    }
    fn to_f64(&self) -> f64 {
        Surd::to_f64(self)
    }
    fn sqrt(&self) -> Self {
        Surd::sqrt(self)
    }
    fn div(&self, rhs: &Self) -> Self {
        Surd::div(self, rhs)
    }
    fn cmp_value(&self, other: &Self) -> Ordering {
        (self.clone() - other.clone()).signum()
    }
    fn is_zero(&self) -> bool {
        Surd::is_zero(self)
    }
    fn close_to(&self, other: &Self, _tol: f64) -> bool {
        self == other
    }
    fn to_text(&self) -> String {
        self.to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_product_is_log_space() {
        let xs = vec![0.5f64; 2000];
        let p = <f64 as Scalar>::product(xs);
        assert!(p >= 0.0 && p.is_finite());
        let ys = vec![0.9f64; 10];
        assert!((<f64 as Scalar>::product(ys) - 0.9f64.powi(10)).abs() < 1e-14);
        assert_eq!(<f64 as Scalar>::product(vec![0.3, 0.0]), 0.0);
    }

    #[test]
    fn float_text_round_trips() {
        for x in [0.1, 1.0 / 3.0, 2.5e-300, 0.75] {
            let t = Scalar::to_text(&x);
            assert_eq!(t.parse::<f64>().unwrap(), x);
        }
    }
}
