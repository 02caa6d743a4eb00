use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_bigint::{BigInt, BigUint, Sign};
use num_integer::{Integer, Roots};
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

/// Trial-division limit used when extracting square factors.
const TRIAL_LIMIT: u64 = 1 << 20;

/// An exact real of the form `Σ rᵢ·√sᵢ` with rational `rᵢ ≠ 0` and distinct
/// squarefree integers `sᵢ ≥ 1`.
///
/// Square roots of distinct squarefree integers are linearly independent over
/// the rationals, so the canonical map below is unique and structural equality
/// is numeric equality.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Surd {
    terms: BTreeMap<BigUint, BigRational>,
}

impl Surd {
    pub fn zero() -> Self {
        Surd {
            terms: BTreeMap::new(),
        }
    }

    pub fn one() -> Self {
        Self::rational(BigRational::one())
    }

    pub fn rational(r: BigRational) -> Self {
        let mut terms = BTreeMap::new();
        if !r.is_zero() {
            terms.insert(BigUint::one(), r);
        }
        Surd { terms }
    }

    pub fn from_ratio(num: i64, den: i64) -> Self {
        Self::rational(BigRational::new(num.into(), den.into()))
    }

    /// `√r` for a nonnegative rational.
    pub fn sqrt_rational(r: &BigRational) -> Self {
        assert!(!r.is_negative(), "square root of a negative rational");
        if r.is_zero() {
            return Self::zero();
        }
        // √(a/b) = √(ab)/b
        let a = r.numer().magnitude();
        let b = r.denom().magnitude();
        let (outside, radicand) = square_free_split(&(a * b));
        let coeff = BigRational::new(
            BigInt::from_biguint(Sign::Plus, outside),
            BigInt::from_biguint(Sign::Plus, b.clone()),
        );
        let mut terms = BTreeMap::new();
        terms.insert(radicand, coeff);
        Surd { terms }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// The rational value, when the surd has no irrational part.
    pub fn as_rational(&self) -> Option<BigRational> {
        match self.terms.len() {
            0 => Some(BigRational::zero()),
            1 => self
                .terms
                .get(&BigUint::one())
                .cloned(),
            _ => None,
        }
    }

    pub fn term_count(&self) -> usize {
        self.terms.len()
    }

    pub fn sqrt(&self) -> Self {
        let r = self
            .as_rational()
            .expect("square root is only defined for rational surds");
        Self::sqrt_rational(&r)
    }

    /// Division by a single-term surd.
    pub fn div(&self, rhs: &Self) -> Self {
        assert!(rhs.terms.len() == 1, "divisor must be a single nonzero term");
        let (s, r) = rhs.terms.iter().next().unwrap();
        // x / (r√s) = x · √s / (r·s)
        let s_rat = BigRational::from_integer(BigInt::from_biguint(Sign::Plus, s.clone()));
        let inv = Surd::single(s.clone(), (r * s_rat).recip());
        self.clone() * inv
    }

    fn single(radicand: BigUint, coeff: BigRational) -> Self {
        let mut terms = BTreeMap::new();
        if !coeff.is_zero() {
            terms.insert(radicand, coeff);
        }
        Surd { terms }
    }

    pub fn to_f64(&self) -> f64 {
        self.terms
            .iter()
            .map(|(s, r)| rat_to_f64(r) * s.to_f64().unwrap_or(f64::INFINITY).sqrt())
            .sum()
    }

    /// Exact sign: a cheap float check first, then certified interval
    /// refinement with growing precision.
    pub fn signum(&self) -> Ordering {
        if self.terms.is_empty() {
            return Ordering::Equal;
        }
        if self.terms.len() == 1 {
            let r = self.terms.values().next().unwrap();
            return if r.is_positive() {
                Ordering::Greater
            } else {
                Ordering::Less
            };
        }
        let mut value = 0.0f64;
        let mut scale = 0.0f64;
        let mut usable = true;
        for (s, r) in &self.terms {
            let t = rat_to_f64(r) * s.to_f64().unwrap_or(f64::INFINITY).sqrt();
            if !t.is_finite() || (t == 0.0) {
                usable = false;
                break;
            }
            value += t;
            scale += t.abs();
        }
        if usable && value.abs() > scale * 1e-9 {
            return if value > 0.0 {
                Ordering::Greater
            } else {
                Ordering::Less
            };
        }
        let mut bits = 64u32;
        loop {
            let (lo, hi) = self.enclose(bits);
            if lo.is_positive() {
                return Ordering::Greater;
            }
            if hi.is_negative() {
                return Ordering::Less;
            }
            assert!(bits < 1 << 16, "surd sign refinement did not terminate");
            bits *= 2;
        }
    }

    /// Rational interval containing the value, using `bits` of precision on each root.
    fn enclose(&self, bits: u32) -> (BigRational, BigRational) {
        let unit = BigInt::one() << bits;
        let mut lo = BigRational::zero();
        let mut hi = BigRational::zero();
        for (s, r) in &self.terms {
            let (root_lo, root_hi) = if s.is_one() {
                (BigRational::one(), BigRational::one())
            } else {
                let scaled = s << (2 * bits as usize);
                let fl = BigInt::from_biguint(Sign::Plus, scaled.sqrt());
                (
                    BigRational::new(fl.clone(), unit.clone()),
                    BigRational::new(fl + 1, unit.clone()),
                )
            };
            if r.is_positive() {
                lo += r * &root_lo;
                hi += r * &root_hi;
            } else {
                lo += r * &root_hi;
                hi += r * &root_lo;
            }
        }
        (lo, hi)
    }

    fn add_term(&mut self, radicand: BigUint, coeff: BigRational) {
        if coeff.is_zero() {
            return;
        }
        match self.terms.get_mut(&radicand) {
            Some(c) => {
                *c += coeff;
                if c.is_zero() {
                    self.terms.remove(&radicand);
                }
            }
            None => {
                self.terms.insert(radicand, coeff);
            }
        }
    }
}

fn rat_to_f64(r: &BigRational) -> f64 {
    r.to_f64().unwrap_or_else(|| {
        if r.is_negative() {
            f64::NEG_INFINITY
        } else {
            f64::INFINITY
        }
    })
}

/// Writes `n = outside² · radicand` with `radicand` squarefree.
///
/// Factors above the trial limit are assumed squarefree unless the cofactor is
/// a perfect square; rational inputs in practice are far below that limit.
fn square_free_split(n: &BigUint) -> (BigUint, BigUint) {
    if let Some(v) = n.to_u64() {
        let (o, r) = square_free_split_u64(v);
        return (BigUint::from(o), BigUint::from(r));
    }
    let mut rest = n.clone();
    let mut outside = BigUint::one();
    let mut radicand = BigUint::one();
    let mut p = 2u64;
    while p < TRIAL_LIMIT {
        let pb = BigUint::from(p);
        if &pb * &pb > rest {
            break;
        }
        let mut e = 0u32;
        while (&rest % &pb).is_zero() {
            rest /= &pb;
            e += 1;
        }
        if e > 0 {
            outside *= pb.pow(e / 2);
            if e % 2 == 1 {
                radicand *= &pb;
            }
        }
        p += if p == 2 { 1 } else { 2 };
    }
    if !rest.is_one() {
        let root = rest.sqrt();
        if &root * &root == rest {
            outside *= root;
        } else {
            radicand *= rest;
        }
    }
    (outside, radicand)
}

fn square_free_split_u64(mut n: u64) -> (u64, u64) {
    let mut outside = 1u64;
    let mut radicand = 1u64;
    let mut p = 2u64;
    while p < TRIAL_LIMIT && p * p <= n {
        let mut e = 0u32;
        while n % p == 0 {
            n /= p;
            e += 1;
        }
        if e > 0 {
            outside *= p.pow(e / 2);
            if e % 2 == 1 {
                radicand *= p;
            }
        }
        p += if p == 2 { 1 } else { 2 };
    }
    if n > 1 {
        let root = n.sqrt();
        if root * root == n {
            outside *= root;
        } else {
            radicand *= n;
        }
    }
    (outside, radicand)
}

impl Add for Surd {
    type Output = Surd;
    fn add(mut self, rhs: Surd) -> Surd {
        for (s, r) in rhs.terms {
            self.add_term(s, r);
        }
        self
    }
}

impl Neg for Surd {
    type Output = Surd;
    fn neg(mut self) -> Surd {
        for r in self.terms.values_mut() {
            *r = -r.clone();
        }
        self
    }
}

impl Sub for Surd {
    type Output = Surd;
    fn sub(self, rhs: Surd) -> Surd {
        self + (-rhs)
    }
}

impl Mul for Surd {
    type Output = Surd;
    fn mul(self, rhs: Surd) -> Surd {
        let mut out = Surd::zero();
        for (s1, r1) in &self.terms {
            for (s2, r2) in &rhs.terms {
                // √s1·√s2 = g·√((s1/g)(s2/g)); the cofactors are coprime and squarefree.
                let g = s1.gcd(s2);
                let radicand = (s1 / &g) * (s2 / &g);
                let gr = BigRational::from_integer(BigInt::from_biguint(Sign::Plus, g));
                out.add_term(radicand, r1 * r2 * gr);
            }
        }
        out
    }
}

impl PartialOrd for Surd {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some((self.clone() - other.clone()).signum())
    }
}

impl fmt::Display for Surd {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0/1");
        }
        let mut first = true;
        for (s, r) in &self.terms {
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            write!(f, "{}/{}", r.numer(), r.denom())?;
            if !s.is_one() {
                write!(f, "*sqrt({s})")?;
            }
        }
        Ok(())
    }
}

impl fmt::Debug for Surd {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Surd({self} ≈ {})", self.to_f64())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }

    #[test]
    fn square_free_split_small() {
        assert_eq!(square_free_split_u64(72), (6, 2));
        assert_eq!(square_free_split_u64(1), (1, 1));
        assert_eq!(square_free_split_u64(49), (7, 1));
        assert_eq!(square_free_split_u64(30), (1, 30));
        let big = BigUint::from(3u64).pow(40) * BigUint::from(7u64);
        let (o, r) = square_free_split(&big);
        assert_eq!(o, BigUint::from(3u64).pow(20));
        assert_eq!(r, BigUint::from(7u64));
    }

    #[test]
    fn sqrt_squares_back() {
        for (n, d) in [(3, 8), (1, 8), (9, 4), (2, 3), (50, 7)] {
            let r = Surd::sqrt_rational(&q(n, d));
            assert_eq!(r.clone() * r, Surd::rational(q(n, d)));
        }
    }

    #[test]
    fn one_step_affinity_is_sum_of_two_roots() {
        // √(3/8) + √(1/8) = (√6 + √2)/4
        let rho = Surd::sqrt_rational(&q(3, 8)) + Surd::sqrt_rational(&q(1, 8));
        assert_eq!(rho.term_count(), 2);
        assert!((rho.to_f64() - 0.9659258262890683).abs() < 1e-15);
        // ρ² = (8 + 2√12)/16 = 1/2 + √3/4
        let sq = rho.clone() * rho;
        let expect = Surd::from_ratio(1, 2) + Surd::sqrt_rational(&q(3, 1)) * Surd::from_ratio(1, 4);
        assert_eq!(sq, expect);
    }

    #[test]
    fn signum_of_near_cancellation() {
        // √2 - 99/70 ≈ -7.2e-5
        let a = Surd::sqrt_rational(&q(2, 1)) - Surd::from_ratio(99, 70);
        assert_eq!(a.signum(), Ordering::Less);
        let b = Surd::sqrt_rational(&q(2, 1)) + Surd::sqrt_rational(&q(3, 1))
            - Surd::sqrt_rational(&q(5, 1)) - Surd::from_ratio(1, 1);
        assert_eq!(b.signum(), b.to_f64().partial_cmp(&0.0).unwrap());
        // (√3 - √2)(√3 + √2) - 1 = 0 exactly
        let c = (Surd::sqrt_rational(&q(3, 1)) - Surd::sqrt_rational(&q(2, 1)))
            * (Surd::sqrt_rational(&q(3, 1)) + Surd::sqrt_rational(&q(2, 1)))
            - Surd::one();
        assert!(c.is_zero());
        assert_eq!(c.signum(), Ordering::Equal);
    }

    #[test]
    fn signum_refines_past_float() {
        // x = 665857/470832 approximates √2 to within 1.6e-12.
        let d = Surd::from_ratio(665857, 470832) - Surd::sqrt_rational(&q(2, 1));
        assert_eq!(d.signum(), Ordering::Greater);
        let e = Surd::sqrt_rational(&q(2, 1)) * Surd::sqrt_rational(&q(1, 10_000_000_000))
            - Surd::from_ratio(665857, 470832) * Surd::sqrt_rational(&q(1, 10_000_000_000))
            + Surd::sqrt_rational(&q(3, 1)) * Surd::from_ratio(0, 1);
        assert_eq!(e.signum(), Ordering::Less);
    }

    #[test]
    fn division_by_single_term() {
        let a = Surd::sqrt_rational(&q(6, 1)) + Surd::sqrt_rational(&q(2, 1));
        let b = Surd::sqrt_rational(&q(2, 1));
        let c = a.div(&b);
        // (√6 + √2)/√2 = √3 + 1
        assert_eq!(c, Surd::sqrt_rational(&q(3, 1)) + Surd::one());
        assert_eq!(Surd::from_ratio(3, 4).div(&Surd::from_ratio(1, 2)), Surd::from_ratio(3, 2));
    }

    #[test]
    fn display_forms() {
        assert_eq!(Surd::from_ratio(3, 4).to_string(), "3/4");
        assert_eq!(Surd::zero().to_string(), "0/1");
        assert_eq!(Surd::sqrt_rational(&q(1, 2)).to_string(), "1/2*sqrt(2)");
    }
}
