use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive};

use super::{GaussianCoordinate, KernelStep};
use crate::error::{Error, Result};
use crate::number::{in_open_unit, Number};
use crate::scalar::Scalar;

/// Analytic families that extend a product pair past its stored coordinates.
///
/// Coordinate `n` (global, 1-based) of
/// - `BernoulliPerturbation` is `p = (b, 1−b)` against `q = (b+εₙ, 1−b−εₙ)`,
/// - `MeanGap` is `N(0, 1)` against `N(Δₙ, 1)`,
///
/// with `εₙ = Δₙ = c·n^(−α)`.
#[derive(Clone, Debug, PartialEq)]
pub enum TailGenerator {
    BernoulliPerturbation { base: Number, c: Number, alpha: Number },
    MeanGap { c: Number, alpha: Number },
}

/// A divergence certificate: `1 − ρₙ ≥ coefficient · n^(−exponent)` on the tail,
/// with `exponent ≤ 1` so the comparison series diverges.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Minorant {
    pub coefficient: f64,
    pub exponent: f64,
}

impl Minorant {
    pub fn partial_sum(&self, from: usize, to: usize) -> f64 {
        (from..=to)
            .map(|n| self.coefficient * (n as f64).powf(-self.exponent))
            .sum()
    }
}

impl TailGenerator {
    pub fn family(&self) -> &'static str {
        match self {
            TailGenerator::BernoulliPerturbation { .. } => "bernoulli_perturbation",
            TailGenerator::MeanGap { .. } => "mean_gap",
        }
    }

    fn c(&self) -> &Number {
        match self {
            TailGenerator::BernoulliPerturbation { c, .. } | TailGenerator::MeanGap { c, .. } => c,
        }
    }

    pub fn alpha(&self) -> &Number {
        match self {
            TailGenerator::BernoulliPerturbation { alpha, .. }
            | TailGenerator::MeanGap { alpha, .. } => alpha,
        }
    }

    pub fn is_identity(&self) -> bool {
        self.c().is_zero()
    }

    /// `c·n^(−α)` in floating point.
    pub fn epsilon(&self, n: usize) -> f64 {
        self.c().value() * (n as f64).powf(-self.alpha().value())
    }

    /// `c·n^(−α)` exactly, when α is a nonnegative integer.
    pub fn epsilon_exact(&self, n: usize) -> Option<BigRational> {
        let alpha = self.alpha();
        if !alpha.is_integer() || alpha.exact().is_negative() {
            return None;
        }
        let e = alpha.exact().to_integer().to_usize()?;
        let denom = num_traits::pow(BigInt::from(n), e);
        Some(self.c().exact() / BigRational::from_integer(denom))
    }

    pub fn bernoulli_step<S: Scalar>(&self, n: usize) -> Result<KernelStep<S>> {
        let TailGenerator::BernoulliPerturbation { base, .. } = self else {
            return Err(Error::EngineMismatch(
                "mean_gap tails generate Gaussian coordinates".into(),
            ));
        };
        let b = base.exact().clone();
        let one = BigRational::one();
        let step = match self.epsilon_exact(n) {
            Some(eps) => {
                let q0 = &b + &eps;
                KernelStep::new(
                    vec![S::from_rational(&b), S::from_rational(&(&one - &b))],
                    vec![S::from_rational(&q0), S::from_rational(&(&one - &q0))],
                )
            }
            None => {
                let bf = base.value();
                let q0 = bf + self.epsilon(n);
                KernelStep::new(
                    vec![S::from_f64(bf), S::from_f64(1.0 - bf)],
                    vec![S::from_f64(q0), S::from_f64(1.0 - q0)],
                )
            }
        };
        Ok(step)
    }

    pub fn gaussian_coordinate(&self, n: usize) -> GaussianCoordinate {
        GaussianCoordinate::new(0.0, self.epsilon(n), 1.0, 1.0)
    }

    /// Checks the family parameters for every coordinate from `first` on.
    pub fn validate(&self, first: usize, field: &str) -> Result<()> {
        let alpha = self.alpha();
        if !alpha.value().is_finite() || !self.c().value().is_finite() {
            return Err(Error::validation(
                format!("{field}.alpha"),
                "parameters must be finite",
            ));
        }
        if let TailGenerator::BernoulliPerturbation { base, .. } = self {
            if !in_open_unit(base.exact()) {
                return Err(Error::validation(
                    format!("{field}.base"),
                    format!("base {base} must lie in (0, 1)"),
                ));
            }
            if alpha.exact().is_negative() && !self.is_identity() {
                return Err(Error::validation(
                    format!("{field}.alpha"),
                    format!("alpha = {alpha} makes epsilon grow without bound, leaving (0, 1)"),
                ));
            }
            // |εₙ| is largest at the first tail coordinate
            let ok = match self.epsilon_exact(first) {
                Some(eps) => in_open_unit(&(base.exact() + eps)),
                None => {
                    let q0 = base.value() + self.epsilon(first);
                    q0 > 0.0 && q0 < 1.0
                }
            };
            if !ok {
                return Err(Error::validation(
                    format!("{field}.alpha"),
                    format!(
                        "alpha = {alpha}, c = {} puts q(0) = {} outside (0, 1) at coordinate {first}",
                        self.c(),
                        base.value() + self.epsilon(first)
                    ),
                ));
            }
        }
        Ok(())
    }

    /// Bound on `1 − ρₙ` per unit of `n^(−2α)`.
    fn increment_coefficient(&self) -> f64 {
        let c = self.c().value();
        match self {
            // (√p − √q)² = ε²/(√p + √q)² ≤ ε²/p on each symbol
            TailGenerator::BernoulliPerturbation { base, .. } => {
                let b = base.value();
                c * c / (2.0 * b * (1.0 - b))
            }
            // 1 − exp(−Δ²/8) ≤ Δ²/8
            TailGenerator::MeanGap { .. } => c * c / 8.0,
        }
    }

    /// Upper bound on `Σ_{i>k} (1 − ρᵢ)`, or `None` when that sum diverges.
    pub fn hellinger_tail_bound(&self, k: usize) -> Option<f64> {
        if self.is_identity() {
            return Some(0.0);
        }
        let two_alpha = 2.0 * self.alpha().value();
        if two_alpha <= 1.0 {
            return None;
        }
        // Σ_{i>k} i^(−2α) ≤ ∫_k^∞ x^(−2α) dx, plus the i = 1 term when k = 0
        let series = if k == 0 {
            1.0 + 1.0 / (two_alpha - 1.0)
        } else {
            (k as f64).powf(1.0 - two_alpha) / (two_alpha - 1.0)
        };
        Some(self.increment_coefficient() * series)
    }

    /// Upper bound on `1 − ρᵢ` over all `i > k`.
    pub fn max_tail_increment(&self, k: usize) -> f64 {
        if self.is_identity() {
            return 0.0;
        }
        if self.alpha().value() < 0.0 {
            return f64::INFINITY;
        }
        let n = (k + 1) as f64;
        self.increment_coefficient() * n.powf(-2.0 * self.alpha().value())
    }

    /// Divergent comparison series for `1 − ρₙ` on coordinates `n ≥ first`.
    pub fn divergence_minorant(&self, first: usize) -> Option<Minorant> {
        if self.is_identity() {
            return None;
        }
        let alpha = self.alpha().value();
        if 2.0 * alpha > 1.0 {
            return None;
        }
        let c = self.c().value();
        let first = first.max(1);
        let m = match self {
            // (√p − √q)² = ε²/(√p + √q)² ≥ ε²/4 on both symbols
            TailGenerator::BernoulliPerturbation { .. } => Minorant {
                coefficient: c * c / 4.0,
                exponent: 2.0 * alpha,
            },
            TailGenerator::MeanGap { .. } => {
                let x_first = self.epsilon(first).powi(2) / 8.0;
                if alpha <= 0.0 {
                    // Δₙ² ≥ Δ_first², so 1 − ρₙ ≥ 1 − exp(−x_first)
                    Minorant {
                        coefficient: -(-x_first).exp_m1(),
                        exponent: 0.0,
                    }
                } else {
                    // 1 − e^(−x) ≥ x·e^(−x) ≥ x·e^(−x_first) for x ≤ x_first
                    Minorant {
                        coefficient: c * c / 8.0 * (-x_first).exp(),
                        exponent: 2.0 * alpha,
                    }
                }
            }
        };
        Some(m)
    }

    /// Replaces one parameter by name (`alpha`, `c`, `base`).
    pub fn with_param(&self, name: &str, value: Number) -> Result<Self> {
        let mut t = self.clone();
        match (&mut t, name) {
            (TailGenerator::BernoulliPerturbation { alpha, .. }, "alpha")
            | (TailGenerator::MeanGap { alpha, .. }, "alpha") => *alpha = value,
            (TailGenerator::BernoulliPerturbation { c, .. }, "c")
            | (TailGenerator::MeanGap { c, .. }, "c") => *c = value,
            (TailGenerator::BernoulliPerturbation { base, .. }, "base") => *base = value,
            _ => {
                return Err(Error::InvalidArgument(format!(
                    "{} has no parameter {name:?}",
                    self.family()
                )))
            }
        }
        Ok(t)
    }

    pub fn params(&self) -> Vec<(&'static str, &Number)> {
        match self {
            TailGenerator::BernoulliPerturbation { base, c, alpha } => {
                vec![("base", base), ("c", c), ("alpha", alpha)]
            }
            TailGenerator::MeanGap { c, alpha } => vec![("c", c), ("alpha", alpha)],
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::Surd;

    fn num(s: &str) -> Number {
        Number::parse_str(s).unwrap()
    }

    fn bern(b: &str, c: &str, a: &str) -> TailGenerator {
        TailGenerator::BernoulliPerturbation {
            base: num(b),
            c: num(c),
            alpha: num(a),
        }
    }

    #[test]
    fn bernoulli_steps_follow_power_law() {
        let t = bern("0.5", "0.1", "1");
        let q0: Vec<f64> = (1..=3)
            .map(|n| t.bernoulli_step::<f64>(n).unwrap().q[0])
            .collect();
        assert_eq!(q0[0], 0.6);
        assert_eq!(q0[1], 0.55);
        assert!((q0[2] - 0.5333333333333333).abs() < 1e-15);
        let exact = t.bernoulli_step::<Surd>(3).unwrap();
        assert_eq!(exact.q[0], Surd::from_ratio(8, 15));
    }

    #[test]
    fn bernoulli_validation() {
        assert!(bern("0.5", "0.1", "1").validate(1, "t").is_ok());
        assert!(bern("0.5", "0.6", "1").validate(1, "t").is_err());
        // fine from coordinate 2 on: 0.5 + 0.6/2 = 0.8
        assert!(bern("0.5", "0.6", "1").validate(2, "t").is_ok());
        assert!(bern("0.5", "-0.5", "0").validate(1, "t").is_err());
        let err = bern("0.5", "0.1", "-0.5").validate(1, "t").unwrap_err();
        assert!(err.to_string().contains("alpha"));
        assert!(bern("1", "0.1", "1").validate(1, "t").is_err());
    }

    #[test]
    fn tail_bound_dominates_true_tail() {
        for (alpha, k) in [(1.0, 10usize), (0.75, 100), (0.6, 50)] {
            let t = TailGenerator::MeanGap {
                c: Number::from_f64(1.0),
                alpha: Number::from_f64(alpha),
            };
            let truth: f64 = (k + 1..k + 2_000_000)
                .map(|n| t.gaussian_coordinate(n).hellinger_increment())
                .sum();
            let bound = t.hellinger_tail_bound(k).unwrap();
            assert!(truth <= bound, "alpha {alpha}: {truth} > {bound}");
        }
        let b = bern("0.5", "0.2", "1");
        let truth: f64 = (11..200_000)
            .map(|n| {
                let s = b.bernoulli_step::<f64>(n).unwrap();
                1.0 - s.affinity()
            })
            .sum();
        assert!(truth <= b.hellinger_tail_bound(10).unwrap());
    }

    #[test]
    fn minorant_holds_termwise() {
        for alpha in [0.0, 0.25, 0.5] {
            let b = bern("0.3", "0.2", &alpha.to_string());
            let m = b.divergence_minorant(1).unwrap();
            for n in 1..500 {
                let s = b.bernoulli_step::<f64>(n).unwrap();
                assert!(1.0 - s.affinity() >= m.coefficient * (n as f64).powf(-m.exponent));
            }
        }
        for alpha in [-0.5, 0.0, 0.4, 0.5] {
            let g = TailGenerator::MeanGap {
                c: Number::from_f64(1.0),
                alpha: Number::from_f64(alpha),
            };
            let m = g.divergence_minorant(1).unwrap();
            for n in 1..500 {
                let inc = g.gaussian_coordinate(n).hellinger_increment();
                assert!(inc >= m.coefficient * (n as f64).powf(-m.exponent) * (1.0 - 1e-12));
            }
        }
        assert!(bern("0.5", "0.1", "0.75").divergence_minorant(1).is_none());
    }

    #[test]
    fn param_replacement() {
        let t = bern("0.5", "0.1", "1");
        let u = t.with_param("alpha", num("0.5")).unwrap();
        assert_eq!(u.alpha().value(), 0.5);
        assert!(t.with_param("sigma", num("1")).is_err());
    }
}
