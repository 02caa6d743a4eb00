//! Pairs of measures on sequence spaces, given by prefix-conditional kernels.
//!
//! Coordinate `i` (1-based) is revealed at filtration level `i + 1`, so a
//! [`Prefix`] of length `n - 1` is an atom of level `n` and the empty prefix is
//! the single atom of the trivial first level.

mod gaussian;
mod schema;
mod tail;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{Scalar, Surd};

pub use gaussian::GaussianCoordinate;
pub use schema::{parse_model, parse_model_value, serialize_model};
pub use tail::{Minorant, TailGenerator};

/// Tolerance for row sums in float mode.
pub const FLOAT_NORMALIZATION_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Alphabet(usize);

impl Alphabet {
    pub fn new(size: usize) -> Result<Self> {
        if size == 0 {
            return Err(Error::validation("alphabet", "size must be at least 1"));
        }
        Ok(Alphabet(size))
    }

    pub fn size(self) -> usize {
        self.0
    }
}

/// A finite symbol string; the atom of level `len + 1`.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Prefix(Vec<usize>);

impl Prefix {
    pub fn empty() -> Self {
        Prefix(Vec::new())
    }

    pub fn new(symbols: Vec<usize>) -> Self {
        Prefix(symbols)
    }

    pub fn symbols(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn last(&self) -> Option<usize> {
        self.0.last().copied()
    }

    pub fn child(&self, symbol: usize) -> Prefix {
        let mut v = Vec::with_capacity(self.0.len() + 1);
        v.extend_from_slice(&self.0);
        v.push(symbol);
        Prefix(v)
    }

    /// The first `len` symbols.
    pub fn truncate(&self, len: usize) -> Prefix {
        Prefix(self.0[..len.min(self.0.len())].to_vec())
    }

    pub fn check_alphabet(&self, alphabet: Alphabet) -> Result<()> {
        match self.0.iter().find(|&&s| s >= alphabet.size()) {
            Some(&s) => Err(Error::IndexOutOfRange {
                index: s,
                limit: alphabet.size(),
            }),
            None => Ok(()),
        }
    }
}

impl std::borrow::Borrow<[usize]> for Prefix {
    fn borrow(&self) -> &[usize] {
        &self.0
    }
}

impl fmt::Display for Prefix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for s in &self.0 {
            if !first {
                f.write_str(",")?;
            }
            first = false;
            write!(f, "{s}")?;
        }
        Ok(())
    }
}

impl FromStr for Prefix {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        if t.is_empty() {
            return Ok(Prefix::empty());
        }
        t.split(',')
            .map(|x| {
                x.trim()
                    .parse::<usize>()
                    .map_err(|_| Error::Schema(format!("bad prefix {s:?}")))
            })
            .collect::<Result<Vec<_>>>()
            .map(Prefix)
    }
}

impl Serialize for Prefix {
    fn serialize<Ser: serde::Serializer>(&self, ser: Ser) -> std::result::Result<Ser::Ok, Ser::Error> {
        ser.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Prefix {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(de)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Conditional laws of the next coordinate under both measures.
#[derive(Clone, Debug, PartialEq)]
pub struct KernelStep<S> {
    pub p: Vec<S>,
    pub q: Vec<S>,
}

impl<S: Scalar> KernelStep<S> {
    pub fn new(p: Vec<S>, q: Vec<S>) -> Self {
        KernelStep { p, q }
    }

    pub fn width(&self) -> usize {
        self.p.len()
    }

    /// Symbols with positive mass; identical under both laws once validated.
    pub fn support(&self) -> impl Iterator<Item = usize> + '_ {
        self.p
            .iter()
            .enumerate()
            .filter(|(_, x)| !x.is_zero())
            .map(|(a, _)| a)
    }

    /// Bhattacharyya coefficient `Σ √(p(a) q(a))`.
    pub fn affinity(&self) -> S {
        self.p
            .iter()
            .zip(&self.q)
            .filter(|(p, _)| !p.is_zero())
            .fold(S::zero(), |acc, (p, q)| acc + (p.clone() * q.clone()).sqrt())
    }

    pub fn ratio(&self, a: usize) -> S {
        self.q[a].div(&self.p[a])
    }

    pub fn is_identity(&self) -> bool {
        self.p == self.q
    }

    pub fn validate(&self, width: usize, field: &str) -> Result<()> {
        if self.p.len() != width || self.q.len() != width {
            return Err(Error::validation(
                field,
                format!(
                    "expected {width} entries, found p:{} q:{}",
                    self.p.len(),
                    self.q.len()
                ),
            ));
        }
        validate_distribution(&self.p, &format!("{field}.p"))?;
        validate_distribution(&self.q, &format!("{field}.q"))?;
        for (a, (p, q)) in self.p.iter().zip(&self.q).enumerate() {
            if p.is_zero() != q.is_zero() {
                return Err(Error::validation(
                    field,
                    format!("mismatched supports at symbol {a}"),
                ));
            }
        }
        Ok(())
    }

    pub fn to_float(&self) -> KernelStep<f64> {
        KernelStep {
            p: self.p.iter().map(Scalar::to_f64).collect(),
            q: self.q.iter().map(Scalar::to_f64).collect(),
        }
    }
}

pub(crate) fn validate_distribution<S: Scalar>(v: &[S], field: &str) -> Result<()> {
    if v.is_empty() {
        return Err(Error::validation(field, "empty probability vector"));
    }
    for (a, x) in v.iter().enumerate() {
        let f = x.to_f64();
        if !f.is_finite() || x.cmp_value(&S::zero()) == std::cmp::Ordering::Less {
            return Err(Error::validation(
                format!("{field}[{a}]"),
                "entries must be finite and nonnegative",
            ));
        }
    }
    let total = v.iter().cloned().fold(S::zero(), |a, b| a + b);
    if !total.close_to(&S::one(), FLOAT_NORMALIZATION_TOL) {
        return Err(Error::validation(
            field,
            format!("entries sum to {} instead of 1", total.to_f64()),
        ));
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq)]
pub struct TreeModel<S> {
    pub alphabet: Alphabet,
    pub depth: usize,
    pub kernels: BTreeMap<Prefix, KernelStep<S>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MarkovModel<S> {
    pub states: usize,
    pub p: Vec<Vec<S>>,
    pub q: Vec<Vec<S>>,
    pub init_p: Vec<S>,
    pub init_q: Vec<S>,
}

impl<S: Scalar> MarkovModel<S> {
    pub fn row(&self, state: usize) -> KernelStep<S> {
        KernelStep::new(self.p[state].clone(), self.q[state].clone())
    }

    pub fn initial(&self) -> KernelStep<S> {
        KernelStep::new(self.init_p.clone(), self.init_q.clone())
    }

    pub fn transitions_identical(&self) -> bool {
        self.p == self.q
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProductModel<S> {
    pub coordinates: Vec<KernelStep<S>>,
    pub tail: Option<TailGenerator>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GaussianProductModel {
    pub coordinates: Vec<GaussianCoordinate>,
    pub tail: Option<TailGenerator>,
}

impl GaussianProductModel {
    pub fn coordinate(&self, i: usize) -> Result<GaussianCoordinate> {
        if i == 0 {
            return Err(Error::IndexOutOfRange { index: 0, limit: 1 });
        }
        if let Some(c) = self.coordinates.get(i - 1) {
            return Ok(*c);
        }
        match &self.tail {
            Some(t) => Ok(t.gaussian_coordinate(i)),
            None => Err(Error::DepthExceeded {
                requested: i,
                horizon: self.coordinates.len(),
            }),
        }
    }
}

/// A validated pair of measures. Immutable after construction.
#[derive(Clone, Debug, PartialEq)]
pub enum KernelPairModel<S> {
    Tree(TreeModel<S>),
    Markov(MarkovModel<S>),
    Product(ProductModel<S>),
    GaussianProduct(GaussianProductModel),
}

/// Which measure weights an expectation or drives a sampler.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Measure {
    /// The reference measure ℙ.
    P,
    /// The alternative measure ℙ'.
    Q,
}

impl FromStr for Measure {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "p" | "P" => Ok(Measure::P),
            "q" | "Q" => Ok(Measure::Q),
            _ => Err(Error::InvalidArgument(format!("unknown measure {s:?}"))),
        }
    }
}

impl<S: Scalar> KernelPairModel<S> {
    pub fn kind(&self) -> &'static str {
        match self {
            KernelPairModel::Tree(_) => "tree",
            KernelPairModel::Markov(_) => "markov",
            KernelPairModel::Product(_) => "product",
            KernelPairModel::GaussianProduct(_) => "gaussian_product",
        }
    }

    /// `None` for continuous coordinates.
    pub fn alphabet(&self) -> Option<Alphabet> {
        match self {
            KernelPairModel::Tree(t) => Some(t.alphabet),
            KernelPairModel::Markov(m) => Some(Alphabet(m.states)),
            KernelPairModel::Product(p) => Some(Alphabet(
                p.coordinates.first().map(KernelStep::width).unwrap_or(2),
            )),
            KernelPairModel::GaussianProduct(_) => None,
        }
    }

    /// Number of coordinates, or `None` for infinite sequences.
    pub fn horizon(&self) -> Option<usize> {
        match self {
            KernelPairModel::Tree(t) => Some(t.depth),
            KernelPairModel::Markov(_) => None,
            KernelPairModel::Product(p) => p.tail.is_none().then_some(p.coordinates.len()),
            KernelPairModel::GaussianProduct(g) => {
                g.tail.is_none().then_some(g.coordinates.len())
            }
        }
    }

    pub fn is_discrete(&self) -> bool {
        !matches!(self, KernelPairModel::GaussianProduct(_))
    }

    pub fn is_product(&self) -> bool {
        matches!(
            self,
            KernelPairModel::Product(_) | KernelPairModel::GaussianProduct(_)
        )
    }

    pub fn tail(&self) -> Option<&TailGenerator> {
        match self {
            KernelPairModel::Product(p) => p.tail.as_ref(),
            KernelPairModel::GaussianProduct(g) => g.tail.as_ref(),
            _ => None,
        }
    }

    /// Number of explicitly stored product coordinates.
    pub fn stored_coordinates(&self) -> usize {
        match self {
            KernelPairModel::Product(p) => p.coordinates.len(),
            KernelPairModel::GaussianProduct(g) => g.coordinates.len(),
            _ => 0,
        }
    }

    fn check_depth(&self, coordinate: usize) -> Result<()> {
        match self.horizon() {
            Some(h) if coordinate > h => Err(Error::DepthExceeded {
                requested: coordinate,
                horizon: h,
            }),
            _ => Ok(()),
        }
    }

    /// Laws of coordinate `|prefix| + 1` under both measures given the prefix.
    pub fn conditional_kernels(&self, prefix: &Prefix) -> Result<KernelStep<S>> {
        let coordinate = prefix.len() + 1;
        if let KernelPairModel::GaussianProduct(_) = self {
            return Err(Error::ContinuousCoordinate(coordinate));
        }
        self.check_depth(coordinate)?;
        if let Some(a) = self.alphabet() {
            prefix.check_alphabet(a)?;
        }
        match self {
            KernelPairModel::Tree(t) => t.kernels.get(prefix).cloned().ok_or_else(|| {
                Error::InvalidArgument(format!("prefix {prefix:?} is unreachable"))
            }),
            KernelPairModel::Markov(m) => Ok(match prefix.last() {
                None => m.initial(),
                Some(s) => m.row(s),
            }),
            KernelPairModel::Product(_) => self.product_kernel(coordinate),
            KernelPairModel::GaussianProduct(_) => unreachable!(),
        }
    }

    /// Kernel of product coordinate `i` (1-based).
    pub fn product_kernel(&self, i: usize) -> Result<KernelStep<S>> {
        match self {
            KernelPairModel::Product(p) => {
                if i == 0 {
                    return Err(Error::IndexOutOfRange { index: 0, limit: 1 });
                }
                if let Some(k) = p.coordinates.get(i - 1) {
                    return Ok(k.clone());
                }
                match &p.tail {
                    Some(t) => t.bernoulli_step(i),
                    None => Err(Error::DepthExceeded {
                        requested: i,
                        horizon: p.coordinates.len(),
                    }),
                }
            }
            KernelPairModel::GaussianProduct(_) => Err(Error::ContinuousCoordinate(i)),
            _ => Err(Error::NotProduct),
        }
    }

    /// One-step affinity `ρₙ(prefix) = 𝔼(√φₙ | 𝔉ₙ)` at `n = |prefix| + 1`.
    pub fn step_affinity(&self, prefix: &Prefix) -> Result<S> {
        match self {
            KernelPairModel::GaussianProduct(g) => {
                self.check_depth(prefix.len() + 1)?;
                Ok(S::from_f64(g.coordinate(prefix.len() + 1)?.affinity()))
            }
            _ => Ok(self.conditional_kernels(prefix)?.affinity()),
        }
    }

    /// `ln ρₙ(prefix)`, computed analytically for Gaussian coordinates.
    pub fn step_log_affinity(&self, prefix: &Prefix) -> Result<f64> {
        match self {
            KernelPairModel::GaussianProduct(g) => {
                self.check_depth(prefix.len() + 1)?;
                Ok(g.coordinate(prefix.len() + 1)?.log_affinity())
            }
            _ => Ok(self.step_affinity(prefix)?.to_f64().ln()),
        }
    }

    /// Affinity of product coordinate `i`, prefix-free.
    pub fn coordinate_affinity(&self, i: usize) -> Result<S> {
        match self {
            KernelPairModel::GaussianProduct(g) => Ok(S::from_f64(g.coordinate(i)?.affinity())),
            KernelPairModel::Product(_) => Ok(self.product_kernel(i)?.affinity()),
            _ => Err(Error::NotProduct),
        }
    }

    pub fn coordinate_log_affinity(&self, i: usize) -> Result<f64> {
        match self {
            KernelPairModel::GaussianProduct(g) => Ok(g.coordinate(i)?.log_affinity()),
            KernelPairModel::Product(_) => Ok(self.coordinate_affinity(i)?.to_f64().ln()),
            _ => Err(Error::NotProduct),
        }
    }

    /// True when ℙ and ℙ' are given by identical kernels everywhere.
    pub fn kernels_identical(&self) -> bool {
        match self {
            KernelPairModel::Tree(t) => t.kernels.values().all(KernelStep::is_identity),
            KernelPairModel::Markov(m) => m.transitions_identical() && m.init_p == m.init_q,
            KernelPairModel::Product(p) => {
                p.coordinates.iter().all(KernelStep::is_identity)
                    && p.tail.as_ref().is_none_or(TailGenerator::is_identity)
            }
            KernelPairModel::GaussianProduct(g) => {
                g.coordinates.iter().all(GaussianCoordinate::is_identity)
                    && g.tail.as_ref().is_none_or(TailGenerator::is_identity)
            }
        }
    }

    pub fn to_float(&self) -> KernelPairModel<f64> {
        match self {
            KernelPairModel::Tree(t) => KernelPairModel::Tree(TreeModel {
                alphabet: t.alphabet,
                depth: t.depth,
                kernels: t
                    .kernels
                    .iter()
                    .map(|(k, v)| (k.clone(), v.to_float()))
                    .collect(),
            }),
            KernelPairModel::Markov(m) => {
                let conv = |rows: &Vec<Vec<S>>| -> Vec<Vec<f64>> {
                    rows.iter()
                        .map(|r| r.iter().map(Scalar::to_f64).collect())
                        .collect()
                };
                KernelPairModel::Markov(MarkovModel {
                    states: m.states,
                    p: conv(&m.p),
                    q: conv(&m.q),
                    init_p: m.init_p.iter().map(Scalar::to_f64).collect(),
                    init_q: m.init_q.iter().map(Scalar::to_f64).collect(),
                })
            }
            KernelPairModel::Product(p) => KernelPairModel::Product(ProductModel {
                coordinates: p.coordinates.iter().map(KernelStep::to_float).collect(),
                tail: p.tail.clone(),
            }),
            KernelPairModel::GaussianProduct(g) => KernelPairModel::GaussianProduct(g.clone()),
        }
    }

    /// Eager check of every invariant. Called by the parser and by constructors in tests.
    pub fn validate(&self) -> Result<()> {
        match self {
            KernelPairModel::Tree(t) => validate_tree(t),
            KernelPairModel::Markov(m) => validate_markov(m),
            KernelPairModel::Product(p) => {
                let width = match (p.coordinates.first(), &p.tail) {
                    (Some(c), _) => c.width(),
                    (None, Some(_)) => 2,
                    (None, None) => {
                        return Err(Error::validation(
                            "product",
                            "needs coordinates or a tail generator",
                        ))
                    }
                };
                for (i, c) in p.coordinates.iter().enumerate() {
                    c.validate(width, &format!("product.coordinates[{i}]"))?;
                }
                if let Some(t) = &p.tail {
                    if !matches!(t, TailGenerator::BernoulliPerturbation { .. }) {
                        return Err(Error::validation(
                            "product.tail.family",
                            "discrete products take the bernoulli_perturbation family",
                        ));
                    }
                    if width != 2 {
                        return Err(Error::validation(
                            "product.tail",
                            "bernoulli_perturbation requires a binary alphabet",
                        ));
                    }
                    t.validate(p.coordinates.len() + 1, "product.tail")?;
                }
                Ok(())
            }
            KernelPairModel::GaussianProduct(g) => {
                if g.coordinates.is_empty() && g.tail.is_none() {
                    return Err(Error::validation(
                        "gaussian_product",
                        "needs coordinates or a tail generator",
                    ));
                }
                for (i, c) in g.coordinates.iter().enumerate() {
                    c.validate(&format!("gaussian_product.coordinates[{i}]"))?;
                }
                if let Some(t) = &g.tail {
                    if !matches!(t, TailGenerator::MeanGap { .. }) {
                        return Err(Error::validation(
                            "gaussian_product.tail.family",
                            "gaussian products take the mean_gap family",
                        ));
                    }
                    t.validate(g.coordinates.len() + 1, "gaussian_product.tail")?;
                }
                Ok(())
            }
        }
    }
}

fn validate_tree<S: Scalar>(t: &TreeModel<S>) -> Result<()> {
    let k = t.alphabet.size();
    if t.depth == 0 {
        return Err(Error::validation("tree.depth", "must be at least 1"));
    }
    for (prefix, step) in &t.kernels {
        let field = format!("tree.kernels[{prefix}]");
        if prefix.len() >= t.depth {
            return Err(Error::validation(field, "prefix longer than depth - 1"));
        }
        prefix
            .check_alphabet(t.alphabet)
            .map_err(|_| Error::validation(field.clone(), "symbol outside alphabet"))?;
        step.validate(k, &field)?;
    }
    // every reachable prefix needs a kernel
    let mut frontier = vec![Prefix::empty()];
    while let Some(prefix) = frontier.pop() {
        let step = t.kernels.get(&prefix).ok_or_else(|| {
            Error::validation(
                format!("tree.kernels[{prefix}]"),
                "missing kernel for reachable prefix",
            )
        })?;
        if prefix.len() + 1 < t.depth {
            frontier.extend(step.support().map(|a| prefix.child(a)));
        }
    }
    Ok(())
}

fn validate_markov<S: Scalar>(m: &MarkovModel<S>) -> Result<()> {
    let k = m.states;
    if k == 0 {
        return Err(Error::validation("markov.states", "must be at least 1"));
    }
    if m.p.len() != k || m.q.len() != k {
        return Err(Error::validation(
            "markov",
            format!("P and Q need {k} rows"),
        ));
    }
    for s in 0..k {
        m.row(s).validate(k, &format!("markov.row[{s}]"))?;
    }
    m.initial().validate(k, "markov.init")?;
    Ok(())
}

/// A parsed model in whichever numeric mode the document selected.
#[derive(Clone, Debug, PartialEq)]
pub enum AnyModel {
    Exact(KernelPairModel<Surd>),
    Float(KernelPairModel<f64>),
}

impl AnyModel {
    pub fn is_exact(&self) -> bool {
        matches!(self, AnyModel::Exact(_))
    }

    pub fn kind(&self) -> &'static str {
        match self {
            AnyModel::Exact(m) => m.kind(),
            AnyModel::Float(m) => m.kind(),
        }
    }

    pub fn to_float(&self) -> KernelPairModel<f64> {
        match self {
            AnyModel::Exact(m) => m.to_float(),
            AnyModel::Float(m) => m.clone(),
        }
    }
}

/// Runs `$body` with `$m` bound to the typed model, whatever the mode.
#[macro_export]
macro_rules! with_model {
    ($any:expr, $m:ident => $body:expr) => {
        match $any {
            $crate::models::AnyModel::Exact($m) => $body,
            $crate::models::AnyModel::Float($m) => $body,
        }
    };
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn prefix_text_round_trip() {
        let p: Prefix = "0,1,2".parse().unwrap();
        assert_eq!(p.symbols(), &[0, 1, 2]);
        assert_eq!(p.to_string(), "0,1,2");
        assert_eq!("".parse::<Prefix>().unwrap(), Prefix::empty());
        assert!("0,x".parse::<Prefix>().is_err());
    }

    #[test]
    fn product_ignores_prefix() {
        let m = fixtures::bernoulli_iid_exact();
        let a = m.conditional_kernels(&Prefix::empty()).unwrap();
        let b = m.conditional_kernels(&"1,0,1".parse().unwrap()).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.p, vec![Surd::from_ratio(1, 2), Surd::from_ratio(1, 2)]);
        assert_eq!(a.q, vec![Surd::from_ratio(3, 4), Surd::from_ratio(1, 4)]);
    }

    #[test]
    fn markov_uses_last_state_row() {
        let m = fixtures::markov_two_state();
        let k = m.conditional_kernels(&"0,1".parse().unwrap()).unwrap();
        assert_eq!(k.p, vec![0.1, 0.9]);
        assert_eq!(k.q, vec![0.2, 0.8]);
        let init = m.conditional_kernels(&Prefix::empty()).unwrap();
        assert_eq!(init.p, vec![0.5, 0.5]);
    }

    #[test]
    fn gaussian_has_no_finite_kernel() {
        let m = fixtures::gaussian_mean_gap(1.0);
        assert_eq!(
            m.conditional_kernels(&Prefix::empty()),
            Err(Error::ContinuousCoordinate(1))
        );
    }

    #[test]
    fn step_affinity_values() {
        let same = fixtures::identical_bernoulli_exact();
        assert_eq!(same.step_affinity(&Prefix::empty()).unwrap(), Surd::one());
        let m = fixtures::bernoulli_iid_exact();
        let rho = m.step_affinity(&Prefix::empty()).unwrap();
        let expect = (3.0f64 / 8.0).sqrt() + (1.0f64 / 8.0).sqrt();
        assert!((rho.to_f64() - expect).abs() < 1e-15);
        assert!((rho.to_f64() - 0.965926).abs() < 1e-6);
        // unit-variance Gaussians one mean apart: exp(-1/8)
        let g = fixtures::gaussian_mean_gap(1.0);
        let r = g.step_affinity(&Prefix::empty()).unwrap();
        assert!((r - (-0.125f64).exp()).abs() < 1e-15);
        assert!((r - 0.882497).abs() < 1e-6);
    }

    #[test]
    fn tree_depth_is_enforced() {
        let m = fixtures::bernoulli_tree(2);
        assert!(matches!(
            m.conditional_kernels(&"0,0".parse().unwrap()),
            Err(Error::DepthExceeded { requested: 3, horizon: 2 })
        ));
    }

    #[test]
    fn symbol_range_is_checked() {
        let m = fixtures::bernoulli_iid_exact();
        assert!(matches!(
            m.conditional_kernels(&"0,2".parse().unwrap()),
            Err(Error::IndexOutOfRange { index: 2, limit: 2 })
        ));
    }
}
