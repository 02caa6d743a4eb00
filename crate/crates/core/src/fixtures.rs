//! Reference model pairs and a seeded generator of random rational models.
//!
//! Used by tests, benches, and the CLI examples.

use std::collections::BTreeMap;

use num_rational::BigRational;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::models::{
    Alphabet, GaussianCoordinate, GaussianProductModel, KernelPairModel, KernelStep, MarkovModel,
    Prefix, ProductModel, TailGenerator, TreeModel,
};
use crate::number::Number;
use crate::scalar::{Scalar, Surd};

fn rat(n: i64, d: i64) -> Number {
    Number::from_rational(BigRational::new(n.into(), d.into()))
}

fn q(n: i64, d: i64) -> Surd {
    Surd::from_ratio(n, d)
}

/// i.i.d. Bernoulli: `(1/2, 1/2)` under ℙ against `(3/4, 1/4)` under ℙ', every coordinate.
pub fn bernoulli_iid_exact() -> KernelPairModel<Surd> {
    KernelPairModel::Product(ProductModel {
        coordinates: Vec::new(),
        tail: Some(TailGenerator::BernoulliPerturbation {
            base: rat(1, 2),
            c: rat(1, 4),
            alpha: rat(0, 1),
        }),
    })
}

pub fn bernoulli_iid() -> KernelPairModel<f64> {
    bernoulli_iid_exact().to_float()
}

/// Both measures i.i.d. `(1/2, 1/2)`.
pub fn identical_bernoulli_exact() -> KernelPairModel<Surd> {
    KernelPairModel::Product(ProductModel {
        coordinates: Vec::new(),
        tail: Some(TailGenerator::BernoulliPerturbation {
            base: rat(1, 2),
            c: rat(0, 1),
            alpha: rat(0, 1),
        }),
    })
}

/// The i.i.d. Bernoulli pair truncated to a finite tree of the given depth.
pub fn bernoulli_tree(depth: usize) -> KernelPairModel<Surd> {
    let step = KernelStep::new(vec![q(1, 2), q(1, 2)], vec![q(3, 4), q(1, 4)]);
    let mut kernels = BTreeMap::new();
    let mut level = vec![Prefix::empty()];
    for _ in 0..depth {
        let mut next = Vec::new();
        for p in level {
            kernels.insert(p.clone(), step.clone());
            next.push(p.child(0));
            next.push(p.child(1));
        }
        level = next;
    }
    KernelPairModel::Tree(TreeModel {
        alphabet: Alphabet::new(2).unwrap(),
        depth,
        kernels,
    })
}

fn markov_two_state_generic<S: Scalar>(n: impl Fn(i64, i64) -> S) -> KernelPairModel<S> {
    KernelPairModel::Markov(MarkovModel {
        states: 2,
        p: vec![vec![n(9, 10), n(1, 10)], vec![n(1, 10), n(9, 10)]],
        q: vec![vec![n(8, 10), n(2, 10)], vec![n(2, 10), n(8, 10)]],
        init_p: vec![n(1, 2), n(1, 2)],
        init_q: vec![n(1, 2), n(1, 2)],
    })
}

/// Symmetric two-state chains: stay probability 0.9 under ℙ, 0.8 under ℙ'.
pub fn markov_two_state() -> KernelPairModel<f64> {
    markov_two_state_generic(|a, b| a as f64 / b as f64)
}

pub fn markov_two_state_exact() -> KernelPairModel<Surd> {
    markov_two_state_generic(q)
}

/// One coordinate: `N(0, 1)` against `N(delta, 1)`.
pub fn gaussian_mean_gap(delta: f64) -> KernelPairModel<f64> {
    KernelPairModel::GaussianProduct(GaussianProductModel {
        coordinates: vec![GaussianCoordinate::new(0.0, delta, 1.0, 1.0)],
        tail: None,
    })
}

/// Gaussian product with mean gaps `Δₙ = n^(−alpha)`, unit variances.
pub fn gaussian_family(alpha: f64) -> KernelPairModel<f64> {
    KernelPairModel::GaussianProduct(GaussianProductModel {
        coordinates: Vec::new(),
        tail: Some(TailGenerator::MeanGap {
            c: Number::from_f64(1.0),
            alpha: Number::from_f64(alpha),
        }),
    })
}

/// Bernoulli product with `εₙ = c·n^(−alpha)` around `base`.
pub fn bernoulli_family(base: f64, c: f64, alpha: f64) -> KernelPairModel<f64> {
    KernelPairModel::Product(ProductModel {
        coordinates: Vec::new(),
        tail: Some(TailGenerator::BernoulliPerturbation {
            base: Number::from_f64(base),
            c: Number::from_f64(c),
            alpha: Number::from_f64(alpha),
        }),
    })
}

const DENOMINATORS: [i64; 8] = [2, 3, 4, 5, 6, 8, 10, 12];

/// A random probability vector on `support` with a small common denominator.
fn random_vector(rng: &mut ChaCha8Rng, width: usize, support: &[bool]) -> Vec<Surd> {
    let k = support.iter().filter(|&&s| s).count() as i64;
    let choices: Vec<i64> = DENOMINATORS.iter().copied().filter(|&d| d >= k).collect();
    let d = choices[rng.random_range(0..choices.len())];
    let mut units = vec![0i64; width];
    for (a, &s) in support.iter().enumerate() {
        if s {
            units[a] = 1;
        }
    }
    let live: Vec<usize> = (0..width).filter(|&a| support[a]).collect();
    for _ in 0..(d - k) {
        units[live[rng.random_range(0..live.len())]] += 1;
    }
    units.into_iter().map(|u| q(u, d)).collect()
}

fn random_step(rng: &mut ChaCha8Rng, width: usize, identical: bool) -> KernelStep<Surd> {
    let mut support: Vec<bool> = (0..width).map(|_| rng.random_bool(0.8)).collect();
    if !support.iter().any(|&s| s) {
        let a = rng.random_range(0..width);
        support[a] = true;
    }
    let p = random_vector(rng, width, &support);
    let q = if identical {
        p.clone()
    } else {
        random_vector(rng, width, &support)
    };
    KernelStep::new(p, q)
}

/// Random exact tree pair with alphabet in `2..=max_alphabet` and depth in `2..=max_depth`.
/// About one model in ten has identical kernels under both measures.
pub fn random_rational_tree(seed: u64, max_alphabet: usize, max_depth: usize) -> KernelPairModel<Surd> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let width = rng.random_range(2..=max_alphabet.max(2));
    let depth = rng.random_range(2..=max_depth.max(2));
    let identical = rng.random_bool(0.1);
    let mut kernels = BTreeMap::new();
    let mut level = vec![Prefix::empty()];
    for _ in 0..depth {
        let mut next = Vec::new();
        for prefix in level {
            let step = random_step(&mut rng, width, identical);
            next.extend(step.support().map(|a| prefix.child(a)));
            kernels.insert(prefix, step);
        }
        level = next;
    }
    KernelPairModel::Tree(TreeModel {
        alphabet: Alphabet::new(width).unwrap(),
        depth,
        kernels,
    })
}

/// Random exact Markov pair on `states` symbols.
pub fn random_rational_markov(seed: u64, states: usize) -> KernelPairModel<Surd> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows: Vec<KernelStep<Surd>> = (0..states).map(|_| random_step(&mut rng, states, false)).collect();
    let init = random_step(&mut rng, states, false);
    KernelPairModel::Markov(MarkovModel {
        states,
        p: rows.iter().map(|r| r.p.clone()).collect(),
        q: rows.iter().map(|r| r.q.clone()).collect(),
        init_p: init.p,
        init_q: init.q,
    })
}

/// Random exact product pair with `len` stored coordinates and no tail.
pub fn random_rational_product(seed: u64, width: usize, len: usize) -> KernelPairModel<Surd> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    KernelPairModel::Product(ProductModel {
        coordinates: (0..len).map(|_| random_step(&mut rng, width, false)).collect(),
        tail: None,
    })
}

/// The standard corpus: `count` random rational trees, alphabet ≤ 3, depth ≤ 5.
pub fn corpus(count: usize, seed: u64) -> Vec<KernelPairModel<Surd>> {
    (0..count as u64)
        .map(|i| random_rational_tree(seed.wrapping_mul(1_000_003).wrapping_add(i), 3, 5))
        .collect()
}
