//! Shared inputs for the criterion benches.

use macont_core::fixtures;
use macont_core::{KernelPairModel, Surd};

/// Random exact trees of the acceptance corpus shape.
pub fn tree_corpus(count: usize) -> Vec<KernelPairModel<Surd>> {
    fixtures::corpus(count, 1)
}

/// A float Markov pair on `states` symbols.
pub fn markov(states: usize) -> KernelPairModel<f64> {
    fixtures::random_rational_markov(states as u64, states).to_float()
}

/// The exact i.i.d. Bernoulli pair as a product model.
pub fn bernoulli() -> KernelPairModel<Surd> {
    fixtures::bernoulli_iid_exact()
}

pub fn gaussian(alpha: f64) -> KernelPairModel<f64> {
    fixtures::gaussian_family(alpha)
}
