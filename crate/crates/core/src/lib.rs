//! Equivalence and singularity of pairs of measures on sequence space.
//!
//! A model describes two measures ℙ and ℙ' through their conditional
//! kernels. The crate computes the density process `Φₙ`, the conditional
//! affinities `M_{n,k}`, and decides whether ℙ' is equivalent to ℙ or
//! singular with respect to it.

pub mod affinity;
pub mod decide;
pub mod error;
pub mod exact_tree;
pub mod fixtures;
pub mod invariants;
pub mod models;
pub mod montecarlo;
pub mod number;
pub mod report;
pub mod scalar;

pub use decide::{decide_equivalence, Basis, CriterionName, CriterionResult, DecideConfig, Decision, Verdict, WitnessSet};
pub use error::{Error, Result};
pub use exact_tree::{AtomBudget, CylinderWeights, DensityState};
pub use models::{
    parse_model, serialize_model, Alphabet, AnyModel, GaussianCoordinate, KernelPairModel,
    KernelStep, Measure, Prefix, TailGenerator,
};
pub use montecarlo::{sample_paths, PathTrace};
pub use number::Number;
pub use report::{Mode, Report, RunConfig};
pub use scalar::{Scalar, Surd};
