//! Exact tooling for minimizing weighted completion time on unrelated
//! machines with `w_j = p_j` and eligibility sets: Configuration-LP solving,
//! bucket rounding with matching decompositions, ground-truth oracles, and
//! an executable model of the compatible-function-pair analysis.

pub mod cfp;
pub mod conflp;
pub mod error;
pub mod exact;
pub mod generators;
pub mod instance;
pub mod rational;
pub mod rng;
pub mod rounding;
pub mod simplex;

pub use error::{Error, Result};
pub use instance::{assignment_cost, config_cost, makespan, Assignment, Configuration, Instance, Job};
pub use rational::Rational;
