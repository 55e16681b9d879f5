//! Estimation of missing mass and total mass from samples with revealed
//! point masses.

// `!(x > 0.0)` style tests are used on purpose: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod distribution;
pub mod error;
pub mod estimators;
pub mod inference;
pub mod likelihoods;
pub mod moments;
pub mod oracle;
pub mod sample;
pub mod simulate;
pub mod solvers;
pub mod special;
pub mod verify;

pub use distribution::{DistKind, MassDistribution};
pub use error::{Error, Result};
pub use estimators::{EstimateResult, Inclusion, Method, RbWeights};
pub use inference::{infer, Base, InferenceConfig, InferenceMethod, InferenceReport, SingularCase};
pub use likelihoods::{Likelihood, LikelihoodModel, ModelParams};
pub use moments::{match_strategy, MomentMatchResult, Strategy};
pub use sample::{kl_delta, summarize, Dataset, Entry, Observation, SummaryStats};
pub use simulate::{GenOrder, Protocol};
pub use solvers::SolverConfig;
