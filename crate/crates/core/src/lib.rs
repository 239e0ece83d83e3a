//! Approximate profile maximum likelihood (PML).
//!
//! The pipeline discretizes probabilities and frequencies onto geometric
//! grids, maximizes a log-concave relaxation over assignment matrices
//! (barrier method on its dual, or Frank-Wolfe), rounds the fractional optimum to an integral assignment and
//! reads a level-set distribution off the result. That distribution is then
//! used as a plug-in estimator for symmetric properties.
//!
//! Small exact oracles ([`oracle`]) back the tests of every stage.

#![forbid(unsafe_code)]

mod barrier;
pub mod discretization;
pub mod error;
pub mod estimators;
pub mod multipml;
pub mod numeric;
pub mod oracle;
pub mod profile;
pub mod rounding;
pub mod sdpml;
pub mod solver;

pub use error::{PmlError, Result};
pub use estimators::{
    approximate_pml, distance_to_uniformity, entropy, kl_plugin, normalize,
    pseudo_from_assignment, support_coverage, support_size, Diagnostics, LevelSetDistribution,
    PairedLevelSetDistribution,
};
pub use multipml::{approximate_pml_d, d_profile_of, exact_d_profile_logprob, DProfile};
pub use oracle::{brute_force_pml, exact_profile_logprob, DenseDistribution, GridSearchConfig};
pub use profile::{log_c_phi, profile_of_sequence, LogProb, Profile, Sequence, TypeVector};
