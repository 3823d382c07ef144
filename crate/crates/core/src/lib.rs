//! Video replanning with implicit state estimation.
//!
//! The crate bundles the pieces of a closed replanning loop over
//! desk-scale manipulation tasks with hidden physical parameters:
//! experience datasets of interaction videos, a frame encoder with PCA
//! normalization, softmax retrieval of state embeddings, a kernel plan
//! generator, embedding refinement, max-min rejection of candidate plans,
//! an action decoder and the experiment harness that ties them together.

pub mod actor;
pub mod dataset;
pub mod encoders;
pub mod envs;
pub mod error;
pub mod generator;
pub mod metrics;
pub mod refinement;
pub mod rejection;
pub mod replan;
pub mod retrieval;
pub mod video;

pub use error::{IseError, Result};
