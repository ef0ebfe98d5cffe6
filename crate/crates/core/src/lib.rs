//! Online activity detection from RGB-D skeleton streams with a two-layer
//! hierarchical maximum-entropy Markov model.
//!
//! The pipeline runs per frame: [`skeleton_io`] parses and mirrors joint
//! data, [`features`] and [`hog`] turn a frame history into a feature vector,
//! a per-location [`gmm::SubActivityBank`] maps it to sub-activity posteriors,
//! and [`memm`] selects the activity segmentation online. [`baselines`] holds
//! the comparison systems and [`eval`] the cross-validation protocol.

pub mod baselines;
pub mod config;
pub mod error;
pub mod eval;
pub mod features;
pub mod gmm;
pub mod hog;
pub mod memm;
pub mod model;
pub mod rotation;
pub mod skeleton_io;

pub use error::{Error, Result};
