//! Comparison systems: a per-frame linear classifier and a one-level MEMM
//! driven by its calibrated scores.

mod one_level;
mod platt;
mod svm;

pub use one_level::{activity_subtable, one_level_step, OneLevelTracker};
pub use platt::{platt_calibrate, sigmoid, PlattOptions};
pub use svm::{train_naive, LinearActivityClassifier, SvmOptions};
