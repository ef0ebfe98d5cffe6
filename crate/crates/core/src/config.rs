//! Run configuration shared by training, detection and evaluation.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::baselines::SvmOptions;
use crate::error::{Error, Result};
use crate::features::FeatureBlocks;
use crate::hog::CameraIntrinsics;
use crate::memm::{BoundaryPrior, DetectorConfig, ManualActivityTransitions, DEFAULT_MAX_WINDOW, TRANSITION_FLOOR};
use crate::skeleton_io::Location;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Restrict training and evaluation to one location.
    pub location: Option<Location>,
    pub features: FeatureBlocks,
    /// Longest substructure `T`, in frames.
    pub max_window: usize,
    pub boundary: BoundaryPrior,
    pub seed: u64,
    pub clusters_per_activity: usize,
    pub transition_floor: f64,
    pub manual_transitions: ManualActivityTransitions,
    pub svm_epochs: usize,
    pub svm_lambda: f64,
    /// Add left/right mirrored copies of every training sequence.
    pub mirror_training: bool,
    pub intrinsics: CameraIntrinsics,
    pub manifest: Option<PathBuf>,
    pub model: Option<PathBuf>,
    pub output_dir: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            location: None,
            features: FeatureBlocks::default(),
            max_window: DEFAULT_MAX_WINDOW,
            boundary: BoundaryPrior::Uniform,
            seed: 0,
            clusters_per_activity: crate::gmm::CLUSTERS_PER_ACTIVITY,
            transition_floor: TRANSITION_FLOOR,
            manual_transitions: ManualActivityTransitions::default(),
            svm_epochs: SvmOptions::default().epochs,
            svm_lambda: SvmOptions::default().lambda,
            mirror_training: true,
            intrinsics: CameraIntrinsics::default(),
            manifest: None,
            model: None,
            output_dir: None,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.features.skeletal {
            return Err(Error::InvalidConfig("the skeletal feature block must be enabled".into()));
        }
        if self.max_window < 2 {
            return Err(Error::InvalidConfig(format!(
                "max_window must be at least 2, got {}",
                self.max_window
            )));
        }
        if self.clusters_per_activity == 0 {
            return Err(Error::InvalidConfig("clusters_per_activity must be positive".into()));
        }
        if !(self.transition_floor > 0.0 && self.transition_floor < 0.01) {
            return Err(Error::InvalidConfig("transition_floor must lie in (0, 0.01)".into()));
        }
        if self.svm_epochs == 0 || !self.svm_lambda.is_finite() || self.svm_lambda <= 0.0 {
            return Err(Error::InvalidConfig("svm_epochs and svm_lambda must be positive".into()));
        }
        self.manual_transitions.validate()
    }

    pub fn detector(&self) -> DetectorConfig {
        DetectorConfig {
            max_window: self.max_window,
            boundary: self.boundary,
        }
    }

    pub fn svm(&self) -> SvmOptions {
        SvmOptions {
            epochs: self.svm_epochs,
            lambda: self.svm_lambda,
            seed: self.seed,
        }
    }
}
