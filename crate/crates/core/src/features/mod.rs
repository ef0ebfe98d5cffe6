//! Skeletal feature extraction: body pose (47), hands (16) and motion (396),
//! plus the optional HOG blocks.
//!
//! Layout of the 459 skeletal values:
//!
//! | range     | content                                                          |
//! |-----------|------------------------------------------------------------------|
//! | 0..40     | torso-relative quaternions of the 10 non-torso oriented joints    |
//! | 40..46    | left foot, right foot in the torso frame (mm)                    |
//! | 46        | upper-body lean from vertical (rad)                              |
//! | 47..63    | per hand (left, right): torso frame xyz, head frame xyz, max y, min y |
//! | 63..459   | for each offset, for each oriented joint: quaternion of `R_t·R_{t−k}ᵀ` |

mod quaternion;

use std::collections::VecDeque;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

pub use quaternion::{rotation_to_halfspace_quaternion, Quaternion};

use crate::error::{Error, Result};
use crate::hog::{self, CameraIntrinsics};
use crate::skeleton_io::{FrameImages, Joint, LabeledSequence, SkeletonFrame};

pub const BODY_POSE_LEN: usize = 47;
pub const HAND_LEN: usize = 16;
pub const MOTION_LEN: usize = 396;
pub const SKELETAL_LEN: usize = BODY_POSE_LEN + HAND_LEN + MOTION_LEN;

/// Frames back from the current one at which motion is measured.
pub const MOTION_OFFSETS: [usize; 9] = [5, 9, 14, 20, 27, 35, 44, 54, 65];
/// Samples (including the current frame) over which hand height extremes are taken.
pub const HAND_WINDOW: usize = 6;
/// Frames retained by a [`FrameHistory`].
pub const HISTORY_LEN: usize = 66;

const POSE_JOINTS: [Joint; 10] = [
    Joint::Head,
    Joint::Neck,
    Joint::LeftShoulder,
    Joint::LeftElbow,
    Joint::RightShoulder,
    Joint::RightElbow,
    Joint::LeftHip,
    Joint::LeftKnee,
    Joint::RightHip,
    Joint::RightKnee,
];

/// Which feature blocks feed the models.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct FeatureBlocks {
    pub skeletal: bool,
    pub simple_hog: bool,
    pub skeletal_hog: bool,
}

impl Default for FeatureBlocks {
    fn default() -> Self {
        Self {
            skeletal: true,
            simple_hog: false,
            skeletal_hog: false,
        }
    }
}

impl FeatureBlocks {
    pub fn dimension(&self) -> usize {
        let mut d = 0;
        if self.skeletal {
            d += SKELETAL_LEN;
        }
        if self.simple_hog {
            d += hog::SIMPLE_HOG_LEN;
        }
        if self.skeletal_hog {
            d += hog::SKELETAL_HOG_LEN;
        }
        d
    }

    pub fn needs_images(&self) -> bool {
        self.simple_hog || self.skeletal_hog
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub body_pose: Vec<f64>,
    pub hand: Vec<f64>,
    pub motion: Vec<f64>,
    pub hog_simple: Option<Vec<f64>>,
    pub hog_skeletal: Option<Vec<f64>>,
}

impl FeatureVector {
    /// Concatenation of the enabled blocks.
    pub fn to_vec(&self, blocks: &FeatureBlocks) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(blocks.dimension());
        if blocks.skeletal {
            out.extend_from_slice(&self.body_pose);
            out.extend_from_slice(&self.hand);
            out.extend_from_slice(&self.motion);
        }
        if blocks.simple_hog {
            out.extend_from_slice(self.hog_simple.as_deref().ok_or_else(|| {
                Error::InvalidConfig("simple HOG requested but not computed".into())
            })?);
        }
        if blocks.skeletal_hog {
            out.extend_from_slice(self.hog_skeletal.as_deref().ok_or_else(|| {
                Error::InvalidConfig("skeletal HOG requested but not computed".into())
            })?);
        }
        Ok(out)
    }

    pub fn skeletal(&self) -> Vec<f64> {
        [&self.body_pose[..], &self.hand[..], &self.motion[..]].concat()
    }

    pub fn is_finite(&self) -> bool {
        self.skeletal().iter().all(|v| v.is_finite())
            && self.hog_simple.iter().flatten().all(|v| v.is_finite())
            && self.hog_skeletal.iter().flatten().all(|v| v.is_finite())
    }
}

/// The most recent [`HISTORY_LEN`] frames of one stream. Lookups further back
/// than the stream start return the earliest retained frame.
#[derive(Debug, Clone, Default)]
pub struct FrameHistory {
    frames: VecDeque<SkeletonFrame>,
}

impl FrameHistory {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, frame: SkeletonFrame) {
        if self.frames.len() == HISTORY_LEN {
            self.frames.pop_front();
        }
        self.frames.push_back(frame);
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn current(&self) -> Option<&SkeletonFrame> {
        self.frames.back()
    }

    /// The frame `k` steps before the current one, padded at the start.
    pub fn back(&self, k: usize) -> Option<&SkeletonFrame> {
        let n = self.frames.len();
        if n == 0 {
            return None;
        }
        self.frames.get(n - 1 - k.min(n - 1))
    }
}

fn push_quat(out: &mut Vec<f64>, r: &Matrix3<f64>) -> Result<()> {
    out.extend(rotation_to_halfspace_quaternion(r)?.to_array());
    Ok(())
}

fn in_frame(origin: &SkeletonFrame, joint: Joint, p: Vector3<f64>) -> Vector3<f64> {
    origin.rotation(joint).transpose() * (p - origin.position(joint))
}

/// Angle between the hip-center→head line and world vertical (+y).
pub fn lean_angle(frame: &SkeletonFrame) -> f64 {
    let up = frame.position(Joint::Head) - frame.hip_center();
    let vertical = Vector3::y();
    up.cross(&vertical).norm().atan2(up.dot(&vertical))
}

pub fn body_pose_features(frame: &SkeletonFrame) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(BODY_POSE_LEN);
    let torso_t = frame.rotation(Joint::Torso).transpose();
    for joint in POSE_JOINTS {
        push_quat(&mut out, &(torso_t * frame.rotation(joint)))?;
    }
    for foot in [Joint::LeftFoot, Joint::RightFoot] {
        out.extend(in_frame(frame, Joint::Torso, frame.position(foot)).iter());
    }
    out.push(lean_angle(frame));
    Ok(out)
}

pub fn hand_features(history: &FrameHistory) -> Vec<f64> {
    let mut out = Vec::with_capacity(HAND_LEN);
    let Some(frame) = history.current() else {
        return vec![0.0; HAND_LEN];
    };
    for hand in [Joint::LeftHand, Joint::RightHand] {
        let p = frame.position(hand);
        out.extend(in_frame(frame, Joint::Torso, p).iter());
        out.extend(in_frame(frame, Joint::Head, p).iter());
        let heights = (0..HAND_WINDOW).filter_map(|k| history.back(k)).map(|f| f.position(hand).y);
        let (hi, lo) = heights.fold((f64::NEG_INFINITY, f64::INFINITY), |(hi, lo), y| {
            (hi.max(y), lo.min(y))
        });
        out.push(hi);
        out.push(lo);
    }
    out
}

pub fn motion_features(history: &FrameHistory) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(MOTION_LEN);
    let Some(now) = history.current() else {
        return Ok([1.0, 0.0, 0.0, 0.0].repeat(MOTION_LEN / 4));
    };
    for k in MOTION_OFFSETS {
        let past = history.back(k).unwrap_or(now);
        for joint in Joint::ORIENTED {
            push_quat(&mut out, &(now.rotation(joint) * past.rotation(joint).transpose()))?;
        }
    }
    Ok(out)
}

/// Skeletal blocks for the current frame of `history`.
pub fn skeletal_features(history: &FrameHistory) -> Result<FeatureVector> {
    let frame = history
        .current()
        .ok_or_else(|| Error::InvalidSequence("empty frame history".into()))?;
    Ok(FeatureVector {
        body_pose: body_pose_features(frame)?,
        hand: hand_features(history),
        motion: motion_features(history)?,
        hog_simple: None,
        hog_skeletal: None,
    })
}

/// Extracts features online, one frame at a time.
#[derive(Debug, Clone)]
pub struct FeatureExtractor {
    blocks: FeatureBlocks,
    intrinsics: CameraIntrinsics,
    history: FrameHistory,
}

impl FeatureExtractor {
    pub fn new(blocks: FeatureBlocks, intrinsics: CameraIntrinsics) -> Self {
        Self {
            blocks,
            intrinsics,
            history: FrameHistory::new(),
        }
    }

    pub fn push(&mut self, frame: &SkeletonFrame, images: Option<&FrameImages>) -> Result<FeatureVector> {
        self.history.push(frame.clone());
        let mut fv = skeletal_features(&self.history)?;
        if self.blocks.needs_images() {
            let im = images.ok_or_else(|| {
                Error::InvalidConfig("HOG features enabled but the sequence has no images".into())
            })?;
            if self.blocks.simple_hog {
                let b = hog::person_bbox(frame, &self.intrinsics)?;
                fv.hog_simple = Some(hog::simple_hog(&im.rgb, &im.depth, &b)?);
            }
            if self.blocks.skeletal_hog {
                fv.hog_skeletal = Some(hog::skeletal_hog(&im.rgb, &im.depth, frame, &self.intrinsics)?);
            }
        }
        Ok(fv)
    }
}

/// Features for every frame of a sequence, as seen by an online extractor.
pub fn featurize_sequence(
    seq: &LabeledSequence,
    blocks: &FeatureBlocks,
    intrinsics: &CameraIntrinsics,
) -> Result<Vec<FeatureVector>> {
    let mut ex = FeatureExtractor::new(*blocks, *intrinsics);
    seq.frames
        .iter()
        .enumerate()
        .map(|(i, f)| {
            let images = seq.images.as_ref().map(|im| im.get(i)).transpose()?;
            ex.push(f, images.as_deref())
        })
        .collect()
}
