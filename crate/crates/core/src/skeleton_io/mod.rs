//! Skeleton frames, labeled sequences and their on-disk formats.
//!
//! Joint positions are millimeters in the sensor frame (x right as seen by the
//! camera, y up, z away from the camera). Frames are sampled at 30 Hz.

mod format;
mod images;
mod mirror;
pub mod synth;

use std::fmt;
use std::str::FromStr;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hog::GrayGrid;

pub use format::{
    load_dataset, load_manifest, FrameParser, parse_frame, parse_frame_with, parse_sequence, read_sequence_file,
    serialize_frame, serialize_sequence, write_manifest, JointOrder, ManifestEntry,
    FIELDS_PER_LINE,
};
pub use images::{load_frame_images, load_gray, save_depth_pgm, save_rgb_ppm, ImageSource};
pub use mirror::{mirror_frame, mirror_grid, mirror_images, mirror_sequence};

pub const FRAME_RATE_HZ: f64 = 30.0;
pub const NUM_JOINTS: usize = 15;
pub const NUM_ORIENTED: usize = 11;

/// The fifteen tracked joints, in file order. The first eleven carry an
/// orientation matrix; hands and feet are position only.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Joint {
    Head,
    Neck,
    Torso,
    LeftShoulder,
    LeftElbow,
    RightShoulder,
    RightElbow,
    LeftHip,
    LeftKnee,
    RightHip,
    RightKnee,
    LeftHand,
    RightHand,
    LeftFoot,
    RightFoot,
}

impl Joint {
    pub const ALL: [Joint; NUM_JOINTS] = [
        Joint::Head,
        Joint::Neck,
        Joint::Torso,
        Joint::LeftShoulder,
        Joint::LeftElbow,
        Joint::RightShoulder,
        Joint::RightElbow,
        Joint::LeftHip,
        Joint::LeftKnee,
        Joint::RightHip,
        Joint::RightKnee,
        Joint::LeftHand,
        Joint::RightHand,
        Joint::LeftFoot,
        Joint::RightFoot,
    ];

    pub const ORIENTED: [Joint; NUM_ORIENTED] = [
        Joint::Head,
        Joint::Neck,
        Joint::Torso,
        Joint::LeftShoulder,
        Joint::LeftElbow,
        Joint::RightShoulder,
        Joint::RightElbow,
        Joint::LeftHip,
        Joint::LeftKnee,
        Joint::RightHip,
        Joint::RightKnee,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn has_orientation(self) -> bool {
        self.index() < NUM_ORIENTED
    }

    /// The joint occupying the same place on the other side of the body.
    pub fn mirror(self) -> Joint {
        use Joint::*;
        match self {
            LeftShoulder => RightShoulder,
            RightShoulder => LeftShoulder,
            LeftElbow => RightElbow,
            RightElbow => LeftElbow,
            LeftHip => RightHip,
            RightHip => LeftHip,
            LeftKnee => RightKnee,
            RightKnee => LeftKnee,
            LeftHand => RightHand,
            RightHand => LeftHand,
            LeftFoot => RightFoot,
            RightFoot => LeftFoot,
            other => other,
        }
    }

    pub fn name(self) -> &'static str {
        use Joint::*;
        match self {
            Head => "head",
            Neck => "neck",
            Torso => "torso",
            LeftShoulder => "left_shoulder",
            LeftElbow => "left_elbow",
            RightShoulder => "right_shoulder",
            RightElbow => "right_elbow",
            LeftHip => "left_hip",
            LeftKnee => "left_knee",
            RightHip => "right_hip",
            RightKnee => "right_knee",
            LeftHand => "left_hand",
            RightHand => "right_hand",
            LeftFoot => "left_foot",
            RightFoot => "right_foot",
        }
    }
}

impl fmt::Display for Joint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointRecord {
    pub position: Vector3<f64>,
    /// Present for the eleven oriented joints, `None` for hands and feet.
    pub orientation: Option<Matrix3<f64>>,
    pub position_confidence: f64,
    pub orientation_confidence: f64,
}

impl JointRecord {
    pub fn new(position: Vector3<f64>, orientation: Option<Matrix3<f64>>) -> Self {
        Self {
            position,
            orientation,
            position_confidence: 1.0,
            orientation_confidence: if orientation.is_some() { 1.0 } else { 0.0 },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkeletonFrame {
    pub frame_index: u64,
    pub joints: [JointRecord; NUM_JOINTS],
}

impl SkeletonFrame {
    pub fn timestamp(&self) -> f64 {
        self.frame_index as f64 / FRAME_RATE_HZ
    }

    pub fn joint(&self, joint: Joint) -> &JointRecord {
        &self.joints[joint.index()]
    }

    pub fn position(&self, joint: Joint) -> Vector3<f64> {
        self.joints[joint.index()].position
    }

    /// Orientation of an oriented joint; identity for position-only joints.
    pub fn rotation(&self, joint: Joint) -> Matrix3<f64> {
        self.joints[joint.index()]
            .orientation
            .unwrap_or_else(Matrix3::identity)
    }

    pub fn hip_center(&self) -> Vector3<f64> {
        (self.position(Joint::LeftHip) + self.position(Joint::RightHip)) * 0.5
    }

    /// Checks the structural invariants: finite positions, confidences in
    /// [0, 1], and orientations present exactly on the oriented joints.
    pub fn validate(&self) -> Result<()> {
        for (joint, rec) in Joint::ALL.iter().zip(&self.joints) {
            if rec.position.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidSequence(format!(
                    "frame {}: non-finite position for {joint}",
                    self.frame_index
                )));
            }
            for c in [rec.position_confidence, rec.orientation_confidence] {
                if !(0.0..=1.0).contains(&c) {
                    return Err(Error::InvalidSequence(format!(
                        "frame {}: confidence {c} out of range for {joint}",
                        self.frame_index
                    )));
                }
            }
            if rec.orientation.is_some() != joint.has_orientation() {
                return Err(Error::InvalidSequence(format!(
                    "frame {}: orientation presence wrong for {joint}",
                    self.frame_index
                )));
            }
        }
        Ok(())
    }
}

/// Per-frame image pair; RGB is stored already converted to luminance.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameImages {
    pub rgb: GrayGrid,
    pub depth: GrayGrid,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Location {
    Bathroom,
    Bedroom,
    Kitchen,
    LivingRoom,
    Office,
}

impl Location {
    pub const ALL: [Location; 5] = [
        Location::Bathroom,
        Location::Bedroom,
        Location::Kitchen,
        Location::LivingRoom,
        Location::Office,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Location::Bathroom => "bathroom",
            Location::Bedroom => "bedroom",
            Location::Kitchen => "kitchen",
            Location::LivingRoom => "living_room",
            Location::Office => "office",
        }
    }
}

impl fmt::Display for Location {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Location {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().to_ascii_lowercase().replace([' ', '-'], "_");
        Location::ALL
            .into_iter()
            .find(|l| l.as_str() == norm)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown location {s:?}")))
    }
}

pub const RANDOM_LABEL: &str = "random";

/// Ground-truth label of a recorded sequence.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SequenceLabel {
    Activity(String),
    /// Unscripted movement, used only for testing detection.
    Random,
}

impl SequenceLabel {
    pub fn activity(&self) -> Option<&str> {
        match self {
            SequenceLabel::Activity(a) => Some(a),
            SequenceLabel::Random => None,
        }
    }

    pub fn is_random(&self) -> bool {
        matches!(self, SequenceLabel::Random)
    }
}

impl fmt::Display for SequenceLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SequenceLabel::Activity(a) => f.write_str(a),
            SequenceLabel::Random => f.write_str(RANDOM_LABEL),
        }
    }
}

impl Serialize for SequenceLabel {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for SequenceLabel {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

impl FromStr for SequenceLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.is_empty() {
            return Err(Error::InvalidConfig("empty activity label".into()));
        }
        if s.eq_ignore_ascii_case(RANDOM_LABEL) {
            Ok(SequenceLabel::Random)
        } else {
            Ok(SequenceLabel::Activity(s.to_string()))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSequence {
    pub frames: Vec<SkeletonFrame>,
    pub images: Option<ImageSource>,
    pub label: SequenceLabel,
    pub location: Location,
    pub subject_id: String,
}

impl LabeledSequence {
    pub fn new(
        frames: Vec<SkeletonFrame>,
        label: SequenceLabel,
        location: Location,
        subject_id: impl Into<String>,
    ) -> Result<Self> {
        let seq = Self {
            frames,
            images: None,
            label,
            location,
            subject_id: subject_id.into(),
        };
        seq.validate()?;
        Ok(seq)
    }

    pub fn with_images(self, images: Vec<FrameImages>) -> Result<Self> {
        self.with_image_source(ImageSource::Memory(images))
    }

    pub fn with_image_source(mut self, images: ImageSource) -> Result<Self> {
        self.images = Some(images);
        self.validate()?;
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        for pair in self.frames.windows(2) {
            if pair[1].frame_index <= pair[0].frame_index {
                return Err(Error::NonIncreasingFrames {
                    previous: pair[0].frame_index,
                    next: pair[1].frame_index,
                });
            }
        }
        for frame in &self.frames {
            frame.validate()?;
        }
        if let Some(images) = &self.images {
            if images.len() != self.frames.len() {
                return Err(Error::MisalignedImages {
                    images: images.len(),
                    frames: self.frames.len(),
                });
            }
        }
        Ok(())
    }

    /// Frames `[start, end)` as a new sequence with the same labels.
    pub fn slice(&self, start: usize, end: usize) -> LabeledSequence {
        LabeledSequence {
            frames: self.frames[start..end].to_vec(),
            images: self.images.as_ref().map(|im| im.slice(start, end)),
            label: self.label.clone(),
            location: self.location,
            subject_id: self.subject_id.clone(),
        }
    }
}

/// Activity → locations assignment of the reference household dataset.
pub fn activity_catalog() -> Vec<(&'static str, Vec<Location>)> {
    use Location::*;
    vec![
        ("rinsing_mouth", vec![Bathroom]),
        ("brushing_teeth", vec![Bathroom]),
        ("wearing_contact_lens", vec![Bathroom]),
        ("talking_on_phone", vec![Bedroom, LivingRoom, Office]),
        ("drinking_water", vec![Bedroom, Kitchen, LivingRoom, Office]),
        ("opening_pill_container", vec![Bedroom, Kitchen]),
        ("cooking_chopping", vec![Kitchen]),
        ("cooking_stirring", vec![Kitchen]),
        ("talking_on_couch", vec![LivingRoom]),
        ("relaxing_on_couch", vec![LivingRoom]),
        ("writing_on_whiteboard", vec![Office]),
        ("working_on_computer", vec![Office]),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mirror_is_involution_on_joints() {
        for j in Joint::ALL {
            assert_eq!(j.mirror().mirror(), j);
            assert_eq!(j.mirror().has_orientation(), j.has_orientation());
        }
    }

    #[test]
    fn catalog_has_twelve_activities_over_five_locations() {
        let cat = activity_catalog();
        assert_eq!(cat.len(), 12);
        for loc in Location::ALL {
            let n = cat.iter().filter(|(_, l)| l.contains(&loc)).count();
            assert!((3..=4).contains(&n), "{loc}: {n}");
        }
    }

    #[test]
    fn labels_parse() {
        assert_eq!("RANDOM".parse::<SequenceLabel>().unwrap(), SequenceLabel::Random);
        assert_eq!(
            "living room".parse::<Location>().unwrap(),
            Location::LivingRoom
        );
        assert!("garage".parse::<Location>().is_err());
    }
}
