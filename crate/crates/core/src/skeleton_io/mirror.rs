//! Left/right mirroring across the sensor's vertical mid-plane (x ↦ −x).

use std::array;

use super::{FrameImages, Joint, JointRecord, LabeledSequence, SkeletonFrame};
use crate::hog::GrayGrid;
use crate::rotation::{nearest_rotation, reflect_x};

fn mirror_record(rec: &JointRecord) -> JointRecord {
    let mut position = rec.position;
    position.x = -position.x;
    JointRecord {
        position,
        orientation: rec.orientation.map(|r| nearest_rotation(&reflect_x(&r))),
        position_confidence: rec.position_confidence,
        orientation_confidence: rec.orientation_confidence,
    }
}

pub fn mirror_frame(frame: &SkeletonFrame) -> SkeletonFrame {
    SkeletonFrame {
        frame_index: frame.frame_index,
        joints: array::from_fn(|i| mirror_record(&frame.joints[Joint::ALL[i].mirror().index()])),
    }
}

/// Flips a grid horizontally.
pub fn mirror_grid(grid: &GrayGrid) -> GrayGrid {
    let w = grid.width();
    GrayGrid::from_fn(w, grid.height(), |x, y| grid.get(w - 1 - x, y))
}

pub fn mirror_images(im: &FrameImages) -> FrameImages {
    FrameImages {
        rgb: mirror_grid(&im.rgb),
        depth: mirror_grid(&im.depth),
    }
}

/// Mirrors skeletons and images; labels, subject and frame indices are kept.
pub fn mirror_sequence(seq: &LabeledSequence) -> LabeledSequence {
    LabeledSequence {
        frames: seq.frames.iter().map(mirror_frame).collect(),
        images: seq.images.as_ref().map(|src| src.mirrored()),
        label: seq.label.clone(),
        location: seq.location,
        subject_id: seq.subject_id.clone(),
    }
}
