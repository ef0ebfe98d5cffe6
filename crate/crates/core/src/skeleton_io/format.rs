//! Line-oriented skeleton text format and the label manifest.
//!
//! Each line holds one frame as comma-separated numbers:
//!
//! ```text
//! frame_index,
//!   11 × [ r00,r01,r02,r10,r11,r12,r20,r21,r22, orientation_conf, x,y,z, position_conf ],
//!    4 × [ x,y,z, position_conf ]
//! ```
//!
//! for 171 fields. The default slot order is head, neck, torso, left shoulder,
//! left elbow, right shoulder, right elbow, left hip, left knee, right hip,
//! right knee for the oriented slots, then left hand, right hand, left foot,
//! right foot. A trailing comma and a final `END` line are accepted.

use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use super::{images, Joint, JointRecord, LabeledSequence, Location, SequenceLabel, SkeletonFrame};
use crate::error::{Error, Result};
use crate::rotation::{nearest_rotation, orthonormality_deviation};

pub const FIELDS_PER_LINE: usize = 1 + 11 * (9 + 1 + 3 + 1) + 4 * (3 + 1);

/// Largest pre-orthonormalization deviation accepted from the sensor.
const ORTHONORMAL_REJECT: f64 = 0.1;

/// Mapping from file slots to joints.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JointOrder {
    pub oriented: [Joint; 11],
    pub position_only: [Joint; 4],
}

impl Default for JointOrder {
    fn default() -> Self {
        Self {
            oriented: Joint::ORIENTED,
            position_only: [
                Joint::LeftHand,
                Joint::RightHand,
                Joint::LeftFoot,
                Joint::RightFoot,
            ],
        }
    }
}

impl JointOrder {
    /// Every joint must appear exactly once, oriented joints in oriented slots.
    pub fn validate(&self) -> Result<()> {
        let mut seen = [false; 15];
        for j in self.oriented {
            if !j.has_orientation() {
                return Err(Error::InvalidConfig(format!(
                    "joint {j} cannot occupy an oriented slot"
                )));
            }
            seen[j.index()] = true;
        }
        for j in self.position_only {
            seen[j.index()] = true;
        }
        if seen.iter().all(|&s| s) {
            Ok(())
        } else {
            Err(Error::InvalidConfig(
                "joint order is not a permutation of the 15 joints".into(),
            ))
        }
    }
}

fn split_fields(line: &str) -> Vec<&str> {
    let trimmed = line.trim();
    let trimmed = trimmed.strip_suffix(',').unwrap_or(trimmed);
    trimmed.split(',').map(str::trim).collect()
}

/// Parses one frame using the default slot order.
pub fn parse_frame(line: &str) -> Result<SkeletonFrame> {
    parse_frame_with(line, &JointOrder::default(), 1)
}

/// Parses one frame. Orientations with zero confidence are replaced by the
/// identity; [`parse_sequence`] substitutes the previous frame's orientation.
pub fn parse_frame_with(line: &str, order: &JointOrder, line_no: usize) -> Result<SkeletonFrame> {
    let raw = split_fields(line);
    if raw.len() != FIELDS_PER_LINE {
        return Err(Error::FieldCountMismatch {
            line: line_no,
            expected: FIELDS_PER_LINE,
            found: raw.len(),
        });
    }
    let mut values = Vec::with_capacity(FIELDS_PER_LINE);
    for (field, text) in raw.iter().enumerate() {
        match text.parse::<f64>() {
            Ok(v) if v.is_finite() => values.push(v),
            _ => {
                return Err(Error::NonFiniteValue {
                    line: line_no,
                    field,
                    value: text.to_string(),
                })
            }
        }
    }
    let index = values[0];
    if index < 0.0 || index.fract() != 0.0 {
        return Err(Error::InvalidSequence(format!(
            "line {line_no}: frame index {index} is not a non-negative integer"
        )));
    }

    let blank = JointRecord::new(Vector3::zeros(), None);
    let mut joints: [JointRecord; 15] = std::array::from_fn(|_| blank.clone());
    let mut cursor = 1;
    for joint in order.oriented {
        let block = &values[cursor..cursor + 14];
        cursor += 14;
        let matrix = Matrix3::from_row_slice(&block[0..9]);
        let orientation_confidence = block[9];
        let position = Vector3::new(block[10], block[11], block[12]);
        let position_confidence = block[13];
        let orientation = if orientation_confidence > 0.0 {
            let deviation = orthonormality_deviation(&matrix);
            if deviation > ORTHONORMAL_REJECT {
                return Err(Error::NonOrthonormalBeyondTolerance {
                    line: line_no,
                    joint: joint.name(),
                    deviation,
                });
            }
            nearest_rotation(&matrix)
        } else {
            Matrix3::identity()
        };
        joints[joint.index()] = JointRecord {
            position,
            orientation: Some(orientation),
            position_confidence: position_confidence.clamp(0.0, 1.0),
            orientation_confidence: orientation_confidence.clamp(0.0, 1.0),
        };
    }
    for joint in order.position_only {
        let block = &values[cursor..cursor + 4];
        cursor += 4;
        joints[joint.index()] = JointRecord {
            position: Vector3::new(block[0], block[1], block[2]),
            orientation: None,
            position_confidence: block[3].clamp(0.0, 1.0),
            orientation_confidence: 0.0,
        };
    }
    Ok(SkeletonFrame {
        frame_index: index as u64,
        joints,
    })
}

/// Line-at-a-time parser that enforces increasing frame indices and carries
/// each zero-confidence orientation over from the previous frame.
#[derive(Debug, Clone)]
pub struct FrameParser {
    order: JointOrder,
    previous: Option<SkeletonFrame>,
    line: usize,
}

impl FrameParser {
    pub fn new(order: JointOrder) -> Result<Self> {
        order.validate()?;
        Ok(Self {
            order,
            previous: None,
            line: 0,
        })
    }

    /// Parses the next line. Blank lines and `END` yield `None`.
    pub fn feed(&mut self, line: &str) -> Result<Option<SkeletonFrame>> {
        self.line += 1;
        let t = line.trim();
        if t.is_empty() || t.eq_ignore_ascii_case("END") {
            return Ok(None);
        }
        let mut frame = parse_frame_with(t, &self.order, self.line)?;
        if let Some(prev) = &self.previous {
            if frame.frame_index <= prev.frame_index {
                return Err(Error::NonIncreasingFrames {
                    previous: prev.frame_index,
                    next: frame.frame_index,
                });
            }
            for j in Joint::ORIENTED {
                let rec = &mut frame.joints[j.index()];
                if rec.orientation_confidence == 0.0 {
                    rec.orientation = prev.joints[j.index()].orientation;
                }
            }
        }
        self.previous = Some(frame.clone());
        Ok(Some(frame))
    }
}

/// Parses a whole file body. Blank lines and a trailing `END` are skipped.
pub fn parse_sequence(text: &str, order: &JointOrder) -> Result<Vec<SkeletonFrame>> {
    let mut parser = FrameParser::new(order.clone())?;
    let mut frames = Vec::new();
    for line in text.lines() {
        if let Some(f) = parser.feed(line)? {
            frames.push(f);
        }
    }
    Ok(frames)
}

/// Formats one frame in the line format (shortest round-trip float text).
pub fn serialize_frame(frame: &SkeletonFrame, order: &JointOrder) -> String {
    let mut fields: Vec<String> = Vec::with_capacity(FIELDS_PER_LINE);
    fields.push(frame.frame_index.to_string());
    for joint in order.oriented {
        let rec = frame.joint(joint);
        let r = rec.orientation.unwrap_or_else(Matrix3::identity);
        for i in 0..3 {
            for j in 0..3 {
                fields.push(r[(i, j)].to_string());
            }
        }
        fields.push(rec.orientation_confidence.to_string());
        fields.extend(rec.position.iter().map(f64::to_string));
        fields.push(rec.position_confidence.to_string());
    }
    for joint in order.position_only {
        let rec = frame.joint(joint);
        fields.extend(rec.position.iter().map(f64::to_string));
        fields.push(rec.position_confidence.to_string());
    }
    fields.join(",")
}

pub fn serialize_sequence(frames: &[SkeletonFrame], order: &JointOrder) -> String {
    let mut out = String::new();
    for f in frames {
        out.push_str(&serialize_frame(f, order));
        out.push('\n');
    }
    out.push_str("END\n");
    out
}

pub fn read_sequence_file(path: &Path, order: &JointOrder) -> Result<Vec<SkeletonFrame>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_sequence(&text, order).map_err(|e| match e {
        Error::Io { .. } => e,
        other => Error::Format {
            path: path.to_path_buf(),
            message: other.to_string(),
        },
    })
}

/// One row of the label manifest (`file,activity,location,subject`).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub file: String,
    pub activity: String,
    pub location: String,
    pub subject: String,
}

impl ManifestEntry {
    pub fn label(&self) -> Result<SequenceLabel> {
        self.activity.parse()
    }

    pub fn location(&self) -> Result<Location> {
        self.location.parse()
    }
}

pub fn load_manifest(path: &Path) -> Result<Vec<ManifestEntry>> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
    let mut entries = Vec::new();
    for row in reader.deserialize() {
        let entry: ManifestEntry = row?;
        entries.push(entry);
    }
    if entries.is_empty() {
        return Err(Error::Format {
            path: path.to_path_buf(),
            message: "manifest has no entries".into(),
        });
    }
    Ok(entries)
}

pub fn write_manifest(path: &Path, entries: &[ManifestEntry]) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)?;
    for e in entries {
        writer.serialize(e)?;
    }
    writer.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Loads every sequence listed in a manifest. Paths are relative to the
/// manifest's directory. When `with_images` is set, per-frame images are read
/// from a directory named after the skeleton file's stem.
pub fn load_dataset(
    manifest: &Path,
    order: &JointOrder,
    with_images: bool,
) -> Result<Vec<(ManifestEntry, LabeledSequence)>> {
    let base: PathBuf = manifest
        .parent()
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from("."));
    let mut out = Vec::new();
    for entry in load_manifest(manifest)? {
        let path = base.join(&entry.file);
        let frames = read_sequence_file(&path, order)?;
        let mut seq = LabeledSequence::new(frames, entry.label()?, entry.location()?, &entry.subject)?;
        if with_images {
            let dir = path.with_extension("");
            let source = images::ImageSource::on_disk(&dir, &seq.frames)?;
            seq = seq.with_image_source(source)?;
        }
        out.push((entry, seq));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    fn identity_line(index: u64) -> String {
        let mut f = vec![index.to_string()];
        for k in 0..11 {
            f.extend(["1", "0", "0", "0", "1", "0", "0", "0", "1", "1"].map(String::from));
            f.extend([format!("{}", k * 10), "5".into(), "2000".into(), "1".into()]);
        }
        for k in 0..4 {
            f.extend([format!("{}", -k * 10), "-3".into(), "2100".into(), "1".into()]);
        }
        f.join(",")
    }

    #[test]
    fn field_count_constant() {
        assert_eq!(FIELDS_PER_LINE, 171);
    }

    #[test]
    fn identity_blocks_parse_to_identity() {
        let frame = parse_frame(&identity_line(3)).unwrap();
        assert_eq!(frame.frame_index, 3);
        for j in Joint::ORIENTED {
            assert!((frame.rotation(j) - Matrix3::identity()).abs().max() < 1e-12);
        }
        assert!(frame.joint(Joint::LeftHand).orientation.is_none());
        assert!((frame.timestamp() - 0.1).abs() < 1e-12);
    }

    #[test]
    fn short_line_is_rejected() {
        let line = identity_line(0);
        let short = line.rsplit_once(',').unwrap().0;
        match parse_frame(short) {
            Err(Error::FieldCountMismatch { found, .. }) => assert_eq!(found, 170),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn trailing_comma_is_accepted() {
        let line = format!("{},", identity_line(0));
        assert!(parse_frame(&line).is_ok());
    }

    #[test]
    fn non_finite_is_rejected() {
        let line = identity_line(0).replacen("2000", "nan", 1);
        assert!(matches!(parse_frame(&line), Err(Error::NonFiniteValue { .. })));
        let line = identity_line(0).replacen("2000", "abc", 1);
        assert!(matches!(parse_frame(&line), Err(Error::NonFiniteValue { .. })));
    }

    #[test]
    fn far_from_rotation_is_rejected() {
        let line = identity_line(0).replacen("1,0,0,0,1,0,0,0,1", "1,0.5,0,0,1,0,0,0,1", 1);
        assert!(matches!(
            parse_frame(&line),
            Err(Error::NonOrthonormalBeyondTolerance { .. })
        ));
    }

    #[test]
    fn quarter_turn_about_z_round_trips() {
        let (s, c) = FRAC_PI_2.sin_cos();
        let expected = Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0);
        let line = identity_line(0).replacen("1,0,0,0,1,0,0,0,1", "0,-1,0,1,0,0,0,0,1", 1);
        let frame = parse_frame(&line).unwrap();
        assert!((frame.rotation(Joint::Head) - expected).abs().max() < 1e-9);
    }

    #[test]
    fn zero_confidence_orientation_carries_over() {
        let first = identity_line(0).replacen("1,0,0,0,1,0,0,0,1", "0,-1,0,1,0,0,0,0,1", 1);
        let second = identity_line(1).replacen("1,0,0,0,1,0,0,0,1,1", "0,0,0,0,0,0,0,0,0,0", 1);
        let text = format!("{first}\n{second}\nEND\n");
        let frames = parse_sequence(&text, &JointOrder::default()).unwrap();
        assert_eq!(frames.len(), 2);
        assert_eq!(frames[1].rotation(Joint::Head), frames[0].rotation(Joint::Head));

        let lone = parse_frame(&second).unwrap();
        assert_eq!(lone.rotation(Joint::Head), Matrix3::identity());
    }

    #[test]
    fn decreasing_indices_rejected() {
        let text = format!("{}\n{}\n", identity_line(5), identity_line(5));
        assert!(matches!(
            parse_sequence(&text, &JointOrder::default()),
            Err(Error::NonIncreasingFrames { .. })
        ));
    }

    #[test]
    fn remapped_order_round_trips() {
        let mut order = JointOrder::default();
        order.oriented.swap(0, 2);
        order.position_only.swap(1, 3);
        order.validate().unwrap();
        let frame = parse_frame_with(&identity_line(7), &order, 1).unwrap();
        let back = parse_frame_with(&serialize_frame(&frame, &order), &order, 1).unwrap();
        assert_eq!(frame, back);
        assert_eq!(frame.position(Joint::Torso).x, 0.0);
        assert_eq!(frame.position(Joint::Head).x, 20.0);
    }

    #[test]
    fn bad_order_rejected() {
        let mut order = JointOrder::default();
        order.oriented[0] = Joint::LeftHand;
        assert!(order.validate().is_err());
    }
}
