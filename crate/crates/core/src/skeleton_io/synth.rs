//! Scripted synthetic skeleton sequences.
//!
//! A [`MotionScript`] describes a base pose plus cyclic keyframed joint
//! offsets. Generation interpolates the keyframes, applies an optional forward
//! lean of the upper body, adds Gaussian jitter to every coordinate, and then
//! derives joint orientations from limb directions.

use nalgebra::{Matrix3, Vector3};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{FrameImages, Joint, JointRecord, LabeledSequence, Location, SequenceLabel, SkeletonFrame, NUM_JOINTS};
use crate::hog::{CameraIntrinsics, GrayGrid};
use crate::error::{Error, Result};

pub const MIN_FRAMES: usize = 90;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Keyframe {
    /// Position within one cycle, in [0, 1).
    pub phase: f64,
    /// Offsets in millimeters from the base pose; unlisted joints stay put.
    pub offsets: Vec<(Joint, [f64; 3])>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MotionScript {
    pub name: String,
    pub label: SequenceLabel,
    pub location: Location,
    pub base_pose: [[f64; 3]; NUM_JOINTS],
    /// Forward lean of the upper body about the hip center, degrees.
    pub lean_deg: f64,
    pub keyframes: Vec<Keyframe>,
    pub period_frames: f64,
    pub frames: usize,
    pub jitter_mm: f64,
    /// Visit the keyframes in a freshly shuffled order every cycle.
    #[serde(default)]
    pub shuffle_cycles: bool,
}

/// Per-person variation: body size, tempo, movement amplitude and placement.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SubjectStyle {
    pub scale: f64,
    pub tempo: f64,
    pub amplitude: f64,
    pub offset: [f64; 3],
    pub extra_lean_deg: f64,
}

impl Default for SubjectStyle {
    fn default() -> Self {
        Self {
            scale: 1.0,
            tempo: 1.0,
            amplitude: 1.0,
            offset: [0.0; 3],
            extra_lean_deg: 0.0,
        }
    }
}

impl SubjectStyle {
    pub fn from_seed(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5u64.rotate_left(40));
        Self {
            scale: rng.random_range(0.9..1.1),
            tempo: rng.random_range(0.85..1.15),
            amplitude: rng.random_range(0.85..1.15),
            offset: [
                rng.random_range(-150.0..150.0),
                rng.random_range(-30.0..30.0),
                rng.random_range(-200.0..200.0),
            ],
            extra_lean_deg: rng.random_range(-3.0..3.0),
        }
    }

    /// The script as performed by this person.
    pub fn apply(&self, script: &MotionScript) -> MotionScript {
        let mut out = script.clone();
        let pivot = hip_center_of(&script.base_pose);
        for p in out.base_pose.iter_mut() {
            for k in 0..3 {
                p[k] = pivot[k] + (p[k] - pivot[k]) * self.scale + self.offset[k];
            }
        }
        for kf in out.keyframes.iter_mut() {
            for (_, off) in kf.offsets.iter_mut() {
                for v in off.iter_mut() {
                    *v *= self.scale * self.amplitude;
                }
            }
        }
        out.period_frames = script.period_frames / self.tempo;
        out.lean_deg += self.extra_lean_deg;
        out
    }
}

fn hip_center_of(pose: &[[f64; 3]; NUM_JOINTS]) -> [f64; 3] {
    let l = pose[Joint::LeftHip.index()];
    let r = pose[Joint::RightHip.index()];
    [(l[0] + r[0]) / 2.0, (l[1] + r[1]) / 2.0, (l[2] + r[2]) / 2.0]
}

fn smooth(t: f64) -> f64 {
    0.5 - 0.5 * (std::f64::consts::PI * t).cos()
}

fn keyframe_offsets(kf: &Keyframe) -> [Vector3<f64>; NUM_JOINTS] {
    let mut out = [Vector3::zeros(); NUM_JOINTS];
    for (j, o) in &kf.offsets {
        out[j.index()] = Vector3::from(*o);
    }
    out
}

/// Offsets at `phase`; `order[slot]` names the keyframe placed at the phase of
/// the `slot`-th keyframe.
fn interpolate(
    keys: &[(f64, [Vector3<f64>; NUM_JOINTS])],
    order: &[usize],
    phase: f64,
) -> [Vector3<f64>; NUM_JOINTS] {
    let n = keys.len();
    if n == 1 {
        return keys[0].1;
    }
    let (cur, start) = match (0..n).rev().find(|&s| keys[s].0 <= phase) {
        Some(s) => (s, keys[s].0),
        None => (n - 1, keys[n - 1].0 - 1.0),
    };
    let next = (cur + 1) % n;
    let mut end = keys[next].0;
    if end <= start {
        end += 1.0;
    }
    let w = smooth(((phase - start) / (end - start)).clamp(0.0, 1.0));
    let a = &keys[order[cur]].1;
    let b = &keys[order[next]].1;
    std::array::from_fn(|j| a[j] * (1.0 - w) + b[j] * w)
}

const ORIENTATION_LIMBS: [(Joint, Option<Joint>, Joint); 11] = [
    (Joint::Head, Some(Joint::Neck), Joint::Head),
    (Joint::Neck, Some(Joint::Torso), Joint::Neck),
    (Joint::Torso, None, Joint::Neck),
    (Joint::LeftShoulder, Some(Joint::LeftShoulder), Joint::LeftElbow),
    (Joint::LeftElbow, Some(Joint::LeftElbow), Joint::LeftHand),
    (Joint::RightShoulder, Some(Joint::RightShoulder), Joint::RightElbow),
    (Joint::RightElbow, Some(Joint::RightElbow), Joint::RightHand),
    (Joint::LeftHip, Some(Joint::LeftHip), Joint::LeftKnee),
    (Joint::LeftKnee, Some(Joint::LeftKnee), Joint::LeftFoot),
    (Joint::RightHip, Some(Joint::RightHip), Joint::RightKnee),
    (Joint::RightKnee, Some(Joint::RightKnee), Joint::RightFoot),
];

/// Orientation whose y axis follows the limb and whose x axis is the world
/// vertical made orthogonal to it. Near-vertical limbs reuse the previous
/// frame's x axis (or the toward-camera direction on the first frame).
fn limb_frame(dir: Vector3<f64>, previous_x: Option<Vector3<f64>>) -> Matrix3<f64> {
    let a = dir.normalize();
    let vertical = Vector3::y();
    let mut b = vertical - a * vertical.dot(&a);
    if b.norm() < 0.3 {
        let r = previous_x.unwrap_or(-Vector3::z());
        b = r - a * r.dot(&a);
        if b.norm() < 1e-6 {
            let r = Vector3::x();
            b = r - a * r.dot(&a);
        }
    }
    let b = b.normalize();
    let c = b.cross(&a);
    Matrix3::from_columns(&[b, a, c])
}

pub fn generate_synthetic(script: &MotionScript, seed: u64) -> Result<LabeledSequence> {
    if script.keyframes.is_empty() {
        return Err(Error::EmptyScript);
    }
    let positive = |v: f64| v.is_finite() && v > 0.0;
    if !positive(script.period_frames) || !(script.jitter_mm.is_finite() && script.jitter_mm >= 0.0) {
        return Err(Error::InvalidConfig(format!(
            "script {}: period and jitter must be positive",
            script.name
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, script.jitter_mm.max(f64::MIN_POSITIVE))
        .map_err(|e| Error::InvalidConfig(e.to_string()))?;

    let mut keys: Vec<(f64, [Vector3<f64>; NUM_JOINTS])> = script
        .keyframes
        .iter()
        .map(|k| (k.phase.rem_euclid(1.0), keyframe_offsets(k)))
        .collect();
    keys.sort_by(|a, b| a.0.total_cmp(&b.0));

    let frames_wanted = script.frames.max(MIN_FRAMES);
    let base: Vec<Vector3<f64>> = script.base_pose.iter().map(|p| Vector3::from(*p)).collect();
    let pivot = Vector3::from(hip_center_of(&script.base_pose));
    let lean = script.lean_deg.to_radians();
    let (ls, lc) = lean.sin_cos();
    let upper_body = [
        Joint::Head,
        Joint::Neck,
        Joint::Torso,
        Joint::LeftShoulder,
        Joint::LeftElbow,
        Joint::RightShoulder,
        Joint::RightElbow,
        Joint::LeftHand,
        Joint::RightHand,
    ];

    let identity_order: Vec<usize> = (0..keys.len()).collect();
    let mut cycle_orders: Vec<Vec<usize>> = Vec::new();
    let mut previous_x: [Option<Vector3<f64>>; 11] = [None; 11];
    let mut frames = Vec::with_capacity(frames_wanted);

    for f in 0..frames_wanted {
        let cycle_pos = f as f64 / script.period_frames;
        let cycle = cycle_pos.floor() as usize;
        let phase = cycle_pos - cycle_pos.floor();
        let order: &[usize] = if script.shuffle_cycles {
            while cycle_orders.len() <= cycle + 1 {
                // the first slot stays fixed so consecutive cycles join smoothly
                let mut o = identity_order.clone();
                o[1..].shuffle(&mut rng);
                cycle_orders.push(o);
            }
            &cycle_orders[cycle]
        } else {
            &identity_order
        };
        let offsets = interpolate(&keys, order, phase);

        let mut pos: Vec<Vector3<f64>> = (0..NUM_JOINTS).map(|j| base[j] + offsets[j]).collect();
        if lean != 0.0 {
            for j in upper_body {
                let r = pos[j.index()] - pivot;
                let y = r.y * lc + r.z * ls;
                let z = -r.y * ls + r.z * lc;
                pos[j.index()] = pivot + Vector3::new(r.x, y, z);
            }
        }
        if script.jitter_mm > 0.0 {
            for p in pos.iter_mut() {
                for k in 0..3 {
                    p[k] += noise.sample(&mut rng);
                }
            }
        }

        let hip_center = (pos[Joint::LeftHip.index()] + pos[Joint::RightHip.index()]) * 0.5;
        let mut joints: [JointRecord; NUM_JOINTS] =
            std::array::from_fn(|j| JointRecord::new(pos[j], None));
        for (slot, (joint, from, to)) in ORIENTATION_LIMBS.iter().enumerate() {
            let origin = from.map(|j| pos[j.index()]).unwrap_or(hip_center);
            let dir = pos[to.index()] - origin;
            let r = limb_frame(dir, previous_x[slot]);
            previous_x[slot] = Some(r.column(0).into_owned());
            joints[joint.index()] = JointRecord::new(pos[joint.index()], Some(r));
        }
        frames.push(SkeletonFrame {
            frame_index: f as u64,
            joints,
        });
    }
    LabeledSequence::new(frames, script.label.clone(), script.location, "synthetic")
}

/// Standing person facing the camera about 2.5 m away, arms hanging.
pub fn standing_pose() -> [[f64; 3]; NUM_JOINTS] {
    let mut p = [[0.0; 3]; NUM_JOINTS];
    let z = 2500.0;
    let set = |p: &mut [[f64; 3]; NUM_JOINTS], j: Joint, x: f64, y: f64, dz: f64| {
        p[j.index()] = [x, y, z + dz];
    };
    set(&mut p, Joint::Head, 0.0, 620.0, 0.0);
    set(&mut p, Joint::Neck, 0.0, 450.0, 0.0);
    set(&mut p, Joint::Torso, 0.0, 200.0, 0.0);
    set(&mut p, Joint::LeftShoulder, 170.0, 420.0, 0.0);
    set(&mut p, Joint::LeftElbow, 200.0, 150.0, 10.0);
    set(&mut p, Joint::RightShoulder, -170.0, 420.0, 0.0);
    set(&mut p, Joint::RightElbow, -200.0, 150.0, 10.0);
    set(&mut p, Joint::LeftHip, 110.0, 0.0, 0.0);
    set(&mut p, Joint::LeftKnee, 115.0, -430.0, -20.0);
    set(&mut p, Joint::RightHip, -110.0, 0.0, 0.0);
    set(&mut p, Joint::RightKnee, -115.0, -430.0, -20.0);
    set(&mut p, Joint::LeftHand, 215.0, -120.0, -30.0);
    set(&mut p, Joint::RightHand, -215.0, -120.0, -30.0);
    set(&mut p, Joint::LeftFoot, 120.0, -850.0, 0.0);
    set(&mut p, Joint::RightFoot, -120.0, -850.0, 0.0);
    p
}

fn key(phase: f64, offsets: &[(Joint, [f64; 3])]) -> Keyframe {
    Keyframe {
        phase,
        offsets: offsets.to_vec(),
    }
}

fn script(
    name: &str,
    label: SequenceLabel,
    lean_deg: f64,
    period_frames: f64,
    keyframes: Vec<Keyframe>,
) -> MotionScript {
    MotionScript {
        name: name.to_string(),
        label,
        location: Location::Kitchen,
        base_pose: standing_pose(),
        lean_deg,
        keyframes,
        period_frames,
        frames: 300,
        jitter_mm: 4.0,
        shuffle_cycles: false,
    }
}

/// The four scripted desk-scale activities: `raise_cup`, `phone_to_ear`,
/// `chop` and `still`.
pub fn builtin_scripts() -> Vec<MotionScript> {
    use Joint::*;
    let act = |s: &str| SequenceLabel::Activity(s.to_string());
    let cup_up: &[(Joint, [f64; 3])] = &[
        (RightHand, [190.0, 640.0, -160.0]),
        (RightElbow, [-30.0, 90.0, -170.0]),
    ];
    let cup_sip: &[(Joint, [f64; 3])] = &[
        (RightHand, [200.0, 660.0, -140.0]),
        (RightElbow, [-20.0, 120.0, -160.0]),
        (Head, [0.0, -10.0, 25.0]),
    ];
    let raise_cup = script(
        "raise_cup",
        act("raise_cup"),
        0.0,
        120.0,
        vec![key(0.0, &[]), key(0.35, cup_up), key(0.6, cup_sip), key(0.8, &[(RightHand, [60.0, 250.0, -150.0])])],
    );
    let phone_to_ear = script(
        "phone_to_ear",
        act("phone_to_ear"),
        0.0,
        150.0,
        vec![
            key(0.0, &[(RightHand, [95.0, 730.0, 10.0]), (RightElbow, [-70.0, 180.0, -40.0])]),
            key(
                0.5,
                &[
                    (RightHand, [110.0, 715.0, 30.0]),
                    (RightElbow, [-60.0, 170.0, -60.0]),
                    (Head, [-20.0, -5.0, 0.0]),
                    (LeftHand, [-40.0, 60.0, -60.0]),
                ],
            ),
        ],
    );
    let chop_common = |down: bool| -> Vec<(Joint, [f64; 3])> {
        vec![
            (LeftHand, [-130.0, 240.0, -260.0]),
            (LeftElbow, [-30.0, 30.0, -170.0]),
            (RightElbow, [30.0, if down { 20.0 } else { 70.0 }, -170.0]),
            (RightHand, [130.0, if down { 190.0 } else { 330.0 }, -260.0]),
        ]
    };
    let chop = script(
        "chop",
        act("chop"),
        20.0,
        20.0,
        vec![key(0.0, &chop_common(false)), key(0.5, &chop_common(true))],
    );
    let still = script(
        "still",
        act("still"),
        0.0,
        90.0,
        vec![
            key(0.0, &[]),
            key(
                0.5,
                &[
                    (Head, [10.0, 0.0, 0.0]),
                    (Neck, [8.0, 0.0, 0.0]),
                    (LeftHand, [0.0, 0.0, -15.0]),
                    (RightHand, [0.0, 0.0, -15.0]),
                ],
            ),
        ],
    );
    vec![raise_cup, phone_to_ear, chop, still]
}

/// Unscripted movement: a shuffled tour of stretches, bends and reaches.
pub fn random_script() -> MotionScript {
    use Joint::*;
    let both_up: &[(Joint, [f64; 3])] = &[
        (LeftHand, [-60.0, 1000.0, 0.0]),
        (LeftElbow, [-20.0, 500.0, 0.0]),
        (RightHand, [60.0, 1000.0, 0.0]),
        (RightElbow, [20.0, 500.0, 0.0]),
    ];
    let sideways: &[(Joint, [f64; 3])] = &[
        (LeftHand, [420.0, 560.0, 0.0]),
        (LeftElbow, [200.0, 270.0, 0.0]),
        (RightHand, [-420.0, 560.0, 0.0]),
        (RightElbow, [-200.0, 270.0, 0.0]),
    ];
    let bend: &[(Joint, [f64; 3])] = &[
        (Head, [0.0, -250.0, -380.0]),
        (Neck, [0.0, -200.0, -300.0]),
        (Torso, [0.0, -80.0, -150.0]),
        (LeftShoulder, [0.0, -190.0, -290.0]),
        (RightShoulder, [0.0, -190.0, -290.0]),
        (LeftElbow, [0.0, -200.0, -330.0]),
        (RightElbow, [0.0, -200.0, -330.0]),
        (LeftHand, [0.0, -150.0, -400.0]),
        (RightHand, [0.0, -150.0, -400.0]),
    ];
    let step: Vec<(Joint, [f64; 3])> = Joint::ALL.iter().map(|&j| (j, [180.0, 0.0, -100.0])).collect();
    let reach_left: &[(Joint, [f64; 3])] = &[
        (LeftHand, [250.0, 450.0, -300.0]),
        (LeftElbow, [100.0, 250.0, -150.0]),
        (Head, [30.0, 0.0, 0.0]),
    ];
    let hand_face: &[(Joint, [f64; 3])] = &[
        (RightHand, [170.0, 620.0, -200.0]),
        (RightElbow, [-40.0, 80.0, -200.0]),
        (LeftHand, [0.0, 300.0, -250.0]),
    ];
    let mut s = script(
        "wander",
        SequenceLabel::Random,
        0.0,
        75.0,
        vec![
            key(0.0, &[]),
            key(0.17, both_up),
            key(0.33, sideways),
            key(0.5, bend),
            key(0.67, &step),
            key(0.75, reach_left),
            key(0.87, hand_face),
        ],
    );
    s.period_frames = 160.0;
    s.shuffle_cycles = true;
    s
}

/// Every builtin script plus the random script, performed by `subjects`
/// people whose styles derive from `seed`. Subjects are named `subject1`,
/// `subject2`, and so on.
pub fn synthetic_dataset(subjects: usize, seed: u64) -> Result<Vec<LabeledSequence>> {
    let mut scripts = builtin_scripts();
    scripts.push(random_script());
    let mut out = Vec::with_capacity(subjects * scripts.len());
    for s in 0..subjects {
        let family = seed.wrapping_mul(1_000).wrapping_add(s as u64);
        let style = SubjectStyle::from_seed(family);
        for (i, script) in scripts.iter().enumerate() {
            let mut seq = generate_synthetic(&style.apply(script), family.wrapping_mul(100).wrapping_add(i as u64))?;
            seq.subject_id = format!("subject{}", s + 1);
            out.push(seq);
        }
    }
    Ok(out)
}

const LIMBS: [(Joint, Joint, f64); 14] = [
    (Joint::Head, Joint::Neck, 90.0),
    (Joint::Neck, Joint::Torso, 130.0),
    (Joint::Torso, Joint::LeftHip, 120.0),
    (Joint::Torso, Joint::RightHip, 120.0),
    (Joint::LeftShoulder, Joint::RightShoulder, 80.0),
    (Joint::LeftShoulder, Joint::LeftElbow, 50.0),
    (Joint::LeftElbow, Joint::LeftHand, 40.0),
    (Joint::RightShoulder, Joint::RightElbow, 50.0),
    (Joint::RightElbow, Joint::RightHand, 40.0),
    (Joint::LeftHip, Joint::RightHip, 90.0),
    (Joint::LeftHip, Joint::LeftKnee, 70.0),
    (Joint::LeftKnee, Joint::LeftFoot, 55.0),
    (Joint::RightHip, Joint::RightKnee, 70.0),
    (Joint::RightKnee, Joint::RightFoot, 55.0),
];

const BACKGROUND_DEPTH_MM: f64 = 3500.0;

/// Renders a frame as capsule-shaped limbs in front of a flat wall: depth in
/// millimeters, and a shaded 8-bit luminance image.
pub fn render_images(frame: &SkeletonFrame, intrinsics: &CameraIntrinsics) -> FrameImages {
    let (w, h) = (intrinsics.width, intrinsics.height);
    let mut depth = vec![BACKGROUND_DEPTH_MM; w * h];
    let mut rgb: Vec<f64> = (0..w * h)
        .map(|i| (64.0 + 25.0 * ((i / w) as f64 / h as f64)).round())
        .collect();
    for (a, b, radius_mm) in LIMBS {
        let (pa, pb) = (frame.position(a), frame.position(b));
        let (Some(ua), Some(ub)) = (
            intrinsics.project(pa.x, pa.y, pa.z),
            intrinsics.project(pb.x, pb.y, pb.z),
        ) else {
            continue;
        };
        let z_mid = 0.5 * (pa.z + pb.z);
        let r = intrinsics.fx * radius_mm / z_mid.max(1.0);
        let x0 = (ua.0.min(ub.0) - r).floor().max(0.0) as usize;
        let x1 = ((ua.0.max(ub.0) + r).ceil().max(0.0) as usize).min(w);
        let y0 = (ua.1.min(ub.1) - r).floor().max(0.0) as usize;
        let y1 = ((ua.1.max(ub.1) + r).ceil().max(0.0) as usize).min(h);
        let (dx, dy) = (ub.0 - ua.0, ub.1 - ua.1);
        let len2 = (dx * dx + dy * dy).max(1e-9);
        for y in y0..y1 {
            for x in x0..x1 {
                let (px, py) = (x as f64 - ua.0, y as f64 - ua.1);
                let s = ((px * dx + py * dy) / len2).clamp(0.0, 1.0);
                let (ex, ey) = (px - s * dx, py - s * dy);
                let d2 = ex * ex + ey * ey;
                if d2 > r * r {
                    continue;
                }
                let bulge = (1.0 - d2 / (r * r)).sqrt();
                let z = pa.z + s * (pb.z - pa.z) - bulge * radius_mm;
                let i = y * w + x;
                if z < depth[i] {
                    depth[i] = z;
                    rgb[i] = (115.0 + 100.0 * bulge).round();
                }
            }
        }
    }
    FrameImages {
        rgb: GrayGrid::new(w, h, rgb).expect("rendered grid is well formed"),
        depth: GrayGrid::new(w, h, depth.into_iter().map(f64::round).collect()).expect("rendered grid is well formed"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rotation::orthonormality_deviation;

    fn mean_distance(a: &LabeledSequence, b: &LabeledSequence) -> f64 {
        let mut total = 0.0;
        let mut count = 0usize;
        for (fa, fb) in a.frames.iter().zip(&b.frames) {
            for (ja, jb) in fa.joints.iter().zip(&fb.joints) {
                total += (ja.position - jb.position).norm();
                count += 1;
            }
        }
        total / count as f64
    }

    #[test]
    fn zero_noise_constant_pose_is_static() {
        let mut s = builtin_scripts()[3].clone();
        s.jitter_mm = 0.0;
        s.keyframes.truncate(1);
        let seq = generate_synthetic(&s, 9).unwrap();
        assert!(seq.len() >= MIN_FRAMES);
        let first = &seq.frames[0];
        for f in &seq.frames[1..] {
            for j in Joint::ALL {
                assert_eq!(f.position(j), first.position(j));
                assert!((f.rotation(j) - first.rotation(j)).abs().max() < 1e-12);
            }
        }
    }

    #[test]
    fn generation_is_deterministic() {
        for s in builtin_scripts().iter().chain([random_script()].iter()) {
            let a = generate_synthetic(s, 42).unwrap();
            let b = generate_synthetic(s, 42).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn empty_script_rejected() {
        let mut s = builtin_scripts()[0].clone();
        s.keyframes.clear();
        assert!(matches!(generate_synthetic(&s, 0), Err(Error::EmptyScript)));
    }

    #[test]
    fn short_scripts_are_extended_to_three_seconds() {
        let mut s = builtin_scripts()[0].clone();
        s.frames = 10;
        assert_eq!(generate_synthetic(&s, 0).unwrap().len(), MIN_FRAMES);
    }

    #[test]
    fn orientations_are_rotations() {
        for s in builtin_scripts().iter().chain([random_script()].iter()) {
            let seq = generate_synthetic(s, 3).unwrap();
            for f in &seq.frames {
                for j in Joint::ORIENTED {
                    assert!(orthonormality_deviation(&f.rotation(j)) < 1e-9);
                }
            }
        }
    }

    #[test]
    fn scripts_are_separable_by_joint_positions() {
        let scripts = builtin_scripts();
        let seqs: Vec<Vec<LabeledSequence>> = scripts
            .iter()
            .map(|s| (0..3).map(|seed| generate_synthetic(s, seed).unwrap()).collect())
            .collect();
        let mut within = 0.0_f64;
        let mut between = f64::INFINITY;
        for (i, a) in seqs.iter().enumerate() {
            for (j, b) in seqs.iter().enumerate() {
                for (sa, x) in a.iter().enumerate() {
                    for (sb, y) in b.iter().enumerate() {
                        let d = mean_distance(x, y);
                        if i == j && sa != sb {
                            within = within.max(d);
                        } else if i != j {
                            between = between.min(d);
                        }
                    }
                }
            }
        }
        assert!(between > 3.0 * within, "between {between:.2} within {within:.2}");
    }

    #[test]
    fn rendering_puts_the_body_in_front_of_the_wall() {
        let seq = generate_synthetic(&builtin_scripts()[3], 1).unwrap();
        let intr = CameraIntrinsics::default();
        let im = render_images(&seq.frames[0], &intr);
        let torso = seq.frames[0].position(Joint::Torso);
        let (u, v) = intr.project(torso.x, torso.y, torso.z).unwrap();
        assert!(im.depth.get(u as usize, v as usize) < BACKGROUND_DEPTH_MM);
        assert_eq!(im.depth.get(2, 2), BACKGROUND_DEPTH_MM);
    }

    #[test]
    fn dataset_has_every_script_per_subject() {
        let data = synthetic_dataset(2, 5).unwrap();
        assert_eq!(data.len(), 10);
        assert_eq!(data.iter().filter(|s| s.label.is_random()).count(), 2);
        assert_eq!(data[0].subject_id, "subject1");
        assert_eq!(data[9].subject_id, "subject2");
    }

    #[test]
    fn subject_style_changes_geometry_but_not_label() {
        let s = &builtin_scripts()[0];
        let styled = SubjectStyle::from_seed(7).apply(s);
        assert_eq!(styled.label, s.label);
        assert_ne!(styled.base_pose, s.base_pose);
        assert_eq!(SubjectStyle::default().apply(s), *s);
    }
}
