//! Histogram-of-oriented-gradients descriptors on RGB (luminance) and depth
//! grids.
//!
//! One descriptor covers a bounding box split into 2×2 spatial cells with 8
//! unsigned orientation bins each (32 values). Bin `b` is centered on
//! `b·π/8`; each pixel votes its gradient magnitude, split linearly between
//! the two nearest bins. The 32-vector is L2-normalized as a single block.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::skeleton_io::{Joint, SkeletonFrame};

pub const CELLS: usize = 2;
pub const BINS: usize = 8;
pub const DESCRIPTOR_LEN: usize = CELLS * CELLS * BINS;
pub const SIMPLE_HOG_LEN: usize = 2 * DESCRIPTOR_LEN;
pub const SKELETAL_HOG_LEN: usize = 4 * 2 * DESCRIPTOR_LEN;

const MIN_BOX_SIDE: usize = 4;
const NORM_EPS: f64 = 1e-6;
const BOX_PADDING: f64 = 0.2;

/// Row-major grid of intensities.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayGrid {
    width: usize,
    height: usize,
    values: Vec<f64>,
}

impl GrayGrid {
    pub fn new(width: usize, height: usize, values: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 || values.len() != width * height {
            return Err(Error::InvalidGrid(format!(
                "{} values for a {width}x{height} grid",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidGrid("non-finite value".into()));
        }
        Ok(Self {
            width,
            height,
            values,
        })
    }

    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> f64) -> Self {
        let mut values = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                values.push(f(x, y));
            }
        }
        Self {
            width,
            height,
            values,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.values[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, v: f64) {
        self.values[y * self.width + x] = v;
    }
}

/// Half-open pixel rectangle `[x0, x1) × [y0, y1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub x0: usize,
    pub y0: usize,
    pub x1: usize,
    pub y1: usize,
}

impl BoundingBox {
    pub fn width(&self) -> usize {
        self.x1.saturating_sub(self.x0)
    }

    pub fn height(&self) -> usize {
        self.y1.saturating_sub(self.y0)
    }

    pub fn whole(grid: &GrayGrid) -> Self {
        Self {
            x0: 0,
            y0: 0,
            x1: grid.width(),
            y1: grid.height(),
        }
    }

    /// Smallest pixel box covering the points, padded by 20% of the longer
    /// side on every side and clamped to the image. Sides shorter than the
    /// descriptor minimum are widened about their center, staying inside the
    /// image whenever it is large enough.
    pub fn around(points: &[(f64, f64)], width: usize, height: usize) -> Self {
        let (mut umin, mut umax) = (f64::INFINITY, f64::NEG_INFINITY);
        let (mut vmin, mut vmax) = (f64::INFINITY, f64::NEG_INFINITY);
        for &(u, v) in points {
            umin = umin.min(u);
            umax = umax.max(u);
            vmin = vmin.min(v);
            vmax = vmax.max(v);
        }
        let pad = BOX_PADDING * (umax - umin).max(vmax - vmin);
        let clamp = |v: f64, hi: usize| v.clamp(0.0, hi as f64) as usize;
        let (x0, x1) = widen(clamp((umin - pad).floor(), width), clamp((umax + pad).ceil(), width), width);
        let (y0, y1) = widen(clamp((vmin - pad).floor(), height), clamp((vmax + pad).ceil(), height), height);
        Self { x0, y0, x1, y1 }
    }

    pub fn contains(&self, u: f64, v: f64) -> bool {
        u >= self.x0 as f64 && u <= self.x1 as f64 && v >= self.y0 as f64 && v <= self.y1 as f64
    }
}

/// Pinhole intrinsics in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
}

impl Default for CameraIntrinsics {
    fn default() -> Self {
        Self {
            fx: 575.0,
            fy: 575.0,
            cx: 320.0,
            cy: 240.0,
            width: 640,
            height: 480,
        }
    }
}

impl CameraIntrinsics {
    /// Projects a sensor-frame point (millimeters) to pixel coordinates.
    pub fn project(&self, x: f64, y: f64, z: f64) -> Option<(f64, f64)> {
        (z > 0.0).then(|| (self.fx * x / z + self.cx, self.fy * y / z + self.cy))
    }

    fn project_joint(&self, frame: &SkeletonFrame, joint: Joint) -> Result<(f64, f64)> {
        let p = frame.position(joint);
        self.project(p.x, p.y, p.z)
            .ok_or(Error::JointBehindCamera(joint.name()))
    }
}

fn widen(lo: usize, hi: usize, limit: usize) -> (usize, usize) {
    if hi - lo >= MIN_BOX_SIDE || limit < MIN_BOX_SIDE {
        return (lo, hi);
    }
    let start = ((lo + hi) / 2).saturating_sub(MIN_BOX_SIDE / 2).min(limit - MIN_BOX_SIDE);
    (start, start + MIN_BOX_SIDE)
}

fn check_box(grid: &GrayGrid, b: &BoundingBox) -> Result<()> {
    let ok = b.x0 < b.x1
        && b.y0 < b.y1
        && b.x1 <= grid.width()
        && b.y1 <= grid.height()
        && b.width() >= MIN_BOX_SIDE
        && b.height() >= MIN_BOX_SIDE;
    if ok {
        Ok(())
    } else {
        Err(Error::DegenerateBox {
            x0: b.x0,
            y0: b.y0,
            x1: b.x1,
            y1: b.y1,
            width: grid.width(),
            height: grid.height(),
        })
    }
}

/// 32-value descriptor of the box. Gradients are centered differences inside
/// the box with edge replication at its border.
pub fn hog_descriptor(grid: &GrayGrid, bbox: &BoundingBox) -> Result<[f64; DESCRIPTOR_LEN]> {
    check_box(grid, bbox)?;
    let (w, h) = (bbox.width(), bbox.height());
    let at = |x: isize, y: isize| {
        let cx = x.clamp(0, w as isize - 1) as usize;
        let cy = y.clamp(0, h as isize - 1) as usize;
        grid.get(bbox.x0 + cx, bbox.y0 + cy)
    };
    let bin_width = std::f64::consts::PI / BINS as f64;
    let mut hist = [0.0; DESCRIPTOR_LEN];
    for y in 0..h {
        for x in 0..w {
            let (xi, yi) = (x as isize, y as isize);
            let gx = 0.5 * (at(xi + 1, yi) - at(xi - 1, yi));
            let gy = 0.5 * (at(xi, yi + 1) - at(xi, yi - 1));
            let mag = gx.hypot(gy);
            if mag == 0.0 {
                continue;
            }
            let theta = gy.atan2(gx).rem_euclid(std::f64::consts::PI);
            let pos = theta / bin_width;
            let lower = pos.floor();
            let frac = pos - lower;
            let b0 = (lower as usize) % BINS;
            let b1 = (b0 + 1) % BINS;
            let cell = (y * CELLS / h) * CELLS + (x * CELLS / w);
            hist[cell * BINS + b0] += mag * (1.0 - frac);
            hist[cell * BINS + b1] += mag * frac;
        }
    }
    let norm = hist.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm > NORM_EPS {
        for v in hist.iter_mut() {
            *v /= norm;
        }
    } else {
        hist = [0.0; DESCRIPTOR_LEN];
    }
    Ok(hist)
}

/// The descriptor a horizontally flipped box would produce: cell columns swap
/// and orientation bin `b` becomes `(8 − b) mod 8`.
pub fn mirror_descriptor(d: &[f64]) -> Vec<f64> {
    assert_eq!(d.len() % DESCRIPTOR_LEN, 0);
    let mut out = vec![0.0; d.len()];
    for (block_in, block_out) in d.chunks(DESCRIPTOR_LEN).zip(out.chunks_mut(DESCRIPTOR_LEN)) {
        for cy in 0..CELLS {
            for cx in 0..CELLS {
                let src = cy * CELLS + cx;
                let dst = cy * CELLS + (CELLS - 1 - cx);
                for b in 0..BINS {
                    block_out[dst * BINS + (BINS - b) % BINS] = block_in[src * BINS + b];
                }
            }
        }
    }
    out
}

/// Replaces zero depth readings with the nearest valid value in the same row
/// (the left neighbor wins ties). Rows without any valid value are unchanged.
pub fn fill_depth_holes(depth: &GrayGrid) -> GrayGrid {
    let mut out = depth.clone();
    let w = depth.width();
    for y in 0..depth.height() {
        let mut left: Vec<Option<usize>> = vec![None; w];
        let mut last = None;
        for (x, slot) in left.iter_mut().enumerate() {
            if depth.get(x, y) != 0.0 {
                last = Some(x);
            }
            *slot = last;
        }
        let mut next = None;
        for x in (0..w).rev() {
            if depth.get(x, y) != 0.0 {
                next = Some(x);
                continue;
            }
            let source = match (left[x], next) {
                (Some(l), Some(r)) => Some(if x - l <= r - x { l } else { r }),
                (l, r) => l.or(r),
            };
            if let Some(s) = source {
                out.set(x, y, depth.get(s, y));
            }
        }
    }
    out
}

pub const PART_NAMES: [&str; 4] = ["head", "torso", "left_arm", "right_arm"];

fn part_joints(part: usize) -> &'static [Joint] {
    use Joint::*;
    match part {
        0 => &[Head, Neck],
        1 => &[Neck, Torso, LeftShoulder, RightShoulder, LeftHip, RightHip],
        2 => &[LeftShoulder, LeftElbow, LeftHand],
        _ => &[RightShoulder, RightElbow, RightHand],
    }
}

/// Head, torso, left-arm and right-arm boxes from projected joints.
pub fn skeletal_bboxes(frame: &SkeletonFrame, intrinsics: &CameraIntrinsics) -> Result<[BoundingBox; 4]> {
    let mut boxes = [BoundingBox {
        x0: 0,
        y0: 0,
        x1: 0,
        y1: 0,
    }; 4];
    for (part, b) in boxes.iter_mut().enumerate() {
        let pts = part_joints(part)
            .iter()
            .map(|&j| intrinsics.project_joint(frame, j))
            .collect::<Result<Vec<_>>>()?;
        *b = BoundingBox::around(&pts, intrinsics.width, intrinsics.height);
    }
    Ok(boxes)
}

/// Box around every projected joint of the person.
pub fn person_bbox(frame: &SkeletonFrame, intrinsics: &CameraIntrinsics) -> Result<BoundingBox> {
    let pts = Joint::ALL
        .iter()
        .map(|&j| intrinsics.project_joint(frame, j))
        .collect::<Result<Vec<_>>>()?;
    Ok(BoundingBox::around(&pts, intrinsics.width, intrinsics.height))
}

pub fn simple_hog(rgb: &GrayGrid, depth: &GrayGrid, person_box: &BoundingBox) -> Result<Vec<f64>> {
    let depth = fill_depth_holes(depth);
    let mut out = Vec::with_capacity(SIMPLE_HOG_LEN);
    out.extend(hog_descriptor(rgb, person_box)?);
    out.extend(hog_descriptor(&depth, person_box)?);
    Ok(out)
}

/// Four body-part boxes × (RGB, depth) × 32 values, parts ordered head,
/// torso, left arm, right arm.
pub fn skeletal_hog(
    rgb: &GrayGrid,
    depth: &GrayGrid,
    frame: &SkeletonFrame,
    intrinsics: &CameraIntrinsics,
) -> Result<Vec<f64>> {
    let depth = fill_depth_holes(depth);
    let mut out = Vec::with_capacity(SKELETAL_HOG_LEN);
    for b in skeletal_bboxes(frame, intrinsics)? {
        out.extend(hog_descriptor(rgb, &b)?);
        out.extend(hog_descriptor(&depth, &b)?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn norm(v: &[f64]) -> f64 {
        v.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    #[test]
    fn tiny_boxes_grow_to_the_minimum_side_inside_the_image() {
        let b = BoundingBox::around(&[(350.0, 327.0), (351.0, 327.5)], 640, 480);
        assert!(b.width() >= MIN_BOX_SIDE && b.height() >= MIN_BOX_SIDE);
        assert!(b.contains(350.0, 327.0) && b.contains(351.0, 327.5));
        let edge = BoundingBox::around(&[(700.0, -5.0)], 640, 480);
        assert_eq!((edge.x0, edge.x1, edge.y0, edge.y1), (636, 640, 0, 4));
    }

    #[test]
    fn constant_box_gives_zeros() {
        let g = GrayGrid::from_fn(10, 10, |_, _| 7.0);
        let d = hog_descriptor(&g, &BoundingBox::whole(&g)).unwrap();
        assert!(d.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn vertical_step_edge_votes_horizontal_gradient_bin() {
        // columns 0..4 are 0 and 4..8 are 1: centered differences give
        // gx = 0.5 at columns 3 and 4, zero elsewhere, gy = 0 everywhere
        let g = GrayGrid::from_fn(8, 8, |x, _| if x < 4 { 0.0 } else { 1.0 });
        let d = hog_descriptor(&g, &BoundingBox::whole(&g)).unwrap();
        for cell in 0..4 {
            assert!((d[cell * BINS] - 0.5).abs() < 1e-12);
            for b in 1..BINS {
                assert_eq!(d[cell * BINS + b], 0.0);
            }
        }
        let bin0_mass: f64 = (0..4).map(|c| d[c * BINS]).sum();
        assert!(bin0_mass > 0.5);
        assert!((norm(&d) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn horizontal_edge_votes_vertical_bin() {
        let g = GrayGrid::from_fn(8, 8, |_, y| if y < 4 { 0.0 } else { 3.0 });
        let d = hog_descriptor(&g, &BoundingBox::whole(&g)).unwrap();
        for cell in 0..4 {
            assert!((d[cell * BINS + 4] - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn diagonal_gradient_splits_between_bins() {
        // interior theta = atan2(1, 2) lies between bins 1 and 2, nearer 1;
        // replicated borders only add votes to bins 0 to 2
        let g = GrayGrid::from_fn(8, 8, |x, y| 2.0 * x as f64 + y as f64);
        let d = hog_descriptor(&g, &BoundingBox::whole(&g)).unwrap();
        for cell in 0..4 {
            let c = &d[cell * BINS..(cell + 1) * BINS];
            assert!(c[1] > c[2] && c[2] > 0.0);
            assert!(c[3..].iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn degenerate_boxes_rejected() {
        let g = GrayGrid::from_fn(10, 10, |x, _| x as f64);
        for b in [
            BoundingBox { x0: 0, y0: 0, x1: 3, y1: 10 },
            BoundingBox { x0: 5, y0: 0, x1: 5, y1: 10 },
            BoundingBox { x0: 0, y0: 0, x1: 11, y1: 10 },
        ] {
            assert!(matches!(hog_descriptor(&g, &b), Err(Error::DegenerateBox { .. })));
        }
    }

    #[test]
    fn projection_of_optical_axis_and_offset() {
        let k = CameraIntrinsics::default();
        assert_eq!(k.project(0.0, 0.0, 1000.0), Some((320.0, 240.0)));
        let (u, _) = k.project(100.0, 0.0, 1000.0).unwrap();
        assert!((u - 377.5).abs() < 1e-12);
        assert_eq!(k.project(0.0, 0.0, -5.0), None);
    }

    #[test]
    fn depth_holes_take_nearest_valid_neighbor() {
        let g = GrayGrid::new(6, 1, vec![0.0, 5.0, 0.0, 0.0, 0.0, 9.0]).unwrap();
        let f = fill_depth_holes(&g);
        assert_eq!(f.values(), &[5.0, 5.0, 5.0, 5.0, 9.0, 9.0]);
        let g = GrayGrid::new(3, 1, vec![0.0, 0.0, 0.0]).unwrap();
        assert_eq!(fill_depth_holes(&g), g);
    }

    #[test]
    fn mirror_descriptor_is_involution() {
        let v: Vec<f64> = (0..64).map(|i| i as f64).collect();
        assert_eq!(mirror_descriptor(&mirror_descriptor(&v)), v);
    }

    #[test]
    fn grid_rejects_bad_shapes() {
        assert!(GrayGrid::new(2, 2, vec![0.0; 3]).is_err());
        assert!(GrayGrid::new(1, 1, vec![f64::NAN]).is_err());
    }
}
