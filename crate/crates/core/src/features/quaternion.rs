use nalgebra::Matrix3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rotation::orthonormality_deviation;

const ROTATION_TOLERANCE: f64 = 1e-6;
const HALF_TURN_EPS: f64 = 1e-12;

/// Unit quaternion in the half-space convention: `w ≥ 0`, and when `w = 0`
/// the first nonzero of `(x, y, z)` is positive. Components within 1e-12 of
/// zero count as zero for this choice.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quaternion {
    pub w: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Quaternion {
    pub const IDENTITY: Quaternion = Quaternion {
        w: 1.0,
        x: 0.0,
        y: 0.0,
        z: 0.0,
    };

    pub fn to_array(self) -> [f64; 4] {
        [self.w, self.x, self.y, self.z]
    }

    pub fn norm(&self) -> f64 {
        (self.w * self.w + self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    /// Rotation angle in radians, `2·acos(w)`.
    pub fn angle(&self) -> f64 {
        2.0 * self.w.clamp(-1.0, 1.0).acos()
    }

    /// `w > 0`, or for half turns (`|w|` below round-off) the first
    /// non-negligible vector component is positive.
    pub fn is_half_space(&self) -> bool {
        if self.w > HALF_TURN_EPS {
            return true;
        }
        if self.w < -HALF_TURN_EPS {
            return false;
        }
        [self.x, self.y, self.z]
            .into_iter()
            .find(|v| v.abs() > HALF_TURN_EPS)
            .is_some_and(|v| v > 0.0)
    }

    fn canonical(self) -> Self {
        let n = self.norm();
        let q = Quaternion {
            w: self.w / n,
            x: self.x / n,
            y: self.y / n,
            z: self.z / n,
        };
        if q.is_half_space() {
            q
        } else {
            Quaternion {
                w: -q.w,
                x: -q.x,
                y: -q.y,
                z: -q.z,
            }
        }
    }

    pub fn to_matrix(&self) -> Matrix3<f64> {
        let Quaternion { w, x, y, z } = *self;
        Matrix3::new(
            1.0 - 2.0 * (y * y + z * z),
            2.0 * (x * y - w * z),
            2.0 * (x * z + w * y),
            2.0 * (x * y + w * z),
            1.0 - 2.0 * (x * x + z * z),
            2.0 * (y * z - w * x),
            2.0 * (x * z - w * y),
            2.0 * (y * z + w * x),
            1.0 - 2.0 * (x * x + y * y),
        )
    }
}

/// Converts a rotation matrix to its half-space quaternion (Shepperd's method,
/// branching on the largest of the trace and the diagonal).
pub fn rotation_to_halfspace_quaternion(r: &Matrix3<f64>) -> Result<Quaternion> {
    let deviation = orthonormality_deviation(r);
    if deviation.is_nan() || deviation > ROTATION_TOLERANCE {
        return Err(Error::InvalidRotation(deviation));
    }
    let (m00, m11, m22) = (r[(0, 0)], r[(1, 1)], r[(2, 2)]);
    let trace = m00 + m11 + m22;
    let q = if trace >= m00 && trace >= m11 && trace >= m22 {
        let s = 2.0 * (1.0 + trace).sqrt();
        Quaternion {
            w: 0.25 * s,
            x: (r[(2, 1)] - r[(1, 2)]) / s,
            y: (r[(0, 2)] - r[(2, 0)]) / s,
            z: (r[(1, 0)] - r[(0, 1)]) / s,
        }
    } else if m00 >= m11 && m00 >= m22 {
        let s = 2.0 * (1.0 + m00 - m11 - m22).sqrt();
        Quaternion {
            w: (r[(2, 1)] - r[(1, 2)]) / s,
            x: 0.25 * s,
            y: (r[(0, 1)] + r[(1, 0)]) / s,
            z: (r[(0, 2)] + r[(2, 0)]) / s,
        }
    } else if m11 >= m22 {
        let s = 2.0 * (1.0 - m00 + m11 - m22).sqrt();
        Quaternion {
            w: (r[(0, 2)] - r[(2, 0)]) / s,
            x: (r[(0, 1)] + r[(1, 0)]) / s,
            y: 0.25 * s,
            z: (r[(1, 2)] + r[(2, 1)]) / s,
        }
    } else {
        let s = 2.0 * (1.0 - m00 - m11 + m22).sqrt();
        Quaternion {
            w: (r[(1, 0)] - r[(0, 1)]) / s,
            x: (r[(0, 2)] + r[(2, 0)]) / s,
            y: (r[(1, 2)] + r[(2, 1)]) / s,
            z: 0.25 * s,
        }
    };
    Ok(q.canonical())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rotation::axis_angle;
    use nalgebra::Vector3;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

    #[test]
    fn identity() {
        let q = rotation_to_halfspace_quaternion(&Matrix3::identity()).unwrap();
        assert_eq!(q, Quaternion::IDENTITY);
    }

    #[test]
    fn half_turn_about_z_takes_positive_axis() {
        let r = Matrix3::from_diagonal(&Vector3::new(-1.0, -1.0, 1.0));
        let q = rotation_to_halfspace_quaternion(&r).unwrap();
        assert_eq!(q.to_array(), [0.0, 0.0, 0.0, 1.0]);
        // the same rotation written about -z
        let r2 = axis_angle(&-Vector3::z(), PI);
        let q2 = rotation_to_halfspace_quaternion(&r2).unwrap();
        assert!(q2.is_half_space());
        assert!((q2.z - 1.0).abs() < 1e-12 && q2.w.abs() < 1e-12);
    }

    #[test]
    fn quarter_turn_about_z() {
        let r = axis_angle(&Vector3::z(), FRAC_PI_2);
        let q = rotation_to_halfspace_quaternion(&r).unwrap();
        let (s, c) = FRAC_PI_4.sin_cos();
        assert!((q.w - c).abs() < 1e-12);
        assert!((q.z - s).abs() < 1e-12);
        assert!(q.x.abs() < 1e-12 && q.y.abs() < 1e-12);
        assert!((q.to_matrix() - r).abs().max() < 1e-12);
    }

    #[test]
    fn non_rotation_rejected() {
        let r = Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, -1.0));
        assert!(matches!(
            rotation_to_halfspace_quaternion(&r),
            Err(Error::InvalidRotation(_))
        ));
        let r = Matrix3::identity() * 1.01;
        assert!(rotation_to_halfspace_quaternion(&r).is_err());
    }

    #[test]
    fn angle_of_quarter_turn() {
        let q = rotation_to_halfspace_quaternion(&axis_angle(&Vector3::x(), 0.5)).unwrap();
        assert!((q.angle() - 0.5).abs() < 1e-12);
    }
}
