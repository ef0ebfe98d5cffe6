//! Small rotation-matrix helpers shared by the parser, the mirroring code and
//! the feature extractors.

use nalgebra::{Matrix3, Vector3};

/// Largest absolute entry of `RᵀR − I`, combined with `|det R − 1|`.
pub fn orthonormality_deviation(r: &Matrix3<f64>) -> f64 {
    let gram = r.transpose() * r - Matrix3::identity();
    let off = gram.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()));
    off.max((r.determinant() - 1.0).abs())
}

/// Nearest rotation matrix in the Frobenius sense (polar decomposition via SVD).
///
/// A negative determinant is corrected by flipping the singular direction with
/// the smallest singular value, so the result always has `det = +1`.
pub fn nearest_rotation(r: &Matrix3<f64>) -> Matrix3<f64> {
    let svd = r.svd(true, true);
    let (Some(u), Some(v_t)) = (svd.u, svd.v_t) else {
        return Matrix3::identity();
    };
    let mut rot = u * v_t;
    if rot.determinant() < 0.0 {
        // singular values are sorted in decreasing order
        let mut u = u;
        let smallest = (0..3)
            .min_by(|&a, &b| svd.singular_values[a].total_cmp(&svd.singular_values[b]))
            .unwrap_or(2);
        u.column_mut(smallest).neg_mut();
        rot = u * v_t;
    }
    rot
}

/// `M·R·M` with `M = diag(−1, 1, 1)`.
pub fn reflect_x(r: &Matrix3<f64>) -> Matrix3<f64> {
    let m = Matrix3::from_diagonal(&Vector3::new(-1.0, 1.0, 1.0));
    m * r * m
}

/// Rotation by `angle` radians about a unit `axis` (Rodrigues).
pub fn axis_angle(axis: &Vector3<f64>, angle: f64) -> Matrix3<f64> {
    let k = axis.normalize();
    let skew = Matrix3::new(0.0, -k.z, k.y, k.z, 0.0, -k.x, -k.y, k.x, 0.0);
    Matrix3::identity() + skew * angle.sin() + skew * skew * (1.0 - angle.cos())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nearest_rotation_fixes_small_noise() {
        let r = axis_angle(&Vector3::new(1.0, 2.0, 3.0), 0.7);
        let noisy = r + Matrix3::from_fn(|i, j| 1e-3 * ((i * 3 + j) as f64).sin());
        let fixed = nearest_rotation(&noisy);
        assert!(orthonormality_deviation(&fixed) < 1e-12);
        assert!((fixed - r).abs().max() < 1e-2);
    }

    #[test]
    fn nearest_rotation_of_reflection_has_positive_determinant() {
        let refl = Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, -1.0));
        let fixed = nearest_rotation(&refl);
        assert!((fixed.determinant() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn reflection_conjugation_is_an_involution() {
        let r = axis_angle(&Vector3::new(0.3, -1.0, 0.2), 1.1);
        assert!((reflect_x(&reflect_x(&r)) - r).abs().max() < 1e-15);
        assert!((reflect_x(&r).determinant() - 1.0).abs() < 1e-12);
    }
}
