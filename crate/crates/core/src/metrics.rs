//! Registration error metrics.

use nalgebra::Matrix3;
#[allow(unused_imports)]
use num_traits::Float;

use crate::geometry::SimilarityTransform;

/// Euler angles `(z, y, x)` in degrees with `r = Rz·Ry·Rx`, each in `(−180, 180]`.
pub fn euler_zyx_deg(r: &Matrix3<f64>) -> [f64; 3] {
    let sy = (-r[(2, 0)]).clamp(-1.0, 1.0);
    let y = sy.asin();
    let (z, x) = if sy.abs() < 1.0 - 1e-12 {
        (r[(1, 0)].atan2(r[(0, 0)]), r[(2, 1)].atan2(r[(2, 2)]))
    } else {
        // gimbal lock: put the whole in-plane angle on z
        ((-r[(0, 1)]).atan2(r[(1, 1)]), 0.0)
    };
    [wrap_deg(z.to_degrees()), wrap_deg(y.to_degrees()), wrap_deg(x.to_degrees())]
}

fn wrap_deg(a: f64) -> f64 {
    let w = a % 360.0;
    if w > 180.0 {
        w - 360.0
    } else if w <= -180.0 {
        w + 360.0
    } else {
        w
    }
}

fn angle_rms(r: &Matrix3<f64>) -> f64 {
    let e = euler_zyx_deg(r);
    ((e[0] * e[0] + e[1] * e[1] + e[2] * e[2]) / 3.0).sqrt()
}

/// RMS of the Euler angles of the residual rotation `R_est·R_truthᵀ`, in
/// degrees.
///
/// Euler angles of a rotation and of its inverse differ in general, so the
/// mean square is averaged over the residual and its transpose; this makes
/// the metric symmetric in its arguments.
pub fn rotation_rmse(estimated: &SimilarityTransform, truth: &SimilarityTransform) -> f64 {
    let residual = estimated.rotation * truth.rotation.transpose();
    let a = angle_rms(&residual);
    let b = angle_rms(&residual.transpose());
    ((a * a + b * b) / 2.0).sqrt()
}

/// Frobenius norm of the difference of the homogeneous matrices.
pub fn fnorm_error(estimated: &SimilarityTransform, truth: &SimilarityTransform) -> f64 {
    (estimated.to_homogeneous() - truth.to_homogeneous()).norm()
}
