//! Yaw angle arithmetic. All angles are radians about the world z axis.

use std::f64::consts::PI;

/// Wrap an angle into `[-pi, pi)`.
pub fn wrap(a: f64) -> f64 {
    let r = (a + PI).rem_euclid(2.0 * PI) - PI;
    // rem_euclid can land on +PI through rounding; keep the interval half-open.
    if r >= PI {
        -PI
    } else {
        r
    }
}

/// Absolute wrapped difference in `[0, pi]`.
pub fn abs_diff(a: f64, b: f64) -> f64 {
    wrap(a - b).abs()
}

/// Misalignment folded by the cube's 4-fold symmetry: result in `[0, pi/4]`.
pub fn quarter_fold(diff: f64) -> f64 {
    let m = wrap(diff).abs() % (PI / 2.0);
    m.min(PI / 2.0 - m)
}

/// Signed version of [`quarter_fold`], in `(-pi/4, pi/4]`: the shortest
/// rotation that aligns a gripper yaw with one of the cube's four faces.
pub fn quarter_fold_signed(diff: f64) -> f64 {
    let mut m = wrap(diff) % (PI / 2.0);
    if m > PI / 4.0 {
        m -= PI / 2.0;
    } else if m <= -PI / 4.0 {
        m += PI / 2.0;
    }
    m
}
