//! Dense per-step reward: reach (position + orientation) shaping plus
//! grasp / lift / success bonuses. All functions are pure.

use serde::Serialize;

use crate::angles;
use crate::config::EnvConfig;

/// Length scale of the position shaping term: `1 - tanh(1.66 * dist)`.
pub const REACH_DISTANCE_SCALE: f64 = 1.66;
/// Bonus while both fingers touch the cube.
pub const GRASP_BONUS: f64 = 0.5;
/// Bonus while touching and lifted at least 1 cm off the plane.
pub const LIFT_BONUS: f64 = 2.0;
/// Bonus when the cube is grasped and at least 20 cm off the plane.
pub const SUCCESS_BONUS: f64 = 5.0;

/// Per-term reward decomposition. `total` is always the sum of the parts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RewardBreakdown {
    pub reach_pos: f64,
    pub reach_ori: f64,
    pub grasp: f64,
    pub lift: f64,
    pub success: f64,
    pub total: f64,
}

/// Heights that gate the lift and success bonuses.
#[derive(Debug, Clone, Copy)]
pub struct LiftThresholds {
    pub cube_side: f64,
    pub lift_partial: f64,
    pub lift_success: f64,
}

impl From<&EnvConfig> for LiftThresholds {
    fn from(cfg: &EnvConfig) -> Self {
        LiftThresholds {
            cube_side: cfg.cube_side,
            lift_partial: cfg.lift_partial,
            lift_success: cfg.lift_success,
        }
    }
}

/// Position shaping: 1 at zero distance, strictly decreasing, in (0, 1].
pub fn reach_position(dist: f64) -> f64 {
    1.0 - (REACH_DISTANCE_SCALE * dist).tanh()
}

/// Orientation shaping on the wrapped yaw difference in `[0, pi]`.
///
/// The raw difference is wrapped so equivalent headings a full turn apart
/// score identically; the cube's 4-fold symmetry is deliberately not applied
/// here (the contact predicate handles it).
pub fn reach_orientation(psi_cube: f64, psi_g: f64) -> f64 {
    1.0 - angles::abs_diff(psi_cube, psi_g).tanh()
}

/// Sum of all five terms for a post-step state.
pub fn step_reward(
    dist: f64,
    psi_cube: f64,
    psi_g: f64,
    contact: bool,
    cube_z: f64,
    attached: bool,
    thresholds: &LiftThresholds,
) -> RewardBreakdown {
    let reach_pos = reach_position(dist);
    let reach_ori = reach_orientation(psi_cube, psi_g);
    let grasp = if contact { GRASP_BONUS } else { 0.0 };
    let lifted = cube_z >= thresholds.cube_side / 2.0 + thresholds.lift_partial;
    let lift = if contact && lifted { LIFT_BONUS } else { 0.0 };
    let success = if attached && cube_z >= thresholds.lift_success {
        SUCCESS_BONUS
    } else {
        0.0
    };
    RewardBreakdown {
        reach_pos,
        reach_ori,
        grasp,
        lift,
        success,
        total: reach_pos + reach_ori + grasp + lift + success,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    // High-precision evaluations of the shaping terms, frozen from an
    // independent 30-digit computation of 1 - tanh(x).
    const REACH_POS_AT_0_5: f64 = 0.319523993887338107661278381959;
    const REACH_POS_AT_2_0: f64 = 0.00261064230705354329458663415461;
    const REACH_ORI_AT_QUARTER_PI: f64 = 0.344205797367327564346878857308;
    const REACH_ORI_WRAPPED_0_2: f64 = 0.802624679775095999261842681189;

    fn thresholds() -> LiftThresholds {
        LiftThresholds {
            cube_side: 0.05,
            lift_partial: 0.01,
            lift_success: 0.20,
        }
    }

    #[test]
    fn reach_position_point_values() {
        assert_eq!(reach_position(0.0), 1.0);
        assert!((reach_position(0.5) - REACH_POS_AT_0_5).abs() < 1e-12);
        assert!((reach_position(2.0) - REACH_POS_AT_2_0).abs() < 1e-12);
    }

    #[test]
    fn reach_orientation_point_values() {
        assert_eq!(reach_orientation(1.3, 1.3), 1.0);
        assert!((reach_orientation(PI / 4.0, 0.0) - REACH_ORI_AT_QUARTER_PI).abs() < 1e-12);
        // Angles on opposite sides of the wrap boundary differ by 0.2.
        let r = reach_orientation(PI - 0.1, -PI + 0.1);
        assert!((r - REACH_ORI_WRAPPED_0_2).abs() < 1e-12, "{r}");
    }

    #[test]
    fn reach_terms_strictly_decrease() {
        let mut prev = reach_position(0.0);
        for k in 1..200 {
            let v = reach_position(0.01 * k as f64);
            assert!(v < prev);
            assert!(v > 0.0);
            prev = v;
        }
        let mut prev = reach_orientation(0.0, 0.0);
        for k in 1..100 {
            let v = reach_orientation(0.01 * PI * k as f64 / 2.0, 0.0);
            assert!(v < prev);
            prev = v;
        }
    }

    #[test]
    fn contact_on_ground_totals_two_and_a_half() {
        let b = step_reward(0.0, 0.7, 0.7, true, 0.025, false, &thresholds());
        assert_eq!(b.reach_pos, 1.0);
        assert_eq!(b.reach_ori, 1.0);
        assert_eq!(b.grasp, GRASP_BONUS);
        assert_eq!(b.lift, 0.0);
        assert_eq!(b.success, 0.0);
        assert_eq!(b.total, 2.5);
    }

    #[test]
    fn all_terms_active_total_nine_and_a_half() {
        let b = step_reward(0.0, -0.3, -0.3, true, 0.25, true, &thresholds());
        assert_eq!(b.total, 9.5);
        assert_eq!(b.lift, LIFT_BONUS);
        assert_eq!(b.success, SUCCESS_BONUS);
    }

    #[test]
    fn shaping_only_sum_matches_oracle() {
        let b = step_reward(0.5, PI / 4.0, 0.0, false, 0.025, false, &thresholds());
        let expect = REACH_POS_AT_0_5 + REACH_ORI_AT_QUARTER_PI;
        assert!((b.total - expect).abs() < 1e-12, "{} vs {expect}", b.total);
    }

    #[test]
    fn total_is_sum_of_parts_and_bounded() {
        let th = thresholds();
        for i in 0..50 {
            for (contact, attached) in [(false, false), (true, false), (true, true)] {
                let dist = 0.07 * i as f64;
                let cube_z = 0.01 * i as f64;
                let b = step_reward(dist, 0.3, -1.2, contact, cube_z, attached, &th);
                let sum = b.reach_pos + b.reach_ori + b.grasp + b.lift + b.success;
                assert!((b.total - sum).abs() < 1e-12);
                assert!(b.total > 0.0);
                assert!(b.total <= 9.5);
            }
        }
    }

    #[test]
    fn breakdown_serializes_per_term() {
        let b = step_reward(0.1, 0.2, 0.2, true, 0.035, false, &thresholds());
        let json = serde_json::to_value(b).unwrap();
        for key in ["reach_pos", "reach_ori", "grasp", "lift", "success", "total"] {
            assert!(json.get(key).is_some(), "missing breakdown key {key}");
        }
    }

    #[test]
    fn lift_requires_height_and_contact() {
        let th = thresholds();
        // 1 cm above resting height: cube center at side/2 + 0.01.
        let at_threshold = step_reward(0.0, 0.0, 0.0, true, 0.035, false, &th);
        assert_eq!(at_threshold.lift, LIFT_BONUS);
        let below = step_reward(0.0, 0.0, 0.0, true, 0.0349, false, &th);
        assert_eq!(below.lift, 0.0);
        let no_contact = step_reward(0.0, 0.0, 0.0, false, 0.25, false, &th);
        assert_eq!(no_contact.lift, 0.0);
        assert_eq!(no_contact.grasp, 0.0);
    }
}
