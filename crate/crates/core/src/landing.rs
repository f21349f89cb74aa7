//! Plane estimation from contact points, heading/incline extraction, and
//! slope-matched landing plan generation.
//!
//! Normals are canonicalized to point upward (negative world z in NED) so
//! estimates are deterministic regardless of point ordering; the incline is
//! insensitive to the flip because it uses the absolute vertical component.

use crate::kinematics::{inverse_kinematics, ArmParams};
use crate::se3::{wrap_angle, Vec3};
use std::f64::consts::FRAC_PI_2;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LandingError {
    #[error("contact points are collinear or coincident (|r1×r2| = {cross_norm:.3e})")]
    CollinearPoints { cross_norm: f64 },
    #[error("contact separation is parallel to the body x-axis (angle {angle:.3e} rad)")]
    ParallelDegeneracy { angle: f64 },
    #[error("incline {alpha_deg:.2}° exceeds the maximum landable {max_deg:.2}°")]
    InclineTooSteep { alpha_deg: f64, max_deg: f64 },
    #[error("arm {arm_id} end-effector setpoint {target:?} is outside the arm workspace")]
    SetpointUnreachable { arm_id: u8, target: [f64; 3] },
}

/// How many contact points constrained the plane.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlaneSource {
    TwoPoint,
    ThreePoint,
}

impl std::fmt::Display for PlaneSource {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            PlaneSource::TwoPoint => write!(f, "2-point"),
            PlaneSource::ThreePoint => write!(f, "3-point"),
        }
    }
}

/// Estimated landing surface.
#[derive(Debug, Clone, Copy)]
pub struct PlaneEstimate {
    /// Reference point on the plane (midpoint/centroid of the contacts), m.
    pub centroid: Vec3,
    /// Unit normal, canonicalized upward (n_z < 0).
    pub normal: Vec3,
    /// Surface direction angle ψ_s = atan2(n_y, n_z), rad.
    pub heading: f64,
    /// Incline α ∈ [0, π/2] w.r.t. horizontal, rad.
    pub incline: f64,
    pub source: PlaneSource,
}

impl PlaneEstimate {
    fn from_normal(centroid: Vec3, normal: Vec3, source: PlaneSource) -> Self {
        let normal = canonicalize_normal(normal);
        let (heading, incline) = heading_and_incline(normal);
        PlaneEstimate { centroid, normal, heading, incline, source }
    }

    /// Signed distance of `p` from the plane, positive above the surface.
    pub fn signed_distance(&self, p: Vec3) -> f64 {
        self.normal.dot(&(p - self.centroid))
    }
}

/// Flips a normal so it points upward (negative z in NED); vertical planes
/// fall back to negative y, then negative x.
pub fn canonicalize_normal(n: Vec3) -> Vec3 {
    let n = n.normalize();
    let flip = if n.z.abs() > 1e-12 {
        n.z > 0.0
    } else if n.y.abs() > 1e-12 {
        n.y > 0.0
    } else {
        n.x > 0.0
    };
    if flip {
        -n
    } else {
        n
    }
}

/// Plane through three contact points: two in-plane vectors, cross product,
/// normalize.
pub fn plane_from_three(p1: Vec3, p2: Vec3, p3: Vec3) -> Result<PlaneEstimate, LandingError> {
    let r1 = p1 - p2;
    let r2 = p1 - p3;
    let cross = r1.cross(&r2);
    let cross_norm = cross.norm();
    if cross_norm <= 1e-9 * r1.norm() * r2.norm() || cross_norm == 0.0 {
        return Err(LandingError::CollinearPoints { cross_norm });
    }
    let centroid = (p1 + p2 + p3) / 3.0;
    Ok(PlaneEstimate::from_normal(centroid, cross / cross_norm, PlaneSource::ThreePoint))
}

/// Two-point simplified case: the plane is assumed to contain the body
/// x-direction, so the contact separation crossed with `body_x_world`
/// yields the normal.
pub fn plane_from_two(
    p1: Vec3,
    p2: Vec3,
    body_x_world: Vec3,
) -> Result<PlaneEstimate, LandingError> {
    let u = p1 - p2;
    let x = body_x_world.normalize();
    let cross = u.cross(&x);
    let sin_angle = cross.norm() / u.norm().max(1e-300);
    let angle = sin_angle.min(1.0).asin();
    if angle <= 1e-6 {
        return Err(LandingError::ParallelDegeneracy { angle });
    }
    let centroid = (p1 + p2) / 2.0;
    Ok(PlaneEstimate::from_normal(centroid, cross / cross.norm(), PlaneSource::TwoPoint))
}

/// Heading ψ_s = atan2(n_y, n_z) and incline α = arccos(|n · (−e₃)|) of a
/// unit surface normal. The absolute value makes α independent of the
/// normal's sign, so canonicalization cannot change it.
pub fn heading_and_incline(n: Vec3) -> (f64, f64) {
    let heading = n.y.atan2(n.z);
    let incline = n.z.abs().clamp(0.0, 1.0).acos();
    (heading, incline)
}

/// Geometry constants and knobs for landing plan generation.
#[derive(Debug, Clone)]
pub struct LandingConfig {
    /// Preset body-frame (x, y) end-effector components per arm; z follows
    /// from the slope.
    pub preset_xy: [[f64; 2]; 2],
    /// Rear landing gear tip in the body frame (m).
    pub rear_gear_offset: Vec3,
    /// Approach point altitude above the centroid (m).
    pub clearance: f64,
    pub descent_velocity: f64,
    /// Maximum landable incline (rad).
    pub max_incline: f64,
}

/// Slope-matched landing plan: where to hover, how to yaw, and where to put
/// the end effectors so the body can touch down level.
#[derive(Debug, Clone)]
pub struct LandingPlan {
    pub approach_point: Vec3,
    pub target_yaw: f64,
    /// Body-frame end-effector setpoints, `[left, right]`.
    pub ee_setpoints: [Vec3; 2],
    pub rear_gear_offset: Vec3,
    pub descent_velocity: f64,
}

impl LandingPlan {
    /// The three body-frame points the vehicle stands on: both end
    /// effectors and the rear gear tip.
    pub fn stance_points_body(&self) -> [Vec3; 3] {
        [self.ee_setpoints[0], self.ee_setpoints[1], self.rear_gear_offset]
    }
}

/// Inclines below this (rad) keep the current yaw: the slope direction of a
/// near-level plane is numerically meaningless.
const YAW_ALIGN_MIN_INCLINE: f64 = 0.035;

/// Builds the landing plan for an estimated plane.
///
/// The body yaw is chosen so the slope direction lies along the body
/// y-axis (uphill toward +y); each end-effector z is then set so the line
/// from its tip to the rear gear tip matches the surface incline:
/// `z_e = z_gear + (y_gear − y_e) · tan α`. The end effectors stand
/// downhill of the gear, which is why their setpoints are deeper.
pub fn landing_geometry(
    plane: &PlaneEstimate,
    config: &LandingConfig,
    arms: &[ArmParams; 2],
    current_yaw: f64,
) -> Result<LandingPlan, LandingError> {
    if plane.incline > config.max_incline {
        return Err(LandingError::InclineTooSteep {
            alpha_deg: plane.incline.to_degrees(),
            max_deg: config.max_incline.to_degrees(),
        });
    }
    let target_yaw = if plane.incline < YAW_ALIGN_MIN_INCLINE {
        current_yaw
    } else {
        // The upward normal leans downhill, so its horizontal projection
        // negated gives the uphill azimuth; body +y should point uphill.
        let uphill_azimuth = (-plane.normal.y).atan2(-plane.normal.x);
        wrap_angle(uphill_azimuth - FRAC_PI_2)
    };

    let tan_alpha = plane.incline.tan();
    let gear = config.rear_gear_offset;
    let mut ee_setpoints = [Vec3::zeros(); 2];
    for (i, xy) in config.preset_xy.iter().enumerate() {
        let z = gear.z + (gear.y - xy[1]) * tan_alpha;
        let target = Vec3::new(xy[0], xy[1], z);
        match inverse_kinematics(&arms[i], target) {
            Ok(_) => ee_setpoints[i] = target,
            Err(_) => {
                return Err(LandingError::SetpointUnreachable {
                    arm_id: arms[i].side.index(),
                    target: [target.x, target.y, target.z],
                })
            }
        }
    }

    Ok(LandingPlan {
        approach_point: plane.centroid + Vec3::new(0.0, 0.0, -config.clearance),
        target_yaw,
        ee_setpoints,
        rear_gear_offset: gear,
        descent_velocity: config.descent_velocity,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kinematics::ArmSide;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn default_landing_config() -> LandingConfig {
        LandingConfig {
            preset_xy: [[0.15, -0.35], [0.35, -0.35]],
            rear_gear_offset: Vec3::new(-0.20, 0.25, 0.10),
            clearance: 0.5,
            descent_velocity: 0.2,
            max_incline: 35f64.to_radians(),
        }
    }

    fn arms() -> [ArmParams; 2] {
        [ArmParams::for_side(ArmSide::Left), ArmParams::for_side(ArmSide::Right)]
    }

    #[test]
    fn three_point_flat_ground() {
        let e = plane_from_three(
            Vec3::new(0.0, 0.0, 0.0),
            Vec3::new(1.0, 0.0, 0.0),
            Vec3::new(0.0, 1.0, 0.0),
        )
        .unwrap();
        assert_abs_diff_eq!(e.normal, Vec3::new(0.0, 0.0, -1.0), epsilon = 1e-12);
        assert_abs_diff_eq!(e.incline, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(e.centroid, Vec3::new(1.0 / 3.0, 1.0 / 3.0, 0.0), epsilon = 1e-15);
    }

    #[test]
    fn three_point_constructed_incline() {
        // Surface rising along +y at 30.5°: z drops (NED) going uphill.
        let alpha = 30.5f64.to_radians();
        let e = plane_from_three(
            Vec3::new(0.0, 0.0, 0.0),
            Vec3::new(1.0, 0.0, 0.0),
            Vec3::new(0.0, 1.0, -alpha.tan()),
        )
        .unwrap();
        assert_abs_diff_eq!(e.incline, alpha, epsilon = 1e-9);
        assert!(e.normal.z < 0.0);
    }

    #[test]
    fn three_point_collinear_rejected() {
        let err = plane_from_three(
            Vec3::new(0.0, 0.0, 0.0),
            Vec3::new(1.0, 1.0, 1.0),
            Vec3::new(2.0, 2.0, 2.0),
        );
        assert!(matches!(err, Err(LandingError::CollinearPoints { .. })));
    }

    #[test]
    fn two_point_hand_trigonometry() {
        let e = plane_from_two(
            Vec3::new(0.0, 0.5, 0.0),
            Vec3::new(0.0, -0.5, 0.373),
            Vec3::new(1.0, 0.0, 0.0),
        )
        .unwrap();
        let expected = 0.373f64.atan2(1.0);
        assert_abs_diff_eq!(e.incline, expected, epsilon = 1e-12);
        assert!((e.incline.to_degrees() - 20.45).abs() < 0.01);
        assert_abs_diff_eq!(e.centroid, Vec3::new(0.0, 0.0, 0.1865), epsilon = 1e-15);
        // Cross-check against the three-point route with a third point
        // displaced along x (which the two-point case assumes in-plane).
        let e3 = plane_from_three(
            Vec3::new(0.0, 0.5, 0.0),
            Vec3::new(0.0, -0.5, 0.373),
            Vec3::new(1.0, 0.5, 0.0),
        )
        .unwrap();
        assert_abs_diff_eq!(e.normal, e3.normal, epsilon = 1e-12);
    }

    #[test]
    fn two_point_parallel_rejected() {
        let err = plane_from_two(
            Vec3::new(0.3, 0.0, 0.0),
            Vec3::new(-0.6, 0.0, 0.0),
            Vec3::new(1.0, 0.0, 0.0),
        );
        assert!(matches!(err, Err(LandingError::ParallelDegeneracy { .. })));
    }

    #[test]
    fn two_point_level_contacts() {
        let e = plane_from_two(
            Vec3::new(0.0, 0.4, -0.2),
            Vec3::new(0.0, -0.4, -0.2),
            Vec3::new(1.0, 0.0, 0.0),
        )
        .unwrap();
        assert_abs_diff_eq!(e.incline, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn heading_incline_reference_angles() {
        let (_, alpha) = heading_and_incline(Vec3::new(0.0, 0.0, -1.0));
        assert_abs_diff_eq!(alpha, 0.0, epsilon = 1e-15);
        for deg in [11.3, 20.6, 30.5] {
            let theta = deg.to_radians();
            let n = Vec3::new(0.0, theta.sin(), -theta.cos());
            let (_, alpha) = heading_and_incline(n);
            assert_abs_diff_eq!(alpha, theta, epsilon = 1e-12);
            // Sign flip of the normal leaves the incline unchanged.
            let (_, alpha_flipped) = heading_and_incline(-n);
            assert_abs_diff_eq!(alpha_flipped, theta, epsilon = 1e-12);
        }
    }

    #[test]
    fn landing_level_stance() {
        let plane = plane_from_three(
            Vec3::new(0.0, 0.0, 0.0),
            Vec3::new(1.0, 0.0, 0.0),
            Vec3::new(0.0, 1.0, 0.0),
        )
        .unwrap();
        let cfg = default_landing_config();
        let plan = landing_geometry(&plane, &cfg, &arms(), 0.3).unwrap();
        for sp in plan.ee_setpoints {
            assert_abs_diff_eq!(sp.z, cfg.rear_gear_offset.z, epsilon = 1e-12);
        }
        // Near-level plane keeps the current yaw.
        assert_abs_diff_eq!(plan.target_yaw, 0.3, epsilon = 1e-12);
        assert_abs_diff_eq!(
            plan.approach_point,
            plane.centroid + Vec3::new(0.0, 0.0, -0.5),
            epsilon = 1e-12
        );
    }

    #[test]
    fn landing_slope_matched_height_difference() {
        let alpha = 30.5f64.to_radians();
        let n = Vec3::new(0.0, alpha.sin(), -alpha.cos());
        let plane = PlaneEstimate::from_normal(Vec3::zeros(), n, PlaneSource::TwoPoint);
        let cfg = default_landing_config();
        let plan = landing_geometry(&plane, &cfg, &arms(), 0.0).unwrap();
        // ee/gear separation along the slope direction is 0.6 m with the
        // default presets.
        let dz = plan.ee_setpoints[0].z - cfg.rear_gear_offset.z;
        assert_abs_diff_eq!(dz, 0.6 * alpha.tan(), epsilon = 1e-12);
        assert!((dz - 0.3534).abs() < 1e-3);
        // Slope uphill along world +y and yaw 0: body already aligned.
        assert_abs_diff_eq!(plan.target_yaw, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn landing_stance_points_lie_on_incline_plane() {
        for deg in [5.0, 11.3, 20.6, 30.5] {
            let alpha = deg.to_radians();
            let n = Vec3::new(0.0, alpha.sin(), -alpha.cos());
            let plane = PlaneEstimate::from_normal(Vec3::zeros(), n, PlaneSource::TwoPoint);
            let plan = landing_geometry(&plane, &default_landing_config(), &arms(), 0.0).unwrap();
            // With a level body pose the three stance points must lie on a
            // common plane of inclination exactly alpha.
            let [a, b, g] = plan.stance_points_body();
            let stance = plane_from_three(a, b, g).unwrap();
            assert_abs_diff_eq!(stance.incline, alpha, epsilon = 1e-9);
        }
    }

    #[test]
    fn landing_too_steep_rejected() {
        let alpha = 60f64.to_radians();
        let n = Vec3::new(0.0, alpha.sin(), -alpha.cos());
        let plane = PlaneEstimate::from_normal(Vec3::zeros(), n, PlaneSource::TwoPoint);
        let err = landing_geometry(&plane, &default_landing_config(), &arms(), 0.0);
        assert!(matches!(err, Err(LandingError::InclineTooSteep { .. })));
    }

    #[test]
    fn landing_unreachable_setpoint_rejected() {
        let plane = plane_from_three(
            Vec3::new(0.0, 0.0, 0.0),
            Vec3::new(1.0, 0.0, 0.0),
            Vec3::new(0.0, 1.0, 0.0),
        )
        .unwrap();
        let mut cfg = default_landing_config();
        cfg.preset_xy = [[0.7, -0.7], [0.35, -0.35]];
        let err = landing_geometry(&plane, &cfg, &arms(), 0.0);
        assert!(matches!(err, Err(LandingError::SetpointUnreachable { arm_id: 1, .. })));
    }

    #[test]
    fn yaw_alignment_for_rotated_slope() {
        // Slope rising toward world +x: body must yaw -90° so +y points
        // uphill.
        let alpha = 20.6f64.to_radians();
        let n = Vec3::new(alpha.sin(), 0.0, -alpha.cos());
        let plane = PlaneEstimate::from_normal(Vec3::zeros(), n, PlaneSource::ThreePoint);
        let plan = landing_geometry(&plane, &default_landing_config(), &arms(), 0.0).unwrap();
        assert_abs_diff_eq!(plan.target_yaw, -FRAC_PI_2, epsilon = 1e-12);
    }

    proptest! {
        #[test]
        fn three_point_permutation_invariant(
            coords in proptest::array::uniform9(-1.0f64..1.0),
        ) {
            let p1 = Vec3::new(coords[0], coords[1], coords[2]);
            let p2 = Vec3::new(coords[3], coords[4], coords[5]);
            let p3 = Vec3::new(coords[6], coords[7], coords[8]);
            let base = match plane_from_three(p1, p2, p3) {
                Ok(e) => e,
                Err(_) => return Ok(()),
            };
            for (a, b, c) in [(p1, p3, p2), (p2, p1, p3), (p2, p3, p1), (p3, p1, p2), (p3, p2, p1)] {
                let e = plane_from_three(a, b, c).unwrap();
                prop_assert!((e.normal - base.normal).norm() < 1e-12);
                prop_assert!((e.incline - base.incline).abs() < 1e-12);
            }
        }

        #[test]
        fn two_point_recovers_true_normal(
            yaw in -3.0f64..3.0,
            alpha_deg in 0.5f64..44.0,
            a in -1.0f64..1.0,
            b in 0.05f64..1.0,
        ) {
            // True plane containing the body x direction: the normal
            // (0, sinα, −cosα) yawed together with the body.
            let alpha = alpha_deg.to_radians();
            let (sy, cy) = yaw.sin_cos();
            let body_x = Vec3::new(cy, sy, 0.0);
            let normal = canonicalize_normal(Vec3::new(
                -alpha.sin() * sy,
                alpha.sin() * cy,
                -alpha.cos(),
            ));
            // In-plane direction orthogonal to body_x.
            let along = normal.cross(&body_x);
            let p1 = body_x * a + along * b;
            let p2 = body_x * -a - along * b;
            let e = plane_from_two(p1, p2, body_x).unwrap();
            prop_assert!((e.normal - normal).norm() < 1e-9,
                "normal {:?} vs true {:?}", e.normal, normal);
        }
    }
}
