//! Forward, inverse, and differential kinematics of the 3R manipulator arms,
//! plus configuration-space workspace sampling.
//!
//! Joint convention (FRD body frame, z pointing down):
//!
//! * joint 1 (pivot) rotates about the body x-axis,
//! * joint 2 (shoulder) rotates the distal chain out of the pivot plane
//!   about the local y-axis,
//! * joint 3 (elbow) is parallel to the pivot axis when `q2 = 0`,
//! * at `q = (0, 0, 0)` the arm hangs straight down (+z) with all links
//!   collinear.
//!
//! The two arms are mirror-image mechanisms: positive pivot/elbow commands
//! swing the left arm toward −y and the right arm toward +y. With mirrored
//! mount offsets, identical joint vectors therefore produce y-mirrored
//! end-effector positions.
//!
//! The end-effector position in the body frame is
//! `mount + Rx(σ·q1) · (L1·ẑ + Ry(q2) · (L2·ẑ + Rx(σ·q3) · L3·ẑ))`
//! with σ = +1 for the left arm and σ = −1 for the right arm.

use crate::se3::{wrap_angle, Frame, Pose, Rot3, Vec3};
use nalgebra::Matrix3;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KinematicsError {
    #[error("target at distance {distance:.4} m is unreachable (max reach {max_reach:.4} m)")]
    Unreachable { distance: f64, max_reach: f64 },
    #[error("Jacobian near singular: |det J| = {det:.3e} below threshold {threshold:.3e}")]
    NearSingular { det: f64, threshold: f64 },
    #[error("workspace sampling resolution must be >= 2, got {0}")]
    InvalidResolution(usize),
    #[error("invalid arm parameters: {0}")]
    InvalidParams(String),
}

/// Which side of the body the arm is mounted on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArmSide {
    Left,
    Right,
}

impl ArmSide {
    /// Mirror sign applied to the x-axis joints (pivot and elbow).
    pub fn sign(self) -> f64 {
        match self {
            ArmSide::Left => 1.0,
            ArmSide::Right => -1.0,
        }
    }

    /// 1-based arm index used in contact events and frame labels.
    pub fn index(self) -> u8 {
        match self {
            ArmSide::Left => 1,
            ArmSide::Right => 2,
        }
    }
}

/// Geometry of one 3R arm.
#[derive(Debug, Clone)]
pub struct ArmParams {
    pub l1: f64,
    pub l2: f64,
    pub l3: f64,
    /// Per-joint `[min, max]` limits in radians.
    pub joint_limits: [[f64; 2]; 3],
    pub side: ArmSide,
    /// Position of the joint-1 axis origin in the body frame (m).
    pub mount_offset: Vec3,
}

impl ArmParams {
    /// Default link lengths and joint limits for the given side.
    pub fn for_side(side: ArmSide) -> Self {
        ArmParams {
            l1: 0.118,
            l2: 0.330,
            l3: 0.273,
            joint_limits: [
                [-std::f64::consts::PI, std::f64::consts::PI],
                [-1.0471975511965976, 1.0471975511965976],
                [-2.530727415391778, 2.530727415391778],
            ],
            side,
            mount_offset: Vec3::zeros(),
        }
    }

    pub fn validate(&self) -> Result<(), KinematicsError> {
        if self.l1 <= 0.0 || self.l2 <= 0.0 || self.l3 <= 0.0 {
            return Err(KinematicsError::InvalidParams("link lengths must be positive".into()));
        }
        for (i, lim) in self.joint_limits.iter().enumerate() {
            if lim[0] >= lim[1] {
                return Err(KinematicsError::InvalidParams(format!(
                    "joint {} limit min {} >= max {}",
                    i + 1,
                    lim[0],
                    lim[1]
                )));
            }
        }
        Ok(())
    }

    pub fn max_reach(&self) -> f64 {
        self.l1 + self.l2 + self.l3
    }

    pub fn in_limits(&self, q: &JointConfig) -> bool {
        q.as_array()
            .iter()
            .zip(self.joint_limits.iter())
            .all(|(qi, lim)| *qi >= lim[0] - 1e-12 && *qi <= lim[1] + 1e-12)
    }

    pub fn clamp_to_limits(&self, q: &JointConfig) -> JointConfig {
        let a = q.as_array();
        JointConfig::new(
            a[0].clamp(self.joint_limits[0][0], self.joint_limits[0][1]),
            a[1].clamp(self.joint_limits[1][0], self.joint_limits[1][1]),
            a[2].clamp(self.joint_limits[2][0], self.joint_limits[2][1]),
        )
    }
}

/// Joint angles (rad): pivot, out-of-plane shoulder, elbow.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JointConfig {
    pub q1: f64,
    pub q2: f64,
    pub q3: f64,
}

impl JointConfig {
    pub fn new(q1: f64, q2: f64, q3: f64) -> Self {
        JointConfig { q1, q2, q3 }
    }

    pub fn zero() -> Self {
        JointConfig { q1: 0.0, q2: 0.0, q3: 0.0 }
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.q1, self.q2, self.q3]
    }

    pub fn wrapped(&self) -> Self {
        JointConfig::new(wrap_angle(self.q1), wrap_angle(self.q2), wrap_angle(self.q3))
    }
}

/// Joint velocities (rad/s).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JointVelocity {
    pub qd1: f64,
    pub qd2: f64,
    pub qd3: f64,
}

impl JointVelocity {
    pub fn new(qd1: f64, qd2: f64, qd3: f64) -> Self {
        JointVelocity { qd1, qd2, qd3 }
    }

    pub fn zero() -> Self {
        JointVelocity { qd1: 0.0, qd2: 0.0, qd3: 0.0 }
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.qd1, self.qd2, self.qd3]
    }
}

/// Positions of the joint origins and end effector in the body frame:
/// `[mount, shoulder, elbow, end effector]`.
pub fn chain_points(params: &ArmParams, q: &JointConfig) -> [Vec3; 4] {
    let s = params.side.sign();
    let r1 = Rot3::rot_x(s * q.q1);
    let r2 = r1 * Rot3::rot_y(q.q2);
    let r3 = r2 * Rot3::rot_x(s * q.q3);
    let p0 = params.mount_offset;
    let p1 = p0 + r1 * Vec3::new(0.0, 0.0, params.l1);
    let p2 = p1 + r2 * Vec3::new(0.0, 0.0, params.l2);
    let p3 = p2 + r3 * Vec3::new(0.0, 0.0, params.l3);
    [p0, p1, p2, p3]
}

/// Body-frame pose of the end effector for joint configuration `q`.
///
/// Out-of-limit configurations are accepted (useful for analysis); callers
/// that care should check [`ArmParams::in_limits`].
pub fn forward_kinematics(params: &ArmParams, q: &JointConfig) -> Pose {
    let s = params.side.sign();
    let rot = Rot3::rot_x(s * q.q1) * Rot3::rot_y(q.q2) * Rot3::rot_x(s * q.q3);
    let translation = chain_points(params, q)[3];
    Pose::new(rot, translation, Frame::Body, Frame::EndEffector(params.side.index()))
}

/// Body-frame end-effector position (translation part of the FK pose).
pub fn ee_position(params: &ArmParams, q: &JointConfig) -> Vec3 {
    chain_points(params, q)[3]
}

/// Geometric Jacobian of the end-effector position w.r.t. the joint angles
/// (3×3, m/rad per column): column i is `axis_i × (p_e − o_i)`.
pub fn jacobian(params: &ArmParams, q: &JointConfig) -> Matrix3<f64> {
    let s = params.side.sign();
    let r1 = Rot3::rot_x(s * q.q1);
    let r2 = r1 * Rot3::rot_y(q.q2);
    let [o1, o2, o3, p] = chain_points(params, q);
    let axis1 = Vec3::new(s, 0.0, 0.0);
    let axis2 = r1 * Vec3::new(0.0, 1.0, 0.0);
    let axis3 = r2 * Vec3::new(s, 0.0, 0.0);
    let c1 = axis1.cross(&(p - o1));
    let c2 = axis2.cross(&(p - o2));
    let c3 = axis3.cross(&(p - o3));
    Matrix3::from_columns(&[c1, c2, c3])
}

/// End-effector velocity in the body frame for joint velocities `qd`.
pub fn ee_velocity(params: &ArmParams, q: &JointConfig, qd: &JointVelocity) -> Vec3 {
    jacobian(params, q) * Vec3::from(qd.as_array())
}

/// All algebraic inverse kinematics solutions for a body-frame target
/// position, split into in-limit and out-of-limit branches. Solutions are
/// ordered elbow-down first (larger elbow z, FRD).
#[derive(Debug, Clone)]
pub struct IkSolutions {
    pub in_limit: Vec<JointConfig>,
    pub out_of_limit: Vec<JointConfig>,
}

/// In-limit inverse kinematics solutions; errors when the target is outside
/// the reachable set.
pub fn inverse_kinematics(
    params: &ArmParams,
    target: Vec3,
) -> Result<Vec<JointConfig>, KinematicsError> {
    let sols = inverse_kinematics_all(params, target)?;
    if sols.in_limit.is_empty() {
        let distance = (target - params.mount_offset).norm();
        return Err(KinematicsError::Unreachable { distance, max_reach: params.max_reach() });
    }
    Ok(sols.in_limit)
}

/// Diagnostic variant of [`inverse_kinematics`] that also reports solutions
/// violating the joint limits.
pub fn inverse_kinematics_all(
    params: &ArmParams,
    target: Vec3,
) -> Result<IkSolutions, KinematicsError> {
    let r = target - params.mount_offset;
    let d2 = r.norm_squared();
    let distance = d2.sqrt();
    let max_reach = params.max_reach();
    if distance > max_reach + 1e-9 {
        return Err(KinematicsError::Unreachable { distance, max_reach });
    }

    let (l1, l2, l3) = (params.l1, params.l2, params.l3);
    let s = params.side.sign();

    // With u = cos(σ·q3) and ζ = cos(q2)·(L2 + L3·u), the squared-distance
    // and x-component equations reduce to ζ = A − B·u together with
    // ζ² = (L2 + L3·u)² − r_x², a quadratic in u.
    let a_lin = (d2 - l1 * l1 - l2 * l2 - l3 * l3) / (2.0 * l1);
    let b_lin = l2 * l3 / l1;
    let qa = b_lin * b_lin - l3 * l3;
    let qb = -2.0 * (a_lin * b_lin + l2 * l3);
    let qc = a_lin * a_lin - l2 * l2 + r.x * r.x;

    let mut roots: Vec<f64> = Vec::new();
    if qa.abs() < 1e-12 {
        if qb.abs() > 1e-12 {
            roots.push(-qc / qb);
        }
    } else {
        let disc = qb * qb - 4.0 * qa * qc;
        if disc >= -1e-9 {
            let sq = disc.max(0.0).sqrt();
            // Numerically stable quadratic roots.
            let qq = -0.5 * (qb + qb.signum() * sq);
            if qq.abs() > 0.0 {
                roots.push(qq / qa);
                roots.push(qc / qq);
            } else {
                roots.push(0.0);
            }
        }
    }

    let mut candidates: Vec<JointConfig> = Vec::new();
    for u in roots {
        if !(-1.0 - 1e-9..=1.0 + 1e-9).contains(&u) {
            continue;
        }
        let u = u.clamp(-1.0, 1.0);
        let s3_mag = (1.0 - u * u).max(0.0).sqrt();
        for s3 in [s3_mag, -s3_mag] {
            let w = l2 + l3 * u;
            let zeta = a_lin - b_lin * u;
            let (sin2, cos2) = if w.abs() < 1e-12 {
                if r.x.abs() > 1e-9 {
                    continue;
                }
                (0.0, 1.0)
            } else {
                (r.x / w, zeta / w)
            };
            let q2 = sin2.atan2(cos2);
            let q3 = s * s3.atan2(u);
            // Rotate the q1 = 0 chain so its yz-projection lines up with
            // the target's.
            let vy = -l3 * s3;
            let vz = l1 + zeta;
            let q1 = if vy.hypot(vz) < 1e-12 || r.y.hypot(r.z) < 1e-12 {
                0.0
            } else {
                s * wrap_angle(r.z.atan2(r.y) - vz.atan2(vy))
            };
            let q = JointConfig::new(wrap_angle(q1), wrap_angle(q2), wrap_angle(q3));
            if (ee_position(params, &q) - target).norm() < 1e-9 {
                candidates.push(q);
            }
            if s3 == 0.0 {
                break;
            }
        }
    }

    // Dedupe branches that coincide (e.g. s3 = 0).
    let mut unique: Vec<JointConfig> = Vec::new();
    for c in candidates {
        let dup = unique.iter().any(|u| {
            wrap_angle(u.q1 - c.q1).abs() < 1e-9
                && wrap_angle(u.q2 - c.q2).abs() < 1e-9
                && wrap_angle(u.q3 - c.q3).abs() < 1e-9
        });
        if !dup {
            unique.push(c);
        }
    }

    if unique.is_empty() {
        return Err(KinematicsError::Unreachable { distance, max_reach });
    }

    // Elbow-down (larger elbow z in FRD) first: matches the landing posture.
    unique.sort_by(|a, b| {
        let ez_a = chain_points(params, a)[2].z;
        let ez_b = chain_points(params, b)[2].z;
        ez_b.partial_cmp(&ez_a).unwrap()
    });

    let (in_limit, out_of_limit) = unique.into_iter().partition(|q| params.in_limits(q));
    Ok(IkSolutions { in_limit, out_of_limit })
}

/// Fraction of `L2·L3` below which the Jacobian determinant is treated as
/// singular by [`differential_ik`].
pub const SINGULARITY_FRACTION: f64 = 1e-6;

/// Joint velocities realizing a desired body-frame end-effector velocity,
/// by LU-solving the Jacobian at `q`. Fails loudly near singularities
/// instead of distorting the velocity.
pub fn differential_ik(
    params: &ArmParams,
    q: &JointConfig,
    v: Vec3,
) -> Result<JointVelocity, KinematicsError> {
    let j = jacobian(params, q);
    let det = j.determinant();
    let threshold = SINGULARITY_FRACTION * params.l2 * params.l3;
    if det.abs() < threshold {
        return Err(KinematicsError::NearSingular { det: det.abs(), threshold });
    }
    let qd = j.lu().solve(&v).ok_or(KinematicsError::NearSingular { det: det.abs(), threshold })?;
    Ok(JointVelocity::new(qd[0], qd[1], qd[2]))
}

/// One workspace sample: the joint configuration and the resulting
/// body-frame end-effector position.
#[derive(Debug, Clone, Copy)]
pub struct WorkspaceSample {
    pub q: JointConfig,
    pub p: Vec3,
}

/// Dense configuration-space sampling of the reachable workspace with
/// convex outline curves of the YZ- and XZ-plane projections.
#[derive(Debug, Clone)]
pub struct WorkspaceCloud {
    pub samples: Vec<WorkspaceSample>,
    /// Convex hull of the (y, z) projection, counter-clockwise.
    pub hull_yz: Vec<[f64; 2]>,
    /// Convex hull of the (x, z) projection, counter-clockwise.
    pub hull_xz: Vec<[f64; 2]>,
}

/// Samples `resolution` points per joint across the joint limits
/// (`resolution³` forward kinematics evaluations).
pub fn sample_workspace(
    params: &ArmParams,
    resolution: usize,
) -> Result<WorkspaceCloud, KinematicsError> {
    if resolution < 2 {
        return Err(KinematicsError::InvalidResolution(resolution));
    }
    let grid = |lim: [f64; 2]| -> Vec<f64> {
        (0..resolution)
            .map(|i| lim[0] + (lim[1] - lim[0]) * i as f64 / (resolution - 1) as f64)
            .collect()
    };
    let g1 = grid(params.joint_limits[0]);
    let g2 = grid(params.joint_limits[1]);
    let g3 = grid(params.joint_limits[2]);
    let mut samples = Vec::with_capacity(resolution * resolution * resolution);
    for &q1 in &g1 {
        for &q2 in &g2 {
            for &q3 in &g3 {
                let q = JointConfig::new(q1, q2, q3);
                samples.push(WorkspaceSample { q, p: ee_position(params, &q) });
            }
        }
    }
    let hull_yz = convex_hull(samples.iter().map(|s| [s.p.y, s.p.z]).collect());
    let hull_xz = convex_hull(samples.iter().map(|s| [s.p.x, s.p.z]).collect());
    Ok(WorkspaceCloud { samples, hull_yz, hull_xz })
}

/// Andrew's monotone chain, counter-clockwise output.
fn convex_hull(mut pts: Vec<[f64; 2]>) -> Vec<[f64; 2]> {
    pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    pts.dedup_by(|a, b| (a[0] - b[0]).abs() < 1e-12 && (a[1] - b[1]).abs() < 1e-12);
    if pts.len() < 3 {
        return pts;
    }
    let cross =
        |o: &[f64; 2], a: &[f64; 2], b: &[f64; 2]| (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0]);
    let mut lower: Vec<[f64; 2]> = Vec::new();
    for p in &pts {
        while lower.len() >= 2 && cross(&lower[lower.len() - 2], &lower[lower.len() - 1], p) <= 0.0 {
            lower.pop();
        }
        lower.push(*p);
    }
    let mut upper: Vec<[f64; 2]> = Vec::new();
    for p in pts.iter().rev() {
        while upper.len() >= 2 && cross(&upper[upper.len() - 2], &upper[upper.len() - 1], p) <= 0.0 {
            upper.pop();
        }
        upper.push(*p);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    lower
}
