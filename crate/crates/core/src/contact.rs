//! Turns torque estimates into debounced contact events and attributes each
//! event to an arm with a world-frame contact point.
//!
//! Attribution works by direction only: each moving arm predicts the body
//! torque a contact opposing its end-effector motion would produce (the
//! virtual torque), and the observed torque is matched to the arm whose
//! prediction has the smallest angular difference.

use crate::kinematics::{ee_position, ee_velocity, ArmParams, JointConfig, JointVelocity};
use crate::se3::{Pose, Vec3};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ContactError {
    #[error("invalid detection config: {0}")]
    InvalidConfig(String),
    #[error("arm {arm_id} is stationary (|J·q̇| = {speed:.3e}); not a contact candidate")]
    StationaryArm { arm_id: u8, speed: f64 },
    #[error("arm {arm_id} moment arm is degenerate (end effector moving along its own position vector)")]
    DegenerateMomentArm { arm_id: u8 },
    #[error("no arm is a valid contact candidate")]
    AllArmsExcluded,
    #[error("observed torque is zero; nothing to localize")]
    ZeroTorque,
}

/// Contact detection thresholds.
#[derive(Debug, Clone, Copy)]
pub struct DetectionConfig {
    /// Per-axis torque threshold (N·m), applied to the ∞-norm of the
    /// estimate.
    pub threshold: f64,
    /// Suppression window after a detection (s), absorbing contact bounce.
    pub timeout: f64,
}

impl DetectionConfig {
    pub fn new(threshold: f64, timeout: f64) -> Result<Self, ContactError> {
        if !(threshold > 0.0) {
            return Err(ContactError::InvalidConfig(format!("threshold {threshold} must be > 0")));
        }
        if !(timeout > 0.0) {
            return Err(ContactError::InvalidConfig(format!("timeout {timeout} must be > 0")));
        }
        Ok(DetectionConfig { threshold, timeout })
    }
}

/// A registered contact: when, which arm, where (world frame), and how well
/// the observed torque matched the arm's virtual torque.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContactEvent {
    pub time: f64,
    pub arm_id: u8,
    pub p_c_world: Vec3,
    pub tau_observed: Vec3,
    /// Angle between observed and matched virtual torque, `[0, π]` rad.
    pub match_angle: f64,
}

/// Kinematic state of one arm at the detection instant.
#[derive(Debug, Clone, Copy)]
pub struct ArmMotionSnapshot {
    pub arm_id: u8,
    pub q: JointConfig,
    pub qd: JointVelocity,
    /// Body-frame end-effector position (consistent with `q` by
    /// construction).
    pub ee_body: Vec3,
    /// Body-frame end-effector velocity `J(q)·q̇`.
    pub ee_vel_body: Vec3,
}

impl ArmMotionSnapshot {
    pub fn from_state(params: &ArmParams, q: JointConfig, qd: JointVelocity) -> Self {
        ArmMotionSnapshot {
            arm_id: params.side.index(),
            q,
            qd,
            ee_body: ee_position(params, &q),
            ee_vel_body: ee_velocity(params, &q, &qd),
        }
    }
}

/// Threshold check: fires iff the estimate's ∞-norm exceeds the threshold,
/// detection is armed, and the debounce window since the previous event has
/// expired.
pub fn detect(
    tau_hat: Vec3,
    config: &DetectionConfig,
    armed: bool,
    clock: f64,
    last_event_time: Option<f64>,
) -> bool {
    if !armed {
        return false;
    }
    if let Some(last) = last_event_time {
        if clock - last <= config.timeout {
            return false;
        }
    }
    tau_hat.amax() > config.threshold
}

/// Unit virtual contact force: opposite the end-effector motion direction.
/// Only the direction is meaningful (matching is angle-based), so the
/// result is normalized.
pub fn virtual_force(arm: &ArmMotionSnapshot) -> Result<Vec3, ContactError> {
    let speed = arm.ee_vel_body.norm();
    if speed <= 1e-9 {
        return Err(ContactError::StationaryArm { arm_id: arm.arm_id, speed });
    }
    Ok(-arm.ee_vel_body / speed)
}

/// Virtual body torque of a hypothetical contact on this arm: the
/// end-effector position acts as the moment arm for the virtual force.
pub fn virtual_torque(arm: &ArmMotionSnapshot) -> Result<Vec3, ContactError> {
    let f_v = virtual_force(arm)?;
    let tau = arm.ee_body.cross(&f_v);
    if tau.norm() <= 1e-9 * arm.ee_body.norm().max(1e-12) {
        return Err(ContactError::DegenerateMomentArm { arm_id: arm.arm_id });
    }
    Ok(tau)
}

/// Attribution result plus the per-arm diagnostics that produced it.
#[derive(Debug, Clone)]
pub struct LocalizationOutcome {
    pub event: ContactEvent,
    /// (arm_id, match angle) for every non-excluded arm.
    pub angles: Vec<(u8, f64)>,
    /// Two candidates were separated by less than the tie tolerance; the
    /// lowest arm index was kept.
    pub tie: bool,
}

/// Angular separation below which two candidate arms count as tied.
pub const TIE_TOLERANCE: f64 = 1e-6;

/// Matches the observed torque to the arm with the smallest direction
/// difference and produces the world-frame contact point
/// `p_c = p_b + R_b · p_e^b` from that arm's forward kinematics and the
/// body pose (world → body).
pub fn localize(
    tau_hat: Vec3,
    arms: &[ArmMotionSnapshot],
    body_pose: &Pose,
    clock: f64,
) -> Result<LocalizationOutcome, ContactError> {
    let tau_norm = tau_hat.norm();
    if tau_norm <= 0.0 {
        return Err(ContactError::ZeroTorque);
    }
    let mut angles: Vec<(u8, f64)> = Vec::new();
    let mut best: Option<(usize, f64)> = None;
    for (idx, arm) in arms.iter().enumerate() {
        let tau_v = match virtual_torque(arm) {
            Ok(t) => t,
            Err(_) => continue,
        };
        let cosine = (tau_hat.dot(&tau_v) / (tau_norm * tau_v.norm())).clamp(-1.0, 1.0);
        let angle = cosine.acos();
        angles.push((arm.arm_id, angle));
        match best {
            None => best = Some((idx, angle)),
            Some((_, best_angle)) if angle < best_angle => best = Some((idx, angle)),
            _ => {}
        }
    }
    let (best_idx, best_angle) = best.ok_or(ContactError::AllArmsExcluded)?;
    let tie = angles
        .iter()
        .any(|&(id, a)| id != arms[best_idx].arm_id && (a - best_angle).abs() < TIE_TOLERANCE);
    if tie {
        log::warn!(
            "contact attribution tie at t = {clock:.3}s; keeping arm {}",
            arms[best_idx].arm_id
        );
    }
    let matched = &arms[best_idx];
    let event = ContactEvent {
        time: clock,
        arm_id: matched.arm_id,
        p_c_world: body_pose.transform_point(matched.ee_body),
        tau_observed: tau_hat,
        match_angle: best_angle,
    };
    Ok(LocalizationOutcome { event, angles, tie })
}

/// Stateful detector: owns the arming flag and the debounce clock. One per
/// vehicle instance.
#[derive(Debug, Clone)]
pub struct ContactDetector {
    pub config: DetectionConfig,
    pub armed: bool,
    last_event_time: Option<f64>,
}

impl ContactDetector {
    pub fn new(config: DetectionConfig) -> Self {
        ContactDetector { config, armed: false, last_event_time: None }
    }

    pub fn arm(&mut self) {
        self.armed = true;
    }

    pub fn disarm(&mut self) {
        self.armed = false;
    }

    pub fn last_event_time(&self) -> Option<f64> {
        self.last_event_time
    }

    /// Runs the threshold/debounce check; on a positive result the debounce
    /// clock latches to `clock`.
    pub fn check(&mut self, tau_hat: Vec3, clock: f64) -> bool {
        let fired = detect(tau_hat, &self.config, self.armed, clock, self.last_event_time);
        if fired {
            self.last_event_time = Some(clock);
        }
        fired
    }
}
