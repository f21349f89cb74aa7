//! Deterministic quasi-static simulator: slanted-plane world, rigid-body
//! rotational plant with kinematic arms, spring-damper contact, sensor
//! models, the probing/landing state machine, telemetry, and offline replay.

pub mod pipeline;
pub mod plant;
pub mod replay;
pub mod report;
pub mod telemetry;

use crate::kinematics::{JointConfig, JointVelocity};
use crate::se3::{Rot3, Vec3};
use thiserror::Error;

pub use pipeline::run_pipeline;
pub use plant::{step_plant, PlantInputs, PlantParams, StepOutcome};
pub use report::{RunOutcome, RunReport};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("world incline {0}° outside the supported range [0, 45]")]
    InclineOutOfRange(f64),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// Ground-truth slanted landing surface: a square patch of a plane.
#[derive(Debug, Clone)]
pub struct WorldPlane {
    /// Unit normal, canonicalized upward (n_z < 0 in NED).
    pub true_normal: Vec3,
    pub true_centroid: Vec3,
    /// Half side length of the square patch (m).
    pub half_extent: f64,
    pub incline_deg: f64,
}

impl WorldPlane {
    /// Plane of the given incline whose uphill direction points along the
    /// given world azimuth (deg, 90 = world +y).
    pub fn new(
        incline_deg: f64,
        uphill_azimuth_deg: f64,
        centroid: Vec3,
        half_extent: f64,
    ) -> Result<Self, SimError> {
        if !(0.0..=45.0).contains(&incline_deg) || !incline_deg.is_finite() {
            return Err(SimError::InclineOutOfRange(incline_deg));
        }
        let alpha = incline_deg.to_radians();
        let az = uphill_azimuth_deg.to_radians();
        // Upward normal leans away from uphill.
        let true_normal = Vec3::new(
            -alpha.sin() * az.cos(),
            -alpha.sin() * az.sin(),
            -alpha.cos(),
        );
        Ok(WorldPlane { true_normal, true_centroid: centroid, half_extent, incline_deg })
    }

    /// Signed distance of a world point from the plane; positive above the
    /// surface.
    pub fn signed_distance(&self, p: Vec3) -> f64 {
        self.true_normal.dot(&(p - self.true_centroid))
    }

    /// Whether the point projects onto the finite patch.
    pub fn within_extent(&self, p: Vec3) -> bool {
        let rel = p - self.true_centroid;
        let in_plane = rel - self.true_normal * self.true_normal.dot(&rel);
        in_plane.x.abs() <= self.half_extent && in_plane.y.abs() <= self.half_extent
    }
}

/// Contact force from the spring-damper surface model.
#[derive(Debug, Clone, Copy)]
pub struct ContactForce {
    /// World-frame force on the vehicle (N), along the surface normal.
    pub force: Vec3,
    /// Penetration depth (m), positive below the surface.
    pub penetration: f64,
}

/// Penalty contact: when `point` penetrates the patch, a spring-damper
/// normal force pushes back; the force never pulls.
pub fn contact_model(
    point: Vec3,
    velocity: Vec3,
    world: &WorldPlane,
    stiffness: f64,
    damping: f64,
) -> Option<ContactForce> {
    let dist = world.signed_distance(point);
    if dist >= 0.0 || !world.within_extent(point) {
        return None;
    }
    let penetration = -dist;
    let normal_vel = world.true_normal.dot(&velocity);
    let magnitude = (stiffness * penetration - damping * normal_vel).max(0.0);
    Some(ContactForce { force: world.true_normal * magnitude, penetration })
}

/// Pipeline phase of the landing state machine.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Approach,
    Probe,
    RaiseArm,
    Reposition,
    PlanLanding,
    Descend,
    Landed,
    Aborted,
}

impl Phase {
    pub fn as_str(&self) -> &'static str {
        match self {
            Phase::Approach => "approach",
            Phase::Probe => "probe",
            Phase::RaiseArm => "raise_arm",
            Phase::Reposition => "reposition",
            Phase::PlanLanding => "plan_landing",
            Phase::Descend => "descend",
            Phase::Landed => "landed",
            Phase::Aborted => "aborted",
        }
    }

    pub fn from_str(s: &str) -> Option<Phase> {
        Some(match s {
            "approach" => Phase::Approach,
            "probe" => Phase::Probe,
            "raise_arm" => Phase::RaiseArm,
            "reposition" => Phase::Reposition,
            "plan_landing" => Phase::PlanLanding,
            "descend" => Phase::Descend,
            "landed" => Phase::Landed,
            "aborted" => Phase::Aborted,
            _ => return None,
        })
    }

    /// Legal edges of the phase graph. Aborting is allowed from any
    /// non-terminal phase.
    pub fn can_transition_to(&self, next: Phase) -> bool {
        if *self == next {
            return true;
        }
        if next == Phase::Aborted {
            return !matches!(self, Phase::Landed | Phase::Aborted);
        }
        matches!(
            (self, next),
            (Phase::Approach, Phase::Probe)
                | (Phase::Probe, Phase::RaiseArm)
                | (Phase::Probe, Phase::Reposition)
                | (Phase::Probe, Phase::PlanLanding)
                | (Phase::RaiseArm, Phase::Reposition)
                | (Phase::Reposition, Phase::Probe)
                | (Phase::Reposition, Phase::Descend)
                | (Phase::PlanLanding, Phase::Reposition)
                | (Phase::Descend, Phase::Landed)
        )
    }
}

impl std::fmt::Display for Phase {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.as_str())
    }
}

/// Why a run ended in [`Phase::Aborted`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AbortReason {
    Timeout,
    SearchExhausted,
    InclineTooSteep,
    SetpointUnreachable,
    DegenerateContacts,
    InvalidWorld,
}

impl AbortReason {
    pub fn as_str(&self) -> &'static str {
        match self {
            AbortReason::Timeout => "timeout",
            AbortReason::SearchExhausted => "search_exhausted",
            AbortReason::InclineTooSteep => "incline_too_steep",
            AbortReason::SetpointUnreachable => "setpoint_unreachable",
            AbortReason::DegenerateContacts => "degenerate_contacts",
            AbortReason::InvalidWorld => "invalid_world",
        }
    }
}

impl std::fmt::Display for AbortReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.as_str())
    }
}

/// State of one simulated arm: servo-faithful joint positions/velocities.
#[derive(Debug, Clone, Copy)]
pub struct ArmState {
    pub q: JointConfig,
    pub qd: JointVelocity,
}

/// Full plant state of the vehicle.
#[derive(Debug, Clone)]
pub struct VehicleState {
    /// World position of the body origin (m).
    pub p_b: Vec3,
    /// World velocity (m/s).
    pub v_b: Vec3,
    /// Body orientation in the world (world → body pose rotation).
    pub rot: Rot3,
    /// Body angular velocity, body frame (rad/s).
    pub omega: Vec3,
    pub arms: [ArmState; 2],
    pub phase: Phase,
}

impl VehicleState {
    pub fn at_rest(p_b: Vec3, yaw: f64) -> Self {
        VehicleState {
            p_b,
            v_b: Vec3::zeros(),
            rot: Rot3::rot_z(yaw),
            omega: Vec3::zeros(),
            arms: [
                ArmState { q: JointConfig::zero(), qd: JointVelocity::zero() },
                ArmState { q: JointConfig::zero(), qd: JointVelocity::zero() },
            ],
            phase: Phase::Approach,
        }
    }
}
