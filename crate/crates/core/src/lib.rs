//! Proprioceptive contact detection, contact localization, surface incline
//! estimation, and slope-landing planning for a dual-arm aerial manipulator,
//! together with a deterministic quasi-static simulator that closes the loop.
//!
//! Module map:
//!
//! * [`se3`] — vectors, rotations, frame-labeled rigid transforms
//! * [`kinematics`] — 3R arm forward/inverse/differential kinematics
//! * [`observer`] — momentum-based external torque observer
//! * [`contact`] — contact detection, arm attribution, world-frame contact points
//! * [`landing`] — plane estimation, heading/incline extraction, landing plans
//! * [`config`] — flat key-value scenario configuration
//! * [`sim`] — plant model, pipeline state machine, telemetry, replay

pub mod config;
pub mod contact;
pub mod kinematics;
pub mod landing;
pub mod observer;
pub mod se3;
pub mod sim;

pub use se3::{Frame, Pose, Rot3, Vec3};
