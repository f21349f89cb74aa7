//! Minimal 3D geometry kernel: vectors, rotation matrices, frame-labeled
//! rigid transforms, and the Z-Y-X (yaw-pitch-roll) Euler convention used
//! throughout the crate.
//!
//! World frame is North-East-Down, body frame is Forward-Right-Down, so
//! "up" is the negative z direction in both.

use nalgebra::{Matrix3, Vector3};
use thiserror::Error;

/// 3-vector of f64. Unit (m, m/s, rad/s, N·m) is carried by context.
pub type Vec3 = Vector3<f64>;

/// Number of compositions after which a rotation is re-orthonormalized.
const RENORM_INTERVAL: u32 = 100;

/// Tolerance for orthonormality validation.
pub const ORTHONORMAL_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeomError {
    #[error("frame mismatch: cannot compose pose into `{expected}` with pose from `{found}`")]
    FrameMismatch { expected: Frame, found: Frame },
    #[error("matrix is not a proper rotation (orthonormality residual {residual:.3e})")]
    NotRotation { residual: f64 },
    #[error("gimbal lock: |R[2,0]| = {sin_pitch:.12} too close to 1")]
    GimbalLock { sin_pitch: f64 },
}

/// Coordinate frame label attached to a [`Pose`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Frame {
    World,
    Body,
    /// End-effector frame of arm `1..=k`.
    EndEffector(u8),
}

impl std::fmt::Display for Frame {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Frame::World => write!(f, "world"),
            Frame::Body => write!(f, "body"),
            Frame::EndEffector(j) => write!(f, "ee{j}"),
        }
    }
}

/// Proper rotation matrix (row-major 3×3, det +1).
///
/// Rotations count how many products they have been through and
/// re-orthonormalize themselves every [`RENORM_INTERVAL`] compositions, so
/// long chains stay within [`ORTHONORMAL_TOL`].
#[derive(Debug, Clone, Copy)]
pub struct Rot3 {
    m: Matrix3<f64>,
    generation: u32,
}

impl Rot3 {
    pub fn identity() -> Self {
        Rot3 { m: Matrix3::identity(), generation: 0 }
    }

    /// Validates orthonormality and determinant before accepting the matrix.
    pub fn from_matrix(m: Matrix3<f64>) -> Result<Self, GeomError> {
        let residual = orthonormality_residual(&m);
        if residual > ORTHONORMAL_TOL {
            return Err(GeomError::NotRotation { residual });
        }
        Ok(Rot3 { m, generation: 0 })
    }

    /// Rotation about the x-axis by `angle` radians.
    pub fn rot_x(angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        Rot3 {
            m: Matrix3::new(1.0, 0.0, 0.0, 0.0, c, -s, 0.0, s, c),
            generation: 0,
        }
    }

    /// Rotation about the y-axis by `angle` radians.
    pub fn rot_y(angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        Rot3 {
            m: Matrix3::new(c, 0.0, s, 0.0, 1.0, 0.0, -s, 0.0, c),
            generation: 0,
        }
    }

    /// Rotation about the z-axis by `angle` radians.
    pub fn rot_z(angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        Rot3 {
            m: Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0),
            generation: 0,
        }
    }

    /// Rotation by the axis-angle vector `w` (axis `w/|w|`, angle `|w|`).
    pub fn from_scaled_axis(w: Vec3) -> Self {
        let r = nalgebra::Rotation3::from_scaled_axis(w);
        Rot3 { m: *r.matrix(), generation: 0 }
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.m
    }

    pub fn transpose(&self) -> Self {
        Rot3 { m: self.m.transpose(), generation: self.generation }
    }

    /// Alias for [`Rot3::transpose`]; a rotation inverse is its transpose.
    pub fn inverse(&self) -> Self {
        self.transpose()
    }

    pub fn orthonormality_residual(&self) -> f64 {
        orthonormality_residual(&self.m)
    }

    /// Gram–Schmidt re-orthonormalization, preserving the first column
    /// direction. Resets the composition counter.
    pub fn renormalize(&mut self) {
        let c0 = self.m.column(0).normalize();
        let c1 = self.m.column(1).into_owned();
        let c1 = (c1 - c0 * c0.dot(&c1)).normalize();
        let c2 = c0.cross(&c1);
        self.m = Matrix3::from_columns(&[c0, c1, c2]);
        self.generation = 0;
    }
}

impl std::ops::Mul<Rot3> for Rot3 {
    type Output = Rot3;

    fn mul(self, rhs: Rot3) -> Rot3 {
        let mut out = Rot3 {
            m: self.m * rhs.m,
            generation: self.generation + rhs.generation + 1,
        };
        if out.generation >= RENORM_INTERVAL {
            out.renormalize();
        }
        out
    }
}

impl std::ops::Mul<Vec3> for Rot3 {
    type Output = Vec3;

    fn mul(self, v: Vec3) -> Vec3 {
        self.m * v
    }
}

impl std::ops::Mul<Vec3> for &Rot3 {
    type Output = Vec3;

    fn mul(self, v: Vec3) -> Vec3 {
        self.m * v
    }
}

fn orthonormality_residual(m: &Matrix3<f64>) -> f64 {
    let gram = m * m.transpose() - Matrix3::identity();
    let ortho = gram.iter().fold(0.0f64, |acc, x| acc.max(x.abs()));
    let det = (m.determinant() - 1.0).abs();
    ortho.max(det)
}

/// Rigid transform labeled `from_frame → to_frame`.
///
/// A pose with `from_frame = a`, `to_frame = b` expresses frame `b` relative
/// to frame `a`: [`Pose::transform_point`] maps coordinates given in `b` into
/// coordinates in `a`. Composition `ab.compose(bc)` yields the `a → c` pose
/// and requires the inner labels to match.
#[derive(Debug, Clone, Copy)]
pub struct Pose {
    pub rotation: Rot3,
    pub translation: Vec3,
    pub from_frame: Frame,
    pub to_frame: Frame,
}

impl Pose {
    pub fn identity(frame: Frame) -> Self {
        Pose {
            rotation: Rot3::identity(),
            translation: Vec3::zeros(),
            from_frame: frame,
            to_frame: frame,
        }
    }

    pub fn new(rotation: Rot3, translation: Vec3, from_frame: Frame, to_frame: Frame) -> Self {
        Pose { rotation, translation, from_frame, to_frame }
    }

    /// `self ∘ other`, checking that `self.to_frame == other.from_frame`.
    pub fn compose(&self, other: &Pose) -> Result<Pose, GeomError> {
        if self.to_frame != other.from_frame {
            return Err(GeomError::FrameMismatch {
                expected: self.to_frame,
                found: other.from_frame,
            });
        }
        Ok(self.compose_unchecked(other))
    }

    /// Composition without the frame-label check.
    pub fn compose_unchecked(&self, other: &Pose) -> Pose {
        Pose {
            rotation: self.rotation * other.rotation,
            translation: self.translation + self.rotation * other.translation,
            from_frame: self.from_frame,
            to_frame: other.to_frame,
        }
    }

    pub fn inverse(&self) -> Pose {
        let rt = self.rotation.transpose();
        Pose {
            translation: -(rt * self.translation),
            rotation: rt,
            from_frame: self.to_frame,
            to_frame: self.from_frame,
        }
    }

    /// Maps a point expressed in `to_frame` into `from_frame` coordinates.
    pub fn transform_point(&self, p: Vec3) -> Vec3 {
        self.rotation * p + self.translation
    }

    /// Rotates a direction (no translation) from `to_frame` into `from_frame`.
    pub fn transform_direction(&self, d: Vec3) -> Vec3 {
        self.rotation * d
    }
}

/// Roll-pitch-yaw angles, Z-Y-X intrinsic (yaw, then pitch, then roll),
/// matching the NED/FRD aerospace convention.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EulerRPY {
    pub roll: f64,
    pub pitch: f64,
    pub yaw: f64,
}

impl EulerRPY {
    pub fn new(roll: f64, pitch: f64, yaw: f64) -> Self {
        EulerRPY { roll, pitch, yaw }
    }

    pub fn zero() -> Self {
        EulerRPY { roll: 0.0, pitch: 0.0, yaw: 0.0 }
    }
}

/// R = Rz(yaw) · Ry(pitch) · Rx(roll).
pub fn rpy_to_rot(e: EulerRPY) -> Rot3 {
    let r = Rot3::rot_z(e.yaw) * Rot3::rot_y(e.pitch) * Rot3::rot_x(e.roll);
    Rot3 { m: r.m, generation: 0 }
}

/// Inverse of [`rpy_to_rot`]. Rejects inputs within `1e-9` of gimbal lock
/// (|pitch| = π/2), where roll and yaw are no longer separable.
pub fn rot_to_rpy(r: &Rot3) -> Result<EulerRPY, GeomError> {
    let m = r.matrix();
    let sin_pitch = -m[(2, 0)];
    if sin_pitch.abs() >= 1.0 - 1e-9 {
        return Err(GeomError::GimbalLock { sin_pitch: sin_pitch.abs() });
    }
    Ok(EulerRPY {
        roll: m[(2, 1)].atan2(m[(2, 2)]),
        pitch: sin_pitch.asin(),
        yaw: m[(1, 0)].atan2(m[(0, 0)]),
    })
}

/// Wraps an angle to (−π, π].
pub fn wrap_angle(a: f64) -> f64 {
    let two_pi = 2.0 * std::f64::consts::PI;
    let mut x = a % two_pi;
    if x <= -std::f64::consts::PI {
        x += two_pi;
    } else if x > std::f64::consts::PI {
        x -= two_pi;
    }
    x
}
