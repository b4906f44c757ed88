//! State vector and actuator types.
//!
//! The 12-dimensional state is ordered `[x y z psi theta phi u v w r q p]`
//! everywhere in this crate: inertial position, Z-Y-X Euler angles,
//! body-frame linear velocity, body-frame angular rates. All modules index
//! into state vectors through the `idx` constants below so the ordering is
//! defined in exactly one place.

use nalgebra::{SVector, Vector3};
use serde::{Deserialize, Serialize};

/// Canonical indices into the 12-state vector.
pub mod idx {
    pub const X: usize = 0;
    pub const Y: usize = 1;
    pub const Z: usize = 2;
    pub const PSI: usize = 3;
    pub const THETA: usize = 4;
    pub const PHI: usize = 5;
    pub const U: usize = 6;
    pub const V: usize = 7;
    pub const W: usize = 8;
    pub const R: usize = 9;
    pub const Q: usize = 10;
    pub const P: usize = 11;

    /// Position + velocity states handled off-board: `[x y z u v w]`.
    pub const POSITION_BLOCK: [usize; 6] = [X, Y, Z, U, V, W];
    /// Angle + rate states handled on-board: `[psi theta phi r q p]`.
    pub const ANGULAR_BLOCK: [usize; 6] = [PSI, THETA, PHI, R, Q, P];
}

/// Short labels in state order, used by CSV headers and diagnostics.
pub const STATE_NAMES: [&str; 12] =
    ["x", "y", "z", "psi", "theta", "phi", "u", "v", "w", "r", "q", "p"];

pub type StateVector = SVector<f64, 12>;

/// Full rigid-body state of the quadcopter.
///
/// Units: positions in m, angles in rad, linear velocities in m/s,
/// angular rates in rad/s.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct State {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub psi: f64,
    pub theta: f64,
    pub phi: f64,
    pub u: f64,
    pub v: f64,
    pub w: f64,
    pub r: f64,
    pub q: f64,
    pub p: f64,
}

impl State {
    pub fn to_vector(&self) -> StateVector {
        StateVector::from_column_slice(&[
            self.x, self.y, self.z, self.psi, self.theta, self.phi, self.u, self.v, self.w,
            self.r, self.q, self.p,
        ])
    }

    pub fn from_vector(v: &StateVector) -> Self {
        State {
            x: v[idx::X],
            y: v[idx::Y],
            z: v[idx::Z],
            psi: v[idx::PSI],
            theta: v[idx::THETA],
            phi: v[idx::PHI],
            u: v[idx::U],
            v: v[idx::V],
            w: v[idx::W],
            r: v[idx::R],
            q: v[idx::Q],
            p: v[idx::P],
        }
    }

    pub fn position(&self) -> Vector3<f64> {
        Vector3::new(self.x, self.y, self.z)
    }

    pub fn body_velocity(&self) -> Vector3<f64> {
        Vector3::new(self.u, self.v, self.w)
    }

    /// Angular rates as `[p q r]` (the dynamics-convention order).
    pub fn body_rates(&self) -> Vector3<f64> {
        Vector3::new(self.p, self.q, self.r)
    }

    pub fn is_finite(&self) -> bool {
        self.to_vector().iter().all(|v| v.is_finite())
    }
}

/// Rotor speeds in rpm, one per motor, M1..M4.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MotorSpeeds(pub [f64; 4]);

impl MotorSpeeds {
    pub fn uniform(rpm: f64) -> Self {
        MotorSpeeds([rpm; 4])
    }

    pub fn is_valid(&self) -> bool {
        self.0.iter().all(|w| w.is_finite() && *w >= 0.0)
    }
}

/// 16-bit PWM counts sent to the motors, M1..M4.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct MotorPwm(pub [u16; 4]);

pub const PWM_MAX: f64 = 65535.0;

/// Collective body-frame thrust and moments produced by the rotors.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct BodyWrench {
    /// Thrust along body z [N].
    pub fz: f64,
    /// Moment around body x [N m].
    pub mx: f64,
    /// Moment around body y [N m].
    pub my: f64,
    /// Moment around body z [N m].
    pub mz: f64,
}
