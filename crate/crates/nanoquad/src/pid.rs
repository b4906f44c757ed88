//! Cascaded PID architecture: on-board rate and attitude loops, the control
//! mixer, and the off-board altitude / X-Y / yaw position controllers.
//!
//! Controllers work in degrees and degrees-per-second (the firmware gain
//! tables are only sensible in those units); the dynamics core stays in
//! radians, with conversion at the harness boundary.

use serde::{Deserialize, Serialize};

use crate::kalman::inertial_to_body_velocity;
use crate::state::{MotorPwm, PWM_MAX};

/// Feedforward PWM holding hover, `(omega_e - 4070.3) / 0.2685` evaluated at
/// the published equilibrium speed. The firmware constant, not recomputed
/// from the physical parameters.
pub const PWM_HOVER: f64 = 44705.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PidGains {
    pub kp: f64,
    pub ki: f64,
    pub kd: f64,
    /// Clamp on the integral accumulator (in error-units times seconds).
    pub integral_limit: Option<f64>,
    /// Saturation applied to the output.
    pub output_limit: Option<(f64, f64)>,
}

impl Default for PidGains {
    fn default() -> Self {
        PidGains { kp: 0.0, ki: 0.0, kd: 0.0, integral_limit: None, output_limit: None }
    }
}

impl PidGains {
    pub fn p(kp: f64) -> Self {
        PidGains { kp, ..Default::default() }
    }

    pub fn pi(kp: f64, ki: f64) -> Self {
        PidGains { kp, ki, ..Default::default() }
    }

    pub fn validate(&self) -> crate::Result<()> {
        if let Some((lo, hi)) = self.output_limit {
            if lo >= hi {
                return Err(crate::Error::config(format!(
                    "output limit [{lo}, {hi}] is empty"
                )));
            }
        }
        Ok(())
    }
}

/// Runtime state of one PID loop.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PidState {
    pub integral: f64,
    pub prev_error: f64,
    pub last_output: f64,
    /// Set when the last output hit a saturation limit.
    pub saturated: bool,
}

impl PidState {
    pub fn reset(&mut self) {
        *self = PidState::default();
    }
}

/// One discrete PID step.
///
/// The integral accumulates before the output is formed, so a constant
/// error gives the same trajectory whether stepped with `dt` or twice with
/// `dt/2`. Anti-windup is conditional integration: the accumulator keeps
/// its previous value whenever the output saturates in the direction the
/// error is pushing.
pub fn pid_step(gains: &PidGains, state: &mut PidState, error: f64, dt: f64) -> f64 {
    debug_assert!(dt > 0.0);
    let previous_integral = state.integral;
    let mut integral = state.integral + error * dt;
    if let Some(limit) = gains.integral_limit {
        integral = integral.clamp(-limit, limit);
    }
    let derivative = (error - state.prev_error) / dt;
    let raw = gains.kp * error + gains.ki * integral + gains.kd * derivative;

    let (output, saturated) = match gains.output_limit {
        Some((lo, _)) if raw < lo => (lo, true),
        Some((_, hi)) if raw > hi => (hi, true),
        _ => (raw, false),
    };
    if saturated && error * raw > 0.0 {
        // Pushing further into the limit: freeze the accumulator.
        integral = previous_integral;
    }

    state.integral = integral;
    state.prev_error = error;
    state.last_output = output;
    state.saturated = saturated;
    output
}

/// Inner-loop body-rate controller (500 Hz). Inputs in deg/s, outputs in
/// PWM-count deviations.
#[derive(Debug, Clone, PartialEq)]
pub struct RateController {
    pub roll: PidGains,
    pub pitch: PidGains,
    pub yaw: PidGains,
    pub roll_state: PidState,
    pub pitch_state: PidState,
    pub yaw_state: PidState,
}

impl Default for RateController {
    fn default() -> Self {
        RateController {
            roll: PidGains::p(70.0),
            pitch: PidGains::p(70.0),
            yaw: PidGains::pi(70.0, 16.7),
            roll_state: PidState::default(),
            pitch_state: PidState::default(),
            yaw_state: PidState::default(),
        }
    }
}

impl RateController {
    /// `(d_phi, d_theta, d_psi)` from rate setpoints and measurements.
    pub fn update(
        &mut self,
        p_c: f64,
        q_c: f64,
        r_c: f64,
        p: f64,
        q: f64,
        r: f64,
        dt: f64,
    ) -> (f64, f64, f64) {
        let d_phi = pid_step(&self.roll, &mut self.roll_state, p_c - p, dt);
        let d_theta = pid_step(&self.pitch, &mut self.pitch_state, q_c - q, dt);
        let d_psi = pid_step(&self.yaw, &mut self.yaw_state, r_c - r, dt);
        (d_phi, d_theta, d_psi)
    }

    pub fn reset(&mut self) {
        self.roll_state.reset();
        self.pitch_state.reset();
        self.yaw_state.reset();
    }
}

/// Outer-loop attitude controller (250 Hz). Angle errors in degrees,
/// rate setpoints in deg/s.
#[derive(Debug, Clone, PartialEq)]
pub struct AttitudeController {
    pub roll: PidGains,
    pub pitch: PidGains,
    pub roll_state: PidState,
    pub pitch_state: PidState,
}

impl Default for AttitudeController {
    fn default() -> Self {
        AttitudeController {
            roll: PidGains::pi(3.5, 2.0),
            pitch: PidGains::pi(3.5, 2.0),
            roll_state: PidState::default(),
            pitch_state: PidState::default(),
        }
    }
}

impl AttitudeController {
    /// `(p_c, q_c)` from attitude setpoints and estimates.
    pub fn update(&mut self, phi_c: f64, theta_c: f64, phi: f64, theta: f64, dt: f64) -> (f64, f64) {
        let p_c = pid_step(&self.roll, &mut self.roll_state, phi_c - phi, dt);
        let q_c = pid_step(&self.pitch, &mut self.pitch_state, theta_c - theta, dt);
        (p_c, q_c)
    }

    pub fn reset(&mut self) {
        self.roll_state.reset();
        self.pitch_state.reset();
    }
}

/// Which motor-mixing sign convention to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MixerVariant {
    /// The shipped firmware's X-configuration mixer.
    #[default]
    Firmware,
    /// The variant printed in the report body (m4 repeats the m1 roll and
    /// pitch signs); kept for comparison.
    Report,
}

/// Distribute base thrust and the rate-loop corrections to the motors.
/// Returns the clamped PWM words plus a per-motor saturation mask.
pub fn control_mixer(
    omega: f64,
    d_phi: f64,
    d_theta: f64,
    d_psi: f64,
    variant: MixerVariant,
) -> (MotorPwm, [bool; 4]) {
    let r = d_phi / 2.0;
    let p = d_theta / 2.0;
    let raw = match variant {
        MixerVariant::Firmware => [
            omega - r - p - d_psi,
            omega - r + p + d_psi,
            omega + r + p - d_psi,
            omega + r - p + d_psi,
        ],
        MixerVariant::Report => [
            omega - r - p - d_psi,
            omega + r - p + d_psi,
            omega + r + p - d_psi,
            omega - r - p + d_psi,
        ],
    };
    let mut pwm = [0u16; 4];
    let mut saturated = [false; 4];
    for (i, value) in raw.iter().enumerate() {
        let clamped = value.clamp(0.0, PWM_MAX);
        saturated[i] = clamped != *value;
        pwm[i] = clamped.round() as u16;
    }
    (MotorPwm(pwm), saturated)
}

/// Off-board altitude controller (100 Hz): deviation PID around the hover
/// feedforward. Errors in meters, output in PWM counts.
#[derive(Debug, Clone, PartialEq)]
pub struct AltitudeController {
    pub gains: PidGains,
    pub feedforward: f64,
    pub state: PidState,
}

impl Default for AltitudeController {
    fn default() -> Self {
        AltitudeController {
            gains: PidGains {
                kp: 11000.0,
                ki: 3500.0,
                kd: 9000.0,
                integral_limit: None,
                output_limit: Some((-20000.0, 15000.0)),
            },
            feedforward: PWM_HOVER,
            state: PidState::default(),
        }
    }
}

impl AltitudeController {
    /// Base thrust word for the mixer.
    pub fn update(&mut self, z_c: f64, z: f64, dt: f64) -> f64 {
        self.feedforward + pid_step(&self.gains, &mut self.state, z_c - z, dt)
    }
}

/// Off-board X-Y position controller (100 Hz).
///
/// Position errors are rotated into the body frame and act as velocity
/// setpoints; a PI loop on the velocity error produces the attitude
/// commands in degrees. The Y channel gains are inverted because positive
/// roll moves the vehicle toward negative Y.
#[derive(Debug, Clone, PartialEq)]
pub struct XyPositionController {
    pub x: PidGains,
    pub y: PidGains,
    pub x_state: PidState,
    pub y_state: PidState,
}

impl Default for XyPositionController {
    fn default() -> Self {
        let limit = Some((-30.0, 30.0));
        XyPositionController {
            x: PidGains { kp: 30.0, ki: 2.0, output_limit: limit, ..Default::default() },
            y: PidGains { kp: -30.0, ki: -2.0, output_limit: limit, ..Default::default() },
            x_state: PidState::default(),
            y_state: PidState::default(),
        }
    }
}

impl XyPositionController {
    /// `(phi_c, theta_c)` in degrees from inertial position errors [m],
    /// yaw [rad] and body-frame velocity estimates [m/s].
    #[allow(clippy::too_many_arguments)]
    pub fn update(
        &mut self,
        x_c: f64,
        y_c: f64,
        x: f64,
        y: f64,
        psi: f64,
        u: f64,
        v: f64,
        dt: f64,
    ) -> (f64, f64) {
        let (x_err_b, y_err_b) = inertial_to_body_velocity(x_c - x, y_c - y, psi);
        let phi_c = pid_step(&self.x, &mut self.x_state, x_err_b - u, dt);
        let theta_c = pid_step(&self.y, &mut self.y_state, y_err_b - v, dt);
        (phi_c, theta_c)
    }
}

/// Off-board yaw position controller: pure proportional with the error
/// wrapped to (-180, 180] degrees and the rate clamped to +-200 deg/s.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct YawPositionController {
    pub kp: f64,
    pub rate_limit: f64,
}

impl Default for YawPositionController {
    fn default() -> Self {
        YawPositionController { kp: 3.0, rate_limit: 200.0 }
    }
}

impl YawPositionController {
    /// `r_c` in deg/s from setpoint and measurement in degrees.
    pub fn update(&self, psi_c_deg: f64, psi_deg: f64) -> f64 {
        let error = wrap_degrees(psi_c_deg - psi_deg);
        (self.kp * error).clamp(-self.rate_limit, self.rate_limit)
    }
}

/// Wrap an angle in degrees to (-180, 180].
pub fn wrap_degrees(angle: f64) -> f64 {
    let wrapped = angle.rem_euclid(360.0);
    if wrapped > 180.0 {
        wrapped - 360.0
    } else {
        wrapped
    }
}
