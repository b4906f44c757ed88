//! Nonlinear rigid-body dynamics, motor model and fixed-step integration.
//!
//! Conventions: ENU inertial frame, body frame at the center of gravity in
//! X configuration, rotor speeds carried in rpm and converted to forces only
//! inside the wrench formulas.

use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};
use crate::params::PhysicalParams;
use crate::state::{BodyWrench, MotorPwm, MotorSpeeds, State, PWM_MAX};

/// Pitch margin from pi/2 below which the Euler-rate map is rejected.
pub const DEFAULT_GIMBAL_EPS: f64 = 1e-3;

/// Slope and intercept of the PWM-to-rpm motor characterization.
pub const RPM_PER_PWM: f64 = 0.2685;
pub const RPM_AT_ZERO_PWM: f64 = 4070.3;

/// Z-Y-X Euler rotation taking inertial coordinates into the body frame.
pub fn rotation_inertial_to_body(psi: f64, theta: f64, phi: f64) -> Matrix3<f64> {
    let (s_psi, c_psi) = psi.sin_cos();
    let (s_th, c_th) = theta.sin_cos();
    let (s_phi, c_phi) = phi.sin_cos();
    Matrix3::new(
        c_th * c_psi,
        c_th * s_psi,
        -s_th,
        s_phi * s_th * c_psi - c_phi * s_psi,
        s_phi * s_th * s_psi + c_phi * c_psi,
        s_phi * c_th,
        c_phi * s_th * c_psi + s_phi * s_psi,
        c_phi * s_th * s_psi - s_phi * c_psi,
        c_phi * c_th,
    )
}

/// Thrust and moments produced by the four rotors (X configuration).
pub fn motor_forces_and_moments(w: &MotorSpeeds, params: &PhysicalParams) -> BodyWrench {
    let [w1, w2, w3, w4] = w.0;
    let (s1, s2, s3, s4) = (w1 * w1, w2 * w2, w3 * w3, w4 * w4);
    let arm = params.d * params.c_t / std::f64::consts::SQRT_2;
    BodyWrench {
        fz: params.c_t * (s1 + s2 + s3 + s4),
        mx: arm * (-s1 - s2 + s3 + s4),
        my: arm * (-s1 + s2 + s3 - s4),
        mz: params.c_d * (-s1 + s2 - s3 + s4),
    }
}

/// Full nonlinear state derivative.
///
/// Body-frame translational dynamics with gravity projected by the Euler
/// rotation, inertial position kinematics, diagonal-inertia rotational
/// dynamics and the Euler-angle rate map. Fails with
/// [`Error::GimbalLock`] when `|theta|` comes within `eps` of pi/2.
pub fn state_derivative_eps(
    s: &State,
    w: &MotorSpeeds,
    params: &PhysicalParams,
    eps: f64,
) -> Result<State> {
    if s.theta.abs() >= std::f64::consts::FRAC_PI_2 - eps {
        return Err(Error::GimbalLock { theta: s.theta, eps, time: None });
    }
    let rot_ib = rotation_inertial_to_body(s.psi, s.theta, s.phi);
    let wrench = motor_forces_and_moments(w, params);

    let vel_b = s.body_velocity();
    let rates = s.body_rates(); // [p q r]

    // Translational dynamics in the body frame.
    let thrust = Vector3::new(0.0, 0.0, wrench.fz / params.m_total);
    let gravity_b = rot_ib * Vector3::new(0.0, 0.0, params.g);
    let vel_dot = thrust - gravity_b - rates.cross(&vel_b);

    // Position kinematics in the inertial frame.
    let pos_dot = rot_ib.transpose() * vel_b;

    // Rotational dynamics with diagonal inertia.
    let inertia = Vector3::new(params.ixx, params.iyy, params.izz);
    let h = inertia.component_mul(&rates);
    let moments = Vector3::new(wrench.mx, wrench.my, wrench.mz);
    let torque = moments - rates.cross(&h);
    let rates_dot = Vector3::new(torque.x / params.ixx, torque.y / params.iyy, torque.z / params.izz);

    // Euler-angle kinematics.
    let (s_phi, c_phi) = s.phi.sin_cos();
    let tan_th = s.theta.tan();
    let cos_th = s.theta.cos();
    let (p, q, r) = (rates.x, rates.y, rates.z);
    let phi_dot = p + s_phi * tan_th * q + c_phi * tan_th * r;
    let theta_dot = c_phi * q - s_phi * r;
    let psi_dot = (s_phi * q + c_phi * r) / cos_th;

    Ok(State {
        x: pos_dot.x,
        y: pos_dot.y,
        z: pos_dot.z,
        psi: psi_dot,
        theta: theta_dot,
        phi: phi_dot,
        u: vel_dot.x,
        v: vel_dot.y,
        w: vel_dot.z,
        r: rates_dot.z,
        q: rates_dot.y,
        p: rates_dot.x,
    })
}

pub fn state_derivative(s: &State, w: &MotorSpeeds, params: &PhysicalParams) -> Result<State> {
    state_derivative_eps(s, w, params, DEFAULT_GIMBAL_EPS)
}

/// Affine motor characterization, PWM counts to rpm.
pub fn pwm_to_rpm(pwm: f64) -> Result<f64> {
    if !(0.0..=PWM_MAX).contains(&pwm) {
        return Err(Error::OutOfRange { what: "pwm", value: pwm, lo: 0.0, hi: PWM_MAX });
    }
    Ok(RPM_PER_PWM * pwm + RPM_AT_ZERO_PWM)
}

/// Inverse motor characterization, clamped to the 16-bit PWM range.
pub fn rpm_to_pwm(rpm: f64) -> u16 {
    let raw = (rpm - RPM_AT_ZERO_PWM) / RPM_PER_PWM;
    raw.round().clamp(0.0, PWM_MAX) as u16
}

/// Map PWM commands to rotor speeds.
pub fn pwm_to_speeds(pwm: &MotorPwm) -> MotorSpeeds {
    MotorSpeeds([
        RPM_PER_PWM * f64::from(pwm.0[0]) + RPM_AT_ZERO_PWM,
        RPM_PER_PWM * f64::from(pwm.0[1]) + RPM_AT_ZERO_PWM,
        RPM_PER_PWM * f64::from(pwm.0[2]) + RPM_AT_ZERO_PWM,
        RPM_PER_PWM * f64::from(pwm.0[3]) + RPM_AT_ZERO_PWM,
    ])
}

/// Classical fourth-order Runge-Kutta step with rotor speeds held constant.
pub fn integrate_step(
    s: &State,
    w: &MotorSpeeds,
    dt: f64,
    params: &PhysicalParams,
) -> Result<State> {
    integrate_step_eps(s, w, dt, params, DEFAULT_GIMBAL_EPS)
}

pub fn integrate_step_eps(
    s: &State,
    w: &MotorSpeeds,
    dt: f64,
    params: &PhysicalParams,
    eps: f64,
) -> Result<State> {
    debug_assert!(dt > 0.0);
    let x0 = s.to_vector();
    let k1 = state_derivative_eps(s, w, params, eps)?.to_vector();
    let k2 = state_derivative_eps(&State::from_vector(&(x0 + 0.5 * dt * k1)), w, params, eps)?
        .to_vector();
    let k3 = state_derivative_eps(&State::from_vector(&(x0 + 0.5 * dt * k2)), w, params, eps)?
        .to_vector();
    let k4 =
        state_derivative_eps(&State::from_vector(&(x0 + dt * k3)), w, params, eps)?.to_vector();
    let next = x0 + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    Ok(State::from_vector(&next))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linear::equilibrium;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn params() -> PhysicalParams {
        PhysicalParams::crazyflie2()
    }

    #[test]
    fn rotation_at_zero_is_identity() {
        let r = rotation_inertial_to_body(0.0, 0.0, 0.0);
        assert_abs_diff_eq!(r, Matrix3::identity(), epsilon = 1e-15);
    }

    #[test]
    fn rotation_pure_yaw_quarter_turn() {
        let r = rotation_inertial_to_body(std::f64::consts::FRAC_PI_2, 0.0, 0.0);
        let expected = Matrix3::new(0.0, 1.0, 0.0, -1.0, 0.0, 0.0, 0.0, 0.0, 1.0);
        assert_abs_diff_eq!(r, expected, epsilon = 1e-15);
    }

    #[test]
    fn hover_wrench_balances_weight() {
        let p = params();
        let (_, _, omega_e) = equilibrium(&p);
        let wrench = motor_forces_and_moments(&MotorSpeeds::uniform(omega_e), &p);
        let weight = p.m_total * p.g;
        assert!((wrench.fz - weight).abs() / weight < 0.01);
        assert_abs_diff_eq!(wrench.mx, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(wrench.my, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(wrench.mz, 0.0, epsilon = 1e-15);
    }

    #[test]
    fn zero_speed_gives_zero_wrench() {
        let wrench = motor_forces_and_moments(&MotorSpeeds::default(), &params());
        assert_eq!(wrench, BodyWrench::default());
    }

    #[test]
    fn diagonal_motor_pair_only_produces_yaw_moment() {
        let p = params();
        let (_, _, omega_e) = equilibrium(&p);
        let wrench =
            motor_forces_and_moments(&MotorSpeeds([0.0, omega_e, 0.0, omega_e]), &p);
        assert_abs_diff_eq!(wrench.mx, 0.0, epsilon = 1e-18);
        assert_abs_diff_eq!(wrench.my, 0.0, epsilon = 1e-18);
        assert_abs_diff_eq!(wrench.mz, 2.0 * p.c_d * omega_e * omega_e, epsilon = 1e-15);
    }

    #[test]
    fn hover_is_an_equilibrium() {
        let p = params();
        let (x_e, u_e, _) = equilibrium(&p);
        let dot = state_derivative(&x_e, &u_e, &p).unwrap().to_vector();
        for (i, v) in dot.iter().enumerate() {
            assert!(v.abs() < 1e-3, "component {i} = {v}");
        }
    }

    #[test]
    fn unpowered_level_flight_is_free_fall() {
        let p = params();
        let s = State { z: 1.0, ..Default::default() };
        let dot = state_derivative(&s, &MotorSpeeds::default(), &p).unwrap();
        assert_abs_diff_eq!(dot.w, -p.g, epsilon = 1e-12);
        assert_abs_diff_eq!(dot.u, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(dot.v, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn torque_free_rates_stay_zero() {
        let p = params();
        let mut s = State { z: 2.0, ..Default::default() };
        for _ in 0..100 {
            s = integrate_step(&s, &MotorSpeeds::default(), 1e-3, &p).unwrap();
        }
        assert_eq!(s.p, 0.0);
        assert_eq!(s.q, 0.0);
        assert_eq!(s.r, 0.0);
    }

    #[test]
    fn gimbal_lock_is_reported() {
        let p = params();
        let s = State { theta: std::f64::consts::FRAC_PI_2 - 1e-4, ..Default::default() };
        let err = state_derivative(&s, &MotorSpeeds::default(), &p).unwrap_err();
        assert!(matches!(err, Error::GimbalLock { .. }));
    }

    #[test]
    fn pwm_to_rpm_matches_characterization() {
        assert_abs_diff_eq!(pwm_to_rpm(0.0).unwrap(), 4070.3, epsilon = 1e-12);
        assert!((pwm_to_rpm(44705.0).unwrap() - 16073.6).abs() < 1.0);
        assert_abs_diff_eq!(pwm_to_rpm(65535.0).unwrap(), 21666.4, epsilon = 0.1);
        assert!(pwm_to_rpm(-1.0).is_err());
        assert!(pwm_to_rpm(65536.0).is_err());
    }

    #[test]
    fn rpm_to_pwm_inverse_and_clamp() {
        // The published hover word 44705 corresponds to 16073.6 rpm.
        assert!((i32::from(rpm_to_pwm(16073.6)) - 44705).abs() <= 1);
        assert_eq!(rpm_to_pwm(4070.3), 0);
        assert_eq!(rpm_to_pwm(1e6), 65535);
        assert_eq!(rpm_to_pwm(0.0), 0);
    }

    #[test]
    fn hover_integration_is_stationary() {
        let p = params();
        let (x_e, u_e, _) = equilibrium(&p);
        let next = integrate_step(&x_e, &u_e, 1e-3, &p).unwrap();
        let drift = (next.to_vector() - x_e.to_vector()).amax();
        assert!(drift < 1e-9, "drift = {drift:e}");
    }

    #[test]
    fn one_second_free_fall_matches_ballistics() {
        let p = params();
        let mut s = State { z: 10.0, ..Default::default() };
        let dt = 1e-3;
        for _ in 0..1000 {
            s = integrate_step(&s, &MotorSpeeds::default(), dt, &p).unwrap();
        }
        let expected_drop = 0.5 * p.g;
        assert!((10.0 - s.z - expected_drop).abs() < 1e-6, "z = {}", s.z);
    }

    #[test]
    fn rk4_converges_at_fourth_order() {
        // Richardson comparison against a dt/100 reference on a tumbling,
        // thrusting trajectory.
        let p = params();
        let s0 = State {
            z: 1.0,
            phi: 0.1,
            theta: -0.05,
            u: 0.2,
            v: -0.1,
            w: 0.05,
            p: 0.4,
            q: -0.3,
            r: 0.2,
            ..Default::default()
        };
        let w = MotorSpeeds([16500.0, 15800.0, 16200.0, 15900.0]);
        let horizon = 0.2;

        let run = |dt: f64| -> State {
            let n = (horizon / dt).round() as usize;
            let mut s = s0;
            for _ in 0..n {
                s = integrate_step(&s, &w, dt, &p).unwrap();
            }
            s
        };

        let reference = run(1e-5);
        let err_coarse = (run(1e-3).to_vector() - reference.to_vector()).norm();
        let err_fine = (run(5e-4).to_vector() - reference.to_vector()).norm();
        let order = (err_coarse / err_fine).log2();
        assert!(order > 3.5, "observed order {order:.2} (errors {err_coarse:e} / {err_fine:e})");
    }

    proptest! {
        #[test]
        fn rotation_is_orthogonal(
            psi in -std::f64::consts::PI..std::f64::consts::PI,
            theta in -1.5f64..1.5,
            phi in -std::f64::consts::PI..std::f64::consts::PI,
        ) {
            let r = rotation_inertial_to_body(psi, theta, phi);
            let gram = r.transpose() * r;
            prop_assert!((gram - Matrix3::identity()).amax() < 1e-12);
            prop_assert!((r.determinant() - 1.0).abs() < 1e-12);
        }

        #[test]
        fn pwm_round_trip_within_one_count(pwm in 0u16..=65535) {
            let rpm = pwm_to_rpm(f64::from(pwm)).unwrap();
            let back = rpm_to_pwm(rpm);
            prop_assert_eq!(back, pwm);
            // One count is 0.2685 rpm; the round trip through rounding
            // never moves more than half a count.
            let rpm_back = pwm_to_rpm(f64::from(back)).unwrap();
            prop_assert!((rpm_back - rpm).abs() <= 0.27);
        }
    }
}
