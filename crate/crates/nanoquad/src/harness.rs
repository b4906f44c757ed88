//! Multi-rate closed-loop simulation engine.
//!
//! One fixed-step loop drives everything: physics at the configured rate
//! (default 1 kHz RK4), the on-board rate loop every 2 ms, the attitude
//! loop every 4 ms, and the off-board controller plus measurement pipeline
//! every 10 ms, with the flight log emitted at 100 Hz. Controllers hold
//! their last output between ticks (zero-order hold). Off-board outputs can
//! be delayed by a radio-latency queue quantized to inner-loop ticks.
//!
//! Within one physics step the order is fixed: off-board tick, command
//! queue release, attitude tick, rate tick (motor words), log sample,
//! integration. Identical `(scenario, seed)` pairs therefore reproduce
//! identical logs bit for bit.

use std::collections::VecDeque;

use nalgebra::{Vector3, Vector4};

use crate::dynamics::{integrate_step_eps, pwm_to_rpm, pwm_to_speeds, DEFAULT_GIMBAL_EPS};
use crate::error::{Error, Result};
use crate::kalman::{
    inertial_to_body_velocity, kf_step, pseudo_derivative_velocity, KalmanConfig, KalmanState,
};
use crate::linear::{build_continuous, discretize_zoh};
use crate::lqt::{rpm_command_to_pwm, IntegralAction, LqtProblem, LqtSolution};
use crate::noise::NoiseRegime;
use crate::params::PhysicalParams;
use crate::pid::{
    control_mixer, AltitudeController, AttitudeController, MixerVariant, RateController,
    XyPositionController, YawPositionController,
};
use crate::scenario::{ControllerKind, MetricsConfig, ReferenceSpec, Scenario, LOG_HZ};
use crate::state::{idx, MotorPwm, MotorSpeeds, State, StateVector};
use crate::trajectory::{
    interpolate, profile_to_reference, InterpMethod, PositionProfile, ReferenceTrajectory,
};

/// One 100 Hz log sample.
#[derive(Debug, Clone, PartialEq)]
pub struct FlightRecord {
    pub t: f64,
    pub truth: State,
    /// Estimated position seen by the off-board controller.
    pub est_position: Vector3<f64>,
    /// Estimated inertial velocity seen by the off-board controller.
    pub est_velocity: Vector3<f64>,
    /// Reference sample; the `psi` row carries the yaw setpoint.
    pub reference: StateVector,
    pub pwm: MotorPwm,
    /// Per-motor saturation since the previous log sample.
    pub saturated: [bool; 4],
}

/// Complete simulation output at the log rate.
#[derive(Debug, Clone, PartialEq)]
pub struct FlightLog {
    pub ts: f64,
    pub controller: ControllerKind,
    pub records: Vec<FlightRecord>,
    pub metrics: MetricsConfig,
}

impl FlightLog {
    pub fn duration(&self) -> f64 {
        self.records.len() as f64 * self.ts
    }
}

/// Off-board controller output traveling through the radio.
enum OffboardCmd {
    Pid { omega: f64, phi_c_deg: f64, theta_c_deg: f64, r_c_deg: f64 },
    Lqt { du_pos: Vector4<f64> },
}

struct Pending {
    release_step: u64,
    cmd: OffboardCmd,
}

struct PidRuntime {
    rate: RateController,
    attitude: AttitudeController,
    altitude: AltitudeController,
    xy: XyPositionController,
    yaw: YawPositionController,
    mixer: MixerVariant,
    prev_meas_pos: Option<Vector3<f64>>,
    // Held commands (zero-order hold between ticks).
    omega: f64,
    phi_c_deg: f64,
    theta_c_deg: f64,
    r_c_deg: f64,
    p_c_deg: f64,
    q_c_deg: f64,
}

struct LqtRuntime {
    solution: LqtSolution,
    integral: IntegralAction,
    base_rpm: f64,
    kf_config: KalmanConfig,
    kf: Option<KalmanState>,
    du_pos: Vector4<f64>,
}

enum Controller {
    Pid(Box<PidRuntime>),
    Lqt(Box<LqtRuntime>),
}

/// Build the reference profile for a scenario, sampled at the off-board
/// period.
pub fn build_profile(scenario: &Scenario, ts: f64) -> Result<PositionProfile> {
    if let Some(kind) = scenario.reference.kind() {
        return Ok(crate::trajectory::parametric_reference(kind, ts, scenario.duration));
    }
    let wps = scenario.waypoint_set()?.expect("waypoint reference");
    let method = match &scenario.reference {
        ReferenceSpec::Waypoints { method, .. } => {
            method.or(wps.method).unwrap_or(InterpMethod::Spline)
        }
        _ => unreachable!(),
    };
    let mut profile = interpolate(&wps, ts, method)?;
    // Waypoint trajectories define their own duration; hold the final
    // point if the scenario runs longer.
    let n = (scenario.duration / ts).round() as usize + 1;
    if profile.len() < n {
        let last = *profile.positions.last().unwrap();
        profile.positions.resize(n, last);
        profile.yaw.resize(n, 0.0);
    }
    Ok(profile)
}

/// Precompute everything the LQT controller needs for a scenario: the
/// ramped reference and the offline-solved gains.
pub fn prepare_lqt(
    scenario: &Scenario,
    params: &PhysicalParams,
    profile: &PositionProfile,
) -> Result<(ReferenceTrajectory, LqtSolution)> {
    if profile.has_yaw() {
        return Err(Error::config("lqt references must keep yaw at zero"));
    }
    let ramped = profile
        .clone()
        .with_takeoff_ramp(scenario.initial.position(), scenario.lqt.takeoff_ramp);
    let kf_config = KalmanConfig::vicon(ramped.ts);
    let reference = profile_to_reference(&ramped, &kf_config)?;

    let model = build_continuous(params);
    let discrete = discretize_zoh(&model, ramped.ts);
    let problem = LqtProblem::new(discrete, scenario.lqt.weights)?
        .with_variant(scenario.lqt.variant)
        .with_tolerance(scenario.lqt.riccati_tol, scenario.lqt.riccati_max_iter);
    let solution = problem.solve(&reference.samples)?;
    Ok((reference, solution))
}

/// Run one scenario to completion.
pub fn run_scenario(scenario: &Scenario) -> Result<FlightLog> {
    scenario.validate()?;
    let params = scenario.resolved_params()?;
    let rates = scenario.rates;
    let physics_dt = 1.0 / rates.physics_hz as f64;
    let rate_div = (rates.physics_hz / rates.rate_hz) as u64;
    let attitude_div = (rates.physics_hz / rates.attitude_hz) as u64;
    let offboard_div = (rates.physics_hz / rates.offboard_hz) as u64;
    let log_div = (rates.physics_hz / LOG_HZ) as u64;
    let ts_offboard = 1.0 / rates.offboard_hz as f64;
    let dt_rate = 1.0 / rates.rate_hz as f64;
    let dt_attitude = 1.0 / rates.attitude_hz as f64;
    let regime = scenario.sensing.regime();

    let profile = build_profile(scenario, ts_offboard)?;
    let (reference, mut controller) = match scenario.controller {
        ControllerKind::Pid => {
            let zeros = vec![Vector3::zeros(); profile.len()];
            let mut reference =
                crate::trajectory::assemble_reference(&profile.positions, &zeros, ts_offboard)?;
            reference.yaw = profile.yaw.clone();
            let runtime = PidRuntime::from_scenario(scenario);
            (reference, Controller::Pid(Box::new(runtime)))
        }
        ControllerKind::Lqt => {
            let (reference, solution) = prepare_lqt(scenario, &params, &profile)?;
            let base_rpm = pwm_to_rpm(scenario.lqt.base_pwm)?;
            let mut integral = IntegralAction::new(
                scenario.lqt.ki_ang,
                scenario.lqt.ki_pos,
                scenario.lqt.integral_signs,
            );
            integral.clamp_ang = scenario.lqt.integral_clamp_ang;
            integral.clamp_pos = scenario.lqt.integral_clamp_pos;
            integral.dk_ang = dt_rate;
            integral.dk_pos = ts_offboard;
            let runtime = LqtRuntime {
                solution,
                integral,
                base_rpm,
                kf_config: KalmanConfig::for_regime(scenario.sensing.kind, ts_offboard),
                kf: None,
                du_pos: Vector4::zeros(),
            };
            (reference, Controller::Lqt(Box::new(runtime)))
        }
    };

    let latency_inner = (scenario.radio_latency * rates.rate_hz as f64).ceil() as u64;
    let mut queue: VecDeque<Pending> = VecDeque::new();

    let n_steps = (scenario.duration * rates.physics_hz as f64).round() as u64;
    let mut state = scenario.initial;
    let mut motors = MotorSpeeds::default();
    let mut current_pwm = MotorPwm::default();
    let mut sat_since_log = [false; 4];
    let mut est_position = scenario.initial.position();
    let mut est_velocity = Vector3::zeros();
    let mut records = Vec::with_capacity((n_steps / log_div) as usize + 1);

    for k in 0..n_steps {
        let t = k as f64 * physics_dt;
        let ref_idx = (k / offboard_div) as usize;

        // Off-board tick: measure, estimate, position control.
        if k % offboard_div == 0 {
            let meas_counter = k / offboard_div;
            let meas_pos = regime.measure_position(&state.position(), meas_counter);
            let meas_ang = regime.measure_attitude(
                &Vector3::new(state.psi, state.theta, state.phi),
                meas_counter,
            );
            let cmd = match &mut controller {
                Controller::Pid(pid) => {
                    let velocity = match pid.prev_meas_pos {
                        Some(prev) => pseudo_derivative_velocity(&meas_pos, &prev, ts_offboard),
                        None => Vector3::zeros(),
                    };
                    pid.prev_meas_pos = Some(meas_pos);
                    est_position = meas_pos;
                    est_velocity = velocity;
                    let (u_b, v_b) =
                        inertial_to_body_velocity(velocity.x, velocity.y, meas_ang.x);
                    let target = reference.position(ref_idx);
                    let yaw_c_deg = reference.yaw_at(ref_idx).to_degrees();
                    let r_c_deg = pid.yaw.update(yaw_c_deg, meas_ang.x.to_degrees());
                    let (phi_c_deg, theta_c_deg) = pid.xy.update(
                        target.x,
                        target.y,
                        meas_pos.x,
                        meas_pos.y,
                        meas_ang.x,
                        u_b,
                        v_b,
                        ts_offboard,
                    );
                    let omega = pid.altitude.update(target.z, meas_pos.z, ts_offboard);
                    OffboardCmd::Pid { omega, phi_c_deg, theta_c_deg, r_c_deg }
                }
                Controller::Lqt(lqt) => {
                    let kf = match lqt.kf.take() {
                        Some(prev) => kf_step(&prev, &meas_pos, &lqt.kf_config)?,
                        None => KalmanState::initialize(&meas_pos, &lqt.kf_config),
                    };
                    est_position = kf.position();
                    est_velocity = kf.velocity();
                    lqt.kf = Some(kf);

                    let (u_b, v_b) =
                        inertial_to_body_velocity(est_velocity.x, est_velocity.y, meas_ang.x);
                    let x_pos = nalgebra::SVector::<f64, 6>::from_column_slice(&[
                        est_position.x,
                        est_position.y,
                        est_position.z,
                        u_b,
                        v_b,
                        est_velocity.z,
                    ]);
                    let e_pos = reference.position(ref_idx) - est_position;
                    lqt.integral.update_position(&e_pos);
                    let du_pos = -lqt.solution.l_position() * x_pos
                        + lqt.solution.lg * lqt.solution.g_next(ref_idx)
                        + lqt.integral.position_contribution();
                    OffboardCmd::Lqt { du_pos }
                }
            };
            queue.push_back(Pending { release_step: k + latency_inner * rate_div, cmd });
        }

        // Attitude tick (PID outer on-board loop).
        if k % attitude_div == 0 {
            if let Controller::Pid(pid) = &mut controller {
                let meas_ang = onboard_attitude(&regime, &state, k / rate_div);
                let (p_c, q_c) = pid.attitude.update(
                    pid.phi_c_deg,
                    pid.theta_c_deg,
                    meas_ang.z.to_degrees(),
                    meas_ang.y.to_degrees(),
                    dt_attitude,
                );
                pid.p_c_deg = p_c;
                pid.q_c_deg = q_c;
            }
        }

        // Inner-loop tick: release radio packets, run the on-board law,
        // refresh the motor words.
        if k % rate_div == 0 {
            while queue.front().map_or(false, |p| p.release_step <= k) {
                let pending = queue.pop_front().unwrap();
                match (&mut controller, pending.cmd) {
                    (
                        Controller::Pid(pid),
                        OffboardCmd::Pid { omega, phi_c_deg, theta_c_deg, r_c_deg },
                    ) => {
                        pid.omega = omega;
                        pid.phi_c_deg = phi_c_deg;
                        pid.theta_c_deg = theta_c_deg;
                        pid.r_c_deg = r_c_deg;
                    }
                    (Controller::Lqt(lqt), OffboardCmd::Lqt { du_pos }) => {
                        lqt.du_pos = du_pos;
                    }
                    _ => unreachable!("controller kind cannot change mid-flight"),
                }
            }

            let (pwm, sat) = match &mut controller {
                Controller::Pid(pid) => {
                    let (d_phi, d_theta, d_psi) = pid.rate.update(
                        pid.p_c_deg,
                        pid.q_c_deg,
                        pid.r_c_deg,
                        state.p.to_degrees(),
                        state.q.to_degrees(),
                        state.r.to_degrees(),
                        dt_rate,
                    );
                    control_mixer(pid.omega, d_phi, d_theta, d_psi, pid.mixer)
                }
                Controller::Lqt(lqt) => {
                    let meas_ang = onboard_attitude(&regime, &state, k / rate_div);
                    let x_ang = nalgebra::SVector::<f64, 6>::from_column_slice(&[
                        meas_ang.x, meas_ang.y, meas_ang.z, state.r, state.q, state.p,
                    ]);
                    lqt.integral
                        .update_angular(&-Vector3::new(meas_ang.x, meas_ang.y, meas_ang.z));
                    let du = -lqt.solution.l_angular() * x_ang
                        + lqt.integral.angular_contribution()
                        + lqt.du_pos;
                    rpm_command_to_pwm(lqt.base_rpm, &du)
                }
            };
            current_pwm = pwm;
            motors = pwm_to_speeds(&pwm);
            for i in 0..4 {
                sat_since_log[i] |= sat[i];
            }
        }

        // Log sample (state at time t, command active at time t).
        if k % log_div == 0 {
            let mut ref_vec = *reference.sample(ref_idx);
            ref_vec[idx::PSI] = reference.yaw_at(ref_idx);
            records.push(FlightRecord {
                t,
                truth: state,
                est_position,
                est_velocity,
                reference: ref_vec,
                pwm: current_pwm,
                saturated: sat_since_log,
            });
            sat_since_log = [false; 4];
        }

        // Physics step.
        state = integrate_step_eps(&state, &motors, physics_dt, &params, DEFAULT_GIMBAL_EPS)
            .map_err(|e| match e {
                Error::GimbalLock { theta, eps, .. } => {
                    Error::GimbalLock { theta, eps, time: Some(t) }
                }
                other => other,
            })?;
        let vector = state.to_vector();
        for (i, value) in vector.iter().enumerate() {
            if !value.is_finite() || value.abs() > 1e6 {
                return Err(Error::NonFinite {
                    time: t,
                    state: crate::state::STATE_NAMES[i],
                    value: *value,
                });
            }
        }
    }

    Ok(FlightLog {
        ts: 1.0 / LOG_HZ as f64,
        controller: scenario.controller,
        records,
        metrics: scenario.metrics,
    })
}

/// Attitude seen by the on-board loops: truth unless attitude noise is
/// configured, keyed by the inner-loop tick counter.
fn onboard_attitude(regime: &NoiseRegime, state: &State, tick: u64) -> Vector3<f64> {
    regime.measure_attitude(&Vector3::new(state.psi, state.theta, state.phi), tick)
}

impl PidRuntime {
    fn from_scenario(scenario: &Scenario) -> Self {
        let cfg = &scenario.pid;
        let mut rate = RateController::default();
        if let Some(g) = cfg.rate_roll {
            rate.roll = g;
        }
        if let Some(g) = cfg.rate_pitch {
            rate.pitch = g;
        }
        if let Some(g) = cfg.rate_yaw {
            rate.yaw = g;
        }
        let mut attitude = AttitudeController::default();
        if let Some(g) = cfg.attitude_roll {
            attitude.roll = g;
        }
        if let Some(g) = cfg.attitude_pitch {
            attitude.pitch = g;
        }
        let mut altitude = AltitudeController::default();
        if let Some(g) = cfg.altitude {
            altitude.gains = g;
        }
        if let Some(ff) = cfg.altitude_feedforward {
            altitude.feedforward = ff;
        }
        let mut xy = XyPositionController::default();
        if let Some(g) = cfg.xy_x {
            xy.x = g;
        }
        if let Some(g) = cfg.xy_y {
            xy.y = g;
        }
        let mut yaw = YawPositionController::default();
        if let Some(kp) = cfg.yaw_kp {
            yaw.kp = kp;
        }
        if let Some(limit) = cfg.yaw_rate_limit {
            yaw.rate_limit = limit;
        }
        PidRuntime {
            rate,
            attitude,
            altitude,
            xy,
            yaw,
            mixer: scenario.mixer,
            prev_meas_pos: None,
            omega: 0.0,
            phi_c_deg: 0.0,
            theta_c_deg: 0.0,
            r_c_deg: 0.0,
            p_c_deg: 0.0,
            q_c_deg: 0.0,
        }
    }
}
