//! Position/velocity Kalman filter and the PID path's pseudo-derivative
//! velocity estimation.
//!
//! The filter runs a constant-velocity model over the six states
//! `[x y z xdot ydot zdot]` with position-only measurements. Process noise
//! enters through a 6x3 shaping matrix (position rows `Ts/2`, velocity rows
//! one), so only three velocity-random-walk variances need tuning.

use nalgebra::{Matrix3, Matrix6, SMatrix, Vector3, Vector6};

use crate::error::{Error, Result};
use crate::noise::{NoiseKind, UWB_POSITION_VAR, VICON_POSITION_VAR};

/// Hand-tuned process variances used with VICON measurements.
pub const VICON_PROCESS_VAR: [f64; 3] = [8e-8, 8e-8, 8e-8];
/// Hand-tuned process variances used with UWB x/y and VICON z.
pub const UWB_PROCESS_VAR: [f64; 3] = [3e-5, 3e-5, 8e-8];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KalmanConfig {
    /// Filter sample time [s].
    pub ts: f64,
    /// Diagonal of the measurement covariance [m^2].
    pub r_diag: Vector3<f64>,
    /// Diagonal of the process (velocity random walk) covariance.
    pub q_diag: Vector3<f64>,
    /// Initial state covariance.
    pub p0: Matrix6<f64>,
}

impl KalmanConfig {
    pub fn vicon(ts: f64) -> Self {
        KalmanConfig {
            ts,
            r_diag: Vector3::from_row_slice(&VICON_POSITION_VAR),
            q_diag: Vector3::from_row_slice(&VICON_PROCESS_VAR),
            p0: Matrix6::identity() * 1e-2,
        }
    }

    pub fn uwb(ts: f64) -> Self {
        KalmanConfig {
            ts,
            r_diag: Vector3::from_row_slice(&UWB_POSITION_VAR),
            q_diag: Vector3::from_row_slice(&UWB_PROCESS_VAR),
            p0: Matrix6::identity() * 1e-2,
        }
    }

    pub fn for_regime(kind: NoiseKind, ts: f64) -> Self {
        match kind {
            NoiseKind::Uwb => Self::uwb(ts),
            // The noiseless regime still runs the VICON-tuned filter.
            NoiseKind::Vicon | NoiseKind::None => Self::vicon(ts),
        }
    }

    /// Constant-velocity transition matrix.
    pub fn transition(&self) -> Matrix6<f64> {
        let mut a = Matrix6::identity();
        a[(0, 3)] = self.ts;
        a[(1, 4)] = self.ts;
        a[(2, 5)] = self.ts;
        a
    }

    /// Process-noise shaping matrix G.
    pub fn noise_shaping(&self) -> SMatrix<f64, 6, 3> {
        let mut g = SMatrix::<f64, 6, 3>::zeros();
        g[(0, 0)] = self.ts / 2.0;
        g[(1, 1)] = self.ts / 2.0;
        g[(2, 2)] = self.ts / 2.0;
        g[(3, 0)] = 1.0;
        g[(4, 1)] = 1.0;
        g[(5, 2)] = 1.0;
        g
    }

    /// `G Q G^T`, the full-rank-deficient process covariance.
    pub fn process_covariance(&self) -> Matrix6<f64> {
        let g = self.noise_shaping();
        g * Matrix3::from_diagonal(&self.q_diag) * g.transpose()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KalmanState {
    /// `[x y z xdot ydot zdot]` estimate.
    pub x_hat: Vector6<f64>,
    pub p: Matrix6<f64>,
}

impl KalmanState {
    /// Start at a known position with zero velocity.
    pub fn initialize(position: &Vector3<f64>, config: &KalmanConfig) -> Self {
        let mut x_hat = Vector6::zeros();
        x_hat.fixed_rows_mut::<3>(0).copy_from(position);
        KalmanState { x_hat, p: config.p0 }
    }

    pub fn position(&self) -> Vector3<f64> {
        self.x_hat.fixed_rows::<3>(0).into()
    }

    pub fn velocity(&self) -> Vector3<f64> {
        self.x_hat.fixed_rows::<3>(3).into()
    }
}

/// Time update of the constant-velocity model.
pub fn kf_predict(state: &KalmanState, config: &KalmanConfig) -> KalmanState {
    let a = config.transition();
    let x_hat = a * state.x_hat;
    let p = a * state.p * a.transpose() + config.process_covariance();
    KalmanState { x_hat, p: symmetrize(&p) }
}

/// Measurement update with a position fix; Joseph-form covariance update.
pub fn kf_update(
    state: &KalmanState,
    z_meas: &Vector3<f64>,
    config: &KalmanConfig,
) -> Result<KalmanState> {
    let r = Matrix3::from_diagonal(&config.r_diag);
    // H = [I3 0]: innovation covariance is the position block of P plus R.
    let p_pos = state.p.fixed_view::<3, 3>(0, 0).into_owned();
    let s = p_pos + r;
    let s_inv = s.try_inverse().ok_or(Error::SingularInnovation)?;
    let p_xh = state.p.fixed_view::<6, 3>(0, 0).into_owned(); // P H^T
    let gain = p_xh * s_inv; // 6x3

    let innovation = z_meas - state.x_hat.fixed_rows::<3>(0);
    let x_hat = state.x_hat + gain * innovation;

    let mut kh = Matrix6::<f64>::zeros(); // K H
    kh.fixed_view_mut::<6, 3>(0, 0).copy_from(&gain);
    let ikh = Matrix6::identity() - kh;
    let p = ikh * state.p * ikh.transpose() + gain * r * gain.transpose();
    Ok(KalmanState { x_hat, p: symmetrize(&p) })
}

/// One predict + update cycle.
pub fn kf_step(
    state: &KalmanState,
    z_meas: &Vector3<f64>,
    config: &KalmanConfig,
) -> Result<KalmanState> {
    kf_update(&kf_predict(state, config), z_meas, config)
}

/// First-difference velocity estimate used by the PID path.
pub fn pseudo_derivative_velocity(
    pos_now: &Vector3<f64>,
    pos_prev: &Vector3<f64>,
    dt: f64,
) -> Vector3<f64> {
    debug_assert!(dt > 0.0);
    (pos_now - pos_prev) / dt
}

/// Project inertial-frame horizontal velocity into the body frame with a
/// yaw-only (small roll/pitch) rotation.
pub fn inertial_to_body_velocity(vx: f64, vy: f64, psi: f64) -> (f64, f64) {
    let (s, c) = psi.sin_cos();
    (c * vx + s * vy, -s * vx + c * vy)
}

fn symmetrize(m: &Matrix6<f64>) -> Matrix6<f64> {
    (m + m.transpose()) * 0.5
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::NoiseRegime;
    use approx::assert_abs_diff_eq;

    #[test]
    fn predict_propagates_constant_velocity() {
        let config = KalmanConfig::vicon(0.01);
        let mut state = KalmanState::initialize(&Vector3::zeros(), &config);
        state.x_hat[3] = 1.0;
        let next = kf_predict(&state, &config);
        assert_abs_diff_eq!(next.x_hat[0], 0.01, epsilon = 1e-15);
        assert_abs_diff_eq!(next.x_hat[3], 1.0, epsilon = 1e-15);
    }

    #[test]
    fn process_covariance_has_rank_three() {
        let config = KalmanConfig::uwb(0.01);
        let q_bar = config.process_covariance();
        let svd = q_bar.svd(false, false);
        let rank = svd.singular_values.iter().filter(|s| **s > 1e-18).count();
        assert!(rank <= 3, "rank {rank}");
    }

    #[test]
    fn perfect_measurement_limit_pins_position() {
        let mut config = KalmanConfig::vicon(0.01);
        config.r_diag = Vector3::repeat(1e-18);
        let state = KalmanState::initialize(&Vector3::zeros(), &config);
        let z = Vector3::new(0.5, -0.25, 1.0);
        let updated = kf_update(&kf_predict(&state, &config), &z, &config).unwrap();
        assert!((updated.position() - z).amax() < 1e-9);
    }

    #[test]
    fn static_truth_velocity_noise_floor() {
        // 20 seeded Monte-Carlo runs of 10 s at 100 Hz against VICON noise.
        let config = KalmanConfig::vicon(0.01);
        for seed in 0..20 {
            let regime = NoiseRegime::new(crate::noise::NoiseKind::Vicon, seed);
            let mut state = KalmanState::initialize(&Vector3::zeros(), &config);
            let mut sum_sq = 0.0;
            let n = 1000;
            for k in 0..n {
                let z = regime.measure_position(&Vector3::zeros(), k);
                state = kf_step(&state, &z, &config).unwrap();
                sum_sq += state.velocity().norm_squared();
            }
            let rms = (sum_sq / n as f64).sqrt();
            assert!(rms < 0.02, "seed {seed}: velocity rms {rms}");
        }
    }

    #[test]
    fn steady_state_gain_is_initialization_independent() {
        let config_small = KalmanConfig::uwb(0.01);
        let mut config_large = config_small;
        config_large.p0 *= 100.0;

        let run = |config: &KalmanConfig| {
            let mut state = KalmanState::initialize(&Vector3::zeros(), config);
            for _ in 0..5000 {
                state = kf_step(&state, &Vector3::zeros(), config).unwrap();
            }
            state.p
        };
        let p_a = run(&config_small);
        let p_b = run(&config_large);
        assert!((p_a - p_b).amax() < 1e-8, "difference {:e}", (p_a - p_b).amax());
    }

    #[test]
    fn covariance_stays_symmetric_psd() {
        let config = KalmanConfig::uwb(0.01);
        let regime = NoiseRegime::new(crate::noise::NoiseKind::Uwb, 11);
        let mut state = KalmanState::initialize(&Vector3::zeros(), &config);
        for k in 0..100_000u64 {
            let z = regime.measure_position(&Vector3::new(0.1, 0.2, 0.3), k);
            state = kf_step(&state, &z, &config).unwrap();
            if k % 10_000 == 0 {
                assert!((state.p - state.p.transpose()).amax() < 1e-12);
                let eigs = state.p.symmetric_eigenvalues();
                assert!(eigs.min() > -1e-10, "min eigenvalue {}", eigs.min());
            }
        }
    }

    #[test]
    fn unbiased_on_constant_velocity_truth() {
        let config = KalmanConfig::vicon(0.01);
        let regime = NoiseRegime::new(crate::noise::NoiseKind::Vicon, 5);
        let truth_v = Vector3::new(0.3, -0.2, 0.1);
        let mut state = KalmanState::initialize(&Vector3::zeros(), &config);
        let mut err_sum = Vector3::<f64>::zeros();
        let n = 1000;
        for k in 0..n {
            let pos = truth_v * (k as f64 * 0.01);
            let z = regime.measure_position(&pos, k as u64);
            state = kf_step(&state, &z, &config).unwrap();
            err_sum += state.velocity() - truth_v;
        }
        let mean_err = err_sum / n as f64;
        assert!(mean_err.amax() < 0.005, "mean velocity error {mean_err:?}");
    }

    #[test]
    fn pseudo_derivative_is_exact_on_affine_motion() {
        let dt = 0.01;
        assert_eq!(
            pseudo_derivative_velocity(&Vector3::zeros(), &Vector3::zeros(), dt),
            Vector3::zeros()
        );
        let v = pseudo_derivative_velocity(&Vector3::new(0.01, 0.0, 0.0), &Vector3::zeros(), dt);
        assert_abs_diff_eq!(v.x, 1.0, epsilon = 1e-12);
        // Linear motion is recovered exactly at every step.
        let truth = Vector3::new(0.4, -1.2, 0.07);
        for k in 1..50 {
            let now = truth * (k as f64 * dt);
            let prev = truth * ((k - 1) as f64 * dt);
            let est = pseudo_derivative_velocity(&now, &prev, dt);
            assert!((est - truth).amax() < 1e-12);
        }
    }

    #[test]
    fn yaw_projection_matches_rotation() {
        let (u, v) = inertial_to_body_velocity(1.0, 0.0, 0.0);
        assert_abs_diff_eq!(u, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(v, 0.0, epsilon = 1e-15);

        let (u, v) = inertial_to_body_velocity(1.0, 0.0, std::f64::consts::FRAC_PI_2);
        assert_abs_diff_eq!(u, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(v, -1.0, epsilon = 1e-15);

        let (u, v) = inertial_to_body_velocity(0.3, -0.7, 1.1);
        assert_abs_diff_eq!(u * u + v * v, 0.3 * 0.3 + 0.7 * 0.7, epsilon = 1e-12);
    }
}
