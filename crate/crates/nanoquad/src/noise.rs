//! Deterministic seeded measurement noise.
//!
//! Variates are a pure function of `(seed, step_index, axis)`: the three
//! values are mixed by a SplitMix64-style avalanche into two uniforms which
//! feed the Box-Muller cosine branch. No generator state exists, so
//! rescheduling one loop can never shift the stream seen by another.

use serde::{Deserialize, Serialize};

use nalgebra::Vector3;

/// Measurement variances of the VICON motion-capture regime [m^2].
pub const VICON_POSITION_VAR: [f64; 3] = [5e-9, 5e-9, 5e-9];
/// Measurement variances of the UWB regime: UWB on x/y, VICON on z [m^2].
pub const UWB_POSITION_VAR: [f64; 3] = [5e-5, 5e-5, 5e-9];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum NoiseKind {
    Vicon,
    Uwb,
    #[default]
    None,
}

/// Position-measurement noise model, replay-identical for a given seed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NoiseRegime {
    pub kind: NoiseKind,
    /// Per-axis position variances [m^2]; defaults follow `kind`.
    pub variances: [f64; 3],
    /// Variance added to the Euler-angle measurements [rad^2].
    pub attitude_variance: f64,
    pub seed: u64,
}

impl Default for NoiseRegime {
    fn default() -> Self {
        NoiseRegime::new(NoiseKind::None, 0)
    }
}

impl NoiseRegime {
    pub fn new(kind: NoiseKind, seed: u64) -> Self {
        let variances = match kind {
            NoiseKind::Vicon => VICON_POSITION_VAR,
            NoiseKind::Uwb => UWB_POSITION_VAR,
            NoiseKind::None => [0.0; 3],
        };
        NoiseRegime { kind, variances, attitude_variance: 0.0, seed }
    }

    pub fn is_valid(&self) -> bool {
        self.variances.iter().all(|v| *v >= 0.0) && self.attitude_variance >= 0.0
    }

    /// Noisy position sample for simulation step `step_index`.
    pub fn measure_position(&self, true_pos: &Vector3<f64>, step_index: u64) -> Vector3<f64> {
        if self.kind == NoiseKind::None {
            return *true_pos;
        }
        Vector3::new(
            true_pos.x + self.variances[0].sqrt() * standard_normal(self.seed, step_index, 0),
            true_pos.y + self.variances[1].sqrt() * standard_normal(self.seed, step_index, 1),
            true_pos.z + self.variances[2].sqrt() * standard_normal(self.seed, step_index, 2),
        )
    }

    /// Noisy Euler-angle sample `[psi theta phi]`; identity unless an
    /// attitude variance is configured.
    pub fn measure_attitude(&self, true_angles: &Vector3<f64>, step_index: u64) -> Vector3<f64> {
        if self.attitude_variance == 0.0 || self.kind == NoiseKind::None {
            return *true_angles;
        }
        let sigma = self.attitude_variance.sqrt();
        Vector3::new(
            true_angles.x + sigma * standard_normal(self.seed, step_index, 3),
            true_angles.y + sigma * standard_normal(self.seed, step_index, 4),
            true_angles.z + sigma * standard_normal(self.seed, step_index, 5),
        )
    }
}

/// Counter-based standard normal variate: SplitMix64 avalanche of
/// `(seed, step, axis)` into two uniforms, Box-Muller cosine branch.
pub fn standard_normal(seed: u64, step: u64, axis: u64) -> f64 {
    let key = splitmix64(seed ^ splitmix64(step) ^ splitmix64(axis).rotate_left(17));
    let u1 = to_open_unit(splitmix64(key));
    let u2 = to_open_unit(splitmix64(key ^ 0x9e3779b97f4a7c15));
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e3779b97f4a7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// Map to (0, 1]; the ln() argument must never be zero.
fn to_open_unit(bits: u64) -> f64 {
    ((bits >> 11) as f64 + 1.0) / (1u64 << 53) as f64
}
