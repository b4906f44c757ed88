//! Reference-trajectory generation: waypoint interpolation, parametric
//! shapes, velocity profiles and 12-state assembly.
//!
//! References carry positions plus a separate yaw channel. The packed
//! 12-state form keeps every angle and angular-rate row at zero (small-angle
//! trajectory contract); yaw setpoints are only consumed by the PID stack.

use nalgebra::{DMatrix, DVector, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kalman::{kf_step, KalmanConfig, KalmanState};
use crate::state::{idx, StateVector};

/// End condition of the cubic spline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EndCondition {
    /// Third-derivative continuity across the first and last interior
    /// knots. Reproduces polynomials up to cubics exactly.
    #[default]
    NotAKnot,
    /// Zero second derivative at both ends.
    Natural,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InterpMethod {
    Spline,
    Pchip,
}

/// Timed waypoints: X-Y pairs and a separate altitude list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaypointSet {
    /// `[t, x, y]` rows, strictly increasing in `t`.
    pub xy: Vec<[f64; 3]>,
    /// `[t, z]` rows, strictly increasing in `t`.
    pub z: Vec<[f64; 2]>,
    /// Trajectory duration [s].
    pub final_time: f64,
    /// Interpolation method; `None` means the caller decides (the CLI
    /// writes both variants).
    #[serde(default)]
    pub method: Option<InterpMethod>,
}

impl WaypointSet {
    /// Spread waypoints uniformly over `[0, final_time]`.
    pub fn with_uniform_times(xy: &[(f64, f64)], z: &[f64], final_time: f64) -> Self {
        let spread = |n: usize, i: usize| {
            if n <= 1 {
                0.0
            } else {
                final_time * i as f64 / (n - 1) as f64
            }
        };
        WaypointSet {
            xy: xy
                .iter()
                .enumerate()
                .map(|(i, (x, y))| [spread(xy.len(), i), *x, *y])
                .collect(),
            z: z.iter().enumerate().map(|(i, zi)| [spread(z.len(), i), *zi]).collect(),
            final_time,
            method: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.final_time <= 0.0 {
            return Err(Error::config("final_time must be positive"));
        }
        check_knots("xy", &self.xy.iter().map(|w| w[0]).collect::<Vec<_>>(), self.final_time)?;
        check_knots("z", &self.z.iter().map(|w| w[0]).collect::<Vec<_>>(), self.final_time)?;
        Ok(())
    }
}

fn check_knots(what: &str, times: &[f64], final_time: f64) -> Result<()> {
    if times.len() < 2 {
        return Err(Error::DegenerateWaypoints(format!("{what}: need at least 2 waypoints")));
    }
    for pair in times.windows(2) {
        if pair[1] == pair[0] {
            return Err(Error::DegenerateWaypoints(format!(
                "{what}: duplicate time {}",
                pair[0]
            )));
        }
        if pair[1] < pair[0] {
            return Err(Error::DegenerateWaypoints(format!(
                "{what}: times not increasing at {}",
                pair[1]
            )));
        }
    }
    if times[0] < 0.0 || *times.last().unwrap() > final_time {
        return Err(Error::DegenerateWaypoints(format!(
            "{what}: times must lie within [0, {final_time}]"
        )));
    }
    Ok(())
}

/// One-dimensional cubic spline interpolant.
#[derive(Debug, Clone)]
pub struct CubicSpline {
    knots: Vec<f64>,
    values: Vec<f64>,
    /// Second derivatives at the knots.
    m: Vec<f64>,
}

impl CubicSpline {
    pub fn new(knots: &[f64], values: &[f64], end: EndCondition) -> Result<Self> {
        if knots.len() != values.len() {
            return Err(Error::LengthMismatch {
                what: "spline knots",
                left: knots.len(),
                right: values.len(),
            });
        }
        let n = knots.len();
        if n < 2 {
            return Err(Error::DegenerateWaypoints("spline needs at least 2 knots".into()));
        }
        for pair in knots.windows(2) {
            if pair[1] <= pair[0] {
                return Err(Error::DegenerateWaypoints(format!(
                    "spline knots not strictly increasing at {}",
                    pair[1]
                )));
            }
        }
        let m = match n {
            2 => vec![0.0; 2],
            3 if end == EndCondition::NotAKnot => {
                // Single parabola through three points.
                let d2 = 2.0 * divided_difference2(knots, values, 0);
                vec![d2; 3]
            }
            _ => solve_second_derivatives(knots, values, end)?,
        };
        Ok(CubicSpline { knots: knots.to_vec(), values: values.to_vec(), m })
    }

    /// Evaluate, holding the boundary values outside the knot range.
    pub fn eval(&self, t: f64) -> f64 {
        let n = self.knots.len();
        if t <= self.knots[0] {
            return self.values[0];
        }
        if t >= self.knots[n - 1] {
            return self.values[n - 1];
        }
        let i = segment_index(&self.knots, t);
        let h = self.knots[i + 1] - self.knots[i];
        let a = (self.knots[i + 1] - t) / h;
        let b = (t - self.knots[i]) / h;
        a * self.values[i]
            + b * self.values[i + 1]
            + ((a.powi(3) - a) * self.m[i] + (b.powi(3) - b) * self.m[i + 1]) * h * h / 6.0
    }
}

fn divided_difference2(t: &[f64], y: &[f64], i: usize) -> f64 {
    let d01 = (y[i + 1] - y[i]) / (t[i + 1] - t[i]);
    let d12 = (y[i + 2] - y[i + 1]) / (t[i + 2] - t[i + 1]);
    (d12 - d01) / (t[i + 2] - t[i])
}

fn solve_second_derivatives(t: &[f64], y: &[f64], end: EndCondition) -> Result<Vec<f64>> {
    let n = t.len();
    let mut a = DMatrix::<f64>::zeros(n, n);
    let mut rhs = DVector::<f64>::zeros(n);
    for i in 1..n - 1 {
        let h0 = t[i] - t[i - 1];
        let h1 = t[i + 1] - t[i];
        a[(i, i - 1)] = h0 / 6.0;
        a[(i, i)] = (h0 + h1) / 3.0;
        a[(i, i + 1)] = h1 / 6.0;
        rhs[i] = (y[i + 1] - y[i]) / h1 - (y[i] - y[i - 1]) / h0;
    }
    match end {
        EndCondition::Natural => {
            a[(0, 0)] = 1.0;
            a[(n - 1, n - 1)] = 1.0;
        }
        EndCondition::NotAKnot => {
            let h0 = t[1] - t[0];
            let h1 = t[2] - t[1];
            a[(0, 0)] = h1;
            a[(0, 1)] = -(h0 + h1);
            a[(0, 2)] = h0;
            let hm = t[n - 1] - t[n - 2];
            let hm1 = t[n - 2] - t[n - 3];
            a[(n - 1, n - 3)] = hm;
            a[(n - 1, n - 2)] = -(hm1 + hm);
            a[(n - 1, n - 1)] = hm1;
        }
    }
    let solution = a
        .lu()
        .solve(&rhs)
        .ok_or(Error::SingularMatrix { what: "spline system", step: None })?;
    Ok(solution.as_slice().to_vec())
}

/// Shape-preserving piecewise-cubic Hermite interpolant with
/// Fritsch-Carlson slopes.
#[derive(Debug, Clone)]
pub struct Pchip {
    knots: Vec<f64>,
    values: Vec<f64>,
    slopes: Vec<f64>,
}

impl Pchip {
    pub fn new(knots: &[f64], values: &[f64]) -> Result<Self> {
        if knots.len() != values.len() {
            return Err(Error::LengthMismatch {
                what: "pchip knots",
                left: knots.len(),
                right: values.len(),
            });
        }
        let n = knots.len();
        if n < 2 {
            return Err(Error::DegenerateWaypoints("pchip needs at least 2 knots".into()));
        }
        for pair in knots.windows(2) {
            if pair[1] <= pair[0] {
                return Err(Error::DegenerateWaypoints(format!(
                    "pchip knots not strictly increasing at {}",
                    pair[1]
                )));
            }
        }

        let h: Vec<f64> = knots.windows(2).map(|w| w[1] - w[0]).collect();
        let delta: Vec<f64> =
            (0..n - 1).map(|i| (values[i + 1] - values[i]) / h[i]).collect();

        let mut d = vec![0.0; n];
        if n == 2 {
            d[0] = delta[0];
            d[1] = delta[0];
        } else {
            for i in 1..n - 1 {
                if delta[i - 1] * delta[i] <= 0.0 {
                    d[i] = 0.0;
                } else {
                    let w1 = 2.0 * h[i] + h[i - 1];
                    let w2 = h[i] + 2.0 * h[i - 1];
                    d[i] = (w1 + w2) / (w1 / delta[i - 1] + w2 / delta[i]);
                }
            }
            d[0] = endpoint_slope(h[0], h[1], delta[0], delta[1]);
            d[n - 1] = endpoint_slope(h[n - 2], h[n - 3], delta[n - 2], delta[n - 3]);
        }
        Ok(Pchip { knots: knots.to_vec(), values: values.to_vec(), slopes: d })
    }

    pub fn eval(&self, t: f64) -> f64 {
        let n = self.knots.len();
        if t <= self.knots[0] {
            return self.values[0];
        }
        if t >= self.knots[n - 1] {
            return self.values[n - 1];
        }
        let i = segment_index(&self.knots, t);
        let h = self.knots[i + 1] - self.knots[i];
        let s = (t - self.knots[i]) / h;
        let (s2, s3) = (s * s, s * s * s);
        let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
        let h10 = s3 - 2.0 * s2 + s;
        let h01 = -2.0 * s3 + 3.0 * s2;
        let h11 = s3 - s2;
        h00 * self.values[i]
            + h * h10 * self.slopes[i]
            + h01 * self.values[i + 1]
            + h * h11 * self.slopes[i + 1]
    }
}

/// One-sided three-point endpoint slope with the monotonicity clamps.
fn endpoint_slope(h0: f64, h1: f64, delta0: f64, delta1: f64) -> f64 {
    let mut d = ((2.0 * h0 + h1) * delta0 - h0 * delta1) / (h0 + h1);
    if d * delta0 <= 0.0 {
        d = 0.0;
    } else if delta0 * delta1 < 0.0 && d.abs() > 3.0 * delta0.abs() {
        d = 3.0 * delta0;
    }
    d
}

fn segment_index(knots: &[f64], t: f64) -> usize {
    match knots.binary_search_by(|k| k.partial_cmp(&t).unwrap()) {
        Ok(i) => i.min(knots.len() - 2),
        Err(i) => i.saturating_sub(1).min(knots.len() - 2),
    }
}

/// Sampled position reference plus a yaw channel.
#[derive(Debug, Clone, PartialEq)]
pub struct PositionProfile {
    pub ts: f64,
    pub positions: Vec<Vector3<f64>>,
    /// Yaw setpoints [rad]; consumed by the PID path only.
    pub yaw: Vec<f64>,
}

impl PositionProfile {
    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn has_yaw(&self) -> bool {
        self.yaw.iter().any(|y| *y != 0.0)
    }

    /// Replace the first `ramp_time` seconds with a straight-line blend
    /// from `initial` to the profile value at the end of the ramp.
    pub fn with_takeoff_ramp(mut self, initial: Vector3<f64>, ramp_time: f64) -> Self {
        if ramp_time <= 0.0 || self.positions.is_empty() {
            return self;
        }
        let k_ramp = ((ramp_time / self.ts).round() as usize).min(self.positions.len() - 1);
        if k_ramp == 0 {
            return self;
        }
        let target = self.positions[k_ramp];
        for k in 0..k_ramp {
            let alpha = k as f64 / k_ramp as f64;
            self.positions[k] = initial * (1.0 - alpha) + target * alpha;
        }
        self
    }
}

/// Sample both waypoint channels with cubic splines.
pub fn interpolate_spline(wps: &WaypointSet, ts: f64) -> Result<PositionProfile> {
    interpolate(wps, ts, InterpMethod::Spline)
}

/// Sample both waypoint channels with shape-preserving cubics.
pub fn interpolate_pchip(wps: &WaypointSet, ts: f64) -> Result<PositionProfile> {
    interpolate(wps, ts, InterpMethod::Pchip)
}

pub fn interpolate(wps: &WaypointSet, ts: f64, method: InterpMethod) -> Result<PositionProfile> {
    wps.validate()?;
    if ts <= 0.0 {
        return Err(Error::config("sample time must be positive"));
    }
    let t_xy: Vec<f64> = wps.xy.iter().map(|w| w[0]).collect();
    let xs: Vec<f64> = wps.xy.iter().map(|w| w[1]).collect();
    let ys: Vec<f64> = wps.xy.iter().map(|w| w[2]).collect();
    let t_z: Vec<f64> = wps.z.iter().map(|w| w[0]).collect();
    let zs: Vec<f64> = wps.z.iter().map(|w| w[1]).collect();

    let n = (wps.final_time / ts).round() as usize + 1;
    let eval: Box<dyn Fn(&[f64], &[f64], f64) -> Result<Vec<f64>>> = match method {
        InterpMethod::Spline => Box::new(|t, y, _| {
            let s = CubicSpline::new(t, y, EndCondition::default())?;
            Ok((0..n).map(|k| s.eval(k as f64 * ts)).collect())
        }),
        InterpMethod::Pchip => Box::new(|t, y, _| {
            let p = Pchip::new(t, y)?;
            Ok((0..n).map(|k| p.eval(k as f64 * ts)).collect())
        }),
    };
    let sx = eval(&t_xy, &xs, ts)?;
    let sy = eval(&t_xy, &ys, ts)?;
    let sz = eval(&t_z, &zs, ts)?;
    let positions = (0..n).map(|k| Vector3::new(sx[k], sy[k], sz[k])).collect();
    Ok(PositionProfile { ts, positions, yaw: vec![0.0; n] })
}

/// Parametric reference shapes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ReferenceKind {
    /// Constant position hold.
    Hover { x: f64, y: f64, z: f64 },
    /// Steps applied at `t_start` on all four channels.
    Step { x: f64, y: f64, z: f64, yaw: f64, t_start: f64 },
    /// Circle of `radius` at `freq_hz`, constant `altitude`, constant
    /// yaw rate [rad/s].
    Circle { radius: f64, freq_hz: f64, altitude: f64, yaw_rate: f64 },
    /// Same circle with a climbing altitude ramp.
    Helix { radius: f64, freq_hz: f64, climb_rate: f64, yaw_rate: f64 },
}

/// Sample a parametric reference on the uniform grid.
pub fn parametric_reference(kind: ReferenceKind, ts: f64, duration: f64) -> PositionProfile {
    assert!(duration > 0.0 && ts > 0.0);
    let n = (duration / ts).round() as usize + 1;
    let mut positions = Vec::with_capacity(n);
    let mut yaw = Vec::with_capacity(n);
    for k in 0..n {
        let t = k as f64 * ts;
        let (p, psi) = match kind {
            ReferenceKind::Hover { x, y, z } => (Vector3::new(x, y, z), 0.0),
            ReferenceKind::Step { x, y, z, yaw, t_start } => {
                if t < t_start {
                    (Vector3::zeros(), 0.0)
                } else {
                    (Vector3::new(x, y, z), yaw)
                }
            }
            ReferenceKind::Circle { radius, freq_hz, altitude, yaw_rate } => {
                let phase = 2.0 * std::f64::consts::PI * freq_hz * t;
                (
                    Vector3::new(
                        radius * (phase - std::f64::consts::FRAC_PI_2).sin(),
                        radius * phase.sin(),
                        altitude,
                    ),
                    yaw_rate * t,
                )
            }
            ReferenceKind::Helix { radius, freq_hz, climb_rate, yaw_rate } => {
                let phase = 2.0 * std::f64::consts::PI * freq_hz * t;
                (
                    Vector3::new(
                        radius * (phase - std::f64::consts::FRAC_PI_2).sin(),
                        radius * phase.sin(),
                        climb_rate * t,
                    ),
                    yaw_rate * t,
                )
            }
        };
        positions.push(p);
        yaw.push(psi);
    }
    PositionProfile { ts, positions, yaw }
}

/// Velocity profile for a position sequence: the Kalman filter is run over
/// the noiseless positions, acting purely as a velocity estimator.
pub fn velocity_profile(
    positions: &[Vector3<f64>],
    ts: f64,
    config: &KalmanConfig,
) -> Result<Vec<Vector3<f64>>> {
    if positions.len() < 2 {
        return Err(Error::config("velocity profile needs at least 2 samples"));
    }
    let mut config = *config;
    config.ts = ts;
    let mut state = KalmanState::initialize(&positions[0], &config);
    let mut velocities = Vec::with_capacity(positions.len());
    for pos in positions {
        state = kf_step(&state, pos, &config)?;
        velocities.push(state.velocity());
    }
    Ok(velocities)
}

/// Full 12-state reference, with yaw carried out-of-band for the PID path.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceTrajectory {
    pub ts: f64,
    pub samples: Vec<StateVector>,
    pub yaw: Vec<f64>,
}

impl ReferenceTrajectory {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration(&self) -> f64 {
        (self.samples.len().saturating_sub(1)) as f64 * self.ts
    }

    /// Sample clamped to the final value beyond the end.
    pub fn sample(&self, k: usize) -> &StateVector {
        &self.samples[k.min(self.samples.len() - 1)]
    }

    pub fn position(&self, k: usize) -> Vector3<f64> {
        let s = self.sample(k);
        Vector3::new(s[idx::X], s[idx::Y], s[idx::Z])
    }

    pub fn yaw_at(&self, k: usize) -> f64 {
        self.yaw[k.min(self.yaw.len() - 1)]
    }
}

/// Pack positions and the velocity profile into 12-state reference samples;
/// angle and rate rows stay zero.
pub fn assemble_reference(
    positions: &[Vector3<f64>],
    velocities: &[Vector3<f64>],
    ts: f64,
) -> Result<ReferenceTrajectory> {
    if positions.len() != velocities.len() {
        return Err(Error::LengthMismatch {
            what: "reference assembly",
            left: positions.len(),
            right: velocities.len(),
        });
    }
    let samples = positions
        .iter()
        .zip(velocities)
        .map(|(p, v)| {
            let mut s = StateVector::zeros();
            s[idx::X] = p.x;
            s[idx::Y] = p.y;
            s[idx::Z] = p.z;
            s[idx::U] = v.x;
            s[idx::V] = v.y;
            s[idx::W] = v.z;
            s
        })
        .collect::<Vec<_>>();
    let yaw = vec![0.0; samples.len()];
    Ok(ReferenceTrajectory { ts, samples, yaw })
}

/// Build the packed reference for a profile, running the velocity filter
/// over its positions.
pub fn profile_to_reference(
    profile: &PositionProfile,
    kf_config: &KalmanConfig,
) -> Result<ReferenceTrajectory> {
    let velocities = velocity_profile(&profile.positions, profile.ts, kf_config)?;
    let mut reference = assemble_reference(&profile.positions, &velocities, profile.ts)?;
    reference.yaw = profile.yaw.clone();
    Ok(reference)
}

/// Soft feasibility check: worst implied horizontal acceleration against
/// the tilt budget `g tan(30 deg)`.
pub fn feasibility_warning(profile: &PositionProfile, g: f64) -> Option<String> {
    if profile.positions.len() < 3 {
        return None;
    }
    let limit = g * (30f64).to_radians().tan();
    let mut worst: f64 = 0.0;
    for w in profile.positions.windows(3) {
        let accel = (w[2] - 2.0 * w[1] + w[0]) / (profile.ts * profile.ts);
        worst = worst.max(accel.fixed_rows::<2>(0).norm());
    }
    (worst > limit).then(|| {
        format!(
            "implied horizontal acceleration {worst:.2} m/s^2 exceeds the tilt budget {limit:.2} m/s^2"
        )
    })
}
