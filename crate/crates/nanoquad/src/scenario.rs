//! Scenario configuration: the JSON schema driving the simulation harness.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::lqt::{IntegralSigns, LqtWeights, RiccatiVariant};
use crate::noise::{NoiseKind, NoiseRegime};
use crate::params::PhysicalParams;
use crate::pid::{MixerVariant, PidGains, PWM_HOVER};
use crate::state::State;
use crate::trajectory::{ReferenceKind, WaypointSet};

/// Current schema version; bumped on breaking layout changes.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ControllerKind {
    Pid,
    Lqt,
}

/// Reference specification, either parametric or waypoint-file driven.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum ReferenceSpec {
    Hover {
        #[serde(default)]
        x: f64,
        #[serde(default)]
        y: f64,
        #[serde(default = "default_altitude")]
        z: f64,
    },
    Step {
        #[serde(default)]
        x: f64,
        #[serde(default)]
        y: f64,
        #[serde(default)]
        z: f64,
        #[serde(default)]
        yaw_deg: f64,
        #[serde(default)]
        t_start: f64,
    },
    Circle {
        #[serde(default = "default_radius")]
        radius: f64,
        #[serde(default = "default_freq")]
        freq_hz: f64,
        #[serde(default = "default_altitude")]
        altitude: f64,
        #[serde(default)]
        yaw_rate_deg: f64,
    },
    Helix {
        #[serde(default = "default_radius")]
        radius: f64,
        #[serde(default = "default_freq")]
        freq_hz: f64,
        #[serde(default = "default_climb")]
        climb_rate: f64,
        #[serde(default)]
        yaw_rate_deg: f64,
    },
    Waypoints {
        /// Path to a waypoint file, resolved relative to the scenario file.
        path: String,
        #[serde(default)]
        method: Option<crate::trajectory::InterpMethod>,
    },
}

fn default_altitude() -> f64 {
    1.0
}
fn default_radius() -> f64 {
    0.5
}
fn default_freq() -> f64 {
    0.05
}
fn default_climb() -> f64 {
    0.05
}

impl ReferenceSpec {
    /// Parametric kind, if this is not a waypoint reference.
    pub fn kind(&self) -> Option<ReferenceKind> {
        match *self {
            ReferenceSpec::Hover { x, y, z } => Some(ReferenceKind::Hover { x, y, z }),
            ReferenceSpec::Step { x, y, z, yaw_deg, t_start } => Some(ReferenceKind::Step {
                x,
                y,
                z,
                yaw: yaw_deg.to_radians(),
                t_start,
            }),
            ReferenceSpec::Circle { radius, freq_hz, altitude, yaw_rate_deg } => {
                Some(ReferenceKind::Circle {
                    radius,
                    freq_hz,
                    altitude,
                    yaw_rate: yaw_rate_deg.to_radians(),
                })
            }
            ReferenceSpec::Helix { radius, freq_hz, climb_rate, yaw_rate_deg } => {
                Some(ReferenceKind::Helix {
                    radius,
                    freq_hz,
                    climb_rate,
                    yaw_rate: yaw_rate_deg.to_radians(),
                })
            }
            ReferenceSpec::Waypoints { .. } => None,
        }
    }

    fn has_explicit_yaw(&self) -> bool {
        match *self {
            ReferenceSpec::Step { yaw_deg, .. } => yaw_deg != 0.0,
            ReferenceSpec::Circle { yaw_rate_deg, .. }
            | ReferenceSpec::Helix { yaw_rate_deg, .. } => yaw_rate_deg != 0.0,
            _ => false,
        }
    }
}

/// Loop frequencies; every loop must divide the physics rate, and the log
/// always runs at 100 Hz.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RatesConfig {
    pub physics_hz: u32,
    pub rate_hz: u32,
    pub attitude_hz: u32,
    pub offboard_hz: u32,
}

impl Default for RatesConfig {
    fn default() -> Self {
        RatesConfig { physics_hz: 1000, rate_hz: 500, attitude_hz: 250, offboard_hz: 100 }
    }
}

pub const LOG_HZ: u32 = 100;

impl RatesConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, hz) in [
            ("physics_hz", self.physics_hz),
            ("rate_hz", self.rate_hz),
            ("attitude_hz", self.attitude_hz),
            ("offboard_hz", self.offboard_hz),
        ] {
            if hz == 0 {
                return Err(Error::config(format!("{name} must be positive")));
            }
        }
        for (name, hz) in [
            ("rate_hz", self.rate_hz),
            ("attitude_hz", self.attitude_hz),
            ("offboard_hz", self.offboard_hz),
            ("log rate", LOG_HZ),
        ] {
            if self.physics_hz % hz != 0 {
                return Err(Error::config(format!(
                    "{name} = {hz} does not divide physics_hz = {}",
                    self.physics_hz
                )));
            }
        }
        // Off-board and attitude ticks must land on inner-loop ticks.
        let rate_div = self.physics_hz / self.rate_hz;
        if (self.physics_hz / self.offboard_hz) % rate_div != 0
            || (self.physics_hz / self.attitude_hz) % rate_div != 0
        {
            return Err(Error::config(
                "attitude and off-board ticks must align with the inner loop",
            ));
        }
        Ok(())
    }
}

/// Sensor noise configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SensingConfig {
    pub kind: NoiseKind,
    pub seed: u64,
    /// Override the per-axis position variances of the regime.
    pub variances: Option<[f64; 3]>,
    pub attitude_variance: f64,
}

impl Default for SensingConfig {
    fn default() -> Self {
        SensingConfig { kind: NoiseKind::None, seed: 0, variances: None, attitude_variance: 0.0 }
    }
}

impl SensingConfig {
    pub fn regime(&self) -> NoiseRegime {
        let mut regime = NoiseRegime::new(self.kind, self.seed);
        if let Some(v) = self.variances {
            regime.variances = v;
        }
        regime.attitude_variance = self.attitude_variance;
        regime
    }
}

/// PID gain overrides; a present entry replaces that controller's gain set.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PidConfig {
    pub rate_roll: Option<PidGains>,
    pub rate_pitch: Option<PidGains>,
    pub rate_yaw: Option<PidGains>,
    pub attitude_roll: Option<PidGains>,
    pub attitude_pitch: Option<PidGains>,
    pub altitude: Option<PidGains>,
    pub altitude_feedforward: Option<f64>,
    pub xy_x: Option<PidGains>,
    pub xy_y: Option<PidGains>,
    pub yaw_kp: Option<f64>,
    pub yaw_rate_limit: Option<f64>,
}

/// LQT solver and runtime configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LqtConfig {
    pub weights: LqtWeights,
    pub ki_ang: f64,
    pub ki_pos: f64,
    pub integral_signs: IntegralSigns,
    pub integral_clamp_ang: f64,
    pub integral_clamp_pos: f64,
    pub riccati_tol: f64,
    pub riccati_max_iter: usize,
    pub variant: RiccatiVariant,
    /// Hover PWM word the controller biases its rpm commands around.
    pub base_pwm: f64,
    /// Length of the straight-line take-off blend prepended to the
    /// reference [s].
    pub takeoff_ramp: f64,
}

impl Default for LqtConfig {
    fn default() -> Self {
        LqtConfig {
            weights: LqtWeights::paper_defaults(),
            ki_ang: crate::lqt::KI_ANG_MAGNITUDE,
            ki_pos: crate::lqt::KI_POS_MAGNITUDE,
            integral_signs: IntegralSigns::default(),
            integral_clamp_ang: 0.5,
            integral_clamp_pos: 2.0,
            riccati_tol: 1e-9,
            riccati_max_iter: 100_000,
            variant: RiccatiVariant::default(),
            base_pwm: PWM_HOVER,
            takeoff_ramp: 2.0,
        }
    }
}

/// Metrics scoring window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricsConfig {
    /// Samples before this time are excluded (take-off transient).
    pub skip_initial: f64,
    /// Optional end of the scored window.
    pub window_end: Option<f64>,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        MetricsConfig { skip_initial: 2.0, window_end: None }
    }
}

/// Partial override of the physical parameters. Aero coefficients are
/// re-derived whenever their inputs change, unless pinned explicitly.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ParamsOverride {
    pub m_quad: Option<f64>,
    pub m_uwb: Option<f64>,
    pub m_vicon: Option<f64>,
    pub m_total: Option<f64>,
    pub d: Option<f64>,
    pub r_rotor: Option<f64>,
    pub ixx: Option<f64>,
    pub iyy: Option<f64>,
    pub izz: Option<f64>,
    pub k_t: Option<f64>,
    pub k_d: Option<f64>,
    pub rho: Option<f64>,
    pub g: Option<f64>,
    pub c_t: Option<f64>,
    pub c_d: Option<f64>,
}

impl ParamsOverride {
    pub fn apply(&self, base: &PhysicalParams) -> Result<PhysicalParams> {
        let mut p = *base;
        let mut masses_touched = false;
        let mut aero_touched = false;
        macro_rules! set {
            ($field:ident, $flag:expr) => {
                if let Some(v) = self.$field {
                    p.$field = v;
                    $flag = true;
                }
            };
            ($field:ident) => {
                if let Some(v) = self.$field {
                    p.$field = v;
                }
            };
        }
        set!(m_quad, masses_touched);
        set!(m_uwb, masses_touched);
        set!(m_vicon, masses_touched);
        set!(d);
        set!(r_rotor, aero_touched);
        set!(ixx);
        set!(iyy);
        set!(izz);
        set!(k_t, aero_touched);
        set!(k_d, aero_touched);
        set!(rho, aero_touched);
        set!(g);
        if masses_touched && self.m_total.is_none() {
            p.m_total = p.m_quad + p.m_uwb + p.m_vicon;
        }
        if let Some(v) = self.m_total {
            p.m_total = v;
        }
        if aero_touched {
            p = p.with_derived_coefficients();
        }
        if let Some(v) = self.c_t {
            p.c_t = v;
        }
        if let Some(v) = self.c_d {
            p.c_d = v;
        }
        p.validate()?;
        Ok(p)
    }
}

/// A complete simulation scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default = "default_version")]
    pub version: u32,
    #[serde(default)]
    pub name: String,
    pub controller: ControllerKind,
    pub duration: f64,
    pub reference: ReferenceSpec,
    #[serde(default)]
    pub sensing: SensingConfig,
    #[serde(default)]
    pub rates: RatesConfig,
    /// One-way radio latency applied to off-board outputs [s].
    #[serde(default)]
    pub radio_latency: f64,
    #[serde(default)]
    pub initial: State,
    #[serde(default)]
    pub params: ParamsOverride,
    #[serde(default)]
    pub pid: PidConfig,
    #[serde(default)]
    pub lqt: LqtConfig,
    #[serde(default)]
    pub metrics: MetricsConfig,
    #[serde(default)]
    pub mixer: MixerVariant,
    /// Base directory for relative file references; set when loaded.
    #[serde(skip)]
    pub base_dir: Option<PathBuf>,
}

fn default_version() -> u32 {
    SCHEMA_VERSION
}

impl Scenario {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::io(path.display().to_string(), &e))?;
        let mut scenario = Self::from_json(&text)?;
        scenario.base_dir = path.parent().map(Path::to_path_buf);
        Ok(scenario)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let scenario: Scenario =
            serde_json::from_str(text).map_err(|e| Error::config(e.to_string()))?;
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn validate(&self) -> Result<()> {
        if self.version != SCHEMA_VERSION {
            return Err(Error::config(format!(
                "unsupported schema version {} (expected {SCHEMA_VERSION})",
                self.version
            )));
        }
        if !(self.duration > 0.0) {
            return Err(Error::config("duration must be positive"));
        }
        if self.radio_latency < 0.0 {
            return Err(Error::config("radio_latency must be non-negative"));
        }
        self.rates.validate()?;
        self.resolved_params()?;
        let regime = self.sensing.regime();
        if !regime.is_valid() {
            return Err(Error::config("noise variances must be non-negative"));
        }
        self.lqt.weights.validate()?;
        if self.controller == ControllerKind::Lqt && self.reference.has_explicit_yaw() {
            return Err(Error::config(
                "yaw references are not trackable under the lqt controller (reference yaw must be zero)",
            ));
        }
        if let Some(g) = self.pid.altitude.as_ref() {
            g.validate()?;
        }
        Ok(())
    }

    pub fn resolved_params(&self) -> Result<PhysicalParams> {
        self.params.apply(&PhysicalParams::crazyflie2())
    }

    /// Resolve the waypoint file against the scenario's directory.
    pub fn waypoint_set(&self) -> Result<Option<WaypointSet>> {
        let ReferenceSpec::Waypoints { path, .. } = &self.reference else {
            return Ok(None);
        };
        let resolved = match &self.base_dir {
            Some(dir) if Path::new(path).is_relative() => dir.join(path),
            _ => PathBuf::from(path),
        };
        let text = std::fs::read_to_string(&resolved)
            .map_err(|e| Error::io(resolved.display().to_string(), &e))?;
        let wps: WaypointSet =
            serde_json::from_str(&text).map_err(|e| Error::config(e.to_string()))?;
        wps.validate()?;
        Ok(Some(wps))
    }
}

/// Apply a `--set key=value` dotted-path override onto raw scenario JSON.
pub fn apply_override(root: &mut Value, dotted_key: &str, raw_value: &str) -> Result<()> {
    let parsed: Value = serde_json::from_str(raw_value)
        .unwrap_or_else(|_| Value::String(raw_value.to_string()));
    let mut cursor = root;
    let segments: Vec<&str> = dotted_key.split('.').collect();
    for (i, segment) in segments.iter().enumerate() {
        if segment.is_empty() {
            return Err(Error::config(format!("empty path segment in '{dotted_key}'")));
        }
        let object = cursor
            .as_object_mut()
            .ok_or_else(|| Error::config(format!("'{dotted_key}': cannot index into a scalar")))?;
        if i + 1 == segments.len() {
            object.insert((*segment).to_string(), parsed);
            return Ok(());
        }
        cursor = object
            .entry((*segment).to_string())
            .or_insert_with(|| Value::Object(serde_json::Map::new()));
    }
    Ok(())
}
