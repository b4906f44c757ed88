//! File outputs: CSV flight logs, reference dumps, metrics JSON, gnuplot
//! scripts and the reproducibility manifest.
//!
//! Floats are written with Rust's shortest-round-trip formatting, so a
//! rerun of the same scenario produces byte-identical files and parsing a
//! log back recovers the exact values.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::{FlightLog, FlightRecord};
use crate::metrics::Metrics;
use crate::scenario::{ControllerKind, MetricsConfig, Scenario};
use crate::state::{MotorPwm, State, StateVector, STATE_NAMES};
use crate::trajectory::ReferenceTrajectory;

/// Column layout of `log.csv`: time, the 12 true states, the off-board
/// estimates, the 12-state reference (yaw setpoint in the `psi` row), the
/// four motor words and a saturation bitmask (bit i = motor i+1).
pub const LOG_HEADER: &str = "t,x,y,z,psi,theta,phi,u,v,w,r,q,p,\
est_x,est_y,est_z,est_vx,est_vy,est_vz,\
ref_x,ref_y,ref_z,ref_psi,ref_theta,ref_phi,ref_u,ref_v,ref_w,ref_r,ref_q,ref_p,\
pwm1,pwm2,pwm3,pwm4,sat";

pub fn log_to_csv(log: &FlightLog) -> String {
    let mut out = String::with_capacity(log.records.len() * 220 + LOG_HEADER.len());
    out.push_str(LOG_HEADER);
    out.push('\n');
    for r in &log.records {
        let truth = r.truth.to_vector();
        write!(out, "{}", r.t).unwrap();
        for v in truth.iter() {
            write!(out, ",{v}").unwrap();
        }
        for v in r.est_position.iter().chain(r.est_velocity.iter()) {
            write!(out, ",{v}").unwrap();
        }
        for v in r.reference.iter() {
            write!(out, ",{v}").unwrap();
        }
        for m in r.pwm.0 {
            write!(out, ",{m}").unwrap();
        }
        let mask = r
            .saturated
            .iter()
            .enumerate()
            .fold(0u8, |acc, (i, s)| if *s { acc | (1 << i) } else { acc });
        writeln!(out, ",{mask}").unwrap();
    }
    out
}

pub fn write_log_csv(log: &FlightLog, path: &Path) -> Result<()> {
    fs::write(path, log_to_csv(log)).map_err(|e| Error::io(path.display().to_string(), &e))
}

pub fn read_log_csv(path: &Path) -> Result<FlightLog> {
    let text =
        fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), &e))?;
    log_from_csv(&text)
}

pub fn log_from_csv(text: &str) -> Result<FlightLog> {
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| Error::config("empty log file"))?;
    if header != LOG_HEADER {
        return Err(Error::config("log header does not match the expected schema"));
    }
    let mut records = Vec::new();
    for (line_no, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 36 {
            return Err(Error::config(format!(
                "log line {}: expected 36 fields, found {}",
                line_no + 2,
                fields.len()
            )));
        }
        let parse = |s: &str| -> Result<f64> {
            s.parse::<f64>()
                .map_err(|_| Error::config(format!("log line {}: bad number '{s}'", line_no + 2)))
        };
        let t = parse(fields[0])?;
        let mut truth_vec = StateVector::zeros();
        for i in 0..12 {
            truth_vec[i] = parse(fields[1 + i])?;
        }
        let est_position =
            Vector3::new(parse(fields[13])?, parse(fields[14])?, parse(fields[15])?);
        let est_velocity =
            Vector3::new(parse(fields[16])?, parse(fields[17])?, parse(fields[18])?);
        let mut reference = StateVector::zeros();
        for i in 0..12 {
            reference[i] = parse(fields[19 + i])?;
        }
        let mut pwm = [0u16; 4];
        for i in 0..4 {
            pwm[i] = fields[31 + i].parse::<u16>().map_err(|_| {
                Error::config(format!("log line {}: bad pwm '{}'", line_no + 2, fields[31 + i]))
            })?;
        }
        let mask: u8 = fields[35]
            .parse()
            .map_err(|_| Error::config(format!("log line {}: bad sat mask", line_no + 2)))?;
        records.push(FlightRecord {
            t,
            truth: State::from_vector(&truth_vec),
            est_position,
            est_velocity,
            reference,
            pwm: MotorPwm(pwm),
            saturated: [mask & 1 != 0, mask & 2 != 0, mask & 4 != 0, mask & 8 != 0],
        });
    }
    if records.is_empty() {
        return Err(Error::config("log contains no records"));
    }
    let ts = if records.len() > 1 { records[1].t - records[0].t } else { 0.01 };
    Ok(FlightLog {
        ts,
        controller: ControllerKind::Pid,
        records,
        metrics: MetricsConfig::default(),
    })
}

/// Reference CSV: one row per sample, `t` plus the 12 states.
pub fn reference_to_csv(reference: &ReferenceTrajectory) -> String {
    let mut out = String::new();
    out.push('t');
    for name in STATE_NAMES {
        out.push(',');
        out.push_str(name);
    }
    out.push('\n');
    for (k, sample) in reference.samples.iter().enumerate() {
        write!(out, "{}", k as f64 * reference.ts).unwrap();
        for (i, v) in sample.iter().enumerate() {
            if i == crate::state::idx::PSI {
                write!(out, ",{}", reference.yaw_at(k)).unwrap();
            } else {
                write!(out, ",{v}").unwrap();
            }
        }
        out.push('\n');
    }
    out
}

pub fn write_reference_csv(reference: &ReferenceTrajectory, path: &Path) -> Result<()> {
    fs::write(path, reference_to_csv(reference))
        .map_err(|e| Error::io(path.display().to_string(), &e))
}

pub fn write_metrics_json(metrics: &Metrics, path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(metrics).expect("metrics serialize");
    fs::write(path, text).map_err(|e| Error::io(path.display().to_string(), &e))
}

/// Reproducibility manifest written next to every run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunMeta {
    pub tool_version: String,
    pub seed: u64,
    /// FNV-1a hash of the resolved scenario JSON.
    pub config_hash: String,
    /// The fully resolved scenario; running it again reproduces the log.
    pub scenario: Scenario,
}

impl RunMeta {
    pub fn new(scenario: &Scenario) -> Self {
        let canonical = serde_json::to_string(scenario).expect("scenario serialize");
        RunMeta {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            seed: scenario.sensing.seed,
            config_hash: format!("{:016x}", fnv1a64(canonical.as_bytes())),
            scenario: scenario.clone(),
        }
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).expect("meta serialize");
        fs::write(path, text).map_err(|e| Error::io(path.display().to_string(), &e))
    }
}

pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash = 0xcbf29ce484222325u64;
    for b in bytes {
        hash ^= u64::from(*b);
        hash = hash.wrapping_mul(0x100000001b3);
    }
    hash
}

/// Gnuplot script reproducing the usual figure layout: position tracking
/// per axis, the 3D path, and the motor commands.
pub fn plot_script(log_name: &str) -> String {
    format!(
        r#"# Generated plot script; run with: gnuplot plots.gp
set datafile separator ','
set key autotitle columnhead
set grid

set terminal pngcairo size 1400,900
set output 'positions.png'
set multiplot layout 3,1 title 'Position tracking'
set ylabel 'x [m]'
plot '{log}' using 1:2 with lines title 'x', '{log}' using 1:20 with lines dashtype 2 title 'x ref'
set ylabel 'y [m]'
plot '{log}' using 1:3 with lines title 'y', '{log}' using 1:21 with lines dashtype 2 title 'y ref'
set ylabel 'z [m]'
set xlabel 't [s]'
plot '{log}' using 1:4 with lines title 'z', '{log}' using 1:22 with lines dashtype 2 title 'z ref'
unset multiplot

set output 'path3d.png'
set ticslevel 0
set view 60, 40
set xlabel 'x [m]'
set ylabel 'y [m]'
set zlabel 'z [m]'
splot '{log}' using 2:3:4 with lines title 'flight', '{log}' using 20:21:22 with lines dashtype 2 title 'reference'

set output 'motors.png'
set xlabel 't [s]'
set ylabel 'PWM'
plot '{log}' using 1:32 with lines title 'm1', \
     '{log}' using 1:33 with lines title 'm2', \
     '{log}' using 1:34 with lines title 'm3', \
     '{log}' using 1:35 with lines title 'm4'
"#,
        log = log_name
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::run_scenario;
    use crate::scenario::Scenario;

    fn short_log() -> FlightLog {
        let scenario = Scenario::from_json(
            r#"{
                "controller": "pid",
                "duration": 1.0,
                "reference": {"type": "hover", "z": 0.3},
                "sensing": {"kind": "vicon", "seed": 9}
            }"#,
        )
        .unwrap();
        run_scenario(&scenario).unwrap()
    }

    #[test]
    fn log_round_trips_through_csv() {
        let log = short_log();
        let text = log_to_csv(&log);
        let back = log_from_csv(&text).unwrap();
        assert_eq!(log.records.len(), back.records.len());
        for (a, b) in log.records.iter().zip(&back.records) {
            assert_eq!(a.t, b.t);
            assert_eq!(a.truth, b.truth);
            assert_eq!(a.reference, b.reference);
            assert_eq!(a.pwm, b.pwm);
            assert_eq!(a.saturated, b.saturated);
        }
    }

    #[test]
    fn header_is_stable() {
        assert!(LOG_HEADER.starts_with("t,x,y,z,psi"));
        assert_eq!(LOG_HEADER.split(',').count(), 36);
        let log = short_log();
        assert!(log_to_csv(&log).starts_with(LOG_HEADER));
    }

    #[test]
    fn tampered_header_is_rejected() {
        let log = short_log();
        let text = log_to_csv(&log).replacen("t,x", "time,x", 1);
        assert!(log_from_csv(&text).is_err());
    }

    #[test]
    fn config_hash_is_stable_and_seed_sensitive() {
        let scenario = Scenario::from_json(
            r#"{"controller": "pid", "duration": 1.0, "reference": {"type": "hover"}}"#,
        )
        .unwrap();
        let meta_a = RunMeta::new(&scenario);
        let meta_b = RunMeta::new(&scenario);
        assert_eq!(meta_a.config_hash, meta_b.config_hash);

        let mut other = scenario.clone();
        other.sensing.seed = 99;
        assert_ne!(RunMeta::new(&other).config_hash, meta_a.config_hash);
    }

    #[test]
    fn plot_script_references_the_log_columns() {
        let script = plot_script("log.csv");
        assert!(script.contains("using 1:2"));
        assert!(script.contains("splot"));
        assert!(script.contains("using 1:35"));
    }
}
