//! Tracking-performance scoring: per-axis RMS error, the 10 cm margin
//! index, and control effort.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::FlightLog;
use crate::scenario::MetricsConfig;
use crate::state::idx;

/// Error margin of the performance index [m].
pub const XI_MARGIN: f64 = 0.10;

/// Scored tracking performance of one flight.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    /// RMS tracking error per axis over the scored window [m].
    pub rms_x: f64,
    pub rms_y: f64,
    pub rms_z: f64,
    /// Percentage of scored samples within the 10 cm margin per axis.
    pub xi_x: f64,
    pub xi_y: f64,
    pub xi_z: f64,
    /// Control effort per motor, the sum of squared PWM words over the
    /// full log.
    pub effort: [f64; 4],
    /// Scored window `[start, end)` [s].
    pub window: [f64; 2],
    pub samples_scored: usize,
}

impl Metrics {
    pub fn rms(&self) -> [f64; 3] {
        [self.rms_x, self.rms_y, self.rms_z]
    }

    pub fn xi(&self) -> [f64; 3] {
        [self.xi_x, self.xi_y, self.xi_z]
    }
}

/// Score a log against its embedded reference.
pub fn compute_metrics(log: &FlightLog, cfg: &MetricsConfig) -> Result<Metrics> {
    if log.records.is_empty() {
        return Err(Error::config("cannot score an empty log"));
    }
    let start = cfg.skip_initial;
    let end = cfg.window_end.unwrap_or(f64::INFINITY);
    if end <= start {
        return Err(Error::config("scored window is empty"));
    }

    let mut sum_sq = [0.0f64; 3];
    let mut inside = [0usize; 3];
    let mut scored = 0usize;
    let mut effort = [0.0f64; 4];
    for record in &log.records {
        for (i, u) in record.pwm.0.iter().enumerate() {
            let u = f64::from(*u);
            effort[i] += u * u;
        }
        if record.t < start || record.t >= end {
            continue;
        }
        scored += 1;
        let truth = [record.truth.x, record.truth.y, record.truth.z];
        let reference =
            [record.reference[idx::X], record.reference[idx::Y], record.reference[idx::Z]];
        for axis in 0..3 {
            let err = truth[axis] - reference[axis];
            sum_sq[axis] += err * err;
            if err.abs() <= XI_MARGIN {
                inside[axis] += 1;
            }
        }
    }
    if scored == 0 {
        return Err(Error::config("scored window contains no samples"));
    }
    let rms = |axis: usize| (sum_sq[axis] / scored as f64).sqrt();
    let xi = |axis: usize| 100.0 * inside[axis] as f64 / scored as f64;
    Ok(Metrics {
        rms_x: rms(0),
        rms_y: rms(1),
        rms_z: rms(2),
        xi_x: xi(0),
        xi_y: xi(1),
        xi_z: xi(2),
        effort,
        window: [start, end.min(log.duration())],
        samples_scored: scored,
    })
}

/// Side-by-side comparison of two runs over the same reference.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub a: Metrics,
    pub b: Metrics,
    /// `100 * (U_a - U_b) / U_b` per motor: the effort increase of run A
    /// relative to run B.
    pub effort_ratio_pct: [f64; 4],
    /// `rms_a / rms_b` per axis.
    pub rms_ratio: [f64; 3],
}

/// Compare run A against run B (call with A = tracker under test,
/// B = baseline).
///
/// Both logs must follow the same position reference over the scored
/// window.
pub fn compare_runs(a: &FlightLog, b: &FlightLog, cfg: &MetricsConfig) -> Result<Comparison> {
    let n = a.records.len().min(b.records.len());
    for (ra, rb) in a.records[..n].iter().zip(&b.records[..n]) {
        if ra.t < cfg.skip_initial {
            continue;
        }
        let dx = (ra.reference[idx::X] - rb.reference[idx::X]).abs();
        let dy = (ra.reference[idx::Y] - rb.reference[idx::Y]).abs();
        let dz = (ra.reference[idx::Z] - rb.reference[idx::Z]).abs();
        if dx.max(dy).max(dz) > 1e-9 {
            return Err(Error::config(format!(
                "references diverge at t = {:.2} s; compare runs over the same reference",
                ra.t
            )));
        }
    }
    let metrics_a = compute_metrics(a, cfg)?;
    let metrics_b = compute_metrics(b, cfg)?;
    let mut effort_ratio_pct = [0.0; 4];
    for i in 0..4 {
        effort_ratio_pct[i] =
            100.0 * (metrics_a.effort[i] - metrics_b.effort[i]) / metrics_b.effort[i];
    }
    let rms_a = metrics_a.rms();
    let rms_b = metrics_b.rms();
    let mut rms_ratio = [0.0; 3];
    for i in 0..3 {
        rms_ratio[i] = rms_a[i] / rms_b[i];
    }
    Ok(Comparison { a: metrics_a, b: metrics_b, effort_ratio_pct, rms_ratio })
}

/// Format a comparison as the usual two-row table (RMS per axis, margin
/// index per axis, per-motor effort, effort ratio).
pub fn format_comparison(label_a: &str, label_b: &str, cmp: &Comparison) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "{:<8} {:>9} {:>9} {:>9} {:>7} {:>7} {:>7} {:>11} {:>11} {:>11} {:>11}\n",
        "", "RMSx[cm]", "RMSy[cm]", "RMSz[cm]", "xi_x%", "xi_y%", "xi_z%", "U1", "U2", "U3", "U4"
    ));
    for (label, m) in [(label_a, &cmp.a), (label_b, &cmp.b)] {
        out.push_str(&format!(
            "{:<8} {:>9.2} {:>9.2} {:>9.2} {:>7.2} {:>7.2} {:>7.2} {:>11.4e} {:>11.4e} {:>11.4e} {:>11.4e}\n",
            label,
            m.rms_x * 100.0,
            m.rms_y * 100.0,
            m.rms_z * 100.0,
            m.xi_x,
            m.xi_y,
            m.xi_z,
            m.effort[0],
            m.effort[1],
            m.effort[2],
            m.effort[3],
        ));
    }
    out.push_str(&format!(
        "{:<8} {:>9.3} {:>9.3} {:>9.3} {:>7} {:>7} {:>7} {:>10.2}% {:>10.2}% {:>10.2}% {:>10.2}%\n",
        "ratio",
        cmp.rms_ratio[0],
        cmp.rms_ratio[1],
        cmp.rms_ratio[2],
        "",
        "",
        "",
        cmp.effort_ratio_pct[0],
        cmp.effort_ratio_pct[1],
        cmp.effort_ratio_pct[2],
        cmp.effort_ratio_pct[3],
    ));
    out
}

/// Lag (in seconds, >= 0) maximizing the cross-correlation between a
/// reference signal and a delayed response, scanned on the sample grid.
pub fn cross_correlation_lag(reference: &[f64], response: &[f64], ts: f64, max_lag: f64) -> f64 {
    let n = reference.len().min(response.len());
    let max_shift = ((max_lag / ts).round() as usize).min(n.saturating_sub(2));
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let m_ref = mean(&reference[..n]);
    let m_res = mean(&response[..n]);
    let mut best = (0usize, f64::NEG_INFINITY);
    for shift in 0..=max_shift {
        let mut score = 0.0;
        for i in shift..n {
            score += (reference[i - shift] - m_ref) * (response[i] - m_res);
        }
        let count = (n - shift) as f64;
        let score = score / count;
        if score > best.1 {
            best = (shift, score);
        }
    }
    best.0 as f64 * ts
}

/// Tracking lag of one position axis against its reference over the scored
/// window.
pub fn tracking_lag(log: &FlightLog, axis: usize, cfg: &MetricsConfig, max_lag: f64) -> f64 {
    let state_idx = [idx::X, idx::Y, idx::Z][axis];
    let truth_field = |r: &crate::harness::FlightRecord| match axis {
        0 => r.truth.x,
        1 => r.truth.y,
        _ => r.truth.z,
    };
    let scored: Vec<_> = log.records.iter().filter(|r| r.t >= cfg.skip_initial).collect();
    let reference: Vec<f64> = scored.iter().map(|r| r.reference[state_idx]).collect();
    let response: Vec<f64> = scored.iter().map(|r| truth_field(r)).collect();
    cross_correlation_lag(&reference, &response, log.ts, max_lag)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::FlightRecord;
    use crate::scenario::ControllerKind;
    use crate::state::{MotorPwm, State, StateVector};

    /// Synthetic log with a constant per-axis error (reference at the
    /// origin, so the error values are bit-exact) and constant PWM.
    fn synthetic_log(error: [f64; 3], pwm: u16, n: usize) -> FlightLog {
        let mut records = Vec::with_capacity(n);
        for k in 0..n {
            let reference = StateVector::zeros();
            records.push(FlightRecord {
                t: k as f64 * 0.01,
                truth: State {
                    x: error[0],
                    y: error[1],
                    z: error[2],
                    ..Default::default()
                },
                est_position: nalgebra::Vector3::zeros(),
                est_velocity: nalgebra::Vector3::zeros(),
                reference,
                pwm: MotorPwm([pwm; 4]),
                saturated: [false; 4],
            });
        }
        FlightLog {
            ts: 0.01,
            controller: ControllerKind::Pid,
            records,
            metrics: MetricsConfig::default(),
        }
    }

    #[test]
    fn boundary_error_counts_as_inside() {
        let log = synthetic_log([0.10, 0.10, 0.10], 0, 500);
        let m = compute_metrics(&log, &MetricsConfig::default()).unwrap();
        assert!((m.rms_x - 0.10).abs() < 1e-12);
        assert_eq!(m.xi_x, 100.0);
        assert_eq!(m.xi_y, 100.0);
        assert_eq!(m.xi_z, 100.0);
    }

    #[test]
    fn error_outside_margin_scores_zero() {
        let log = synthetic_log([0.2, 0.2, 0.2], 0, 500);
        let m = compute_metrics(&log, &MetricsConfig::default()).unwrap();
        assert_eq!(m.xi_x, 0.0);
        assert!((m.rms_x - 0.2).abs() < 1e-12);
    }

    #[test]
    fn effort_is_the_sum_of_squared_pwm() {
        let log = synthetic_log([0.0; 3], 40000, 3);
        let cfg = MetricsConfig { skip_initial: 0.0, window_end: None };
        let m = compute_metrics(&log, &cfg).unwrap();
        assert_eq!(m.effort, [4.8e9; 4]);
    }

    #[test]
    fn scored_window_excludes_the_takeoff() {
        let mut log = synthetic_log([0.0; 3], 0, 500);
        // Large error before 2 s only.
        for record in log.records.iter_mut().filter(|r| r.t < 2.0) {
            record.truth.z = 50.0;
        }
        let m = compute_metrics(&log, &MetricsConfig::default()).unwrap();
        assert_eq!(m.rms_z, 0.0);
        assert_eq!(m.samples_scored, 300);
    }

    #[test]
    fn identical_logs_compare_at_zero_ratio() {
        let log = synthetic_log([0.01, 0.02, 0.03], 30000, 500);
        let cmp = compare_runs(&log, &log, &MetricsConfig::default()).unwrap();
        assert_eq!(cmp.effort_ratio_pct, [0.0; 4]);
        assert_eq!(cmp.rms_ratio, [1.0; 3]);
        let table = format_comparison("a", "b", &cmp);
        assert!(table.contains("RMSx"));
    }

    #[test]
    fn diverging_references_are_rejected() {
        let a = synthetic_log([0.0; 3], 0, 500);
        let mut b = synthetic_log([0.0; 3], 0, 500);
        for record in &mut b.records {
            record.reference[idx::X] = 5.0;
        }
        assert!(compare_runs(&a, &b, &MetricsConfig::default()).is_err());
    }

    #[test]
    fn cross_correlation_recovers_a_known_delay() {
        let ts = 0.01;
        let n = 2000;
        let delay_samples = 20; // 0.2 s
        let signal: Vec<f64> =
            (0..n).map(|k| (2.0 * std::f64::consts::PI * 0.2 * k as f64 * ts).sin()).collect();
        let delayed: Vec<f64> = (0..n)
            .map(|k| if k >= delay_samples { signal[k - delay_samples] } else { 0.0 })
            .collect();
        let lag = cross_correlation_lag(&signal, &delayed, ts, 0.5);
        assert!((lag - 0.2).abs() < 0.015, "lag = {lag}");
    }
}
