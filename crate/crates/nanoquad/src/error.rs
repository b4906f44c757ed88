//! Error taxonomy shared by the simulation, solvers and the CLI.

use thiserror::Error;

#[derive(Error, Debug, Clone, PartialEq)]
pub enum Error {
    /// Pitch angle reached the singularity of the Euler-rate map.
    #[error("gimbal lock: |theta| = {theta:.6} rad within {eps:.0e} rad of pi/2{}", at_time(.time))]
    GimbalLock { theta: f64, eps: f64, time: Option<f64> },

    /// A state variable left the sanity bounds during simulation.
    #[error("non-finite or runaway state at t = {time:.3} s (|{state}| = {value:.3e})")]
    NonFinite { time: f64, state: &'static str, value: f64 },

    /// Value outside its documented domain.
    #[error("{what} = {value} outside [{lo}, {hi}]")]
    OutOfRange { what: &'static str, value: f64, lo: f64, hi: f64 },

    /// A matrix that must be invertible was singular.
    #[error("singular matrix in {what}{}", at_step(.step))]
    SingularMatrix { what: &'static str, step: Option<usize> },

    /// Innovation covariance of the measurement update was singular.
    #[error("singular innovation covariance in Kalman update")]
    SingularInnovation,

    /// Fixed-point iteration failed to converge.
    #[error("{what} did not converge after {iterations} iterations (residual {residual:.3e})")]
    NoConvergence { what: &'static str, iterations: usize, residual: f64 },

    /// Two sequences that must be aligned had different lengths.
    #[error("length mismatch in {what}: {left} vs {right}")]
    LengthMismatch { what: &'static str, left: usize, right: usize },

    /// Waypoint set unusable for interpolation.
    #[error("degenerate waypoints: {0}")]
    DegenerateWaypoints(String),

    /// Bad scenario / waypoint / parameter file.
    #[error("config error: {0}")]
    Config(String),

    #[error("io error on {path}: {message}")]
    Io { path: String, message: String },
}

fn at_time(t: &Option<f64>) -> String {
    t.map(|t| format!(" at t = {t:.3} s")).unwrap_or_default()
}

fn at_step(s: &Option<usize>) -> String {
    s.map(|s| format!(" at step {s}")).unwrap_or_default()
}

impl Error {
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub fn io(path: impl Into<String>, err: &std::io::Error) -> Self {
        Error::Io { path: path.into(), message: err.to_string() }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
