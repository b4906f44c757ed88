//! Deterministic desk-scale simulation suite for a Crazyflie-class
//! nanoquadcopter.
//!
//! The crate models the full control pipeline of the vehicle: nonlinear
//! rigid-body dynamics with the measured Crazyflie 2.0 parameters, the
//! firmware's cascaded PID stack (rate, attitude, control mixer plus
//! off-board altitude/X-Y/yaw position loops), a discrete-time
//! linear-quadratic tracker with integral augmentation, Kalman velocity
//! estimation under VICON- and UWB-grade measurement noise, waypoint and
//! parametric reference generation, and a multi-rate closed-loop harness
//! that scores tracking performance.
//!
//! Every simulation is deterministic: fixed-step integration, counter-based
//! measurement noise, and schedule-stable controllers mean a `(scenario,
//! seed)` pair always reproduces the same flight log bit for bit.
//!
//! Start with [`harness::run_scenario`] and the runnable examples, or drive
//! individual layers directly:
//!
//! ```
//! use nanoquad::params::PhysicalParams;
//! use nanoquad::linear::{build_continuous, discretize_zoh};
//! use nanoquad::lqt::{LqtProblem, LqtWeights};
//!
//! let params = PhysicalParams::crazyflie2();
//! let model = build_continuous(&params);
//! let discrete = discretize_zoh(&model, 0.01);
//! let problem = LqtProblem::new(discrete, LqtWeights::paper_defaults()).unwrap();
//! let solution = problem.steady_state().unwrap();
//! assert!(solution.closed_loop_spectral_radius < 1.0);
//! ```

pub mod dynamics;
pub mod error;
pub mod harness;
pub mod kalman;
pub mod linear;
pub mod lqt;
pub mod metrics;
pub mod noise;
pub mod output;
pub mod params;
pub mod pid;
pub mod scenario;
pub mod state;
pub mod trajectory;

pub use error::{Error, Result};
pub use params::PhysicalParams;
pub use state::{BodyWrench, MotorPwm, MotorSpeeds, State};
