//! Physical parameters of the vehicle and the derived aero coefficients.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Physical parameters of a Crazyflie-class quadcopter.
///
/// `c_t` and `c_d` are stored alongside the non-dimensional coefficients
/// they derive from; [`PhysicalParams::validate`] enforces consistency so a
/// config file cannot silently decouple them.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PhysicalParams {
    /// Mass of the quadcopter alone [kg].
    pub m_quad: f64,
    /// Mass of the UWB module [kg].
    pub m_uwb: f64,
    /// Mass of one VICON marker [kg].
    pub m_vicon: f64,
    /// Total mass [kg].
    pub m_total: f64,
    /// Arm length, center of gravity to motor axis [m].
    pub d: f64,
    /// Rotor radius [m].
    pub r_rotor: f64,
    /// Principal moment of inertia around body x [kg m^2].
    pub ixx: f64,
    /// Principal moment of inertia around body y [kg m^2].
    pub iyy: f64,
    /// Principal moment of inertia around body z [kg m^2].
    pub izz: f64,
    /// Non-dimensional thrust coefficient.
    pub k_t: f64,
    /// Non-dimensional torque coefficient.
    pub k_d: f64,
    /// Air density [kg/m^3].
    pub rho: f64,
    /// Gravity [m/s^2].
    pub g: f64,
    /// Thrust coefficient [N/rpm^2].
    pub c_t: f64,
    /// Drag-torque coefficient [N m/rpm^2].
    pub c_d: f64,
}

/// `C_T = k_T rho (2 r)^4 / 3600`, thrust per squared rpm.
pub fn thrust_coefficient(k_t: f64, rho: f64, r_rotor: f64) -> f64 {
    k_t * rho * (2.0 * r_rotor).powi(4) / 3600.0
}

/// `C_D = k_D rho (2 r)^5 / 3600`, reaction torque per squared rpm.
pub fn drag_coefficient(k_d: f64, rho: f64, r_rotor: f64) -> f64 {
    k_d * rho * (2.0 * r_rotor).powi(5) / 3600.0
}

impl PhysicalParams {
    /// Crazyflie 2.0 parameter set.
    ///
    /// The masses are 27 g for the airframe plus 4 g of UWB module and 2 g
    /// of VICON marker, 33 g total.
    pub fn crazyflie2() -> Self {
        let k_t = 0.2025;
        let k_d = 0.11;
        let rho = 1.225;
        let r_rotor = 23.1348e-3;
        PhysicalParams {
            m_quad: 0.027,
            m_uwb: 0.004,
            m_vicon: 0.002,
            m_total: 0.033,
            d: 39.73e-3,
            r_rotor,
            ixx: 1.395e-5,
            iyy: 1.436e-5,
            izz: 2.173e-5,
            k_t,
            k_d,
            rho,
            g: 9.81,
            c_t: thrust_coefficient(k_t, rho, r_rotor),
            c_d: drag_coefficient(k_d, rho, r_rotor),
        }
    }

    /// Recompute `c_t`/`c_d` from the non-dimensional coefficients.
    pub fn with_derived_coefficients(mut self) -> Self {
        self.c_t = thrust_coefficient(self.k_t, self.rho, self.r_rotor);
        self.c_d = drag_coefficient(self.k_d, self.rho, self.r_rotor);
        self
    }

    /// Check positivity, mass accounting and coefficient consistency.
    pub fn validate(&self) -> Result<()> {
        let positive: [(&str, f64); 10] = [
            ("m_quad", self.m_quad),
            ("m_total", self.m_total),
            ("d", self.d),
            ("r_rotor", self.r_rotor),
            ("ixx", self.ixx),
            ("iyy", self.iyy),
            ("izz", self.izz),
            ("rho", self.rho),
            ("g", self.g),
            ("c_t", self.c_t),
        ];
        for (name, value) in positive {
            if !(value > 0.0) || !value.is_finite() {
                return Err(Error::config(format!("{name} must be strictly positive, got {value}")));
            }
        }
        if self.m_uwb < 0.0 || self.m_vicon < 0.0 {
            return Err(Error::config("module masses must be non-negative"));
        }
        let mass_sum = self.m_quad + self.m_uwb + self.m_vicon;
        if (mass_sum - self.m_total).abs() > 1e-12 {
            return Err(Error::config(format!(
                "m_total = {} does not equal m_quad + m_uwb + m_vicon = {mass_sum}",
                self.m_total
            )));
        }
        let c_t_ref = thrust_coefficient(self.k_t, self.rho, self.r_rotor);
        let c_d_ref = drag_coefficient(self.k_d, self.rho, self.r_rotor);
        if rel_err(self.c_t, c_t_ref) > 1e-6 {
            return Err(Error::config(format!(
                "c_t = {:.6e} inconsistent with k_t/rho/r_rotor (expected {:.6e})",
                self.c_t, c_t_ref
            )));
        }
        if rel_err(self.c_d, c_d_ref) > 1e-6 {
            return Err(Error::config(format!(
                "c_d = {:.6e} inconsistent with k_d/rho/r_rotor (expected {:.6e})",
                self.c_d, c_d_ref
            )));
        }
        Ok(())
    }
}

impl Default for PhysicalParams {
    fn default() -> Self {
        Self::crazyflie2()
    }
}

fn rel_err(a: f64, b: f64) -> f64 {
    if b == 0.0 {
        a.abs()
    } else {
        ((a - b) / b).abs()
    }
}
