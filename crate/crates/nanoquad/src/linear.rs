//! Hover linearization: analytic state-space model, mixing matrices,
//! decoupled subsystems and zero-order-hold discretization.

use nalgebra::{DMatrix, Matrix4, SMatrix};

use crate::error::{Error, Result};
use crate::params::PhysicalParams;
use crate::state::{idx, MotorSpeeds, State};

pub type MatA = SMatrix<f64, 12, 12>;
pub type MatB = SMatrix<f64, 12, 4>;

/// Continuous-time linearization about hover.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    pub a: MatA,
    pub b: MatB,
    /// Output map; identity (full state observed by the harness).
    pub c: MatA,
    pub d: MatB,
    /// Equilibrium state (position and yaw arbitrary, zero here).
    pub x_e: State,
    /// Equilibrium input, all rotors at `omega_e`.
    pub u_e: MotorSpeeds,
    /// Hover rotor speed [rpm].
    pub omega_e: f64,
    /// Parameters the model was linearized from.
    pub params: PhysicalParams,
}

/// Discrete-time model from zero-order-hold sampling.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteModel {
    pub ad: MatA,
    pub bd: MatB,
    pub ts: f64,
}

/// Linearized map between rotor-speed deviations and the body wrench.
#[derive(Debug, Clone, PartialEq)]
pub struct MixingMatrix {
    /// `[Fz Mx My Mz]^T = gamma * [dw1 dw2 dw3 dw4]^T`.
    pub gamma: Matrix4<f64>,
    pub gamma_inv: Matrix4<f64>,
}

/// State-space realization of one decoupled hover subsystem.
#[derive(Debug, Clone, PartialEq)]
pub struct Subsystem<const N: usize> {
    pub a: SMatrix<f64, N, N>,
    pub b: SMatrix<f64, N, 1>,
    /// Indices of the subsystem states in the 12-state vector.
    pub states: [usize; N],
}

/// The four decoupled subsystems of the hover model.
#[derive(Debug, Clone, PartialEq)]
pub struct DecoupledSubsystems {
    /// `[w z]`, driven by collective thrust deviation.
    pub vertical: Subsystem<2>,
    /// `[r psi]`, driven by yaw moment.
    pub directional: Subsystem<2>,
    /// `[p phi v y]`, driven by roll moment.
    pub lateral: Subsystem<4>,
    /// `[q theta u x]`, driven by pitch moment.
    pub longitudinal: Subsystem<4>,
}

/// Hover equilibrium: zero attitude and velocities, all rotors at
/// `omega_e = sqrt(m g / (4 C_T))`.
pub fn equilibrium(params: &PhysicalParams) -> (State, MotorSpeeds, f64) {
    let omega_e = (params.m_total * params.g / (4.0 * params.c_t)).sqrt();
    (State::default(), MotorSpeeds::uniform(omega_e), omega_e)
}

/// Analytic A and B of the hover linearization.
///
/// The rotor-speed factor `omega_e` is folded into B, so B maps rpm
/// deviations directly.
pub fn build_continuous(params: &PhysicalParams) -> LinearModel {
    let (x_e, u_e, omega_e) = equilibrium(params);
    let g = params.g;

    let mut a = MatA::zeros();
    a[(idx::X, idx::U)] = 1.0;
    a[(idx::Y, idx::V)] = 1.0;
    a[(idx::Z, idx::W)] = 1.0;
    a[(idx::PSI, idx::R)] = 1.0;
    a[(idx::THETA, idx::Q)] = 1.0;
    a[(idx::PHI, idx::P)] = 1.0;
    a[(idx::U, idx::THETA)] = g;
    a[(idx::V, idx::PHI)] = -g;

    let mut b = MatB::zeros();
    let thrust = omega_e * 2.0 * params.c_t / params.m_total;
    let yaw = omega_e * 2.0 * params.c_d / params.izz;
    let pitch = omega_e * std::f64::consts::SQRT_2 * params.d * params.c_t / params.iyy;
    let roll = omega_e * std::f64::consts::SQRT_2 * params.d * params.c_t / params.ixx;
    for j in 0..4 {
        b[(idx::W, j)] = thrust;
    }
    let yaw_signs = [-1.0, 1.0, -1.0, 1.0];
    let pitch_signs = [-1.0, 1.0, 1.0, -1.0];
    let roll_signs = [-1.0, -1.0, 1.0, 1.0];
    for j in 0..4 {
        b[(idx::R, j)] = yaw_signs[j] * yaw;
        b[(idx::Q, j)] = pitch_signs[j] * pitch;
        b[(idx::P, j)] = roll_signs[j] * roll;
    }

    LinearModel { a, b, c: MatA::identity(), d: MatB::zeros(), x_e, u_e, omega_e, params: *params }
}

/// Wrench allocation matrix and its closed-form inverse.
pub fn mixing_matrices(params: &PhysicalParams) -> Result<MixingMatrix> {
    if params.c_t == 0.0 || params.c_d == 0.0 || params.d == 0.0 {
        return Err(Error::SingularMatrix { what: "mixing matrix", step: None });
    }
    let (_, _, omega_e) = equilibrium(params);
    let ct = params.c_t;
    let cd = params.c_d;
    let arm = params.d * ct / std::f64::consts::SQRT_2;
    let gamma = 2.0
        * omega_e
        * Matrix4::new(
            ct, ct, ct, ct, //
            -arm, -arm, arm, arm, //
            -arm, arm, arm, -arm, //
            -cd, cd, -cd, cd,
        );
    let t = 1.0 / (4.0 * ct);
    let m = std::f64::consts::SQRT_2 / (4.0 * params.d * ct);
    let y = 1.0 / (4.0 * cd);
    let gamma_inv = (1.0 / (2.0 * omega_e))
        * Matrix4::new(
            t, -m, -m, -y, //
            t, -m, m, y, //
            t, m, m, -y, //
            t, m, -m, y,
        );
    Ok(MixingMatrix { gamma, gamma_inv })
}

/// Extract the four decoupled subsystems from the hover model. Each takes
/// the corresponding wrench deviation (`dFz`, `dMz`, `dMx`, `dMy`) as its
/// scalar input.
pub fn decoupled_subsystems(model: &LinearModel) -> DecoupledSubsystems {
    let p = &model.params;
    let g = model.a[(idx::U, idx::THETA)];

    let vertical = Subsystem {
        a: SMatrix::<f64, 2, 2>::new(0.0, 0.0, 1.0, 0.0),
        b: SMatrix::<f64, 2, 1>::new(1.0 / p.m_total, 0.0),
        states: [idx::W, idx::Z],
    };
    let directional = Subsystem {
        a: SMatrix::<f64, 2, 2>::new(0.0, 0.0, 1.0, 0.0),
        b: SMatrix::<f64, 2, 1>::new(1.0 / p.izz, 0.0),
        states: [idx::R, idx::PSI],
    };
    let lateral = Subsystem {
        a: SMatrix::<f64, 4, 4>::new(
            0.0, 0.0, 0.0, 0.0, //
            1.0, 0.0, 0.0, 0.0, //
            0.0, -g, 0.0, 0.0, //
            0.0, 0.0, 1.0, 0.0,
        ),
        b: SMatrix::<f64, 4, 1>::new(1.0 / p.ixx, 0.0, 0.0, 0.0),
        states: [idx::P, idx::PHI, idx::V, idx::Y],
    };
    let longitudinal = Subsystem {
        a: SMatrix::<f64, 4, 4>::new(
            0.0, 0.0, 0.0, 0.0, //
            1.0, 0.0, 0.0, 0.0, //
            0.0, g, 0.0, 0.0, //
            0.0, 0.0, 1.0, 0.0,
        ),
        b: SMatrix::<f64, 4, 1>::new(1.0 / p.iyy, 0.0, 0.0, 0.0),
        states: [idx::Q, idx::THETA, idx::U, idx::X],
    };
    DecoupledSubsystems { vertical, directional, lateral, longitudinal }
}

/// ZOH discretization through the augmented-matrix exponential of
/// `[[A, B], [0, 0]]`.
pub fn discretize_zoh(model: &LinearModel, ts: f64) -> DiscreteModel {
    assert!(ts > 0.0, "sample time must be positive");
    let mut aug = DMatrix::<f64>::zeros(16, 16);
    aug.view_mut((0, 0), (12, 12)).copy_from(&model.a);
    aug.view_mut((0, 12), (12, 4)).copy_from(&model.b);
    let exp = expm(&(aug * ts));
    let mut ad = MatA::zeros();
    let mut bd = MatB::zeros();
    ad.copy_from(&exp.view((0, 0), (12, 12)));
    bd.copy_from(&exp.view((0, 12), (12, 4)));
    DiscreteModel { ad, bd, ts }
}

/// Matrix exponential by scaling and squaring over a truncated Taylor
/// series. Exact (series terminates) for nilpotent matrices such as the
/// hover linearization.
pub fn expm(m: &DMatrix<f64>) -> DMatrix<f64> {
    let n = m.nrows();
    assert_eq!(n, m.ncols());
    let norm = m.amax();
    let squarings = if norm > 0.5 { (norm / 0.5).log2().ceil().max(0.0) as u32 } else { 0 };
    let scaled = m / 2f64.powi(squarings as i32);

    let mut result = DMatrix::<f64>::identity(n, n);
    let mut term = DMatrix::<f64>::identity(n, n);
    for k in 1..=24 {
        term = (&term * &scaled) / k as f64;
        result += &term;
        if term.amax() < 1e-300 {
            break;
        }
    }
    for _ in 0..squarings {
        result = &result * &result;
    }
    result
}

/// Degree at which the Taylor series of `exp(A)` terminates, i.e. the
/// smallest `k` with `A^(k+1) = 0`, or `None` if `A` is not nilpotent
/// within `max_degree` powers.
pub fn nilpotency_degree(a: &MatA, max_degree: usize) -> Option<usize> {
    let mut power = *a;
    for k in 1..=max_degree {
        if power.amax() == 0.0 {
            return Some(k - 1);
        }
        power = a * power;
    }
    if power.amax() == 0.0 {
        Some(max_degree)
    } else {
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::state_derivative;
    use approx::assert_abs_diff_eq;

    fn params() -> PhysicalParams {
        PhysicalParams::crazyflie2()
    }

    #[test]
    fn equilibrium_speed_matches_published_value() {
        let (_, _, omega_e) = equilibrium(&params());
        assert!((omega_e - 16073.0).abs() / 16073.0 < 0.01, "omega_e = {omega_e}");
    }

    #[test]
    fn equilibrium_scales_with_mass_and_thrust_coefficient() {
        let p = params();
        let (_, _, base) = equilibrium(&p);
        let mut heavier = p;
        heavier.m_quad *= 4.0;
        heavier.m_uwb *= 4.0;
        heavier.m_vicon *= 4.0;
        heavier.m_total *= 4.0;
        let (_, _, omega_heavy) = equilibrium(&heavier);
        assert_abs_diff_eq!(omega_heavy / base, 2.0, epsilon = 1e-12);

        let mut stronger = p;
        stronger.c_t *= 4.0;
        let (_, _, omega_strong) = equilibrium(&stronger);
        assert_abs_diff_eq!(omega_strong / base, 0.5, epsilon = 1e-12);
    }

    #[test]
    fn a_matrix_entries_and_sparsity() {
        let model = build_continuous(&params());
        assert_abs_diff_eq!(model.a[(idx::U, idx::THETA)], 9.81, epsilon = 1e-12);
        assert_abs_diff_eq!(model.a[(idx::V, idx::PHI)], -9.81, epsilon = 1e-12);
        let expected = [
            (idx::X, idx::U),
            (idx::Y, idx::V),
            (idx::Z, idx::W),
            (idx::PSI, idx::R),
            (idx::THETA, idx::Q),
            (idx::PHI, idx::P),
            (idx::U, idx::THETA),
            (idx::V, idx::PHI),
        ];
        let mut nonzero = 0;
        for i in 0..12 {
            for j in 0..12 {
                if model.a[(i, j)] != 0.0 {
                    nonzero += 1;
                    assert!(
                        expected.contains(&(i, j)),
                        "unexpected nonzero at ({i}, {j}) = {}",
                        model.a[(i, j)]
                    );
                }
            }
        }
        assert_eq!(nonzero, expected.len());
    }

    #[test]
    fn b_matrix_rows() {
        let p = params();
        let model = build_continuous(&p);
        let thrust = model.omega_e * 2.0 * p.c_t / p.m_total;
        for j in 0..4 {
            assert_abs_diff_eq!(model.b[(idx::W, j)], thrust, epsilon = 1e-18);
        }
        // Nonzero only in the w, r, q, p rows.
        for i in 0..12 {
            let expect_nonzero = [idx::W, idx::R, idx::Q, idx::P].contains(&i);
            for j in 0..4 {
                assert_eq!(model.b[(i, j)] != 0.0, expect_nonzero, "row {i} col {j}");
            }
        }
        // Yaw row follows the (-,+,-,+) rotor pattern.
        assert!(model.b[(idx::R, 0)] < 0.0 && model.b[(idx::R, 1)] > 0.0);
        assert!(model.b[(idx::R, 2)] < 0.0 && model.b[(idx::R, 3)] > 0.0);
    }

    #[test]
    fn analytic_model_matches_numeric_jacobian() {
        let p = params();
        let model = build_continuous(&p);
        let (x_e, u_e, _) = equilibrium(&p);
        let h = 1e-6;

        let mut a_num = MatA::zeros();
        for j in 0..12 {
            let mut plus = x_e.to_vector();
            let mut minus = x_e.to_vector();
            plus[j] += h;
            minus[j] -= h;
            let f_plus =
                state_derivative(&State::from_vector(&plus), &u_e, &p).unwrap().to_vector();
            let f_minus =
                state_derivative(&State::from_vector(&minus), &u_e, &p).unwrap().to_vector();
            a_num.set_column(j, &((f_plus - f_minus) / (2.0 * h)));
        }
        // Rotor speeds live at 1.6e4 rpm; scale the step to the variable so
        // cancellation noise stays below the tolerance (the wrench is
        // exactly quadratic in rpm, so the larger step has no truncation
        // error).
        let h_rpm = 1e-6 * model.omega_e;
        let mut b_num = MatB::zeros();
        for j in 0..4 {
            let mut plus = u_e;
            let mut minus = u_e;
            plus.0[j] += h_rpm;
            minus.0[j] -= h_rpm;
            let f_plus = state_derivative(&x_e, &plus, &p).unwrap().to_vector();
            let f_minus = state_derivative(&x_e, &minus, &p).unwrap().to_vector();
            b_num.set_column(j, &((f_plus - f_minus) / (2.0 * h_rpm)));
        }

        for i in 0..12 {
            for j in 0..12 {
                let analytic = model.a[(i, j)];
                let numeric = a_num[(i, j)];
                if analytic == 0.0 {
                    assert!(numeric.abs() < 1e-8, "A[{i}][{j}] numeric {numeric:e}");
                } else {
                    assert!(
                        ((numeric - analytic) / analytic).abs() < 1e-6,
                        "A[{i}][{j}]: {numeric} vs {analytic}"
                    );
                }
            }
            for j in 0..4 {
                let analytic = model.b[(i, j)];
                let numeric = b_num[(i, j)];
                if analytic == 0.0 {
                    assert!(numeric.abs() < 1e-8, "B[{i}][{j}] numeric {numeric:e}");
                } else {
                    assert!(
                        ((numeric - analytic) / analytic).abs() < 1e-6,
                        "B[{i}][{j}]: {numeric} vs {analytic}"
                    );
                }
            }
        }
    }

    #[test]
    fn mixing_matrix_inverse_is_consistent() {
        let p = params();
        let mix = mixing_matrices(&p).unwrap();
        let product = mix.gamma * mix.gamma_inv;
        assert!((product - Matrix4::identity()).amax() < 1e-10);

        let generic = mix.gamma.try_inverse().unwrap();
        assert!((generic - mix.gamma_inv).amax() / mix.gamma_inv.amax() < 1e-10);

        let (_, _, omega_e) = equilibrium(&p);
        let expected = 1.0 / (8.0 * omega_e * p.c_t);
        for i in 0..4 {
            assert_abs_diff_eq!(mix.gamma_inv[(i, 0)], expected, epsilon = expected * 1e-12);
        }
        // A pure yaw-moment request loads the motors as (-, +, -, +).
        let dw = mix.gamma_inv * nalgebra::Vector4::new(0.0, 0.0, 0.0, 1.0);
        assert!(dw[0] < 0.0 && dw[1] > 0.0 && dw[2] < 0.0 && dw[3] > 0.0);
    }

    #[test]
    fn mixing_matrix_rejects_degenerate_geometry() {
        let mut p = params();
        p.c_d = 0.0;
        assert!(matches!(mixing_matrices(&p), Err(Error::SingularMatrix { .. })));
    }

    #[test]
    fn subsystems_match_published_realizations() {
        let p = params();
        let model = build_continuous(&p);
        let subs = decoupled_subsystems(&model);

        assert_abs_diff_eq!(
            subs.vertical.a,
            SMatrix::<f64, 2, 2>::new(0.0, 0.0, 1.0, 0.0),
            epsilon = 0.0
        );
        assert!((subs.vertical.b[0] - 1.0 / p.m_total).abs() < 1e-9);
        assert_abs_diff_eq!(subs.lateral.a[(2, 1)], -p.g, epsilon = 1e-12);
        assert_abs_diff_eq!(subs.longitudinal.a[(2, 1)], p.g, epsilon = 1e-12);
        assert!((subs.directional.b[0] - 1.0 / p.izz).abs() / (1.0 / p.izz) < 1e-9);
        assert!((subs.lateral.b[0] - 1.0 / p.ixx).abs() / (1.0 / p.ixx) < 1e-9);
        assert!((subs.longitudinal.b[0] - 1.0 / p.iyy).abs() / (1.0 / p.iyy) < 1e-9);
    }

    #[test]
    fn subsystems_are_integrator_chains() {
        // All-zero eigenvalues, checked structurally (A^n vanishes exactly;
        // numerical eigensolvers smear defective spectra by ~eps^(1/n)).
        let model = build_continuous(&params());
        let subs = decoupled_subsystems(&model);
        let a2 = subs.vertical.a * subs.vertical.a;
        assert_eq!(a2.amax(), 0.0);
        let d2 = subs.directional.a * subs.directional.a;
        assert_eq!(d2.amax(), 0.0);
        let l4 = subs.lateral.a.pow(4);
        assert_eq!(l4.amax(), 0.0);
        let lo4 = subs.longitudinal.a.pow(4);
        assert_eq!(lo4.amax(), 0.0);
    }

    #[test]
    fn subsystems_embed_back_into_full_model() {
        let p = params();
        let model = build_continuous(&p);
        let subs = decoupled_subsystems(&model);
        let mix = mixing_matrices(&p).unwrap();

        // Check the lateral subsystem rows/columns against A restricted to
        // its states, and B through the roll-moment channel of gamma.
        let st = subs.lateral.states;
        for (si, &gi) in st.iter().enumerate() {
            for (sj, &gj) in st.iter().enumerate() {
                assert_abs_diff_eq!(subs.lateral.a[(si, sj)], model.a[(gi, gj)], epsilon = 1e-12);
            }
        }
        // Full-model B column j restricted to the p row equals
        // (1/ixx) * gamma[roll channel, motor j].
        for j in 0..4 {
            let expected = subs.lateral.b[0] * mix.gamma[(1, j)];
            assert!((model.b[(idx::P, j)] - expected).abs() / expected.abs() < 1e-9);
        }
    }

    #[test]
    fn zoh_of_zero_dynamics_is_identity_plus_bts() {
        let mut model = build_continuous(&params());
        model.a = MatA::zeros();
        let ts = 0.01;
        let disc = discretize_zoh(&model, ts);
        assert!((disc.ad - MatA::identity()).amax() < 1e-15);
        assert!((disc.bd - model.b * ts).amax() < 1e-15);
    }

    #[test]
    fn zoh_integrator_chain_closed_form() {
        let p = params();
        let model = build_continuous(&p);
        let ts = 0.01;
        let disc = discretize_zoh(&model, ts);
        // Velocity coupling picks up Ts, the chained input picks up Ts^2/2.
        assert_abs_diff_eq!(disc.ad[(idx::X, idx::U)], ts, epsilon = 1e-15);
        let b_w = model.b[(idx::W, 0)];
        assert_abs_diff_eq!(disc.bd[(idx::Z, 0)], b_w * ts * ts / 2.0, epsilon = 1e-18);
        assert_abs_diff_eq!(disc.bd[(idx::W, 0)], b_w * ts, epsilon = 1e-18);
    }

    #[test]
    fn zoh_matches_series_oracle() {
        let model = build_continuous(&params());
        let ts = 0.01;
        let disc = discretize_zoh(&model, ts);

        // Independent 30-term Taylor oracle without scaling/squaring.
        let mut aug = DMatrix::<f64>::zeros(16, 16);
        aug.view_mut((0, 0), (12, 12)).copy_from(&model.a);
        aug.view_mut((0, 12), (12, 4)).copy_from(&model.b);
        let aug = aug * ts;
        let mut oracle = DMatrix::<f64>::identity(16, 16);
        let mut term = DMatrix::<f64>::identity(16, 16);
        for k in 1..=30 {
            term = (&term * &aug) / k as f64;
            oracle += &term;
        }
        let mut ad_o = MatA::zeros();
        let mut bd_o = MatB::zeros();
        ad_o.copy_from(&oracle.view((0, 0), (12, 12)));
        bd_o.copy_from(&oracle.view((0, 12), (12, 4)));

        assert!((disc.ad - ad_o).amax() < 1e-9);
        assert!((disc.bd - bd_o).amax() < 1e-9);
    }

    #[test]
    fn hover_a_is_nilpotent_with_low_degree() {
        let model = build_continuous(&params());
        let degree = nilpotency_degree(&model.a, 6).expect("hover A must be nilpotent");
        assert!(degree <= 3, "series terminates at degree {degree}");
    }
}
