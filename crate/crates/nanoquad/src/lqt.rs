//! Discrete-time finite-horizon linear-quadratic tracker.
//!
//! The backward Riccati recursion is implemented in information form,
//! `P[k] = Ad^T (P[k+1]^-1 + E)^-1 Ad + V` with `E = Bd R^-1 Bd^T`, which is
//! the Woodbury rewrite of the standard difference equation. The
//! feedforward recursion uses the transposed transition
//! `Ad^T (I - (P^-1 + E)^-1 E) = (Ad - Bd L)^T`, i.e. the classical costate
//! propagation; both choices are pinned by a batch quadratic-program oracle
//! in the test suite. An as-printed variant of the recursion is kept behind
//! [`RiccatiVariant::AsPrinted`] for comparison.
//!
//! Steady-state gains are used at runtime (terminal-enforcement transients
//! removed); the only time-varying quantity left is the feedforward vector
//! `g[k]`, which carries the future of the reference and produces the
//! tracker's anticipation behavior.

use nalgebra::{DMatrix, DVector, SMatrix, SVector, Vector3, Vector4};
use serde::{Deserialize, Serialize};

use crate::dynamics::rpm_to_pwm;
use crate::error::{Error, Result};
use crate::linear::DiscreteModel;
use crate::state::{idx, MotorPwm, StateVector};

pub type GainMatrix = SMatrix<f64, 4, 12>;

/// Diagonal weight set of the tracking cost.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LqtWeights {
    /// Running state weights (diagonal of Q).
    pub q: [f64; 12],
    /// Terminal state weights (diagonal of F).
    pub f: [f64; 12],
    /// Control weights (diagonal of R).
    pub r: [f64; 4],
}

impl LqtWeights {
    /// The flight-tested weight set: positions 2000/2000/4000, angles 4000,
    /// linear velocities 20, rates 10, `R = 3e-5 I`, `F = Q`.
    pub fn paper_defaults() -> Self {
        let q = [
            2000.0, 2000.0, 4000.0, 4000.0, 4000.0, 4000.0, 20.0, 20.0, 10.0, 10.0, 10.0, 10.0,
        ];
        LqtWeights { q, f: q, r: [3e-5; 4] }
    }

    pub fn validate(&self) -> Result<()> {
        if self.q.iter().any(|w| *w < 0.0) || self.f.iter().any(|w| *w < 0.0) {
            return Err(Error::config("Q and F diagonals must be non-negative"));
        }
        if self.r.iter().any(|w| *w <= 0.0) {
            return Err(Error::config("R diagonal must be strictly positive"));
        }
        Ok(())
    }
}

impl Default for LqtWeights {
    fn default() -> Self {
        Self::paper_defaults()
    }
}

/// Placement of the inverse in the Riccati difference equation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RiccatiVariant {
    /// `P[k] = Ad^T (P[k+1]^-1 + E)^-1 Ad + V`; consistent with the
    /// feedforward recursion and the batch optimum.
    #[default]
    Information,
    /// `P[k] = Ad^T (P[k+1] + E)^-1 Ad + V` exactly as printed in the
    /// source material; kept for comparison only.
    AsPrinted,
}

/// Generic discrete-time LQT design over dynamically sized matrices.
///
/// Works for any stabilizable `(Ad, Bd)` with diagonal-free weights; the
/// quadcopter layer wraps it with statically sized types.
#[derive(Debug, Clone)]
pub struct LqtDesign {
    pub ad: DMatrix<f64>,
    pub bd: DMatrix<f64>,
    pub cd: DMatrix<f64>,
    pub q: DMatrix<f64>,
    pub f: DMatrix<f64>,
    pub r: DMatrix<f64>,
    /// `Bd R^-1 Bd^T`.
    pub e: DMatrix<f64>,
    /// `Cd^T Q Cd`.
    pub v: DMatrix<f64>,
    /// `Cd^T Q`.
    pub w: DMatrix<f64>,
    pub variant: RiccatiVariant,
}

impl LqtDesign {
    pub fn new(
        ad: DMatrix<f64>,
        bd: DMatrix<f64>,
        cd: DMatrix<f64>,
        q: DMatrix<f64>,
        f: DMatrix<f64>,
        r: DMatrix<f64>,
    ) -> Result<Self> {
        let n = ad.nrows();
        let m = bd.ncols();
        let p = cd.nrows();
        if ad.ncols() != n || bd.nrows() != n || cd.ncols() != n {
            return Err(Error::config("inconsistent system dimensions"));
        }
        if q.nrows() != p || q.ncols() != p || f.nrows() != p || f.ncols() != p {
            return Err(Error::config("weight dimensions must match the output"));
        }
        if r.nrows() != m || r.ncols() != m {
            return Err(Error::config("R must be m x m"));
        }
        let r_inv = r
            .clone()
            .try_inverse()
            .ok_or(Error::SingularMatrix { what: "R", step: None })?;
        let e = &bd * r_inv * bd.transpose();
        let v = cd.transpose() * &q * &cd;
        let w = cd.transpose() * &q;
        Ok(LqtDesign { ad, bd, cd, q, f, r, e, v, w, variant: RiccatiVariant::default() })
    }

    pub fn with_variant(mut self, variant: RiccatiVariant) -> Self {
        self.variant = variant;
        self
    }

    pub fn terminal_p(&self) -> DMatrix<f64> {
        self.cd.transpose() * &self.f * &self.cd
    }

    pub fn terminal_g(&self, z_final: &DVector<f64>) -> DVector<f64> {
        self.cd.transpose() * &self.f * z_final
    }

    /// One backward step of the Riccati difference equation.
    pub fn riccati_step(&self, p_next: &DMatrix<f64>, step: usize) -> Result<DMatrix<f64>> {
        let core = match self.variant {
            RiccatiVariant::Information => {
                let p_inv = invert_spd(p_next)
                    .ok_or(Error::SingularMatrix { what: "P[k+1]", step: Some(step) })?;
                invert_spd(&(p_inv + &self.e))
                    .ok_or(Error::SingularMatrix { what: "P[k+1]^-1 + E", step: Some(step) })?
            }
            RiccatiVariant::AsPrinted => (p_next + &self.e)
                .try_inverse()
                .ok_or(Error::SingularMatrix { what: "P[k+1] + E", step: Some(step) })?,
        };
        let p = self.ad.transpose() * core * &self.ad + &self.v;
        Ok(symmetrize(&p))
    }

    /// Full backward sweep; returns `P[0..=horizon]` with the terminal
    /// condition at index `horizon`.
    pub fn riccati_backward(&self, horizon: usize) -> Result<Vec<DMatrix<f64>>> {
        assert!(horizon >= 1);
        let mut seq = vec![DMatrix::zeros(0, 0); horizon + 1];
        seq[horizon] = self.terminal_p();
        for k in (0..horizon).rev() {
            seq[k] = self.riccati_step(&seq[k + 1], k)?;
        }
        Ok(seq)
    }

    /// Feedback and feedforward gains from the next-step Riccati matrix:
    /// `L = (R + Bd^T P Bd)^-1 Bd^T P Ad`, `Lg = (R + Bd^T P Bd)^-1 Bd^T`.
    pub fn gains(&self, p_next: &DMatrix<f64>) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
        let bt = self.bd.transpose();
        let inner = (&self.r + &bt * p_next * &self.bd)
            .try_inverse()
            .ok_or(Error::SingularMatrix { what: "R + Bd^T P Bd", step: None })?;
        let l = &inner * &bt * p_next * &self.ad;
        let lg = inner * bt;
        Ok((l, lg))
    }

    /// One backward step of the feedforward recursion,
    /// `g[k] = Ad^T (I - (P^-1 + E)^-1 E) g[k+1] + W z[k]`.
    pub fn feedforward_step(
        &self,
        p_next: &DMatrix<f64>,
        g_next: &DVector<f64>,
        z_k: &DVector<f64>,
    ) -> Result<DVector<f64>> {
        Ok(self.g_transition(p_next)? * g_next + &self.w * z_k)
    }

    /// The g-recursion transition matrix `Ad^T (I - (P^-1+E)^-1 E)`, equal
    /// to the transposed closed loop `(Ad - Bd L)^T`.
    pub fn g_transition(&self, p_next: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let n = self.ad.nrows();
        let p_inv = invert_spd(p_next)
            .ok_or(Error::SingularMatrix { what: "P in g recursion", step: None })?;
        let m = invert_spd(&(p_inv + &self.e))
            .ok_or(Error::SingularMatrix { what: "P^-1 + E in g recursion", step: None })?;
        Ok(self.ad.transpose() * (DMatrix::identity(n, n) - m * &self.e))
    }

    /// Iterate the recursion to its fixed point.
    pub fn steady_state(&self, tol: f64, max_iter: usize) -> Result<(DMatrix<f64>, usize, f64)> {
        let mut p = self.terminal_p();
        let mut residual = f64::INFINITY;
        for iteration in 1..=max_iter {
            let next = self.riccati_step(&p, iteration)?;
            residual = (&next - &p).amax();
            p = next;
            if residual < tol {
                return Ok((p, iteration, residual));
            }
        }
        Err(Error::NoConvergence {
            what: "Riccati recursion",
            iterations: max_iter,
            residual,
        })
    }

    /// Residual of the standard discrete algebraic Riccati equation,
    /// `max|P - (Ad^T P Ad - Ad^T P Bd (R + Bd^T P Bd)^-1 Bd^T P Ad + V)|`.
    pub fn dare_residual(&self, p: &DMatrix<f64>) -> f64 {
        let bt = self.bd.transpose();
        let at = self.ad.transpose();
        let inner = (&self.r + &bt * p * &self.bd).try_inverse().expect("R + B^T P B");
        let rhs = &at * p * &self.ad
            - &at * p * &self.bd * inner * &bt * p * &self.ad
            + &self.v;
        (p - rhs).amax()
    }

    /// Backward feedforward sweep with a constant `P`; `g[k]` for
    /// `k = 0..=N` where `N = z.len() - 1`.
    pub fn feedforward_sequence(
        &self,
        p_ss: &DMatrix<f64>,
        z: &[DVector<f64>],
    ) -> Result<Vec<DVector<f64>>> {
        if z.len() < 2 {
            return Err(Error::config("feedforward needs at least 2 reference samples"));
        }
        let n = z.len() - 1;
        let transition = self.g_transition(p_ss)?;
        let mut g = vec![DVector::zeros(self.ad.nrows()); n + 1];
        g[n] = self.terminal_g(&z[n]);
        for k in (0..n).rev() {
            g[k] = &transition * &g[k + 1] + &self.w * &z[k];
        }
        Ok(g)
    }

    /// Time-varying finite-horizon solve rolled out from `x0`: the exact
    /// minimizer of the tracking cost. Returns the state and control
    /// sequences.
    pub fn solve_finite_horizon(
        &self,
        x0: &DVector<f64>,
        z: &[DVector<f64>],
    ) -> Result<(Vec<DVector<f64>>, Vec<DVector<f64>>)> {
        let n = z.len() - 1;
        let p_seq = self.riccati_backward(n)?;
        // Time-varying g: each backward step uses its own P[k+1].
        let mut g = vec![DVector::zeros(self.ad.nrows()); n + 1];
        g[n] = self.terminal_g(&z[n]);
        for k in (0..n).rev() {
            g[k] = self.feedforward_step(&p_seq[k + 1], &g[k + 1], &z[k])?;
        }
        let mut xs = Vec::with_capacity(n + 1);
        let mut us = Vec::with_capacity(n);
        xs.push(x0.clone());
        for k in 0..n {
            let (l, lg) = self.gains(&p_seq[k + 1])?;
            let u = -&l * &xs[k] + &lg * &g[k + 1];
            xs.push(&self.ad * &xs[k] + &self.bd * &u);
            us.push(u);
        }
        Ok((xs, us))
    }

    /// Tracking performance index: terminal F term plus running Q and R
    /// sums over `k = 0..N-1`.
    pub fn tracking_cost(
        &self,
        z: &[DVector<f64>],
        xs: &[DVector<f64>],
        us: &[DVector<f64>],
    ) -> Result<f64> {
        if xs.len() != z.len() {
            return Err(Error::LengthMismatch { what: "cost states", left: xs.len(), right: z.len() });
        }
        if us.len() + 1 != xs.len() {
            return Err(Error::LengthMismatch {
                what: "cost controls",
                left: us.len(),
                right: xs.len().saturating_sub(1),
            });
        }
        let n = us.len();
        let terminal = &self.cd * &xs[n] - &z[n];
        let mut cost = 0.5 * (terminal.transpose() * &self.f * &terminal)[(0, 0)];
        for k in 0..n {
            let err = &self.cd * &xs[k] - &z[k];
            cost += 0.5 * (err.transpose() * &self.q * &err)[(0, 0)];
            cost += 0.5 * (us[k].transpose() * &self.r * &us[k])[(0, 0)];
        }
        Ok(cost)
    }

    pub fn closed_loop_spectral_radius(&self, l: &DMatrix<f64>) -> f64 {
        let closed = &self.ad - &self.bd * l;
        closed.complex_eigenvalues().iter().map(|e| e.norm()).fold(0.0, f64::max)
    }
}

fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Cholesky first (enforces positive definiteness), LU as fallback.
fn invert_spd(m: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    m.clone().cholesky().map(|c| c.inverse()).or_else(|| m.clone().try_inverse())
}

/// The 12-state quadcopter tracking problem.
#[derive(Debug, Clone)]
pub struct LqtProblem {
    pub model: DiscreteModel,
    pub weights: LqtWeights,
    pub design: LqtDesign,
    /// Convergence threshold on `max|P[k] - P[k+1]|`.
    pub riccati_tol: f64,
    pub riccati_max_iter: usize,
}

impl LqtProblem {
    pub fn new(model: DiscreteModel, weights: LqtWeights) -> Result<Self> {
        weights.validate()?;
        let design = LqtDesign::new(
            DMatrix::from_iterator(12, 12, model.ad.iter().copied()),
            DMatrix::from_iterator(12, 4, model.bd.iter().copied()),
            DMatrix::identity(12, 12),
            DMatrix::from_diagonal(&DVector::from_row_slice(&weights.q)),
            DMatrix::from_diagonal(&DVector::from_row_slice(&weights.f)),
            DMatrix::from_diagonal(&DVector::from_row_slice(&weights.r)),
        )?;
        Ok(LqtProblem { model, weights, design, riccati_tol: 1e-9, riccati_max_iter: 100_000 })
    }

    pub fn with_variant(mut self, variant: RiccatiVariant) -> Self {
        self.design.variant = variant;
        self
    }

    pub fn with_tolerance(mut self, tol: f64, max_iter: usize) -> Self {
        self.riccati_tol = tol;
        self.riccati_max_iter = max_iter;
        self
    }

    /// Converged steady-state gains (no feedforward sequence yet).
    pub fn steady_state(&self) -> Result<LqtSolution> {
        let (p_ss, iterations, residual) =
            self.design.steady_state(self.riccati_tol, self.riccati_max_iter)?;
        let (l, lg) = self.design.gains(&p_ss)?;
        let spectral_radius = self.design.closed_loop_spectral_radius(&l);
        Ok(LqtSolution {
            p_ss: to_static::<12, 12>(&p_ss),
            l: to_static::<4, 12>(&l),
            lg: to_static::<4, 12>(&lg),
            g: Vec::new(),
            ts: self.model.ts,
            iterations,
            step_residual: residual,
            dare_residual: self.design.dare_residual(&p_ss),
            closed_loop_spectral_radius: spectral_radius,
        })
    }

    /// Steady-state gains plus the feedforward sequence for `z`.
    pub fn solve(&self, z: &[StateVector]) -> Result<LqtSolution> {
        let mut solution = self.steady_state()?;
        solution.g = self.feedforward_sequence(&solution.p_ss, z)?;
        Ok(solution)
    }

    pub fn feedforward_sequence(
        &self,
        p_ss: &SMatrix<f64, 12, 12>,
        z: &[StateVector],
    ) -> Result<Vec<StateVector>> {
        let p_dyn = DMatrix::from_iterator(12, 12, p_ss.iter().copied());
        let z_dyn: Vec<DVector<f64>> =
            z.iter().map(|s| DVector::from_row_slice(s.as_slice())).collect();
        let g = self.design.feedforward_sequence(&p_dyn, &z_dyn)?;
        Ok(g.iter().map(|v| SVector::<f64, 12>::from_row_slice(v.as_slice())).collect())
    }
}

fn to_static<const R: usize, const C: usize>(m: &DMatrix<f64>) -> SMatrix<f64, R, C> {
    SMatrix::<f64, R, C>::from_iterator(m.iter().copied())
}

/// Steady-state tracker gains plus the trajectory feedforward.
#[derive(Debug, Clone, PartialEq)]
pub struct LqtSolution {
    pub p_ss: SMatrix<f64, 12, 12>,
    /// State feedback gain.
    pub l: GainMatrix,
    /// Feedforward gain applied to `g[k+1]`.
    pub lg: GainMatrix,
    /// Feedforward sequence over the trajectory, `g[0..=N]`.
    pub g: Vec<StateVector>,
    pub ts: f64,
    pub iterations: usize,
    /// Final `max|P[k] - P[k+1]|` of the fixed-point iteration.
    pub step_residual: f64,
    /// Residual of the standard DARE at the fixed point.
    pub dare_residual: f64,
    pub closed_loop_spectral_radius: f64,
}

impl LqtSolution {
    /// `g[k+1]`, reusing the final vector beyond the horizon.
    pub fn g_next(&self, k: usize) -> &StateVector {
        let last = self.g.len() - 1;
        &self.g[(k + 1).min(last)]
    }

    /// Feedback columns for the off-board states `[x y z u v w]`.
    pub fn l_position(&self) -> SMatrix<f64, 4, 6> {
        select_columns(&self.l, &idx::POSITION_BLOCK)
    }

    /// Feedback columns for the on-board states `[psi theta phi r q p]`.
    pub fn l_angular(&self) -> SMatrix<f64, 4, 6> {
        select_columns(&self.l, &idx::ANGULAR_BLOCK)
    }
}

fn select_columns(m: &GainMatrix, cols: &[usize; 6]) -> SMatrix<f64, 4, 6> {
    let mut out = SMatrix::<f64, 4, 6>::zeros();
    for (j, &col) in cols.iter().enumerate() {
        out.set_column(j, &m.column(col));
    }
    out
}

/// Which sign convention the integral gain matrices follow.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum IntegralSigns {
    /// Columns built from the wrench-allocation channel signs: thrust
    /// `++++`, roll `--++`, pitch `-++-`, yaw `-+-+`, with x driving pitch
    /// positively, y driving roll negatively and z driving thrust
    /// positively.
    #[default]
    Derived,
    /// The matrices exactly as printed in the source material (the
    /// position matrix is the negation of the derived one, which
    /// destabilizes altitude under this error convention). Comparison only.
    PaperVerbatim,
}

/// Integral augmentation of the LQT control law.
///
/// Angular errors accumulate at the on-board rate, position errors at the
/// off-board rate; both accumulators carry anti-windup clamps.
#[derive(Debug, Clone, PartialEq)]
pub struct IntegralAction {
    /// 4x3 gain on the accumulated `[-psi -theta -phi]` error [rpm/(rad s)].
    pub ki_ang: SMatrix<f64, 4, 3>,
    /// 4x3 gain on the accumulated position error [rpm/(m s)].
    pub ki_pos: SMatrix<f64, 4, 3>,
    /// Angular accumulator time step [s].
    pub dk_ang: f64,
    /// Position accumulator time step [s].
    pub dk_pos: f64,
    /// Per-component clamp on the angular accumulator [rad s].
    pub clamp_ang: f64,
    /// Per-component clamp on the position accumulator [m s].
    pub clamp_pos: f64,
    pub acc_ang: Vector3<f64>,
    pub acc_pos: Vector3<f64>,
}

pub const KI_ANG_MAGNITUDE: f64 = 8660.0;
pub const KI_POS_MAGNITUDE: f64 = 5000.0;

/// Rotor sign patterns of the four wrench channels (from the inverse
/// mixing matrix columns).
const THRUST_PATTERN: [f64; 4] = [1.0, 1.0, 1.0, 1.0];
const ROLL_PATTERN: [f64; 4] = [-1.0, -1.0, 1.0, 1.0];
const PITCH_PATTERN: [f64; 4] = [-1.0, 1.0, 1.0, -1.0];
const YAW_PATTERN: [f64; 4] = [-1.0, 1.0, -1.0, 1.0];

impl IntegralAction {
    pub fn new(k_ang: f64, k_pos: f64, signs: IntegralSigns) -> Self {
        let mut ki_ang = SMatrix::<f64, 4, 3>::zeros();
        let mut ki_pos = SMatrix::<f64, 4, 3>::zeros();
        for i in 0..4 {
            // e_ang = [-psi -theta -phi]: each error drives its own channel.
            ki_ang[(i, 0)] = k_ang * YAW_PATTERN[i];
            ki_ang[(i, 1)] = k_ang * PITCH_PATTERN[i];
            ki_ang[(i, 2)] = k_ang * ROLL_PATTERN[i];
            // e_pos = z_ref - position: x -> +pitch, y -> -roll, z -> +thrust.
            ki_pos[(i, 0)] = k_pos * PITCH_PATTERN[i];
            ki_pos[(i, 1)] = -k_pos * ROLL_PATTERN[i];
            ki_pos[(i, 2)] = k_pos * THRUST_PATTERN[i];
        }
        if signs == IntegralSigns::PaperVerbatim {
            ki_pos = -ki_pos;
        }
        IntegralAction {
            ki_ang,
            ki_pos,
            dk_ang: 0.002,
            dk_pos: 0.01,
            clamp_ang: 0.5,
            clamp_pos: 2.0,
            acc_ang: Vector3::zeros(),
            acc_pos: Vector3::zeros(),
        }
    }

    /// Accumulate the angular regulation error `[-psi -theta -phi]` [rad].
    pub fn update_angular(&mut self, e_ang: &Vector3<f64>) {
        self.acc_ang += e_ang * self.dk_ang;
        self.acc_ang.apply(|a| *a = a.clamp(-self.clamp_ang, self.clamp_ang));
    }

    /// Accumulate the position tracking error `z_ref - position` [m].
    pub fn update_position(&mut self, e_pos: &Vector3<f64>) {
        self.acc_pos += e_pos * self.dk_pos;
        self.acc_pos.apply(|a| *a = a.clamp(-self.clamp_pos, self.clamp_pos));
    }

    pub fn angular_contribution(&self) -> Vector4<f64> {
        self.ki_ang * self.acc_ang
    }

    pub fn position_contribution(&self) -> Vector4<f64> {
        self.ki_pos * self.acc_pos
    }

    pub fn reset(&mut self) {
        self.acc_ang = Vector3::zeros();
        self.acc_pos = Vector3::zeros();
    }
}

impl Default for IntegralAction {
    fn default() -> Self {
        IntegralAction::new(KI_ANG_MAGNITUDE, KI_POS_MAGNITUDE, IntegralSigns::default())
    }
}

/// Evaluate the full augmented control law in one call: feedback,
/// feedforward and both integral contributions, converted to PWM around the
/// base rotor speed.
///
/// The harness splits the same arithmetic across the on-board and off-board
/// rates; this single-rate form is the reference for tests.
pub fn lqt_control(
    solution: &LqtSolution,
    x_hat: &StateVector,
    k: usize,
    integral: &IntegralAction,
    base_rpm: f64,
) -> (MotorPwm, [bool; 4]) {
    let du = -solution.l * x_hat
        + solution.lg * solution.g_next(k)
        + integral.angular_contribution()
        + integral.position_contribution();
    rpm_command_to_pwm(base_rpm, &du)
}

/// Convert per-motor rpm commands to clamped PWM words.
pub fn rpm_command_to_pwm(base_rpm: f64, du: &Vector4<f64>) -> (MotorPwm, [bool; 4]) {
    let mut pwm = [0u16; 4];
    let mut saturated = [false; 4];
    for i in 0..4 {
        let rpm = base_rpm + du[i];
        let raw = (rpm - crate::dynamics::RPM_AT_ZERO_PWM) / crate::dynamics::RPM_PER_PWM;
        saturated[i] = !(0.0..=crate::state::PWM_MAX).contains(&raw);
        pwm[i] = rpm_to_pwm(rpm);
    }
    (MotorPwm(pwm), saturated)
}
