//! Discrete LQR tracking controller with re-linearization.
//!
//! The controller works in a 12-dimensional error chart around an operating
//! point: `[delta position (world); attitude log error; delta body velocity;
//! delta angular velocity]`. Jacobians of the forward-Euler step are taken by
//! central finite differences in that chart, and the gain comes from a
//! discrete Riccati fixed-point iteration.

use alloc::vec::Vec;
use core::fmt;

use crate::linalg::{mat_vec, solve_spd, Matrix, Vector};
use crate::physics::{add3, newton_euler, InertialParams, Rotation};

use super::dynamics::{step_dynamics, QuadModel, SimFault, SimState};

pub const STATE_DIM: usize = 12;
pub const INPUT_DIM: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LqrError {
    /// Dynamics evaluation failed at or near the operating point
    /// (non-physical parameters make the model unusable).
    InvalidModel,
    /// Riccati iteration did not reach a fixed point.
    Unstabilizable,
}

impl fmt::Display for LqrError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LqrError::InvalidModel => write!(f, "dynamics not evaluable at operating point"),
            LqrError::Unstabilizable => write!(f, "riccati iteration did not converge"),
        }
    }
}

impl core::error::Error for LqrError {}

/// Error-chart coordinates of `state` around the operating point `op`.
pub fn state_chart(state: &SimState, op: &SimState) -> Vector {
    let dp = [
        state.position[0] - op.position[0],
        state.position[1] - op.position[1],
        state.position[2] - op.position[2],
    ];
    let datt = op
        .orientation
        .transpose()
        .compose(&state.orientation)
        .log();
    let mut xi = Vec::with_capacity(STATE_DIM);
    xi.extend_from_slice(&dp);
    xi.extend_from_slice(&datt);
    for i in 0..3 {
        xi.push(state.velocity[i] - op.velocity[i]);
    }
    for i in 0..3 {
        xi.push(state.angular_velocity[i] - op.angular_velocity[i]);
    }
    Vector::from_vec(xi)
}

/// Inverse of `state_chart`: the state at chart coordinates `xi` around `op`.
pub fn chart_retract(op: &SimState, xi: &Vector) -> SimState {
    assert_eq!(xi.len(), STATE_DIM);
    SimState {
        position: add3(op.position, [xi[0], xi[1], xi[2]]),
        orientation: op.orientation.compose(&Rotation::exp([xi[3], xi[4], xi[5]])),
        velocity: add3(op.velocity, [xi[6], xi[7], xi[8]]),
        angular_velocity: add3(op.angular_velocity, [xi[9], xi[10], xi[11]]),
    }
}

fn step_in_chart(
    model: &QuadModel,
    params: &InertialParams,
    op: &SimState,
    xi: &Vector,
    u: &[f64; 4],
) -> Result<Vector, SimFault> {
    let state = chart_retract(op, xi);
    let (next, _) = step_dynamics(model, &state, u, params)?;
    Ok(state_chart(&next, op))
}

/// Discrete-time Jacobians (A, B) of one forward-Euler step in the error
/// chart at the operating point, via central finite differences with step
/// 1e-6 scaled per coordinate magnitude.
pub fn linearize(
    model: &QuadModel,
    params: &InertialParams,
    op: &SimState,
    u_op: &[f64; 4],
) -> Result<(Matrix, Matrix), LqrError> {
    let zero = Vector::zeros(STATE_DIM);
    // Probe once so invalid parameters fail cleanly up front.
    step_in_chart(model, params, op, &zero, u_op).map_err(|_| LqrError::InvalidModel)?;

    let mut a = Matrix::zeros(STATE_DIM, STATE_DIM);
    for j in 0..STATE_DIM {
        let h = 1e-6;
        let mut xp = Vector::zeros(STATE_DIM);
        xp[j] = h;
        let mut xm = Vector::zeros(STATE_DIM);
        xm[j] = -h;
        let fp = step_in_chart(model, params, op, &xp, u_op).map_err(|_| LqrError::InvalidModel)?;
        let fm = step_in_chart(model, params, op, &xm, u_op).map_err(|_| LqrError::InvalidModel)?;
        for i in 0..STATE_DIM {
            a[(i, j)] = (fp[i] - fm[i]) / (2.0 * h);
        }
    }

    let mut b = Matrix::zeros(STATE_DIM, INPUT_DIM);
    for j in 0..INPUT_DIM {
        let h = 1e-6 * (1.0 + u_op[j].abs());
        let mut up = *u_op;
        up[j] += h;
        let mut um = *u_op;
        um[j] -= h;
        let fp = step_in_chart(model, params, op, &zero, &up).map_err(|_| LqrError::InvalidModel)?;
        let fm = step_in_chart(model, params, op, &zero, &um).map_err(|_| LqrError::InvalidModel)?;
        for i in 0..STATE_DIM {
            b[(i, j)] = (fp[i] - fm[i]) / (2.0 * h);
        }
    }
    Ok((a, b))
}

/// Discrete-time LQR gain by Riccati fixed-point iteration: runs until the
/// relative change drops below 1e-10 or 10^4 iterations, erring on
/// non-convergence. Feedback law is `u = u_op - K xi`.
pub fn lqr_gain(a: &Matrix, b: &Matrix, q: &Matrix, r: &Matrix) -> Result<Matrix, LqrError> {
    riccati_iterate(a, b, q, r, q.clone()).map(|(k, _)| k)
}

/// Riccati fixed-point iteration from the initial guess `p0`. Warm starts
/// from a previous solution cut re-synthesis cost sharply when the model
/// changes little between calls.
fn riccati_iterate(
    a: &Matrix,
    b: &Matrix,
    q: &Matrix,
    r: &Matrix,
    p0: Matrix,
) -> Result<(Matrix, Matrix), LqrError> {
    let n = a.rows();
    assert_eq!(a.cols(), n);
    assert_eq!(b.rows(), n);
    let nu = b.cols();
    assert_eq!(q.rows(), n);
    assert_eq!(r.rows(), nu);

    let at = a.transpose();
    let bt = b.transpose();
    let mut p = p0;
    let mut converged = false;
    for _ in 0..10_000 {
        let pa = p.mat_mul(a);
        let pb = p.mat_mul(b);
        let btpb = bt.mat_mul(&pb);
        let gram = r.add(&btpb).symmetrized();
        let btpa = bt.mat_mul(&pa);
        let k = solve_spd(&gram, &btpa).map_err(|_| LqrError::Unstabilizable)?;
        let next = q
            .add(&at.mat_mul(&pa))
            .sub(&at.mat_mul(&pb).mat_mul(&k))
            .symmetrized();
        let diff = libm::sqrt(next.sub(&p).frobenius_norm_sq());
        let scale = libm::sqrt(next.frobenius_norm_sq()).max(1.0);
        p = next;
        if diff <= 1e-10 * scale {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(LqrError::Unstabilizable);
    }
    let pb = p.mat_mul(b);
    let gram = r.add(&bt.mat_mul(&pb)).symmetrized();
    let btpa = bt.mat_mul(&p.mat_mul(a));
    let k = solve_spd(&gram, &btpa).map_err(|_| LqrError::Unstabilizable)?;
    Ok((k, p))
}

/// Diagonal state weights used for every estimator (tuned once on the
/// nominal no-noise episode and frozen).
pub fn default_q_cost() -> Matrix {
    let diag = [
        400.0, 400.0, 600.0, // position
        4.0, 4.0, 1.0, // attitude
        12.0, 12.0, 16.0, // linear velocity
        0.2, 0.2, 0.1, // angular velocity
    ];
    Matrix::from_fn(STATE_DIM, STATE_DIM, |i, j| if i == j { diag[i] } else { 0.0 })
}

/// Diagonal input weights matching `default_q_cost`.
pub fn default_r_cost() -> Matrix {
    Matrix::from_fn(INPUT_DIM, INPUT_DIM, |i, j| if i == j { 20.0 } else { 0.0 })
}

/// Tracking controller: gain and feedforward recomputed from the current
/// parameter estimate, applied against a moving reference.
#[derive(Debug, Clone)]
pub struct Controller {
    pub gain: Matrix,
    pub u_op: [f64; 4],
    /// Converged Riccati solution, kept as the warm start for the next
    /// re-synthesis.
    riccati: Matrix,
}

impl Controller {
    /// Feedforward thrusts realizing the operating-point motion: the
    /// Newton-Euler wrench of the reference accelerations under the
    /// estimated parameters, mapped through the mixer.
    fn feedforward(
        model: &QuadModel,
        params: &InertialParams,
        op: &SimState,
        op_accel: &[f64; 6],
    ) -> Result<[f64; 4], LqrError> {
        let wrench = newton_euler(&op.body_state(*op_accel), params);
        let u_op = model.thrusts_for_wrench(&wrench.as_array());
        if u_op.iter().all(|u| u.is_finite()) {
            Ok(u_op)
        } else {
            Err(LqrError::InvalidModel)
        }
    }

    /// Synthesize the controller about `op` (usually the current reference,
    /// with `op_accel` its body accelerations) using the estimated
    /// parameters for both the feedforward thrusts and the linearization.
    pub fn synthesize(
        model: &QuadModel,
        params: &InertialParams,
        op: &SimState,
        op_accel: &[f64; 6],
        q_cost: &Matrix,
        r_cost: &Matrix,
    ) -> Result<Self, LqrError> {
        let u_op = Self::feedforward(model, params, op, op_accel)?;
        let (a, b) = linearize(model, params, op, &u_op)?;
        let (gain, riccati) = riccati_iterate(&a, &b, q_cost, r_cost, q_cost.clone())?;
        Ok(Controller { gain, u_op, riccati })
    }

    /// Re-linearize about a new operating point and parameter estimate,
    /// warm-starting the Riccati iteration from the previous solution. On
    /// failure the controller is left unchanged.
    pub fn resynthesize(
        &mut self,
        model: &QuadModel,
        params: &InertialParams,
        op: &SimState,
        op_accel: &[f64; 6],
        q_cost: &Matrix,
        r_cost: &Matrix,
    ) -> Result<(), LqrError> {
        let u_op = Self::feedforward(model, params, op, op_accel)?;
        let (a, b) = linearize(model, params, op, &u_op)?;
        let (gain, riccati) = riccati_iterate(&a, &b, q_cost, r_cost, self.riccati.clone())?;
        self.gain = gain;
        self.u_op = u_op;
        self.riccati = riccati;
        Ok(())
    }

    /// Feedback thrusts for the measured state against the reference.
    pub fn control(&self, measured: &SimState, reference: &SimState) -> [f64; 4] {
        let xi = state_chart(measured, reference);
        let kxi = mat_vec(&self.gain, &xi);
        core::array::from_fn(|i| self.u_op[i] - kxi[i])
    }
}

/// Spectral radius estimate via Gelfand's formula on repeated squaring:
/// ‖M^(2^k)‖_F^(1/2^k) converges to the spectral radius from above. The
/// iterate is rescaled each squaring with the factors folded back in log
/// space to dodge overflow/underflow.
pub fn spectral_radius_bound(m: &Matrix, squarings: u32) -> f64 {
    let mut pow = m.clone();
    let mut log_rho = 0.0;
    for i in 1..=squarings {
        pow = pow.mat_mul(&pow);
        let norm = libm::sqrt(pow.frobenius_norm_sq());
        if norm == 0.0 {
            return 0.0;
        }
        pow = pow.scale(1.0 / norm);
        log_rho += libm::log(norm) * libm::pow(2.0, -(i as f64));
    }
    log_rho += libm::log(libm::sqrt(pow.frobenius_norm_sq())) * libm::pow(2.0, -(squarings as f64));
    libm::exp(log_rho)
}
