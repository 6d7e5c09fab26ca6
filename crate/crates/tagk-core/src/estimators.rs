//! Recursive-gain estimators behind one step interface.
//!
//! Block RLS with forgetting, a block Kalman filter over a random-walk
//! parameter model, and the Kaczmarz family: plain randomized Kaczmarz (RK),
//! greedy randomized Kaczmarz (GRK), tail-averaged randomized Kaczmarz
//! (TARK), and the combined tail-averaged greedy variant (TAG-K). All of
//! them consume a [`MeasurementBlock`] and produce an updated parameter
//! estimate.

use alloc::vec::Vec;
use core::fmt;

use crate::linalg::{dot, mat_vec, solve_spd, LinalgError, Matrix, Vector};
use crate::rng::Stream;

pub const DEFAULT_ROW_NORM_FLOOR: f64 = 1e-12;

/// Jitter added once to a non-PD innovation matrix before giving up.
const INNOVATION_JITTER: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub enum EstimatorError {
    /// Row squared norm below the configured floor.
    DegenerateRow { row: usize },
    /// Every row of the block is degenerate.
    AllRowsDegenerate,
    /// Tail average requested before any post-burn-in iterate exists.
    NoTailIterates,
    /// Innovation matrix stayed non-PD even after a jitter retry.
    InnovationNotPd(LinalgError),
    /// Configuration violates its own invariants.
    InvalidConfig(&'static str),
}

impl fmt::Display for EstimatorError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EstimatorError::DegenerateRow { row } => write!(f, "degenerate row {row}"),
            EstimatorError::AllRowsDegenerate => write!(f, "all rows degenerate"),
            EstimatorError::NoTailIterates => write!(f, "no post-burn-in iterates"),
            EstimatorError::InnovationNotPd(e) => {
                write!(f, "innovation matrix not positive definite: {e}")
            }
            EstimatorError::InvalidConfig(msg) => write!(f, "invalid solver config: {msg}"),
        }
    }
}

impl core::error::Error for EstimatorError {}

// ---------------------------------------------------------------------------
// Measurement block
// ---------------------------------------------------------------------------

/// One estimation window: regressor matrix `A` (m x n) and target `b` (m).
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementBlock {
    a: Matrix,
    b: Vector,
}

impl MeasurementBlock {
    pub fn new(a: Matrix, b: Vector) -> Self {
        assert_eq!(a.rows(), b.len(), "block: row count mismatch");
        MeasurementBlock { a, b }
    }

    pub fn a(&self) -> &Matrix {
        &self.a
    }

    pub fn b(&self) -> &Vector {
        &self.b
    }

    pub fn rows(&self) -> usize {
        self.a.rows()
    }

    pub fn cols(&self) -> usize {
        self.a.cols()
    }

    /// Squared 2-norm of each row of `A`.
    pub fn row_norms_sq(&self) -> Vec<f64> {
        (0..self.rows())
            .map(|i| self.a.row(i).iter().map(|x| x * x).sum())
            .collect()
    }

    /// Indices whose squared row norm is at or below `floor`.
    pub fn degenerate_rows(&self, floor: f64) -> Vec<usize> {
        self.row_norms_sq()
            .iter()
            .enumerate()
            .filter(|(_, s)| **s <= floor)
            .map(|(i, _)| i)
            .collect()
    }

    /// Residual `r = b - A theta`.
    pub fn residual(&self, theta: &Vector) -> Vector {
        self.b.sub(&mat_vec(&self.a, theta))
    }
}

// ---------------------------------------------------------------------------
// Kaczmarz primitives
// ---------------------------------------------------------------------------

/// Orthogonal projection of `theta` onto the hyperplane `<a_row, x> = b_i`:
/// `theta + (r_i / |a_i|^2) a_i` with `r_i = b_i - <a_i, theta>`.
pub fn rk_project(
    theta: &Vector,
    a_row: &Vector,
    b_i: f64,
    row_norm_floor: f64,
) -> Result<Vector, EstimatorError> {
    let s = a_row.norm_sq();
    if s <= row_norm_floor {
        return Err(EstimatorError::DegenerateRow { row: usize::MAX });
    }
    let r = b_i - dot(a_row, theta);
    let mut out = theta.clone();
    out.axpy(r / s, a_row);
    Ok(out)
}

/// Outcome of the greedy threshold: either the scaled threshold value or the
/// signal that the system is already consistent at the current iterate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Threshold {
    Value(f64),
    AlreadyConsistent,
}

/// Adaptive greedy threshold
/// `eps = (max_i(r_i^2 / s_i) / R^2 + 1 / |A|_F^2) / 2`
/// with `s_i = |a_i|^2` and `R = |r|`. Rows at or below `row_norm_floor`
/// are excluded from the max.
pub fn greedy_threshold(block: &MeasurementBlock, r: &Vector, row_norm_floor: f64) -> Threshold {
    assert_eq!(r.len(), block.rows(), "residual length mismatch");
    let r_sq = r.norm_sq();
    if r_sq == 0.0 {
        return Threshold::AlreadyConsistent;
    }
    let norms = block.row_norms_sq();
    let mut max_scaled = 0.0f64;
    for (i, s) in norms.iter().enumerate() {
        if *s > row_norm_floor {
            max_scaled = max_scaled.max(r[i] * r[i] / s);
        }
    }
    let fro = block.a().frobenius_norm_sq();
    Threshold::Value(0.5 * (max_scaled / r_sq + 1.0 / fro))
}

/// Candidate set `tau = { i : r_i^2 >= eps * R^2 * s_i }` over non-degenerate
/// rows. Non-empty whenever `r != 0`; this is asserted.
pub fn select_candidates(
    block: &MeasurementBlock,
    r: &Vector,
    eps: f64,
    row_norm_floor: f64,
) -> Vec<usize> {
    let r_sq = r.norm_sq();
    let norms = block.row_norms_sq();
    let mut tau: Vec<usize> = Vec::new();
    for (i, s) in norms.iter().enumerate() {
        if *s > row_norm_floor && r[i] * r[i] >= eps * r_sq * s {
            tau.push(i);
        }
    }
    if tau.is_empty() {
        // The argmax of r_i^2/s_i always qualifies in exact arithmetic;
        // rounding at the equality boundary can drop it, so reinstate it.
        let arg = (0..block.rows())
            .filter(|i| norms[*i] > row_norm_floor)
            .max_by(|a, b| {
                let fa = r[*a] * r[*a] / norms[*a];
                let fb = r[*b] * r[*b] / norms[*b];
                fa.partial_cmp(&fb).unwrap()
            });
        if let Some(i) = arg {
            tau.push(i);
        }
    }
    assert!(!tau.is_empty(), "candidate set empty for nonzero residual");
    tau
}

/// Sample `i` from `tau` with probability `r_i^2 / sum_{j in tau} r_j^2`.
pub fn sample_row(tau: &[usize], r: &Vector, rng: &mut Stream) -> usize {
    assert!(!tau.is_empty(), "sample_row: empty candidate set");
    if tau.len() == 1 {
        return tau[0];
    }
    let weights: Vec<f64> = tau.iter().map(|i| r[*i] * r[*i]).collect();
    tau[rng.weighted_index(&weights)]
}

// ---------------------------------------------------------------------------
// Kaczmarz solver
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum KaczmarzVariant {
    /// Row-norm-proportional sampling, last iterate.
    Rk,
    /// Greedy candidate sampling, last iterate.
    Grk,
    /// Row-norm-proportional sampling, tail average.
    Tark,
    /// Greedy candidate sampling, tail average.
    Tagk,
}

impl KaczmarzVariant {
    pub fn greedy(&self) -> bool {
        matches!(self, KaczmarzVariant::Grk | KaczmarzVariant::Tagk)
    }

    pub fn tail_averaged(&self) -> bool {
        matches!(self, KaczmarzVariant::Tark | KaczmarzVariant::Tagk)
    }
}

/// Per-window solver configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    pub iterations: usize,
    pub burn_in: usize,
    pub variant: KaczmarzVariant,
    pub row_norm_floor: f64,
}

impl SolverConfig {
    pub fn new(variant: KaczmarzVariant, iterations: usize) -> Self {
        SolverConfig {
            iterations,
            burn_in: iterations.div_ceil(2),
            variant,
            row_norm_floor: DEFAULT_ROW_NORM_FLOOR,
        }
    }

    pub fn with_burn_in(mut self, burn_in: usize) -> Self {
        self.burn_in = burn_in;
        self
    }

    pub fn validate(&self) -> Result<(), EstimatorError> {
        if self.iterations < 1 {
            return Err(EstimatorError::InvalidConfig("iterations must be >= 1"));
        }
        if self.burn_in >= self.iterations {
            return Err(EstimatorError::InvalidConfig(
                "burn-in must be smaller than the iteration count",
            ));
        }
        if !(self.row_norm_floor >= 0.0) {
            return Err(EstimatorError::InvalidConfig(
                "row norm floor must be non-negative",
            ));
        }
        Ok(())
    }
}

/// Running tail sum over post-burn-in iterates.
#[derive(Debug, Clone, PartialEq)]
pub struct TailAccumulator {
    sum: Vector,
    count: usize,
}

impl TailAccumulator {
    pub fn new(n: usize) -> Self {
        TailAccumulator {
            sum: Vector::zeros(n),
            count: 0,
        }
    }

    pub fn push(&mut self, iterate: &Vector) {
        self.sum.axpy(1.0, iterate);
        self.count += 1;
    }

    pub fn count(&self) -> usize {
        self.count
    }

    /// Arithmetic mean of the accumulated iterates.
    pub fn average(&self) -> Result<Vector, EstimatorError> {
        if self.count == 0 {
            return Err(EstimatorError::NoTailIterates);
        }
        Ok(self.sum.scale(1.0 / self.count as f64))
    }
}

/// Exact arithmetic mean of the tail iterates (inclusive count).
pub fn tail_average(tail: &TailAccumulator) -> Result<Vector, EstimatorError> {
    tail.average()
}

/// Run one Kaczmarz solve over a measurement block.
///
/// Row selection per variant: RK/TARK sample rows with probability
/// proportional to the squared row norm; GRK/TAG-K restrict sampling to the
/// greedy candidate set. The residual is fully recomputed every iteration.
/// RK/GRK return the final iterate; TARK/TAG-K the tail average over
/// iterations `t >= burn_in`.
pub fn kaczmarz_solve(
    block: &MeasurementBlock,
    theta0: &Vector,
    cfg: &SolverConfig,
    rng: &mut Stream,
) -> Result<Vector, EstimatorError> {
    cfg.validate()?;
    assert_eq!(theta0.len(), block.cols(), "theta0 dimension mismatch");

    let norms = block.row_norms_sq();
    let valid: Vec<usize> = (0..block.rows())
        .filter(|i| norms[*i] > cfg.row_norm_floor)
        .collect();
    if valid.is_empty() {
        return Err(EstimatorError::AllRowsDegenerate);
    }
    let valid_weights: Vec<f64> = valid.iter().map(|i| norms[*i]).collect();

    let mut theta = theta0.clone();
    let mut tail = TailAccumulator::new(theta.len());

    for t in 0..cfg.iterations {
        let r = block.residual(&theta);
        let r_active_sq: f64 = valid.iter().map(|i| r[*i] * r[*i]).sum();
        if r_active_sq == 0.0 {
            // Already consistent on every selectable row.
            return if cfg.variant.tail_averaged() && tail.count() > 0 {
                tail.average()
            } else {
                Ok(theta)
            };
        }

        let row = if cfg.variant.greedy() {
            match greedy_threshold(block, &r, cfg.row_norm_floor) {
                Threshold::AlreadyConsistent => unreachable!("nonzero active residual"),
                Threshold::Value(eps) => {
                    let tau = select_candidates(block, &r, eps, cfg.row_norm_floor);
                    sample_row(&tau, &r, rng)
                }
            }
        } else {
            valid[rng.weighted_index(&valid_weights)]
        };

        theta.axpy(r[row] / norms[row], &block.a().row_vector(row));

        if t >= cfg.burn_in {
            tail.push(&theta);
        }
    }

    if cfg.variant.tail_averaged() {
        tail.average()
    } else {
        Ok(theta)
    }
}

// ---------------------------------------------------------------------------
// RLS
// ---------------------------------------------------------------------------

/// Block recursive least squares with exponential forgetting.
#[derive(Debug, Clone, PartialEq)]
pub struct RlsState {
    pub theta: Vector,
    pub p: Matrix,
    pub lambda: f64,
}

impl RlsState {
    pub fn new(theta: Vector, p0_scale: f64, lambda: f64) -> Self {
        assert!(lambda > 0.0 && lambda <= 1.0, "lambda must be in (0, 1]");
        let n = theta.len();
        RlsState {
            theta,
            p: Matrix::identity(n).scale(p0_scale),
            lambda,
        }
    }
}

fn solve_innovation(s: &Matrix, rhs: &Matrix) -> Result<Matrix, EstimatorError> {
    match solve_spd(s, rhs) {
        Ok(x) => Ok(x),
        Err(LinalgError::NotPositiveDefinite) => {
            let jittered = Matrix::from_fn(s.rows(), s.cols(), |i, j| {
                s[(i, j)] + if i == j { INNOVATION_JITTER } else { 0.0 }
            });
            solve_spd(&jittered, rhs).map_err(EstimatorError::InnovationNotPd)
        }
        Err(e) => Err(EstimatorError::InnovationNotPd(e)),
    }
}

/// One RLS block update:
/// `K = P A^T (lambda I + A P A^T)^{-1}`, `theta += K (b - A theta)`,
/// `P <- (I - K A) P / lambda`, symmetrized.
pub fn rls_update(state: &mut RlsState, block: &MeasurementBlock) -> Result<(), EstimatorError> {
    let n = state.theta.len();
    assert_eq!(block.cols(), n, "block width mismatch");
    let a = block.a();
    let m = block.rows();

    let pa_t = state.p.mat_mul(&a.transpose()); // n x m
    let mut s = a.mat_mul(&pa_t); // m x m
    for i in 0..m {
        s[(i, i)] += state.lambda;
    }
    // K^T = S^{-1} A P  (P symmetric).
    let k_t = solve_innovation(&s, &a.mat_mul(&state.p))?;
    let k = k_t.transpose(); // n x m

    let innov = block.residual(&state.theta);
    state.theta = state.theta.add(&mat_vec(&k, &innov));

    let ka = k.mat_mul(a); // n x n
    let eye = Matrix::identity(n);
    state.p = eye
        .sub(&ka)
        .mat_mul(&state.p)
        .scale(1.0 / state.lambda)
        .symmetrized();
    Ok(())
}

// ---------------------------------------------------------------------------
// KF
// ---------------------------------------------------------------------------

/// Block Kalman filter over a random-walk parameter model.
#[derive(Debug, Clone, PartialEq)]
pub struct KfState {
    pub theta: Vector,
    pub p: Matrix,
    /// Process-noise covariance added at each predict step (n x n).
    pub q_proc: Matrix,
    /// Measurement-noise covariance scale; the innovation uses
    /// `r_meas_scale * I_m` so the block row count may vary.
    pub r_meas_scale: f64,
}

impl KfState {
    pub fn new(theta: Vector, p0_scale: f64, sigma_q: f64, r_meas_scale: f64) -> Self {
        let n = theta.len();
        KfState {
            theta,
            p: Matrix::identity(n).scale(p0_scale),
            q_proc: Matrix::identity(n).scale(sigma_q * sigma_q),
            r_meas_scale,
        }
    }
}

/// One KF block update: predict `P += Q`, then
/// `K = P A^T (A P A^T + R)^{-1}`, `theta += K (b - A theta)`,
/// `P <- (I - K A) P`, symmetrized.
pub fn kf_update(state: &mut KfState, block: &MeasurementBlock) -> Result<(), EstimatorError> {
    let n = state.theta.len();
    assert_eq!(block.cols(), n, "block width mismatch");
    let a = block.a();
    let m = block.rows();

    state.p = state.p.add(&state.q_proc);

    let pa_t = state.p.mat_mul(&a.transpose());
    let mut s = a.mat_mul(&pa_t);
    for i in 0..m {
        s[(i, i)] += state.r_meas_scale;
    }
    let k_t = solve_innovation(&s, &a.mat_mul(&state.p))?;
    let k = k_t.transpose();

    let innov = block.residual(&state.theta);
    state.theta = state.theta.add(&mat_vec(&k, &innov));

    let ka = k.mat_mul(a);
    state.p = Matrix::identity(n).sub(&ka).mat_mul(&state.p).symmetrized();
    Ok(())
}

// ---------------------------------------------------------------------------
// Unified step interface
// ---------------------------------------------------------------------------

/// Signal attached to a successful step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepStatus {
    Updated,
    /// The block had no rows; the estimate is returned unchanged.
    EmptyBlock,
}

/// Any of the supported estimators behind one update interface.
///
/// Kaczmarz variants are stateless across windows except for their RNG
/// stream and initialize each solve from the warm start passed by the
/// caller; RLS/KF carry `theta` and `P` internally and ignore the warm start.
#[derive(Debug, Clone)]
pub enum Estimator {
    Rls(RlsState),
    Kf(KfState),
    Kaczmarz {
        cfg: SolverConfig,
        rng: Stream,
        /// Optional column equilibration: characteristic magnitude of each
        /// parameter. When set, the solve runs on the reparameterized system
        /// `(A·diag(d)) (diag(d)⁻¹ θ) = b`, which balances the column norms
        /// the projections see. Physical parameter vectors can mix scales
        /// across several orders of magnitude (masses vs inertias), and
        /// row projections on the raw system then push corrections into the
        /// wrong components; equilibration fixes the effective conditioning
        /// without changing the least-squares problem.
        scaling: Option<Vector>,
    },
}

impl Estimator {
    pub fn kaczmarz(variant: KaczmarzVariant, iterations: usize, base_seed: u64, stream: u64) -> Self {
        Estimator::Kaczmarz {
            cfg: SolverConfig::new(variant, iterations),
            rng: Stream::derive(base_seed, stream),
            scaling: None,
        }
    }

    /// Kaczmarz estimator with column equilibration. Every scale must be
    /// positive and finite.
    pub fn kaczmarz_scaled(
        variant: KaczmarzVariant,
        iterations: usize,
        scaling: Vector,
        base_seed: u64,
        stream: u64,
    ) -> Self {
        assert!(
            scaling.as_slice().iter().all(|d| d.is_finite() && *d > 0.0),
            "parameter scales must be positive and finite"
        );
        Estimator::Kaczmarz {
            cfg: SolverConfig::new(variant, iterations),
            rng: Stream::derive(base_seed, stream),
            scaling: Some(scaling),
        }
    }

    /// Consume one measurement block and return the updated estimate.
    pub fn step(
        &mut self,
        block: &MeasurementBlock,
        warm_start: &Vector,
    ) -> Result<(Vector, StepStatus), EstimatorError> {
        if block.rows() == 0 {
            let theta = match self {
                Estimator::Rls(s) => s.theta.clone(),
                Estimator::Kf(s) => s.theta.clone(),
                Estimator::Kaczmarz { .. } => warm_start.clone(),
            };
            return Ok((theta, StepStatus::EmptyBlock));
        }
        let theta = match self {
            Estimator::Rls(s) => {
                rls_update(s, block)?;
                s.theta.clone()
            }
            Estimator::Kf(s) => {
                kf_update(s, block)?;
                s.theta.clone()
            }
            Estimator::Kaczmarz { cfg, rng, scaling } => {
                // Default iteration budget: one pass worth of rows.
                let mut c = *cfg;
                if c.iterations == 0 {
                    c = SolverConfig::new(c.variant, block.rows());
                }
                match scaling {
                    None => kaczmarz_solve(block, warm_start, &c, rng)?,
                    Some(d) => {
                        assert_eq!(d.len(), block.cols(), "scaling dimension mismatch");
                        let a = block.a();
                        let scaled = MeasurementBlock::new(
                            Matrix::from_fn(a.rows(), a.cols(), |i, j| a[(i, j)] * d[j]),
                            block.b().clone(),
                        );
                        let warm = Vector::from_vec(
                            warm_start
                                .as_slice()
                                .iter()
                                .zip(d.as_slice())
                                .map(|(t, s)| t / s)
                                .collect(),
                        );
                        let out = kaczmarz_solve(&scaled, &warm, &c, rng)?;
                        Vector::from_vec(
                            out.as_slice()
                                .iter()
                                .zip(d.as_slice())
                                .map(|(t, s)| t * s)
                                .collect(),
                        )
                    }
                }
            }
        };
        Ok((theta, StepStatus::Updated))
    }

    /// Overwrite the internal estimate. RLS/KF resume from the injected
    /// value with their covariance untouched; Kaczmarz variants carry no
    /// estimate between windows, so this is a no-op for them (they resume
    /// from the caller's warm start).
    pub fn set_estimate(&mut self, theta: &Vector) {
        match self {
            Estimator::Rls(s) => s.theta = theta.clone(),
            Estimator::Kf(s) => s.theta = theta.clone(),
            Estimator::Kaczmarz { .. } => {}
        }
    }
}
