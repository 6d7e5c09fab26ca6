//! Closed-loop quadrotor payload-transfer experiment.
//!
//! A 12-state rigid body tracks a reference trajectory under an LQR
//! controller running at the control rate, while an online estimator updates
//! the inertial-parameter estimate at a slower rate from a short history of
//! noisy state/wrench frames. A payload is attached and later dropped at
//! random times, and the episode outcome is classified from the tracking
//! error.

pub mod dynamics;
pub mod lqr;
pub mod trajectory;

use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::estimators::{Estimator, EstimatorError, MeasurementBlock, StepStatus};
use crate::linalg::{sym_eig3, Matrix, Vector};
use crate::physics::{
    compose_payload, norm3, regressor_block, safety_check, sub3, BodyState, InertialParams,
    SafetyLimits, PARAMS_PER_BODY,
};
use crate::rng::Stream;

pub use dynamics::{body_accel, step_dynamics, QuadModel, SimFault, SimState, GRAVITY_W};
pub use lqr::{
    chart_retract, default_q_cost, default_r_cost, linearize, lqr_gain, spectral_radius_bound,
    state_chart, Controller, LqrError, INPUT_DIM, STATE_DIM,
};
pub use trajectory::{ShapeParams, Trajectory, UnknownTrajectory};

/// Abort when the tracking error exceeds this radius, m.
pub const ABORT_RADIUS: f64 = 1.5;
/// Success requires RMS position error below this over the terminal window, m.
pub const TERMINAL_RMS_LIMIT: f64 = 0.05;
/// Length of the terminal window used by the success criterion, s.
pub const TERMINAL_WINDOW: f64 = 2.0;

/// Largest velocity noise standard deviation, m/s.
pub const SIGMA_V_MAX: f64 = 0.025;
/// Largest acceleration noise standard deviation, m/s^2.
pub const SIGMA_A_MAX: f64 = 0.0025;

/// Measurement noise intensity: {0, 1/3, 2/3, 1} x the maxima.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoiseLevel {
    None,
    Low,
    Medium,
    High,
}

impl NoiseLevel {
    pub const ALL: [NoiseLevel; 4] = [
        NoiseLevel::None,
        NoiseLevel::Low,
        NoiseLevel::Medium,
        NoiseLevel::High,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            NoiseLevel::None => "none",
            NoiseLevel::Low => "low",
            NoiseLevel::Medium => "medium",
            NoiseLevel::High => "high",
        }
    }

    fn fraction(&self) -> f64 {
        match self {
            NoiseLevel::None => 0.0,
            NoiseLevel::Low => 1.0 / 3.0,
            NoiseLevel::Medium => 2.0 / 3.0,
            NoiseLevel::High => 1.0,
        }
    }

    pub fn model(&self) -> NoiseModel {
        NoiseModel {
            sigma_v: self.fraction() * SIGMA_V_MAX,
            sigma_a: self.fraction() * SIGMA_A_MAX,
        }
    }
}

impl FromStr for NoiseLevel {
    type Err = UnknownNoiseLevel;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        NoiseLevel::ALL
            .iter()
            .copied()
            .find(|l| l.name() == s)
            .ok_or(UnknownNoiseLevel)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct UnknownNoiseLevel;

impl fmt::Display for UnknownNoiseLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "unknown noise level name")
    }
}

impl core::error::Error for UnknownNoiseLevel {}

/// Gaussian measurement-noise standard deviations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseModel {
    /// Linear velocity noise, m/s.
    pub sigma_v: f64,
    /// Linear acceleration noise, m/s^2.
    pub sigma_a: f64,
}

/// Noisy copy of the linear velocity entries of a state. Position,
/// orientation, and angular rate pass through unchanged: the noise scales
/// are linear-unit standard deviations and do not apply to rad/s entries.
pub fn noisy_velocities(state: &SimState, noise: &NoiseModel, rng: &mut Stream) -> SimState {
    let mut s = *state;
    for i in 0..3 {
        s.velocity[i] += rng.gauss_scaled(noise.sigma_v);
    }
    s
}

/// Noisy copy of a body acceleration twist (angular entries first). Only the
/// linear entries are perturbed, matching the linear-unit noise scale.
pub fn noisy_accel(accel: &[f64; 6], noise: &NoiseModel, rng: &mut Stream) -> [f64; 6] {
    core::array::from_fn(|i| {
        accel[i]
            + if i >= 3 {
                rng.gauss_scaled(noise.sigma_a)
            } else {
                0.0
            }
    })
}

/// Adds independent zero-mean Gaussian noise to the velocity and
/// acceleration entries. One call draws the exact sequence the episode loop
/// consumes across a control step, so the same noisy signals feed both the
/// controller and the estimator.
pub fn inject_noise(
    state: &SimState,
    accel: &[f64; 6],
    noise: &NoiseModel,
    rng: &mut Stream,
) -> (SimState, [f64; 6]) {
    let s = noisy_velocities(state, noise, rng);
    let a = noisy_accel(accel, noise, rng);
    (s, a)
}

/// Episode configuration. Event times and payload properties are drawn
/// uniformly from the stated ranges using the episode seed.
#[derive(Debug, Clone)]
pub struct EpisodeConfig {
    pub trajectory: Trajectory,
    /// Episode length, s.
    pub duration: f64,
    /// Control loop rate, Hz.
    pub control_rate: f64,
    /// Estimator runs every this many control steps.
    pub estimator_divisor: usize,
    /// Frames stacked into one measurement window.
    pub history_frames: usize,
    /// Control steps between the frames selected into a measurement window.
    /// The newest frame is always the most recent control step; earlier
    /// frames are spaced this many steps apart. Spacing decorrelates the
    /// window rows, which noise-perturbed row projections need to stay well
    /// conditioned.
    pub frame_stride: usize,
    /// Payload mass as a fraction of nominal mass, [lo, hi].
    pub payload_mass_frac: [f64; 2],
    /// Payload offset as a fraction of arm length, [lo, hi].
    pub payload_offset_frac: [f64; 2],
    /// Payload attach time window, s.
    pub add_window: [f64; 2],
    /// Payload drop time window, s.
    pub drop_window: [f64; 2],
    pub noise: NoiseLevel,
    /// Start position is uniform in a ball of this radius around the
    /// reference start, m.
    pub start_radius: f64,
    /// Trajectory amplitude scale is drawn uniformly from this range,
    /// (0, 1] so the base shape's speed caps still hold.
    pub amplitude_range: [f64; 2],
    /// Trajectory frequency (time) scale range, (0, 1].
    pub frequency_range: [f64; 2],
    /// Reject estimates that fail the physical-consistency check.
    pub safety_filter: bool,
    pub seed: u64,
}

impl EpisodeConfig {
    pub fn new(trajectory: Trajectory, noise: NoiseLevel, seed: u64) -> Self {
        EpisodeConfig {
            trajectory,
            duration: 20.0,
            control_rate: 50.0,
            estimator_divisor: 20,
            history_frames: 5,
            frame_stride: 1,
            payload_mass_frac: [0.30, 0.50],
            payload_offset_frac: [0.20, 0.30],
            add_window: [4.0, 6.0],
            drop_window: [12.0, 14.0],
            noise,
            start_radius: 0.2,
            amplitude_range: [0.6, 1.0],
            frequency_range: [0.7, 1.0],
            safety_filter: true,
            seed,
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let ordered = self.add_window[0] <= self.add_window[1]
            && self.drop_window[0] <= self.drop_window[1]
            && self.add_window[1] < self.drop_window[0]
            && self.drop_window[1] < self.duration;
        let fractions = self.payload_mass_frac[0] <= self.payload_mass_frac[1]
            && self.payload_offset_frac[0] <= self.payload_offset_frac[1]
            && self.payload_mass_frac[0] >= 0.0
            && self.payload_offset_frac[0] >= 0.0;
        let in_unit = |r: [f64; 2]| r[0] > 0.0 && r[0] <= r[1] && r[1] <= 1.0;
        let shapes = in_unit(self.amplitude_range) && in_unit(self.frequency_range);
        let rates = shapes
            && self.control_rate > 0.0
            && self.duration > 0.0
            && self.estimator_divisor > 0
            && self.history_frames > 0
            && self.frame_stride > 0
            && self.start_radius >= 0.0;
        if ordered && fractions && rates {
            Ok(())
        } else {
            Err(ConfigError)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConfigError;

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "invalid episode configuration")
    }
}

impl core::error::Error for ConfigError {}

/// Episode outcome.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Success,
    Aborted,
    Incomplete,
}

impl Outcome {
    pub fn name(&self) -> &'static str {
        match self {
            Outcome::Success => "success",
            Outcome::Aborted => "aborted",
            Outcome::Incomplete => "incomplete",
        }
    }
}

/// Payload attach/drop markers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Event {
    PayloadAdded,
    PayloadDropped,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EventRecord {
    pub event: Event,
    pub time: f64,
}

/// Parameter snapshot taken at an estimator step.
#[derive(Debug, Clone, PartialEq)]
pub struct ThetaSample {
    pub theta_true: Vector,
    /// Estimate in effect after the step (rejected updates leave the
    /// previous accepted estimate in place).
    pub theta_hat: Vector,
    /// Whether the proposed update was accepted.
    pub accepted: bool,
}

/// One control-rate sample of the episode.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub time: f64,
    pub reference: SimState,
    pub state: SimState,
    pub noisy_state: SimState,
    /// Clamped motor thrusts applied over this step, N.
    pub thrusts: [f64; 4],
    /// Present only at estimator steps.
    pub theta: Option<ThetaSample>,
    pub event: Option<Event>,
}

/// Full episode record.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub rows: Vec<TraceRow>,
    pub events: Vec<EventRecord>,
    /// Control timestep, s.
    pub dt: f64,
    /// Configured duration, s.
    pub duration: f64,
    /// A dynamics or controller-synthesis fault truncated the episode.
    pub fault: bool,
    pub outcome: Outcome,
}

impl Trace {
    /// Whether the trace covers the full configured duration.
    pub fn completed(&self) -> bool {
        !self.fault && self.rows.len() == expected_rows(self.duration, self.dt)
    }
}

fn expected_rows(duration: f64, dt: f64) -> usize {
    libm::round(duration / dt) as usize
}

/// Stacks the regressors of consecutive frames into one least-squares block
/// whose right-hand side is the commanded wrench.
pub fn build_measurement_window(frames: &[(BodyState, [f64; 6])]) -> MeasurementBlock {
    let m = frames.len() * 6;
    let mut a = Matrix::zeros(m, PARAMS_PER_BODY);
    let mut b = Vector::zeros(m);
    for (f, (body, wrench)) in frames.iter().enumerate() {
        let block = regressor_block(body);
        for i in 0..6 {
            for j in 0..PARAMS_PER_BODY {
                a[(6 * f + i, j)] = block[(i, j)];
            }
            b[6 * f + i] = wrench[i];
        }
    }
    MeasurementBlock::new(a, b)
}

/// Context handed to the estimator hook at each estimator step.
#[derive(Debug)]
pub struct StepContext<'a> {
    pub time: f64,
    /// Control step index at which the estimator runs.
    pub step_index: usize,
    pub theta_true: &'a Vector,
    /// Payload events that occurred strictly before this step.
    pub events_seen: usize,
}

/// Estimator hook for the episode loop. The core estimators implement it
/// directly; wrappers can add timing, substitution, or ground-truth access.
pub trait EstimatorDriver {
    fn step(
        &mut self,
        block: &MeasurementBlock,
        warm_start: &Vector,
        ctx: &StepContext<'_>,
    ) -> Result<(Vector, StepStatus), EstimatorError>;
}

impl EstimatorDriver for Estimator {
    fn step(
        &mut self,
        block: &MeasurementBlock,
        warm_start: &Vector,
        _ctx: &StepContext<'_>,
    ) -> Result<(Vector, StepStatus), EstimatorError> {
        Estimator::step(self, block, warm_start)
    }
}

/// Ground-truth estimator: returns the true parameters at every step.
#[derive(Debug, Clone, Default)]
pub struct OracleDriver;

impl EstimatorDriver for OracleDriver {
    fn step(
        &mut self,
        _block: &MeasurementBlock,
        _warm_start: &Vector,
        ctx: &StepContext<'_>,
    ) -> Result<(Vector, StepStatus), EstimatorError> {
        Ok((ctx.theta_true.clone(), StepStatus::Updated))
    }
}

/// Inertia eigenvalue bound for estimate screening: 10x the largest
/// eigenvalue of the nominal inertia.
pub fn default_safety_limits(model: &QuadModel) -> SafetyLimits {
    let eig = sym_eig3(&model.nominal_params.inertia_matrix())
        .expect("nominal inertia must be symmetric");
    SafetyLimits {
        arm_length: model.arm_length,
        alpha: 10.0 * eig[2].abs().max(eig[0].abs()),
    }
}

/// Runs one closed-loop episode. Fully deterministic given the config seed:
/// episode randomization and measurement noise use dedicated streams, and the
/// driver owns whatever randomness it needs.
pub fn run_episode(model: &QuadModel, cfg: &EpisodeConfig, driver: &mut dyn EstimatorDriver) -> Trace {
    cfg.validate().expect("episode config must be valid");
    let mut model = model.clone();
    model.dt = 1.0 / cfg.control_rate;
    let dt = model.dt;
    let n_steps = expected_rows(cfg.duration, dt);
    let limits = default_safety_limits(&model);
    let q_cost = default_q_cost();
    let r_cost = default_r_cost();

    let mut setup = Stream::derive(cfg.seed, 0);
    let mut noise_rng = Stream::derive(cfg.seed, 1);
    let noise = cfg.noise.model();

    // Episode randomization: trajectory shape, start point, payload, event
    // times.
    let shape = ShapeParams {
        amplitude: setup.uniform_range(cfg.amplitude_range[0], cfg.amplitude_range[1]),
        frequency: setup.uniform_range(cfg.frequency_range[0], cfg.frequency_range[1]),
    };
    let start = {
        let dir = [setup.gauss(), setup.gauss(), setup.gauss()];
        let n = norm3(dir);
        let r = cfg.start_radius * libm::cbrt(setup.uniform());
        let ref0 = cfg.trajectory.reference(0.0, &shape);
        if n > 0.0 {
            SimState::at_rest([
                ref0.position[0] + r * dir[0] / n,
                ref0.position[1] + r * dir[1] / n,
                ref0.position[2] + r * dir[2] / n,
            ])
        } else {
            SimState::at_rest(ref0.position)
        }
    };
    let payload_mass = model.nominal_params.mass()
        * setup.uniform_range(cfg.payload_mass_frac[0], cfg.payload_mass_frac[1]);
    let offset_len =
        model.arm_length * setup.uniform_range(cfg.payload_offset_frac[0], cfg.payload_offset_frac[1]);
    let azimuth = setup.uniform_range(0.0, 2.0 * core::f64::consts::PI);
    let payload_offset = [
        offset_len * libm::cos(azimuth),
        offset_len * libm::sin(azimuth),
        0.0,
    ];
    let add_time = setup.uniform_range(cfg.add_window[0], cfg.add_window[1]);
    let drop_time = setup.uniform_range(cfg.drop_window[0], cfg.drop_window[1]);

    let nominal = model.nominal_params.clone();
    let loaded = compose_payload(&nominal, payload_mass, payload_offset)
        .expect("payload mass is non-negative by construction");

    let mut true_params = nominal.clone();
    let mut theta_hat = nominal.theta().clone();
    let mut state = start;
    let mut rows: Vec<TraceRow> = Vec::with_capacity(n_steps);
    let mut events: Vec<EventRecord> = Vec::new();
    let mut frames: Vec<(BodyState, [f64; 6])> = Vec::new();
    let mut fault = false;
    let mut added = false;
    let mut dropped = false;

    let mut controller = match Controller::synthesize(
        &model,
        &InertialParams::from_vector(theta_hat.clone()),
        &cfg.trajectory.reference(0.0, &shape),
        &cfg.trajectory.reference_accel(0.0, &shape),
        &q_cost,
        &r_cost,
    ) {
        Ok(c) => c,
        Err(_) => {
            return Trace {
                rows,
                events,
                dt,
                duration: cfg.duration,
                fault: true,
                outcome: Outcome::Aborted,
            }
        }
    };

    for k in 0..n_steps {
        let t = k as f64 * dt;

        // Payload events on first crossing of their drawn times.
        let mut event = None;
        if !added && t >= add_time {
            true_params = loaded.clone();
            added = true;
            event = Some(Event::PayloadAdded);
            events.push(EventRecord {
                event: Event::PayloadAdded,
                time: t,
            });
        } else if added && !dropped && t >= drop_time {
            true_params = nominal.clone();
            dropped = true;
            event = Some(Event::PayloadDropped);
            events.push(EventRecord {
                event: Event::PayloadDropped,
                time: t,
            });
        }

        let reference = cfg.trajectory.reference(t, &shape);
        let noisy_state = noisy_velocities(&state, &noise, &mut noise_rng);

        // Estimator step, followed by controller re-synthesis about the
        // current reference from the latest accepted estimate.
        let mut theta_sample = None;
        let frames_needed = (cfg.history_frames - 1) * cfg.frame_stride + 1;
        if k > 0 && k % cfg.estimator_divisor == 0 && frames.len() >= frames_needed {
            let window: Vec<(BodyState, [f64; 6])> = (0..cfg.history_frames)
                .rev()
                .map(|j| frames[frames.len() - 1 - j * cfg.frame_stride])
                .collect();
            let block = build_measurement_window(&window);
            let ctx = StepContext {
                time: t,
                step_index: k,
                theta_true: true_params.theta(),
                events_seen: events.len(),
            };
            let prev_theta = theta_hat.clone();
            let mut accepted = false;
            if let Ok((candidate, StepStatus::Updated)) = driver.step(&block, &theta_hat, &ctx) {
                let ok = if cfg.safety_filter {
                    safety_check(&InertialParams::from_vector(candidate.clone()), &limits)
                        .is_accept()
                } else {
                    candidate.as_slice().iter().all(|x| x.is_finite())
                };
                if ok {
                    theta_hat = candidate;
                    accepted = true;
                }
            }
            let reference_accel = cfg.trajectory.reference_accel(t, &shape);
            if controller
                .resynthesize(
                    &model,
                    &InertialParams::from_vector(theta_hat.clone()),
                    &reference,
                    &reference_accel,
                    &q_cost,
                    &r_cost,
                )
                .is_err()
            {
                // A freshly accepted estimate that cannot produce a
                // controller is unusable: fall back to the previous accepted
                // estimate and its synthesis. Only an unusable previous
                // estimate is a fault.
                let mut recovered = false;
                if accepted {
                    theta_hat = prev_theta;
                    accepted = false;
                    recovered = controller
                        .resynthesize(
                            &model,
                            &InertialParams::from_vector(theta_hat.clone()),
                            &reference,
                            &reference_accel,
                            &q_cost,
                            &r_cost,
                        )
                        .is_ok();
                }
                if !recovered {
                    fault = true;
                }
            }
            theta_sample = Some(ThetaSample {
                theta_true: true_params.theta().clone(),
                theta_hat: theta_hat.clone(),
                accepted,
            });
        }

        if fault {
            break;
        }

        let thrusts = model.clamp_thrusts(&controller.control(&noisy_state, &reference));
        rows.push(TraceRow {
            time: t,
            reference,
            state,
            noisy_state,
            thrusts,
            theta: theta_sample,
            event,
        });

        if norm3(sub3(state.position, reference.position)) > ABORT_RADIUS {
            break;
        }

        match step_dynamics(&model, &state, &thrusts, &true_params) {
            Ok((next, accel)) => {
                let meas_accel = noisy_accel(&accel, &noise, &mut noise_rng);
                let wrench = model.wrench_from_thrusts(&thrusts);
                frames.push((noisy_state.body_state(meas_accel), wrench));
                let cap = (cfg.history_frames - 1) * cfg.frame_stride + 1;
                if frames.len() > cap {
                    frames.remove(0);
                }
                state = next;
            }
            Err(SimFault) => {
                fault = true;
                break;
            }
        }
    }

    let mut trace = Trace {
        rows,
        events,
        dt,
        duration: cfg.duration,
        fault,
        outcome: Outcome::Incomplete,
    };
    trace.outcome = classify_outcome(&trace);
    trace
}

/// Outcome rule: aborted on fault or any tracking error beyond the abort
/// radius; success when the episode completes with terminal-window RMS
/// position error under the limit; incomplete otherwise.
pub fn classify_outcome(trace: &Trace) -> Outcome {
    if trace.fault {
        return Outcome::Aborted;
    }
    for row in &trace.rows {
        let err = norm3(sub3(row.state.position, row.reference.position));
        if !err.is_finite() || err > ABORT_RADIUS {
            return Outcome::Aborted;
        }
    }
    if trace.rows.len() < expected_rows(trace.duration, trace.dt) {
        return Outcome::Aborted;
    }
    let t_start = trace.duration - TERMINAL_WINDOW;
    let mut sum_sq = 0.0;
    let mut count = 0usize;
    for row in &trace.rows {
        if row.time >= t_start {
            let e = norm3(sub3(row.state.position, row.reference.position));
            sum_sq += e * e;
            count += 1;
        }
    }
    if count > 0 && libm::sqrt(sum_sq / count as f64) < TERMINAL_RMS_LIMIT {
        Outcome::Success
    } else {
        Outcome::Incomplete
    }
}

/// Episode summary statistics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpisodeMetrics {
    /// Mean absolute position error, cm.
    pub pos_err_cm: f64,
    /// Mean relative estimation error over estimator steps.
    pub mean_est_err: f64,
    /// Relative estimation error at the first estimator step strictly after
    /// each payload event, averaged over events with such a step.
    pub t_plus_1_est_err: Option<f64>,
    pub outcome: Outcome,
}

fn relative_error(theta_hat: &Vector, theta_true: &Vector) -> f64 {
    theta_hat.sub(theta_true).norm() / theta_true.norm()
}

/// Summarizes a trace. Requires at least one estimator step.
pub fn metrics(trace: &Trace) -> EpisodeMetrics {
    let mut pos_sum = 0.0;
    let mut est_sum = 0.0;
    let mut est_count = 0usize;
    for row in &trace.rows {
        pos_sum += norm3(sub3(row.state.position, row.reference.position));
        if let Some(sample) = &row.theta {
            est_sum += relative_error(&sample.theta_hat, &sample.theta_true);
            est_count += 1;
        }
    }
    assert!(est_count > 0, "metrics requires at least one estimator step");

    let mut post_event_sum = 0.0;
    let mut post_event_count = 0usize;
    for record in &trace.events {
        let first_after = trace
            .rows
            .iter()
            .find(|row| row.time > record.time && row.theta.is_some());
        if let Some(row) = first_after {
            let sample = row.theta.as_ref().unwrap();
            post_event_sum += relative_error(&sample.theta_hat, &sample.theta_true);
            post_event_count += 1;
        }
    }

    EpisodeMetrics {
        pos_err_cm: 100.0 * pos_sum / trace.rows.len() as f64,
        mean_est_err: est_sum / est_count as f64,
        t_plus_1_est_err: (post_event_count > 0)
            .then(|| post_event_sum / post_event_count as f64),
        outcome: trace.outcome,
    }
}

#[cfg(test)]
mod tests;
