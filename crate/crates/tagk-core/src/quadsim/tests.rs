use alloc::vec;
use alloc::vec::Vec;

use super::*;
use crate::estimators::KaczmarzVariant;
use crate::physics::Rotation;

fn quiet_config(seed: u64) -> EpisodeConfig {
    // Events still fire but carry a zero-mass payload, and the vehicle
    // starts exactly on the trajectory: pure tracking, no disturbance.
    let mut cfg = EpisodeConfig::new(Trajectory::Circle, NoiseLevel::None, seed);
    cfg.payload_mass_frac = [0.0, 0.0];
    cfg.start_radius = 0.0;
    cfg
}

fn rms_position_error(trace: &Trace) -> f64 {
    let sum_sq: f64 = trace
        .rows
        .iter()
        .map(|r| {
            let e = norm3(sub3(r.state.position, r.reference.position));
            e * e
        })
        .sum();
    libm::sqrt(sum_sq / trace.rows.len() as f64)
}

#[test]
fn no_noise_on_trajectory_tracks_tightly() {
    let model = QuadModel::crazyflie();
    for traj in Trajectory::ALL {
        let mut cfg = quiet_config(7);
        cfg.trajectory = traj;
        let mut driver = OracleDriver;
        let trace = run_episode(&model, &cfg, &mut driver);
        assert_eq!(trace.outcome, Outcome::Success, "{}", traj.name());
        let rms = rms_position_error(&trace);
        assert!(rms < 0.01, "{}: RMS position error {rms} m", traj.name());
    }
}

#[test]
fn oracle_estimator_succeeds_on_fifty_no_noise_seeds() {
    let model = QuadModel::crazyflie();
    for seed in 0..50 {
        let cfg = EpisodeConfig::new(Trajectory::Figure8, NoiseLevel::None, seed);
        let mut driver = OracleDriver;
        let trace = run_episode(&model, &cfg, &mut driver);
        assert_eq!(trace.outcome, Outcome::Success, "seed {seed}");
    }
}

#[test]
fn identical_seeds_give_identical_traces() {
    let model = QuadModel::crazyflie();
    let cfg = EpisodeConfig::new(Trajectory::Helix, NoiseLevel::Medium, 1234);
    let mut d1 = Estimator::kaczmarz(KaczmarzVariant::Tagk, 0, 1234, 10);
    let mut d2 = Estimator::kaczmarz(KaczmarzVariant::Tagk, 0, 1234, 10);
    let t1 = run_episode(&model, &cfg, &mut d1);
    let t2 = run_episode(&model, &cfg, &mut d2);
    assert_eq!(t1, t2);
}

#[test]
fn event_times_fall_in_configured_windows() {
    let model = QuadModel::crazyflie();
    for seed in 0..20 {
        let cfg = EpisodeConfig::new(Trajectory::Circle, NoiseLevel::None, seed);
        let mut driver = OracleDriver;
        let trace = run_episode(&model, &cfg, &mut driver);
        assert_eq!(trace.events.len(), 2, "seed {seed}");
        let add = &trace.events[0];
        let drop = &trace.events[1];
        assert_eq!(add.event, Event::PayloadAdded);
        assert_eq!(drop.event, Event::PayloadDropped);
        // Crossing is detected at the first control step at or after the
        // drawn time, so the recorded time can lag by up to one step.
        assert!(add.time >= cfg.add_window[0] && add.time <= cfg.add_window[1] + trace.dt);
        assert!(drop.time >= cfg.drop_window[0] && drop.time <= cfg.drop_window[1] + trace.dt);
    }
}

#[test]
fn estimator_steps_follow_the_two_rate_schedule() {
    let model = QuadModel::crazyflie();
    let cfg = EpisodeConfig::new(Trajectory::Ellipse, NoiseLevel::Low, 5);
    let mut driver = OracleDriver;
    let trace = run_episode(&model, &cfg, &mut driver);
    let frames_needed = (cfg.history_frames - 1) * cfg.frame_stride + 1;
    for (k, row) in trace.rows.iter().enumerate() {
        let expected = k > 0 && k % cfg.estimator_divisor == 0 && k >= frames_needed;
        assert_eq!(row.theta.is_some(), expected, "step {k}");
    }
}

#[test]
fn true_parameter_bookkeeping_around_events() {
    let model = QuadModel::crazyflie();
    let cfg = EpisodeConfig::new(Trajectory::Spiral, NoiseLevel::None, 42);
    let mut driver = OracleDriver;
    let trace = run_episode(&model, &cfg, &mut driver);
    let add_time = trace.events[0].time;
    let drop_time = trace.events[1].time;
    let nominal = model.nominal_params.theta().clone();
    let mut saw_loaded = false;
    for row in &trace.rows {
        if let Some(sample) = &row.theta {
            if row.time < add_time || row.time >= drop_time {
                assert_eq!(sample.theta_true, nominal, "t={}", row.time);
            } else {
                assert!(sample.theta_true[0] > nominal[0], "t={}", row.time);
                saw_loaded = true;
            }
        }
    }
    assert!(saw_loaded);
}

/// Records every measurement window while echoing the true parameters.
struct BlockRecorder {
    samples: Vec<(usize, MeasurementBlock, Vector)>,
}

impl EstimatorDriver for BlockRecorder {
    fn step(
        &mut self,
        block: &MeasurementBlock,
        _warm_start: &Vector,
        ctx: &StepContext<'_>,
    ) -> Result<(Vector, StepStatus), EstimatorError> {
        self.samples
            .push((ctx.step_index, block.clone(), ctx.theta_true.clone()));
        Ok((ctx.theta_true.clone(), StepStatus::Updated))
    }
}

#[test]
fn noiseless_windows_are_consistent_with_true_parameters() {
    let model = QuadModel::crazyflie();
    let cfg = EpisodeConfig::new(Trajectory::Figure8, NoiseLevel::None, 11);
    let mut driver = BlockRecorder { samples: vec![] };
    let trace = run_episode(&model, &cfg, &mut driver);
    assert_eq!(trace.outcome, Outcome::Success);
    let mut checked = 0;
    for (k, block, theta_true) in &driver.samples {
        // Skip windows whose frames straddle a payload event: their rows mix
        // two different true parameter vectors.
        let span = ((cfg.history_frames - 1) * cfg.frame_stride + 1) as f64;
        let lo = (*k as f64 - span) * trace.dt;
        let hi = *k as f64 * trace.dt;
        if trace.events.iter().any(|e| e.time > lo && e.time <= hi) {
            continue;
        }
        let res = block.residual(theta_true).norm();
        let scale = block.b().norm();
        assert!(res <= 1e-8 * scale, "step {k}: {res} vs {scale}");
        checked += 1;
    }
    assert!(checked >= 40, "only {checked} windows checked");
}

#[test]
fn noise_level_none_leaves_inputs_unchanged() {
    let mut rng = Stream::derive(0, 0);
    let state = SimState::at_rest([1.0, 2.0, 3.0]);
    let accel = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6];
    let (s, a) = inject_noise(&state, &accel, &NoiseLevel::None.model(), &mut rng);
    assert_eq!(s, state);
    assert_eq!(a, accel);
}

#[test]
fn high_noise_level_uses_stated_maxima() {
    let m = NoiseLevel::High.model();
    assert_eq!(m.sigma_v, 0.025);
    assert_eq!(m.sigma_a, 0.0025);
}

#[test]
fn noise_sample_variance_matches_sigma() {
    let mut rng = Stream::derive(77, 0);
    let noise = NoiseLevel::High.model();
    let state = SimState::at_rest([0.0; 3]);
    let n = 100_000;
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for _ in 0..n {
        let s = noisy_velocities(&state, &noise, &mut rng);
        let x = s.velocity[0];
        sum += x;
        sum_sq += x * x;
    }
    let mean = sum / n as f64;
    let var = sum_sq / n as f64 - mean * mean;
    let want = noise.sigma_v * noise.sigma_v;
    assert!((var - want).abs() < 0.02 * want, "var {var} vs {want}");
}

fn hover_frames(model: &QuadModel, count: usize) -> Vec<(BodyState, [f64; 6])> {
    let state = SimState::at_rest([0.0, 0.0, 1.0]);
    let u = model.hover_thrusts(&model.nominal_params, &state.orientation);
    let wrench = model.wrench_from_thrusts(&u);
    (0..count)
        .map(|_| (state.body_state([0.0; 6]), wrench))
        .collect()
}

#[test]
fn window_has_expected_shape() {
    let model = QuadModel::crazyflie();
    let block = build_measurement_window(&hover_frames(&model, 5));
    assert_eq!(block.rows(), 30);
    assert_eq!(block.cols(), PARAMS_PER_BODY);
}

#[test]
fn hover_window_is_consistent() {
    let model = QuadModel::crazyflie();
    let block = build_measurement_window(&hover_frames(&model, 5));
    let res = block.residual(model.nominal_params.theta()).norm();
    assert!(res <= 1e-9, "residual {res}");
}

#[test]
fn window_residual_grows_with_velocity_noise() {
    // Mean residual over seeds must increase monotonically in sigma_v.
    let model = QuadModel::crazyflie();
    let state = SimState {
        position: [0.0, 0.0, 1.0],
        orientation: Rotation::exp([0.05, -0.03, 0.1]),
        velocity: [0.2, -0.1, 0.05],
        angular_velocity: [0.1, 0.2, -0.05],
    };
    let accel = body_accel(
        &model.nominal_params,
        &state,
        &model.wrench_from_thrusts(&[0.09, 0.08, 0.09, 0.08]),
    )
    .unwrap();
    let wrench = model.wrench_from_thrusts(&[0.09, 0.08, 0.09, 0.08]);
    let mut last = -1.0;
    for (level, sigma_v) in [(0, 0.0), (1, 0.005), (2, 0.01), (3, 0.02)] {
        let noise = NoiseModel { sigma_v, sigma_a: 0.0 };
        let mut total = 0.0;
        for seed in 0..40 {
            let mut rng = Stream::derive(seed, level);
            let frames: Vec<_> = (0..5)
                .map(|_| {
                    let s = noisy_velocities(&state, &noise, &mut rng);
                    (s.body_state(accel), wrench)
                })
                .collect();
            let block = build_measurement_window(&frames);
            total += block.residual(model.nominal_params.theta()).norm();
        }
        assert!(total > last, "sigma_v {sigma_v}: {total} !> {last}");
        last = total;
    }
}

fn constant_offset_trace(offset: f64, fault: bool) -> Trace {
    let dt = 0.5;
    let duration = 1.0;
    let reference = SimState::at_rest([0.0; 3]);
    let rows = (0..2)
        .map(|k| TraceRow {
            time: k as f64 * dt,
            reference,
            state: SimState::at_rest([offset, 0.0, 0.0]),
            noisy_state: SimState::at_rest([offset, 0.0, 0.0]),
            thrusts: [0.0; 4],
            theta: None,
            event: None,
        })
        .collect();
    Trace {
        rows,
        events: vec![],
        dt,
        duration,
        fault,
        outcome: Outcome::Incomplete,
    }
}

#[test]
fn outcome_rules() {
    // A fault is always an abort.
    assert_eq!(classify_outcome(&constant_offset_trace(0.0, true)), Outcome::Aborted);
    // Perfect tracking of a completed episode is a success.
    assert_eq!(classify_outcome(&constant_offset_trace(0.0, false)), Outcome::Success);
    // Completing with a 10 cm terminal offset is incomplete.
    assert_eq!(classify_outcome(&constant_offset_trace(0.10, false)), Outcome::Incomplete);
    // Exceeding the abort radius anywhere is an abort.
    assert_eq!(classify_outcome(&constant_offset_trace(2.0, false)), Outcome::Aborted);
}

#[test]
fn oracle_metrics_are_zero_error() {
    let model = QuadModel::crazyflie();
    let cfg = EpisodeConfig::new(Trajectory::Circle, NoiseLevel::Low, 3);
    let mut driver = OracleDriver;
    let trace = run_episode(&model, &cfg, &mut driver);
    let m = metrics(&trace);
    assert_eq!(m.mean_est_err, 0.0);
    assert_eq!(m.t_plus_1_est_err, Some(0.0));
    assert_eq!(m.outcome, trace.outcome);
}

#[test]
fn post_event_error_picks_first_estimator_step_after_each_event() {
    // Hand-built trace: one event at t=1, estimator steps at t=0.5 (before)
    // and t=1.5 (after) with relative error 0.01.
    let theta_true = Vector::from_slice(&[1.0, 0.0, 0.0]);
    let before = ThetaSample {
        theta_true: theta_true.clone(),
        theta_hat: theta_true.clone(),
        accepted: true,
    };
    let after = ThetaSample {
        theta_true: theta_true.clone(),
        theta_hat: Vector::from_slice(&[1.01, 0.0, 0.0]),
        accepted: true,
    };
    let reference = SimState::at_rest([0.0; 3]);
    let mk_row = |t: f64, theta: Option<ThetaSample>| TraceRow {
        time: t,
        reference,
        state: reference,
        noisy_state: reference,
        thrusts: [0.0; 4],
        theta,
        event: None,
    };
    let trace = Trace {
        rows: vec![
            mk_row(0.0, None),
            mk_row(0.5, Some(before)),
            mk_row(1.0, None),
            mk_row(1.5, Some(after)),
        ],
        events: vec![EventRecord {
            event: Event::PayloadAdded,
            time: 1.0,
        }],
        dt: 0.5,
        duration: 2.0,
        fault: false,
        outcome: Outcome::Success,
    };
    let m = metrics(&trace);
    assert!((m.t_plus_1_est_err.unwrap() - 0.01).abs() < 1e-12);
    assert!((m.mean_est_err - 0.005).abs() < 1e-12);
}

#[test]
fn hover_thrust_grows_with_payload_mass() {
    let model = QuadModel::crazyflie();
    let orientation = Rotation::identity();
    let mut last = 0.0;
    for i in 0..=10 {
        let frac = 0.30 + 0.02 * i as f64;
        let payload = model.nominal_params.mass() * frac;
        let loaded =
            compose_payload(&model.nominal_params, payload, [0.01, 0.0, 0.0]).unwrap();
        let total: f64 = model.hover_thrusts(&loaded, &orientation).iter().sum();
        assert!(total > last, "frac {frac}");
        last = total;
    }
}

#[test]
fn circle_reference_is_periodic() {
    let period = 2.0 * core::f64::consts::PI / 2.2;
    let a = Trajectory::Circle.reference(0.0, &ShapeParams::BASE);
    let b = Trajectory::Circle.reference(period, &ShapeParams::BASE);
    assert!(norm3(sub3(a.position, b.position)) < 1e-9);
    assert!(norm3(sub3(a.velocity, b.velocity)) < 1e-9);
}

#[test]
fn figure8_crosses_its_center_twice_per_period() {
    // Dense sampling: count disjoint time intervals where the path passes
    // within 1 mm of the center point.
    let period = 2.0 * core::f64::consts::PI / 1.4;
    let center = [0.0, 0.0, 1.0];
    let mut crossings = 0;
    let mut inside = false;
    let steps = 200_000;
    for k in 0..steps {
        // Offset the sampling window so no crossing sits on its boundary.
        let t = period / 8.0 + period * k as f64 / steps as f64;
        let close = norm3(sub3(Trajectory::Figure8.position(t, &ShapeParams::BASE), center)) < 1e-3;
        if close && !inside {
            crossings += 1;
        }
        inside = close;
    }
    assert_eq!(crossings, 2);
}

#[test]
fn tagk_estimator_completes_a_noiseless_episode() {
    let model = QuadModel::crazyflie();
    let mut cfg = EpisodeConfig::new(Trajectory::Circle, NoiseLevel::None, 21);
    cfg.safety_filter = false;
    let mut driver = Estimator::kaczmarz(KaczmarzVariant::Tagk, 0, 21, 10);
    let trace = run_episode(&model, &cfg, &mut driver);
    assert_eq!(trace.outcome, Outcome::Success);
    let m = metrics(&trace);
    assert!(m.mean_est_err < 0.5, "mean est err {}", m.mean_est_err);
}

#[test]
fn invalid_configs_are_rejected() {
    let mut cfg = EpisodeConfig::new(Trajectory::Circle, NoiseLevel::None, 0);
    assert!(cfg.validate().is_ok());
    cfg.add_window = [13.0, 15.0];
    assert!(cfg.validate().is_err());
    let mut cfg = EpisodeConfig::new(Trajectory::Circle, NoiseLevel::None, 0);
    cfg.drop_window = [12.0, 25.0];
    assert!(cfg.validate().is_err());
    let mut cfg = EpisodeConfig::new(Trajectory::Circle, NoiseLevel::None, 0);
    cfg.payload_mass_frac = [0.5, 0.3];
    assert!(cfg.validate().is_err());
}
