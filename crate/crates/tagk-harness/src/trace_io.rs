//! Flat CSV serialization of episode traces.
//!
//! One row per control step; parameter columns are empty except at
//! estimator steps; `event_flag` is 0 (none), 1 (payload added), or
//! 2 (payload dropped); the episode outcome is repeated on every row.

use std::path::Path;

use anyhow::{bail, Result};
use serde::{Deserialize, Serialize};

use tagk_core::quadsim::{Event, Outcome, Trace};

use crate::episodes::EpisodeStats;
use crate::reports::{read_csv, write_csv};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceCsvRow {
    pub t: f64,
    pub ref_x: f64,
    pub ref_y: f64,
    pub ref_z: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub qw: f64,
    pub qx: f64,
    pub qy: f64,
    pub qz: f64,
    pub vx: f64,
    pub vy: f64,
    pub vz: f64,
    pub wx: f64,
    pub wy: f64,
    pub wz: f64,
    pub u1: f64,
    pub u2: f64,
    pub u3: f64,
    pub u4: f64,
    pub theta_true_0: Option<f64>,
    pub theta_true_1: Option<f64>,
    pub theta_true_2: Option<f64>,
    pub theta_true_3: Option<f64>,
    pub theta_true_4: Option<f64>,
    pub theta_true_5: Option<f64>,
    pub theta_true_6: Option<f64>,
    pub theta_true_7: Option<f64>,
    pub theta_true_8: Option<f64>,
    pub theta_true_9: Option<f64>,
    pub theta_hat_0: Option<f64>,
    pub theta_hat_1: Option<f64>,
    pub theta_hat_2: Option<f64>,
    pub theta_hat_3: Option<f64>,
    pub theta_hat_4: Option<f64>,
    pub theta_hat_5: Option<f64>,
    pub theta_hat_6: Option<f64>,
    pub theta_hat_7: Option<f64>,
    pub theta_hat_8: Option<f64>,
    pub theta_hat_9: Option<f64>,
    pub event_flag: u8,
    pub outcome: String,
}

impl TraceCsvRow {
    fn theta_true(&self) -> Option<[f64; 10]> {
        Some([
            self.theta_true_0?,
            self.theta_true_1?,
            self.theta_true_2?,
            self.theta_true_3?,
            self.theta_true_4?,
            self.theta_true_5?,
            self.theta_true_6?,
            self.theta_true_7?,
            self.theta_true_8?,
            self.theta_true_9?,
        ])
    }

    fn theta_hat(&self) -> Option<[f64; 10]> {
        Some([
            self.theta_hat_0?,
            self.theta_hat_1?,
            self.theta_hat_2?,
            self.theta_hat_3?,
            self.theta_hat_4?,
            self.theta_hat_5?,
            self.theta_hat_6?,
            self.theta_hat_7?,
            self.theta_hat_8?,
            self.theta_hat_9?,
        ])
    }
}

fn event_flag(event: Option<Event>) -> u8 {
    match event {
        None => 0,
        Some(Event::PayloadAdded) => 1,
        Some(Event::PayloadDropped) => 2,
    }
}

/// Flattens a trace into CSV rows.
pub fn rows_from_trace(trace: &Trace) -> Vec<TraceCsvRow> {
    let outcome = trace.outcome.name().to_owned();
    trace
        .rows
        .iter()
        .map(|row| {
            let q = row.state.orientation.to_quaternion();
            let theta_true = row
                .theta
                .as_ref()
                .map(|s| s.theta_true.as_slice().to_vec());
            let theta_hat = row.theta.as_ref().map(|s| s.theta_hat.as_slice().to_vec());
            let tt = |i: usize| theta_true.as_ref().map(|v| v[i]);
            let th = |i: usize| theta_hat.as_ref().map(|v| v[i]);
            TraceCsvRow {
                t: row.time,
                ref_x: row.reference.position[0],
                ref_y: row.reference.position[1],
                ref_z: row.reference.position[2],
                x: row.state.position[0],
                y: row.state.position[1],
                z: row.state.position[2],
                qw: q[0],
                qx: q[1],
                qy: q[2],
                qz: q[3],
                vx: row.state.velocity[0],
                vy: row.state.velocity[1],
                vz: row.state.velocity[2],
                wx: row.state.angular_velocity[0],
                wy: row.state.angular_velocity[1],
                wz: row.state.angular_velocity[2],
                u1: row.thrusts[0],
                u2: row.thrusts[1],
                u3: row.thrusts[2],
                u4: row.thrusts[3],
                theta_true_0: tt(0),
                theta_true_1: tt(1),
                theta_true_2: tt(2),
                theta_true_3: tt(3),
                theta_true_4: tt(4),
                theta_true_5: tt(5),
                theta_true_6: tt(6),
                theta_true_7: tt(7),
                theta_true_8: tt(8),
                theta_true_9: tt(9),
                theta_hat_0: th(0),
                theta_hat_1: th(1),
                theta_hat_2: th(2),
                theta_hat_3: th(3),
                theta_hat_4: th(4),
                theta_hat_5: th(5),
                theta_hat_6: th(6),
                theta_hat_7: th(7),
                theta_hat_8: th(8),
                theta_hat_9: th(9),
                event_flag: event_flag(row.event),
                outcome: outcome.clone(),
            }
        })
        .collect()
}

pub fn write_trace<P: AsRef<Path>>(path: P, trace: &Trace) -> Result<()> {
    write_csv(path, &rows_from_trace(trace))
}

pub fn read_trace_rows<P: AsRef<Path>>(path: P) -> Result<Vec<TraceCsvRow>> {
    read_csv(path)
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn relative_error(hat: &[f64], truth: &[f64]) -> f64 {
    let diff: Vec<f64> = hat.iter().zip(truth).map(|(a, b)| a - b).collect();
    norm(&diff) / norm(truth)
}

/// Recomputes episode statistics from serialized rows. Used as an
/// independent check that the CSV carries everything the summaries report.
pub fn stats_from_rows(rows: &[TraceCsvRow]) -> Result<EpisodeStats> {
    if rows.is_empty() {
        bail!("trace has no rows");
    }
    let outcome = match rows[0].outcome.as_str() {
        "success" => Outcome::Success,
        "aborted" => Outcome::Aborted,
        "incomplete" => Outcome::Incomplete,
        other => bail!("unknown outcome label: {other}"),
    };

    let pos_err_cm = 100.0
        * rows
            .iter()
            .map(|r| norm(&[r.x - r.ref_x, r.y - r.ref_y, r.z - r.ref_z]))
            .sum::<f64>()
        / rows.len() as f64;

    let mut est_sum = 0.0;
    let mut est_count = 0usize;
    for row in rows {
        if let (Some(hat), Some(truth)) = (row.theta_hat(), row.theta_true()) {
            est_sum += relative_error(&hat, &truth);
            est_count += 1;
        }
    }

    let event_times: Vec<f64> = rows
        .iter()
        .filter(|r| r.event_flag != 0)
        .map(|r| r.t)
        .collect();
    let mut post_sum = 0.0;
    let mut post_count = 0usize;
    for &et in &event_times {
        let first_after = rows
            .iter()
            .find(|r| r.t > et && r.theta_hat().is_some() && r.theta_true().is_some());
        if let Some(row) = first_after {
            post_sum += relative_error(&row.theta_hat().unwrap(), &row.theta_true().unwrap());
            post_count += 1;
        }
    }

    Ok(EpisodeStats {
        outcome,
        pos_err_cm: Some(pos_err_cm),
        mean_est_err: (est_count > 0).then(|| est_sum / est_count as f64),
        t_plus_1_est_err: (post_count > 0).then(|| post_sum / post_count as f64),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::episodes::{episode_stats, run_one, EpisodeSpec};
    use crate::registry::EstimatorKind;
    use tagk_core::quadsim::{NoiseLevel, QuadModel, Trajectory};

    fn sample_trace() -> Trace {
        let model = QuadModel::crazyflie();
        let spec = EpisodeSpec::new(
            EstimatorKind::Tagk,
            NoiseLevel::Low,
            Trajectory::Circle,
            3,
        );
        run_one(&model, &spec).trace
    }

    #[test]
    fn rows_roundtrip_through_csv() {
        let trace = sample_trace();
        let rows = rows_from_trace(&trace);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("trace.csv");
        write_trace(&path, &trace).unwrap();
        let back = read_trace_rows(&path).unwrap();
        assert_eq!(back, rows);
    }

    #[test]
    fn theta_columns_are_empty_between_estimator_steps() {
        let trace = sample_trace();
        let rows = rows_from_trace(&trace);
        for (row, csv_row) in trace.rows.iter().zip(&rows) {
            assert_eq!(row.theta.is_some(), csv_row.theta_hat_0.is_some());
            assert_eq!(row.theta.is_some(), csv_row.theta_true_9.is_some());
        }
        assert!(rows.iter().any(|r| r.theta_hat_0.is_some()));
        assert!(rows.iter().any(|r| r.theta_hat_0.is_none()));
    }

    #[test]
    fn event_flags_match_the_trace_events() {
        let trace = sample_trace();
        let rows = rows_from_trace(&trace);
        let flagged: Vec<(f64, u8)> = rows
            .iter()
            .filter(|r| r.event_flag != 0)
            .map(|r| (r.t, r.event_flag))
            .collect();
        assert_eq!(flagged.len(), trace.events.len());
        for (record, (t, flag)) in trace.events.iter().zip(&flagged) {
            assert_eq!(record.time, *t);
            let expected = match record.event {
                Event::PayloadAdded => 1,
                Event::PayloadDropped => 2,
            };
            assert_eq!(*flag, expected);
        }
    }

    #[test]
    fn replayed_stats_match_the_live_metrics() {
        let trace = sample_trace();
        let live = episode_stats(&trace);
        let replayed = stats_from_rows(&rows_from_trace(&trace)).unwrap();
        assert_eq!(replayed.outcome, live.outcome);
        let close = |a: Option<f64>, b: Option<f64>| match (a, b) {
            (Some(a), Some(b)) => (a - b).abs() < 1e-12,
            (None, None) => true,
            _ => false,
        };
        assert!(close(replayed.pos_err_cm, live.pos_err_cm));
        assert!(close(replayed.mean_est_err, live.mean_est_err));
        assert!(close(replayed.t_plus_1_est_err, live.t_plus_1_est_err));
    }
}
