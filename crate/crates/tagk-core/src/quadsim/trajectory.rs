//! Reference trajectories for the payload-transfer episodes.

use core::str::FromStr;

use libm::{cos, sin};

use crate::physics::{cross, norm3, scale3, sub3, Rotation, Vec3};

use super::dynamics::SimState;

/// Cruise altitude of every reference path, metres.
const BASE_ALTITUDE: f64 = 1.0;

/// Per-episode shape randomization: the reference displacement is scaled by
/// `amplitude` and its time axis by `frequency`. Both lie in (0, 1], so the
/// base shapes bound the peak speed and acceleration of every randomized
/// variant (speed scales as `amplitude * frequency`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShapeParams {
    pub amplitude: f64,
    pub frequency: f64,
}

impl ShapeParams {
    /// The unscaled base shape.
    pub const BASE: ShapeParams = ShapeParams {
        amplitude: 1.0,
        frequency: 1.0,
    };

    pub fn is_valid(&self) -> bool {
        let ok = |x: f64| x > 0.0 && x <= 1.0;
        ok(self.amplitude) && ok(self.frequency)
    }
}

impl Default for ShapeParams {
    fn default() -> Self {
        ShapeParams::BASE
    }
}

/// Closed-form reference paths. The base shapes stay within a 0.5 m/s
/// translational and 0.5 rad/s angular speed cap by construction, and
/// [`ShapeParams`] scaling only slows them down.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Trajectory {
    Figure8,
    Circle,
    Spiral,
    Helix,
    Ellipse,
}

impl Trajectory {
    pub const ALL: [Trajectory; 5] = [
        Trajectory::Figure8,
        Trajectory::Circle,
        Trajectory::Spiral,
        Trajectory::Helix,
        Trajectory::Ellipse,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Trajectory::Figure8 => "figure8",
            Trajectory::Circle => "circle",
            Trajectory::Spiral => "spiral",
            Trajectory::Helix => "helix",
            Trajectory::Ellipse => "ellipse",
        }
    }

    /// Base displacement from the start point at warped time `tau`; the
    /// full reference is `start + amplitude * displacement(frequency * t)`.
    fn displacement(&self, tau: f64) -> Vec3 {
        match self {
            Trajectory::Figure8 => {
                // Lissajous 1:2, lemniscate-like.
                let (a, b, om) = (0.25, 0.125, 1.4);
                [a * sin(om * tau), b * sin(2.0 * om * tau), 0.0]
            }
            Trajectory::Circle => {
                let (r, om) = (0.22, 2.2);
                [r * cos(om * tau) - r, r * sin(om * tau), 0.0]
            }
            Trajectory::Spiral => {
                // Radius grows slowly; bounded over a 20 s episode.
                let (r0, c, om) = (0.08, 0.007, 2.0);
                let r = r0 + c * tau;
                [r * cos(om * tau) - r0, r * sin(om * tau), 0.0]
            }
            Trajectory::Helix => {
                let (r, om, vz) = (0.2, 2.4, 0.04);
                [r * cos(om * tau) - r, r * sin(om * tau), vz * tau]
            }
            Trajectory::Ellipse => {
                let (a, b, om) = (0.24, 0.15, 1.9);
                [a * cos(om * tau) - a, b * sin(om * tau), 0.0]
            }
        }
    }

    /// First derivative of [`displacement`](Self::displacement) in `tau`.
    fn displacement_rate(&self, tau: f64) -> Vec3 {
        match self {
            Trajectory::Figure8 => {
                let (a, b, om) = (0.25, 0.125, 1.4);
                [
                    a * om * cos(om * tau),
                    2.0 * b * om * cos(2.0 * om * tau),
                    0.0,
                ]
            }
            Trajectory::Circle => {
                let (r, om) = (0.22, 2.2);
                [-r * om * sin(om * tau), r * om * cos(om * tau), 0.0]
            }
            Trajectory::Spiral => {
                let (r0, c, om) = (0.08, 0.007, 2.0);
                let r = r0 + c * tau;
                [
                    c * cos(om * tau) - r * om * sin(om * tau),
                    c * sin(om * tau) + r * om * cos(om * tau),
                    0.0,
                ]
            }
            Trajectory::Helix => {
                let (r, om, vz) = (0.2, 2.4, 0.04);
                [-r * om * sin(om * tau), r * om * cos(om * tau), vz]
            }
            Trajectory::Ellipse => {
                let (a, b, om) = (0.24, 0.15, 1.9);
                [-a * om * sin(om * tau), b * om * cos(om * tau), 0.0]
            }
        }
    }

    /// Second derivative of [`displacement`](Self::displacement) in `tau`.
    fn displacement_accel(&self, tau: f64) -> Vec3 {
        match self {
            Trajectory::Figure8 => {
                let (a, b, om) = (0.25, 0.125, 1.4);
                [
                    -a * om * om * sin(om * tau),
                    -4.0 * b * om * om * sin(2.0 * om * tau),
                    0.0,
                ]
            }
            Trajectory::Circle => {
                let (r, om) = (0.22, 2.2);
                [-r * om * om * cos(om * tau), -r * om * om * sin(om * tau), 0.0]
            }
            Trajectory::Spiral => {
                let (r0, c, om) = (0.08, 0.007, 2.0);
                let r = r0 + c * tau;
                [
                    -2.0 * c * om * sin(om * tau) - r * om * om * cos(om * tau),
                    2.0 * c * om * cos(om * tau) - r * om * om * sin(om * tau),
                    0.0,
                ]
            }
            Trajectory::Helix => {
                let (r, om) = (0.2, 2.4);
                [-r * om * om * cos(om * tau), -r * om * om * sin(om * tau), 0.0]
            }
            Trajectory::Ellipse => {
                let (a, b, om) = (0.24, 0.15, 1.9);
                [-a * om * om * cos(om * tau), -b * om * om * sin(om * tau), 0.0]
            }
        }
    }

    /// World-frame reference position at time `t`.
    pub fn position(&self, t: f64, shape: &ShapeParams) -> Vec3 {
        let d = self.displacement(shape.frequency * t);
        [
            shape.amplitude * d[0],
            shape.amplitude * d[1],
            BASE_ALTITUDE + shape.amplitude * d[2],
        ]
    }

    /// World-frame reference velocity at time `t` (analytic derivative of
    /// `position`).
    pub fn velocity(&self, t: f64, shape: &ShapeParams) -> Vec3 {
        let s = shape.amplitude * shape.frequency;
        scale3(self.displacement_rate(shape.frequency * t), s)
    }

    /// World-frame reference acceleration at time `t` (analytic second
    /// derivative of `position`).
    pub fn acceleration(&self, t: f64, shape: &ShapeParams) -> Vec3 {
        let s = shape.amplitude * shape.frequency * shape.frequency;
        scale3(self.displacement_accel(shape.frequency * t), s)
    }

    /// Attitude that realizes the reference acceleration with thrust along
    /// the body z axis at zero yaw (differential flatness of the quadrotor).
    fn flat_orientation(&self, t: f64, shape: &ShapeParams) -> Rotation {
        let a = self.acceleration(t, shape);
        // Specific force the thrust must produce: acceleration minus gravity.
        let s = sub3(a, super::dynamics::GRAVITY_W);
        let b3 = scale3(s, 1.0 / norm3(s));
        let x_c = [1.0, 0.0, 0.0];
        let b2_raw = cross(b3, x_c);
        let b2 = scale3(b2_raw, 1.0 / norm3(b2_raw));
        let b1 = cross(b2, b3);
        Rotation::from_columns(b1, b2, b3)
    }

    /// Full reference state: flat attitude tilted into the reference
    /// acceleration, body-frame velocities, and the body angular rate of the
    /// flat attitude (by a small finite difference).
    pub fn reference(&self, t: f64, shape: &ShapeParams) -> SimState {
        let r = self.flat_orientation(t, shape);
        let h = 1e-4;
        let r_next = self.flat_orientation(t + h, shape);
        let omega = scale3(r.transpose().compose(&r_next).log(), 1.0 / h);
        SimState {
            position: self.position(t, shape),
            orientation: r,
            velocity: r.apply_inverse(self.velocity(t, shape)),
            angular_velocity: omega,
        }
    }

    /// Body-frame accelerations `[dw; dv]` of the reference motion,
    /// suitable as the operating-point accelerations for feedforward.
    pub fn reference_accel(&self, t: f64, shape: &ShapeParams) -> [f64; 6] {
        let s = self.reference(t, shape);
        // dv_body = R^T a_world - omega x v_body; angular acceleration of
        // the slowly tilting flat attitude is negligible.
        let dv = sub3(
            s.orientation.apply_inverse(self.acceleration(t, shape)),
            cross(s.angular_velocity, s.velocity),
        );
        [0.0, 0.0, 0.0, dv[0], dv[1], dv[2]]
    }
}

impl FromStr for Trajectory {
    type Err = UnknownTrajectory;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Trajectory::ALL
            .iter()
            .copied()
            .find(|t| t.name() == s)
            .ok_or(UnknownTrajectory)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct UnknownTrajectory;

impl core::fmt::Display for UnknownTrajectory {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        write!(f, "unknown trajectory name")
    }
}

impl core::error::Error for UnknownTrajectory {}
