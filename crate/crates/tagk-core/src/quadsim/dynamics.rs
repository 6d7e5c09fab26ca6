//! Quadrotor rigid-body model and forward-Euler dynamics.

use alloc::vec::Vec;
use core::fmt;

use crate::linalg::{mat_vec, solve_spd_vec, Matrix, Vector};
use crate::physics::{add3, cross, scale3, BodyState, InertialParams, Rotation, Vec3};

/// Gravity in the world frame.
pub const GRAVITY_W: Vec3 = [0.0, 0.0, -9.81];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SimFault;

impl fmt::Display for SimFault {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "non-finite simulation state")
    }
}

impl core::error::Error for SimFault {}

/// Quadrotor model constants.
#[derive(Debug, Clone)]
pub struct QuadModel {
    pub nominal_params: InertialParams,
    /// Center-to-motor distance, m.
    pub arm_length: f64,
    /// 4 motor thrusts -> body wrench `[torque; force]`, 6x4.
    pub mixing: Matrix,
    /// Per-motor thrust limits, N.
    pub thrust_min: f64,
    pub thrust_max: f64,
    /// Control timestep, s.
    pub dt: f64,
}

impl QuadModel {
    /// Defaults loosely following the Crazyflie 2.1 public datasheet
    /// (27 g airframe plus battery, 46 mm arms). Config values, not ground
    /// truth for anything.
    pub fn crazyflie() -> Self {
        let mass = 0.033;
        let inertia = [1.4e-5, 0.0, 0.0, 1.4e-5, 0.0, 2.17e-5];
        let arm = 0.046;
        QuadModel {
            nominal_params: InertialParams::single_body(mass, [0.0; 3], inertia),
            arm_length: arm,
            mixing: x_config_mixing(arm, 0.006),
            thrust_min: 0.0,
            thrust_max: 0.15,
            dt: 0.02,
        }
    }

    pub fn clamp_thrusts(&self, u: &[f64; 4]) -> [f64; 4] {
        core::array::from_fn(|i| u[i].clamp(self.thrust_min, self.thrust_max))
    }

    /// Body wrench `[torque; force]` produced by motor thrusts.
    pub fn wrench_from_thrusts(&self, u: &[f64; 4]) -> [f64; 6] {
        let uv = Vector::from_slice(u);
        let w = mat_vec(&self.mixing, &uv);
        core::array::from_fn(|i| w[i])
    }

    /// Least-squares motor thrusts realizing the desired body wrench.
    pub fn thrusts_for_wrench(&self, wrench: &[f64; 6]) -> [f64; 4] {
        let mt = self.mixing.transpose();
        let mtm = mt.mat_mul(&self.mixing);
        let rhs = mat_vec(&mt, &Vector::from_slice(wrench));
        let u = solve_spd_vec(&mtm, &rhs).expect("mixing matrix must be full rank");
        core::array::from_fn(|i| u[i])
    }

    /// Thrusts that balance weight and the gravity moment for the given
    /// parameter estimate at the given orientation.
    pub fn hover_thrusts(&self, params: &InertialParams, orientation: &Rotation) -> [f64; 4] {
        let g_b = orientation.apply_inverse(GRAVITY_W);
        let f = scale3(g_b, -params.mass());
        let n = scale3(cross(params.first_moment(), g_b), -1.0);
        self.thrusts_for_wrench(&[n[0], n[1], n[2], f[0], f[1], f[2]])
    }
}

/// X-configuration mixing matrix: motors at 45/135/225/315 degrees with
/// alternating spin, yaw torque `drag_coeff` per unit thrust.
fn x_config_mixing(arm: f64, drag_coeff: f64) -> Matrix {
    let angles = [45.0f64, 135.0, 225.0, 315.0];
    let spins = [1.0, -1.0, 1.0, -1.0];
    let mut m = Matrix::zeros(6, 4);
    for (j, (deg, spin)) in angles.iter().zip(spins).enumerate() {
        let a = deg.to_radians();
        let x = arm * libm::cos(a);
        let y = arm * libm::sin(a);
        // Unit thrust along +z at (x, y, 0): torque (y, -x, spin * c_d).
        m[(0, j)] = y;
        m[(1, j)] = -x;
        m[(2, j)] = spin * drag_coeff;
        m[(5, j)] = 1.0;
    }
    m
}

/// 12-state simulator state. Velocities are body-frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimState {
    /// World-frame position, m.
    pub position: Vec3,
    /// Body-to-world rotation.
    pub orientation: Rotation,
    /// Body-frame linear velocity, m/s.
    pub velocity: Vec3,
    /// Body-frame angular velocity, rad/s.
    pub angular_velocity: Vec3,
}

impl SimState {
    pub fn at_rest(position: Vec3) -> Self {
        SimState {
            position,
            orientation: Rotation::identity(),
            velocity: [0.0; 3],
            angular_velocity: [0.0; 3],
        }
    }

    pub fn is_finite(&self) -> bool {
        self.position.iter().all(|x| x.is_finite())
            && self.orientation.is_finite()
            && self.velocity.iter().all(|x| x.is_finite())
            && self.angular_velocity.iter().all(|x| x.is_finite())
    }

    /// Body state view with the given body-frame accelerations.
    pub fn body_state(&self, accel: [f64; 6]) -> BodyState {
        BodyState {
            orientation: self.orientation,
            velocity: [
                self.angular_velocity[0],
                self.angular_velocity[1],
                self.angular_velocity[2],
                self.velocity[0],
                self.velocity[1],
                self.velocity[2],
            ],
            acceleration: accel,
            gravity: GRAVITY_W,
        }
    }
}

/// Body-frame accelerations `[dw; dv]` produced by the applied wrench under
/// the given true parameters: the forward-dynamics inverse of the
/// Newton-Euler wrench map.
pub fn body_accel(
    params: &InertialParams,
    state: &SimState,
    applied_wrench: &[f64; 6],
) -> Result<[f64; 6], SimFault> {
    let m = params.mass();
    let h = params.first_moment();

    // Bias wrench at zero acceleration (gravity included), to be subtracted.
    let zero_accel = state.body_state([0.0; 6]);
    let bias = crate::physics::newton_euler(&zero_accel, params);

    let rhs = Vector::from_vec(
        (0..6)
            .map(|i| applied_wrench[i] - bias.as_array()[i])
            .collect::<Vec<f64>>(),
    );

    // Spatial inertia about the body origin: [[I, hx], [-hx, m 1]].
    let im = params.inertia_matrix();
    let mut spatial = Matrix::zeros(6, 6);
    for i in 0..3 {
        for j in 0..3 {
            spatial[(i, j)] = im[(i, j)];
        }
        spatial[(3 + i, 3 + i)] = m;
    }
    let hx = [
        [0.0, -h[2], h[1]],
        [h[2], 0.0, -h[0]],
        [-h[1], h[0], 0.0],
    ];
    for i in 0..3 {
        for j in 0..3 {
            spatial[(i, 3 + j)] = hx[i][j];
            spatial[(3 + i, j)] = -hx[i][j];
        }
    }
    let acc = solve_spd_vec(&spatial, &rhs).map_err(|_| SimFault)?;
    let out: [f64; 6] = core::array::from_fn(|i| acc[i]);
    if out.iter().all(|x| x.is_finite()) {
        Ok(out)
    } else {
        Err(SimFault)
    }
}

/// One forward-Euler step under the true parameters. Thrusts are clamped to
/// the motor limits. Returns the next state together with the body-frame
/// accelerations used for the step.
pub fn step_dynamics(
    model: &QuadModel,
    state: &SimState,
    thrusts: &[f64; 4],
    true_params: &InertialParams,
) -> Result<(SimState, [f64; 6]), SimFault> {
    let u = model.clamp_thrusts(thrusts);
    let wrench = model.wrench_from_thrusts(&u);
    let acc = body_accel(true_params, state, &wrench)?;

    let dt = model.dt;
    let dw = [acc[0], acc[1], acc[2]];
    let dv = [acc[3], acc[4], acc[5]];

    let next = SimState {
        position: add3(
            state.position,
            scale3(state.orientation.apply(state.velocity), dt),
        ),
        orientation: state
            .orientation
            .compose(&Rotation::exp(scale3(state.angular_velocity, dt)))
            .renormalized(),
        velocity: add3(state.velocity, scale3(dv, dt)),
        angular_velocity: add3(state.angular_velocity, scale3(dw, dt)),
    };
    if next.is_finite() {
        Ok((next, acc))
    } else {
        Err(SimFault)
    }
}
