//! Rigid-body inertial-parameter machinery.
//!
//! A single body is described by the 10-vector
//! `[m, m*cx, m*cy, m*cz, Ixx, Ixy, Ixz, Iyy, Iyz, Izz]` with the inertia
//! tensor taken about the body-frame origin. The net wrench is linear in
//! these parameters, which is what makes the regressor form possible.

use alloc::vec::Vec;
use core::fmt;

use libm::{acos, cos, fabs, sin, sqrt};

use crate::linalg::{sym_eig3, Matrix, Vector};

pub const PARAMS_PER_BODY: usize = 10;

#[derive(Debug, Clone, PartialEq)]
pub enum PhysicsError {
    /// Payload mass must be non-negative.
    NegativePayloadMass,
}

impl fmt::Display for PhysicsError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PhysicsError::NegativePayloadMass => write!(f, "payload mass must be non-negative"),
        }
    }
}

impl core::error::Error for PhysicsError {}

// ---------------------------------------------------------------------------
// 3-vector helpers
// ---------------------------------------------------------------------------

pub type Vec3 = [f64; 3];

pub fn cross(a: Vec3, b: Vec3) -> Vec3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

pub fn add3(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

pub fn sub3(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub fn scale3(a: Vec3, c: f64) -> Vec3 {
    [c * a[0], c * a[1], c * a[2]]
}

pub fn dot3(a: Vec3, b: Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub fn norm3(a: Vec3) -> f64 {
    sqrt(dot3(a, a))
}

// ---------------------------------------------------------------------------
// Rotations
// ---------------------------------------------------------------------------

/// Rotation matrix (body-to-world), row-major 3x3.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rotation {
    m: [[f64; 3]; 3],
}

impl Rotation {
    pub fn identity() -> Self {
        Rotation {
            m: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
        }
    }

    pub fn from_rows(m: [[f64; 3]; 3]) -> Self {
        Rotation { m }
    }

    /// Rotation whose columns are the given (orthonormal) basis vectors.
    pub fn from_columns(x: Vec3, y: Vec3, z: Vec3) -> Self {
        Rotation {
            m: [
                [x[0], y[0], z[0]],
                [x[1], y[1], z[1]],
                [x[2], y[2], z[2]],
            ],
        }
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.m[i][j]
    }

    /// Rodrigues' formula: rotation by the axis-angle vector `w`.
    pub fn exp(w: Vec3) -> Self {
        let angle = norm3(w);
        if angle < 1e-12 {
            // First-order map is exact to this tolerance.
            let mut r = Rotation::identity();
            r.m[0][1] -= w[2];
            r.m[0][2] += w[1];
            r.m[1][0] += w[2];
            r.m[1][2] -= w[0];
            r.m[2][0] -= w[1];
            r.m[2][1] += w[0];
            return r.renormalized();
        }
        let axis = scale3(w, 1.0 / angle);
        let (s, c) = (sin(angle), cos(angle));
        let mut m = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                let kij = axis[i] * axis[j];
                m[i][j] = c * if i == j { 1.0 } else { 0.0 } + (1.0 - c) * kij;
            }
        }
        m[0][1] -= s * axis[2];
        m[0][2] += s * axis[1];
        m[1][0] += s * axis[2];
        m[1][2] -= s * axis[0];
        m[2][0] -= s * axis[1];
        m[2][1] += s * axis[0];
        Rotation { m }
    }

    /// Axis-angle vector of this rotation (inverse of [`Rotation::exp`]).
    pub fn log(&self) -> Vec3 {
        let tr = self.m[0][0] + self.m[1][1] + self.m[2][2];
        let c = ((tr - 1.0) / 2.0).clamp(-1.0, 1.0);
        let angle = acos(c);
        let skew = [
            self.m[2][1] - self.m[1][2],
            self.m[0][2] - self.m[2][0],
            self.m[1][0] - self.m[0][1],
        ];
        if angle < 1e-9 {
            return scale3(skew, 0.5);
        }
        if core::f64::consts::PI - angle < 1e-6 {
            // Near pi the skew part vanishes; recover the axis from the
            // symmetric part R + I = 2(aa^T) - ... using the largest diagonal.
            let mut axis = [0.0; 3];
            let d = [
                (self.m[0][0] + 1.0) / 2.0,
                (self.m[1][1] + 1.0) / 2.0,
                (self.m[2][2] + 1.0) / 2.0,
            ];
            let k = if d[0] >= d[1] && d[0] >= d[2] {
                0
            } else if d[1] >= d[2] {
                1
            } else {
                2
            };
            axis[k] = sqrt(d[k].max(0.0));
            for j in 0..3 {
                if j != k {
                    axis[j] = (self.m[k][j] + self.m[j][k]) / (4.0 * axis[k]);
                }
            }
            let sign = if skew[k] >= 0.0 { 1.0 } else { -1.0 };
            return scale3(axis, sign * angle / norm3(axis));
        }
        scale3(skew, angle / (2.0 * sin(angle)))
    }

    /// Body-frame vector expressed in the world frame.
    pub fn apply(&self, v: Vec3) -> Vec3 {
        [
            dot3(self.m[0], v),
            dot3(self.m[1], v),
            dot3(self.m[2], v),
        ]
    }

    /// World-frame vector expressed in the body frame (`R^T v`).
    pub fn apply_inverse(&self, v: Vec3) -> Vec3 {
        [
            self.m[0][0] * v[0] + self.m[1][0] * v[1] + self.m[2][0] * v[2],
            self.m[0][1] * v[0] + self.m[1][1] * v[1] + self.m[2][1] * v[2],
            self.m[0][2] * v[0] + self.m[1][2] * v[1] + self.m[2][2] * v[2],
        ]
    }

    pub fn compose(&self, other: &Rotation) -> Rotation {
        let mut m = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                m[i][j] = (0..3).map(|k| self.m[i][k] * other.m[k][j]).sum();
            }
        }
        Rotation { m }
    }

    pub fn transpose(&self) -> Rotation {
        let mut m = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                m[i][j] = self.m[j][i];
            }
        }
        Rotation { m }
    }

    /// Gram-Schmidt re-orthonormalization, row by row.
    pub fn renormalized(&self) -> Rotation {
        let mut r0 = self.m[0];
        let n0 = norm3(r0);
        r0 = scale3(r0, 1.0 / n0);
        let mut r1 = sub3(self.m[1], scale3(r0, dot3(self.m[1], r0)));
        let n1 = norm3(r1);
        r1 = scale3(r1, 1.0 / n1);
        let r2 = cross(r0, r1);
        Rotation { m: [r0, r1, r2] }
    }

    pub fn orthonormality_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                let g = dot3(self.m[i], self.m[j]) - if i == j { 1.0 } else { 0.0 };
                worst = worst.max(fabs(g));
            }
        }
        worst
    }

    pub fn is_finite(&self) -> bool {
        self.m.iter().flatten().all(|x| x.is_finite())
    }

    /// Unit quaternion `[w, x, y, z]` for this rotation.
    pub fn to_quaternion(&self) -> [f64; 4] {
        let m = &self.m;
        let tr = m[0][0] + m[1][1] + m[2][2];
        if tr > 0.0 {
            let s = sqrt(tr + 1.0) * 2.0;
            [
                0.25 * s,
                (m[2][1] - m[1][2]) / s,
                (m[0][2] - m[2][0]) / s,
                (m[1][0] - m[0][1]) / s,
            ]
        } else if m[0][0] > m[1][1] && m[0][0] > m[2][2] {
            let s = sqrt(1.0 + m[0][0] - m[1][1] - m[2][2]) * 2.0;
            [
                (m[2][1] - m[1][2]) / s,
                0.25 * s,
                (m[0][1] + m[1][0]) / s,
                (m[0][2] + m[2][0]) / s,
            ]
        } else if m[1][1] > m[2][2] {
            let s = sqrt(1.0 + m[1][1] - m[0][0] - m[2][2]) * 2.0;
            [
                (m[0][2] - m[2][0]) / s,
                (m[0][1] + m[1][0]) / s,
                0.25 * s,
                (m[1][2] + m[2][1]) / s,
            ]
        } else {
            let s = sqrt(1.0 + m[2][2] - m[0][0] - m[1][1]) * 2.0;
            [
                (m[1][0] - m[0][1]) / s,
                (m[0][2] + m[2][0]) / s,
                (m[1][2] + m[2][1]) / s,
                0.25 * s,
            ]
        }
    }
}

// ---------------------------------------------------------------------------
// Inertial parameters
// ---------------------------------------------------------------------------

/// Inertial parameter vector, 10 entries per body.
///
/// Ordering per body: `[m, m*cx, m*cy, m*cz, Ixx, Ixy, Ixz, Iyy, Iyz, Izz]`,
/// inertia about the body-frame origin.
#[derive(Debug, Clone, PartialEq)]
pub struct InertialParams {
    theta: Vector,
}

impl InertialParams {
    pub fn from_vector(theta: Vector) -> Self {
        assert!(
            theta.len() % PARAMS_PER_BODY == 0 && !theta.is_empty(),
            "parameter vector length must be a positive multiple of 10"
        );
        InertialParams { theta }
    }

    /// Single body from mass, center of mass, and inertia about the origin
    /// packed as `[Ixx, Ixy, Ixz, Iyy, Iyz, Izz]`.
    pub fn single_body(mass: f64, com: Vec3, inertia_origin: [f64; 6]) -> Self {
        let mut v = Vec::with_capacity(PARAMS_PER_BODY);
        v.push(mass);
        v.extend_from_slice(&scale3(com, mass));
        v.extend_from_slice(&inertia_origin);
        InertialParams {
            theta: Vector::from_vec(v),
        }
    }

    pub fn theta(&self) -> &Vector {
        &self.theta
    }

    pub fn len(&self) -> usize {
        self.theta.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn num_bodies(&self) -> usize {
        self.theta.len() / PARAMS_PER_BODY
    }

    pub fn mass(&self) -> f64 {
        self.theta[0]
    }

    /// First moment of mass `m*c`.
    pub fn first_moment(&self) -> Vec3 {
        [self.theta[1], self.theta[2], self.theta[3]]
    }

    pub fn center_of_mass(&self) -> Vec3 {
        scale3(self.first_moment(), 1.0 / self.mass())
    }

    /// Inertia tensor about the body-frame origin as a symmetric 3x3 matrix.
    pub fn inertia_matrix(&self) -> Matrix {
        let t = &self.theta;
        Matrix::from_rows(&[
            &[t[4], t[5], t[6]],
            &[t[5], t[7], t[8]],
            &[t[6], t[8], t[9]],
        ])
    }

    fn inertia_times(&self, w: Vec3) -> Vec3 {
        let t = &self.theta;
        [
            t[4] * w[0] + t[5] * w[1] + t[6] * w[2],
            t[5] * w[0] + t[7] * w[1] + t[8] * w[2],
            t[6] * w[0] + t[8] * w[1] + t[9] * w[2],
        ]
    }
}

// ---------------------------------------------------------------------------
// Body state and wrench
// ---------------------------------------------------------------------------

/// Kinematic state of one rigid body, body-frame twist convention
/// (angular first, then linear).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BodyState {
    /// Body-to-world rotation.
    pub orientation: Rotation,
    /// `[wx, wy, wz, vx, vy, vz]` in the body frame.
    pub velocity: [f64; 6],
    /// Body-frame derivative of `velocity`.
    pub acceleration: [f64; 6],
    /// Gravity in the world frame, m/s^2.
    pub gravity: Vec3,
}

impl BodyState {
    pub fn angular_velocity(&self) -> Vec3 {
        [self.velocity[0], self.velocity[1], self.velocity[2]]
    }

    pub fn linear_velocity(&self) -> Vec3 {
        [self.velocity[3], self.velocity[4], self.velocity[5]]
    }

    pub fn angular_accel(&self) -> Vec3 {
        [
            self.acceleration[0],
            self.acceleration[1],
            self.acceleration[2],
        ]
    }

    pub fn linear_accel(&self) -> Vec3 {
        [
            self.acceleration[3],
            self.acceleration[4],
            self.acceleration[5],
        ]
    }

    /// Gravity expressed in the body frame.
    pub fn gravity_body(&self) -> Vec3 {
        self.orientation.apply_inverse(self.gravity)
    }
}

/// Net wrench about the body-frame origin, body frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Wrench {
    pub torque: Vec3,
    pub force: Vec3,
}

impl Wrench {
    pub fn zero() -> Self {
        Wrench {
            torque: [0.0; 3],
            force: [0.0; 3],
        }
    }

    /// `[torque, force]` stacked as a 6-array.
    pub fn as_array(&self) -> [f64; 6] {
        [
            self.torque[0],
            self.torque[1],
            self.torque[2],
            self.force[0],
            self.force[1],
            self.force[2],
        ]
    }
}

// ---------------------------------------------------------------------------
// Newton-Euler and the regressor
// ---------------------------------------------------------------------------

/// Net applied wrench from single-rigid-body Newton-Euler dynamics, about
/// the body-frame origin, including gyroscopic and gravity terms.
pub fn newton_euler(state: &BodyState, params: &InertialParams) -> Wrench {
    assert_eq!(params.len(), PARAMS_PER_BODY, "single-body params expected");
    let m = params.mass();
    let h = params.first_moment();
    let w = state.angular_velocity();
    let v = state.linear_velocity();
    let dw = state.angular_accel();
    let dv_g = sub3(state.linear_accel(), state.gravity_body());

    // Linear momentum in the body frame: m v + w x h.
    let p_lin = add3(scale3(v, m), cross(w, h));
    let force = add3(add3(scale3(dv_g, m), cross(dw, h)), cross(w, p_lin));

    let iw = params.inertia_times(w);
    let torque = add3(
        add3(params.inertia_times(dw), cross(h, dv_g)),
        add3(cross(w, iw), add3(cross(w, cross(h, v)), cross(v, cross(w, h)))),
    );
    Wrench { torque, force }
}

/// The 6x10 single-body regressor: `regressor_block(s) * theta` equals the
/// Newton-Euler wrench `[torque; force]` for every parameter vector.
pub fn regressor_block(state: &BodyState) -> Matrix {
    let w = state.angular_velocity();
    let v = state.linear_velocity();
    let dw = state.angular_accel();
    let dv_g = sub3(state.linear_accel(), state.gravity_body());

    let mut a = Matrix::zeros(6, PARAMS_PER_BODY);

    // Mass column: force only, including the w x (m v) coupling.
    let mass_force = add3(dv_g, cross(w, v));
    for i in 0..3 {
        a[(3 + i, 0)] = mass_force[i];
    }

    // First-moment columns.
    for (j, e) in [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]
        .into_iter()
        .enumerate()
    {
        let fcol = add3(cross(dw, e), cross(w, cross(w, e)));
        let ncol = add3(
            cross(e, dv_g),
            add3(cross(w, cross(e, v)), cross(v, cross(w, e))),
        );
        for i in 0..3 {
            a[(i, 1 + j)] = ncol[i];
            a[(3 + i, 1 + j)] = fcol[i];
        }
    }

    // Inertia columns: symmetric basis elements in the order
    // [Ixx, Ixy, Ixz, Iyy, Iyz, Izz].
    const INERTIA_BASIS: [(usize, usize); 6] = [(0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2)];
    for (k, &(p, q)) in INERTIA_BASIS.iter().enumerate() {
        let apply = |x: Vec3| -> Vec3 {
            let mut y = [0.0; 3];
            y[p] += x[q];
            if p != q {
                y[q] += x[p];
            }
            y
        };
        let ew = apply(w);
        let ncol = add3(apply(dw), cross(w, ew));
        for i in 0..3 {
            a[(i, 4 + k)] = ncol[i];
        }
    }

    a
}

// ---------------------------------------------------------------------------
// Payload composition
// ---------------------------------------------------------------------------

/// Add a point-mass payload at `offset` from the body-frame origin.
///
/// Mass adds, the first moment shifts by `m_p * offset`, and the inertia
/// picks up the point-mass parallel-axis term
/// `m_p * (|offset|^2 * I - offset offset^T)`.
pub fn compose_payload(
    base: &InertialParams,
    payload_mass: f64,
    offset: Vec3,
) -> Result<InertialParams, PhysicsError> {
    assert_eq!(base.len(), PARAMS_PER_BODY, "single-body params expected");
    if payload_mass < 0.0 {
        return Err(PhysicsError::NegativePayloadMass);
    }
    let t = base.theta();
    let o2 = dot3(offset, offset);
    let mp = payload_mass;
    let theta = Vector::from_vec(alloc::vec![
        t[0] + mp,
        t[1] + mp * offset[0],
        t[2] + mp * offset[1],
        t[3] + mp * offset[2],
        t[4] + mp * (o2 - offset[0] * offset[0]),
        t[5] + mp * (-offset[0] * offset[1]),
        t[6] + mp * (-offset[0] * offset[2]),
        t[7] + mp * (o2 - offset[1] * offset[1]),
        t[8] + mp * (-offset[1] * offset[2]),
        t[9] + mp * (o2 - offset[2] * offset[2]),
    ]);
    Ok(InertialParams::from_vector(theta))
}

// ---------------------------------------------------------------------------
// Safety filter
// ---------------------------------------------------------------------------

/// Bounds for the physical-consistency filter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SafetyLimits {
    /// Center-of-mass radius bound, m.
    pub arm_length: f64,
    /// Inertia eigenvalue magnitude bound, kg m^2.
    pub alpha: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RejectReason {
    NonpositiveMass,
    CenterOfMassOutOfReach,
    InertiaNotPositiveDefinite,
    InertiaEigenvalueTooLarge,
}

impl fmt::Display for RejectReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            RejectReason::NonpositiveMass => "mass not positive",
            RejectReason::CenterOfMassOutOfReach => "center of mass beyond arm length",
            RejectReason::InertiaNotPositiveDefinite => "inertia not positive definite",
            RejectReason::InertiaEigenvalueTooLarge => "inertia eigenvalue exceeds bound",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SafetyVerdict {
    Accept,
    Reject(RejectReason),
}

impl SafetyVerdict {
    pub fn is_accept(&self) -> bool {
        matches!(self, SafetyVerdict::Accept)
    }
}

/// Physical-consistency gate on a single-body estimate: positive mass,
/// center of mass within the arm length, positive definite inertia, and
/// bounded inertia eigenvalues. The first failed condition is reported.
pub fn safety_check(params: &InertialParams, limits: &SafetyLimits) -> SafetyVerdict {
    assert_eq!(params.len(), PARAMS_PER_BODY, "single-body params expected");
    let m = params.mass();
    if !(m > 0.0) || !m.is_finite() {
        return SafetyVerdict::Reject(RejectReason::NonpositiveMass);
    }
    let com = params.center_of_mass();
    if !(norm3(com) <= limits.arm_length) {
        return SafetyVerdict::Reject(RejectReason::CenterOfMassOutOfReach);
    }
    let eigs = match sym_eig3(&params.inertia_matrix()) {
        Ok(e) => e,
        Err(_) => return SafetyVerdict::Reject(RejectReason::InertiaNotPositiveDefinite),
    };
    if !(eigs[0] > 0.0) {
        return SafetyVerdict::Reject(RejectReason::InertiaNotPositiveDefinite);
    }
    if !(fabs(eigs[2]) <= limits.alpha) {
        return SafetyVerdict::Reject(RejectReason::InertiaEigenvalueTooLarge);
    }
    SafetyVerdict::Accept
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::mat_vec;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    const G: Vec3 = [0.0, 0.0, -9.81];

    fn rand_vec3(rng: &mut StdRng, s: f64) -> Vec3 {
        [
            rng.random_range(-s..s),
            rng.random_range(-s..s),
            rng.random_range(-s..s),
        ]
    }

    fn rand_state(rng: &mut StdRng) -> BodyState {
        let axis = rand_vec3(rng, 1.0);
        BodyState {
            orientation: Rotation::exp(axis),
            velocity: core::array::from_fn(|_| rng.random_range(-2.0..2.0)),
            acceleration: core::array::from_fn(|_| rng.random_range(-5.0..5.0)),
            gravity: G,
        }
    }

    fn rand_params(rng: &mut StdRng) -> InertialParams {
        InertialParams::from_vector(Vector::from_vec(
            (0..10).map(|_| rng.random_range(-1.0..1.0)).collect(),
        ))
    }

    fn valid_params(rng: &mut StdRng) -> InertialParams {
        // Physically valid: m > 0, inertia about CoM PD, shifted to origin.
        let m = rng.random_range(0.02..0.1);
        let com = rand_vec3(rng, 0.01);
        let d: Vec3 = [
            rng.random_range(1e-5..1e-4),
            rng.random_range(1e-5..1e-4),
            rng.random_range(1e-5..1e-4),
        ];
        let o2 = dot3(com, com);
        InertialParams::single_body(
            m,
            com,
            [
                d[0] + m * (o2 - com[0] * com[0]),
                -m * com[0] * com[1],
                -m * com[0] * com[2],
                d[1] + m * (o2 - com[1] * com[1]),
                -m * com[1] * com[2],
                d[2] + m * (o2 - com[2] * com[2]),
            ],
        )
    }

    #[test]
    fn point_mass_pure_linear_accel() {
        let st = BodyState {
            orientation: Rotation::identity(),
            velocity: [0.0; 6],
            acceleration: [0.0, 0.0, 0.0, 1.0, 2.0, 3.0],
            gravity: G,
        };
        let p = InertialParams::single_body(2.0, [0.0; 3], [0.0; 6]);
        let w = newton_euler(&st, &p);
        assert_eq!(w.torque, [0.0; 3]);
        assert_eq!(w.force, [2.0, 4.0, 2.0 * (3.0 + 9.81)]);
    }

    #[test]
    fn zero_state_static_weight() {
        let st = BodyState {
            orientation: Rotation::identity(),
            velocity: [0.0; 6],
            acceleration: [0.0; 6],
            gravity: G,
        };
        let p = InertialParams::single_body(0.5, [0.1, 0.0, 0.0], [1e-4, 0.0, 0.0, 1e-4, 0.0, 1e-4]);
        let w = newton_euler(&st, &p);
        // Force cancels weight; torque cancels the gravity moment about the origin.
        assert!((w.force[2] - 0.5 * 9.81).abs() < 1e-12);
        let h = p.first_moment();
        let expect = cross(h, [0.0, 0.0, 9.81]);
        for i in 0..3 {
            assert!((w.torque[i] - expect[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn wrench_linear_in_params() {
        let mut rng = StdRng::seed_from_u64(5);
        let st = rand_state(&mut rng);
        let p = rand_params(&mut rng);
        let p2 = InertialParams::from_vector(p.theta().scale(2.0));
        let w1 = newton_euler(&st, &p);
        let w2 = newton_euler(&st, &p2);
        for i in 0..3 {
            assert!((w2.torque[i] - 2.0 * w1.torque[i]).abs() < 1e-12);
            assert!((w2.force[i] - 2.0 * w1.force[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn regressor_zero_motion_zero_gravity() {
        let st = BodyState {
            orientation: Rotation::identity(),
            velocity: [0.0; 6],
            acceleration: [0.0; 6],
            gravity: [0.0; 3],
        };
        assert_eq!(regressor_block(&st).frobenius_norm_sq(), 0.0);
    }

    #[test]
    fn regressor_static_hover_sparsity() {
        let st = BodyState {
            orientation: Rotation::identity(),
            velocity: [0.0; 6],
            acceleration: [0.0; 6],
            gravity: G,
        };
        let a = regressor_block(&st);
        for i in 0..6 {
            for j in 0..10 {
                let v = a[(i, j)];
                let force_row = i >= 3;
                let allowed = if force_row { j == 0 } else { (1..4).contains(&j) };
                if !allowed {
                    assert_eq!(v, 0.0, "unexpected nonzero at ({i},{j})");
                }
            }
        }
        // Mass column carries weight; first-moment columns carry the moment.
        assert!((a[(5, 0)] - 9.81).abs() < 1e-12);
    }

    #[test]
    fn regressor_matches_newton_euler_oracle() {
        let mut rng = StdRng::seed_from_u64(9);
        for _ in 0..10_000 {
            let st = rand_state(&mut rng);
            let p = rand_params(&mut rng);
            let a = regressor_block(&st);
            let pred = mat_vec(&a, p.theta());
            let truth = newton_euler(&st, &p).as_array();
            let scale = 1.0 + truth.iter().map(|x| x * x).sum::<f64>().sqrt();
            for i in 0..6 {
                assert!(
                    (pred[i] - truth[i]).abs() <= 1e-10 * scale,
                    "row {i}: {} vs {}",
                    pred[i],
                    truth[i]
                );
            }
        }
    }

    #[test]
    fn compose_zero_payload_identity() {
        let base = InertialParams::single_body(0.03, [0.0; 3], [1e-5, 0.0, 0.0, 1e-5, 0.0, 2e-5]);
        let out = compose_payload(&base, 0.0, [0.1, 0.2, 0.3]).unwrap();
        assert_eq!(out, base);
    }

    #[test]
    fn compose_parallel_axis_diag() {
        let base = InertialParams::single_body(1.0, [0.0; 3], [0.0; 6]);
        let d = 0.2;
        let out = compose_payload(&base, 0.5, [d, 0.0, 0.0]).unwrap();
        let i = out.inertia_matrix();
        assert!((i[(0, 0)] - 0.0).abs() < 1e-15);
        assert!((i[(1, 1)] - 0.5 * d * d).abs() < 1e-15);
        assert!((i[(2, 2)] - 0.5 * d * d).abs() < 1e-15);
        assert_eq!(i[(0, 1)], 0.0);
    }

    #[test]
    fn compose_superposition_and_commutativity() {
        let mut rng = StdRng::seed_from_u64(21);
        let base = valid_params(&mut rng);
        let st = rand_state(&mut rng);
        let o1 = rand_vec3(&mut rng, 0.05);
        let o2 = rand_vec3(&mut rng, 0.05);
        let ab = compose_payload(&compose_payload(&base, 0.01, o1).unwrap(), 0.02, o2).unwrap();
        let ba = compose_payload(&compose_payload(&base, 0.02, o2).unwrap(), 0.01, o1).unwrap();
        for k in 0..10 {
            assert!((ab.theta()[k] - ba.theta()[k]).abs() < 1e-12);
        }
        // Composite wrench equals the sum of individual body wrenches.
        let w_comp = newton_euler(&st, &ab);
        let zero = InertialParams::single_body(0.0, [0.0; 3], [0.0; 6]);
        let p1 = compose_payload(&zero, 0.01, o1).unwrap();
        let p2 = compose_payload(&zero, 0.02, o2).unwrap();
        let wb = newton_euler(&st, &base);
        let w1 = newton_euler(&st, &p1);
        let w2 = newton_euler(&st, &p2);
        for i in 0..3 {
            let t = wb.torque[i] + w1.torque[i] + w2.torque[i];
            let f = wb.force[i] + w1.force[i] + w2.force[i];
            assert!((w_comp.torque[i] - t).abs() < 1e-12);
            assert!((w_comp.force[i] - f).abs() < 1e-12);
        }
    }

    #[test]
    fn compose_rejects_negative_mass() {
        let base = InertialParams::single_body(1.0, [0.0; 3], [0.0; 6]);
        assert_eq!(
            compose_payload(&base, -0.1, [0.0; 3]),
            Err(PhysicsError::NegativePayloadMass)
        );
    }

    #[test]
    fn safety_check_examples() {
        let limits = SafetyLimits {
            arm_length: 0.046,
            alpha: 1e-3,
        };
        let bad_mass =
            InertialParams::single_body(-0.1, [0.0; 3], [1e-5, 0.0, 0.0, 1e-5, 0.0, 1e-5]);
        assert_eq!(
            safety_check(&bad_mass, &limits),
            SafetyVerdict::Reject(RejectReason::NonpositiveMass)
        );

        let nominal =
            InertialParams::single_body(0.033, [0.0; 3], [1.4e-5, 0.0, 0.0, 1.4e-5, 0.0, 2.2e-5]);
        assert!(safety_check(&nominal, &limits).is_accept());

        let neg_eig =
            InertialParams::single_body(0.033, [0.0; 3], [-1e-4, 0.0, 0.0, 1e-5, 0.0, 1e-5]);
        assert_eq!(
            safety_check(&neg_eig, &limits),
            SafetyVerdict::Reject(RejectReason::InertiaNotPositiveDefinite)
        );

        let huge =
            InertialParams::single_body(0.033, [0.0; 3], [1.0, 0.0, 0.0, 1e-5, 0.0, 1e-5]);
        assert_eq!(
            safety_check(&huge, &limits),
            SafetyVerdict::Reject(RejectReason::InertiaEigenvalueTooLarge)
        );

        let far_com =
            InertialParams::single_body(0.033, [1.0, 0.0, 0.0], [1e-5, 0.0, 0.0, 1e-5, 0.0, 1e-5]);
        assert_eq!(
            safety_check(&far_com, &limits),
            SafetyVerdict::Reject(RejectReason::CenterOfMassOutOfReach)
        );
    }

    // Re-expressing the body frame by a rotation Q transforms the wrench by Q.
    #[test]
    fn frame_covariance() {
        let mut rng = StdRng::seed_from_u64(33);
        for _ in 0..100 {
            let st = rand_state(&mut rng);
            let p = rand_params(&mut rng);
            let q = Rotation::exp(rand_vec3(&mut rng, 2.0));

            // State in the new body frame B' with x_{B'} = Q x_B.
            let rot = |v: Vec3| q.apply(v);
            let st2 = BodyState {
                orientation: st.orientation.compose(&q.transpose()),
                velocity: {
                    let w = rot(st.angular_velocity());
                    let v = rot(st.linear_velocity());
                    [w[0], w[1], w[2], v[0], v[1], v[2]]
                },
                acceleration: {
                    let dw = rot(st.angular_accel());
                    let dv = rot(st.linear_accel());
                    [dw[0], dw[1], dw[2], dv[0], dv[1], dv[2]]
                },
                gravity: st.gravity,
            };
            // Parameters in the new frame: h' = Qh, I' = Q I Q^T.
            let h2 = rot(p.first_moment());
            let i_old = p.inertia_matrix();
            let qm = Matrix::from_fn(3, 3, |i, j| q.entry(i, j));
            let i_new = qm.mat_mul(&i_old).mat_mul(&qm.transpose());
            let p2 = InertialParams::from_vector(Vector::from_vec(alloc::vec![
                p.mass(),
                h2[0],
                h2[1],
                h2[2],
                i_new[(0, 0)],
                i_new[(0, 1)],
                i_new[(0, 2)],
                i_new[(1, 1)],
                i_new[(1, 2)],
                i_new[(2, 2)],
            ]));

            let w1 = newton_euler(&st, &p);
            let w2 = newton_euler(&st2, &p2);
            let t_rot = rot(w1.torque);
            let f_rot = rot(w1.force);
            let scale = 1.0 + norm3(w1.torque).max(norm3(w1.force));
            for i in 0..3 {
                assert!((w2.torque[i] - t_rot[i]).abs() <= 1e-10 * scale);
                assert!((w2.force[i] - f_rot[i]).abs() <= 1e-10 * scale);
            }
        }
    }

    #[test]
    fn rotation_exp_log_roundtrip() {
        let mut rng = StdRng::seed_from_u64(41);
        for _ in 0..500 {
            // Keep |w| < pi so the log branch is unique.
            let w = rand_vec3(&mut rng, 1.7);
            let r = Rotation::exp(w);
            assert!(r.orthonormality_defect() < 1e-12);
            let w2 = r.log();
            for i in 0..3 {
                assert!((w[i] - w2[i]).abs() < 1e-9, "{w:?} vs {w2:?}");
            }
        }
    }
}
