//! Online inertial-parameter estimation built around row-action solvers.
//!
//! The crate is split into four layers:
//!
//! - [`linalg`]: minimal dense real linear algebra (containers, products,
//!   SPD solves, 3x3 symmetric eigenvalues).
//! - [`estimators`]: block RLS, block KF, and the Kaczmarz family
//!   (RK, GRK, TARK, TAG-K) behind one step interface.
//! - [`physics`]: the 10-parameter rigid-body vector, Newton-Euler wrench,
//!   single-body regressor, payload composition, and the physical-consistency
//!   safety filter.
//! - [`quadsim`]: a closed-loop quadrotor payload-transfer experiment with a
//!   two-rate LQR / estimator loop.
//!
//! Everything here is `no_std` + `alloc`; IO, CLI, timing, and file formats
//! live in the companion harness crate.

#![no_std]
#![deny(unsafe_code)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod estimators;
pub mod linalg;
pub mod physics;
pub mod quadsim;
pub mod rng;
