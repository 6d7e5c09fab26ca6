//! Experiment harness for the online inertial-parameter estimators:
//! synthetic timing benchmarks, closed-loop episode sweeps, Kaczmarz
//! ablations, estimate-substitution studies, and CSV/JSON reporting.

pub mod ablate;
pub mod bench;
pub mod config;
pub mod episodes;
pub mod pool;
pub mod registry;
pub mod reports;
pub mod substitute;
pub mod sweep;
pub mod synthetic;
pub mod trace_io;

pub mod cli;
