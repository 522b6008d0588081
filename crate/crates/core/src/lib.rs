//! Data-driven inversion of discrete-time LTI systems.
//!
//! Pre-collected input/output data are arranged into block-Hankel matrices;
//! an unknown input sequence is then recovered, with a fixed delay, from
//! the outputs it produced. Built on top: a real-time estimator, a
//! disturbance observer and input-constrained output tracking.
//!
//! All numerics are generic over [`Scalar`] (`f32` or `f64`); the `…64`
//! aliases below are the double-precision types used by the file formats
//! and the command-line tool.

pub mod constrained;
pub mod dob;
pub mod error;
pub mod fixtures;
pub mod hankel;
pub mod inversion;
pub mod io;
pub mod linalg;
pub mod scalar;
pub mod signal;
pub mod system;

pub use constrained::{track, InputBox, SolverConfig, TrackingProblem, TrackingSolution};
pub use dob::{run_dob, verify_transfer_relation, DobConfig, DobRun};
pub use error::{Error, Result};
pub use hankel::{
    generate_pe_input, hankel, hankel_window, pe_check, BankParams, DataBank, HankelMatrix,
    PeCertificate,
};
pub use inversion::{
    complete_input_tail, nullspace_equality_check, recover_input, run_algorithm1, run_algorithm2,
    solve_g, BankSolver, Estimate, GSolution, History, InversionProblem, InverterState,
};
pub use linalg::set_rank_tolerance;
pub use scalar::Scalar;
pub use signal::Signal;
pub use system::{InverseRealization, StateSpaceSystem};

pub type System64 = StateSpaceSystem<f64>;
pub type System32 = StateSpaceSystem<f32>;
pub type Signal64 = Signal<f64>;
pub type Signal32 = Signal<f32>;
pub type DataBank64 = DataBank<f64>;
pub type DataBank32 = DataBank<f32>;
pub type InverseRealization64 = InverseRealization<f64>;
pub type InverterState64 = InverterState<f64>;
pub type DobRun64 = DobRun<f64>;
