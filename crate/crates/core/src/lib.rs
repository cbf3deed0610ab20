//! Exponential-stability certificates for linear time-delay systems.
//!
//! The crate assembles Lyapunov-Krasovskii LMI conditions built on the
//! Wirtinger integral inequality, solves them with a small built-in
//! semidefinite solver, synthesizes state-feedback and observer gains, and
//! cross-checks every certificate against a characteristic-root oracle and a
//! time-domain simulator.

pub mod error;
pub mod inequality;
pub mod lmi;
pub mod matrix;
pub mod sdp;
pub mod search;
pub mod sim;
pub mod spectral;
pub mod stability;
pub mod synthesis;
pub mod system;

pub use error::{Error, Result};
pub use lmi::{AffineExpr, LmiProblem, Sense, SignConstraint, StandardForm, VarKind};
pub use matrix::{Mat, SymMat};
pub use sdp::{Solution, SolveStatus, SolverSettings};
pub use stability::{CertifyOutcome, EpsilonProfile, SlackMode, StabilityCertificate};
pub use system::{ControlledSystem, DelaySystem};
