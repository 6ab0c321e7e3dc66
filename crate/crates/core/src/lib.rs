//! Coupled linear port-Hamiltonian DAEs and two dynamic-iteration schemes
//! for co-simulating them: Jacobi waveform relaxation and a monotone
//! Lions-Mercier operator splitting.
//!
//! ```
//! use phsplit::models::{build, ModelSpec};
//! use phsplit::iteration::contraction_factor;
//!
//! let model = build(&ModelSpec::named("two-mass")).unwrap();
//! let rate = contraction_factor(&model.sys, 0.5, 2.0, 1.5).unwrap();
//! assert!(rate.q < 1.0 && rate.q_star < rate.q);
//! ```

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod coupling;
pub mod error;
pub mod exec;
pub mod io;
pub mod iteration;
pub mod linalg;
pub mod models;
pub mod phdae;
pub mod solver;
pub mod waveform;

pub use error::{Error, Result};
pub use exec::Execution;
pub use linalg::{Matrix, Tolerance, Vector};
pub use phdae::{validate, PHDae, ValidationReport};
pub use solver::{SchemeKind, SolverScheme};
pub use waveform::Waveform;
