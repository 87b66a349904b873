//! Simulation of quantum circuits that interact with a Deutsch-model closed
//! timelike curve (CTC).
//!
//! A chronology-respecting (CR) input `ρ_CR` and a unitary `U` acting on
//! `CR ⊗ CTC` induce the map `ρ ↦ Tr_CR(U (ρ_CR ⊗ ρ) U†)` on the CTC register.
//! [`ctc_engine`] finds its fixed point and produces the output
//! `Tr_CTC(U (ρ_CR ⊗ ρ_CTC) U†)`. On top of that sit builders for CTC-assisted
//! cloning circuits ([`cloning`]), the entangled-input no-signalling
//! experiment ([`nosignal`]), a small circuit description language ([`dsl`])
//! and the command-line driver ([`cli`]).
//!
//! Conventions used throughout:
//! - registers are stored in declaration order, the CTC register last;
//! - basis index `= Σ i_k · (product of later dims)`;
//! - matrices are dense, row-major, `Complex64`.

#![forbid(unsafe_code)]

pub mod cli;
pub mod cloning;
pub mod ctc_engine;
pub mod dsl;
pub mod error;
pub mod fidelity;
pub mod linalg;
pub mod nosignal;
pub mod quantum;
pub mod random;
pub mod sweep;

pub use error::{Error, Result};
pub use linalg::{CMatrix, Complex64, Dims, Tolerances};
