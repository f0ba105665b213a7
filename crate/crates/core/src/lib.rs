//! Transition probabilities of TASEP and PushASEP as Fredholm determinants,
//! together with independent Markov-chain oracles and an executable check
//! suite for the identities behind the determinant formula.
//!
//! The main entry point is [`fredholm::f_t`], which evaluates
//! `P(X_t(n_j) > a_j, j = 1..m)` for a right-finite initial configuration.

// `!(x > 0.0)` rejects NaN along with the out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod contour;
pub mod dyadic;
pub mod error;
pub mod fredholm;
pub mod generator;
pub mod lattice;
pub mod master;
pub mod mc;
pub mod proof_terms;
pub mod run;
pub mod schutz;
pub mod special;
pub mod verify;
pub mod walk;

pub use config::{ObservationSpec, ParticleConfig};
pub use error::{Error, Result};
pub use lattice::{Clock, KernelFamily, KernelValue, RateParams};
