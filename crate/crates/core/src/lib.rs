//! Parameter identification for dynamical systems.
//!
//! Known functional form: closed-form and iterative least squares recover `θ` from a
//! trajectory ([`estim`]). Unknown form: a multiview encoder/decoder identifies the
//! parameter block shared between views ([`multiview`]), evaluated downstream with
//! partition classification, latent regression and AIPW effect estimation ([`eval`]).

pub mod cli;
pub mod error;
pub mod estim;
pub mod eval;
pub mod json;
pub mod multiview;
pub mod nn;
pub mod rng;
pub mod solver;
pub mod systems;

pub use error::{Error, Result};
