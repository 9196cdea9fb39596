//! Structural identifiability and unknown-input observability analysis for
//! nonlinear ODE models.

pub mod cli;
pub mod error;
pub mod ident;
pub mod indist;
pub mod liegeo;
pub mod model;
pub mod symexpr;
pub mod uio;

pub use error::{Error, Result};
