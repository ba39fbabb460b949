//! Analytical and learned execution-time models for 3-D stencils and the
//! fast multipole method, plus the harness that evaluates them.

pub mod analytical;
pub mod bench;
pub mod domain;
pub mod error;
pub mod eval;
pub mod fmm;
pub mod hybrid;
pub mod io;
pub mod ml;
pub mod model;
pub mod repro;
pub mod stencil;

pub use error::{Error, Result};
