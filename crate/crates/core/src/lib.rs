//! Quantum state tomography toolkit: state generation, measurement suites,
//! shot sampling, linear-regression, maximum-likelihood and neural-network
//! estimators, and a benchmark harness tying them together.

pub mod bench;
pub mod dnn;
pub mod error;
pub mod linalg;
pub mod lre;
pub mod measure;
pub mod mle;
pub mod qstate;
pub mod sampling;

pub use error::{QstError, Result};
