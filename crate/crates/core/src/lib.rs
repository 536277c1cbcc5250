//! Bayesian disease mapping with CAR spatial effects.
//!
//! Two model families are supported: the customary internally standardized
//! (IS) Poisson model for relative risks, and a coherent generative (CG)
//! Poisson model for incidence with a logit, complementary log-log or
//! skewed-logit link. Both can carry AR(1) time effects. Relative risks are
//! extracted after fitting, and the crate includes the machinery for
//! replicated simulation studies and hold-out forecast scoring.

pub mod cli;
pub mod error;
pub mod estimators;
pub mod graph;
pub mod metrics;
pub mod model;
pub mod sampler;
pub mod seed;
pub mod simstudy;

pub use error::{Error, Result};
