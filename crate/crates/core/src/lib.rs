//! Detection of jointly sparse signals observed through compressive
//! measurements at several sensor nodes.
//!
//! The crate is organised bottom-up:
//!
//! * [`specfun`] – Gaussian Q, regularized incomplete gamma, central and
//!   noncentral chi-squared laws, Marcum Q and the cube-root normal
//!   approximations used by the closed-form detection probabilities.
//! * [`model`] – joint-sparse signal ensembles, row-orthonormal sensing
//!   operators and compressed observations under either hypothesis.
//! * [`detector`] – subspace projectors, the projected-energy statistic and
//!   the theoretical false-alarm/detection probabilities and thresholds.
//! * [`planner`] – the smallest number of known support indices that meets a
//!   detection target at a false-alarm budget.
//! * [`omp`] – OMP, simultaneous OMP and the two distributed detectors with
//!   support fusion, plus first-iteration success probabilities.
//! * [`harness`] – seeded Monte Carlo experiments, ROC tables, CSV output and
//!   the invariant suite behind the `validate` command.

pub mod detector;
pub mod error;
pub mod harness;
pub mod model;
pub mod omp;
pub mod oracle;
pub mod planner;
pub mod rng;
pub mod specfun;

pub use error::{Error, Result};
