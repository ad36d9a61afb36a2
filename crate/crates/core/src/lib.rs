//! Quantitative reconstruction of plate-thinning defects from guided
//! SH-wave reflection spectra.
//!
//! The toolkit has two reconstruction routes that the experiments
//! compare:
//!
//! 1. **wnst** — an analytic wavenumber-space inversion of the
//!    Born-model reflection spectrum ([`physics::wnst_invert`]); fast
//!    but mean-free and sensitive to noise;
//! 2. **convnet** — the same inversion post-processed by a 1D
//!    convolutional network ([`nn`]) trained on
//!    (pre-reconstruction, exact) pairs built by [`dataset`].
//!
//! [`defects`] defines the parametric defect families, [`eval`] the
//! scale-invariant SNR metric and comparison reports, and [`config`] the
//! CLI-facing run configuration.

pub mod config;
pub mod dataset;
pub mod defects;
pub mod error;
pub mod eval;
pub mod nn;
pub mod physics;
pub mod seeding;

pub use error::{Error, Result};
