//! Covert communication over additive noise channels.
//!
//! The crate covers memoryless generalized Gaussian noise `N_p(0, alpha^p)`
//! and Gaussian noise with memory:
//!
//! * [`ggdist`]: densities, moments, entropy, sampling and divergences.
//! * [`decomp`]: the covert input law `X` with `X + Z ~ N_p(0, (beta alpha)^p)`.
//! * [`budget`]: covertness budgets, output scales and square-root-law constants.
//! * [`colored`]: whitening transports between colored and white Gaussian channels.
//! * [`simkit`]: Monte Carlo random coding, information density and warden tests.

// `!(x > 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
pub mod budget;
pub mod colored;
pub mod decomp;
pub mod error;
pub mod ggdist;
pub mod quad;
pub mod rng;
pub mod simkit;
pub mod stats;

pub use nalgebra;

pub use budget::{BudgetResult, BudgetSpec, ChannelKind, LStatus};
pub use colored::{CodeTransport, ColoredNoiseModel};
pub use decomp::{DecompositionSpec, Representation};
pub use error::{Error, Result};
pub use ggdist::{GGParams, GGSample};
pub use simkit::{CodingExperiment, Decoder, ExperimentResult};
