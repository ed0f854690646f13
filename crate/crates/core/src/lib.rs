//! Market-instability indicators built on the emerging eigenspectrum of
//! power-mapped rolling correlation matrices.
//!
//! The crate is `no_std` (it needs `alloc`) and contains only the numerical
//! pipeline. File formats, the CLI and parallel scheduling live in the
//! `emspec` crate.
//!
//! Pipeline overview:
//!
//! 1. [`panel`]: aligned price panels and log returns.
//! 2. [`corr`]: Pearson correlation over rolling epochs of `M` days.
//! 3. [`spectrum`]: power map `c -> sign(c)|c|^(1+eps)`, symmetric
//!    eigendecomposition and the emerging/normal split.
//! 4. [`indicators`]: per-epoch `r(t)`, `mu(t)`, `lambda_min(t)`, `lambda_max(t)`.
//! 5. [`modetest`]: Silverman critical-bandwidth test on the lower half of
//!    the emerging spectrum.
//! 6. [`lagreg`]: rolling regression of `mu(t)` on lagged `lambda_min`.
//! 7. [`garch`]: GARCH(p,q) filter/simulator and GARCH(1,1) likelihood fit.
#![cfg_attr(not(test), no_std)]
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod corr;
pub mod error;
pub mod garch;
pub mod indicators;
pub mod lagreg;
pub mod linalg;
pub mod modetest;
pub mod optim;
pub mod panel;
pub mod rng;
pub mod spectrum;
pub mod stats;
pub mod synth;

pub use chrono::NaiveDate;
pub use error::{Error, Result};
