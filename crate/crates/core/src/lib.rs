//! Limiting spectral laws and local-law checks for general MANOVA matrices.
//!
//! * [`laws`]: closed-form densities, support edges, the MANOVA Stieltjes
//!   transform and classical locations.
//! * [`selfconsistent`]: fixed-point solver for the product-matrix Stieltjes
//!   transform and its stability diagnostics.
//! * [`ensembles`]: seeded sampling of `(X, Y)` and their spectra.
//! * [`empirics`]: statistics of one sampled spectrum.
//! * [`harness`]: multi-trial experiments and aggregation.
//! * [`cli`]: plan files, CSV/JSON writers and command dispatch.

pub mod error;
pub mod laws;
pub mod quadrature;
pub mod selfconsistent;
pub mod ensembles;
pub mod empirics;
pub mod harness;
pub mod cli;

pub use error::{Error, Result};
pub use num_complex::Complex64;
