//! Exact machinery for composite labelled structures: truncated power series
//! with rational coefficients, weighted species combinators, Boltzmann and
//! size-conditioned samplers, subexponentiality diagnostics, and the
//! block-stable graph-class pipeline.
//!
//! The crate is `no_std`-compatible (with `alloc`); the companion `gibbs-cli`
//! crate carries IO, file formats, and the command-line driver.
//!
//! Layering, bottom up:
//!
//! * [`series`] — dense truncated power series over exact big rationals,
//!   including the tree fixed-point solvers and support-lattice detection.
//! * [`analytic`] — numeric evaluation with tracked error bounds, radius and
//!   tilt-point estimation.
//! * [`species`] — symbolic weighted-species combinators compiled to
//!   exponential generating functions, plus Boltzmann size laws.
//! * [`structure`] — sampled labelled objects and label-level operations
//!   (uniform relabelling, largest-component removal).
//! * [`sampling`] — Boltzmann samplers, branching-process tree and forest
//!   samplers, rejection and exact size-conditioned samplers.
//! * [`diagnostics`] — coefficient-level checks of the limit statements:
//!   convolution ratios, stopped-sum ratios, fragment laws, moments.
//! * [`graphclass`] — block weights to class model: spans, radii, lattice
//!   constants, smoothness verdicts, and Poisson-mixture graph samplers.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod analytic;
pub mod diagnostics;
pub mod error;
pub mod graphclass;
pub mod numeric;
pub mod sampling;
pub mod series;
pub mod species;
pub mod structure;

pub use error::{Error, Result};
pub use numeric::Approx;
pub use series::{Rat, Series, SupportLattice};
