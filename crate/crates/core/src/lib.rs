//! Tests whether α-rescaled, normalized daily return magnitudes of a price
//! index collapse onto the Bramwell-Holdsworth-Pinton (BHP) distribution.
//!
//! The pipeline is:
//!
//! 1. [`returns`]: prices to simple daily returns, split by sign, raised to
//!    the power α and standardized.
//! 2. [`bhp`]: the BHP density evaluated from its characteristic-function
//!    integral over the spin-wave spectrum of an `L x L` periodic lattice,
//!    tabulated once and queried by monotone cubic interpolation.
//! 3. [`ks`]: one-sample Kolmogorov-Smirnov statistic and P value against the
//!    BHP distribution truncated to the observed fluctuation range.
//! 4. [`alpha_scan`]: grid search (plus local bisection) for the α that
//!    maximizes the P value.
//! 5. [`collapse`]: histograms, model overlays, the induced density of raw
//!    returns and the structured report.
//!
//! [`cli`] wires these into the `unifluct` command-line tool.

// `!(x > 0.0)` is used on purpose: it also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod alpha_scan;
pub mod bhp;
pub mod cli;
pub mod collapse;
pub mod error;
pub mod interp;
pub mod ks;
pub mod quadrature;
pub mod returns;

pub use error::{Error, Result};
