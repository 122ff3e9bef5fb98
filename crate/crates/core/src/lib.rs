//! Thermodynamic formalism for piecewise-monotone interval maps.
//!
//! The crate computes topological pressure two ways (backward-orbit trees
//! and a collocation transfer operator), hyperbolicity verdicts for Hölder
//! potentials, pull-back shrinking and distortion diagnostics, lower bounds
//! from free iterated multivalued function systems, and pressure-function
//! scans with kink detection.

// Negated float comparisons are used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod descriptor;
pub mod error;
pub mod estimate;
pub mod expr;
pub mod imfs;
pub mod map;
pub mod numerics;
pub mod operator;
pub mod potential;
pub mod pullback;
pub mod tolerance;
pub mod tree;

pub use descriptor::{MapDescriptor, PotentialDescriptor};
pub use error::{Error, Result};
pub use estimate::{Method, PressureEstimate};
pub use map::{Branch, IntervalMap, Orientation, Side};
pub use potential::Potential;
