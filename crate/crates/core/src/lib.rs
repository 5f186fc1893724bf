//! Joint and phi-joint mixability for elliptical and log-elliptical marginals.
//!
//! The crate decides mixability from the weighted scale condition, computes
//! center sets in closed form, builds explicit couplings whose aggregate is
//! almost surely constant, and checks all of it numerically: by sampling and
//! goodness of fit, and independently through the rearrangement algorithm.

// `!(x > 0.0)` is how parameter checks reject NaN along with nonpositive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod couplings;
pub mod distributions;
pub mod error;
pub mod generator;
pub mod mixability;
pub mod numeric;
pub mod rearrange;
pub mod rng;
pub mod verify;

pub use distributions::{DistributionSpec, Elliptical1D, LogElliptical1D, LogTwoBump, Support, TwoBump};
pub use error::{MixError, Result};
pub use generator::{CharGenerator, DensityGenerator, Moment};
