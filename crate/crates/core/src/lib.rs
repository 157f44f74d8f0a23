//! Lattice Monte Carlo for loop-erased random walks and loop soups.
//!
//! The crate is organised bottom-up:
//!
//! * [`lattice`]: sites, paths, loop erasure, cut points and ball geometry.
//! * [`walks`]: stopped simple random walks, LERW, random walk bridges and
//!   exact small-domain oracles (return and visit probabilities).
//! * [`soup`]: random walk and Brownian loop soups with intensity bookkeeping.
//! * [`coupling`]: the strong coupling of the two soups, built from coupled
//!   Poisson counts and dyadic quantile-coupled bridges.
//! * [`decompose`]: LERW plus intersecting soup loops versus the SRW trace.
//! * [`analysis`]: quasi-loops, hittability, exponents, box dimension and
//!   cut-point statistics.
//!
//! Every sampler takes an explicit RNG; parallel drivers derive one
//! ChaCha stream per block of samples (see [`rng`]) so results do not depend
//! on the number of worker threads.

pub mod analysis;
pub mod coupling;
pub mod decompose;
mod error;
pub mod io;
pub mod lattice;
pub mod rng;
pub mod soup;
pub mod stats;
pub mod walks;

pub use error::{Error, Result};
pub use lattice::{BoundaryConvention, DiscreteLoop, Domain, LatticePath, PathKind, Site};
pub use stats::{EstimatorReport, ExponentFit};
