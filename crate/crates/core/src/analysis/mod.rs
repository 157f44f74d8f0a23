//! Quasi-loops, hittability, exponent estimates, box dimension and cut
//! points of loop-erased walks.
//!
//! Balls here are closed, `B(v, r) = { |x - v| <= r }`, and walks stop at
//! their first site outside.

mod cuts;
mod dimension;
mod exponents;
mod hittability;
mod quasi;

pub use cuts::{cut_point_count, cut_point_stats, CutPointReport};
pub use dimension::{box_dimension, dyadic_scales, lerw_box_dimension, occupied_boxes, LerwDimension};
pub use exponents::{
    escape_curve, escape_exponent, estimate_beta, estimate_escape, lerw_lengths, EscapePoint, BOOTSTRAP_RESAMPLES,
};
pub use hittability::{hittability_scan, HittabilityConfig, HittabilityReport};
pub use quasi::{
    has_quasi_loop, quasi_loop_curve, quasi_loop_probability, quasi_loop_query, scan_quasi_loops, QuasiLoopPoint,
    QuasiLoopQuery,
};

/// Range carried for the non-intersection exponent `xi`; nothing estimates it.
pub const XI_INTERVAL: (f64, f64) = (0.5, 1.0);
