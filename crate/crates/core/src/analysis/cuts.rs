//! Cut points of stopped simple random walks.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::lattice::{cut_indices, loop_erase, BoundaryConvention, LatticePath};
use crate::rng::par_blocks;
use crate::stats::EstimatorReport;
use crate::walks::{sample_srw_stopped, WalkConfig};

use super::XI_INTERVAL;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CutPointReport {
    /// Mean number of cut points per walk.
    pub mean: EstimatorReport,
    /// Cut points missing from the walk's loop erasure, summed over walks.
    pub violations: u64,
    /// Documentary range of the non-intersection exponent; the cut-point
    /// set has dimension `2 - xi`.
    pub xi_interval: (f64, f64),
}

/// Cut-point count of `path` over its full length and the number of those
/// cut points that are not sites of its loop erasure.
pub fn cut_point_count(path: &LatticePath) -> Result<(usize, usize)> {
    let cuts = cut_indices(path, path.len())?;
    let erased = loop_erase(path).site_set();
    let missing = cuts.iter().filter(|&&i| !erased.contains(path.site(i))).count();
    Ok((cuts.len(), missing))
}

/// Cut-point counts of walks from the origin to the exit of the closed ball
/// `B(0, n)`, checking each cut point against the loop erasure.
pub fn cut_point_stats(dim: usize, n: i64, samples: u64, seed: u64) -> Result<CutPointReport> {
    if n < 2 {
        return domain("cut-point statistics need n >= 2");
    }
    let cfg = WalkConfig::new(dim, n, seed)?.with_convention(BoundaryConvention::Closed);
    let blocks = par_blocks(seed, samples, |rng, _, count| -> Result<Vec<(usize, usize)>> {
        (0..count).map(|_| cut_point_count(&sample_srw_stopped(&cfg, rng)?)).collect()
    });
    let mut counts = Vec::with_capacity(samples as usize);
    let mut violations = 0u64;
    for b in blocks {
        for (c, v) in b? {
            counts.push(c as f64);
            violations += v as u64;
        }
    }
    let config = format!("cut-points d={dim} n={n} samples={samples} seed={seed}");
    Ok(CutPointReport { mean: EstimatorReport::mean(&counts, &config), violations, xi_interval: XI_INTERVAL })
}
