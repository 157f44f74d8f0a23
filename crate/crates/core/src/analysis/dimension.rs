//! Box-counting dimension.

use rustc_hash::FxHashSet;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::lattice::{BoundaryConvention, Domain, LoopEraser};
use crate::rng::par_blocks;
use crate::stats::{EstimatorReport, ExponentFit};
use crate::walks::lerw_into;

/// `2^-k` for `k = from..=to`.
pub fn dyadic_scales(from: i32, to: i32) -> Vec<f64> {
    (from..=to).map(|k| 2f64.powi(-k)).collect()
}

/// Number of cells `prod floor(x_k / scale)` of the origin-anchored grid
/// that contain a point.
pub fn occupied_boxes(points: &[Vec<f64>], scale: f64) -> usize {
    points
        .iter()
        .map(|p| p.iter().map(|&x| (x / scale).floor() as i64).collect::<Vec<i64>>())
        .collect::<FxHashSet<_>>()
        .len()
}

/// Least-squares slope of `log N(scale)` against `log(1 / scale)`.
pub fn box_dimension(points: &[Vec<f64>], scales: &[f64]) -> Result<ExponentFit> {
    if scales.len() < 3 {
        return domain("box counting needs at least three scales");
    }
    if scales.iter().any(|&s| !(s > 0.0 && s.is_finite())) {
        return domain("scales must be positive and finite");
    }
    let lo = scales.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = scales.iter().copied().fold(0.0, f64::max);
    if hi / lo < 10f64.powf(1.5) * (1.0 - 1e-12) {
        return domain(format!("scales span {:.2} decades, need 1.5", (hi / lo).log10()));
    }
    if points.is_empty() {
        return domain("no points to cover");
    }
    let xs: Vec<f64> = scales.iter().map(|s| -s.ln()).collect();
    let ys: Vec<f64> = scales.iter().map(|&s| (occupied_boxes(points, s) as f64).ln()).collect();
    ExponentFit::from_points(&xs, &ys)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LerwDimension {
    pub fits: Vec<ExponentFit>,
    /// Mean slope over samples.
    pub mean: EstimatorReport,
}

/// Box dimension of LERW samples to the exit of the closed ball `B(0, n)`,
/// rescaled by `1 / n`.
pub fn lerw_box_dimension(dim: usize, n: i64, samples: u64, scales: &[f64], seed: u64) -> Result<LerwDimension> {
    let dom = Domain::new(dim, n, BoundaryConvention::Closed)?;
    let blocks = par_blocks(seed, samples, |rng, _, count| -> Result<Vec<ExponentFit>> {
        let mut eraser = LoopEraser::new(dim);
        (0..count)
            .map(|_| {
                lerw_into(&dom, &mut eraser, rng)?;
                let pts: Vec<Vec<f64>> =
                    eraser.flat().chunks_exact(dim).map(|x| x.iter().map(|&c| c as f64 / n as f64).collect()).collect();
                box_dimension(&pts, scales)
            })
            .collect()
    });
    let mut fits = Vec::new();
    for b in blocks {
        fits.extend(b?);
    }
    let slopes: Vec<f64> = fits.iter().map(|f| f.slope).collect();
    let config = format!("lerw-box-dimension d={dim} n={n} samples={samples} scales={scales:?} seed={seed}");
    Ok(LerwDimension { mean: EstimatorReport::mean(&slopes, &config), fits })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scale_requirements() {
        let pts = vec![vec![0.5, 0.5]];
        assert!(box_dimension(&pts, &[0.5, 0.25]).is_err());
        assert!(box_dimension(&pts, &[0.5, 0.25, 0.125]).is_err());
        assert!(box_dimension(&pts, &dyadic_scales(1, 6)).is_ok());
        assert!(box_dimension(&[], &dyadic_scales(1, 6)).is_err());
    }

    #[test]
    fn grid_is_anchored_at_the_origin() {
        let pts = vec![vec![-0.1], vec![0.1]];
        assert_eq!(occupied_boxes(&pts, 1.0), 2);
        assert_eq!(occupied_boxes(&[vec![0.1], vec![0.9]], 1.0), 1);
    }
}
