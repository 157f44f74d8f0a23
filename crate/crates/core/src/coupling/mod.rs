//! Strong coupling of random walk and Brownian loop soups.
//!
//! Counts at each `(z, n)` are maximally coupled Poisson variables, and each
//! pair of loops shares a coupled bridge: a random walk bridge and a
//! Brownian bridge built from the same uniforms by a dyadic quantile
//! recursion.

mod bridge;
mod soups;

use rand::Rng;
use serde::{Deserialize, Serialize};

pub use bridge::{couple_bridge, couple_bridge_1d, BridgeCoupler, CoupledBridgePair};
pub use soups::{couple_soups, CoupledSoups, CorrespondenceReport, PairRecord, SoupCouplingConfig};

use crate::error::{domain, Result};
use crate::rng::open01;
use crate::stats::{poisson_pmf, poisson_support};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoupledCounts {
    pub n_discrete: u64,
    pub n_brownian: u64,
    pub agreed: bool,
}

impl CoupledCounts {
    fn new(a: u64, b: u64) -> Self {
        CoupledCounts { n_discrete: a, n_brownian: b, agreed: a == b }
    }
}

fn cumulative(p: &[f64]) -> Vec<f64> {
    let mut acc = 0.0;
    p.iter()
        .map(|v| {
            acc += v;
            acc
        })
        .collect()
}

fn invert(cdf: &[f64], u: f64) -> u64 {
    let target = u * cdf.last().copied().unwrap_or(0.0);
    cdf.partition_point(|&c| c < target).min(cdf.len().saturating_sub(1)) as u64
}

/// Maximal coupling of `Poisson(a)` and `Poisson(b)`.
///
/// With probability `1 - TV` both counts equal one draw from the normalised
/// overlap `min(p_a, p_b)`; otherwise they are independent draws from the
/// normalised residuals `p_a - min` and `p_b - min`, whose supports are
/// disjoint, so the counts disagree exactly on that branch.
#[derive(Clone, Debug)]
pub struct PoissonCoupler {
    a: f64,
    b: f64,
    common: Vec<f64>,
    residual_a: Vec<f64>,
    residual_b: Vec<f64>,
    overlap: f64,
    tv: f64,
}

impl PoissonCoupler {
    pub fn new(a: f64, b: f64) -> Result<Self> {
        if !(a >= 0.0 && b >= 0.0 && a.is_finite() && b.is_finite()) {
            return domain(format!("Poisson means ({a}, {b}) must be finite and nonnegative"));
        }
        let len = poisson_support(a.max(b));
        let pa = poisson_pmf(a, len);
        let pb = poisson_pmf(b, len);
        let common: Vec<f64> = pa.iter().zip(&pb).map(|(x, y)| x.min(*y)).collect();
        let ra: Vec<f64> = pa.iter().zip(&common).map(|(x, c)| x - c).collect();
        let rb: Vec<f64> = pb.iter().zip(&common).map(|(x, c)| x - c).collect();
        let overlap: f64 = common.iter().sum();
        // The truncated residual masses differ only by the mass beyond the
        // support; their average is the total-variation distance.
        let tv = 0.5 * (ra.iter().sum::<f64>() + rb.iter().sum::<f64>());
        Ok(PoissonCoupler {
            a,
            b,
            common: cumulative(&common),
            residual_a: cumulative(&ra),
            residual_b: cumulative(&rb),
            overlap,
            tv,
        })
    }

    pub fn means(&self) -> (f64, f64) {
        (self.a, self.b)
    }

    /// Total-variation distance, the disagreement probability.
    pub fn tv(&self) -> f64 {
        self.tv
    }

    /// `P[both counts are 0]`.
    pub fn both_zero(&self) -> f64 {
        self.common[0] / (self.overlap + self.tv)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> CoupledCounts {
        if self.tv <= 0.0 || open01(rng) * (self.overlap + self.tv) < self.overlap {
            let k = invert(&self.common, open01(rng));
            return CoupledCounts::new(k, k);
        }
        CoupledCounts::new(invert(&self.residual_a, open01(rng)), invert(&self.residual_b, open01(rng)))
    }

    /// A draw conditioned on the counts not both being 0.
    pub fn sample_nonzero<R: Rng + ?Sized>(&self, rng: &mut R) -> CoupledCounts {
        let zero = self.common[0];
        let diagonal = self.overlap - zero;
        if self.tv <= 0.0 || open01(rng) * (diagonal + self.tv) < diagonal {
            let target = zero + open01(rng) * diagonal;
            let k = self.common.partition_point(|&c| c < target).clamp(1, self.common.len() - 1) as u64;
            return CoupledCounts::new(k, k);
        }
        CoupledCounts::new(invert(&self.residual_a, open01(rng)), invert(&self.residual_b, open01(rng)))
    }
}

/// Maximally coupled `Poisson(a)` (discrete side) and `Poisson(b)` counts.
pub fn couple_poisson<R: Rng + ?Sized>(a: f64, b: f64, rng: &mut R) -> Result<CoupledCounts> {
    Ok(PoissonCoupler::new(a, b)?.sample(rng))
}

/// A path given by its values at strictly increasing times, read as the
/// piecewise-linear interpolation of those values.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimedPath {
    pub dim: usize,
    pub times: Vec<f64>,
    /// Flat values, `dim` coordinates per time.
    pub values: Vec<f64>,
}

impl TimedPath {
    pub fn new(dim: usize, times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if dim == 0 || times.is_empty() || values.len() != times.len() * dim {
            return domain("a timed path needs one d-vector per time");
        }
        if !times.windows(2).all(|w| w[0] < w[1]) {
            return domain("times must be strictly increasing");
        }
        Ok(TimedPath { dim, times, values })
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn value(&self, i: usize) -> &[f64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    /// Largest gap between consecutive times.
    pub fn resolution(&self) -> f64 {
        self.times.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max)
    }
}

/// Walks `path` forward to time `t` (non-decreasing across calls) and writes
/// the interpolated value into `out`.
fn interpolate_at(path: &TimedPath, cursor: &mut usize, t: f64, out: &mut [f64]) {
    while *cursor + 1 < path.len() && path.times[*cursor + 1] <= t {
        *cursor += 1;
    }
    let i = *cursor;
    if i + 1 == path.len() || path.times[i] == t {
        out.copy_from_slice(path.value(i));
        return;
    }
    let (t0, t1) = (path.times[i], path.times[i + 1]);
    let w = (t - t0) / (t1 - t0);
    for (c, o) in out.iter_mut().enumerate() {
        let (x, y) = (path.value(i)[c], path.value(i + 1)[c]);
        *o = x + w * (y - x);
    }
}

/// `sup_t |a(t) - b(t)|` for piecewise-linear paths on a common interval;
/// the difference is linear between merged breakpoints, so the supremum is
/// attained at one of them.
pub fn sup_distance(a: &TimedPath, b: &TimedPath) -> Result<f64> {
    if a.dim != b.dim {
        return domain("paths have different dimensions");
    }
    if a.is_empty() || b.is_empty() || a.times[0] != b.times[0] || a.times[a.len() - 1] != b.times[b.len() - 1] {
        return domain("paths are not defined on a common time interval");
    }
    let (mut i, mut j) = (0usize, 0usize);
    let (mut ca, mut cb) = (0usize, 0usize);
    let mut va = vec![0.0; a.dim];
    let mut vb = vec![0.0; a.dim];
    let mut best = 0.0f64;
    while i < a.len() || j < b.len() {
        let t = match (a.times.get(i), b.times.get(j)) {
            (Some(&x), Some(&y)) => x.min(y),
            (Some(&x), None) => x,
            (None, Some(&y)) => y,
            (None, None) => unreachable!(),
        };
        interpolate_at(a, &mut ca, t, &mut va);
        interpolate_at(b, &mut cb, t, &mut vb);
        let d2: f64 = va.iter().zip(&vb).map(|(x, y)| (x - y) * (x - y)).sum();
        best = best.max(d2);
        while i < a.len() && a.times[i] <= t {
            i += 1;
        }
        while j < b.len() && b.times[j] <= t {
            j += 1;
        }
    }
    Ok(best.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use crate::stats::poisson_tv;

    #[test]
    fn equal_means_always_agree() {
        let mut rng = stream(0, 0);
        let c = PoissonCoupler::new(2.5, 2.5).unwrap();
        assert!((0..10_000).all(|_| c.sample(&mut rng).agreed));
        assert_eq!(c.tv(), 0.0);
    }

    #[test]
    fn zero_mean_side_is_zero() {
        let mut rng = stream(0, 1);
        let c = PoissonCoupler::new(0.0, 1.0).unwrap();
        assert!((c.tv() - (1.0 - (-1.0f64).exp())).abs() < 1e-12);
        for _ in 0..10_000 {
            assert_eq!(c.sample(&mut rng).n_discrete, 0);
        }
    }

    #[test]
    fn tv_matches_direct_summation() {
        for (a, b) in [(0.3, 0.31), (5.0, 7.0), (40.0, 41.0)] {
            let c = PoissonCoupler::new(a, b).unwrap();
            assert!((c.tv() - poisson_tv(a, b)).abs() < 1e-12);
        }
    }

    #[test]
    fn conditioned_draws_are_never_both_zero() {
        let mut rng = stream(0, 2);
        let c = PoissonCoupler::new(0.01, 0.012).unwrap();
        for _ in 0..10_000 {
            let s = c.sample_nonzero(&mut rng);
            assert!(s.n_discrete + s.n_brownian > 0);
        }
        assert!((c.both_zero() - (-0.012f64).exp()).abs() < 1e-12);
    }

    fn line(times: &[f64], values: &[f64]) -> TimedPath {
        TimedPath::new(1, times.to_vec(), values.to_vec()).unwrap()
    }

    #[test]
    fn sup_distance_basics() {
        let a = TimedPath::new(2, vec![0.0, 0.5, 1.0], vec![0.0, 0.0, 1.0, 2.0, 0.0, 0.0]).unwrap();
        assert_eq!(sup_distance(&a, &a).unwrap(), 0.0);
        let shifted = TimedPath { values: a.values.iter().enumerate().map(|(i, v)| v + if i % 2 == 0 { 3.0 } else { 4.0 }).collect(), ..a.clone() };
        assert!((sup_distance(&a, &shifted).unwrap() - 5.0).abs() < 1e-12);
        // a: 0 -> 1 -> 0 at t = 0, 0.5, 1;  b: 0 -> 0 at t = 0, 0.25, 1 with 0.25 -> -1.
        let a = line(&[0.0, 0.5, 1.0], &[0.0, 1.0, 0.0]);
        let b = line(&[0.0, 0.25, 1.0], &[0.0, -1.0, 0.0]);
        // at t = 0.25: a = 0.5, b = -1 -> 1.5; at t = 0.5: a = 1, b = -2/3 -> 5/3.
        assert!((sup_distance(&a, &b).unwrap() - 5.0 / 3.0).abs() < 1e-12);
        let c = line(&[0.0, 2.0], &[0.0, 0.0]);
        assert!(sup_distance(&a, &c).is_err());
    }
}
