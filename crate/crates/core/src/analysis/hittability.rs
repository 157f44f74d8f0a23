//! Monte Carlo check of the hittability of loop-erased walks.

use rand::seq::index;
use rustc_hash::FxHashSet;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::lattice::{dist2, norm2, within_radius, BoundaryConvention, Domain, LoopEraser, SiteSet};
use crate::rng::par_blocks;
use crate::stats::{binomial_std_err, fingerprint, EstimatorReport};
use crate::walks::{lerw_into, walk_until};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HittabilityConfig {
    pub n: i64,
    pub eps: f64,
    pub eta: f64,
    pub outer_samples: u64,
    pub inner_samples: u64,
    /// Largest number of test points per LERW sample.
    pub max_points: usize,
    pub seed: u64,
}

impl HittabilityConfig {
    pub fn new(n: i64, eps: f64, eta: f64, outer_samples: u64, inner_samples: u64, seed: u64) -> Self {
        HittabilityConfig { n, eps, eta, outer_samples, inner_samples, max_points: 16, seed }
    }

    fn check(&self) -> Result<()> {
        if self.n < 1 {
            return domain("radius must be at least 1");
        }
        if !(self.eps > 0.0 && self.eps < 1.0) {
            return domain(format!("epsilon = {} must lie in (0, 1)", self.eps));
        }
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return domain("eta must be positive");
        }
        if self.inner_samples == 0 || self.max_points == 0 {
            return domain("inner samples and test points must be positive");
        }
        Ok(())
    }

    /// Test points lie within `eps^2 n` of the LERW.
    pub fn tube_radius(&self) -> f64 {
        self.eps * self.eps * self.n as f64
    }

    /// Inner walks from `x` stop on leaving `B(x, sqrt(eps) n)`.
    pub fn escape_radius(&self) -> f64 {
        self.eps.sqrt() * self.n as f64
    }

    /// Spacing of the grid of test points.
    pub fn grid_spacing(&self) -> i32 {
        ((self.tube_radius() / 2.0).floor() as i32).max(1)
    }

    pub fn threshold(&self) -> f64 {
        self.eps.powf(self.eta)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HittabilityReport {
    pub config: HittabilityConfig,
    /// Fraction of LERW samples with some test point whose escape estimate
    /// exceeds `eps^eta`.
    pub failing: EstimatorReport,
    /// Largest escape estimate per LERW sample.
    pub max_escape: Vec<f64>,
    /// Number of test points per LERW sample.
    pub tested_points: Vec<usize>,
}

/// Grid points of `h Z^3` in the closed ball `B(0, n)` within `tube` of some
/// site of `path`, sorted.
fn candidates(path: &[i32], n: i64, h: i32, tube: f64) -> Vec<[i32; 3]> {
    let mut set = FxHashSet::default();
    let t = tube.floor() as i32;
    for p in path.chunks_exact(3) {
        let lo: Vec<i32> = p.iter().map(|&c| (c - t).div_euclid(h) + i32::from((c - t).rem_euclid(h) != 0)).collect();
        let hi: Vec<i32> = p.iter().map(|&c| (c + t).div_euclid(h)).collect();
        for a in lo[0]..=hi[0] {
            for b in lo[1]..=hi[1] {
                for c in lo[2]..=hi[2] {
                    let x = [a * h, b * h, c * h];
                    if within_radius(dist2(&x, p), tube) && norm2(&x) <= n * n {
                        set.insert(x);
                    }
                }
            }
        }
    }
    let mut out: Vec<[i32; 3]> = set.into_iter().collect();
    out.sort_unstable();
    out
}

/// For each LERW from the origin to the exit of `B(0, n)` in `Z^3`, picks
/// up to `max_points` grid points `x` within `eps^2 n` of it (uniformly
/// without replacement) and estimates the probability that a walk from `x`
/// leaves `B(x, sqrt(eps) n)` without touching the LERW, time 0 included.
/// A sample fails when some estimate exceeds `eps^eta`.
pub fn hittability_scan(cfg: &HittabilityConfig) -> Result<HittabilityReport> {
    cfg.check()?;
    let dom = Domain::new(3, cfg.n, BoundaryConvention::Closed)?;
    let (h, tube, radius, threshold) = (cfg.grid_spacing(), cfg.tube_radius(), cfg.escape_radius(), cfg.threshold());
    let blocks = par_blocks(cfg.seed, cfg.outer_samples, |rng, _, count| -> Result<Vec<(f64, usize)>> {
        let mut eraser = LoopEraser::new(3);
        let mut out = Vec::with_capacity(count as usize);
        for _ in 0..count {
            lerw_into(&dom, &mut eraser, rng)?;
            let mut sites = SiteSet::with_capacity(3, eraser.len());
            for i in 0..eraser.len() {
                sites.insert(eraser.site(i));
            }
            let all = candidates(eraser.flat(), cfg.n, h, tube);
            let take = all.len().min(cfg.max_points);
            let mut chosen = index::sample(rng, all.len(), take).into_vec();
            chosen.sort_unstable();
            let mut worst = 0.0f64;
            for &c in &chosen {
                let x = all[c];
                let mut escapes = 0u64;
                for _ in 0..cfg.inner_samples {
                    let mut hit = false;
                    walk_until(&x, rng, |y| {
                        if sites.contains(y) {
                            hit = true;
                            return false;
                        }
                        within_radius(dist2(y, &x), radius)
                    })?;
                    escapes += u64::from(!hit);
                }
                worst = worst.max(escapes as f64 / cfg.inner_samples as f64);
            }
            out.push((worst, take));
        }
        Ok(out)
    });
    let mut max_escape = Vec::new();
    let mut tested_points = Vec::new();
    for b in blocks {
        for (w, t) in b? {
            max_escape.push(w);
            tested_points.push(t);
        }
    }
    let fails = max_escape.iter().filter(|&&w| w > threshold).count() as u64;
    let samples = cfg.outer_samples;
    let p = if samples == 0 { 0.0 } else { fails as f64 / samples as f64 };
    let config = format!(
        "hittability d=3 n={} eps={} eta={} outer={} inner={} points={} seed={}",
        cfg.n, cfg.eps, cfg.eta, cfg.outer_samples, cfg.inner_samples, cfg.max_points, cfg.seed
    );
    Ok(HittabilityReport {
        config: *cfg,
        failing: EstimatorReport {
            estimate: p,
            std_err: binomial_std_err(p, samples),
            samples,
            fingerprint: fingerprint(&config),
        },
        max_escape,
        tested_points,
    })
}
