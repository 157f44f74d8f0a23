//! Random walk and Brownian loop soups.
//!
//! The random walk loop measure gives each rooted loop of length `2n` the
//! weight `(2n)^-1 (2d)^-2n`, so its total mass at one root and half-length
//! `n` is `p_2n(0,0) / (2n)`. A soup of intensity `lambda` is a Poisson
//! process with `lambda` times that intensity, truncated at `max_half_length`.

mod brownian;

use std::sync::Mutex;

use rand::Rng;
use serde::{Deserialize, Serialize};

pub use brownian::{
    duration_mean, duration_quantile, duration_window, sample_brownian_bridge, sample_brownian_soup, sample_duration,
    BlConstants, BrownianSoupConfig, ContinuousLoop, SmallLoopPolicy,
};

use crate::error::{domain, Result};
use crate::lattice::{odometer, BoundaryConvention, DiscreteLoop, Domain, LatticePath, PathKind};
use crate::rng::open01;
use crate::stats::poisson;
use crate::walks::{return_probabilities, return_probability, BridgeSampler};

/// Total loop-measure mass of loops of length `2n` rooted at one site.
pub fn loop_mass(dim: usize, n: usize) -> Result<f64> {
    Ok(return_probability(dim, n)? / (2 * n) as f64)
}

/// `loop_mass(dim, n)` for `n = 1..=n_max` (index `n - 1`).
pub fn loop_masses(dim: usize, n_max: usize) -> Result<Vec<f64>> {
    Ok(return_probabilities(dim, n_max)?.into_iter().enumerate().map(|(i, p)| p / (2 * (i + 1)) as f64).collect())
}

/// Upper bound on the loop mass per root carried by loops with `n > n_max`.
///
/// Uses `p_2n(0,0) <= C n^(-d/2)`, with `C` the larger of the local limit
/// constant `2 (d / 4 pi)^(d/2)` and the largest `p_2n n^(d/2)` observed for
/// `n <= 2000`, and compares the sum with the integral
/// `sum_{n > N} C n^(-d/2-1) / 2 <= (C / d) N^(-d/2)`.
pub fn tail_mass_bound(dim: usize, n_max: usize) -> Result<f64> {
    if dim == 0 || n_max == 0 {
        return domain("tail_mass_bound needs d >= 1 and n_max >= 1");
    }
    let d = dim as f64;
    Ok(envelope_constant(dim)? / d * (n_max as f64).powf(-d / 2.0))
}

fn envelope_constant(dim: usize) -> Result<f64> {
    static CACHE: Mutex<Vec<(usize, f64)>> = Mutex::new(Vec::new());
    if let Some(&(_, c)) = CACHE.lock().expect("cache lock").iter().find(|(d, _)| *d == dim) {
        return Ok(c);
    }
    let d = dim as f64;
    let leading = 2.0 * (d / (4.0 * std::f64::consts::PI)).powf(d / 2.0);
    let c = return_probabilities(dim, 2000)?
        .iter()
        .enumerate()
        .map(|(i, p)| p * ((i + 1) as f64).powf(d / 2.0))
        .fold(leading, f64::max);
    CACHE.lock().expect("cache lock").push((dim, c));
    Ok(c)
}

/// Smallest cutoff whose tail bound, summed over `roots` roots at intensity
/// `lambda`, is below `budget`.
pub fn default_max_half_length(dim: usize, roots: usize, lambda: f64, budget: f64) -> Result<usize> {
    if !(budget > 0.0) {
        return domain("tail budget must be positive");
    }
    let scale = lambda * roots as f64 * envelope_constant(dim)? / dim as f64;
    let bound = |n: usize| scale * (n as f64).powf(-(dim as f64) / 2.0);
    let mut n = ((scale / budget).powf(2.0 / dim as f64).floor() as usize).max(1);
    while n > 1 && bound(n - 1) < budget {
        n -= 1;
    }
    while bound(n) >= budget {
        n += 1;
    }
    Ok(n)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RwSoupConfig {
    pub dim: usize,
    pub domain_radius: i64,
    pub lambda: f64,
    pub max_half_length: usize,
    pub seed: u64,
    #[serde(default)]
    pub convention: BoundaryConvention,
}

impl RwSoupConfig {
    pub fn validate(&self) -> Result<Domain> {
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return domain(format!("intensity {} must be finite and nonnegative", self.lambda));
        }
        if self.max_half_length == 0 {
            return domain("max_half_length must be at least 1");
        }
        Domain::new(self.dim, self.domain_radius, self.convention)
    }
}

/// Loops of one soup realisation with their containment flags.
#[derive(Clone, Debug)]
pub struct SoupSample {
    pub config: RwSoupConfig,
    pub loops: Vec<DiscreteLoop>,
    /// `contained[i]` is true when every site of `loops[i]` is interior.
    pub contained: Vec<bool>,
    /// Bound on the expected number of loops lost to the length cutoff.
    pub omitted_mass_bound: f64,
}

/// Reusable soup sampler over a fixed set of roots.
///
/// The soup is a Poisson process, so instead of one Poisson draw per
/// `(root, n)` it draws the total count with mean `lambda * |roots| * sum_n
/// m_n`, then for each loop an independent half-length (probability
/// proportional to `m_n`), a uniform root and a bridge shape. Both
/// constructions give the same point process.
#[derive(Clone, Debug)]
pub struct RwSoupSampler {
    dim: usize,
    lambda: f64,
    roots: Vec<i32>,
    cdf: Vec<f64>,
    mass: f64,
    bridge: BridgeSampler,
    buf: Vec<i32>,
}

impl RwSoupSampler {
    /// `roots` is a flat list of root coordinates.
    pub fn new(dim: usize, roots: Vec<i32>, lambda: f64, max_half_length: usize) -> Result<Self> {
        if dim == 0 || !roots.len().is_multiple_of(dim) {
            return domain("roots must be a flat list of d-vectors");
        }
        if !(lambda >= 0.0 && lambda.is_finite()) || max_half_length == 0 {
            return domain("invalid soup intensity or cutoff");
        }
        let masses = loop_masses(dim, max_half_length)?;
        let mut cdf = Vec::with_capacity(masses.len());
        let mut acc = 0.0;
        for m in &masses {
            acc += m;
            cdf.push(acc);
        }
        Ok(RwSoupSampler { dim, lambda, roots, cdf, mass: acc, bridge: BridgeSampler::new(dim), buf: Vec::new() })
    }

    pub fn root_count(&self) -> usize {
        self.roots.len() / self.dim
    }

    /// Expected number of loops per realisation.
    pub fn expected_count(&self) -> f64 {
        self.lambda * self.root_count() as f64 * self.mass
    }

    /// Samples one realisation and hands each loop to `f` as
    /// `(half_length, label, flat sites)`.
    pub fn for_each_loop<R, F>(&mut self, rng: &mut R, mut f: F)
    where
        R: Rng + ?Sized,
        F: FnMut(usize, f64, &[i32]),
    {
        if self.roots.is_empty() {
            return;
        }
        let count = poisson(self.expected_count(), rng);
        let roots = self.root_count();
        for _ in 0..count {
            let target = open01(rng) * self.mass;
            let n = self.cdf.partition_point(|&c| c < target).min(self.cdf.len() - 1) + 1;
            let r = rng.random_range(0..roots);
            let label = self.lambda * (1.0 - open01(rng));
            let root = &self.roots[r * self.dim..(r + 1) * self.dim];
            self.bridge.sample_into(n, root, rng, &mut self.buf);
            f(n, label, &self.buf);
        }
    }
}

/// All sites of the cube `[-reach, reach]^d` in lexicographic order, flattened.
pub(crate) fn cube_roots(dim: usize, reach: i32) -> Vec<i32> {
    let mut digits = vec![-reach; dim];
    let mut roots = Vec::new();
    loop {
        roots.push(digits.clone());
        if !odometer(&mut digits, -reach, reach) {
            break;
        }
    }
    roots.sort_unstable();
    roots.concat()
}

/// A random walk loop soup rooted on the bounding cube of the domain.
pub fn sample_rw_soup<R: Rng + ?Sized>(cfg: &RwSoupConfig, rng: &mut R) -> Result<SoupSample> {
    let dom = cfg.validate()?;
    let roots = cube_roots(cfg.dim, dom.reach());
    let mut sampler = RwSoupSampler::new(cfg.dim, roots, cfg.lambda, cfg.max_half_length)?;
    let omitted = cfg.lambda * sampler.root_count() as f64 * tail_mass_bound(cfg.dim, cfg.max_half_length)?;
    let mut loops = Vec::new();
    let mut contained = Vec::new();
    sampler.for_each_loop(rng, |_, label, sites| {
        contained.push(sites.chunks_exact(cfg.dim).all(|x| dom.contains(x)));
        let path = LatticePath::from_flat_unchecked(cfg.dim, sites.to_vec(), PathKind::NearestNeighbor);
        loops.push(DiscreteLoop::new_unchecked(path, label));
    });
    Ok(SoupSample { config: *cfg, loops, contained, omitted_mass_bound: omitted })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    #[test]
    fn masses() {
        assert!((loop_mass(3, 1).unwrap() * 12.0 - 1.0).abs() < 1e-13);
        assert!((loop_mass(2, 1).unwrap() * 8.0 - 1.0).abs() < 1e-13);
        let m = loop_masses(3, 64).unwrap();
        assert!(m.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn tail_bound_dominates_partial_tail() {
        for dim in [2, 3] {
            let masses = loop_masses(dim, 1100).unwrap();
            let mut last = f64::INFINITY;
            for n_max in [1, 5, 20, 100] {
                let bound = tail_mass_bound(dim, n_max).unwrap();
                let partial: f64 = masses[n_max..n_max + 1000].iter().sum();
                assert!(bound.is_finite() && bound >= partial, "d={dim} n_max={n_max}");
                assert!(bound < last);
                last = bound;
            }
        }
    }

    #[test]
    fn default_cutoff_meets_budget() {
        let n = default_max_half_length(3, 729, 1.0, 1e-4).unwrap();
        assert!(729.0 * tail_mass_bound(3, n).unwrap() < 1e-4);
        assert!(729.0 * tail_mass_bound(3, n - 1).unwrap() >= 1e-4);
    }

    #[test]
    fn loops_are_valid() {
        let cfg = RwSoupConfig {
            dim: 3,
            domain_radius: 3,
            lambda: 2.0,
            max_half_length: 30,
            seed: 0,
            convention: BoundaryConvention::Open,
        };
        let mut rng = stream(0, 0);
        let dom = cfg.validate().unwrap();
        for _ in 0..20 {
            let s = sample_rw_soup(&cfg, &mut rng).unwrap();
            for (l, &c) in s.loops.iter().zip(&s.contained) {
                let checked = DiscreteLoop::new(l.path().clone(), l.label()).unwrap();
                assert!(checked.label() > 0.0 && checked.label() <= 2.0);
                assert!(checked.half_length() <= 30);
                assert_eq!(c, l.path().iter().all(|x| dom.contains(x)));
            }
        }
    }

    #[test]
    fn vanishing_intensity_is_empty() {
        let cfg = RwSoupConfig {
            dim: 3,
            domain_radius: 4,
            lambda: 1e-6,
            max_half_length: 50,
            seed: 0,
            convention: BoundaryConvention::Open,
        };
        let mut rng = stream(0, 1);
        let empty = (0..10_000).filter(|_| sample_rw_soup(&cfg, &mut rng).unwrap().loops.is_empty()).count();
        assert!(empty >= 9_990);
    }
}
