//! Simple random walks stopped on leaving a ball, loop-erased random walks,
//! random walk bridges and exact small-instance oracles.

mod bridge;
mod harmonic;
mod lclt;

use rand::Rng;
use serde::{Deserialize, Serialize};

pub use bridge::{bridge_1d_steps, sample_bridge, sample_bridge_1d, sample_parity_conditioned_counts, BridgeSampler};
pub use harmonic::{expected_exit_time_exact, visit_probability_exact, DomainGraph};
pub use lclt::{
    lclt_leading, ln_factorial, return_probabilities, return_probability, AllocationLaw, MAX_HALF_LENGTH,
};

use crate::error::{Error, Result};
use crate::lattice::{norm2, BoundaryConvention, Domain, LatticePath, LoopEraser, PathKind};

/// Walks longer than this are reported as failures instead of looping on.
pub const STEP_CAP: u64 = 10_000_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WalkConfig {
    pub dim: usize,
    pub radius: i64,
    pub seed: u64,
    #[serde(default)]
    pub convention: BoundaryConvention,
}

impl WalkConfig {
    pub fn new(dim: usize, radius: i64, seed: u64) -> Result<Self> {
        Domain::new(dim, radius, BoundaryConvention::Open)?;
        Ok(WalkConfig { dim, radius, seed, convention: BoundaryConvention::Open })
    }

    pub fn with_convention(mut self, convention: BoundaryConvention) -> Self {
        self.convention = convention;
        self
    }

    pub fn domain(&self) -> Result<Domain> {
        Domain::new(self.dim, self.radius, self.convention)
    }
}

/// One uniform nearest-neighbour step applied in place.
#[inline]
pub fn step<R: Rng + ?Sized>(x: &mut [i32], rng: &mut R) {
    let k = rng.random_range(0..2 * x.len());
    x[k >> 1] += if k & 1 == 0 { 1 } else { -1 };
}

/// Runs a simple random walk from `start`, calling `visit` on every site
/// (the start included) until it returns `false`. Returns the number of steps.
pub fn walk_until<R, F>(start: &[i32], rng: &mut R, mut visit: F) -> Result<u64>
where
    R: Rng + ?Sized,
    F: FnMut(&[i32]) -> bool,
{
    let mut x = start.to_vec();
    let mut steps = 0u64;
    while visit(&x) {
        if steps == STEP_CAP {
            return Err(Error::Internal(format!("walk exceeded the step cap of {STEP_CAP}")));
        }
        step(&mut x, rng);
        steps += 1;
    }
    Ok(steps)
}

/// Walks from `start` until the first site with `|x|^2` outside the domain;
/// every visited site, the exit site included, goes through `visit`.
pub fn walk_to_exit<R, F>(domain: &Domain, start: &[i32], rng: &mut R, mut visit: F) -> Result<u64>
where
    R: Rng + ?Sized,
    F: FnMut(&[i32]),
{
    walk_until(start, rng, |x| {
        visit(x);
        domain.contains_norm2(norm2(x))
    })
}

/// Simple random walk from the origin up to and including its first site
/// outside the domain.
pub fn sample_srw_stopped<R: Rng + ?Sized>(cfg: &WalkConfig, rng: &mut R) -> Result<LatticePath> {
    let domain = cfg.domain()?;
    let mut coords = Vec::new();
    walk_to_exit(&domain, &vec![0; cfg.dim], rng, |x| coords.extend_from_slice(x))?;
    Ok(LatticePath::from_flat_unchecked(cfg.dim, coords, PathKind::NearestNeighbor))
}

/// Loop erasure of a fresh stopped walk, erased online.
pub fn sample_lerw<R: Rng + ?Sized>(cfg: &WalkConfig, rng: &mut R) -> Result<LatticePath> {
    let domain = cfg.domain()?;
    let mut eraser = LoopEraser::new(cfg.dim);
    walk_to_exit(&domain, &vec![0; cfg.dim], rng, |x| eraser.push(x))?;
    eraser.into_path().ok_or_else(|| Error::Internal("empty walk".into()))
}

/// Loop-erased walk from the origin to the exit of `B(0, radius)` under
/// `convention`, reusing `eraser` to avoid reallocation.
pub fn lerw_into<R: Rng + ?Sized>(domain: &Domain, eraser: &mut LoopEraser, rng: &mut R) -> Result<()> {
    eraser.clear();
    walk_to_exit(domain, &vec![0; domain.dim], rng, |x| eraser.push(x))?;
    Ok(())
}


#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    #[test]
    fn unit_open_ball_exits_in_one_step() {
        let cfg = WalkConfig::new(3, 1, 0).unwrap();
        let mut rng = stream(0, 0);
        for _ in 0..100 {
            let p = sample_srw_stopped(&cfg, &mut rng).unwrap();
            assert_eq!(p.len(), 2);
            assert_eq!(norm2(p.last()), 1);
        }
    }

    #[test]
    fn stopped_walk_shape() {
        let cfg = WalkConfig::new(2, 5, 0).unwrap().with_convention(BoundaryConvention::Closed);
        let domain = cfg.domain().unwrap();
        let mut rng = stream(0, 1);
        for _ in 0..200 {
            let p = sample_srw_stopped(&cfg, &mut rng).unwrap();
            assert_eq!(p.first(), &[0, 0]);
            let n = p.len();
            assert!(p.iter().take(n - 1).all(|x| domain.contains(x)));
            assert!(!domain.contains(p.last()));
            let l = sample_lerw(&cfg, &mut rng).unwrap();
            assert!(l.is_simple());
            assert_eq!(l.iter().filter(|x| !domain.contains(x)).count(), 1);
        }
    }

    #[test]
    fn configuration_is_validated() {
        assert!(WalkConfig::new(0, 3, 0).is_err());
        assert!(WalkConfig::new(2, 0, 0).is_err());
    }
}
