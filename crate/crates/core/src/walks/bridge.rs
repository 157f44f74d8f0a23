//! Random walk bridges (walks conditioned to return to their start).

use rand::seq::SliceRandom;
use rand::Rng;

use super::lclt::AllocationLaw;
use crate::error::{domain, Result};
use crate::lattice::{LatticePath, PathKind};

/// Steps `+1`/`-1` of a uniform one-dimensional bridge with `half` up-steps.
pub fn bridge_1d_steps<R: Rng + ?Sized>(half: usize, rng: &mut R, out: &mut Vec<i8>) {
    out.clear();
    out.resize(half, 1);
    out.resize(2 * half, -1);
    out.shuffle(rng);
}

/// Uniform one-dimensional bridge of `m` steps, as a path from 0 to 0.
pub fn sample_bridge_1d<R: Rng + ?Sized>(m: usize, rng: &mut R) -> Result<LatticePath> {
    if m < 2 || !m.is_multiple_of(2) {
        return domain(format!("bridge length {m} must be even and at least 2"));
    }
    let mut steps = Vec::with_capacity(m);
    bridge_1d_steps(m / 2, rng, &mut steps);
    let mut coords = Vec::with_capacity(m + 1);
    let mut x = 0i32;
    coords.push(0);
    for s in steps {
        x += s as i32;
        coords.push(x);
    }
    Ok(LatticePath::from_flat_unchecked(1, coords, PathKind::NearestNeighbor))
}

/// Reusable sampler of `d`-dimensional random walk bridges.
///
/// A bridge of length `2n` is drawn as (i) half-counts `k` from the exact
/// allocation law, (ii) a uniformly shuffled coordinate sequence with `2 k_i`
/// entries equal to `i`, and (iii) an independent one-dimensional bridge for
/// every coordinate, read off in the order the sequence visits that axis.
#[derive(Clone, Debug)]
pub struct BridgeSampler {
    law: AllocationLaw,
    half_counts: Vec<usize>,
    axes: Vec<u8>,
    signs: Vec<Vec<i8>>,
}

impl BridgeSampler {
    pub fn new(dim: usize) -> Self {
        assert!((1..=255).contains(&dim));
        BridgeSampler { law: AllocationLaw::new(dim), half_counts: Vec::new(), axes: Vec::new(), signs: vec![Vec::new(); dim] }
    }

    pub fn dim(&self) -> usize {
        self.law.dim()
    }

    /// Exact allocation: `(axis sequence, per-axis step counts)` for length `2n`.
    pub fn sample_allocation<R: Rng + ?Sized>(&mut self, n: usize, rng: &mut R) -> (&[u8], &[usize]) {
        self.law.sample_half_counts(n, rng, &mut self.half_counts);
        self.axes.clear();
        for (axis, &k) in self.half_counts.iter().enumerate() {
            self.axes.extend(std::iter::repeat_n(axis as u8, 2 * k));
        }
        self.axes.shuffle(rng);
        for k in self.half_counts.iter_mut() {
            *k *= 2;
        }
        (&self.axes, &self.half_counts)
    }

    /// Writes the `2n + 1` sites of a bridge rooted at `root` into `out`.
    pub fn sample_into<R: Rng + ?Sized>(&mut self, n: usize, root: &[i32], rng: &mut R, out: &mut Vec<i32>) {
        let dim = self.dim();
        out.clear();
        out.extend_from_slice(root);
        if n == 0 {
            return;
        }
        self.sample_allocation(n, rng);
        for axis in 0..dim {
            bridge_1d_steps(self.half_counts[axis] / 2, rng, &mut self.signs[axis]);
        }
        let mut cursor = vec![0usize; dim];
        let mut pos = root.to_vec();
        for &a in &self.axes {
            let a = a as usize;
            pos[a] += self.signs[a][cursor[a]] as i32;
            cursor[a] += 1;
            out.extend_from_slice(&pos);
        }
    }
}

/// `d`-dimensional random walk bridge of `m` steps from the origin.
pub fn sample_bridge<R: Rng + ?Sized>(dim: usize, m: usize, rng: &mut R) -> Result<LatticePath> {
    if dim == 0 {
        return domain("dimension must be at least 1");
    }
    if !m.is_multiple_of(2) {
        return domain(format!("bridge length {m} must be even"));
    }
    let mut sampler = BridgeSampler::new(dim);
    let mut coords = Vec::with_capacity((m + 1) * dim);
    sampler.sample_into(m / 2, &vec![0; dim], rng, &mut coords);
    Ok(LatticePath::from_flat_unchecked(dim, coords, PathKind::NearestNeighbor))
}

/// Multinomial axis counts for `m` steps, redrawn until every count is even.
///
/// Returns the accepted counts and the number of proposals. This is the
/// parity-conditioned allocation; it matches the bridge allocation law only
/// for `m = 2`, because the bridge law additionally weights counts by
/// `prod C(M_i, M_i / 2) 2^(-M_i)`.
pub fn sample_parity_conditioned_counts<R: Rng + ?Sized>(dim: usize, m: usize, rng: &mut R) -> Result<(Vec<usize>, u64)> {
    if dim == 0 || !m.is_multiple_of(2) {
        return domain("parity conditioning needs d >= 1 and even m");
    }
    let mut attempts = 0u64;
    loop {
        attempts += 1;
        let mut counts = vec![0usize; dim];
        for _ in 0..m {
            counts[rng.random_range(0..dim)] += 1;
        }
        if counts.iter().all(|c| c % 2 == 0) {
            return Ok((counts, attempts));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    #[test]
    fn odd_lengths_are_rejected() {
        let mut rng = stream(0, 0);
        assert!(sample_bridge_1d(3, &mut rng).is_err());
        assert!(sample_bridge_1d(0, &mut rng).is_err());
        assert!(sample_bridge(3, 5, &mut rng).is_err());
    }

    #[test]
    fn bridges_close() {
        let mut rng = stream(0, 1);
        for m in [2, 4, 10, 64] {
            let b = sample_bridge_1d(m, &mut rng).unwrap();
            assert_eq!(b.last(), &[0]);
            assert_eq!(b.steps(), m);
            for d in 1..=4 {
                let b = sample_bridge(d, m, &mut rng).unwrap();
                assert_eq!(b.steps(), m);
                assert!(b.last().iter().all(|&c| c == 0));
                assert!(LatticePath::from_flat(d, b.flat().to_vec(), PathKind::NearestNeighbor).is_ok());
            }
        }
    }

    #[test]
    fn rooted_bridge_is_translated() {
        let mut rng = stream(0, 2);
        let mut sampler = BridgeSampler::new(2);
        let mut out = Vec::new();
        sampler.sample_into(3, &[5, -2], &mut rng, &mut out);
        assert_eq!(out.len(), 7 * 2);
        assert_eq!(&out[..2], &[5, -2]);
        assert_eq!(&out[12..], &[5, -2]);
    }
}
