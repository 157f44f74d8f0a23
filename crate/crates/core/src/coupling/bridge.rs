//! Dyadic quantile coupling of random walk bridges with Brownian bridges.
//!
//! For a one-dimensional walk bridge `S` of `M` steps and a standard
//! Brownian bridge `beta` on `[0, 1]`, segments `[i, j]` of step indices are
//! split at `k = i + (j - i) / 2`. Given the endpoint values, `S_k - S_i` has
//! the law proportional to `C(a, (a + h)/2) C(b, (b + g - h)/2)` (with
//! `a = k - i`, `b = j - k`, `g = S_j - S_i`) and `beta(k/M)` is Gaussian with
//! the bridge mean and variance `a b / ((a + b) M)`. Both are drawn from one
//! shared uniform through their inverse CDFs. Each side on its own is the
//! exact recursive construction of its bridge.

use rand::Rng;
use rand_distr::StandardNormal;
use rustc_hash::FxHashMap;
use statrs::distribution::{ContinuousCDF, Normal};

use super::{sup_distance, TimedPath};
use crate::error::{domain, Result};
use crate::lattice::{LatticePath, PathKind};
use crate::rng::open01;
use crate::walks::{ln_factorial, BridgeSampler};

/// One coupled pair, with the discrete side scaled by `sqrt(d / m)`.
#[derive(Clone, Debug)]
pub struct CoupledBridgePair {
    /// The walk bridge in lattice units.
    pub discrete: LatticePath,
    /// `X_k sqrt(d / m)` at times `k / m`.
    pub scaled_discrete: TimedPath,
    /// Standard Brownian bridge on the union of `{k/m}`, `{j/2^levels}` and
    /// the per-axis grids.
    pub continuous: TimedPath,
    pub sup_distance: f64,
    /// Largest gap of the continuous time grid.
    pub resolution: f64,
}

/// Unscaled output of one coupling: times are `num / den`.
#[derive(Clone, Debug)]
pub(crate) struct RawPair {
    pub dim: usize,
    pub m: usize,
    /// Flat `(m + 1) * dim` lattice coordinates starting at the origin.
    pub discrete: Vec<i32>,
    pub den: u128,
    pub times: Vec<u128>,
    /// Flat `times.len() * dim` standard bridge values.
    pub continuous: Vec<f64>,
    pub levels: u32,
}

impl RawPair {
    pub fn continuous_times(&self) -> Vec<f64> {
        self.times.iter().map(|&t| t as f64 / self.den as f64).collect()
    }

    pub fn discrete_times(&self) -> Vec<f64> {
        (0..=self.m).map(|k| k as f64 / self.m as f64).collect()
    }

    /// Values of the continuous side at the dyadic times `j / 2^levels`.
    pub fn dyadic_values(&self) -> Vec<f64> {
        let step = self.den >> self.levels;
        let mut out = Vec::with_capacity(((1usize << self.levels) + 1) * self.dim);
        for (i, &t) in self.times.iter().enumerate() {
            if t % step == 0 {
                out.extend_from_slice(&self.continuous[i * self.dim..(i + 1) * self.dim]);
            }
        }
        out
    }
}

fn gcd(mut a: u128, mut b: u128) -> u128 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

fn lcm(a: u128, b: u128) -> Option<u128> {
    (a / gcd(a, b)).checked_mul(b)
}

/// Reusable coupler; caches the discrete midpoint laws.
#[derive(Clone, Debug)]
pub struct BridgeCoupler {
    cache: FxHashMap<(u32, u32, i32), (i32, Vec<f64>)>,
    ln_fact: Vec<f64>,
    allocation: BridgeSampler,
    normal: Normal,
}

impl BridgeCoupler {
    pub fn new(dim: usize) -> Self {
        BridgeCoupler {
            cache: FxHashMap::default(),
            ln_fact: vec![0.0],
            allocation: BridgeSampler::new(dim),
            normal: Normal::standard(),
        }
    }

    pub fn dim(&self) -> usize {
        self.allocation.dim()
    }

    fn ln_choose(&mut self, n: usize, k: usize) -> f64 {
        while self.ln_fact.len() <= n {
            let next = self.ln_fact.len();
            self.ln_fact.push(ln_factorial(next));
        }
        self.ln_fact[n] - self.ln_fact[k] - self.ln_fact[n - k]
    }

    /// Inverse CDF at `u` of `S_k - S_i` given `a`, `b` and gap `g`.
    fn midpoint_quantile(&mut self, a: usize, b: usize, g: i32, u: f64) -> i32 {
        let key = (a as u32, b as u32, g);
        if !self.cache.contains_key(&key) {
            let (ai, bi) = (a as i32, b as i32);
            let lo = (-ai).max(g - bi);
            let hi = ai.min(g + bi);
            let mut logs = Vec::new();
            let mut h = lo;
            while h <= hi {
                let w = self.ln_choose(a, ((ai + h) / 2) as usize) + self.ln_choose(b, ((bi + g - h) / 2) as usize);
                logs.push(w);
                h += 2;
            }
            let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let mut acc = 0.0;
            let mut cdf: Vec<f64> = logs
                .iter()
                .map(|w| {
                    acc += (w - max).exp();
                    acc
                })
                .collect();
            for c in cdf.iter_mut() {
                *c /= acc;
            }
            self.cache.insert(key, (lo, cdf));
        }
        let (lo, cdf) = &self.cache[&key];
        let idx = cdf.partition_point(|&c| c < u).min(cdf.len() - 1);
        lo + 2 * idx as i32
    }

    /// Couples a bridge of `steps` steps with a Brownian bridge on `[0, 1]`.
    /// Returns `S_0..S_M` and the Brownian values at `out` (times over
    /// `den`), which must contain every multiple of `den / steps`.
    fn couple_axis<R: Rng + ?Sized>(&mut self, steps: usize, den: u128, out: &[u128], rng: &mut R) -> (Vec<i32>, Vec<f64>) {
        let mut s = vec![0i32; steps + 1];
        let mut known_times = vec![0u128];
        let mut known = vec![0.0f64];
        if steps > 0 {
            let mut beta = vec![0.0f64; steps + 1];
            let mut stack = vec![(0usize, steps)];
            while let Some((i, j)) = stack.pop() {
                if j - i < 2 {
                    continue;
                }
                let k = i + (j - i) / 2;
                let (a, b) = (k - i, j - k);
                let u = open01(rng);
                s[k] = s[i] + self.midpoint_quantile(a, b, s[j] - s[i], u);
                let mean = beta[i] + a as f64 / (a + b) as f64 * (beta[j] - beta[i]);
                let var = (a * b) as f64 / ((a + b) as f64 * steps as f64);
                beta[k] = mean + var.sqrt() * self.normal.inverse_cdf(u);
                stack.push((k, j));
                stack.push((i, k));
            }
            let unit = den / steps as u128;
            known_times = (0..=steps as u128).map(|k| k * unit).collect();
            known = beta;
        } else {
            known_times.push(den);
            known.push(0.0);
        }
        (s, fill(&known_times, &known, den, out, rng))
    }

    pub(crate) fn couple_raw<R: Rng + ?Sized>(&mut self, m: usize, levels: u32, rng: &mut R) -> Result<RawPair> {
        let dim = self.dim();
        if m < 2 || !m.is_multiple_of(2) {
            return domain(format!("bridge length {m} must be even and at least 2"));
        }
        if levels == 0 || levels > 24 {
            return domain(format!("dyadic depth {levels} outside 1..=24"));
        }
        let (axes, counts) = {
            let (axes, counts) = self.allocation.sample_allocation(m / 2, rng);
            (axes.to_vec(), counts.to_vec())
        };
        let overflow = || crate::Error::Domain("time grid denominator overflows".into());
        let mut den = lcm(m as u128, 1u128 << levels).ok_or_else(overflow)?;
        for &c in counts.iter().filter(|&&c| c > 0) {
            den = lcm(den, c as u128).ok_or_else(overflow)?;
        }
        let mut times: Vec<u128> = Vec::new();
        let mut add_grid = |k: u128| {
            let unit = den / k;
            times.extend((0..=k).map(|j| j * unit));
        };
        add_grid(m as u128);
        add_grid(1u128 << levels);
        for &c in counts.iter().filter(|&&c| c > 0) {
            add_grid(c as u128);
        }
        times.sort_unstable();
        times.dedup();

        let mut continuous = vec![0.0; times.len() * dim];
        let mut per_axis = Vec::with_capacity(dim);
        for (axis, &c) in counts.iter().enumerate() {
            let (s, values) = self.couple_axis(c, den, &times, rng);
            for (t, v) in values.iter().enumerate() {
                continuous[t * dim + axis] = *v;
            }
            per_axis.push(s);
        }
        let mut discrete = Vec::with_capacity((m + 1) * dim);
        let mut cursor = vec![0usize; dim];
        let mut pos = vec![0i32; dim];
        discrete.extend_from_slice(&pos);
        for &a in &axes {
            let a = a as usize;
            cursor[a] += 1;
            pos[a] = per_axis[a][cursor[a]];
            discrete.extend_from_slice(&pos);
        }
        Ok(RawPair { dim, m, discrete, den, times, continuous, levels })
    }

    /// Coupled `d`-dimensional pair for a bridge of `m` steps.
    pub fn couple<R: Rng + ?Sized>(&mut self, m: usize, levels: u32, rng: &mut R) -> Result<CoupledBridgePair> {
        let raw = self.couple_raw(m, levels, rng)?;
        let scale = (raw.dim as f64 / m as f64).sqrt();
        let scaled_values = raw.discrete.iter().map(|&x| x as f64 * scale).collect();
        let scaled_discrete = TimedPath::new(raw.dim, raw.discrete_times(), scaled_values)?;
        let continuous = TimedPath::new(raw.dim, raw.continuous_times(), raw.continuous.clone())?;
        let sup = sup_distance(&scaled_discrete, &continuous)?;
        let resolution = continuous.resolution();
        let discrete = LatticePath::from_flat_unchecked(raw.dim, raw.discrete, PathKind::NearestNeighbor);
        Ok(CoupledBridgePair { discrete, scaled_discrete, continuous, sup_distance: sup, resolution })
    }
}

/// Brownian bridge values at `out` given exact values at `known_times`
/// (a subset of `out`), filled left to right by conditional sampling.
fn fill<R: Rng + ?Sized>(known_times: &[u128], known: &[f64], den: u128, out: &[u128], rng: &mut R) -> Vec<f64> {
    let mut values = Vec::with_capacity(out.len());
    let mut next = 0usize;
    let (mut last_t, mut last_v) = (0u128, 0.0f64);
    for &t in out {
        while next < known_times.len() && known_times[next] < t {
            next += 1;
        }
        let v = if next < known_times.len() && known_times[next] == t {
            known[next]
        } else {
            let (rt, rv) = (known_times[next], known[next]);
            let span = (rt - last_t) as f64;
            let (l, r) = ((t - last_t) as f64, (rt - t) as f64);
            let mean = last_v + l / span * (rv - last_v);
            let var = l * r / (span * den as f64);
            let z: f64 = rng.sample(StandardNormal);
            mean + var.sqrt() * z
        };
        values.push(v);
        last_t = t;
        last_v = v;
    }
    values
}

/// One-dimensional coupled pair; the walk side is scaled by `1/sqrt(m)`.
pub fn couple_bridge_1d<R: Rng + ?Sized>(m: usize, levels: u32, rng: &mut R) -> Result<CoupledBridgePair> {
    BridgeCoupler::new(1).couple(m, levels, rng)
}

/// `d`-dimensional coupled pair sharing one exact coordinate allocation.
pub fn couple_bridge<R: Rng + ?Sized>(dim: usize, m: usize, levels: u32, rng: &mut R) -> Result<CoupledBridgePair> {
    if dim == 0 {
        return domain("dimension must be at least 1");
    }
    BridgeCoupler::new(dim).couple(m, levels, rng)
}
