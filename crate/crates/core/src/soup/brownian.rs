//! Brownian loop soup built on the lattice: each root cell `z` and
//! generation `n` carries a Poisson number of Brownian loops with durations
//! in `[2(n-1)/d + r_d, 2n/d + r_d]`.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{cube_roots, loop_masses};
use crate::error::{domain, Result};
use crate::rng::open01;
use crate::stats::poisson;

/// `r_d = (3d + 4) / (2d (d + 2))`.
pub fn range_offset(dim: usize) -> f64 {
    let d = dim as f64;
    (3.0 * d + 4.0) / (2.0 * d * (d + 2.0))
}

/// Duration window `[2(n-1)/d + r_d, 2n/d + r_d]` of generation `n`.
pub fn duration_window(dim: usize, n: usize) -> (f64, f64) {
    let d = dim as f64;
    let r = range_offset(dim);
    (2.0 * (n as f64 - 1.0) / d + r, 2.0 * n as f64 / d + r)
}

/// Mass `int_a^b dt / (t (2 pi t)^(d/2))` of the Brownian loop measure per
/// unit root volume.
fn power_mass(dim: usize, a: f64, b: f64) -> f64 {
    let k = dim as f64 / 2.0;
    (2.0 * std::f64::consts::PI).powf(-k) / k * (a.powf(-k) - b.powf(-k))
}

/// Inverse CDF of the density proportional to `t^(-d/2-1)` on `[a, b]`.
fn power_quantile(dim: usize, a: f64, b: f64, u: f64) -> f64 {
    let k = dim as f64 / 2.0;
    let (ak, bk) = (a.powf(-k), b.powf(-k));
    (ak - u * (ak - bk)).powf(-1.0 / k).clamp(a, b)
}

/// Duration of generation `n` at quantile level `u`.
pub fn duration_quantile(dim: usize, n: usize, u: f64) -> Result<f64> {
    if dim == 0 || n == 0 {
        return domain("duration windows need d >= 1 and n >= 1");
    }
    if !(0.0..=1.0).contains(&u) {
        return domain(format!("quantile level {u} outside [0, 1]"));
    }
    let (a, b) = duration_window(dim, n);
    Ok(power_quantile(dim, a, b, u))
}

pub fn sample_duration<R: Rng + ?Sized>(dim: usize, n: usize, rng: &mut R) -> Result<f64> {
    duration_quantile(dim, n, open01(rng))
}

/// Mean of the truncated power law of generation `n`.
pub fn duration_mean(dim: usize, n: usize) -> f64 {
    let (a, b) = duration_window(dim, n);
    let k = dim as f64 / 2.0;
    let norm = (a.powf(-k) - b.powf(-k)) / k;
    let first = if dim == 2 { (b / a).ln() } else { (a.powf(1.0 - k) - b.powf(1.0 - k)) / (k - 1.0) };
    first / norm
}

/// Per-generation count intensities of both soups.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BlConstants {
    pub dim: usize,
    pub r_d: f64,
    /// `q[n - 1]`: Brownian loops per unit cell with generation `n`.
    pub q: Vec<f64>,
    /// `q_tilde[n - 1] = p_2n(0,0) / (2n)`: random walk loops per root.
    pub q_tilde: Vec<f64>,
}

impl BlConstants {
    pub fn new(dim: usize, n_max: usize) -> Result<Self> {
        if dim == 0 || n_max == 0 {
            return domain("constants need d >= 1 and n_max >= 1");
        }
        let q = (1..=n_max)
            .map(|n| {
                let (a, b) = duration_window(dim, n);
                power_mass(dim, a, b)
            })
            .collect();
        Ok(BlConstants { dim, r_d: range_offset(dim), q, q_tilde: loop_masses(dim, n_max)? })
    }

    pub fn n_max(&self) -> usize {
        self.q.len()
    }

    /// `|q_n - q_tilde_n|`.
    pub fn gap(&self, n: usize) -> f64 {
        (self.q[n - 1] - self.q_tilde[n - 1]).abs()
    }
}

/// A rooted Brownian loop: `root + grid[k]` is its position at time
/// `k * duration / 2^levels`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContinuousLoop {
    pub dim: usize,
    pub root: Vec<f64>,
    pub duration: f64,
    /// Flat displacement grid, `2^levels + 1` points of `dim` coordinates.
    pub grid: Vec<f64>,
    /// Lattice cell the root was generated from.
    pub cell: Vec<i32>,
    /// Generation `n`, or 0 for loops with duration at most `r_d`.
    pub generation: usize,
}

impl ContinuousLoop {
    pub fn points(&self) -> usize {
        self.grid.len() / self.dim
    }

    pub fn displacement(&self, k: usize) -> &[f64] {
        &self.grid[k * self.dim..(k + 1) * self.dim]
    }

    pub fn position(&self, k: usize) -> Vec<f64> {
        self.displacement(k).iter().zip(&self.root).map(|(g, r)| g + r).collect()
    }
}

/// Standard `d`-dimensional Brownian bridge of the given duration on the
/// dyadic grid of `2^levels` intervals, flattened.
///
/// Points are filled coarse to fine: the midpoint of a segment with
/// endpoints `x, y` and half-width `h` is `(x + y) / 2 + sqrt(h / 2) Z`.
pub fn sample_brownian_bridge<R: Rng + ?Sized>(dim: usize, duration: f64, levels: u32, rng: &mut R) -> Result<Vec<f64>> {
    if levels == 0 || levels > 24 {
        return domain(format!("dyadic depth {levels} outside 1..=24"));
    }
    if !(duration > 0.0 && duration.is_finite()) {
        return domain(format!("duration {duration} must be positive"));
    }
    let m = 1usize << levels;
    let mut grid = vec![0.0; (m + 1) * dim];
    let mut width = m;
    while width > 1 {
        let half = width / 2;
        let sd = (duration * half as f64 / m as f64 / 2.0).sqrt();
        for left in (0..m).step_by(width) {
            let mid = left + half;
            for c in 0..dim {
                let z: f64 = rng.sample(StandardNormal);
                grid[mid * dim + c] = 0.5 * (grid[left * dim + c] + grid[(left + width) * dim + c]) + sd * z;
            }
        }
        width = half;
    }
    Ok(grid)
}

/// How loops with duration at most `r_d` are treated.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "policy")]
pub enum SmallLoopPolicy {
    #[default]
    Omit,
    /// Loops with duration in `[min_duration, r_d]`, at the exact intensity.
    Include { min_duration: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BrownianSoupConfig {
    pub dim: usize,
    pub box_radius: i64,
    pub lambda: f64,
    pub max_half_length: usize,
    pub levels: u32,
    #[serde(default)]
    pub small_loops: SmallLoopPolicy,
}

/// Brownian loop soup with roots `z + Y`, `z` in `[-R, R]^d` and `Y` uniform
/// in the unit cube around `z`.
///
/// As for the random walk soup, the total count is drawn once and each loop
/// gets an independent generation, cell and offset, which is the same
/// Poisson process as per-`(z, n)` counts of mean `lambda q_n`.
pub fn sample_brownian_soup<R: Rng + ?Sized>(cfg: &BrownianSoupConfig, rng: &mut R) -> Result<Vec<ContinuousLoop>> {
    let dim = cfg.dim;
    if !(cfg.lambda >= 0.0 && cfg.lambda.is_finite()) || cfg.box_radius < 0 {
        return domain("invalid intensity or box radius");
    }
    let consts = BlConstants::new(dim, cfg.max_half_length)?;
    let cells = cube_roots(dim, cfg.box_radius as i32);
    let cell_count = cells.len() / dim;
    let mut cdf = Vec::with_capacity(consts.q.len());
    let mut mass = 0.0;
    for q in &consts.q {
        mass += q;
        cdf.push(mass);
    }
    let mut loops = Vec::new();
    let mut push = |generation: usize, duration: f64, rng: &mut R| -> Result<()> {
        let c = rng.random_range(0..cell_count);
        let cell = cells[c * dim..(c + 1) * dim].to_vec();
        let root = cell.iter().map(|&z| z as f64 + open01(rng) - 0.5).collect();
        let grid = sample_brownian_bridge(dim, duration, cfg.levels, rng)?;
        loops.push(ContinuousLoop { dim, root, duration, grid, cell, generation });
        Ok(())
    };
    let count = poisson(cfg.lambda * cell_count as f64 * mass, rng);
    for _ in 0..count {
        let target = open01(rng) * mass;
        let n = cdf.partition_point(|&c| c < target).min(cdf.len() - 1) + 1;
        let t = sample_duration(dim, n, rng)?;
        push(n, t, rng)?;
    }
    if let SmallLoopPolicy::Include { min_duration } = cfg.small_loops {
        let r = consts.r_d;
        if !(min_duration > 0.0 && min_duration < r) {
            return domain(format!("small-loop cutoff {min_duration} must lie in (0, r_d)"));
        }
        let count = poisson(cfg.lambda * cell_count as f64 * power_mass(dim, min_duration, r), rng);
        for _ in 0..count {
            let t = power_quantile(dim, min_duration, r, open01(rng));
            push(0, t, rng)?;
        }
    }
    Ok(loops)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    #[test]
    fn offset_in_three_dimensions() {
        assert!((range_offset(3) - 13.0 / 30.0).abs() < 1e-15);
        let (a, b) = duration_window(3, 1);
        assert!((a - 13.0 / 30.0).abs() < 1e-15 && (b - (2.0 / 3.0 + 13.0 / 30.0)).abs() < 1e-15);
    }

    #[test]
    fn quantile_endpoints() {
        for dim in 1..=4 {
            for n in [1, 3, 50] {
                let (a, b) = duration_window(dim, n);
                assert!((duration_quantile(dim, n, 0.0).unwrap() - a).abs() < 1e-12);
                assert!((duration_quantile(dim, n, 1.0).unwrap() - b).abs() < 1e-12);
            }
        }
        assert!(duration_quantile(3, 1, 1.5).is_err());
    }

    #[test]
    fn intensities_are_positive_and_decreasing() {
        for dim in [2, 3] {
            let c = BlConstants::new(dim, 64).unwrap();
            assert!(c.q.windows(2).all(|w| w[1] < w[0] && w[1] > 0.0));
            assert!(c.q_tilde.windows(2).all(|w| w[1] < w[0] && w[1] > 0.0));
        }
    }

    #[test]
    fn bridge_endpoints_are_pinned() {
        let mut rng = stream(0, 0);
        let g = sample_brownian_bridge(3, 2.5, 6, &mut rng).unwrap();
        assert_eq!(g.len(), 65 * 3);
        assert!(g[..3].iter().chain(&g[64 * 3..]).all(|&v| v == 0.0));
        assert!(sample_brownian_bridge(3, 2.5, 0, &mut rng).is_err());
    }

    #[test]
    fn soup_loops_respect_windows() {
        let cfg = BrownianSoupConfig {
            dim: 3,
            box_radius: 2,
            lambda: 3.0,
            max_half_length: 20,
            levels: 4,
            small_loops: SmallLoopPolicy::Include { min_duration: 0.05 },
        };
        let mut rng = stream(0, 1);
        let loops = sample_brownian_soup(&cfg, &mut rng).unwrap();
        assert!(!loops.is_empty());
        for l in &loops {
            if l.generation == 0 {
                assert!(l.duration >= 0.05 && l.duration <= range_offset(3));
            } else {
                let (a, b) = duration_window(3, l.generation);
                assert!(l.duration >= a && l.duration <= b);
            }
            for (r, z) in l.root.iter().zip(&l.cell) {
                assert!((r - *z as f64).abs() <= 0.5);
            }
        }
        let empty = BrownianSoupConfig { lambda: 0.0, ..cfg };
        assert!(sample_brownian_soup(&empty, &mut rng).unwrap().is_empty());
    }
}
