//! Paired random walk and Brownian loop soups on a box of root cells.

use rand::seq::index;
use rand::Rng;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::bridge::BridgeCoupler;
use super::{sup_distance, PoissonCoupler, TimedPath};
use crate::error::{domain, Result};
use crate::lattice::{DiscreteLoop, LatticePath, PathKind};
use crate::rng::{open01, stream};
use crate::soup::{cube_roots, default_max_half_length, sample_brownian_bridge, sample_duration, tail_mass_bound};
use crate::soup::{BlConstants, ContinuousLoop};
use crate::walks::BridgeSampler;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SoupCouplingConfig {
    pub dim: usize,
    /// Roots are the cells of `[-floor(r N), floor(r N)]^d`.
    pub box_radius: f64,
    pub lambda: f64,
    /// The scale `N`.
    pub scale: usize,
    pub theta: f64,
    pub levels: u32,
    /// Largest half-length generated; `None` picks the smallest cutoff with
    /// expected omitted loop count below `0.01`.
    pub max_half_length: Option<usize>,
}

impl SoupCouplingConfig {
    fn check(&self) -> Result<()> {
        let d = self.dim as f64;
        if self.dim == 0 {
            return domain("dimension must be at least 1");
        }
        let lo = 2.0 * d / (d + 4.0);
        if !(self.theta > lo && self.theta < 2.0) {
            return domain(format!("theta = {} outside ({lo}, 2)", self.theta));
        }
        if self.scale == 0 {
            return domain("scale N must be at least 1");
        }
        if !(self.box_radius >= 0.0 && self.box_radius.is_finite()) {
            return domain("box radius must be nonnegative");
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return domain("intensity must be finite and nonnegative");
        }
        if self.levels == 0 || self.levels > 24 {
            return domain("dyadic depth outside 1..=24");
        }
        Ok(())
    }

    pub fn reach(&self) -> i32 {
        (self.box_radius * self.scale as f64).floor() as i32
    }

    /// Smallest half-length of a loop with length at least `N^theta`.
    pub fn large_half_length(&self) -> usize {
        ((self.scale as f64).powf(self.theta) / 2.0).ceil().max(1.0) as usize
    }

    /// `N^(3/4) max(ln N, 1)`, the shape of the distance bound.
    pub fn envelope(&self) -> f64 {
        let n = self.scale as f64;
        n.powf(0.75) * n.ln().max(1.0)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairRecord {
    pub discrete_id: usize,
    pub continuous_id: usize,
    pub cell: Vec<i32>,
    pub half_length: usize,
    pub sup_distance: f64,
    /// `|T - 2n/d|` between the Brownian duration and the walk's time scale.
    pub duration_gap: f64,
    /// Length at least `N^theta`.
    pub large: bool,
    /// Distance above ten times the fitted envelope.
    pub flagged: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrespondenceReport {
    pub pairs: Vec<PairRecord>,
    pub unmatched_discrete: Vec<usize>,
    pub unmatched_brownian: Vec<usize>,
    /// Large `(z, n)` cells whose two counts differ.
    pub disagreeing_cells: u64,
    /// Expected number of such cells, `sum` of Poisson TV distances.
    pub expected_disagreements: f64,
    /// Median of `sup_distance / envelope` over large pairs.
    pub fitted_constant: Option<f64>,
    pub envelope: f64,
    pub success: bool,
    pub max_half_length: usize,
    /// Bound on the expected number of walk loops beyond the cutoff.
    pub omitted_mass_bound: f64,
    /// Finest dyadic spacing of the Brownian grids.
    pub grid_resolution: f64,
}

#[derive(Clone, Debug)]
pub struct CoupledSoups {
    pub discrete: Vec<DiscreteLoop>,
    pub continuous: Vec<ContinuousLoop>,
    pub report: CorrespondenceReport,
}

enum Item {
    Pair { walk: DiscreteLoop, brownian: ContinuousLoop, distance: f64 },
    Walk(DiscreteLoop),
    Brownian(ContinuousLoop),
}

struct Generation {
    items: Vec<Item>,
    disagreeing: u64,
}

/// A Brownian loop of generation `n` in `cell`; `shape` is a standard bridge
/// on the dyadic grid, drawn fresh when absent.
fn brownian_loop<R: Rng + ?Sized>(
    cfg: &SoupCouplingConfig,
    cell: &[i32],
    n: usize,
    shape: Option<&[f64]>,
    rng: &mut R,
) -> Result<ContinuousLoop> {
    let duration = sample_duration(cfg.dim, n, rng)?;
    let offset: Vec<f64> = (0..cfg.dim).map(|_| open01(rng) - 0.5).collect();
    let root = cell.iter().zip(&offset).map(|(&z, y)| z as f64 + y).collect();
    let levels = loop_levels(cfg.levels, n);
    let grid = match shape {
        Some(standard) => standard.iter().map(|v| v * duration.sqrt()).collect(),
        None => sample_brownian_bridge(cfg.dim, duration, levels, rng)?,
    };
    Ok(ContinuousLoop { dim: cfg.dim, root, duration, grid, cell: cell.to_vec(), generation: n })
}

/// Dyadic depth for a loop of `2n` steps: no finer than `levels`, and no
/// finer than twice the step resolution.
fn loop_levels(levels: u32, n: usize) -> u32 {
    let steps_bits = usize::BITS - (2 * n).leading_zeros();
    levels.min(steps_bits + 1).max(1)
}

fn generation<R: Rng + ?Sized>(
    cfg: &SoupCouplingConfig,
    cells: &[i32],
    n: usize,
    consts: &BlConstants,
    coupler: &mut BridgeCoupler,
    walks: &mut BridgeSampler,
    rng: &mut R,
) -> Result<Generation> {
    let dim = cfg.dim;
    let cell_count = cells.len() / dim;
    let counts = PoissonCoupler::new(cfg.lambda * consts.q_tilde[n - 1], cfg.lambda * consts.q[n - 1])?;
    let active = Binomial::new(cell_count as u64, (1.0 - counts.both_zero()).clamp(0.0, 1.0))
        .map_err(|e| crate::Error::Internal(e.to_string()))?
        .sample(rng) as usize;
    let mut chosen = index::sample(rng, cell_count, active).into_vec();
    chosen.sort_unstable();
    let mut out = Generation { items: Vec::new(), disagreeing: 0 };
    let mut buf = Vec::new();
    for c in chosen {
        let cell = &cells[c * dim..(c + 1) * dim];
        let k = counts.sample_nonzero(rng);
        if !k.agreed {
            out.disagreeing += 1;
        }
        let common = k.n_discrete.min(k.n_brownian);
        for _ in 0..common {
            let raw = coupler.couple_raw(2 * n, loop_levels(cfg.levels, n), rng)?;
            let label = cfg.lambda * (1.0 - open01(rng));
            let dyadic = raw.dyadic_values();
            let brownian = brownian_loop(cfg, cell, n, Some(&dyadic), rng)?;
            let sqrt_t = brownian.duration.sqrt();
            let offset: Vec<f64> = brownian.root.iter().zip(cell).map(|(r, &z)| r - z as f64).collect();
            let cont_values = raw.continuous.iter().enumerate().map(|(i, v)| offset[i % dim] + sqrt_t * v).collect();
            let cont = TimedPath::new(dim, raw.continuous_times(), cont_values)?;
            let walk_rel = TimedPath::new(dim, raw.discrete_times(), raw.discrete.iter().map(|&x| x as f64).collect())?;
            let distance = sup_distance(&walk_rel, &cont)?;
            let sites = raw.discrete.iter().enumerate().map(|(i, &x)| x + cell[i % dim]).collect();
            let walk = DiscreteLoop::new_unchecked(LatticePath::from_flat_unchecked(dim, sites, PathKind::NearestNeighbor), label);
            out.items.push(Item::Pair { walk, brownian, distance });
        }
        for _ in common..k.n_discrete {
            walks.sample_into(n, cell, rng, &mut buf);
            let label = cfg.lambda * (1.0 - open01(rng));
            let path = LatticePath::from_flat_unchecked(dim, buf.clone(), PathKind::NearestNeighbor);
            out.items.push(Item::Walk(DiscreteLoop::new_unchecked(path, label)));
        }
        for _ in common..k.n_brownian {
            let brownian = brownian_loop(cfg, cell, n, None, rng)?;
            out.items.push(Item::Brownian(brownian));
        }
    }
    Ok(out)
}

/// Random walk and Brownian loop soups from shared randomness.
///
/// For every cell `z` of the box and half-length `n`, the two counts are
/// maximally coupled Poisson variables with means `lambda q_tilde_n` and
/// `lambda q_n`; the `j`-th loops on both sides share a coupled bridge, a
/// duration from the generation window and a uniform root offset. Cells
/// where both counts vanish are skipped by drawing the number of active
/// cells first. Generation `n` uses the stream `n` of a seed drawn from
/// `rng`, so the output does not depend on the thread count.
pub fn couple_soups<R: Rng + ?Sized>(cfg: &SoupCouplingConfig, rng: &mut R) -> Result<CoupledSoups> {
    cfg.check()?;
    let dim = cfg.dim;
    let cells = cube_roots(dim, cfg.reach());
    let cell_count = cells.len() / dim;
    let n_max = match cfg.max_half_length {
        Some(n) if n >= 1 => n,
        Some(_) => return domain("max_half_length must be at least 1"),
        None => default_max_half_length(dim, cell_count, cfg.lambda.max(1e-300), 1e-2)?,
    };
    let consts = BlConstants::new(dim, n_max)?;
    let seed = rng.next_u64();
    let generations: Vec<Generation> = (1..=n_max)
        .into_par_iter()
        .map_init(
            || (BridgeCoupler::new(dim), BridgeSampler::new(dim)),
            |(coupler, walks), n| generation(cfg, &cells, n, &consts, coupler, walks, &mut stream(seed, n as u64)),
        )
        .collect::<Result<_>>()?;

    let large_n = cfg.large_half_length();
    let envelope = cfg.envelope();
    let mut discrete = Vec::new();
    let mut continuous = Vec::new();
    let mut pairs = Vec::new();
    let mut unmatched_discrete = Vec::new();
    let mut unmatched_brownian = Vec::new();
    let mut disagreeing_cells = 0;
    for (i, g) in generations.into_iter().enumerate() {
        let n = i + 1;
        if n >= large_n {
            disagreeing_cells += g.disagreeing;
        }
        for item in g.items {
            match item {
                Item::Pair { walk, brownian, distance } => {
                    pairs.push(PairRecord {
                        discrete_id: discrete.len(),
                        continuous_id: continuous.len(),
                        cell: brownian.cell.clone(),
                        half_length: n,
                        sup_distance: distance,
                        duration_gap: (brownian.duration - 2.0 * n as f64 / dim as f64).abs(),
                        large: n >= large_n,
                        flagged: false,
                    });
                    discrete.push(walk);
                    continuous.push(brownian);
                }
                Item::Walk(walk) => {
                    unmatched_discrete.push(discrete.len());
                    discrete.push(walk);
                }
                Item::Brownian(brownian) => {
                    unmatched_brownian.push(continuous.len());
                    continuous.push(brownian);
                }
            }
        }
    }
    let mut ratios: Vec<f64> = pairs.iter().filter(|p| p.large).map(|p| p.sup_distance / envelope).collect();
    ratios.sort_by(f64::total_cmp);
    let fitted_constant = (!ratios.is_empty()).then(|| {
        let m = ratios.len();
        if m % 2 == 1 {
            ratios[m / 2]
        } else {
            0.5 * (ratios[m / 2 - 1] + ratios[m / 2])
        }
    });
    let mut any_flagged = false;
    if let Some(c) = fitted_constant {
        for p in pairs.iter_mut().filter(|p| p.large) {
            p.flagged = p.sup_distance > 10.0 * c * envelope;
            any_flagged |= p.flagged;
        }
    }
    let expected_disagreements = (large_n..=n_max)
        .map(|n| {
            PoissonCoupler::new(cfg.lambda * consts.q_tilde[n - 1], cfg.lambda * consts.q[n - 1]).map(|c| c.tv())
        })
        .sum::<Result<f64>>()?
        * cell_count as f64;
    let report = CorrespondenceReport {
        pairs,
        unmatched_discrete,
        unmatched_brownian,
        disagreeing_cells,
        expected_disagreements,
        fitted_constant,
        envelope,
        success: disagreeing_cells == 0 && !any_flagged,
        max_half_length: n_max,
        omitted_mass_bound: cfg.lambda * cell_count as f64 * tail_mass_bound(dim, n_max)?,
        grid_resolution: 1.0 / (1u64 << cfg.levels) as f64,
    };
    Ok(CoupledSoups { discrete, continuous, report })
}
