//! The trace of a stopped walk as a loop-erased walk plus the soup loops
//! that meet it.
//!
//! For a walk from the origin stopped on leaving a ball `A`, the set of
//! interior sites it visits has the same law as the interior sites of an
//! independent LERW together with every loop of an intensity-1 loop soup
//! that stays in `A` and meets the LERW. The exit site is excluded on both
//! sides.

use std::collections::{BTreeSet, VecDeque};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::lattice::{BoundaryConvention, DiscreteLoop, Domain, LatticePath, LoopEraser, PathKind, Site, SiteSet};
use crate::rng::par_blocks;
use crate::soup::RwSoupSampler;
use crate::stats::{binomial_std_err, EstimatorReport};
use crate::walks::{walk_to_exit, DomainGraph};

/// Expected number of contained loops dropped by the length cutoff.
pub const CONTAINED_TAIL_BUDGET: f64 = 1e-6;

/// Largest interior accepted by the verifier.
pub const MAX_ORACLE_SITES: usize = 10_000;

#[derive(Clone, Debug)]
pub struct DecomposedTrace {
    pub lerw: LatticePath,
    pub kept_loops: Vec<DiscreteLoop>,
    pub trace: BTreeSet<Site>,
}

/// Bound on the expected number of loops of an intensity-1 soup that stay
/// in `A` and have half-length above `n_max`:
/// `sum_{n > N} tr(P_A^2n) / 2n <= |A| rho^(2N+2) / ((2N + 2)(1 - rho^2))`.
pub fn contained_tail_bound(sites: usize, rho: f64, n_max: usize) -> f64 {
    if rho >= 1.0 {
        return f64::INFINITY;
    }
    let m = 2.0 * (n_max as f64 + 1.0);
    sites as f64 * rho.powf(m) / (m * (1.0 - rho * rho))
}

/// Reusable sampler of decomposed traces on one domain.
#[derive(Clone, Debug)]
pub struct Decomposer {
    graph: DomainGraph,
    soup: RwSoupSampler,
    max_half_length: usize,
    tail_bound: f64,
    eraser: LoopEraser,
    lerw_stamp: Vec<u64>,
    trace_stamp: Vec<u64>,
    epoch: u64,
    loop_sites: Vec<usize>,
}

impl Decomposer {
    pub fn new(dim: usize, radius: i64, convention: BoundaryConvention) -> Result<Self> {
        let domain_ = Domain::new(dim, radius, convention)?;
        let graph = DomainGraph::new(domain_)?;
        let rho = graph.spectral_radius_bound();
        let mut n_max = 1;
        while contained_tail_bound(graph.len(), rho, n_max) >= CONTAINED_TAIL_BUDGET {
            n_max += 1;
            if n_max > 1_000_000 {
                return domain("domain too large for the contained-loop cutoff");
            }
        }
        let roots: Vec<i32> = graph.sites().concat();
        let soup = RwSoupSampler::new(dim, roots, 1.0, n_max)?;
        let sites = graph.len();
        Ok(Decomposer {
            tail_bound: contained_tail_bound(sites, rho, n_max),
            graph,
            soup,
            max_half_length: n_max,
            eraser: LoopEraser::new(dim),
            lerw_stamp: vec![0; sites],
            trace_stamp: vec![0; sites],
            epoch: 0,
            loop_sites: Vec::new(),
        })
    }

    pub fn graph(&self) -> &DomainGraph {
        &self.graph
    }

    pub fn max_half_length(&self) -> usize {
        self.max_half_length
    }

    pub fn tail_bound(&self) -> f64 {
        self.tail_bound
    }

    /// Samples one decomposition; `on_site` receives the index of every
    /// trace site once, `on_loop` every kept loop.
    fn sample_with<R, S, L>(&mut self, rng: &mut R, mut on_site: S, mut on_loop: L) -> Result<()>
    where
        R: Rng + ?Sized,
        S: FnMut(usize),
        L: FnMut(f64, &[i32]),
    {
        self.epoch += 1;
        let epoch = self.epoch;
        let dom = self.graph.domain();
        self.eraser.clear();
        let eraser = &mut self.eraser;
        walk_to_exit(&dom, &vec![0; dom.dim], rng, |x| eraser.push(x))?;
        for k in 0..self.eraser.len() {
            if let Some(i) = self.graph.index_of(self.eraser.site(k)) {
                self.lerw_stamp[i] = epoch;
                if self.trace_stamp[i] != epoch {
                    self.trace_stamp[i] = epoch;
                    on_site(i);
                }
            }
        }
        let dim = dom.dim;
        let graph = &self.graph;
        let lerw_stamp = &self.lerw_stamp;
        let trace_stamp = &mut self.trace_stamp;
        let loop_sites = &mut self.loop_sites;
        self.soup.for_each_loop(rng, |_, label, sites| {
            loop_sites.clear();
            let mut meets = false;
            for x in sites.chunks_exact(dim) {
                match graph.index_of(x) {
                    Some(i) => {
                        meets |= lerw_stamp[i] == epoch;
                        loop_sites.push(i);
                    }
                    None => return,
                }
            }
            if meets {
                for &i in loop_sites.iter() {
                    if trace_stamp[i] != epoch {
                        trace_stamp[i] = epoch;
                        on_site(i);
                    }
                }
                on_loop(label, sites);
            }
        });
        Ok(())
    }

    pub fn sample<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<DecomposedTrace> {
        let dim = self.graph.domain().dim;
        let mut trace_idx = Vec::new();
        let mut kept = Vec::new();
        self.sample_with(
            rng,
            |i| trace_idx.push(i),
            |label, sites| {
                let path = LatticePath::from_flat_unchecked(dim, sites.to_vec(), PathKind::NearestNeighbor);
                kept.push(DiscreteLoop::new_unchecked(path, label));
            },
        )?;
        let lerw = self.eraser.clone().into_path().expect("walk has at least one site");
        let trace = trace_idx.into_iter().map(|i| Site::new(&self.graph.sites()[i])).collect();
        Ok(DecomposedTrace { lerw, kept_loops: kept, trace })
    }

    /// Interior-site indices of one decomposed trace, in no particular order.
    pub fn sample_indices<R: Rng + ?Sized>(&mut self, rng: &mut R, out: &mut Vec<usize>) -> Result<()> {
        out.clear();
        self.sample_with(rng, |i| out.push(i), |_, _| {})
    }
}

/// Interior-site indices visited by a stopped walk from the origin.
pub fn srw_trace_indices<R: Rng + ?Sized>(graph: &DomainGraph, rng: &mut R, out: &mut Vec<usize>) -> Result<()> {
    out.clear();
    let dom = graph.domain();
    let mut seen = vec![false; graph.len()];
    walk_to_exit(&dom, &vec![0; dom.dim], rng, |x| {
        if let Some(i) = graph.index_of(x) {
            if !seen[i] {
                seen[i] = true;
                out.push(i);
            }
        }
    })?;
    Ok(())
}

/// One decomposed trace on the ball of radius `n` (open convention).
pub fn sample_decomposed_trace<R: Rng + ?Sized>(dim: usize, n: i64, rng: &mut R) -> Result<DecomposedTrace> {
    if n < 2 {
        return domain("the decomposition needs n >= 2");
    }
    Decomposer::new(dim, n, BoundaryConvention::Open)?.sample(rng)
}

/// True when `sites` induce a connected subgraph of the lattice.
pub fn is_connected(sites: &BTreeSet<Site>) -> bool {
    let Some(start) = sites.iter().next() else {
        return true;
    };
    let dim = start.dim();
    let mut index = SiteSet::with_capacity(dim, sites.len());
    for s in sites {
        index.insert(s.coords());
    }
    let mut seen = SiteSet::new(dim);
    seen.insert(start.coords());
    let mut queue = VecDeque::from([start.coords().to_vec()]);
    while let Some(x) = queue.pop_front() {
        for nb in crate::lattice::neighbours(&x) {
            if index.contains(&nb) && seen.insert(&nb) {
                queue.push_back(nb);
            }
        }
    }
    seen.len() == sites.len()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SiteRow {
    pub site: Vec<i32>,
    pub mc_estimate: f64,
    pub exact: f64,
    /// Binomial standard error at the exact probability.
    pub std_err: f64,
    pub z: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecompositionReport {
    pub dim: usize,
    pub radius: i64,
    pub convention: BoundaryConvention,
    pub samples: u64,
    pub max_half_length: usize,
    pub contained_tail_bound: f64,
    pub rows: Vec<SiteRow>,
    pub max_abs_z: f64,
    pub fraction_above_3: f64,
    pub fraction_within_4: f64,
}

impl DecompositionReport {
    /// Per-site estimates as estimator reports.
    pub fn estimators(&self) -> Vec<EstimatorReport> {
        self.rows
            .iter()
            .map(|r| {
                let config = format!("decomposition d={} n={} {} x={:?}", self.dim, self.radius, self.convention, r.site);
                EstimatorReport::binomial((r.mc_estimate * self.samples as f64).round() as u64, self.samples, &config)
            })
            .collect()
    }

    /// The acceptance event: at least 99% of sites with `|z| <= 4` and no
    /// site beyond `|z| = 6`.
    pub fn passes(&self) -> bool {
        self.fraction_within_4 >= 0.99 && self.max_abs_z <= 6.0
    }
}

/// Per-site inclusion frequencies of decomposed traces against the exact
/// visit probabilities of the stopped walk.
pub fn verify_decomposition(
    dim: usize,
    n: i64,
    convention: BoundaryConvention,
    samples: u64,
    seed: u64,
) -> Result<DecompositionReport> {
    if samples == 0 {
        return domain("at least one sample is required");
    }
    let decomposer = Decomposer::new(dim, n, convention)?;
    let graph = decomposer.graph().clone();
    if graph.len() > MAX_ORACLE_SITES {
        return domain(format!("{} interior sites exceed the oracle limit {MAX_ORACLE_SITES}", graph.len()));
    }
    let exact = graph.visit_probabilities()?;
    let blocks = par_blocks(seed, samples, |rng, _, count| -> Result<Vec<u64>> {
        let mut local = decomposer.clone();
        let mut counts = vec![0u64; graph.len()];
        let mut idx = Vec::new();
        for _ in 0..count {
            local.sample_indices(rng, &mut idx)?;
            for &i in &idx {
                counts[i] += 1;
            }
        }
        Ok(counts)
    });
    let mut counts = vec![0u64; graph.len()];
    for block in blocks {
        for (c, b) in counts.iter_mut().zip(block?) {
            *c += b;
        }
    }
    let mut rows = Vec::with_capacity(graph.len());
    for (i, site) in graph.sites().iter().enumerate() {
        let p = exact[i].clamp(0.0, 1.0);
        let est = counts[i] as f64 / samples as f64;
        let se = binomial_std_err(p, samples);
        let z = if se > 0.0 {
            (est - p) / se
        } else if (est - p).abs() < 1e-12 {
            0.0
        } else {
            f64::INFINITY
        };
        rows.push(SiteRow { site: site.clone(), mc_estimate: est, exact: exact[i], std_err: se, z });
    }
    let max_abs_z = rows.iter().map(|r| r.z.abs()).fold(0.0, f64::max);
    let sites = rows.len() as f64;
    let fraction_above_3 = rows.iter().filter(|r| r.z.abs() > 3.0).count() as f64 / sites;
    let fraction_within_4 = rows.iter().filter(|r| r.z.abs() <= 4.0).count() as f64 / sites;
    Ok(DecompositionReport {
        dim,
        radius: n,
        convention,
        samples,
        max_half_length: decomposer.max_half_length(),
        contained_tail_bound: decomposer.tail_bound(),
        rows,
        max_abs_z,
        fraction_above_3,
        fraction_within_4,
    })
}
