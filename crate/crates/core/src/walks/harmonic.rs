//! Exact small-domain oracles for the walk killed on leaving a ball.
//!
//! With `P_A` the transition matrix restricted to the interior `A`, the
//! matrix `I - P_A` is symmetric positive definite, so every linear system
//! here is solved by conjugate gradients to a relative residual of `1e-14`.

use rayon::prelude::*;

use crate::error::{domain, Error, Result};
use crate::lattice::{BoundaryConvention, Domain, Site};

const OUTSIDE: u32 = u32::MAX;

/// Interior sites of a ball, a dense box lookup and the neighbour table.
#[derive(Clone, Debug)]
pub struct DomainGraph {
    domain: Domain,
    sites: Vec<Vec<i32>>,
    neighbours: Vec<u32>,
    reach: i32,
    side: usize,
    lookup: Vec<u32>,
}

impl DomainGraph {
    pub fn new(domain: Domain) -> Result<Self> {
        let reach = domain.reach();
        let side = (2 * reach + 1) as usize;
        let cells = side
            .checked_pow(domain.dim as u32)
            .filter(|&c| c <= 50_000_000)
            .ok_or_else(|| Error::Domain("domain too large for a dense index".into()))?;
        let sites = domain.sites();
        let mut graph = DomainGraph { domain, sites, neighbours: Vec::new(), reach, side, lookup: vec![OUTSIDE; cells] };
        for (i, s) in graph.sites.iter().enumerate() {
            let cell = graph.cell(s).expect("interior site inside its box");
            graph.lookup[cell] = i as u32;
        }
        let dim = domain.dim;
        let mut neighbours = Vec::with_capacity(graph.sites.len() * 2 * dim);
        let mut x = vec![0i32; dim];
        for s in &graph.sites {
            for k in 0..2 * dim {
                x.copy_from_slice(s);
                x[k / 2] += if k % 2 == 0 { 1 } else { -1 };
                neighbours.push(graph.index_of(&x).map_or(OUTSIDE, |i| i as u32));
            }
        }
        graph.neighbours = neighbours;
        Ok(graph)
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    /// Interior sites in lexicographic order; indices refer to this order.
    pub fn sites(&self) -> &[Vec<i32>] {
        &self.sites
    }

    #[inline]
    fn cell(&self, x: &[i32]) -> Option<usize> {
        let mut cell = 0usize;
        for &c in x.iter().rev() {
            if c < -self.reach || c > self.reach {
                return None;
            }
            cell = cell * self.side + (c + self.reach) as usize;
        }
        Some(cell)
    }

    #[inline]
    pub fn index_of(&self, x: &[i32]) -> Option<usize> {
        self.cell(x).map(|c| self.lookup[c]).filter(|&i| i != OUTSIDE).map(|i| i as usize)
    }

    pub fn origin_index(&self) -> usize {
        self.index_of(&vec![0; self.domain.dim]).expect("origin is interior")
    }

    #[inline]
    fn neighbours_of(&self, i: usize) -> &[u32] {
        let k = 2 * self.domain.dim;
        &self.neighbours[i * k..(i + 1) * k]
    }

    /// `out = (I - P_A) v`, treating `removed` as an absorbing site.
    fn apply(&self, v: &[f64], out: &mut [f64], removed: Option<usize>) {
        let w = 1.0 / (2 * self.domain.dim) as f64;
        for i in 0..self.len() {
            if Some(i) == removed {
                out[i] = v[i];
                continue;
            }
            let mut acc = 0.0;
            for &j in self.neighbours_of(i) {
                if j != OUTSIDE && Some(j as usize) != removed {
                    acc += v[j as usize];
                }
            }
            out[i] = v[i] - w * acc;
        }
    }

    /// Solves `(I - P_A) x = b` with `removed` absorbing (its row is `x = b`).
    pub fn solve(&self, b: &[f64], removed: Option<usize>) -> Result<Vec<f64>> {
        let n = self.len();
        let mut x = vec![0.0; n];
        let mut r = b.to_vec();
        let mut p = r.clone();
        let mut ap = vec![0.0; n];
        let b_norm = b.iter().map(|v| v * v).sum::<f64>().sqrt();
        if b_norm == 0.0 {
            return Ok(x);
        }
        let mut rr: f64 = r.iter().map(|v| v * v).sum();
        for _ in 0..(20 * n + 1000) {
            if rr.sqrt() <= 1e-14 * b_norm {
                return Ok(x);
            }
            self.apply(&p, &mut ap, removed);
            let pap: f64 = p.iter().zip(&ap).map(|(a, b)| a * b).sum();
            if !(pap > 0.0) {
                return Err(Error::Internal("killed Laplacian lost positive definiteness".into()));
            }
            let alpha = rr / pap;
            for i in 0..n {
                x[i] += alpha * p[i];
                r[i] -= alpha * ap[i];
            }
            let rr_next: f64 = r.iter().map(|v| v * v).sum();
            let beta = rr_next / rr;
            rr = rr_next;
            for i in 0..n {
                p[i] = r[i] + beta * p[i];
            }
        }
        Err(Error::Internal("conjugate gradients did not converge".into()))
    }

    /// Largest residual `|h(y) - mean of h over neighbours|` over interior
    /// `y != x`, with `h = 0` outside the domain.
    pub fn harmonic_residual(&self, h: &[f64], x: usize) -> f64 {
        let w = 1.0 / (2 * self.domain.dim) as f64;
        (0..self.len())
            .filter(|&i| i != x)
            .map(|i| {
                let avg: f64 = self.neighbours_of(i).iter().filter(|&&j| j != OUTSIDE).map(|&j| h[j as usize]).sum::<f64>() * w;
                (h[i] - avg).abs()
            })
            .fold(0.0, f64::max)
    }

    /// `h(y) = P^y[hit x before leaving A]` at every interior `y`.
    pub fn hitting_field(&self, x: usize) -> Result<Vec<f64>> {
        let w = 1.0 / (2 * self.domain.dim) as f64;
        let mut b = vec![0.0; self.len()];
        for (i, bi) in b.iter_mut().enumerate() {
            if i != x {
                *bi = w * self.neighbours_of(i).iter().filter(|&&j| j as usize == x).count() as f64;
            }
        }
        let mut h = self.solve(&b, Some(x))?;
        h[x] = 1.0;
        Ok(h)
    }

    /// `P^0[SRW visits y before leaving A]` for every interior `y`, from the
    /// Green's function identity `G(0,y) / G(y,y)`.
    pub fn visit_probabilities(&self) -> Result<Vec<f64>> {
        let origin = self.origin_index();
        let mut e0 = vec![0.0; self.len()];
        e0[origin] = 1.0;
        let g0 = self.solve(&e0, None)?;
        (0..self.len())
            .into_par_iter()
            .map(|y| {
                let mut ey = vec![0.0; self.len()];
                ey[y] = 1.0;
                let gy = self.solve(&ey, None)?;
                Ok(g0[y] / gy[y])
            })
            .collect()
    }

    /// `E^0[exit time]` (number of steps until the first exterior site).
    pub fn expected_exit_time(&self) -> Result<f64> {
        let e = self.solve(&vec![1.0; self.len()], None)?;
        Ok(e[self.origin_index()])
    }

    /// Rigorous upper bound on the spectral radius of `P_A`.
    ///
    /// Power iteration on the symmetric nonnegative matrix `P_A` followed by
    /// the Collatz-Wielandt bound `max_i (P_A v)_i / v_i` for positive `v`.
    pub fn spectral_radius_bound(&self) -> f64 {
        let n = self.len();
        let w = 1.0 / (2 * self.domain.dim) as f64;
        let mut v = vec![1.0; n];
        let mut pv = vec![0.0; n];
        let step = |v: &[f64], out: &mut [f64]| {
            for i in 0..n {
                out[i] = w * self.neighbours_of(i).iter().filter(|&&j| j != OUTSIDE).map(|&j| v[j as usize]).sum::<f64>();
            }
        };
        for _ in 0..(50 * (self.domain.radius as usize + 1).pow(2) + 200) {
            step(&v, &mut pv);
            // P_A is periodic (bipartite); averaging with the identity keeps
            // the iteration converging to the Perron vector.
            let norm = pv.iter().zip(&v).map(|(a, b)| a + b).fold(0.0, f64::max);
            for i in 0..n {
                v[i] = (pv[i] + v[i]) / norm;
            }
        }
        step(&v, &mut pv);
        (0..n).map(|i| if v[i] > 0.0 { pv[i] / v[i] } else { 1.0 }).fold(0.0, f64::max).min(1.0)
    }
}

/// Exact `P^0[SRW visits x before its first exit]`.
pub fn visit_probability_exact(dim: usize, n: i64, x: &Site, convention: BoundaryConvention) -> Result<f64> {
    let graph = DomainGraph::new(Domain::new(dim, n, convention)?)?;
    if x.dim() != dim {
        return domain("site dimension does not match");
    }
    let xi = graph.index_of(x.coords()).ok_or_else(|| Error::Domain(format!("{x:?} is not an interior site")))?;
    let h = graph.hitting_field(xi)?;
    Ok(h[graph.origin_index()])
}

/// Exact expected number of steps until a walk from the origin exits.
pub fn expected_exit_time_exact(dim: usize, n: i64, convention: BoundaryConvention) -> Result<f64> {
    DomainGraph::new(Domain::new(dim, n, convention)?)?.expected_exit_time()
}
