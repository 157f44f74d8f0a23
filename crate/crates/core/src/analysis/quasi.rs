//! Quasi-loops: centers `v` such that the path visits `B(v, s)` twice with an
//! excursion beyond `B(v, r)` in between.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::lattice::{BoundaryConvention, Domain, LatticePath, LoopEraser, Site};
use crate::rng::par_blocks;
use crate::stats::{binomial_std_err, fingerprint, EstimatorReport};
use crate::walks::lerw_into;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuasiLoopQuery {
    pub s: f64,
    pub r: f64,
}

impl QuasiLoopQuery {
    pub fn new(s: f64, r: f64) -> Result<Self> {
        if !(s > 0.0 && s < r && r.is_finite()) {
            return domain(format!("quasi-loop radii need 0 < s < r, got s = {s}, r = {r}"));
        }
        Ok(QuasiLoopQuery { s, r })
    }
}

/// Bounding boxes of index ranges of a path, as a binary segment tree.
struct PathTree<'a> {
    dim: usize,
    coords: &'a [i32],
    len: usize,
    lo: Vec<i32>,
    hi: Vec<i32>,
}

fn d2_point(x: &[i32], c: &[f64]) -> f64 {
    x.iter().zip(c).map(|(&a, b)| (a as f64 - b).powi(2)).sum()
}

impl<'a> PathTree<'a> {
    fn new(dim: usize, coords: &'a [i32]) -> Self {
        let len = coords.len() / dim;
        let nodes = 4 * len.max(1);
        let mut t = PathTree { dim, coords, len, lo: vec![0; nodes * dim], hi: vec![0; nodes * dim] };
        if len > 0 {
            t.build(1, 0, len - 1);
        }
        t
    }

    fn site(&self, i: usize) -> &[i32] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    fn build(&mut self, node: usize, a: usize, b: usize) {
        let d = self.dim;
        if a == b {
            for k in 0..d {
                let v = self.coords[a * d + k];
                self.lo[node * d + k] = v;
                self.hi[node * d + k] = v;
            }
            return;
        }
        let mid = (a + b) / 2;
        self.build(2 * node, a, mid);
        self.build(2 * node + 1, mid + 1, b);
        for k in 0..d {
            self.lo[node * d + k] = self.lo[2 * node * d + k].min(self.lo[(2 * node + 1) * d + k]);
            self.hi[node * d + k] = self.hi[2 * node * d + k].max(self.hi[(2 * node + 1) * d + k]);
        }
    }

    fn min_d2(&self, node: usize, c: &[f64]) -> f64 {
        let d = self.dim;
        (0..d)
            .map(|k| {
                let (lo, hi) = (self.lo[node * d + k] as f64, self.hi[node * d + k] as f64);
                (lo - c[k]).max(c[k] - hi).max(0.0).powi(2)
            })
            .sum()
    }

    fn max_d2(&self, node: usize, c: &[f64]) -> f64 {
        let d = self.dim;
        (0..d)
            .map(|k| {
                let (lo, hi) = (self.lo[node * d + k] as f64, self.hi[node * d + k] as f64);
                (c[k] - lo).abs().max((hi - c[k]).abs()).powi(2)
            })
            .sum()
    }

    /// First (or last) index whose squared distance to `c` is at most `r2`.
    fn extreme_within(&self, c: &[f64], r2: f64, last: bool) -> Option<usize> {
        if self.len == 0 || r2 < 0.0 {
            return None;
        }
        self.extreme_in(1, 0, self.len - 1, c, r2, last)
    }

    fn extreme_in(&self, node: usize, a: usize, b: usize, c: &[f64], r2: f64, last: bool) -> Option<usize> {
        if self.min_d2(node, c) > r2 {
            return None;
        }
        if a == b {
            return (d2_point(self.site(a), c) <= r2).then_some(a);
        }
        let mid = (a + b) / 2;
        let left = (2 * node, a, mid);
        let right = (2 * node + 1, mid + 1, b);
        let (first, second) = if last { (right, left) } else { (left, right) };
        self.extreme_in(first.0, first.1, first.2, c, r2, last)
            .or_else(|| self.extreme_in(second.0, second.1, second.2, c, r2, last))
    }

    /// Whether some index in `[qa, qb]` is farther than `sqrt(r2)` from `c`.
    fn any_beyond(&self, qa: usize, qb: usize, c: &[f64], r2: f64) -> bool {
        qa <= qb && self.beyond_in(1, 0, self.len - 1, qa, qb, c, r2)
    }

    #[allow(clippy::too_many_arguments)]
    fn beyond_in(&self, node: usize, a: usize, b: usize, qa: usize, qb: usize, c: &[f64], r2: f64) -> bool {
        if b < qa || a > qb || self.max_d2(node, c) <= r2 {
            return false;
        }
        if qa <= a && b <= qb && self.min_d2(node, c) > r2 {
            return true;
        }
        if a == b {
            return d2_point(self.site(a), c) > r2;
        }
        let mid = (a + b) / 2;
        self.beyond_in(2 * node, a, mid, qa, qb, c, r2) || self.beyond_in(2 * node + 1, mid + 1, b, qa, qb, c, r2)
    }
}

fn sq(x: f64) -> f64 {
    if x < 0.0 {
        -1.0
    } else {
        x * x
    }
}

/// Hierarchical scan over boxes of candidate centers. For a box with center
/// `c` and half-diagonal `rho`, the first and last visits to `B(v, s)` of
/// every `v` in the box are bracketed by those of `B(c, s - rho)` and
/// `B(c, s + rho)`, which often settles the whole box at once; boxes that
/// are not settled are halved along their longest side down to single
/// sites, which are decided exactly.
fn scan(dim: usize, coords: &[i32], q: QuasiLoopQuery, stop_at_first: bool) -> BTreeSet<Site> {
    let mut out = BTreeSet::new();
    let len = coords.len() / dim;
    if len == 0 {
        return out;
    }
    let tree = PathTree::new(dim, coords);
    let pad = q.s.floor() as i32;
    let mut lo = vec![i32::MAX; dim];
    let mut hi = vec![i32::MIN; dim];
    for x in coords.chunks_exact(dim) {
        for k in 0..dim {
            lo[k] = lo[k].min(x[k] - pad);
            hi[k] = hi[k].max(x[k] + pad);
        }
    }
    let mut stack = vec![(lo, hi)];
    let mut c = vec![0.0; dim];
    while let Some((lo, hi)) = stack.pop() {
        let mut diag2 = 0.0;
        for k in 0..dim {
            c[k] = 0.5 * (lo[k] as f64 + hi[k] as f64);
            diag2 += (hi[k] as f64 - lo[k] as f64).powi(2);
        }
        let rho = 0.5 * diag2.sqrt();
        if rho == 0.0 {
            let v: Vec<i32> = lo.clone();
            if is_center(&tree, &c, q) {
                out.insert(Site::from(v));
                if stop_at_first {
                    return out;
                }
            }
            continue;
        }
        // Slack against rounding in the real-valued bounds; it only causes
        // extra subdivision.
        let slack = 1e-9 * (1.0 + q.r + rho);
        let outer = sq(q.s + rho + slack);
        let Some(f_lo) = tree.extreme_within(&c, outer, false) else { continue };
        let l_hi = tree.extreme_within(&c, outer, true).expect("a first visit implies a last one");
        let inner = sq(q.s - rho - slack);
        if let (Some(f_hi), Some(l_lo)) = (tree.extreme_within(&c, inner, false), tree.extreme_within(&c, inner, true)) {
            if f_hi <= l_lo && tree.any_beyond(f_hi, l_lo, &c, sq(q.r + rho + slack)) {
                add_box(&lo, &hi, &mut out);
                if stop_at_first {
                    return out;
                }
                continue;
            }
        }
        let far = q.r - rho - slack;
        if far >= 0.0 && !tree.any_beyond(f_lo, l_hi, &c, far * far) {
            continue;
        }
        let axis = (0..dim).max_by_key(|&k| (hi[k] - lo[k], usize::MAX - k)).expect("dim >= 1");
        let mid = lo[axis] + (hi[axis] - lo[axis]) / 2;
        let mut left_hi = hi.clone();
        left_hi[axis] = mid;
        let mut right_lo = lo.clone();
        right_lo[axis] = mid + 1;
        stack.push((right_lo, hi));
        stack.push((lo, left_hi));
    }
    out
}

fn is_center(tree: &PathTree<'_>, c: &[f64], q: QuasiLoopQuery) -> bool {
    let s2 = q.s * q.s;
    let Some(f) = tree.extreme_within(c, s2, false) else { return false };
    let l = tree.extreme_within(c, s2, true).expect("a first visit implies a last one");
    tree.any_beyond(f, l, c, q.r * q.r)
}

fn add_box(lo: &[i32], hi: &[i32], out: &mut BTreeSet<Site>) {
    let mut x = lo.to_vec();
    loop {
        out.insert(Site::new(&x));
        let mut k = 0;
        loop {
            if k == x.len() {
                return;
            }
            if x[k] < hi[k] {
                x[k] += 1;
                break;
            }
            x[k] = lo[k];
            k += 1;
        }
    }
}

/// All centers `v` for which some `i <= j` have `path[i], path[j]` in
/// `B(v, s)` and `path[i..=j]` leaves `B(v, r)`.
///
/// A center always has a path site within distance `s`, so only such
/// sites are candidates and the result is exact.
pub fn scan_quasi_loops(path: &LatticePath, q: QuasiLoopQuery) -> BTreeSet<Site> {
    scan(path.dim(), path.flat(), q, false)
}

/// Whether [`scan_quasi_loops`] would return a nonempty set.
pub fn has_quasi_loop(path: &LatticePath, q: QuasiLoopQuery) -> bool {
    !scan(path.dim(), path.flat(), q, true).is_empty()
}

fn check_scales(n: i64, eps: f64, m: u32) -> Result<()> {
    if n < 1 {
        return domain("radius must be at least 1");
    }
    if !(eps > 0.0 && eps < 1.0) {
        return domain(format!("epsilon = {eps} must lie in (0, 1)"));
    }
    if m < 1 {
        return domain("exponent M must be at least 1");
    }
    Ok(())
}

/// The query `(eps^M n, sqrt(eps) n)`.
pub fn quasi_loop_query(n: i64, eps: f64, m: u32) -> Result<QuasiLoopQuery> {
    check_scales(n, eps, m)?;
    QuasiLoopQuery::new(eps.powi(m as i32) * n as f64, eps.sqrt() * n as f64)
}

/// Frequency of quasi-loops `(eps^M n, sqrt(eps) n)` in the loop erasure of
/// a walk from the origin to the exit of the closed ball `B(0, n)` in `Z^3`.
pub fn quasi_loop_probability(n: i64, eps: f64, m: u32, samples: u64, seed: u64) -> Result<EstimatorReport> {
    check_scales(n, eps, m)?;
    if eps.powi(m as i32) * (n as f64) < 1.0 {
        return domain(format!("eps^M n = {} is below the lattice spacing", eps.powi(m as i32) * n as f64));
    }
    let point = quasi_loop_curve(n, &[eps], m, samples, seed)?.remove(0);
    Ok(point.report)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuasiLoopPoint {
    pub eps: f64,
    pub query: QuasiLoopQuery,
    /// `s < 1`: `B(v, s)` is the single site `v`, so a simple path has no
    /// quasi-loop and the estimate is exactly 0.
    pub sub_lattice: bool,
    pub report: EstimatorReport,
}

/// Quasi-loop frequencies for several `eps` on shared LERW samples.
///
/// Values with `eps^M n < 1` are allowed here and flagged as sub-lattice.
pub fn quasi_loop_curve(n: i64, eps: &[f64], m: u32, samples: u64, seed: u64) -> Result<Vec<QuasiLoopPoint>> {
    let queries = eps.iter().map(|&e| quasi_loop_query(n, e, m)).collect::<Result<Vec<_>>>()?;
    let dom = Domain::new(3, n, BoundaryConvention::Closed)?;
    let blocks = par_blocks(seed, samples, |rng, _, count| -> Result<Vec<u64>> {
        let mut hits = vec![0u64; queries.len()];
        let mut eraser = LoopEraser::new(3);
        for _ in 0..count {
            lerw_into(&dom, &mut eraser, rng)?;
            for (h, q) in hits.iter_mut().zip(&queries) {
                if !scan(3, eraser.flat(), *q, true).is_empty() {
                    *h += 1;
                }
            }
        }
        Ok(hits)
    });
    let mut hits = vec![0u64; queries.len()];
    for b in blocks {
        for (h, x) in hits.iter_mut().zip(b?) {
            *h += x;
        }
    }
    Ok(eps
        .iter()
        .zip(&queries)
        .zip(hits)
        .map(|((&e, q), h)| {
            let config = format!("quasi-loop d=3 n={n} eps={e} M={m} samples={samples} seed={seed}");
            let p = if samples == 0 { 0.0 } else { h as f64 / samples as f64 };
            QuasiLoopPoint {
                eps: e,
                query: *q,
                sub_lattice: q.s < 1.0,
                report: EstimatorReport {
                    estimate: p,
                    std_err: binomial_std_err(p, samples),
                    samples,
                    fingerprint: fingerprint(&config),
                },
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::PathKind;

    fn path(sites: &[[i32; 2]]) -> LatticePath {
        LatticePath::from_flat(2, sites.concat(), PathKind::NearestNeighbor).unwrap()
    }

    #[test]
    fn straight_line_has_none() {
        let p = path(&(0..30).map(|i| [i, 0]).collect::<Vec<_>>());
        assert!(scan_quasi_loops(&p, QuasiLoopQuery::new(2.0, 5.0).unwrap()).is_empty());
    }

    #[test]
    fn hairpin_has_its_base() {
        // Out along y = 0 to x = 10, up one, back along y = 1.
        let mut sites: Vec<[i32; 2]> = (0..=10).map(|i| [i, 0]).collect();
        sites.extend((0..=10).rev().map(|i| [i, 1]));
        let p = path(&sites);
        let q = QuasiLoopQuery::new(1.0, 6.0).unwrap();
        let found = scan_quasi_loops(&p, q);
        assert!(found.contains(&Site::new(&[0, 0])));
        assert!(found.contains(&Site::new(&[0, 1])));
        assert!(!found.contains(&Site::new(&[10, 0])));
        assert!(has_quasi_loop(&p, q));
        assert!(!has_quasi_loop(&p, QuasiLoopQuery::new(1.0, 11.0).unwrap()));
    }

    #[test]
    fn invalid_queries() {
        assert!(QuasiLoopQuery::new(2.0, 2.0).is_err());
        assert!(QuasiLoopQuery::new(0.0, 2.0).is_err());
        assert!(quasi_loop_probability(256, 1.0, 2, 10, 0).is_err());
        assert!(quasi_loop_probability(256, 0.0, 2, 10, 0).is_err());
        assert!(quasi_loop_probability(256, 1.0 / 32.0, 2, 10, 0).is_err());
    }

    #[test]
    fn report_is_binomial() {
        let r = quasi_loop_probability(32, 0.25, 1, 200, 3).unwrap();
        assert!((0.0..=1.0).contains(&r.estimate));
        assert!((r.std_err - (r.estimate * (1.0 - r.estimate) / 200.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn sub_lattice_points_are_zero() {
        let pts = quasi_loop_curve(64, &[0.5, 0.05], 2, 50, 1).unwrap();
        assert!(!pts[0].sub_lattice);
        assert!(pts[1].sub_lattice);
        assert_eq!(pts[1].report.estimate, 0.0);
    }
}
