//! Integer-lattice geometry: sites, paths, loop erasure, cut points, balls.

mod index;

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use smallvec::SmallVec;

use crate::error::{domain, Result};
pub use index::{SiteMap, SiteSet};

/// A point of `Z^d`.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Site(SmallVec<[i32; 4]>);

impl Site {
    pub fn new(coords: &[i32]) -> Self {
        Site(SmallVec::from_slice(coords))
    }

    pub fn origin(dim: usize) -> Self {
        Site(SmallVec::from_elem(0, dim))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[i32] {
        &self.0
    }

    pub fn norm2(&self) -> i64 {
        norm2(&self.0)
    }
}

impl fmt::Debug for Site {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.0.as_slice())
    }
}

impl From<Vec<i32>> for Site {
    fn from(v: Vec<i32>) -> Self {
        Site(SmallVec::from_vec(v))
    }
}

impl Serialize for Site {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.0.as_slice().serialize(s)
    }
}

impl<'de> Deserialize<'de> for Site {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        Vec::<i32>::deserialize(d).map(Site::from)
    }
}

#[inline]
pub fn norm2(coords: &[i32]) -> i64 {
    coords.iter().map(|&c| c as i64 * c as i64).sum()
}

#[inline]
pub fn dist2(a: &[i32], b: &[i32]) -> i64 {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| {
            let d = x as i64 - y as i64;
            d * d
        })
        .sum()
}

/// `|x|^2 <= r^2` for an integer squared norm and real radius.
#[inline]
pub fn within_radius(d2: i64, r: f64) -> bool {
    (d2 as f64) <= r * r
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PathKind {
    NearestNeighbor,
    Discontinuous,
}

/// A nonempty sequence of sites stored densely in index order.
#[derive(Clone, PartialEq, Eq)]
pub struct LatticePath {
    dim: usize,
    coords: Vec<i32>,
    kind: PathKind,
}

impl fmt::Debug for LatticePath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.iter()).finish()
    }
}

impl LatticePath {
    /// Builds a path from flattened coordinates, validating every invariant.
    pub fn from_flat(dim: usize, coords: Vec<i32>, kind: PathKind) -> Result<Self> {
        if dim == 0 {
            return domain("dimension must be at least 1");
        }
        if coords.is_empty() {
            return domain("a path needs at least one site");
        }
        if !coords.len().is_multiple_of(dim) {
            return domain(format!("{} coordinates do not split into {dim}-vectors", coords.len()));
        }
        let path = LatticePath { dim, coords, kind };
        if kind == PathKind::NearestNeighbor {
            for i in 1..path.len() {
                if dist2(path.site(i - 1), path.site(i)) != 1 {
                    return domain(format!("sites {} and {} are not nearest neighbours", i - 1, i));
                }
            }
        }
        Ok(path)
    }

    pub fn from_sites(sites: &[Site], kind: PathKind) -> Result<Self> {
        let dim = match sites.first() {
            Some(s) => s.dim(),
            None => return domain("a path needs at least one site"),
        };
        if sites.iter().any(|s| s.dim() != dim) {
            return domain("sites of mixed dimension");
        }
        let coords = sites.iter().flat_map(|s| s.coords().iter().copied()).collect();
        Self::from_flat(dim, coords, kind)
    }

    pub(crate) fn from_flat_unchecked(dim: usize, coords: Vec<i32>, kind: PathKind) -> Self {
        debug_assert!(!coords.is_empty() && coords.len().is_multiple_of(dim));
        LatticePath { dim, coords, kind }
    }

    pub fn single(site: &Site) -> Self {
        LatticePath { dim: site.dim(), coords: site.coords().to_vec(), kind: PathKind::NearestNeighbor }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn kind(&self) -> PathKind {
        self.kind
    }

    /// Number of sites (one more than the number of steps).
    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    /// Never true; kept for API symmetry with `len`.
    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn steps(&self) -> usize {
        self.len() - 1
    }

    #[inline]
    pub fn site(&self, i: usize) -> &[i32] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn first(&self) -> &[i32] {
        self.site(0)
    }

    pub fn last(&self) -> &[i32] {
        self.site(self.len() - 1)
    }

    pub fn iter(&self) -> std::slice::ChunksExact<'_, i32> {
        self.coords.chunks_exact(self.dim)
    }

    pub fn flat(&self) -> &[i32] {
        &self.coords
    }

    pub fn into_flat(self) -> Vec<i32> {
        self.coords
    }

    pub fn to_sites(&self) -> Vec<Site> {
        self.iter().map(Site::new).collect()
    }

    pub fn site_set(&self) -> SiteSet {
        let mut set = SiteSet::with_capacity(self.dim, self.len());
        for s in self.iter() {
            set.insert(s);
        }
        set
    }

    pub fn sorted_sites(&self) -> BTreeSet<Site> {
        self.iter().map(Site::new).collect()
    }

    /// No site is visited twice.
    pub fn is_simple(&self) -> bool {
        self.site_set().len() == self.len()
    }
}

/// A rooted lattice loop of even positive length carrying its soup label.
#[derive(Clone, Debug, PartialEq)]
pub struct DiscreteLoop {
    path: LatticePath,
    label: f64,
}

impl DiscreteLoop {
    pub fn new(path: LatticePath, label: f64) -> Result<Self> {
        if path.kind() != PathKind::NearestNeighbor {
            return domain("loops are nearest-neighbour paths");
        }
        if path.first() != path.last() {
            return domain("a loop must end at its root");
        }
        if path.steps() == 0 || !path.steps().is_multiple_of(2) {
            return domain(format!("loop length {} is not a positive even number", path.steps()));
        }
        if !(label > 0.0) {
            return domain("soup labels are positive");
        }
        Ok(DiscreteLoop { path, label })
    }

    pub(crate) fn new_unchecked(path: LatticePath, label: f64) -> Self {
        DiscreteLoop { path, label }
    }

    pub fn root(&self) -> &[i32] {
        self.path.first()
    }

    pub fn label(&self) -> f64 {
        self.label
    }

    pub fn path(&self) -> &LatticePath {
        &self.path
    }

    /// Loop length `2n` (number of steps).
    pub fn length(&self) -> usize {
        self.path.steps()
    }

    pub fn half_length(&self) -> usize {
        self.path.steps() / 2
    }
}

/// Incremental chronological loop erasure.
///
/// Pushing the sites of a path one at a time maintains the loop erasure of
/// the prefix seen so far: when a site repeats, the loop closed since its
/// previous occurrence is removed.
#[derive(Clone, Debug)]
pub struct LoopEraser {
    dim: usize,
    coords: Vec<i32>,
    position: SiteMap<usize>,
}

impl LoopEraser {
    pub fn new(dim: usize) -> Self {
        LoopEraser { dim, coords: Vec::new(), position: SiteMap::new(dim) }
    }

    pub fn clear(&mut self) {
        self.coords.clear();
        self.position.clear();
    }

    #[inline]
    pub fn push(&mut self, site: &[i32]) {
        if let Some(&j) = self.position.get(site) {
            let keep = j + 1;
            for k in keep..self.len() {
                let start = k * self.dim;
                let key: SmallVec<[i32; 4]> = SmallVec::from_slice(&self.coords[start..start + self.dim]);
                self.position.remove(&key);
            }
            self.coords.truncate(keep * self.dim);
        } else {
            self.position.insert(site, self.len());
            self.coords.extend_from_slice(site);
        }
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    /// Index of `site` in the current erasure.
    pub fn index_of(&self, site: &[i32]) -> Option<usize> {
        self.position.get(site).copied()
    }

    pub fn site(&self, i: usize) -> &[i32] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    /// Flat coordinates of the current erasure.
    pub fn flat(&self) -> &[i32] {
        &self.coords
    }

    pub fn into_path(self) -> Option<LatticePath> {
        if self.coords.is_empty() {
            None
        } else {
            Some(LatticePath::from_flat_unchecked(self.dim, self.coords, PathKind::NearestNeighbor))
        }
    }

    /// Consumes the eraser, also returning the site-to-index map.
    pub fn into_parts(self) -> Option<(LatticePath, SiteMap<usize>)> {
        if self.coords.is_empty() {
            None
        } else {
            let path = LatticePath::from_flat_unchecked(self.dim, self.coords, PathKind::NearestNeighbor);
            Some((path, self.position))
        }
    }
}

/// Chronological loop erasure.
///
/// The result is simple and keeps the first and last sites of `path`. The
/// empty path cannot be represented, so construction of an empty
/// [`LatticePath`] is where that case is rejected.
pub fn loop_erase(path: &LatticePath) -> LatticePath {
    let mut eraser = LoopEraser::new(path.dim());
    for s in path.iter() {
        eraser.push(s);
    }
    let mut out = eraser.into_path().expect("paths are nonempty");
    out.kind = path.kind;
    out
}

/// Zero-based indices `i` with `i + 1 < t` such that `path[..=i]` and
/// `path[i+1..]` share no site, found from last-occurrence indices.
pub fn cut_indices(path: &LatticePath, t: usize) -> Result<Vec<usize>> {
    let len = path.len();
    if t < 1 || t > len {
        return domain(format!("cut-point time {t} outside 1..={len}"));
    }
    let mut last = SiteMap::with_capacity(path.dim(), len);
    for (i, s) in path.iter().enumerate() {
        last.insert(s, i);
    }
    let mut reach = 0usize;
    let mut out = Vec::new();
    for (i, s) in path.iter().enumerate().take(t - 1) {
        reach = reach.max(last.get(s).copied().unwrap_or(i));
        if reach == i {
            out.push(i);
        }
    }
    Ok(out)
}

/// Cut points of `path` up to time `t` (1-based, `1 <= t <= len`).
pub fn cut_points(path: &LatticePath, t: usize) -> Result<BTreeSet<Site>> {
    Ok(cut_indices(path, t)?.into_iter().map(|i| Site::new(path.site(i))).collect())
}

/// `base` together with every loop whose site set meets `base`.
pub fn enlargement(base: &BTreeSet<Site>, loops: &[DiscreteLoop]) -> BTreeSet<Site> {
    let mut out = base.clone();
    let dim = match base.iter().next() {
        Some(s) => s.dim(),
        None => return out,
    };
    let mut index = SiteSet::with_capacity(dim, base.len());
    for s in base {
        index.insert(s.coords());
    }
    for l in loops {
        if l.path().iter().any(|s| index.contains(s)) {
            out.extend(l.path().iter().map(Site::new));
        }
    }
    out
}

/// `B(v, r) = { x : |x - v| <= r }` (Euclidean).
pub fn ball_sites(v: &Site, r: f64) -> BTreeSet<Site> {
    let mut out = BTreeSet::new();
    if r < 0.0 {
        return out;
    }
    let reach = r.floor() as i32;
    let mut offset = vec![-reach; v.dim()];
    loop {
        if within_radius(norm2(&offset), r) {
            let x: Vec<i32> = offset.iter().zip(v.coords()).map(|(o, c)| o + c).collect();
            out.insert(Site::from(x));
        }
        if !odometer(&mut offset, -reach, reach) {
            break;
        }
    }
    out
}

/// Exterior vertex boundary `{ x not in A : x ~ y for some y in A }`.
pub fn boundary(set: &BTreeSet<Site>) -> BTreeSet<Site> {
    let mut out = BTreeSet::new();
    for s in set {
        for nb in neighbours(s.coords()) {
            let nb = Site::from(nb);
            if !set.contains(&nb) {
                out.insert(nb);
            }
        }
    }
    out
}

/// The `2d` nearest neighbours of a site.
pub fn neighbours(site: &[i32]) -> impl Iterator<Item = Vec<i32>> + '_ {
    (0..2 * site.len()).map(move |k| {
        let mut x = site.to_vec();
        x[k / 2] += if k % 2 == 0 { 1 } else { -1 };
        x
    })
}

/// Advances `digits` through the cube `[lo, hi]^d`; false once exhausted.
pub(crate) fn odometer(digits: &mut [i32], lo: i32, hi: i32) -> bool {
    for d in digits.iter_mut() {
        if *d < hi {
            *d += 1;
            return true;
        }
        *d = lo;
    }
    false
}

/// Which lattice ball a walk lives in before it is stopped.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundaryConvention {
    /// Interior `{ |x| < n }`; the walk stops on reaching `|x| >= n`.
    #[default]
    Open,
    /// Interior `{ |x| <= n }`; the walk stops on reaching `|x| > n`.
    Closed,
}

impl fmt::Display for BoundaryConvention {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BoundaryConvention::Open => "open",
            BoundaryConvention::Closed => "closed",
        })
    }
}

/// A centred lattice ball of integer radius.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Domain {
    pub dim: usize,
    pub radius: i64,
    pub convention: BoundaryConvention,
}

impl Domain {
    pub fn new(dim: usize, radius: i64, convention: BoundaryConvention) -> Result<Self> {
        if dim == 0 {
            return domain("dimension must be at least 1");
        }
        if radius < 1 {
            return domain(format!("domain radius {radius} must be at least 1"));
        }
        Ok(Domain { dim, radius, convention })
    }

    #[inline]
    pub fn contains_norm2(&self, n2: i64) -> bool {
        let r2 = self.radius * self.radius;
        match self.convention {
            BoundaryConvention::Open => n2 < r2,
            BoundaryConvention::Closed => n2 <= r2,
        }
    }

    #[inline]
    pub fn contains(&self, site: &[i32]) -> bool {
        self.contains_norm2(norm2(site))
    }

    /// Largest coordinate magnitude of an interior site.
    pub fn reach(&self) -> i32 {
        match self.convention {
            BoundaryConvention::Open => (self.radius - 1) as i32,
            BoundaryConvention::Closed => self.radius as i32,
        }
    }

    /// Interior sites in lexicographic order.
    pub fn sites(&self) -> Vec<Vec<i32>> {
        let reach = self.reach();
        let mut digits = vec![-reach; self.dim];
        let mut out = Vec::new();
        loop {
            if self.contains(&digits) {
                out.push(digits.clone());
            }
            if !odometer(&mut digits, -reach, reach) {
                break;
            }
        }
        out.sort_unstable();
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(sites: &[&[i32]]) -> LatticePath {
        let sites: Vec<Site> = sites.iter().map(|s| Site::new(s)).collect();
        LatticePath::from_sites(&sites, PathKind::NearestNeighbor).unwrap()
    }

    #[test]
    fn single_site_is_its_own_erasure() {
        let path = p(&[&[0, 0, 0]]);
        assert_eq!(loop_erase(&path), path);
    }

    #[test]
    fn erases_a_backtrack() {
        let (a, b, c): (&[i32], &[i32], &[i32]) = (&[0, 0, 0], &[1, 0, 0], &[0, 1, 0]);
        let erased = loop_erase(&p(&[a, b, a, c]));
        assert_eq!(erased, p(&[a, c]));
    }

    #[test]
    fn self_avoiding_path_is_unchanged() {
        let path = p(&[&[0, 0], &[1, 0], &[1, 1], &[0, 1], &[-1, 1]]);
        assert_eq!(loop_erase(&path), path);
    }

    #[test]
    fn empty_and_broken_paths_are_rejected() {
        assert!(LatticePath::from_flat(2, vec![], PathKind::NearestNeighbor).is_err());
        assert!(LatticePath::from_flat(2, vec![0, 0, 2, 0], PathKind::NearestNeighbor).is_err());
        assert!(LatticePath::from_flat(2, vec![0, 0, 2, 0], PathKind::Discontinuous).is_ok());
    }

    #[test]
    fn cut_points_of_backtracking_path() {
        let (a, b, c): (&[i32], &[i32], &[i32]) = (&[0, 0, 0], &[1, 0, 0], &[0, 1, 0]);
        let cuts = cut_points(&p(&[a, b, a, c]), 4).unwrap();
        assert_eq!(cuts, [Site::new(a)].into_iter().collect());
    }

    #[test]
    fn cut_points_of_self_avoiding_path() {
        let path = p(&[&[0, 0], &[1, 0], &[1, 1], &[0, 1]]);
        let cuts = cut_points(&path, path.len()).unwrap();
        let expected: BTreeSet<Site> = (0..path.len() - 1).map(|i| Site::new(path.site(i))).collect();
        assert_eq!(cuts, expected);
        assert!(cut_points(&path, 1).unwrap().is_empty());
    }

    #[test]
    fn cut_time_out_of_range() {
        let path = p(&[&[0], &[1]]);
        assert!(cut_points(&path, 0).is_err());
        assert!(cut_points(&path, 3).is_err());
    }

    #[test]
    fn enlargement_cases() {
        let s: BTreeSet<Site> = [Site::new(&[0, 0, 0])].into_iter().collect();
        assert_eq!(enlargement(&s, &[]), s);

        let far = DiscreteLoop::new(p(&[&[5, 0, 0], &[6, 0, 0], &[5, 0, 0]]), 0.5).unwrap();
        assert_eq!(enlargement(&s, std::slice::from_ref(&far)), s);

        let near = DiscreteLoop::new(p(&[&[0, 0, 0], &[0, 0, 1], &[0, 0, 0]]), 0.5).unwrap();
        let grown = enlargement(&s, &[far, near]);
        let expected: BTreeSet<Site> = [Site::new(&[0, 0, 0]), Site::new(&[0, 0, 1])].into_iter().collect();
        assert_eq!(grown, expected);
    }

    #[test]
    fn ball_counts() {
        assert_eq!(ball_sites(&Site::origin(3), 1.0).len(), 7);
        // |x| <= 2 in Z^2: 1 + 4 + 4 + 4 (axis 1, diagonal, axis 2)
        assert_eq!(ball_sites(&Site::origin(2), 2.0).len(), 13);
        assert_eq!(ball_sites(&Site::origin(2), 0.0).len(), 1);
        let off = ball_sites(&Site::new(&[3, -1]), 1.0);
        assert!(off.contains(&Site::new(&[4, -1])));
        assert_eq!(off.len(), 5);
    }

    #[test]
    fn boundary_of_origin() {
        let s: BTreeSet<Site> = [Site::origin(3)].into_iter().collect();
        let b = boundary(&s);
        assert_eq!(b.len(), 6);
        assert!(b.iter().all(|x| x.norm2() == 1));
    }

    #[test]
    fn loop_invariants_are_enforced() {
        let open = p(&[&[0, 0], &[1, 0]]);
        assert!(DiscreteLoop::new(open, 1.0).is_err());
        let closed = p(&[&[0, 0], &[1, 0], &[0, 0]]);
        assert!(DiscreteLoop::new(closed.clone(), 0.0).is_err());
        let l = DiscreteLoop::new(closed, 1.0).unwrap();
        assert_eq!(l.length(), 2);
        assert_eq!(l.root(), &[0, 0]);
    }

    #[test]
    fn domain_conventions() {
        let open = Domain::new(3, 2, BoundaryConvention::Open).unwrap();
        let closed = Domain::new(3, 2, BoundaryConvention::Closed).unwrap();
        assert!(!open.contains(&[2, 0, 0]));
        assert!(closed.contains(&[2, 0, 0]));
        assert_eq!(open.sites().len(), ball_sites(&Site::origin(3), 1.9).len());
        assert_eq!(closed.sites().len(), ball_sites(&Site::origin(3), 2.0).len());
        let sites = closed.sites();
        assert!(sites.windows(2).all(|w| w[0] < w[1]));
    }
}
