//! Hash indices keyed by lattice coordinates.
//!
//! Coordinates of up to four dimensions are packed losslessly into a `u128`
//! (32 bits per axis); higher dimensions fall back to boxed slices.

use rustc_hash::FxHashMap;

#[derive(Clone, Debug)]
enum Keys<V> {
    Packed(FxHashMap<u128, V>),
    Wide(FxHashMap<Box<[i32]>, V>),
}

#[inline]
pub(crate) fn pack(coords: &[i32]) -> u128 {
    coords
        .iter()
        .enumerate()
        .fold(0u128, |acc, (i, &c)| acc | ((c as u32 as u128) << (32 * i)))
}

#[inline]
pub(crate) fn unpack(key: u128, dim: usize) -> Vec<i32> {
    (0..dim).map(|i| (key >> (32 * i)) as u32 as i32).collect()
}

/// Map from lattice sites of a fixed dimension to values.
#[derive(Clone, Debug)]
pub struct SiteMap<V> {
    dim: usize,
    keys: Keys<V>,
}

impl<V> SiteMap<V> {
    pub fn new(dim: usize) -> Self {
        Self::with_capacity(dim, 0)
    }

    pub fn with_capacity(dim: usize, capacity: usize) -> Self {
        let keys = if dim <= 4 {
            Keys::Packed(FxHashMap::with_capacity_and_hasher(capacity, Default::default()))
        } else {
            Keys::Wide(FxHashMap::with_capacity_and_hasher(capacity, Default::default()))
        };
        SiteMap { dim, keys }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, site: &[i32]) -> Option<&V> {
        debug_assert_eq!(site.len(), self.dim);
        match &self.keys {
            Keys::Packed(m) => m.get(&pack(site)),
            Keys::Wide(m) => m.get(site),
        }
    }

    #[inline]
    pub fn get_mut(&mut self, site: &[i32]) -> Option<&mut V> {
        match &mut self.keys {
            Keys::Packed(m) => m.get_mut(&pack(site)),
            Keys::Wide(m) => m.get_mut(site),
        }
    }

    #[inline]
    pub fn insert(&mut self, site: &[i32], value: V) -> Option<V> {
        debug_assert_eq!(site.len(), self.dim);
        match &mut self.keys {
            Keys::Packed(m) => m.insert(pack(site), value),
            Keys::Wide(m) => m.insert(site.into(), value),
        }
    }

    #[inline]
    pub fn remove(&mut self, site: &[i32]) -> Option<V> {
        match &mut self.keys {
            Keys::Packed(m) => m.remove(&pack(site)),
            Keys::Wide(m) => m.remove(site),
        }
    }

    #[inline]
    pub fn contains(&self, site: &[i32]) -> bool {
        self.get(site).is_some()
    }

    pub fn len(&self) -> usize {
        match &self.keys {
            Keys::Packed(m) => m.len(),
            Keys::Wide(m) => m.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn clear(&mut self) {
        match &mut self.keys {
            Keys::Packed(m) => m.clear(),
            Keys::Wide(m) => m.clear(),
        }
    }

    /// Entries in unspecified order; coordinates are materialised per entry.
    pub fn entries(&self) -> Vec<(Vec<i32>, &V)> {
        match &self.keys {
            Keys::Packed(m) => m.iter().map(|(k, v)| (unpack(*k, self.dim), v)).collect(),
            Keys::Wide(m) => m.iter().map(|(k, v)| (k.to_vec(), v)).collect(),
        }
    }
}

/// Set of lattice sites of a fixed dimension.
#[derive(Clone, Debug)]
pub struct SiteSet(SiteMap<()>);

impl SiteSet {
    pub fn new(dim: usize) -> Self {
        SiteSet(SiteMap::new(dim))
    }

    pub fn with_capacity(dim: usize, capacity: usize) -> Self {
        SiteSet(SiteMap::with_capacity(dim, capacity))
    }

    pub fn dim(&self) -> usize {
        self.0.dim()
    }

    /// Returns `true` when the site was not yet present.
    #[inline]
    pub fn insert(&mut self, site: &[i32]) -> bool {
        self.0.insert(site, ()).is_none()
    }

    #[inline]
    pub fn contains(&self, site: &[i32]) -> bool {
        self.0.contains(site)
    }

    pub fn remove(&mut self, site: &[i32]) -> bool {
        self.0.remove(site).is_some()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn clear(&mut self) {
        self.0.clear()
    }

    /// Members in lexicographic coordinate order.
    pub fn sorted(&self) -> Vec<Vec<i32>> {
        let mut out: Vec<Vec<i32>> = self.0.entries().into_iter().map(|(k, _)| k).collect();
        out.sort_unstable();
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn packing_roundtrips_negative_coordinates() {
        for c in [[0, 0, 0], [-1, 5, -7], [i32::MIN, i32::MAX, 0]] {
            assert_eq!(unpack(pack(&c), 3), c.to_vec());
        }
    }

    #[test]
    fn wide_and_packed_maps_agree() {
        let mut narrow = SiteSet::new(3);
        let mut wide = SiteSet::new(5);
        for i in -3..3 {
            narrow.insert(&[i, -i, 1]);
            wide.insert(&[i, -i, 1, 0, 2]);
        }
        assert_eq!(narrow.len(), wide.len());
        assert!(narrow.contains(&[2, -2, 1]));
        assert!(wide.contains(&[2, -2, 1, 0, 2]));
        assert!(!wide.contains(&[2, -2, 1, 0, 3]));
    }
}
