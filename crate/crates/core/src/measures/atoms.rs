//! Finite atomic measures on `R^d` with tolerance-based location matching.

use crate::geometry::norm;

/// Relative tolerance used to identify two atom locations.
pub const LOCATION_TOL: f64 = 1e-9;

pub fn same_location(a: &[f64], b: &[f64]) -> bool {
    let scale = a
        .iter()
        .chain(b)
        .fold(1.0f64, |m, v| m.max(v.abs()));
    a.iter()
        .zip(b)
        .all(|(p, q)| (p - q).abs() <= LOCATION_TOL * scale)
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct AtomSet {
    dim: usize,
    entries: Vec<(Vec<f64>, f64)>,
}

impl AtomSet {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            entries: Vec::new(),
        }
    }

    pub fn from_entries(dim: usize, entries: impl IntoIterator<Item = (Vec<f64>, f64)>) -> Self {
        let mut set = Self::new(dim);
        for (loc, mass) in entries {
            set.add(loc, mass);
        }
        set
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Adds `mass` at `loc`, merging with an existing atom at the same place.
    pub fn add(&mut self, loc: Vec<f64>, mass: f64) {
        debug_assert_eq!(loc.len(), self.dim);
        if let Some(entry) = self.entries.iter_mut().find(|(l, _)| same_location(l, &loc)) {
            entry.1 += mass;
        } else {
            self.entries.push((loc, mass));
        }
    }

    pub fn mass_at(&self, loc: &[f64]) -> f64 {
        self.entries
            .iter()
            .filter(|(l, _)| same_location(l, loc))
            .map(|(_, m)| *m)
            .sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[f64], f64)> {
        self.entries.iter().map(|(l, m)| (l.as_slice(), *m))
    }

    pub fn total(&self) -> f64 {
        self.entries.iter().map(|(_, m)| m).sum()
    }

    /// Drops atoms with `|mass| <= tol`.
    pub fn prune(mut self, tol: f64) -> Self {
        self.entries.retain(|(_, m)| m.abs() > tol);
        self
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            dim: self.dim,
            entries: self.entries.iter().map(|(l, m)| (l.clone(), m * c)).collect(),
        }
    }

    /// Image measure: each atom moved to `f(loc)`.
    pub fn pushforward<F: Fn(&[f64]) -> Vec<f64>>(&self, f: F, dim: usize) -> Self {
        Self::from_entries(dim, self.entries.iter().map(|(l, m)| (f(l), *m)))
    }

    /// Atom-wise minimum `self ∧ other`.
    pub fn min_with(&self, other: &AtomSet) -> Self {
        let mut out = AtomSet::new(self.dim);
        for (l, m) in &self.entries {
            let o = other.mass_at(l);
            let v = m.min(o);
            if v > 0.0 {
                out.add(l.clone(), v);
            }
        }
        out
    }

    /// `max_a |self(a) - other(a)|` over the union of both supports.
    pub fn max_abs_diff(&self, other: &AtomSet) -> f64 {
        let left = self
            .entries
            .iter()
            .map(|(l, m)| (m - other.mass_at(l)).abs());
        let right = other
            .entries
            .iter()
            .map(|(l, m)| (m - self.mass_at(l)).abs());
        left.chain(right).fold(0.0, f64::max)
    }

    pub fn max_radius(&self) -> f64 {
        self.entries.iter().map(|(l, _)| norm(l)).fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn merges_nearby_locations() {
        let mut s = AtomSet::new(1);
        s.add(vec![1.0], 0.5);
        s.add(vec![1.0 + 1e-13], 0.25);
        s.add(vec![2.0], 1.0);
        assert_eq!(s.len(), 2);
        assert!((s.mass_at(&[1.0]) - 0.75).abs() < 1e-15);
    }

    #[test]
    fn min_and_diff() {
        let a = AtomSet::from_entries(1, [(vec![1.0], 1.0), (vec![2.0], 1.0)]);
        let shifted = a.pushforward(|l| vec![l[0] + 1.0], 1);
        let m = a.min_with(&shifted);
        assert_eq!(m.len(), 1);
        assert_eq!(m.mass_at(&[2.0]), 1.0);
        assert_eq!(a.max_abs_diff(&shifted), 1.0);
        assert_eq!(a.max_abs_diff(&a.clone()), 0.0);
    }
}
