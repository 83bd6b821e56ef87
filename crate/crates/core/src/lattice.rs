//! Periodic chains and square lattices: site indexing, translations, mirror
//! and neighbour enumeration.
//!
//! Sites have a canonical linear index: `0..N` along a chain and the
//! row-major key `(i-1)*L + (j-1)` on an `L x L` square lattice.

use serde::{Deserialize, Serialize};

use crate::pauli::MAX_SITES;
use crate::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LatticeKind {
    Chain,
    Square,
}

/// A periodic lattice: a chain of `N` sites or an `L x L` square.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Lattice {
    kind: LatticeKind,
    extent: usize,
}

/// 1-based site coordinates.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SiteId {
    Chain(usize),
    Square(usize, usize),
}

/// A lattice vector; the chain uses `rows` only.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub struct Shift {
    pub rows: usize,
    pub cols: usize,
}

impl Shift {
    pub fn chain(k: usize) -> Self {
        Shift { rows: k, cols: 0 }
    }

    pub fn square(rows: usize, cols: usize) -> Self {
        Shift { rows, cols }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NeighborRange {
    First,
    Second,
}

/// Translation group data.
#[derive(Clone, Debug)]
pub struct Translations {
    /// Cyclic shifts along the first axis, used for circulant blocking.
    pub axis_shifts: Vec<Shift>,
    /// Every lattice translation, used to identify moments.
    pub full_group: Vec<Shift>,
}

impl Lattice {
    pub fn chain(n: usize) -> Result<Self, Error> {
        if !(2..=MAX_SITES).contains(&n) {
            return Err(Error::InvalidArgument(format!(
                "chain length must be in 2..={MAX_SITES}, got {n}"
            )));
        }
        Ok(Lattice {
            kind: LatticeKind::Chain,
            extent: n,
        })
    }

    pub fn square(l: usize) -> Result<Self, Error> {
        if l < 2 || l * l > MAX_SITES {
            return Err(Error::InvalidArgument(format!(
                "square side must satisfy 2 <= L and L^2 <= {MAX_SITES}, got {l}"
            )));
        }
        Ok(Lattice {
            kind: LatticeKind::Square,
            extent: l,
        })
    }

    pub fn kind(&self) -> LatticeKind {
        self.kind
    }

    /// `N` for a chain, `L` for a square.
    pub fn extent(&self) -> usize {
        self.extent
    }

    pub fn num_sites(&self) -> usize {
        match self.kind {
            LatticeKind::Chain => self.extent,
            LatticeKind::Square => self.extent * self.extent,
        }
    }

    /// Length of the cyclic group used for circulant blocking.
    pub fn period(&self) -> usize {
        self.extent
    }

    pub fn index(&self, site: SiteId) -> Result<usize, Error> {
        let n = self.extent;
        match (self.kind, site) {
            (LatticeKind::Chain, SiteId::Chain(i)) if (1..=n).contains(&i) => Ok(i - 1),
            (LatticeKind::Square, SiteId::Square(i, j))
                if (1..=n).contains(&i) && (1..=n).contains(&j) =>
            {
                Ok((i - 1) * n + (j - 1))
            }
            _ => Err(Error::InvalidArgument(format!(
                "site {site:?} does not belong to {self:?}"
            ))),
        }
    }

    pub fn site(&self, index: usize) -> SiteId {
        match self.kind {
            LatticeKind::Chain => SiteId::Chain(index + 1),
            LatticeKind::Square => SiteId::Square(index / self.extent + 1, index % self.extent + 1),
        }
    }

    /// Site reached from `index` by a (possibly negative) offset, with wrap-around.
    pub fn offset(&self, index: usize, rows: isize, cols: isize) -> usize {
        let n = self.extent as isize;
        match self.kind {
            LatticeKind::Chain => (index as isize + rows).rem_euclid(n) as usize,
            LatticeKind::Square => {
                let i = (index as isize / n + rows).rem_euclid(n);
                let j = (index as isize % n + cols).rem_euclid(n);
                (i * n + j) as usize
            }
        }
    }

    pub fn translate(&self, index: usize, shift: Shift) -> usize {
        self.offset(index, shift.rows as isize, shift.cols as isize)
    }

    /// Transposition `(i, j) -> (j, i)`; identity on chains.
    pub fn mirror(&self, index: usize) -> usize {
        match self.kind {
            LatticeKind::Chain => index,
            LatticeKind::Square => (index % self.extent) * self.extent + index / self.extent,
        }
    }

    pub fn translations(&self) -> Translations {
        let n = self.extent;
        match self.kind {
            LatticeKind::Chain => {
                let shifts: Vec<Shift> = (0..n).map(Shift::chain).collect();
                Translations {
                    axis_shifts: shifts.clone(),
                    full_group: shifts,
                }
            }
            LatticeKind::Square => Translations {
                axis_shifts: (0..n).map(|k| Shift::square(k, 0)).collect(),
                full_group: (0..n)
                    .flat_map(|r| (0..n).map(move |c| Shift::square(r, c)))
                    .collect(),
            },
        }
    }

    /// Site permutation table of a translation.
    pub fn translation_table(&self, shift: Shift) -> Vec<usize> {
        (0..self.num_sites()).map(|s| self.translate(s, shift)).collect()
    }

    pub fn mirror_table(&self) -> Vec<usize> {
        (0..self.num_sites()).map(|s| self.mirror(s)).collect()
    }

    /// Bonds of the literal lattice sum: every site emits its forward bonds,
    /// so small periodic lattices can list the same pair more than once.
    pub fn neighbor_pairs(&self, range: NeighborRange) -> Vec<(SiteId, SiteId)> {
        let offsets: &[(isize, isize)] = match (self.kind, range) {
            (LatticeKind::Chain, NeighborRange::First) => &[(1, 0)],
            (LatticeKind::Chain, NeighborRange::Second) => &[(2, 0)],
            (LatticeKind::Square, NeighborRange::First) => &[(1, 0), (0, 1)],
            (LatticeKind::Square, NeighborRange::Second) => &[(1, 1), (1, -1)],
        };
        (0..self.num_sites())
            .flat_map(|s| {
                offsets
                    .iter()
                    .map(move |&(dr, dc)| (self.site(s), self.site(self.offset(s, dr, dc))))
            })
            .collect()
    }

    /// Smallest distance between sites along the first axis (chain) for the
    /// given range.
    pub fn neighbor_reach(range: NeighborRange) -> usize {
        match range {
            NeighborRange::First => 1,
            NeighborRange::Second => 2,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    #[test]
    fn chain_translations() {
        let lat = Lattice::chain(4).unwrap();
        let t = lat.translations();
        let ks: Vec<usize> = t.axis_shifts.iter().map(|s| s.rows).collect();
        assert_eq!(ks, vec![0, 1, 2, 3]);
        assert_eq!(lat.translate(3, Shift::chain(1)), 0);
    }

    #[test]
    fn square_translations() {
        let lat = Lattice::square(2).unwrap();
        let t = lat.translations();
        assert_eq!(t.axis_shifts.len(), 2);
        assert_eq!(t.full_group.len(), 4);
    }

    #[test]
    fn unit_shifts_compose_to_identity() {
        for lat in [Lattice::chain(7).unwrap(), Lattice::square(3).unwrap()] {
            for s in 0..lat.num_sites() {
                let mut r = s;
                let mut c = s;
                for _ in 0..lat.extent() {
                    r = lat.translate(r, Shift::square(1, 0));
                    if lat.kind() == LatticeKind::Square {
                        c = lat.translate(c, Shift::square(0, 1));
                    }
                }
                assert_eq!(r, s);
                assert_eq!(c, s);
            }
            for shift in lat.translations().full_group {
                let table: BTreeSet<usize> = lat.translation_table(shift).into_iter().collect();
                assert_eq!(table.len(), lat.num_sites());
            }
        }
    }

    #[test]
    fn chain_first_neighbours() {
        let lat = Lattice::chain(4).unwrap();
        let pairs: Vec<(usize, usize)> = lat
            .neighbor_pairs(NeighborRange::First)
            .into_iter()
            .map(|(a, b)| match (a, b) {
                (SiteId::Chain(a), SiteId::Chain(b)) => (a, b),
                _ => unreachable!(),
            })
            .collect();
        assert_eq!(pairs, vec![(1, 2), (2, 3), (3, 4), (4, 1)]);
        let lat6 = Lattice::chain(6).unwrap();
        assert_eq!(lat6.neighbor_pairs(NeighborRange::Second).len(), 6);
    }

    #[test]
    fn square_l2_doubles_bonds() {
        let lat = Lattice::square(2).unwrap();
        let pairs = lat.neighbor_pairs(NeighborRange::First);
        assert_eq!(pairs.len(), 8);
        let edges: BTreeSet<(SiteId, SiteId)> = pairs
            .iter()
            .map(|&(a, b)| if a < b { (a, b) } else { (b, a) })
            .collect();
        assert_eq!(edges.len(), 4);
    }

    #[test]
    fn neighbour_set_is_translation_invariant() {
        let lat = Lattice::square(4).unwrap();
        for range in [NeighborRange::First, NeighborRange::Second] {
            let canon = |pairs: Vec<(usize, usize)>| -> BTreeSet<(usize, usize)> {
                pairs.into_iter().map(|(a, b)| (a.min(b), a.max(b))).collect()
            };
            let base: Vec<(usize, usize)> = lat
                .neighbor_pairs(range)
                .into_iter()
                .map(|(a, b)| (lat.index(a).unwrap(), lat.index(b).unwrap()))
                .collect();
            for shift in lat.translations().full_group {
                let moved = base
                    .iter()
                    .map(|&(a, b)| (lat.translate(a, shift), lat.translate(b, shift)))
                    .collect();
                assert_eq!(canon(moved), canon(base.clone()));
            }
        }
    }

    #[test]
    fn rejects_degenerate_sizes() {
        assert!(Lattice::chain(1).is_err());
        assert!(Lattice::square(1).is_err());
        assert!(Lattice::square(12).is_err());
        let lat = Lattice::square(3).unwrap();
        assert_eq!(lat.index(SiteId::Square(2, 3)).unwrap(), 5);
        assert_eq!(lat.site(5), SiteId::Square(2, 3));
        assert!(lat.index(SiteId::Chain(1)).is_err());
    }
}
