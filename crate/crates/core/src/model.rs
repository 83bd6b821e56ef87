//! Heisenberg-type Hamiltonians and observables as Pauli polynomials.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::lattice::{Lattice, NeighborRange, Shift};
use crate::pauli::{Axis, PauliPolynomial, PauliString};
use crate::Error;

/// Prefactor of every `sigma . sigma` bond.
pub const BOND_PREFACTOR: f64 = 0.25;

/// `H = 1/4 sum_{<ij>} sigma_i . sigma_j + J2/4 sum_{<<ij>>} sigma_i . sigma_j`
/// with the first-neighbour coupling normalized to one.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ModelSpec {
    pub lattice: Lattice,
    pub j2: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum TermKind {
    J1,
    J2,
}

/// A Hermitian polynomial with a human-readable label.
#[derive(Clone, Debug, PartialEq)]
pub struct Observable {
    pub poly: PauliPolynomial,
    pub label: String,
}

impl Observable {
    pub fn new(label: impl Into<String>, poly: PauliPolynomial) -> Result<Self, Error> {
        if !poly.is_hermitian(1e-12) {
            return Err(Error::InvalidArgument("observable is not Hermitian".into()));
        }
        Ok(Observable {
            poly,
            label: label.into(),
        })
    }
}

impl ModelSpec {
    pub fn new(lattice: Lattice, j2: f64) -> Result<Self, Error> {
        if !j2.is_finite() {
            return Err(Error::InvalidArgument(format!("J2 must be finite, got {j2}")));
        }
        Ok(ModelSpec { lattice, j2 })
    }

    pub fn num_sites(&self) -> usize {
        self.lattice.num_sites()
    }

    fn bond_sum(&self, range: NeighborRange, coupling: f64) -> PauliPolynomial {
        let lat = &self.lattice;
        let mut h = PauliPolynomial::new();
        for (a, b) in lat.neighbor_pairs(range) {
            let (i, j) = (lat.index(a).unwrap(), lat.index(b).unwrap());
            for axis in Axis::ALL {
                let term = PauliString::single(i, axis).multiply(&PauliString::single(j, axis));
                h.add_real(coupling, term);
            }
        }
        h
    }

    fn bond_count(&self, range: NeighborRange) -> usize {
        self.lattice.neighbor_pairs(range).len()
    }

    /// The full Hamiltonian; repeated bonds on small lattices are summed.
    pub fn build_hamiltonian(&self) -> PauliPolynomial {
        let mut h = self.bond_sum(NeighborRange::First, BOND_PREFACTOR);
        if self.j2 != 0.0 {
            h = h + self.bond_sum(NeighborRange::Second, BOND_PREFACTOR * self.j2);
        }
        h
    }

    /// `(1/4) sigma_ref^x sigma_{ref + displacement}^x` with the reference at the origin.
    pub fn correlation_observable(&self, displacement: Shift) -> Result<Observable, Error> {
        let target = self.lattice.translate(0, displacement);
        if target == 0 {
            return Err(Error::InvalidArgument(
                "correlation displacement must be nonzero".into(),
            ));
        }
        let s = PauliString::single(0, Axis::X).multiply(&PauliString::single(target, Axis::X));
        let label = match self.lattice.kind() {
            crate::LatticeKind::Chain => format!("C({})", displacement.rows),
            crate::LatticeKind::Square => format!("C({},{})", displacement.rows, displacement.cols),
        };
        Observable::new(label, PauliPolynomial::from_string(Complex64::new(BOND_PREFACTOR, 0.0), s))
    }

    /// The first- or second-neighbour part of the Hamiltonian per bond
    /// (without the coupling constant), i.e. `3 C_1` or `3 C_2`.
    pub fn hamiltonian_term_observable(&self, which: TermKind) -> Result<Observable, Error> {
        let range = match which {
            TermKind::J1 => NeighborRange::First,
            TermKind::J2 => NeighborRange::Second,
        };
        let bonds = self.bond_count(range) as f64;
        let poly = self.bond_sum(range, BOND_PREFACTOR / bonds);
        Observable::new(format!("{which:?} bond energy"), poly)
    }
}

/// `H = sigma_1 . sigma_2 + sigma_2 . sigma_3` on three open sites, with
/// ground energy -4.
pub fn three_qubit_model() -> (Lattice, PauliPolynomial) {
    let lattice = Lattice::chain(3).expect("valid chain");
    let mut h = PauliPolynomial::new();
    for (i, j) in [(0, 1), (1, 2)] {
        for a in Axis::ALL {
            h.add_real(1.0, PauliString::single(i, a).multiply(&PauliString::single(j, a)));
        }
    }
    (lattice, h)
}

/// The individual bond terms of [`three_qubit_model`].
pub fn three_qubit_bonds() -> Vec<PauliPolynomial> {
    [(0, 1), (1, 2)]
        .into_iter()
        .map(|(i, j)| {
            let mut h = PauliPolynomial::new();
            for a in Axis::ALL {
                h.add_real(1.0, PauliString::single(i, a).multiply(&PauliString::single(j, a)));
            }
            h
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pauli::{AxisPermutation, SignSubstitution};

    #[test]
    fn chain_three_expands_literally() {
        let spec = ModelSpec::new(Lattice::chain(3).unwrap(), 0.0).unwrap();
        let h = spec.build_hamiltonian();
        assert_eq!(h.len(), 9);
        for (_, c) in h.terms() {
            assert_eq!(*c, Complex64::new(0.25, 0.0));
        }
    }

    #[test]
    fn small_square_sums_doubled_bonds() {
        let spec = ModelSpec::new(Lattice::square(2).unwrap(), 0.0).unwrap();
        let h = spec.build_hamiltonian();
        // 4 distinct edges, each listed twice by the literal double sum
        assert_eq!(h.len(), 12);
        for (_, c) in h.terms() {
            assert_eq!(*c, Complex64::new(0.5, 0.0));
        }
    }

    #[test]
    fn hamiltonian_symmetries() {
        for (lat, j2) in [
            (Lattice::chain(6).unwrap(), 0.3),
            (Lattice::square(4).unwrap(), 0.5),
        ] {
            let spec = ModelSpec::new(lat, j2).unwrap();
            let h = spec.build_hamiltonian();
            assert!(h.is_hermitian(0.0));
            for sub in SignSubstitution::SINGLES {
                assert_eq!(h.map_strings(|s| s.act_sign(sub)), h);
            }
            for p in AxisPermutation::all() {
                assert_eq!(h.map_strings(|s| (1, s.act_axis_permutation(p))), h);
            }
            for shift in lat.translations().full_group {
                assert_eq!(h.map_strings(|s| (1, s.act_translation(&lat, shift))), h);
            }
            if lat.kind() == crate::LatticeKind::Square {
                assert_eq!(h.map_strings(|s| (1, s.act_mirror(&lat).unwrap())), h);
            }
        }
    }

    #[test]
    fn correlation_observables() {
        let chain = ModelSpec::new(Lattice::chain(6).unwrap(), 0.0).unwrap();
        let c1 = chain.correlation_observable(Shift::chain(1)).unwrap();
        let expected: PauliString = "X1 X2".parse().unwrap();
        assert_eq!(c1.poly.coefficient(&expected), Complex64::new(0.25, 0.0));
        assert!(chain.correlation_observable(Shift::chain(6)).is_err());

        let sq = Lattice::square(4).unwrap();
        let spec = ModelSpec::new(sq, 0.0).unwrap();
        let c = spec.correlation_observable(Shift::square(2, 2)).unwrap();
        let expected = PauliString::parse("X(1,1) X(3,3)", Some(&sq)).unwrap();
        assert_eq!(c.poly.coefficient(&expected), Complex64::new(0.25, 0.0));
    }

    #[test]
    fn bond_energy_observable() {
        let spec = ModelSpec::new(Lattice::chain(4).unwrap(), 0.0).unwrap();
        let o = spec.hamiltonian_term_observable(TermKind::J1).unwrap();
        assert_eq!(o.poly.len(), 12);
        let h = spec.build_hamiltonian();
        assert!(o.poly.approx_eq(&h.scale(Complex64::new(0.25, 0.0)), 1e-15));
    }
}
