//! Relaxation structure against independent oracles: exact ground-space
//! moments must be feasible, the circulant reduction must preserve spectra
//! and the real embedding must preserve optima.

mod common;

use nalgebra::DMatrix;
use num_complex::Complex64;
use spinbound::basis::signature;
use spinbound::exact::{self, EdMode};
use spinbound::relaxation::{assemble_energy_problem, RelaxationOptions};
use spinbound::sdp::{complex_to_real, solve};
use spinbound::{
    Axis, BasisParams, ConicProblem, Lattice, ModelSpec, MonomialBasis, PauliPolynomial,
    RelaxationProblem, Signature, SolveOptions, SolveSide, SymmetryOptions,
};

fn chain(n: usize, j2: f64) -> ModelSpec {
    ModelSpec::new(Lattice::chain(n).unwrap(), j2).unwrap()
}

/// Moment vector of the ground-space average.
fn exact_moments(p: &RelaxationProblem, gs: &exact::GroundSpace) -> Vec<f64> {
    p.var_keys()
        .iter()
        .map(|k| {
            let mut o = PauliPolynomial::new();
            o.add_real(1.0, *k);
            gs.expectation(&o).unwrap()
        })
        .collect()
}

fn min_eigenvalue(m: &DMatrix<Complex64>) -> f64 {
    m.clone().symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min)
}

fn check_exact_point_is_feasible(n: usize, j2: f64, params: BasisParams, symmetry: SymmetryOptions, rdm: Vec<usize>) {
    let spec = chain(n, j2);
    let h = spec.build_hamiltonian();
    let basis = MonomialBasis::for_lattice(&spec.lattice, params).unwrap();
    let opts = RelaxationOptions { symmetry, rdm_k: rdm };
    let p = assemble_energy_problem(&h, &basis, &opts).unwrap();
    let gs = exact::ground_space(&h, n, EdMode::Auto).unwrap();
    let x = exact_moments(&p, &gs);

    let energy = p.objective.eval(&x);
    assert!((energy.re - gs.energy).abs() < 1e-9, "{} vs {}", energy.re, gs.energy);
    assert!(energy.im.abs() < 1e-12);
    for b in &p.blocks {
        let lam = min_eigenvalue(&b.evaluate(&x));
        assert!(lam > -1e-9, "block {} has eigenvalue {lam}", b.label);
    }
    for f in &p.equalities {
        assert!(f.eval(&x).norm() < 1e-9);
    }
    for f in &p.inequalities {
        assert!(f.eval(&x).re > -1e-9);
    }
}

#[test]
fn exact_moments_are_feasible_with_every_reduction() {
    check_exact_point_is_feasible(6, 0.0, BasisParams::chain(3, 4), SymmetryOptions::all(), vec![]);
    check_exact_point_is_feasible(6, 0.0, BasisParams::chain(2, 2), SymmetryOptions::none(), vec![]);
}

#[test]
fn degenerate_ground_space_average_is_feasible() {
    check_exact_point_is_feasible(8, 0.5, BasisParams::chain(2, 3), SymmetryOptions::all(), vec![2, 4]);
}

#[test]
fn frustrated_exact_moments_are_feasible() {
    check_exact_point_is_feasible(8, 0.8, BasisParams::chain(3, 2), SymmetryOptions::all(), vec![3]);
}

#[test]
fn basis_signatures_match_factor_counting() {
    let lat = Lattice::chain(6).unwrap();
    let basis = MonomialBasis::for_lattice(&lat, BasisParams::chain(3, 4)).unwrap();
    assert!(basis.is_signature_sorted());
    let mut seen = std::collections::HashSet::new();
    for (m, info) in basis.monomials().iter().zip(basis.info()) {
        assert!(seen.insert(*m), "duplicate monomial {m}");
        let count = |a: Axis| m.axis_count(a) as i32;
        let sig = |n: i32| if n % 2 == 0 { 1 } else { -1 };
        let want = Signature {
            xy: sig(count(Axis::X) + count(Axis::Y)),
            yz: sig(count(Axis::Y) + count(Axis::Z)),
        };
        assert_eq!(info.signature, want, "{m}");
        assert_eq!(signature(m), want);
        assert_eq!(info.degree, m.degree());
    }
    // Orbits list the generator shifted by each lattice translation.
    for orbit in basis.orbits() {
        for (k, &idx) in orbit.members.iter().enumerate() {
            assert_eq!(basis.monomials()[idx], basis.shift(&orbit.generator, k));
            assert_eq!(basis.info()[idx].signature, orbit.signature);
        }
    }
}

#[test]
fn circulant_reduction_preserves_spectra() {
    for seed in 0..40 {
        let r = common::circulant_residual(seed);
        assert!(r < 1e-12, "seed {seed}: {r}");
    }
}

#[test]
fn real_embedding_preserves_random_optima() {
    for seed in 0..12 {
        let side = if seed % 2 == 0 { SolveSide::Dual } else { SolveSide::Primal };
        let err = common::embedding_error(seed, side);
        assert!(err < 1e-7, "seed {seed}: {err}");
    }
}

#[test]
fn sdpa_text_round_trips() {
    let spec = chain(4, 0.3);
    let basis = MonomialBasis::for_lattice(&spec.lattice, BasisParams::chain(2, 2)).unwrap();
    let p = assemble_energy_problem(&spec.build_hamiltonian(), &basis, &RelaxationOptions::default()).unwrap();
    let conic = complex_to_real(&p).unwrap();
    let text = conic.to_sdpa_string();
    let back = ConicProblem::from_sdpa_str(&text).unwrap();
    assert_eq!(back.dims(), conic.dims());
    assert_eq!(back.num_vars, conic.num_vars);
    assert_eq!(back.entries.len(), conic.entries.len());
    assert_eq!(back.to_sdpa_string(), text);

    let opts = SolveOptions::default();
    let a = solve(&conic, &opts).unwrap();
    let b = solve(&back, &opts).unwrap();
    assert!((a.primal_objective - b.primal_objective).abs() < 1e-9);
}

#[test]
fn malformed_sdpa_is_rejected() {
    assert!(ConicProblem::from_sdpa_str("").is_err());
    assert!(ConicProblem::from_sdpa_str("2\n1\n3\n1.0 2.0\n").is_err());
    assert!(ConicProblem::from_sdpa_str("1\n1\n2\n1.0\n0 1 1 3 1.0\n").is_err());
}
