//! Pauli algebra against an independent Kronecker-product oracle, plus
//! group-action properties.

use nalgebra::DMatrix;
use num_complex::Complex64;
use proptest::prelude::*;
use spinbound::basis::signature;
use spinbound::{Axis, AxisPermutation, Lattice, PauliString, Phase, Shift, SignSubstitution};

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn pauli_matrix(axis: Option<Axis>) -> DMatrix<Complex64> {
    let (a, b, cc, d) = match axis {
        None => (c(1., 0.), c(0., 0.), c(0., 0.), c(1., 0.)),
        Some(Axis::X) => (c(0., 0.), c(1., 0.), c(1., 0.), c(0., 0.)),
        Some(Axis::Y) => (c(0., 0.), c(0., -1.), c(0., 1.), c(0., 0.)),
        Some(Axis::Z) => (c(1., 0.), c(0., 0.), c(0., 0.), c(-1., 0.)),
    };
    DMatrix::from_row_slice(2, 2, &[a, b, cc, d])
}

/// `phase * sigma_{a_1} (x) ... (x) sigma_{a_n}` built from 2x2 matrices.
fn oracle(s: &PauliString, n: usize) -> DMatrix<Complex64> {
    let mut m = DMatrix::from_element(1, 1, s.phase().to_complex());
    for site in 0..n {
        m = m.kronecker(&pauli_matrix(s.axis_at(site)));
    }
    m
}

fn close(a: &DMatrix<Complex64>, b: &DMatrix<Complex64>) -> bool {
    (a - b).iter().all(|z| z.norm() < 1e-12)
}

fn all_strings(n: usize) -> Vec<PauliString> {
    (0..4usize.pow(n as u32))
        .map(|mut code| {
            let mut factors = Vec::new();
            for site in 0..n {
                if code % 4 != 0 {
                    factors.push((site, Axis::ALL[code % 4 - 1]));
                }
                code /= 4;
            }
            PauliString::from_factors(factors)
        })
        .collect()
}

fn arb_string(n: usize) -> impl Strategy<Value = PauliString> {
    (prop::collection::vec(0usize..4, n), 0i64..4).prop_map(|(codes, ph)| {
        let factors: Vec<(usize, Axis)> = codes
            .iter()
            .enumerate()
            .filter(|(_, &c)| c != 0)
            .map(|(s, &c)| (s, Axis::ALL[c - 1]))
            .collect();
        PauliString::from_factors(factors).with_phase(Phase::new(ph))
    })
}

#[test]
fn products_match_matrices_exhaustively_up_to_three_sites() {
    for n in 1..=3 {
        let strings = all_strings(n);
        for a in &strings {
            let ma = oracle(a, n);
            for b in &strings {
                let ab = a.multiply(b);
                assert!(close(&(&ma * oracle(b, n)), &oracle(&ab, n)), "{a} * {b} = {ab}");
            }
        }
    }
}

#[test]
fn adjoint_matches_conjugate_transpose() {
    for s in all_strings(3) {
        for ph in 0..4 {
            let s = s.with_phase(Phase::new(ph));
            assert!(close(&oracle(&s, 3).adjoint(), &oracle(&s.adjoint(), 3)));
        }
    }
}

#[test]
fn commutation_matches_matrices() {
    let strings = all_strings(2);
    for a in &strings {
        for b in &strings {
            let (ma, mb) = (oracle(a, 2), oracle(b, 2));
            let commute = close(&(&ma * &mb), &(&mb * &ma));
            assert_eq!(a.commutes_with(b), commute, "{a} {b}");
        }
    }
}

#[test]
fn text_round_trip_on_small_strings() {
    for s in all_strings(3) {
        let back: PauliString = s.to_string().parse().unwrap();
        assert_eq!(back, s);
    }
}

proptest! {
    #[test]
    fn multiplication_is_associative(a in arb_string(6), b in arb_string(6), c in arb_string(6)) {
        prop_assert_eq!(a.multiply(&b).multiply(&c), a.multiply(&b.multiply(&c)));
    }

    #[test]
    fn random_products_match_matrices(a in arb_string(3), b in arb_string(3)) {
        prop_assert!(close(&(oracle(&a, 3) * oracle(&b, 3)), &oracle(&a.multiply(&b), 3)));
    }

    #[test]
    fn squares_of_phase_free_strings_are_identity(a in arb_string(8)) {
        let p = a.phase_free();
        prop_assert_eq!(p.multiply(&p), PauliString::identity());
    }

    #[test]
    fn translation_is_a_homomorphism(a in arb_string(8), b in arb_string(8), k in 0usize..8) {
        let lat = Lattice::chain(8).unwrap();
        let t = Shift::chain(k);
        let lhs = a.multiply(&b).act_translation(&lat, t);
        let rhs = a.act_translation(&lat, t).multiply(&b.act_translation(&lat, t));
        prop_assert_eq!(lhs, rhs);
    }

    #[test]
    fn translations_compose_to_identity(a in arb_string(6)) {
        let lat = Lattice::chain(6).unwrap();
        let mut s = a;
        for _ in 0..6 {
            s = s.act_translation(&lat, Shift::chain(1));
        }
        prop_assert_eq!(s, a);
    }

    #[test]
    fn cyclic_axis_permutation_is_a_homomorphism(a in arb_string(5), b in arb_string(5)) {
        let p = AxisPermutation::cycle();
        let lhs = a.multiply(&b).act_axis_permutation(p);
        let rhs = a.act_axis_permutation(p).multiply(&b.act_axis_permutation(p));
        prop_assert_eq!(lhs, rhs);
    }

    #[test]
    fn odd_axis_permutations_preserve_products_up_to_sign(a in arb_string(5), b in arb_string(5)) {
        for p in AxisPermutation::all() {
            let lhs = a.multiply(&b).act_axis_permutation(p);
            let rhs = a.act_axis_permutation(p).multiply(&b.act_axis_permutation(p));
            prop_assert_eq!(lhs.phase_free(), rhs.phase_free());
            let ratio = lhs.phase().exponent() as i64 - rhs.phase().exponent() as i64;
            prop_assert_eq!(ratio.rem_euclid(2), 0);
        }
    }

    // Single-axis flips are not algebra automorphisms, so only the pairs.
    #[test]
    fn pair_substitutions_are_multiplicative(a in arb_string(6), b in arb_string(6)) {
        for sub in SignSubstitution::PAIRS.iter() {
            let (sa, _) = a.act_sign(*sub);
            let (sb, _) = b.act_sign(*sub);
            let (sab, _) = a.multiply(&b).act_sign(*sub);
            prop_assert_eq!(sab, sa * sb);
        }
    }

    #[test]
    fn pair_substitutions_match_matrix_conjugation(a in arb_string(2)) {
        // s_xy is conjugation by sigma_z on every site, s_yz by sigma_x.
        for (sub, axis) in [(SignSubstitution::Sxy, Axis::Z), (SignSubstitution::Syz, Axis::X), (SignSubstitution::Szx, Axis::Y)] {
            let u = pauli_matrix(Some(axis)).kronecker(&pauli_matrix(Some(axis)));
            let conj = &u * oracle(&a, 2) * &u;
            let (sign, s) = a.act_sign(sub);
            prop_assert!(close(&conj, &(oracle(&s, 2) * c(sign as f64, 0.0))));
        }
    }

    #[test]
    fn signature_is_multiplicative(a in arb_string(7), b in arb_string(7)) {
        let ab = a.multiply(&b).phase_free();
        prop_assert_eq!(signature(&ab), signature(&a.phase_free()).combine(signature(&b.phase_free())));
    }
}
