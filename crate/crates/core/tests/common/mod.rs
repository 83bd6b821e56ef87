//! Oracles shared by the integration and acceptance tests.
#![allow(dead_code)]

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use spinbound::relaxation::{
    block_diagonalize_translation, CirculantLayout, Entry, HermBlock, LinearForm, Moment,
    MomentBlock, RelaxationProblem, TraceGroup,
};
use spinbound::sdp::{complex_to_real, solve};
use spinbound::{Axis, Lattice, PauliString, Phase, SolveOptions, SolveSide};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

// ---- Pauli matrices -------------------------------------------------------

pub fn pauli_matrix(axis: Option<Axis>) -> DMatrix<Complex64> {
    let z = Complex64::new(0.0, 0.0);
    let o = Complex64::new(1.0, 0.0);
    let i = Complex64::new(0.0, 1.0);
    let v = match axis {
        None => [o, z, z, o],
        Some(Axis::X) => [z, o, o, z],
        Some(Axis::Y) => [z, -i, i, z],
        Some(Axis::Z) => [o, z, z, -o],
    };
    DMatrix::from_row_slice(2, 2, &v)
}

pub fn string_oracle(s: &PauliString, n: usize) -> DMatrix<Complex64> {
    let mut m = DMatrix::from_element(1, 1, s.phase().to_complex());
    for site in 0..n {
        m = m.kronecker(&pauli_matrix(s.axis_at(site)));
    }
    m
}

pub fn all_strings(n: usize) -> Vec<PauliString> {
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

/// Largest entry of `|A B - C|` over every product of two strings on
/// `n` sites, with all four phases on the left factor.
pub fn exhaustive_product_residual(n: usize) -> f64 {
    let strings = all_strings(n);
    let mats: Vec<_> = strings.iter().map(|s| string_oracle(s, n)).collect();
    let mut worst: f64 = 0.0;
    for (a, ma) in strings.iter().zip(&mats) {
        for ph in 0..4 {
            let a = a.with_phase(Phase::new(ph));
            let ma = ma * Phase::new(ph).to_complex();
            for (b, mb) in strings.iter().zip(&mats) {
                let r = &ma * mb - string_oracle(&a.multiply(b), n);
                worst = worst.max(r.iter().map(|z| z.norm()).fold(0.0, f64::max));
            }
        }
    }
    worst
}

// ---- random circulants ----------------------------------------------------

fn hermitian_eigenvalues(m: &DMatrix<Complex64>) -> Vec<f64> {
    let mut e: Vec<f64> = m.clone().symmetric_eigenvalues().iter().copied().collect();
    e.sort_by(|a, b| a.partial_cmp(b).unwrap());
    e
}

fn random_phase(rng: &mut ChaCha8Rng, real: bool) -> Phase {
    if real {
        Phase::new(2 * rng.random_range(0..2))
    } else {
        Phase::new(rng.random_range(0..4))
    }
}

/// Builds a random Hermitian block-circulant moment block (optionally with a
/// leading identity row), reduces it with the block DFT and returns the
/// largest eigenvalue mismatch between the full matrix and the union of the
/// frequency blocks, relative to the spectral scale.
pub fn circulant_residual(seed: u64) -> f64 {
    let mut rng = rng(seed);
    let types = rng.random_range(1..4usize);
    let period = rng.random_range(2..9usize);
    let identity = rng.random_bool(0.5);
    let off = usize::from(identity);
    let dim = off + types * period;
    let mut entries = vec![Entry { phase: Phase::ONE, moment: Moment::Zero }; dim * dim];
    let mut nvars = 0;
    let mut fresh = || {
        nvars += 1;
        nvars - 1
    };
    let row = |a: usize, t: usize| off + a * period + t;
    // generators for (a, b, s) with the Hermitian partner filled in
    let mut gens = std::collections::HashMap::new();
    for a in 0..types {
        for b in 0..types {
            for s in 0..period {
                if gens.contains_key(&(a, b, s)) {
                    continue;
                }
                let partner = (b, a, (period - s) % period);
                let self_partner = partner == (a, b, s);
                let e = Entry {
                    phase: random_phase(&mut rng, self_partner),
                    moment: Moment::Var(fresh()),
                };
                let e = if a == b && s == 0 { Entry { phase: Phase::ONE, moment: Moment::One } } else { e };
                gens.insert((a, b, s), e);
                gens.insert(partner, e.conj());
            }
        }
    }
    for a in 0..types {
        for b in 0..types {
            for t in 0..period {
                for u in 0..period {
                    let s = (u + period - t) % period;
                    entries[row(a, t) * dim + row(b, u)] = gens[&(a, b, s)];
                }
            }
        }
    }
    if identity {
        entries[0] = Entry { phase: Phase::ONE, moment: Moment::One };
        for a in 0..types {
            let e = Entry {
                phase: random_phase(&mut rng, false),
                moment: Moment::Var(fresh()),
            };
            for t in 0..period {
                entries[row(a, t)] = e;
                entries[row(a, t) * dim] = e.conj();
            }
        }
    }
    let x: Vec<f64> = (0..nvars).map(|_| rng.random_range(-1.0..1.0)).collect();
    let block = MomentBlock {
        rows: vec![PauliString::identity(); dim],
        signature: None,
        entries,
    };
    let full = DMatrix::from_fn(dim, dim, |i, j| block.get(i, j).to_form().eval(&x));
    let parts = block_diagonalize_translation(&block, CirculantLayout { identity, types, period })
        .expect("circulant input");
    let mut reduced: Vec<f64> = parts.iter().flat_map(|b| hermitian_eigenvalues(&b.evaluate(&x))).collect();
    reduced.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let want = hermitian_eigenvalues(&full);
    assert_eq!(reduced.len(), want.len());
    let scale = want.iter().map(|v| v.abs()).fold(1.0, f64::max);
    want.iter()
        .zip(&reduced)
        .map(|(a, b)| (a - b).abs() / scale)
        .fold(0.0, f64::max)
}

// ---- random complex SDPs --------------------------------------------------

fn random_hermitian(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> DMatrix<Complex64> {
    let a = DMatrix::from_fn(n, n, |_, _| {
        Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)) * scale
    });
    (&a + a.adjoint()) * Complex64::new(0.5, 0.0)
}

fn lambda_max(m: &DMatrix<Complex64>) -> f64 {
    m.clone().symmetric_eigenvalues().iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

/// `min_{s in [-1, 1]} lambda_max(C + s D)` by golden-section search on the
/// convex function.
fn reference_optimum(c: &DMatrix<Complex64>, d: &DMatrix<Complex64>) -> f64 {
    let f = |s: f64| lambda_max(&(c + d * Complex64::new(s, 0.0)));
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let (mut lo, mut hi) = (-1.0, 1.0);
    let mut x1 = hi - g * (hi - lo);
    let mut x2 = lo + g * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..200 {
        if f1 < f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - g * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + g * (hi - lo);
            f2 = f(x2);
        }
    }
    f(0.5 * (lo + hi)).min(f(-1.0)).min(f(1.0))
}

/// A random complex SDP `min t  s.t.  t I - C - s D >= 0, -1 <= s <= 1`
/// together with its optimum computed independently.
pub fn random_hermitian_sdp(seed: u64) -> (RelaxationProblem, f64) {
    let mut rng = rng(seed);
    let n = rng.random_range(2..6usize);
    // keep the optimum inside |t| <= 1 as assumed by certification
    let c = random_hermitian(&mut rng, n, 0.25);
    let d = random_hermitian(&mut rng, n, 0.25);
    let one = Complex64::new(1.0, 0.0);
    let mut entries = Vec::new();
    for i in 0..n {
        for j in i..n {
            let mut f = LinearForm::constant(-c[(i, j)]).add_scaled(&LinearForm::var(1, -d[(i, j)]), one);
            if i == j {
                f = f.add_scaled(&LinearForm::var(0, one), one);
            }
            entries.push((i, j, f));
        }
    }
    let block = HermBlock {
        label: "random".into(),
        signature: None,
        frequency: None,
        dim: n,
        entries,
    };
    let ineq = vec![
        LinearForm::constant(one).add_scaled(&LinearForm::var(1, one), -one),
        LinearForm::constant(one).add_scaled(&LinearForm::var(1, one), one),
    ];
    let lattice = Lattice::chain(2).unwrap();
    let p = RelaxationProblem::from_parts(
        &lattice,
        vec![block],
        vec![TraceGroup { blocks: vec![0], total: n as f64 * 2.0 }],
        LinearForm::var(0, one),
        ineq,
        Vec::new(),
    )
    .unwrap();
    (p, reference_optimum(&c, &d))
}

/// Solves through the real embedding and returns `|optimum - reference|`.
pub fn embedding_error(seed: u64, side: SolveSide) -> f64 {
    let (p, want) = random_hermitian_sdp(seed);
    let conic = complex_to_real(&p).unwrap();
    let opts = SolveOptions {
        eps_primal: 1e-10,
        eps_dual: 1e-10,
        eps_gap: 1e-10,
        side,
        ..SolveOptions::default()
    };
    let r = solve(&conic, &opts).unwrap();
    (r.primal_objective - want).abs().max((r.dual_objective - want).abs())
}
