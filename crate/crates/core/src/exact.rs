//! Exact diagonalization and simple variational and cluster bounds.
//!
//! Operators act matrix-free on computational-basis amplitudes: bit `s` of
//! a basis index is the `Z` eigenstate of site `s` (`0` is `+1`), and a Pauli
//! string with masks `(x, z)` maps `|b>` to `i^{n_y} (-1)^{|b & z|} |b ^ x>`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::lattice::{Lattice, LatticeKind, NeighborRange};
use crate::model::ModelSpec;
use crate::pauli::{Axis, PauliPolynomial, PauliString, Phase};
use crate::Error;

/// Largest size handled by the dense eigensolver.
pub const DENSE_LIMIT: usize = 12;
/// Largest size handled at all.
pub const ITERATIVE_LIMIT: usize = 20;
/// Sizes up to this use the dense solver in [`EdMode::Auto`].
const AUTO_DENSE: usize = 8;

/// A Pauli polynomial compiled to bit masks.
#[derive(Clone, Debug)]
pub struct CompiledOperator {
    num_sites: usize,
    terms: Vec<(Complex64, usize, usize)>,
    real: bool,
}

impl CompiledOperator {
    pub fn new(p: &PauliPolynomial, num_sites: usize) -> Result<Self, Error> {
        if num_sites > ITERATIVE_LIMIT {
            return Err(Error::InvalidArgument(format!(
                "{num_sites} sites exceed the exact-diagonalization limit of {ITERATIVE_LIMIT}"
            )));
        }
        let mut terms = Vec::with_capacity(p.len());
        for (s, &c) in p.terms() {
            let (x, z) = s.masks();
            if (x | z) >> num_sites != 0 {
                return Err(Error::SiteOutOfRange {
                    site: 127 - (x | z).leading_zeros() as usize,
                    sites: num_sites,
                });
            }
            let ny = (x & z).count_ones();
            terms.push((c * Phase::new(ny as i64).to_complex(), x as usize, z as usize));
        }
        let real = terms.iter().all(|(c, _, _)| c.im == 0.0);
        Ok(CompiledOperator {
            num_sites,
            terms,
            real,
        })
    }

    pub fn dim(&self) -> usize {
        1 << self.num_sites
    }

    /// `out = O v`.
    pub fn apply(&self, v: &[Complex64], out: &mut [Complex64]) {
        out.par_chunks_mut(4096).enumerate().for_each(|(chunk, out)| {
            let base = chunk * 4096;
            for (off, o) in out.iter_mut().enumerate() {
                let b = base + off;
                let mut acc = Complex64::new(0.0, 0.0);
                // <b| P |b ^ x> = coef * (-1)^{|(b ^ x) & z|}
                for &(c, x, z) in &self.terms {
                    let src = b ^ x;
                    let sign = if (src & z).count_ones() % 2 == 0 { 1.0 } else { -1.0 };
                    acc += c * sign * v[src];
                }
                *o = acc;
            }
        });
    }

    pub fn to_dense(&self) -> DMatrix<Complex64> {
        let d = self.dim();
        let mut m = DMatrix::zeros(d, d);
        for col in 0..d {
            for &(c, x, z) in &self.terms {
                let sign = if (col & z).count_ones() % 2 == 0 { 1.0 } else { -1.0 };
                m[(col ^ x, col)] += c * sign;
            }
        }
        m
    }
}

/// A normalized state on `num_sites` qubits.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseState {
    pub amplitudes: Vec<Complex64>,
    pub num_sites: usize,
}

impl DenseState {
    pub fn new(amplitudes: Vec<Complex64>, num_sites: usize) -> Result<Self, Error> {
        if amplitudes.len() != 1 << num_sites {
            return Err(Error::InvalidArgument("amplitude vector has the wrong length".into()));
        }
        let n = norm(&amplitudes);
        if (n - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidArgument(format!("state norm {n} is not 1")));
        }
        Ok(DenseState {
            amplitudes,
            num_sites,
        })
    }
}

fn inner(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn norm(a: &[Complex64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

/// `<psi|O|psi>`, which must be real.
pub fn expectation(state: &DenseState, o: &PauliPolynomial) -> Result<f64, Error> {
    let op = CompiledOperator::new(o, state.num_sites)?;
    let mut w = vec![Complex64::new(0.0, 0.0); op.dim()];
    op.apply(&state.amplitudes, &mut w);
    let e = inner(&state.amplitudes, &w);
    if e.im.abs() > 1e-10 {
        return Err(Error::InvalidArgument(format!(
            "expectation has imaginary part {}; observable not Hermitian",
            e.im
        )));
    }
    Ok(e.re)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize)]
pub enum EdMode {
    #[default]
    Auto,
    Dense,
    Lanczos,
}

/// The lowest eigenvalue and an orthonormal basis of its eigenspace.
#[derive(Clone, Debug)]
pub struct GroundSpace {
    pub energy: f64,
    pub states: Vec<DenseState>,
}

impl GroundSpace {
    pub fn degeneracy(&self) -> usize {
        self.states.len()
    }

    /// Average of `<psi_i|O|psi_i>` over the ground space, i.e. the
    /// expectation in the normalized ground-space projector.
    pub fn expectation(&self, o: &PauliPolynomial) -> Result<f64, Error> {
        let mut total = 0.0;
        for s in &self.states {
            total += expectation(s, o)?;
        }
        Ok(total / self.states.len() as f64)
    }
}

fn degeneracy_tol(e: f64) -> f64 {
    1e-8 * e.abs().max(1.0)
}

/// Ground energy and one ground state.
pub fn ground_state(h: &PauliPolynomial, num_sites: usize) -> Result<(f64, DenseState), Error> {
    let gs = ground_space(h, num_sites, EdMode::Auto)?;
    Ok((gs.energy, gs.states[0].clone()))
}

/// Ground energy and the full ground space.
pub fn ground_space(h: &PauliPolynomial, num_sites: usize, mode: EdMode) -> Result<GroundSpace, Error> {
    if !h.is_hermitian(1e-12) {
        return Err(Error::InvalidArgument("Hamiltonian is not Hermitian".into()));
    }
    let op = CompiledOperator::new(h, num_sites)?;
    let dense = match mode {
        EdMode::Auto => num_sites <= AUTO_DENSE,
        EdMode::Dense => true,
        EdMode::Lanczos => false,
    };
    if dense {
        if num_sites > DENSE_LIMIT {
            return Err(Error::InvalidArgument(format!(
                "dense diagonalization is limited to {DENSE_LIMIT} sites"
            )));
        }
        dense_ground_space(&op)
    } else {
        lanczos_ground_space(&op)
    }
}

fn dense_ground_space(op: &CompiledOperator) -> Result<GroundSpace, Error> {
    let n = op.num_sites;
    let (vals, vecs): (Vec<f64>, Vec<Vec<Complex64>>) = if op.real {
        let m = op.to_dense().map(|c| c.re);
        let eig = nalgebra::SymmetricEigen::new(m);
        let vals = eig.eigenvalues.iter().copied().collect();
        let vecs = eig
            .eigenvectors
            .column_iter()
            .map(|c| c.iter().map(|&v| Complex64::new(v, 0.0)).collect())
            .collect();
        (vals, vecs)
    } else {
        let eig = nalgebra::SymmetricEigen::new(op.to_dense());
        let vals = eig.eigenvalues.iter().copied().collect();
        let vecs = eig.eigenvectors.column_iter().map(|c| c.iter().copied().collect()).collect();
        (vals, vecs)
    };
    let e0 = vals.iter().copied().fold(f64::INFINITY, f64::min);
    if !e0.is_finite() {
        return Err(Error::NumericalBreakdown("eigensolver returned no finite eigenvalue".into()));
    }
    let tol = degeneracy_tol(e0);
    let states = vals
        .iter()
        .zip(vecs)
        .filter(|(v, _)| **v <= e0 + tol)
        .map(|(_, v)| DenseState {
            amplitudes: v,
            num_sites: n,
        })
        .collect();
    Ok(GroundSpace { energy: e0, states })
}

fn orthogonalize(w: &mut [Complex64], against: &[Vec<Complex64>]) {
    // two passes of classical Gram-Schmidt
    for _ in 0..2 {
        for v in against {
            let c = inner(v, w);
            w.iter_mut().zip(v).for_each(|(a, b)| *a -= c * b);
        }
    }
}

/// Lowest eigenpair of `op` on the orthogonal complement of `deflate`.
fn lanczos_lowest(
    op: &CompiledOperator,
    deflate: &[Vec<Complex64>],
    seed: u64,
) -> Result<(f64, Vec<Complex64>), Error> {
    let dim = op.dim();
    let budget = (512usize << 20) / (16 * dim);
    let kmax = dim.min(budget.clamp(20, 150));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v0: Vec<Complex64> = (0..dim)
        .map(|_| Complex64::new(rng.random::<f64>() - 0.5, 0.0))
        .collect();
    let mut theta = f64::NAN;
    for _restart in 0..200 {
        orthogonalize(&mut v0, deflate);
        let nv = norm(&v0);
        if nv < 1e-300 {
            return Err(Error::NumericalBreakdown("Lanczos start vector vanished".into()));
        }
        v0.iter_mut().for_each(|a| *a /= nv);
        let mut basis: Vec<Vec<Complex64>> = vec![v0.clone()];
        let mut alpha: Vec<f64> = Vec::new();
        let mut beta: Vec<f64> = Vec::new();
        let mut w = vec![Complex64::new(0.0, 0.0); dim];
        let mut converged = false;
        let mut ritz: Vec<f64>;
        loop {
            let j = basis.len() - 1;
            op.apply(&basis[j], &mut w);
            alpha.push(inner(&basis[j], &w).re);
            orthogonalize(&mut w, deflate);
            orthogonalize(&mut w, &basis);
            let b = norm(&w);
            let k = alpha.len();
            let mut t = DMatrix::<f64>::zeros(k, k);
            for i in 0..k {
                t[(i, i)] = alpha[i];
                if i + 1 < k {
                    t[(i, i + 1)] = beta[i];
                    t[(i + 1, i)] = beta[i];
                }
            }
            let eig = nalgebra::SymmetricEigen::new(t);
            let (imin, &lmin) = eig
                .eigenvalues
                .iter()
                .enumerate()
                .min_by(|a, b| a.1.total_cmp(b.1))
                .expect("nonempty");
            theta = lmin;
            ritz = eig.eigenvectors.column(imin).iter().copied().collect();
            let resid = b * ritz[k - 1].abs();
            if resid <= 1e-11 * theta.abs().max(1.0) || b < 1e-13 {
                converged = true;
                break;
            }
            if k >= kmax {
                break;
            }
            beta.push(b);
            basis.push(w.iter().map(|a| a / b).collect());
        }
        let mut y = vec![Complex64::new(0.0, 0.0); dim];
        for (c, v) in ritz.iter().zip(&basis) {
            y.iter_mut().zip(v).for_each(|(a, b)| *a += b * *c);
        }
        orthogonalize(&mut y, deflate);
        let ny = norm(&y);
        y.iter_mut().for_each(|a| *a /= ny);
        if converged {
            // refresh the Rayleigh quotient on the assembled vector
            op.apply(&y, &mut w);
            return Ok((inner(&y, &w).re, y));
        }
        v0 = y;
    }
    Err(Error::NumericalBreakdown(format!(
        "Lanczos did not converge (last estimate {theta})"
    )))
}

fn lanczos_ground_space(op: &CompiledOperator) -> Result<GroundSpace, Error> {
    let (e0, v) = lanczos_lowest(op, &[], 1)?;
    let tol = degeneracy_tol(e0);
    let mut vecs = vec![v];
    while vecs.len() < op.dim() {
        let (e, v) = lanczos_lowest(op, &vecs, 1 + vecs.len() as u64)?;
        if e > e0 + tol {
            break;
        }
        vecs.push(v);
    }
    Ok(GroundSpace {
        energy: e0,
        states: vecs
            .into_iter()
            .map(|amplitudes| DenseState {
                amplitudes,
                num_sites: op.num_sites,
            })
            .collect(),
    })
}

/// Lowest eigenvalue of a polynomial on its own sites.
fn lowest_eigenvalue(h: &PauliPolynomial, num_sites: usize) -> Result<f64, Error> {
    Ok(ground_space(h, num_sites, EdMode::Auto)?.energy)
}

/// Cluster lower bound `E_0 >= sum_w lambda_min(H_w)`.
///
/// Each term of `h` is shared equally among the windows containing its
/// support, so the window Hamiltonians `H_w` sum exactly to `h`.
pub fn cluster_bound(h: &PauliPolynomial, windows: &[Vec<usize>]) -> Result<f64, Error> {
    let masks: Vec<u128> = windows
        .iter()
        .map(|w| w.iter().fold(0u128, |m, &s| m | 1 << s))
        .collect();
    let mut counts = Vec::new();
    for (s, _) in h.terms() {
        let supp = s.support_mask();
        let c = masks.iter().filter(|&&m| supp & !m == 0).count();
        if c == 0 {
            return Err(Error::InvalidArgument(format!(
                "term {s} is not contained in any cluster"
            )));
        }
        counts.push(c as f64);
    }
    let mut cache: Vec<(PauliPolynomial, f64)> = Vec::new();
    let mut total = 0.0;
    for (w, &mask) in windows.iter().zip(&masks) {
        let mut local = PauliPolynomial::new();
        for ((s, &c), &count) in h.terms().zip(&counts) {
            if s.support_mask() & !mask == 0 {
                let relabeled = s.map_sites(|site| w.iter().position(|&x| x == site).expect("in window"));
                local.add_term(c / count, relabeled);
            }
        }
        let lambda = match cache.iter().find(|(p, _)| p.approx_eq(&local, 0.0)) {
            Some((_, l)) => *l,
            None => {
                let l = if local.is_empty() { 0.0 } else { lowest_eigenvalue(&local, w.len())? };
                cache.push((local, l));
                l
            }
        };
        total += lambda;
    }
    Ok(total)
}

/// Per-spin Anderson-type bound from `K`-site open clusters (chain) or
/// `K x K` open plaquettes (square), translated over the whole lattice.
pub fn anderson_bound(spec: &ModelSpec, k: usize) -> Result<f64, Error> {
    let lat = spec.lattice;
    let reach = if spec.j2 != 0.0 {
        Lattice::neighbor_reach(NeighborRange::Second)
    } else {
        Lattice::neighbor_reach(NeighborRange::First)
    };
    let windows: Vec<Vec<usize>> = match lat.kind() {
        LatticeKind::Chain => {
            if k < reach + 1 {
                return Err(Error::InvalidArgument(format!(
                    "cluster size {k} must exceed the coupling range {reach}"
                )));
            }
            if k >= lat.num_sites() {
                return Err(Error::InvalidArgument(format!(
                    "cluster size {k} must be smaller than the chain length {}",
                    lat.num_sites()
                )));
            }
            (0..lat.num_sites())
                .map(|s| (0..k).map(|d| lat.offset(s, d as isize, 0)).collect())
                .collect()
        }
        LatticeKind::Square => {
            if k < 2 || k >= lat.extent() {
                return Err(Error::InvalidArgument(format!(
                    "plaquette side {k} must be in 2..{}",
                    lat.extent()
                )));
            }
            (0..lat.num_sites())
                .map(|s| {
                    (0..k)
                        .flat_map(|dr| (0..k).map(move |dc| (dr as isize, dc as isize)))
                        .map(|(dr, dc)| lat.offset(s, dr, dc))
                        .collect()
                })
                .collect()
        }
    };
    if windows[0].len() > ITERATIVE_LIMIT {
        return Err(Error::InvalidArgument("cluster exceeds the diagonalization limit".into()));
    }
    Ok(cluster_bound(&spec.build_hamiltonian(), &windows)? / lat.num_sites() as f64)
}

/// Energy of the product state with the given Bloch vectors.
pub fn product_state_energy(h: &PauliPolynomial, bloch: &[[f64; 3]]) -> f64 {
    h.terms()
        .map(|(s, c)| c.re * s.factors().map(|(site, a)| bloch[site][a.index()]).product::<f64>())
        .sum()
}

fn random_unit(rng: &mut ChaCha8Rng) -> [f64; 3] {
    loop {
        let v = [
            rng.random::<f64>() * 2.0 - 1.0,
            rng.random::<f64>() * 2.0 - 1.0,
            rng.random::<f64>() * 2.0 - 1.0,
        ];
        let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        if n > 1e-3 && n <= 1.0 {
            return [v[0] / n, v[1] / n, v[2] / n];
        }
    }
}

/// Best product-state energy found by coordinate descent from random
/// starts; an upper bound on the ground energy.
pub fn product_state_upper_bound(
    h: &PauliPolynomial,
    num_sites: usize,
    restarts: usize,
    seed: u64,
) -> Result<f64, Error> {
    if !h.is_hermitian(1e-12) {
        return Err(Error::InvalidArgument("Hamiltonian is not Hermitian".into()));
    }
    if h.terms().any(|(s, _)| s.support_mask() >> num_sites != 0) {
        return Err(Error::InvalidArgument("Hamiltonian acts outside the given sites".into()));
    }
    let terms: Vec<(f64, Vec<(usize, Axis)>)> =
        h.terms().map(|(s, c)| (c.re, s.factors().collect())).collect();
    let mut touching: Vec<Vec<usize>> = vec![Vec::new(); num_sites];
    for (t, (_, f)) in terms.iter().enumerate() {
        for &(site, _) in f {
            touching[site].push(t);
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best = f64::INFINITY;
    for _ in 0..restarts.max(1) {
        let mut n: Vec<[f64; 3]> = (0..num_sites).map(|_| random_unit(&mut rng)).collect();
        let mut energy = product_state_energy(h, &n);
        for _sweep in 0..10_000 {
            for site in 0..num_sites {
                let mut field = [0.0; 3];
                for &t in &touching[site] {
                    let (c, f) = &terms[t];
                    let mut prod = *c;
                    let mut axis = Axis::X;
                    for &(s, a) in f {
                        if s == site {
                            axis = a;
                        } else {
                            prod *= n[s][a.index()];
                        }
                    }
                    field[axis.index()] += prod;
                }
                let norm = (field[0] * field[0] + field[1] * field[1] + field[2] * field[2]).sqrt();
                if norm > 1e-300 {
                    n[site] = [-field[0] / norm, -field[1] / norm, -field[2] / norm];
                }
            }
            let next = product_state_energy(h, &n);
            let done = energy - next <= 1e-14 * next.abs().max(1.0);
            energy = next;
            if done {
                break;
            }
        }
        best = best.min(energy);
    }
    Ok(best)
}

/// A certified interval containing the ground energy.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EnergyWindow {
    pub lower: f64,
    pub upper: f64,
    pub lower_source: String,
    pub upper_source: String,
}

impl EnergyWindow {
    pub fn new(
        lower: f64,
        upper: f64,
        lower_source: impl Into<String>,
        upper_source: impl Into<String>,
    ) -> Result<Self, Error> {
        if !(lower.is_finite() && upper.is_finite()) || lower > upper {
            return Err(Error::InvalidArgument(format!(
                "energy window [{lower}, {upper}] is empty"
            )));
        }
        Ok(EnergyWindow {
            lower,
            upper,
            lower_source: lower_source.into(),
            upper_source: upper_source.into(),
        })
    }

    pub fn as_pair(&self) -> (f64, f64) {
        (self.lower, self.upper)
    }
}

/// `<sigma_i^a>` matrix of a single string on `num_sites` qubits, for tests.
pub fn string_matrix(s: &PauliString, num_sites: usize) -> Result<DMatrix<Complex64>, Error> {
    let p = PauliPolynomial::from_string(Complex64::new(1.0, 0.0), s.phase_free());
    Ok(CompiledOperator::new(&p, num_sites)?.to_dense() * s.phase().to_complex())
}
