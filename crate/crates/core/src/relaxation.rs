//! Symbolic moment-matrix relaxations with symmetry reduction.
//!
//! The moment matrix `[M]_{vw} = <v^dag w>` over a [`MonomialBasis`] is built
//! symbolically: every entry is an exact phase times either the constant 1,
//! zero, or a moment variable. Moments are identified across the requested
//! symmetry group (lattice translations, axis permutations, mirror) and the
//! moments that are odd under a single-axis sign flip are fixed to zero.
//! Sign symmetry then splits the matrix into four signature blocks and
//! translation symmetry turns each of those into `L` Fourier blocks.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::f64::consts::PI;

use indexmap::IndexSet;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::basis::{MonomialBasis, Signature};
use crate::lattice::{Lattice, LatticeKind};
use crate::pauli::{Axis, AxisPermutation, PauliPolynomial, PauliString, Phase, SignSubstitution};
use crate::Error;

/// Coefficients whose modulus falls below this are treated as exact zeros.
const SNAP: f64 = 1e-13;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SymmetryOptions {
    /// Zero sign-variant moments and split into signature blocks.
    pub sign: bool,
    /// Identify translated moments and block-diagonalize circulants.
    pub translation: bool,
    /// Identify moments related by a permutation of the axes.
    pub permutation: bool,
    /// Identify moments related by the `(i, j) -> (j, i)` mirror (square lattices).
    pub mirror: bool,
}

impl SymmetryOptions {
    pub fn all() -> Self {
        SymmetryOptions {
            sign: true,
            translation: true,
            permutation: true,
            mirror: true,
        }
    }

    pub fn none() -> Self {
        SymmetryOptions {
            sign: false,
            translation: false,
            permutation: false,
            mirror: false,
        }
    }

    /// Compact label such as `sign+translation`.
    pub fn label(&self) -> String {
        let names: Vec<&str> = [
            (self.sign, "sign"),
            (self.translation, "translation"),
            (self.permutation, "permutation"),
            (self.mirror, "mirror"),
        ]
        .iter()
        .filter(|(on, _)| *on)
        .map(|(_, n)| *n)
        .collect();
        if names.is_empty() {
            "none".into()
        } else {
            names.join("+")
        }
    }
}

impl Default for SymmetryOptions {
    fn default() -> Self {
        Self::all()
    }
}

/// Resolved value of a moment.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Moment {
    Zero,
    One,
    Var(usize),
}

/// One symbolic moment-matrix entry: `phase * moment`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Entry {
    pub phase: Phase,
    pub moment: Moment,
}

impl Entry {
    pub const ZERO: Entry = Entry {
        phase: Phase::ONE,
        moment: Moment::Zero,
    };

    pub fn conj(self) -> Entry {
        match self.moment {
            Moment::Zero => Entry::ZERO,
            m => Entry {
                phase: self.phase.conj(),
                moment: m,
            },
        }
    }

    pub fn is_zero(&self) -> bool {
        self.moment == Moment::Zero
    }

    pub fn to_form(self) -> LinearForm {
        let c = self.phase.to_complex();
        match self.moment {
            Moment::Zero => LinearForm::zero(),
            Moment::One => LinearForm::constant(c),
            Moment::Var(v) => LinearForm::var(v, c),
        }
    }
}

/// `constant + sum_k coef_k x_k` over real moment variables.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct LinearForm {
    pub constant: Complex64,
    /// Sorted by variable, no repeats, no zero coefficients.
    pub terms: Vec<(usize, Complex64)>,
}

fn snap(c: Complex64) -> Complex64 {
    let s = |x: f64| if x.abs() < SNAP { 0.0 } else { x };
    Complex64::new(s(c.re), s(c.im))
}

impl LinearForm {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn constant(c: Complex64) -> Self {
        LinearForm {
            constant: snap(c),
            terms: Vec::new(),
        }
    }

    pub fn var(v: usize, c: Complex64) -> Self {
        let mut acc = BTreeMap::new();
        acc.insert(v, c);
        Self::from_parts(Complex64::new(0.0, 0.0), acc)
    }

    fn from_parts(constant: Complex64, acc: BTreeMap<usize, Complex64>) -> Self {
        LinearForm {
            constant: snap(constant),
            terms: acc
                .into_iter()
                .map(|(v, c)| (v, snap(c)))
                .filter(|(_, c)| c.norm() > 0.0)
                .collect(),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.constant.norm() == 0.0 && self.terms.is_empty()
    }

    /// `self + factor * other`.
    pub fn add_scaled(&self, other: &LinearForm, factor: Complex64) -> LinearForm {
        let mut acc: BTreeMap<usize, Complex64> = self.terms.iter().copied().collect();
        for &(v, c) in &other.terms {
            *acc.entry(v).or_default() += factor * c;
        }
        Self::from_parts(self.constant + factor * other.constant, acc)
    }

    pub fn scale(&self, factor: Complex64) -> LinearForm {
        LinearForm::zero().add_scaled(self, factor)
    }

    pub fn conj(&self) -> LinearForm {
        LinearForm {
            constant: self.constant.conj(),
            terms: self.terms.iter().map(|&(v, c)| (v, c.conj())).collect(),
        }
    }

    pub fn is_real(&self) -> bool {
        self.constant.im == 0.0 && self.terms.iter().all(|(_, c)| c.im == 0.0)
    }

    pub fn max_imag(&self) -> f64 {
        self.terms
            .iter()
            .map(|(_, c)| c.im.abs())
            .fold(self.constant.im.abs(), f64::max)
    }

    pub fn eval(&self, x: &[f64]) -> Complex64 {
        self.terms
            .iter()
            .fold(self.constant, |acc, &(v, c)| acc + c * x[v])
    }

    pub fn approx_eq(&self, other: &LinearForm, tol: f64) -> bool {
        let d = self.add_scaled(other, Complex64::new(-1.0, 0.0));
        d.constant.norm() <= tol && d.terms.iter().all(|(_, c)| c.norm() <= tol)
    }

    pub fn variables(&self) -> impl Iterator<Item = usize> + '_ {
        self.terms.iter().map(|(v, _)| *v)
    }
}

/// Maps normal-form strings to moment variables under the enabled symmetries.
#[derive(Clone, Debug)]
pub struct MomentTable {
    lattice: Lattice,
    symmetry: SymmetryOptions,
    site_maps: Vec<Vec<usize>>,
    perms: Vec<AxisPermutation>,
    vars: IndexSet<PauliString>,
    cache: HashMap<PauliString, Moment>,
}

impl MomentTable {
    pub fn new(lattice: &Lattice, symmetry: SymmetryOptions) -> Result<Self, Error> {
        if symmetry.permutation && !symmetry.sign {
            return Err(Error::InvalidArgument(
                "axis-permutation identification requires sign symmetry".into(),
            ));
        }
        let mut site_maps: Vec<Vec<usize>> = if symmetry.translation {
            lattice
                .translations()
                .full_group
                .into_iter()
                .map(|s| lattice.translation_table(s))
                .collect()
        } else {
            vec![(0..lattice.num_sites()).collect()]
        };
        if symmetry.mirror && lattice.kind() == LatticeKind::Square {
            let mirror = lattice.mirror_table();
            let mirrored: Vec<Vec<usize>> = site_maps
                .iter()
                .map(|t| t.iter().map(|&s| mirror[s]).collect())
                .collect();
            site_maps.extend(mirrored);
        }
        let perms = if symmetry.permutation {
            AxisPermutation::all().to_vec()
        } else {
            vec![AxisPermutation::IDENTITY]
        };
        Ok(MomentTable {
            lattice: *lattice,
            symmetry,
            site_maps,
            perms,
            vars: IndexSet::new(),
            cache: HashMap::new(),
        })
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    pub fn symmetry(&self) -> SymmetryOptions {
        self.symmetry
    }

    pub fn num_vars(&self) -> usize {
        self.vars.len()
    }

    /// Representative string of each variable.
    pub fn keys(&self) -> Vec<PauliString> {
        self.vars.iter().copied().collect()
    }

    /// `true` when the moment vanishes by single-axis sign symmetry.
    pub fn is_sign_variant(&self, s: &PauliString) -> bool {
        self.symmetry.sign && Axis::ALL.iter().any(|&a| s.axis_count(a) % 2 == 1)
    }

    /// Smallest image of a phase-free string under the identification group.
    pub fn canonical(&self, s: &PauliString) -> PauliString {
        let mut best = *s;
        for map in &self.site_maps {
            let moved = s.permute_sites(map);
            for &p in &self.perms {
                let img = moved.act_axis_permutation(p);
                if img < best {
                    best = img;
                }
            }
        }
        best
    }

    /// Resolves `<s>` for a string that may carry a phase.
    pub fn resolve(&mut self, s: &PauliString) -> Entry {
        let phase = s.phase();
        let key = s.phase_free();
        let moment = if key.is_identity() {
            Moment::One
        } else if let Some(&m) = self.cache.get(&key) {
            m
        } else {
            let m = if self.is_sign_variant(&key) {
                Moment::Zero
            } else {
                let rep = self.canonical(&key);
                Moment::Var(self.vars.insert_full(rep).0)
            };
            self.cache.insert(key, m);
            m
        };
        match moment {
            Moment::Zero => Entry::ZERO,
            m => Entry { phase, moment: m },
        }
    }

    /// Linear form of `<p>` for a polynomial.
    pub fn resolve_polynomial(&mut self, p: &PauliPolynomial) -> LinearForm {
        let mut form = LinearForm::zero();
        for (s, &c) in p.terms() {
            form = form.add_scaled(&self.resolve(s).to_form(), c);
        }
        form
    }
}

/// A dense symbolic block `[phase * moment]` indexed by row monomials.
#[derive(Clone, Debug, PartialEq)]
pub struct MomentBlock {
    pub rows: Vec<PauliString>,
    pub signature: Option<Signature>,
    pub entries: Vec<Entry>,
}

impl MomentBlock {
    pub fn dim(&self) -> usize {
        self.rows.len()
    }

    pub fn get(&self, i: usize, j: usize) -> Entry {
        self.entries[i * self.rows.len() + j]
    }

    pub fn is_hermitian(&self) -> bool {
        let n = self.dim();
        (0..n).all(|i| (i..n).all(|j| self.get(j, i) == self.get(i, j).conj()))
    }

    /// Every diagonal entry equals the constant 1.
    pub fn has_unit_diagonal(&self) -> bool {
        (0..self.dim()).all(|i| {
            self.get(i, i)
                == Entry {
                    phase: Phase::ONE,
                    moment: Moment::One,
                }
        })
    }
}

/// The moment matrix as a list of independent blocks.
#[derive(Clone, Debug, PartialEq)]
pub struct SymbolicMomentMatrix {
    pub blocks: Vec<MomentBlock>,
}

/// `[M]_{vw} = <NF(v^dag w)>` over the given rows.
pub fn build_moment_matrix(rows: &[PauliString], table: &mut MomentTable) -> MomentBlock {
    let n = rows.len();
    let mut entries = vec![Entry::ZERO; n * n];
    for i in 0..n {
        let vd = rows[i].adjoint();
        for j in i..n {
            let e = table.resolve(&vd.multiply(&rows[j]));
            entries[i * n + j] = e;
            entries[j * n + i] = e.conj();
        }
    }
    MomentBlock {
        rows: rows.to_vec(),
        signature: None,
        entries,
    }
}

/// Splits a signature-sorted block into its four signature blocks, checking
/// that every dropped cross entry is zero.
pub fn split_sign_blocks(block: &MomentBlock) -> Result<Vec<MomentBlock>, Error> {
    let sigs: Vec<Signature> = block.rows.iter().map(Signature::of).collect();
    if sigs.windows(2).any(|w| w[0].rank() > w[1].rank()) {
        return Err(Error::Structure("basis is not sorted by signature".into()));
    }
    let n = block.dim();
    for i in 0..n {
        for j in 0..n {
            if sigs[i] != sigs[j] && !block.get(i, j).is_zero() {
                return Err(Error::Structure(format!(
                    "cross-signature entry ({}, {}) is not zero",
                    block.rows[i], block.rows[j]
                )));
            }
        }
    }
    let mut out = Vec::new();
    for sig in Signature::ALL {
        let idx: Vec<usize> = (0..n).filter(|&i| sigs[i] == sig).collect();
        if idx.is_empty() {
            continue;
        }
        let mut entries = Vec::with_capacity(idx.len() * idx.len());
        for &i in &idx {
            for &j in &idx {
                entries.push(block.get(i, j));
            }
        }
        out.push(MomentBlock {
            rows: idx.iter().map(|&i| block.rows[i]).collect(),
            signature: Some(sig),
            entries,
        });
    }
    Ok(out)
}

/// A complex Hermitian PSD constraint with entries linear in the moments.
#[derive(Clone, Debug, PartialEq)]
pub struct HermBlock {
    pub label: String,
    pub signature: Option<Signature>,
    pub frequency: Option<usize>,
    pub dim: usize,
    /// Upper-triangle entries `(i, j, form)` with `i <= j`; absent entries are zero.
    pub entries: Vec<(usize, usize, LinearForm)>,
}

impl HermBlock {
    fn from_moment_block(block: &MomentBlock, label: String) -> HermBlock {
        let n = block.dim();
        let mut entries = Vec::new();
        for i in 0..n {
            for j in i..n {
                let e = block.get(i, j);
                if !e.is_zero() {
                    entries.push((i, j, e.to_form()));
                }
            }
        }
        HermBlock {
            label,
            signature: block.signature,
            frequency: None,
            dim: n,
            entries,
        }
    }

    /// Dense numeric value of the block at a moment vector.
    pub fn evaluate(&self, x: &[f64]) -> nalgebra::DMatrix<Complex64> {
        let mut m = nalgebra::DMatrix::zeros(self.dim, self.dim);
        for (i, j, f) in &self.entries {
            let v = f.eval(x);
            m[(*i, *j)] = v;
            m[(*j, *i)] = v.conj();
        }
        m
    }
}

/// Row structure of a translation-blocked matrix: an optional identity row
/// followed by `types` orbits of `period` consecutive rows each.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CirculantLayout {
    pub identity: bool,
    pub types: usize,
    pub period: usize,
}

/// `exp(-2 pi i j / L)` with exact conjugate symmetry `w[L-j] = conj(w[j])`.
fn roots_of_unity(period: usize) -> Vec<Complex64> {
    let mut w = vec![Complex64::new(1.0, 0.0); period];
    for j in 1..=period / 2 {
        let a = -2.0 * PI * j as f64 / period as f64;
        w[j] = snap(Complex64::new(a.cos(), a.sin()));
        w[period - j] = w[j].conj();
    }
    w
}

/// Conjugates a circulant-structured block by the block DFT and returns one
/// block per frequency.
pub fn block_diagonalize_translation(
    block: &MomentBlock,
    layout: CirculantLayout,
) -> Result<Vec<HermBlock>, Error> {
    let CirculantLayout {
        identity,
        types,
        period,
    } = layout;
    let off = usize::from(identity);
    if block.dim() != off + types * period {
        return Err(Error::Structure(format!(
            "block of dimension {} does not match {} orbits of length {}",
            block.dim(),
            types,
            period
        )));
    }
    let row = |t: usize, p: usize| off + t * period + p;
    for t in 0..types {
        for u in 0..types {
            for p in 0..period {
                for q in 0..period {
                    let d = (q + period - p) % period;
                    if block.get(row(t, p), row(u, q)) != block.get(row(t, 0), row(u, d)) {
                        return Err(Error::Structure(format!(
                            "sub-block ({t}, {u}) is not circulant at ({p}, {q})"
                        )));
                    }
                }
            }
        }
    }
    if identity {
        for u in 0..types {
            for q in 1..period {
                if block.get(0, row(u, q)) != block.get(0, row(u, 0)) {
                    return Err(Error::Structure(format!(
                        "identity row is not constant along orbit {u}"
                    )));
                }
            }
        }
    }
    let w = roots_of_unity(period);
    let sqrt_l = (period as f64).sqrt();
    let sig_label = block
        .signature
        .map(|s| format!("sig{s} "))
        .unwrap_or_default();
    let mut out = Vec::with_capacity(period);
    for k in 0..period {
        let with_id = identity && k == 0;
        let dim = types + usize::from(with_id);
        let shift = usize::from(with_id);
        let mut entries = Vec::new();
        if with_id {
            entries.push((0, 0, LinearForm::constant(Complex64::new(1.0, 0.0))));
            for u in 0..types {
                let f = block.get(0, row(u, 0)).to_form();
                let f = f.scale(Complex64::new(sqrt_l, 0.0));
                if !f.is_zero() {
                    entries.push((0, u + 1, f));
                }
            }
        }
        for t in 0..types {
            for u in t..types {
                let mut f = LinearForm::zero();
                for d in 0..period {
                    let e = block.get(row(t, 0), row(u, d));
                    if !e.is_zero() {
                        f = f.add_scaled(&e.to_form(), w[(d * k) % period]);
                    }
                }
                if !f.is_zero() {
                    entries.push((t + shift, u + shift, f));
                }
            }
        }
        if dim == 0 {
            continue;
        }
        out.push(HermBlock {
            label: format!("{sig_label}k={k}"),
            signature: block.signature,
            frequency: Some(k),
            dim,
            entries,
        });
    }
    Ok(out)
}

/// Blocks whose traces add up to a known constant.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TraceGroup {
    pub blocks: Vec<usize>,
    pub total: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BlockInfo {
    pub label: String,
    pub signature: Option<String>,
    pub frequency: Option<usize>,
    pub dim: usize,
}

/// Metadata emitted alongside every relaxation.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RelaxationReport {
    pub lattice: String,
    pub sites: usize,
    pub basis: String,
    pub basis_size: usize,
    pub symmetry: SymmetryOptions,
    pub census: Vec<BlockInfo>,
    pub num_vars: usize,
    pub rdm_k: Vec<usize>,
    pub window: Option<(f64, f64)>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Min,
    Max,
}

/// Moment blocks, a linear objective and scalar constraints.
#[derive(Clone, Debug)]
pub struct RelaxationProblem {
    pub blocks: Vec<HermBlock>,
    pub trace_groups: Vec<TraceGroup>,
    /// Form to minimize; already negated when maximizing.
    pub objective: LinearForm,
    pub direction: Direction,
    /// Forms constrained to be `>= 0`.
    pub inequalities: Vec<LinearForm>,
    /// Forms constrained to be `== 0`.
    pub equalities: Vec<LinearForm>,
    pub report: RelaxationReport,
    table: MomentTable,
}

/// Checks that the Hamiltonian is invariant under every enabled symmetry.
pub fn check_invariance(
    h: &PauliPolynomial,
    lattice: &Lattice,
    symmetry: SymmetryOptions,
) -> Result<(), Error> {
    let tol = 1e-12;
    let fail = |what: &str| {
        Err(Error::InvalidArgument(format!(
            "Hamiltonian is not invariant under {what}; disable that symmetry"
        )))
    };
    if symmetry.sign {
        for sub in SignSubstitution::SINGLES {
            if !h.map_strings(|s| s.act_sign(sub)).approx_eq(h, tol) {
                return fail("sign flips");
            }
        }
    }
    if symmetry.permutation {
        for p in AxisPermutation::all() {
            if !h.map_strings(|s| (1, s.act_axis_permutation(p))).approx_eq(h, tol) {
                return fail("axis permutations");
            }
        }
    }
    if symmetry.translation {
        for shift in lattice.translations().full_group {
            if !h
                .map_strings(|s| (1, s.act_translation(lattice, shift)))
                .approx_eq(h, tol)
            {
                return fail("translations");
            }
        }
    }
    if symmetry.mirror && lattice.kind() == LatticeKind::Square {
        let mirror = lattice.mirror_table();
        if !h.map_strings(|s| (1, s.permute_sites(&mirror))).approx_eq(h, tol) {
            return fail("the mirror");
        }
    }
    Ok(())
}

fn lattice_label(lattice: &Lattice) -> String {
    match lattice.kind() {
        LatticeKind::Chain => format!("chain N={}", lattice.extent()),
        LatticeKind::Square => format!("square L={}", lattice.extent()),
    }
}

/// Builds the reduced moment blocks for a basis.
fn moment_blocks(
    basis: &MonomialBasis,
    table: &mut MomentTable,
) -> Result<(Vec<HermBlock>, Vec<TraceGroup>), Error> {
    let sym = table.symmetry();
    let mut blocks = Vec::new();
    let mut groups = Vec::new();
    let sig_groups: Vec<Option<Signature>> = if sym.sign {
        Signature::ALL.iter().copied().map(Some).collect()
    } else {
        vec![None]
    };
    if sym.sign {
        // cross-signature products carry a nontrivial signature, so some axis
        // count is odd and the moment is zero-flagged
        for a in Signature::ALL {
            for b in Signature::ALL {
                if a != b && a.combine(b) == Signature::TRIVIAL {
                    return Err(Error::Structure("signature algebra violated".into()));
                }
            }
        }
    }
    if sym.translation {
        let period = basis.lattice().period();
        for sig in sig_groups {
            let orbits: Vec<_> = basis
                .orbits()
                .iter()
                .filter(|o| sig.is_none_or(|s| o.signature == s))
                .collect();
            let identity = orbits.iter().any(|o| o.is_identity());
            let typed: Vec<_> = orbits.iter().filter(|o| !o.is_identity()).collect();
            if typed.iter().any(|o| o.members.len() != period) {
                return Err(Error::Structure("orbit not padded to the full period".into()));
            }
            let mut rows = Vec::new();
            if identity {
                rows.push(PauliString::identity());
            }
            for o in &typed {
                rows.extend(o.members.iter().map(|&m| basis.monomials()[m]));
            }
            if rows.is_empty() {
                continue;
            }
            let mut block = build_moment_matrix(&rows, table);
            block.signature = sig;
            let layout = CirculantLayout {
                identity,
                types: typed.len(),
                period,
            };
            let first = blocks.len();
            blocks.extend(block_diagonalize_translation(&block, layout)?);
            groups.push(TraceGroup {
                blocks: (first..blocks.len()).collect(),
                total: rows.len() as f64,
            });
        }
    } else {
        let block = build_moment_matrix(basis.monomials(), table);
        let parts = if sym.sign {
            split_sign_blocks(&block)?
        } else {
            vec![block]
        };
        for part in parts {
            let label = part
                .signature
                .map(|s| format!("sig{s}"))
                .unwrap_or_else(|| "full".into());
            groups.push(TraceGroup {
                blocks: vec![blocks.len()],
                total: part.dim() as f64,
            });
            blocks.push(HermBlock::from_moment_block(&part, label));
        }
    }
    Ok((blocks, groups))
}

/// Options for assembling a relaxation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[derive(Default)]
pub struct RelaxationOptions {
    pub symmetry: SymmetryOptions,
    /// Sizes of the reduced-density-matrix positivity blocks to add.
    pub rdm_k: Vec<usize>,
}


impl RelaxationProblem {
    fn build(
        h: &PauliPolynomial,
        basis: &MonomialBasis,
        opts: &RelaxationOptions,
    ) -> Result<(Self, LinearForm), Error> {
        let lattice = *basis.lattice();
        if !h.is_hermitian(1e-12) {
            return Err(Error::InvalidArgument("Hamiltonian is not Hermitian".into()));
        }
        if let Some(bad) = h.terms().find(|(s, _)| s.support_mask() >> lattice.num_sites() != 0) {
            return Err(Error::SiteOutOfRange {
                site: 127 - bad.0.support_mask().leading_zeros() as usize,
                sites: lattice.num_sites(),
            });
        }
        check_invariance(h, &lattice, opts.symmetry)?;
        let mut table = MomentTable::new(&lattice, opts.symmetry)?;
        let (blocks, trace_groups) = moment_blocks(basis, &mut table)?;
        let energy = table.resolve_polynomial(h);
        let report = RelaxationReport {
            lattice: lattice_label(&lattice),
            sites: lattice.num_sites(),
            basis: basis.label().to_string(),
            basis_size: basis.len(),
            symmetry: opts.symmetry,
            census: Vec::new(),
            num_vars: 0,
            rdm_k: Vec::new(),
            window: None,
        };
        let mut problem = RelaxationProblem {
            blocks,
            trace_groups,
            objective: LinearForm::zero(),
            direction: Direction::Min,
            inequalities: Vec::new(),
            equalities: Vec::new(),
            report,
            table,
        };
        problem.require_live(&energy, "Hamiltonian")?;
        for &k in &opts.rdm_k {
            problem.add_rdm_positivity(k)?;
        }
        Ok((problem, energy))
    }

    fn live_variables(&self) -> HashSet<usize> {
        self.blocks
            .iter()
            .flat_map(|b| b.entries.iter().flat_map(|(_, _, f)| f.variables()))
            .collect()
    }

    fn require_live(&self, form: &LinearForm, what: &str) -> Result<(), Error> {
        let live = self.live_variables();
        if let Some(v) = form.variables().find(|v| !live.contains(v)) {
            return Err(Error::NotRepresentable(format!(
                "{what} moment <{}> does not appear in the moment matrix",
                self.table.keys()[v]
            )));
        }
        if form.max_imag() > 1e-12 {
            return Err(Error::InvalidArgument(format!("{what} is not real-valued")));
        }
        Ok(())
    }

    fn finish(mut self) -> Self {
        self.report.census = self
            .blocks
            .iter()
            .map(|b| BlockInfo {
                label: b.label.clone(),
                signature: b.signature.map(|s| s.to_string()),
                frequency: b.frequency,
                dim: b.dim,
            })
            .collect();
        self.report.num_vars = self.table.num_vars();
        self
    }

    /// A hand-built problem over free variables `0..num_vars`.
    ///
    /// Certification of such problems assumes `|x_k| <= 1`, as for Pauli
    /// moments; scale variables accordingly.
    pub fn from_parts(
        lattice: &Lattice,
        blocks: Vec<HermBlock>,
        trace_groups: Vec<TraceGroup>,
        objective: LinearForm,
        inequalities: Vec<LinearForm>,
        equalities: Vec<LinearForm>,
    ) -> Result<Self, Error> {
        for b in &blocks {
            if b.entries.iter().any(|(i, j, _)| i > j || *j >= b.dim) {
                return Err(Error::Structure(format!("block {} has misplaced entries", b.label)));
            }
        }
        if let Some(g) = trace_groups.iter().find(|g| g.blocks.iter().any(|&b| b >= blocks.len())) {
            return Err(Error::InvalidArgument(format!(
                "trace group refers to missing blocks {:?}",
                g.blocks
            )));
        }
        let report = RelaxationReport {
            lattice: lattice_label(lattice),
            sites: lattice.num_sites(),
            basis: "custom".into(),
            basis_size: 0,
            symmetry: SymmetryOptions::none(),
            census: Vec::new(),
            num_vars: 0,
            rdm_k: Vec::new(),
            window: None,
        };
        let mut p = RelaxationProblem {
            blocks,
            trace_groups,
            objective,
            direction: Direction::Min,
            inequalities,
            equalities,
            report,
            table: MomentTable::new(lattice, SymmetryOptions::none())?,
        };
        p = p.finish();
        p.report.num_vars = p.live_variables().len();
        Ok(p)
    }

    pub fn num_vars(&self) -> usize {
        self.table.num_vars()
    }

    pub fn var_keys(&self) -> Vec<PauliString> {
        self.table.keys()
    }

    pub fn table(&self) -> &MomentTable {
        &self.table
    }

    /// Linear form of `<p>` in this problem's variables.
    pub fn linear_form(&mut self, p: &PauliPolynomial) -> LinearForm {
        self.table.resolve_polynomial(p)
    }

    /// Appends positivity of the reduced density matrix on the first `k` sites.
    pub fn add_rdm_positivity(&mut self, k: usize) -> Result<(), Error> {
        let n = self.table.lattice().num_sites();
        if k == 0 || k > n {
            return Err(Error::InvalidArgument(format!(
                "RDM size k = {k} must be in 1..={n}"
            )));
        }
        if k > 10 {
            return Err(Error::InvalidArgument(format!(
                "RDM size k = {k} exceeds the storage guard of 10"
            )));
        }
        let dim = 1usize << k;
        let norm = 1.0 / dim as f64;
        let mut acc: HashMap<(usize, usize), LinearForm> = HashMap::new();
        for code in 0..4usize.pow(k as u32) {
            let mut s = PauliString::identity();
            let mut c = code;
            for site in 0..k {
                if c % 4 != 0 {
                    s = s.multiply(&PauliString::single(site, Axis::ALL[c % 4 - 1]));
                }
                c /= 4;
            }
            let moment = self.table.resolve(&s);
            if moment.is_zero() {
                continue;
            }
            let form = moment.to_form();
            let (x, z) = s.masks();
            let (x, z) = (x as usize, z as usize);
            let ny = (x & z).count_ones();
            for b in 0..dim {
                let (row, col) = (b ^ x, b);
                if row > col {
                    continue;
                }
                let sign = if (b & z).count_ones() % 2 == 0 { 1.0 } else { -1.0 };
                let c = Phase::new(ny as i64).to_complex() * sign * norm;
                let slot = acc.entry((row, col)).or_default();
                *slot = slot.add_scaled(&form, c);
            }
        }
        let mut entries: Vec<(usize, usize, LinearForm)> = acc
            .into_iter()
            .filter(|(_, f)| !f.is_zero())
            .map(|((i, j), f)| (i, j, f))
            .collect();
        entries.sort_by_key(|(i, j, _)| (*i, *j));
        self.trace_groups.push(TraceGroup {
            blocks: vec![self.blocks.len()],
            total: 1.0,
        });
        self.blocks.push(HermBlock {
            label: format!("rdm k={k}"),
            signature: None,
            frequency: None,
            dim,
            entries,
        });
        self.report.rdm_k.push(k);
        self.report.num_vars = self.table.num_vars();
        Ok(())
    }

    /// Sign applied to solver objectives to recover the value of the original
    /// objective (`-1` when maximizing).
    pub fn objective_sign(&self) -> f64 {
        match self.direction {
            Direction::Min => 1.0,
            Direction::Max => -1.0,
        }
    }
}

/// `min <H>` over the moment relaxation.
pub fn assemble_energy_problem(
    h: &PauliPolynomial,
    basis: &MonomialBasis,
    opts: &RelaxationOptions,
) -> Result<RelaxationProblem, Error> {
    let (mut problem, energy) = RelaxationProblem::build(h, basis, opts)?;
    problem.objective = energy;
    Ok(problem.finish())
}

/// `min` or `max <O>` subject to `lower <= <H> <= upper`.
pub fn assemble_observable_problem(
    h: &PauliPolynomial,
    basis: &MonomialBasis,
    observable: &PauliPolynomial,
    window: (f64, f64),
    direction: Direction,
    opts: &RelaxationOptions,
) -> Result<RelaxationProblem, Error> {
    let (lower, upper) = window;
    if !(lower.is_finite() && upper.is_finite()) || lower > upper {
        return Err(Error::InvalidArgument(format!(
            "energy window [{lower}, {upper}] is empty or not finite"
        )));
    }
    if !observable.is_hermitian(1e-12) {
        return Err(Error::InvalidArgument("observable is not Hermitian".into()));
    }
    let (mut problem, energy) = RelaxationProblem::build(h, basis, opts)?;
    let obs = problem.table.resolve_polynomial(observable);
    problem.require_live(&obs, "observable")?;
    let one = Complex64::new(1.0, 0.0);
    problem.inequalities.push(energy.add_scaled(&LinearForm::constant(one), Complex64::new(-lower, 0.0)));
    problem.inequalities.push(LinearForm::constant(Complex64::new(upper, 0.0)).add_scaled(&energy, -one));
    problem.direction = direction;
    problem.objective = match direction {
        Direction::Min => obs,
        Direction::Max => obs.scale(-one),
    };
    problem.report.window = Some(window);
    Ok(problem.finish())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::BasisParams;
    use crate::model::ModelSpec;

    fn s(t: &str) -> PauliString {
        t.parse().unwrap()
    }

    #[test]
    fn two_by_two_moment_matrix() {
        let lat = Lattice::chain(2).unwrap();
        let mut table = MomentTable::new(&lat, SymmetryOptions::none()).unwrap();
        let b = build_moment_matrix(&[PauliString::identity(), s("X1")], &mut table);
        assert!(b.has_unit_diagonal());
        assert!(b.is_hermitian());
        assert_eq!(b.get(0, 1).moment, Moment::Var(0));
        assert_eq!(b.get(1, 0), b.get(0, 1));
    }

    #[test]
    fn product_entry_carries_phase() {
        let lat = Lattice::chain(2).unwrap();
        let mut table = MomentTable::new(&lat, SymmetryOptions::none()).unwrap();
        let b = build_moment_matrix(&[s("X1"), s("Y1")], &mut table);
        let e = b.get(0, 1);
        assert_eq!(e.phase, Phase::I);
        assert_eq!(table.keys()[0], s("Z1"));
        assert_eq!(b.get(1, 0).phase, Phase::MINUS_I);
    }

    #[test]
    fn sign_variant_moments_vanish() {
        let lat = Lattice::chain(4).unwrap();
        let mut table = MomentTable::new(&lat, SymmetryOptions::all()).unwrap();
        assert!(table.resolve(&s("Z1")).is_zero());
        assert!(table.resolve(&s("X1 Y2")).is_zero());
        assert!(!table.resolve(&s("X1 X2")).is_zero());
        // translation and permutation identify these
        let a = table.resolve(&s("X1 X2"));
        let b = table.resolve(&s("Z3 Z4"));
        assert_eq!(a, b);
    }

    #[test]
    fn split_detects_unsorted_rows() {
        let lat = Lattice::chain(2).unwrap();
        let mut table = MomentTable::new(&lat, SymmetryOptions::all()).unwrap();
        let b = build_moment_matrix(&[s("X1"), PauliString::identity()], &mut table);
        assert!(split_sign_blocks(&b).is_err());
        let b = build_moment_matrix(&[PauliString::identity(), s("X1"), s("Y1")], &mut table);
        let parts = split_sign_blocks(&b).unwrap();
        assert_eq!(parts.iter().map(|p| p.dim()).collect::<Vec<_>>(), vec![1, 1, 1]);
    }

    #[test]
    fn permutation_needs_sign() {
        let lat = Lattice::chain(4).unwrap();
        let opts = SymmetryOptions {
            sign: false,
            ..SymmetryOptions::all()
        };
        assert!(MomentTable::new(&lat, opts).is_err());
    }

    #[test]
    fn roots_are_conjugate_symmetric() {
        for l in 2..12 {
            let w = roots_of_unity(l);
            for j in 1..l {
                assert_eq!(w[l - j], w[j].conj());
                let a = -2.0 * PI * j as f64 / l as f64;
                assert!((w[j] - Complex64::new(a.cos(), a.sin())).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn chain_census_and_structure() {
        let lat = Lattice::chain(6).unwrap();
        let spec = ModelSpec::new(lat, 0.0).unwrap();
        let basis = MonomialBasis::chain(&lat, BasisParams::chain(3, 4)).unwrap();
        let p = assemble_energy_problem(&spec.build_hamiltonian(), &basis, &RelaxationOptions::default())
            .unwrap();
        let mut sizes: Vec<usize> = p.blocks.iter().map(|b| b.dim).collect();
        sizes.sort_unstable();
        let mut expected = vec![34; 18];
        expected.extend([36; 5]);
        expected.push(37);
        assert_eq!(sizes, expected);
        let totals: f64 = p.trace_groups.iter().map(|g| g.total).sum();
        assert_eq!(totals as usize, basis.padded_layout().len());
    }

    #[test]
    fn non_invariant_hamiltonian_rejected() {
        let (lat, h) = crate::model::three_qubit_model();
        let basis = MonomialBasis::full(&lat, 1).unwrap();
        let opts = RelaxationOptions::default();
        assert!(assemble_energy_problem(&h, &basis, &opts).is_err());
        let opts = RelaxationOptions {
            symmetry: SymmetryOptions {
                translation: false,
                ..SymmetryOptions::all()
            },
            rdm_k: vec![],
        };
        assert!(assemble_energy_problem(&h, &basis, &opts).is_ok());
    }

    #[test]
    fn unrepresentable_terms_are_reported() {
        let lat = Lattice::chain(4).unwrap();
        let basis = MonomialBasis::chain(&lat, BasisParams::chain(1, 1)).unwrap();
        // products of single-site monomials reach degree two only
        let h = PauliPolynomial::from_string(Complex64::new(1.0, 0.0), s("X1 X2 X3"));
        let opts = RelaxationOptions {
            symmetry: SymmetryOptions::none(),
            rdm_k: vec![],
        };
        let err = assemble_energy_problem(&h, &basis, &opts);
        assert!(matches!(err, Err(Error::NotRepresentable(_))));
    }

    #[test]
    fn rdm_single_site_block() {
        let lat = Lattice::chain(4).unwrap();
        let spec = ModelSpec::new(lat, 0.0).unwrap();
        let basis = MonomialBasis::chain(&lat, BasisParams::chain(2, 2)).unwrap();
        let opts = RelaxationOptions {
            symmetry: SymmetryOptions::none(),
            rdm_k: vec![1],
        };
        let mut p = assemble_energy_problem(&spec.build_hamiltonian(), &basis, &opts).unwrap();
        let rdm = p.blocks.last().unwrap().clone();
        assert_eq!(rdm.dim, 2);
        let vx = p.linear_form(&PauliPolynomial::from_string(Complex64::new(1.0, 0.0), s("X1")));
        let vz = p.linear_form(&PauliPolynomial::from_string(Complex64::new(1.0, 0.0), s("Z1")));
        let mut x = vec![0.0; p.num_vars()];
        x[vx.terms[0].0] = 0.6;
        x[vz.terms[0].0] = 0.8;
        let m = rdm.evaluate(&x);
        // pure state with Bloch vector (0.6, 0, 0.8)
        assert!((m[(0, 0)].re - 0.9).abs() < 1e-15);
        assert!((m[(0, 1)].re - 0.3).abs() < 1e-15);
        assert!((m.determinant().re).abs() < 1e-15);
    }

    #[test]
    fn observable_window_validation() {
        let lat = Lattice::chain(4).unwrap();
        let spec = ModelSpec::new(lat, 0.0).unwrap();
        let basis = MonomialBasis::chain(&lat, BasisParams::chain(2, 2)).unwrap();
        let obs = spec.correlation_observable(crate::Shift::chain(1)).unwrap();
        let h = spec.build_hamiltonian();
        let opts = RelaxationOptions::default();
        assert!(assemble_observable_problem(&h, &basis, &obs.poly, (1.0, 0.0), Direction::Min, &opts).is_err());
        let p = assemble_observable_problem(&h, &basis, &obs.poly, (-2.0, -1.9), Direction::Max, &opts)
            .unwrap();
        assert_eq!(p.inequalities.len(), 2);
        assert_eq!(p.objective_sign(), -1.0);
    }
}
