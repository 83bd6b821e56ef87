//! Exact symbolic algebra of Pauli strings.
//!
//! A [`PauliString`] is a phase `i^k` times a product of single-site Pauli
//! operators on distinct sites. Sites are the canonical linear indices of a
//! [`Lattice`] (0-based internally, 1-based when rendered). The factors are
//! kept as two bit masks, so every value is automatically in normal form:
//! sites are strictly increasing and there is at most one factor per site.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul};
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::lattice::{Lattice, LatticeKind, Shift};
use crate::Error;

/// Largest number of sites a [`PauliString`] can address.
pub const MAX_SITES: usize = 128;

/// Spin axis of a single-site Pauli operator. Ordered `X < Y < Z`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub const ALL: [Axis; 3] = [Axis::X, Axis::Y, Axis::Z];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn letter(self) -> char {
        match self {
            Axis::X => 'X',
            Axis::Y => 'Y',
            Axis::Z => 'Z',
        }
    }

    fn from_letter(c: char) -> Option<Axis> {
        match c.to_ascii_uppercase() {
            'X' => Some(Axis::X),
            'Y' => Some(Axis::Y),
            'Z' => Some(Axis::Z),
            _ => None,
        }
    }

    /// Symplectic bits `(x, z)` with `Y = i X Z`.
    fn bits(self) -> (bool, bool) {
        match self {
            Axis::X => (true, false),
            Axis::Y => (true, true),
            Axis::Z => (false, true),
        }
    }
}

/// A fourth root of unity `i^exponent`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Phase(u8);

impl Phase {
    pub const ONE: Phase = Phase(0);
    pub const I: Phase = Phase(1);
    pub const MINUS_ONE: Phase = Phase(2);
    pub const MINUS_I: Phase = Phase(3);

    pub fn new(exponent: i64) -> Self {
        Phase(exponent.rem_euclid(4) as u8)
    }

    pub fn exponent(self) -> u8 {
        self.0
    }

    pub fn conj(self) -> Self {
        Phase((4 - self.0) % 4)
    }

    pub fn is_real(self) -> bool {
        self.0.is_multiple_of(2)
    }

    pub fn to_complex(self) -> Complex64 {
        match self.0 {
            0 => Complex64::new(1.0, 0.0),
            1 => Complex64::new(0.0, 1.0),
            2 => Complex64::new(-1.0, 0.0),
            _ => Complex64::new(0.0, -1.0),
        }
    }
}

impl Mul for Phase {
    type Output = Phase;
    fn mul(self, rhs: Phase) -> Phase {
        Phase((self.0 + rhs.0) % 4)
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self.0 {
            0 => "+1",
            1 => "+i",
            2 => "-1",
            _ => "-i",
        })
    }
}

/// Global sign substitutions of the spin operators. The first three flip two
/// axes at once and leave the Pauli relations intact; the last three flip a
/// single axis and are symmetries of the Heisenberg Hamiltonian only.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SignSubstitution {
    Sxy,
    Syz,
    Szx,
    FlipX,
    FlipY,
    FlipZ,
}

impl SignSubstitution {
    pub const PAIRS: [SignSubstitution; 3] =
        [SignSubstitution::Sxy, SignSubstitution::Syz, SignSubstitution::Szx];
    pub const SINGLES: [SignSubstitution; 3] = [
        SignSubstitution::FlipX,
        SignSubstitution::FlipY,
        SignSubstitution::FlipZ,
    ];

    pub fn flips(self, axis: Axis) -> bool {
        use SignSubstitution::*;
        matches!(
            (self, axis),
            (Sxy, Axis::X)
                | (Sxy, Axis::Y)
                | (Syz, Axis::Y)
                | (Syz, Axis::Z)
                | (Szx, Axis::Z)
                | (Szx, Axis::X)
                | (FlipX, Axis::X)
                | (FlipY, Axis::Y)
                | (FlipZ, Axis::Z)
        )
    }
}

/// A permutation of `{x, y, z}`; `image[a]` is where axis `a` goes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct AxisPermutation {
    image: [Axis; 3],
}

impl AxisPermutation {
    pub const IDENTITY: AxisPermutation = AxisPermutation {
        image: [Axis::X, Axis::Y, Axis::Z],
    };

    pub fn new(image: [Axis; 3]) -> Result<Self, Error> {
        let mut seen = [false; 3];
        for a in image {
            if std::mem::replace(&mut seen[a.index()], true) {
                return Err(Error::InvalidArgument(format!(
                    "{image:?} is not a permutation of the axes"
                )));
            }
        }
        Ok(AxisPermutation { image })
    }

    /// The cycle `x -> y -> z -> x`.
    pub fn cycle() -> Self {
        AxisPermutation {
            image: [Axis::Y, Axis::Z, Axis::X],
        }
    }

    pub fn swap(a: Axis, b: Axis) -> Self {
        let mut image = [Axis::X, Axis::Y, Axis::Z];
        image.swap(a.index(), b.index());
        AxisPermutation { image }
    }

    /// All six permutations, identity first.
    pub fn all() -> [AxisPermutation; 6] {
        use Axis::*;
        [
            [X, Y, Z],
            [X, Z, Y],
            [Y, X, Z],
            [Y, Z, X],
            [Z, X, Y],
            [Z, Y, X],
        ]
        .map(|image| AxisPermutation { image })
    }

    pub fn apply(self, axis: Axis) -> Axis {
        self.image[axis.index()]
    }
}

/// `phase * prod_s sigma_s^{a_s}` in normal form.
///
/// Site `s` carries `X` when only bit `s` of `x` is set, `Z` when only bit `s`
/// of `z` is set and `Y` when both are set.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct PauliString {
    phase: Phase,
    x: u128,
    z: u128,
}

impl Default for PauliString {
    fn default() -> Self {
        Self::identity()
    }
}

impl PauliString {
    pub fn identity() -> Self {
        PauliString {
            phase: Phase::ONE,
            x: 0,
            z: 0,
        }
    }

    /// Single-site operator `sigma_site^axis`.
    pub fn single(site: usize, axis: Axis) -> Self {
        assert!(site < MAX_SITES, "site {site} exceeds MAX_SITES");
        let (bx, bz) = axis.bits();
        PauliString {
            phase: Phase::ONE,
            x: (bx as u128) << site,
            z: (bz as u128) << site,
        }
    }

    /// Product of the given factors, taken left to right and reduced.
    pub fn from_factors<I>(factors: I) -> Self
    where
        I: IntoIterator<Item = (usize, Axis)>,
    {
        factors
            .into_iter()
            .fold(Self::identity(), |acc, (s, a)| acc.multiply(&Self::single(s, a)))
    }

    /// Like [`from_factors`](Self::from_factors) but checks every site against the lattice.
    pub fn on_lattice<I>(lattice: &Lattice, factors: I) -> Result<Self, Error>
    where
        I: IntoIterator<Item = (usize, Axis)>,
    {
        let n = lattice.num_sites();
        let mut acc = Self::identity();
        for (s, a) in factors {
            if s >= n {
                return Err(Error::SiteOutOfRange { site: s, sites: n });
            }
            acc = acc.multiply(&Self::single(s, a));
        }
        Ok(acc)
    }

    pub fn with_phase(mut self, phase: Phase) -> Self {
        self.phase = phase;
        self
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    /// The same factors with phase `+1`.
    pub fn phase_free(&self) -> Self {
        self.with_phase(Phase::ONE)
    }

    pub fn is_identity(&self) -> bool {
        self.x == 0 && self.z == 0
    }

    pub fn support_mask(&self) -> u128 {
        self.x | self.z
    }

    pub fn degree(&self) -> usize {
        self.support_mask().count_ones() as usize
    }

    /// Highest occupied site plus one; zero for the identity.
    pub fn span(&self) -> usize {
        128 - self.support_mask().leading_zeros() as usize
    }

    pub fn axis_at(&self, site: usize) -> Option<Axis> {
        let bx = (self.x >> site) & 1 == 1;
        let bz = (self.z >> site) & 1 == 1;
        match (bx, bz) {
            (false, false) => None,
            (true, false) => Some(Axis::X),
            (true, true) => Some(Axis::Y),
            (false, true) => Some(Axis::Z),
        }
    }

    /// Factors in increasing site order.
    pub fn factors(&self) -> Factors {
        Factors {
            string: *self,
            rest: self.support_mask(),
        }
    }

    /// Bit mask of the sites carrying the given axis.
    pub fn axis_mask(&self, axis: Axis) -> u128 {
        match axis {
            Axis::X => self.x & !self.z,
            Axis::Y => self.x & self.z,
            Axis::Z => self.z & !self.x,
        }
    }

    pub fn axis_count(&self, axis: Axis) -> u32 {
        self.axis_mask(axis).count_ones()
    }

    /// Symplectic masks `(x, z)`.
    pub fn masks(&self) -> (u128, u128) {
        (self.x, self.z)
    }

    /// `NF(self * rhs)`.
    pub fn multiply(&self, rhs: &PauliString) -> PauliString {
        // With Y = iXZ each string is i^{|x&z|} X^x Z^z, and
        // Z^{z1} X^{x2} = (-1)^{|z1&x2|} X^{x2} Z^{z1}.
        let x = self.x ^ rhs.x;
        let z = self.z ^ rhs.z;
        let e = self.phase.0 as u32
            + rhs.phase.0 as u32
            + (self.x & self.z).count_ones()
            + (rhs.x & rhs.z).count_ones()
            + 2 * (self.z & rhs.x).count_ones()
            + 3 * (x & z).count_ones();
        PauliString {
            phase: Phase((e % 4) as u8),
            x,
            z,
        }
    }

    /// Single-site Paulis are self-adjoint and commute across sites, so only
    /// the phase is conjugated.
    pub fn adjoint(&self) -> PauliString {
        PauliString {
            phase: self.phase.conj(),
            ..*self
        }
    }

    pub fn is_self_adjoint(&self) -> bool {
        self.phase.is_real()
    }

    /// `true` when the two strings commute as operators.
    pub fn commutes_with(&self, other: &PauliString) -> bool {
        ((self.x & other.z).count_ones() + (self.z & other.x).count_ones()).is_multiple_of(2)
    }

    /// Sign picked up under a global sign substitution; the string itself is unchanged.
    pub fn act_sign(&self, sub: SignSubstitution) -> (i8, PauliString) {
        let flipped: u32 = Axis::ALL
            .iter()
            .filter(|&&a| sub.flips(a))
            .map(|&a| self.axis_count(a))
            .sum();
        (if flipped.is_multiple_of(2) { 1 } else { -1 }, *self)
    }

    /// Relabels every axis; the phase is kept as is.
    pub fn act_axis_permutation(&self, perm: AxisPermutation) -> PauliString {
        let mut x = 0u128;
        let mut z = 0u128;
        for axis in Axis::ALL {
            let mask = self.axis_mask(axis);
            let (bx, bz) = perm.apply(axis).bits();
            if bx {
                x |= mask;
            }
            if bz {
                z |= mask;
            }
        }
        PauliString {
            phase: self.phase,
            x,
            z,
        }
    }

    /// Moves every factor through a bijection of sites.
    pub fn map_sites(&self, f: impl Fn(usize) -> usize) -> PauliString {
        let mut x = 0u128;
        let mut z = 0u128;
        let mut rest = self.support_mask();
        while rest != 0 {
            let s = rest.trailing_zeros() as usize;
            rest &= rest - 1;
            let t = f(s);
            x |= ((self.x >> s) & 1) << t;
            z |= ((self.z >> s) & 1) << t;
        }
        PauliString {
            phase: self.phase,
            x,
            z,
        }
    }

    /// Applies a site permutation table (`table[s]` is the image of site `s`).
    pub fn permute_sites(&self, table: &[usize]) -> PauliString {
        self.map_sites(|s| table[s])
    }

    pub fn act_translation(&self, lattice: &Lattice, shift: Shift) -> PauliString {
        self.map_sites(|s| lattice.translate(s, shift))
    }

    pub fn act_mirror(&self, lattice: &Lattice) -> Result<PauliString, Error> {
        if lattice.kind() != LatticeKind::Square {
            return Err(Error::InvalidArgument(
                "mirror symmetry needs a square lattice".into(),
            ));
        }
        Ok(self.map_sites(|s| lattice.mirror(s)))
    }

    /// Renders as e.g. `(+i) X1 Y3 Z7`, or `(+1) X(1,2)` on a square lattice.
    pub fn render(&self, lattice: Option<&Lattice>) -> String {
        let mut out = format!("({})", self.phase);
        if self.is_identity() {
            out.push_str(" I");
        }
        for (s, a) in self.factors() {
            out.push(' ');
            out.push(a.letter());
            match lattice.map(|l| (l.kind(), l.extent())) {
                Some((LatticeKind::Square, l)) => {
                    out.push_str(&format!("({},{})", s / l + 1, s % l + 1));
                }
                _ => out.push_str(&(s + 1).to_string()),
            }
        }
        out
    }

    /// Inverse of [`render`](Self::render); the phase prefix is optional.
    pub fn parse(text: &str, lattice: Option<&Lattice>) -> Result<PauliString, Error> {
        let bad = |why: &str| Error::Parse(format!("{why} in Pauli string {text:?}"));
        let mut rest = text.trim();
        let mut phase = Phase::ONE;
        if let Some(stripped) = rest.strip_prefix('(') {
            let close = stripped.find(')').ok_or_else(|| bad("unclosed phase"))?;
            let (p, tail) = stripped.split_at(close);
            phase = match p.trim() {
                "+1" | "1" => Phase::ONE,
                "+i" | "i" => Phase::I,
                "-1" => Phase::MINUS_ONE,
                "-i" => Phase::MINUS_I,
                _ => return Err(bad("unknown phase")),
            };
            rest = &tail[1..];
        }
        let mut factors = Vec::new();
        for token in rest.split_whitespace() {
            if token == "I" {
                continue;
            }
            let mut chars = token.chars();
            let axis = chars
                .next()
                .and_then(Axis::from_letter)
                .ok_or_else(|| bad("unknown axis"))?;
            let loc = chars.as_str();
            let site = if let Some(inner) = loc.strip_prefix('(').and_then(|t| t.strip_suffix(')')) {
                let (i, j) = inner.split_once(',').ok_or_else(|| bad("bad 2D site"))?;
                let i: usize = i.trim().parse().map_err(|_| bad("bad row"))?;
                let j: usize = j.trim().parse().map_err(|_| bad("bad column"))?;
                let l = match lattice.map(|l| (l.kind(), l.extent())) {
                    Some((LatticeKind::Square, l)) => l,
                    _ => return Err(bad("2D site without a square lattice")),
                };
                if i == 0 || j == 0 || i > l || j > l {
                    return Err(bad("2D site out of range"));
                }
                (i - 1) * l + (j - 1)
            } else {
                let s: usize = loc.parse().map_err(|_| bad("bad site"))?;
                if s == 0 {
                    return Err(bad("sites are 1-based"));
                }
                s - 1
            };
            factors.push((site, axis));
        }
        let s = match lattice {
            Some(l) => PauliString::on_lattice(l, factors)?,
            None => {
                if let Some(&(s, _)) = factors.iter().find(|(s, _)| *s >= MAX_SITES) {
                    return Err(Error::SiteOutOfRange { site: s, sites: MAX_SITES });
                }
                PauliString::from_factors(factors)
            }
        };
        Ok(s.with_phase(s.phase * phase))
    }
}

/// Iterator over `(site, axis)` factors in increasing site order.
pub struct Factors {
    string: PauliString,
    rest: u128,
}

impl Iterator for Factors {
    type Item = (usize, Axis);

    fn next(&mut self) -> Option<Self::Item> {
        if self.rest == 0 {
            return None;
        }
        let s = self.rest.trailing_zeros() as usize;
        self.rest &= self.rest - 1;
        Some((s, self.string.axis_at(s).expect("occupied site")))
    }
}

impl Ord for PauliString {
    /// Lexicographic on the factor sequence, comparing `(site, axis)` pairs;
    /// a proper prefix sorts first. Ties are broken by phase.
    fn cmp(&self, other: &Self) -> Ordering {
        let mut a = self.support_mask();
        let mut b = other.support_mask();
        loop {
            match (a == 0, b == 0) {
                (true, true) => return self.phase.cmp(&other.phase),
                (true, false) => return Ordering::Less,
                (false, true) => return Ordering::Greater,
                _ => {}
            }
            let sa = a.trailing_zeros();
            let sb = b.trailing_zeros();
            if sa != sb {
                return sa.cmp(&sb);
            }
            let s = sa as usize;
            let ord = self.axis_at(s).cmp(&other.axis_at(s));
            if ord != Ordering::Equal {
                return ord;
            }
            a &= a - 1;
            b &= b - 1;
        }
    }
}

impl PartialOrd for PauliString {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Mul for PauliString {
    type Output = PauliString;
    fn mul(self, rhs: PauliString) -> PauliString {
        self.multiply(&rhs)
    }
}

impl fmt::Debug for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render(None))
    }
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render(None))
    }
}

impl FromStr for PauliString {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        PauliString::parse(s, None)
    }
}

const COEFF_EPS: f64 = 1e-14;

/// Complex linear combination of phase-free normal-form Pauli strings.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PauliPolynomial {
    terms: BTreeMap<PauliString, Complex64>,
}

impl PauliPolynomial {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_string(coef: Complex64, s: PauliString) -> Self {
        let mut p = Self::new();
        p.add_term(coef, s);
        p
    }

    /// Adds `coef * s`, folding the phase of `s` into the coefficient.
    pub fn add_term(&mut self, coef: Complex64, s: PauliString) {
        let c = coef * s.phase().to_complex();
        let key = s.phase_free();
        let entry = self.terms.entry(key).or_insert(Complex64::new(0.0, 0.0));
        *entry += c;
        if entry.norm() <= COEFF_EPS {
            self.terms.remove(&key);
        }
    }

    pub fn add_real(&mut self, coef: f64, s: PauliString) {
        self.add_term(Complex64::new(coef, 0.0), s);
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn coefficient(&self, s: &PauliString) -> Complex64 {
        self.terms
            .get(&s.phase_free())
            .map(|c| c * s.phase().conj().to_complex())
            .unwrap_or_default()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&PauliString, &Complex64)> {
        self.terms.iter()
    }

    /// Keys are self-adjoint, so the polynomial is Hermitian iff every
    /// coefficient is real.
    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.terms.values().all(|c| c.im.abs() <= tol)
    }

    pub fn scale(&self, factor: Complex64) -> Self {
        let mut out = Self::new();
        for (s, c) in &self.terms {
            out.add_term(c * factor, *s);
        }
        out
    }

    pub fn multiply(&self, rhs: &PauliPolynomial) -> PauliPolynomial {
        let mut out = Self::new();
        for (a, ca) in &self.terms {
            for (b, cb) in &rhs.terms {
                out.add_term(ca * cb, a.multiply(b));
            }
        }
        out
    }

    pub fn adjoint(&self) -> PauliPolynomial {
        let mut out = Self::new();
        for (s, c) in &self.terms {
            out.add_term(c.conj(), s.adjoint());
        }
        out
    }

    /// Image under a map that sends each string to `sign * string'`.
    pub fn map_strings(&self, f: impl Fn(&PauliString) -> (i8, PauliString)) -> PauliPolynomial {
        let mut out = Self::new();
        for (s, c) in &self.terms {
            let (sign, t) = f(s);
            out.add_term(c * sign as f64, t);
        }
        out
    }

    /// Largest site index used plus one.
    pub fn span(&self) -> usize {
        self.terms.keys().map(PauliString::span).max().unwrap_or(0)
    }

    /// Equality up to an absolute coefficient tolerance.
    pub fn approx_eq(&self, other: &PauliPolynomial, tol: f64) -> bool {
        let diff = self.clone() + other.scale(Complex64::new(-1.0, 0.0));
        diff.terms.values().all(|c| c.norm() <= tol)
    }
}

impl Add for PauliPolynomial {
    type Output = PauliPolynomial;
    fn add(mut self, rhs: PauliPolynomial) -> PauliPolynomial {
        for (s, c) in rhs.terms {
            self.add_term(c, s);
        }
        self
    }
}

impl FromIterator<(Complex64, PauliString)> for PauliPolynomial {
    fn from_iter<I: IntoIterator<Item = (Complex64, PauliString)>>(iter: I) -> Self {
        let mut p = PauliPolynomial::new();
        for (c, s) in iter {
            p.add_term(c, s);
        }
        p
    }
}
