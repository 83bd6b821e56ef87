//! Sparse monomial bases indexing the moment matrix.
//!
//! A basis is generated from *orbit generators*: monomials anchored on the
//! first row of the lattice (site 1 of a chain, row 1 of a square). Every
//! generator is expanded into its padded orbit under the cyclic shifts along
//! the first axis, so an orbit always has exactly `L` members (the identity
//! is the only size-one orbit). Generators that coincide exactly are merged,
//! but distinct generators whose orbits overlap through wrap-around are kept:
//! a repeated member is a duplicated row of the moment matrix and does not
//! change the feasible set. The unique monomial list used for dumps and
//! unreduced relaxations keeps each monomial once.

use std::collections::HashMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::lattice::{Lattice, LatticeKind, Shift};
use crate::pauli::{Axis, PauliString};
use crate::Error;

/// Parities `(s_xy(m)/m, s_yz(m)/m)` of a monomial under the two-axis sign flips.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Signature {
    pub xy: i8,
    pub yz: i8,
}

impl Signature {
    pub const ALL: [Signature; 4] = [
        Signature { xy: 1, yz: 1 },
        Signature { xy: 1, yz: -1 },
        Signature { xy: -1, yz: 1 },
        Signature { xy: -1, yz: -1 },
    ];
    pub const TRIVIAL: Signature = Signature { xy: 1, yz: 1 };

    pub fn of(m: &PauliString) -> Signature {
        let parity = |n: u32| if n.is_multiple_of(2) { 1 } else { -1 };
        let (nx, ny, nz) = (m.axis_count(Axis::X), m.axis_count(Axis::Y), m.axis_count(Axis::Z));
        Signature {
            xy: parity(nx + ny),
            yz: parity(ny + nz),
        }
    }

    /// Position in [`Signature::ALL`].
    pub fn rank(self) -> usize {
        Signature::ALL.iter().position(|&s| s == self).expect("valid signature")
    }

    pub fn combine(self, other: Signature) -> Signature {
        Signature {
            xy: self.xy * other.xy,
            yz: self.yz * other.yz,
        }
    }
}

impl std::fmt::Display for Signature {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({},{})", self.xy, self.yz)
    }
}

pub fn signature(m: &PauliString) -> Signature {
    Signature::of(m)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BasisVariant {
    /// `1, s_i, s_i s_{i+j}, s_i s_{i+1} s_{i+2}, s_i s_{i+1} s_{i+2} s_{i+3}`.
    Standard,
    /// Standard with the three-body family replaced by `s_i s_{i+2} s_{i+4}`.
    Frustrated,
    /// The ten square-lattice families with two-body offsets in `[-r, r]^2`.
    Square,
    /// [`BasisVariant::Square`] without the degree-four plaquette family.
    SquareNoDeg4,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BasisParams {
    /// Largest two-body separation (chain) or offset window radius (square).
    pub r: usize,
    pub degree_cap: usize,
    pub variant: BasisVariant,
}

impl BasisParams {
    pub fn chain(r: usize, degree_cap: usize) -> Self {
        BasisParams {
            r,
            degree_cap,
            variant: BasisVariant::Standard,
        }
    }

    pub fn square(degree_cap: usize) -> Self {
        BasisParams {
            r: 3,
            degree_cap,
            variant: BasisVariant::Square,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MonomialInfo {
    pub signature: Signature,
    /// First orbit listing this monomial.
    pub orbit: usize,
    pub position: usize,
    pub degree: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Orbit {
    pub generator: PauliString,
    pub signature: Signature,
    pub degree: usize,
    /// Indices into the monomial list; `members[k]` is the generator shifted by `k`.
    pub members: Vec<usize>,
}

impl Orbit {
    pub fn is_identity(&self) -> bool {
        self.generator.is_identity()
    }
}

/// One block of the circulant census: `count` blocks of dimension `size`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct CensusEntry {
    pub signature: Option<Signature>,
    pub frequency: usize,
    pub size: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MonomialBasis {
    lattice: Lattice,
    label: String,
    monomials: Vec<PauliString>,
    info: Vec<MonomialInfo>,
    orbits: Vec<Orbit>,
}

fn sites_distinct(sites: &[usize]) -> bool {
    let mut seen = 0u128;
    for &s in sites {
        if seen >> s & 1 == 1 {
            return false;
        }
        seen |= 1 << s;
    }
    true
}

/// All axis assignments to the given sites, or nothing if two sites coincide.
fn axis_products(sites: &[usize]) -> Vec<PauliString> {
    if !sites_distinct(sites) {
        return Vec::new();
    }
    let mut out = vec![PauliString::identity()];
    for &s in sites {
        out = out
            .into_iter()
            .flat_map(|p| Axis::ALL.map(|a| p.multiply(&PauliString::single(s, a))))
            .collect();
    }
    out
}

impl MonomialBasis {
    /// Chain bases anchored at site 1.
    pub fn chain(lattice: &Lattice, params: BasisParams) -> Result<Self, Error> {
        if lattice.kind() != LatticeKind::Chain {
            return Err(Error::InvalidArgument("chain basis needs a chain lattice".into()));
        }
        if !matches!(params.variant, BasisVariant::Standard | BasisVariant::Frustrated) {
            return Err(Error::InvalidArgument(format!(
                "basis variant {:?} does not apply to chains",
                params.variant
            )));
        }
        let n = lattice.num_sites();
        if params.r == 0 || params.r > n / 2 {
            return Err(Error::InvalidArgument(format!(
                "two-body range r = {} must satisfy 1 <= r <= N/2 = {}",
                params.r,
                n / 2
            )));
        }
        if !(1..=4).contains(&params.degree_cap) {
            return Err(Error::InvalidArgument("degree cap must be in 1..=4".into()));
        }
        let site = |k: usize| k % n;
        let mut generators = vec![PauliString::identity()];
        generators.extend(axis_products(&[0]));
        if params.degree_cap >= 2 {
            for j in 1..=params.r {
                generators.extend(axis_products(&[0, site(j)]));
            }
        }
        if params.degree_cap >= 3 {
            let triple = match params.variant {
                BasisVariant::Frustrated => [0, site(2), site(4)],
                _ => [0, site(1), site(2)],
            };
            generators.extend(axis_products(&triple));
        }
        if params.degree_cap >= 4 {
            generators.extend(axis_products(&[0, site(1), site(2), site(3)]));
        }
        let label = format!(
            "{:?} r={} degree_cap={}",
            params.variant, params.r, params.degree_cap
        );
        Ok(Self::from_generators(lattice, label, generators))
    }

    /// Square-lattice bases anchored on the first row.
    pub fn square(lattice: &Lattice, params: BasisParams) -> Result<Self, Error> {
        if lattice.kind() != LatticeKind::Square {
            return Err(Error::InvalidArgument("square basis needs a square lattice".into()));
        }
        if !matches!(params.variant, BasisVariant::Square | BasisVariant::SquareNoDeg4) {
            return Err(Error::InvalidArgument(format!(
                "basis variant {:?} does not apply to square lattices",
                params.variant
            )));
        }
        if params.r == 0 {
            return Err(Error::InvalidArgument("offset window must be at least 1".into()));
        }
        let l = lattice.extent();
        let r = params.r as isize;
        let at = |col: usize, dr: isize, dc: isize| lattice.offset(col, dr, dc);
        let mut generators = vec![PauliString::identity()];
        for col in 0..l {
            generators.extend(axis_products(&[col]));
        }
        if params.degree_cap >= 2 {
            for col in 0..l {
                // half of the offset window lists each unordered pair once
                for r1 in 0..=r {
                    for r2 in -r..=r {
                        if r1 == 0 && r2 <= 0 {
                            continue;
                        }
                        generators.extend(axis_products(&[col, at(col, r1, r2)]));
                    }
                }
            }
        }
        const TRIPLES: [[(isize, isize); 3]; 6] = [
            [(0, 0), (0, 1), (1, 1)],
            [(0, 0), (0, 1), (-1, 1)],
            [(0, 0), (1, 0), (1, 1)],
            [(0, 0), (-1, 0), (-1, 1)],
            [(0, 0), (1, 0), (2, 0)],
            [(0, 0), (0, 1), (0, 2)],
        ];
        if params.degree_cap >= 3 {
            for col in 0..l {
                for shape in TRIPLES {
                    let sites = shape.map(|(dr, dc)| at(col, dr, dc));
                    generators.extend(axis_products(&sites));
                }
            }
        }
        if params.degree_cap >= 4 && params.variant == BasisVariant::Square {
            for col in 0..l {
                let sites = [(0, 0), (1, 0), (0, 1), (1, 1)].map(|(dr, dc)| at(col, dr, dc));
                generators.extend(axis_products(&sites));
            }
        }
        let label = format!(
            "{:?} r={} degree_cap={}",
            params.variant, params.r, params.degree_cap
        );
        Ok(Self::from_generators(lattice, label, generators))
    }

    pub fn for_lattice(lattice: &Lattice, params: BasisParams) -> Result<Self, Error> {
        match lattice.kind() {
            LatticeKind::Chain => Self::chain(lattice, params),
            LatticeKind::Square => Self::square(lattice, params),
        }
    }

    /// Every monomial of degree at most `max_degree` on the lattice.
    pub fn full(lattice: &Lattice, max_degree: usize) -> Result<Self, Error> {
        let n = lattice.num_sites();
        if n > 12 {
            return Err(Error::InvalidArgument(format!(
                "full basis on {n} sites is too large"
            )));
        }
        let shifts = lattice.translations().axis_shifts;
        let mut covered = std::collections::HashSet::new();
        let mut generators = Vec::new();
        let mut all: Vec<PauliString> = Vec::new();
        for code in 0..4usize.pow(n as u32) {
            let mut s = PauliString::identity();
            let mut c = code;
            for site in 0..n {
                if c % 4 != 0 {
                    s = s.multiply(&PauliString::single(site, Axis::ALL[c % 4 - 1]));
                }
                c /= 4;
            }
            if s.degree() <= max_degree {
                all.push(s);
            }
        }
        all.sort();
        for s in all {
            if covered.contains(&s) {
                continue;
            }
            for &shift in &shifts {
                covered.insert(s.act_translation(lattice, shift));
            }
            generators.push(s);
        }
        Ok(Self::from_generators(
            lattice,
            format!("full degree<={max_degree}"),
            generators,
        ))
    }

    /// Builds the basis from orbit generators in generation order.
    pub fn from_generators(lattice: &Lattice, label: String, generators: Vec<PauliString>) -> Self {
        let shifts = lattice.translations().axis_shifts;
        let mut seen = std::collections::HashSet::new();
        let mut gens: Vec<PauliString> = vec![PauliString::identity()];
        seen.insert(PauliString::identity());
        for g in generators {
            let g = g.phase_free();
            if seen.insert(g) {
                gens.push(g);
            }
        }
        // stable: generation order is kept within a signature
        gens.sort_by_key(|g| Signature::of(g).rank());

        let mut index: HashMap<PauliString, usize> = HashMap::new();
        let mut monomials = Vec::new();
        let mut info = Vec::new();
        let mut orbits = Vec::with_capacity(gens.len());
        for g in gens {
            let images: Vec<PauliString> = if g.is_identity() {
                vec![g]
            } else {
                shifts.iter().map(|&s| g.act_translation(lattice, s)).collect()
            };
            let orbit_id = orbits.len();
            let signature = Signature::of(&g);
            let members = images
                .iter()
                .enumerate()
                .map(|(pos, m)| {
                    *index.entry(*m).or_insert_with(|| {
                        monomials.push(*m);
                        info.push(MonomialInfo {
                            signature,
                            orbit: orbit_id,
                            position: pos,
                            degree: m.degree(),
                        });
                        monomials.len() - 1
                    })
                })
                .collect();
            orbits.push(Orbit {
                generator: g,
                signature,
                degree: g.degree(),
                members,
            });
        }
        MonomialBasis {
            lattice: *lattice,
            label,
            monomials,
            info,
            orbits,
        }
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn len(&self) -> usize {
        self.monomials.len()
    }

    pub fn is_empty(&self) -> bool {
        self.monomials.is_empty()
    }

    pub fn monomials(&self) -> &[PauliString] {
        &self.monomials
    }

    pub fn info(&self) -> &[MonomialInfo] {
        &self.info
    }

    pub fn orbits(&self) -> &[Orbit] {
        &self.orbits
    }

    pub fn identity_index(&self) -> usize {
        self.orbits[0].members[0]
    }

    /// `true` when each signature occupies one contiguous run of the monomial list.
    pub fn is_signature_sorted(&self) -> bool {
        self.info
            .windows(2)
            .all(|w| w[0].signature.rank() <= w[1].signature.rank())
    }

    /// Row layout with every orbit padded to full length: identity first,
    /// then the members of each orbit in order.
    pub fn padded_layout(&self) -> Vec<usize> {
        self.orbits.iter().flat_map(|o| o.members.iter().copied()).collect()
    }

    /// Block census after sign splitting (optional) and circulant blocking.
    pub fn circulant_census(&self, sign_split: bool) -> Vec<CensusEntry> {
        let period = self.lattice.period();
        let groups: Vec<Option<Signature>> = if sign_split {
            Signature::ALL.iter().copied().map(Some).collect()
        } else {
            vec![None]
        };
        let mut out = Vec::new();
        for group in groups {
            let in_group = |o: &&Orbit| group.is_none_or(|s| o.signature == s);
            let types = self.orbits.iter().filter(in_group).filter(|o| !o.is_identity()).count();
            let has_identity = self.orbits.iter().filter(in_group).any(|o| o.is_identity());
            if types == 0 && !has_identity {
                continue;
            }
            for frequency in 0..period {
                let size = types + usize::from(has_identity && frequency == 0);
                if size > 0 {
                    out.push(CensusEntry {
                        signature: group,
                        frequency,
                        size,
                    });
                }
            }
        }
        out
    }

    /// Text dump: a header, one line per monomial, one line per orbit.
    pub fn dump(&self) -> String {
        let lat = &self.lattice;
        let mut out = String::from("# spinbound monomial basis v1\n");
        let kind = match lat.kind() {
            LatticeKind::Chain => "chain",
            LatticeKind::Square => "square",
        };
        let _ = writeln!(out, "lattice {kind} {}", lat.extent());
        let _ = writeln!(out, "label {}", self.label);
        for (i, (m, info)) in self.monomials.iter().zip(&self.info).enumerate() {
            let _ = writeln!(
                out,
                "monomial {i} {} {} {} {} {}",
                info.signature,
                info.orbit,
                info.position,
                info.degree,
                m.render(Some(lat))
            );
        }
        for (k, o) in self.orbits.iter().enumerate() {
            let members: Vec<String> = o.members.iter().map(|m| m.to_string()).collect();
            let _ = writeln!(out, "orbit {k} {} {}", o.signature, members.join(","));
        }
        out
    }

    /// Inverse of [`dump`](Self::dump).
    pub fn load(text: &str) -> Result<Self, Error> {
        let bad = |line: &str| Error::Parse(format!("bad basis line {line:?}"));
        let mut lattice = None;
        let mut label = String::new();
        let mut monomials = Vec::new();
        let mut info = Vec::new();
        let mut orbits = Vec::new();
        for line in text.lines() {
            let line = line.trim_end();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (tag, rest) = line.split_once(' ').ok_or_else(|| bad(line))?;
            match tag {
                "lattice" => {
                    let (kind, extent) = rest.split_once(' ').ok_or_else(|| bad(line))?;
                    let extent: usize = extent.parse().map_err(|_| bad(line))?;
                    lattice = Some(match kind {
                        "chain" => Lattice::chain(extent)?,
                        "square" => Lattice::square(extent)?,
                        _ => return Err(bad(line)),
                    });
                }
                "label" => label = rest.to_string(),
                "monomial" => {
                    let lat = lattice.as_ref().ok_or_else(|| bad(line))?;
                    let mut parts = rest.splitn(6, ' ');
                    let mut field = || parts.next().ok_or_else(|| bad(line));
                    let idx: usize = field()?.parse().map_err(|_| bad(line))?;
                    let signature = parse_signature(field()?).ok_or_else(|| bad(line))?;
                    let orbit: usize = field()?.parse().map_err(|_| bad(line))?;
                    let position: usize = field()?.parse().map_err(|_| bad(line))?;
                    let degree: usize = field()?.parse().map_err(|_| bad(line))?;
                    let m = PauliString::parse(field()?, Some(lat))?;
                    if idx != monomials.len() {
                        return Err(bad(line));
                    }
                    monomials.push(m);
                    info.push(MonomialInfo {
                        signature,
                        orbit,
                        position,
                        degree,
                    });
                }
                "orbit" => {
                    let mut parts = rest.split(' ');
                    let _id = parts.next().ok_or_else(|| bad(line))?;
                    let signature = parts
                        .next()
                        .and_then(parse_signature)
                        .ok_or_else(|| bad(line))?;
                    let members: Vec<usize> = parts
                        .next()
                        .ok_or_else(|| bad(line))?
                        .split(',')
                        .map(|m| m.parse::<usize>().map_err(|_| bad(line)))
                        .collect::<Result<_, _>>()?;
                    if members.iter().any(|&m| m >= monomials.len()) {
                        return Err(bad(line));
                    }
                    let generator: PauliString = monomials[members[0]];
                    orbits.push(Orbit {
                        generator,
                        signature,
                        degree: generator.degree(),
                        members,
                    });
                }
                _ => return Err(bad(line)),
            }
        }
        let lattice = lattice.ok_or_else(|| Error::Parse("basis dump has no lattice".into()))?;
        if orbits.first().is_none_or(|o| !o.is_identity()) {
            return Err(Error::Parse("basis dump must start with the identity orbit".into()));
        }
        Ok(MonomialBasis {
            lattice,
            label,
            monomials,
            info,
            orbits,
        })
    }

    /// Applies a site map to every monomial (used for closure checks).
    pub fn image_set(&self, f: impl Fn(&PauliString) -> PauliString) -> Vec<PauliString> {
        let mut v: Vec<PauliString> = self.monomials.iter().map(f).collect();
        v.sort();
        v
    }

    /// Translation of a monomial along the blocking axis.
    pub fn shift(&self, m: &PauliString, k: usize) -> PauliString {
        m.act_translation(&self.lattice, Shift::square(k, 0))
    }
}

fn parse_signature(text: &str) -> Option<Signature> {
    let inner = text.strip_prefix('(')?.strip_suffix(')')?;
    let (a, b) = inner.split_once(',')?;
    Some(Signature {
        xy: a.parse().ok()?,
        yz: b.parse().ok()?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    fn s(text: &str) -> PauliString {
        text.parse().unwrap()
    }

    #[test]
    fn signatures() {
        assert_eq!(Signature::of(&PauliString::identity()), Signature { xy: 1, yz: 1 });
        assert_eq!(Signature::of(&s("Y1")), Signature { xy: -1, yz: -1 });
        assert_eq!(Signature::of(&s("X1")), Signature { xy: -1, yz: 1 });
        assert_eq!(Signature::of(&s("Z1")), Signature { xy: 1, yz: -1 });
        assert_eq!(Signature::of(&s("X1 X2")), Signature { xy: 1, yz: 1 });
    }

    #[test]
    fn chain_family_counts() {
        let lat = Lattice::chain(6).unwrap();
        let b = MonomialBasis::chain(&lat, BasisParams::chain(3, 4)).unwrap();
        let by_degree = |d: usize| b.monomials().iter().filter(|m| m.degree() == d).count();
        assert_eq!(by_degree(0), 1);
        assert_eq!(by_degree(1), 18);
        // j = 1, 2 give 9 * 6 each; j = 3 pairs wrap onto 3 unordered site pairs
        assert_eq!(by_degree(2), 9 * 6 * 2 + 9 * 3);
        assert_eq!(by_degree(3), 27 * 6);
        assert_eq!(by_degree(4), 81 * 6);
        assert!(b.is_signature_sorted());
        assert_eq!(b.monomials()[b.identity_index()], PauliString::identity());
        let set: BTreeSet<_> = b.monomials().iter().collect();
        assert_eq!(set.len(), b.len());
    }

    #[test]
    fn chain_census_matches_block_formulas() {
        for (n, r) in [(6, 3), (8, 3), (10, 5)] {
            let lat = Lattice::chain(n).unwrap();
            let b = MonomialBasis::chain(&lat, BasisParams::chain(r, 4)).unwrap();
            let census = b.circulant_census(true);
            let count = |size: usize| census.iter().filter(|c| c.size == size).count();
            assert_eq!(count(3 * r + 28), 1);
            assert_eq!(count(3 * r + 27), n - 1);
            assert_eq!(count(2 * r + 28), 3 * n);
            assert_eq!(census.len(), 4 * n);
        }
    }

    #[test]
    fn orbits_have_full_length() {
        let lat = Lattice::chain(6).unwrap();
        let b = MonomialBasis::chain(&lat, BasisParams::chain(3, 4)).unwrap();
        for o in b.orbits() {
            let expected = if o.is_identity() { 1 } else { 6 };
            assert_eq!(o.members.len(), expected);
            for (k, &m) in o.members.iter().enumerate() {
                assert_eq!(b.monomials()[m], b.shift(&o.generator, k));
            }
        }
        // the j = N/2 same-axis pairs repeat after half a period
        let g = s("X1 X4");
        let o = b.orbits().iter().find(|o| o.generator == g).unwrap();
        assert_eq!(o.members[0], o.members[3]);
    }

    #[test]
    fn rejects_bad_params() {
        let lat = Lattice::chain(6).unwrap();
        assert!(MonomialBasis::chain(&lat, BasisParams::chain(4, 4)).is_err());
        assert!(MonomialBasis::chain(&lat, BasisParams::chain(0, 4)).is_err());
        assert!(MonomialBasis::chain(&lat, BasisParams::square(4)).is_err());
        let sq = Lattice::square(4).unwrap();
        assert!(MonomialBasis::square(&sq, BasisParams::chain(2, 4)).is_err());
    }

    #[test]
    fn frustrated_variant_swaps_three_body_family() {
        let lat = Lattice::chain(10).unwrap();
        let p = BasisParams {
            r: 3,
            degree_cap: 4,
            variant: BasisVariant::Frustrated,
        };
        let b = MonomialBasis::chain(&lat, p).unwrap();
        let has = |t: &str| b.monomials().contains(&s(t));
        assert!(has("X1 Y3 Z5"));
        assert!(!has("X1 Y2 Z3"));
        assert!(has("X1 Y2 Z3 X4"));
    }

    #[test]
    fn square_basis_families() {
        let lat = Lattice::square(4).unwrap();
        let b = MonomialBasis::square(&lat, BasisParams::square(4)).unwrap();
        let p = PauliString::parse("X(1,1) Y(2,2)", Some(&lat)).unwrap();
        assert!(b.monomials().contains(&p));
        let ids = b.monomials().iter().filter(|m| m.is_identity()).count();
        assert_eq!(ids, 1);
        let mirrored = b.image_set(|m| m.act_mirror(&lat).unwrap());
        assert_eq!(mirrored, b.image_set(|m| *m));

        let no4 = MonomialBasis::square(
            &lat,
            BasisParams {
                variant: BasisVariant::SquareNoDeg4,
                ..BasisParams::square(4)
            },
        )
        .unwrap();
        assert!(no4.monomials().iter().all(|m| m.degree() <= 3));
    }

    #[test]
    fn square_census_per_site_counts() {
        // large enough that the offset window does not wrap
        let lat = Lattice::square(8).unwrap();
        let b = MonomialBasis::square(&lat, BasisParams::square(4)).unwrap();
        let l = 8;
        let census = b.circulant_census(true);
        let count = |size: usize| census.iter().filter(|c| c.size == size).count();
        assert_eq!(count(129 * l + 1), 1);
        assert_eq!(count(129 * l), l - 1);
        assert_eq!(count(111 * l), 3 * l);
        assert_eq!(b.len(), 1 + 462 * l * l);
    }

    #[test]
    fn dump_load_is_stable() {
        let lat = Lattice::chain(6).unwrap();
        let b = MonomialBasis::chain(&lat, BasisParams::chain(2, 3)).unwrap();
        let text = b.dump();
        let back = MonomialBasis::load(&text).unwrap();
        assert_eq!(back, b);
        assert_eq!(back.dump(), text);

        let sq = Lattice::square(3).unwrap();
        let b = MonomialBasis::square(&sq, BasisParams { r: 1, ..BasisParams::square(2) }).unwrap();
        assert_eq!(MonomialBasis::load(&b.dump()).unwrap().dump(), b.dump());
        assert!(MonomialBasis::load("lattice chain 4\nbogus line").is_err());
    }

    #[test]
    fn full_basis_covers_everything() {
        let lat = Lattice::chain(3).unwrap();
        let b = MonomialBasis::full(&lat, 3).unwrap();
        assert_eq!(b.len(), 64);
        let b2 = MonomialBasis::full(&lat, 1).unwrap();
        assert_eq!(b2.len(), 10);
    }
}
