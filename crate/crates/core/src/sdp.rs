//! Real semidefinite programs in SDPA block form and a first-order solver.
//!
//! A [`ConicProblem`] is stored in the SDPA convention:
//!
//! ```text
//! moment form:  min  c^T x + offset   s.t.  F(x) = sum_k x_k F_k - F_0  >= 0
//! Gram form:    max  <F_0, Z> + offset s.t.  <F_k, Z> = c_k,  Z >= 0
//! ```
//!
//! over a product of PSD blocks and nonnegative diagonal blocks. The solver
//! is an alternating-direction augmented Lagrangian method; by default it
//! runs on the Gram side, which has one equality per moment variable.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::relaxation::{LinearForm, RelaxationProblem};
use crate::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum BlockKind {
    Psd(usize),
    Nonneg(usize),
}

impl BlockKind {
    pub fn size(self) -> usize {
        match self {
            BlockKind::Psd(n) | BlockKind::Nonneg(n) => n,
        }
    }
}

/// One nonzero of `F_mat` (upper triangle, 0-based); `mat == 0` is `F_0`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConicEntry {
    pub mat: usize,
    pub block: usize,
    pub i: usize,
    pub j: usize,
    pub value: f64,
}

/// Data needed to turn an approximate Gram matrix into a rigorous bound.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Certification {
    /// `|x_k| <= var_bounds[k]` for every feasible moment vector.
    pub var_bounds: Vec<f64>,
    /// Groups of blocks whose `tr F(x)` sum to at most `total`.
    pub trace_groups: Vec<(Vec<usize>, f64)>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConicProblem {
    pub blocks: Vec<BlockKind>,
    pub num_vars: usize,
    pub c: Vec<f64>,
    pub offset: f64,
    pub entries: Vec<ConicEntry>,
    pub certification: Option<Certification>,
    /// Relaxation variable behind each conic variable.
    pub var_origin: Vec<usize>,
}

impl ConicProblem {
    /// Checks indices, triangle storage and that every variable is used.
    pub fn validate(&self) -> Result<(), Error> {
        if self.c.len() != self.num_vars {
            return Err(Error::Structure("objective length differs from variable count".into()));
        }
        let mut used = vec![false; self.num_vars];
        for e in &self.entries {
            let kind = *self
                .blocks
                .get(e.block)
                .ok_or_else(|| Error::Structure(format!("block {} out of range", e.block)))?;
            if e.mat > self.num_vars || e.i > e.j || e.j >= kind.size() {
                return Err(Error::Structure(format!("malformed entry {e:?}")));
            }
            if matches!(kind, BlockKind::Nonneg(_)) && e.i != e.j {
                return Err(Error::Structure(format!("off-diagonal entry in diagonal block: {e:?}")));
            }
            if !e.value.is_finite() {
                return Err(Error::Structure(format!("non-finite entry {e:?}")));
            }
            if e.mat > 0 && e.value != 0.0 {
                used[e.mat - 1] = true;
            }
        }
        if let Some(k) = used.iter().position(|u| !u) {
            return Err(Error::Structure(format!("variable {k} has no matrix entries")));
        }
        Ok(())
    }

    pub fn dims(&self) -> Vec<usize> {
        self.blocks.iter().map(|b| b.size()).collect()
    }

    /// `F(x) = sum_k x_k F_k - F_0` as dense blocks.
    pub fn evaluate(&self, x: &[f64]) -> Vec<DMatrix<f64>> {
        let mut out: Vec<DMatrix<f64>> = self
            .blocks
            .iter()
            .map(|b| DMatrix::zeros(b.size(), b.size()))
            .collect();
        for e in &self.entries {
            let v = if e.mat == 0 { -e.value } else { e.value * x[e.mat - 1] };
            out[e.block][(e.i, e.j)] += v;
            if e.i != e.j {
                out[e.block][(e.j, e.i)] += v;
            }
        }
        out
    }

    /// Writes the sparse SDPA text format.
    pub fn to_sdpa_string(&self) -> String {
        let mut s = String::new();
        if self.offset != 0.0 {
            let _ = writeln!(s, "* objective_offset {}", self.offset);
        }
        if let Some(cert) = &self.certification {
            let bounds: Vec<String> = cert.var_bounds.iter().map(|v| v.to_string()).collect();
            let _ = writeln!(s, "* var_bounds {}", bounds.join(" "));
            for (blocks, total) in &cert.trace_groups {
                let ids: Vec<String> = blocks.iter().map(|b| (b + 1).to_string()).collect();
                let _ = writeln!(s, "* trace_group {total} {}", ids.join(","));
            }
        }
        let _ = writeln!(s, "{}", self.num_vars);
        let _ = writeln!(s, "{}", self.blocks.len());
        let sizes: Vec<String> = self
            .blocks
            .iter()
            .map(|b| match b {
                BlockKind::Psd(n) => n.to_string(),
                BlockKind::Nonneg(n) => format!("-{n}"),
            })
            .collect();
        let _ = writeln!(s, "{}", sizes.join(" "));
        let c: Vec<String> = self.c.iter().map(|v| v.to_string()).collect();
        let _ = writeln!(s, "{}", c.join(" "));
        for e in &self.entries {
            let _ = writeln!(s, "{} {} {} {} {}", e.mat, e.block + 1, e.i + 1, e.j + 1, e.value);
        }
        s
    }

    pub fn export_sdpa(&self, path: &Path) -> Result<(), Error> {
        std::fs::write(path, self.to_sdpa_string())?;
        Ok(())
    }

    pub fn import_sdpa(path: &Path) -> Result<Self, Error> {
        Self::from_sdpa_str(&std::fs::read_to_string(path)?)
    }

    /// Parses the sparse SDPA text format.
    pub fn from_sdpa_str(text: &str) -> Result<Self, Error> {
        let perr = |m: String| Error::Parse(m);
        let mut offset = 0.0;
        let mut var_bounds = None;
        let mut groups = Vec::new();
        let mut lines = Vec::new();
        for line in text.lines() {
            let t = line.trim();
            if let Some(rest) = t.strip_prefix('*').or_else(|| t.strip_prefix('"')) {
                let mut it = rest.split_whitespace();
                match it.next() {
                    Some("objective_offset") => {
                        offset = it
                            .next()
                            .and_then(|v| v.parse().ok())
                            .ok_or_else(|| perr(format!("bad offset line {t:?}")))?;
                    }
                    Some("var_bounds") => {
                        var_bounds = Some(
                            it.map(|v| v.parse::<f64>())
                                .collect::<Result<Vec<_>, _>>()
                                .map_err(|_| perr(format!("bad bounds line {t:?}")))?,
                        );
                    }
                    Some("trace_group") => {
                        let total: f64 = it
                            .next()
                            .and_then(|v| v.parse().ok())
                            .ok_or_else(|| perr(format!("bad trace group {t:?}")))?;
                        let ids = it
                            .next()
                            .map(|l| {
                                l.split(',')
                                    .map(|b| b.parse::<usize>().map(|b| b - 1))
                                    .collect::<Result<Vec<_>, _>>()
                            })
                            .transpose()
                            .map_err(|_| perr(format!("bad trace group {t:?}")))?
                            .unwrap_or_default();
                        groups.push((ids, total));
                    }
                    _ => {}
                }
                continue;
            }
            if !t.is_empty() {
                lines.push(t.replace(['{', '}', '(', ')', ','], " "));
            }
        }
        let mut it = lines.iter();
        let mut next = |what: &str| it.next().ok_or_else(|| perr(format!("missing {what}")));
        let word = |l: &str| -> Result<usize, Error> {
            l.split_whitespace()
                .next()
                .and_then(|w| w.parse().ok())
                .ok_or_else(|| perr(format!("expected an integer in {l:?}")))
        };
        let num_vars = word(next("constraint count")?)?;
        let nblocks = word(next("block count")?)?;
        let blocks: Vec<BlockKind> = next("block sizes")?
            .split_whitespace()
            .map(|w| {
                w.parse::<i64>()
                    .map_err(|_| perr(format!("bad block size {w:?}")))
                    .and_then(|n| match n {
                        0 => Err(perr("zero block size".into())),
                        n if n > 0 => Ok(BlockKind::Psd(n as usize)),
                        n => Ok(BlockKind::Nonneg((-n) as usize)),
                    })
            })
            .collect::<Result<_, _>>()?;
        if blocks.len() != nblocks {
            return Err(perr(format!("expected {nblocks} block sizes")));
        }
        let c: Vec<f64> = if num_vars == 0 {
            Vec::new()
        } else {
            next("objective vector")?
                .split_whitespace()
                .map(|w| w.parse::<f64>().map_err(|_| perr(format!("bad number {w:?}"))))
                .collect::<Result<_, _>>()?
        };
        if c.len() != num_vars {
            return Err(perr(format!("objective has {} entries, expected {num_vars}", c.len())));
        }
        let mut entries = Vec::new();
        for l in it {
            let f: Vec<&str> = l.split_whitespace().collect();
            if f.len() != 5 {
                return Err(perr(format!("bad entry line {l:?}")));
            }
            let int = |w: &str| w.parse::<usize>().map_err(|_| perr(format!("bad index in {l:?}")));
            let (mat, block, i, j) = (int(f[0])?, int(f[1])?, int(f[2])?, int(f[3])?);
            let value: f64 = f[4].parse().map_err(|_| perr(format!("bad value in {l:?}")))?;
            if block == 0 || i == 0 || j == 0 {
                return Err(perr(format!("indices are 1-based in {l:?}")));
            }
            let (i, j) = (i.min(j) - 1, i.max(j) - 1);
            entries.push(ConicEntry {
                mat,
                block: block - 1,
                i,
                j,
                value,
            });
        }
        let certification = var_bounds.map(|var_bounds| Certification {
            var_bounds,
            trace_groups: groups,
        });
        let p = ConicProblem {
            blocks,
            num_vars,
            c,
            offset,
            entries,
            certification,
            var_origin: (0..num_vars).collect(),
        };
        p.validate()?;
        Ok(p)
    }
}

struct RealParts {
    re: Vec<(usize, f64)>,
    im: Vec<(usize, f64)>,
    c_re: f64,
    c_im: f64,
}

fn split_form(f: &LinearForm, map: &HashMap<usize, usize>) -> RealParts {
    let mut re = Vec::new();
    let mut im = Vec::new();
    for &(v, c) in &f.terms {
        let k = map[&v];
        if c.re != 0.0 {
            re.push((k, c.re));
        }
        if c.im != 0.0 {
            im.push((k, c.im));
        }
    }
    RealParts {
        re,
        im,
        c_re: f.constant.re,
        c_im: f.constant.im,
    }
}

fn forms_match(a: &[(usize, usize, LinearForm)], b: &[(usize, usize, LinearForm)], conj: bool) -> bool {
    a.len() == b.len()
        && a.iter().zip(b).all(|((i1, j1, f1), (i2, j2, f2))| {
            i1 == i2 && j1 == j2 && if conj { f1.approx_eq(&f2.conj(), 1e-12) } else { f1.approx_eq(f2, 1e-12) }
        })
}

/// Embeds each Hermitian block `A + iB` as the real block `[[A, -B], [B, A]]`.
///
/// Blocks equal to (the conjugate of) an earlier block are dropped, since
/// their positivity is implied, and blocks with no imaginary part are kept
/// at their original size.
pub fn complex_to_real(problem: &RelaxationProblem) -> Result<ConicProblem, Error> {
    let mut used: Vec<usize> = problem
        .blocks
        .iter()
        .flat_map(|b| b.entries.iter().flat_map(|(_, _, f)| f.variables()))
        .chain(problem.inequalities.iter().flat_map(|f| f.variables()))
        .chain(problem.equalities.iter().flat_map(|f| f.variables()))
        .collect();
    used.sort_unstable();
    used.dedup();
    let map: HashMap<usize, usize> = used.iter().enumerate().map(|(k, &v)| (v, k)).collect();
    if let Some(v) = problem.objective.variables().find(|v| !map.contains_key(v)) {
        return Err(Error::NotRepresentable(format!(
            "objective variable {v} is not constrained by any block"
        )));
    }
    if problem.objective.max_imag() > 1e-12 {
        return Err(Error::Structure("objective is not real".into()));
    }
    let num_vars = used.len();
    let mut c = vec![0.0; num_vars];
    for &(v, coef) in &problem.objective.terms {
        c[map[&v]] += coef.re;
    }

    let mut blocks = Vec::new();
    let mut entries = Vec::new();
    let mut real_index: Vec<Option<usize>> = Vec::with_capacity(problem.blocks.len());
    let mut kept: Vec<usize> = Vec::new();
    for (bi, block) in problem.blocks.iter().enumerate() {
        for (i, j, f) in &block.entries {
            if i == j && f.max_imag() > 1e-12 {
                return Err(Error::Structure(format!(
                    "block {} has a non-real diagonal entry at {i}",
                    block.label
                )));
            }
            if i > j || *j >= block.dim {
                return Err(Error::Structure(format!("block {} entry ({i}, {j}) misplaced", block.label)));
            }
        }
        let redundant = kept.iter().any(|&k| {
            let other = &problem.blocks[k];
            other.dim == block.dim
                && (forms_match(&other.entries, &block.entries, false)
                    || forms_match(&other.entries, &block.entries, true))
        });
        if redundant {
            real_index.push(None);
            continue;
        }
        kept.push(bi);
        let n = block.dim;
        let is_real = block.entries.iter().all(|(_, _, f)| f.is_real());
        let out = blocks.len();
        real_index.push(Some(out));
        blocks.push(BlockKind::Psd(if is_real { n } else { 2 * n }));
        let mut push = |i: usize, j: usize, parts: &[(usize, f64)], constant: f64, sign: f64| {
            if constant != 0.0 {
                entries.push(ConicEntry { mat: 0, block: out, i, j, value: -sign * constant });
            }
            for &(k, v) in parts {
                entries.push(ConicEntry { mat: k + 1, block: out, i, j, value: sign * v });
            }
        };
        for (i, j, f) in &block.entries {
            let p = split_form(f, &map);
            let (i, j) = (*i, *j);
            push(i, j, &p.re, p.c_re, 1.0);
            if !is_real {
                push(n + i, n + j, &p.re, p.c_re, 1.0);
                if i != j {
                    push(i, n + j, &p.im, p.c_im, -1.0);
                    push(j, n + i, &p.im, p.c_im, 1.0);
                }
            }
        }
    }

    let mut trace_groups: Vec<(Vec<usize>, f64)> = problem
        .trace_groups
        .iter()
        .map(|g| {
            (
                g.blocks.iter().filter_map(|&b| real_index[b]).collect::<Vec<usize>>(),
                2.0 * g.total,
            )
        })
        .filter(|(b, _)| !b.is_empty())
        .collect();

    let mut scalar_rows: Vec<LinearForm> = problem.inequalities.clone();
    for eq in &problem.equalities {
        scalar_rows.push(eq.clone());
        scalar_rows.push(eq.scale(Complex64::new(-1.0, 0.0)));
    }
    if !scalar_rows.is_empty() {
        let out = blocks.len();
        blocks.push(BlockKind::Nonneg(scalar_rows.len()));
        let mut bound = 0.0;
        for (r, f) in scalar_rows.iter().enumerate() {
            if f.max_imag() > 1e-12 {
                return Err(Error::Structure("scalar constraint is not real".into()));
            }
            let p = split_form(f, &map);
            if p.c_re != 0.0 {
                entries.push(ConicEntry { mat: 0, block: out, i: r, j: r, value: -p.c_re });
            }
            bound += p.c_re.abs();
            for &(k, v) in &p.re {
                entries.push(ConicEntry { mat: k + 1, block: out, i: r, j: r, value: v });
                bound += v.abs();
            }
        }
        trace_groups.push((vec![out], bound));
    }
    entries.sort_by_key(|e| (e.mat, e.block, e.i, e.j));
    let p = ConicProblem {
        blocks,
        num_vars,
        c,
        offset: problem.objective.constant.re,
        entries,
        certification: Some(Certification {
            var_bounds: vec![1.0; num_vars],
            trace_groups,
        }),
        var_origin: used,
    };
    p.validate()?;
    Ok(p)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolveSide {
    /// Splitting on the moment form.
    Primal,
    /// Splitting on the Gram form.
    Dual,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolveOptions {
    pub eps_primal: f64,
    pub eps_dual: f64,
    pub eps_gap: f64,
    pub max_iter: usize,
    pub side: SolveSide,
    /// Over-relaxation factor in `(0, 2)`.
    pub relaxation: f64,
    /// Initial penalty parameter (Gram side) or its inverse (moment side).
    pub penalty: f64,
    /// Residuals are evaluated every this many iterations.
    pub check_every: usize,
    /// Print residuals to stderr at every check.
    pub verbose: bool,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            eps_primal: 1e-8,
            eps_dual: 1e-8,
            eps_gap: 1e-8,
            max_iter: 200_000,
            side: SolveSide::Dual,
            relaxation: 1.6,
            penalty: 1.0,
            check_every: 10,
            verbose: false,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Optimal,
    NearOptimal,
    MaxIter,
    Infeasible,
}

#[derive(Clone, Debug)]
pub struct SolveResult {
    pub status: SolveStatus,
    /// `c^T x + offset` at the moment-form iterate.
    pub primal_objective: f64,
    /// `<F_0, Z> + offset` at the Gram iterate.
    pub dual_objective: f64,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub gap: f64,
    pub iterations: usize,
    pub wall_time: f64,
    /// Moment variables.
    pub x: Vec<f64>,
    /// Gram matrix blocks (diagonal blocks stored as diagonal matrices).
    pub z: Vec<DMatrix<f64>>,
    pub certified_bound: f64,
    /// Which side the infeasibility certificate refers to, if any.
    pub certificate: Option<String>,
}

/// JSON-friendly summary of a solve.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SolveReport {
    pub status: SolveStatus,
    pub primal_objective: f64,
    pub dual_objective: f64,
    pub certified_bound: f64,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub gap: f64,
    pub iterations: usize,
    pub wall_time_s: f64,
}

impl SolveResult {
    pub fn report(&self) -> SolveReport {
        SolveReport {
            status: self.status,
            primal_objective: self.primal_objective,
            dual_objective: self.dual_objective,
            certified_bound: self.certified_bound,
            primal_residual: self.primal_residual,
            dual_residual: self.dual_residual,
            gap: self.gap,
            iterations: self.iterations,
            wall_time_s: self.wall_time,
        }
    }
}

// ---- block-vector helpers -------------------------------------------------

#[derive(Clone, Debug)]
enum Blk {
    Psd(DMatrix<f64>),
    Diag(DVector<f64>),
}

type Blocks = Vec<Blk>;

fn zeros(kinds: &[BlockKind]) -> Blocks {
    kinds
        .iter()
        .map(|k| match *k {
            BlockKind::Psd(n) => Blk::Psd(DMatrix::zeros(n, n)),
            BlockKind::Nonneg(n) => Blk::Diag(DVector::zeros(n)),
        })
        .collect()
}

fn dot(a: &Blocks, b: &Blocks) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| match (x, y) {
            (Blk::Psd(x), Blk::Psd(y)) => x.dot(y),
            (Blk::Diag(x), Blk::Diag(y)) => x.dot(y),
            _ => unreachable!("block kinds agree"),
        })
        .sum()
}

fn norm(a: &Blocks) -> f64 {
    dot(a, a).sqrt()
}

/// `out = alpha * a + beta * b`, elementwise.
fn lincomb(alpha: f64, a: &Blocks, beta: f64, b: &Blocks) -> Blocks {
    a.iter()
        .zip(b)
        .map(|(x, y)| match (x, y) {
            (Blk::Psd(x), Blk::Psd(y)) => Blk::Psd(x * alpha + y * beta),
            (Blk::Diag(x), Blk::Diag(y)) => Blk::Diag(x * alpha + y * beta),
            _ => unreachable!("block kinds agree"),
        })
        .collect()
}

fn scaled(a: &Blocks, alpha: f64) -> Blocks {
    a.iter()
        .map(|x| match x {
            Blk::Psd(x) => Blk::Psd(x * alpha),
            Blk::Diag(x) => Blk::Diag(x * alpha),
        })
        .collect()
}

fn has_nan(a: &Blocks) -> bool {
    a.iter().any(|x| match x {
        Blk::Psd(x) => x.iter().any(|v| !v.is_finite()),
        Blk::Diag(x) => x.iter().any(|v| !v.is_finite()),
    })
}

/// Splits `v` into its PSD part and the PSD part of `-v`.
fn project(v: &Blocks) -> (Blocks, Blocks) {
    v.par_iter()
        .map(|b| match b {
            Blk::Psd(m) => {
                let n = m.nrows();
                if n == 1 {
                    let a = m[(0, 0)];
                    return (
                        Blk::Psd(DMatrix::from_element(1, 1, a.max(0.0))),
                        Blk::Psd(DMatrix::from_element(1, 1, (-a).max(0.0))),
                    );
                }
                let eig = nalgebra::SymmetricEigen::new(m.clone());
                let q = &eig.eigenvectors;
                let mut qp = q.clone();
                let mut qn = q.clone();
                for (k, &l) in eig.eigenvalues.iter().enumerate() {
                    let (sp, sn) = (l.max(0.0).sqrt(), (-l).max(0.0).sqrt());
                    qp.column_mut(k).scale_mut(sp);
                    qn.column_mut(k).scale_mut(sn);
                }
                let plus = &qp * qp.transpose();
                let minus = &qn * qn.transpose();
                (Blk::Psd(plus), Blk::Psd(minus))
            }
            Blk::Diag(d) => (
                Blk::Diag(d.map(|x| x.max(0.0))),
                Blk::Diag(d.map(|x| (-x).max(0.0))),
            ),
        })
        .unzip()
}

fn min_eigenvalue(b: &DMatrix<f64>) -> f64 {
    if b.nrows() == 0 {
        return 0.0;
    }
    nalgebra::SymmetricEigen::new(b.clone())
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

// ---- linear map -----------------------------------------------------------

/// The scaled constraint map `A(X)_k = <F_k, X> / n_k` and its adjoint.
struct Operator {
    kinds: Vec<BlockKind>,
    /// Per variable: `(block, i, j, value)` with `value` already scaled.
    cols: Vec<Vec<(usize, usize, usize, f64)>>,
    solver: Normal,
}

enum Normal {
    Dense(nalgebra::Cholesky<f64, nalgebra::Dyn>),
    Sparse {
        rows: Vec<Vec<(usize, f64)>>,
        diag: Vec<f64>,
    },
}

const DENSE_NORMAL_LIMIT: usize = 3000;

/// Affine/cone projection rounds tried when certifying.
const REPAIR_ROUNDS: usize = 20;

impl Operator {
    fn apply(&self, x: &Blocks) -> Vec<f64> {
        self.cols
            .par_iter()
            .map(|col| {
                col.iter()
                    .map(|&(b, i, j, v)| match &x[b] {
                        Blk::Psd(m) => {
                            if i == j {
                                v * m[(i, j)]
                            } else {
                                2.0 * v * m[(i, j)]
                            }
                        }
                        Blk::Diag(d) => v * d[i],
                    })
                    .sum()
            })
            .collect()
    }

    fn adjoint(&self, y: &[f64]) -> Blocks {
        let mut out = zeros(&self.kinds);
        for (col, &yk) in self.cols.iter().zip(y) {
            if yk == 0.0 {
                continue;
            }
            for &(b, i, j, v) in col {
                match &mut out[b] {
                    Blk::Psd(m) => {
                        m[(i, j)] += yk * v;
                        if i != j {
                            m[(j, i)] += yk * v;
                        }
                    }
                    Blk::Diag(d) => d[i] += yk * v,
                }
            }
        }
        out
    }

    /// Solves `A A^* y = rhs`, warm-started from `y0` in the sparse case.
    fn solve_normal(&self, rhs: &[f64], y0: &[f64]) -> Vec<f64> {
        match &self.solver {
            Normal::Dense(ch) => ch.solve(&DVector::from_column_slice(rhs)).as_slice().to_vec(),
            Normal::Sparse { rows, diag } => pcg(rows, diag, rhs, y0),
        }
    }
}

fn sparse_mul(rows: &[Vec<(usize, f64)>], x: &[f64]) -> Vec<f64> {
    rows.par_iter()
        .map(|r| r.iter().map(|&(j, v)| v * x[j]).sum())
        .collect()
}

/// Jacobi-preconditioned conjugate gradients.
fn pcg(rows: &[Vec<(usize, f64)>], diag: &[f64], b: &[f64], x0: &[f64]) -> Vec<f64> {
    let n = b.len();
    let mut x = x0.to_vec();
    let ax = sparse_mul(rows, &x);
    let mut r: Vec<f64> = (0..n).map(|i| b[i] - ax[i]).collect();
    let bnorm = b.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-300);
    let mut z: Vec<f64> = (0..n).map(|i| r[i] / diag[i]).collect();
    let mut p = z.clone();
    let mut rz: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
    for _ in 0..1000 {
        let rn = r.iter().map(|v| v * v).sum::<f64>().sqrt();
        if rn <= 1e-13 * bnorm {
            break;
        }
        let ap = sparse_mul(rows, &p);
        let pap: f64 = p.iter().zip(&ap).map(|(a, b)| a * b).sum();
        if pap <= 0.0 {
            break;
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        for i in 0..n {
            z[i] = r[i] / diag[i];
        }
        let rz_new: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    x
}

/// Scaled problem data shared by both splittings.
struct Scaled {
    op: Operator,
    /// Row norms `n_k`.
    row_norm: Vec<f64>,
    /// `b_k = c_k / (n_k sigma_b)`.
    b: Vec<f64>,
    /// `C = -F_0 / sigma_c`.
    cmat: Blocks,
    sigma_b: f64,
    sigma_c: f64,
}

fn prepare(p: &ConicProblem) -> Result<Scaled, Error> {
    p.validate()?;
    let m = p.num_vars;
    let mut cols: Vec<Vec<(usize, usize, usize, f64)>> = vec![Vec::new(); m];
    let mut f0 = zeros(&p.blocks);
    for e in &p.entries {
        if e.value == 0.0 {
            continue;
        }
        if e.mat == 0 {
            match &mut f0[e.block] {
                Blk::Psd(x) => {
                    x[(e.i, e.j)] += e.value;
                    if e.i != e.j {
                        x[(e.j, e.i)] += e.value;
                    }
                }
                Blk::Diag(d) => d[e.i] += e.value,
            }
        } else {
            cols[e.mat - 1].push((e.block, e.i, e.j, e.value));
        }
    }
    // merge repeated positions within a column
    for col in &mut cols {
        col.sort_by_key(|&(b, i, j, _)| (b, i, j));
        let mut merged: Vec<(usize, usize, usize, f64)> = Vec::with_capacity(col.len());
        for &(b, i, j, v) in col.iter() {
            match merged.last_mut() {
                Some(last) if (last.0, last.1, last.2) == (b, i, j) => last.3 += v,
                _ => merged.push((b, i, j, v)),
            }
        }
        merged.retain(|e| e.3 != 0.0);
        *col = merged;
    }
    let weight = |b: usize, i: usize, j: usize| match p.blocks[b] {
        BlockKind::Psd(_) if i != j => 2.0,
        _ => 1.0,
    };
    let row_norm: Vec<f64> = cols
        .iter()
        .map(|col| col.iter().map(|&(b, i, j, v)| weight(b, i, j) * v * v).sum::<f64>().sqrt())
        .collect();
    if let Some(k) = row_norm.iter().position(|&n| n == 0.0) {
        return Err(Error::Structure(format!("variable {k} has no matrix entries")));
    }
    for (col, &n) in cols.iter_mut().zip(&row_norm) {
        for e in col.iter_mut() {
            e.3 /= n;
        }
    }
    let raw_b: Vec<f64> = p.c.iter().zip(&row_norm).map(|(c, n)| c / n).collect();
    let sigma_b = raw_b.iter().map(|v| v * v).sum::<f64>().sqrt().max(1.0);
    let sigma_c = norm(&f0).max(1.0);
    let b = raw_b.iter().map(|v| v / sigma_b).collect();
    let cmat = scaled(&f0, -1.0 / sigma_c);

    // normal matrix A A^*
    let mut by_pos: HashMap<(usize, usize, usize), Vec<(usize, f64)>> = HashMap::new();
    for (k, col) in cols.iter().enumerate() {
        for &(b, i, j, v) in col {
            by_pos.entry((b, i, j)).or_default().push((k, v));
        }
    }
    let mut positions: Vec<_> = by_pos.into_iter().collect();
    positions.sort_by_key(|(pos, _)| *pos);
    let mut gram: HashMap<(usize, usize), f64> = HashMap::new();
    for ((b, i, j), list) in &positions {
        let w = weight(*b, *i, *j);
        for &(k, vk) in list {
            for &(l, vl) in list {
                if k <= l {
                    *gram.entry((k, l)).or_default() += w * vk * vl;
                }
            }
        }
    }
    let solver = if m <= DENSE_NORMAL_LIMIT {
        let mut g = DMatrix::zeros(m, m);
        for (&(k, l), &v) in &gram {
            g[(k, l)] = v;
            g[(l, k)] = v;
        }
        let ch = nalgebra::Cholesky::new(g).ok_or_else(|| {
            Error::Structure("constraint matrices are linearly dependent".into())
        })?;
        Normal::Dense(ch)
    } else {
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); m];
        for (&(k, l), &v) in &gram {
            rows[k].push((l, v));
            if k != l {
                rows[l].push((k, v));
            }
        }
        for r in &mut rows {
            r.sort_by_key(|e| e.0);
        }
        let diag = (0..m).map(|k| gram[&(k, k)]).collect();
        Normal::Sparse { rows, diag }
    };
    Ok(Scaled {
        op: Operator {
            kinds: p.blocks.clone(),
            cols,
            solver,
        },
        row_norm,
        b,
        cmat,
        sigma_b,
        sigma_c,
    })
}

struct Residuals {
    pinf: f64,
    dinf: f64,
    gap: f64,
}

fn residuals(s: &Scaled, x: &Blocks, y: &[f64], slack: &Blocks, ax: &[f64]) -> Residuals {
    let bn = s.b.iter().map(|v| v * v).sum::<f64>().sqrt();
    let pinf = ax
        .iter()
        .zip(&s.b)
        .map(|(a, b)| (a - b).powi(2))
        .sum::<f64>()
        .sqrt()
        / (1.0 + bn);
    let aty = s.op.adjoint(y);
    let r = lincomb(1.0, &lincomb(1.0, &s.cmat, -1.0, &aty), -1.0, slack);
    let dinf = norm(&r) / (1.0 + norm(&s.cmat));
    let pobj = dot(&s.cmat, x);
    let dobj: f64 = s.b.iter().zip(y).map(|(a, b)| a * b).sum();
    let gap = (pobj - dobj).abs() / (1.0 + pobj.abs() + dobj.abs());
    Residuals { pinf, dinf, gap }
}

/// Solves the problem with the configured splitting.
pub fn solve(p: &ConicProblem, opts: &SolveOptions) -> Result<SolveResult, Error> {
    let start = Instant::now();
    if !(opts.relaxation > 0.0 && opts.relaxation < 2.0) || opts.penalty <= 0.0 {
        return Err(Error::InvalidArgument("relaxation must be in (0, 2) and penalty positive".into()));
    }
    let s = prepare(p)?;
    let m = p.num_vars;
    if opts.verbose {
        let kind = match s.op.solver {
            Normal::Dense(_) => "dense",
            Normal::Sparse { .. } => "pcg",
        };
        eprintln!("solve: m = {m}, normal equations {kind}, prepared in {:.2}s", start.elapsed().as_secs_f64());
    }
    let mut x = zeros(&p.blocks); // Gram iterate
    let mut slack = zeros(&p.blocks);
    let mut y = vec![0.0; m];
    let mut mu = opts.penalty;
    let mut status = SolveStatus::MaxIter;
    let mut res = Residuals {
        pinf: f64::INFINITY,
        dinf: f64::INFINITY,
        gap: f64::INFINITY,
    };
    let mut certificate = None;
    let mut iterations = 0;
    let check = opts.check_every.max(1);
    let (mut streak_p, mut streak_d) = (0usize, 0usize);
    for it in 1..=opts.max_iter {
        iterations = it;
        match opts.side {
            SolveSide::Dual => {
                // Gram-side splitting
                let ax = s.op.apply(&x);
                let sc = s.op.apply(&lincomb(1.0, &slack, -1.0, &s.cmat));
                let rhs: Vec<f64> = (0..m).map(|k| mu * (s.b[k] - ax[k]) - sc[k]).collect();
                y = s.op.solve_normal(&rhs, &y);
                let v = lincomb(1.0, &lincomb(1.0, &s.cmat, -1.0, &s.op.adjoint(&y)), -mu, &x);
                let (plus, minus) = project(&v);
                slack = plus;
                let x_new = scaled(&minus, 1.0 / mu);
                x = lincomb(1.0 - opts.relaxation, &x, opts.relaxation, &x_new);
            }
            SolveSide::Primal => {
                // moment-side splitting: xi = -y, multiplier Lambda = -X, S is the moment slack
                let rho = 1.0 / mu;
                let t = lincomb(1.0, &lincomb(1.0, &slack, -1.0, &s.cmat), 1.0 / rho, &x);
                let at = s.op.apply(&t);
                let rhs: Vec<f64> = (0..m).map(|k| at[k] - s.b[k] / rho).collect();
                let y0: Vec<f64> = y.iter().map(|v| -v).collect();
                let xi = s.op.solve_normal(&rhs, &y0);
                y = xi.iter().map(|v| -v).collect();
                let v = lincomb(1.0, &lincomb(1.0, &s.op.adjoint(&xi), 1.0, &s.cmat), -1.0 / rho, &x);
                let (plus, minus) = project(&v);
                slack = plus;
                let x_new = scaled(&minus, rho);
                x = lincomb(1.0 - opts.relaxation, &x, opts.relaxation, &x_new);
            }
        }
        if it % check != 0 && it != opts.max_iter {
            continue;
        }
        if has_nan(&x) || y.iter().any(|v| !v.is_finite()) {
            return Err(Error::NumericalBreakdown(format!("non-finite iterate at iteration {it}")));
        }
        let ax = s.op.apply(&x);
        res = residuals(&s, &x, &y, &slack, &ax);
        if opts.verbose {
            eprintln!(
                "{it:>7} pinf {:.2e} dinf {:.2e} gap {:.2e} mu {:.2e} t {:.1}s",
                res.pinf,
                res.dinf,
                res.gap,
                mu,
                start.elapsed().as_secs_f64()
            );
        }
        if res.pinf <= opts.eps_primal && res.dinf <= opts.eps_dual && res.gap <= opts.eps_gap {
            status = SolveStatus::Optimal;
            break;
        }
        if it % (check * 20) == 0 {
            if let Some(side) = infeasibility(&s, &x, &y, &ax) {
                status = SolveStatus::Infeasible;
                certificate = Some(side);
                break;
            }
        }
        // penalty balancing
        if res.pinf > 3.0 * res.dinf {
            streak_p += 1;
            streak_d = 0;
        } else if res.dinf > 3.0 * res.pinf {
            streak_d += 1;
            streak_p = 0;
        } else {
            streak_p = 0;
            streak_d = 0;
        }
        let step = 1.5;
        if streak_p >= 3 {
            mu = (mu * step).min(1e6);
            streak_p = 0;
        } else if streak_d >= 3 {
            mu = (mu / step).max(1e-6);
            streak_d = 0;
        }
    }
    if status == SolveStatus::MaxIter {
        let tol = 1e3;
        if res.pinf <= tol * opts.eps_primal && res.dinf <= tol * opts.eps_dual && res.gap <= tol * opts.eps_gap {
            status = SolveStatus::NearOptimal;
        }
    }

    // undo scaling
    let xs: Vec<f64> = (0..m).map(|k| -s.sigma_c * y[k] / s.row_norm[k]).collect();
    let unscale = |x: &Blocks| -> Vec<DMatrix<f64>> {
        x.iter()
            .map(|b| match b {
                Blk::Psd(mat) => mat * s.sigma_b,
                Blk::Diag(d) => DMatrix::from_diagonal(&(d * s.sigma_b)),
            })
            .collect()
    };
    let z = unscale(&x);
    let primal_objective = p.c.iter().zip(&xs).map(|(a, b)| a * b).sum::<f64>() + p.offset;
    let dual_objective = -s.sigma_c * s.sigma_b * dot(&s.cmat, &x) + p.offset;
    let mut result = SolveResult {
        status,
        primal_objective,
        dual_objective,
        primal_residual: res.pinf,
        dual_residual: res.dinf,
        gap: res.gap,
        iterations,
        wall_time: 0.0,
        x: xs,
        z,
        certified_bound: f64::NEG_INFINITY,
        certificate,
    };
    if status != SolveStatus::Infeasible {
        result.certified_bound = certify_bound(p, &result)?;
        // The bound holds for any Gram matrix, so also try the one moved
        // exactly onto the equality constraints and keep the better value.
        // Alternating projections between the affine set and the cone
        // shrink both error terms of the bound.
        let mut xa = x.clone();
        for round in 0..REPAIR_ROUNDS {
            let ax = s.op.apply(&xa);
            let r: Vec<f64> = (0..m).map(|k| s.b[k] - ax[k]).collect();
            let dx = s.op.adjoint(&s.op.solve_normal(&r, &vec![0.0; m]));
            xa = lincomb(1.0, &xa, 1.0, &dx);
            let repaired = SolveResult {
                z: unscale(&xa),
                ..result.clone()
            };
            let alt = certify_bound(p, &repaired)?;
            if opts.verbose {
                eprintln!("certify round {round}: {alt:.10} (best {:.10})", result.certified_bound);
            }
            if alt > result.certified_bound {
                result.certified_bound = alt;
                result.z = repaired.z;
            }
            xa = project(&xa).0;
        }
    }
    result.wall_time = start.elapsed().as_secs_f64();
    Ok(result)
}

/// Normalized-iterate Farkas checks; returns the side found infeasible.
fn infeasibility(s: &Scaled, x: &Blocks, y: &[f64], ax: &[f64]) -> Option<String> {
    let tol = 1e-7;
    let xn = norm(x);
    if xn > 1e5 {
        // Gram ray: A(D) = 0, D >= 0, <C, D> < 0 certifies an empty moment set
        let an = ax.iter().map(|v| v * v).sum::<f64>().sqrt() / xn;
        let obj = dot(&s.cmat, x) / xn;
        if an < tol && obj < -1e-4 {
            return Some("moment constraints are infeasible".into());
        }
    }
    let yn = y.iter().map(|v| v * v).sum::<f64>().sqrt();
    if yn > 1e5 {
        // moment ray: A^*(-y) >= 0 with c^T(-y) < 0
        let d: Vec<f64> = y.iter().map(|v| -v / yn).collect();
        let ad = s.op.adjoint(&d);
        let lam = ad
            .iter()
            .map(|b| match b {
                Blk::Psd(m) => min_eigenvalue(m),
                Blk::Diag(v) => v.min(),
            })
            .fold(f64::INFINITY, f64::min);
        let obj: f64 = s.b.iter().zip(&d).map(|(a, b)| a * b).sum();
        if lam > -tol && obj < -1e-4 {
            return Some("moment objective is unbounded below".into());
        }
    }
    None
}

/// Rigorous lower bound on the moment-form optimum from the Gram iterate.
///
/// For any feasible `x`, `c^T x = <F_0, Z> + <F(x), Z> + r^T x` with
/// `r = c - A(Z)`. The middle term is at least
/// `min(0, lambda_min(Z_b)) * tr F_b(x)` summed over blocks, and traces are
/// bounded per group; the last term is at least `-sum |r_k| B_k`.
pub fn certify_bound(p: &ConicProblem, result: &SolveResult) -> Result<f64, Error> {
    if result.z.len() != p.blocks.len() {
        return Err(Error::InvalidArgument("solution has no Gram blocks".into()));
    }
    let z = &result.z;
    let mut az = vec![0.0; p.num_vars];
    let mut base = p.offset;
    for e in &p.entries {
        let w = if e.i == e.j { 1.0 } else { 2.0 };
        let v = w * e.value * z[e.block][(e.i, e.j)];
        if e.mat == 0 {
            base += v;
        } else {
            az[e.mat - 1] += v;
        }
    }
    let lambda: Vec<f64> = z
        .par_iter()
        .zip(&p.blocks)
        .map(|(b, kind)| match kind {
            BlockKind::Psd(_) => min_eigenvalue(b),
            BlockKind::Nonneg(_) => b.diagonal().min(),
        })
        .collect();
    let (var_bounds, mut groups) = match &p.certification {
        Some(c) => (c.var_bounds.clone(), c.trace_groups.clone()),
        None => (vec![1.0; p.num_vars], Vec::new()),
    };
    let mut covered = vec![false; p.blocks.len()];
    for (blocks, _) in &groups {
        for &b in blocks {
            covered[b] = true;
        }
    }
    for (b, kind) in p.blocks.iter().enumerate() {
        if !covered[b] {
            groups.push((vec![b], kind.size() as f64));
        }
    }
    let mut bound = base;
    for (blocks, total) in &groups {
        let lmin = blocks.iter().map(|&b| lambda[b]).fold(0.0, f64::min);
        bound += lmin * total;
    }
    for k in 0..p.num_vars {
        bound -= (p.c[k] - az[k]).abs() * var_bounds[k];
    }
    Ok(bound)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar_problem() -> ConicProblem {
        // min x s.t. [x] >= 0
        ConicProblem {
            blocks: vec![BlockKind::Psd(1)],
            num_vars: 1,
            c: vec![1.0],
            offset: 0.0,
            entries: vec![ConicEntry { mat: 1, block: 0, i: 0, j: 0, value: 1.0 }],
            certification: None,
            var_origin: vec![0],
        }
    }

    #[test]
    fn trivial_scalar() {
        for side in [SolveSide::Dual, SolveSide::Primal] {
            let opts = SolveOptions { side, ..Default::default() };
            let r = solve(&scalar_problem(), &opts).unwrap();
            assert_eq!(r.status, SolveStatus::Optimal);
            assert!(r.primal_objective.abs() < 1e-7, "{side:?} {}", r.primal_objective);
            assert!(r.certified_bound <= r.primal_objective + 1e-12);
        }
    }

    #[test]
    fn toy_export_has_five_lines() {
        let text = scalar_problem().to_sdpa_string();
        assert_eq!(text.lines().count(), 5);
        let back = ConicProblem::from_sdpa_str(&text).unwrap();
        assert_eq!(back, scalar_problem());
    }

    #[test]
    fn two_by_two_known_optimum() {
        // min x s.t. [[x, 1], [1, x]] >= 0, optimum 1
        let p = ConicProblem {
            blocks: vec![BlockKind::Psd(2)],
            num_vars: 1,
            c: vec![1.0],
            offset: 0.5,
            entries: vec![
                ConicEntry { mat: 0, block: 0, i: 0, j: 1, value: -1.0 },
                ConicEntry { mat: 1, block: 0, i: 0, j: 0, value: 1.0 },
                ConicEntry { mat: 1, block: 0, i: 1, j: 1, value: 1.0 },
            ],
            certification: None,
            var_origin: vec![0],
        };
        for side in [SolveSide::Dual, SolveSide::Primal] {
            let r = solve(&p, &SolveOptions { side, ..Default::default() }).unwrap();
            assert_eq!(r.status, SolveStatus::Optimal);
            assert!((r.primal_objective - 1.5).abs() < 1e-7);
            assert!((r.dual_objective - 1.5).abs() < 1e-7);
            assert!(r.certified_bound <= 1.5 + 1e-12);
            assert!(r.certified_bound > 1.5 - 1e-6);
        }
    }

    #[test]
    fn detects_empty_feasible_set() {
        // x >= 0 and -x - 1 >= 0
        let p = ConicProblem {
            blocks: vec![BlockKind::Nonneg(2)],
            num_vars: 1,
            c: vec![0.0],
            offset: 0.0,
            entries: vec![
                ConicEntry { mat: 0, block: 0, i: 1, j: 1, value: 1.0 },
                ConicEntry { mat: 1, block: 0, i: 0, j: 0, value: 1.0 },
                ConicEntry { mat: 1, block: 0, i: 1, j: 1, value: -1.0 },
            ],
            certification: None,
            var_origin: vec![0],
        };
        let r = solve(&p, &SolveOptions { max_iter: 20_000, ..Default::default() }).unwrap();
        assert_eq!(r.status, SolveStatus::Infeasible);
    }

    #[test]
    fn rejects_unused_variable() {
        let mut p = scalar_problem();
        p.num_vars = 2;
        p.c.push(0.0);
        assert!(p.validate().is_err());
    }

    #[test]
    fn certify_formula() {
        let p = ConicProblem {
            certification: Some(Certification {
                var_bounds: vec![1.0],
                trace_groups: vec![(vec![0], 100.0)],
            }),
            ..scalar_problem()
        };
        let mut r = solve(&p, &SolveOptions::default()).unwrap();
        r.z = vec![DMatrix::from_element(1, 1, 1.0 - 1e-9)];
        // residual |1 - z| = 1e-9 on top of nothing else
        let b = certify_bound(&p, &r).unwrap();
        assert!((b + 1e-9).abs() < 1e-15);
        r.z = vec![DMatrix::from_element(1, 1, -1e-9)];
        let b = certify_bound(&p, &r).unwrap();
        assert!((b - (-1e-9 * 100.0 - (1.0 + 1e-9))).abs() < 1e-12);
    }
}
