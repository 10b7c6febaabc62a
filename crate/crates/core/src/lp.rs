//! LP model, assembly of the certificate program and a plain-text format.
//!
//! Text grammar (one item per line):
//!
//! ```text
//! minimize: <terms>
//! subject to
//!  <row>: <terms> <= | >= <rhs>
//! bounds
//!  <var> free | <var> >= lo | <var> <= hi | lo <= <var> <= hi
//! ```
//!
//! `<terms>` is `c v [+|- c v]...` (or `0` when empty); numbers use the
//! shortest round-trip representation. Every variable appears exactly once in
//! the bounds section, in declaration order.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::fmt::Write as _;
use std::ops::Range;

use crate::bounds::{shell_labels, TighteningCoefficients};
use crate::geometry::{Domain, Lattice, Region};
use crate::spectral::{SpectralBasis, TransferMatrix};
use crate::{Error, Result};

/// Largest admissible `eta`; the certificate needs `eta < 1`.
pub const ETA_MAX: f64 = 1.0 - 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Relation {
    Le,
    Ge,
}

impl Relation {
    fn symbol(self) -> &'static str {
        match self {
            Relation::Le => "<=",
            Relation::Ge => ">=",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Variable {
    pub name: String,
    pub lower: Option<f64>,
    pub upper: Option<f64>,
}

/// Borrowed view of one constraint row.
#[derive(Debug, Clone, Copy)]
pub struct RowRef<'a> {
    pub name: &'a str,
    pub cols: &'a [u32],
    pub vals: &'a [f64],
    pub rel: Relation,
    pub rhs: f64,
}

impl RowRef<'_> {
    pub fn activity(&self, x: &[f64]) -> f64 {
        self.cols.iter().zip(self.vals).map(|(c, v)| v * x[*c as usize]).sum()
    }

    /// Amount by which `x` violates the row (0 when satisfied).
    pub fn violation(&self, x: &[f64]) -> f64 {
        let a = self.activity(x);
        match self.rel {
            Relation::Le => (a - self.rhs).max(0.0),
            Relation::Ge => (self.rhs - a).max(0.0),
        }
    }
}

/// Minimization LP with sparse rows stored contiguously.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LpModel {
    pub vars: Vec<Variable>,
    pub objective: Vec<(usize, f64)>,
    row_names: Vec<String>,
    row_start: Vec<usize>,
    cols: Vec<u32>,
    vals: Vec<f64>,
    rels: Vec<Relation>,
    rhs: Vec<f64>,
}

impl LpModel {
    pub fn new() -> Self {
        Self { row_start: vec![0], ..Default::default() }
    }

    pub fn add_var(&mut self, name: impl Into<String>, lower: Option<f64>, upper: Option<f64>) -> usize {
        self.vars.push(Variable { name: name.into(), lower, upper });
        self.vars.len() - 1
    }

    pub fn num_vars(&self) -> usize {
        self.vars.len()
    }

    pub fn num_rows(&self) -> usize {
        self.rels.len()
    }

    /// Append a row; zero coefficients are dropped and repeated columns summed.
    pub fn add_row(&mut self, name: impl Into<String>, coefs: &[(usize, f64)], rel: Relation, rhs: f64) {
        let mut terms: Vec<(usize, f64)> = Vec::with_capacity(coefs.len());
        for &(c, v) in coefs {
            assert!(c < self.vars.len(), "row references undeclared variable {c}");
            match terms.iter_mut().find(|(k, _)| *k == c) {
                Some(t) => t.1 += v,
                None => terms.push((c, v)),
            }
        }
        for (c, v) in terms {
            if v != 0.0 {
                self.cols.push(c as u32);
                self.vals.push(v);
            }
        }
        self.row_start.push(self.cols.len());
        self.row_names.push(name.into());
        self.rels.push(rel);
        self.rhs.push(rhs);
    }

    /// Append a row from a dense coefficient block starting at column `offset`
    /// plus a few extra terms.
    pub fn add_dense_row(
        &mut self,
        name: impl Into<String>,
        offset: usize,
        dense: &[f64],
        extra: &[(usize, f64)],
        rel: Relation,
        rhs: f64,
    ) {
        for (k, v) in dense.iter().enumerate() {
            if *v != 0.0 {
                self.cols.push((offset + k) as u32);
                self.vals.push(*v);
            }
        }
        for &(c, v) in extra {
            assert!(c < self.vars.len(), "row references undeclared variable {c}");
            if v != 0.0 {
                self.cols.push(c as u32);
                self.vals.push(v);
            }
        }
        self.row_start.push(self.cols.len());
        self.row_names.push(name.into());
        self.rels.push(rel);
        self.rhs.push(rhs);
    }

    pub fn row(&self, i: usize) -> RowRef<'_> {
        let (s, e) = (self.row_start[i], self.row_start[i + 1]);
        RowRef { name: &self.row_names[i], cols: &self.cols[s..e], vals: &self.vals[s..e], rel: self.rels[i], rhs: self.rhs[i] }
    }

    pub fn rows(&self) -> impl Iterator<Item = RowRef<'_>> {
        (0..self.num_rows()).map(|i| self.row(i))
    }

    pub fn var_index(&self, name: &str) -> Option<usize> {
        self.vars.iter().position(|v| v.name == name)
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective.iter().map(|(c, v)| v * x[*c]).sum()
    }

    /// Largest violation over rows and variable bounds.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let rows = self.rows().map(|r| r.violation(x)).fold(0.0, f64::max);
        let bounds = self
            .vars
            .iter()
            .zip(x)
            .map(|(v, xv)| {
                let lo = v.lower.map_or(0.0, |l| (l - xv).max(0.0));
                let hi = v.upper.map_or(0.0, |u| (xv - u).max(0.0));
                lo.max(hi)
            })
            .fold(0.0, f64::max);
        rows.max(bounds)
    }
}

fn write_terms(out: &mut String, terms: impl Iterator<Item = (f64, String)>) {
    let mut first = true;
    for (v, name) in terms {
        if first {
            let _ = write!(out, "{v:?} {name}");
            first = false;
        } else if v.is_sign_negative() {
            let _ = write!(out, " - {:?} {name}", -v);
        } else {
            let _ = write!(out, " + {v:?} {name}");
        }
    }
    if first {
        out.push('0');
    }
}

/// Serialize to the text format.
pub fn export_lp(model: &LpModel) -> String {
    let mut out = String::new();
    out.push_str("minimize: ");
    write_terms(&mut out, model.objective.iter().map(|(c, v)| (*v, model.vars[*c].name.clone())));
    out.push_str("\nsubject to\n");
    for r in model.rows() {
        let _ = write!(out, " {}: ", r.name);
        write_terms(&mut out, r.cols.iter().zip(r.vals).map(|(c, v)| (*v, model.vars[*c as usize].name.clone())));
        let _ = writeln!(out, " {} {:?}", r.rel.symbol(), r.rhs);
    }
    out.push_str("bounds\n");
    for v in &model.vars {
        let _ = match (v.lower, v.upper) {
            (None, None) => writeln!(out, " {} free", v.name),
            (Some(l), None) => writeln!(out, " {} >= {l:?}", v.name),
            (None, Some(u)) => writeln!(out, " {} <= {u:?}", v.name),
            (Some(l), Some(u)) => writeln!(out, " {l:?} <= {} <= {u:?}", v.name),
        };
    }
    out
}

fn parse_num(tok: &str, line: usize) -> Result<f64> {
    tok.parse::<f64>().map_err(|_| Error::Parse(format!("line {line}: expected a number, got `{tok}`")))
}

fn parse_terms(tokens: &[&str], line: usize) -> Result<Vec<(f64, String)>> {
    if tokens == ["0"] {
        return Ok(Vec::new());
    }
    let mut out = Vec::new();
    let mut i = 0;
    let mut sign = 1.0;
    while i < tokens.len() {
        match tokens[i] {
            "+" if !out.is_empty() => {
                sign = 1.0;
                i += 1;
            }
            "-" if !out.is_empty() => {
                sign = -1.0;
                i += 1;
            }
            _ => {}
        }
        if i + 1 >= tokens.len() {
            return Err(Error::Parse(format!("line {line}: dangling term")));
        }
        let v = parse_num(tokens[i], line)?;
        out.push((sign * v, tokens[i + 1].to_string()));
        sign = 1.0;
        i += 2;
    }
    Ok(out)
}

/// Parse the text format produced by [`export_lp`].
pub fn parse_lp(text: &str) -> Result<LpModel> {
    #[derive(PartialEq)]
    enum Section {
        Start,
        Rows,
        Bounds,
    }
    let mut section = Section::Start;
    let mut objective: Vec<(f64, String)> = Vec::new();
    let mut rows: Vec<(String, Vec<(f64, String)>, Relation, f64)> = Vec::new();
    let mut model = LpModel::new();
    let mut seen_objective = false;
    for (k, raw) in text.lines().enumerate() {
        let line = k + 1;
        let s = raw.trim();
        if s.is_empty() {
            continue;
        }
        if let Some(rest) = s.strip_prefix("minimize:") {
            if section != Section::Start || seen_objective {
                return Err(Error::Parse(format!("line {line}: unexpected objective")));
            }
            let toks: Vec<&str> = rest.split_whitespace().collect();
            objective = parse_terms(&toks, line)?;
            seen_objective = true;
            continue;
        }
        if s == "subject to" {
            if section != Section::Start || !seen_objective {
                return Err(Error::Parse(format!("line {line}: `subject to` must follow the objective")));
            }
            section = Section::Rows;
            continue;
        }
        if s == "bounds" {
            if section != Section::Rows {
                return Err(Error::Parse(format!("line {line}: `bounds` must follow `subject to`")));
            }
            section = Section::Bounds;
            continue;
        }
        match section {
            Section::Start => return Err(Error::Parse(format!("line {line}: expected `minimize:`"))),
            Section::Rows => {
                let (name, body) =
                    s.split_once(':').ok_or_else(|| Error::Parse(format!("line {line}: row without a name")))?;
                let toks: Vec<&str> = body.split_whitespace().collect();
                if toks.len() < 3 {
                    return Err(Error::Parse(format!("line {line}: incomplete row")));
                }
                let rel = match toks[toks.len() - 2] {
                    "<=" => Relation::Le,
                    ">=" => Relation::Ge,
                    other => return Err(Error::Parse(format!("line {line}: bad relation `{other}`"))),
                };
                let rhs = parse_num(toks[toks.len() - 1], line)?;
                let terms = parse_terms(&toks[..toks.len() - 2], line)?;
                rows.push((name.trim().to_string(), terms, rel, rhs));
            }
            Section::Bounds => {
                let toks: Vec<&str> = s.split_whitespace().collect();
                let (name, lower, upper) = match toks.as_slice() {
                    [v, "free"] => (*v, None, None),
                    [v, ">=", l] => (*v, Some(parse_num(l, line)?), None),
                    [v, "<=", u] => (*v, None, Some(parse_num(u, line)?)),
                    [l, "<=", v, "<=", u] => (*v, Some(parse_num(l, line)?), Some(parse_num(u, line)?)),
                    _ => return Err(Error::Parse(format!("line {line}: bad bound `{s}`"))),
                };
                if model.var_index(name).is_some() {
                    return Err(Error::Parse(format!("line {line}: variable `{name}` declared twice")));
                }
                model.add_var(name, lower, upper);
            }
        }
    }
    if section != Section::Bounds {
        return Err(Error::Parse("missing `bounds` section".into()));
    }
    let index: HashMap<String, usize> = model.vars.iter().enumerate().map(|(i, v)| (v.name.clone(), i)).collect();
    let lookup = |name: &str| -> Result<usize> {
        index.get(name).copied().ok_or_else(|| Error::Parse(format!("undeclared variable `{name}`")))
    };
    for (v, name) in objective {
        let c = lookup(&name)?;
        model.objective.push((c, v));
    }
    for (name, terms, rel, rhs) in rows {
        let coefs: Vec<(usize, f64)> = terms.iter().map(|(v, n)| lookup(n).map(|c| (c, *v))).collect::<Result<_>>()?;
        model.add_row(name, &coefs, rel, rhs);
    }
    Ok(model)
}

/// Safety problem data beyond the basis and lattice.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProblemSpec {
    pub domain: Domain,
    pub initial: Region,
    pub unsafe_set: Region,
    pub horizon: usize,
    pub epsilon: f64,
    pub bbar: f64,
    pub kappa: f64,
}

impl ProblemSpec {
    pub fn validate(&self) -> Result<()> {
        if self.horizon < 1 {
            return Err(Error::Invalid("horizon must be >= 1".into()));
        }
        if !(self.epsilon.is_finite() && self.epsilon >= 0.0) {
            return Err(Error::Invalid(format!("epsilon must be >= 0, got {}", self.epsilon)));
        }
        if !(self.bbar.is_finite() && self.bbar > 0.0) {
            return Err(Error::Invalid(format!("norm cap must be > 0, got {}", self.bbar)));
        }
        if !(self.kappa.is_finite() && self.kappa > 0.0) {
            return Err(Error::Invalid(format!("kappa must be > 0, got {}", self.kappa)));
        }
        self.initial.validate()?;
        self.unsafe_set.validate()
    }

    /// Kushner offset `epsilon * bbar * kappa`.
    pub fn robust_offset(&self) -> f64 {
        self.epsilon * self.bbar * self.kappa
    }
}

/// Lattice membership masks of the inflated sets.
#[derive(Debug, Clone)]
pub struct Partitions {
    pub initial: Vec<bool>,
    pub unsafe_set: Vec<bool>,
    pub domain: Vec<bool>,
}

/// Variable positions in an assembled model.
#[derive(Debug, Clone)]
pub struct LpLayout {
    pub b: Range<usize>,
    pub eta: usize,
    pub c: usize,
    pub delta: Option<usize>,
}

/// Row families: `(name, inside prefix, outside prefix, region key)`.
const FAMILIES: [(&str, &str, &str, &str); 4] = [
    ("init", "init", "comp0", "initial"),
    ("unsafe", "unsafe", "compU", "unsafe"),
    ("pos", "pos", "compX", "domain"),
    ("kush", "kush", "compK", "domain"),
];

/// Number of rows [`assemble`] emits. `shells[f]` lists, for each outside
/// shell of family `f`, whether it holds lattice points (empty when the family
/// has no outside term). Rows: two per lattice point and family, per shell
/// with points two radius rows plus `R_k >= R_S` and `R_K >= R_k`; the far
/// shell `K` has its two radius rows when it holds points and `R_K >= R_S`
/// only when no nearer shell does. One bound row per family and one
/// truncation row per guard point.
pub fn expected_row_count(lattice_len: usize, shells: [&[bool]; 4], guard_rows: usize) -> usize {
    let radius: usize = shells
        .iter()
        .filter(|s| !s.is_empty())
        .map(|s| {
            let k = s.len();
            let near = s[..k - 1].iter().filter(|p| **p).count();
            4 * near + usize::from(near == 0) + if s[k - 1] { 2 } else { 0 }
        })
        .sum();
    4 * 2 * lattice_len + radius + 4 + guard_rows
}

/// Build the certificate LP.
///
/// Per family and lattice point the rows bound the lattice extremes of the
/// family's polynomial on the inflated set (`U`, `L`) and on each outside
/// shell `k` (`Uo{k}`, `Lo{k}`); the radius `R{k}` dominates every deviation
/// on its shell from `(U + L) / 2` and `(U - L) / 2`, the far radius also
/// dominates the others, and the bound row applies `C` and `A_k` to give the
/// continuous condition:
///
/// - `init`: `sup_{X0} B <= eta`
/// - `unsafe`: `inf_{Xu} B >= 1`
/// - `pos`: `inf_X B >= 0`
/// - `kush`: `sup_X phi^T (H - I) b <= c - eps bbar kappa - delta`
///
/// `guard` holds, per lattice point of the domain, the difference between the
/// exact CME features and `phi^T H`; its rows `r^T b <= delta` add the
/// truncation error of `H` at those points to the Kushner budget.
pub fn assemble(
    spec: &ProblemSpec,
    basis: &SpectralBasis,
    transfer: &TransferMatrix,
    lattice: &Lattice,
    partitions: &Partitions,
    tight: &TighteningCoefficients,
    guard: Option<&DMatrix<f64>>,
) -> Result<(LpModel, LpLayout)> {
    spec.validate()?;
    tight.validate()?;
    let nl = lattice.len();
    for m in [&partitions.initial, &partitions.unsafe_set, &partitions.domain] {
        if m.len() != nl {
            return Err(Error::Dimension { expected: nl, got: m.len() });
        }
    }
    if !partitions.initial.iter().any(|v| *v) {
        return Err(Error::Infeasible("the initial set contains no lattice point at this resolution".into()));
    }
    if !partitions.unsafe_set.iter().any(|v| *v) {
        return Err(Error::Infeasible("the unsafe set contains no lattice point at this resolution".into()));
    }
    let d = basis.feature_dim();
    if transfer.h.nrows() != d || transfer.h.ncols() != d {
        return Err(Error::Dimension { expected: d, got: transfer.h.nrows() });
    }

    let phi = basis.feature_matrix(lattice.points());
    let mut hm = transfer.h.clone();
    for k in 0..d {
        hm[(k, k)] -= 1.0;
    }
    let kush = &phi * &hm;
    let row_of = |m: &DMatrix<f64>, i: usize| -> Vec<f64> { m.row(i).iter().copied().collect() };

    let mut model = LpModel::new();
    let inactive = basis.inactive_features();
    for k in 0..d {
        if inactive.contains(&k) {
            model.add_var(format!("b{k}"), Some(0.0), Some(0.0));
        } else {
            model.add_var(format!("b{k}"), None, None);
        }
    }
    let eta = model.add_var("eta", Some(0.0), Some(ETA_MAX));
    let c = model.add_var("c", Some(0.0), None);
    let delta = guard.map(|_| model.add_var("delta", Some(0.0), None));
    model.objective = vec![(eta, 1.0), (c, spec.horizon as f64)];

    let cc = tight.c;
    for (fam, pin, pout, key) in FAMILIES {
        let values = if fam == "kush" { &kush } else { &phi };
        let mask = match key {
            "initial" => &partitions.initial,
            "unsafe" => &partitions.unsafe_set,
            _ => &partitions.domain,
        };
        if !mask.iter().any(|v| *v) {
            return Err(Error::Infeasible(format!("family `{fam}` has no lattice point inside its set")));
        }
        let a = tight.get(key);
        let a_sum: f64 = a.iter().sum();
        let has_out = a_sum > 0.0 && mask.iter().any(|v| !*v);
        let u = model.add_var(format!("U_{fam}"), None, None);
        let l = model.add_var(format!("L_{fam}"), None, None);
        let k_far = a.len();
        let labels = if has_out { shell_labels(lattice, mask, k_far) } else { Vec::new() };
        let mut present = vec![false; k_far + 1];
        for &lab in &labels {
            present[lab as usize] = true;
        }
        // Per shell: (Uo, Lo) when it has points, and R when it has points or is the far shell.
        let mut outer: Vec<Option<(usize, usize)>> = vec![None; k_far + 1];
        let mut radius: Vec<Option<usize>> = vec![None; k_far + 1];
        if has_out {
            for k in 1..=k_far {
                if present[k] {
                    outer[k] = Some((
                        model.add_var(format!("Uo{k}_{fam}"), None, None),
                        model.add_var(format!("Lo{k}_{fam}"), None, None),
                    ));
                }
                if present[k] || k == k_far {
                    radius[k] = Some(model.add_var(format!("R{k}_{fam}"), None, None));
                }
            }
        }
        let (mut k_in, mut k_out) = (0usize, 0usize);
        for i in 0..nl {
            if mask[i] {
                let coef = row_of(values, i);
                model.add_dense_row(format!("{pin}_{k_in}"), 0, &coef, &[(u, -1.0)], Relation::Le, 0.0);
                model.add_dense_row(format!("{pin}_{}", k_in + 1), 0, &coef, &[(l, -1.0)], Relation::Ge, 0.0);
                k_in += 2;
            } else if has_out {
                let Some((uo, lo)) = outer[labels[i] as usize] else { continue };
                let coef = row_of(values, i);
                model.add_dense_row(format!("{pout}_{k_out}"), 0, &coef, &[(uo, -1.0)], Relation::Le, 0.0);
                model.add_dense_row(format!("{pout}_{}", k_out + 1), 0, &coef, &[(lo, -1.0)], Relation::Ge, 0.0);
                k_out += 2;
            }
        }
        let a_eff = if has_out { a_sum } else { 0.0 };
        let mut r_terms: Vec<(usize, f64)> = Vec::new();
        if has_out {
            let far = radius[k_far].expect("far radius");
            let mut j = 0usize;
            let mut rad_row = |model: &mut LpModel, coefs: &[(usize, f64)]| {
                model.add_row(format!("rad_{fam}_{j}"), coefs, Relation::Le, 0.0);
                j += 1;
            };
            for k in 1..=k_far {
                let Some(r) = radius[k] else { continue };
                if let Some((uo, lo)) = outer[k] {
                    rad_row(&mut model, &[(uo, 1.0), (u, -0.5), (l, -0.5), (r, -1.0)]);
                    rad_row(&mut model, &[(u, 0.5), (l, 0.5), (lo, -1.0), (r, -1.0)]);
                }
                if k < k_far {
                    rad_row(&mut model, &[(r, 1.0), (far, -1.0)]);
                }
                if k < k_far || !(1..k_far).any(|j| radius[j].is_some()) {
                    rad_row(&mut model, &[(u, 0.5), (l, -0.5), (r, -1.0)]);
                }
                if a[k - 1] > 0.0 {
                    r_terms.push((r, a[k - 1]));
                }
            }
        }
        let r_term = |sign: f64| r_terms.iter().map(move |&(r, ak)| (r, sign * ak));
        let hi_u = 0.5 * (1.0 + cc - a_eff);
        let hi_l = 0.5 * (1.0 - cc + a_eff);
        match fam {
            "init" | "kush" => {
                let mut coefs = vec![(u, hi_u), (l, hi_l)];
                coefs.extend(r_term(1.0));
                let rhs = if fam == "init" {
                    coefs.push((eta, -1.0));
                    0.0
                } else {
                    coefs.push((c, -1.0));
                    if let Some(dv) = delta {
                        coefs.push((dv, 1.0));
                    }
                    -spec.robust_offset()
                };
                model.add_row(format!("bound_{fam}"), &coefs, Relation::Le, rhs);
            }
            _ => {
                let mut coefs = vec![(u, hi_l), (l, hi_u)];
                coefs.extend(r_term(-1.0));
                let rhs = if fam == "unsafe" { 1.0 } else { 0.0 };
                model.add_row(format!("bound_{fam}"), &coefs, Relation::Ge, rhs);
            }
        }
    }
    if let (Some(g), Some(dv)) = (guard, delta) {
        if g.ncols() != d {
            return Err(Error::Dimension { expected: d, got: g.ncols() });
        }
        let rows: Vec<Vec<f64>> = (0..g.nrows()).into_par_iter().map(|i| row_of(g, i)).collect();
        for (i, coef) in rows.iter().enumerate() {
            model.add_dense_row(format!("trunc_{i}"), 0, coef, &[(dv, -1.0)], Relation::Le, 0.0);
        }
    }
    Ok((model, LpLayout { b: 0..d, eta, c, delta }))
}
