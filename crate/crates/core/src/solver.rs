//! LP solvers: a dense revised simplex and an adapter for external programs.
//!
//! The simplex works on the dual of `min c^T x, G x >= h` (all rows and
//! bounds rewritten as `>=`, fixed variables substituted). That dual,
//! `min -h^T y, G^T y = c, y >= 0`, has one equality per free variable, so its
//! basis stays small even when the primal has very many rows. The primal point
//! is recovered from the simplex multipliers and reduced costs are exactly the
//! primal row slacks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::atomic::{AtomicUsize, Ordering};

use crate::lp::{export_lp, LpModel, Relation};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Optimal,
    Infeasible,
    Unbounded,
    IterationLimit,
}

impl Status {
    pub fn as_str(self) -> &'static str {
        match self {
            Status::Optimal => "optimal",
            Status::Infeasible => "infeasible",
            Status::Unbounded => "unbounded",
            Status::IterationLimit => "iteration_limit",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "optimal" => Status::Optimal,
            "infeasible" => Status::Infeasible,
            "unbounded" => Status::Unbounded,
            "iteration_limit" => Status::IterationLimit,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub status: Status,
    /// One value per model variable (empty unless optimal).
    pub x: Vec<f64>,
    pub objective: f64,
    /// Largest row or bound violation of `x` on the original model.
    pub max_residual: f64,
    pub iterations: usize,
    /// Weak-duality lower bound on the optimum, when a dual point is available.
    pub dual_bound: Option<f64>,
}

impl LpSolution {
    fn without_point(status: Status, iterations: usize) -> Self {
        Self { status, x: Vec::new(), objective: f64::NAN, max_residual: f64::NAN, iterations, dual_bound: None }
    }
}

pub trait LpSolver {
    fn solve(&self, model: &LpModel) -> Result<LpSolution>;
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimplexOptions {
    pub max_iterations: usize,
    /// Threshold on normalized reduced costs.
    pub optimality_tol: f64,
    pub pivot_tol: f64,
    /// Relative size of the random right-hand-side perturbation.
    pub perturbation: f64,
    pub refactor_every: usize,
    /// Consecutive degenerate pivots before switching to Bland's rule.
    pub bland_after: usize,
    /// Pricing scans the columns in this many sections, stopping after the
    /// first one that holds an improving column (1 = full pricing).
    pub pricing_sections: usize,
    pub seed: u64,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        Self {
            max_iterations: 200_000,
            optimality_tol: 1e-9,
            pivot_tol: 1e-9,
            perturbation: 1e-7,
            refactor_every: 64,
            bland_after: 50,
            pricing_sections: 8,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct SimplexSolver {
    pub options: SimplexOptions,
}

impl SimplexSolver {
    pub fn new(options: SimplexOptions) -> Self {
        Self { options }
    }
}

/// `G x >= h` over the free variables, rows scaled to unit max-norm.
struct StdForm {
    n: usize,
    var_map: Vec<Option<usize>>,
    fixed: Vec<f64>,
    start: Vec<usize>,
    cols: Vec<u32>,
    vals: Vec<f64>,
    h: Vec<f64>,
    norm: Vec<f64>,
    cost: Vec<f64>,
    obj_const: f64,
}

impl StdForm {
    fn len(&self) -> usize {
        self.h.len()
    }

    fn row(&self, j: usize) -> (&[u32], &[f64]) {
        let (s, e) = (self.start[j], self.start[j + 1]);
        (&self.cols[s..e], &self.vals[s..e])
    }

    fn build(model: &LpModel, tol: f64) -> std::result::Result<Self, Status> {
        let nv = model.num_vars();
        let mut var_map = vec![None; nv];
        let mut fixed = vec![0.0; nv];
        let mut used = vec![false; nv];
        for r in model.rows() {
            for (c, v) in r.cols.iter().zip(r.vals) {
                used[*c as usize] |= *v != 0.0;
            }
        }
        let mut cost = vec![0.0; nv];
        for &(k, v) in &model.objective {
            cost[k] += v;
        }
        let mut n = 0;
        for (k, v) in model.vars.iter().enumerate() {
            match (v.lower, v.upper) {
                // A free variable in no row only matters through its cost.
                (None, None) if !used[k] && cost[k] != 0.0 => return Err(Status::Unbounded),
                (None, None) if !used[k] => {}
                (Some(l), Some(u)) if l == u => fixed[k] = l,
                (Some(l), Some(u)) if l > u => return Err(Status::Infeasible),
                _ => {
                    var_map[k] = Some(n);
                    n += 1;
                }
            }
        }
        let mut f = StdForm {
            n,
            var_map,
            fixed,
            start: vec![0],
            cols: Vec::new(),
            vals: Vec::new(),
            h: Vec::new(),
            norm: Vec::new(),
            cost: vec![0.0; n],
            obj_const: 0.0,
        };
        for &(k, v) in &model.objective {
            match f.var_map[k] {
                Some(j) => f.cost[j] += v,
                None => f.obj_const += v * f.fixed[k],
            }
        }
        let mut seen: HashMap<Vec<(u32, u64)>, usize> = HashMap::new();
        let mut push = |f: &mut StdForm, terms: Vec<(u32, f64)>, h: f64| -> std::result::Result<(), Status> {
            let scale = terms.iter().map(|t| t.1.abs()).fold(0.0, f64::max);
            if scale == 0.0 {
                return if h > tol { Err(Status::Infeasible) } else { Ok(()) };
            }
            let terms: Vec<(u32, f64)> = terms.into_iter().map(|(c, v)| (c, v / scale)).collect();
            let h = h / scale;
            let key: Vec<(u32, u64)> = terms.iter().map(|(c, v)| (*c, v.to_bits())).collect();
            if let Some(&j) = seen.get(&key) {
                f.h[j] = f.h[j].max(h);
                return Ok(());
            }
            seen.insert(key, f.h.len());
            f.norm.push(terms.iter().map(|t| t.1 * t.1).sum::<f64>().sqrt());
            for (c, v) in terms {
                f.cols.push(c);
                f.vals.push(v);
            }
            f.start.push(f.cols.len());
            f.h.push(h);
            Ok(())
        };
        for r in model.rows() {
            let sign = if r.rel == Relation::Ge { 1.0 } else { -1.0 };
            let mut rhs = r.rhs;
            let mut terms: Vec<(u32, f64)> = Vec::with_capacity(r.cols.len());
            for (c, v) in r.cols.iter().zip(r.vals) {
                match f.var_map[*c as usize] {
                    Some(j) => terms.push((j as u32, sign * v)),
                    None => rhs -= v * f.fixed[*c as usize],
                }
            }
            terms.sort_by_key(|t| t.0);
            push(&mut f, terms, sign * rhs)?;
        }
        for (k, v) in model.vars.iter().enumerate() {
            let Some(j) = f.var_map[k] else { continue };
            if let Some(l) = v.lower {
                push(&mut f, vec![(j as u32, 1.0)], l)?;
            }
            if let Some(u) = v.upper {
                push(&mut f, vec![(j as u32, -1.0)], -u)?;
            }
        }
        Ok(f)
    }

    fn expand(&self, z: &[f64]) -> Vec<f64> {
        self.var_map.iter().zip(&self.fixed).map(|(m, v)| m.map_or(*v, |j| z[j])).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Basic {
    Art(usize),
    Col(usize),
}

struct Tableau<'a> {
    f: &'a StdForm,
    n: usize,
    basis: Vec<Basic>,
    art_sign: Vec<f64>,
    binv: Vec<f64>,
    beta: Vec<f64>,
    rhs: Vec<f64>,
    in_basis: Vec<bool>,
}

impl Tableau<'_> {
    fn column(&self, b: Basic) -> Vec<f64> {
        let mut v = vec![0.0; self.n];
        match b {
            Basic::Art(k) => v[k] = self.art_sign[k],
            Basic::Col(j) => {
                let (c, x) = self.f.row(j);
                for (ci, xi) in c.iter().zip(x) {
                    v[*ci as usize] = *xi;
                }
            }
        }
        v
    }

    fn refactor(&mut self) -> Result<()> {
        let n = self.n;
        let mut b = nalgebra::DMatrix::<f64>::zeros(n, n);
        for (k, bk) in self.basis.iter().enumerate() {
            let col = self.column(*bk);
            for i in 0..n {
                b[(i, k)] = col[i];
            }
        }
        let inv = b.lu().try_inverse().ok_or_else(|| Error::Numerical("singular simplex basis".into()))?;
        for i in 0..n {
            for k in 0..n {
                self.binv[i * n + k] = inv[(i, k)];
            }
        }
        self.beta = self.solve_rhs(&self.rhs);
        Ok(())
    }

    fn solve_rhs(&self, rhs: &[f64]) -> Vec<f64> {
        let n = self.n;
        (0..n).map(|i| (0..n).map(|k| self.binv[i * n + k] * rhs[k]).sum()).collect()
    }

    fn ftran(&self, j: usize) -> Vec<f64> {
        let n = self.n;
        let (c, x) = self.f.row(j);
        (0..n).map(|i| c.iter().zip(x).map(|(ci, xi)| self.binv[i * n + *ci as usize] * xi).sum()).collect()
    }

    fn multipliers(&self, cost_b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut pi = vec![0.0; n];
        for (k, ck) in cost_b.iter().enumerate() {
            if *ck != 0.0 {
                for i in 0..n {
                    pi[i] += ck * self.binv[k * n + i];
                }
            }
        }
        pi
    }

    fn pivot(&mut self, r: usize, entering: usize, w: &[f64], theta: f64) {
        let n = self.n;
        let wr = w[r];
        for i in 0..n {
            self.beta[i] -= theta * w[i];
        }
        self.beta[r] = theta;
        let row_r: Vec<f64> = self.binv[r * n..(r + 1) * n].iter().map(|v| v / wr).collect();
        for i in 0..n {
            if i == r || w[i] == 0.0 {
                continue;
            }
            let wi = w[i];
            for k in 0..n {
                self.binv[i * n + k] -= wi * row_r[k];
            }
        }
        self.binv[r * n..(r + 1) * n].copy_from_slice(&row_r);
        if let Basic::Col(j) = self.basis[r] {
            self.in_basis[j] = false;
        }
        self.basis[r] = Basic::Col(entering);
        self.in_basis[entering] = true;
    }
}

enum PhaseEnd {
    Optimal,
    Unbounded,
    IterationLimit,
}

impl SimplexSolver {
    fn run_phase(&self, t: &mut Tableau, phase2: bool, iterations: &mut usize) -> Result<PhaseEnd> {
        let o = &self.options;
        let f = t.f;
        let big = f.len();
        let mut degenerate = 0usize;
        let mut since_refactor = 0usize;
        let mut section = 0usize;
        loop {
            if *iterations >= o.max_iterations {
                return Ok(PhaseEnd::IterationLimit);
            }
            let cost_b: Vec<f64> = t
                .basis
                .iter()
                .map(|b| match (b, phase2) {
                    (Basic::Art(_), false) => 1.0,
                    (Basic::Art(_), true) => 0.0,
                    (Basic::Col(_), false) => 0.0,
                    (Basic::Col(j), true) => -f.h[*j],
                })
                .collect();
            let pi = t.multipliers(&cost_b);
            let bland = degenerate >= o.bland_after;
            let in_basis = &t.in_basis;
            let reduced = |j: usize| -> f64 {
                let (c, x) = f.row(j);
                let own = if phase2 { -f.h[j] } else { 0.0 };
                own - c.iter().zip(x).map(|(ci, xi)| pi[*ci as usize] * xi).sum::<f64>()
            };
            let price = |range: std::ops::Range<usize>| {
                range
                    .into_par_iter()
                    .with_min_len(2048)
                    .filter(|&j| !in_basis[j])
                    .filter_map(|j| {
                        let d = reduced(j) / f.norm[j];
                        (d < -o.optimality_tol).then_some((if bland { j as f64 } else { d }, j))
                    })
                    .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)))
            };
            let sections = if bland { 1 } else { o.pricing_sections.clamp(1, big.max(1)) };
            let width = big.div_ceil(sections);
            let mut candidate = None;
            for s in 0..sections {
                let k = (section + s) % sections;
                candidate = price(k * width..((k + 1) * width).min(big));
                if candidate.is_some() {
                    section = (k + 1) % sections;
                    break;
                }
            }
            let Some((_, q)) = candidate else {
                return Ok(PhaseEnd::Optimal);
            };
            let w = t.ftran(q);
            let leave = self.ratio_test(t, &w, phase2, bland);
            let Some((r, theta)) = leave else {
                if phase2 {
                    return Ok(PhaseEnd::Unbounded);
                }
                return Err(Error::Numerical("phase one became unbounded".into()));
            };
            if theta <= 0.0 {
                degenerate += 1;
            } else {
                degenerate = 0;
            }
            t.pivot(r, q, &w, theta);
            *iterations += 1;
            since_refactor += 1;
            if since_refactor >= o.refactor_every {
                t.refactor()?;
                since_refactor = 0;
            }
        }
    }

    fn ratio_test(&self, t: &Tableau, w: &[f64], phase2: bool, bland: bool) -> Option<(usize, f64)> {
        let tol = self.options.pivot_tol;
        if phase2 {
            // Artificials are held at zero once phase one has finished.
            let art = (0..t.n)
                .filter(|&i| matches!(t.basis[i], Basic::Art(_)) && w[i].abs() > tol)
                .max_by(|&a, &b| w[a].abs().total_cmp(&w[b].abs()).then(b.cmp(&a)));
            if let Some(i) = art {
                return Some((i, 0.0));
            }
        }
        let feas = 1e-9;
        let mut bound = f64::INFINITY;
        for i in 0..t.n {
            if w[i] > tol {
                bound = bound.min((t.beta[i].max(0.0) + feas) / w[i]);
            }
        }
        if !bound.is_finite() {
            return None;
        }
        let label = |i: usize| match t.basis[i] {
            Basic::Art(k) => k,
            Basic::Col(j) => t.n + j,
        };
        let mut best: Option<usize> = None;
        for i in 0..t.n {
            if w[i] > tol && t.beta[i].max(0.0) / w[i] <= bound {
                best = match best {
                    None => Some(i),
                    Some(b) if bland && label(i) < label(b) => Some(i),
                    Some(b) if !bland && w[i] > w[b] => Some(i),
                    other => other,
                };
            }
        }
        best.map(|r| (r, t.beta[r].max(0.0) / w[r]))
    }
}

impl LpSolver for SimplexSolver {
    fn solve(&self, model: &LpModel) -> Result<LpSolution> {
        let o = &self.options;
        let f = match StdForm::build(model, 1e-9) {
            Ok(f) => f,
            Err(status) => return Ok(LpSolution::without_point(status, 0)),
        };
        let n = f.n;
        let mut rng = ChaCha8Rng::seed_from_u64(o.seed);
        let cmax = f.cost.iter().fold(1.0f64, |a, v| a.max(v.abs()));
        let art_sign: Vec<f64> = f.cost.iter().map(|c| if *c < 0.0 { -1.0 } else { 1.0 }).collect();
        let rhs: Vec<f64> = f
            .cost
            .iter()
            .zip(&art_sign)
            .map(|(c, s)| c + s * o.perturbation * cmax * (1.0 + rng.random::<f64>()))
            .collect();
        let mut binv = vec![0.0; n * n];
        for k in 0..n {
            binv[k * n + k] = art_sign[k];
        }
        let beta: Vec<f64> = rhs.iter().map(|v| v.abs()).collect();
        let mut t = Tableau {
            f: &f,
            n,
            basis: (0..n).map(Basic::Art).collect(),
            art_sign,
            binv,
            beta,
            rhs,
            in_basis: vec![false; f.len()],
        };
        let mut iterations = 0;
        match self.run_phase(&mut t, false, &mut iterations)? {
            PhaseEnd::IterationLimit => return Ok(LpSolution::without_point(Status::IterationLimit, iterations)),
            PhaseEnd::Unbounded => unreachable!("phase one is bounded below"),
            PhaseEnd::Optimal => {}
        }
        t.refactor()?;
        let infeasibility: f64 =
            t.basis.iter().zip(&t.beta).filter(|(b, _)| matches!(b, Basic::Art(_))).map(|(_, v)| v.abs()).sum();
        if infeasibility > 1e-6 * cmax {
            // The dual has no feasible point: the primal is unbounded or infeasible.
            return Ok(LpSolution::without_point(Status::Unbounded, iterations));
        }
        match self.run_phase(&mut t, true, &mut iterations)? {
            PhaseEnd::IterationLimit => return Ok(LpSolution::without_point(Status::IterationLimit, iterations)),
            PhaseEnd::Unbounded => return Ok(LpSolution::without_point(Status::Infeasible, iterations)),
            PhaseEnd::Optimal => {}
        }
        t.refactor()?;
        let cost_b: Vec<f64> = t
            .basis
            .iter()
            .map(|b| match b {
                Basic::Art(_) => 0.0,
                Basic::Col(j) => -f.h[*j],
            })
            .collect();
        let z: Vec<f64> = t.multipliers(&cost_b).iter().map(|v| -v).collect();
        let x = f.expand(&z);
        let y = t.solve_rhs(&f.cost);
        let dual_ok = y.iter().zip(&t.basis).all(|(v, b)| match b {
            Basic::Art(_) => v.abs() <= 1e-7 * cmax,
            Basic::Col(_) => *v >= -1e-9 * cmax,
        });
        let dual_bound = dual_ok.then(|| {
            f.obj_const
                + y.iter()
                    .zip(&t.basis)
                    .map(|(v, b)| match b {
                        Basic::Col(j) => f.h[*j] * v.max(0.0),
                        Basic::Art(_) => 0.0,
                    })
                    .sum::<f64>()
        });
        Ok(LpSolution {
            status: Status::Optimal,
            objective: model.objective_value(&x),
            max_residual: model.max_violation(&x),
            x,
            iterations,
            dual_bound,
        })
    }
}

/// Solve with an external program invoked as `command <lp file> <solution file>`.
///
/// The program reads the text format of [`crate::lp`] and writes one
/// `name value` line per variable plus a `status <word>` line.
#[derive(Debug, Clone)]
pub struct BackendSolver {
    pub command: PathBuf,
}

static BACKEND_CALLS: AtomicUsize = AtomicUsize::new(0);

impl LpSolver for BackendSolver {
    fn solve(&self, model: &LpModel) -> Result<LpSolution> {
        solve_via_backend(model, &self.command)
    }
}

pub fn solve_via_backend(model: &LpModel, command: &Path) -> Result<LpSolution> {
    let stamp = format!("fcbc-{}-{}", std::process::id(), BACKEND_CALLS.fetch_add(1, Ordering::Relaxed));
    let dir = std::env::temp_dir();
    let lp_path = dir.join(format!("{stamp}.lp"));
    let sol_path = dir.join(format!("{stamp}.sol"));
    std::fs::write(&lp_path, export_lp(model))?;
    let output = Command::new(command)
        .arg(&lp_path)
        .arg(&sol_path)
        .output()
        .map_err(|e| Error::Backend(format!("cannot run {}: {e}", command.display())));
    let _ = std::fs::remove_file(&lp_path);
    let output = output?;
    if !output.status.success() {
        let _ = std::fs::remove_file(&sol_path);
        return Err(Error::Backend(format!(
            "{} exited with {}: {}",
            command.display(),
            output.status,
            String::from_utf8_lossy(&output.stderr).trim()
        )));
    }
    let text = std::fs::read_to_string(&sol_path);
    let _ = std::fs::remove_file(&sol_path);
    let (status, values) = parse_solution(&text?)?;
    if status != Status::Optimal {
        return Ok(LpSolution::without_point(status, 0));
    }
    let mut x = vec![f64::NAN; model.num_vars()];
    for (name, v) in values {
        let k = model.var_index(&name).ok_or_else(|| Error::Backend(format!("unknown variable `{name}` in solution")))?;
        x[k] = v;
    }
    if let Some(k) = x.iter().position(|v| !v.is_finite()) {
        return Err(Error::Backend(format!("solution lacks a value for `{}`", model.vars[k].name)));
    }
    Ok(LpSolution {
        status,
        objective: model.objective_value(&x),
        max_residual: model.max_violation(&x),
        x,
        iterations: 0,
        dual_bound: None,
    })
}

pub fn write_solution(status: Status, names: &[String], values: &[f64]) -> String {
    let mut out = format!("status {}\n", status.as_str());
    for (n, v) in names.iter().zip(values) {
        out.push_str(&format!("{n} {v:?}\n"));
    }
    out
}

pub fn parse_solution(text: &str) -> Result<(Status, Vec<(String, f64)>)> {
    let mut status = None;
    let mut values = Vec::new();
    for (k, line) in text.lines().enumerate() {
        let toks: Vec<&str> = line.split_whitespace().collect();
        match toks.as_slice() {
            [] => {}
            ["status", s] => {
                status = Some(Status::parse(s).ok_or_else(|| Error::Backend(format!("line {}: bad status `{s}`", k + 1)))?)
            }
            [name, v] => {
                let v: f64 = v.parse().map_err(|_| Error::Backend(format!("line {}: bad value `{v}`", k + 1)))?;
                values.push((name.to_string(), v));
            }
            _ => return Err(Error::Backend(format!("line {}: malformed solution line", k + 1))),
        }
    }
    let status = status.ok_or_else(|| Error::Backend("solution has no status line".into()))?;
    Ok((status, values))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn solve(m: &LpModel) -> LpSolution {
        SimplexSolver::default().solve(m).unwrap()
    }

    #[test]
    fn two_variable_optimum() {
        // max x + y s.t. x + 2y <= 4, 3x + y <= 6, x, y >= 0 -> (1.6, 1.2)
        let mut m = LpModel::new();
        let x = m.add_var("x", Some(0.0), None);
        let y = m.add_var("y", Some(0.0), None);
        m.objective = vec![(x, -1.0), (y, -1.0)];
        m.add_row("a", &[(x, 1.0), (y, 2.0)], Relation::Le, 4.0);
        m.add_row("b", &[(x, 3.0), (y, 1.0)], Relation::Le, 6.0);
        let s = solve(&m);
        assert_eq!(s.status, Status::Optimal);
        assert!((s.x[0] - 1.6).abs() < 1e-6 && (s.x[1] - 1.2).abs() < 1e-6);
        assert!((s.dual_bound.unwrap() - s.objective).abs() < 1e-5);
    }

    #[test]
    fn detects_infeasible_and_unbounded() {
        let mut m = LpModel::new();
        let x = m.add_var("x", None, None);
        m.objective = vec![(x, 1.0)];
        m.add_row("lo", &[(x, 1.0)], Relation::Ge, 2.0);
        m.add_row("hi", &[(x, 1.0)], Relation::Le, 1.0);
        assert_eq!(solve(&m).status, Status::Infeasible);
        let mut u = LpModel::new();
        let x = u.add_var("x", None, Some(3.0));
        u.objective = vec![(x, 1.0)];
        assert_eq!(solve(&u).status, Status::Unbounded);
    }

    #[test]
    fn unused_free_variables_do_not_block_optimality() {
        let mut m = LpModel::new();
        let x = m.add_var("x", Some(1.0), None);
        for k in 0..20 {
            m.add_var(format!("idle{k}"), None, None);
        }
        m.objective = vec![(x, 5.0)];
        let s = solve(&m);
        assert_eq!(s.status, Status::Optimal);
        assert!((s.objective - 5.0).abs() < 1e-9);
        let idle = m.add_var("costly", None, None);
        m.objective.push((idle, 1.0));
        assert_eq!(solve(&m).status, Status::Unbounded);
    }

    #[test]
    fn fixed_variables_are_substituted() {
        let mut m = LpModel::new();
        let x = m.add_var("x", Some(2.0), Some(2.0));
        let y = m.add_var("y", None, None);
        m.objective = vec![(y, 1.0)];
        m.add_row("r", &[(x, 1.0), (y, 1.0)], Relation::Ge, 5.0);
        let s = solve(&m);
        assert_eq!(s.status, Status::Optimal);
        assert!((s.x[1] - 3.0).abs() < 1e-6 && s.x[0] == 2.0);
    }

    #[test]
    fn solution_text_round_trip() {
        let text = write_solution(Status::Optimal, &["a".into(), "b".into()], &[1.5, -2e-12]);
        let (s, v) = parse_solution(&text).unwrap();
        assert_eq!(s, Status::Optimal);
        assert_eq!(v, vec![("a".to_string(), 1.5), ("b".to_string(), -2e-12)]);
        assert!(parse_solution("a 1\n").is_err());
    }
}
