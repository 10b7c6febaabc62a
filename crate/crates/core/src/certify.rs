//! Synthesis pipeline, safety bound, independent checking and Monte Carlo.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use crate::bounds::{a_coefficient, c_coefficient, SearchConfig, TighteningCoefficients};
use crate::error::check_dim;
use crate::geometry::{
    build_lattice_with_budget, inflate_region, lattice_mask, Domain, Lattice, Region, DEFAULT_LATTICE_BUDGET,
};
use crate::kernels::{CmeModel, KernelParams, SampleSet};
use crate::lp::{assemble, LpModel, LpLayout, Partitions, ProblemSpec};
use crate::solver::{LpSolver, Status};
use crate::spectral::{barrier_eval, build_basis, cme_feature_fields, dot, project_cme, SpectralBasis};
use crate::systems::{rollout, stream_rng, SystemSpec, STREAM_MC};
use crate::{Error, Result};

/// Schema version of certificate and report JSON.
pub const CERT_VERSION: u32 = 1;

/// `max(0, 1 - (eta + c T))`.
pub fn safety_probability(eta: f64, c: f64, horizon: usize) -> Result<f64> {
    if !(0.0..1.0).contains(&eta) {
        return Err(Error::Invalid(format!("eta must lie in [0, 1), got {eta}")));
    }
    if !(c >= 0.0) || !c.is_finite() {
        return Err(Error::Invalid(format!("c must be >= 0, got {c}")));
    }
    if horizon < 1 {
        return Err(Error::Invalid("horizon must be >= 1".into()));
    }
    Ok((1.0 - (eta + c * horizon as f64)).max(0.0))
}

/// Everything [`synthesize`] needs besides the data.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SynthesisConfig {
    pub domain: Domain,
    pub initial: Region,
    pub unsafe_set: Region,
    pub horizon: usize,
    pub epsilon: f64,
    pub bbar: f64,
    pub kernel_in: KernelParams,
    pub kernel_out: KernelParams,
    pub lambda: f64,
    pub m_per_axis: usize,
    pub oversample: usize,
    /// Oversampling of the lattice on which `H` is fitted.
    pub fit_oversample: usize,
    /// Relative inflation of the initial and unsafe sets.
    pub inflation: f64,
    /// Relative inflation of the domain.
    pub domain_inflation: f64,
    /// Doublings of the norm cap tried before giving up.
    pub bbar_retries: usize,
    /// Add the truncation rows that charge `H`'s error to the Kushner budget.
    pub guard: bool,
    pub search: SearchConfig,
    pub lattice_budget: usize,
    /// Write each assembled LP here in the text format.
    #[serde(skip)]
    pub lp_out: Option<std::path::PathBuf>,
}

impl SynthesisConfig {
    pub fn new(domain: Domain, initial: Region, unsafe_set: Region, kernel_in: KernelParams, kernel_out: KernelParams) -> Self {
        Self {
            domain,
            initial,
            unsafe_set,
            horizon: 5,
            epsilon: 0.0,
            bbar: 7.0,
            kernel_in,
            kernel_out,
            lambda: 1e-5,
            m_per_axis: 4,
            oversample: 8,
            fit_oversample: 8,
            inflation: 0.3,
            domain_inflation: 0.05,
            bbar_retries: 6,
            guard: true,
            search: SearchConfig::default(),
            lattice_budget: DEFAULT_LATTICE_BUDGET,
            lp_out: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.domain.dim();
        check_dim(n, self.kernel_in.lengthscales.len())?;
        check_dim(n, self.kernel_out.lengthscales.len())?;
        for r in [&self.initial, &self.unsafe_set] {
            r.validate()?;
            if let Some(d) = r.dim() {
                check_dim(n, d)?;
            }
        }
        if self.oversample == 0 || self.fit_oversample == 0 || self.m_per_axis == 0 {
            return Err(Error::Invalid("m_per_axis and oversampling factors must be >= 1".into()));
        }
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            return Err(Error::Invalid("lambda must be >= 0".into()));
        }
        self.problem(self.bbar).validate()
    }

    /// `kappa`: the sup of the input kernel's feature norm, `sigma_f`.
    pub fn kappa(&self) -> f64 {
        self.kernel_in.sigma_f
    }

    pub fn problem(&self, bbar: f64) -> ProblemSpec {
        ProblemSpec {
            domain: self.domain.clone(),
            initial: self.initial.clone(),
            unsafe_set: self.unsafe_set.clone(),
            horizon: self.horizon,
            epsilon: self.epsilon,
            bbar,
            kappa: self.kappa(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Provenance {
    pub dataset_sha256: String,
    pub samples: usize,
    pub seed: Option<u64>,
    pub config_sha256: Option<String>,
    pub tightening: TighteningCoefficients,
    pub lattice_q: usize,
    pub fit_q: usize,
    pub h_residual: f64,
    /// Truncation budget found by the LP (0 without the guard rows).
    pub delta: f64,
    pub inflation: f64,
    pub domain_inflation: f64,
    pub lp_rows: usize,
    pub lp_vars: usize,
    pub lp_max_residual: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Certificate {
    pub version: u32,
    pub basis: SpectralBasis,
    pub b: Vec<f64>,
    pub eta: f64,
    pub c: f64,
    pub epsilon: f64,
    pub bbar: f64,
    pub kappa: f64,
    pub horizon: usize,
    pub p_n: f64,
    /// `1 - eta`, an infinite-horizon bound that is valid only if `c == 0`.
    pub infinite_horizon_bound: f64,
    pub kernel_in: KernelParams,
    pub kernel_out: KernelParams,
    pub lambda: f64,
    pub domain: Domain,
    pub initial: Region,
    pub unsafe_set: Region,
    pub provenance: Provenance,
}

impl Certificate {
    pub fn b_norm(&self) -> f64 {
        self.b.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn is_vacuous(&self) -> bool {
        self.p_n <= 0.0
    }

    pub fn barrier(&self, x: &[f64]) -> Result<f64> {
        barrier_eval(&self.b, &self.basis, x)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).map_err(|e| Error::Parse(e.to_string()))?;
        std::fs::write(path, text + "\n")?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let value: serde_json::Value =
            serde_json::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
        let version = value.get("version").and_then(|v| v.as_u64());
        if version != Some(CERT_VERSION as u64) {
            return Err(Error::Config(format!(
                "{}: certificate schema version {version:?} is not supported (expected {CERT_VERSION})",
                path.display()
            )));
        }
        let cert: Certificate =
            serde_json::from_value(value).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
        check_dim(cert.basis.feature_dim(), cert.b.len())?;
        Ok(cert)
    }
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct Diagnostics {
    /// Wall time per stage in seconds.
    pub stages: Vec<(String, f64)>,
    pub lattice_points: usize,
    pub family_points: BTreeMap<String, usize>,
    pub bbar_attempts: Vec<f64>,
    pub iterations: usize,
    pub objective: f64,
    pub dual_bound: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct Synthesis {
    pub certificate: Certificate,
    pub diagnostics: Diagnostics,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Hash of the dataset in its CSV representation.
pub fn dataset_hash(data: &SampleSet) -> String {
    let mut h = Sha256::new();
    for i in 0..data.len() {
        let row: Vec<String> = data.state(i).iter().chain(data.successor(i)).map(|v| format!("{v:?}")).collect();
        h.update(row.join(",").as_bytes());
        h.update(b"\n");
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

/// Everything built once per synthesis, before the LP solves.
pub struct Prepared {
    pub model: CmeModel,
    pub basis: SpectralBasis,
    pub lattice: Lattice,
    pub partitions: Partitions,
    pub tight: TighteningCoefficients,
    pub transfer: crate::spectral::TransferMatrix,
    pub fit_q: usize,
    pub guard: Option<DMatrix<f64>>,
    pub diagnostics: Diagnostics,
}

fn timed<T>(d: &mut Diagnostics, name: &str, f: impl FnOnce() -> Result<T>) -> Result<T> {
    let t0 = Instant::now();
    let out = f()?;
    d.stages.push((name.to_string(), t0.elapsed().as_secs_f64()));
    Ok(out)
}

/// Fit, basis, lattice, tightening coefficients, `H` and the guard rows.
pub fn prepare(cfg: &SynthesisConfig, data: SampleSet) -> Result<Prepared> {
    cfg.validate()?;
    check_dim(cfg.domain.dim(), data.dim())?;
    let mut d = Diagnostics::default();
    let model = timed(&mut d, "fit", || CmeModel::new(data, cfg.kernel_in.clone(), cfg.kernel_out.clone(), cfg.lambda))?;
    let basis = timed(&mut d, "basis", || build_basis(cfg.m_per_axis, &cfg.kernel_out, &cfg.domain))?;
    let lattice = timed(&mut d, "lattice", || build_lattice_with_budget(&basis, cfg.oversample, cfg.lattice_budget))?;
    let n = cfg.domain.dim();
    let dom_box = Region::boxed(cfg.domain.lower.clone(), cfg.domain.upper.clone())?;
    let dom_infl = inflate_region(&dom_box, cfg.domain_inflation, None)?;
    let x_mask = lattice_mask(&lattice, &dom_infl);
    // The set masks may reach past the domain into the periodic margin; any
    // superset of the inflation is sound as long as A uses the same mask.
    let init_mask = lattice_mask(&lattice, &inflate_region(&cfg.initial, cfg.inflation, None)?);
    let unsafe_mask = lattice_mask(&lattice, &inflate_region(&cfg.unsafe_set, cfg.inflation, None)?);
    let partitions = Partitions { initial: init_mask, unsafe_set: unsafe_mask, domain: x_mask };
    d.lattice_points = lattice.len();
    for (k, m) in [("initial", &partitions.initial), ("unsafe", &partitions.unsafe_set), ("domain", &partitions.domain)] {
        d.family_points.insert(k.into(), m.iter().filter(|v| **v).count());
    }
    let tight = timed(&mut d, "tightening", || {
        let c = c_coefficient(basis.f_max, lattice.q, n)?;
        let mut a = BTreeMap::new();
        a.insert(
            "initial".into(),
            a_coefficient(&lattice, &partitions.initial, &cfg.initial, Some(&cfg.domain), basis.f_max, &cfg.search)?,
        );
        a.insert(
            "unsafe".into(),
            a_coefficient(&lattice, &partitions.unsafe_set, &cfg.unsafe_set, Some(&cfg.domain), basis.f_max, &cfg.search)?,
        );
        a.insert("domain".into(), a_coefficient(&lattice, &partitions.domain, &dom_box, None, basis.f_max, &cfg.search)?);
        let t = TighteningCoefficients { c, a, f_max: basis.f_max, q: lattice.q, n };
        t.validate()?;
        Ok(t)
    })?;
    let fit_lattice = build_lattice_with_budget(&basis, cfg.fit_oversample, cfg.lattice_budget)?;
    let transfer = timed(&mut d, "transfer", || project_cme(&model, &basis, &fit_lattice))?;
    let guard = if cfg.guard {
        Some(timed(&mut d, "guard", || {
            let pts: Vec<&[f64]> = lattice.points().filter(|p| cfg.domain.contains(p)).collect();
            let exact = cme_feature_fields(&model, &basis, pts.iter().copied())?;
            let approx = basis.feature_matrix(pts.iter().copied()) * &transfer.h;
            Ok(exact - approx)
        })?)
    } else {
        None
    };
    Ok(Prepared { model, basis, lattice, partitions, tight, transfer, fit_q: fit_lattice.q, guard, diagnostics: d })
}

fn family_rows(name: &str) -> Vec<String> {
    let (pin, pout) = match name {
        "init" => ("init_", "comp0_"),
        "unsafe" => ("unsafe_", "compU_"),
        "pos" => ("pos_", "compX_"),
        _ => ("kush_", "compK_"),
    };
    let mut v = vec![pin.to_string(), pout.to_string(), format!("rad_{name}_"), format!("bound_{name}")];
    if name == "kush" {
        v.push("trunc_".into());
    }
    v
}

/// Copy of `model` without the rows of one constraint family.
pub fn drop_family(model: &LpModel, family: &str) -> LpModel {
    let prefixes = family_rows(family);
    let mut out = LpModel::new();
    out.vars = model.vars.clone();
    out.objective = model.objective.clone();
    for r in model.rows() {
        if prefixes.iter().any(|p| r.name.starts_with(p.as_str())) {
            continue;
        }
        let coefs: Vec<(usize, f64)> = r.cols.iter().zip(r.vals).map(|(c, v)| (*c as usize, *v)).collect();
        out.add_row(r.name, &coefs, r.rel, r.rhs);
    }
    out
}

/// Families whose removal alone makes an infeasible model feasible.
pub fn diagnose_infeasible(model: &LpModel, solver: &dyn LpSolver) -> Vec<String> {
    ["init", "unsafe", "pos", "kush"]
        .into_iter()
        .filter(|f| solver.solve(&drop_family(model, f)).is_ok_and(|s| s.status == Status::Optimal))
        .map(String::from)
        .collect()
}

/// Run the pipeline: prepare, assemble, solve, and enforce the norm cap by
/// doubling it (and re-solving, since the Kushner offset depends on it).
pub fn synthesize(cfg: &SynthesisConfig, data: SampleSet, solver: &dyn LpSolver) -> Result<Synthesis> {
    let dataset_sha256 = dataset_hash(&data);
    let samples = data.len();
    let mut p = prepare(cfg, data)?;
    let mut bbar = cfg.bbar;
    for attempt in 0..=cfg.bbar_retries {
        p.diagnostics.bbar_attempts.push(bbar);
        let problem = cfg.problem(bbar);
        let (model, layout) = timed(&mut p.diagnostics, "assemble", || {
            assemble(&problem, &p.basis, &p.transfer, &p.lattice, &p.partitions, &p.tight, p.guard.as_ref())
        })?;
        if let Some(path) = &cfg.lp_out {
            std::fs::write(path, crate::lp::export_lp(&model))?;
        }
        let sol = timed(&mut p.diagnostics, "solve", || solver.solve(&model))?;
        p.diagnostics.iterations += sol.iterations;
        match sol.status {
            Status::Optimal => {}
            Status::Infeasible => {
                let binding = diagnose_infeasible(&model, solver);
                let which = if binding.is_empty() { "a combination of families".to_string() } else { binding.join(", ") };
                return Err(Error::Infeasible(format!(
                    "LP infeasible; binding constraint family: {which}. Try a larger m_per_axis or oversample, a smaller inflation, or check that the initial and unsafe sets are disjoint"
                )));
            }
            other => return Err(Error::Numerical(format!("LP solver returned {}", other.as_str()))),
        }
        let b: Vec<f64> = sol.x[layout.b.clone()].to_vec();
        let norm = b.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > bbar && cfg.epsilon > 0.0 {
            if attempt == cfg.bbar_retries {
                break;
            }
            bbar *= 2.0;
            continue;
        }
        bbar = bbar.max(norm);
        p.diagnostics.objective = sol.objective;
        p.diagnostics.dual_bound = sol.dual_bound;
        let certificate = finish(cfg, &p, &model, &layout, &sol.x, b, bbar, sol.max_residual, dataset_sha256, samples)?;
        return Ok(Synthesis { certificate, diagnostics: p.diagnostics });
    }
    Err(Error::Budget(format!(
        "barrier norm exceeded the cap after {} doublings (last cap {bbar})",
        cfg.bbar_retries
    )))
}

#[allow(clippy::too_many_arguments)]
fn finish(
    cfg: &SynthesisConfig,
    p: &Prepared,
    model: &LpModel,
    layout: &LpLayout,
    x: &[f64],
    b: Vec<f64>,
    bbar: f64,
    max_residual: f64,
    dataset_sha256: String,
    samples: usize,
) -> Result<Certificate> {
    let eta = x[layout.eta].clamp(0.0, crate::lp::ETA_MAX);
    let c = x[layout.c].max(0.0);
    let p_n = safety_probability(eta, c, cfg.horizon)?;
    Ok(Certificate {
        version: CERT_VERSION,
        basis: p.basis.clone(),
        b,
        eta,
        c,
        epsilon: cfg.epsilon,
        bbar,
        kappa: cfg.kappa(),
        horizon: cfg.horizon,
        p_n,
        infinite_horizon_bound: 1.0 - eta,
        kernel_in: cfg.kernel_in.clone(),
        kernel_out: cfg.kernel_out.clone(),
        lambda: cfg.lambda,
        domain: cfg.domain.clone(),
        initial: cfg.initial.clone(),
        unsafe_set: cfg.unsafe_set.clone(),
        provenance: Provenance {
            dataset_sha256,
            samples,
            seed: None,
            config_sha256: None,
            tightening: p.tight.clone(),
            lattice_q: p.lattice.q,
            fit_q: p.fit_q,
            h_residual: p.transfer.residual,
            delta: layout.delta.map_or(0.0, |k| x[k].max(0.0)),
            inflation: cfg.inflation,
            domain_inflation: cfg.domain_inflation,
            lp_rows: model.num_rows(),
            lp_vars: model.num_vars(),
            lp_max_residual: max_residual,
        },
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AuditConfig {
    /// Audit points relative to the LP lattice points covering the domain.
    pub density: f64,
    pub tolerance: f64,
    pub max_points: usize,
}

impl Default for AuditConfig {
    fn default() -> Self {
        Self { density: 10.0, tolerance: 1e-4, max_points: 20_000_000 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FamilyCheck {
    pub name: String,
    /// Worst value of the audited quantity (max for init/kushner, min otherwise).
    pub worst: f64,
    /// Amount by which the worst point violates the condition (0 if none).
    pub violation: f64,
    pub points: usize,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct McReport {
    pub runs: usize,
    pub safe: usize,
    pub estimate: f64,
    pub half_width: f64,
    pub lower: f64,
    pub upper: f64,
    pub confidence: f64,
    /// Initial state giving the smallest estimate in grid mode.
    pub worst_initial: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ValidationReport {
    pub version: u32,
    pub tolerance: f64,
    pub grid_per_axis: Vec<usize>,
    pub families: Vec<FamilyCheck>,
    pub monte_carlo: Option<McReport>,
    pub p_n: f64,
    pub pass: bool,
}

/// Audit grid over the domain: per axis `ceil(Q w_X / w_per * density^(1/n)) + 1`
/// points including both ends.
pub fn audit_grid(cert: &Certificate, audit: &AuditConfig) -> Result<Vec<usize>> {
    let n = cert.domain.dim();
    let per = cert.basis.periodic_domain()?;
    let q = cert.provenance.lattice_q as f64;
    let f = audit.density.max(1.0).powf(1.0 / n as f64);
    let counts: Vec<usize> =
        (0..n).map(|i| (q * cert.domain.width(i) / per.width(i) * f).ceil() as usize + 1).collect();
    if counts.iter().map(|c| *c as f64).product::<f64>() > audit.max_points as f64 {
        return Err(Error::Budget(format!("audit grid {counts:?} exceeds {} points", audit.max_points)));
    }
    Ok(counts)
}

fn grid_point(domain: &Domain, counts: &[usize], mut k: usize) -> Vec<f64> {
    let n = counts.len();
    let mut p = vec![0.0; n];
    for i in (0..n).rev() {
        let j = k % counts[i];
        k /= counts[i];
        p[i] = if counts[i] == 1 {
            0.5 * (domain.lower[i] + domain.upper[i])
        } else {
            domain.lower[i] + domain.width(i) * j as f64 / (counts[i] - 1) as f64
        };
    }
    p
}

/// Re-verify the barrier conditions on a dense grid with the exact empirical
/// CME (no transfer matrix involved).
pub fn check_certificate(cert: &Certificate, model: &CmeModel, audit: &AuditConfig) -> Result<ValidationReport> {
    if model.kernel_in != cert.kernel_in || model.kernel_out != cert.kernel_out || model.lambda != cert.lambda {
        return Err(Error::Config("certificate and CME model use different kernel parameters or lambda".into()));
    }
    check_dim(cert.domain.dim(), model.samples.dim())?;
    check_dim(cert.basis.feature_dim(), cert.b.len())?;
    let counts = audit_grid(cert, audit)?;
    let total: usize = counts.iter().product();
    let next_vals: Vec<f64> = model.samples.successors().map(|s| dot(&cert.basis.features(s), &cert.b)).collect();
    let alpha = model.presolve(&DMatrix::from_vec(next_vals.len(), 1, next_vals))?;
    let kush_rhs = cert.c - cert.epsilon * cert.bbar * cert.kappa;

    #[derive(Clone, Copy)]
    struct Acc {
        init: (f64, usize),
        unsafe_: (f64, usize),
        pos: (f64, usize),
        kush: (f64, usize),
    }
    let empty = Acc {
        init: (f64::NEG_INFINITY, 0),
        unsafe_: (f64::INFINITY, 0),
        pos: (f64::INFINITY, 0),
        kush: (f64::NEG_INFINITY, 0),
    };
    let merge = |a: Acc, b: Acc| Acc {
        init: (a.init.0.max(b.init.0), a.init.1 + b.init.1),
        unsafe_: (a.unsafe_.0.min(b.unsafe_.0), a.unsafe_.1 + b.unsafe_.1),
        pos: (a.pos.0.min(b.pos.0), a.pos.1 + b.pos.1),
        kush: (a.kush.0.max(b.kush.0), a.kush.1 + b.kush.1),
    };
    let acc = (0..total)
        .into_par_iter()
        .with_min_len(256)
        .map(|k| {
            let x = grid_point(&cert.domain, &counts, k);
            let bx = dot(&cert.basis.features(&x), &cert.b);
            let mut a = empty;
            if cert.initial.contains(&x) {
                a.init = (bx, 1);
            }
            if cert.unsafe_set.contains(&x) {
                a.unsafe_ = (bx, 1);
            }
            a.pos = (bx, 1);
            a.kush = (model.apply(&x, &alpha)[0] - bx, 1);
            a
        })
        .reduce(|| empty, merge);
    let tol = audit.tolerance;
    let fam = |name: &str, worst: f64, points: usize, violation: f64| FamilyCheck {
        name: name.into(),
        worst,
        violation: violation.max(0.0),
        points,
        pass: points > 0 && violation <= tol,
    };
    let families = vec![
        fam("init", acc.init.0, acc.init.1, acc.init.0 - cert.eta),
        fam("unsafe", acc.unsafe_.0, acc.unsafe_.1, 1.0 - acc.unsafe_.0),
        fam("kushner", acc.kush.0, acc.kush.1, acc.kush.0 - kush_rhs),
        fam("positivity", acc.pos.0, acc.pos.1, -acc.pos.0),
    ];
    let pass = families.iter().all(|f| f.pass);
    Ok(ValidationReport {
        version: CERT_VERSION,
        tolerance: tol,
        grid_per_axis: counts,
        families,
        monte_carlo: None,
        p_n: cert.p_n,
        pass,
    })
}

/// Initial-condition mode for Monte Carlo.
#[derive(Debug, Clone)]
pub enum InitMode {
    Fixed(Vec<f64>),
    /// Uniform over the region (restricted to the domain), by rejection.
    Uniform(Region),
    /// Every point of a `per_axis^n` grid over the region's bounding box that
    /// lies in the region; the worst estimate is reported.
    Grid(Region, usize),
}

/// Chebyshev half-width `sqrt(p (1 - p) / (runs (1 - confidence)))`.
pub fn chebyshev_half_width(p: f64, runs: usize, confidence: f64) -> f64 {
    (p * (1.0 - p) / (runs as f64 * (1.0 - confidence))).sqrt()
}

fn sample_in(region: &Region, domain: &Domain, rng: &mut impl rand::Rng) -> Result<Vec<f64>> {
    let (lo, hi) = region
        .bounding_box(domain)
        .ok_or_else(|| Error::Invalid("initial region does not meet the domain".into()))?;
    for _ in 0..100_000 {
        let x: Vec<f64> = lo.iter().zip(&hi).map(|(l, h)| l + (h - l) * rng.random::<f64>()).collect();
        if region.contains(&x) {
            return Ok(x);
        }
    }
    Err(Error::Invalid("rejection sampling of the initial region failed".into()))
}

fn mc_fixed_runs(
    spec: &SystemSpec,
    init: &(dyn Fn(&mut rand_chacha::ChaCha8Rng) -> Result<Vec<f64>> + Sync),
    horizon: usize,
    runs: usize,
    unsafe_set: &Region,
    seed: u64,
    offset: u64,
) -> Result<usize> {
    let safe: Vec<bool> = (0..runs)
        .into_par_iter()
        .map(|r| {
            let mut rng = stream_rng(seed, STREAM_MC, offset + r as u64);
            let x0 = init(&mut rng)?;
            Ok(rollout(spec, &x0, horizon, Some(unsafe_set), &mut rng)?.1)
        })
        .collect::<Result<_>>()?;
    Ok(safe.iter().filter(|s| **s).count())
}

/// Fraction of safe rollouts with a two-sided Chebyshev interval. Rollout
/// `r` uses stream `r` under [`STREAM_MC`]; in grid mode grid point `g` uses
/// streams `g * runs + r`.
pub fn monte_carlo(
    spec: &SystemSpec,
    init: &InitMode,
    horizon: usize,
    runs: usize,
    confidence: f64,
    unsafe_set: &Region,
    seed: u64,
) -> Result<McReport> {
    if runs == 0 {
        return Err(Error::Invalid("runs must be >= 1".into()));
    }
    if !(confidence > 0.0 && confidence < 1.0) {
        return Err(Error::Invalid(format!("confidence must lie in (0, 1), got {confidence}")));
    }
    spec.validate()?;
    let report = |safe: usize, worst_initial: Option<Vec<f64>>| {
        let p = safe as f64 / runs as f64;
        let hw = chebyshev_half_width(p, runs, confidence);
        McReport {
            runs,
            safe,
            estimate: p,
            half_width: hw,
            lower: (p - hw).max(0.0),
            upper: (p + hw).min(1.0),
            confidence,
            worst_initial,
        }
    };
    match init {
        InitMode::Fixed(x0) => {
            check_dim(spec.dim(), x0.len())?;
            let f = |_: &mut rand_chacha::ChaCha8Rng| Ok(x0.clone());
            Ok(report(mc_fixed_runs(spec, &f, horizon, runs, unsafe_set, seed, 0)?, None))
        }
        InitMode::Uniform(region) => {
            let f = |rng: &mut rand_chacha::ChaCha8Rng| sample_in(region, &spec.domain, rng);
            Ok(report(mc_fixed_runs(spec, &f, horizon, runs, unsafe_set, seed, 0)?, None))
        }
        InitMode::Grid(region, per_axis) => {
            let (lo, hi) = region
                .bounding_box(&spec.domain)
                .ok_or_else(|| Error::Invalid("initial region does not meet the domain".into()))?;
            let k = (*per_axis).max(1);
            let n = spec.dim();
            let bbox = Domain::new(lo, hi)?;
            let counts = vec![k; n];
            let mut worst: Option<(usize, Vec<f64>)> = None;
            for g in 0..k.pow(n as u32) {
                let x0 = grid_point(&bbox, &counts, g);
                if !region.contains(&x0) {
                    continue;
                }
                let f = |_: &mut rand_chacha::ChaCha8Rng| Ok(x0.clone());
                let safe = mc_fixed_runs(spec, &f, horizon, runs, unsafe_set, seed, (g * runs) as u64)?;
                if worst.as_ref().is_none_or(|(s, _)| safe < *s) {
                    worst = Some((safe, x0));
                }
            }
            let (safe, x0) = worst.ok_or_else(|| Error::Invalid("no grid point lies in the initial region".into()))?;
            Ok(report(safe, Some(x0)))
        }
    }
}

/// One row of an exported barrier surface.
#[derive(Debug, Clone, PartialEq)]
pub struct SurfacePoint {
    pub coords: [f64; 2],
    pub value: f64,
}

/// Barrier values on a `per_axis^2` grid over two free axes of the domain,
/// with the remaining axes fixed by `slice` (`(axis, value)` pairs).
pub fn barrier_surface(cert: &Certificate, per_axis: usize, slice: &[(usize, f64)]) -> Result<(Vec<usize>, Vec<SurfacePoint>)> {
    let n = cert.domain.dim();
    if per_axis < 2 {
        return Err(Error::Invalid("surface grid needs at least 2 points per axis".into()));
    }
    let mut fixed = vec![None; n];
    for &(a, v) in slice {
        if a >= n || fixed[a].is_some() {
            return Err(Error::Invalid(format!("invalid slice axis {a}")));
        }
        fixed[a] = Some(v);
    }
    let free: Vec<usize> = (0..n).filter(|a| fixed[*a].is_none()).collect();
    if free.len() != 2 {
        return Err(Error::Invalid(format!("slice must leave exactly two free axes, leaves {}", free.len())));
    }
    let mut out = Vec::with_capacity(per_axis * per_axis);
    let d = &cert.domain;
    for i in 0..per_axis {
        for j in 0..per_axis {
            let u = d.lower[free[0]] + d.width(free[0]) * i as f64 / (per_axis - 1) as f64;
            let v = d.lower[free[1]] + d.width(free[1]) * j as f64 / (per_axis - 1) as f64;
            let x: Vec<f64> = (0..n)
                .map(|a| {
                    if a == free[0] {
                        u
                    } else if a == free[1] {
                        v
                    } else {
                        fixed[a].unwrap_or(0.0)
                    }
                })
                .collect();
            out.push(SurfacePoint { coords: [u, v], value: cert.barrier(&x)? });
        }
    }
    Ok((free, out))
}

/// CSV with columns `x<a>,x<b>,B,ge_one,le_eta`; the last two mark the
/// `B = 1` and `B = eta` level sets.
pub fn write_surface_csv(path: &Path, cert: &Certificate, axes: &[usize], pts: &[SurfacePoint]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::Parse(e.to_string()))?;
    let h0 = format!("x{}", axes[0] + 1);
    let h1 = format!("x{}", axes[1] + 1);
    w.write_record([h0.as_str(), h1.as_str(), "B", "ge_one", "le_eta"]).map_err(|e| Error::Parse(e.to_string()))?;
    for p in pts {
        w.write_record([
            format!("{:?}", p.coords[0]),
            format!("{:?}", p.coords[1]),
            format!("{:?}", p.value),
            u8::from(p.value >= 1.0).to_string(),
            u8::from(p.value <= cert.eta).to_string(),
        ])
        .map_err(|e| Error::Parse(e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn safety_probability_values() {
        assert!((safety_probability(0.277, 0.072, 5).unwrap() - 0.363).abs() < 1e-12);
        let p = safety_probability(0.263, 0.047, 5).unwrap();
        assert!((p - 0.502).abs() < 1e-12);
        assert!((0.500..=0.502 + 1e-12).contains(&p));
        assert_eq!(safety_probability(0.4, 0.0, 5).unwrap(), safety_probability(0.4, 0.0, 500).unwrap());
        assert_eq!(safety_probability(0.9, 0.1, 5).unwrap(), 0.0);
        assert!(safety_probability(1.0, 0.0, 5).is_err());
        assert!(safety_probability(0.5, -0.1, 5).is_err());
        assert!(safety_probability(0.5, 0.1, 0).is_err());
    }

    #[test]
    fn chebyshev_width() {
        assert_eq!(chebyshev_half_width(1.0, 100, 0.9), 0.0);
        assert!((chebyshev_half_width(0.5, 10_000, 0.9) - (0.25f64 / 1000.0).sqrt()).abs() < 1e-15);
    }
}
