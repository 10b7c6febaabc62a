//! Run configuration and the `fcbc` subcommands.
//!
//! Exit codes: 0 success, 1 infeasible LP or failed check, 2 usage or
//! configuration error.

use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use std::time::Instant;

use crate::bounds::SearchConfig;
use crate::certify::{
    barrier_surface, check_certificate, dataset_hash, monte_carlo, sha256_hex, synthesize, write_surface_csv,
    AuditConfig, Certificate, InitMode, McReport, SynthesisConfig,
};
use crate::geometry::{Domain, Region, DEFAULT_LATTICE_BUDGET};
use crate::kernels::{median_heuristic, CmeModel, KernelParams, SampleSet};
use crate::solver::{BackendSolver, LpSolver, SimplexOptions, SimplexSolver};
use crate::systems::{generate_dataset, rollout, stream_rng, write_trajectory_csv, Controller, Mlp, SteerLaw, SystemKind, SystemSpec, STREAM_MC};
use crate::{Error, Result};

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    pub system: SystemSection,
    pub domain: DomainSection,
    #[serde(default)]
    pub data: DataSection,
    pub kernel: KernelSection,
    pub basis: BasisSection,
    pub problem: ProblemSection,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub tightening: Option<SearchConfig>,
    #[serde(default)]
    pub audit: AuditSection,
    #[serde(default)]
    pub mc: McSection,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSection {
    pub kind: SystemKind,
    pub tau: Option<f64>,
    pub noise: Option<Vec<f64>>,
    pub velocity: Option<f64>,
    /// `none`, `zero`, `steer` or `mlp`.
    #[serde(default = "default_controller")]
    pub controller: String,
    /// MLP weights, relative to the config file.
    pub controller_path: Option<PathBuf>,
    pub steer: Option<SteerLaw>,
    #[serde(default)]
    pub command: Vec<String>,
}

fn default_controller() -> String {
    "none".into()
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct DomainSection {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct DataSection {
    pub samples: usize,
}

impl Default for DataSection {
    fn default() -> Self {
        Self { samples: 1000 }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(untagged)]
pub enum Lengthscales {
    Values(Vec<f64>),
    /// The string `"auto"`: median heuristic on the data.
    Auto(String),
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct KernelSpec {
    pub sigma_f: f64,
    pub lengthscales: Lengthscales,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct KernelSection {
    pub input: KernelSpec,
    pub output: KernelSpec,
    #[serde(default = "default_lambda")]
    pub lambda: f64,
}

fn default_lambda() -> f64 {
    1e-5
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct BasisSection {
    pub m_per_axis: usize,
    pub oversample: usize,
    pub fit_oversample: Option<usize>,
    pub lattice_budget: Option<usize>,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSection {
    pub initial: Region,
    #[serde(rename = "unsafe")]
    pub unsafe_set: Region,
    pub horizon: usize,
    #[serde(default)]
    pub epsilon: f64,
    pub bbar: f64,
    #[serde(default = "default_inflation")]
    pub inflation: f64,
    #[serde(default = "default_domain_inflation")]
    pub domain_inflation: f64,
    #[serde(default = "default_retries")]
    pub bbar_retries: usize,
    #[serde(default = "default_true")]
    pub guard: bool,
}

fn default_inflation() -> f64 {
    0.3
}
fn default_domain_inflation() -> f64 {
    0.05
}
fn default_retries() -> usize {
    6
}
fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    pub tolerance: Option<f64>,
    pub max_iterations: Option<usize>,
    /// External solver program, relative to the config file.
    pub backend: Option<PathBuf>,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct AuditSection {
    pub density: f64,
    pub tolerance: f64,
}

impl Default for AuditSection {
    fn default() -> Self {
        let a = AuditConfig::default();
        Self { density: a.density, tolerance: a.tolerance }
    }
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct McSection {
    pub runs: usize,
    pub confidence: f64,
    /// `fixed`, `uniform` or `grid`.
    pub mode: String,
    pub initial_state: Option<Vec<f64>>,
    pub grid: usize,
}

impl Default for McSection {
    fn default() -> Self {
        Self { runs: 10_000, confidence: 0.9, mode: "uniform".into(), initial_state: None, grid: 3 }
    }
}

/// A parsed configuration together with the directory it was read from.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: RunConfig,
    pub base: PathBuf,
    pub sha256: String,
}

pub fn parse_config(text: &str) -> Result<RunConfig> {
    let config: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
    config.validate()?;
    Ok(config)
}

impl RunConfig {
    /// Checks that need no files: ranges, region shapes and dimensions.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        let domain = Domain::new(self.domain.lower.clone(), self.domain.upper.clone())
            .map_err(|e| Error::Config(e.to_string()))?;
        let p = &self.problem;
        if p.horizon < 1 {
            return bad("problem.horizon must be >= 1".into());
        }
        if !(p.epsilon.is_finite() && p.epsilon >= 0.0) {
            return bad(format!("problem.epsilon must be >= 0, got {}", p.epsilon));
        }
        if !(p.bbar.is_finite() && p.bbar > 0.0) {
            return bad(format!("problem.bbar must be > 0, got {}", p.bbar));
        }
        for (name, r) in [("initial", &p.initial), ("unsafe", &p.unsafe_set)] {
            r.validate().map_err(|e| Error::Config(format!("problem.{name}: {e}")))?;
            if let Some(n) = r.dim() {
                if n != domain.dim() {
                    return bad(format!("problem.{name} has dimension {n}, the domain {}", domain.dim()));
                }
            }
        }
        if self.basis.m_per_axis < 1 || self.basis.oversample < 1 {
            return bad("basis needs m_per_axis >= 1 and oversample >= 1".into());
        }
        if !(self.mc.confidence > 0.0 && self.mc.confidence < 1.0) {
            return bad(format!("mc.confidence must lie in (0, 1), got {}", self.mc.confidence));
        }
        Ok(())
    }
}

pub fn load_config(path: &Path) -> Result<LoadedConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    let config: RunConfig = toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    config.validate().map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    Ok(LoadedConfig { config, base, sha256: sha256_hex(text.as_bytes()) })
}

impl LoadedConfig {
    fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base.join(p)
        }
    }

    pub fn domain(&self) -> Result<Domain> {
        Domain::new(self.config.domain.lower.clone(), self.config.domain.upper.clone())
            .map_err(|e| Error::Config(e.to_string()))
    }

    pub fn system(&self) -> Result<SystemSpec> {
        let s = &self.config.system;
        let domain = self.domain()?;
        let mut spec = match s.kind {
            SystemKind::Barr3 => SystemSpec::barr3(domain),
            SystemKind::Dubins => SystemSpec::dubins(domain, Controller::None),
            SystemKind::UserMap => {
                let n = domain.dim();
                SystemSpec {
                    kind: SystemKind::UserMap,
                    tau: 1.0,
                    noise: vec![0.0; n],
                    domain,
                    controller: Controller::None,
                    velocity: 0.0,
                    command: s.command.clone(),
                }
            }
        };
        if let Some(t) = s.tau {
            spec.tau = t;
        }
        if let Some(n) = &s.noise {
            spec.noise = n.clone();
        }
        if let Some(v) = s.velocity {
            spec.velocity = v;
        }
        spec.controller = match s.controller.as_str() {
            "none" => Controller::None,
            "zero" => Controller::Zero,
            "steer" => Controller::Steer(
                s.steer.clone().ok_or_else(|| Error::Config("controller = \"steer\" needs a [system.steer] table".into()))?,
            ),
            "mlp" => {
                let p = s
                    .controller_path
                    .as_ref()
                    .ok_or_else(|| Error::Config("controller = \"mlp\" needs controller_path".into()))?;
                Controller::Mlp(Mlp::load(&self.resolve(p)).map_err(|e| Error::Config(e.to_string()))?)
            }
            other => return Err(Error::Config(format!("unknown controller `{other}`"))),
        };
        spec.validate().map_err(|e| Error::Config(e.to_string()))?;
        Ok(spec)
    }

    fn kernel(&self, k: &KernelSpec, points: impl FnOnce() -> Vec<Vec<f64>>) -> Result<KernelParams> {
        let ls = match &k.lengthscales {
            Lengthscales::Values(v) => v.clone(),
            Lengthscales::Auto(s) if s == "auto" => median_heuristic(&points())?,
            Lengthscales::Auto(s) => return Err(Error::Config(format!("lengthscales must be a list or \"auto\", got `{s}`"))),
        };
        KernelParams::new(k.sigma_f, ls).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn synthesis(&self, data: &SampleSet) -> Result<SynthesisConfig> {
        let c = &self.config;
        let kin = self.kernel(&c.kernel.input, || data.states().map(<[f64]>::to_vec).collect())?;
        let kout = self.kernel(&c.kernel.output, || data.successors().map(<[f64]>::to_vec).collect())?;
        let mut s = SynthesisConfig::new(self.domain()?, c.problem.initial.clone(), c.problem.unsafe_set.clone(), kin, kout);
        s.horizon = c.problem.horizon;
        s.epsilon = c.problem.epsilon;
        s.bbar = c.problem.bbar;
        s.lambda = c.kernel.lambda;
        s.m_per_axis = c.basis.m_per_axis;
        s.oversample = c.basis.oversample;
        s.fit_oversample = c.basis.fit_oversample.unwrap_or(c.basis.oversample);
        s.lattice_budget = c.basis.lattice_budget.unwrap_or(DEFAULT_LATTICE_BUDGET);
        s.inflation = c.problem.inflation;
        s.domain_inflation = c.problem.domain_inflation;
        s.bbar_retries = c.problem.bbar_retries;
        s.guard = c.problem.guard;
        if let Some(t) = &c.tightening {
            s.search = t.clone();
        }
        s.validate().map_err(|e| Error::Config(e.to_string()))?;
        Ok(s)
    }

    pub fn solver(&self) -> Box<dyn LpSolver + Sync> {
        let c = &self.config.solver;
        match &c.backend {
            Some(p) => Box::new(BackendSolver { command: self.resolve(p) }),
            None => {
                let mut o = SimplexOptions::default();
                if let Some(t) = c.tolerance {
                    o.optimality_tol = t;
                }
                if let Some(m) = c.max_iterations {
                    o.max_iterations = m;
                }
                o.seed = self.config.seed;
                Box::new(SimplexSolver::new(o))
            }
        }
    }

    pub fn audit(&self) -> AuditConfig {
        AuditConfig { density: self.config.audit.density, tolerance: self.config.audit.tolerance, ..AuditConfig::default() }
    }
}

#[derive(Debug, Parser)]
#[command(name = "fcbc", version, about = "Fourier barrier certificates from sampled transitions")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Cmd,
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub data: Option<PathBuf>,
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[arg(long, global = true)]
    pub runs: Option<usize>,
    #[arg(long, global = true)]
    pub confidence: Option<f64>,
    /// Certificate file (check, mc, export).
    #[arg(long, global = true)]
    pub cert: Option<PathBuf>,
    /// Number of samples (gen); overrides the config.
    #[arg(long, global = true)]
    pub samples: Option<usize>,
    /// Points per axis of the exported surface.
    #[arg(long, global = true, default_value_t = 100)]
    pub grid: usize,
    /// Fixed coordinates for export, e.g. `x3=0`.
    #[arg(long, global = true)]
    pub slice: Option<String>,
    /// Write one sample trajectory CSV (mc).
    #[arg(long, global = true)]
    pub traj: Option<PathBuf>,
    /// Write the assembled LP in text form (certify).
    #[arg(long, global = true)]
    pub lp: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, Subcommand)]
pub enum Cmd {
    /// Sample a transition dataset.
    Gen,
    /// Synthesize a certificate from a dataset.
    Certify,
    /// Audit a certificate against the exact empirical CME.
    Check,
    /// Monte-Carlo estimate of the safety probability.
    Mc,
    /// Export a barrier surface as CSV.
    Export,
}

fn need<'a>(v: &'a Option<PathBuf>, flag: &str) -> Result<&'a PathBuf> {
    v.as_ref().ok_or_else(|| Error::Config(format!("missing --{flag}")))
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) | Error::Parse(_) | Error::Invalid(_) | Error::Dimension { .. } | Error::Io(_) => 2,
        _ => 1,
    }
}

/// Run a parsed command line; returns the process exit code.
pub fn run(cli: Cli) -> i32 {
    if let Some(t) = cli.threads {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(t.max(1)).build_global();
    }
    let result = match cli.command {
        Cmd::Gen => cmd_gen(&cli),
        Cmd::Certify => cmd_certify(&cli),
        Cmd::Check => cmd_check(&cli),
        Cmd::Mc => cmd_mc(&cli),
        Cmd::Export => cmd_export(&cli),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub fn cmd_gen(cli: &Cli) -> Result<i32> {
    let cfg = load_config(need(&cli.config, "config")?)?;
    let out = need(&cli.out, "out")?;
    let n = cli.samples.unwrap_or(cfg.config.data.samples);
    if n == 0 {
        return Err(Error::Config("the number of samples must be >= 1".into()));
    }
    let seed = cli.seed.unwrap_or(cfg.config.seed);
    let spec = cfg.system()?;
    let data = generate_dataset(&spec, n, seed)?;
    data.write_csv(out)?;
    println!("wrote {n} samples to {}", out.display());
    println!("seed {seed}");
    println!("domain lower {:?} upper {:?}", spec.domain.lower, spec.domain.upper);
    Ok(0)
}

pub fn cmd_certify(cli: &Cli) -> Result<i32> {
    let cfg = load_config(need(&cli.config, "config")?)?;
    let data = SampleSet::read_csv(need(&cli.data, "data")?)?;
    let domain = cfg.domain()?;
    for w in data.validate(&domain)? {
        eprintln!("warning: {w}");
    }
    let mut scfg = cfg.synthesis(&data)?;
    scfg.lp_out = cli.lp.clone();
    let solver = cfg.solver();
    let t0 = Instant::now();
    let syn = match synthesize(&scfg, data, solver.as_ref()) {
        Ok(s) => s,
        Err(Error::Infeasible(msg)) => {
            eprintln!("infeasible: {msg}");
            return Ok(1);
        }
        Err(e) => return Err(e),
    };
    let mut cert = syn.certificate;
    cert.provenance.seed = Some(cli.seed.unwrap_or(cfg.config.seed));
    cert.provenance.config_sha256 = Some(cfg.sha256.clone());
    let d = &syn.diagnostics;
    println!("eta {:.6}", cert.eta);
    println!("c {:.6e}", cert.c);
    println!("T {}", cert.horizon);
    if cert.is_vacuous() {
        println!("p_N 0 (vacuous)");
    } else {
        println!("p_N {:.6}", cert.p_n);
    }
    println!("infinite-horizon bound 1 - eta = {:.6} (valid iff c = 0 exactly; c = {:e})", cert.infinite_horizon_bound, cert.c);
    println!("||b||_2 {:.6} (cap {})", cert.b_norm(), cert.bbar);
    println!(
        "lattice Q {} ({} points), H fit Q {}, H residual {:.3e}, delta {:.3e}",
        cert.provenance.lattice_q, d.lattice_points, cert.provenance.fit_q, cert.provenance.h_residual, cert.provenance.delta
    );
    println!(
        "LP {} rows x {} vars, {} iterations, max residual {:.3e}",
        cert.provenance.lp_rows, cert.provenance.lp_vars, d.iterations, cert.provenance.lp_max_residual
    );
    let t = &cert.provenance.tightening;
    println!("C {:.6}, A {:?}", t.c, t.a);
    for (stage, secs) in &d.stages {
        println!("time {stage} {secs:.3}s");
    }
    println!("time total {:.3}s", t0.elapsed().as_secs_f64());
    if let Some(out) = &cli.out {
        cert.save(out)?;
        println!("wrote certificate to {}", out.display());
    }
    Ok(0)
}

pub fn cmd_check(cli: &Cli) -> Result<i32> {
    let cert = Certificate::load(need(&cli.cert, "cert")?)?;
    let data = SampleSet::read_csv(need(&cli.data, "data")?)?;
    let mut audit = AuditConfig::default();
    if let Some(p) = &cli.config {
        let cfg = load_config(p)?;
        let scfg = cfg.synthesis(&data)?;
        if scfg.kernel_in != cert.kernel_in || scfg.kernel_out != cert.kernel_out || scfg.lambda != cert.lambda {
            return Err(Error::Config("config kernel parameters do not match the certificate".into()));
        }
        audit = cfg.audit();
    }
    if dataset_hash(&data) != cert.provenance.dataset_sha256 {
        return Err(Error::Config("dataset does not match the certificate's dataset hash".into()));
    }
    let model = CmeModel::new(data, cert.kernel_in.clone(), cert.kernel_out.clone(), cert.lambda)?;
    let report = check_certificate(&cert, &model, &audit)?;
    for f in &report.families {
        println!(
            "{:<10} {} worst {:+.6e} violation {:.3e} ({} points)",
            f.name,
            if f.pass { "PASS" } else { "FAIL" },
            f.worst,
            f.violation,
            f.points
        );
    }
    println!("audit grid {:?}, tolerance {:e}", report.grid_per_axis, report.tolerance);
    if let Some(out) = &cli.out {
        std::fs::write(out, serde_json::to_string_pretty(&report).map_err(|e| Error::Parse(e.to_string()))? + "\n")?;
    }
    Ok(if report.pass { 0 } else { 1 })
}

pub fn cmd_mc(cli: &Cli) -> Result<i32> {
    let cfg = load_config(need(&cli.config, "config")?)?;
    let spec = cfg.system()?;
    let mc = &cfg.config.mc;
    let runs = cli.runs.unwrap_or(mc.runs);
    let confidence = cli.confidence.unwrap_or(mc.confidence);
    if runs == 0 {
        return Err(Error::Config("--runs must be >= 1".into()));
    }
    if runs == 1 {
        eprintln!("warning: a single run gives a degenerate interval");
    }
    let seed = cli.seed.unwrap_or(cfg.config.seed);
    let problem = &cfg.config.problem;
    let init = match mc.mode.as_str() {
        "fixed" => InitMode::Fixed(
            mc.initial_state.clone().ok_or_else(|| Error::Config("mode = \"fixed\" needs initial_state".into()))?,
        ),
        "uniform" => InitMode::Uniform(problem.initial.clone()),
        "grid" => InitMode::Grid(problem.initial.clone(), mc.grid),
        other => return Err(Error::Config(format!("unknown mc mode `{other}`"))),
    };
    let report: McReport = monte_carlo(&spec, &init, problem.horizon, runs, confidence, &problem.unsafe_set, seed)?;
    println!("runs {} safe {}", report.runs, report.safe);
    println!("estimate {:.6}", report.estimate);
    println!(
        "chebyshev {:.0}% interval [{:.6}, {:.6}] (half-width {:.6})",
        100.0 * confidence,
        report.lower,
        report.upper,
        report.half_width
    );
    if let Some(x0) = &report.worst_initial {
        println!("worst initial state {x0:?}");
    }
    if let Some(p) = &cli.cert {
        let cert = Certificate::load(p)?;
        let verdict = if report.lower >= cert.p_n { "consistent" } else { "below the certified bound" };
        println!("certified p_N {:.6}: estimate interval is {verdict}", cert.p_n);
    }
    if let Some(path) = &cli.traj {
        let mut rng = stream_rng(seed, STREAM_MC, u64::MAX);
        let x0 = match &init {
            InitMode::Fixed(x) => x.clone(),
            _ => report.worst_initial.clone().unwrap_or_else(|| {
                problem.initial.bounding_box(&spec.domain).map(|(l, h)| l.iter().zip(&h).map(|(a, b)| 0.5 * (a + b)).collect()).unwrap_or_else(|| spec.domain.center())
            }),
        };
        let (traj, _) = rollout(&spec, &x0, problem.horizon, Some(&problem.unsafe_set), &mut rng)?;
        write_trajectory_csv(path, &traj, Some(&problem.unsafe_set))?;
    }
    if let Some(out) = &cli.out {
        std::fs::write(out, serde_json::to_string_pretty(&report).map_err(|e| Error::Parse(e.to_string()))? + "\n")?;
    }
    Ok(0)
}

/// Parse `x3=0,x4=1.5` into zero-based `(axis, value)` pairs.
pub fn parse_slice(s: &str) -> Result<Vec<(usize, f64)>> {
    s.split(',')
        .filter(|p| !p.trim().is_empty())
        .map(|p| {
            let (k, v) = p.split_once('=').ok_or_else(|| Error::Config(format!("bad slice `{p}`, expected x<i>=<value>")))?;
            let axis: usize = k
                .trim()
                .strip_prefix('x')
                .and_then(|a| a.parse().ok())
                .filter(|a| *a >= 1)
                .ok_or_else(|| Error::Config(format!("bad slice axis `{k}`")))?;
            let value: f64 = v.trim().parse().map_err(|_| Error::Config(format!("bad slice value `{v}`")))?;
            Ok((axis - 1, value))
        })
        .collect()
}

pub fn cmd_export(cli: &Cli) -> Result<i32> {
    let cert = Certificate::load(need(&cli.cert, "cert")?)?;
    let out = need(&cli.out, "out")?;
    let slice = cli.slice.as_deref().map(parse_slice).transpose()?.unwrap_or_default();
    let (axes, pts) = barrier_surface(&cert, cli.grid, &slice).map_err(|e| Error::Config(e.to_string()))?;
    write_surface_csv(out, &cert, &axes, &pts)?;
    println!("wrote {} points to {}", pts.len(), out.display());
    Ok(0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slice_parsing() {
        assert_eq!(parse_slice("x3=0").unwrap(), vec![(2, 0.0)]);
        assert_eq!(parse_slice("x1=1.5,x2=-2").unwrap(), vec![(0, 1.5), (1, -2.0)]);
        assert!(parse_slice("y=1").is_err());
        assert!(parse_slice("x0=1").is_err());
    }

    #[test]
    fn config_errors_have_line_numbers() {
        let text = "seed = 1\n[system]\nkind = \"barr3\"\nbogus = 3\n";
        let msg = parse_config(text).unwrap_err().to_string();
        assert!(msg.contains("line 4"), "{msg}");
    }
}
