#![allow(dead_code)]

use std::path::PathBuf;

use fcbc::bounds::{a_coefficient, c_coefficient, global_bounds, local_bounds, shell_labels, SearchConfig};
use fcbc::certify::{check_certificate, monte_carlo, synthesize, Certificate, InitMode, McReport, ValidationReport};
use fcbc::cli::{load_config, LoadedConfig};
use fcbc::geometry::{build_lattice, inflate_region, lattice_mask, Domain, Lattice, Region};
use fcbc::kernels::{CmeModel, KernelParams, SampleSet};
use fcbc::lp::{LpModel, Relation};
use fcbc::solver::{LpSolver, SimplexSolver, Status};
use fcbc::spectral::{barrier_on_lattice, build_basis, project_fields, SpectralBasis};
use fcbc::systems::generate_dataset;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn configs_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

pub fn config(name: &str) -> LoadedConfig {
    load_config(&configs_dir().join(name)).unwrap()
}

// ---------------------------------------------------------------------------
// Bounds

#[derive(Debug, Default)]
pub struct BoundsReport {
    pub cases: usize,
    pub global_violations: usize,
    pub local_violations: usize,
    pub local_cases: usize,
    /// Largest excess of a dense-grid extreme over its interval (<= 0 when sound).
    pub worst_excess: f64,
}

fn random_basis(rng: &mut ChaCha8Rng, n: usize, m: usize) -> SpectralBasis {
    let lower: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..0.0)).collect();
    let upper: Vec<f64> = lower.iter().map(|l| l + rng.random_range(1.0..3.0)).collect();
    let domain = Domain::new(lower, upper).unwrap();
    let ls: Vec<f64> = (0..n).map(|i| domain.width(i) * rng.random_range(0.1..0.4)).collect();
    build_basis(m, &KernelParams::new(1.0, ls).unwrap(), &domain).unwrap()
}

fn random_box_in(rng: &mut ChaCha8Rng, lattice: &Lattice) -> Region {
    let d = &lattice.domain;
    let mut lower = Vec::new();
    let mut upper = Vec::new();
    for i in 0..d.dim() {
        let w = d.width(i);
        let len = rng.random_range(0.15..0.5) * w;
        let lo = d.lower[i] + rng.random_range(0.05..0.95 - len / w) * w;
        lower.push(lo);
        upper.push(lo + len);
    }
    Region::boxed(lower, upper).unwrap()
}

fn extremes(values: impl Iterator<Item = f64>) -> Option<(f64, f64)> {
    values.fold(None, |acc, v| match acc {
        None => Some((v, v)),
        Some((lo, hi)) => Some((lo.min(v), hi.max(v))),
    })
}

/// Random trigonometric polynomials (feature dimension up to 49, n <= 2)
/// against the global and local lattice bounds on a dense grid of about
/// `dense_points` points.
pub fn bounds_suite(cases: usize, dense_points: usize, seed: u64) -> BoundsReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = BoundsReport { worst_excess: f64::NEG_INFINITY, ..Default::default() };
    let search = SearchConfig::default();
    for case in 0..cases {
        let n = 1 + case % 2;
        let m = if n == 1 { rng.random_range(2..=25) } else { rng.random_range(2..=5) };
        let os = [1, 2, 4][rng.random_range(0..3)];
        let basis = random_basis(&mut rng, n, m);
        let lattice = build_lattice(&basis, os).unwrap();
        let b: Vec<f64> = (0..basis.feature_dim()).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let coarse = barrier_on_lattice(&b, &basis, &lattice).unwrap();
        let qd = (dense_points as f64).powf(1.0 / n as f64).round() as usize;
        let dense = Lattice::new(lattice.domain.clone(), qd, usize::MAX).unwrap();
        let fine = barrier_on_lattice(&b, &basis, &dense).unwrap();
        let c = c_coefficient(basis.f_max, lattice.q, n).unwrap();

        let (lo, hi) = extremes(coarse.iter().copied()).unwrap();
        let (glo, ghi) = global_bounds(lo, hi, c);
        let (flo, fhi) = extremes(fine.iter().copied()).unwrap();
        let tol = 1e-9 * (1.0 + ghi.abs().max(glo.abs()));
        let excess = (fhi - ghi).max(glo - flo);
        report.worst_excess = report.worst_excess.max(excess);
        if excess > tol {
            report.global_violations += 1;
        }
        report.cases += 1;

        let s = random_box_in(&mut rng, &lattice);
        let inflated = inflate_region(&s, 0.3, None).unwrap();
        let mask = lattice_mask(&lattice, &inflated);
        if !mask.iter().any(|v| *v) {
            continue;
        }
        let a = a_coefficient(&lattice, &mask, &s, None, basis.f_max, &search).unwrap();
        let labels = shell_labels(&lattice, &mask, a.len());
        let inside = extremes((0..lattice.len()).filter(|&i| mask[i]).map(|i| coarse[i])).unwrap();
        let shells: Vec<Option<(f64, f64)>> = (1..=a.len())
            .map(|k| extremes((0..lattice.len()).filter(|&i| labels[i] as usize == k).map(|i| coarse[i])))
            .collect();
        let (llo, lhi) = local_bounds(inside, &shells, c, &a);
        let Some((slo, shi)) = extremes((0..dense.len()).filter(|&i| s.contains(dense.point(i))).map(|i| fine[i]))
        else {
            continue;
        };
        let excess = (shi - lhi).max(llo - slo);
        report.worst_excess = report.worst_excess.max(excess);
        if excess > tol {
            report.local_violations += 1;
        }
        report.local_cases += 1;
    }
    report
}

// ---------------------------------------------------------------------------
// FFT projection

/// Residual of projecting fields that are themselves trigonometric
/// polynomials of degree <= f_max onto the basis.
pub fn projection_residual(seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for (n, m) in [(1, 4), (2, 3), (2, 4), (3, 2)] {
        let basis = random_basis(&mut rng, n, m);
        let lattice = build_lattice(&basis, 2).unwrap();
        let d = basis.feature_dim();
        let h_true = DMatrix::from_fn(d, d, |_, _| rng.sample::<f64, _>(StandardNormal));
        let values = basis.feature_matrix(lattice.points()) * &h_true;
        let fit = project_fields(&basis, &lattice, &values).unwrap();
        let recon = basis.feature_matrix(lattice.points()) * &fit.h;
        worst = worst.max((recon - values).abs().max()).max(fit.residual);
    }
    worst
}

// ---------------------------------------------------------------------------
// Solver oracle

pub struct RandomLp {
    pub model: LpModel,
    pub rows: Vec<(Vec<f64>, Relation, f64)>,
    pub cost: Vec<f64>,
    pub bound: f64,
}

pub fn random_lp(rng: &mut ChaCha8Rng) -> RandomLp {
    let n = rng.random_range(1..=3);
    let m = rng.random_range(1..=8);
    let bound = 10.0;
    let mut model = LpModel::new();
    let vars: Vec<usize> = (0..n).map(|j| model.add_var(format!("x{j}"), Some(-bound), Some(bound))).collect();
    let cost: Vec<f64> = (0..n).map(|_| rng.random_range(-5..=5) as f64).collect();
    model.objective = vars.iter().zip(&cost).map(|(v, c)| (*v, *c)).collect();
    let mut rows = Vec::new();
    for i in 0..m {
        let coefs: Vec<f64> = (0..n).map(|_| rng.random_range(-5..=5) as f64).collect();
        let rel = if rng.random_bool(0.5) { Relation::Le } else { Relation::Ge };
        let rhs = rng.random_range(-20..=20) as f64;
        let terms: Vec<(usize, f64)> = vars.iter().zip(&coefs).map(|(v, c)| (*v, *c)).collect();
        model.add_row(format!("r{i}"), &terms, rel, rhs);
        rows.push((coefs, rel, rhs));
    }
    RandomLp { model, rows, cost, bound }
}

fn solve_square(a: &[Vec<f64>], b: &[f64]) -> Option<Vec<f64>> {
    let n = b.len();
    let m = DMatrix::from_fn(n, n, |i, j| a[i][j]);
    let lu = m.lu();
    if lu.determinant().abs() < 1e-9 {
        return None;
    }
    lu.solve(&nalgebra::DVector::from_column_slice(b)).map(|v| v.iter().copied().collect())
}

/// Optimum by enumerating every vertex of the bounded polytope; `None` when
/// infeasible.
pub fn vertex_enumeration(lp: &RandomLp) -> Option<f64> {
    let n = lp.cost.len();
    let mut planes: Vec<(Vec<f64>, f64)> = lp.rows.iter().map(|(a, _, r)| (a.clone(), *r)).collect();
    for j in 0..n {
        let mut e = vec![0.0; n];
        e[j] = 1.0;
        planes.push((e.clone(), lp.bound));
        planes.push((e, -lp.bound));
    }
    let feasible = |x: &[f64]| {
        x.iter().all(|v| v.abs() <= lp.bound + 1e-9)
            && lp.rows.iter().all(|(a, rel, r)| {
                let s: f64 = a.iter().zip(x).map(|(p, q)| p * q).sum();
                match rel {
                    Relation::Le => s <= r + 1e-9,
                    Relation::Ge => s >= r - 1e-9,
                }
            })
    };
    let mut best: Option<f64> = None;
    let mut idx: Vec<usize> = (0..n).collect();
    loop {
        let a: Vec<Vec<f64>> = idx.iter().map(|&i| planes[i].0.clone()).collect();
        let b: Vec<f64> = idx.iter().map(|&i| planes[i].1).collect();
        if let Some(x) = solve_square(&a, &b) {
            if feasible(&x) {
                let v: f64 = lp.cost.iter().zip(&x).map(|(c, v)| c * v).sum();
                best = Some(best.map_or(v, |b: f64| b.min(v)));
            }
        }
        // Next combination of n planes.
        let k = planes.len();
        let mut i = n;
        while i > 0 && idx[i - 1] == k - n + i - 1 {
            i -= 1;
        }
        if i == 0 {
            break;
        }
        idx[i - 1] += 1;
        for j in i..n {
            idx[j] = idx[j - 1] + 1;
        }
    }
    best
}

#[derive(Debug, Default)]
pub struct OracleReport {
    pub cases: usize,
    pub optimal: usize,
    pub mismatches: usize,
    pub max_error: f64,
    pub duality_gaps: usize,
}

pub fn solver_oracle(cases: usize, seed: u64) -> OracleReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let solver = SimplexSolver::default();
    let mut r = OracleReport::default();
    for _ in 0..cases {
        let lp = random_lp(&mut rng);
        let sol = solver.solve(&lp.model).unwrap();
        r.cases += 1;
        match vertex_enumeration(&lp) {
            None => {
                if sol.status != Status::Infeasible {
                    r.mismatches += 1;
                }
            }
            Some(best) => {
                r.optimal += 1;
                if sol.status != Status::Optimal {
                    r.mismatches += 1;
                    continue;
                }
                let err = (sol.objective - best).abs();
                r.max_error = r.max_error.max(err);
                if err > 1e-6 || sol.max_residual > 1e-7 {
                    r.mismatches += 1;
                }
                if let Some(d) = sol.dual_bound {
                    if d > sol.objective + 1e-6 {
                        r.duality_gaps += 1;
                    }
                }
            }
        }
    }
    r
}

// ---------------------------------------------------------------------------
// End-to-end

pub struct ChainResult {
    pub certificate: Certificate,
    pub check: ValidationReport,
    pub mc: McReport,
}

/// Generate data with `seed`, synthesize, audit with the exact CME and run
/// Monte Carlo from the initial set.
pub fn soundness_chain(cfg: &LoadedConfig, seed: u64) -> fcbc::Result<ChainResult> {
    let spec = cfg.system()?;
    let data = generate_dataset(&spec, cfg.config.data.samples, seed)?;
    let scfg = cfg.synthesis(&data)?;
    let syn = synthesize(&scfg, data.clone(), cfg.solver().as_ref())?;
    let cert = syn.certificate;
    let model = CmeModel::new(data, cert.kernel_in.clone(), cert.kernel_out.clone(), cert.lambda)?;
    let check = check_certificate(&cert, &model, &cfg.audit())?;
    let p = &cfg.config.problem;
    let mc = monte_carlo(
        &spec,
        &InitMode::Uniform(p.initial.clone()),
        p.horizon,
        cfg.config.mc.runs,
        cfg.config.mc.confidence,
        &p.unsafe_set,
        seed,
    )?;
    Ok(ChainResult { certificate: cert, check, mc })
}

/// `(p_N, ||b||)` for each epsilon on one dataset.
pub fn epsilon_sweep(cfg: &LoadedConfig, eps: &[f64]) -> fcbc::Result<Vec<(f64, f64)>> {
    let spec = cfg.system()?;
    let data: SampleSet = generate_dataset(&spec, cfg.config.data.samples, cfg.config.seed)?;
    let solver = cfg.solver();
    eps.iter()
        .map(|&e| {
            let mut scfg = cfg.synthesis(&data)?;
            scfg.epsilon = e;
            let cert = synthesize(&scfg, data.clone(), solver.as_ref())?.certificate;
            Ok((cert.p_n, cert.b_norm()))
        })
        .collect()
}

pub fn dense_lattice(domain: &Domain, q: usize) -> Lattice {
    Lattice::new(domain.clone(), q, usize::MAX).unwrap()
}

// ---------------------------------------------------------------------------
// Invariants

/// Largest deviation of `||phi(x)||` from `||phi(0)||` over random bases and
/// points scattered well outside the domain.
pub fn feature_norm_spread(points: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for (n, m) in [(1, 9), (2, 5), (3, 3)] {
        let basis = random_basis(&mut rng, n, m);
        let norm = |x: &[f64]| basis.features(x).iter().map(|v| v * v).sum::<f64>().sqrt();
        let reference = norm(&vec![0.0; n]);
        for _ in 0..points {
            let x: Vec<f64> = (0..n).map(|_| rng.random_range(-50.0..50.0)).collect();
            worst = worst.max((norm(&x) - reference).abs());
        }
    }
    worst
}

/// Inside and outside index sets are disjoint, cover the lattice and agree
/// with the mask.
pub fn lattice_partition_holds(trials: usize, seed: u64) -> bool {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..trials).all(|t| {
        let basis = random_basis(&mut rng, 1 + t % 3, 3);
        let lattice = build_lattice(&basis, 2).unwrap();
        let region = Region::union(vec![
            random_box_in(&mut rng, &lattice),
            Region::ball(lattice.domain.center(), rng.random_range(0.1..0.6)).unwrap(),
        ])
        .unwrap();
        let (inside, outside) = fcbc::geometry::filter_lattice(&lattice, &region);
        let mask = lattice_mask(&lattice, &region);
        let mut seen = vec![0u8; lattice.len()];
        inside.iter().chain(&outside).for_each(|&i| seen[i] += 1);
        seen.iter().all(|&c| c == 1)
            && inside.iter().all(|&i| mask[i])
            && outside.iter().all(|&i| !mask[i])
    })
}

fn random_samples(rng: &mut ChaCha8Rng, n: usize, count: usize) -> SampleSet {
    let xs: Vec<Vec<f64>> = (0..count).map(|_| (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
    let ys: Vec<Vec<f64>> = xs.iter().map(|x| x.iter().map(|v| 0.9 * v).collect()).collect();
    SampleSet::from_rows(&xs, &ys).unwrap()
}

/// With `lambda = 0` the CME weights at a sample state are the unit vector
/// of that sample. Returns the worst entry error.
pub fn cme_interpolation_error(seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for n in 1..=3 {
        let samples = random_samples(&mut rng, n, 12);
        let k = KernelParams::new(1.0, vec![0.3; n]).unwrap();
        let model = CmeModel::new(samples.clone(), k.clone(), k, 0.0).unwrap();
        for i in 0..samples.len() {
            let w = model.weights(samples.state(i)).unwrap();
            for (j, wj) in w.iter().enumerate() {
                let e = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((wj - e).abs());
            }
        }
    }
    worst
}

/// `min eig(K + N lambda I) - N lambda`; nonnegative up to round-off even
/// with duplicated samples.
pub fn gram_floor_margin(lambda: f64, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = f64::INFINITY;
    for n in 1..=3 {
        let mut xs: Vec<Vec<f64>> =
            (0..60).map(|_| (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
        xs.extend(xs[..10].to_vec());
        let ys = xs.clone();
        let samples = SampleSet::from_rows(&xs, &ys).unwrap();
        let k = KernelParams::new(1.0, vec![0.8; n]).unwrap();
        let model = CmeModel::new(samples, k.clone(), k, lambda).unwrap();
        let g = model.regularized_gram();
        let floor = g.nrows() as f64 * lambda;
        let min = g.symmetric_eigenvalues().min();
        worst = worst.min(min - floor);
    }
    worst
}

/// Datasets, Monte Carlo and synthesis repeat exactly for a fixed seed.
pub fn deterministic_by_seed(cfg: &LoadedConfig, seed: u64) -> bool {
    let spec = cfg.system().unwrap();
    let a = generate_dataset(&spec, 300, seed).unwrap();
    let b = generate_dataset(&spec, 300, seed).unwrap();
    let c = generate_dataset(&spec, 300, seed + 1).unwrap();
    let p = &cfg.config.problem;
    let init = InitMode::Uniform(p.initial.clone());
    let mc = |s| monte_carlo(&spec, &init, p.horizon, 500, 0.9, &p.unsafe_set, s).unwrap().safe;
    a == b && a != c && mc(seed) == mc(seed)
}
