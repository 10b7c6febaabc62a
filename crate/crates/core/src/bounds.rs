//! Lattice-based bounds on trigonometric polynomials.
//!
//! For a polynomial `B` of degree at most `f` per axis, sampled on the
//! `Q^n` lattice, de la Vallee-Poussin interpolation gives
//! `B(x) - k = (1/Q^n) sum_l (B(x_l) - k) D(x - x_l)` for any constant `k`,
//! with `D = D_{f, Q-f}`. With `k` the midpoint of the lattice range this
//! yields the global bound `|B - k| <= C R`.
//!
//! Locally on a set `S` whose inflation `S'` contains the lattice points
//! treated as inside, the remaining points are split into shells by lattice
//! distance from `S'`, and splitting the sum gives
//! `|B(x) - k| <= C R_S + sum_k A_k (R_k - R_S)` where `R_S` bounds the
//! deviation on `S'`, `R_k >= R_S` bounds it on shell `k` and
//! `A_k >= sup_{x in S} (1/Q^n) sum_{x_l in shell k} |D(x - x_l)|`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::f64::consts::PI;

use crate::geometry::{Domain, Lattice, Region};
use crate::{Error, Result};

/// `C = (1 - 2 f / Q)^(-n/2)`.
pub fn c_coefficient(f_max: usize, q: usize, n: usize) -> Result<f64> {
    if q < 2 * f_max + 1 {
        return Err(Error::Invalid(format!("Q = {q} is below the Nyquist minimum {}", 2 * f_max + 1)));
    }
    Ok((1.0 - 2.0 * f_max as f64 / q as f64).powf(-(n as f64) / 2.0))
}

/// One-dimensional factor `sin((b+a)z/2) sin((b-a)z/2) / ((b-a) sin^2(z/2))`.
pub fn vallee_poussin_1d(z: f64, a: usize, b: usize) -> f64 {
    let (a, b) = (a as f64, b as f64);
    let t = z - 2.0 * PI * (z / (2.0 * PI)).round();
    let s = (0.5 * t).sin();
    if s.abs() < 1e-7 {
        let t2 = t * t;
        let sp = b + a;
        let sm = b - a;
        let c2 = (sp * sp + sm * sm - 2.0) / 24.0;
        let c4 = (3.0 * sp.powi(4) + 3.0 * sm.powi(4) + 10.0 * sp * sp * sm * sm - 20.0 * (sp * sp + sm * sm) + 24.0)
            / 5760.0;
        return sp * (1.0 - c2 * t2 + c4 * t2 * t2);
    }
    ((b + a) * t / 2.0).sin() * ((b - a) * t / 2.0).sin() / ((b - a) * s * s)
}

/// Product kernel `D_{a,b}(z)` over all axes; `D(0) = (a+b)^n`.
pub fn vallee_poussin(z: &[f64], a: usize, b: usize) -> f64 {
    assert!(b > a, "Vallee-Poussin kernel needs b > a");
    z.iter().map(|zi| vallee_poussin_1d(*zi, a, b)).product()
}

/// Search settings for the local coefficients `A_k`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SearchConfig {
    /// Candidate grid resolution as a multiple of the lattice resolution.
    pub refine: usize,
    /// Lattice points per side summed exactly; the rest is bounded in bulk.
    pub window: usize,
    /// Multiplicative margin applied to the best value found.
    pub safety: f64,
    /// Number of best candidates per shell refined by coordinate descent.
    pub polish_starts: usize,
    /// Upper limit on candidate points; the refinement is reduced to fit but
    /// never below 2, since lattice-aligned points carry no outside mass.
    pub max_candidates: usize,
    /// Number of outside shells; the last one collects everything farther.
    pub shells: usize,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self { refine: 8, window: 8, safety: 1.05, polish_starts: 8, max_candidates: 400_000, shells: 4 }
    }
}

struct AxisTables {
    q: usize,
    a: usize,
    b: usize,
    lower: Vec<f64>,
    width: Vec<f64>,
}

impl AxisTables {
    fn new(lattice: &Lattice, f_max: usize) -> Self {
        let dom = &lattice.domain;
        Self {
            q: lattice.q,
            a: f_max,
            b: lattice.q - f_max,
            lower: dom.lower.clone(),
            width: (0..dom.dim()).map(|i| dom.width(i)).collect(),
        }
    }

    fn theta(&self, x: &[f64], i: usize) -> f64 {
        // Lattice coordinates span [0, 2 pi) over the periodic domain.
        2.0 * PI * (x[i] - self.lower[i]) / self.width[i]
    }
}

/// Shell label per lattice point: 0 inside, `d` for periodic Chebyshev
/// lattice distance `d < shells` from the inside set, `shells` beyond.
pub fn shell_labels(lattice: &Lattice, inside: &[bool], shells: usize) -> Vec<u8> {
    let shells = shells.clamp(1, 200);
    let n = lattice.dim();
    let q = lattice.q as i64;
    let unset = u8::MAX;
    let mut labels: Vec<u8> = inside.iter().map(|v| if *v { 0 } else { unset }).collect();
    if !inside.iter().any(|v| *v) {
        return vec![shells as u8; inside.len()];
    }
    let offsets: Vec<Vec<i64>> = (0..3usize.pow(n as u32))
        .map(|mut k| {
            (0..n)
                .map(|_| {
                    let o = (k % 3) as i64 - 1;
                    k /= 3;
                    o
                })
                .collect()
        })
        .filter(|o: &Vec<i64>| o.iter().any(|v| *v != 0))
        .collect();
    for d in 1..shells {
        let prev = (d - 1) as u8;
        let next: Vec<usize> = (0..labels.len())
            .into_par_iter()
            .filter(|&i| labels[i] == unset)
            .filter(|&i| {
                let m = lattice.multi_index(i);
                offsets.iter().any(|o| {
                    let nb: Vec<usize> = (0..n).map(|a| (m[a] as i64 + o[a]).rem_euclid(q) as usize).collect();
                    labels[lattice.flat_index(&nb)] == prev
                })
            })
            .collect();
        for i in next {
            labels[i] = d as u8;
        }
    }
    for v in labels.iter_mut() {
        if *v == unset {
            *v = shells as u8;
        }
    }
    labels
}

/// Per-shell sums `(1/Q^n) sum_{label = k} |D(x - x_l)|` for `k = 1..=shells`
/// at `x`; everything beyond the window is added to the last shell.
fn shell_mass(t: &AxisTables, labels: &[u8], shells: usize, x: &[f64], window: usize) -> Vec<f64> {
    let n = x.len();
    let q = t.q;
    let w = window.min((q - 1) / 2);
    let span = 2 * w + 1;
    let mut totals = vec![0.0; n];
    let mut win_idx = vec![0usize; n * span];
    let mut win_val = vec![0.0; n * span];
    for i in 0..n {
        let th = t.theta(x, i);
        let mut total = 0.0;
        for l in 0..q {
            total += vallee_poussin_1d(th - 2.0 * PI * l as f64 / q as f64, t.a, t.b).abs();
        }
        totals[i] = total;
        let base = (th * q as f64 / (2.0 * PI)).round() as i64;
        for k in 0..span {
            let l = (base + k as i64 - w as i64).rem_euclid(q as i64) as usize;
            win_idx[i * span + k] = l;
            win_val[i * span + k] = vallee_poussin_1d(th - 2.0 * PI * l as f64 / q as f64, t.a, t.b).abs();
        }
    }
    let win_total: f64 = (0..n).map(|i| win_val[i * span..(i + 1) * span].iter().sum::<f64>()).product();
    let mut out = vec![0.0; shells + 1];
    let mut k = vec![0usize; n];
    let count = span.pow(n as u32);
    for _ in 0..count {
        let mut flat = 0;
        let mut prod = 1.0;
        for i in 0..n {
            flat = flat * q + win_idx[i * span + k[i]];
            prod *= win_val[i * span + k[i]];
        }
        out[labels[flat] as usize] += prod;
        for i in (0..n).rev() {
            k[i] += 1;
            if k[i] < span {
                break;
            }
            k[i] = 0;
        }
    }
    out[shells] += (totals.iter().product::<f64>() - win_total).max(0.0);
    let scale = (q as f64).powi(n as i32);
    out[1..].iter().map(|v| v / scale).collect()
}

/// Upper estimates of `A_k = sup_{x in region} (1/Q^n) sum_{label = k} |D(x - x_l)|`
/// for the shells of [`shell_labels`] (index `k - 1`).
///
/// `inside` is the membership mask of the inflated region over the lattice;
/// candidates are taken from `region` (intersected with `clip` when given) on
/// a grid, and the best few per shell are polished by coordinate descent
/// before applying the safety factor. Every evaluated point is a valid point
/// of the region, so each component is a lower estimate of the true
/// supremum; the safety factor covers the gap.
pub fn a_coefficient(
    lattice: &Lattice,
    inside: &[bool],
    region: &Region,
    clip: Option<&Domain>,
    f_max: usize,
    search: &SearchConfig,
) -> Result<Vec<f64>> {
    if lattice.is_empty() {
        return Err(Error::Invalid("empty lattice".into()));
    }
    if inside.len() != lattice.len() {
        return Err(Error::Dimension { expected: lattice.len(), got: inside.len() });
    }
    let shells = search.shells.clamp(1, 200);
    if inside.iter().all(|v| *v) {
        return Ok(vec![0.0; shells]);
    }
    let q = lattice.q;
    if q < 2 * f_max + 1 {
        return Err(Error::Invalid("lattice below the Nyquist minimum".into()));
    }
    let n = lattice.dim();
    let t = AxisTables::new(lattice, f_max);
    let labels = shell_labels(lattice, inside, shells);
    let Some((mut lo, mut hi)) = region.bounding_box(&lattice.domain) else {
        return Ok(vec![0.0; shells]);
    };
    if let Some(c) = clip {
        for i in 0..n {
            lo[i] = lo[i].max(c.lower[i]);
            hi[i] = hi[i].min(c.upper[i]);
            if lo[i] > hi[i] {
                return Ok(vec![0.0; shells]);
            }
        }
    }
    let member = |p: &[f64]| region.contains(p) && clip.is_none_or(|c| c.contains(p));
    let mut refine = search.refine.max(2);
    let axis_counts = |r: usize| -> Vec<usize> {
        (0..n)
            .map(|i| {
                let h = lattice.spacing(i) / r as f64;
                ((hi[i] - lo[i]) / h).floor() as usize + 1
            })
            .collect()
    };
    while refine > 2 && axis_counts(refine).iter().product::<usize>() > search.max_candidates {
        refine -= 1;
    }
    let counts = axis_counts(refine);
    let total: usize = counts.iter().product();
    let steps: Vec<f64> = (0..n).map(|i| lattice.spacing(i) / refine as f64).collect();
    let point = |mut k: usize| -> Vec<f64> {
        let mut p = vec![0.0; n];
        for i in (0..n).rev() {
            p[i] = (lo[i] + (k % counts[i]) as f64 * steps[i]).min(hi[i]);
            k /= counts[i];
        }
        p
    };
    let eval = |p: &[f64]| shell_mass(&t, &labels, shells, p, search.window);
    let scored: Vec<(Vec<f64>, usize)> = (0..total)
        .into_par_iter()
        .filter_map(|k| {
            let p = point(k);
            member(&p).then(|| (eval(&p), k))
        })
        .collect();
    if scored.is_empty() {
        return Ok(vec![0.0; shells]);
    }
    let mut best = vec![0.0f64; shells];
    for (v, _) in &scored {
        for s in 0..shells {
            best[s] = best[s].max(v[s]);
        }
    }
    // Starts: the top candidates for each shell and for the total.
    let mut starts: Vec<(usize, usize)> = Vec::new();
    for s in 0..=shells {
        let key = |v: &Vec<f64>| if s == shells { v.iter().sum::<f64>() } else { v[s] };
        let mut order: Vec<usize> = (0..scored.len()).collect();
        order.sort_by(|&x, &y| key(&scored[y].0).total_cmp(&key(&scored[x].0)).then(scored[x].1.cmp(&scored[y].1)));
        for &j in order.iter().take(search.polish_starts.max(1)) {
            if s < shells && scored[j].0[s] <= 0.0 {
                continue;
            }
            starts.push((s, scored[j].1));
        }
    }
    let polished: Vec<Vec<f64>> = starts
        .par_iter()
        .map(|&(s, k)| {
            let key = |v: &[f64]| if s == shells { v.iter().sum::<f64>() } else { v[s] };
            let mut p = point(k);
            let mut cur = eval(&p);
            let mut seen = cur.clone();
            let mut h: Vec<f64> = steps.iter().map(|st| 0.5 * st).collect();
            for _ in 0..12 {
                let mut improved = true;
                while improved {
                    improved = false;
                    for i in 0..n {
                        for sign in [-1.0, 1.0] {
                            let mut c = p.clone();
                            c[i] += sign * h[i];
                            if !member(&c) {
                                continue;
                            }
                            let v = eval(&c);
                            for j in 0..shells {
                                seen[j] = seen[j].max(v[j]);
                            }
                            if key(&v) > key(&cur) {
                                cur = v;
                                p = c;
                                improved = true;
                            }
                        }
                    }
                }
                h.iter_mut().for_each(|v| *v *= 0.5);
            }
            seen
        })
        .collect();
    for v in polished {
        for s in 0..shells {
            best[s] = best[s].max(v[s]);
        }
    }
    Ok(best.iter().map(|v| v * search.safety).collect())
}

/// Exhaustive reference for the shell sums at a single point (all lattice
/// points summed); index `k - 1` holds shell `k`.
pub fn shell_mass_exact(lattice: &Lattice, labels: &[u8], shells: usize, f_max: usize, x: &[f64]) -> Vec<f64> {
    let n = lattice.dim();
    let q = lattice.q;
    let theta: Vec<f64> = (0..n).map(|i| 2.0 * PI * (x[i] - lattice.domain.lower[i]) / lattice.domain.width(i)).collect();
    let mut s = vec![0.0; shells + 1];
    for (idx, &lab) in labels.iter().enumerate() {
        if lab == 0 {
            continue;
        }
        let l = lattice.multi_index(idx);
        let z: Vec<f64> = (0..n).map(|i| theta[i] - 2.0 * PI * l[i] as f64 / q as f64).collect();
        s[lab as usize] += vallee_poussin(&z, f_max, q - f_max).abs();
    }
    let scale = (q as f64).powi(n as i32);
    s[1..].iter().map(|v| v / scale).collect()
}

/// Exhaustive outside sum `(1/Q^n) sum_{l not inside} |D(x - x_l)|` at `x`.
pub fn outside_mass_exact(lattice: &Lattice, inside: &[bool], f_max: usize, x: &[f64]) -> f64 {
    let labels: Vec<u8> = inside.iter().map(|v| u8::from(!*v)).collect();
    shell_mass_exact(lattice, &labels, 1, f_max, x)[0]
}

/// Global interval from the lattice range: `mid -+ C (max - min) / 2`.
pub fn global_bounds(min: f64, max: f64, c: f64) -> (f64, f64) {
    let mid = 0.5 * (max + min);
    let r = 0.5 * (max - min);
    (mid - c * r, mid + c * r)
}

/// Interval containing `B` on `S` given lattice extremes on the inflated
/// set and on each outside shell (`None` for an empty shell), with `a[k]`
/// the coefficient of shell `k + 1`. The last shell also absorbs the bulk
/// tail, so its radius covers every shell.
pub fn local_bounds(inside: (f64, f64), shells: &[Option<(f64, f64)>], c: f64, a: &[f64]) -> (f64, f64) {
    let (lo, hi) = inside;
    let mid = 0.5 * (hi + lo);
    let rs = 0.5 * (hi - lo);
    let radii: Vec<f64> =
        shells.iter().map(|s| s.map_or(rs, |(olo, ohi)| rs.max(ohi - mid).max(mid - olo))).collect();
    let far = radii.iter().copied().fold(rs, f64::max);
    let k = a.len();
    let r = c * rs
        + a.iter()
            .enumerate()
            .map(|(i, ai)| ai * (if i + 1 == k { far } else { radii.get(i).copied().unwrap_or(rs) } - rs))
            .sum::<f64>();
    (mid - r, mid + r)
}

/// `C` and the per-region `A` values fed into LP assembly.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TighteningCoefficients {
    pub c: f64,
    /// Per region, `A_k` for shells `1..=K`.
    pub a: BTreeMap<String, Vec<f64>>,
    pub f_max: usize,
    pub q: usize,
    pub n: usize,
}

impl TighteningCoefficients {
    pub fn validate(&self) -> Result<()> {
        if !(self.c >= 1.0) {
            return Err(Error::Invalid(format!("C = {} must be >= 1", self.c)));
        }
        for (name, shells) in &self.a {
            if shells.is_empty() || shells.iter().any(|v| !(*v >= 0.0)) {
                return Err(Error::Invalid(format!("A[{name}] = {shells:?} must be non-empty and >= 0")));
            }
            let a: f64 = shells.iter().sum();
            if self.c - 2.0 * a + 1.0 <= 0.0 {
                return Err(Error::Invalid(format!(
                    "region `{name}`: A = {a} leaves C - 2A + 1 <= 0; increase the inflation or the lattice resolution"
                )));
            }
        }
        Ok(())
    }

    pub fn get(&self, name: &str) -> &[f64] {
        self.a.get(name).map_or(&[], |v| v.as_slice())
    }

    /// `sum_k A_k` for one region.
    pub fn total(&self, name: &str) -> f64 {
        self.get(name).iter().sum()
    }
}
