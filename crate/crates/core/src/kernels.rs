//! Squared-exponential kernel, Gram matrices and the empirical conditional
//! mean embedding (CME).

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use std::path::Path;

use crate::error::check_dim;
use crate::geometry::Domain;
use crate::{Error, Result};

/// `k(x, x') = sigma_f^2 exp(-0.5 sum ((x_i - x'_i) / l_i)^2)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelParams {
    pub sigma_f: f64,
    /// Lengthscales in state units.
    pub lengthscales: Vec<f64>,
}

impl KernelParams {
    pub fn new(sigma_f: f64, lengthscales: Vec<f64>) -> Result<Self> {
        let p = Self { sigma_f, lengthscales };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma_f.is_finite() && self.sigma_f >= 0.0) {
            return Err(Error::Invalid(format!("sigma_f must be >= 0, got {}", self.sigma_f)));
        }
        if self.lengthscales.is_empty() || self.lengthscales.iter().any(|l| !(l.is_finite() && *l > 0.0)) {
            return Err(Error::Invalid(format!("lengthscales must be positive, got {:?}", self.lengthscales)));
        }
        Ok(())
    }

    /// The kernel amplitude `sigma_f^2`.
    pub fn amplitude(&self) -> f64 {
        self.sigma_f * self.sigma_f
    }

    #[inline]
    pub(crate) fn eval_unchecked(&self, x: &[f64], y: &[f64]) -> f64 {
        let mut s = 0.0;
        for i in 0..x.len() {
            let d = (x[i] - y[i]) / self.lengthscales[i];
            s += d * d;
        }
        self.amplitude() * (-0.5 * s).exp()
    }
}

pub fn sqexp(x: &[f64], y: &[f64], params: &KernelParams) -> Result<f64> {
    check_dim(params.lengthscales.len(), x.len())?;
    check_dim(params.lengthscales.len(), y.len())?;
    Ok(params.eval_unchecked(x, y))
}

pub fn gram(points: &[Vec<f64>], params: &KernelParams) -> Result<DMatrix<f64>> {
    if points.is_empty() {
        return Err(Error::Invalid("gram matrix of an empty point set".into()));
    }
    for p in points {
        check_dim(params.lengthscales.len(), p.len())?;
    }
    let n = points.len();
    let mut k = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let v = params.eval_unchecked(&points[i], &points[j]);
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    Ok(k)
}

/// Paired observations of states and their successors, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    dim: usize,
    states: Vec<f64>,
    successors: Vec<f64>,
}

impl SampleSet {
    pub fn new(dim: usize, states: Vec<f64>, successors: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Invalid("sample dimension must be >= 1".into()));
        }
        check_dim(states.len(), successors.len())?;
        if states.len() % dim != 0 {
            return Err(Error::Invalid("state buffer length is not a multiple of the dimension".into()));
        }
        if states.iter().chain(&successors).any(|v| !v.is_finite()) {
            return Err(Error::Invalid("non-finite sample value".into()));
        }
        Ok(Self { dim, states, successors })
    }

    pub fn from_rows(states: &[Vec<f64>], successors: &[Vec<f64>]) -> Result<Self> {
        check_dim(states.len(), successors.len())?;
        let dim = states.first().map(|s| s.len()).unwrap_or(0);
        for r in states.iter().chain(successors) {
            check_dim(dim, r.len())?;
        }
        Self::new(dim, states.concat(), successors.concat())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.states.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn state(&self, i: usize) -> &[f64] {
        &self.states[i * self.dim..(i + 1) * self.dim]
    }

    pub fn successor(&self, i: usize) -> &[f64] {
        &self.successors[i * self.dim..(i + 1) * self.dim]
    }

    pub fn states(&self) -> impl Iterator<Item = &[f64]> {
        self.states.chunks_exact(self.dim)
    }

    pub fn successors(&self) -> impl Iterator<Item = &[f64]> {
        self.successors.chunks_exact(self.dim)
    }

    /// Errors if a state lies outside `domain`; successors outside the domain
    /// only produce warnings.
    pub fn validate(&self, domain: &Domain) -> Result<Vec<String>> {
        check_dim(domain.dim(), self.dim)?;
        if let Some(i) = (0..self.len()).find(|&i| !domain.contains(self.state(i))) {
            return Err(Error::Invalid(format!("sample {i}: state {:?} outside the domain", self.state(i))));
        }
        let outside = (0..self.len()).filter(|&i| !domain.contains(self.successor(i))).count();
        let mut warnings = Vec::new();
        if outside > 0 {
            warnings.push(format!("{outside} successor(s) lie outside the domain"));
        }
        Ok(warnings)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
        let mut header: Vec<String> = (1..=self.dim).map(|i| format!("x{i}")).collect();
        header.extend((1..=self.dim).map(|i| format!("xp{i}")));
        w.write_record(&header).map_err(csv_err)?;
        for i in 0..self.len() {
            let row: Vec<String> =
                self.state(i).iter().chain(self.successor(i)).map(|v| format!("{v:?}")).collect();
            w.write_record(&row).map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let mut r = csv::Reader::from_path(path).map_err(csv_err)?;
        let header = r.headers().map_err(csv_err)?.clone();
        if header.len() % 2 != 0 || header.is_empty() {
            return Err(Error::Parse(format!("dataset header must have 2n columns, got {}", header.len())));
        }
        let dim = header.len() / 2;
        for (i, name) in header.iter().enumerate() {
            let want = if i < dim { format!("x{}", i + 1) } else { format!("xp{}", i - dim + 1) };
            if name.trim() != want {
                return Err(Error::Parse(format!("dataset header column {}: expected `{want}`, got `{name}`", i + 1)));
            }
        }
        let mut states = Vec::new();
        let mut successors = Vec::new();
        for (line, rec) in r.records().enumerate() {
            let rec = rec.map_err(csv_err)?;
            if rec.len() != 2 * dim {
                return Err(Error::Parse(format!("dataset row {}: expected {} fields", line + 2, 2 * dim)));
            }
            for (j, field) in rec.iter().enumerate() {
                let v: f64 = field
                    .trim()
                    .parse()
                    .map_err(|_| Error::Parse(format!("dataset row {}: bad number `{field}`", line + 2)))?;
                if j < dim {
                    states.push(v);
                } else {
                    successors.push(v);
                }
            }
        }
        Self::new(dim, states, successors)
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Parse(e.to_string())
}

enum Factor {
    Cholesky(nalgebra::Cholesky<f64, nalgebra::Dyn>),
    Lu(nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>),
}

/// Empirical CME with input kernel `k_x`, output kernel `k_+` and
/// regularizer `lambda`, holding a factorization of `K + N lambda I`.
pub struct CmeModel {
    pub samples: SampleSet,
    pub kernel_in: KernelParams,
    pub kernel_out: KernelParams,
    pub lambda: f64,
    factor: Factor,
}

impl CmeModel {
    pub fn new(samples: SampleSet, kernel_in: KernelParams, kernel_out: KernelParams, lambda: f64) -> Result<Self> {
        kernel_in.validate()?;
        kernel_out.validate()?;
        check_dim(samples.dim(), kernel_in.lengthscales.len())?;
        check_dim(samples.dim(), kernel_out.lengthscales.len())?;
        if samples.is_empty() {
            return Err(Error::Invalid("CME needs at least one sample".into()));
        }
        if !(lambda.is_finite() && lambda >= 0.0) {
            return Err(Error::Invalid(format!("lambda must be >= 0, got {lambda}")));
        }
        let k = regularized_gram(&samples, &kernel_in, lambda);
        let factor = match k.clone().cholesky() {
            Some(c) => Factor::Cholesky(c),
            None => {
                let lu = k.lu();
                let u = lu.u();
                let scale = u.diagonal().amax();
                if u.diagonal().iter().any(|d| d.abs() <= 1e-13 * scale.max(f64::MIN_POSITIVE)) {
                    return Err(Error::Numerical(
                        "K + N lambda I is singular; use lambda > 0 or remove duplicate samples".into(),
                    ));
                }
                Factor::Lu(lu)
            }
        };
        Ok(Self { samples, kernel_in, kernel_out, lambda, factor })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// The regularized matrix `K + N lambda I` rebuilt from the samples.
    pub fn regularized_gram(&self) -> DMatrix<f64> {
        regularized_gram(&self.samples, &self.kernel_in, self.lambda)
    }

    /// Product of the stored factors, for round-off audits.
    pub fn reconstruct(&self) -> DMatrix<f64> {
        match &self.factor {
            Factor::Cholesky(c) => {
                let l = c.l();
                &l * l.transpose()
            }
            Factor::Lu(lu) => {
                let (p, l, u) = lu.clone().unpack();
                let mut a = l * u;
                p.inv_permute_rows(&mut a);
                a
            }
        }
    }

    /// Solve `(K + N lambda I) X = rhs`.
    pub fn solve(&self, rhs: &DMatrix<f64>) -> DMatrix<f64> {
        match &self.factor {
            Factor::Cholesky(c) => c.solve(rhs),
            Factor::Lu(lu) => lu.solve(rhs).expect("factor checked non-singular"),
        }
    }

    /// `k_X(x)`, the input-kernel evaluations against every sample state.
    pub fn kernel_vector(&self, x: &[f64]) -> Vec<f64> {
        self.samples.states().map(|s| self.kernel_in.eval_unchecked(x, s)).collect()
    }

    /// `w(x) = (K + N lambda I)^{-1} k_X(x)`.
    pub fn weights(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.samples.dim(), x.len())?;
        let k = DMatrix::from_vec(self.len(), 1, self.kernel_vector(x));
        Ok(self.solve(&k).column(0).iter().copied().collect())
    }

    /// Pre-solve `alpha = (K + N lambda I)^{-1} F` for successor values `F`
    /// (one column per function), so that `E[f_j](x) = k_X(x)^T alpha_j`.
    pub fn presolve(&self, successor_values: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        check_dim(self.len(), successor_values.nrows())?;
        Ok(self.solve(successor_values))
    }

    /// Apply a pre-solved operator at `x`.
    pub fn apply(&self, x: &[f64], alpha: &DMatrix<f64>) -> Vec<f64> {
        let k = self.kernel_vector(x);
        let mut out = vec![0.0; alpha.ncols()];
        for (j, o) in out.iter_mut().enumerate() {
            let col = alpha.column(j);
            *o = k.iter().zip(col.iter()).map(|(a, b)| a * b).sum();
        }
        out
    }
}

fn regularized_gram(samples: &SampleSet, params: &KernelParams, lambda: f64) -> DMatrix<f64> {
    let n = samples.len();
    let mut k = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let v = params.eval_unchecked(samples.state(i), samples.state(j));
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    for i in 0..n {
        k[(i, i)] += n as f64 * lambda;
    }
    k
}

pub fn cme_weights(x: &[f64], model: &CmeModel) -> Result<Vec<f64>> {
    model.weights(x)
}

/// `w^T f(X+)`.
pub fn cme_expectation(values_at_successors: &[f64], w: &[f64]) -> Result<f64> {
    check_dim(w.len(), values_at_successors.len())?;
    Ok(w.iter().zip(values_at_successors).map(|(a, b)| a * b).sum())
}

/// Per-axis median of pairwise absolute coordinate differences. Axes whose
/// median is zero fall back to the mean pairwise difference.
pub fn median_heuristic(points: &[Vec<f64>]) -> Result<Vec<f64>> {
    if points.len() < 2 {
        return Err(Error::Invalid("median heuristic needs at least two points".into()));
    }
    let n = points[0].len();
    for p in points {
        check_dim(n, p.len())?;
    }
    let mut out = Vec::with_capacity(n);
    let mut diffs = Vec::with_capacity(points.len() * (points.len() - 1) / 2);
    for axis in 0..n {
        diffs.clear();
        for i in 0..points.len() {
            for j in 0..i {
                diffs.push((points[i][axis] - points[j][axis]).abs());
            }
        }
        diffs.sort_by(f64::total_cmp);
        let m = diffs.len();
        let median = if m % 2 == 1 { diffs[m / 2] } else { 0.5 * (diffs[m / 2 - 1] + diffs[m / 2]) };
        let value = if median > 0.0 { median } else { diffs.iter().sum::<f64>() / m as f64 };
        if value <= 0.0 {
            return Err(Error::Invalid(format!("all points coincide on axis {axis}")));
        }
        out.push(value);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(l: f64, n: usize) -> KernelParams {
        KernelParams::new(1.0, vec![l; n]).unwrap()
    }

    #[test]
    fn sqexp_values() {
        let p = params(1.0, 1);
        assert_eq!(sqexp(&[0.3], &[0.3], &p).unwrap(), 1.0);
        assert!((sqexp(&[0.0], &[1.0], &p).unwrap() - 0.6065306597126334).abs() < 1e-15);
        assert_eq!(sqexp(&[0.2], &[1.0], &p).unwrap(), sqexp(&[1.0], &[0.2], &p).unwrap());
        assert!(sqexp(&[0.0, 1.0], &[0.0], &p).is_err());
    }

    #[test]
    fn gram_small_cases() {
        let p = KernelParams::new(2.0, vec![1.0]).unwrap();
        assert_eq!(gram(&[vec![0.5]], &p).unwrap()[(0, 0)], 4.0);
        let dup = gram(&[vec![0.5], vec![0.5]], &p).unwrap();
        assert!(dup.determinant().abs() < 1e-12);
        let k = gram(&[vec![0.0], vec![0.7], vec![-1.3]], &p).unwrap();
        let eig = k.symmetric_eigen().eigenvalues;
        assert!(eig.iter().all(|e| *e >= -1e-10));
    }

    #[test]
    fn weights_identity_cases() {
        let s = SampleSet::from_rows(&[vec![0.0]], &[vec![0.3]]).unwrap();
        let m = CmeModel::new(s, params(1.0, 1), params(1.0, 1), 0.0).unwrap();
        assert!((m.weights(&[0.0]).unwrap()[0] - 1.0).abs() < 1e-14);

        let s = SampleSet::from_rows(&[vec![0.0], vec![50.0]], &[vec![1.0], vec![2.0]]).unwrap();
        let m = CmeModel::new(s, params(1.0, 1), params(1.0, 1), 0.0).unwrap();
        let w = m.weights(&[0.0]).unwrap();
        assert!((w[0] - 1.0).abs() < 1e-12 && w[1].abs() < 1e-12);
        assert!((cme_expectation(&[1.0, 2.0], &w).unwrap() - 1.0).abs() < 1e-12);

        let s = SampleSet::from_rows(&[vec![0.0], vec![0.4]], &[vec![1.0], vec![2.0]]).unwrap();
        let m = CmeModel::new(s, params(1.0, 1), params(1.0, 1), 1e9).unwrap();
        assert!(m.weights(&[0.1]).unwrap().iter().all(|w| w.abs() < 1e-9));
    }

    #[test]
    fn two_sample_weights_match_hand_solve() {
        let k01 = (-0.5f64 * 0.25).exp();
        let s = SampleSet::from_rows(&[vec![0.0], vec![0.5]], &[vec![0.0], vec![0.0]]).unwrap();
        let m = CmeModel::new(s, params(1.0, 1), params(1.0, 1), 0.0).unwrap();
        let x = 0.2;
        let (k0, k1) = ((-0.5f64 * x * x).exp(), (-0.5f64 * (x - 0.5) * (x - 0.5)).exp());
        let det = 1.0 - k01 * k01;
        let w = m.weights(&[x]).unwrap();
        assert!((w[0] - (k0 - k01 * k1) / det).abs() < 1e-12);
        assert!((w[1] - (k1 - k01 * k0) / det).abs() < 1e-12);
    }

    #[test]
    fn singular_without_regularizer_is_reported() {
        let s = SampleSet::from_rows(&[vec![0.0], vec![0.0]], &[vec![0.0], vec![1.0]]).unwrap();
        assert!(CmeModel::new(s, params(1.0, 1), params(1.0, 1), 0.0).is_err());
    }

    #[test]
    fn median_examples() {
        assert_eq!(median_heuristic(&[vec![0.0, 1.0], vec![2.0, 1.5]]).unwrap(), vec![2.0, 0.5]);
        assert_eq!(median_heuristic(&[vec![-1.0], vec![0.0], vec![1.0]]).unwrap(), vec![1.0]);
        let r = median_heuristic(&[vec![0.0], vec![0.0], vec![0.0], vec![0.0], vec![3.0]]).unwrap();
        assert!((r[0] - 1.2).abs() < 1e-15);
        assert!(median_heuristic(&[vec![1.0], vec![1.0]]).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.csv");
        let s = SampleSet::from_rows(&[vec![0.1, -2.0], vec![1.0 / 3.0, 4.0]], &[vec![0.2, 0.0], vec![5.0, 6.5]])
            .unwrap();
        s.write_csv(&path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("x1,x2,xp1,xp2\n"));
        assert_eq!(SampleSet::read_csv(&path).unwrap(), s);
    }
}
