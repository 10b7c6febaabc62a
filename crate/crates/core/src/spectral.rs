//! Truncated Fourier basis of the squared-exponential kernel and the FFT
//! transfer of the empirical CME onto it.
//!
//! Features are ordered `[const, cos_1, sin_1, ..., cos_M, sin_M]` with
//! `phi(x) = sigma_f [w_0, sqrt2 w_j cos(zeta_j . theta), sqrt2 w_j sin(zeta_j . theta)]`
//! and `theta = dilation * P(x)`, where `P` maps the domain onto the unit cube.
//!
//! Band weights fold sign symmetry into the nonnegative index grid: per axis
//! the band mass is `p(0) = Phi(r/2) - Phi(-r/2)` and `p(k) = 2 (Phi(k r + r/2) - Phi(k r - r/2))`
//! for `k >= 1` (standard deviation `1/s` with `s` the normalized lengthscale),
//! and `w_0^2 = prod p(0)`, `w_j^2 = prod p(zeta_ji) / 2`. This makes
//! `w_0^2 + 2 sum w_j^2` the captured spectral mass.

use nalgebra::DMatrix;
use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::check_dim;
use crate::geometry::{periodic_domain, Domain, Lattice};
use crate::kernels::{CmeModel, KernelParams};
use crate::{Error, Result};

/// Band weights below this are treated as zero and their pair is pinned.
pub const WEIGHT_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralBasis {
    pub domain: Domain,
    pub m_per_axis: usize,
    /// Row-major over `{0..m-1}^n`; entry 0 is the zero index.
    pub multi_indices: Vec<Vec<usize>>,
    pub dilation: Vec<f64>,
    pub band_weights: Vec<f64>,
    pub f_max: usize,
    pub sigma_f: f64,
}

impl SpectralBasis {
    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    /// Number of nonzero wavenumbers `M`.
    pub fn num_nonzero(&self) -> usize {
        self.multi_indices.len() - 1
    }

    /// Feature dimension `2M + 1`.
    pub fn feature_dim(&self) -> usize {
        2 * self.num_nonzero() + 1
    }

    pub fn periodic_domain(&self) -> Result<Domain> {
        periodic_domain(&self.domain, &self.dilation)
    }

    /// Phase coordinates `dilation * P(x)`.
    pub fn theta(&self, x: &[f64]) -> Vec<f64> {
        (0..self.dim()).map(|i| self.dilation[i] * (x[i] - self.domain.lower[i]) / self.domain.width(i)).collect()
    }

    /// Feature slots whose band weight is numerically zero.
    pub fn inactive_features(&self) -> Vec<usize> {
        let mut out = Vec::new();
        if self.band_weights[0] * self.sigma_f <= WEIGHT_FLOOR {
            out.push(0);
        }
        for j in 1..self.multi_indices.len() {
            if self.band_weights[j] * self.sigma_f <= WEIGHT_FLOOR {
                out.push(2 * j - 1);
                out.push(2 * j);
            }
        }
        out
    }

    /// Scale of feature slot `k`, i.e. `sigma_f w_0` or `sigma_f sqrt2 w_j`.
    pub fn feature_scale(&self, k: usize) -> f64 {
        if k == 0 {
            self.sigma_f * self.band_weights[0]
        } else {
            self.sigma_f * std::f64::consts::SQRT_2 * self.band_weights[(k + 1) / 2]
        }
    }

    pub fn features_into(&self, x: &[f64], out: &mut [f64]) {
        let n = self.dim();
        let m = self.m_per_axis;
        let theta = self.theta(x);
        let mut axis_phase = vec![Complex64::new(1.0, 0.0); n * m];
        for i in 0..n {
            let step = Complex64::from_polar(1.0, theta[i]);
            for k in 1..m {
                axis_phase[i * m + k] = axis_phase[i * m + k - 1] * step;
            }
        }
        out[0] = self.feature_scale(0);
        for (j, zeta) in self.multi_indices.iter().enumerate().skip(1) {
            let mut z = Complex64::new(1.0, 0.0);
            for (i, &k) in zeta.iter().enumerate() {
                z *= axis_phase[i * m + k];
            }
            let s = self.feature_scale(2 * j);
            out[2 * j - 1] = s * z.re;
            out[2 * j] = s * z.im;
        }
    }

    pub fn features(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.feature_dim()];
        self.features_into(x, &mut out);
        out
    }

    /// Feature matrix with one row per point.
    pub fn feature_matrix<'a, I>(&self, points: I) -> DMatrix<f64>
    where
        I: IntoIterator<Item = &'a [f64]>,
    {
        let rows: Vec<Vec<f64>> = points.into_iter().map(|p| self.features(p)).collect();
        let d = self.feature_dim();
        DMatrix::from_fn(rows.len(), d, |i, j| rows[i][j])
    }
}

fn normal_cdf(x: f64) -> f64 {
    Normal::standard().cdf(x)
}

/// Per-axis folded band mass for index `k` with band width `r` and spectral
/// standard deviation `sd`.
fn axis_mass(k: usize, r: f64, sd: f64) -> f64 {
    let c = k as f64 * r;
    let mass = normal_cdf((c + 0.5 * r) / sd) - normal_cdf((c - 0.5 * r) / sd);
    if k == 0 {
        mass
    } else {
        2.0 * mass
    }
}

/// Basis on the grid `{0..m-1}^n` whose bands jointly span +-3 spectral
/// standard deviations per axis.
pub fn build_basis(m_per_axis: usize, kernel_out: &KernelParams, domain: &Domain) -> Result<SpectralBasis> {
    build_basis_with_budget(m_per_axis, kernel_out, domain, 1_000_000)
}

pub fn build_basis_with_budget(
    m_per_axis: usize,
    kernel_out: &KernelParams,
    domain: &Domain,
    max_indices: usize,
) -> Result<SpectralBasis> {
    if m_per_axis == 0 {
        return Err(Error::Invalid("m_per_axis must be >= 1".into()));
    }
    kernel_out.validate()?;
    let n = domain.dim();
    check_dim(n, kernel_out.lengthscales.len())?;
    let count = (m_per_axis as f64).powi(n as i32);
    if count > max_indices as f64 {
        return Err(Error::Budget(format!("{m_per_axis}^{n} wavenumbers exceed the budget {max_indices}")));
    }
    let dilation: Vec<f64> = (0..n)
        .map(|i| {
            let s = kernel_out.lengthscales[i] / domain.width(i);
            6.0 / (s * (2 * m_per_axis - 1) as f64)
        })
        .collect();
    let total = m_per_axis.pow(n as u32);
    let mut multi_indices = Vec::with_capacity(total);
    let mut idx = vec![0usize; n];
    for _ in 0..total {
        multi_indices.push(idx.clone());
        for a in (0..n).rev() {
            idx[a] += 1;
            if idx[a] < m_per_axis {
                break;
            }
            idx[a] = 0;
        }
    }
    let mut basis = SpectralBasis {
        domain: domain.clone(),
        m_per_axis,
        multi_indices,
        dilation,
        band_weights: Vec::new(),
        f_max: m_per_axis - 1,
        sigma_f: kernel_out.sigma_f,
    };
    basis.band_weights = band_weights(&basis, kernel_out)?;
    Ok(basis)
}

/// Square roots of the folded Gaussian band masses, one per multi-index.
pub fn band_weights(basis: &SpectralBasis, kernel_out: &KernelParams) -> Result<Vec<f64>> {
    check_dim(basis.dim(), kernel_out.lengthscales.len())?;
    let sd: Vec<f64> = (0..basis.dim()).map(|i| basis.domain.width(i) / kernel_out.lengthscales[i]).collect();
    Ok(basis
        .multi_indices
        .iter()
        .enumerate()
        .map(|(j, zeta)| {
            let mut w2: f64 = zeta.iter().enumerate().map(|(i, &k)| axis_mass(k, basis.dilation[i], sd[i])).product();
            if j > 0 {
                w2 *= 0.5;
            }
            w2.max(0.0).sqrt()
        })
        .collect())
}

pub fn feature_map(x: &[f64], basis: &SpectralBasis) -> Result<Vec<f64>> {
    check_dim(basis.dim(), x.len())?;
    Ok(basis.features(x))
}

/// `B(x) = phi(x)^T b`.
pub fn barrier_eval(b: &[f64], basis: &SpectralBasis, x: &[f64]) -> Result<f64> {
    check_dim(basis.feature_dim(), b.len())?;
    check_dim(basis.dim(), x.len())?;
    Ok(dot(&basis.features(x), b))
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// In-place n-dimensional FFT over a row-major `q^n` array, unnormalized.
pub fn fftn(data: &mut [Complex64], q: usize, n: usize, inverse: bool) {
    let mut planner = FftPlanner::new();
    let fft = if inverse { planner.plan_fft_inverse(q) } else { planner.plan_fft_forward(q) };
    let total = data.len();
    let mut line = vec![Complex64::new(0.0, 0.0); q];
    for axis in 0..n {
        let stride = q.pow((n - 1 - axis) as u32);
        let block = stride * q;
        for start in (0..total).step_by(block) {
            for off in 0..stride {
                let base = start + off;
                for (k, v) in line.iter_mut().enumerate() {
                    *v = data[base + k * stride];
                }
                fft.process(&mut line);
                for (k, v) in line.iter().enumerate() {
                    data[base + k * stride] = *v;
                }
            }
        }
    }
}

fn check_lattice(basis: &SpectralBasis, lattice: &Lattice) -> Result<()> {
    check_dim(basis.dim(), lattice.dim())?;
    if lattice.q < 2 * basis.f_max + 1 {
        return Err(Error::Invalid(format!(
            "lattice resolution {} is below the Nyquist minimum {}",
            lattice.q,
            2 * basis.f_max + 1
        )));
    }
    let pd = basis.periodic_domain()?;
    for i in 0..basis.dim() {
        let tol = 1e-9 * pd.width(i).abs().max(1.0);
        if (pd.lower[i] - lattice.domain.lower[i]).abs() > tol || (pd.upper[i] - lattice.domain.upper[i]).abs() > tol {
            return Err(Error::Invalid("lattice does not tile the periodic domain of the basis".into()));
        }
    }
    Ok(())
}

/// Barrier values at every lattice point by one inverse FFT.
pub fn barrier_on_lattice(b: &[f64], basis: &SpectralBasis, lattice: &Lattice) -> Result<Vec<f64>> {
    check_dim(basis.feature_dim(), b.len())?;
    check_lattice(basis, lattice)?;
    let q = lattice.q;
    let n = basis.dim();
    let mut spec = vec![Complex64::new(0.0, 0.0); lattice.len()];
    spec[0] = Complex64::new(basis.feature_scale(0) * b[0], 0.0);
    for (j, zeta) in basis.multi_indices.iter().enumerate().skip(1) {
        let s = basis.feature_scale(2 * j);
        spec[lattice.flat_index(zeta)] += Complex64::new(s * b[2 * j - 1], -s * b[2 * j]);
    }
    fftn(&mut spec, q, n, true);
    Ok(spec.iter().map(|z| z.re).collect())
}

/// `H` such that `phi(x)^T H e_j` approximates the CME of feature `j`.
#[derive(Debug, Clone)]
pub struct TransferMatrix {
    pub h: DMatrix<f64>,
    /// Max over the fitting lattice and features of the reconstruction error.
    pub residual: f64,
}

/// Fit `H` from field samples `values` (one row per lattice point, one column
/// per feature) by keeping the Fourier coefficients on the basis grid.
pub fn project_fields(basis: &SpectralBasis, lattice: &Lattice, values: &DMatrix<f64>) -> Result<TransferMatrix> {
    check_lattice(basis, lattice)?;
    check_dim(lattice.len(), values.nrows())?;
    let d = basis.feature_dim();
    check_dim(d, values.ncols())?;
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("non-finite CME samples".into()));
    }
    let q = lattice.q;
    let n = basis.dim();
    let total = lattice.len() as f64;
    let slots: Vec<usize> = basis.multi_indices.iter().map(|z| lattice.flat_index(z)).collect();
    let inactive = basis.inactive_features();
    let cols: Vec<Vec<f64>> = (0..d)
        .into_par_iter()
        .map(|j| {
            let mut buf: Vec<Complex64> = values.column(j).iter().map(|v| Complex64::new(*v, 0.0)).collect();
            fftn(&mut buf, q, n, false);
            let mut col = vec![0.0; d];
            for (k, &slot) in slots.iter().enumerate() {
                let c = buf[slot] / total;
                if k == 0 {
                    col[0] = c.re;
                } else {
                    col[2 * k - 1] = 2.0 * c.re;
                    col[2 * k] = -2.0 * c.im;
                }
            }
            for (k, v) in col.iter_mut().enumerate() {
                if inactive.contains(&k) {
                    *v = 0.0;
                } else {
                    *v /= basis.feature_scale(k);
                }
            }
            col
        })
        .collect();
    let h = DMatrix::from_fn(d, d, |i, j| cols[j][i]);
    let phi = basis.feature_matrix(lattice.points());
    let recon = &phi * &h;
    let residual = recon.iter().zip(values.iter()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    Ok(TransferMatrix { h, residual })
}

/// CME of every successor feature, `k_X(x)^T (K + N lambda I)^{-1} Phi(X+)`,
/// evaluated at `points` (one row per point).
pub fn cme_feature_fields<'a, I>(model: &CmeModel, basis: &SpectralBasis, points: I) -> Result<DMatrix<f64>>
where
    I: IntoIterator<Item = &'a [f64]>,
{
    let phi_next = basis.feature_matrix(model.samples.successors());
    let alpha = model.presolve(&phi_next)?;
    let pts: Vec<&[f64]> = points.into_iter().collect();
    let rows: Vec<Vec<f64>> = pts.par_iter().map(|p| model.apply(p, &alpha)).collect();
    let d = basis.feature_dim();
    Ok(DMatrix::from_fn(rows.len(), d, |i, j| rows[i][j]))
}

/// Sample the CME feature fields on `fit_lattice` and project them.
pub fn project_cme(model: &CmeModel, basis: &SpectralBasis, fit_lattice: &Lattice) -> Result<TransferMatrix> {
    check_lattice(basis, fit_lattice)?;
    let values = cme_feature_fields(model, basis, fit_lattice.points())?;
    project_fields(basis, fit_lattice, &values)
}
