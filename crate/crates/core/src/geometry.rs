//! Domains, regions and periodic sampling lattices.
//!
//! Lattice points are stored row-major by multi-index: the last axis varies
//! fastest, so flat index `i` of multi-index `(l_0, ..., l_{n-1})` is
//! `((l_0 * Q + l_1) * Q + ...) + l_{n-1}`.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::check_dim;
use crate::spectral::SpectralBasis;
use crate::{Error, Result};

/// Default cap on the number of lattice points.
pub const DEFAULT_LATTICE_BUDGET: usize = 4_000_000;

/// Axis-aligned hyperrectangle in state units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Domain {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Domain {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        check_dim(lower.len(), upper.len())?;
        if lower.is_empty() {
            return Err(Error::Invalid("domain needs at least one axis".into()));
        }
        for (i, (l, u)) in lower.iter().zip(&upper).enumerate() {
            if !(l.is_finite() && u.is_finite() && l < u) {
                return Err(Error::Invalid(format!("domain axis {i}: need lower < upper, got [{l}, {u}]")));
            }
        }
        Ok(Self { lower, upper })
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn width(&self, axis: usize) -> f64 {
        self.upper[axis] - self.lower[axis]
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter().zip(self.lower.iter().zip(&self.upper)).all(|(v, (l, u))| *v >= *l && *v <= *u)
    }

    /// Affine map onto the unit hypercube.
    pub fn to_unit(&self, x: &[f64]) -> Vec<f64> {
        (0..self.dim()).map(|i| (x[i] - self.lower[i]) / self.width(i)).collect()
    }

    pub fn from_unit(&self, u: &[f64]) -> Vec<f64> {
        (0..self.dim()).map(|i| self.lower[i] + u[i] * self.width(i)).collect()
    }

    pub fn center(&self) -> Vec<f64> {
        (0..self.dim()).map(|i| 0.5 * (self.lower[i] + self.upper[i])).collect()
    }
}

/// `(x - lower) / (upper - lower)` componentwise.
pub fn affine_map(x: &[f64], domain: &Domain) -> Result<Vec<f64>> {
    check_dim(domain.dim(), x.len())?;
    Ok(domain.to_unit(x))
}

pub fn affine_map_inv(u: &[f64], domain: &Domain) -> Result<Vec<f64>> {
    check_dim(domain.dim(), u.len())?;
    Ok(domain.from_unit(u))
}

/// Smallest box on which the feature map with dilation `dilation` is periodic:
/// each unit axis is stretched to `2*pi/dilation[i]` and mapped back.
pub fn periodic_domain(domain: &Domain, dilation: &[f64]) -> Result<Domain> {
    check_dim(domain.dim(), dilation.len())?;
    if let Some(r) = dilation.iter().find(|r| !(r.is_finite() && **r > 0.0)) {
        return Err(Error::Invalid(format!("dilation components must be positive, got {r}")));
    }
    let upper = (0..domain.dim()).map(|i| domain.lower[i] + domain.width(i) * 2.0 * PI / dilation[i]).collect();
    Domain::new(domain.lower.clone(), upper)
}

/// Boxes, balls, finite unions and complements.
///
/// A complement is understood relative to whatever domain the caller tests
/// points from; membership itself is just the negation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum Region {
    Box { lower: Vec<f64>, upper: Vec<f64> },
    Ball { center: Vec<f64>, radius: f64 },
    Union { members: Vec<Region> },
    Complement { region: Box<Region> },
}

impl Region {
    pub fn boxed(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        let r = Region::Box { lower, upper };
        r.validate()?;
        Ok(r)
    }

    pub fn ball(center: Vec<f64>, radius: f64) -> Result<Self> {
        let r = Region::Ball { center, radius };
        r.validate()?;
        Ok(r)
    }

    pub fn union(members: Vec<Region>) -> Result<Self> {
        let r = Region::Union { members };
        r.validate()?;
        Ok(r)
    }

    pub fn complement(region: Region) -> Result<Self> {
        let r = Region::Complement { region: Box::new(region) };
        r.validate()?;
        Ok(r)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Region::Box { lower, upper } => {
                check_dim(lower.len(), upper.len())?;
                for (l, u) in lower.iter().zip(upper) {
                    if !(l.is_finite() && u.is_finite()) || l > u {
                        return Err(Error::Invalid(format!("empty or non-finite box side [{l}, {u}]")));
                    }
                }
                Ok(())
            }
            Region::Ball { center, radius } => {
                if center.iter().any(|c| !c.is_finite()) || !radius.is_finite() || *radius < 0.0 {
                    return Err(Error::Invalid(format!("invalid ball radius {radius}")));
                }
                Ok(())
            }
            Region::Union { members } => members.iter().try_for_each(|m| m.validate()),
            Region::Complement { region } => region.validate(),
        }
    }

    /// Dimension of the region, if it pins one down (empty unions do not).
    pub fn dim(&self) -> Option<usize> {
        match self {
            Region::Box { lower, .. } => Some(lower.len()),
            Region::Ball { center, .. } => Some(center.len()),
            Region::Union { members } => members.iter().find_map(|m| m.dim()),
            Region::Complement { region } => region.dim(),
        }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        match self {
            Region::Box { lower, upper } => {
                x.iter().zip(lower.iter().zip(upper)).all(|(v, (l, u))| *v >= *l && *v <= *u)
            }
            Region::Ball { center, radius } => {
                let d2: f64 = x.iter().zip(center).map(|(a, b)| (a - b) * (a - b)).sum();
                d2 <= radius * radius
            }
            Region::Union { members } => members.iter().any(|m| m.contains(x)),
            Region::Complement { region } => !region.contains(x),
        }
    }

    /// Bounding box intersected with `domain`; `None` if the region is empty there.
    pub fn bounding_box(&self, domain: &Domain) -> Option<(Vec<f64>, Vec<f64>)> {
        let n = domain.dim();
        let (lo, hi) = match self {
            Region::Box { lower, upper } => (lower.clone(), upper.clone()),
            Region::Ball { center, radius } => (
                center.iter().map(|c| c - radius).collect(),
                center.iter().map(|c| c + radius).collect(),
            ),
            Region::Union { members } => {
                let mut acc: Option<(Vec<f64>, Vec<f64>)> = None;
                for m in members {
                    if let Some((l, u)) = m.bounding_box(domain) {
                        acc = Some(match acc {
                            None => (l, u),
                            Some((al, au)) => (
                                al.iter().zip(&l).map(|(a, b)| a.min(*b)).collect(),
                                au.iter().zip(&u).map(|(a, b)| a.max(*b)).collect(),
                            ),
                        });
                    }
                }
                acc?
            }
            Region::Complement { .. } => (domain.lower.clone(), domain.upper.clone()),
        };
        let lo: Vec<f64> = (0..n).map(|i| lo[i].max(domain.lower[i])).collect();
        let hi: Vec<f64> = (0..n).map(|i| hi[i].min(domain.upper[i])).collect();
        if lo.iter().zip(&hi).any(|(l, u)| l > u) {
            None
        } else {
            Some((lo, hi))
        }
    }
}

/// Grow a region by `fraction`: box half-widths and ball radii scale by
/// `1 + fraction`, unions inflate memberwise, and a complement shrinks the
/// region it excludes by the same fraction.
///
/// Boxes are clipped to `clip` when given. Balls are left unclipped since
/// membership is only ever queried at points inside the clip domain.
pub fn inflate_region(region: &Region, fraction: f64, clip: Option<&Domain>) -> Result<Region> {
    if !(fraction.is_finite() && fraction >= 0.0) {
        return Err(Error::Invalid(format!("inflation fraction must be >= 0, got {fraction}")));
    }
    region.validate()?;
    Ok(scale_region(region, 1.0 + fraction, clip))
}

fn scale_region(region: &Region, factor: f64, clip: Option<&Domain>) -> Region {
    match region {
        Region::Box { lower, upper } => {
            let mut lo = Vec::with_capacity(lower.len());
            let mut hi = Vec::with_capacity(lower.len());
            for i in 0..lower.len() {
                let c = 0.5 * (lower[i] + upper[i]);
                let h = 0.5 * (upper[i] - lower[i]) * factor;
                let (mut l, mut u) = (c - h, c + h);
                if let Some(d) = clip {
                    l = l.max(d.lower[i]);
                    u = u.min(d.upper[i]);
                    if l > u {
                        l = c.clamp(d.lower[i], d.upper[i]);
                        u = l;
                    }
                }
                lo.push(l);
                hi.push(u);
            }
            Region::Box { lower: lo, upper: hi }
        }
        Region::Ball { center, radius } => Region::Ball { center: center.clone(), radius: radius * factor },
        Region::Union { members } => {
            Region::Union { members: members.iter().map(|m| scale_region(m, factor, clip)).collect() }
        }
        Region::Complement { region } => {
            Region::Complement { region: Box::new(scale_region(region, (2.0 - factor).max(0.0), None)) }
        }
    }
}

/// Equidistant half-open product grid over a periodic domain.
#[derive(Debug, Clone)]
pub struct Lattice {
    /// Points per axis.
    pub q: usize,
    /// The periodic domain tiled by the grid.
    pub domain: Domain,
    points: Vec<f64>,
}

impl Lattice {
    pub fn new(domain: Domain, q: usize, budget: usize) -> Result<Self> {
        if q == 0 {
            return Err(Error::Invalid("lattice needs at least one point per axis".into()));
        }
        let n = domain.dim();
        let count = (q as f64).powi(n as i32);
        if count > budget as f64 {
            return Err(Error::Budget(format!("lattice of {q}^{n} = {count} points exceeds budget {budget}")));
        }
        let total = q.pow(n as u32);
        let mut points = Vec::with_capacity(total * n);
        let mut idx = vec![0usize; n];
        for _ in 0..total {
            for (i, l) in idx.iter().enumerate() {
                points.push(domain.lower[i] + domain.width(i) * (*l as f64) / q as f64);
            }
            for i in (0..n).rev() {
                idx[i] += 1;
                if idx[i] < q {
                    break;
                }
                idx[i] = 0;
            }
        }
        Ok(Self { q, domain, points })
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    pub fn len(&self) -> usize {
        self.points.len() / self.dim()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        let n = self.dim();
        &self.points[i * n..(i + 1) * n]
    }

    pub fn points(&self) -> impl Iterator<Item = &[f64]> {
        self.points.chunks_exact(self.dim())
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        self.domain.width(axis) / self.q as f64
    }

    pub fn multi_index(&self, mut i: usize) -> Vec<usize> {
        let n = self.dim();
        let mut out = vec![0; n];
        for a in (0..n).rev() {
            out[a] = i % self.q;
            i /= self.q;
        }
        out
    }

    pub fn flat_index(&self, multi: &[usize]) -> usize {
        multi.iter().fold(0, |acc, l| acc * self.q + l)
    }
}

/// Lattice with `oversample * (2 f_max + 1)` points per axis over the
/// periodic domain of `basis`.
pub fn build_lattice(basis: &SpectralBasis, oversample: usize) -> Result<Lattice> {
    build_lattice_with_budget(basis, oversample, DEFAULT_LATTICE_BUDGET)
}

pub fn build_lattice_with_budget(basis: &SpectralBasis, oversample: usize, budget: usize) -> Result<Lattice> {
    if oversample == 0 {
        return Err(Error::Invalid("oversample must be >= 1".into()));
    }
    let q = oversample * (2 * basis.f_max + 1);
    Lattice::new(basis.periodic_domain()?, q, budget)
}

/// Split lattice indices into those inside and outside `region`.
pub fn filter_lattice(lattice: &Lattice, region: &Region) -> (Vec<usize>, Vec<usize>) {
    let mut inside = Vec::new();
    let mut outside = Vec::new();
    for (i, p) in lattice.points().enumerate() {
        if region.contains(p) {
            inside.push(i);
        } else {
            outside.push(i);
        }
    }
    (inside, outside)
}

/// Membership mask of `region` over the lattice.
pub fn lattice_mask(lattice: &Lattice, region: &Region) -> Vec<bool> {
    lattice.points().map(|p| region.contains(p)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit(n: usize) -> Domain {
        Domain::new(vec![0.0; n], vec![1.0; n]).unwrap()
    }

    #[test]
    fn affine_corners_and_midpoint() {
        let d = Domain::new(vec![-1.0, -1.0], vec![1.0, 1.0]).unwrap();
        assert_eq!(affine_map(&[-1.0, -1.0], &d).unwrap(), vec![0.0, 0.0]);
        assert_eq!(affine_map(&[1.0, 1.0], &d).unwrap(), vec![1.0, 1.0]);
        assert_eq!(affine_map(&[0.0, 0.0], &d).unwrap(), vec![0.5, 0.5]);
        assert!(affine_map(&[0.0], &d).is_err());
    }

    #[test]
    fn periodic_domain_scaling() {
        let d = unit(2);
        let same = periodic_domain(&d, &[2.0 * PI, 2.0 * PI]).unwrap();
        assert!((same.upper[0] - 1.0).abs() < 1e-15);
        let twice = periodic_domain(&d, &[PI, PI]).unwrap();
        assert!((twice.upper[1] - 2.0).abs() < 1e-15);
        let one = periodic_domain(&d, &[1.0, 1.0]).unwrap();
        assert!((one.upper[0] - 2.0 * PI).abs() < 1e-12);
        assert!(periodic_domain(&d, &[0.0, 1.0]).is_err());
    }

    #[test]
    fn lattice_counts() {
        let d = unit(1);
        let l = Lattice::new(d, 5, 100).unwrap();
        assert_eq!(l.len(), 5);
        assert!((l.point(4)[0] - 0.8).abs() < 1e-15);
        let l2 = Lattice::new(unit(2), 5, 100).unwrap();
        assert_eq!(l2.len(), 25);
        assert_eq!(l2.point(7), &[0.2, 0.4]);
        assert_eq!(l2.multi_index(7), vec![1, 2]);
        assert_eq!(l2.flat_index(&[1, 2]), 7);
        assert!(Lattice::new(unit(2), 11, 100).is_err());
    }

    #[test]
    fn filter_half_interval() {
        let l = Lattice::new(unit(1), 5, 100).unwrap();
        let r = Region::boxed(vec![0.0], vec![0.5]).unwrap();
        let (inside, outside) = filter_lattice(&l, &r);
        assert_eq!(inside, vec![0, 1, 2]);
        assert_eq!(outside, vec![3, 4]);
        let (all, none) = filter_lattice(&l, &Region::boxed(vec![0.0], vec![1.0]).unwrap());
        assert_eq!((all.len(), none.len()), (5, 0));
    }

    #[test]
    fn degenerate_box_rejected() {
        assert!(Region::boxed(vec![1.0], vec![0.0]).is_err());
        assert!(Region::ball(vec![0.0], -1.0).is_err());
    }

    #[test]
    fn inflation_examples() {
        let b = Region::boxed(vec![0.0], vec![1.0]).unwrap();
        assert_eq!(inflate_region(&b, 0.0, None).unwrap(), b);
        match inflate_region(&b, 0.02, None).unwrap() {
            Region::Box { lower, upper } => {
                assert!((lower[0] + 0.01).abs() < 1e-15);
                assert!((upper[0] - 1.01).abs() < 1e-15);
            }
            _ => unreachable!(),
        }
        match inflate_region(&Region::ball(vec![0.0, 0.0], 1.0).unwrap(), 0.03, None).unwrap() {
            Region::Ball { radius, .. } => assert!((radius - 1.03).abs() < 1e-15),
            _ => unreachable!(),
        }
        let clipped = inflate_region(&b, 0.5, Some(&unit(1))).unwrap();
        assert_eq!(clipped, b);
    }

    #[test]
    fn region_json_schema() {
        let r: Region = serde_json::from_str(
            r#"{"type":"union","members":[{"type":"box","lower":[0,0],"upper":[1,1]},
               {"type":"complement","region":{"type":"ball","center":[0,0],"radius":2}}]}"#,
        )
        .unwrap();
        assert!(r.contains(&[0.5, 0.5]));
        assert!(r.contains(&[3.0, 0.0]));
        assert!(!r.contains(&[1.5, 0.0]));
        let back: Region = serde_json::from_str(&serde_json::to_string(&r).unwrap()).unwrap();
        assert_eq!(back, r);
        assert!(serde_json::from_str::<Region>(r#"{"type":"box","lower":[0],"upper":[1],"x":1}"#).is_err());
    }
}
