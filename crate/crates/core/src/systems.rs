//! Benchmark dynamics, controllers, dataset generation and rollouts.
//!
//! Randomness: every consumer derives its generator with [`stream_rng`] from
//! the master seed, a fixed label per purpose and an index (chunk or rollout
//! number), so results do not depend on thread scheduling. Gaussian noise is
//! drawn with the ziggurat sampler of `rand_distr` on top of ChaCha8.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::io::Write;
use std::path::Path;
use std::process::{Command, Stdio};

use crate::error::check_dim;
use crate::geometry::{Domain, Region};
use crate::kernels::SampleSet;
use crate::{Error, Result};

/// Stream label for dataset generation.
pub const STREAM_DATA: u64 = 0x6461_7461;
/// Stream label for Monte-Carlo rollouts.
pub const STREAM_MC: u64 = 0x6d63;

const CHUNK: usize = 1024;

/// Generator for `(seed, label, index)`: seeded from `seed ^ label`, with
/// `index` selecting the ChaCha stream.
pub fn stream_rng(seed: u64, label: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ label);
    rng.set_stream(index);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SystemKind {
    Barr3,
    Dubins,
    UserMap,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Tanh,
    Identity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Layer {
    /// Row-major, one row per output.
    pub weights: Vec<Vec<f64>>,
    pub bias: Vec<f64>,
    pub activation: Activation,
}

/// Feedforward network with an optional output clamp.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Mlp {
    pub layers: Vec<Layer>,
    #[serde(default)]
    pub clamp: Option<[f64; 2]>,
}

impl Mlp {
    pub fn validate(&self) -> Result<()> {
        if self.layers.is_empty() {
            return Err(Error::Invalid("MLP has no layers".into()));
        }
        let mut width: Option<usize> = None;
        for (k, l) in self.layers.iter().enumerate() {
            if l.weights.is_empty() || l.weights.len() != l.bias.len() {
                return Err(Error::Invalid(format!("layer {k}: {} weight rows vs {} biases", l.weights.len(), l.bias.len())));
            }
            let cols = l.weights[0].len();
            if l.weights.iter().any(|r| r.len() != cols) {
                return Err(Error::Invalid(format!("layer {k}: ragged weight matrix")));
            }
            if let Some(w) = width {
                if w != cols {
                    return Err(Error::Invalid(format!("layer {k}: expects {cols} inputs, previous layer gives {w}")));
                }
            }
            if l.weights.iter().flatten().chain(&l.bias).any(|v| !v.is_finite()) {
                return Err(Error::Invalid(format!("layer {k}: non-finite parameter")));
            }
            width = Some(l.weights.len());
        }
        if let Some([lo, hi]) = self.clamp {
            if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                return Err(Error::Invalid(format!("bad clamp range [{lo}, {hi}]")));
            }
        }
        Ok(())
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].weights[0].len()
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map_or(0, |l| l.weights.len())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let m: Mlp = serde_json::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
        m.validate()?;
        Ok(m)
    }
}

pub fn nn_forward(mlp: &Mlp, x: &[f64]) -> Result<Vec<f64>> {
    if mlp.layers.is_empty() {
        return Err(Error::Invalid("MLP has no layers".into()));
    }
    check_dim(mlp.input_dim(), x.len())?;
    let mut h = x.to_vec();
    for l in &mlp.layers {
        check_dim(l.weights[0].len(), h.len())?;
        h = l
            .weights
            .iter()
            .zip(&l.bias)
            .map(|(row, b)| {
                let z = row.iter().zip(&h).map(|(w, v)| w * v).sum::<f64>() + b;
                match l.activation {
                    Activation::Relu => z.max(0.0),
                    Activation::Tanh => z.tanh(),
                    Activation::Identity => z,
                }
            })
            .collect();
    }
    if h.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("MLP produced a non-finite output".into()));
    }
    if let Some([lo, hi]) = mlp.clamp {
        h.iter_mut().for_each(|v| *v = v.clamp(lo, hi));
    }
    Ok(h)
}

/// Lane-change steering law for the car:
/// `u = clamp(gain_y (y_ref(x) - y) - gain_phi phi)` with a Gaussian bump
/// `y_ref(x) = offset exp(-((x - center) / width)^2)`. With `split` set the
/// car passes on its current side: the offset is scaled by `tanh(y / split)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SteerLaw {
    pub offset: f64,
    pub center: f64,
    pub width: f64,
    pub gain_y: f64,
    pub gain_phi: f64,
    pub max_steer: f64,
    #[serde(default)]
    pub split: Option<f64>,
}

impl SteerLaw {
    pub fn eval(&self, x: &[f64]) -> f64 {
        let s = (x[0] - self.center) / self.width;
        let side = self.split.map_or(1.0, |w| (x[1] / w).tanh());
        let y_ref = side * self.offset * (-s * s).exp();
        (self.gain_y * (y_ref - x[1]) - self.gain_phi * x[2]).clamp(-self.max_steer, self.max_steer)
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub enum Controller {
    #[default]
    None,
    Zero,
    Mlp(Mlp),
    Steer(SteerLaw),
}

impl Controller {
    pub fn input(&self, x: &[f64]) -> Result<f64> {
        match self {
            Controller::None | Controller::Zero => Ok(0.0),
            Controller::Mlp(m) => Ok(nn_forward(m, x)?[0]),
            Controller::Steer(s) => Ok(s.eval(x)),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SystemSpec {
    pub kind: SystemKind,
    pub tau: f64,
    /// Per-axis noise standard deviations.
    pub noise: Vec<f64>,
    pub domain: Domain,
    pub controller: Controller,
    /// Car speed (dubins only).
    pub velocity: f64,
    /// Program and arguments producing drift successors (user-map only).
    pub command: Vec<String>,
}

impl SystemSpec {
    pub fn barr3(domain: Domain) -> Self {
        Self {
            kind: SystemKind::Barr3,
            tau: 0.1,
            noise: vec![0.1, 0.1],
            domain,
            controller: Controller::None,
            velocity: 0.0,
            command: Vec::new(),
        }
    }

    pub fn dubins(domain: Domain, controller: Controller) -> Self {
        Self {
            kind: SystemKind::Dubins,
            tau: 0.5,
            noise: vec![0.01, 0.01, 0.001],
            domain,
            controller,
            velocity: 1.0,
            command: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tau.is_finite() && self.tau > 0.0) {
            return Err(Error::Invalid(format!("tau must be > 0, got {}", self.tau)));
        }
        check_dim(self.dim(), self.noise.len())?;
        if self.noise.iter().any(|s| !(s.is_finite() && *s >= 0.0)) {
            return Err(Error::Invalid("noise standard deviations must be >= 0".into()));
        }
        match self.kind {
            SystemKind::Barr3 => check_dim(2, self.dim())?,
            SystemKind::Dubins => check_dim(3, self.dim())?,
            SystemKind::UserMap => {
                if self.command.is_empty() {
                    return Err(Error::Invalid("user-map systems need a command".into()));
                }
            }
        }
        if let Controller::Mlp(m) = &self.controller {
            m.validate()?;
            check_dim(self.dim(), m.input_dim())?;
        }
        Ok(())
    }

    /// Noise-free successor.
    pub fn drift(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.dim(), x.len())?;
        let t = self.tau;
        match self.kind {
            SystemKind::Barr3 => Ok(vec![x[0] + t * x[1], x[1] + t * (x[0].powi(3) / 3.0 - x[0] - x[1])]),
            SystemKind::Dubins => {
                let u = self.controller.input(x)?;
                let v = self.velocity;
                Ok(vec![x[0] + t * v * x[2].cos(), x[1] + t * v * x[2].sin(), x[2] + t * u])
            }
            SystemKind::UserMap => Ok(self.external_drift(&[x.to_vec()])?.remove(0)),
        }
    }

    /// Runs the user command once: states go to stdin as CSV rows, successors
    /// are read back from stdout in the same format.
    pub fn external_drift(&self, states: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        let (prog, args) = self.command.split_first().ok_or_else(|| Error::Config("empty user-map command".into()))?;
        let mut child = Command::new(prog)
            .args(args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .spawn()
            .map_err(|e| Error::Backend(format!("cannot run `{prog}`: {e}")))?;
        let mut input = String::new();
        for s in states {
            let row: Vec<String> = s.iter().map(|v| format!("{v:?}")).collect();
            input.push_str(&row.join(","));
            input.push('\n');
        }
        child.stdin.take().expect("piped stdin").write_all(input.as_bytes())?;
        let out = child.wait_with_output()?;
        if !out.status.success() {
            return Err(Error::Backend(format!("`{prog}` exited with {}", out.status)));
        }
        let text = String::from_utf8_lossy(&out.stdout);
        let rows: Vec<Vec<f64>> = text
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(|l| {
                l.split(',')
                    .map(|v| v.trim().parse::<f64>().map_err(|_| Error::Parse(format!("bad successor value `{v}`"))))
                    .collect()
            })
            .collect::<Result<_>>()?;
        check_dim(states.len(), rows.len())?;
        for r in &rows {
            check_dim(self.dim(), r.len())?;
        }
        Ok(rows)
    }

    fn add_noise(&self, x: &mut [f64], rng: &mut impl Rng) {
        for (v, s) in x.iter_mut().zip(&self.noise) {
            let z: f64 = rng.sample(StandardNormal);
            *v += s * z;
        }
    }
}

pub fn step(spec: &SystemSpec, x: &[f64], rng: &mut impl Rng) -> Result<Vec<f64>> {
    let mut next = spec.drift(x)?;
    spec.add_noise(&mut next, rng);
    Ok(next)
}

fn uniform_in(domain: &Domain, rng: &mut impl Rng) -> Vec<f64> {
    (0..domain.dim()).map(|i| domain.lower[i] + domain.width(i) * rng.random::<f64>()).collect()
}

/// `n` uniform states over the domain with one noisy successor each. Chunks
/// of 1024 samples use stream `chunk index` under [`STREAM_DATA`].
pub fn generate_dataset(spec: &SystemSpec, n: usize, seed: u64) -> Result<SampleSet> {
    if n == 0 {
        return Err(Error::Invalid("dataset size must be >= 1".into()));
    }
    spec.validate()?;
    let chunks = n.div_ceil(CHUNK);
    let parts: Vec<(Vec<Vec<f64>>, Vec<Vec<f64>>)> = (0..chunks)
        .into_par_iter()
        .map(|c| -> Result<_> {
            let mut rng = stream_rng(seed, STREAM_DATA, c as u64);
            let len = CHUNK.min(n - c * CHUNK);
            let xs: Vec<Vec<f64>> = (0..len).map(|_| uniform_in(&spec.domain, &mut rng)).collect();
            let mut next = if spec.kind == SystemKind::UserMap {
                spec.external_drift(&xs)?
            } else {
                xs.iter().map(|x| spec.drift(x)).collect::<Result<Vec<_>>>()?
            };
            for s in next.iter_mut() {
                spec.add_noise(s, &mut rng);
            }
            Ok((xs, next))
        })
        .collect::<Result<_>>()?;
    let (mut xs, mut ys) = (Vec::with_capacity(n), Vec::with_capacity(n));
    for (a, b) in parts {
        xs.extend(a);
        ys.extend(b);
    }
    SampleSet::from_rows(&xs, &ys)
}

/// `T + 1` states from `x0`; safe iff none of them lies in `unsafe_set`.
/// Leaving the domain is not by itself a violation.
pub fn rollout(
    spec: &SystemSpec,
    x0: &[f64],
    horizon: usize,
    unsafe_set: Option<&Region>,
    rng: &mut impl Rng,
) -> Result<(Vec<Vec<f64>>, bool)> {
    if horizon < 1 {
        return Err(Error::Invalid("horizon must be >= 1".into()));
    }
    check_dim(spec.dim(), x0.len())?;
    let hit = |x: &[f64]| unsafe_set.is_some_and(|r| r.contains(x));
    let mut traj = vec![x0.to_vec()];
    let mut safe = !hit(x0);
    for _ in 0..horizon {
        let next = step(spec, traj.last().expect("nonempty"), rng)?;
        safe &= !hit(&next);
        traj.push(next);
    }
    Ok((traj, safe))
}

/// Writes `t,x1..xn,safe`, where `safe` is 1 while no unsafe state has been
/// visited up to and including `t`.
pub fn write_trajectory_csv(path: &Path, traj: &[Vec<f64>], unsafe_set: Option<&Region>) -> Result<()> {
    let n = traj.first().map_or(0, |x| x.len());
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::Parse(e.to_string()))?;
    let mut header = vec!["t".to_string()];
    header.extend((1..=n).map(|i| format!("x{i}")));
    header.push("safe".into());
    w.write_record(&header).map_err(|e| Error::Parse(e.to_string()))?;
    let mut safe = true;
    for (t, x) in traj.iter().enumerate() {
        safe &= !unsafe_set.is_some_and(|r| r.contains(x));
        let mut rec = vec![t.to_string()];
        rec.extend(x.iter().map(|v| format!("{v:?}")));
        rec.push(u8::from(safe).to_string());
        w.write_record(&rec).map_err(|e| Error::Parse(e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quiet(mut s: SystemSpec) -> SystemSpec {
        s.noise.iter_mut().for_each(|v| *v = 0.0);
        s
    }

    fn barr3() -> SystemSpec {
        SystemSpec::barr3(Domain::new(vec![-3.0, -2.0], vec![2.5, 1.0]).unwrap())
    }

    fn dubins(c: Controller) -> SystemSpec {
        SystemSpec::dubins(Domain::new(vec![-1.0, -1.5, -1.0], vec![5.0, 1.5, 1.0]).unwrap(), c)
    }

    #[test]
    fn barr3_drift() {
        let s = quiet(barr3());
        let mut rng = stream_rng(0, 0, 0);
        assert_eq!(step(&s, &[0.0, 0.0], &mut rng).unwrap(), vec![0.0, 0.0]);
        let x = step(&s, &[1.0, 0.5], &mut rng).unwrap();
        assert!((x[0] - 1.05).abs() < 1e-15);
        assert!((x[1] - (0.5 + 0.1 * (1.0 / 3.0 - 1.0 - 0.5))).abs() < 1e-15);
    }

    #[test]
    fn dubins_straight_line() {
        let s = quiet(dubins(Controller::Zero));
        let x = step(&s, &[0.2, 0.3, 0.0], &mut stream_rng(0, 0, 0)).unwrap();
        assert_eq!(x, vec![0.7, 0.3, 0.0]);
    }

    #[test]
    fn mlp_forward_cases() {
        let zero = Mlp {
            layers: vec![Layer { weights: vec![vec![0.0, 0.0]], bias: vec![0.0], activation: Activation::Identity }],
            clamp: None,
        };
        assert_eq!(nn_forward(&zero, &[3.0, -1.0]).unwrap(), vec![0.0]);
        let pi = std::f64::consts::PI;
        let clamp = Mlp {
            layers: vec![Layer { weights: vec![vec![1.0]], bias: vec![0.0], activation: Activation::Identity }],
            clamp: Some([-pi, pi]),
        };
        assert_eq!(nn_forward(&clamp, &[10.0]).unwrap(), vec![pi]);
        let two = Mlp {
            layers: vec![
                Layer { weights: vec![vec![1.0, -1.0], vec![2.0, 0.5]], bias: vec![0.5, -3.0], activation: Activation::Relu },
                Layer { weights: vec![vec![1.5, -2.0]], bias: vec![0.25], activation: Activation::Identity },
            ],
            clamp: None,
        };
        // hidden = relu([1 - 2 + 0.5, 2 + 1 - 3]) = [0, 0] ; x = (1, 2)
        assert_eq!(nn_forward(&two, &[1.0, 2.0]).unwrap(), vec![0.25]);
        // hidden = relu([3 + 0.5, 6 - 3]) = [3.5, 3]
        assert_eq!(nn_forward(&two, &[3.0, 0.0]).unwrap(), vec![1.5 * 3.5 - 2.0 * 3.0 + 0.25]);
        assert!(nn_forward(&two, &[1.0]).is_err());
    }

    #[test]
    fn mlp_validation() {
        let bad = Mlp {
            layers: vec![
                Layer { weights: vec![vec![1.0, 1.0]], bias: vec![0.0], activation: Activation::Tanh },
                Layer { weights: vec![vec![1.0, 1.0]], bias: vec![0.0], activation: Activation::Tanh },
            ],
            clamp: None,
        };
        assert!(bad.validate().is_err());
        let nan = Mlp {
            layers: vec![Layer { weights: vec![vec![f64::NAN]], bias: vec![0.0], activation: Activation::Tanh }],
            clamp: None,
        };
        assert!(nan.validate().is_err());
    }

    #[test]
    fn dataset_is_seeded() {
        let s = barr3();
        assert_eq!(generate_dataset(&s, 1, 3).unwrap().len(), 1);
        let a = generate_dataset(&s, 2000, 11).unwrap();
        assert_eq!(a, generate_dataset(&s, 2000, 11).unwrap());
        assert_ne!(a, generate_dataset(&s, 2000, 12).unwrap());
        assert!(generate_dataset(&s, 0, 1).is_err());
    }

    #[test]
    fn dataset_noise_is_centered() {
        let s = barr3();
        let n = 10_000;
        let d = generate_dataset(&s, n, 5).unwrap();
        for axis in 0..2 {
            let mean: f64 =
                (0..n).map(|i| d.successor(i)[axis] - s.drift(d.state(i)).unwrap()[axis]).sum::<f64>() / n as f64;
            assert!(mean.abs() < 3.0 * 0.1 / (n as f64).sqrt());
        }
    }

    #[test]
    fn rollout_flags() {
        let s = barr3();
        let ball = Region::ball(vec![0.0, 0.0], 0.5).unwrap();
        let (traj, safe) = rollout(&s, &[0.0, 0.0], 3, Some(&ball), &mut stream_rng(1, 2, 3)).unwrap();
        assert_eq!(traj.len(), 4);
        assert!(!safe);
        let (_, safe) = rollout(&s, &[1.0, 0.5], 5, None, &mut stream_rng(1, 2, 3)).unwrap();
        assert!(safe);
    }

    #[test]
    fn wall_crossing_step() {
        let s = quiet(dubins(Controller::Zero));
        let wall = Region::boxed(vec![1.2, -10.0, -10.0], vec![10.0, 10.0, 10.0]).unwrap();
        // x_t = 0.5 t reaches the wall at t = 3.
        let (traj, safe) = rollout(&s, &[0.0, 0.0, 0.0], 2, Some(&wall), &mut stream_rng(0, 0, 0)).unwrap();
        assert!(safe && traj.len() == 3);
        let (_, safe) = rollout(&s, &[0.0, 0.0, 0.0], 3, Some(&wall), &mut stream_rng(0, 0, 0)).unwrap();
        assert!(!safe);
    }

    #[test]
    fn steer_law_tracks_bump() {
        let law = SteerLaw { offset: 0.7, center: 2.5, width: 1.0, gain_y: 1.0, gain_phi: 2.0, max_steer: 1.0, split: None };
        assert!(law.eval(&[2.5, 0.0, 0.0]) > 0.0);
        assert!(law.eval(&[2.5, 0.7, 0.0]).abs() < 1e-12);
        assert_eq!(law.eval(&[2.5, -5.0, 0.0]), 1.0);
        let split = SteerLaw { split: Some(0.1), ..law };
        assert!(split.eval(&[2.5, -0.3, 0.0]) < 0.0);
        assert!(split.eval(&[2.5, 0.3, 0.0]) > 0.0);
        assert_eq!(split.eval(&[2.5, 0.0, 0.0]), 0.0);
    }
}
