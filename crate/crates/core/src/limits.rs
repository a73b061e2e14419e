//! Monte-Carlo samplers for the limit laws of the oracle change-point
//! estimator, plus distance measures used to compare them with bootstrap output.
//!
//! * Local changes (`d -> 0`): `sigma^-2 d^2 (theta~ - theta)` converges to
//!   `argmax_s { W_s - |s| / sqrt(6) }` for a two-sided standard Wiener process.
//! * Fixed changes: `theta~ - theta` converges to
//!   `argmax_l { -d Gamma(l) - |l| d^2 }` where `Gamma` is the two-sided random
//!   walk with increments `e1 - 2 e2 + e3` of three independent error copies.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::noise::{ErrorModel, NoiseSampler};
use crate::rng::stream_rng;

const DRIFT: f64 = 0.408_248_290_463_863; // 1 / sqrt(6)

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WienerArgmaxConfig {
    /// Truncation `c` of the index set `[-c, c]`.
    pub horizon: f64,
    pub grid_step: f64,
    pub draws: usize,
    pub seed: u64,
}

impl Default for WienerArgmaxConfig {
    fn default() -> Self {
        Self {
            horizon: 100.0,
            grid_step: 0.05,
            draws: 10_000,
            seed: 0,
        }
    }
}

impl WienerArgmaxConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "horizon",
                reason: format!("{} is not positive", self.horizon),
            });
        }
        if !(self.grid_step > 0.0 && self.grid_step <= self.horizon / 100.0) {
            return Err(Error::InvalidParameter {
                name: "grid_step",
                reason: format!(
                    "{} must be positive and at most horizon / 100 = {}",
                    self.grid_step,
                    self.horizon / 100.0
                ),
            });
        }
        if self.draws == 0 {
            return Err(Error::InvalidParameter {
                name: "draws",
                reason: "at least one draw is required".into(),
            });
        }
        Ok(())
    }
}

fn wiener_draw<R: Rng>(rng: &mut R, steps: usize, h: f64, left: &mut Vec<f64>) -> f64 {
    let sd = h.sqrt();
    // Left branch: objective at s = -h, -2h, ..., -steps*h.
    left.clear();
    let mut w = 0.0;
    for i in 1..=steps {
        w += sd * rng.sample::<f64, _>(StandardNormal);
        left.push(w - DRIFT * i as f64 * h);
    }
    // Scan from s = -c upwards so the first maximiser wins.
    let mut best = (-(steps as f64) * h, f64::NEG_INFINITY);
    for (i, &v) in left.iter().enumerate().rev() {
        if v > best.1 {
            best = (-((i + 1) as f64) * h, v);
        }
    }
    if 0.0 > best.1 {
        best = (0.0, 0.0);
    }
    let mut w = 0.0;
    for i in 1..=steps {
        w += sd * rng.sample::<f64, _>(StandardNormal);
        let v = w - DRIFT * i as f64 * h;
        if v > best.1 {
            best = (i as f64 * h, v);
        }
    }
    best.0
}

/// Draws from the grid argmax of `W_s - |s| / sqrt(6)` on `[-c, c]`, built
/// from two independent Gaussian random walks glued at zero.
pub fn sample_wiener_argmax(cfg: &WienerArgmaxConfig) -> Result<Vec<f64>> {
    cfg.validate()?;
    let steps = (cfg.horizon / cfg.grid_step).round() as usize;
    Ok((0..cfg.draws)
        .into_par_iter()
        .map_init(
            || Vec::with_capacity(steps),
            |buf, i| {
                let mut rng = stream_rng(cfg.seed, i as u64);
                wiener_draw(&mut rng, steps, cfg.grid_step, buf)
            },
        )
        .collect())
}

/// Error law for the three independent copies in the fixed-change limit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorSampler {
    Model(ErrorModel),
    /// Draws with replacement from (centred) residuals.
    Empirical(Vec<f64>),
}

impl ErrorSampler {
    /// Empirical sampler; residuals are centred at their mean.
    pub fn empirical(residuals: &[f64]) -> Self {
        let m = residuals.iter().sum::<f64>() / residuals.len().max(1) as f64;
        Self::Empirical(residuals.iter().map(|r| r - m).collect())
    }

    pub fn sd(&self) -> f64 {
        match self {
            Self::Model(m) => m.sd(),
            Self::Empirical(r) => (r.iter().map(|x| x * x).sum::<f64>() / r.len() as f64).sqrt(),
        }
    }
}

enum Draw<'a> {
    Noise(NoiseSampler),
    Pool(&'a [f64]),
}

impl Draw<'_> {
    fn draw<R: Rng>(&self, rng: &mut R) -> f64 {
        match self {
            Draw::Noise(s) => s.sample(rng),
            Draw::Pool(p) => p[rng.random_range(0..p.len())],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixedArgmaxConfig {
    pub jump: f64,
    /// Truncation `L` of the index set `{-L, ..., L}`.
    pub horizon: usize,
    pub errors: ErrorSampler,
    pub draws: usize,
    pub seed: u64,
}

/// Smallest `L` at which the drift `L d^2` exceeds six standard deviations
/// `6 |d| sigma sqrt(6 L)` of the noise term.
pub fn default_fixed_horizon(jump: f64, sd: f64) -> usize {
    ((216.0 * sd * sd / (jump * jump)).ceil() as usize).max(1)
}

impl FixedArgmaxConfig {
    pub fn validate(&self) -> Result<()> {
        if self.jump == 0.0 || !self.jump.is_finite() {
            return Err(Error::InvalidParameter {
                name: "jump",
                reason: "the jump size must be nonzero and finite".into(),
            });
        }
        if self.horizon == 0 {
            return Err(Error::InvalidParameter {
                name: "horizon",
                reason: "L must be at least 1".into(),
            });
        }
        if self.draws == 0 {
            return Err(Error::InvalidParameter {
                name: "draws",
                reason: "at least one draw is required".into(),
            });
        }
        match &self.errors {
            ErrorSampler::Model(m) => m.validate(),
            ErrorSampler::Empirical(r) if r.is_empty() => Err(Error::InvalidParameter {
                name: "errors",
                reason: "empty residual pool".into(),
            }),
            ErrorSampler::Empirical(_) => Ok(()),
        }
    }
}

fn fixed_draw<R: Rng>(rng: &mut R, cfg: &FixedArgmaxConfig, noise: &Draw<'_>, left: &mut Vec<f64>) -> i64 {
    let d = cfg.jump;
    let d2 = d * d;
    let increment = |rng: &mut R| noise.draw(rng) - 2.0 * noise.draw(rng) + noise.draw(rng);
    left.clear();
    let mut gamma = 0.0;
    for l in 1..=cfg.horizon {
        gamma += increment(rng);
        left.push(-d * gamma - l as f64 * d2);
    }
    let mut best = (0i64, f64::NEG_INFINITY);
    for (i, &v) in left.iter().enumerate().rev() {
        if v > best.1 {
            best = (-((i + 1) as i64), v);
        }
    }
    if 0.0 > best.1 {
        best = (0, 0.0);
    }
    let mut gamma = 0.0;
    for l in 1..=cfg.horizon {
        gamma += increment(rng);
        let v = -d * gamma - l as f64 * d2;
        if v > best.1 {
            best = (l as i64, v);
        }
    }
    best.0
}

/// Draws from `argmax_l { -d Gamma(l) - |l| d^2 }` over `l in [-L, L]`,
/// first maximiser on ties.
pub fn sample_fixed_argmax(cfg: &FixedArgmaxConfig) -> Result<Vec<i64>> {
    cfg.validate()?;
    let noise = match &cfg.errors {
        ErrorSampler::Model(m) => Draw::Noise(m.sampler()),
        ErrorSampler::Empirical(pool) => {
            log::warn!("empirical errors are discrete; argmax ties occur with positive probability");
            Draw::Pool(pool)
        }
    };
    Ok((0..cfg.draws)
        .into_par_iter()
        .map_init(
            || Vec::with_capacity(cfg.horizon),
            |buf, i| {
                let mut rng = stream_rng(cfg.seed, i as u64);
                fixed_draw(&mut rng, cfg, &noise, buf)
            },
        )
        .collect())
}

/// Two-sample Kolmogorov–Smirnov statistic `sup_x |F_a(x) - F_b(x)|`.
pub fn ks_distance(a: &[f64], b: &[f64]) -> f64 {
    assert!(!a.is_empty() && !b.is_empty(), "empty sample");
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut sup = 0.0f64;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        sup = sup.max((i as f64 / na - j as f64 / nb).abs());
    }
    sup
}

fn pmf(sample: &[i64]) -> std::collections::BTreeMap<i64, f64> {
    let mut m = std::collections::BTreeMap::new();
    let w = 1.0 / sample.len() as f64;
    for &x in sample {
        *m.entry(x).or_insert(0.0) += w;
    }
    m
}

/// Total-variation distance `(1/2) sum_x |p_a(x) - p_b(x)|` on the integers.
pub fn tv_distance(a: &[i64], b: &[i64]) -> f64 {
    assert!(!a.is_empty() && !b.is_empty(), "empty sample");
    let (pa, pb) = (pmf(a), pmf(b));
    let keys: std::collections::BTreeSet<i64> = pa.keys().chain(pb.keys()).copied().collect();
    0.5 * keys
        .iter()
        .map(|k| (pa.get(k).unwrap_or(&0.0) - pb.get(k).unwrap_or(&0.0)).abs())
        .sum::<f64>()
}

/// Total-variation distance after collapsing values outside `[lo, hi]` into
/// a single overflow cell.
pub fn tv_distance_on(a: &[i64], b: &[i64], lo: i64, hi: i64) -> f64 {
    let collapse = |s: &[i64]| -> Vec<i64> {
        s.iter().map(|&x| if (lo..=hi).contains(&x) { x } else { hi + 1 }).collect()
    };
    tv_distance(&collapse(a), &collapse(b))
}

/// A Monte-Carlo sample on the real line or on the integers.
#[derive(Debug, Clone, PartialEq)]
pub enum Sample {
    Real(Vec<f64>),
    Integer(Vec<i64>),
}

/// KS distance for real samples, total variation for integer samples.
pub fn distribution_distance(a: &Sample, b: &Sample) -> Result<f64> {
    match (a, b) {
        (Sample::Real(x), Sample::Real(y)) if !x.is_empty() && !y.is_empty() => Ok(ks_distance(x, y)),
        (Sample::Integer(x), Sample::Integer(y)) if !x.is_empty() && !y.is_empty() => {
            Ok(tv_distance(x, y))
        }
        (Sample::Real(_), Sample::Integer(_)) | (Sample::Integer(_), Sample::Real(_)) => {
            Err(Error::InvalidParameter {
                name: "sample",
                reason: "cannot compare a real sample with an integer sample".into(),
            })
        }
        _ => Err(Error::InvalidParameter {
            name: "sample",
            reason: "samples must be nonempty".into(),
        }),
    }
}
