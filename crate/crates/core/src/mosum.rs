//! Moving-sum statistics, local scale estimates and asymptotic thresholds.
//!
//! Every routine runs in `O(n)` per bandwidth using compensated prefix sums.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{check_alpha, Error, Result};
use crate::series::{Bandwidth, PrefixSums, TimeSeries};

/// Lower bound applied to scale estimates whenever they are used as divisors
/// or threshold multipliers.
pub const SCALE_FLOOR: f64 = 1e-12;

/// MOSUM statistic and local scale over the valid range `G_l ..= n - G_r`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MosumProfile {
    pub bandwidth: Bandwidth,
    pub n: usize,
    stats: Vec<f64>,
    local_scale: Vec<f64>,
}

impl MosumProfile {
    /// First location with a defined statistic (`G_l`).
    pub fn start(&self) -> usize {
        self.bandwidth.left
    }

    /// Last location with a defined statistic (`n - G_r`).
    pub fn end(&self) -> usize {
        self.n - self.bandwidth.right
    }

    /// Statistic at location `k`; panics outside the valid range.
    pub fn stat(&self, k: usize) -> f64 {
        self.stats[k - self.start()]
    }

    /// Local scale estimate at `k` (square root of the averaged window variances).
    pub fn local_scale(&self, k: usize) -> f64 {
        self.local_scale[k - self.start()]
    }

    pub fn stats(&self) -> &[f64] {
        &self.stats
    }

    pub fn local_scales(&self) -> &[f64] {
        &self.local_scale
    }

    /// Median of the local scale estimates over the valid range.
    pub fn median_scale(&self) -> f64 {
        let mut v = self.local_scale.clone();
        v.sort_by(f64::total_cmp);
        let m = v.len();
        if m % 2 == 1 {
            v[m / 2]
        } else {
            0.5 * (v[m / 2 - 1] + v[m / 2])
        }
    }

    /// `(k, T_k)` pairs in increasing `k`.
    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        let start = self.start();
        self.stats.iter().enumerate().map(move |(i, &t)| (start + i, t))
    }
}

/// How the noise level entering the detection threshold is estimated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScaleEstimator {
    /// Averaged two-window variance evaluated at the candidate location.
    #[default]
    Local,
    /// Median of the local estimates over all locations.
    GlobalMedian,
}

/// Statistic at a single location from precomputed prefix sums.
#[inline]
pub(crate) fn stat_at(prefix: &PrefixSums, k: usize, bw: Bandwidth) -> f64 {
    let left = prefix.sum(k - bw.left, k) / bw.left as f64;
    let right = prefix.sum(k, k + bw.right) / bw.right as f64;
    bw.scale() * (left - right)
}

/// MOSUM statistic `sqrt(G_l G_r / (G_l + G_r)) (mean(k-G_l, k] - mean(k, k+G_r])`
/// together with the local scale, for every `k` in the valid range.
pub fn compute_mosum(series: &TimeSeries, bw: Bandwidth) -> Result<MosumProfile> {
    let n = series.len();
    bw.validate(n)?;
    let prefix = PrefixSums::new(series.values().iter().copied());
    let stats = bw.valid_range(n).map(|k| stat_at(&prefix, k, bw)).collect();
    let local_scale = local_variance_with(series, bw)
        .into_iter()
        .map(f64::sqrt)
        .collect();
    Ok(MosumProfile {
        bandwidth: bw,
        n,
        stats,
        local_scale,
    })
}

/// Averaged within-window (population) variances at each valid `k`:
/// `((1/G_l) SS(k-G_l, k] + (1/G_r) SS(k, k+G_r]) / 2`.
pub fn local_variance_profile(series: &TimeSeries, bw: Bandwidth) -> Result<Vec<f64>> {
    bw.validate(series.len())?;
    Ok(local_variance_with(series, bw))
}

fn local_variance_with(series: &TimeSeries, bw: Bandwidth) -> Vec<f64> {
    let n = series.len();
    // Centre first so the moment identity does not cancel catastrophically.
    let centre = crate::series::mean(series.values());
    let first = PrefixSums::new(series.values().iter().map(|x| x - centre));
    let second = PrefixSums::new(series.values().iter().map(|x| (x - centre) * (x - centre)));
    let window_var = |a: usize, b: usize| {
        let m = (b - a) as f64;
        let mu = first.sum(a, b) / m;
        (second.sum(a, b) / m - mu * mu).max(0.0)
    };
    bw.valid_range(n)
        .map(|k| 0.5 * (window_var(k - bw.left, k) + window_var(k, k + bw.right)))
        .collect()
}

/// Asymptotic critical value `D_n(G; alpha) = (b + c_alpha) / a` with
/// `a = sqrt(2 log(n/G))`,
/// `b = 2 log(n/G) + log log(n/G) / 2 + log(3/2) - log(pi) / 2` and
/// `c_alpha = -log log((1 - alpha)^(-1/2))`, using `G = min(G_l, G_r)`.
pub fn critical_value(n: usize, bw: Bandwidth, alpha: f64) -> Result<f64> {
    check_alpha("alpha", alpha)?;
    bw.validate(n)?;
    let ratio = n as f64 / bw.min() as f64;
    if ratio <= std::f64::consts::E {
        return Err(Error::Degenerate(format!(
            "n / G = {ratio:.3} must exceed e for the critical value to exist"
        )));
    }
    let log_ratio = ratio.ln();
    let a = (2.0 * log_ratio).sqrt();
    let b = 2.0 * log_ratio + 0.5 * log_ratio.ln() + 1.5f64.ln() - 0.5 * PI.ln();
    let c_alpha = -(-0.5 * (1.0 - alpha).ln()).ln();
    Ok((b + c_alpha) / a)
}
