//! Segment-wise bootstrap of change-point locations and the pointwise and
//! uniform confidence intervals derived from it.
//!
//! Each replicate resamples every estimated segment `(theta_j, theta_{j+1}]`
//! with replacement, recomputes the MOSUM statistic with the bandwidth that
//! detected `theta_j`, and records the first maximiser of `|T|` within
//! `(theta_j - H_j, theta_j + H_j]`, `H_j = min(G_j, floor(2 delta_j / 3))`.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::detector::{estimate_jump, estimate_local_variance, min_spacing, DetectionResult};
use crate::error::{check_alpha, Error, Result};
use crate::mosum::{stat_at, SCALE_FLOOR};
use crate::rng::stream_rng;
use crate::series::{PrefixSums, TimeSeries};

/// Slack used when comparing an empirical CDF value with `1 - alpha`, so that
/// levels such as `1 - 0.9` do not lose a count to representation error.
const LEVEL_EPS: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapConfig {
    pub replicates: usize,
    pub master_seed: u64,
    pub alphas: Vec<f64>,
}

impl BootstrapConfig {
    pub fn validate(&self) -> Result<()> {
        if self.replicates == 0 {
            return Err(Error::InvalidParameter {
                name: "replicates",
                reason: "at least one bootstrap replicate is required".into(),
            });
        }
        if self.alphas.is_empty() {
            return Err(Error::InvalidParameter {
                name: "alphas",
                reason: "at least one level is required".into(),
            });
        }
        self.alphas.iter().try_for_each(|&a| check_alpha("alphas", a))
    }
}

/// Half-widths `(H_l, H_r)` of the bootstrap search window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchWindow {
    pub left: usize,
    pub right: usize,
}

/// Search window for estimate `j`. For a symmetric bandwidth both sides use
/// `min(G_j, floor(2 delta_hat_j / 3))`; for an asymmetric one each side is
/// capped by two thirds of the distance to the neighbour on that side.
pub fn search_window(estimates: &DetectionResult, j: usize) -> SearchWindow {
    let bw = estimates.estimates[j].bandwidth;
    if bw.is_symmetric() {
        let h = bw.left.min(2 * min_spacing(estimates, j) / 3);
        SearchWindow { left: h, right: h }
    } else {
        let b = estimates.boundaries();
        SearchWindow {
            left: bw.left.min(2 * (b[j + 1] - b[j]) / 3),
            right: bw.right.min(2 * (b[j + 2] - b[j + 1]) / 3),
        }
    }
}

/// Inclusive range of candidate locations for estimate `j`, clipped to the
/// valid range of the statistic.
fn candidate_range(estimates: &DetectionResult, j: usize) -> Result<(usize, usize)> {
    let est = &estimates.estimates[j];
    let bw = est.bandwidth;
    bw.validate(estimates.n)?;
    let h = search_window(estimates, j);
    let lo = (est.location.saturating_sub(h.left) + 1).max(bw.left);
    let hi = (est.location + h.right).min(estimates.n - bw.right);
    if lo > hi {
        return Err(Error::EmptyWindow {
            index: j + 1,
            location: est.location,
        });
    }
    Ok((lo, hi))
}

fn resample_into<R: Rng + ?Sized>(values: &[f64], boundaries: &[usize], rng: &mut R, out: &mut Vec<f64>) {
    out.clear();
    for w in boundaries.windows(2) {
        let seg = &values[w[0]..w[1]];
        out.extend((0..seg.len()).map(|_| seg[rng.random_range(0..seg.len())]));
    }
}

/// Draws each segment between consecutive estimates (sentinels `0`, `n`)
/// uniformly with replacement from that segment's own observations.
pub fn resample_segments(series: &TimeSeries, estimates: &DetectionResult, seed: u64) -> TimeSeries {
    let mut rng = stream_rng(seed, 0);
    let mut out = Vec::with_capacity(series.len());
    resample_into(series.values(), &estimates.boundaries(), &mut rng, &mut out);
    TimeSeries::new(out).expect("resampling preserves length and finiteness")
}

fn window_argmax(prefix: &PrefixSums, estimates: &DetectionResult, j: usize, range: (usize, usize)) -> usize {
    let bw = estimates.estimates[j].bandwidth;
    let mut best = (range.0, f64::NEG_INFINITY);
    for k in range.0..=range.1 {
        let a = stat_at(prefix, k, bw).abs();
        if a > best.1 {
            best = (k, a);
        }
    }
    best.0
}

/// First maximiser of `|T_k(G_j; X*)|` over the search window of estimate `j`.
pub fn replicate_maximiser(boot: &TimeSeries, estimates: &DetectionResult, j: usize) -> Result<usize> {
    let range = candidate_range(estimates, j)?;
    let prefix = PrefixSums::new(boot.values().iter().copied());
    Ok(window_argmax(&prefix, estimates, j, range))
}

/// Replicate deviations `theta*_j^(b) - theta_hat_j`, stored row-major
/// (one row of `q` entries per replicate).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapDeviations {
    pub locations: Vec<usize>,
    pub windows: Vec<SearchWindow>,
    pub replicates: usize,
    deviations: Vec<i64>,
}

impl BootstrapDeviations {
    /// Builds a matrix from explicit rows; every row must have one entry per location.
    pub fn from_rows(locations: Vec<usize>, windows: Vec<SearchWindow>, rows: &[Vec<i64>]) -> Result<Self> {
        let q = locations.len();
        if windows.len() != q || rows.iter().any(|r| r.len() != q) {
            return Err(Error::InvalidModel("deviation rows do not match locations".into()));
        }
        Ok(Self {
            locations,
            windows,
            replicates: rows.len(),
            deviations: rows.concat(),
        })
    }

    pub fn q(&self) -> usize {
        self.locations.len()
    }

    pub fn row(&self, b: usize) -> &[i64] {
        let q = self.q();
        &self.deviations[b * q..(b + 1) * q]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[i64]> + '_ {
        (0..self.replicates).map(move |b| self.row(b))
    }

    /// All replicate deviations of change point `j`.
    pub fn column(&self, j: usize) -> Vec<i64> {
        self.rows().map(|r| r[j]).collect()
    }
}

/// Repeats resampling and window maximisation `B` times. Replicate `b` draws
/// from the stream `(master_seed, b)`, so the matrix does not depend on the
/// number of worker threads.
pub fn run_bootstrap(
    series: &TimeSeries,
    estimates: &DetectionResult,
    cfg: &BootstrapConfig,
) -> Result<BootstrapDeviations> {
    cfg.validate()?;
    let q = estimates.q();
    let locations = estimates.locations();
    let windows: Vec<SearchWindow> = (0..q).map(|j| search_window(estimates, j)).collect();
    let ranges = (0..q)
        .map(|j| candidate_range(estimates, j))
        .collect::<Result<Vec<_>>>()?;
    if q == 0 {
        return Ok(BootstrapDeviations {
            locations,
            windows,
            replicates: cfg.replicates,
            deviations: Vec::new(),
        });
    }
    let boundaries = estimates.boundaries();
    let values = series.values();
    let rows: Vec<Vec<i64>> = (0..cfg.replicates)
        .into_par_iter()
        .map_init(
            || Vec::with_capacity(values.len()),
            |buf, b| {
                let mut rng = stream_rng(cfg.master_seed, b as u64);
                resample_into(values, &boundaries, &mut rng, buf);
                let prefix = PrefixSums::new(buf.iter().copied());
                ranges
                    .iter()
                    .enumerate()
                    .map(|(j, &range)| {
                        window_argmax(&prefix, estimates, j, range) as i64 - locations[j] as i64
                    })
                    .collect()
            },
        )
        .collect();
    BootstrapDeviations::from_rows(locations, windows, &rows)
}

/// Number of observations (out of `total`) needed for an empirical CDF value
/// of at least `1 - alpha`.
fn required_count(total: usize, alpha: f64) -> usize {
    ((1.0 - alpha) * total as f64 - LEVEL_EPS).ceil().max(0.0) as usize
}

/// `inf { c : (1/B) #{|dev| <= c} >= 1 - alpha }` over `c` in `{0} ∪ |devs|`.
pub fn empirical_quantile(devs: &[i64], alpha: f64) -> u64 {
    assert!(!devs.is_empty(), "quantile of an empty deviation set");
    let mut abs: Vec<u64> = devs.iter().map(|d| d.unsigned_abs()).collect();
    abs.sort_unstable();
    match required_count(abs.len(), alpha) {
        0 => 0,
        m => abs[m - 1],
    }
}

/// Real-valued analogue of [`empirical_quantile`] for nonnegative values.
pub fn real_quantile(values: &[f64], alpha: f64) -> f64 {
    assert!(!values.is_empty(), "quantile of an empty sample");
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    match required_count(v.len(), alpha) {
        0 => 0.0,
        m => v[m - 1].max(0.0),
    }
}

/// Closed integer interval `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: usize,
    pub hi: usize,
}

impl Interval {
    pub fn contains(&self, t: usize) -> bool {
        self.lo <= t && t <= self.hi
    }

    pub fn length(&self) -> usize {
        self.hi - self.lo
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IntervalKind {
    Pointwise,
    Uniform,
}

/// Intervals for every estimate at one level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelIntervals {
    pub alpha: f64,
    /// `Q_j(alpha)` per change point (pointwise) or the single `Q(alpha)` (uniform).
    pub quantiles: Vec<f64>,
    pub intervals: Vec<Interval>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalSet {
    pub kind: IntervalKind,
    pub centres: Vec<usize>,
    pub levels: Vec<LevelIntervals>,
}

impl IntervalSet {
    pub fn level(&self, alpha: f64) -> Option<&LevelIntervals> {
        self.levels.iter().find(|l| l.alpha == alpha)
    }
}

fn clip(n: usize, lo: f64, hi: f64) -> Interval {
    Interval {
        lo: lo.max(1.0) as usize,
        hi: hi.min(n as f64) as usize,
    }
}

/// `[theta_j - Q_j(alpha), theta_j + Q_j(alpha)]`, clipped to `[1, n]`.
pub fn pointwise_intervals(
    estimates: &DetectionResult,
    devs: &BootstrapDeviations,
    alphas: &[f64],
) -> IntervalSet {
    let columns: Vec<Vec<i64>> = (0..devs.q()).map(|j| devs.column(j)).collect();
    let levels = alphas
        .iter()
        .map(|&alpha| {
            let quantiles: Vec<f64> = columns
                .iter()
                .map(|c| empirical_quantile(c, alpha) as f64)
                .collect();
            let intervals = estimates
                .locations()
                .into_iter()
                .zip(&quantiles)
                .map(|(t, &qj)| clip(estimates.n, t as f64 - qj, t as f64 + qj))
                .collect();
            LevelIntervals {
                alpha,
                quantiles,
                intervals,
            }
        })
        .collect();
    IntervalSet {
        kind: IntervalKind::Pointwise,
        centres: estimates.locations(),
        levels,
    }
}

/// Plug-in jump `d_hat_j` and variance `sigma_hat_j^2` for each estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlugIn {
    pub jump: f64,
    pub variance: f64,
}

impl PlugIn {
    /// `d_hat^2 / sigma_hat^2` with both factors floored.
    pub fn signal_to_noise(&self) -> f64 {
        let d = self.jump.abs().max(SCALE_FLOOR);
        d * d / self.variance.max(SCALE_FLOOR)
    }
}

pub fn plug_in_estimates(series: &TimeSeries, estimates: &DetectionResult) -> Result<Vec<PlugIn>> {
    (0..estimates.q())
        .map(|j| {
            Ok(PlugIn {
                jump: estimate_jump(series, estimates, j)?,
                variance: estimate_local_variance(series, estimates, j)?,
            })
        })
        .collect()
}

/// Per-replicate `max_j (d_hat_j^2 / sigma_hat_j^2) |dev_j|`.
pub fn scaled_maxima(devs: &BootstrapDeviations, snr: &[f64]) -> Vec<f64> {
    devs.rows()
        .map(|row| {
            row.iter()
                .zip(snr)
                .map(|(&d, &r)| r * d.unsigned_abs() as f64)
                .fold(0.0, f64::max)
        })
        .collect()
}

/// Simultaneous intervals `theta_j ± sigma_hat_j^2 Q(alpha) / d_hat_j^2`,
/// rounded outward to integers and clipped to `[1, n]`.
pub fn uniform_intervals(
    series: &TimeSeries,
    estimates: &DetectionResult,
    devs: &BootstrapDeviations,
    alphas: &[f64],
) -> Result<IntervalSet> {
    let centres = estimates.locations();
    if estimates.is_empty() {
        return Ok(IntervalSet {
            kind: IntervalKind::Uniform,
            centres,
            levels: Vec::new(),
        });
    }
    let snr: Vec<f64> = plug_in_estimates(series, estimates)?
        .iter()
        .map(PlugIn::signal_to_noise)
        .collect();
    let maxima = scaled_maxima(devs, &snr);
    let levels = alphas
        .iter()
        .map(|&alpha| {
            let q = real_quantile(&maxima, alpha);
            let intervals = centres
                .iter()
                .zip(&snr)
                .map(|(&t, &r)| {
                    let w = q / r;
                    let lo = (t as f64 - w + LEVEL_EPS).floor();
                    let hi = (t as f64 + w - LEVEL_EPS).ceil();
                    clip(estimates.n, lo, hi)
                })
                .collect();
            LevelIntervals {
                alpha,
                quantiles: vec![q],
                intervals,
            }
        })
        .collect();
    Ok(IntervalSet {
        kind: IntervalKind::Uniform,
        centres,
        levels,
    })
}
