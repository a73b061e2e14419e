//! Change-point location estimators built on MOSUM profiles.
//!
//! Indices `j` in this module are 0-based positions into the sorted estimate
//! list; locations are 1-based boundaries as in [`TimeSeries`].

use serde::{Deserialize, Serialize};

use crate::error::{check_alpha, Error, Result};
use crate::mosum::{compute_mosum, critical_value, MosumProfile, ScaleEstimator, SCALE_FLOOR};
use crate::series::{sum_sq_dev, Bandwidth, PrefixSums, TimeSeries};

/// Piecewise-constant mean model: sorted change points with optional jump
/// sizes and segment levels. Used both as ground truth and as an estimate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChangePointModel {
    pub n: usize,
    locations: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    jumps: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    levels: Option<Vec<f64>>,
}

impl ChangePointModel {
    pub fn new(n: usize, locations: Vec<usize>) -> Result<Self> {
        check_locations(n, &locations)?;
        Ok(Self {
            n,
            locations,
            jumps: None,
            levels: None,
        })
    }

    /// Model with segment levels `mu_0, ..., mu_q`; jumps are derived.
    pub fn with_levels(n: usize, locations: Vec<usize>, levels: Vec<f64>) -> Result<Self> {
        check_locations(n, &locations)?;
        if levels.len() != locations.len() + 1 {
            return Err(Error::InvalidModel(format!(
                "{} levels for {} change points",
                levels.len(),
                locations.len()
            )));
        }
        let jumps = levels.windows(2).map(|w| w[1] - w[0]).collect();
        Ok(Self {
            n,
            locations,
            jumps: Some(jumps),
            levels: Some(levels),
        })
    }

    /// Model from a baseline level and signed jumps `d_j`.
    pub fn with_jumps(n: usize, baseline: f64, locations: Vec<usize>, jumps: &[f64]) -> Result<Self> {
        let mut levels = Vec::with_capacity(jumps.len() + 1);
        levels.push(baseline);
        for d in jumps {
            levels.push(levels.last().unwrap() + d);
        }
        let mut model = Self::with_levels(n, locations, levels)?;
        model.jumps = Some(jumps.to_vec());
        Ok(model)
    }

    pub fn q(&self) -> usize {
        self.locations.len()
    }

    pub fn locations(&self) -> &[usize] {
        &self.locations
    }

    pub fn jumps(&self) -> Option<&[f64]> {
        self.jumps.as_deref()
    }

    pub fn levels(&self) -> Option<&[f64]> {
        self.levels.as_deref()
    }

    /// Locations with the sentinels `0` and `n` attached.
    pub fn boundaries(&self) -> Vec<usize> {
        with_sentinels(self.n, &self.locations)
    }

    /// `delta_j = min(theta_j - theta_{j-1}, theta_{j+1} - theta_j)`.
    pub fn spacing(&self, j: usize) -> usize {
        spacing_of(self.n, &self.locations, j)
    }

    /// The mean function `f_1, ..., f_n`, when levels are known.
    pub fn signal(&self) -> Option<Vec<f64>> {
        let levels = self.levels.as_ref()?;
        let bounds = self.boundaries();
        let mut out = Vec::with_capacity(self.n);
        for (w, &mu) in bounds.windows(2).zip(levels) {
            out.extend(std::iter::repeat_n(mu, w[1] - w[0]));
        }
        Some(out)
    }
}

fn check_locations(n: usize, locations: &[usize]) -> Result<()> {
    if locations.iter().any(|&t| t == 0 || t >= n) {
        return Err(Error::InvalidModel(format!(
            "change points must lie in (0, {n})"
        )));
    }
    if locations.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidModel(
            "change points must be strictly increasing".into(),
        ));
    }
    Ok(())
}

fn with_sentinels(n: usize, locations: &[usize]) -> Vec<usize> {
    let mut v = Vec::with_capacity(locations.len() + 2);
    v.push(0);
    v.extend_from_slice(locations);
    v.push(n);
    v
}

fn spacing_of(n: usize, locations: &[usize], j: usize) -> usize {
    let prev = if j == 0 { 0 } else { locations[j - 1] };
    let next = locations.get(j + 1).copied().unwrap_or(n);
    let t = locations[j];
    (t - prev).min(next - t)
}

/// A single location estimate and the bandwidth that produced it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CandidateEstimate {
    pub location: usize,
    pub bandwidth: Bandwidth,
    /// `|T_k|` at the estimate.
    pub stat_value: f64,
    pub exceeds_threshold: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    SingleScale,
    Multiscale,
    Oracle,
    /// Estimates supplied by the caller.
    External,
}

/// Sorted, distinct change-point estimates for a series of length `n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionResult {
    pub n: usize,
    pub estimates: Vec<CandidateEstimate>,
    pub alpha: f64,
    pub eta: f64,
    pub method: Method,
}

impl DetectionResult {
    /// Wraps externally obtained locations, each with its bandwidth.
    pub fn from_locations(n: usize, locations: &[usize], bandwidths: &[Bandwidth]) -> Result<Self> {
        if locations.len() != bandwidths.len() {
            return Err(Error::InvalidModel(format!(
                "{} locations but {} bandwidths",
                locations.len(),
                bandwidths.len()
            )));
        }
        check_locations(n, locations)?;
        let estimates = locations
            .iter()
            .zip(bandwidths)
            .map(|(&location, &bandwidth)| CandidateEstimate {
                location,
                bandwidth,
                stat_value: f64::NAN,
                exceeds_threshold: true,
            })
            .collect();
        Ok(Self {
            n,
            estimates,
            alpha: f64::NAN,
            eta: f64::NAN,
            method: Method::External,
        })
    }

    pub fn q(&self) -> usize {
        self.estimates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.estimates.is_empty()
    }

    pub fn locations(&self) -> Vec<usize> {
        self.estimates.iter().map(|e| e.location).collect()
    }

    pub fn bandwidths(&self) -> Vec<Bandwidth> {
        self.estimates.iter().map(|e| e.bandwidth).collect()
    }

    /// Estimate locations with sentinels `0` and `n`.
    pub fn boundaries(&self) -> Vec<usize> {
        with_sentinels(self.n, &self.locations())
    }
}

/// Tuning of the threshold-based detectors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectorConfig {
    pub alpha: f64,
    pub eta: f64,
    #[serde(default)]
    pub scale: ScaleEstimator,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self {
            alpha: 0.1,
            eta: 0.4,
            scale: ScaleEstimator::Local,
        }
    }
}

impl DetectorConfig {
    fn validate(&self) -> Result<()> {
        check_alpha("alpha", self.alpha)?;
        if !(self.eta > 0.0 && self.eta < 1.0) {
            return Err(Error::InvalidParameter {
                name: "eta",
                reason: format!("{} is not in (0, 1)", self.eta),
            });
        }
        Ok(())
    }
}

/// Index of the largest `|value|`, first occurrence on ties.
fn first_abs_argmax(values: impl Iterator<Item = (usize, f64)>) -> Option<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for (k, t) in values {
        let a = t.abs();
        if best.is_none_or(|(_, b)| a > b) {
            best = Some((k, a));
        }
    }
    best
}

/// Locations that are the (first) maximiser of `|T|` within their radius.
fn local_maxima(profile: &MosumProfile, radius: usize) -> Vec<usize> {
    let (start, end) = (profile.start(), profile.end());
    let abs: Vec<f64> = profile.stats().iter().map(|t| t.abs()).collect();
    let mut out = Vec::new();
    for k in start..=end {
        let v = abs[k - start];
        let lo = k.saturating_sub(radius).max(start);
        let hi = (k + radius).min(end);
        let left_ok = (lo..k).all(|i| abs[i - start] < v);
        if left_ok && ((k + 1)..=hi).all(|i| abs[i - start] <= v) {
            out.push(k);
        }
    }
    out
}

/// Single-bandwidth MOSUM procedure with the eta-criterion: `k` is reported
/// when it maximises `|T|` within radius `floor(eta G)` (ties to the smallest
/// index) and `|T_k| > sigma_hat * D_n(G; alpha)`.
pub fn detect_single_scale(
    series: &TimeSeries,
    bw: Bandwidth,
    cfg: &DetectorConfig,
) -> Result<DetectionResult> {
    cfg.validate()?;
    let n = series.len();
    let threshold = critical_value(n, bw, cfg.alpha)?;
    let profile = compute_mosum(series, bw)?;
    let radius = (cfg.eta * bw.min() as f64).floor() as usize;
    let global = profile.median_scale().max(SCALE_FLOOR);
    let estimates = local_maxima(&profile, radius)
        .into_iter()
        .filter_map(|k| {
            let scale = match cfg.scale {
                ScaleEstimator::Local => profile.local_scale(k).max(SCALE_FLOOR),
                ScaleEstimator::GlobalMedian => global,
            };
            let stat_value = profile.stat(k).abs();
            (stat_value > scale * threshold).then_some(CandidateEstimate {
                location: k,
                bandwidth: bw,
                stat_value,
                exceeds_threshold: true,
            })
        })
        .collect();
    Ok(DetectionResult {
        n,
        estimates,
        alpha: cfg.alpha,
        eta: cfg.eta,
        method: Method::SingleScale,
    })
}

/// Bottom-up combination of single-scale runs: bandwidths are visited from
/// the smallest, and a candidate is accepted unless an already accepted
/// estimate lies within its own detection window `[k - G_l, k + G_r]`.
pub fn detect_multiscale(
    series: &TimeSeries,
    bandwidths: &[Bandwidth],
    cfg: &DetectorConfig,
) -> Result<DetectionResult> {
    use rayon::prelude::*;

    if bandwidths.is_empty() {
        return Err(Error::InvalidParameter {
            name: "bandwidths",
            reason: "at least one bandwidth is required".into(),
        });
    }
    let mut ordered = bandwidths.to_vec();
    ordered.sort_by_key(|b| (b.min(), b.left, b.right));
    ordered.dedup();
    let runs = ordered
        .par_iter()
        .map(|&bw| detect_single_scale(series, bw, cfg))
        .collect::<Result<Vec<_>>>()?;

    let mut accepted: Vec<CandidateEstimate> = Vec::new();
    for run in runs {
        for cand in run.estimates {
            let lo = cand.location.saturating_sub(cand.bandwidth.left);
            let hi = cand.location + cand.bandwidth.right;
            if !accepted.iter().any(|a| a.location >= lo && a.location <= hi) {
                accepted.push(cand);
            }
        }
    }
    accepted.sort_by_key(|e| e.location);
    Ok(DetectionResult {
        n: series.len(),
        estimates: accepted,
        alpha: cfg.alpha,
        eta: cfg.eta,
        method: Method::Multiscale,
    })
}

/// Oracle estimator: for each true change point, the first maximiser of
/// `|T_k(G_j)|` over `theta_j - G_l < k <= theta_j + G_r`, restricted to the
/// valid range of the statistic.
pub fn oracle_locate(
    series: &TimeSeries,
    truth: &ChangePointModel,
    bandwidths: &[Bandwidth],
) -> Result<DetectionResult> {
    let n = series.len();
    if truth.q() == 0 {
        return Err(Error::InvalidModel("oracle estimation needs q >= 1".into()));
    }
    if truth.n != n {
        return Err(Error::InvalidModel(format!(
            "model length {} differs from series length {n}",
            truth.n
        )));
    }
    if bandwidths.len() != truth.q() {
        return Err(Error::InvalidModel(format!(
            "{} bandwidths for {} change points",
            bandwidths.len(),
            truth.q()
        )));
    }
    let prefix = PrefixSums::new(series.values().iter().copied());
    let mut estimates = Vec::with_capacity(truth.q());
    for (j, (&theta, &bw)) in truth.locations().iter().zip(bandwidths).enumerate() {
        bw.validate(n)?;
        let delta = truth.spacing(j);
        if 2 * bw.left.max(bw.right) >= delta {
            log::warn!(
                "bandwidth {bw} for change point {} violates 2G < delta = {delta}",
                j + 1
            );
        }
        let lo = (theta.saturating_sub(bw.left) + 1).max(bw.left);
        let hi = (theta + bw.right).min(n - bw.right);
        let (location, stat_value) =
            first_abs_argmax((lo..=hi).map(|k| (k, crate::mosum::stat_at(&prefix, k, bw))))
                .ok_or(Error::EmptyWindow {
                    index: j + 1,
                    location: theta,
                })?;
        estimates.push(CandidateEstimate {
            location,
            bandwidth: bw,
            stat_value,
            exceeds_threshold: true,
        });
    }
    Ok(DetectionResult {
        n,
        estimates,
        alpha: f64::NAN,
        eta: f64::NAN,
        method: Method::Oracle,
    })
}

fn flanks(estimates: &DetectionResult, j: usize) -> Result<(usize, usize, usize)> {
    if j >= estimates.q() {
        return Err(Error::InvalidParameter {
            name: "j",
            reason: format!("index {j} out of range for {} estimates", estimates.q()),
        });
    }
    let b = estimates.boundaries();
    Ok((b[j], b[j + 1], b[j + 2]))
}

/// Signed jump `mean(theta_j, theta_{j+1}] - mean(theta_{j-1}, theta_j]`.
pub fn estimate_jump(series: &TimeSeries, estimates: &DetectionResult, j: usize) -> Result<f64> {
    let (prev, cur, next) = flanks(estimates, j)?;
    if prev >= cur || cur >= next {
        return Err(Error::Degenerate(format!(
            "empty segment next to change point {}",
            j + 1
        )));
    }
    Ok(series.segment_mean(cur, next) - series.segment_mean(prev, cur))
}

/// Pooled residual variance of the two segments flanking estimate `j`, with
/// divisor `theta_{j+1} - theta_{j-1} - 2`.
pub fn estimate_local_variance(
    series: &TimeSeries,
    estimates: &DetectionResult,
    j: usize,
) -> Result<f64> {
    let (prev, cur, next) = flanks(estimates, j)?;
    if next < prev + 3 || prev >= cur || cur >= next {
        return Err(Error::Degenerate(format!(
            "segments around change point {} are too short for a variance estimate",
            j + 1
        )));
    }
    let ss = sum_sq_dev(series.segment(prev, cur)) + sum_sq_dev(series.segment(cur, next));
    Ok(ss / (next - prev - 2) as f64)
}

/// `delta_hat_j`, the distance from estimate `j` to its nearest neighbour,
/// with sentinels `0` and `n`.
pub fn min_spacing(estimates: &DetectionResult, j: usize) -> usize {
    spacing_of(estimates.n, &estimates.locations(), j)
}
