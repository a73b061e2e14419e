//! Coverage studies on canonical piecewise-constant test signals.
//!
//! A study scales a signal (spacings times `theta^2`, jumps divided by
//! `theta`, so `d_j^2 delta_j` is unchanged), adds noise, estimates the
//! change points either with the oracle locator or with the multiscale
//! detector, bootstraps intervals, and tallies how often they cover the truth.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bootstrap::{
    pointwise_intervals, run_bootstrap, uniform_intervals, BootstrapConfig, Interval,
};
use crate::detector::{detect_multiscale, oracle_locate, ChangePointModel, DetectionResult, DetectorConfig};
use crate::error::{Error, Result};
use crate::noise::ErrorModel;
use crate::rng::{derive_seed, stream_rng};
use crate::series::{Bandwidth, TimeSeries};

/// Piecewise-constant test signal `f_t = f_0 + sum_j d_j 1{t > theta_j}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalSpec {
    pub name: String,
    pub n: usize,
    pub baseline: f64,
    pub change_points: Vec<usize>,
    pub jumps: Vec<f64>,
    /// Noise standard deviation the signal is usually paired with.
    pub sd: f64,
}

impl SignalSpec {
    pub fn validate(&self) -> Result<()> {
        if self.change_points.len() != self.jumps.len() {
            return Err(Error::InvalidModel(format!(
                "signal `{}` has {} change points but {} jumps",
                self.name,
                self.change_points.len(),
                self.jumps.len()
            )));
        }
        self.model().map(|_| ())
    }

    /// Ground-truth model (locations, jumps and levels).
    pub fn model(&self) -> Result<ChangePointModel> {
        ChangePointModel::with_jumps(self.n, self.baseline, self.change_points.clone(), &self.jumps)
    }
}

const BUILTIN: [(&str, &str); 5] = [
    ("blocks", include_str!("../signals/blocks.json")),
    ("fms", include_str!("../signals/fms.json")),
    ("mix", include_str!("../signals/mix.json")),
    ("teeth10", include_str!("../signals/teeth10.json")),
    ("stairs10", include_str!("../signals/stairs10.json")),
];

/// Names of the shipped signals.
pub fn builtin_signal_names() -> Vec<&'static str> {
    BUILTIN.iter().map(|(name, _)| *name).collect()
}

pub fn builtin_signal(name: &str) -> Option<SignalSpec> {
    BUILTIN
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, src)| serde_json::from_str(src).expect("shipped signal files are valid"))
}

/// Stretches spacings by `theta^2` (sentinels included, so `n` scales too)
/// and shrinks jumps by `theta`.
pub fn scale_signal(spec: &SignalSpec, theta: usize) -> SignalSpec {
    let stretch = theta * theta;
    SignalSpec {
        name: spec.name.clone(),
        n: spec.n * stretch,
        baseline: spec.baseline,
        change_points: spec.change_points.iter().map(|t| t * stretch).collect(),
        jumps: spec.jumps.iter().map(|d| d / theta as f64).collect(),
        sd: spec.sd,
    }
}

/// One realisation `X_t = f_t + e_t` and its ground truth.
pub fn synthesize(spec: &SignalSpec, errors: &ErrorModel, seed: u64) -> Result<(TimeSeries, ChangePointModel)> {
    errors.validate()?;
    let model = spec.model()?;
    let signal = model.signal().expect("model built from jumps has levels");
    let sampler = errors.sampler();
    let mut rng = stream_rng(seed, 0);
    let values = signal
        .into_iter()
        .map(|f| f + rand_distr::Distribution::sample(&sampler, &mut rng))
        .collect();
    Ok((TimeSeries::new(values)?, model))
}

/// Outcome of matching one true change point against the estimates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Match {
    /// `Z_j`: some estimate falls in the catchment interval `I_j`.
    pub detected: bool,
    /// Index into the estimate list of the closest estimate in `I_j`.
    pub estimate: Option<usize>,
}

/// Catchment interval `I_j = {floor((theta_{j-1} + theta_j) / 2) + 1, ...,
/// floor((theta_j + theta_{j+1}) / 2)}` (0-based `j`), as an inclusive range.
pub fn catchment(truth: &ChangePointModel, j: usize) -> (usize, usize) {
    let b = truth.boundaries();
    ((b[j] + b[j + 1]) / 2 + 1, (b[j + 1] + b[j + 2]) / 2)
}

/// Matches every true change point with the closest estimate inside its
/// catchment interval (ties to the smaller location).
pub fn match_estimators(truth: &ChangePointModel, estimates: &DetectionResult) -> Vec<Match> {
    let locations = estimates.locations();
    truth
        .locations()
        .iter()
        .enumerate()
        .map(|(j, &theta)| {
            let (lo, hi) = catchment(truth, j);
            let best = locations
                .iter()
                .enumerate()
                .filter(|(_, &t)| t >= lo && t <= hi)
                .min_by_key(|(_, &t)| (t.abs_diff(theta), t))
                .map(|(i, _)| i);
            Match {
                detected: best.is_some(),
                estimate: best,
            }
        })
        .collect()
}

/// Coverage-1 (every interval contains a true change point; vacuously true
/// for no intervals) and coverage-2 (additionally, every true change point
/// lies in some interval).
pub fn coverage_measures(intervals: &[Interval], truth: &[usize]) -> (bool, bool) {
    let cov1 = intervals.iter().all(|iv| truth.iter().any(|&t| iv.contains(t)));
    let cov2 = cov1 && truth.iter().all(|&t| intervals.iter().any(|iv| iv.contains(t)));
    (cov1, cov2)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorMode {
    /// Local maximiser near each true change point with `G_j = floor(delta_j / 2)`.
    Oracle,
    /// Multiscale detection followed by catchment matching.
    Detected,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum BandwidthRule {
    /// `G_j = floor(delta_j / 2)` per true change point (oracle mode).
    HalfSpacing,
    /// Doubling grid from `10 theta` up to `n / 4` (detected mode).
    Geometric,
    /// Explicit symmetric bandwidths: one per change point in oracle mode,
    /// the candidate set in detected mode.
    Explicit { bandwidths: Vec<usize> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub signal: SignalSpec,
    pub scaling: usize,
    pub errors: ErrorModel,
    pub mode: EstimatorMode,
    pub replications: usize,
    pub bootstrap: BootstrapConfig,
    pub bandwidth_rule: BandwidthRule,
    #[serde(default)]
    pub detector: DetectorConfig,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        self.signal.validate()?;
        self.errors.validate()?;
        self.bootstrap.validate()?;
        if self.scaling == 0 {
            return Err(Error::InvalidParameter {
                name: "scaling",
                reason: "the scaling factor must be at least 1".into(),
            });
        }
        if self.replications == 0 {
            return Err(Error::InvalidParameter {
                name: "replications",
                reason: "at least one replication is required".into(),
            });
        }
        if self.signal.change_points.is_empty() {
            return Err(Error::InvalidModel("coverage studies need at least one change point".into()));
        }
        Ok(())
    }
}

/// Per change point tallies, independent of the level.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChangePointSummary {
    pub location: usize,
    /// `2 delta_j`
    pub spacing2: usize,
    pub detection_rate: f64,
    /// Share of detections with `theta_hat_j == theta_j`.
    pub hit_rate: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LevelCoverage {
    pub alpha: f64,
    /// Per change point, conditional on detection.
    pub pointwise_coverage: Vec<Option<f64>>,
    pub pointwise_mean_length: Vec<Option<f64>>,
    /// Conditional on every change point being detected with `q_hat = q`.
    pub uniform_coverage: Option<f64>,
    pub uniform_mean_length: Vec<Option<f64>>,
    /// Number of replications entering the uniform figures.
    pub uniform_count: usize,
    /// Coverage-1 / coverage-2 of the uniform intervals over all replications.
    pub uniform_coverage1: f64,
    pub uniform_coverage2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoverageReport {
    pub signal: String,
    pub scaling: usize,
    pub mode: EstimatorMode,
    pub replications: usize,
    pub change_points: Vec<ChangePointSummary>,
    /// Share of replications with `q_hat = q` and all `Z_j = 1`.
    pub all_detected_rate: f64,
    pub levels: Vec<LevelCoverage>,
}

/// Outcome of one replication at one level.
#[derive(Debug, Clone, Default)]
struct LevelOutcome {
    pointwise: Vec<Option<(bool, usize)>>,
    uniform: Option<(bool, Vec<usize>)>,
    cov: (bool, bool),
}

#[derive(Debug, Clone)]
struct RepOutcome {
    matches: Vec<Option<bool>>, // per cp: None undetected, Some(hit)
    all_detected: bool,
    levels: Vec<LevelOutcome>,
}

/// Symmetric bandwidths `10 theta, 20 theta, ...` not exceeding `n / 4`.
pub fn geometric_bandwidths(n: usize, scaling: usize) -> Vec<Bandwidth> {
    let mut out = Vec::new();
    let mut g = 10 * scaling;
    while g <= n / 4 {
        out.push(Bandwidth::symmetric(g));
        g *= 2;
    }
    out
}

fn estimate(cfg: &ExperimentConfig, series: &TimeSeries, truth: &ChangePointModel) -> Result<DetectionResult> {
    match cfg.mode {
        EstimatorMode::Oracle => {
            let bws: Vec<Bandwidth> = match &cfg.bandwidth_rule {
                BandwidthRule::Explicit { bandwidths } if bandwidths.len() == truth.q() => {
                    bandwidths.iter().map(|&g| Bandwidth::symmetric(g)).collect()
                }
                BandwidthRule::Explicit { bandwidths } => {
                    return Err(Error::InvalidParameter {
                        name: "bandwidth_rule",
                        reason: format!(
                            "oracle mode needs one bandwidth per change point ({}), got {}",
                            truth.q(),
                            bandwidths.len()
                        ),
                    })
                }
                _ => (0..truth.q())
                    .map(|j| Bandwidth::symmetric((truth.spacing(j) / 2).max(1)))
                    .collect(),
            };
            oracle_locate(series, truth, &bws)
        }
        EstimatorMode::Detected => {
            let bws = match &cfg.bandwidth_rule {
                BandwidthRule::Explicit { bandwidths } => {
                    bandwidths.iter().map(|&g| Bandwidth::symmetric(g)).collect()
                }
                _ => geometric_bandwidths(series.len(), cfg.scaling),
            };
            if bws.is_empty() {
                return Err(Error::InvalidParameter {
                    name: "bandwidth_rule",
                    reason: format!("no admissible bandwidth for n = {}", series.len()),
                });
            }
            detect_multiscale(series, &bws, &cfg.detector)
        }
    }
}

fn replicate(cfg: &ExperimentConfig, spec: &SignalSpec, r: u64) -> Result<RepOutcome> {
    let master = cfg.bootstrap.master_seed;
    let (series, truth) = synthesize(spec, &cfg.errors, derive_seed(master, 2 * r))?;
    let est = estimate(cfg, &series, &truth)?;
    let boot_cfg = BootstrapConfig {
        master_seed: derive_seed(master, 2 * r + 1),
        ..cfg.bootstrap.clone()
    };
    let devs = run_bootstrap(&series, &est, &boot_cfg)?;
    let alphas = &cfg.bootstrap.alphas;
    let pw = pointwise_intervals(&est, &devs, alphas);
    let un = uniform_intervals(&series, &est, &devs, alphas)?;

    let matched = match_estimators(&truth, &est);
    let locs = est.locations();
    let theta = truth.locations();
    let matches: Vec<Option<bool>> = matched
        .iter()
        .zip(theta)
        .map(|(m, &t)| m.estimate.map(|i| locs[i] == t))
        .collect();
    let all_detected = est.q() == truth.q() && matched.iter().all(|m| m.detected);

    let levels = alphas
        .iter()
        .enumerate()
        .map(|(l, _)| {
            let pw_iv = pw.levels.get(l).map(|x| x.intervals.as_slice()).unwrap_or(&[]);
            let un_iv = un.levels.get(l).map(|x| x.intervals.as_slice()).unwrap_or(&[]);
            let pointwise = matched
                .iter()
                .zip(theta)
                .map(|(m, &t)| m.estimate.map(|i| (pw_iv[i].contains(t), pw_iv[i].length())))
                .collect();
            let uniform = all_detected.then(|| {
                let ivs: Vec<Interval> = matched.iter().map(|m| un_iv[m.estimate.unwrap()]).collect();
                let covered = ivs.iter().zip(theta).all(|(iv, &t)| iv.contains(t));
                (covered, ivs.iter().map(Interval::length).collect())
            });
            LevelOutcome {
                pointwise,
                uniform,
                cov: coverage_measures(un_iv, theta),
            }
        })
        .collect();
    Ok(RepOutcome {
        matches,
        all_detected,
        levels,
    })
}

fn ratio(num: usize, den: usize) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

/// Runs `R` replications (in parallel, seeded per replication from the
/// bootstrap master seed) and aggregates coverage, hit and detection rates.
pub fn evaluate_coverage(cfg: &ExperimentConfig) -> Result<CoverageReport> {
    cfg.validate()?;
    let spec = scale_signal(&cfg.signal, cfg.scaling);
    let truth = spec.model()?;
    let outcomes = (0..cfg.replications as u64)
        .into_par_iter()
        .map(|r| replicate(cfg, &spec, r))
        .collect::<Result<Vec<_>>>()?;

    let q = truth.q();
    let reps = outcomes.len();
    let change_points = (0..q)
        .map(|j| {
            let detected = outcomes.iter().filter(|o| o.matches[j].is_some()).count();
            let hits = outcomes.iter().filter(|o| o.matches[j] == Some(true)).count();
            ChangePointSummary {
                location: truth.locations()[j],
                spacing2: 2 * truth.spacing(j),
                detection_rate: detected as f64 / reps as f64,
                hit_rate: ratio(hits, detected),
            }
        })
        .collect();
    let all_detected = outcomes.iter().filter(|o| o.all_detected).count();

    let levels = cfg
        .bootstrap
        .alphas
        .iter()
        .enumerate()
        .map(|(l, &alpha)| {
            let mut covered = vec![0usize; q];
            let mut counted = vec![0usize; q];
            let mut length = vec![0usize; q];
            let mut un_cov = 0;
            let mut un_count = 0;
            let mut un_length = vec![0usize; q];
            let (mut cov1, mut cov2) = (0, 0);
            for o in &outcomes {
                let lo = &o.levels[l];
                for (j, p) in lo.pointwise.iter().enumerate() {
                    if let Some((c, len)) = p {
                        counted[j] += 1;
                        covered[j] += *c as usize;
                        length[j] += len;
                    }
                }
                if let Some((c, lens)) = &lo.uniform {
                    un_count += 1;
                    un_cov += *c as usize;
                    for (acc, len) in un_length.iter_mut().zip(lens) {
                        *acc += len;
                    }
                }
                cov1 += lo.cov.0 as usize;
                cov2 += lo.cov.1 as usize;
            }
            LevelCoverage {
                alpha,
                pointwise_coverage: (0..q).map(|j| ratio(covered[j], counted[j])).collect(),
                pointwise_mean_length: (0..q).map(|j| ratio(length[j], counted[j])).collect(),
                uniform_coverage: ratio(un_cov, un_count),
                uniform_mean_length: un_length.iter().map(|&s| ratio(s, un_count)).collect(),
                uniform_count: un_count,
                uniform_coverage1: cov1 as f64 / reps as f64,
                uniform_coverage2: cov2 as f64 / reps as f64,
            }
        })
        .collect();

    Ok(CoverageReport {
        signal: spec.name.clone(),
        scaling: cfg.scaling,
        mode: cfg.mode,
        replications: reps,
        change_points,
        all_detected_rate: all_detected as f64 / reps as f64,
        levels,
    })
}

/// Column order of [`CoverageReport::to_csv`].
pub const COVERAGE_CSV_HEADER: &str = "signal,scaling,mode,level,alpha,cp_index,location,spacing2,\
detection_rate,hit_rate,pointwise_coverage,pointwise_mean_length,uniform_coverage,uniform_mean_length";

fn cell(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

impl CoverageReport {
    /// One row per change point and level; missing rates are left empty.
    pub fn to_csv(&self) -> String {
        let mode = match self.mode {
            EstimatorMode::Oracle => "oracle",
            EstimatorMode::Detected => "detected",
        };
        let mut out = String::from(COVERAGE_CSV_HEADER);
        out.push('\n');
        for lvl in &self.levels {
            for (j, cp) in self.change_points.iter().enumerate() {
                out.push_str(&format!(
                    "{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
                    self.signal,
                    self.scaling,
                    mode,
                    1.0 - lvl.alpha,
                    lvl.alpha,
                    j + 1,
                    cp.location,
                    cp.spacing2,
                    cp.detection_rate,
                    cell(cp.hit_rate),
                    cell(lvl.pointwise_coverage[j]),
                    cell(lvl.pointwise_mean_length[j]),
                    cell(lvl.uniform_coverage),
                    cell(lvl.uniform_mean_length[j]),
                ));
            }
        }
        out
    }
}
