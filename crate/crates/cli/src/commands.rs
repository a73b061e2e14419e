use mosumci::bootstrap::{plug_in_estimates, pointwise_intervals, run_bootstrap, uniform_intervals};
use mosumci::detector::{detect_multiscale, detect_single_scale};
use mosumci::limits::{
    default_fixed_horizon, sample_fixed_argmax, sample_wiener_argmax, ErrorSampler, FixedArgmaxConfig,
    WienerArgmaxConfig,
};
use mosumci::mosum::{compute_mosum, critical_value, SCALE_FLOOR};
use mosumci::sim::{builtin_signal, builtin_signal_names, evaluate_coverage, geometric_bandwidths, ExperimentConfig};
use mosumci::{
    Bandwidth, BootstrapConfig, DetectionResult, DetectorConfig, ErrorModel, ScaleEstimator, TimeSeries,
};
use serde_json::{json, Map, Value};

use crate::args::{CiArgs, DetectArgs, DetectorArgs, ErrorsArg, Law, LimitsArgs, SimulateArgs};
use crate::input::{read_series, InputSeries};
use crate::{path_string, to_value, CliError, RunManifest, SCHEMA_VERSION};

fn system_seed() -> u64 {
    rand::random()
}

fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T, CliError> {
    match threads {
        None => Ok(f()),
        Some(0) => Err(CliError::Usage("--threads must be at least 1".into())),
        Some(k) => rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build()
            .map(|pool| pool.install(f))
            .map_err(|e| CliError::Internal(e.to_string())),
    }
}

struct Detection {
    input: InputSeries,
    series: TimeSeries,
    bandwidths: Vec<Bandwidth>,
    config: DetectorConfig,
    result: DetectionResult,
}

fn detect(args: &DetectorArgs) -> Result<Detection, CliError> {
    let input = read_series(&args.input)?;
    let series = TimeSeries::new(input.values.clone())?;
    let n = series.len();
    let bandwidths = if args.bandwidth.is_empty() {
        let grid = geometric_bandwidths(n, 1);
        if grid.is_empty() {
            return Err(CliError::Data(format!(
                "series of length {n} is too short for the default bandwidths; pass --bandwidth"
            )));
        }
        grid
    } else {
        args.bandwidth.clone()
    };
    let config = DetectorConfig {
        alpha: args.alpha,
        eta: args.eta,
        scale: args.scale.into(),
    };
    let result = match bandwidths.as_slice() {
        [bw] => detect_single_scale(&series, *bw, &config)?,
        bws => detect_multiscale(&series, bws, &config)?,
    };
    log::info!("{} change point(s) detected in {n} observations", result.q());
    Ok(Detection {
        input,
        series,
        bandwidths,
        config,
        result,
    })
}

fn detector_config_value(args: &DetectorArgs, d: &Detection) -> Result<Value, CliError> {
    Ok(json!({
        "bandwidths": to_value(&d.bandwidths)?,
        "alpha": args.alpha,
        "eta": args.eta,
        "scale": to_value(&d.config.scale)?,
    }))
}

fn insert_label(obj: &mut Map<String, Value>, key: &str, input: &InputSeries, k: usize) {
    if let Some(l) = input.label(k) {
        obj.insert(key.into(), l);
    }
}

/// Critical values per bandwidth and the scaled threshold at each estimate.
fn thresholds(d: &Detection) -> Result<(Vec<Value>, Vec<f64>), CliError> {
    let n = d.series.len();
    let mut table = Vec::new();
    for bw in &d.bandwidths {
        table.push(json!({
            "bandwidth": to_value(bw)?,
            "critical_value": critical_value(n, *bw, d.config.alpha)?,
        }));
    }
    let mut at = Vec::new();
    for e in &d.result.estimates {
        let profile = compute_mosum(&d.series, e.bandwidth)?;
        let scale = match d.config.scale {
            ScaleEstimator::Local => profile.local_scale(e.location),
            ScaleEstimator::GlobalMedian => profile.median_scale(),
        }
        .max(SCALE_FLOOR);
        at.push(scale * critical_value(n, e.bandwidth, d.config.alpha)?);
    }
    Ok((table, at))
}

/// Detection payload: estimates with their bandwidth, `|T|` and threshold.
pub fn cmd_detect(args: &DetectArgs) -> Result<Value, CliError> {
    let d = detect(&args.detector)?;
    let (table, at) = thresholds(&d)?;
    let mut manifest = RunManifest::new("detect", detector_config_value(&args.detector, &d)?);
    manifest.inputs.push(path_string(&args.detector.input));
    manifest.outputs.extend(args.output.as_deref().map(path_string));
    let estimates: Vec<Value> = d
        .result
        .estimates
        .iter()
        .zip(&at)
        .map(|(e, t)| {
            let mut o = Map::new();
            o.insert("location".into(), e.location.into());
            insert_label(&mut o, "label", &d.input, e.location);
            o.insert("bandwidth".into(), json!({"left": e.bandwidth.left, "right": e.bandwidth.right}));
            o.insert("stat_value".into(), e.stat_value.into());
            o.insert("threshold".into(), (*t).into());
            Value::Object(o)
        })
        .collect();
    Ok(json!({
        "schema_version": SCHEMA_VERSION,
        "manifest": to_value(&manifest)?,
        "n": d.series.len(),
        "method": to_value(&d.result.method)?,
        "alpha": d.config.alpha,
        "eta": d.config.eta,
        "scale": to_value(&d.config.scale)?,
        "thresholds": table,
        "estimates": estimates,
    }))
}

fn interval_value(input: &InputSeries, level: f64, alpha: f64, quantile: f64, lo: usize, hi: usize) -> Value {
    let mut o = Map::new();
    o.insert("level".into(), level.into());
    o.insert("alpha".into(), alpha.into());
    o.insert("quantile".into(), quantile.into());
    o.insert("lo".into(), lo.into());
    o.insert("hi".into(), hi.into());
    insert_label(&mut o, "lo_label", input, lo);
    insert_label(&mut o, "hi_label", input, hi);
    Value::Object(o)
}

/// Detection followed by pointwise and uniform bootstrap intervals.
pub fn cmd_ci(args: &CiArgs) -> Result<Value, CliError> {
    if args.boot_reps == 0 {
        return Err(CliError::Usage("--boot-reps must be at least 1".into()));
    }
    let seed = args.seed.unwrap_or_else(system_seed);
    let levels = args.levels.clone();
    // Rounded so that a level of 0.9 is reported as alpha 0.1.
    let alphas: Vec<f64> = levels.iter().map(|l| ((1.0 - l) * 1e12).round() / 1e12).collect();
    let d = detect(&args.detector)?;
    let mut config = detector_config_value(&args.detector, &d)?;
    config["boot_reps"] = args.boot_reps.into();
    config["levels"] = to_value(&levels)?;
    let mut manifest = RunManifest::new("ci", config);
    manifest.inputs.push(path_string(&args.detector.input));
    manifest.outputs.extend(args.output.as_deref().map(path_string));
    manifest.seed = Some(seed);

    let mut payload = json!({
        "schema_version": SCHEMA_VERSION,
        "manifest": to_value(&manifest)?,
        "n": d.series.len(),
        "method": to_value(&d.result.method)?,
        "levels": to_value(&levels)?,
    });
    if d.result.is_empty() {
        payload["notice"] = "no change points detected; no intervals to report".into();
        payload["uniform_quantiles"] = json!([]);
        payload["change_points"] = json!([]);
        return Ok(payload);
    }

    let boot = BootstrapConfig {
        replicates: args.boot_reps,
        master_seed: seed,
        alphas: alphas.clone(),
    };
    let (devs, pointwise, uniform) = with_threads(args.threads, || {
        let devs = run_bootstrap(&d.series, &d.result, &boot)?;
        let pw = pointwise_intervals(&d.result, &devs, &alphas);
        let un = uniform_intervals(&d.series, &d.result, &devs, &alphas)?;
        Ok::<_, mosumci::Error>((devs, pw, un))
    })??;
    let plug = plug_in_estimates(&d.series, &d.result)?;

    let uniform_quantiles: Vec<Value> = uniform
        .levels
        .iter()
        .zip(&levels)
        .map(|(l, lv)| json!({"level": lv, "alpha": l.alpha, "quantile": l.quantiles[0]}))
        .collect();
    let mut cps = Vec::new();
    for (j, e) in d.result.estimates.iter().enumerate() {
        let mut o = Map::new();
        o.insert("index".into(), (j + 1).into());
        o.insert("location".into(), e.location.into());
        insert_label(&mut o, "label", &d.input, e.location);
        o.insert("bandwidth".into(), json!({"left": e.bandwidth.left, "right": e.bandwidth.right}));
        o.insert("stat_value".into(), e.stat_value.into());
        o.insert("jump".into(), plug[j].jump.into());
        o.insert("variance".into(), plug[j].variance.into());
        o.insert("window".into(), to_value(&devs.windows[j])?);
        for (key, set) in [("pointwise", &pointwise), ("uniform", &uniform)] {
            let rows: Vec<Value> = set
                .levels
                .iter()
                .zip(&levels)
                .map(|(l, lv)| {
                    let q = if key == "uniform" { l.quantiles[0] } else { l.quantiles[j] };
                    let iv = l.intervals[j];
                    interval_value(&d.input, *lv, l.alpha, q, iv.lo, iv.hi)
                })
                .collect();
            o.insert(key.into(), rows.into());
        }
        cps.push(Value::Object(o));
    }
    payload["uniform_quantiles"] = uniform_quantiles.into();
    payload["change_points"] = cps.into();
    Ok(payload)
}

pub struct SimulateOutput {
    pub json: Value,
    pub csv: String,
}

/// Resolves a config document: built-in signal names are expanded and the
/// master seed is filled in from `seed` (or the system) when needed.
pub fn load_experiment(text: &str, seed: Option<u64>) -> Result<ExperimentConfig, CliError> {
    let mut doc: Value =
        serde_json::from_str(text).map_err(|e| CliError::Usage(format!("invalid config: {e}")))?;
    let obj = doc
        .as_object_mut()
        .ok_or_else(|| CliError::Usage("invalid config: expected a JSON object".into()))?;
    if let Some(Value::String(name)) = obj.get("signal") {
        let spec = builtin_signal(name).ok_or_else(|| {
            CliError::Usage(format!(
                "unknown signal '{name}'; available signals: {}",
                builtin_signal_names().join(", ")
            ))
        })?;
        obj.insert("signal".into(), to_value(&spec)?);
    }
    if let Some(Value::Object(boot)) = obj.get_mut("bootstrap") {
        match seed {
            Some(s) => {
                boot.insert("master_seed".into(), s.into());
            }
            None => {
                boot.entry("master_seed").or_insert_with(|| system_seed().into());
            }
        }
    }
    let cfg: ExperimentConfig =
        serde_json::from_value(doc).map_err(|e| CliError::Usage(format!("invalid config: {e}")))?;
    cfg.validate()?;
    Ok(cfg)
}

/// Coverage experiment: CSV table and JSON report with manifest.
pub fn cmd_simulate(args: &SimulateArgs) -> Result<SimulateOutput, CliError> {
    let text = std::fs::read_to_string(&args.config)
        .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", args.config.display())))?;
    let cfg = load_experiment(&text, args.seed)?;
    let report = with_threads(args.threads, || evaluate_coverage(&cfg))??;
    let mut manifest = RunManifest::new("simulate", to_value(&cfg)?);
    manifest.inputs.push(path_string(&args.config));
    manifest.outputs.extend(args.csv.as_deref().map(path_string));
    manifest.outputs.extend(args.json.as_deref().map(path_string));
    manifest.seed = Some(cfg.bootstrap.master_seed);
    Ok(SimulateOutput {
        json: json!({
            "schema_version": SCHEMA_VERSION,
            "manifest": to_value(&manifest)?,
            "report": to_value(&report)?,
        }),
        csv: report.to_csv(),
    })
}

pub struct LimitsOutput {
    pub summary: Value,
    pub csv: String,
}

/// Probabilities reported in the quantile summary of `limits`.
pub const SUMMARY_PROBS: [f64; 9] = [0.01, 0.05, 0.10, 0.25, 0.50, 0.75, 0.90, 0.95, 0.99];

/// Lower empirical quantile `x_(ceil(p n))` of a sorted sample.
fn lower_quantile(sorted: &[f64], p: f64) -> f64 {
    let m = ((p * sorted.len() as f64) - 1e-9).ceil().max(1.0) as usize;
    sorted[m.min(sorted.len()) - 1]
}

/// Draws from a limit law with a quantile summary.
pub fn cmd_limits(args: &LimitsArgs) -> Result<LimitsOutput, CliError> {
    if args.draws == 0 {
        return Err(CliError::Usage("--draws must be at least 1".into()));
    }
    let seed = args.seed.unwrap_or_else(system_seed);
    let (draws, config): (Vec<f64>, Value) = match args.law {
        Law::Wiener => {
            let cfg = WienerArgmaxConfig {
                horizon: args.horizon.unwrap_or(WienerArgmaxConfig::default().horizon),
                grid_step: args.grid_step,
                draws: args.draws,
                seed,
            };
            let draws = with_threads(args.threads, || sample_wiener_argmax(&cfg))??;
            (draws, to_value(&cfg)?)
        }
        Law::Fixed => {
            let jump = args
                .jump
                .ok_or_else(|| CliError::Usage("--law fixed requires --d".into()))?;
            let model = match args.errors {
                ErrorsArg::Gaussian => ErrorModel::gaussian(args.sigma),
                ErrorsArg::T => ErrorModel::scaled_t(args.df, args.sigma),
            };
            model.validate()?;
            let horizon = match args.horizon {
                None => default_fixed_horizon(jump, args.sigma),
                Some(h) if h >= 1.0 && h.fract() == 0.0 => h as usize,
                Some(h) => {
                    return Err(CliError::Usage(format!(
                        "--horizon must be a positive integer for the fixed law, got {h}"
                    )))
                }
            };
            let cfg = FixedArgmaxConfig {
                jump,
                horizon,
                errors: ErrorSampler::Model(model),
                draws: args.draws,
                seed,
            };
            let draws = with_threads(args.threads, || sample_fixed_argmax(&cfg))??;
            (draws.into_iter().map(|l| l as f64).collect(), to_value(&cfg)?)
        }
    };
    let mut csv = String::from("draw,argmax\n");
    for (i, x) in draws.iter().enumerate() {
        csv.push_str(&format!("{},{}\n", i + 1, x));
    }
    let mut sorted = draws.clone();
    sorted.sort_by(f64::total_cmp);
    let n = draws.len() as f64;
    let mean = draws.iter().sum::<f64>() / n;
    let sd = (draws.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt();
    let quantiles: Vec<Value> = SUMMARY_PROBS
        .iter()
        .map(|&p| json!({"p": p, "value": lower_quantile(&sorted, p)}))
        .collect();
    let mut manifest = RunManifest::new("limits", config);
    manifest.outputs.extend(args.output.as_deref().map(path_string));
    manifest.outputs.extend(args.summary.as_deref().map(path_string));
    manifest.seed = Some(seed);
    let law = match args.law {
        Law::Wiener => "wiener",
        Law::Fixed => "fixed",
    };
    let mut summary = json!({
        "schema_version": SCHEMA_VERSION,
        "manifest": to_value(&manifest)?,
        "law": law,
        "draws": draws.len(),
        "mean": mean,
        "sd": sd,
        "quantiles": quantiles,
    });
    if args.law == Law::Fixed {
        summary["p_zero"] = (draws.iter().filter(|&&x| x == 0.0).count() as f64 / n).into();
    }
    Ok(LimitsOutput { summary, csv })
}
