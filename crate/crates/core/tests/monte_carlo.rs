//! Seeded Monte-Carlo checks of the samplers, estimators and coverage.

use mosumci::bootstrap::{
    plug_in_estimates, pointwise_intervals, run_bootstrap, uniform_intervals, BootstrapConfig,
};
use mosumci::detector::{
    detect_single_scale, estimate_jump, estimate_local_variance, oracle_locate, DetectorConfig,
};
use mosumci::limits::{
    default_fixed_horizon, ks_distance, sample_fixed_argmax, sample_wiener_argmax, tv_distance_on,
    ErrorSampler, FixedArgmaxConfig, WienerArgmaxConfig,
};
use mosumci::sim::{synthesize, SignalSpec};
use mosumci::{Bandwidth, ErrorModel, TimeSeries};

fn single_change(n: usize, at: usize, d: f64) -> SignalSpec {
    SignalSpec {
        name: "single".into(),
        n,
        baseline: 0.0,
        change_points: vec![at],
        jumps: vec![d],
        sd: 1.0,
    }
}

fn wiener(horizon: f64, grid_step: f64, draws: usize, seed: u64) -> Vec<f64> {
    sample_wiener_argmax(&WienerArgmaxConfig {
        horizon,
        grid_step,
        draws,
        seed,
    })
    .unwrap()
}

fn fixed(jump: f64, horizon: usize, draws: usize, seed: u64) -> Vec<i64> {
    sample_fixed_argmax(&FixedArgmaxConfig {
        jump,
        horizon,
        errors: ErrorSampler::Model(ErrorModel::gaussian(1.0)),
        draws,
        seed,
    })
    .unwrap()
}

#[test]
fn wiener_argmax_is_symmetric() {
    let w = wiener(100.0, 0.05, 100_000, 1);
    let below = w.iter().filter(|&&s| s <= 0.0).count() as f64 / w.len() as f64;
    assert!((below - 0.5).abs() <= 0.01, "P(argmax <= 0) = {below}");
    let n = w.len() as f64;
    let mean = w.iter().sum::<f64>() / n;
    let sd = (w.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / n).sqrt();
    assert!(mean.abs() <= 3.0 * sd / n.sqrt(), "mean {mean}, sd {sd}");
}

#[test]
fn wiener_tail_shrinks_with_horizon() {
    let tail = |c: f64| {
        let w = wiener(c, c / 200.0, 20_000, 2);
        w.iter().filter(|s| s.abs() > c / 2.0).count() as f64 / w.len() as f64
    };
    assert!(tail(20.0) < tail(10.0));
}

#[test]
fn wiener_discretisation_is_stable() {
    let coarse = wiener(100.0, 0.1, 100_000, 3);
    let fine = wiener(100.0, 0.05, 100_000, 4);
    let d = ks_distance(&coarse, &fine);
    assert!(d <= 0.02, "KS between grid steps = {d}");
}

#[test]
fn fixed_argmax_concentrates_for_large_jumps() {
    let f = fixed(10.0, 50, 100_000, 5);
    let p0 = f.iter().filter(|&&l| l == 0).count() as f64 / f.len() as f64;
    assert!(p0 >= 0.95, "P(argmax = 0) = {p0}");
}

#[test]
fn fixed_argmax_is_symmetric_and_truncation_stable() {
    let short = fixed(1.0, 216, 100_000, 6);
    let long = fixed(1.0, 432, 100_000, 7);
    let n = short.len() as f64;
    let p = |s: &[i64], l: i64| s.iter().filter(|&&x| x == l).count() as f64 / n;
    for l in 0..=10i64 {
        // MC error of a difference of two proportions is at most ~0.0023 here.
        assert!((p(&short, l) - p(&short, -l)).abs() <= 0.008, "asymmetry at {l}");
        assert!((p(&short, l) - p(&long, l)).abs() <= 0.005, "truncation at {l}");
        assert!((p(&short, -l) - p(&long, -l)).abs() <= 0.005, "truncation at -{l}");
    }
}

#[test]
fn same_sampler_self_distance() {
    let a = wiener(100.0, 0.05, 10_000, 8);
    let b = wiener(100.0, 0.05, 10_000, 9);
    assert!(ks_distance(&a, &b) <= 0.03);
    let horizon = default_fixed_horizon(1.0, 1.0);
    let c = fixed(1.0, horizon, 10_000, 10);
    let d = fixed(1.0, horizon, 10_000, 11);
    assert!(tv_distance_on(&c, &d, -5, 5) <= 0.03);
}

#[test]
fn synthetic_noise_has_requested_variance() {
    let spec = SignalSpec {
        name: "flat".into(),
        n: 100_000,
        baseline: 3.0,
        change_points: vec![50_000],
        jumps: vec![1.0],
        sd: 2.0,
    };
    for model in [ErrorModel::gaussian(2.0), ErrorModel::scaled_t(5, 2.0)] {
        let (x, m) = synthesize(&spec, &model, 12).unwrap();
        let f = m.signal().unwrap();
        let e: Vec<f64> = x.values().iter().zip(&f).map(|(a, b)| a - b).collect();
        let mean = e.iter().sum::<f64>() / e.len() as f64;
        let var = e.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / e.len() as f64;
        assert!((var / 4.0 - 1.0).abs() <= 0.02, "{model:?}: variance {var}");
    }
}

#[test]
fn pure_noise_with_tiny_alpha_has_no_detection() {
    let spec = SignalSpec {
        name: "noise".into(),
        n: 200,
        baseline: 0.0,
        change_points: vec![],
        jumps: vec![],
        sd: 1.0,
    };
    let (x, _) = synthesize(&spec, &ErrorModel::gaussian(1.0), 13).unwrap();
    let cfg = DetectorConfig {
        alpha: 1e-6,
        ..Default::default()
    };
    let r = detect_single_scale(&x, Bandwidth::symmetric(20), &cfg).unwrap();
    assert!(r.is_empty(), "{:?}", r.locations());
}

#[test]
fn single_noisy_change_is_found() {
    let (x, _) = synthesize(&single_change(200, 100, 3.0), &ErrorModel::gaussian(1.0), 14).unwrap();
    let r = detect_single_scale(&x, Bandwidth::symmetric(40), &DetectorConfig::default()).unwrap();
    assert_eq!(r.q(), 1);
    let k = r.locations()[0];
    assert!(k.abs_diff(100) <= 5);
    // The estimate is the global maximiser of |T| on this realisation.
    let p = mosumci::mosum::compute_mosum(&x, Bandwidth::symmetric(40)).unwrap();
    let (kmax, _) = p
        .iter()
        .fold((0, -1.0), |b, (k, t)| if t.abs() > b.1 { (k, t.abs()) } else { b });
    assert_eq!(k, kmax);
}

#[test]
fn plug_in_estimates_are_consistent() {
    for seed in 0..5 {
        let (x, m) = synthesize(&single_change(5000, 2500, 2.0), &ErrorModel::gaussian(1.0), 100 + seed).unwrap();
        let est = oracle_locate(&x, &m, &[Bandwidth::symmetric(1000)]).unwrap();
        let d = estimate_jump(&x, &est, 0).unwrap();
        let v = estimate_local_variance(&x, &est, 0).unwrap();
        assert!((d / 2.0 - 1.0).abs() < 0.05, "seed {seed}: d_hat {d}");
        assert!((v - 1.0).abs() < 0.05, "seed {seed}: sigma_hat^2 {v}");
    }
}

fn bootstrap_of(x: &TimeSeries, est: &mosumci::DetectionResult, b: usize, seed: u64) -> mosumci::BootstrapDeviations {
    run_bootstrap(
        x,
        est,
        &BootstrapConfig {
            replicates: b,
            master_seed: seed,
            alphas: vec![0.1],
        },
    )
    .unwrap()
}

#[test]
fn uniform_with_one_change_equals_pointwise() {
    let (x, m) = synthesize(&single_change(600, 300, 0.8), &ErrorModel::gaussian(1.0), 15).unwrap();
    let est = oracle_locate(&x, &m, &[Bandwidth::symmetric(100)]).unwrap();
    let devs = bootstrap_of(&x, &est, 400, 16);
    let alphas = [0.05, 0.1, 0.2];
    let pw = pointwise_intervals(&est, &devs, &alphas);
    let un = uniform_intervals(&x, &est, &devs, &alphas).unwrap();
    let snr = plug_in_estimates(&x, &est).unwrap()[0].signal_to_noise();
    for (a, b) in pw.levels.iter().zip(&un.levels) {
        assert_eq!(a.intervals, b.intervals);
        assert!((b.quantiles[0] - snr * a.quantiles[0]).abs() <= 1e-9 * b.quantiles[0].max(1.0));
    }
}

#[test]
fn bootstrap_is_independent_of_thread_count() {
    let (x, m) = synthesize(&single_change(800, 400, 1.0), &ErrorModel::gaussian(1.0), 17).unwrap();
    let est = oracle_locate(&x, &m, &[Bandwidth::symmetric(100)]).unwrap();
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| bootstrap_of(&x, &est, 300, 18))
    };
    let one = run(1);
    assert_eq!(one, run(3));
    assert_eq!(one, run(8));
    let h = one.windows[0];
    assert!(one.rows().all(|r| -(h.left as i64) < r[0] && r[0] <= h.right as i64));
}

#[test]
fn intervals_nest_across_levels() {
    let (x, m) = synthesize(&single_change(600, 300, 0.6), &ErrorModel::gaussian(1.0), 19).unwrap();
    let est = oracle_locate(&x, &m, &[Bandwidth::symmetric(100)]).unwrap();
    let devs = bootstrap_of(&x, &est, 300, 20);
    let alphas = [0.02, 0.05, 0.1, 0.2, 0.5];
    for set in [
        pointwise_intervals(&est, &devs, &alphas),
        uniform_intervals(&x, &est, &devs, &alphas).unwrap(),
    ] {
        for w in set.levels.windows(2) {
            let (wide, narrow) = (w[0].intervals[0], w[1].intervals[0]);
            assert!(wide.lo <= narrow.lo && narrow.hi <= wide.hi);
            assert!(narrow.contains(300) || narrow.contains(est.locations()[0]));
        }
    }
}

/// 300 outer replications of a single change (n = 2000, d = 1, G = 200)
/// with B = 500: the pointwise 90% interval covers the truth 85-95% of the time.
#[test]
fn pointwise_coverage_at_scale() {
    use rayon::prelude::*;
    let spec = single_change(2000, 1000, 1.0);
    let covered: usize = (0..300u64)
        .into_par_iter()
        .map(|r| {
            let (x, m) = synthesize(&spec, &ErrorModel::gaussian(1.0), 1_000 + r).unwrap();
            let est = oracle_locate(&x, &m, &[Bandwidth::symmetric(200)]).unwrap();
            let devs = bootstrap_of(&x, &est, 500, 5_000 + r);
            let iv = pointwise_intervals(&est, &devs, &[0.1]).levels[0].intervals[0];
            iv.contains(1000) as usize
        })
        .sum();
    let rate = covered as f64 / 300.0;
    assert!((rate - 0.90).abs() <= 0.05, "coverage {rate}");
}
