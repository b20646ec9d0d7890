use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use qpcd::bootstrap::{bootstrap_statistic, detect, BootstrapConfig, Resampling};
use qpcd::detector::{change_statistic, wasserstein_series, DetectorConfig};
use qpcd::embedding::{sliding_window_embed, EmbedParams, PointCloud};
use qpcd::signal::{synthesize_plain_periodic, AnnotatedSeries};

const PERIOD: usize = 20;

fn embed() -> EmbedParams {
    EmbedParams::new(PERIOD - 1, 1, 1).unwrap()
}

fn cloud_of(samples: Vec<f64>) -> PointCloud {
    let s = AnnotatedSeries::new("t", samples, PERIOD as f64).unwrap();
    sliding_window_embed(&s, &embed()).unwrap()
}

/// Noisy sine that gains `shift` from sample `at` onwards.
fn shifted(n: usize, at: usize, shift: f64, sigma: f64, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, sigma.max(1e-300)).unwrap();
    (0..n)
        .map(|t| {
            let base = (std::f64::consts::TAU * t as f64 / PERIOD as f64).sin();
            let e = if sigma > 0.0 { noise.sample(&mut rng) } else { 0.0 };
            base + e + if t >= at { shift } else { 0.0 }
        })
        .collect()
}

fn dcfg() -> DetectorConfig {
    DetectorConfig { use_exact: true, ..DetectorConfig::new(2 * PERIOD) }
}

fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    s[s.len() / 2]
}

#[test]
fn noiseless_periodic_series_is_flat() {
    let cloud = cloud_of(shifted(400, usize::MAX, 0.0, 0.0, 0));
    let ws = wasserstein_series(&cloud, &dcfg()).unwrap();
    assert!(!ws.is_empty());
    let max = ws.values.iter().copied().fold(0.0, f64::max);
    assert!(max < 1e-6, "max {max}");
}

#[test]
fn mean_shift_stands_out_and_is_located() {
    let n = 600;
    let at = 300;
    let cloud = cloud_of(shifted(n, at, 1.0, 0.1, 3));
    let ws = wasserstein_series(&cloud, &dcfg()).unwrap();
    let stat = change_statistic(&ws).unwrap();
    assert!(stat.value >= 5.0 * median(&ws.values), "{} vs {}", stat.value, median(&ws.values));
    // the window centre sits on the cloud point whose embedding first reads
    // post-change samples, within a loop
    let src = cloud.source_index()[stat.argmax_tau] as i64;
    let expected = at as i64 - embed().span() as i64;
    assert!((src - expected).abs() <= PERIOD as i64, "argmax source {src}, expected {expected}");
}

#[test]
fn statistic_grows_with_shift() {
    let stats: Vec<f64> = [0.25, 0.5, 1.0, 2.0]
        .iter()
        .map(|&shift| {
            let cloud = cloud_of(shifted(500, 250, shift, 0.1, 11));
            change_statistic(&wasserstein_series(&cloud, &dcfg()).unwrap()).unwrap().value
        })
        .collect();
    assert!(stats.windows(2).all(|w| w[0] < w[1]), "{stats:?}");
}

#[test]
fn detection_is_deterministic() {
    let cloud = cloud_of(shifted(500, 250, 0.5, 0.2, 5));
    let b = BootstrapConfig::new(2 * PERIOD);
    let a1 = detect(&cloud, &dcfg(), &b, embed().span()).unwrap();
    let a2 = detect(&cloud, &dcfg(), &b, embed().span()).unwrap();
    assert_eq!(a1, a2);
    let other = BootstrapConfig { seed: 1, ..b };
    let a3 = detect(&cloud, &dcfg(), &other, embed().span()).unwrap();
    assert_eq!(a1.series, a3.series);
    assert_ne!(a1.bootstrap.statistics, a3.bootstrap.statistics);
}

#[test]
fn constant_signal_never_detects() {
    let cloud = cloud_of(vec![2.5; 300]);
    for resampling in [Resampling::Centered, Resampling::Weighted, Resampling::Shuffled] {
        let b = BootstrapConfig { resampling, ..BootstrapConfig::new(2 * PERIOD) };
        let r = detect(&cloud, &dcfg(), &b, embed().span()).unwrap();
        assert_eq!(r.statistic.value, 0.0);
        assert!(!r.change_detected, "{resampling:?}");
        assert!(r.flagged.is_empty());
    }
}

#[test]
fn one_block_weighting_reproduces_observed_maximum() {
    // a single block scales every point alike, so renormalised halves are
    // the observed uniform measures
    let cloud = cloud_of(shifted(300, 150, 0.7, 0.1, 8));
    let t = change_statistic(&wasserstein_series(&cloud, &dcfg()).unwrap()).unwrap().value;
    let b = BootstrapConfig {
        resampling: Resampling::Weighted,
        replications: 100,
        ..BootstrapConfig::new(cloud.len())
    };
    let s = bootstrap_statistic(&cloud, &dcfg(), &b).unwrap();
    assert_eq!(s.statistics.len(), 100);
    for v in &s.statistics {
        assert!((v - t).abs() <= 1e-9 * t.max(1.0), "{v} vs {t}");
    }
}

#[test]
fn centered_threshold_is_linear_in_inflation() {
    let cloud = cloud_of(synthesize_plain_periodic(1.0, 500, PERIOD as f64, 0.1, 4).unwrap().samples);
    let b1 = BootstrapConfig { inflation: 1.0, replications: 100, ..BootstrapConfig::new(2 * PERIOD) };
    let b3 = BootstrapConfig { inflation: 3.0, ..b1 };
    let s1 = bootstrap_statistic(&cloud, &dcfg(), &b1).unwrap();
    let s3 = bootstrap_statistic(&cloud, &dcfg(), &b3).unwrap();
    for (x, y) in s1.statistics.iter().zip(&s3.statistics) {
        assert!((3.0 * x - y).abs() <= 1e-12 * y.abs().max(1e-300));
    }
    assert!((3.0 * s1.threshold - s3.threshold).abs() <= 1e-12 * s3.threshold);
}

#[test]
fn threshold_falls_as_alpha_rises() {
    let cloud = cloud_of(synthesize_plain_periodic(1.0, 500, PERIOD as f64, 0.1, 6).unwrap().samples);
    let mut last = f64::INFINITY;
    for alpha in [0.01, 0.05, 0.2, 0.5] {
        let b = BootstrapConfig { alpha, replications: 200, ..BootstrapConfig::new(2 * PERIOD) };
        let thr = bootstrap_statistic(&cloud, &dcfg(), &b).unwrap().threshold;
        assert!(thr <= last, "alpha {alpha}: {thr} > {last}");
        last = thr;
    }
}

fn random_cloud(rows: &[Vec<f64>]) -> PointCloud {
    PointCloud::from_rows(rows.to_vec(), (0..rows.len()).collect()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn series_reverses_with_the_cloud(
        rows in proptest::collection::vec(proptest::collection::vec(-3.0f64..3.0, 2), 12..30),
        h in 2usize..6,
    ) {
        let fwd = random_cloud(&rows);
        let mut rev_rows = rows.clone();
        rev_rows.reverse();
        let rev = random_cloud(&rev_rows);
        let cfg = DetectorConfig { use_exact: true, ..DetectorConfig::new(h) };
        let a = wasserstein_series(&fwd, &cfg).unwrap();
        let mut b = wasserstein_series(&rev, &cfg).unwrap().values;
        b.reverse();
        prop_assert_eq!(a.values.len(), b.len());
        for (x, y) in a.values.iter().zip(&b) {
            prop_assert!((x - y).abs() <= 1e-9 * x.abs().max(1.0));
        }
    }

    #[test]
    fn series_scales_as_p_th_power(
        rows in proptest::collection::vec(proptest::collection::vec(-3.0f64..3.0, 3), 10..24),
        c in 0.1f64..10.0,
        p in prop_oneof![Just(1.0f64), Just(2.0f64)],
    ) {
        let base = random_cloud(&rows);
        let scaled_rows: Vec<Vec<f64>> = rows.iter().map(|r| r.iter().map(|v| c * v).collect()).collect();
        let scaled = random_cloud(&scaled_rows);
        let mut cfg = DetectorConfig { use_exact: true, ..DetectorConfig::new(4) };
        cfg.ot.p = p;
        let a = wasserstein_series(&base, &cfg).unwrap();
        let b = wasserstein_series(&scaled, &cfg).unwrap();
        for (x, y) in a.values.iter().zip(&b.values) {
            let want = c.powf(p) * x;
            prop_assert!((want - y).abs() <= 1e-9 * want.abs().max(1.0));
        }
    }

    #[test]
    fn translation_leaves_series_unchanged(
        rows in proptest::collection::vec(proptest::collection::vec(-3.0f64..3.0, 2), 10..24),
        shift in proptest::collection::vec(-50.0f64..50.0, 2),
    ) {
        let base = random_cloud(&rows);
        let moved_rows: Vec<Vec<f64>> = rows.iter().map(|r| vec![r[0] + shift[0], r[1] + shift[1]]).collect();
        let moved = random_cloud(&moved_rows);
        let cfg = DetectorConfig { use_exact: true, ..DetectorConfig::new(3) };
        let a = wasserstein_series(&base, &cfg).unwrap();
        let b = wasserstein_series(&moved, &cfg).unwrap();
        for (x, y) in a.values.iter().zip(&b.values) {
            prop_assert!((x - y).abs() <= 1e-9 * x.abs().max(1.0));
        }
    }
}
