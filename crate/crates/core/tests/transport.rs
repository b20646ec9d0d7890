use proptest::prelude::*;

use qpcd::transport::{
    cost_matrix, transport_simplex, wasserstein_exact, wasserstein_sinkhorn, EmpiricalMeasure, OtConfig,
};

fn measure(pts: &[Vec<f64>]) -> EmpiricalMeasure {
    EmpiricalMeasure::uniform(pts.iter().map(Vec::as_slice)).unwrap()
}

fn dist_p(x: &[f64], y: &[f64], p: f64) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt().powf(p)
}

/// Recursive enumeration of every assignment.
fn brute_force(a: &[Vec<f64>], b: &[Vec<f64>], p: f64) -> f64 {
    fn go(a: &[Vec<f64>], b: &[Vec<f64>], p: f64, row: usize, used: &mut Vec<bool>) -> f64 {
        if row == a.len() {
            return 0.0;
        }
        let mut best = f64::INFINITY;
        for j in 0..b.len() {
            if !used[j] {
                used[j] = true;
                best = best.min(dist_p(&a[row], &b[j], p) + go(a, b, p, row + 1, used));
                used[j] = false;
            }
        }
        best
    }
    go(a, b, p, 0, &mut vec![false; b.len()]) / a.len() as f64
}

fn cloud(h: std::ops::Range<usize>, d: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    proptest::collection::vec(proptest::collection::vec(-2.0f64..2.0, d), h)
}

fn pair(max_h: usize) -> impl Strategy<Value = (Vec<Vec<f64>>, Vec<Vec<f64>>, f64)> {
    (1usize..=max_h, 1usize..=3, prop_oneof![Just(1.0f64), Just(2.0f64)]).prop_flat_map(|(h, d, p)| {
        (cloud(h..h + 1, d), cloud(h..h + 1, d), Just(p))
    })
}

fn triple() -> impl Strategy<Value = (Vec<Vec<Vec<f64>>>, f64)> {
    (2usize..=6, 1usize..=3, prop_oneof![Just(1.0f64), Just(2.0f64)])
        .prop_flat_map(|(h, d, p)| (proptest::collection::vec(cloud(h..h + 1, d), 3), Just(p)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn exact_matches_enumeration((a, b, p) in pair(6)) {
        let w = wasserstein_exact(&measure(&a), &measure(&b), p).unwrap();
        let oracle = brute_force(&a, &b, p);
        prop_assert!((w - oracle).abs() <= 1e-9, "{w} vs {oracle}");
    }

    #[test]
    fn simplex_agrees_on_uniform_marginals((a, b, p) in pair(6)) {
        let (ma, mb) = (measure(&a), measure(&b));
        let c = cost_matrix(&ma, &mb, p).unwrap();
        let simplex = transport_simplex(&c, ma.weights(), mb.weights());
        let w = wasserstein_exact(&ma, &mb, p).unwrap();
        prop_assert!((simplex - w).abs() <= 1e-9);
    }

    #[test]
    fn metric_axioms((m, p) in triple()) {
        let ms: Vec<EmpiricalMeasure> = m.iter().map(|x| measure(x)).collect();
        let w = |i: usize, j: usize| wasserstein_exact(&ms[i], &ms[j], p).unwrap();
        prop_assert!((w(0, 1) - w(1, 0)).abs() <= 1e-9);
        prop_assert!(w(0, 1) >= -1e-12);
        prop_assert!(w(2, 2).abs() <= 1e-12);
        let r = |i, j| w(i, j).powf(1.0 / p);
        prop_assert!(r(0, 2) <= r(0, 1) + r(1, 2) + 1e-9);
    }

    #[test]
    fn translation_and_scaling((a, b, p) in pair(5), v in -5.0f64..5.0, c in 0.2f64..5.0) {
        let base = wasserstein_exact(&measure(&a), &measure(&b), p).unwrap();
        let shift = |x: &[Vec<f64>]| x.iter().map(|r| r.iter().map(|e| e + v).collect()).collect::<Vec<Vec<f64>>>();
        let scale = |x: &[Vec<f64>]| x.iter().map(|r| r.iter().map(|e| e * c).collect()).collect::<Vec<Vec<f64>>>();
        let moved = wasserstein_exact(&measure(&shift(&a)), &measure(&shift(&b)), p).unwrap();
        prop_assert!((moved - base).abs() <= 1e-9 * base.max(1.0));
        let scaled = wasserstein_exact(&measure(&scale(&a)), &measure(&scale(&b)), p).unwrap();
        prop_assert!((scaled - c.powf(p) * base).abs() <= 1e-9 * scaled.max(1.0));
    }

    #[test]
    fn weighted_exact_is_a_lower_bound_for_any_coupling(
        a in cloud(2..6, 2),
        b in cloud(2..6, 2),
        wa in proptest::collection::vec(0.05f64..1.0, 6),
        wb in proptest::collection::vec(0.05f64..1.0, 6),
    ) {
        let norm = |w: &[f64], n: usize| {
            let s: f64 = w[..n].iter().sum();
            w[..n].iter().map(|x| x / s).collect::<Vec<f64>>()
        };
        let (xa, xb) = (norm(&wa, a.len()), norm(&wb, b.len()));
        let ma = EmpiricalMeasure::weighted(a.iter().map(Vec::as_slice), xa.clone()).unwrap();
        let mb = EmpiricalMeasure::weighted(b.iter().map(Vec::as_slice), xb.clone()).unwrap();
        let w = wasserstein_exact(&ma, &mb, 2.0).unwrap();
        // the independent coupling is feasible
        let mut indep = 0.0;
        for (i, x) in a.iter().enumerate() {
            for (j, y) in b.iter().enumerate() {
                indep += xa[i] * xb[j] * dist_p(x, y, 2.0);
            }
        }
        prop_assert!(w <= indep + 1e-12);
        prop_assert!(w >= 0.0);
    }
}

#[test]
fn sinkhorn_tracks_exact_at_default_regularisation() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(21);
    let mut pts = |n: usize| -> Vec<Vec<f64>> { (0..n).map(|_| (0..3).map(|_| rng.random_range(-1.0..1.0)).collect()).collect() };
    let cfg = OtConfig::default();
    for _ in 0..10 {
        let a = measure(&pts(12));
        let b = measure(&pts(12));
        let exact = wasserstein_exact(&a, &b, 2.0).unwrap();
        let s = wasserstein_sinkhorn(&a, &b, &cfg).unwrap();
        assert!((s.cost - exact).abs() / exact <= 0.05, "{} vs {exact}", s.cost);
    }
}
