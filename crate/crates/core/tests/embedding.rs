use epal_core::embed::{self, EmbedConfig, Embedding};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn euclid(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

fn cloud(n: usize, dim: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| (0..dim).map(|_| rng.random()).collect()).collect()
}

#[test]
fn knn_agrees_with_a_full_sort() {
    let pts = cloud(100, 4, 1);
    let got = embed::knn(&pts, 10).unwrap();
    for (i, row) in got.iter().enumerate() {
        let mut all: Vec<(usize, f64)> = (0..pts.len())
            .filter(|&j| j != i)
            .map(|j| (j, euclid(&pts[i], &pts[j])))
            .collect();
        all.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap().then(a.0.cmp(&b.0)));
        let want: Vec<usize> = all[..10].iter().map(|p| p.0).collect();
        let have: Vec<usize> = row.iter().map(|p| p.0).collect();
        assert_eq!(have, want, "row {i}");
    }
}

#[test]
fn knn_breaks_ties_by_index() {
    let pts = vec![vec![0.0], vec![1.0], vec![-1.0], vec![2.0], vec![-2.0]];
    let got = embed::knn(&pts, 2).unwrap();
    assert_eq!(got[0], vec![(1, 1.0), (2, 1.0)]);
}

#[test]
fn smooth_knn_hits_the_log2_target() {
    for (d, k) in [(vec![1.0, 2.0, 3.0], 3usize), (vec![0.5, 0.9, 1.7, 2.2, 4.0], 5), (vec![0.0, 0.3, 0.9, 1.4], 4)] {
        let (rho, sigma) = embed::smooth_knn(&d, k);
        let first_positive = d.iter().copied().find(|x| *x > 0.0).unwrap();
        assert_eq!(rho, first_positive);
        let mass: f64 = d.iter().map(|x| (-(x - rho).max(0.0) / sigma).exp()).sum();
        assert!((mass - (k as f64).log2()).abs() < 1e-6, "mass {mass} for {d:?}");
    }
    // three distances at or below rho already exceed log2(4): sigma bottoms out
    let (rho, sigma) = embed::smooth_knn(&[0.0, 0.3, 0.3, 0.8], 4);
    assert_eq!(rho, 0.3);
    assert!(sigma < 1e-5);
    let mass: f64 = [0.0, 0.3, 0.3, 0.8f64].iter().map(|x| (-(x - rho).max(0.0) / sigma).exp()).sum();
    assert!((mass - 3.0).abs() < 1e-9);

    // the (1, 2, 3) case by independent bisection
    let target = 3f64.log2();
    let f = |s: f64| 1.0 + (-1.0 / s).exp() + (-2.0 / s).exp() - target;
    let (mut lo, mut hi) = (1e-3, 10.0);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let (_, sigma) = embed::smooth_knn(&[1.0, 2.0, 3.0], 3);
    assert!((sigma - lo).abs() < 1e-6);
}

fn curve_residual(a: f64, b: f64, min_dist: f64, spread: f64) -> f64 {
    (0..300)
        .map(|i| {
            let x = 3.0 * spread * i as f64 / 299.0;
            let target = if x < min_dist { 1.0 } else { (-(x - min_dist) / spread).exp() };
            (1.0 / (1.0 + a * x.powf(2.0 * b)) - target).powi(2)
        })
        .sum()
}

#[test]
fn curve_fit_is_a_least_squares_minimum() {
    let (a, b) = embed::fit_curve(0.1, 1.0).unwrap();
    assert!((a - 1.58).abs() < 0.03, "a = {a}");
    assert!((b - 0.90).abs() < 0.02, "b = {b}");
    let best = curve_residual(a, b, 0.1, 1.0);
    for (da, db) in [(0.02, 0.0), (-0.02, 0.0), (0.0, 0.01), (0.0, -0.01)] {
        assert!(curve_residual(a + da, b + db, 0.1, 1.0) > best);
    }
    let (a_wide, _) = embed::fit_curve(0.5, 1.0).unwrap();
    assert!(a_wide < a);
    assert!(embed::fit_curve(1.0, 1.0).is_err());
}

fn centroid(e: &Embedding, ids: std::ops::Range<usize>) -> [f64; 2] {
    let n = ids.len() as f64;
    let mut c = [0.0, 0.0];
    for i in ids {
        c[0] += e.coords[i][0] / n;
        c[1] += e.coords[i][1] / n;
    }
    c
}

#[test]
fn separated_blobs_stay_separated() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let centers = [[0.0; 5], [10.0, 0.0, 0.0, 0.0, 0.0], [0.0, 0.0, 10.0, 0.0, 10.0]];
    let pts: Vec<Vec<f64>> = centers
        .iter()
        .flat_map(|c| {
            (0..50)
                .map(|_| {
                    c.iter()
                        .map(|v| {
                            let z: f64 = StandardNormal.sample(&mut rng);
                            v + 0.5 * z
                        })
                        .collect::<Vec<f64>>()
                })
                .collect::<Vec<_>>()
        })
        .collect();
    let (_, e) = embed::embed_points(&pts, &EmbedConfig::default()).unwrap();
    let cs: Vec<[f64; 2]> = (0..3).map(|b| centroid(&e, b * 50..(b + 1) * 50)).collect();
    let radius = (0..3)
        .map(|b| {
            (b * 50..(b + 1) * 50)
                .map(|i| euclid(&e.coords[i], &cs[b]))
                .sum::<f64>()
                / 50.0
        })
        .fold(0.0f64, f64::max);
    for i in 0..3 {
        for j in i + 1..3 {
            assert!(euclid(&cs[i], &cs[j]) > 3.0 * radius);
        }
    }
}

#[test]
fn trustworthiness_spans_the_expected_range() {
    let pts2: Vec<Vec<f64>> = cloud(120, 2, 5);
    let identity = Embedding {
        coords: pts2.iter().map(|p| [p[0], p[1]]).collect(),
        isolated: 0,
    };
    assert!((embed::trustworthiness(&pts2, &identity, 10).unwrap() - 1.0).abs() < 1e-12);

    // an unrelated layout carries no neighborhood information
    let high = cloud(300, 8, 6);
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let scrambled = Embedding {
        coords: (0..300).map(|_| [rng.random(), rng.random()]).collect(),
        isolated: 0,
    };
    let t = embed::trustworthiness(&high, &scrambled, 10).unwrap();
    assert!((0.4..0.6).contains(&t), "t = {t}");
    assert!(embed::trustworthiness(&high, &scrambled, 150).is_err());
}

#[test]
fn embedding_is_reproducible_per_seed() {
    let pts = cloud(80, 3, 11);
    let cfg = EmbedConfig {
        epochs: 100,
        ..EmbedConfig::default()
    };
    let (_, a) = embed::embed_points(&pts, &cfg).unwrap();
    let (_, b) = embed::embed_points(&pts, &cfg).unwrap();
    assert_eq!(a, b);
    let (_, c) = embed::embed_points(&pts, &EmbedConfig { seed: 1, ..cfg }).unwrap();
    assert_ne!(a, c);
}
