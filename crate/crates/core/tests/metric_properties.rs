use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use riskbench::metrics::{c_for_benefit, c_statistic, ici_for_benefit, loess_smooth, match_pairs, rmse, MatchedPairSet};

fn brute_c_statistic(scores: &[f64], labels: &[bool]) -> f64 {
    let (mut num, mut den) = (0.0, 0.0);
    for (i, &si) in scores.iter().enumerate() {
        for (j, &sj) in scores.iter().enumerate() {
            if labels[i] && !labels[j] {
                den += 1.0;
                num += if si > sj { 1.0 } else if si == sj { 0.5 } else { 0.0 };
            }
        }
    }
    num / den
}

fn brute_c_for_benefit(pairs: &MatchedPairSet<f64>) -> Option<f64> {
    let (mut num, mut den) = (0.0, 0.0);
    let m = pairs.n_pairs();
    for i in 0..m {
        for j in 0..m {
            if pairs.observed[i] > pairs.observed[j] {
                den += 1.0;
                let (a, b) = (pairs.predicted[i], pairs.predicted[j]);
                num += if a > b { 1.0 } else if a == b { 0.5 } else { 0.0 };
            }
        }
    }
    (den > 0.0).then(|| num / den)
}

/// Scores on a coarse lattice so that ties occur.
fn coarse(v: f64) -> f64 {
    (v * 8.0).round() / 8.0
}

fn bump(v: f64) -> f64 {
    v * v * v + v
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn c_statistic_matches_all_pairs(data in prop::collection::vec((-2.0..2.0_f64, any::<bool>()), 2..120)) {
        let scores: Vec<f64> = data.iter().map(|d| coarse(d.0)).collect();
        let labels: Vec<bool> = data.iter().map(|d| d.1).collect();
        match c_statistic(&scores, &labels) {
            Ok(c) => {
                prop_assert!((c - brute_c_statistic(&scores, &labels)).abs() < 1e-12);
                let bumped: Vec<f64> = scores.iter().map(|&s| bump(s)).collect();
                prop_assert_eq!(c_statistic(&bumped, &labels).unwrap(), c);
            }
            Err(_) => prop_assert!(labels.iter().all(|&l| l) || labels.iter().all(|&l| !l)),
        }
    }

    #[test]
    fn c_for_benefit_matches_all_pairs(data in prop::collection::vec((-1i8..=1, -1.0..1.0_f64), 1..=200)) {
        let pairs = MatchedPairSet {
            observed: data.iter().map(|d| d.0).collect(),
            predicted: data.iter().map(|d| coarse(d.1)).collect(),
        };
        let grouped = c_for_benefit(&pairs).ok();
        let brute = brute_c_for_benefit(&pairs);
        prop_assert_eq!(grouped.is_some(), brute.is_some());
        if let (Some(g), Some(b)) = (grouped, brute) {
            prop_assert!((g - b).abs() < 1e-12);
            let bumped = MatchedPairSet { observed: pairs.observed.clone(), predicted: pairs.predicted.iter().map(|&p| bump(p)).collect() };
            prop_assert_eq!(c_for_benefit(&bumped).unwrap(), g);
        }
    }

    #[test]
    fn matching_is_invariant_under_increasing_transforms(
        data in prop::collection::vec((any::<bool>(), any::<bool>(), -1.0..1.0_f64), 2..150),
    ) {
        let treated: Vec<bool> = data.iter().map(|d| d.0).collect();
        let outcome: Vec<bool> = data.iter().map(|d| d.1).collect();
        let pred: Vec<f64> = data.iter().map(|d| coarse(d.2)).collect();
        let bumped: Vec<f64> = pred.iter().map(|&p| bump(p)).collect();
        match (match_pairs(&treated, &outcome, &pred), match_pairs(&treated, &outcome, &bumped)) {
            (Ok(a), Ok(b)) => {
                prop_assert_eq!(&a.observed, &b.observed);
                prop_assert_eq!(c_for_benefit(&a).ok(), c_for_benefit(&b).ok());
            }
            (a, b) => prop_assert_eq!(a.is_err(), b.is_err()),
        }
    }

    #[test]
    fn rmse_is_nonnegative_and_zero_only_on_equality(a in prop::collection::vec(-1.0..1.0_f64, 1..50), shift in 0.0..0.5_f64) {
        prop_assert_eq!(rmse(&a, &a).unwrap(), 0.0);
        let b: Vec<f64> = a.iter().map(|v| v + shift).collect();
        let r = rmse(&a, &b).unwrap();
        prop_assert!(r >= 0.0 && (shift == 0.0 || r > 0.0));
    }

    #[test]
    fn ici_is_nonnegative(data in prop::collection::vec((-1i8..=1, -0.5..0.5_f64), 10..200)) {
        let pairs = MatchedPairSet { observed: data.iter().map(|d| d.0).collect(), predicted: data.iter().map(|d| d.1).collect() };
        prop_assert!(ici_for_benefit(&pairs).unwrap() >= 0.0);
    }
}

#[test]
fn ici_is_small_for_calibrated_pairs() {
    let mut rng = ChaCha12Rng::seed_from_u64(2);
    let m = 100_000;
    let predicted: Vec<f64> = (0..m).map(|_| rng.random_range(-0.1..0.3)).collect();
    // Observed pair benefit with mean equal to the prediction.
    let observed: Vec<i8> = predicted
        .iter()
        .map(|&p| {
            let base: f64 = 0.3;
            let y0 = rng.random::<f64>() < base + p;
            let y1 = rng.random::<f64>() < base;
            i8::from(y0) - i8::from(y1)
        })
        .collect();
    let ici = ici_for_benefit(&MatchedPairSet { observed, predicted }).unwrap();
    assert!(ici < 0.01, "ici {ici}");
}

/// Direct local linear fit: the q = floor(0.75 n) nearest points, tricube
/// weights on distance over the q-th nearest distance, 2x2 normal equations.
fn oracle_loess(x: &[f64], y: &[f64], x0: f64) -> f64 {
    let q = (0.75 * x.len() as f64).floor() as usize;
    let mut dist: Vec<f64> = x.iter().map(|v| (v - x0).abs()).collect();
    dist.sort_by(f64::total_cmp);
    let d = dist[q - 1];
    let (mut s0, mut s1, mut s2, mut t0, mut t1) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (&xi, &yi) in x.iter().zip(y) {
        let u = (xi - x0).abs() / d;
        if u >= 1.0 {
            continue;
        }
        let w = (1.0 - u.powi(3)).powi(3);
        let dx = xi - x0;
        s0 += w;
        s1 += w * dx;
        s2 += w * dx * dx;
        t0 += w * yi;
        t1 += w * dx * yi;
    }
    (s2 * t0 - s1 * t1) / (s0 * s2 - s1 * s1)
}

#[test]
fn loess_matches_direct_weighted_least_squares_on_a_parabola() {
    let x: Vec<f64> = (0..200).map(|i| f64::from(i) / 199.0).collect();
    let y: Vec<f64> = x.iter().map(|v| v * v).collect();
    let interior: Vec<f64> = x.iter().copied().filter(|&v| (0.1..=0.9).contains(&v)).collect();
    let fit = loess_smooth(&x, &y, &interior).unwrap();
    let mut worst: f64 = 0.0;
    for (f, &v) in fit.iter().zip(&interior) {
        assert!((f - oracle_loess(&x, &y, v)).abs() < 1e-10);
        worst = worst.max((f - v * v).abs());
    }
    // Smoothing bias of a degree-1 fit with span 0.75: about d^2 times the
    // tricube second moment (0.144), d between 0.375 and 0.65 here.
    assert!(worst < 0.03, "max error {worst}");
}

#[test]
fn loess_reproduces_lines_at_interior_points() {
    let x: Vec<f64> = (0..300).map(|i| f64::from(i) * 0.01).collect();
    let y: Vec<f64> = x.iter().map(|v| 0.3 * v - 1.0).collect();
    for (f, t) in loess_smooth(&x, &y, &x).unwrap().iter().zip(&y) {
        assert!((f - t).abs() < 1e-6);
    }
}
