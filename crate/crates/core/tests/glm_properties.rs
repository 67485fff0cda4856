use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;
use riskbench::glm::{bernoulli_log_likelihood, expit, fit_logistic, log_likelihood_at, predict_linear, score_at, DesignMatrix};
use riskbench::scenario::{baseline_beta, control_lp, generate_covariates};

fn simulate(seed: u64, n: usize, beta: &[f64]) -> (DesignMatrix<f64>, Vec<bool>) {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let p = beta.len() - 1;
    let x = DesignMatrix::from_fn(n, p, |_, row| {
        for v in row.iter_mut() {
            *v = rng.sample(StandardNormal);
        }
    })
    .unwrap();
    let y = x
        .iter_rows()
        .map(|r| {
            let eta: f64 = r.iter().zip(beta).map(|(a, b)| a * b).sum();
            rng.random::<f64>() < expit(eta)
        })
        .collect();
    (x, y)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn score_vanishes_and_deviance_decreases(
        seed in any::<u64>(),
        n in 30usize..400,
        beta in prop::collection::vec(-1.5..1.5_f64, 1..5),
    ) {
        let (x, y) = simulate(seed, n, &beta);
        let Ok(fit) = fit_logistic(&x, &y) else { return Ok(()) };
        if fit.converged {
            let score = score_at(&fit.coefficients, &x, &y).unwrap();
            let worst = score.iter().fold(0.0_f64, |m, s| m.max(s.abs()));
            prop_assert!(worst <= 1e-4, "score {worst}");
            let eta = predict_linear(&fit, &x).unwrap();
            let direct: f64 = x.iter_rows().zip(&eta).zip(&y).map(|((r, &e), &yi)| {
                r[0] * (f64::from(u8::from(yi)) - expit(e))
            }).sum();
            prop_assert!(direct.abs() <= 1e-4);
            prop_assert_eq!(fit.aic, 2.0 * fit.coefficients.len() as f64 - 2.0 * fit.log_likelihood);
        }
        for w in fit.deviance_trace.windows(2) {
            // equal up to rounding of the log-likelihood sum
            prop_assert!(w[1] <= w[0] + 1e-12 * w[0].abs(), "deviance rose from {} to {}", w[0], w[1]);
        }
    }
}

/// Best log-likelihood over a 0.01 grid on [-6, 6] per coefficient.
fn grid_best(x: &DesignMatrix<f64>, y: &[bool], dims: usize) -> f64 {
    let steps: Vec<f64> = (0..=1200).map(|i| -6.0 + 0.01 * f64::from(i)).collect();
    let mut best = f64::NEG_INFINITY;
    if dims == 1 {
        for &a in &steps {
            best = best.max(log_likelihood_at(&[a], x, y).unwrap());
        }
        return best;
    }
    let rows: Vec<(f64, bool)> = x.iter_rows().zip(y).map(|(r, &yi)| (r[1], yi)).collect();
    for &a in &steps {
        for &b in &steps {
            let ll: f64 = rows.iter().map(|&(x1, yi)| bernoulli_log_likelihood(yi, a + b * x1)).sum();
            best = best.max(ll);
        }
    }
    best
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn fit_beats_brute_force_grid(
        seed in any::<u64>(),
        n in 20usize..60,
        b0 in -1.5..1.5_f64,
        b1 in -1.5..1.5_f64,
        two in any::<bool>(),
    ) {
        let beta = if two { vec![b0, b1] } else { vec![b0] };
        let (x, y) = simulate(seed, n, &beta);
        let Ok(fit) = fit_logistic(&x, &y) else { return Ok(()) };
        prop_assume!(fit.converged && fit.coefficients.iter().all(|c| c.abs() < 6.0));
        let best = grid_best(&x, &y, beta.len());
        prop_assert!(fit.log_likelihood >= best - 1e-6, "fit {} grid {}", fit.log_likelihood, best);
    }
}

#[test]
fn recovers_generating_coefficients_at_large_n() {
    let beta = baseline_beta(0.75).unwrap();
    let mut rng = ChaCha12Rng::seed_from_u64(5);
    let n = 100_000;
    let cov = generate_covariates(n, &mut rng);
    let lp = control_lp(&cov, &beta).unwrap();
    let y: Vec<bool> = lp.iter().map(|&l| rng.random::<f64>() < expit(l)).collect();
    let x = DesignMatrix::from_fn(n, 8, |i, row| row.copy_from_slice(&cov[i * 8..(i + 1) * 8])).unwrap();
    let fit = fit_logistic(&x, &y).unwrap();
    assert!(fit.converged);
    for (got, want) in fit.coefficients.iter().zip(&beta) {
        assert!((got - want).abs() < 0.05, "{got} vs {want}");
    }
}

#[test]
fn single_precision_fit_agrees_with_double() {
    let (x, y) = simulate(3, 500, &[-0.7, 0.8, -0.4]);
    let fit64 = fit_logistic(&x, &y).unwrap();
    let x32 = DesignMatrix::<f32>::from_fn(500, 2, |i, row| {
        for (d, s) in row.iter_mut().zip(&x.row(i)[1..]) {
            *d = *s as f32;
        }
    })
    .unwrap();
    let fit32 = fit_logistic(&x32, &y).unwrap();
    assert!(fit32.converged);
    for (a, b) in fit32.coefficients.iter().zip(&fit64.coefficients) {
        assert!((f64::from(*a) - b).abs() < 1e-3);
    }
}
