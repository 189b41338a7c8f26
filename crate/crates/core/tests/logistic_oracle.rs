mod common;

use common::{bernoulli_loglik, nelder_mead, normal, random_dataset, rows_of};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rmcst::logistic::{fit_logistic_rows, score_equations, LogisticOptions};
use rmcst::{fit_logistic, Dataset};

fn sd(v: &[f64]) -> f64 {
    let m = v.iter().sum::<f64>() / v.len() as f64;
    (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64).sqrt()
}

#[test]
fn twenty_units_match_derivative_free_argmax() {
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    let x: Vec<f64> = (0..20).map(|_| normal(&mut rng)).collect();
    let a: Vec<u8> =
        x.iter().map(|&v| u8::from(rng.random::<f64>() < 1.0 / (1.0 + (-(0.2 + 0.5 * v)).exp()))).collect();
    let data = Dataset::new(x.clone(), 1, a.clone(), vec![1.0; 20], vec![true; 20]).unwrap();
    let fit = fit_logistic(&data).unwrap();

    let rows: Vec<Vec<f64>> = x.iter().map(|&v| vec![v]).collect();
    let oracle = nelder_mead(&|b| -bernoulli_loglik(&rows, &a, b), &[0.0, 0.0], 0.5, 1e-10);
    for (b, o) in fit.beta.iter().zip(&oracle) {
        assert!((b - o).abs() < 1e-6, "beta {:?} vs oracle {:?}", fit.beta, oracle);
    }
}

#[test]
fn score_residuals_on_random_datasets() {
    for seed in 0..20 {
        let data = random_dataset(100 + seed, 30 + 5 * seed as usize, 3);
        let n = data.n() as f64;
        let fit = fit_logistic(&data).unwrap();
        let g = score_equations(&data, &vec![true; data.n()], &fit.beta);
        assert!(g[0].abs() <= 1e-8 * n, "seed {seed}: intercept residual {}", g[0]);
        for j in 0..data.p() {
            assert!(g[j + 1].abs() <= 1e-8 * n * sd(&data.column(j)), "seed {seed}: column {j} residual {}", g[j + 1]);
        }

        // No point found by the oracle beats the Newton fit.
        let rows = rows_of(&data);
        let f = |b: &[f64]| -bernoulli_loglik(&rows, data.treat(), b);
        let oracle = nelder_mead(&f, &vec![0.0; data.p() + 1], 0.5, 1e-10);
        assert!(f(&fit.beta) <= f(&oracle) + 1e-9, "seed {seed}");
        for (b, o) in fit.beta.iter().zip(&oracle) {
            assert!((b - o).abs() < 1e-5, "seed {seed}: {:?} vs {:?}", fit.beta, oracle);
        }
    }
}

#[test]
fn subset_fit_ignores_excluded_rows() {
    let data = random_dataset(7, 60, 2);
    let rows: Vec<bool> = (0..60).map(|i| i % 3 != 0).collect();
    let fit = fit_logistic_rows(&data, &rows, &LogisticOptions::default()).unwrap();
    let idx: Vec<usize> = (0..60).filter(|&i| rows[i]).collect();
    let sub = fit_logistic(&data.subset(&idx).unwrap()).unwrap();
    for (a, b) in fit.beta.iter().zip(&sub.beta) {
        assert!((a - b).abs() < 1e-10);
    }
    // Excluded units still receive a predicted score.
    assert!(fit.scores.iter().all(|&e| e > 0.0 && e < 1.0));
}

#[test]
fn affine_rescaling_leaves_scores_unchanged() {
    let data = random_dataset(3, 80, 2);
    let fit = fit_logistic(&data).unwrap();
    let (scale, shift) = (4.0, -2.5);
    let mut x = data.covariates().to_vec();
    for i in 0..data.n() {
        x[i * 2 + 1] = scale * x[i * 2 + 1] + shift;
    }
    let moved = Dataset::new(x, 2, data.treat().to_vec(), data.time().to_vec(), data.event().to_vec()).unwrap();
    let refit = fit_logistic(&moved).unwrap();
    assert!((refit.beta[2] * scale - fit.beta[2]).abs() < 1e-8);
    for (a, b) in fit.scores.iter().zip(&refit.scores) {
        assert!((a - b).abs() < 1e-10);
    }
}
