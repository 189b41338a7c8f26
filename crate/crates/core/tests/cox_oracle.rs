mod common;

use common::{breslow_baseline, breslow_loglik, nelder_mead, normal, random_dataset};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rmcst::censoring::{fit_censoring_cox, fit_cox, log_partial_likelihood, partial_score, CoxOptions};
use rmcst::{Dataset, Side};

fn fifteen_units() -> (Vec<f64>, Vec<bool>, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    let x: Vec<f64> = (0..15).map(|_| normal(&mut rng)).collect();
    let times: Vec<f64> = x.iter().map(|&v| -rng.random::<f64>().ln() / (0.7 * v).exp()).collect();
    let status: Vec<bool> = (0..15).map(|_| rng.random::<f64>() < 0.7).collect();
    (times, status, x)
}

#[test]
fn fifteen_units_match_enumerated_partial_likelihood() {
    let (times, status, x) = fifteen_units();
    let fit = fit_cox(&times, &status, &x, 1, &CoxOptions::default()).unwrap();
    let rows: Vec<Vec<f64>> = x.iter().map(|&v| vec![v]).collect();
    let oracle = nelder_mead(&|c| -breslow_loglik(&times, &status, &rows, c), &[0.0], 0.5, 1e-10);
    assert!((fit.coef[0] - oracle[0]).abs() < 1e-6, "{} vs {}", fit.coef[0], oracle[0]);

    for (&t, &s) in times.iter().zip(&status) {
        let want = breslow_baseline(&times, &status, &rows, &fit.coef, t);
        assert!((fit.baseline.eval(t, Side::Right) - want).abs() < 1e-12);
        // Jumps only at the model's own event times.
        let jump = fit.baseline.eval(t, Side::Right) - fit.baseline.eval(t, Side::Left);
        assert_eq!(jump > 0.0, s);
    }
}

#[test]
fn partial_likelihood_agrees_with_enumeration() {
    let d = random_dataset(9, 40, 2);
    // Coarsened times create ties.
    let times: Vec<f64> = d.time().iter().map(|t| (t * 4.0).round() / 4.0).collect();
    let status: Vec<bool> = d.event().to_vec();
    let rows: Vec<Vec<f64>> = (0..40).map(|i| d.row(i).to_vec()).collect();
    for coef in [[0.0, 0.0], [0.3, -0.7], [-1.2, 0.4]] {
        let a = log_partial_likelihood(&times, &status, d.covariates(), 2, &coef);
        let b = breslow_loglik(&times, &status, &rows, &coef);
        assert!((a - b).abs() < 1e-10 * (1.0 + b.abs()), "{a} vs {b}");
    }
}

#[test]
fn score_residuals_on_random_datasets() {
    for seed in 0..20 {
        let d = random_dataset(500 + seed, 25 + 3 * seed as usize, 2);
        let n = d.n();
        let times: Vec<f64> = d.time().iter().map(|t| (t * 10.0).round() / 10.0).collect();
        let status: Vec<bool> = d.event().iter().map(|e| !e).collect();
        let fit = fit_cox(&times, &status, d.covariates(), 2, &CoxOptions::default()).unwrap();
        let g = partial_score(&times, &status, d.covariates(), 2, &fit.coef);
        assert!(g.iter().all(|v| v.abs() <= 1e-8 * n as f64), "seed {seed}: {g:?}");

        let rows: Vec<Vec<f64>> = (0..n).map(|i| d.row(i).to_vec()).collect();
        let f = |c: &[f64]| -breslow_loglik(&times, &status, &rows, c);
        let oracle = nelder_mead(&f, &[0.0, 0.0], 0.5, 1e-10);
        assert!(f(&fit.coef) <= f(&oracle) + 1e-9, "seed {seed}");
        for (a, b) in fit.coef.iter().zip(&oracle) {
            assert!((a - b).abs() < 1e-5, "seed {seed}: {:?} vs {oracle:?}", fit.coef);
        }
    }
}

#[test]
fn censoring_survival_is_affine_invariant() {
    let d = random_dataset(31, 120, 2);
    let (scale, shift) = (0.25, 3.0);
    let mut x = d.covariates().to_vec();
    for i in 0..d.n() {
        x[i * 2] = scale * x[i * 2] + shift;
    }
    let moved = Dataset::new(x, 2, d.treat().to_vec(), d.time().to_vec(), d.event().to_vec()).unwrap();
    let (a, b) = (fit_censoring_cox(&d).unwrap(), fit_censoring_cox(&moved).unwrap());
    for arm in [0u8, 1] {
        for i in (0..d.n()).filter(|&i| d.treat()[i] == arm) {
            for &t in &[0.2, 0.8, 1.5, 3.0] {
                let ka = a.arm(arm).model.survival(t, d.row(i), Side::Left);
                let kb = b.arm(arm).model.survival(t, moved.row(i), Side::Left);
                assert!((ka - kb).abs() < 1e-10, "arm {arm} unit {i} t {t}: {ka} vs {kb}");
            }
        }
    }
}
