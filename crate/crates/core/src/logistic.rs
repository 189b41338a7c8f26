//! Logistic propensity-score model fitted by Newton–Raphson.
//!
//! The linear predictor always carries an intercept, so `beta` has `p + 1`
//! entries with the intercept first.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::Dataset;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LogisticError {
    #[error("separation detected after {iterations} iterations (max |beta| = {max_coef:.3e})")]
    SeparationDetected { iterations: usize, max_coef: f64 },
    #[error("design matrix is rank deficient")]
    SingularDesign,
    #[error("Newton-Raphson did not converge within {0} iterations")]
    NoConvergence(usize),
    #[error("dimension mismatch: fit has p={expected}, input has p={found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("fit sample must contain both treated and control units")]
    DegenerateResponse,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogisticOptions {
    /// Convergence threshold on the largest absolute score-equation residual.
    pub tol: f64,
    pub max_iter: usize,
    /// Coefficient magnitude beyond which a non-converged fit is declared separated.
    pub separation_bound: f64,
    /// Fitted scores must lie in `(score_floor, 1 - score_floor)`.
    pub score_floor: f64,
}

impl Default for LogisticOptions {
    fn default() -> Self {
        Self { tol: 1e-8, max_iter: 100, separation_bound: 20.0, score_floor: 1e-10 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropensityFit {
    /// Intercept first, then one coefficient per covariate.
    pub beta: Vec<f64>,
    /// Fitted score for every unit of the dataset (including units outside the fit sample).
    pub scores: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
    pub max_score_residual: f64,
    /// Units that entered the likelihood.
    pub fit_rows: Vec<bool>,
}

impl PropensityFit {
    pub fn p(&self) -> usize {
        self.beta.len() - 1
    }

    pub fn linear_predictor(&self, x: &[f64]) -> f64 {
        self.beta[0] + self.beta[1..].iter().zip(x).map(|(b, v)| b * v).sum::<f64>()
    }

    /// Scores for `m` new rows given row-major with `p` columns.
    pub fn predict(&self, x_new: &[f64], p: usize) -> Result<Vec<f64>, LogisticError> {
        if p != self.p() || (p > 0 && !x_new.len().is_multiple_of(p)) {
            return Err(LogisticError::DimensionMismatch { expected: self.p(), found: p });
        }
        if p == 0 {
            return Ok(vec![logistic(self.beta[0]); x_new.len()]);
        }
        Ok(x_new.chunks(p).map(|r| logistic(self.linear_predictor(r))).collect())
    }
}

pub fn predict_ps(fit: &PropensityFit, x_new: &[f64], p: usize) -> Result<Vec<f64>, LogisticError> {
    fit.predict(x_new, p)
}

#[inline]
pub fn logistic(eta: f64) -> f64 {
    if eta >= 0.0 {
        1.0 / (1.0 + (-eta).exp())
    } else {
        let z = eta.exp();
        z / (1.0 + z)
    }
}

#[inline]
fn log1p_exp(eta: f64) -> f64 {
    if eta > 0.0 {
        eta + (-eta).exp().ln_1p()
    } else {
        eta.exp().ln_1p()
    }
}

/// Bernoulli log-likelihood of `beta` on the rows flagged in `rows`.
pub fn log_likelihood(data: &Dataset, rows: &[bool], beta: &[f64]) -> f64 {
    let mut ll = 0.0;
    for i in (0..data.n()).filter(|&i| rows[i]) {
        let eta = beta[0] + beta[1..].iter().zip(data.row(i)).map(|(b, v)| b * v).sum::<f64>();
        ll += f64::from(data.treat()[i]) * eta - log1p_exp(eta);
    }
    ll
}

/// Score vector `sum (A - e) (1, x)` over `rows`.
pub fn score_equations(data: &Dataset, rows: &[bool], beta: &[f64]) -> Vec<f64> {
    let k = data.p() + 1;
    let mut g = vec![0.0; k];
    for i in (0..data.n()).filter(|&i| rows[i]) {
        let x = data.row(i);
        let eta = beta[0] + beta[1..].iter().zip(x).map(|(b, v)| b * v).sum::<f64>();
        let r = f64::from(data.treat()[i]) - logistic(eta);
        g[0] += r;
        for j in 0..data.p() {
            g[j + 1] += r * x[j];
        }
    }
    g
}

/// Fisher information `sum e(1-e) x x'` over `rows` for the design with intercept.
pub fn information(data: &Dataset, rows: &[bool], scores: &[f64]) -> DMatrix<f64> {
    let k = data.p() + 1;
    let mut h = DMatrix::<f64>::zeros(k, k);
    let mut xt = vec![1.0; k];
    for i in (0..data.n()).filter(|&i| rows[i]) {
        xt[1..].copy_from_slice(data.row(i));
        let v = scores[i] * (1.0 - scores[i]);
        for a in 0..k {
            let va = v * xt[a];
            for b in a..k {
                h[(a, b)] += va * xt[b];
            }
        }
    }
    for a in 0..k {
        for b in 0..a {
            h[(a, b)] = h[(b, a)];
        }
    }
    h
}

/// Relative eigenvalue check used to reject rank-deficient designs up front.
pub(crate) fn well_conditioned(m: &DMatrix<f64>) -> bool {
    let eig = m.clone().symmetric_eigen().eigenvalues;
    let max = eig.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
    let min = eig.iter().fold(f64::INFINITY, |a, &b| a.min(b));
    max > 0.0 && min > 1e-12 * max
}

/// Likelihood decreases this small are indistinguishable from summation
/// rounding, so near the optimum a full Newton step is still accepted.
pub(crate) fn rounding_slack(ll: f64) -> f64 {
    1e-12 * ll.abs().max(1.0)
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

pub fn fit_logistic(data: &Dataset) -> Result<PropensityFit, LogisticError> {
    fit_logistic_rows(data, &vec![true; data.n()], &LogisticOptions::default())
}

/// Fits on the units flagged in `rows`; scores are then predicted for all units.
pub fn fit_logistic_rows(
    data: &Dataset,
    rows: &[bool],
    opts: &LogisticOptions,
) -> Result<PropensityFit, LogisticError> {
    let n = data.n();
    let k = data.p() + 1;
    let fit_treat = (0..n).filter(|&i| rows[i] && data.is_treated(i)).count();
    let fit_n = rows.iter().filter(|&&r| r).count();
    if fit_treat == 0 || fit_treat == fit_n {
        return Err(LogisticError::DegenerateResponse);
    }

    let predict_all = |beta: &[f64]| -> Vec<f64> {
        (0..n).map(|i| logistic(beta[0] + beta[1..].iter().zip(data.row(i)).map(|(b, v)| b * v).sum::<f64>())).collect()
    };

    let mut beta = vec![0.0; k];
    let mut scores = predict_all(&beta);
    let mut ll = log_likelihood(data, rows, &beta);
    let mut grad = score_equations(data, rows, &beta);
    let mut iterations = 0;
    if !well_conditioned(&information(data, rows, &scores)) {
        return Err(LogisticError::SingularDesign);
    }
    let mut converged = max_abs(&grad) <= opts.tol;

    while !converged {
        if iterations >= opts.max_iter {
            return Err(LogisticError::NoConvergence(opts.max_iter));
        }
        iterations += 1;
        let info = information(data, rows, &scores);
        let chol = info.cholesky().ok_or(LogisticError::SingularDesign)?;
        let step = chol.solve(&DVector::from_column_slice(&grad));

        let mut s = 1.0;
        let (new_beta, new_ll) = loop {
            let cand: Vec<f64> = beta.iter().zip(step.iter()).map(|(b, d)| b + s * d).collect();
            let cand_ll = log_likelihood(data, rows, &cand);
            if cand_ll >= ll - rounding_slack(ll) {
                break (cand, cand_ll);
            }
            if s < 1e-10 {
                break (beta.clone(), ll);
            }
            s *= 0.5;
        };
        let moved = new_beta.iter().zip(&beta).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        beta = new_beta;
        ll = new_ll;
        scores = predict_all(&beta);
        grad = score_equations(data, rows, &beta);
        let resid = max_abs(&grad);
        converged = resid <= opts.tol || (moved <= 1e-13 * (1.0 + max_abs(&beta)) && resid <= opts.tol * fit_n as f64);

        if !converged && max_abs(&beta) > opts.separation_bound {
            return Err(LogisticError::SeparationDetected { iterations, max_coef: max_abs(&beta) });
        }
    }

    let lo = opts.score_floor;
    if (0..n).any(|i| rows[i] && (scores[i] <= lo || scores[i] >= 1.0 - lo)) {
        return Err(LogisticError::SeparationDetected { iterations, max_coef: max_abs(&beta) });
    }

    Ok(PropensityFit {
        beta,
        scores,
        converged,
        iterations,
        max_score_residual: max_abs(&grad),
        fit_rows: rows.to_vec(),
    })
}
