//! Censoring-score model: a Cox proportional hazards fit of the censoring
//! times within each treatment arm, with the Breslow baseline cumulative
//! hazard. Gives `K_C^(a)(t, x) = exp(-Lambda_0^(a)(t) exp(theta_a' x))`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{Dataset, Side, StepFunction};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CoxError {
    #[error("partial-likelihood information matrix is singular")]
    SingularInformation,
    #[error("Cox Newton-Raphson did not converge within {0} iterations")]
    NoConvergence(usize),
    #[error("dimension mismatch: fit has p={expected}, input has p={found}")]
    DimensionMismatch { expected: usize, found: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoxOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for CoxOptions {
    fn default() -> Self {
        Self { tol: 1e-8, max_iter: 100 }
    }
}

/// Fitted Cox model: coefficients plus Breslow baseline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoxModel {
    pub coef: Vec<f64>,
    /// Breslow cumulative baseline hazard, with jumps at the distinct event times.
    pub baseline: StepFunction,
    /// Number of events at each baseline knot.
    pub event_counts: Vec<f64>,
    /// `sum_{U_j >= s} exp(coef' x_j)` at each baseline knot.
    pub risk_totals: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
    pub max_score_residual: f64,
}

impl CoxModel {
    /// Model with no events: zero coefficients and an identically zero baseline.
    pub fn degenerate(p: usize) -> Self {
        Self {
            coef: vec![0.0; p],
            baseline: StepFunction::zero(),
            event_counts: Vec::new(),
            risk_totals: Vec::new(),
            converged: true,
            iterations: 0,
            max_score_residual: 0.0,
        }
    }

    pub fn risk_score(&self, x: &[f64]) -> f64 {
        self.coef.iter().zip(x).map(|(b, v)| b * v).sum::<f64>().exp()
    }

    /// `exp(-Lambda_0(t) * exp(coef' x))` at the requested side of `t`.
    pub fn survival(&self, t: f64, x: &[f64], side: Side) -> f64 {
        (-self.baseline.eval(t, side) * self.risk_score(x)).exp()
    }
}

/// Groups of unit indices sharing a time, in descending time order.
fn descending_groups(times: &[f64]) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..times.len()).collect();
    order.sort_by(|&a, &b| times[b].partial_cmp(&times[a]).expect("finite times"));
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for i in order {
        match groups.last_mut() {
            Some(g) if times[g[0]] == times[i] => g.push(i),
            _ => groups.push(vec![i]),
        }
    }
    groups
}

struct PartialLikelihood {
    loglik: f64,
    score: Vec<f64>,
    info: DMatrix<f64>,
}

/// Breslow log partial likelihood with its score and information.
fn evaluate(
    groups: &[Vec<usize>],
    status: &[bool],
    x: &[f64],
    p: usize,
    coef: &[f64],
    with_info: bool,
) -> PartialLikelihood {
    let eta: Vec<f64> =
        (0..status.len()).map(|i| coef.iter().zip(&x[i * p..(i + 1) * p]).map(|(b, v)| b * v).sum()).collect();
    let shift = eta.iter().cloned().fold(f64::NEG_INFINITY, f64::max).max(0.0);
    let mut s0 = 0.0;
    let mut s1 = vec![0.0; p];
    let mut s2 = DMatrix::<f64>::zeros(p, p);
    let mut out = PartialLikelihood { loglik: 0.0, score: vec![0.0; p], info: DMatrix::zeros(p, p) };
    for g in groups {
        for &i in g {
            let r = (eta[i] - shift).exp();
            let xi = &x[i * p..(i + 1) * p];
            s0 += r;
            for a in 0..p {
                s1[a] += r * xi[a];
                if with_info {
                    for b in a..p {
                        s2[(a, b)] += r * xi[a] * xi[b];
                    }
                }
            }
        }
        let d = g.iter().filter(|&&i| status[i]).count() as f64;
        if d == 0.0 {
            continue;
        }
        out.loglik -= d * (s0.ln() + shift);
        for &i in g.iter().filter(|&&i| status[i]) {
            out.loglik += eta[i];
            for a in 0..p {
                out.score[a] += x[i * p + a];
            }
        }
        for a in 0..p {
            out.score[a] -= d * s1[a] / s0;
            if with_info {
                for b in a..p {
                    out.info[(a, b)] += d * (s2[(a, b)] / s0 - s1[a] * s1[b] / (s0 * s0));
                }
            }
        }
    }
    if with_info {
        for a in 0..p {
            for b in 0..a {
                out.info[(a, b)] = out.info[(b, a)];
            }
        }
    }
    out
}

/// Breslow log partial likelihood, exposed for independent checks.
pub fn log_partial_likelihood(times: &[f64], status: &[bool], x: &[f64], p: usize, coef: &[f64]) -> f64 {
    evaluate(&descending_groups(times), status, x, p, coef, false).loglik
}

/// Partial-likelihood score vector at `coef`.
pub fn partial_score(times: &[f64], status: &[bool], x: &[f64], p: usize, coef: &[f64]) -> Vec<f64> {
    evaluate(&descending_groups(times), status, x, p, coef, false).score
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Fits a Cox model with Breslow ties. `status[i]` marks an event for this model.
pub fn fit_cox(times: &[f64], status: &[bool], x: &[f64], p: usize, opts: &CoxOptions) -> Result<CoxModel, CoxError> {
    if !status.iter().any(|&s| s) {
        return Ok(CoxModel::degenerate(p));
    }
    let groups = descending_groups(times);

    // Centering leaves the coefficients unchanged and keeps exp() well scaled.
    let n = times.len();
    let mut means = vec![0.0; p];
    for i in 0..n {
        for a in 0..p {
            means[a] += x[i * p + a] / n as f64;
        }
    }
    let xc: Vec<f64> = (0..n * p).map(|k| x[k] - means[k % p.max(1)]).collect();

    let mut coef = vec![0.0; p];
    let mut cur = evaluate(&groups, status, &xc, p, &coef, true);
    let mut iterations = 0;
    if p > 0 && !crate::logistic::well_conditioned(&cur.info) {
        return Err(CoxError::SingularInformation);
    }
    while p > 0 && max_abs(&cur.score) > opts.tol {
        if iterations >= opts.max_iter {
            return Err(CoxError::NoConvergence(opts.max_iter));
        }
        iterations += 1;
        let chol = cur.info.clone().cholesky().ok_or(CoxError::SingularInformation)?;
        let step = chol.solve(&DVector::from_column_slice(&cur.score));
        let mut s = 1.0;
        let next = loop {
            let cand: Vec<f64> = coef.iter().zip(step.iter()).map(|(b, d)| b + s * d).collect();
            let ev = evaluate(&groups, status, &xc, p, &cand, true);
            if ev.loglik >= cur.loglik - crate::logistic::rounding_slack(cur.loglik) {
                break Some((cand, ev));
            }
            if s < 1e-10 {
                break None;
            }
            s *= 0.5;
        };
        match next {
            Some((c, ev)) => {
                let moved = c.iter().zip(&coef).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
                coef = c;
                cur = ev;
                if moved <= 1e-13 * (1.0 + max_abs(&coef)) && max_abs(&cur.score) <= opts.tol * n as f64 {
                    break;
                }
            }
            // No ascent possible: the likelihood is numerically flat here.
            None if max_abs(&cur.score) <= opts.tol * n as f64 => break,
            None => return Err(CoxError::NoConvergence(iterations)),
        }
    }

    // Breslow baseline on the raw covariates.
    let eta: Vec<f64> = (0..n).map(|i| coef.iter().zip(&x[i * p..(i + 1) * p]).map(|(b, v)| b * v).sum()).collect();
    let mut s0 = 0.0;
    let mut jumps: Vec<(f64, f64, f64)> = Vec::new();
    for g in &groups {
        for &i in g {
            s0 += eta[i].exp();
        }
        let d = g.iter().filter(|&&i| status[i]).count() as f64;
        if d > 0.0 {
            jumps.push((times[g[0]], d, s0));
        }
    }
    jumps.reverse();
    let mut acc = 0.0;
    let mut knots = Vec::with_capacity(jumps.len());
    let mut values = Vec::with_capacity(jumps.len());
    for &(t, d, s) in &jumps {
        acc += d / s;
        knots.push(t);
        values.push(acc);
    }
    Ok(CoxModel {
        coef,
        baseline: StepFunction::new(knots, values, 0.0),
        event_counts: jumps.iter().map(|j| j.1).collect(),
        risk_totals: jumps.iter().map(|j| j.2).collect(),
        converged: true,
        iterations,
        max_score_residual: max_abs(&cur.score),
    })
}

/// Censoring model of one treatment arm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmCensoringModel {
    pub arm: u8,
    pub model: CoxModel,
    /// True when the arm had no censored units (`K_C = 1`).
    pub degenerate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CensoringFit {
    pub p: usize,
    pub arms: [ArmCensoringModel; 2],
}

impl CensoringFit {
    /// `K_C = 1` in both arms.
    pub fn none(p: usize) -> Self {
        let arm = |a| ArmCensoringModel { arm: a, model: CoxModel::degenerate(p), degenerate: true };
        Self { p, arms: [arm(0), arm(1)] }
    }

    pub fn arm(&self, a: u8) -> &ArmCensoringModel {
        &self.arms[a as usize]
    }
}

pub fn fit_censoring_cox(data: &Dataset) -> Result<CensoringFit, CoxError> {
    fit_censoring_cox_with(data, &CoxOptions::default())
}

pub fn fit_censoring_cox_with(data: &Dataset, opts: &CoxOptions) -> Result<CensoringFit, CoxError> {
    let p = data.p();
    let fit_arm = |a: u8| -> Result<ArmCensoringModel, CoxError> {
        let idx: Vec<usize> = (0..data.n()).filter(|&i| data.treat()[i] == a).collect();
        let times: Vec<f64> = idx.iter().map(|&i| data.time()[i]).collect();
        let status: Vec<bool> = idx.iter().map(|&i| !data.event()[i]).collect();
        let mut x = Vec::with_capacity(idx.len() * p);
        for &i in &idx {
            x.extend_from_slice(data.row(i));
        }
        if !status.iter().any(|&s| s) {
            log::warn!("arm {a} has no censoring events; using K_C = 1");
            return Ok(ArmCensoringModel { arm: a, model: CoxModel::degenerate(p), degenerate: true });
        }
        Ok(ArmCensoringModel { arm: a, model: fit_cox(&times, &status, &x, p, opts)?, degenerate: false })
    };
    Ok(CensoringFit { p, arms: [fit_arm(0)?, fit_arm(1)?] })
}

pub fn censoring_survival(fit: &CensoringFit, a: u8, t: f64, x: &[f64], side: Side) -> Result<f64, CoxError> {
    if x.len() != fit.p {
        return Err(CoxError::DimensionMismatch { expected: fit.p, found: x.len() });
    }
    Ok(fit.arm(a).model.survival(t, x, side))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn no_covariates_reduces_to_nelson_aalen() {
        let times = [1.0, 2.0, 2.0, 3.0, 5.0, 6.0];
        let status = [true, false, true, true, false, true];
        let m = fit_cox(&times, &status, &[], 0, &CoxOptions::default()).unwrap();
        // risk sets: t=1 -> 6, t=2 -> 5 (one event), t=3 -> 3, t=6 -> 1
        let expect = [
            1.0 / 6.0,
            1.0 / 6.0 + 1.0 / 5.0,
            1.0 / 6.0 + 1.0 / 5.0 + 1.0 / 3.0,
            1.0 / 6.0 + 1.0 / 5.0 + 1.0 / 3.0 + 1.0,
        ];
        assert_eq!(m.baseline.knots(), &[1.0, 2.0, 3.0, 6.0]);
        for (v, e) in m.baseline.values().iter().zip(expect) {
            assert!((v - e).abs() < 1e-15);
        }
    }

    #[test]
    fn arm_without_censoring_is_degenerate() {
        let d = Dataset::new(
            vec![0.1, 0.2, 0.3, 0.4],
            1,
            vec![1, 1, 0, 0],
            vec![1.0, 2.0, 3.0, 4.0],
            vec![true, true, false, true],
        )
        .unwrap();
        let fit = fit_censoring_cox(&d).unwrap();
        assert!(fit.arm(1).degenerate);
        for t in [0.0, 1.5, 100.0] {
            assert_eq!(censoring_survival(&fit, 1, t, &[0.7], Side::Right).unwrap(), 1.0);
        }
        assert!(!fit.arm(0).degenerate);
    }

    #[test]
    fn survival_evaluation() {
        let model = CoxModel {
            coef: vec![0.0],
            baseline: StepFunction::new(vec![1.0, 2.0], vec![0.3, 0.7], 0.0),
            event_counts: vec![1.0, 1.0],
            risk_totals: vec![2.0, 1.0],
            converged: true,
            iterations: 0,
            max_score_residual: 0.0,
        };
        let fit = CensoringFit {
            p: 1,
            arms: [
                ArmCensoringModel { arm: 0, model: model.clone(), degenerate: false },
                ArmCensoringModel { arm: 1, model, degenerate: false },
            ],
        };
        assert_eq!(censoring_survival(&fit, 0, 0.5, &[3.0], Side::Right).unwrap(), 1.0);
        assert!((censoring_survival(&fit, 0, 2.0, &[3.0], Side::Right).unwrap() - (-0.7f64).exp()).abs() < 1e-15);
        let left = censoring_survival(&fit, 0, 2.0, &[3.0], Side::Left).unwrap();
        let right = censoring_survival(&fit, 0, 2.0, &[3.0], Side::Right).unwrap();
        assert!((right / left - (-0.4f64).exp()).abs() < 1e-15);
        assert!(matches!(
            censoring_survival(&fit, 0, 1.0, &[1.0, 2.0], Side::Right),
            Err(CoxError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn constant_covariate_is_singular() {
        let times = [1.0, 2.0, 3.0, 4.0];
        let status = [true, false, true, true];
        let err = fit_cox(&times, &status, &[1.0; 4], 1, &CoxOptions::default()).unwrap_err();
        assert_eq!(err, CoxError::SingularInformation);
    }
}
