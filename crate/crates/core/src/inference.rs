//! Closed-form and bootstrap uncertainty for the restricted mean estimates.
//!
//! The closed-form variance is a sum of squared per-unit influence
//! contributions, linearizing the estimator in
//!
//! * each unit's counting-process increments in the weighted Nelson–Aalen
//!   sums (martingale part),
//! * the logistic coefficients, through `d log w / d eta`, projected on the
//!   logistic scores,
//! * the Breslow increments of the censoring baseline, which enter every
//!   `1 / K_C(u-, X)`.
//!
//! The censoring coefficients contribute nothing at first order and are not
//! corrected for. Contributions are scaled so that `var = sum_i c_i^2`.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::censoring::CensoringFit;
use crate::censoring::CoxModel;
use crate::data::Dataset;
use crate::estimator::{ArmRiskTable, HazardSums};
use crate::logistic::information;
use crate::pipeline::{NuisanceFit, PipelineOptions, SchemeFit};
use crate::weighting::{quantile, WeightAssignment, WeightScheme};
use crate::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum InferenceError {
    #[error("variance is not finite")]
    DegenerateVariance,
    #[error("bootstrap needs at least 2 replicates, got {0}")]
    InvalidB(usize),
    #[error("{dropped} of {total} bootstrap replicates failed")]
    TooManyFailedReplicates { dropped: usize, total: usize },
    #[error("logistic information matrix is singular")]
    SingularInformation,
}

/// Per-unit contributions to the variance of the difference.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InfluenceContributions {
    /// Martingale terms of the weighted hazards plus the logistic-score correction.
    pub psi_beta: Vec<f64>,
    /// Breslow baseline correction of the censoring model.
    pub psi_theta: Vec<f64>,
    pub total: Vec<f64>,
}

impl InfluenceContributions {
    pub fn variance(&self) -> f64 {
        self.total.iter().map(|c| c * c).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClosedFormVariance {
    pub l: f64,
    pub var_mu1: f64,
    pub var_mu0: f64,
    pub var_delta: f64,
    pub delta: InfluenceContributions,
    /// Trimmed schemes: inference is conditional on the realized retained sample.
    pub conditional_on_trim: bool,
}

struct ArmInfluence {
    /// Indexed by dataset row, zero outside the arm.
    mart: Vec<f64>,
    theta: Vec<f64>,
    /// Derivative of the arm's restricted mean in the logistic coefficients.
    h: Vec<f64>,
}

fn arm_influence(
    data: &Dataset,
    table: &ArmRiskTable,
    model: &CoxModel,
    sums: &HazardSums,
    w: &WeightAssignment,
    l: f64,
) -> ArmInfluence {
    let n = data.n();
    let p = data.p();
    let times = &table.event_times;
    let m = times.partition_point(|&u| u <= l);

    // r_k = int_{u_k}^L S(t) dt
    let mut before = vec![0.0; m];
    let mut area = 0.0;
    let mut prev = 0.0;
    let mut cum = 0.0f64;
    for k in 0..m {
        area += (-cum).exp() * (times[k] - prev);
        before[k] = area;
        cum += sums.increment[k];
        prev = times[k];
    }
    area += (-cum).exp() * (l - prev);
    let r: Vec<f64> = before.iter().map(|a| area - a).collect();

    let mut mart = vec![0.0; n];
    let mut theta = vec![0.0; n];
    let mut h = vec![0.0; p + 1];
    let mut g = vec![0.0; m];
    let mut buf = Vec::new();
    for (j, &i) in table.units.iter().enumerate() {
        let wi = w.weights[i];
        if wi <= 0.0 {
            continue;
        }
        let row = table.row(j, &mut buf);
        let own = table.own_event[j];
        let rj = table.risk[j];
        let mut c = 0.0;
        for k in 0..table.reach[j].min(m) {
            if sums.numer[k] <= 0.0 {
                continue;
            }
            let dn = if own == Some(k) { 1.0 } else { 0.0 };
            let t = wi * row[k] * (dn - sums.increment[k]) / sums.denom[k];
            c -= r[k] * t;
            g[k] += rj * t;
        }
        mart[i] = c;
        let slope = w.log_weight_slope(data, i);
        if slope != 0.0 {
            h[0] += slope * c;
            for (hq, xq) in h[1..].iter_mut().zip(data.row(i)) {
                *hq += slope * xq * c;
            }
        }
    }

    // Q(s) = sum_{s < u_k <= L} r_k g_k at each censoring baseline knot
    let knots = model.baseline.knots();
    if !knots.is_empty() {
        let mut suffix = vec![0.0; m + 1];
        for k in (0..m).rev() {
            suffix[k] = suffix[k + 1] + r[k] * g[k];
        }
        let jumps = model.baseline.increments();
        let q: Vec<f64> = knots.iter().map(|&s| suffix[times[..m].partition_point(|&u| u <= s)]).collect();
        let mut acc = 0.0;
        let cum_q: Vec<f64> = (0..knots.len())
            .map(|l| {
                acc += q[l] * jumps[l] / model.risk_totals[l];
                acc
            })
            .collect();
        for (j, &i) in table.units.iter().enumerate() {
            let u = data.time()[i];
            let pos = knots.partition_point(|&s| s <= u);
            let mut c = if pos > 0 { table.risk[j] * cum_q[pos - 1] } else { 0.0 };
            if !data.event()[i] && pos > 0 && knots[pos - 1] == u {
                c -= q[pos - 1] / model.risk_totals[pos - 1];
            }
            theta[i] = c;
        }
    }
    ArmInfluence { mart, theta, h }
}

pub(crate) fn closed_form_from_parts(
    data: &Dataset,
    nuis: &NuisanceFit,
    fit: &SchemeFit,
    l: f64,
) -> Result<ClosedFormVariance, InferenceError> {
    let w = &fit.assignment;
    let arm = |a: u8| arm_influence(data, nuis.table(a), &nuis.censoring.arm(a).model, &fit.sums[a as usize], w, l);
    let (a0, a1) = (arm(0), arm(1));

    let ps = &w.ps_used;
    let info = information(data, &ps.fit_rows, &ps.scores);
    let chol = info.cholesky().ok_or(InferenceError::SingularInformation)?;
    let v1 = chol.solve(&DVector::from_column_slice(&a1.h));
    let v0 = chol.solve(&DVector::from_column_slice(&a0.h));

    let n = data.n();
    let mut beta1 = vec![0.0; n];
    let mut beta0 = vec![0.0; n];
    for i in (0..n).filter(|&i| ps.fit_rows[i]) {
        let resid = f64::from(data.treat()[i]) - ps.scores[i];
        let x = data.row(i);
        let proj = |v: &DVector<f64>| v[0] + v.iter().skip(1).zip(x).map(|(a, b)| a * b).sum::<f64>();
        beta1[i] = resid * proj(&v1);
        beta0[i] = resid * proj(&v0);
    }

    let mu1: Vec<f64> = (0..n).map(|i| a1.mart[i] + a1.theta[i] + beta1[i]).collect();
    let mu0: Vec<f64> = (0..n).map(|i| a0.mart[i] + a0.theta[i] + beta0[i]).collect();
    let psi_beta: Vec<f64> = (0..n).map(|i| a1.mart[i] - a0.mart[i] + beta1[i] - beta0[i]).collect();
    let psi_theta: Vec<f64> = (0..n).map(|i| a1.theta[i] - a0.theta[i]).collect();
    let total: Vec<f64> = psi_beta.iter().zip(&psi_theta).map(|(a, b)| a + b).collect();
    let sq = |v: &[f64]| v.iter().map(|c| c * c).sum::<f64>();

    let out = ClosedFormVariance {
        l,
        var_mu1: sq(&mu1),
        var_mu0: sq(&mu0),
        var_delta: sq(&total),
        delta: InfluenceContributions { psi_beta, psi_theta, total },
        conditional_on_trim: w.scheme.is_trim(),
    };
    if ![out.var_mu1, out.var_mu0, out.var_delta].iter().all(|v| v.is_finite()) {
        return Err(InferenceError::DegenerateVariance);
    }
    Ok(out)
}

/// Closed-form variance of the estimates at `l` for an existing weight assignment.
pub fn closed_form_variance(
    data: &Dataset,
    w: &WeightAssignment,
    cfit: &CensoringFit,
    l: f64,
) -> Result<ClosedFormVariance, Error> {
    if data.n() < 50 {
        log::warn!("closed-form variance with n = {} may be unstable", data.n());
    }
    let nuis = NuisanceFit::from_parts(data, w.ps_used.clone(), cfit.clone(), l);
    let fit = SchemeFit::from_assignment(data, &nuis, w.clone())?;
    fit.closed_form(data, &nuis, l)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BootstrapInterval {
    pub l: f64,
    pub mu1: (f64, f64),
    pub mu0: (f64, f64),
    pub delta: (f64, f64),
    /// Standard deviation of the replicate estimates.
    pub se_mu1: f64,
    pub se_mu0: f64,
    pub se_delta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapResult {
    pub scheme: WeightScheme,
    pub replicates: usize,
    pub dropped: usize,
    pub intervals: Vec<BootstrapInterval>,
}

/// Largest tolerated fraction of failed replicates.
pub const MAX_DROPPED_FRACTION: f64 = 0.10;

/// Replicate `r` of a bootstrap keyed by `seed` draws from its own stream.
pub fn replicate_rng(seed: u64, r: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(r as u64);
    rng
}

fn resample(data: &Dataset, rng: &mut ChaCha8Rng) -> Result<Dataset, Error> {
    let n = data.n();
    let idx: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
    Ok(data.subset(&idx)?)
}

/// `[scheme][L] -> (mu1, mu0, delta)`; `None` where the scheme failed.
type ReplicateDraw = Vec<Option<Vec<(f64, f64, f64)>>>;

fn one_replicate(
    data: &Dataset,
    schemes: &[WeightScheme],
    ls: &[f64],
    seed: u64,
    r: usize,
    opts: &PipelineOptions,
) -> ReplicateDraw {
    let attempt = || -> Result<ReplicateDraw, Error> {
        let boot = resample(data, &mut replicate_rng(seed, r))?;
        let horizon = ls.iter().cloned().fold(0.0, f64::max);
        let nuis = NuisanceFit::fit(&boot, horizon, opts)?;
        Ok(schemes
            .iter()
            .map(|&s| {
                let fit = SchemeFit::fit(&boot, &nuis, s, opts).ok()?;
                ls.iter().map(|&l| fit.point(l).ok().map(|e| (e.mu1.value, e.mu0.value, e.delta.value))).collect()
            })
            .collect())
    };
    attempt().unwrap_or_else(|_| vec![None; schemes.len()])
}

fn sd(v: &[f64]) -> f64 {
    let m = v.iter().sum::<f64>() / v.len() as f64;
    (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1).max(1) as f64).sqrt()
}

fn percentile_interval(mut v: Vec<f64>) -> (f64, f64) {
    v.sort_by(|a, b| a.partial_cmp(b).expect("finite estimates"));
    (quantile(&v, 0.025), quantile(&v, 0.975))
}

/// Percentile bootstrap for several schemes sharing the same resamples.
///
/// Each scheme's result is independent: one scheme failing too often does not
/// invalidate the others.
pub fn bootstrap_schemes(
    data: &Dataset,
    schemes: &[WeightScheme],
    b: usize,
    ls: &[f64],
    seed: u64,
    opts: &PipelineOptions,
) -> Result<Vec<Result<BootstrapResult, InferenceError>>, InferenceError> {
    if b < 2 {
        return Err(InferenceError::InvalidB(b));
    }
    let draws: Vec<ReplicateDraw> =
        (0..b).into_par_iter().map(|r| one_replicate(data, schemes, ls, seed, r, opts)).collect();

    Ok(schemes
        .iter()
        .enumerate()
        .map(|(s, &scheme)| {
            let ok: Vec<&Vec<(f64, f64, f64)>> = draws.iter().filter_map(|d| d[s].as_ref()).collect();
            let dropped = b - ok.len();
            if dropped as f64 > MAX_DROPPED_FRACTION * b as f64 || ok.len() < 2 {
                return Err(InferenceError::TooManyFailedReplicates { dropped, total: b });
            }
            if dropped > 0 {
                log::warn!("{scheme}: dropped {dropped} of {b} bootstrap replicates");
            }
            let intervals = ls
                .iter()
                .enumerate()
                .map(|(k, &l)| {
                    let col = |f: fn(&(f64, f64, f64)) -> f64| ok.iter().map(|d| f(&d[k])).collect::<Vec<f64>>();
                    let (m1, m0, dl) = (col(|t| t.0), col(|t| t.1), col(|t| t.2));
                    BootstrapInterval {
                        l,
                        se_mu1: sd(&m1),
                        se_mu0: sd(&m0),
                        se_delta: sd(&dl),
                        mu1: percentile_interval(m1),
                        mu0: percentile_interval(m0),
                        delta: percentile_interval(dl),
                    }
                })
                .collect();
            Ok(BootstrapResult { scheme, replicates: b, dropped, intervals })
        })
        .collect())
}

pub fn bootstrap_ci(
    data: &Dataset,
    scheme: WeightScheme,
    b: usize,
    ls: &[f64],
    seed: u64,
    opts: &PipelineOptions,
) -> Result<BootstrapResult, InferenceError> {
    bootstrap_schemes(data, &[scheme], b, ls, seed, opts)?.pop().expect("one scheme")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn percentile_of_constant_sample_has_zero_width() {
        assert_eq!(percentile_interval(vec![1.5; 10]), (1.5, 1.5));
    }

    #[test]
    fn rejects_single_replicate() {
        let d = Dataset::new(vec![0.0; 4], 1, vec![0, 1, 0, 1], vec![1.0; 4], vec![true; 4]).unwrap();
        let e = bootstrap_ci(&d, WeightScheme::Overlap, 1, &[1.0], 1, &PipelineOptions::default());
        assert_eq!(e.unwrap_err(), InferenceError::InvalidB(1));
    }

    #[test]
    fn replicate_streams_differ() {
        let a: u64 = replicate_rng(7, 0).random();
        let b: u64 = replicate_rng(7, 1).random();
        let c: u64 = replicate_rng(7, 0).random();
        assert_ne!(a, b);
        assert_eq!(a, c);
    }
}
