//! Propensity-score balancing weights: IPTW, overlap weights, symmetric and
//! asymmetric trimming (with optional re-fit of the PS model on the retained
//! sample) and truncation of the scores.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::Dataset;
use crate::logistic::{fit_logistic_rows, LogisticError, LogisticOptions, PropensityFit};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WeightError {
    #[error("invalid weighting scheme: {0}")]
    InvalidScheme(String),
    #[error("every unit was trimmed")]
    AllUnitsTrimmed,
    #[error("arm {0} is empty after trimming")]
    ArmEmptyAfterTrim(u8),
    #[error("propensity re-fit on trimmed sample failed: {0}")]
    RefitFailed(#[from] LogisticError),
    #[error("arm {0} has zero total weight")]
    ZeroTotalWeight(u8),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WeightScheme {
    Iptw,
    Overlap,
    /// Keep units with `alpha <= e <= 1 - alpha`.
    SymmetricTrim {
        alpha: f64,
    },
    /// Common-support exclusion, then arm-specific quantile cuts at `q`.
    AsymmetricTrim {
        q: f64,
    },
    /// Winsorize scores at their `q` and `1 - q` quantiles.
    Truncate {
        q: f64,
    },
}

/// Population tilting function implied by a scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Tilting {
    /// `h(x) = 1`: the combined population.
    Unit,
    /// `h(x) = e(x)(1 - e(x))`.
    Overlap,
    /// Indicator of the retained PS region.
    RetainedRegion,
}

impl WeightScheme {
    pub fn validate(&self) -> Result<(), WeightError> {
        let check = |name: &str, v: f64| {
            if (0.0..0.5).contains(&v) {
                Ok(())
            } else {
                Err(WeightError::InvalidScheme(format!("{name} must lie in [0, 0.5), got {v}")))
            }
        };
        match *self {
            Self::Iptw | Self::Overlap => Ok(()),
            Self::SymmetricTrim { alpha } => check("alpha", alpha),
            Self::AsymmetricTrim { q } | Self::Truncate { q } => check("q", q),
        }
    }

    pub fn tilting(&self) -> Tilting {
        match self {
            Self::Iptw | Self::Truncate { .. } => Tilting::Unit,
            Self::Overlap => Tilting::Overlap,
            Self::SymmetricTrim { .. } | Self::AsymmetricTrim { .. } => Tilting::RetainedRegion,
        }
    }

    pub fn is_trim(&self) -> bool {
        matches!(self, Self::SymmetricTrim { .. } | Self::AsymmetricTrim { .. })
    }

    /// IPTW, OW, symmetric trimming at 0.05/0.10/0.15, asymmetric trimming at
    /// 0/0.01/0.05 and truncation at 0.025/0.05/0.10.
    pub fn default_grid() -> Vec<Self> {
        let mut v = vec![Self::Overlap, Self::Iptw];
        v.extend([0.05, 0.10, 0.15].map(|alpha| Self::SymmetricTrim { alpha }));
        v.extend([0.0, 0.01, 0.05].map(|q| Self::AsymmetricTrim { q }));
        v.extend([0.025, 0.05, 0.10].map(|q| Self::Truncate { q }));
        v
    }
}

impl fmt::Display for WeightScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Iptw => write!(f, "iptw"),
            Self::Overlap => write!(f, "ow"),
            Self::SymmetricTrim { alpha } => write!(f, "symtrim:{alpha}"),
            Self::AsymmetricTrim { q } => write!(f, "asymtrim:{q}"),
            Self::Truncate { q } => write!(f, "truncate:{q}"),
        }
    }
}

impl FromStr for WeightScheme {
    type Err = WeightError;

    /// Parses `iptw`, `ow`, `symtrim:<alpha>`, `asymtrim:<q>` or `truncate:<q>`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim().to_ascii_lowercase();
        let (kind, param) = match s.split_once(':') {
            Some((k, v)) => {
                let v: f64 = v.parse().map_err(|_| WeightError::InvalidScheme(format!("bad parameter in `{s}`")))?;
                (k.to_string(), Some(v))
            }
            None => (s.clone(), None),
        };
        let need = |p: Option<f64>| p.ok_or_else(|| WeightError::InvalidScheme(format!("`{kind}` needs a parameter")));
        let scheme = match kind.as_str() {
            "iptw" => Self::Iptw,
            "ow" | "overlap" => Self::Overlap,
            "symtrim" => Self::SymmetricTrim { alpha: need(param)? },
            "asymtrim" => Self::AsymmetricTrim { q: need(param)? },
            "truncate" => Self::Truncate { q: need(param)? },
            _ => return Err(WeightError::InvalidScheme(format!("unknown scheme `{kind}`"))),
        };
        scheme.validate()?;
        Ok(scheme)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightOptions {
    /// Re-fit the logistic model on the retained sample after trimming.
    pub refit_after_trim: bool,
    /// Upper-tail probability for truncation; defaults to the scheme's `q`.
    pub truncation_upper_q: Option<f64>,
    pub logistic: LogisticOptions,
}

impl Default for WeightOptions {
    fn default() -> Self {
        Self { refit_after_trim: true, truncation_upper_q: None, logistic: LogisticOptions::default() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeightAssignment {
    pub scheme: WeightScheme,
    pub included: Vec<bool>,
    /// Zero exactly where `included` is false.
    pub weights: Vec<f64>,
    /// Propensity model behind the weights (the re-fit one after trimming).
    pub ps_used: PropensityFit,
    /// Scores the weights were computed from (winsorized under truncation).
    pub effective_ps: Vec<f64>,
    /// Units whose score was moved by winsorization.
    pub clamped: Vec<bool>,
}

impl WeightAssignment {
    pub fn tilting(&self) -> Tilting {
        self.scheme.tilting()
    }

    pub fn n_included(&self) -> usize {
        self.included.iter().filter(|&&b| b).count()
    }

    /// Derivative of `log w_i` with respect to the PS linear predictor of unit `i`.
    ///
    /// Units whose score was winsorized have a constant weight locally, so
    /// their slope is zero.
    pub fn log_weight_slope(&self, data: &Dataset, i: usize) -> f64 {
        if !self.included[i] || self.clamped[i] {
            return 0.0;
        }
        let e = self.effective_ps[i];
        match (self.scheme, data.is_treated(i)) {
            (WeightScheme::Overlap, true) => -e,
            (WeightScheme::Overlap, false) => 1.0 - e,
            (_, true) => -(1.0 - e),
            (_, false) => e,
        }
    }
}

/// Sample quantile with linear interpolation between order statistics
/// (the k-th of n sorted values sits at probability (k-1)/(n-1)).
pub fn quantile(sorted: &[f64], prob: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of empty sample");
    let h = (sorted.len() - 1) as f64 * prob.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

fn sorted(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(|a, b| a.partial_cmp(b).expect("scores are finite"));
    v
}

fn iptw(e: f64, treated: bool) -> f64 {
    if treated {
        1.0 / e
    } else {
        1.0 / (1.0 - e)
    }
}

fn overlap(e: f64, treated: bool) -> f64 {
    if treated {
        1.0 - e
    } else {
        e
    }
}

/// Retained set for a trimming scheme, computed from `scores`.
pub fn trim_region(scores: &[f64], treat: &[u8], scheme: WeightScheme) -> Vec<bool> {
    match scheme {
        WeightScheme::SymmetricTrim { alpha } => scores.iter().map(|&e| e >= alpha && e <= 1.0 - alpha).collect(),
        WeightScheme::AsymmetricTrim { q } => {
            let arm = |a: u8| sorted(scores.iter().zip(treat).filter(|(_, &t)| t == a).map(|(&e, _)| e).collect());
            let (t, c) = (arm(1), arm(0));
            if t.is_empty() || c.is_empty() {
                return vec![false; scores.len()];
            }
            let lo = t[0].max(c[0]);
            let hi = t[t.len() - 1].min(c[c.len() - 1]);
            let q_lo = quantile(&t, q);
            let q_hi = quantile(&c, 1.0 - q);
            scores.iter().map(|&e| e >= lo && e <= hi && e >= q_lo && e <= q_hi).collect()
        }
        _ => vec![true; scores.len()],
    }
}

pub fn compute_weights(
    data: &Dataset,
    fit: &PropensityFit,
    scheme: WeightScheme,
    opts: &WeightOptions,
) -> Result<WeightAssignment, WeightError> {
    scheme.validate()?;
    let n = data.n();
    let treated: Vec<bool> = (0..n).map(|i| data.is_treated(i)).collect();
    let all = vec![true; n];
    let no_clamp = vec![false; n];

    match scheme {
        WeightScheme::Iptw | WeightScheme::Overlap => {
            let f = if scheme == WeightScheme::Iptw { iptw } else { overlap };
            let weights = (0..n).map(|i| f(fit.scores[i], treated[i])).collect();
            Ok(WeightAssignment {
                scheme,
                included: all,
                weights,
                ps_used: fit.clone(),
                effective_ps: fit.scores.clone(),
                clamped: no_clamp,
            })
        }
        WeightScheme::Truncate { q } => {
            let s = sorted(fit.scores.clone());
            let lo = quantile(&s, q);
            let hi = quantile(&s, 1.0 - opts.truncation_upper_q.unwrap_or(q));
            let effective: Vec<f64> = fit.scores.iter().map(|&e| e.clamp(lo, hi)).collect();
            let clamped = fit.scores.iter().map(|&e| e < lo || e > hi).collect();
            let weights = (0..n).map(|i| iptw(effective[i], treated[i])).collect();
            Ok(WeightAssignment {
                scheme,
                included: all,
                weights,
                ps_used: fit.clone(),
                effective_ps: effective,
                clamped,
            })
        }
        WeightScheme::SymmetricTrim { .. } | WeightScheme::AsymmetricTrim { .. } => {
            let included = trim_region(&fit.scores, data.treat(), scheme);
            if !included.iter().any(|&b| b) {
                return Err(WeightError::AllUnitsTrimmed);
            }
            for arm in [0u8, 1] {
                if !(0..n).any(|i| included[i] && data.treat()[i] == arm) {
                    return Err(WeightError::ArmEmptyAfterTrim(arm));
                }
            }
            let ps_used =
                if opts.refit_after_trim { fit_logistic_rows(data, &included, &opts.logistic)? } else { fit.clone() };
            let weights = (0..n).map(|i| if included[i] { iptw(ps_used.scores[i], treated[i]) } else { 0.0 }).collect();
            Ok(WeightAssignment {
                scheme,
                included,
                weights,
                effective_ps: ps_used.scores.clone(),
                ps_used,
                clamped: no_clamp,
            })
        }
    }
}

/// Arm-wise weighted covariate means and standardized differences.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BalanceTable {
    pub covariates: Vec<String>,
    pub treated_mean: Vec<f64>,
    pub control_mean: Vec<f64>,
    /// `(treated - control) / sqrt((s1^2 + s0^2) / 2)` with unweighted arm variances.
    pub std_diff: Vec<f64>,
}

pub fn weighted_covariate_means(data: &Dataset, w: &WeightAssignment) -> Result<BalanceTable, WeightError> {
    balance_from_weights(data, &w.weights)
}

pub fn balance_from_weights(data: &Dataset, weights: &[f64]) -> Result<BalanceTable, WeightError> {
    let p = data.p();
    let mut sums = [vec![0.0; p], vec![0.0; p]];
    let mut tot = [0.0; 2];
    let mut raw = [vec![0.0; p], vec![0.0; p]];
    let mut raw_sq = [vec![0.0; p], vec![0.0; p]];
    let mut cnt = [0.0; 2];
    for (i, &w) in weights.iter().enumerate().take(data.n()) {
        if w <= 0.0 {
            continue;
        }
        let a = data.treat()[i] as usize;
        tot[a] += w;
        cnt[a] += 1.0;
        for (j, &x) in data.row(i).iter().enumerate() {
            sums[a][j] += w * x;
            raw[a][j] += x;
            raw_sq[a][j] += x * x;
        }
    }
    for arm in [0u8, 1] {
        if tot[arm as usize] <= 0.0 {
            return Err(WeightError::ZeroTotalWeight(arm));
        }
    }
    let mean = |a: usize| sums[a].iter().map(|s| s / tot[a]).collect::<Vec<_>>();
    let (m1, m0) = (mean(1), mean(0));
    let var = |a: usize, j: usize| {
        if cnt[a] < 2.0 {
            return 0.0;
        }
        let mu = raw[a][j] / cnt[a];
        ((raw_sq[a][j] - cnt[a] * mu * mu) / (cnt[a] - 1.0)).max(0.0)
    };
    let std_diff = (0..p)
        .map(|j| {
            let d = m1[j] - m0[j];
            let s = ((var(1, j) + var(0, j)) / 2.0).sqrt();
            if s > 0.0 {
                d / s
            } else if d == 0.0 {
                0.0
            } else {
                d.signum() * f64::INFINITY
            }
        })
        .collect();
    Ok(BalanceTable { covariates: data.covariate_names().to_vec(), treated_mean: m1, control_mean: m0, std_diff })
}

/// Per-arm histogram counts of scores on equal-width bins over [0, 1].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PsHistogram {
    pub edges: Vec<f64>,
    pub treated: Vec<u64>,
    pub control: Vec<u64>,
}

pub fn ps_histogram(scores: &[f64], treat: &[u8], bins: usize) -> PsHistogram {
    let mut h = PsHistogram {
        edges: (0..=bins).map(|k| k as f64 / bins as f64).collect(),
        treated: vec![0; bins],
        control: vec![0; bins],
    };
    for (&e, &a) in scores.iter().zip(treat) {
        let b = ((e * bins as f64) as usize).min(bins - 1);
        if a == 1 {
            h.treated[b] += 1;
        } else {
            h.control[b] += 1;
        }
    }
    h
}
