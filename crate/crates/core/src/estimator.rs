//! IPCW-weighted Nelson–Aalen cumulative hazards and restricted mean
//! counterfactual survival times.
//!
//! Within arm `a` the hazard jumps at each distinct event time `u` by
//!
//! ```text
//!   sum_i I(A_i=a) w_i / K_C(u-, X_i) dN_i(u)  /  sum_i I(A_i=a) w_i / K_C(u-, X_i) Y_i(u)
//! ```
//!
//! with `Y_i(u) = I(U_i >= u)`. The censoring score is evaluated just before
//! `u` so a unit's own censoring jump at `u` never enters its weight. The
//! restricted mean is the exact area under `exp(-Lambda)` on `[0, L]`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::censoring::CensoringFit;
use crate::data::{Dataset, Side, StepFunction};
use crate::weighting::{WeightAssignment, WeightScheme};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EstimateError {
    #[error("event at time {0} with zero weighted risk mass")]
    EmptyRiskSet(f64),
    #[error("arm {0} has no unit with positive weight")]
    ZeroWeightArm(u8),
    #[error("restriction time must be positive, got {0}")]
    NonpositiveL(f64),
}

/// Above this many (unit, event time) pairs the inverse censoring weights are
/// recomputed on every pass instead of being cached.
const CACHE_LIMIT: usize = 20_000_000;

/// Risk-set bookkeeping for one arm: units sorted by follow-up time, the
/// arm's distinct event times and `1 / K_C(u_k-, X_j)` for every unit at risk.
///
/// The table depends only on the data and the censoring fit, so it is shared
/// by every weighting scheme applied to the same dataset.
#[derive(Debug, Clone)]
pub struct ArmRiskTable {
    pub(crate) arm: u8,
    /// Dataset indices of the arm's units, ascending in time.
    pub(crate) units: Vec<usize>,
    pub(crate) event_times: Vec<f64>,
    /// Number of event times `<= U_j` for each sorted unit.
    pub(crate) reach: Vec<usize>,
    /// Event-time index of the unit's own event, if it has one within the table.
    pub(crate) own_event: Vec<Option<usize>>,
    /// Censoring risk score `exp(theta' x_j)`.
    pub(crate) risk: Vec<f64>,
    /// Censoring baseline evaluated just before each event time.
    pub(crate) base_left: Vec<f64>,
    offsets: Vec<usize>,
    cache: Option<Vec<f64>>,
}

impl ArmRiskTable {
    /// Event times beyond `horizon` are left out.
    pub fn build(data: &Dataset, cfit: &CensoringFit, arm: u8, horizon: f64) -> Self {
        let mut units: Vec<usize> = (0..data.n()).filter(|&i| data.treat()[i] == arm).collect();
        units.sort_by(|&a, &b| data.time()[a].partial_cmp(&data.time()[b]).expect("finite times"));
        let mut event_times: Vec<f64> =
            units.iter().filter(|&&i| data.event()[i] && data.time()[i] <= horizon).map(|&i| data.time()[i]).collect();
        event_times.dedup();

        let model = &cfit.arm(arm).model;
        let reach: Vec<usize> = units.iter().map(|&i| event_times.partition_point(|&u| u <= data.time()[i])).collect();
        let own_event = units
            .iter()
            .zip(&reach)
            .map(|(&i, &r)| {
                let hit = data.event()[i] && r > 0 && event_times[r - 1] == data.time()[i];
                hit.then(|| r - 1)
            })
            .collect();
        let risk: Vec<f64> = units.iter().map(|&i| model.risk_score(data.row(i))).collect();
        let base_left: Vec<f64> = event_times.iter().map(|&u| model.baseline.eval(u, Side::Left)).collect();

        let mut offsets = Vec::with_capacity(units.len() + 1);
        offsets.push(0);
        for &r in &reach {
            offsets.push(offsets.last().unwrap() + r);
        }
        let mut table = Self { arm, units, event_times, reach, own_event, risk, base_left, offsets, cache: None };
        let total = *table.offsets.last().unwrap();
        if total <= CACHE_LIMIT {
            let mut cache = vec![0.0; total];
            for j in 0..table.units.len() {
                let (a, b) = (table.offsets[j], table.offsets[j + 1]);
                table.fill_row(j, &mut cache[a..b]);
            }
            table.cache = Some(cache);
        }
        table
    }

    fn fill_row(&self, j: usize, out: &mut [f64]) {
        let r = self.risk[j];
        let mut last = (f64::NAN, 1.0);
        for (k, v) in out.iter_mut().enumerate() {
            let b = self.base_left[k];
            if b != last.0 {
                last = (b, (b * r).exp());
            }
            *v = last.1;
        }
    }

    /// `1 / K_C(u_k-, X_j)` for `k < reach[j]`.
    pub(crate) fn row<'a>(&'a self, j: usize, buf: &'a mut Vec<f64>) -> &'a [f64] {
        let (a, b) = (self.offsets[j], self.offsets[j + 1]);
        match &self.cache {
            Some(c) => &c[a..b],
            None => {
                buf.resize(b - a, 0.0);
                self.fill_row(j, buf);
                &buf[..]
            }
        }
    }

    pub fn arm(&self) -> u8 {
        self.arm
    }

    pub fn event_times(&self) -> &[f64] {
        &self.event_times
    }
}

/// Per-event-time sums of one weighted hazard fit.
#[derive(Debug, Clone)]
pub(crate) struct HazardSums {
    /// Weighted event mass at each table event time.
    pub numer: Vec<f64>,
    /// Weighted risk mass at each table event time.
    pub denom: Vec<f64>,
    pub increment: Vec<f64>,
}

pub(crate) fn hazard_sums(table: &ArmRiskTable, weights: &[f64]) -> Result<HazardSums, EstimateError> {
    let m = table.event_times.len();
    let mut numer = vec![0.0; m];
    let mut denom = vec![0.0; m];
    let mut buf = Vec::new();
    let mut any = false;
    for (j, &i) in table.units.iter().enumerate() {
        let w = weights[i];
        if w <= 0.0 {
            continue;
        }
        any = true;
        let row = table.row(j, &mut buf);
        for (d, &v) in denom.iter_mut().zip(row) {
            *d += w * v;
        }
        if let Some(k) = table.own_event[j] {
            numer[k] += w * row[k];
        }
    }
    if !any {
        return Err(EstimateError::ZeroWeightArm(table.arm));
    }
    let mut increment = vec![0.0; m];
    for k in 0..m {
        if numer[k] > 0.0 {
            if !(denom[k].is_finite() && denom[k] > 0.0) {
                return Err(EstimateError::EmptyRiskSet(table.event_times[k]));
            }
            increment[k] = numer[k] / denom[k];
        }
    }
    Ok(HazardSums { numer, denom, increment })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HazardJump {
    pub time: f64,
    pub numerator: f64,
    pub denominator: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedCumulativeHazard {
    pub arm: u8,
    pub hazard: StepFunction,
    pub jumps: Vec<HazardJump>,
    /// Largest follow-up time among positively weighted units of the arm.
    pub last_followup: f64,
}

impl WeightedCumulativeHazard {
    pub(crate) fn from_sums(table: &ArmRiskTable, sums: &HazardSums, data: &Dataset, weights: &[f64]) -> Self {
        let mut jumps = Vec::new();
        let mut knots = Vec::new();
        let mut values = Vec::new();
        let mut acc = 0.0;
        for k in 0..table.event_times.len() {
            if sums.numer[k] > 0.0 {
                acc += sums.increment[k];
                knots.push(table.event_times[k]);
                values.push(acc);
                jumps.push(HazardJump {
                    time: table.event_times[k],
                    numerator: sums.numer[k],
                    denominator: sums.denom[k],
                });
            }
        }
        let last_followup =
            table.units.iter().filter(|&&i| weights[i] > 0.0).map(|&i| data.time()[i]).fold(0.0, f64::max);
        Self { arm: table.arm, hazard: StepFunction::new(knots, values, 0.0), jumps, last_followup }
    }

    pub fn survival(&self, t: f64) -> f64 {
        (-self.hazard.eval(t, Side::Right)).exp()
    }
}

/// Weighted Nelson–Aalen hazard of arm `a` under the weights in `w`.
pub fn weighted_nelson_aalen(
    data: &Dataset,
    w: &WeightAssignment,
    cfit: &CensoringFit,
    a: u8,
) -> Result<WeightedCumulativeHazard, EstimateError> {
    let table = ArmRiskTable::build(data, cfit, a, f64::INFINITY);
    weighted_nelson_aalen_raw(&table, data, &w.weights)
}

/// Same as [`weighted_nelson_aalen`] for an arbitrary weight vector over all units.
pub fn weighted_nelson_aalen_raw(
    table: &ArmRiskTable,
    data: &Dataset,
    weights: &[f64],
) -> Result<WeightedCumulativeHazard, EstimateError> {
    let sums = hazard_sums(table, weights)?;
    Ok(WeightedCumulativeHazard::from_sums(table, &sums, data, weights))
}

/// `int_0^L exp(-Lambda(t)) dt` for a step hazard given by its jumps.
pub fn restricted_mean(haz: &WeightedCumulativeHazard, l: f64) -> f64 {
    let mut area = 0.0;
    let mut prev = 0.0;
    let mut surv = (-haz.hazard.value_before_first_knot()).exp();
    for (&t, &cum) in haz.hazard.knots().iter().zip(haz.hazard.values()) {
        if t >= l {
            break;
        }
        area += surv * (t - prev);
        surv = (-cum).exp();
        prev = t;
    }
    area + surv * (l - prev)
}

/// Point estimate for one restriction time; uncertainty is filled in later.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub se: Option<f64>,
    pub ci: Option<(f64, f64)>,
}

impl Estimate {
    pub fn point(value: f64) -> Self {
        Self { value, se: None, ci: None }
    }

    pub fn covers(&self, truth: f64) -> Option<bool> {
        self.ci.map(|(lo, hi)| lo <= truth && truth <= hi)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RmcstResult {
    pub l: f64,
    pub scheme: Option<WeightScheme>,
    pub mu1: Estimate,
    pub mu0: Estimate,
    pub delta: Estimate,
    /// `L` lies beyond the last follow-up among weighted units of arm 0 / arm 1.
    pub beyond_followup: [bool; 2],
    pub n_included: usize,
}

pub fn rmcst_estimate(
    haz1: &WeightedCumulativeHazard,
    haz0: &WeightedCumulativeHazard,
    l: f64,
) -> Result<RmcstResult, EstimateError> {
    if l.is_nan() || l <= 0.0 {
        return Err(EstimateError::NonpositiveL(l));
    }
    let mu1 = restricted_mean(haz1, l);
    let mu0 = restricted_mean(haz0, l);
    Ok(RmcstResult {
        l,
        scheme: None,
        mu1: Estimate::point(mu1),
        mu0: Estimate::point(mu0),
        delta: Estimate::point(mu1 - mu0),
        beyond_followup: [l > haz0.last_followup, l > haz1.last_followup],
        n_included: 0,
    })
}

pub fn counterfactual_survival_curve(haz: &WeightedCumulativeHazard, grid: &[f64]) -> Vec<f64> {
    grid.iter().map(|&t| haz.survival(t)).collect()
}

/// `(time, survival)` rows at each jump of the hazard, starting from `(0, 1)`.
pub fn survival_table(haz: &WeightedCumulativeHazard) -> Vec<(f64, f64)> {
    let mut rows = vec![(0.0, 1.0)];
    rows.extend(haz.hazard.knots().iter().zip(haz.hazard.values()).map(|(&t, &v)| (t, (-v).exp())));
    rows
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single_arm(times: &[f64], events: &[bool]) -> Dataset {
        // one control unit far in the future so both arms exist
        let mut t = times.to_vec();
        t.push(100.0);
        let mut e = events.to_vec();
        e.push(false);
        let n = t.len();
        let mut a = vec![1u8; n - 1];
        a.push(0);
        Dataset::new(vec![0.0; n], 1, a, t, e).unwrap()
    }

    #[test]
    fn one_unit_jumps_to_one() {
        let d = single_arm(&[1.0], &[true]);
        let table = ArmRiskTable::build(&d, &CensoringFit::none(1), 1, f64::INFINITY);
        let h = weighted_nelson_aalen_raw(&table, &d, &[1.0, 1.0]).unwrap();
        assert_eq!(h.hazard.eval(0.999, Side::Right), 0.0);
        assert_eq!(h.hazard.eval(1.0, Side::Right), 1.0);
        assert_eq!(h.hazard.eval(5.0, Side::Right), 1.0);
    }

    #[test]
    fn restricted_mean_examples() {
        let flat = WeightedCumulativeHazard { arm: 1, hazard: StepFunction::zero(), jumps: vec![], last_followup: 3.0 };
        assert_eq!(restricted_mean(&flat, 2.0), 2.0);
        let one = WeightedCumulativeHazard {
            arm: 1,
            hazard: StepFunction::new(vec![1.0], vec![1.0], 0.0),
            jumps: vec![],
            last_followup: 3.0,
        };
        assert!((restricted_mean(&one, 2.0) - (1.0 + (-1.0f64).exp())).abs() < 1e-15);
        assert!((restricted_mean(&one, 2.0) - 1.3679).abs() < 1e-4);
        assert_eq!(restricted_mean(&one, 1.0), 1.0);
        assert_eq!(restricted_mean(&one, 0.5), 0.5);
    }

    #[test]
    fn nonpositive_l_is_rejected() {
        let flat = WeightedCumulativeHazard { arm: 1, hazard: StepFunction::zero(), jumps: vec![], last_followup: 3.0 };
        assert_eq!(rmcst_estimate(&flat, &flat, 0.0).unwrap_err(), EstimateError::NonpositiveL(0.0));
    }

    #[test]
    fn followup_flag() {
        let flat = WeightedCumulativeHazard { arm: 1, hazard: StepFunction::zero(), jumps: vec![], last_followup: 3.0 };
        let r = rmcst_estimate(&flat, &flat, 5.0).unwrap();
        assert_eq!(r.beyond_followup, [true, true]);
        assert_eq!(r.mu1.value, 5.0);
    }

    #[test]
    fn survival_curve_across_a_jump() {
        let h = WeightedCumulativeHazard {
            arm: 0,
            hazard: StepFunction::new(vec![1.0, 2.0], vec![0.25, 0.75], 0.0),
            jumps: vec![],
            last_followup: 3.0,
        };
        let s = counterfactual_survival_curve(&h, &[0.0, 1.5, 2.0, 2.5]);
        assert_eq!(s[0], 1.0);
        assert!((s[2] / s[1] - (-0.5f64).exp()).abs() < 1e-15);
        assert!(s.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn ties_aggregate_into_one_jump() {
        let d = single_arm(&[1.0, 1.0, 2.0, 3.0], &[true, true, false, true]);
        let table = ArmRiskTable::build(&d, &CensoringFit::none(1), 1, f64::INFINITY);
        let h = weighted_nelson_aalen_raw(&table, &d, &[1.0; 5]).unwrap();
        assert_eq!(h.hazard.knots(), &[1.0, 3.0]);
        assert!((h.hazard.values()[0] - 0.5).abs() < 1e-15);
        assert!((h.hazard.values()[1] - 1.5).abs() < 1e-15);
    }

    #[test]
    fn zero_weight_arm() {
        let d = single_arm(&[1.0, 2.0], &[true, true]);
        let table = ArmRiskTable::build(&d, &CensoringFit::none(1), 1, f64::INFINITY);
        assert_eq!(
            weighted_nelson_aalen_raw(&table, &d, &[0.0, 0.0, 1.0]).unwrap_err(),
            EstimateError::ZeroWeightArm(1)
        );
    }
}
