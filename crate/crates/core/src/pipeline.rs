//! End-to-end estimation: propensity fit, censoring fit, then one weighted
//! hazard pair per weighting scheme.

use crate::censoring::{fit_censoring_cox_with, CensoringFit, CoxOptions};
use crate::data::Dataset;
use crate::estimator::{hazard_sums, ArmRiskTable, Estimate, HazardSums, RmcstResult, WeightedCumulativeHazard};
use crate::estimator::{rmcst_estimate, EstimateError};
use crate::inference::{closed_form_from_parts, ClosedFormVariance};
use crate::logistic::{fit_logistic_rows, PropensityFit};
use crate::weighting::{compute_weights, WeightAssignment, WeightOptions, WeightScheme};
use crate::Error;

/// Normal quantile used for Wald intervals.
pub const Z_975: f64 = 1.959_963_984_540_054;

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PipelineOptions {
    pub weights: WeightOptions,
    pub cox: CoxOptions,
}

/// Everything that does not depend on the weighting scheme.
#[derive(Debug, Clone)]
pub struct NuisanceFit {
    pub ps: PropensityFit,
    pub censoring: CensoringFit,
    pub(crate) tables: [ArmRiskTable; 2],
    horizon: f64,
}

impl NuisanceFit {
    /// `horizon` bounds the event times that later estimates may need (the largest `L`).
    pub fn fit(data: &Dataset, horizon: f64, opts: &PipelineOptions) -> Result<Self, Error> {
        let ps = fit_logistic_rows(data, &vec![true; data.n()], &opts.weights.logistic)?;
        let censoring = fit_censoring_cox_with(data, &opts.cox)?;
        Ok(Self::from_parts(data, ps, censoring, horizon))
    }

    pub fn from_parts(data: &Dataset, ps: PropensityFit, censoring: CensoringFit, horizon: f64) -> Self {
        let tables =
            [ArmRiskTable::build(data, &censoring, 0, horizon), ArmRiskTable::build(data, &censoring, 1, horizon)];
        Self { ps, censoring, tables, horizon }
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn table(&self, arm: u8) -> &ArmRiskTable {
        &self.tables[arm as usize]
    }
}

/// Weighted hazards of both arms under one scheme.
#[derive(Debug, Clone)]
pub struct SchemeFit {
    pub assignment: WeightAssignment,
    /// Indexed by arm.
    pub hazards: [WeightedCumulativeHazard; 2],
    pub(crate) sums: [HazardSums; 2],
}

impl SchemeFit {
    pub fn fit(
        data: &Dataset,
        nuis: &NuisanceFit,
        scheme: WeightScheme,
        opts: &PipelineOptions,
    ) -> Result<Self, Error> {
        let assignment = compute_weights(data, &nuis.ps, scheme, &opts.weights)?;
        Self::from_assignment(data, nuis, assignment)
    }

    pub fn from_assignment(data: &Dataset, nuis: &NuisanceFit, assignment: WeightAssignment) -> Result<Self, Error> {
        let arm = |a: u8| -> Result<(HazardSums, WeightedCumulativeHazard), EstimateError> {
            let t = nuis.table(a);
            let s = hazard_sums(t, &assignment.weights)?;
            let h = WeightedCumulativeHazard::from_sums(t, &s, data, &assignment.weights);
            Ok((s, h))
        };
        let (s0, h0) = arm(0)?;
        let (s1, h1) = arm(1)?;
        Ok(Self { assignment, hazards: [h0, h1], sums: [s0, s1] })
    }

    pub fn point(&self, l: f64) -> Result<RmcstResult, Error> {
        let mut r = rmcst_estimate(&self.hazards[1], &self.hazards[0], l)?;
        r.scheme = Some(self.assignment.scheme);
        r.n_included = self.assignment.n_included();
        Ok(r)
    }

    pub fn closed_form(&self, data: &Dataset, nuis: &NuisanceFit, l: f64) -> Result<ClosedFormVariance, Error> {
        if l > nuis.horizon() {
            return Err(Error::HorizonExceeded { l, horizon: nuis.horizon() });
        }
        Ok(closed_form_from_parts(data, nuis, self, l)?)
    }

    /// Point estimate with Wald standard errors and intervals.
    pub fn with_closed_form(&self, data: &Dataset, nuis: &NuisanceFit, l: f64) -> Result<RmcstResult, Error> {
        let mut r = self.point(l)?;
        let v = self.closed_form(data, nuis, l)?;
        attach_wald(&mut r.mu1, v.var_mu1);
        attach_wald(&mut r.mu0, v.var_mu0);
        attach_wald(&mut r.delta, v.var_delta);
        Ok(r)
    }
}

pub(crate) fn attach_wald(e: &mut Estimate, var: f64) {
    let se = var.sqrt();
    e.se = Some(se);
    e.ci = Some((e.value - Z_975 * se, e.value + Z_975 * se));
}

/// Runs every scheme on `data`; a failing scheme does not stop the others.
///
/// Nuisance-model failures are shared by all schemes and returned as the outer error.
pub fn estimate_schemes(
    data: &Dataset,
    schemes: &[WeightScheme],
    ls: &[f64],
    closed_form: bool,
    opts: &PipelineOptions,
) -> Result<Vec<Result<Vec<RmcstResult>, Error>>, Error> {
    if let Some(&l) = ls.iter().find(|&&l| l.is_nan() || l <= 0.0) {
        return Err(EstimateError::NonpositiveL(l).into());
    }
    let horizon = ls.iter().cloned().fold(0.0, f64::max);
    let nuis = NuisanceFit::fit(data, horizon, opts)?;
    Ok(schemes
        .iter()
        .map(|&s| {
            let fit = SchemeFit::fit(data, &nuis, s, opts)?;
            ls.iter().map(|&l| if closed_form { fit.with_closed_form(data, &nuis, l) } else { fit.point(l) }).collect()
        })
        .collect())
}
