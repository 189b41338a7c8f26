//! Restricted mean counterfactual survival time (RMCST) estimation from
//! right-censored observational data.
//!
//! Treatment is adjusted for with propensity-score balancing weights (IPTW,
//! overlap weights, trimming, truncation) and censoring with inverse
//! probability of censoring weights from per-arm Cox models. Each arm's
//! counterfactual survival curve comes from a weighted Nelson–Aalen
//! estimator, and the restricted mean is its exact area up to `L`.
//!
//! ```no_run
//! use rmcst::{estimate_schemes, load_dataset, ColumnSchema, PipelineOptions, WeightScheme};
//!
//! let data = load_dataset("cohort.csv", &ColumnSchema::default())?;
//! let out = estimate_schemes(&data, &[WeightScheme::Overlap], &[2.0, 5.0], true, &PipelineOptions::default())?;
//! for r in out[0].as_ref().unwrap() {
//!     println!("L={} delta={:.3} se={:.3}", r.l, r.delta.value, r.delta.se.unwrap());
//! }
//! # Ok::<(), rmcst::Error>(())
//! ```

pub mod censoring;
pub mod data;
pub mod estimator;
pub mod inference;
pub mod logistic;
pub mod pipeline;
pub mod sim;
pub mod weighting;

pub use censoring::{censoring_survival, fit_censoring_cox, CensoringFit, CoxError, CoxModel, CoxOptions};
pub use data::{eval_step, load_dataset, ColumnSchema, DataError, Dataset, Side, StepFunction};
pub use estimator::{
    counterfactual_survival_curve, rmcst_estimate, weighted_nelson_aalen, Estimate, EstimateError, RmcstResult,
    WeightedCumulativeHazard,
};
pub use inference::{bootstrap_ci, closed_form_variance, BootstrapResult, ClosedFormVariance, InferenceError};
pub use logistic::{fit_logistic, predict_ps, LogisticError, PropensityFit};
pub use pipeline::{estimate_schemes, NuisanceFit, PipelineOptions, SchemeFit};
pub use weighting::{compute_weights, weighted_covariate_means, WeightAssignment, WeightError, WeightScheme};

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Logistic(#[from] LogisticError),
    #[error(transparent)]
    Weight(#[from] WeightError),
    #[error(transparent)]
    Cox(#[from] CoxError),
    #[error(transparent)]
    Estimate(#[from] EstimateError),
    #[error(transparent)]
    Inference(#[from] InferenceError),
    #[error(transparent)]
    Simulation(#[from] sim::SimError),
    #[error("restriction time {l} exceeds the horizon {horizon} the fit was prepared for")]
    HorizonExceeded { l: f64, horizon: f64 },
}

impl Error {
    /// Short stable name of the failure, for machine-readable reporting.
    pub fn kind(&self) -> String {
        let s = format!("{self:?}");
        let outer = s.split('(').next().unwrap_or(&s).to_string();
        let inner = s
            .split_once('(')
            .map(|(_, rest)| rest.split(['(', ' ', '{', ')']).next().unwrap_or("").to_string())
            .unwrap_or_default();
        if inner.is_empty() {
            outer.split(' ').next().unwrap_or("").to_string()
        } else {
            inner
        }
    }
}
