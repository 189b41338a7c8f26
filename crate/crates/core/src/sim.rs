//! Monte Carlo simulation design: six covariates, a logistic treatment model
//! with overlap controlled by `gamma`, exponential counterfactual outcomes
//! and exponential censoring.
//!
//! Random streams: replication `r` draws from `ChaCha8(master_seed)` on stream
//! `r`, so results do not depend on how replications are scheduled. The
//! intercept calibration and the truth super-population use reserved streams.

use std::collections::BTreeMap;

use nalgebra::Matrix3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::Dataset;
use crate::inference::bootstrap_schemes;
use crate::logistic::logistic;
use crate::pipeline::{NuisanceFit, PipelineOptions, SchemeFit};
use crate::weighting::{ps_histogram, trim_region, PsHistogram, Tilting, WeightScheme};
use crate::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error("no intercept with |beta0| <= 50 balances treatment")]
    RootNotBracketed,
    #[error("no true value for scheme {scheme} at L = {l}")]
    TruthMissing { scheme: String, l: f64 },
}

pub const PS_SLOPES: [f64; 6] = [0.15, 0.3, 0.3, -0.2, -0.25, -0.25];
pub const CENSORING_COEF: [f64; 6] = [-0.3, 0.5, 0.5, 0.2, -0.4, -0.5];
pub const CENSORING_INTERCEPT: f64 = -1.6;
pub const COVARIATE_CORRELATION: f64 = 0.5;

const CALIBRATION_STREAM: u64 = u64::MAX;
const TRUTH_STREAM: u64 = u64::MAX - 1;
const HISTOGRAM_STREAM: u64 = u64::MAX - 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum OutcomeVariant {
    WithPsTerm,
    WithoutPsTerm,
}

/// Scale on which the propensity score enters the outcome model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PsTermScale {
    /// `e(X)` itself; reproduces the published true values.
    Probability,
    /// `logit e(X)`.
    Logit,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum CensoringVariant {
    CorrectCox,
    /// Adds `x1_squared * X1^2` to the censoring log-rate, so a linear Cox
    /// model is misspecified. Not part of the published design.
    Misspecified {
        x1_squared: f64,
    },
}

impl CensoringVariant {
    pub fn misspecified() -> Self {
        CensoringVariant::Misspecified { x1_squared: 0.3 }
    }

    pub fn log_rate(&self, x: &[f64]) -> f64 {
        let lin = CENSORING_INTERCEPT + CENSORING_COEF.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
        match *self {
            CensoringVariant::CorrectCox => lin,
            CensoringVariant::Misspecified { x1_squared } => lin + x1_squared * x[0] * x[0],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum VarianceMethod {
    None,
    ClosedForm,
    Bootstrap { b: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TruthMethod {
    /// Averages `E[min(T, L) | X]` in closed form over the super-population covariates.
    ConditionalMean,
    /// Averages `min(T, L)` over counterfactual draws sharing one uniform per unit.
    Sampled,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationScenario {
    pub gamma: f64,
    pub n: usize,
    pub reps: usize,
    pub l_list: Vec<f64>,
    pub schemes: Vec<WeightScheme>,
    pub outcome_variant: OutcomeVariant,
    pub ps_term_scale: PsTermScale,
    pub censoring_variant: CensoringVariant,
    pub variance_method: VarianceMethod,
    pub master_seed: u64,
    /// Covariate draws used to calibrate the treatment-model intercept.
    pub calibration_n: usize,
    pub pipeline: PipelineOptions,
}

impl SimulationScenario {
    /// The published main design at overlap level `gamma`.
    pub fn main(gamma: f64, master_seed: u64) -> Self {
        Self {
            gamma,
            n: 1000,
            reps: 1000,
            l_list: vec![2.0, 5.0, 10.0],
            schemes: WeightScheme::default_grid(),
            outcome_variant: OutcomeVariant::WithPsTerm,
            ps_term_scale: PsTermScale::Probability,
            censoring_variant: CensoringVariant::CorrectCox,
            variance_method: VarianceMethod::ClosedForm,
            master_seed,
            calibration_n: 1_000_000,
            pipeline: PipelineOptions::default(),
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: &str| Err(SimError::InvalidScenario(m.to_string()));
        if !(self.gamma.is_finite() && self.gamma > 0.0) {
            return bad("gamma must be positive");
        }
        if self.reps == 0 {
            return bad("reps must be at least 1");
        }
        if self.n < 2 {
            return bad("n must be at least 2");
        }
        if self.l_list.is_empty() || self.l_list.iter().any(|&l| !(l.is_finite() && l > 0.0)) {
            return bad("restriction times must be positive");
        }
        if self.calibration_n == 0 {
            return bad("calibration sample must be non-empty");
        }
        for s in &self.schemes {
            s.validate().map_err(|e| SimError::InvalidScenario(e.to_string()))?;
        }
        Ok(())
    }

    pub fn slopes(&self) -> [f64; 6] {
        PS_SLOPES.map(|b| b * self.gamma)
    }
}

/// Streams for one seed, one stream per purpose.
pub fn stream_rng(master_seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(stream);
    rng
}

/// Lower Cholesky factor of the equicorrelated 3x3 covariance.
fn normal_factor() -> Matrix3<f64> {
    let r = COVARIATE_CORRELATION;
    let cov = Matrix3::new(1.0, r, r, r, 1.0, r, r, r, 1.0);
    cov.cholesky().expect("positive definite").l()
}

fn draw_covariates<R: Rng>(rng: &mut R, factor: &Matrix3<f64>) -> [f64; 6] {
    let z = nalgebra::Vector3::new(
        rng.sample::<f64, _>(StandardNormal),
        rng.sample::<f64, _>(StandardNormal),
        rng.sample::<f64, _>(StandardNormal),
    );
    let x = factor * z;
    let mut b = || if rng.random::<f64>() < 0.5 { 1.0 } else { 0.0 };
    [x[0], x[1], x[2], b(), b(), b()]
}

fn dot6(a: &[f64; 6], x: &[f64; 6]) -> f64 {
    a.iter().zip(x).map(|(a, b)| a * b).sum()
}

/// Uniform on the open interval, for inverse-transform sampling.
fn open_uniform<R: Rng>(rng: &mut R) -> f64 {
    loop {
        let v: f64 = rng.random();
        if v > 0.0 {
            return v;
        }
    }
}

/// Intercept making the average true score 1/2, on `draws` covariate draws.
pub fn calibrate_intercept(slopes: &[f64; 6], draws: usize, seed: u64) -> Result<f64, SimError> {
    if slopes.iter().all(|&b| b == 0.0) {
        return Ok(0.0);
    }
    let mut rng = stream_rng(seed, CALIBRATION_STREAM);
    let factor = normal_factor();
    let lin: Vec<f64> = (0..draws).map(|_| dot6(slopes, &draw_covariates(&mut rng, &factor))).collect();
    solve_intercept(&lin)
}

/// Root of `mean(logistic(b + lin)) = 1/2` in `b`.
pub fn solve_intercept(lin: &[f64]) -> Result<f64, SimError> {
    let n = lin.len() as f64;
    let f = |b: f64| {
        let (mut s, mut d) = (0.0, 0.0);
        for &v in lin {
            let e = logistic(b + v);
            s += e;
            d += e * (1.0 - e);
        }
        (s / n - 0.5, d / n)
    };
    let (mut lo, mut hi) = (-1.0, 1.0);
    while f(lo).0 > 0.0 {
        lo *= 2.0;
        if lo < -50.0 {
            return Err(SimError::RootNotBracketed);
        }
    }
    while f(hi).0 < 0.0 {
        hi *= 2.0;
        if hi > 50.0 {
            return Err(SimError::RootNotBracketed);
        }
    }
    let mut b = 0.5 * (lo + hi);
    for _ in 0..200 {
        let (v, d) = f(b);
        if v.abs() < 1e-14 {
            break;
        }
        if v > 0.0 {
            hi = b;
        } else {
            lo = b;
        }
        let newton = b - v / d;
        b = if d > 0.0 && newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
        if hi - lo < 1e-15 {
            break;
        }
    }
    Ok(b)
}

/// The scenario's data-generating model with its calibrated intercept.
#[derive(Debug, Clone, PartialEq)]
pub struct Design {
    pub intercept: f64,
    pub slopes: [f64; 6],
    pub outcome_variant: OutcomeVariant,
    pub ps_term_scale: PsTermScale,
    pub censoring_variant: CensoringVariant,
}

impl Design {
    pub fn new(scenario: &SimulationScenario) -> Result<Self, SimError> {
        scenario.validate()?;
        let slopes = scenario.slopes();
        Ok(Self {
            intercept: calibrate_intercept(&slopes, scenario.calibration_n, scenario.master_seed)?,
            slopes,
            outcome_variant: scenario.outcome_variant,
            ps_term_scale: scenario.ps_term_scale,
            censoring_variant: scenario.censoring_variant,
        })
    }

    pub fn propensity(&self, x: &[f64; 6]) -> f64 {
        logistic(self.intercept + dot6(&self.slopes, x))
    }

    /// Log-rates `(m1, m0)` of the two counterfactual exponential outcomes.
    pub fn outcome_log_rates(&self, x: &[f64; 6]) -> (f64, f64) {
        let m1 = -1.0 + 0.4 * x[0] + 0.2 * x[1] + 0.1 * x[2] - 0.1 * x[3] - 0.2 * x[4] - 0.3 * x[5];
        let m0 = -1.4 - 0.2 * x[1] - 0.3 * x[2] - 0.5 * x[3] - 0.6 * x[4] - 0.7 * x[5];
        match self.outcome_variant {
            OutcomeVariant::WithoutPsTerm => (m1, m0),
            OutcomeVariant::WithPsTerm => {
                let term = match self.ps_term_scale {
                    PsTermScale::Probability => self.propensity(x),
                    PsTermScale::Logit => self.intercept + dot6(&self.slopes, x),
                };
                (m1 + 2.0 * term, m0 - term)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulatedData {
    pub data: Dataset,
    pub t1: Vec<f64>,
    pub t0: Vec<f64>,
    pub censoring: Vec<f64>,
    pub true_ps: Vec<f64>,
}

/// Draws replication `rep` of the design with `n` units.
pub fn generate_dataset(design: &Design, n: usize, master_seed: u64, rep: usize) -> SimulatedData {
    let mut rng = stream_rng(master_seed, rep as u64);
    let factor = normal_factor();
    let mut x = Vec::with_capacity(6 * n);
    let (mut treat, mut time, mut event) = (Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n));
    let (mut t1, mut t0, mut cens, mut ps) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for _ in 0..n {
        let xi = draw_covariates(&mut rng, &factor);
        let e = design.propensity(&xi);
        let a = u8::from(rng.random::<f64>() < e);
        let (m1, m0) = design.outcome_log_rates(&xi);
        let y1 = -open_uniform(&mut rng).ln() / m1.exp();
        let y0 = -open_uniform(&mut rng).ln() / m0.exp();
        let c = -open_uniform(&mut rng).ln() / design.censoring_variant.log_rate(&xi).exp();
        let t = if a == 1 { y1 } else { y0 };
        x.extend_from_slice(&xi);
        treat.push(a);
        time.push(t.min(c));
        event.push(t <= c);
        t1.push(y1);
        t0.push(y0);
        cens.push(c);
        ps.push(e);
    }
    let names = (1..=6).map(|j| format!("x{j}")).collect();
    let data = Dataset::with_names(x, 6, treat, time, event, names).expect("simulated data are valid");
    SimulatedData { data, t1, t0, censoring: cens, true_ps: ps }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruthEntry {
    pub scheme: WeightScheme,
    pub l: f64,
    pub mu1: f64,
    pub mu0: f64,
    pub delta: f64,
    pub se_mu1: f64,
    pub se_mu0: f64,
    pub se_delta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthTable {
    pub gamma: f64,
    pub super_n: usize,
    pub method: TruthMethod,
    pub entries: Vec<TruthEntry>,
}

impl TruthTable {
    pub fn get(&self, scheme: WeightScheme, l: f64) -> Result<&TruthEntry, SimError> {
        self.entries
            .iter()
            .find(|e| e.scheme == scheme && e.l == l)
            .ok_or_else(|| SimError::TruthMissing { scheme: scheme.to_string(), l })
    }
}

/// `E[min(T, L)]` for `T` exponential with the given rate.
fn restricted_exp_mean(rate: f64, l: f64) -> f64 {
    -(-rate * l).exp_m1() / rate
}

/// Weighted mean and its delta-method standard error.
fn ratio_mean(h: &[f64], v: &[f64]) -> (f64, f64) {
    let n = h.len() as f64;
    let sh: f64 = h.iter().sum();
    let mu = h.iter().zip(v).map(|(a, b)| a * b).sum::<f64>() / sh;
    let ss: f64 = h.iter().zip(v).map(|(a, b)| (a * (b - mu)).powi(2)).sum();
    (mu, (ss / (n - 1.0)).sqrt() * n.sqrt() / sh)
}

/// True estimand values over a super-population of `super_n` units.
///
/// Trimmed schemes target the region obtained by applying the trimming rule
/// to the true scores of the super-population.
pub fn compute_truth(
    scenario: &SimulationScenario,
    super_n: usize,
    method: TruthMethod,
) -> Result<TruthTable, SimError> {
    let design = Design::new(scenario)?;
    compute_truth_for(&design, scenario, super_n, method)
}

pub fn compute_truth_for(
    design: &Design,
    scenario: &SimulationScenario,
    super_n: usize,
    method: TruthMethod,
) -> Result<TruthTable, SimError> {
    if super_n < 2 {
        return Err(SimError::InvalidScenario("super-population needs at least 2 units".into()));
    }
    let mut rng = stream_rng(scenario.master_seed, TRUTH_STREAM);
    let factor = normal_factor();
    let mut ps = Vec::with_capacity(super_n);
    let mut treat = Vec::with_capacity(super_n);
    let mut rates = Vec::with_capacity(super_n);
    let mut common_u = Vec::with_capacity(super_n);
    for _ in 0..super_n {
        let x = draw_covariates(&mut rng, &factor);
        let e = design.propensity(&x);
        ps.push(e);
        treat.push(u8::from(rng.random::<f64>() < e));
        let (m1, m0) = design.outcome_log_rates(&x);
        rates.push((m1.exp(), m0.exp()));
        common_u.push(open_uniform(&mut rng));
    }

    let mut entries = Vec::new();
    for &scheme in &scenario.schemes {
        let h: Vec<f64> = match scheme.tilting() {
            Tilting::Unit => vec![1.0; super_n],
            Tilting::Overlap => ps.iter().map(|e| e * (1.0 - e)).collect(),
            Tilting::RetainedRegion => {
                trim_region(&ps, &treat, scheme).into_iter().map(|b| if b { 1.0 } else { 0.0 }).collect()
            }
        };
        if h.iter().sum::<f64>() <= 0.0 {
            return Err(SimError::InvalidScenario(format!("{scheme} retains no super-population units")));
        }
        for &l in &scenario.l_list {
            let (v1, v0): (Vec<f64>, Vec<f64>) = match method {
                TruthMethod::ConditionalMean => {
                    rates.iter().map(|&(r1, r0)| (restricted_exp_mean(r1, l), restricted_exp_mean(r0, l))).unzip()
                }
                TruthMethod::Sampled => rates
                    .iter()
                    .zip(&common_u)
                    .map(|(&(r1, r0), &u)| ((-u.ln() / r1).min(l), (-u.ln() / r0).min(l)))
                    .unzip(),
            };
            let d: Vec<f64> = v1.iter().zip(&v0).map(|(a, b)| a - b).collect();
            let (mu1, se_mu1) = ratio_mean(&h, &v1);
            let (mu0, se_mu0) = ratio_mean(&h, &v0);
            let (delta, se_delta) = ratio_mean(&h, &d);
            entries.push(TruthEntry { scheme, l, mu1, mu0, delta, se_mu1, se_mu0, se_delta });
        }
    }
    Ok(TruthTable { gamma: scenario.gamma, super_n, method, entries })
}

/// Histogram of true scores by arm over `draws` units (plot data for the
/// overlap figure).
pub fn true_ps_histogram(scenario: &SimulationScenario, draws: usize, bins: usize) -> Result<PsHistogram, SimError> {
    let design = Design::new(scenario)?;
    let mut rng = stream_rng(scenario.master_seed, HISTOGRAM_STREAM);
    let factor = normal_factor();
    let (mut ps, mut treat) = (Vec::with_capacity(draws), Vec::with_capacity(draws));
    for _ in 0..draws {
        let e = design.propensity(&draw_covariates(&mut rng, &factor));
        ps.push(e);
        treat.push(u8::from(rng.random::<f64>() < e));
    }
    Ok(ps_histogram(&ps, &treat, bins))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Target {
    Mu1,
    Mu0,
    Delta,
}

impl Target {
    pub const ALL: [Target; 3] = [Target::Mu1, Target::Mu0, Target::Delta];

    pub fn name(self) -> &'static str {
        match self {
            Target::Mu1 => "mu1",
            Target::Mu0 => "mu0",
            Target::Delta => "delta",
        }
    }

    fn of_truth(self, t: &TruthEntry) -> f64 {
        match self {
            Target::Mu1 => t.mu1,
            Target::Mu0 => t.mu0,
            Target::Delta => t.delta,
        }
    }
}

/// One replication's estimate of one target.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Draw {
    pub value: f64,
    pub se: Option<f64>,
    pub ci: Option<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub scheme: WeightScheme,
    pub l: f64,
    pub target: Target,
    pub truth: f64,
    pub successes: usize,
    pub mean_estimate: f64,
    /// Mean estimate minus truth, in estimand units.
    pub bias: f64,
    pub mc_variance: f64,
    /// Monte Carlo variance of IPTW over that of this scheme.
    pub relative_efficiency: Option<f64>,
    /// Percentage of intervals containing the truth.
    pub coverage: Option<f64>,
    pub mean_se: Option<f64>,
    pub mean_variance: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemeFailures {
    pub scheme: WeightScheme,
    pub count: usize,
    /// Failure kind -> number of replications.
    pub kinds: BTreeMap<String, usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationReport {
    pub gamma: f64,
    pub n: usize,
    pub reps: usize,
    pub master_seed: u64,
    pub cells: Vec<CellSummary>,
    pub failures: Vec<SchemeFailures>,
}

impl SimulationReport {
    pub fn cell(&self, scheme: WeightScheme, l: f64, target: Target) -> Option<&CellSummary> {
        self.cells.iter().find(|c| c.scheme == scheme && c.l == l && c.target == target)
    }
}

/// `[scheme] -> Ok([L][target])` or the failure kind.
pub type ReplicationOutcome = Vec<Result<Vec<[Draw; 3]>, String>>;

fn bootstrap_seed(master_seed: u64, rep: usize) -> u64 {
    // splitmix64 finalizer
    let mut z = master_seed ^ (rep as u64).wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn draw_of(e: &crate::estimator::Estimate) -> Draw {
    Draw { value: e.value, se: e.se, ci: e.ci }
}

fn run_replication(design: &Design, scenario: &SimulationScenario, rep: usize) -> ReplicationOutcome {
    let sim = generate_dataset(design, scenario.n, scenario.master_seed, rep);
    let data = &sim.data;
    let ls = &scenario.l_list;
    let horizon = ls.iter().cloned().fold(0.0, f64::max);
    let opts = &scenario.pipeline;
    let nuis = match NuisanceFit::fit(data, horizon, opts) {
        Ok(f) => f,
        Err(e) => return vec![Err(e.kind()); scenario.schemes.len()],
    };
    let closed = scenario.variance_method == VarianceMethod::ClosedForm;
    let mut out: ReplicationOutcome = scenario
        .schemes
        .iter()
        .map(|&s| -> Result<Vec<[Draw; 3]>, Error> {
            let fit = SchemeFit::fit(data, &nuis, s, opts)?;
            ls.iter()
                .map(|&l| {
                    let r = if closed { fit.with_closed_form(data, &nuis, l)? } else { fit.point(l)? };
                    Ok([draw_of(&r.mu1), draw_of(&r.mu0), draw_of(&r.delta)])
                })
                .collect()
        })
        .map(|r| r.map_err(|e| e.kind()))
        .collect();

    if let VarianceMethod::Bootstrap { b } = scenario.variance_method {
        let boot = bootstrap_schemes(data, &scenario.schemes, b, ls, bootstrap_seed(scenario.master_seed, rep), opts);
        match boot {
            Err(e) => out.iter_mut().for_each(|o| *o = Err(Error::from(e.clone()).kind())),
            Ok(per_scheme) => {
                for (o, br) in out.iter_mut().zip(per_scheme) {
                    match (o.as_mut(), br) {
                        (Ok(cells), Ok(br)) => {
                            for (cell, iv) in cells.iter_mut().zip(&br.intervals) {
                                cell[0].se = Some(iv.se_mu1);
                                cell[0].ci = Some(iv.mu1);
                                cell[1].se = Some(iv.se_mu0);
                                cell[1].ci = Some(iv.mu0);
                                cell[2].se = Some(iv.se_delta);
                                cell[2].ci = Some(iv.delta);
                            }
                        }
                        (Ok(_), Err(e)) => *o = Err(Error::from(e).kind()),
                        (Err(_), _) => {}
                    }
                }
            }
        }
    }
    out
}

/// Per-replication outcomes in replication order.
pub fn run_replications(design: &Design, scenario: &SimulationScenario) -> Vec<ReplicationOutcome> {
    (0..scenario.reps).into_par_iter().map(|r| run_replication(design, scenario, r)).collect()
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn variance(v: &[f64]) -> f64 {
    if v.len() < 2 {
        return 0.0;
    }
    let m = mean(v);
    v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64
}

/// Replicates the scenario and summarizes bias, efficiency and coverage
/// against `truth`.
pub fn run_study(scenario: &SimulationScenario, truth: &TruthTable) -> Result<SimulationReport, SimError> {
    let design = Design::new(scenario)?;
    for &s in &scenario.schemes {
        for &l in &scenario.l_list {
            truth.get(s, l)?;
        }
    }
    let outcomes = run_replications(&design, scenario);
    Ok(summarize(scenario, truth, &outcomes))
}

pub fn summarize(
    scenario: &SimulationScenario,
    truth: &TruthTable,
    outcomes: &[ReplicationOutcome],
) -> SimulationReport {
    let mut failures = Vec::new();
    // (scheme index, L index, target) -> draws
    let mut draws: Vec<Vec<[Vec<Draw>; 3]>> =
        vec![vec![[Vec::new(), Vec::new(), Vec::new()]; scenario.l_list.len()]; scenario.schemes.len()];
    for (s, &scheme) in scenario.schemes.iter().enumerate() {
        let mut kinds = BTreeMap::new();
        for rep in outcomes {
            match &rep[s] {
                Ok(cells) => {
                    for (k, c) in cells.iter().enumerate() {
                        for t in 0..3 {
                            draws[s][k][t].push(c[t]);
                        }
                    }
                }
                Err(kind) => *kinds.entry(kind.clone()).or_insert(0) += 1,
            }
        }
        failures.push(SchemeFailures { scheme, count: kinds.values().sum(), kinds });
    }

    let iptw = scenario.schemes.iter().position(|&s| s == WeightScheme::Iptw);
    let mut cells = Vec::new();
    for (s, &scheme) in scenario.schemes.iter().enumerate() {
        for (k, &l) in scenario.l_list.iter().enumerate() {
            let entry = truth.get(scheme, l).expect("checked before replication");
            for (t, &target) in Target::ALL.iter().enumerate() {
                let d = &draws[s][k][t];
                let tv = target.of_truth(entry);
                let values: Vec<f64> = d.iter().map(|x| x.value).collect();
                let (mean_estimate, mc_variance) =
                    if values.is_empty() { (f64::NAN, f64::NAN) } else { (mean(&values), variance(&values)) };
                let relative_efficiency = iptw.map(|i| {
                    let v: Vec<f64> = draws[i][k][t].iter().map(|x| x.value).collect();
                    variance(&v) / mc_variance
                });
                let ses: Vec<f64> = d.iter().filter_map(|x| x.se).collect();
                let covered: Vec<bool> = d.iter().filter_map(|x| x.ci.map(|(lo, hi)| lo <= tv && tv <= hi)).collect();
                cells.push(CellSummary {
                    scheme,
                    l,
                    target,
                    truth: tv,
                    successes: d.len(),
                    mean_estimate,
                    bias: mean_estimate - tv,
                    mc_variance,
                    relative_efficiency,
                    coverage: (!covered.is_empty())
                        .then(|| 100.0 * covered.iter().filter(|&&c| c).count() as f64 / covered.len() as f64),
                    mean_se: (!ses.is_empty()).then(|| mean(&ses)),
                    mean_variance: (!ses.is_empty()).then(|| ses.iter().map(|s| s * s).sum::<f64>() / ses.len() as f64),
                });
            }
        }
    }
    SimulationReport {
        gamma: scenario.gamma,
        n: scenario.n,
        reps: scenario.reps,
        master_seed: scenario.master_seed,
        cells,
        failures,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_slopes_give_zero_intercept() {
        assert_eq!(calibrate_intercept(&[0.0; 6], 100, 1).unwrap(), 0.0);
    }

    #[test]
    fn single_binary_covariate_intercept() {
        // half the draws at 0, half at c
        let c = 1.7;
        let lin: Vec<f64> = (0..1000).map(|i| if i % 2 == 0 { 0.0 } else { c }).collect();
        assert!((solve_intercept(&lin).unwrap() + c / 2.0).abs() < 1e-12);
    }

    #[test]
    fn unreachable_balance() {
        assert_eq!(solve_intercept(&[200.0, 300.0]), Err(SimError::RootNotBracketed));
    }

    #[test]
    fn restricted_exponential_mean() {
        assert!((restricted_exp_mean(1.0, 2.0) - (1.0 - (-2.0f64).exp())).abs() < 1e-15);
        assert!((restricted_exp_mean(1e-12, 3.0) - 3.0).abs() < 1e-9);
    }

    #[test]
    fn generation_is_reproducible_per_replication() {
        let mut s = SimulationScenario::main(1.0, 3);
        s.calibration_n = 10_000;
        let d = Design::new(&s).unwrap();
        let a = generate_dataset(&d, 50, 3, 4);
        let b = generate_dataset(&d, 50, 3, 4);
        let c = generate_dataset(&d, 50, 3, 5);
        assert_eq!(a, b);
        assert_ne!(a.data.time(), c.data.time());
    }

    #[test]
    fn scenario_validation() {
        let mut s = SimulationScenario::main(1.0, 1);
        s.reps = 0;
        assert!(s.validate().is_err());
        s.reps = 1;
        s.l_list = vec![2.0, -1.0];
        assert!(s.validate().is_err());
        s.l_list = vec![2.0];
        s.gamma = 0.0;
        assert!(s.validate().is_err());
    }
}
