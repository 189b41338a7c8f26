use rmcst::estimator::survival_table;
use rmcst::inference::bootstrap_schemes;
use rmcst::sim::{
    compute_truth, run_study, true_ps_histogram, OutcomeVariant, SimulationReport, SimulationScenario, Target,
    TruthMethod, TruthTable, VarianceMethod,
};
use rmcst::weighting::{balance_from_weights, ps_histogram, BalanceTable, PsHistogram};
use rmcst::{
    load_dataset, weighted_covariate_means, ColumnSchema, NuisanceFit, PipelineOptions, RmcstResult, SchemeFit,
    WeightScheme,
};

use crate::args::{
    check_gamma, check_ls, resolve_schemes, DesignArgs, EstimateArgs, ReproduceArgs, SchemeArgs, SimulateArgs,
    TruthArgs, VarianceArg,
};
use crate::output::{Artifact, Cell, Section};
use crate::reference::{self, ReferenceRow};
use crate::CliError;

/// Replication counts below this are flagged in the artifact header.
pub const MIN_REPS: usize = 200;
pub const HISTOGRAM_BINS: usize = 20;

const EST_DP: usize = 3;
const COVERAGE_DP: usize = 1;
const RATIO_DP: usize = 2;
const DIAG_DP: usize = 4;

fn core<E: Into<rmcst::Error>>(e: E) -> CliError {
    CliError::Core(e.into())
}

fn pipeline_options(s: &SchemeArgs) -> PipelineOptions {
    let mut o = PipelineOptions::default();
    o.weights.refit_after_trim = !s.no_refit;
    o
}

fn join<T: ToString>(v: &[T]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

fn histogram_rows(sec: &mut Section, prefix: Vec<Cell>, h: &PsHistogram) {
    for b in 0..h.treated.len() {
        let mut row = prefix.clone();
        row.extend([
            Cell::num(h.edges[b], 2),
            Cell::num(h.edges[b + 1], 2),
            Cell::Int(h.treated[b] as i64),
            Cell::Int(h.control[b] as i64),
        ]);
        sec.push(row);
    }
}

fn balance_rows(sec: &mut Section, label: &str, b: &BalanceTable) {
    for (j, name) in b.covariates.iter().enumerate() {
        sec.push(vec![
            label.into(),
            name.as_str().into(),
            Cell::num(b.treated_mean[j], DIAG_DP),
            Cell::num(b.control_mean[j], DIAG_DP),
            Cell::num(b.std_diff[j], DIAG_DP),
        ]);
    }
}

pub fn estimate(a: &EstimateArgs) -> Result<Artifact, CliError> {
    check_ls(&a.l)?;
    let schemes = resolve_schemes(&a.schemes, &[WeightScheme::Overlap, WeightScheme::Iptw])?;
    if a.variance == VarianceArg::Bootstrap && a.b < 2 {
        return Err(CliError::Usage(format!("--B must be at least 2, got {}", a.b)));
    }
    let schema = ColumnSchema {
        treat: a.treat_col.clone(),
        time: a.time_col.clone(),
        event: a.event_col.clone(),
        covariates: a.covariates.clone(),
    };
    let data =
        load_dataset(&a.input, &schema).map_err(|e| CliError::Input { path: a.input.clone(), source: e.into() })?;
    let opts = pipeline_options(&a.schemes);
    let horizon = a.l.iter().cloned().fold(0.0, f64::max);
    let nuis = NuisanceFit::fit(&data, horizon, &opts)?;

    let mut fits = Vec::with_capacity(schemes.len());
    for &s in &schemes {
        let fit = SchemeFit::fit(&data, &nuis, s, &opts).map_err(|e| CliError::Scheme { scheme: s, source: e })?;
        fits.push(fit);
    }

    let mut results: Vec<Vec<RmcstResult>> = Vec::with_capacity(fits.len());
    for fit in &fits {
        let rows: Result<Vec<_>, _> =
            a.l.iter()
                .map(|&l| match a.variance {
                    VarianceArg::Closed => fit.with_closed_form(&data, &nuis, l),
                    VarianceArg::Bootstrap => fit.point(l),
                })
                .collect();
        results.push(rows.map_err(|e| CliError::Scheme { scheme: fit.assignment.scheme, source: e })?);
    }

    let mut art = Artifact::new("estimate");
    art.meta("input", a.input.display());
    art.meta("n", data.n());
    art.meta("p", data.p());
    art.meta("schemes", join(&schemes));
    art.meta("L", join(&a.l));
    art.meta("refit_after_trim", !a.schemes.no_refit);

    match a.variance {
        VarianceArg::Closed => art.meta("variance", "closed"),
        VarianceArg::Bootstrap => {
            art.meta("variance", "bootstrap");
            art.meta("B", a.b);
            art.meta("seed", a.seed);
            let boot = bootstrap_schemes(&data, &schemes, a.b, &a.l, a.seed, &opts).map_err(core)?;
            for ((rows, br), &s) in results.iter_mut().zip(boot).zip(&schemes) {
                let br = br.map_err(|e| CliError::Scheme { scheme: s, source: e.into() })?;
                if br.dropped > 0 {
                    art.warnings.push(format!("{s}: dropped {} of {} bootstrap replicates", br.dropped, br.replicates));
                }
                for (r, iv) in rows.iter_mut().zip(&br.intervals) {
                    r.mu1.se = Some(iv.se_mu1);
                    r.mu1.ci = Some(iv.mu1);
                    r.mu0.se = Some(iv.se_mu0);
                    r.mu0.ci = Some(iv.mu0);
                    r.delta.se = Some(iv.se_delta);
                    r.delta.ci = Some(iv.delta);
                }
            }
        }
    }
    if data.n() < 50 && a.variance == VarianceArg::Closed {
        art.warnings.push(format!("closed-form variance with n = {} is unstable", data.n()));
    }

    let mut res = Section::new(
        "results",
        &[
            "scheme",
            "L",
            "mu1",
            "se_mu1",
            "mu0",
            "se_mu0",
            "delta",
            "se",
            "ci_low",
            "ci_high",
            "n_included",
            "beyond_followup_treated",
            "beyond_followup_control",
            "conditional_on_trim",
        ],
    );
    for rows in &results {
        for r in rows {
            let scheme = r.scheme.expect("set by the pipeline");
            res.push(vec![
                scheme.to_string().into(),
                Cell::num(r.l, EST_DP),
                Cell::num(r.mu1.value, EST_DP),
                Cell::opt(r.mu1.se, EST_DP),
                Cell::num(r.mu0.value, EST_DP),
                Cell::opt(r.mu0.se, EST_DP),
                Cell::num(r.delta.value, EST_DP),
                Cell::opt(r.delta.se, EST_DP),
                Cell::opt(r.delta.ci.map(|c| c.0), EST_DP),
                Cell::opt(r.delta.ci.map(|c| c.1), EST_DP),
                r.n_included.into(),
                r.beyond_followup[1].into(),
                r.beyond_followup[0].into(),
                (scheme.is_trim() && a.variance == VarianceArg::Closed).into(),
            ]);
        }
    }
    art.sections.push(res);

    let mut hist = Section::new("ps_histogram", &["bin_low", "bin_high", "treated", "control"]);
    histogram_rows(&mut hist, vec![], &ps_histogram(&nuis.ps.scores, data.treat(), HISTOGRAM_BINS));
    art.sections.push(hist);

    let mut bal = Section::new("balance", &["weights", "covariate", "treated_mean", "control_mean", "std_diff"]);
    balance_rows(&mut bal, "unweighted", &balance_from_weights(&data, &vec![1.0; data.n()]).map_err(core)?);
    for fit in &fits {
        let b = weighted_covariate_means(&data, &fit.assignment).map_err(core)?;
        balance_rows(&mut bal, &fit.assignment.scheme.to_string(), &b);
    }
    art.sections.push(bal);

    if a.curves {
        let mut cur = Section::new("survival", &["scheme", "arm", "time", "survival"]);
        for fit in &fits {
            for arm in [1u8, 0] {
                for (t, s) in survival_table(&fit.hazards[arm as usize]) {
                    cur.push(vec![
                        fit.assignment.scheme.to_string().into(),
                        Cell::Int(arm as i64),
                        Cell::num(t, 6),
                        Cell::num(s, 6),
                    ]);
                }
            }
        }
        art.sections.push(cur);
    }
    Ok(art)
}

fn scenario_from(gamma: f64, design: &DesignArgs) -> SimulationScenario {
    let mut sc = SimulationScenario::main(gamma, design.seed);
    sc.outcome_variant = design.outcome_variant.into();
    sc.censoring_variant = design.censoring_variant.into();
    sc
}

fn design_meta(art: &mut Artifact, d: &DesignArgs) {
    art.meta("outcome_variant", format!("{:?}", d.outcome_variant).to_lowercase());
    art.meta("censoring_variant", format!("{:?}", d.censoring_variant).to_lowercase());
    art.meta("truth_method", format!("{:?}", d.truth_method).to_lowercase());
    art.meta("super_n", d.super_n);
    art.meta("seed", d.seed);
}

fn check_super_n(n: usize) -> Result<(), CliError> {
    if n < 2 {
        return Err(CliError::Usage(format!("--super-n must be at least 2, got {n}")));
    }
    Ok(())
}

fn budget_warnings(art: &mut Artifact, reps: usize, super_n: usize) {
    if reps < MIN_REPS {
        art.warnings.push(format!("BudgetTooSmall: reps = {reps} is below {MIN_REPS}"));
    }
    if super_n < 100_000 {
        art.warnings.push(format!("BudgetTooSmall: super_n = {super_n} is below 100000"));
    }
}

fn truth_or_usage(sc: &SimulationScenario, super_n: usize, method: TruthMethod) -> Result<TruthTable, CliError> {
    sc.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    compute_truth(sc, super_n, method).map_err(core)
}

pub fn simulate(a: &SimulateArgs) -> Result<Artifact, CliError> {
    check_ls(&a.l)?;
    check_gamma(&[a.gamma])?;
    check_super_n(a.design.super_n)?;
    let schemes = resolve_schemes(&a.schemes, &WeightScheme::default_grid())?;
    let mut sc = scenario_from(a.gamma, &a.design);
    sc.n = a.n;
    sc.reps = a.reps;
    sc.l_list = a.l.clone();
    sc.schemes = schemes;
    sc.pipeline = pipeline_options(&a.schemes);
    sc.variance_method = match a.variance {
        VarianceArg::Closed => VarianceMethod::ClosedForm,
        VarianceArg::Bootstrap => VarianceMethod::Bootstrap { b: a.b },
    };
    let truth = truth_or_usage(&sc, a.design.super_n, a.design.truth_method.into())?;
    let report = run_study(&sc, &truth).map_err(core)?;

    let mut art = Artifact::new("simulate");
    art.meta("gamma", a.gamma);
    art.meta("n", a.n);
    art.meta("reps", a.reps);
    art.meta("L", join(&a.l));
    art.meta("schemes", join(&sc.schemes));
    match a.variance {
        VarianceArg::Closed => art.meta("variance", "closed"),
        VarianceArg::Bootstrap => art.meta("variance", format!("bootstrap B={}", a.b)),
    }
    design_meta(&mut art, &a.design);
    budget_warnings(&mut art, a.reps, a.design.super_n);

    let mut cells = Section::new(
        "cells",
        &[
            "scheme",
            "gamma",
            "L",
            "target",
            "truth",
            "mean_estimate",
            "bias",
            "mc_variance",
            "relative_efficiency",
            "coverage",
            "mean_se",
            "successes",
        ],
    );
    for c in &report.cells {
        cells.push(vec![
            c.scheme.to_string().into(),
            Cell::num(a.gamma, 2),
            Cell::num(c.l, EST_DP),
            c.target.name().into(),
            Cell::num(c.truth, EST_DP),
            Cell::num(c.mean_estimate, EST_DP),
            Cell::num(c.bias, DIAG_DP),
            Cell::num(c.mc_variance, DIAG_DP + 2),
            Cell::opt(c.relative_efficiency, RATIO_DP),
            Cell::opt(c.coverage, COVERAGE_DP),
            Cell::opt(c.mean_se, DIAG_DP),
            c.successes.into(),
        ]);
    }
    art.sections.push(cells);
    art.sections.push(failure_section(&[&report]));
    Ok(art)
}

fn failure_section(reports: &[&SimulationReport]) -> Section {
    let mut s = Section::new("failures", &["scheme", "gamma", "failures", "kinds"]);
    for r in reports {
        for f in &r.failures {
            let kinds: Vec<String> = f.kinds.iter().map(|(k, v)| format!("{k}:{v}")).collect();
            s.push(vec![f.scheme.to_string().into(), Cell::num(r.gamma, 2), f.count.into(), kinds.join(";").into()]);
        }
    }
    s
}

pub fn truth(a: &TruthArgs) -> Result<Artifact, CliError> {
    check_ls(&a.l)?;
    check_gamma(&a.gamma)?;
    check_super_n(a.design.super_n)?;
    let schemes = resolve_schemes(&a.schemes, &WeightScheme::default_grid())?;
    let mut art = Artifact::new("truth");
    art.meta("gamma", join(&a.gamma));
    art.meta("L", join(&a.l));
    art.meta("schemes", join(&schemes));
    design_meta(&mut art, &a.design);
    budget_warnings(&mut art, MIN_REPS, a.design.super_n);

    let mut tab =
        Section::new("truth", &["scheme", "gamma", "L", "mu1", "mu0", "delta", "se_mu1", "se_mu0", "se_delta"]);
    let mut hist = Section::new("true_ps_histogram", &["gamma", "bin_low", "bin_high", "treated", "control"]);
    for &g in &a.gamma {
        let mut sc = scenario_from(g, &a.design);
        sc.l_list = a.l.clone();
        sc.schemes = schemes.clone();
        let t = truth_or_usage(&sc, a.design.super_n, a.design.truth_method.into())?;
        for e in &t.entries {
            tab.push(vec![
                e.scheme.to_string().into(),
                Cell::num(g, 2),
                Cell::num(e.l, EST_DP),
                Cell::num(e.mu1, EST_DP),
                Cell::num(e.mu0, EST_DP),
                Cell::num(e.delta, EST_DP),
                Cell::num(e.se_mu1, DIAG_DP),
                Cell::num(e.se_mu0, DIAG_DP),
                Cell::num(e.se_delta, DIAG_DP),
            ]);
        }
        let h = true_ps_histogram(&sc, a.design.super_n, HISTOGRAM_BINS).map_err(core)?;
        histogram_rows(&mut hist, vec![Cell::num(g, 2)], &h);
    }
    art.sections.push(tab);
    art.sections.push(hist);
    Ok(art)
}

const COMPARISON_COLUMNS: [&str; 7] = ["scheme", "gamma", "L", "target", "value", "reference", "abs_diff"];

fn comparison_row(
    scheme: WeightScheme,
    gamma: f64,
    l: f64,
    target: Target,
    value: Option<f64>,
    table: &[ReferenceRow],
    dp: usize,
) -> Vec<Cell> {
    let r = reference::lookup(table, scheme, gamma, l, target);
    let diff = value.zip(r).map(|(v, r)| (v - r).abs());
    vec![
        scheme.to_string().into(),
        Cell::num(gamma, 2),
        Cell::num(l, EST_DP),
        target.name().into(),
        Cell::opt(value, dp),
        Cell::opt(r, dp),
        Cell::opt(diff, dp),
    ]
}

/// One study per `gamma` with the given scenario adjustments.
fn studies(
    a: &ReproduceArgs,
    adjust: impl Fn(&mut SimulationScenario),
) -> Result<Vec<(SimulationScenario, SimulationReport)>, CliError> {
    a.gamma
        .iter()
        .map(|&g| {
            let mut sc = SimulationScenario::main(g, a.seed);
            sc.reps = a.reps;
            sc.n = a.n.unwrap_or(1000);
            adjust(&mut sc);
            let truth = truth_or_usage(&sc, a.super_n, TruthMethod::ConditionalMean)?;
            let rep = run_study(&sc, &truth).map_err(core)?;
            Ok((sc, rep))
        })
        .collect()
}

pub fn reproduce(a: &ReproduceArgs) -> Result<Artifact, CliError> {
    check_gamma(&a.gamma)?;
    check_super_n(a.super_n)?;
    if a.reps == 0 {
        return Err(CliError::Usage("--reps must be at least 1".into()));
    }
    let mut art = Artifact::new(&format!("reproduce table={}", a.table));
    art.meta("table", a.table);
    art.meta("gamma", join(&a.gamma));
    art.meta("seed", a.seed);
    art.meta("super_n", a.super_n);
    art.meta("truth_method", "conditional");
    if a.table == 1 {
        budget_warnings(&mut art, MIN_REPS, a.super_n);
    } else {
        art.meta("reps", a.reps);
        art.meta("n", a.n.unwrap_or(if a.table == 5 { 250 } else { 1000 }));
        budget_warnings(&mut art, a.reps, a.super_n);
    }

    match a.table {
        1 => {
            let mut tab =
                Section::new("table1", &["scheme", "gamma", "L", "target", "value", "mc_se", "reference", "abs_diff"]);
            let mut hist = Section::new("true_ps_histogram", &["gamma", "bin_low", "bin_high", "treated", "control"]);
            for &g in &a.gamma {
                let sc = SimulationScenario::main(g, a.seed);
                let t = truth_or_usage(&sc, a.super_n, TruthMethod::ConditionalMean)?;
                for e in &t.entries {
                    for target in Target::ALL {
                        let (v, se) = match target {
                            Target::Mu1 => (e.mu1, e.se_mu1),
                            Target::Mu0 => (e.mu0, e.se_mu0),
                            Target::Delta => (e.delta, e.se_delta),
                        };
                        let mut row =
                            comparison_row(e.scheme, g, e.l, target, Some(v), reference::TABLE1_TRUTH, EST_DP);
                        row.insert(5, Cell::num(se, DIAG_DP));
                        tab.push(row);
                    }
                }
                let h = true_ps_histogram(&sc, a.super_n, HISTOGRAM_BINS).map_err(core)?;
                histogram_rows(&mut hist, vec![Cell::num(g, 2)], &h);
            }
            art.sections.push(tab);
            art.sections.push(hist);
        }
        2..=4 => {
            let runs = studies(a, |_| {})?;
            let mut tab = match a.table {
                2 => Section::new(
                    "table2",
                    &["scheme", "gamma", "L", "target", "truth", "mean_estimate", "bias", "bias_x100"],
                ),
                3 => Section::new("table3", &COMPARISON_COLUMNS),
                _ => Section::new(
                    "table4",
                    &["scheme", "gamma", "L", "target", "value", "mean_se", "reference", "abs_diff"],
                ),
            };
            for (sc, rep) in &runs {
                for c in &rep.cells {
                    let row = match a.table {
                        2 => vec![
                            c.scheme.to_string().into(),
                            Cell::num(sc.gamma, 2),
                            Cell::num(c.l, EST_DP),
                            c.target.name().into(),
                            Cell::num(c.truth, EST_DP),
                            Cell::num(c.mean_estimate, EST_DP),
                            Cell::num(c.bias, DIAG_DP),
                            Cell::num(100.0 * c.bias, RATIO_DP),
                        ],
                        3 => comparison_row(
                            c.scheme,
                            sc.gamma,
                            c.l,
                            c.target,
                            c.relative_efficiency,
                            reference::TABLE3_RELATIVE_EFFICIENCY,
                            RATIO_DP,
                        ),
                        _ => {
                            let mut row = comparison_row(
                                c.scheme,
                                sc.gamma,
                                c.l,
                                c.target,
                                c.coverage,
                                reference::TABLE4_COVERAGE,
                                COVERAGE_DP,
                            );
                            row.insert(5, Cell::opt(c.mean_se, DIAG_DP));
                            row
                        }
                    };
                    tab.push(row);
                }
            }
            art.sections.push(tab);
            art.sections.push(failure_section(&runs.iter().map(|r| &r.1).collect::<Vec<_>>()));
        }
        _ => {
            if a.b < 2 {
                return Err(CliError::Usage(format!("--B must be at least 2, got {}", a.b)));
            }
            art.meta("B", a.b);
            art.meta("outcome_variant", "without_ps");
            let small = |sc: &mut SimulationScenario| {
                sc.n = a.n.unwrap_or(250);
                sc.outcome_variant = OutcomeVariant::WithoutPsTerm;
                sc.schemes = vec![WeightScheme::Overlap, WeightScheme::Iptw];
            };
            let closed = studies(a, small)?;
            let boot = studies(a, |sc| {
                small(sc);
                sc.variance_method = VarianceMethod::Bootstrap { b: a.b };
            })?;
            let mut bias = Section::new("bias_x100", &COMPARISON_COLUMNS);
            let mut re = Section::new("relative_efficiency", &COMPARISON_COLUMNS);
            let mut cov_c = Section::new("coverage_closed_form", &COMPARISON_COLUMNS);
            let mut cov_b = Section::new("coverage_bootstrap", &COMPARISON_COLUMNS);
            for ((sc, rc), (_, rb)) in closed.iter().zip(&boot) {
                for (c, cb) in rc.cells.iter().zip(&rb.cells) {
                    let g = sc.gamma;
                    let bias_x100 = Some(100.0 * c.bias);
                    bias.push(comparison_row(
                        c.scheme,
                        g,
                        c.l,
                        c.target,
                        bias_x100,
                        reference::TABLE5_BIAS_X100,
                        RATIO_DP,
                    ));
                    re.push(comparison_row(
                        c.scheme,
                        g,
                        c.l,
                        c.target,
                        c.relative_efficiency,
                        reference::TABLE5_RELATIVE_EFFICIENCY,
                        RATIO_DP,
                    ));
                    cov_c.push(comparison_row(
                        c.scheme,
                        g,
                        c.l,
                        c.target,
                        c.coverage,
                        reference::TABLE5_COVERAGE_CLOSED_FORM,
                        COVERAGE_DP,
                    ));
                    cov_b.push(comparison_row(
                        cb.scheme,
                        g,
                        cb.l,
                        cb.target,
                        cb.coverage,
                        reference::TABLE5_COVERAGE_BOOTSTRAP,
                        COVERAGE_DP,
                    ));
                }
            }
            art.sections.extend([bias, re, cov_c, cov_b]);
            let mut fails = failure_section(&closed.iter().map(|r| &r.1).collect::<Vec<_>>());
            fails.name = "failures_closed_form".into();
            art.sections.push(fails);
            let mut fails = failure_section(&boot.iter().map(|r| &r.1).collect::<Vec<_>>());
            fails.name = "failures_bootstrap".into();
            art.sections.push(fails);
        }
    }
    Ok(art)
}
