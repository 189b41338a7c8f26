use rmcst::sim::{compute_truth, generate_dataset, run_study, Design, SimulationScenario, Target, TruthMethod};
use rmcst::WeightScheme;

#[test]
fn calibrated_intercept_is_stable_across_seeds() {
    let b: Vec<f64> = (1..=3).map(|s| Design::new(&SimulationScenario::main(5.0, s)).unwrap().intercept).collect();
    for v in &b[1..] {
        assert!((v - b[0]).abs() < 0.01, "{b:?}");
    }
}

#[test]
fn censoring_fraction_matches_its_conditional_expectation() {
    for gamma in [1.0, 5.0] {
        let design = Design::new(&SimulationScenario::main(gamma, 1)).unwrap();
        let sim = generate_dataset(&design, 1_000_000, 1, 0);
        let d = &sim.data;
        let n = d.n() as f64;
        let observed = d.event().iter().filter(|&&e| !e).count() as f64 / n;
        // P(C < T | X, A) for competing exponentials.
        let expected = (0..d.n())
            .map(|i| {
                let x: [f64; 6] = d.row(i).try_into().unwrap();
                let (m1, m0) = design.outcome_log_rates(&x);
                let rc = design.censoring_variant.log_rate(&x).exp();
                let rt = if d.treat()[i] == 1 { m1.exp() } else { m0.exp() };
                rc / (rc + rt)
            })
            .sum::<f64>()
            / n;
        assert!((observed - expected).abs() < 0.002, "gamma {gamma}: {observed} vs {expected}");
    }
}

#[test]
fn overlap_weighted_treated_mean_at_two() {
    let design = Design::new(&SimulationScenario::main(1.0, 1)).unwrap();
    let sim = generate_dataset(&design, 400_000, 2, 0);
    let (mut num, mut den) = (0.0, 0.0);
    for (t, e) in sim.t1.iter().zip(&sim.true_ps) {
        let h = e * (1.0 - e);
        num += h * t.min(2.0);
        den += h;
    }
    assert!((num / den - 1.026).abs() < 0.01, "{}", num / den);
}

#[test]
fn truth_spot_cells() {
    let t3 = compute_truth(&SimulationScenario::main(3.0, 1), 1_000_000, TruthMethod::ConditionalMean).unwrap();
    assert!((t3.get(WeightScheme::Overlap, 10.0).unwrap().delta - -5.404).abs() < 0.02);

    let t5 = compute_truth(&SimulationScenario::main(5.0, 1), 1_000_000, TruthMethod::ConditionalMean).unwrap();
    let iptw = t5.get(WeightScheme::Iptw, 2.0).unwrap();
    assert!((iptw.mu1 - 1.012).abs() < 0.02);
    for q in [0.025, 0.05, 0.1] {
        for l in [2.0, 5.0, 10.0] {
            let tr = t5.get(WeightScheme::Truncate { q }, l).unwrap();
            let ip = t5.get(WeightScheme::Iptw, l).unwrap();
            assert_eq!((tr.mu1, tr.mu0), (ip.mu1, ip.mu0));
        }
    }
}

fn small(gamma: f64, reps: usize) -> SimulationScenario {
    SimulationScenario {
        n: 200,
        reps,
        schemes: vec![WeightScheme::Overlap, WeightScheme::Iptw, WeightScheme::SymmetricTrim { alpha: 0.1 }],
        calibration_n: 50_000,
        ..SimulationScenario::main(gamma, 4)
    }
}

#[test]
fn study_is_identical_across_thread_pools() {
    let sc = small(3.0, 6);
    let truth = compute_truth(&sc, 20_000, TruthMethod::ConditionalMean).unwrap();
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| run_study(&sc, &truth).unwrap())
    };
    assert_eq!(run(1), run(4));
}

#[test]
fn single_replication_covers_or_misses() {
    let sc = small(1.0, 1);
    let truth = compute_truth(&sc, 20_000, TruthMethod::ConditionalMean).unwrap();
    let report = run_study(&sc, &truth).unwrap();
    for c in &report.cells {
        if c.successes == 1 {
            let cov = c.coverage.unwrap();
            assert!(cov == 0.0 || cov == 100.0, "{cov}");
        }
    }
    assert!(report.cell(WeightScheme::Overlap, 2.0, Target::Delta).is_some());
}
