mod common;

use common::{nelson_aalen_rmst, random_dataset};
use proptest::prelude::*;
use rmcst::estimator::{restricted_mean, weighted_nelson_aalen_raw, ArmRiskTable};
use rmcst::{estimate_schemes, fit_censoring_cox, CensoringFit, Dataset, PipelineOptions, WeightScheme};

/// Arm 1 holds `times`/`events`; arm 0 is a single filler unit.
fn one_arm(times: &[f64], events: &[bool]) -> Dataset {
    let n = times.len();
    let mut treat = vec![1u8; n];
    treat.push(0);
    let mut t = times.to_vec();
    t.push(1.0);
    let mut e = events.to_vec();
    e.push(true);
    Dataset::new(vec![0.0; n + 1], 1, treat, t, e).unwrap()
}

#[test]
fn unit_weights_reduce_to_nelson_aalen_on_all_small_datasets() {
    let none = CensoringFit::none(1);
    for n in 1..=6usize {
        // Distinct but unevenly spaced times.
        let times: Vec<f64> = (1..=n).map(|k| k as f64 + 0.1 * (k * k) as f64).collect();
        for mask in 0..(1u32 << n) {
            let events: Vec<bool> = (0..n).map(|k| mask >> k & 1 == 1).collect();
            let data = one_arm(&times, &events);
            let table = ArmRiskTable::build(&data, &none, 1, f64::INFINITY);
            let haz = weighted_nelson_aalen_raw(&table, &data, &vec![1.0; n + 1]).unwrap();
            for &l in &[0.5, 1.1, 2.3, 4.0, times[n - 1], times[n - 1] + 2.0] {
                let got = restricted_mean(&haz, l);
                let want = nelson_aalen_rmst(&times, &events, l);
                assert!((got - want).abs() < 1e-12, "n={n} mask={mask:b} L={l}: {got} vs {want}");
            }
        }
    }
}

#[test]
fn hajek_scale_invariance() {
    let data = random_dataset(11, 150, 2);
    let cfit = fit_censoring_cox(&data).unwrap();
    let w: Vec<f64> = (0..data.n()).map(|i| 0.2 + (i % 7) as f64 * 0.35).collect();
    for arm in [0u8, 1] {
        let table = ArmRiskTable::build(&data, &cfit, arm, f64::INFINITY);
        let base = weighted_nelson_aalen_raw(&table, &data, &w).unwrap();
        for c in [1e-3, 7.3, 1e6] {
            let scaled: Vec<f64> = w.iter().map(|v| v * c).collect();
            let h = weighted_nelson_aalen_raw(&table, &data, &scaled).unwrap();
            for (a, b) in base.hazard.values().iter().zip(h.hazard.values()) {
                assert!((a - b).abs() <= 1e-12, "c={c}: {a} vs {b}");
            }
            for l in [0.5, 2.0, 5.0] {
                assert!((restricted_mean(&base, l) - restricted_mean(&h, l)).abs() <= 1e-12);
            }
        }
    }
}

#[test]
fn jumps_only_at_included_event_times() {
    let data = random_dataset(12, 200, 2);
    let cfit = fit_censoring_cox(&data).unwrap();
    let w: Vec<f64> = (0..data.n()).map(|i| if i % 4 == 0 { 0.0 } else { 1.0 + (i % 3) as f64 }).collect();
    for arm in [0u8, 1] {
        let table = ArmRiskTable::build(&data, &cfit, arm, f64::INFINITY);
        let haz = weighted_nelson_aalen_raw(&table, &data, &w).unwrap();
        for &t in haz.hazard.knots() {
            assert!(
                (0..data.n()).any(|i| data.treat()[i] == arm && data.event()[i] && w[i] > 0.0 && data.time()[i] == t)
            );
        }
    }
}

#[test]
fn time_rescaling_is_equivariant() {
    let data = random_dataset(13, 300, 2);
    let c = 3.5;
    let scaled = data.rescale_time(c).unwrap();
    let schemes = [WeightScheme::Overlap, WeightScheme::Iptw];
    let opts = PipelineOptions::default();
    let a = estimate_schemes(&data, &schemes, &[1.0, 2.0], true, &opts).unwrap();
    let b = estimate_schemes(&scaled, &schemes, &[c, 2.0 * c], true, &opts).unwrap();
    for (ra, rb) in a.iter().zip(&b) {
        for (x, y) in ra.as_ref().unwrap().iter().zip(rb.as_ref().unwrap()) {
            assert!((c * x.delta.value - y.delta.value).abs() < 1e-9);
            assert!((c * x.delta.se.unwrap() - y.delta.se.unwrap()).abs() < 1e-9);
        }
    }
}

proptest! {
    #[test]
    fn restricted_mean_is_bounded_and_lipschitz(
        seed in 0u64..10_000,
        l1 in 0.01f64..8.0,
        gap in 0.0f64..4.0,
    ) {
        let data = random_dataset(seed, 40, 1);
        // Small arms occasionally give a singular censoring model; that is the Cox fit's concern, not this one's.
        let cfit = fit_censoring_cox(&data);
        prop_assume!(cfit.is_ok());
        let cfit = cfit.unwrap();
        let w: Vec<f64> = (0..data.n()).map(|i| 0.5 + ((i as u64 * 31 + seed) % 5) as f64).collect();
        let l2 = l1 + gap;
        for arm in [0u8, 1] {
            let table = ArmRiskTable::build(&data, &cfit, arm, f64::INFINITY);
            let haz = weighted_nelson_aalen_raw(&table, &data, &w).unwrap();
            let (m1, m2) = (restricted_mean(&haz, l1), restricted_mean(&haz, l2));
            prop_assert!(m1 >= 0.0 && m1 <= l1 + 1e-12);
            prop_assert!(m2 - m1 >= -1e-12);
            prop_assert!(m2 - m1 <= gap + 1e-12);
        }
    }

    #[test]
    fn unit_weights_match_nelson_aalen_on_random_times(
        raw in proptest::collection::vec((0.01f64..10.0, any::<bool>()), 1..25),
        l in 0.1f64..12.0,
    ) {
        let times: Vec<f64> = raw.iter().map(|r| r.0).collect();
        let events: Vec<bool> = raw.iter().map(|r| r.1).collect();
        let data = one_arm(&times, &events);
        let table = ArmRiskTable::build(&data, &CensoringFit::none(1), 1, f64::INFINITY);
        let haz = weighted_nelson_aalen_raw(&table, &data, &vec![1.0; times.len() + 1]).unwrap();
        let (got, want) = (restricted_mean(&haz, l), nelson_aalen_rmst(&times, &events, l));
        prop_assert!((got - want).abs() < 1e-10, "{} vs {}", got, want);
    }
}
