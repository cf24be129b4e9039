use std::collections::HashSet;
use std::sync::atomic::{AtomicUsize, Ordering};

use proptest::prelude::*;
use surrohpo::driver::{summarize_series, summarize_trials};
use surrohpo::{
    run_hpo, DimensionSpec, ExpensiveObjective, GaConfig, HpoSettings, IntegerDomain, LatticePoint, Strategy,
    SyntheticObjective,
};

fn grid(lens: &[usize]) -> IntegerDomain {
    IntegerDomain::new(
        lens.iter()
            .enumerate()
            .map(|(i, &n)| DimensionSpec::new(format!("x{i}"), (0..n).map(|v| v as f64).collect()))
            .collect(),
    )
    .unwrap()
}

fn small_ga() -> GaConfig {
    GaConfig {
        population: 20,
        generations: 10,
        ..GaConfig::default()
    }
}

fn settings(budget: usize, replicates: usize) -> HpoSettings {
    HpoSettings {
        budget,
        replicates,
        candidates: 50,
        ga: small_ga(),
        ..HpoSettings::default()
    }
}

fn noisy_quadratic(domain: &IntegerDomain, sigma: f64) -> SyntheticObjective {
    let target = LatticePoint(domain.dims().iter().map(|d| d.len() / 3).collect());
    SyntheticObjective::quadratic(domain, target).unwrap().with_noise(sigma).unwrap()
}

#[test]
fn replicate_mean_is_recomputable_from_seeds() {
    let domain = grid(&[6, 6]);
    let obj = noisy_quadratic(&domain, 0.7);
    let trace = run_hpo(&obj, &domain, Strategy::Rbf, &settings(12, 5), 17).unwrap();
    for r in &trace.records {
        assert_eq!(r.replicate_losses.len(), 5);
        let again: Vec<f64> = r.replicate_seeds.iter().map(|&s| obj.evaluate(&r.raw, s).unwrap()).collect();
        assert_eq!(again, r.replicate_losses);
        assert_eq!(r.mean_loss, again.iter().sum::<f64>() / 5.0);
        let mut reversed = again.clone();
        reversed.reverse();
        assert!((reversed.iter().sum::<f64>() / 5.0 - r.mean_loss).abs() < 1e-12);
    }
}

#[test]
fn strategies_share_the_initial_design() {
    let domain = grid(&[7, 5, 4]);
    let obj = noisy_quadratic(&domain, 0.0);
    let s = settings(10, 1);
    let n0 = s.initial_design_size(&domain);
    let designs: Vec<Vec<LatticePoint>> = Strategy::ALL
        .iter()
        .map(|&st| {
            let t = run_hpo(&obj, &domain, st, &s, 5).unwrap();
            t.records[..n0].iter().map(|r| r.point.clone()).collect()
        })
        .collect();
    assert_eq!(designs[0], designs[1]);
    assert_eq!(designs[0], designs[2]);
}

#[test]
fn gp_loop_can_exhaust_a_small_domain() {
    let domain = grid(&[5, 5]);
    let obj = noisy_quadratic(&domain, 0.0);
    let trace = run_hpo(&obj, &domain, Strategy::Gp, &settings(25, 1), 3).unwrap();
    let seen: HashSet<&LatticePoint> = trace.records.iter().map(|r| &r.point).collect();
    assert_eq!(seen.len(), 25);
    assert_eq!(*trace.best_so_far.last().unwrap(), 0.0);
}

struct Flaky {
    calls: AtomicUsize,
}

impl ExpensiveObjective for Flaky {
    fn evaluate(&self, raw: &[f64], seed: u64) -> surrohpo::Result<f64> {
        self.calls.fetch_add(1, Ordering::Relaxed);
        match seed % 4 {
            0 => Err(surrohpo::Error::Objective("diverged".into())),
            1 => Ok(f64::NAN),
            _ => Ok(raw.iter().sum::<f64>() + (seed % 7) as f64),
        }
    }
}

#[test]
fn failed_replicates_are_retried_then_dropped() {
    let domain = grid(&[4, 4]);
    let obj = Flaky {
        calls: AtomicUsize::new(0),
    };
    let trace = run_hpo(&obj, &domain, Strategy::Random, &settings(6, 8), 11).unwrap();
    let mut failed = 0;
    for r in &trace.records {
        assert_eq!(r.replicate_losses.len() + r.failed_replicates, 8);
        assert!(r.replicate_seeds.iter().all(|s| s % 4 >= 2));
        let mean = r.replicate_losses.iter().sum::<f64>() / r.replicate_losses.len() as f64;
        assert_eq!(r.mean_loss, mean);
        failed += r.failed_replicates;
    }
    let calls = obj.calls.load(Ordering::Relaxed);
    // every replicate runs once; each first-attempt failure runs once more
    assert!(calls > 48 && calls <= 96);
    assert!(failed > 0 && failed < 48);
    assert!(calls - 48 >= failed);
}

#[test]
fn all_replicates_failing_is_an_error() {
    struct Broken;
    impl ExpensiveObjective for Broken {
        fn evaluate(&self, _raw: &[f64], _seed: u64) -> surrohpo::Result<f64> {
            Err(surrohpo::Error::Objective("nope".into()))
        }
    }
    let domain = grid(&[3, 3]);
    assert!(run_hpo(&Broken, &domain, Strategy::Rbf, &settings(4, 2), 1).is_err());
}

#[test]
fn five_trial_summary_matches_recomputation() {
    let domain = grid(&[8, 8]);
    let obj = noisy_quadratic(&domain, 0.3);
    let traces: Vec<_> = (0..5)
        .map(|k| run_hpo(&obj, &domain, Strategy::Random, &settings(15, 2), 100 + k).unwrap())
        .collect();
    let summary = summarize_trials(&traces).unwrap();
    for i in 0..15 {
        let column: Vec<f64> = traces.iter().map(|t| t.best_so_far[i]).collect();
        let mean = column.iter().sum::<f64>() / 5.0;
        let var = column.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / 5.0;
        assert!((summary.mean[i] - mean).abs() < 1e-12);
        assert!((summary.std[i] - var.sqrt()).abs() < 1e-12);
    }
}

#[test]
fn summary_rejects_bad_input() {
    assert!(summarize_series(&[]).is_err());
    assert!(summarize_series(&[vec![1.0, 2.0], vec![1.0]]).is_err());
    let single = summarize_series(&[vec![3.0, 2.0, 2.0]]).unwrap();
    assert_eq!(single.std, vec![0.0; 3]);
}

fn timeless(t: &surrohpo::OptimizationTrace) -> Vec<surrohpo::EvaluationRecord> {
    t.records
        .iter()
        .map(|r| surrohpo::EvaluationRecord {
            wall_time_seconds: 0.0,
            ..r.clone()
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn traces_are_duplicate_free_monotone_and_reproducible(
        seed in 0u64..1_000_000,
        strategy in prop::sample::select(Strategy::ALL.to_vec()),
        noise in prop::sample::select(vec![0.0, 0.5]),
    ) {
        let domain = grid(&[6, 4, 5]);
        let obj = noisy_quadratic(&domain, noise);
        let s = settings(14, 2);
        let a = run_hpo(&obj, &domain, strategy, &s, seed).unwrap();
        let b = run_hpo(&obj, &domain, strategy, &s, seed).unwrap();
        let distinct: HashSet<&LatticePoint> = a.records.iter().map(|r| &r.point).collect();
        prop_assert_eq!(distinct.len(), 14);
        prop_assert!(a.best_so_far.windows(2).all(|w| w[1] <= w[0]));
        prop_assert_eq!(a.best_so_far.last().copied(), a.best().map(|r| r.mean_loss));
        prop_assert_eq!(timeless(&a), timeless(&b));
        prop_assert_eq!(&a.best_so_far, &b.best_so_far);
    }
}
