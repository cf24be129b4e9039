use std::fs;

use chrono::NaiveDate;
use proptest::prelude::*;
use surrohpo::experiment::{emit_plot_data, read_table, write_trace, TraceHeader, TIMING_HEADER};
use surrohpo::testbed::local_minima;
use surrohpo::timeseries::{rmse_in_levels, Column};
use surrohpo::{
    build_lag_samples, DailySeries, DimensionSpec, EvaluationRecord, ExpensiveObjective, HpoSettings,
    IntegerDomain, LatticePoint, OptimizationTrace, ScalingSpec, Strategy, SyntheticObjective,
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

fn series_from(gw: Vec<f64>, flow: Vec<f64>) -> DailySeries {
    let n = gw.len();
    let start = NaiveDate::from_ymd_opt(2012, 2, 27).unwrap();
    let dates = (0..n).map(|d| start + chrono::Days::new(d as u64)).collect();
    let temp = (0..n).map(|d| (d as f64).cos()).collect();
    DailySeries::new(
        dates,
        vec![Column::new("temp", temp), Column::new("streamflow", flow), Column::new("gw_x", gw)],
    )
    .unwrap()
}

#[test]
fn groundwater_scaling_endpoints() {
    let s = series_from(vec![3.0, 40.0, 12.0, 43.0], vec![0.0, 1.0, 5.0, 2.0]);
    let scaling = ScalingSpec::fit(&s).unwrap();
    let c = s.column_index("gw_x").unwrap();
    assert_eq!(scaling.invert_groundwater(c, 0.0), 0.0);
    assert_eq!(scaling.invert_groundwater(c, 1.0), 43.0);
    assert!((rmse_in_levels(0.00054, 43.0) - 1.0).abs() < 0.01);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn scaled_values_stay_in_unit_interval(
        gw in prop::collection::vec(0.5f64..100.0, 12..40),
        flow_seed in prop::collection::vec(0.0f64..500.0, 40),
        lag in 1usize..5,
    ) {
        let n = gw.len();
        let mut flow = flow_seed[..n].to_vec();
        flow[0] = 0.0;
        flow[1] = 10.0;
        let s = series_from(gw.clone(), flow);
        prop_assume!(gw.iter().any(|&x| x != gw[0]));
        let scaling = ScalingSpec::fit(&s).unwrap();
        let scaled = scaling.transform(&s).unwrap();
        prop_assert!(scaled.iter().all(|&x| (0.0..=1.0).contains(&x)));
        for (j, col) in s.columns().iter().enumerate() {
            let cs = &scaling.columns[j];
            for &x in &col.values {
                prop_assert!((cs.inverse(cs.forward(x)) - x).abs() <= 1e-10 * x.abs().max(1.0));
            }
        }
        let train = (n - lag - 1) / 2;
        let set = build_lag_samples(&s, &scaling, lag, train, &["x".to_string()]).unwrap();
        prop_assert_eq!(set.labeled_count(), n - lag - 1);
        prop_assert_eq!(set.train_count() + set.test_count(), n - lag - 1);
        prop_assert_eq!(set.input_width(), (lag + 1) * s.variable_count());
    }
}

#[test]
fn quadratic_argmin_by_enumeration() {
    let domain = grid(&[9, 7, 5]);
    let target = LatticePoint(vec![6, 1, 3]);
    let obj = SyntheticObjective::quadratic(&domain, target.clone()).unwrap();
    let argmin = domain
        .points()
        .min_by(|a, b| obj.value_at(a).total_cmp(&obj.value_at(b)))
        .unwrap();
    assert_eq!(argmin, target);
}

#[test]
fn multimodal_optimum_and_local_minima() {
    let domain = grid(&[15, 15]);
    let obj = SyntheticObjective::multimodal(&domain, 7).unwrap();
    let brute = domain
        .points()
        .min_by(|a, b| obj.value_at(a).total_cmp(&obj.value_at(b)))
        .unwrap();
    assert_eq!(obj.value_at(&brute), obj.optimum_value());
    assert!(local_minima(&obj).len() >= 2);
    let again = SyntheticObjective::multimodal(&domain, 7).unwrap();
    assert_eq!(again.optimum(), obj.optimum());
}

#[test]
fn noise_averages_out() {
    let domain = grid(&[5, 5]);
    let sigma = 1.5;
    let obj = SyntheticObjective::quadratic(&domain, LatticePoint(vec![2, 2]))
        .unwrap()
        .with_noise(sigma)
        .unwrap();
    let p = LatticePoint(vec![4, 1]);
    let n = 10_000;
    let mean = (0..n).map(|s| obj.sample_at(&p, s)).sum::<f64>() / n as f64;
    assert!((mean - obj.value_at(&p)).abs() <= 3.0 * sigma / (n as f64).sqrt());

    // replicate means of five draws have variance sigma^2 / 5
    let means: Vec<f64> = (0..1000u64)
        .map(|k| (0..5).map(|r| obj.sample_at(&p, 10_000 + 5 * k + r)).sum::<f64>() / 5.0)
        .collect();
    let m = means.iter().sum::<f64>() / means.len() as f64;
    let var = means.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (means.len() - 1) as f64;
    let expected = sigma * sigma / 5.0;
    assert!((var - expected).abs() <= 0.2 * expected, "variance {var} vs {expected}");
    let raw = domain.to_raw(&p).unwrap();
    assert_eq!(obj.evaluate(&raw, 3).unwrap(), obj.evaluate(&raw, 3).unwrap());
}

fn fixture_trace(losses: &[f64], raw: &[[f64; 2]]) -> OptimizationTrace {
    let records: Vec<EvaluationRecord> = losses
        .iter()
        .zip(raw)
        .enumerate()
        .map(|(i, (&l, r))| EvaluationRecord {
            index: i,
            point: LatticePoint(r.iter().map(|&x| x as usize).collect()),
            raw: r.to_vec(),
            replicate_losses: vec![l],
            replicate_seeds: vec![i as u64],
            failed_replicates: 0,
            mean_loss: l,
            wall_time_seconds: 0.0,
        })
        .collect();
    let mut best = f64::INFINITY;
    let best_so_far = losses
        .iter()
        .map(|&l| {
            best = best.min(l);
            best
        })
        .collect();
    OptimizationTrace {
        strategy: Strategy::Random,
        seed: 0,
        settings: HpoSettings::default(),
        records,
        best_so_far,
        fallbacks: Vec::new(),
    }
}

#[test]
fn plot_tables_from_two_trials() {
    let dir = tempfile::tempdir().unwrap();
    let run = dir.path();
    fs::create_dir_all(run.join("traces")).unwrap();
    fs::create_dir_all(run.join("timing")).unwrap();
    let trials = [
        (fixture_trace(&[1.0, 2.0], &[[2.0, 10.0], [4.0, 30.0]]), ["1", "3"]),
        (fixture_trace(&[3.0, 3.0], &[[6.0, 20.0], [1.0, 0.0]]), ["3", "5"]),
    ];
    for (k, (trace, cumulative)) in trials.iter().enumerate() {
        let header = TraceHeader {
            strategy: Strategy::Random,
            trial: k,
            seed: k as u64,
            objective: "fixture".into(),
            dimensions: vec!["a".into(), "b".into()],
            settings: HpoSettings::default(),
        };
        write_trace(&run.join(format!("traces/random_{k}.jsonl")), &header, trace).unwrap();
        let mut text = TIMING_HEADER.join(",") + "\n";
        for (i, c) in cumulative.iter().enumerate() {
            text += &format!("{i},0,{c}\n");
        }
        fs::write(run.join(format!("timing/random_{k}.csv")), text).unwrap();
    }
    let files = emit_plot_data(run, &run.join("plots")).unwrap();
    let conv = read_table(&files.convergence, &["strategy", "evaluation", "mean", "std"]).unwrap();
    assert_eq!(conv, vec![vec!["random", "0", "2", "1"], vec!["random", "1", "2", "1"]]);
    let time = read_table(
        &files.time,
        &["strategy", "evaluation", "mean_cumulative_seconds", "std_cumulative_seconds"],
    )
    .unwrap();
    assert_eq!(time, vec![vec!["random", "0", "2", "1"], vec!["random", "1", "4", "1"]]);
    let hyper = read_table(&files.hyperparameters, &["strategy", "dimension", "mean", "std"]).unwrap();
    // optima: (2, 10) and the earlier of the tied (6, 20)
    assert_eq!(hyper, vec![vec!["random", "a", "4", "2"], vec!["random", "b", "15", "5"]]);

    fs::write(run.join("timing/random_1.csv"), TIMING_HEADER.join(",") + "\n0,0,3\n").unwrap();
    assert!(emit_plot_data(run, &run.join("plots")).is_err());
}
