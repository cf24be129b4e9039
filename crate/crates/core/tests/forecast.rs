use chrono::NaiveDate;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use surrohpo::hydrograph::{HydrographSpec, WellSpec};
use surrohpo::mlp::{dynamic_forecast, dynamic_forecast_traced};
use surrohpo::objective::{desk_search_space, DataSource, HpoProblemSpec, Hyperparameters, MlpObjective};
use surrohpo::timeseries::Column;
use surrohpo::{
    build_mlp, run_hpo, DailySeries, DimensionSpec, ExpensiveObjective, HpoSettings, IntegerDomain, Mlp,
    MlpArchitecture, ScalingSpec, Strategy,
};

fn two_well_series(days: usize) -> DailySeries {
    HydrographSpec {
        days,
        wells: vec![
            WellSpec {
                name: "a".into(),
                ..WellSpec::default()
            },
            WellSpec {
                name: "b".into(),
                base_level: 25.0,
                ..WellSpec::default()
            },
        ],
        ..HydrographSpec::default()
    }
    .generate()
    .unwrap()
}

fn random_model(series: &DailySeries, lag: usize, outputs: usize, seed: u64) -> Mlp {
    let arch = MlpArchitecture {
        input_width: (lag + 1) * series.variable_count(),
        hidden_layers: 2,
        nodes_per_layer: 6,
        output_width: outputs,
        dropout: 0.0,
    };
    let mut m = build_mlp(arch, seed).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let p: Vec<f64> = m.params().iter().map(|_| rng.random_range(-0.4..0.4)).collect();
    m.set_params(&p);
    m
}

#[test]
fn first_forecast_day_is_a_static_prediction() {
    let series = two_well_series(200);
    let scaling = ScalingSpec::fit(&series).unwrap();
    let targets = series.well_columns(&["a".into(), "b".into()]).unwrap();
    let lag = 4;
    let model = random_model(&series, lag, 2, 1);
    let start = 120;
    let f = dynamic_forecast(&model, &series, &scaling, &targets, start, 1).unwrap();
    let v = series.variable_count();
    let scaled = scaling.transform(&series).unwrap();
    let window = &scaled[(start - 1 - lag) * v..(start - 1 - lag) * v + (lag + 1) * v];
    assert_eq!(f.normalized[0], model.predict(window));
    for (j, &c) in targets.iter().enumerate() {
        assert!((f.levels[0][j] - scaling.invert_groundwater(c, f.normalized[0][j])).abs() < 1e-12);
    }
}

#[test]
fn constant_model_gives_flat_forecast() {
    let series = two_well_series(200);
    let scaling = ScalingSpec::fit(&series).unwrap();
    let targets = series.well_columns(&["a".into()]).unwrap();
    let mut model = random_model(&series, 3, 1, 2);
    let mut p = vec![0.0; model.params().len()];
    *p.last_mut().unwrap() = 0.7;
    model.set_params(&p);
    let f = dynamic_forecast(&model, &series, &scaling, &targets, 50, 30).unwrap();
    let level = scaling.invert_groundwater(targets[0], 0.7);
    assert_eq!(f.levels.len(), 30);
    assert!(f.levels.iter().all(|l| (l[0] - level).abs() < 1e-12));
}

#[test]
fn feedback_replays_model_outputs() {
    let series = two_well_series(200);
    let scaling = ScalingSpec::fit(&series).unwrap();
    let targets = series.well_columns(&["b".into()]).unwrap();
    let other = series.well_columns(&["a".into()]).unwrap()[0];
    let lag = 5;
    let model = random_model(&series, lag, 1, 3);
    let (start, horizon) = (100, 12);
    let f = dynamic_forecast_traced(&model, &series, &scaling, &targets, start, horizon).unwrap();
    let v = series.variable_count();
    let scaled = scaling.transform(&series).unwrap();
    assert_eq!(f.windows.len(), horizon);
    for (k, window) in f.windows.iter().enumerate() {
        let day = start + k;
        assert_eq!(model.predict(window), f.normalized[k]);
        for slot in 0..=lag {
            let src = day - 1 - lag + slot;
            let row = &window[slot * v..(slot + 1) * v];
            for c in 0..v {
                let expected = if c == targets[0] && src >= start {
                    f.normalized[src - start][0]
                } else {
                    scaled[src * v + c]
                };
                assert_eq!(row[c], expected, "day {day} slot {slot} column {c}");
            }
            assert_eq!(row[other], scaled[src * v + other]);
        }
    }
}

#[test]
fn forecast_needs_history_and_exogenous_data() {
    let series = two_well_series(120);
    let scaling = ScalingSpec::fit(&series).unwrap();
    let targets = series.well_columns(&["a".into()]).unwrap();
    let model = random_model(&series, 5, 1, 4);
    assert!(dynamic_forecast(&model, &series, &scaling, &targets, 5, 3).is_err());
    assert!(dynamic_forecast(&model, &series, &scaling, &targets, 6, 3).is_ok());
    assert!(dynamic_forecast(&model, &series, &scaling, &targets, 110, 11).is_err());
    assert!(dynamic_forecast(&model, &series, &scaling, &targets, 110, 10).is_ok());
    let wrong = series.well_columns(&["a".into(), "b".into()]).unwrap();
    assert!(dynamic_forecast(&model, &series, &scaling, &wrong, 50, 3).is_err());
}

fn problem(domain: IntegerDomain, train_count: usize) -> HpoProblemSpec {
    HpoProblemSpec {
        data: DataSource::Synthetic(HydrographSpec::default()),
        wells: Vec::new(),
        train_count,
        domain,
        fixed: Hyperparameters::default(),
    }
}

/// Level driven by a known linear recurrence in its own past and rainfall.
fn linear_series(days: usize) -> DailySeries {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let start = NaiveDate::from_ymd_opt(2015, 1, 1).unwrap();
    let dates: Vec<NaiveDate> = (0..days).map(|d| start + chrono::Days::new(d as u64)).collect();
    let temp: Vec<f64> = (0..days).map(|d| 15.0 + 8.0 * (d as f64 * 0.0172).sin()).collect();
    let precip: Vec<f64> = (0..days).map(|_| rng.random_range(0.0..1.0)).collect();
    let mut gw = vec![10.0];
    for t in 1..days {
        gw.push(0.8 * gw[t - 1] + 3.0 * precip[t - 1] + 1.0);
    }
    DailySeries::new(
        dates,
        vec![
            Column::new("temp", temp),
            Column::new("precip", precip),
            Column::new("gw_lin", gw),
        ],
    )
    .unwrap()
}

#[test]
fn linear_dynamics_are_learnable() {
    let domain = IntegerDomain::new(vec![
        DimensionSpec::new("epochs", vec![100.0, 200.0]),
        DimensionSpec::new("lag", vec![1.0, 2.0]),
        DimensionSpec::new("nodes", vec![10.0]),
    ])
    .unwrap();
    let obj = MlpObjective::new(linear_series(400), &problem(domain.clone(), 250)).unwrap();
    let before = obj.series().clone();
    let losses: Vec<f64> = domain
        .points()
        .map(|p| obj.evaluate(&domain.to_raw(&p).unwrap(), 5).unwrap())
        .collect();
    let best = losses.iter().cloned().fold(f64::INFINITY, f64::min);
    assert!(best <= 0.01, "losses {losses:?}");
    assert_eq!(obj.series(), &before);
    let raw = domain.to_raw(&domain.point_at(0)).unwrap();
    assert_eq!(obj.evaluate(&raw, 9).unwrap().to_bits(), obj.evaluate(&raw, 9).unwrap().to_bits());
}

#[test]
fn architecture_matches_every_desk_point() {
    let domain = desk_search_space();
    let obj = MlpObjective::new(two_well_series(600), &problem(domain.clone(), 300)).unwrap();
    let v = obj.series().variable_count();
    for p in domain.points() {
        let hp = obj.hyperparameters(&domain.to_raw(&p).unwrap()).unwrap();
        let arch = obj.architecture(&hp);
        assert_eq!(arch.input_width, (hp.lag + 1) * v);
        assert_eq!(arch.output_width, 2);
        assert_eq!(arch.hidden_layers, hp.layers);
    }
}

#[test]
fn empty_horizon_has_no_error_value() {
    let obj = MlpObjective::new(two_well_series(300), &problem(desk_search_space(), 150)).unwrap();
    let hp = Hyperparameters {
        epochs: 5,
        ..Hyperparameters::default()
    };
    let out = obj.out_of_sample_run(&hp, 0, 1).unwrap();
    assert!(out.mse.is_none() && out.persistence_mse.is_none());
    assert!(out.forecast.levels.is_empty());
}

#[test]
fn tuned_model_tracks_a_seasonal_year() {
    let series = HydrographSpec::default().generate().unwrap();
    let domain = desk_search_space();
    let obj = MlpObjective::new(series, &problem(domain.clone(), 1000)).unwrap();
    let settings = HpoSettings {
        budget: 8,
        replicates: 1,
        ..HpoSettings::default()
    };
    let trace = run_hpo(&obj, &domain, Strategy::Rbf, &settings, 2021).unwrap();
    let hp = obj.hyperparameters(&trace.best().unwrap().raw).unwrap();
    let out = obj.out_of_sample_run(&hp, 365, 7).unwrap();
    assert_eq!(out.forecast.levels.len(), 365);
    assert!(out.correlation[0] >= 0.8, "correlation {:?} for {hp:?}", out.correlation);
    let mse = out.mse.unwrap();
    let recomputed = out
        .forecast
        .normalized
        .iter()
        .zip(&out.truth)
        .map(|(p, t)| (p[0] - t[0]).powi(2))
        .sum::<f64>()
        / 365.0;
    assert!((mse - recomputed).abs() < 1e-12);
}
