//! The forecasting objective: hyperparameters in, test mean squared error out.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::domain::{DimensionSpec, IntegerDomain};
use crate::driver::ExpensiveObjective;
use crate::error::{Error, Result};
use crate::hydrograph::HydrographSpec;
use crate::mlp::{build_mlp, dynamic_forecast, evaluate_loss, train, Forecast, Mlp, MlpArchitecture, TrainConfig};
use crate::timeseries::{DailySeries, LagSampleSet, Samples, ScalingSpec};

/// Names of the searchable hyperparameters.
pub const HYPERPARAMETER_NAMES: [&str; 6] = ["epochs", "dropout", "batch", "layers", "lag", "nodes"];

/// The full multilayer-perceptron search space (|Ω| = 7,588,800).
pub fn mlp_search_space() -> IntegerDomain {
    IntegerDomain::new(vec![
        DimensionSpec::stepped("epochs", 50.0, 500.0, 50.0).expect("valid range"),
        DimensionSpec::stepped("dropout", 0.0, 0.5, 0.1).expect("valid range"),
        DimensionSpec::stepped("batch", 50.0, 200.0, 5.0).expect("valid range"),
        DimensionSpec::stepped("layers", 1.0, 6.0, 1.0).expect("valid range"),
        DimensionSpec::stepped("lag", 30.0, 365.0, 5.0).expect("valid range"),
        DimensionSpec::stepped("nodes", 5.0, 50.0, 5.0).expect("valid range"),
    ])
    .expect("valid domain")
}

/// A 32-point space small enough to search on a laptop in minutes.
pub fn desk_search_space() -> IntegerDomain {
    IntegerDomain::new(vec![
        DimensionSpec::new("epochs", vec![50.0, 100.0]),
        DimensionSpec::new("dropout", vec![0.0, 0.2]),
        DimensionSpec::new("batch", vec![50.0]),
        DimensionSpec::new("layers", vec![1.0, 2.0]),
        DimensionSpec::new("lag", vec![10.0, 30.0]),
        DimensionSpec::new("nodes", vec![5.0, 10.0]),
    ])
    .expect("valid domain")
}

/// One full hyperparameter assignment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Hyperparameters {
    pub epochs: usize,
    pub dropout: f64,
    pub batch: usize,
    pub layers: usize,
    pub lag: usize,
    pub nodes: usize,
}

impl Default for Hyperparameters {
    fn default() -> Self {
        Self {
            epochs: 100,
            dropout: 0.0,
            batch: 50,
            layers: 1,
            lag: 30,
            nodes: 10,
        }
    }
}

impl Hyperparameters {
    fn set(&mut self, name: &str, value: f64) -> Result<()> {
        let count = || -> Result<usize> {
            if value >= 1.0 && value.fract() == 0.0 {
                Ok(value as usize)
            } else {
                Err(Error::Config(format!("`{name}` must be a positive integer, got {value}")))
            }
        };
        match name {
            "epochs" => self.epochs = count()?,
            "batch" => self.batch = count()?,
            "layers" => self.layers = count()?,
            "lag" => self.lag = count()?,
            "nodes" => self.nodes = count()?,
            "dropout" => {
                if !(0.0..1.0).contains(&value) {
                    return Err(Error::Config(format!("dropout {value} outside [0, 1)")));
                }
                self.dropout = value;
            }
            other => return Err(Error::Config(format!("unknown hyperparameter `{other}`"))),
        }
        Ok(())
    }

    /// Fills the dimensions of `domain` from `raw`, keeping `self` elsewhere.
    pub fn with_raw(&self, domain: &IntegerDomain, raw: &[f64]) -> Result<Self> {
        if raw.len() != domain.dim() {
            return Err(Error::DimensionMismatch {
                expected: domain.dim(),
                got: raw.len(),
            });
        }
        let mut hp = self.clone();
        for (d, &x) in domain.dims().iter().zip(raw) {
            hp.set(&d.name, x)?;
        }
        Ok(hp)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum DataSource {
    Csv { path: PathBuf },
    Synthetic(HydrographSpec),
}

impl DataSource {
    pub fn load(&self) -> Result<DailySeries> {
        match self {
            DataSource::Csv { path } => DailySeries::load(path),
            DataSource::Synthetic(spec) => spec.generate(),
        }
    }
}

/// Everything needed to build the forecasting objective.
#[derive(Debug, Clone, PartialEq)]
pub struct HpoProblemSpec {
    pub data: DataSource,
    /// Target wells; empty means every groundwater column.
    pub wells: Vec<String>,
    /// Number of training samples, the same for every lag.
    pub train_count: usize,
    pub domain: IntegerDomain,
    /// Values used for hyperparameters the domain does not search.
    pub fixed: Hyperparameters,
}

/// The forecasting objective over a loaded series.
#[derive(Debug, Clone)]
pub struct MlpObjective {
    series: DailySeries,
    scaling: ScalingSpec,
    scaled: Vec<f64>,
    domain: IntegerDomain,
    targets: Vec<usize>,
    train_count: usize,
    fixed: Hyperparameters,
}

pub fn make_objective(spec: &HpoProblemSpec) -> Result<MlpObjective> {
    MlpObjective::new(spec.data.load()?, spec)
}

impl MlpObjective {
    pub fn new(series: DailySeries, spec: &HpoProblemSpec) -> Result<Self> {
        for d in spec.domain.dims() {
            if !HYPERPARAMETER_NAMES.contains(&d.name.as_str()) {
                return Err(Error::Config(format!(
                    "domain dimension `{}` is not one of {HYPERPARAMETER_NAMES:?}",
                    d.name
                )));
            }
        }
        let scaling = ScalingSpec::fit(&series)?;
        let scaled = scaling.transform(&series)?;
        let targets = series.well_columns(&spec.wells)?;
        let obj = Self {
            series,
            scaling,
            scaled,
            domain: spec.domain.clone(),
            targets,
            train_count: spec.train_count,
            fixed: spec.fixed.clone(),
        };
        // every point must map to valid hyperparameters and a usable split
        let mut lags = vec![obj.fixed.lag];
        for (d, dim) in obj.domain.dims().iter().enumerate() {
            let probe: Vec<f64> = obj.domain.dims().iter().map(|x| x.values[0]).collect();
            for &v in &dim.values {
                let mut raw = probe.clone();
                raw[d] = v;
                let hp = obj.fixed.with_raw(&obj.domain, &raw)?;
                lags.push(hp.lag);
            }
        }
        for lag in lags {
            obj.samples(lag)?;
        }
        Ok(obj)
    }

    pub fn series(&self) -> &DailySeries {
        &self.series
    }

    pub fn scaling(&self) -> &ScalingSpec {
        &self.scaling
    }

    pub fn domain(&self) -> &IntegerDomain {
        &self.domain
    }

    pub fn target_columns(&self) -> &[usize] {
        &self.targets
    }

    pub fn hyperparameters(&self, raw: &[f64]) -> Result<Hyperparameters> {
        self.fixed.with_raw(&self.domain, raw)
    }

    pub fn samples(&self, lag: usize) -> Result<LagSampleSet> {
        LagSampleSet::from_scaled(
            &self.scaled,
            self.series.variable_count(),
            lag,
            self.train_count,
            self.targets.clone(),
        )
    }

    pub fn architecture(&self, hp: &Hyperparameters) -> MlpArchitecture {
        MlpArchitecture {
            input_width: (hp.lag + 1) * self.series.variable_count(),
            hidden_layers: hp.layers,
            nodes_per_layer: hp.nodes,
            output_width: self.targets.len(),
            dropout: hp.dropout,
        }
    }

    /// Trains on `samples` with initialization and shuffling seeded by `seed`.
    pub fn fit(&self, hp: &Hyperparameters, samples: Samples<'_>, seed: u64) -> Result<Mlp> {
        let model = build_mlp(self.architecture(hp), seed)?;
        train(model, samples, &TrainConfig::new(hp.epochs, hp.batch, seed))
    }

    /// Test-split mean squared error of one seeded training run.
    pub fn test_loss(&self, hp: &Hyperparameters, seed: u64) -> Result<f64> {
        let samples = self.samples(hp.lag)?;
        let model = self.fit(hp, samples.train(), seed)?;
        Ok(evaluate_loss(&model, samples.test()))
    }

    /// Test-split error of predicting each day's level by the previous day's.
    pub fn persistence_mse(&self, lag: usize) -> Result<f64> {
        persistence_mse(&self.samples(lag)?.test(), self.series.variable_count(), &self.targets)
    }

    /// Retrains on every sample whose target precedes the last `horizon`
    /// days, then forecasts those days dynamically.
    pub fn out_of_sample_run(&self, hp: &Hyperparameters, horizon: usize, seed: u64) -> Result<OutOfSample> {
        let v = self.series.variable_count();
        let days = self.series.len();
        if horizon + hp.lag + 2 > days {
            return Err(Error::Series(format!("horizon {horizon} leaves no training data")));
        }
        let start = days - horizon;
        // windows whose target day is before `start`
        let available = start - hp.lag - 1;
        let all = LagSampleSet::from_scaled(&self.scaled, v, hp.lag, 1, self.targets.clone())?;
        let labeled = all.labeled();
        let train_rows = Samples::new(
            &labeled.inputs[..available * labeled.input_width],
            &labeled.targets[..available * labeled.output_width],
            labeled.input_width,
            labeled.output_width,
        );
        let model = self.fit(hp, train_rows, seed)?;
        if horizon == 0 {
            return Ok(OutOfSample {
                forecast: Forecast {
                    start,
                    normalized: Vec::new(),
                    levels: Vec::new(),
                    windows: Vec::new(),
                },
                truth: Vec::new(),
                mse: None,
                rmse_levels: Vec::new(),
                naive_mse: None,
                persistence_mse: None,
                correlation: Vec::new(),
            });
        }
        let forecast = dynamic_forecast(&model, &self.series, &self.scaling, &self.targets, start, horizon)?;
        let truth: Vec<Vec<f64>> = (start..days)
            .map(|d| self.targets.iter().map(|&c| self.scaled[d * v + c]).collect())
            .collect();
        let w = self.targets.len();
        let mut per_well = vec![0.0; w];
        let mut naive = 0.0;
        let mut persistence = 0.0;
        for (k, (pred, obs)) in forecast.normalized.iter().zip(&truth).enumerate() {
            for j in 0..w {
                let c = self.targets[j];
                per_well[j] += (pred[j] - obs[j]).powi(2);
                naive += (self.scaled[(start - 1) * v + c] - obs[j]).powi(2);
                persistence += (self.scaled[(start + k - 1) * v + c] - obs[j]).powi(2);
            }
        }
        let denom = (horizon * w) as f64;
        let mse = per_well.iter().sum::<f64>() / denom;
        let rmse_levels = per_well
            .iter()
            .zip(&self.targets)
            .map(|(s, &c)| (s / horizon as f64).sqrt() * self.scaling.range(c))
            .collect();
        let correlation = (0..w)
            .map(|j| {
                let a: Vec<f64> = forecast.normalized.iter().map(|r| r[j]).collect();
                let b: Vec<f64> = truth.iter().map(|r| r[j]).collect();
                pearson(&a, &b)
            })
            .collect();
        Ok(OutOfSample {
            forecast,
            truth,
            mse: Some(mse),
            rmse_levels,
            naive_mse: Some(naive / denom),
            persistence_mse: Some(persistence / denom),
            correlation,
        })
    }
}

impl ExpensiveObjective for MlpObjective {
    fn evaluate(&self, raw: &[f64], seed: u64) -> Result<f64> {
        let hp = self.hyperparameters(raw)?;
        self.test_loss(&hp, seed)
    }

    fn describe(&self) -> String {
        format!(
            "mlp forecast, {} days, {} target well(s), {} training samples",
            self.series.len(),
            self.targets.len(),
            self.train_count
        )
    }
}

/// Result of a dynamic forecast over held-back days.
#[derive(Debug, Clone)]
pub struct OutOfSample {
    pub forecast: Forecast,
    /// Normalized observed levels over the horizon.
    pub truth: Vec<Vec<f64>>,
    /// Normalized mean squared error; absent for an empty horizon.
    pub mse: Option<f64>,
    /// Root mean squared error per well in level units.
    pub rmse_levels: Vec<f64>,
    /// Error of holding the last observed level for the whole horizon.
    pub naive_mse: Option<f64>,
    /// Error of predicting each day by the previous observed day.
    pub persistence_mse: Option<f64>,
    /// Pearson correlation of forecast and truth per well.
    pub correlation: Vec<f64>,
}

/// Mean squared error of "tomorrow equals today" over lag samples: each
/// target is predicted by the same column on the last day of its window.
pub fn persistence_mse(samples: &Samples<'_>, variables: usize, targets: &[usize]) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::Series("no samples".into()));
    }
    let last_day = samples.input_width - variables;
    let mut sse = 0.0;
    for i in 0..samples.len() {
        let x = samples.input(i);
        for (&c, &t) in targets.iter().zip(samples.target(i)) {
            sse += (x[last_day + c] - t).powi(2);
        }
    }
    Ok(sse / (samples.len() * targets.len()) as f64)
}

fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma).powi(2);
        sbb += (y - mb).powi(2);
    }
    sab / (saa * sbb).sqrt()
}
