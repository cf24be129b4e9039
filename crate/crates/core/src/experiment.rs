//! Multi-trial comparisons and their output files.
//!
//! # Configuration
//!
//! An experiment is described by a TOML file:
//!
//! ```toml
//! seed = 7                          # master seed
//! trials = 5                        # default 5
//! strategies = ["rbf", "gp", "random"]
//! out = "runs/quadratic"            # optional, overridden by --out
//!
//! [hpo]                             # every key optional
//! budget = 50
//! n0 = 4                            # default: dimension + 1
//! replicates = 5
//! candidates = 500
//! parallel_replicates = false
//! [hpo.ga]
//! generations = 100
//! population = 100
//!
//! [objective]
//! kind = "quadratic"                # or "multimodal", "mlp"
//! target = [5.0, 5.0, 5.0]          # raw values
//! noise = 0.0
//!
//! [[domain]]                        # explicit values ...
//! name = "x"
//! values = [0.0, 1.0, 2.0]
//! [[domain]]                        # ... or an arithmetic range
//! name = "y"
//! start = 0.0
//! stop = 10.0
//! step = 1.0
//! ```
//!
//! Instead of `[[domain]]` tables, `domain_preset = "mlp"` selects the full
//! perceptron space and `domain_preset = "mlp-desk"` the 32-point one.
//!
//! An `mlp` objective takes `train_count`, optional `wells`, optional
//! `horizon` (days forecast out of sample after the search), an optional
//! `[objective.fixed]` table with values for unsearched hyperparameters, and
//! an `[objective.data]` table that is either `kind = "csv"` with a `path` or
//! `kind = "synthetic"` with hydrograph parameters.
//!
//! # Seeds
//!
//! Trial `k` uses seed `splitmix(master, k)` for every strategy, so all
//! strategies start from the same initial design and share replicate seeds;
//! only the acquisition stream mixes in the strategy.
//!
//! # Output layout
//!
//! ```text
//! <out>/config.toml                  resolved configuration
//! <out>/traces/<strategy>_<k>.jsonl   one JSON object per line
//! <out>/timing/<strategy>_<k>.csv     evaluation,seconds,cumulative_seconds
//! <out>/summary_<strategy>.csv        evaluation,mean_best,std_best,
//!                                     mean_cumulative_seconds,std_cumulative_seconds
//! <out>/best_<strategy>.csv           trial,<dimensions...>,mean_loss
//! <out>/baseline.csv                  (mlp) strategy,trial,lag,best_mse,
//!                                     persistence_mse,normalized_rmse
//! <out>/forecast_<strategy>.csv       (mlp with horizon) date,well,predicted,observed
//! ```
//!
//! Trace lines are tagged by `type`: one `header`, then `evaluation` lines
//! in order, then any `fallback` lines. Wall-clock times live only in the
//! timing files, so traces are byte-identical across reruns.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::domain::{DimensionSpec, IntegerDomain};
use crate::driver::{
    run_hpo, summarize_series, EvaluationRecord, ExpensiveObjective, Fallback, HpoSettings, OptimizationTrace,
    Strategy,
};
use crate::error::{Error, Result};
use crate::objective::{desk_search_space, mlp_search_space, DataSource, HpoProblemSpec, Hyperparameters, MlpObjective};
use crate::seed::derive_seed;
use crate::testbed::SyntheticObjective;

pub const CONVERGENCE_HEADER: [&str; 4] = ["strategy", "evaluation", "mean", "std"];
pub const TIME_HEADER: [&str; 4] = ["strategy", "evaluation", "mean_cumulative_seconds", "std_cumulative_seconds"];
pub const HYPERPARAMETER_HEADER: [&str; 4] = ["strategy", "dimension", "mean", "std"];
pub const SUMMARY_HEADER: [&str; 5] = [
    "evaluation",
    "mean_best",
    "std_best",
    "mean_cumulative_seconds",
    "std_cumulative_seconds",
];
pub const TIMING_HEADER: [&str; 3] = ["evaluation", "seconds", "cumulative_seconds"];

fn default_trials() -> usize {
    5
}

fn default_strategies() -> Vec<Strategy> {
    Strategy::ALL.to_vec()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default = "default_strategies")]
    pub strategies: Vec<Strategy>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub hpo: HpoSettings,
    pub objective: ObjectiveConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domain_preset: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub domain: Vec<DimensionConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DimensionConfig {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stop: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step: Option<f64>,
}

impl DimensionConfig {
    fn build(&self, path: &str) -> Result<DimensionSpec> {
        match (&self.values, self.start, self.stop, self.step) {
            (Some(v), None, None, None) => Ok(DimensionSpec::new(&self.name, v.clone())),
            (None, Some(a), Some(b), Some(s)) => DimensionSpec::stepped(&self.name, a, b, s),
            _ => Err(Error::Config(format!(
                "{path}: give either `values` or all of `start`, `stop`, `step`"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ObjectiveConfig {
    Quadratic {
        target: Vec<f64>,
        #[serde(default)]
        noise: f64,
    },
    Multimodal {
        #[serde(default)]
        seed: u64,
        #[serde(default)]
        noise: f64,
    },
    Mlp(MlpObjectiveConfig),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MlpObjectiveConfig {
    pub data: DataSource,
    #[serde(default)]
    pub wells: Vec<String>,
    pub train_count: usize,
    #[serde(default)]
    pub fixed: Hyperparameters,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<usize>,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path)?;
        Self::from_toml(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn domain(&self) -> Result<IntegerDomain> {
        match (&self.domain_preset, self.domain.is_empty()) {
            (Some(p), true) => match p.as_str() {
                "mlp" => Ok(mlp_search_space()),
                "mlp-desk" => Ok(desk_search_space()),
                other => Err(Error::Config(format!(
                    "domain_preset: unknown preset `{other}` (expected `mlp` or `mlp-desk`)"
                ))),
            },
            (None, false) => {
                let dims = self
                    .domain
                    .iter()
                    .enumerate()
                    .map(|(i, d)| d.build(&format!("domain[{i}]")))
                    .collect::<Result<Vec<_>>>()?;
                IntegerDomain::new(dims).map_err(|e| Error::Config(format!("domain: {e}")))
            }
            (Some(_), false) => Err(Error::Config("domain: give `domain_preset` or `[[domain]]`, not both".into())),
            (None, true) => Err(Error::Config("domain: missing `[[domain]]` tables or `domain_preset`".into())),
        }
    }

    /// Checks every field that can be checked without running anything.
    pub fn validate(&self) -> Result<IntegerDomain> {
        if self.trials == 0 {
            return Err(Error::Config("trials: must be at least 1".into()));
        }
        if self.strategies.is_empty() {
            return Err(Error::Config("strategies: must not be empty".into()));
        }
        for (i, s) in self.strategies.iter().enumerate() {
            if self.strategies[..i].contains(s) {
                return Err(Error::Config(format!("strategies[{i}]: `{s}` listed twice")));
            }
        }
        let domain = self.domain()?;
        self.hpo.validate(&domain).map_err(|e| Error::Config(format!("hpo: {e}")))?;
        match &self.objective {
            ObjectiveConfig::Quadratic { target, noise } => {
                domain
                    .from_raw(target)
                    .map_err(|e| Error::Config(format!("objective.target: {e}")))?;
                if !(*noise >= 0.0) {
                    return Err(Error::Config("objective.noise: must be >= 0".into()));
                }
            }
            ObjectiveConfig::Multimodal { noise, .. } => {
                if !(*noise >= 0.0) {
                    return Err(Error::Config("objective.noise: must be >= 0".into()));
                }
            }
            ObjectiveConfig::Mlp(m) => {
                if m.train_count == 0 {
                    return Err(Error::Config("objective.train_count: must be at least 1".into()));
                }
                if let DataSource::Synthetic(h) = &m.data {
                    h.validate().map_err(|e| Error::Config(format!("objective.data: {e}")))?;
                }
            }
        }
        Ok(domain)
    }
}

/// A ready-to-evaluate objective.
#[derive(Debug, Clone)]
pub enum BuiltObjective {
    Synthetic(SyntheticObjective),
    Mlp(Box<MlpObjective>),
}

impl ExpensiveObjective for BuiltObjective {
    fn evaluate(&self, raw: &[f64], seed: u64) -> Result<f64> {
        match self {
            BuiltObjective::Synthetic(o) => o.evaluate(raw, seed),
            BuiltObjective::Mlp(o) => o.evaluate(raw, seed),
        }
    }

    fn describe(&self) -> String {
        match self {
            BuiltObjective::Synthetic(o) => o.describe(),
            BuiltObjective::Mlp(o) => o.describe(),
        }
    }
}

pub fn build_objective(cfg: &ExperimentConfig, domain: &IntegerDomain) -> Result<BuiltObjective> {
    Ok(match &cfg.objective {
        ObjectiveConfig::Quadratic { target, noise } => {
            let target = domain.from_raw(target)?;
            BuiltObjective::Synthetic(SyntheticObjective::quadratic(domain, target)?.with_noise(*noise)?)
        }
        ObjectiveConfig::Multimodal { seed, noise } => {
            BuiltObjective::Synthetic(SyntheticObjective::multimodal(domain, *seed)?.with_noise(*noise)?)
        }
        ObjectiveConfig::Mlp(m) => {
            let spec = HpoProblemSpec {
                data: m.data.clone(),
                wells: m.wells.clone(),
                train_count: m.train_count,
                domain: domain.clone(),
                fixed: m.fixed.clone(),
            };
            BuiltObjective::Mlp(Box::new(MlpObjective::new(spec.data.load()?, &spec)?))
        }
    })
}

/// Seed of trial `trial`, shared by every strategy.
pub fn trial_seed(master: u64, trial: usize) -> u64 {
    derive_seed(master, &[trial as u64])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceHeader {
    pub strategy: Strategy,
    pub trial: usize,
    pub seed: u64,
    pub objective: String,
    pub dimensions: Vec<String>,
    pub settings: HpoSettings,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEvaluation {
    #[serde(flatten)]
    pub record: EvaluationRecord,
    pub best_so_far: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum TraceLine {
    Header(TraceHeader),
    Evaluation(TraceEvaluation),
    Fallback(Fallback),
}

/// A trace as read back from disk.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceFile {
    pub header: TraceHeader,
    pub evaluations: Vec<TraceEvaluation>,
    pub fallbacks: Vec<Fallback>,
}

impl TraceFile {
    pub fn best_so_far(&self) -> Vec<f64> {
        self.evaluations.iter().map(|e| e.best_so_far).collect()
    }

    /// Earliest evaluation with the smallest mean loss.
    pub fn best(&self) -> Option<&TraceEvaluation> {
        self.evaluations.iter().reduce(|a, b| if b.record.mean_loss < a.record.mean_loss { b } else { a })
    }
}

pub fn write_trace(path: &Path, header: &TraceHeader, trace: &OptimizationTrace) -> Result<()> {
    let tmp = path.with_extension("jsonl.partial");
    {
        let mut w = BufWriter::new(fs::File::create(&tmp)?);
        let mut line = |l: &TraceLine| -> Result<()> {
            serde_json::to_writer(&mut w, l)?;
            w.write_all(b"\n")?;
            Ok(())
        };
        line(&TraceLine::Header(header.clone()))?;
        for (r, b) in trace.records.iter().zip(&trace.best_so_far) {
            line(&TraceLine::Evaluation(TraceEvaluation {
                record: r.clone(),
                best_so_far: *b,
            }))?;
        }
        for f in &trace.fallbacks {
            line(&TraceLine::Fallback(f.clone()))?;
        }
        w.flush()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn read_trace(path: &Path) -> Result<TraceFile> {
    let parse_err = |line: usize, msg: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        msg,
    };
    let reader = BufReader::new(fs::File::open(path)?);
    let mut header = None;
    let mut evaluations = Vec::new();
    let mut fallbacks = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed: TraceLine = serde_json::from_str(&line).map_err(|e| parse_err(i + 1, e.to_string()))?;
        match parsed {
            TraceLine::Header(h) if header.is_none() && i == 0 => header = Some(h),
            TraceLine::Header(_) => return Err(parse_err(i + 1, "unexpected header line".into())),
            TraceLine::Evaluation(e) => {
                if e.record.index != evaluations.len() {
                    return Err(parse_err(i + 1, format!("expected evaluation {}", evaluations.len())));
                }
                evaluations.push(e)
            }
            TraceLine::Fallback(f) => fallbacks.push(f),
        }
    }
    let header = header.ok_or_else(|| parse_err(1, "missing header line".into()))?;
    Ok(TraceFile {
        header,
        evaluations,
        fallbacks,
    })
}

fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    csv::Writer::from_path(path).map_err(|e| Error::Io(std::io::Error::other(e)))
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

fn write_rows(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(header).map_err(csv_err)?;
    for r in rows {
        w.write_record(r).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a delimited file with a header row, checking the column names.
pub fn read_table(path: &Path, expected: &[&str]) -> Result<Vec<Vec<String>>> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err)?;
    let header: Vec<String> = r.headers().map_err(csv_err)?.iter().map(String::from).collect();
    if header != expected {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line: 1,
            msg: format!("expected columns {expected:?}, found {header:?}"),
        });
    }
    r.records()
        .map(|rec| rec.map(|r| r.iter().map(String::from).collect()).map_err(csv_err))
        .collect()
}

fn trace_name(strategy: Strategy, trial: usize) -> String {
    format!("{}_{trial}", strategy.name())
}

fn fmt(x: f64) -> String {
    format!("{x}")
}

/// Per-trial result of the forecasting objective against the persistence
/// forecaster.
#[derive(Debug, Clone, PartialEq)]
pub struct BaselineRow {
    pub strategy: Strategy,
    pub trial: usize,
    pub lag: usize,
    pub best_mse: f64,
    pub persistence_mse: f64,
    pub normalized_rmse: f64,
}

#[derive(Debug, Clone)]
pub struct ExperimentReport {
    pub out: PathBuf,
    pub traces: BTreeMap<Strategy, Vec<OptimizationTrace>>,
    pub baselines: Vec<BaselineRow>,
    pub seconds: f64,
}

/// Runs every strategy for every trial and writes the output files.
pub fn run_experiment(cfg: &ExperimentConfig, out: &Path) -> Result<ExperimentReport> {
    let started = Instant::now();
    let domain = cfg.validate()?;
    let objective = build_objective(cfg, &domain)?;
    fs::create_dir_all(out.join("traces"))?;
    fs::create_dir_all(out.join("timing"))?;
    fs::write(out.join("config.toml"), cfg.to_toml()?)?;
    let names: Vec<String> = domain.dims().iter().map(|d| d.name.clone()).collect();

    let mut traces = BTreeMap::new();
    for &strategy in &cfg.strategies {
        let mut per_trial = Vec::with_capacity(cfg.trials);
        for trial in 0..cfg.trials {
            let seed = trial_seed(cfg.seed, trial);
            let trace = run_hpo(&objective, &domain, strategy, &cfg.hpo, seed)?;
            let header = TraceHeader {
                strategy,
                trial,
                seed,
                objective: objective.describe(),
                dimensions: names.clone(),
                settings: cfg.hpo.clone(),
            };
            let name = trace_name(strategy, trial);
            write_trace(&out.join("traces").join(format!("{name}.jsonl")), &header, &trace)?;
            let rows: Vec<Vec<String>> = trace
                .records
                .iter()
                .zip(trace.cumulative_seconds())
                .map(|(r, c)| vec![r.index.to_string(), fmt(r.wall_time_seconds), fmt(c)])
                .collect();
            write_rows(&out.join("timing").join(format!("{name}.csv")), &TIMING_HEADER, &rows)?;
            per_trial.push(trace);
        }
        write_strategy_files(out, strategy, &names, &per_trial)?;
        traces.insert(strategy, per_trial);
    }

    let mut baselines = Vec::new();
    if let BuiltObjective::Mlp(mlp) = &objective {
        for (&strategy, per_trial) in &traces {
            for (trial, trace) in per_trial.iter().enumerate() {
                let best = trace.best().ok_or(Error::Exhausted)?;
                let hp = mlp.hyperparameters(&best.raw)?;
                baselines.push(BaselineRow {
                    strategy,
                    trial,
                    lag: hp.lag,
                    best_mse: best.mean_loss,
                    persistence_mse: mlp.persistence_mse(hp.lag)?,
                    normalized_rmse: best.mean_loss.sqrt(),
                });
            }
        }
        let rows: Vec<Vec<String>> = baselines
            .iter()
            .map(|b| {
                vec![
                    b.strategy.name().to_string(),
                    b.trial.to_string(),
                    b.lag.to_string(),
                    fmt(b.best_mse),
                    fmt(b.persistence_mse),
                    fmt(b.normalized_rmse),
                ]
            })
            .collect();
        write_rows(
            &out.join("baseline.csv"),
            &["strategy", "trial", "lag", "best_mse", "persistence_mse", "normalized_rmse"],
            &rows,
        )?;
        if let ObjectiveConfig::Mlp(MlpObjectiveConfig { horizon: Some(h), .. }) = &cfg.objective {
            for (&strategy, per_trial) in &traces {
                write_forecast(out, mlp, strategy, per_trial, *h, cfg.seed)?;
            }
        }
    }

    Ok(ExperimentReport {
        out: out.to_path_buf(),
        traces,
        baselines,
        seconds: started.elapsed().as_secs_f64(),
    })
}

fn write_strategy_files(out: &Path, strategy: Strategy, names: &[String], traces: &[OptimizationTrace]) -> Result<()> {
    let best = summarize_series(&traces.iter().map(|t| t.best_so_far.clone()).collect::<Vec<_>>())?;
    let time = summarize_series(&traces.iter().map(|t| t.cumulative_seconds()).collect::<Vec<_>>())?;
    let rows: Vec<Vec<String>> = (0..best.mean.len())
        .map(|i| {
            vec![
                i.to_string(),
                fmt(best.mean[i]),
                fmt(best.std[i]),
                fmt(time.mean[i]),
                fmt(time.std[i]),
            ]
        })
        .collect();
    write_rows(&out.join(format!("summary_{}.csv", strategy.name())), &SUMMARY_HEADER, &rows)?;

    let mut header = vec!["trial".to_string()];
    header.extend(names.iter().cloned());
    header.push("mean_loss".into());
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let rows = traces
        .iter()
        .enumerate()
        .map(|(k, t)| {
            let b = t.best().ok_or(Error::Exhausted)?;
            let mut row = vec![k.to_string()];
            row.extend(b.raw.iter().map(|&x| fmt(x)));
            row.push(fmt(b.mean_loss));
            Ok(row)
        })
        .collect::<Result<Vec<_>>>()?;
    write_rows(&out.join(format!("best_{}.csv", strategy.name())), &header, &rows)
}

/// Retrains the best point of the best trial and forecasts the last
/// `horizon` days of the series.
fn write_forecast(
    out: &Path,
    mlp: &MlpObjective,
    strategy: Strategy,
    traces: &[OptimizationTrace],
    horizon: usize,
    master: u64,
) -> Result<()> {
    let best = traces
        .iter()
        .filter_map(|t| t.best())
        .reduce(|a, b| if b.mean_loss < a.mean_loss { b } else { a })
        .ok_or(Error::Exhausted)?;
    let hp = mlp.hyperparameters(&best.raw)?;
    let run = mlp.out_of_sample_run(&hp, horizon, derive_seed(master, &[u64::MAX, strategy.label()]))?;
    let series = mlp.series();
    let mut rows = Vec::new();
    for (k, (pred, obs)) in run.forecast.levels.iter().zip(&run.truth).enumerate() {
        let day = run.forecast.start + k;
        for (j, &c) in mlp.target_columns().iter().enumerate() {
            rows.push(vec![
                series.dates()[day].to_string(),
                series.columns()[c].name.clone(),
                fmt(pred[j]),
                fmt(mlp.scaling().invert_groundwater(c, obs[j])),
            ]);
        }
    }
    write_rows(
        &out.join(format!("forecast_{}.csv", strategy.name())),
        &["date", "well", "predicted", "observed"],
        &rows,
    )
}

/// Files produced by [`emit_plot_data`].
#[derive(Debug, Clone)]
pub struct PlotFiles {
    pub convergence: PathBuf,
    pub time: PathBuf,
    pub hyperparameters: PathBuf,
}

/// Reads the traces and timing files of a run directory and writes the
/// convergence, time and hyperparameter tables into `dest`.
pub fn emit_plot_data(run_dir: &Path, dest: &Path) -> Result<PlotFiles> {
    let trace_dir = run_dir.join("traces");
    let mut paths: Vec<PathBuf> = fs::read_dir(&trace_dir)?
        .map(|e| e.map(|e| e.path()))
        .collect::<std::io::Result<_>>()?;
    paths.retain(|p| p.extension().is_some_and(|e| e == "jsonl"));
    paths.sort();
    if paths.is_empty() {
        return Err(Error::Config(format!("no traces in {}", trace_dir.display())));
    }

    let mut groups: BTreeMap<Strategy, Vec<(TraceFile, Vec<f64>)>> = BTreeMap::new();
    for p in &paths {
        let trace = read_trace(p)?;
        let stem = trace_name(trace.header.strategy, trace.header.trial);
        let timing_path = run_dir.join("timing").join(format!("{stem}.csv"));
        let cumulative = read_table(&timing_path, &TIMING_HEADER)?
            .iter()
            .map(|r| {
                r[2].parse::<f64>().map_err(|e| Error::Parse {
                    path: timing_path.clone(),
                    line: 0,
                    msg: e.to_string(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        if cumulative.len() != trace.evaluations.len() {
            return Err(Error::Config(format!(
                "{}: {} timing rows for {} evaluations",
                timing_path.display(),
                cumulative.len(),
                trace.evaluations.len()
            )));
        }
        groups.entry(trace.header.strategy).or_default().push((trace, cumulative));
    }

    fs::create_dir_all(dest)?;
    let mut conv = Vec::new();
    let mut time = Vec::new();
    let mut hyper = Vec::new();
    for (strategy, runs) in &groups {
        let ragged = |what: &str| Error::Config(format!("{strategy}: traces have different {what}"));
        let best = summarize_series(&runs.iter().map(|(t, _)| t.best_so_far()).collect::<Vec<_>>())
            .map_err(|_| ragged("lengths"))?;
        let secs = summarize_series(&runs.iter().map(|(_, c)| c.clone()).collect::<Vec<_>>())
            .map_err(|_| ragged("lengths"))?;
        for i in 0..best.mean.len() {
            conv.push(vec![strategy.name().into(), i.to_string(), fmt(best.mean[i]), fmt(best.std[i])]);
            time.push(vec![strategy.name().into(), i.to_string(), fmt(secs.mean[i]), fmt(secs.std[i])]);
        }
        let dims = &runs[0].0.header.dimensions;
        if runs.iter().any(|(t, _)| &t.header.dimensions != dims) {
            return Err(ragged("dimensions"));
        }
        let optima = runs
            .iter()
            .map(|(t, _)| t.best().map(|b| b.record.raw.clone()).ok_or(Error::Exhausted))
            .collect::<Result<Vec<_>>>()?;
        let s = summarize_series(&optima)?;
        for (d, name) in dims.iter().enumerate() {
            hyper.push(vec![strategy.name().into(), name.clone(), fmt(s.mean[d]), fmt(s.std[d])]);
        }
    }
    let files = PlotFiles {
        convergence: dest.join("convergence.csv"),
        time: dest.join("time.csv"),
        hyperparameters: dest.join("hyperparameters.csv"),
    };
    write_rows(&files.convergence, &CONVERGENCE_HEADER, &conv)?;
    write_rows(&files.time, &TIME_HEADER, &time)?;
    write_rows(&files.hyperparameters, &HYPERPARAMETER_HEADER, &hyper)?;
    Ok(files)
}
