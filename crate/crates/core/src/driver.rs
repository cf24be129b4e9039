//! The sequential surrogate-based search loop.
//!
//! An initial design of distinct random points is evaluated, then each
//! iteration refits the surrogate on every record, proposes one unevaluated
//! point and evaluates it, until the evaluation budget is spent. Every
//! evaluation is the mean of `replicates` seeded runs of the objective.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::acquisition::{
    argmin_first, ga_maximize_ei, generate_candidates, min_distance, random_propose,
    weighted_score_select, weighted_scores, GaConfig, WeightCycle,
};
use crate::domain::{IntegerDomain, LatticePoint};
use crate::error::{Error, Result};
use crate::gp::fit_gp;
use crate::rbf::fit_rbf;
use crate::seed::{derive_seed, rng_from};

/// A stochastic black box: the same `(raw, seed)` must give the same loss.
pub trait ExpensiveObjective: Sync {
    fn evaluate(&self, raw: &[f64], seed: u64) -> Result<f64>;

    fn describe(&self) -> String {
        String::from("objective")
    }
}

impl<T: ExpensiveObjective + ?Sized> ExpensiveObjective for &T {
    fn evaluate(&self, raw: &[f64], seed: u64) -> Result<f64> {
        (**self).evaluate(raw, seed)
    }

    fn describe(&self) -> String {
        (**self).describe()
    }
}

impl<T: ExpensiveObjective + ?Sized> ExpensiveObjective for Box<T> {
    fn evaluate(&self, raw: &[f64], seed: u64) -> Result<f64> {
        (**self).evaluate(raw, seed)
    }

    fn describe(&self) -> String {
        (**self).describe()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    Rbf,
    Gp,
    Random,
}

impl Strategy {
    pub const ALL: [Strategy; 3] = [Strategy::Rbf, Strategy::Gp, Strategy::Random];

    /// Stable label used in seed derivation; independent of config order.
    pub fn label(self) -> u64 {
        match self {
            Strategy::Rbf => 0,
            Strategy::Gp => 1,
            Strategy::Random => 2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Strategy::Rbf => "rbf",
            Strategy::Gp => "gp",
            Strategy::Random => "random",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "rbf" => Ok(Strategy::Rbf),
            "gp" => Ok(Strategy::Gp),
            "random" | "rs" => Ok(Strategy::Random),
            other => Err(Error::Config(format!("unknown strategy `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HpoSettings {
    /// Total number of distinct points evaluated.
    pub budget: usize,
    /// Initial design size; `None` means `d + 1`.
    pub n0: Option<usize>,
    /// Replicated objective runs per point.
    pub replicates: usize,
    /// Local and global candidates per RBF iteration (each).
    pub candidates: usize,
    pub ga: GaConfig,
    /// Run the replicates of one point on separate threads.
    pub parallel_replicates: bool,
}

impl Default for HpoSettings {
    fn default() -> Self {
        Self {
            budget: 50,
            n0: None,
            replicates: 5,
            candidates: 500,
            ga: GaConfig::default(),
            parallel_replicates: false,
        }
    }
}

impl HpoSettings {
    pub fn initial_design_size(&self, domain: &IntegerDomain) -> usize {
        self.n0.unwrap_or(domain.dim() + 1)
    }

    pub fn validate(&self, domain: &IntegerDomain) -> Result<()> {
        let n0 = self.initial_design_size(domain);
        if n0 == 0 || self.budget < n0 {
            return Err(Error::Config(format!("need budget >= n0 >= 1 (budget {}, n0 {n0})", self.budget)));
        }
        if self.replicates == 0 {
            return Err(Error::Config("replicates must be at least 1".into()));
        }
        if self.candidates == 0 {
            return Err(Error::Config("candidates must be at least 1".into()));
        }
        if (self.budget as u64) > domain.cardinality() {
            return Err(Error::Config(format!(
                "budget {} exceeds the {} points of the search space",
                self.budget,
                domain.cardinality()
            )));
        }
        self.ga.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationRecord {
    pub index: usize,
    pub point: LatticePoint,
    pub raw: Vec<f64>,
    /// Losses of the replicates that succeeded.
    pub replicate_losses: Vec<f64>,
    /// Seed used by each successful replicate.
    pub replicate_seeds: Vec<u64>,
    pub failed_replicates: usize,
    pub mean_loss: f64,
    /// Seconds spent inside the objective for this point.
    #[serde(skip)]
    pub wall_time_seconds: f64,
}

/// Why a surrogate step fell back to a simpler proposal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fallback {
    pub index: usize,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizationTrace {
    pub strategy: Strategy,
    pub seed: u64,
    pub settings: HpoSettings,
    pub records: Vec<EvaluationRecord>,
    /// Running minimum of `mean_loss`.
    pub best_so_far: Vec<f64>,
    pub fallbacks: Vec<Fallback>,
}

impl OptimizationTrace {
    /// Earliest record with the smallest mean loss.
    pub fn best(&self) -> Option<&EvaluationRecord> {
        let idx = argmin_first(&self.records.iter().map(|r| r.mean_loss).collect::<Vec<_>>())?;
        self.records.get(idx)
    }

    /// Cumulative objective time after each evaluation.
    pub fn cumulative_seconds(&self) -> Vec<f64> {
        self.records
            .iter()
            .scan(0.0, |acc, r| {
                *acc += r.wall_time_seconds;
                Some(*acc)
            })
            .collect()
    }

    fn push(&mut self, record: EvaluationRecord) {
        let best = self.best_so_far.last().map_or(record.mean_loss, |b| b.min(record.mean_loss));
        self.best_so_far.push(best);
        self.records.push(record);
    }
}

const DESIGN_STREAM: u64 = 0;
const ACQUISITION_STREAM: u64 = 1;
const REPLICATE_STREAM: u64 = 2;
const RETRY_STREAM: u64 = 3;

/// Runs one optimization trial.
///
/// `seed` fixes everything: the initial design and the replicate seeds depend
/// only on `seed` (so different strategies with the same seed start from the
/// same design), while acquisition randomness also depends on the strategy.
pub fn run_hpo(
    objective: &dyn ExpensiveObjective,
    domain: &IntegerDomain,
    strategy: Strategy,
    settings: &HpoSettings,
    seed: u64,
) -> Result<OptimizationTrace> {
    settings.validate(domain)?;
    let n0 = settings.initial_design_size(domain);
    let mut trace = OptimizationTrace {
        strategy,
        seed,
        settings: settings.clone(),
        records: Vec::with_capacity(settings.budget),
        best_so_far: Vec::with_capacity(settings.budget),
        fallbacks: Vec::new(),
    };
    let mut evaluated: HashSet<LatticePoint> = HashSet::new();

    let mut design_rng = rng_from(seed, &[DESIGN_STREAM]);
    while evaluated.len() < n0 {
        let p = random_propose(domain, &evaluated, &mut design_rng)?;
        evaluated.insert(p.clone());
        let record = evaluate_point(objective, domain, p, trace.records.len(), settings, seed)?;
        trace.push(record);
    }

    let active = ActiveDims::new(domain);
    let mut rng = rng_from(seed, &[ACQUISITION_STREAM, strategy.label()]);
    let mut weights = WeightCycle::new();
    while trace.records.len() < settings.budget {
        let index = trace.records.len();
        let points: Vec<LatticePoint> = trace.records.iter().map(|r| r.point.clone()).collect();
        let values: Vec<f64> = trace.records.iter().map(|r| r.mean_loss).collect();
        let proposal = match strategy {
            Strategy::Random => random_propose(domain, &evaluated, &mut rng)?,
            Strategy::Rbf => {
                let omega = weights.next().expect("cycle is infinite");
                let incumbent = trace.best().expect("design is non-empty").point.clone();
                let candidates = match generate_candidates(domain, &incumbent, &evaluated, settings.candidates, &mut rng) {
                    Ok(c) => c,
                    Err(Error::Exhausted) => {
                        trace.fallbacks.push(Fallback {
                            index,
                            reason: "every candidate was already evaluated; proposing at random".into(),
                        });
                        let p = random_propose(domain, &evaluated, &mut rng)?;
                        evaluated.insert(p.clone());
                        let record = evaluate_point(objective, domain, p, index, settings, seed)?;
                        trace.push(record);
                        continue;
                    }
                    Err(e) => return Err(e),
                };
                let projected: Vec<LatticePoint> = candidates.points.iter().map(|c| active.project(c)).collect();
                let centers: Vec<LatticePoint> = points.iter().map(|c| active.project(c)).collect();
                let chosen = match fit_rbf(&centers, &values) {
                    Ok(model) => weighted_score_select(&projected, &model, &centers, omega),
                    Err(e) => {
                        trace.fallbacks.push(Fallback {
                            index,
                            reason: format!("rbf fit failed ({e}); selecting by distance only"),
                        });
                        let evaluated_f: Vec<Vec<f64>> = centers.iter().map(LatticePoint::to_f64).collect();
                        let distances: Vec<f64> =
                            projected.iter().map(|c| min_distance(&c.to_f64(), &evaluated_f)).collect();
                        let scores = weighted_scores(&distances, &vec![0.0; distances.len()], 1.0);
                        argmin_first(&scores).expect("candidates are non-empty")
                    }
                };
                candidates.points[chosen].clone()
            }
            Strategy::Gp => {
                let centers: Vec<LatticePoint> = points.iter().map(|c| active.project(c)).collect();
                let ell_best = values.iter().copied().fold(f64::INFINITY, f64::min);
                match fit_gp(&centers, &values) {
                    Ok(model) => {
                        let reduced = active.reduced_domain(domain);
                        let out = ga_maximize_ei(&reduced, &model, ell_best, &settings.ga, &mut rng);
                        let p = active.lift(&out.point, domain);
                        if evaluated.contains(&p) {
                            trace.fallbacks.push(Fallback {
                                index,
                                reason: "GA returned an evaluated point; proposing at random".into(),
                            });
                            random_propose(domain, &evaluated, &mut rng)?
                        } else {
                            p
                        }
                    }
                    Err(e) => {
                        trace.fallbacks.push(Fallback {
                            index,
                            reason: format!("gp fit failed ({e}); proposing at random"),
                        });
                        random_propose(domain, &evaluated, &mut rng)?
                    }
                }
            }
        };
        debug_assert!(!evaluated.contains(&proposal));
        evaluated.insert(proposal.clone());
        let record = evaluate_point(objective, domain, proposal, index, settings, seed)?;
        trace.push(record);
    }
    Ok(trace)
}

/// Dimensions with more than one value; the others carry no information for
/// a surrogate and would make the linear tail rank deficient.
struct ActiveDims {
    indices: Vec<usize>,
}

impl ActiveDims {
    fn new(domain: &IntegerDomain) -> Self {
        let mut indices: Vec<usize> = (0..domain.dim()).filter(|&i| domain.dims()[i].len() > 1).collect();
        if indices.is_empty() {
            indices.push(0);
        }
        Self { indices }
    }

    fn project(&self, p: &LatticePoint) -> LatticePoint {
        LatticePoint(self.indices.iter().map(|&i| p.0[i]).collect())
    }

    fn lift(&self, p: &LatticePoint, domain: &IntegerDomain) -> LatticePoint {
        let mut full = vec![0usize; domain.dim()];
        for (&i, &c) in self.indices.iter().zip(&p.0) {
            full[i] = c;
        }
        LatticePoint(full)
    }

    fn reduced_domain(&self, domain: &IntegerDomain) -> IntegerDomain {
        IntegerDomain::new(self.indices.iter().map(|&i| domain.dims()[i].clone()).collect())
            .expect("sub-domain of a valid domain is valid")
    }
}

fn evaluate_point(
    objective: &dyn ExpensiveObjective,
    domain: &IntegerDomain,
    point: LatticePoint,
    index: usize,
    settings: &HpoSettings,
    seed: u64,
) -> Result<EvaluationRecord> {
    let raw = domain.to_raw(&point)?;
    let run = |r: usize| -> std::result::Result<(f64, u64), String> {
        let first = derive_seed(seed, &[REPLICATE_STREAM, index as u64, r as u64]);
        match objective.evaluate(&raw, first) {
            Ok(v) if v.is_finite() => return Ok((v, first)),
            _ => {}
        }
        let retry = derive_seed(seed, &[RETRY_STREAM, index as u64, r as u64]);
        match objective.evaluate(&raw, retry) {
            Ok(v) if v.is_finite() => Ok((v, retry)),
            Ok(v) => Err(format!("replicate {r}: non-finite loss {v}")),
            Err(e) => Err(format!("replicate {r}: {e}")),
        }
    };

    let start = Instant::now();
    let outcomes: Vec<_> = if settings.parallel_replicates && settings.replicates > 1 {
        let run = &run;
        std::thread::scope(|s| {
            let handles: Vec<_> = (0..settings.replicates).map(|r| s.spawn(move || run(r))).collect();
            handles.into_iter().map(|h| h.join().expect("replicate thread panicked")).collect()
        })
    } else {
        (0..settings.replicates).map(run).collect()
    };
    let wall_time_seconds = start.elapsed().as_secs_f64();

    let mut replicate_losses = Vec::with_capacity(outcomes.len());
    let mut replicate_seeds = Vec::with_capacity(outcomes.len());
    let mut failures = Vec::new();
    for o in outcomes {
        match o {
            Ok((v, s)) => {
                replicate_losses.push(v);
                replicate_seeds.push(s);
            }
            Err(msg) => failures.push(msg),
        }
    }
    if replicate_losses.is_empty() {
        return Err(Error::Objective(format!(
            "all replicates failed at {point} (raw {raw:?}): {}",
            failures.join("; ")
        )));
    }
    let mean_loss = replicate_losses.iter().sum::<f64>() / replicate_losses.len() as f64;
    Ok(EvaluationRecord {
        index,
        point,
        raw,
        replicate_losses,
        replicate_seeds,
        failed_replicates: failures.len(),
        mean_loss,
        wall_time_seconds,
    })
}

/// Elementwise mean and population standard deviation of equal-length series.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesSummary {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

pub fn summarize_series(series: &[Vec<f64>]) -> Result<SeriesSummary> {
    let first = series.first().ok_or_else(|| Error::Config("nothing to summarize".into()))?;
    let len = first.len();
    if series.iter().any(|s| s.len() != len) {
        return Err(Error::Config("series have different lengths".into()));
    }
    let k = series.len() as f64;
    let mean: Vec<f64> = (0..len).map(|i| series.iter().map(|s| s[i]).sum::<f64>() / k).collect();
    let std = (0..len)
        .map(|i| (series.iter().map(|s| (s[i] - mean[i]).powi(2)).sum::<f64>() / k).sqrt())
        .collect();
    Ok(SeriesSummary { mean, std })
}

/// Mean and standard deviation of best-so-far across trials.
pub fn summarize_trials(traces: &[OptimizationTrace]) -> Result<SeriesSummary> {
    let series: Vec<Vec<f64>> = traces.iter().map(|t| t.best_so_far.clone()).collect();
    summarize_series(&series)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn summary_of_two_constant_traces() {
        let s = summarize_series(&[vec![1.0, 1.0], vec![3.0, 3.0]]).unwrap();
        assert_eq!(s.mean, vec![2.0, 2.0]);
        assert_eq!(s.std, vec![1.0, 1.0]);
        let single = summarize_series(&[vec![4.0, 2.0, 2.0]]).unwrap();
        assert_eq!(single.std, vec![0.0; 3]);
        assert!(summarize_series(&[]).is_err());
        assert!(summarize_series(&[vec![1.0], vec![1.0, 2.0]]).is_err());
    }

    #[test]
    fn strategy_parsing() {
        assert_eq!("RBF".parse::<Strategy>().unwrap(), Strategy::Rbf);
        assert_eq!("random".parse::<Strategy>().unwrap(), Strategy::Random);
        assert!("tpe".parse::<Strategy>().is_err());
    }
}
