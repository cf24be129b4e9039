//! Proposal of the next lattice point to evaluate.
//!
//! Three strategies are provided: weighted-score selection among sampled
//! candidates (paired with the RBF surrogate), a genetic algorithm maximizing
//! expected improvement (paired with kriging), and uniform random sampling.

use std::collections::HashSet;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::domain::{IntegerDomain, LatticePoint};
use crate::error::{Error, Result};
use crate::gp::GpModel;
use crate::rbf::RbfModel;

/// Where a candidate came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CandidateOrigin {
    /// Perturbation of the incumbent.
    Perturbation,
    /// Uniform draw from the whole lattice.
    Global,
}

#[derive(Debug, Clone, Default)]
pub struct CandidateSet {
    pub points: Vec<LatticePoint>,
    pub origins: Vec<CandidateOrigin>,
}

impl CandidateSet {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Samples `m` local candidates around `best` and `m` global candidates,
/// then drops those already evaluated.
///
/// Each local candidate shifts every coordinate of `best` by ±1 or ±2 (sign
/// and magnitude uniform) and reflects the result into the lattice. Duplicates
/// within the set are kept; generation order is preserved.
pub fn generate_candidates<R: Rng + ?Sized>(
    domain: &IntegerDomain,
    best: &LatticePoint,
    evaluated: &HashSet<LatticePoint>,
    m: usize,
    rng: &mut R,
) -> Result<CandidateSet> {
    let mut set = CandidateSet::default();
    let mut shifted = vec![0i64; domain.dim()];
    for _ in 0..m {
        for (s, &c) in shifted.iter_mut().zip(best.coords()) {
            let magnitude = rng.random_range(1..=2i64);
            let sign = if rng.random::<bool>() { 1 } else { -1 };
            *s = c as i64 + sign * magnitude;
        }
        let p = domain.reflect_into_bounds(&shifted);
        if !evaluated.contains(&p) {
            set.points.push(p);
            set.origins.push(CandidateOrigin::Perturbation);
        }
    }
    for _ in 0..m {
        let p = domain.random_point(rng);
        if !evaluated.contains(&p) {
            set.points.push(p);
            set.origins.push(CandidateOrigin::Global);
        }
    }
    if set.is_empty() {
        return Err(Error::Exhausted);
    }
    Ok(set)
}

/// Weighted scores `ω·V_Δ + (1 − ω)·V_s` for candidates with the given
/// distances to the evaluated set and surrogate predictions.
///
/// Both criteria are min-max scaled over the candidate set; the distance
/// score is reversed so that the farthest candidate scores 0. A criterion
/// with zero spread gives every candidate the same score (0).
pub fn weighted_scores(distances: &[f64], predictions: &[f64], omega: f64) -> Vec<f64> {
    assert_eq!(distances.len(), predictions.len());
    let (dmin, dmax) = min_max(distances);
    let (smin, smax) = min_max(predictions);
    let d_span = dmax - dmin;
    let s_span = smax - smin;
    distances
        .iter()
        .zip(predictions)
        .map(|(&dist, &s)| {
            let v_dist = if d_span > 0.0 { (dmax - dist) / d_span } else { 0.0 };
            let v_pred = if s_span > 0.0 { (s - smin) / s_span } else { 0.0 };
            omega * v_dist + (1.0 - omega) * v_pred
        })
        .collect()
}

/// Index of the smallest score; ties go to the earliest index.
pub fn argmin_first(scores: &[f64]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, &s) in scores.iter().enumerate() {
        if best.is_none_or(|(_, b)| s < b) {
            best = Some((i, s));
        }
    }
    best.map(|(i, _)| i)
}

fn min_max(xs: &[f64]) -> (f64, f64) {
    xs.iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)))
}

/// Euclidean distance from `x` to the closest evaluated point.
pub fn min_distance(x: &[f64], evaluated: &[Vec<f64>]) -> f64 {
    evaluated
        .iter()
        .map(|e| e.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum::<f64>())
        .fold(f64::INFINITY, f64::min)
        .sqrt()
}

/// Picks the candidate with the lowest weighted score. Returns its index in
/// `candidates`.
pub fn weighted_score_select(
    candidates: &[LatticePoint],
    rbf: &RbfModel,
    evaluated: &[LatticePoint],
    omega: f64,
) -> usize {
    assert!(!candidates.is_empty(), "no candidates to select from");
    let evaluated: Vec<Vec<f64>> = evaluated.iter().map(LatticePoint::to_f64).collect();
    let (distances, predictions): (Vec<f64>, Vec<f64>) = candidates
        .iter()
        .map(|c| {
            let x = c.to_f64();
            (min_distance(&x, &evaluated), rbf.predict(&x))
        })
        .unzip();
    let scores = weighted_scores(&distances, &predictions, omega);
    argmin_first(&scores).expect("non-empty")
}

/// The repeating blend weights for weighted-score selection.
#[derive(Debug, Clone, Default)]
pub struct WeightCycle {
    cursor: usize,
}

impl WeightCycle {
    pub const WEIGHTS: [f64; 5] = [0.0, 0.25, 0.5, 0.75, 1.0];

    pub fn new() -> Self {
        Self::default()
    }
}

impl Iterator for WeightCycle {
    type Item = f64;

    fn next(&mut self) -> Option<f64> {
        let w = Self::WEIGHTS[self.cursor];
        self.cursor = (self.cursor + 1) % Self::WEIGHTS.len();
        Some(w)
    }
}

/// Genetic algorithm settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GaConfig {
    pub generations: usize,
    pub population: usize,
    pub crossover_prob: f64,
    /// Per-gene mutation probability; `None` means `1/d`.
    pub mutation_prob: Option<f64>,
    pub tournament: usize,
}

impl Default for GaConfig {
    fn default() -> Self {
        Self {
            generations: 100,
            population: 100,
            crossover_prob: 0.75,
            mutation_prob: None,
            tournament: 3,
        }
    }
}

impl GaConfig {
    pub fn validate(&self) -> Result<()> {
        if self.generations == 0 || self.population < 2 || self.tournament == 0 {
            return Err(Error::Config("GA counts must be positive (population >= 2)".into()));
        }
        let ok = |p: f64| (0.0..=1.0).contains(&p);
        if !ok(self.crossover_prob) || !self.mutation_prob.is_none_or(ok) {
            return Err(Error::Config("GA probabilities must lie in [0, 1]".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct GaOutcome {
    pub point: LatticePoint,
    pub fitness: f64,
    /// Number of fitness evaluations performed.
    pub evaluations: usize,
}

/// Maximizes `fitness` over the lattice with a generational GA.
///
/// Tournament selection, uniform crossover applied to each parent pair with
/// probability `crossover_prob`, per-gene mutation that resamples the gene
/// uniformly, and elitism of one. The best individual seen in any generation
/// is returned; it is always a lattice point.
pub fn ga_maximize<R, F>(domain: &IntegerDomain, fitness: F, config: &GaConfig, rng: &mut R) -> GaOutcome
where
    R: Rng + ?Sized,
    F: Fn(&LatticePoint) -> f64,
{
    let d = domain.dim();
    let pop_size = config.population.max(2);
    let mutation = config.mutation_prob.unwrap_or(1.0 / d as f64);
    let mut evaluations = 0usize;
    let mut score = |p: &LatticePoint| {
        evaluations += 1;
        let f = fitness(p);
        if f.is_nan() { f64::NEG_INFINITY } else { f }
    };

    let mut pop: Vec<LatticePoint> = (0..pop_size).map(|_| domain.random_point(rng)).collect();
    let mut fit: Vec<f64> = pop.iter().map(&mut score).collect();
    let mut best_idx = argmax_first(&fit);
    let mut best = (pop[best_idx].clone(), fit[best_idx]);

    for _ in 0..config.generations {
        let tournament = |rng: &mut R, fit: &[f64]| -> usize {
            let mut winner = rng.random_range(0..fit.len());
            for _ in 1..config.tournament {
                let c = rng.random_range(0..fit.len());
                if fit[c] > fit[winner] {
                    winner = c;
                }
            }
            winner
        };

        let mut next: Vec<LatticePoint> = Vec::with_capacity(pop_size);
        let mut next_fit: Vec<f64> = Vec::with_capacity(pop_size);
        next.push(pop[best_idx].clone());
        next_fit.push(fit[best_idx]);

        while next.len() < pop_size {
            let a = pop[tournament(rng, &fit)].clone();
            let b = pop[tournament(rng, &fit)].clone();
            let (mut c1, mut c2) = (a, b);
            if rng.random::<f64>() < config.crossover_prob {
                for g in 0..d {
                    if rng.random::<bool>() {
                        std::mem::swap(&mut c1.0[g], &mut c2.0[g]);
                    }
                }
            }
            for child in [&mut c1, &mut c2] {
                for (g, spec) in domain.dims().iter().enumerate() {
                    if rng.random::<f64>() < mutation {
                        child.0[g] = rng.random_range(0..spec.len());
                    }
                }
            }
            for child in [c1, c2] {
                if next.len() < pop_size {
                    next_fit.push(score(&child));
                    next.push(child);
                }
            }
        }
        pop = next;
        fit = next_fit;
        best_idx = argmax_first(&fit);
        if fit[best_idx] > best.1 {
            best = (pop[best_idx].clone(), fit[best_idx]);
        }
    }

    GaOutcome {
        point: best.0,
        fitness: best.1,
        evaluations,
    }
}

fn argmax_first(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate() {
        if x > xs[best] {
            best = i;
        }
    }
    best
}

/// Maximizes expected improvement of `gp` over the lattice.
pub fn ga_maximize_ei<R: Rng + ?Sized>(
    domain: &IntegerDomain,
    gp: &GpModel,
    ell_best: f64,
    config: &GaConfig,
    rng: &mut R,
) -> GaOutcome {
    ga_maximize(domain, |p| gp.expected_improvement_at(p, ell_best), config, rng)
}

/// Uniform draw from the lattice points not yet evaluated (rejection sampling).
pub fn random_propose<R: Rng + ?Sized>(
    domain: &IntegerDomain,
    evaluated: &HashSet<LatticePoint>,
    rng: &mut R,
) -> Result<LatticePoint> {
    if evaluated.len() as u64 >= domain.cardinality() {
        return Err(Error::Exhausted);
    }
    loop {
        let p = domain.random_point(rng);
        if !evaluated.contains(&p) {
            return Ok(p);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::DimensionSpec;
    use crate::seed::rng_from;

    fn grid(lens: &[usize]) -> IntegerDomain {
        IntegerDomain::new(
            lens.iter()
                .enumerate()
                .map(|(i, &n)| DimensionSpec::new(format!("d{i}"), (0..n).map(|k| k as f64).collect()))
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn weight_cycle_order() {
        let w: Vec<f64> = WeightCycle::new().take(7).collect();
        assert_eq!(w, vec![0.0, 0.25, 0.5, 0.75, 1.0, 0.0, 0.25]);
    }

    #[test]
    fn weighted_scores_fixture() {
        let v = weighted_scores(&[1.0, 2.0, 3.0], &[5.0, 1.0, 9.0], 0.5);
        assert_eq!(v, vec![0.75, 0.25, 0.5]);
        assert_eq!(argmin_first(&v), Some(1));
    }

    #[test]
    fn flat_criteria_score_equally() {
        let v = weighted_scores(&[2.0, 2.0, 2.0], &[3.0, 1.0, 2.0], 0.75);
        assert_eq!(v, vec![0.25, 0.0, 0.125]);
        let v = weighted_scores(&[2.0, 2.0], &[1.0, 1.0], 0.3);
        assert_eq!(v, vec![0.0, 0.0]);
        assert_eq!(argmin_first(&v), Some(0));
    }

    #[test]
    fn singleton_domain_is_exhausted() {
        let dom = grid(&[1]);
        let best = LatticePoint(vec![0]);
        let evaluated: HashSet<_> = [best.clone()].into_iter().collect();
        let mut rng = rng_from(0, &[]);
        assert!(matches!(
            generate_candidates(&dom, &best, &evaluated, 10, &mut rng),
            Err(Error::Exhausted)
        ));
        assert!(matches!(random_propose(&dom, &evaluated, &mut rng), Err(Error::Exhausted)));
    }

    #[test]
    fn candidate_cardinality_without_evaluated_points() {
        let dom = grid(&[20, 20, 20, 20]);
        let mut rng = rng_from(3, &[]);
        let best = LatticePoint(vec![10, 10, 10, 10]);
        let set = generate_candidates(&dom, &best, &HashSet::new(), 500, &mut rng).unwrap();
        assert_eq!(set.len(), 1000);
        let local = set.origins.iter().filter(|o| **o == CandidateOrigin::Perturbation).count();
        assert_eq!(local, 500);
        for (p, o) in set.points.iter().zip(&set.origins) {
            assert!(dom.contains(p));
            if *o == CandidateOrigin::Perturbation {
                assert!(p.0.iter().zip(&best.0).all(|(a, b)| {
                    let diff = a.abs_diff(*b);
                    diff == 1 || diff == 2
                }));
            }
        }
    }

    #[test]
    fn random_propose_finds_the_last_point() {
        let dom = grid(&[3]);
        let evaluated: HashSet<_> = [LatticePoint(vec![0]), LatticePoint(vec![2])].into_iter().collect();
        let mut rng = rng_from(9, &[]);
        for _ in 0..20 {
            assert_eq!(random_propose(&dom, &evaluated, &mut rng).unwrap(), LatticePoint(vec![1]));
        }
    }

    #[test]
    fn ga_budget_is_honored() {
        let dom = grid(&[10, 10]);
        let cfg = GaConfig::default();
        let mut rng = rng_from(1, &[]);
        let out = ga_maximize(&dom, |p| -((p.0[0] as f64 - 3.0).powi(2)), &cfg, &mut rng);
        assert!(out.evaluations <= 100 * 100 + 100);
        assert!(dom.contains(&out.point));
        assert_eq!(out.point.0[0], 3);
    }

    #[test]
    fn ga_on_flat_fitness_returns_feasible_point() {
        let dom = grid(&[4, 7, 2]);
        let mut rng = rng_from(2, &[]);
        let out = ga_maximize(&dom, |_| 0.0, &GaConfig::default(), &mut rng);
        assert!(dom.contains(&out.point));
        assert_eq!(out.fitness, 0.0);
    }

    #[test]
    fn ga_config_validation() {
        assert!(GaConfig::default().validate().is_ok());
        let bad = GaConfig { crossover_prob: 1.5, ..GaConfig::default() };
        assert!(bad.validate().is_err());
    }
}
