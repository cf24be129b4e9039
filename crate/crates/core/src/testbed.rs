//! Cheap synthetic objectives with known optima.
//!
//! These stand in for the expensive training objective when validating the
//! surrogates, the acquisition strategies and the driver.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::domain::{IntegerDomain, LatticePoint};
use crate::driver::ExpensiveObjective;
use crate::error::{Error, Result};
use crate::seed::rng_from;

/// Largest lattice that [`SyntheticObjective::multimodal`] will enumerate.
pub const MAX_ENUMERATION: u64 = 1_000_000;

#[derive(Debug, Clone, PartialEq)]
pub enum SyntheticKind {
    /// `Σ (x_i − t_i)²` in lattice coordinates.
    Quadratic { target: LatticePoint },
    /// Sum of negative Gaussian bumps.
    Multimodal { bumps: Vec<Bump> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Bump {
    pub center: Vec<f64>,
    pub depth: f64,
    pub width: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct SyntheticObjective {
    domain: IntegerDomain,
    kind: SyntheticKind,
    optimum: LatticePoint,
    optimum_value: f64,
    noise: f64,
}

impl SyntheticObjective {
    pub fn quadratic(domain: &IntegerDomain, target: LatticePoint) -> Result<Self> {
        if !domain.contains(&target) {
            return Err(Error::Config(format!("quadratic target {target} is outside the domain")));
        }
        Ok(Self {
            domain: domain.clone(),
            optimum: target.clone(),
            optimum_value: 0.0,
            kind: SyntheticKind::Quadratic { target },
            noise: 0.0,
        })
    }

    /// Three seeded Gaussian wells of varying depth. The global optimum is
    /// found by enumerating the lattice.
    pub fn multimodal(domain: &IntegerDomain, seed: u64) -> Result<Self> {
        if domain.cardinality() > MAX_ENUMERATION {
            return Err(Error::Config(format!(
                "multimodal objective needs |Ω| <= {MAX_ENUMERATION} to locate its optimum"
            )));
        }
        let mut rng = rng_from(seed, &[0x6d6d]);
        let bumps: Vec<Bump> = (0..3)
            .map(|k| Bump {
                center: domain
                    .dims()
                    .iter()
                    .map(|d| rng.random_range(0.0..=d.max_index() as f64))
                    .collect(),
                depth: 1.0 + 0.5 * k as f64 + rng.random_range(0.0..0.25),
                width: domain
                    .dims()
                    .iter()
                    .map(|d| (0.12 * d.max_index() as f64).max(0.5))
                    .collect(),
            })
            .collect();
        let kind = SyntheticKind::Multimodal { bumps };
        let (optimum, optimum_value) = domain
            .points()
            .map(|p| {
                let v = base_value(&kind, &p);
                (p, v)
            })
            .fold(None::<(LatticePoint, f64)>, |best, (p, v)| match best {
                Some((_, b)) if b <= v => best,
                _ => Some((p, v)),
            })
            .expect("domain is non-empty");
        Ok(Self {
            domain: domain.clone(),
            kind,
            optimum,
            optimum_value,
            noise: 0.0,
        })
    }

    /// Adds seeded Gaussian noise with standard deviation `sigma`.
    pub fn with_noise(mut self, sigma: f64) -> Result<Self> {
        if !(sigma >= 0.0) || !sigma.is_finite() {
            return Err(Error::Config("noise must be a finite non-negative number".into()));
        }
        self.noise = sigma;
        Ok(self)
    }

    pub fn kind(&self) -> &SyntheticKind {
        &self.kind
    }

    pub fn domain(&self) -> &IntegerDomain {
        &self.domain
    }

    pub fn optimum(&self) -> &LatticePoint {
        &self.optimum
    }

    pub fn optimum_value(&self) -> f64 {
        self.optimum_value
    }

    pub fn noise(&self) -> f64 {
        self.noise
    }

    /// Noise-free value at a lattice point.
    pub fn value_at(&self, p: &LatticePoint) -> f64 {
        base_value(&self.kind, p)
    }

    /// Value at `p` under replicate `seed`.
    pub fn sample_at(&self, p: &LatticePoint, seed: u64) -> f64 {
        let base = self.value_at(p);
        if self.noise == 0.0 {
            return base;
        }
        let mut rng = rng_from(seed, &[self.domain.linear_index(p)]);
        let z: f64 = StandardNormal.sample(&mut rng);
        base + self.noise * z
    }
}

fn base_value(kind: &SyntheticKind, p: &LatticePoint) -> f64 {
    match kind {
        SyntheticKind::Quadratic { target } => p
            .0
            .iter()
            .zip(&target.0)
            .map(|(&a, &b)| (a as f64 - b as f64).powi(2))
            .sum(),
        SyntheticKind::Multimodal { bumps } => -bumps
            .iter()
            .map(|b| {
                let e: f64 = p
                    .0
                    .iter()
                    .zip(&b.center)
                    .zip(&b.width)
                    .map(|((&x, c), w)| ((x as f64 - c) / w).powi(2))
                    .sum();
                b.depth * (-0.5 * e).exp()
            })
            .sum::<f64>(),
    }
}

impl ExpensiveObjective for SyntheticObjective {
    fn evaluate(&self, raw: &[f64], seed: u64) -> Result<f64> {
        let p = self.domain.from_raw(raw)?;
        Ok(self.sample_at(&p, seed))
    }

    fn describe(&self) -> String {
        let kind = match self.kind {
            SyntheticKind::Quadratic { .. } => "quadratic",
            SyntheticKind::Multimodal { .. } => "multimodal",
        };
        format!("{kind} (noise {})", self.noise)
    }
}

/// Points whose value does not exceed any lattice neighbour (±1 in one
/// coordinate).
pub fn local_minima(obj: &SyntheticObjective) -> Vec<LatticePoint> {
    let dom = obj.domain();
    dom.points()
        .filter(|p| {
            let v = obj.value_at(p);
            (0..dom.dim()).all(|i| {
                [-1i64, 1].iter().all(|&step| {
                    let c = p.0[i] as i64 + step;
                    if c < 0 || c > dom.dims()[i].max_index() as i64 {
                        return true;
                    }
                    let mut q = p.clone();
                    q.0[i] = c as usize;
                    obj.value_at(&q) > v
                })
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::DimensionSpec;

    fn grid(lens: &[usize]) -> IntegerDomain {
        IntegerDomain::new(
            lens.iter()
                .enumerate()
                .map(|(i, &n)| DimensionSpec::new(format!("d{i}"), (0..n).map(|k| 10.0 * k as f64).collect()))
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn quadratic_examples() {
        let dom = grid(&[7, 9, 5]);
        let t = LatticePoint(vec![2, 8, 1]);
        let f = SyntheticObjective::quadratic(&dom, t.clone()).unwrap();
        assert_eq!(f.value_at(&t), 0.0);
        assert_eq!(f.value_at(&LatticePoint(vec![3, 8, 1])), 1.0);
        let argmin = dom
            .points()
            .min_by(|a, b| f.value_at(a).partial_cmp(&f.value_at(b)).unwrap())
            .unwrap();
        assert_eq!(argmin, t);
        assert_eq!(f.evaluate(&dom.to_raw(&t).unwrap(), 3).unwrap(), 0.0);
        assert!(SyntheticObjective::quadratic(&dom, LatticePoint(vec![7, 0, 0])).is_err());
    }

    #[test]
    fn multimodal_optimum_and_local_minima() {
        let dom = grid(&[21, 21]);
        let f = SyntheticObjective::multimodal(&dom, 1).unwrap();
        let brute = dom
            .points()
            .map(|p| f.value_at(&p))
            .fold(f64::INFINITY, f64::min);
        assert_eq!(brute, f.optimum_value());
        assert_eq!(f.value_at(f.optimum()), brute);
        assert!(local_minima(&f).len() >= 2, "{:?}", local_minima(&f));
        let g = SyntheticObjective::multimodal(&dom, 1).unwrap();
        assert_eq!(f.kind(), g.kind());
    }

    #[test]
    fn noise_is_reproducible_and_zero_noise_is_exact() {
        let dom = grid(&[5, 5]);
        let base = SyntheticObjective::quadratic(&dom, LatticePoint(vec![1, 1])).unwrap();
        let p = LatticePoint(vec![3, 0]);
        let quiet = base.clone().with_noise(0.0).unwrap();
        assert_eq!(quiet.sample_at(&p, 17), base.value_at(&p));
        let noisy = base.with_noise(0.5).unwrap();
        assert_eq!(noisy.sample_at(&p, 17), noisy.sample_at(&p, 17));
        assert_ne!(noisy.sample_at(&p, 17), noisy.sample_at(&p, 18));
        assert!(SyntheticObjective::quadratic(&dom, LatticePoint(vec![0, 0])).unwrap().with_noise(-1.0).is_err());
    }
}
