//! Ordinary kriging with a Gaussian correlation and expected improvement.
//!
//! The correlation between two points is `exp(−Σ γ_i |a_i − b_i|²)`. Given
//! `γ`, the process mean `μ̂` and variance `σ̂²` have closed forms (the
//! generalized least squares estimates), so the likelihood is maximized over
//! `γ` alone.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::Rng as _;
use statrs::function::erf::erfc;

use crate::domain::LatticePoint;
use crate::error::{Error, Result};
use crate::seed::rng_from;

/// Search bounds for `log10 γ_i`.
pub const LOG10_GAMMA_BOUNDS: (f64, f64) = (-3.0, 2.0);
/// Number of Latin hypercube starts for the likelihood search.
pub const LIKELIHOOD_STARTS: usize = 8;
/// First diagonal nugget tried; escalated tenfold on factorization failure.
pub const NUGGET_START: f64 = 1e-10;
pub const NUGGET_MAX: f64 = 1e-4;
/// Predictive standard deviations at or below this give zero improvement.
pub const EI_SIGMA_CUTOFF: f64 = 1e-12;

const LIKELIHOOD_SEED: u64 = 0x6b72_6967;

/// Gaussian correlation between two points.
pub fn correlation(a: &[f64], b: &[f64], gammas: &[f64]) -> Result<f64> {
    if a.len() != b.len() || a.len() != gammas.len() {
        return Err(Error::DimensionMismatch {
            expected: gammas.len(),
            got: a.len().min(b.len()),
        });
    }
    if gammas.iter().any(|&g| !(g > 0.0) || !g.is_finite()) {
        return Err(Error::Config("correlation lengths must be positive".into()));
    }
    Ok(corr(a, b, gammas))
}

#[inline]
fn corr(a: &[f64], b: &[f64], gammas: &[f64]) -> f64 {
    let s: f64 = a
        .iter()
        .zip(b)
        .zip(gammas)
        .map(|((x, y), g)| g * (x - y) * (x - y))
        .sum();
    (-s).exp()
}

/// Factorized correlation matrix plus the profiled estimates it implies.
#[derive(Debug, Clone)]
struct Factorization {
    /// Lower Cholesky factor of `R + nugget·I`.
    chol: DMatrix<f64>,
    nugget: f64,
    r_inv_one: DVector<f64>,
    one_r_inv_one: f64,
    mu_hat: f64,
    sigma2_hat: f64,
    /// `R⁻¹(ℓ − 1μ̂)`
    alpha: DVector<f64>,
    ln_det: f64,
}

impl Factorization {
    fn build(centers: &[Vec<f64>], values: &[f64], gammas: &[f64]) -> Option<Self> {
        let n = centers.len();
        let mut base = DMatrix::<f64>::identity(n, n);
        for k in 0..n {
            for l in (k + 1)..n {
                let c = corr(&centers[k], &centers[l], gammas);
                base[(k, l)] = c;
                base[(l, k)] = c;
            }
        }
        let mut nugget = NUGGET_START;
        loop {
            let mut r = base.clone();
            for k in 0..n {
                r[(k, k)] += nugget;
            }
            if let Some(ch) = r.cholesky() {
                return Self::from_cholesky(ch.unpack(), nugget, values);
            }
            nugget *= 10.0;
            if nugget > NUGGET_MAX * (1.0 + 1e-9) {
                return None;
            }
        }
    }

    fn from_cholesky(chol: DMatrix<f64>, nugget: f64, values: &[f64]) -> Option<Self> {
        let n = values.len();
        let ell = DVector::from_column_slice(values);
        let one = DVector::from_element(n, 1.0);
        let solve = |b: &DVector<f64>| -> DVector<f64> {
            let z = forward(&chol, b.as_slice());
            backward(&chol, &z)
        };
        let r_inv_one = solve(&one);
        let one_r_inv_one = r_inv_one.sum();
        if !(one_r_inv_one > 0.0) {
            return None;
        }
        let mu_hat = r_inv_one.dot(&ell) / one_r_inv_one;
        let resid = ell.add_scalar(-mu_hat);
        let alpha = solve(&resid);
        let sigma2_hat = (resid.dot(&alpha) / n as f64).max(0.0);
        let ln_det = 2.0 * chol.diagonal().iter().map(|x| x.ln()).sum::<f64>();
        if !(mu_hat.is_finite() && sigma2_hat.is_finite() && ln_det.is_finite()) {
            return None;
        }
        Some(Self {
            chol,
            nugget,
            r_inv_one,
            one_r_inv_one,
            mu_hat,
            sigma2_hat,
            alpha,
            ln_det,
        })
    }

    fn log_likelihood(&self, n: usize) -> f64 {
        -0.5 * (n as f64) * self.sigma2_hat.max(f64::MIN_POSITIVE).ln() - 0.5 * self.ln_det
    }
}

/// Solves `L z = b` for lower-triangular `L`.
fn forward(l: &DMatrix<f64>, b: &[f64]) -> DVector<f64> {
    let n = b.len();
    let mut z = DVector::from_column_slice(b);
    for j in 0..n {
        z[j] /= l[(j, j)];
        let zj = z[j];
        let col = l.column(j);
        for i in (j + 1)..n {
            z[i] -= col[i] * zj;
        }
    }
    z
}

/// Solves `Lᵀ x = z`.
fn backward(l: &DMatrix<f64>, z: &DVector<f64>) -> DVector<f64> {
    let n = z.len();
    let mut x = z.clone();
    for i in (0..n).rev() {
        let col = l.column(i);
        let mut s = x[i];
        for k in (i + 1)..n {
            s -= col[k] * x[k];
        }
        x[i] = s / l[(i, i)];
    }
    x
}

/// Fitted kriging surrogate. Immutable after [`fit_gp`].
#[derive(Debug, Clone)]
pub struct GpModel {
    centers: Vec<Vec<f64>>,
    values: Vec<f64>,
    gammas: Vec<f64>,
    fact: Factorization,
    degenerate: bool,
}

/// Profiled (concentrated) log-likelihood `−n/2 ln σ̂² − ½ ln|R|` at `gammas`.
///
/// Returns `-inf` when the correlation matrix cannot be factorized even with
/// the largest nugget.
pub fn profile_log_likelihood(centers: &[Vec<f64>], values: &[f64], gammas: &[f64]) -> f64 {
    Factorization::build(centers, values, gammas)
        .map_or(f64::NEG_INFINITY, |f| f.log_likelihood(values.len()))
}

/// Fits the kriging model on lattice points.
pub fn fit_gp(points: &[LatticePoint], values: &[f64]) -> Result<GpModel> {
    GpModel::fit(points.iter().map(LatticePoint::to_f64).collect(), values)
}

impl GpModel {
    pub fn fit(centers: Vec<Vec<f64>>, values: &[f64]) -> Result<Self> {
        let n = centers.len();
        if n != values.len() {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: values.len(),
            });
        }
        if n < 2 {
            return Err(Error::TooFewPoints { required: 2, got: n });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("gp values"));
        }
        let d = centers[0].len();
        if d == 0 || centers.iter().any(|c| c.len() != d) {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: 0,
            });
        }
        for j in 1..n {
            if centers[..j].iter().any(|c| c == &centers[j]) {
                return Err(Error::DuplicatePoint(j));
            }
        }

        // canonical order, so the likelihood search does not depend on input order
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| {
            centers[a]
                .iter()
                .zip(&centers[b])
                .map(|(x, y)| x.total_cmp(y))
                .find(|o| o.is_ne())
                .unwrap_or(std::cmp::Ordering::Equal)
        });
        let centers: Vec<Vec<f64>> = order.iter().map(|&i| centers[i].clone()).collect();
        let values: Vec<f64> = order.iter().map(|&i| values[i]).collect();
        let values = values.as_slice();

        let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let degenerate = hi - lo <= 1e-12 * lo.abs().max(hi.abs()).max(1.0);
        let gammas = if degenerate {
            vec![1.0; d]
        } else {
            maximize_likelihood(&centers, values)
        };
        let fact = Factorization::build(&centers, values, &gammas).ok_or_else(|| {
            Error::LinearSolve(format!(
                "correlation matrix not factorizable with nugget up to {NUGGET_MAX:e}"
            ))
        })?;
        Ok(Self {
            centers,
            values: values.to_vec(),
            gammas,
            fact,
            degenerate,
        })
    }

    /// Kriging mean and mean squared error at `x`.
    pub fn predict(&self, x: &[f64]) -> (f64, f64) {
        let r: Vec<f64> = self.centers.iter().map(|c| corr(c, x, &self.gammas)).collect();
        let f = &self.fact;
        let mean = f.mu_hat + r.iter().zip(f.alpha.iter()).map(|(a, b)| a * b).sum::<f64>();
        let z = forward(&f.chol, &r);
        let r_rinv_r = z.norm_squared();
        let one_rinv_r: f64 = r.iter().zip(f.r_inv_one.iter()).map(|(a, b)| a * b).sum();
        let mse = f.sigma2_hat
            * (1.0 - r_rinv_r + (1.0 - one_rinv_r).powi(2) / f.one_r_inv_one);
        (mean, mse.max(0.0))
    }

    pub fn predict_point(&self, p: &LatticePoint) -> (f64, f64) {
        self.predict(&p.to_f64())
    }

    /// Expected improvement over `ell_best` at `x`.
    pub fn expected_improvement(&self, x: &[f64], ell_best: f64) -> f64 {
        let (mean, mse) = self.predict(x);
        expected_improvement(mean, mse.sqrt(), ell_best)
    }

    pub fn expected_improvement_at(&self, p: &LatticePoint, ell_best: f64) -> f64 {
        self.expected_improvement(&p.to_f64(), ell_best)
    }

    /// Training centers in lexicographic order.
    pub fn centers(&self) -> &[Vec<f64>] {
        &self.centers
    }

    /// Training values, aligned with [`GpModel::centers`].
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn gammas(&self) -> &[f64] {
        &self.gammas
    }

    pub fn mu_hat(&self) -> f64 {
        self.fact.mu_hat
    }

    pub fn sigma2_hat(&self) -> f64 {
        self.fact.sigma2_hat
    }

    /// Diagonal jitter that made `R` factorizable.
    pub fn nugget(&self) -> f64 {
        self.fact.nugget
    }

    /// `1ᵀR⁻¹1`
    pub fn one_r_inv_one(&self) -> f64 {
        self.fact.one_r_inv_one
    }

    /// Set when all training values coincide (`σ̂² = 0`).
    pub fn is_degenerate(&self) -> bool {
        self.degenerate
    }

    pub fn log_likelihood(&self) -> f64 {
        self.fact.log_likelihood(self.values.len())
    }

    /// Lower Cholesky factor of the (nugget-augmented) correlation matrix.
    pub fn cholesky_factor(&self) -> &DMatrix<f64> {
        &self.fact.chol
    }
}

/// Closed-form expected improvement for a normal predictive distribution.
pub fn expected_improvement(mean: f64, sigma: f64, ell_best: f64) -> f64 {
    if !(sigma > EI_SIGMA_CUTOFF) {
        return 0.0;
    }
    let v = (ell_best - mean) / sigma;
    (sigma * (v * normal_cdf(v) + normal_pdf(v))).max(0.0)
}

pub fn normal_cdf(v: f64) -> f64 {
    0.5 * erfc(-v / std::f64::consts::SQRT_2)
}

pub fn normal_pdf(v: f64) -> f64 {
    (-0.5 * v * v).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Multi-start pattern search on `log10 γ`.
fn maximize_likelihood(centers: &[Vec<f64>], values: &[f64]) -> Vec<f64> {
    let d = centers[0].len();
    let (lo, hi) = LOG10_GAMMA_BOUNDS;
    let eval = |x: &[f64]| {
        let g: Vec<f64> = x.iter().map(|v| 10f64.powf(*v)).collect();
        profile_log_likelihood(centers, values, &g)
    };

    // Latin hypercube of starts in log space
    let mut rng = rng_from(LIKELIHOOD_SEED, &[centers.len() as u64, d as u64]);
    let k = LIKELIHOOD_STARTS;
    let strata: Vec<Vec<usize>> = (0..d)
        .map(|_| {
            let mut s: Vec<usize> = (0..k).collect();
            s.shuffle(&mut rng);
            s
        })
        .collect();

    let mut best_x = vec![0.0; d];
    let mut best_f = f64::NEG_INFINITY;
    for start in 0..k {
        let mut x: Vec<f64> = (0..d)
            .map(|i| lo + (hi - lo) * (strata[i][start] as f64 + rng.random::<f64>()) / k as f64)
            .collect();
        let mut f = eval(&x);
        let mut step = 1.0;
        while step >= 1e-3 {
            let mut improved = false;
            for i in 0..d {
                for dir in [1.0, -1.0] {
                    let old = x[i];
                    let trial = (old + dir * step).clamp(lo, hi);
                    if trial == old {
                        continue;
                    }
                    x[i] = trial;
                    let ft = eval(&x);
                    if ft > f + 1e-12 {
                        f = ft;
                        improved = true;
                        break;
                    }
                    x[i] = old;
                }
            }
            if !improved {
                step *= 0.5;
            }
        }
        if f > best_f {
            best_f = f;
            best_x = x;
        }
    }
    best_x.iter().map(|v| 10f64.powf(*v)).collect()
}
