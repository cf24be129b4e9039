//! Cubic radial basis function interpolant with a linear polynomial tail.
//!
//! The model is `m(x) = Σ λ_j ‖x − x_j‖³ + β₀ + βᵀx`. Coefficients come from
//! the saddle-point system
//!
//! ```text
//! | Φ   P | | λ |   | ℓ |
//! | Pᵀ  0 | | β̃ | = | 0 |
//! ```
//!
//! with `Φ_kl = ‖x_k − x_l‖³` and `P = [X 1]`. The system is nonsingular
//! exactly when the centers are distinct and `rank(P) = d + 1`.

use nalgebra::{DMatrix, DVector};

use crate::domain::LatticePoint;
use crate::error::{Error, Result};

/// Condition number above which `Φ` is regularized before solving.
pub const CONDITION_LIMIT: f64 = 1e12;

#[derive(Debug, Clone)]
pub struct RbfModel {
    centers: Vec<Vec<f64>>,
    lambdas: Vec<f64>,
    beta: Vec<f64>,
    beta0: f64,
    regularized: bool,
}

#[inline]
fn cubic(a: &[f64], b: &[f64]) -> f64 {
    let r2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    r2 * r2.sqrt()
}

/// Fits the interpolant on lattice points (mapped integer coordinates).
pub fn fit_rbf(points: &[LatticePoint], values: &[f64]) -> Result<RbfModel> {
    RbfModel::fit(points.iter().map(LatticePoint::to_f64).collect(), values)
}

impl RbfModel {
    /// Fits the interpolant on arbitrary real centers.
    pub fn fit(centers: Vec<Vec<f64>>, values: &[f64]) -> Result<Self> {
        let n = centers.len();
        if n != values.len() {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: values.len(),
            });
        }
        let d = centers.first().map_or(0, Vec::len);
        if d == 0 || n < d + 1 {
            return Err(Error::TooFewPoints {
                required: d + 1,
                got: n,
            });
        }
        if let Some(c) = centers.iter().find(|c| c.len() != d) {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: c.len(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("rbf values"));
        }
        for j in 1..n {
            if centers[..j].iter().any(|c| c == &centers[j]) {
                return Err(Error::DuplicatePoint(j));
            }
        }

        let tail = DMatrix::from_fn(n, d + 1, |i, k| if k < d { centers[i][k] } else { 1.0 });
        let rank = tail.clone().svd(false, false).rank(1e-10 * (n as f64).sqrt() * max_abs(&tail));
        if rank < d + 1 {
            return Err(Error::NonInvertibleDesign {
                rank,
                required: d + 1,
            });
        }

        let m = n + d + 1;
        let mut system = DMatrix::<f64>::zeros(m, m);
        for k in 0..n {
            for l in (k + 1)..n {
                let phi = cubic(&centers[k], &centers[l]);
                system[(k, l)] = phi;
                system[(l, k)] = phi;
            }
        }
        system.view_mut((0, n), (n, d + 1)).copy_from(&tail);
        system.view_mut((n, 0), (d + 1, n)).copy_from(&tail.transpose());
        let mut rhs = DVector::<f64>::zeros(m);
        rhs.rows_mut(0, n).copy_from_slice(values);

        let mut regularized = false;
        let sv = system.clone().svd(false, false).singular_values;
        let smin = sv.min();
        if smin <= 0.0 || sv.max() / smin > CONDITION_LIMIT {
            // Φ has a zero diagonal, so the shift is scaled by its mean magnitude.
            let phi_scale = system.view((0, 0), (n, n)).iter().map(|x| x.abs()).sum::<f64>()
                / (n * n) as f64;
            let shift = 1e-10 * phi_scale.max(1.0);
            for k in 0..n {
                system[(k, k)] += shift;
            }
            regularized = true;
        }

        let lu = system.clone().lu();
        let mut sol = lu
            .solve(&rhs)
            .ok_or_else(|| Error::LinearSolve("singular RBF system".into()))?;
        // one step of iterative refinement
        let residual = &rhs - &system * &sol;
        if let Some(correction) = lu.solve(&residual) {
            sol += correction;
        }
        if sol.iter().any(|x| !x.is_finite()) {
            return Err(Error::LinearSolve("non-finite RBF coefficients".into()));
        }

        Ok(Self {
            lambdas: sol.rows(0, n).iter().copied().collect(),
            beta: sol.rows(n, d).iter().copied().collect(),
            beta0: sol[n + d],
            centers,
            regularized,
        })
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        let kernel: f64 = self
            .centers
            .iter()
            .zip(&self.lambdas)
            .map(|(c, l)| l * cubic(c, x))
            .sum();
        let linear: f64 = self.beta.iter().zip(x).map(|(b, xi)| b * xi).sum();
        kernel + self.beta0 + linear
    }

    pub fn predict_point(&self, p: &LatticePoint) -> f64 {
        self.predict(&p.to_f64())
    }

    pub fn centers(&self) -> &[Vec<f64>] {
        &self.centers
    }

    pub fn lambdas(&self) -> &[f64] {
        &self.lambdas
    }

    pub fn beta(&self) -> &[f64] {
        &self.beta
    }

    pub fn beta0(&self) -> f64 {
        self.beta0
    }

    /// True when `Φ` had to be shifted to make the system solvable.
    pub fn is_regularized(&self) -> bool {
        self.regularized
    }

    /// `‖Pᵀλ‖∞`, zero for an exact solve.
    pub fn orthogonality_residual(&self) -> f64 {
        let d = self.beta.len();
        let mut worst = self.lambdas.iter().sum::<f64>().abs();
        for k in 0..d {
            let s: f64 = self.centers.iter().zip(&self.lambdas).map(|(c, l)| c[k] * l).sum();
            worst = worst.max(s.abs());
        }
        worst
    }
}

fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0f64, |a, x| a.max(x.abs()))
}
