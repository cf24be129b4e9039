#![allow(dead_code)]

/// Solves `a x = b` by Gaussian elimination with partial pivoting.
pub fn gauss_solve(a: &[Vec<f64>], b: &[f64]) -> Vec<f64> {
    let n = b.len();
    let mut m: Vec<Vec<f64>> = a
        .iter()
        .zip(b)
        .map(|(row, &bi)| {
            let mut r = row.clone();
            r.push(bi);
            r
        })
        .collect();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs()))
            .unwrap();
        m.swap(col, pivot);
        for row in col + 1..n {
            let f = m[row][col] / m[col][col];
            if f != 0.0 {
                for k in col..=n {
                    m[row][k] -= f * m[col][k];
                }
            }
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|k| m[row][k] * x[k]).sum();
        x[row] = (m[row][n] - s) / m[row][row];
    }
    x
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Kriging predictor recomputed from scratch with dense solves.
///
/// `R` is the correlation matrix (plus `nugget` on its diagonal), the mean
/// is the generalized least-squares constant and the error is the
/// constant-mean kriging variance.
pub fn kriging_oracle(
    centers: &[Vec<f64>],
    values: &[f64],
    gammas: &[f64],
    nugget: f64,
    x: &[f64],
) -> (f64, f64, f64, f64) {
    let n = centers.len();
    let corr = |a: &[f64], b: &[f64]| -> f64 {
        (-a.iter().zip(b).zip(gammas).map(|((p, q), g)| g * (p - q).powi(2)).sum::<f64>()).exp()
    };
    let r_mat: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| corr(&centers[i], &centers[j]) + if i == j { nugget } else { 0.0 })
                .collect()
        })
        .collect();
    let ones = vec![1.0; n];
    let rinv_one = gauss_solve(&r_mat, &ones);
    let rinv_y = gauss_solve(&r_mat, values);
    let one_rinv_one = dot(&ones, &rinv_one);
    let mu = dot(&ones, &rinv_y) / one_rinv_one;
    let resid: Vec<f64> = values.iter().map(|y| y - mu).collect();
    let rinv_resid = gauss_solve(&r_mat, &resid);
    let sigma2 = dot(&resid, &rinv_resid) / n as f64;
    let r: Vec<f64> = centers.iter().map(|c| corr(c, x)).collect();
    let rinv_r = gauss_solve(&r_mat, &r);
    let mean = mu + dot(&r, &rinv_resid);
    let mse = sigma2 * (1.0 - dot(&r, &rinv_r) + (1.0 - dot(&ones, &rinv_r)).powi(2) / one_rinv_one);
    (mean, mse, mu, sigma2)
}

/// Cubic radial basis interpolant with linear tail, solved densely.
/// Returns `(lambda, beta0, beta)`.
pub fn rbf_oracle(centers: &[Vec<f64>], values: &[f64]) -> (Vec<f64>, f64, Vec<f64>) {
    let n = centers.len();
    let d = centers[0].len();
    let size = n + d + 1;
    let mut a = vec![vec![0.0; size]; size];
    for i in 0..n {
        for j in 0..n {
            let r = centers[i]
                .iter()
                .zip(&centers[j])
                .map(|(p, q)| (p - q).powi(2))
                .sum::<f64>()
                .sqrt();
            a[i][j] = r.powi(3);
        }
        a[i][n] = 1.0;
        a[n][i] = 1.0;
        for k in 0..d {
            a[i][n + 1 + k] = centers[i][k];
            a[n + 1 + k][i] = centers[i][k];
        }
    }
    let mut rhs = values.to_vec();
    rhs.extend(std::iter::repeat_n(0.0, d + 1));
    let sol = gauss_solve(&a, &rhs);
    (sol[..n].to_vec(), sol[n], sol[n + 1..].to_vec())
}
