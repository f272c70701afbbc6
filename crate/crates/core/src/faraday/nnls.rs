//! Lawson-Hanson nonnegative least squares.

use nalgebra::{DMatrix, DVector};

/// Minimizes `|A x - b|` over `x >= 0`.
pub fn nnls(a: &DMatrix<f64>, b: &DVector<f64>, max_iter: usize) -> DVector<f64> {
    let n = a.ncols();
    let mut x = DVector::zeros(n);
    let mut passive = vec![false; n];
    let scale = a.abs().max().max(f64::MIN_POSITIVE);
    let tol = 1e-14 * scale * b.norm().max(1.0) * (n as f64);

    for _ in 0..max_iter {
        let w = a.transpose() * (b - a * &x);
        let next = (0..n)
            .filter(|&j| !passive[j] && w[j] > tol)
            .max_by(|&i, &j| w[i].total_cmp(&w[j]));
        let Some(j) = next else { break };
        passive[j] = true;

        loop {
            let idx: Vec<usize> = (0..n).filter(|&k| passive[k]).collect();
            let z = solve_passive(a, b, &idx);
            if idx.iter().zip(z.iter()).all(|(_, v)| *v > 0.0) {
                x.fill(0.0);
                for (k, v) in idx.iter().zip(z.iter()) {
                    x[*k] = *v;
                }
                break;
            }
            // Step back toward the feasible region.
            let mut alpha = f64::INFINITY;
            for (k, v) in idx.iter().zip(z.iter()) {
                if *v <= 0.0 {
                    alpha = alpha.min(x[*k] / (x[*k] - v));
                }
            }
            for (k, v) in idx.iter().zip(z.iter()) {
                x[*k] += alpha * (v - x[*k]);
                if x[*k] <= 1e-300 {
                    x[*k] = 0.0;
                    passive[*k] = false;
                }
            }
            if idx.iter().all(|k| !passive[*k]) {
                break;
            }
        }
    }
    x
}

fn solve_passive(a: &DMatrix<f64>, b: &DVector<f64>, idx: &[usize]) -> DVector<f64> {
    let sub = a.select_columns(idx);
    let svd = sub.svd(true, true);
    let smax = svd.singular_values.max();
    svd.solve(b, 1e-13 * smax)
        .map(|m| m.column(0).into_owned())
        .unwrap_or_else(|_| DVector::zeros(idx.len()))
}
