//! Nonnegative least squares by the Lawson–Hanson active-set method.

use nalgebra::{DMatrix, DVector};

/// Minimises `‖Ax − b‖` subject to `x ≥ 0`.
pub fn nnls(a: &DMatrix<f64>, b: &DVector<f64>, tol: f64) -> DVector<f64> {
    let n = a.ncols();
    let mut x = DVector::zeros(n);
    let mut passive = vec![false; n];
    let max_outer = 3 * n + 30;
    for _ in 0..max_outer {
        let w = a.transpose() * (b - a * &x);
        let candidate = (0..n)
            .filter(|&j| !passive[j] && w[j] > tol)
            .max_by(|&i, &j| w[i].total_cmp(&w[j]));
        let Some(j) = candidate else { break };
        passive[j] = true;
        for _ in 0..max_outer {
            let idx: Vec<usize> = (0..n).filter(|&k| passive[k]).collect();
            let sub = a.select_columns(&idx);
            let zp = sub
                .svd(true, true)
                .solve(b, 1e-14)
                .expect("svd has both factors");
            let mut z = DVector::zeros(n);
            for (pos, &k) in idx.iter().enumerate() {
                z[k] = zp[pos];
            }
            if idx.iter().all(|&k| z[k] > tol) {
                x = z;
                break;
            }
            let alpha = idx
                .iter()
                .filter(|&&k| z[k] <= tol)
                .map(|&k| x[k] / (x[k] - z[k]))
                .fold(f64::INFINITY, f64::min);
            x += alpha * (&z - &x);
            for &k in &idx {
                if x[k] <= tol {
                    x[k] = 0.0;
                    passive[k] = false;
                }
            }
            if !passive.iter().any(|&p| p) {
                break;
            }
        }
    }
    x
}
