use serde::{Deserialize, Serialize};

use super::{CostMatrix, OtConfig};

/// Outcome of a Sinkhorn solve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SinkhornResult {
    /// Unregularised cost `<P, C>` of the entropic plan.
    pub cost: f64,
    pub converged: bool,
    pub iterations: usize,
    /// Largest row-marginal deviation at exit.
    pub marginal_error: f64,
}

fn log_sum_exp(it: impl Iterator<Item = f64> + Clone) -> f64 {
    let mx = it.clone().fold(f64::NEG_INFINITY, f64::max);
    if mx == f64::NEG_INFINITY {
        return mx;
    }
    mx + it.map(|v| (v - mx).exp()).sum::<f64>().ln()
}

/// Log-domain Sinkhorn on a precomputed cost matrix. Zero-mass atoms are
/// dropped before iterating.
pub fn sinkhorn_with_cost(cost: &CostMatrix, a: &[f64], b: &[f64], cfg: &OtConfig) -> SinkhornResult {
    let rows: Vec<usize> = (0..a.len()).filter(|&i| a[i] > 0.0).collect();
    let cols: Vec<usize> = (0..b.len()).filter(|&j| b[j] > 0.0).collect();
    let (n, m) = (rows.len(), cols.len());
    let c = if n == a.len() && m == b.len() {
        cost.clone()
    } else {
        cost.select(&rows, &cols)
    };
    let a: Vec<f64> = rows.iter().map(|&i| a[i]).collect();
    let b: Vec<f64> = cols.iter().map(|&j| b[j]).collect();

    if n == 1 || m == 1 {
        let total: f64 = (0..n)
            .flat_map(|i| (0..m).map(move |j| (i, j)))
            .map(|(i, j)| a[i] * b[j] * c.get(i, j))
            .sum();
        let mass = if n == 1 { a[0] } else { b[0] };
        return SinkhornResult {
            cost: total / mass,
            converged: true,
            iterations: 0,
            marginal_error: 0.0,
        };
    }

    let eps = cfg.epsilon.resolve(&c).max(f64::MIN_POSITIVE);
    let log_a: Vec<f64> = a.iter().map(|v| v.ln()).collect();
    let log_b: Vec<f64> = b.iter().map(|v| v.ln()).collect();
    let mut f = vec![0.0; n];
    let mut g = vec![0.0; m];
    let mut iterations = 0;
    let mut err = f64::INFINITY;
    let mut converged = false;

    while iterations < cfg.max_iter {
        iterations += 1;
        for i in 0..n {
            let row = c.row(i);
            let lse = log_sum_exp((0..m).map(|j| (g[j] - row[j]) / eps));
            f[i] = eps * log_a[i] - eps * lse;
        }
        for j in 0..m {
            let lse = log_sum_exp((0..n).map(|i| (f[i] - c.get(i, j)) / eps));
            g[j] = eps * log_b[j] - eps * lse;
        }
        // columns are exact after the g update; check the rows
        err = (0..n)
            .map(|i| {
                let row = c.row(i);
                let s: f64 = (0..m).map(|j| ((f[i] + g[j] - row[j]) / eps).exp()).sum();
                (s - a[i]).abs()
            })
            .fold(0.0, f64::max);
        if err < cfg.tol {
            converged = true;
            break;
        }
    }

    let mut total = 0.0;
    for i in 0..n {
        let row = c.row(i);
        for j in 0..m {
            total += ((f[i] + g[j] - row[j]) / eps).exp() * row[j];
        }
    }
    SinkhornResult {
        cost: total,
        converged,
        iterations,
        marginal_error: err,
    }
}
