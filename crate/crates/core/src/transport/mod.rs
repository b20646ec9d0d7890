//! Wasserstein distances between discrete measures: exact solvers and
//! log-domain Sinkhorn iteration.
//!
//! Every distance returned here is the transport cost `W_p^p` (no `1/p`
//! root).

mod assignment;
mod network_simplex;
mod sinkhorn;

pub use assignment::{solve_assignment, Assignment};
pub use network_simplex::transport_simplex;
pub use sinkhorn::{sinkhorn_with_cost, SinkhornResult};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const MASS_TOL: f64 = 1e-12;

/// Discrete probability measure over points of equal dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalMeasure {
    support: Vec<f64>,
    dim: usize,
    weights: Vec<f64>,
    uniform: bool,
}

impl EmpiricalMeasure {
    /// Mass `1/h` on each of the `h` points.
    pub fn uniform<'a, I>(points: I) -> Result<Self>
    where
        I: IntoIterator<Item = &'a [f64]>,
    {
        let (support, dim, n) = flatten(points)?;
        Ok(Self {
            support,
            dim,
            weights: vec![1.0 / n as f64; n],
            uniform: true,
        })
    }

    /// Weights must be non-negative and sum to one within `1e-12`.
    pub fn weighted<'a, I>(points: I, weights: Vec<f64>) -> Result<Self>
    where
        I: IntoIterator<Item = &'a [f64]>,
    {
        let (support, dim, n) = flatten(points)?;
        if weights.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: weights.len(),
            });
        }
        if weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
            return Err(Error::InvalidMeasure("weights must be finite and >= 0".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > MASS_TOL {
            return Err(Error::InvalidMeasure(format!(
                "weights sum to {total}, expected 1"
            )));
        }
        Ok(Self {
            support,
            dim,
            weights,
            uniform: false,
        })
    }

    /// Normalises arbitrary non-negative masses to a probability measure.
    pub fn from_masses<'a, I>(points: I, masses: &[f64]) -> Result<Self>
    where
        I: IntoIterator<Item = &'a [f64]>,
    {
        let total: f64 = masses.iter().sum();
        if !(total > 0.0) || !total.is_finite() {
            return Err(Error::InvalidMeasure("total mass must be positive".into()));
        }
        if masses.iter().any(|w| !(*w >= 0.0)) {
            return Err(Error::InvalidMeasure("masses must be >= 0".into()));
        }
        let mut m = Self::weighted(points, masses.iter().map(|w| w / total).collect())?;
        m.renormalize();
        Ok(m)
    }

    fn renormalize(&mut self) {
        let total: f64 = self.weights.iter().sum();
        self.weights.iter_mut().for_each(|w| *w /= total);
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.support[i * self.dim..(i + 1) * self.dim]
    }

    pub fn points(&self) -> impl ExactSizeIterator<Item = &[f64]> + Clone + '_ {
        self.support.chunks_exact(self.dim.max(1)).take(self.len())
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// True when built by [`EmpiricalMeasure::uniform`].
    pub fn is_uniform(&self) -> bool {
        self.uniform
    }

    fn check(&self) -> Result<()> {
        if self.is_empty() {
            return Err(Error::InvalidMeasure("empty support".into()));
        }
        let total: f64 = self.weights.iter().sum();
        if (total - 1.0).abs() > MASS_TOL {
            return Err(Error::InvalidMeasure(format!(
                "weights sum to {total}, expected 1"
            )));
        }
        Ok(())
    }
}

fn flatten<'a, I>(points: I) -> Result<(Vec<f64>, usize, usize)>
where
    I: IntoIterator<Item = &'a [f64]>,
{
    let mut support = Vec::new();
    let mut dim = None;
    let mut n = 0;
    for p in points {
        match dim {
            None => dim = Some(p.len()),
            Some(d) if d != p.len() => {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    got: p.len(),
                })
            }
            _ => {}
        }
        support.extend_from_slice(p);
        n += 1;
    }
    if n == 0 {
        return Err(Error::InvalidMeasure("empty support".into()));
    }
    Ok((support, dim.unwrap_or(0), n))
}

/// Dense row-major `rows x cols` matrix of ground costs.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl CostMatrix {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }

    pub fn max(&self) -> f64 {
        self.data.iter().cloned().fold(0.0, f64::max)
    }

    /// Sub-matrix on the given row and column indices.
    pub fn select(&self, rows: &[usize], cols: &[usize]) -> CostMatrix {
        let mut data = Vec::with_capacity(rows.len() * cols.len());
        for &i in rows {
            let r = self.row(i);
            data.extend(cols.iter().map(|&j| r[j]));
        }
        CostMatrix {
            rows: rows.len(),
            cols: cols.len(),
            data,
        }
    }
}

/// Ground cost `|x - y|^p` between two point lists.
pub fn pairwise_cost<'a, 'b>(
    a: impl ExactSizeIterator<Item = &'a [f64]>,
    b: impl ExactSizeIterator<Item = &'b [f64]> + Clone,
    p: f64,
) -> Result<CostMatrix> {
    let rows = a.len();
    let cols = b.len();
    let mut data = Vec::with_capacity(rows * cols);
    for x in a {
        for y in b.clone() {
            if x.len() != y.len() {
                return Err(Error::DimensionMismatch {
                    expected: x.len(),
                    got: y.len(),
                });
            }
            let sq: f64 = x.iter().zip(y).map(|(u, v)| (u - v) * (u - v)).sum();
            data.push(ground_cost(sq, p));
        }
    }
    Ok(CostMatrix { rows, cols, data })
}

#[inline]
pub(crate) fn ground_cost(squared_distance: f64, p: f64) -> f64 {
    if p == 2.0 {
        squared_distance
    } else if p == 1.0 {
        squared_distance.sqrt()
    } else {
        squared_distance.sqrt().powf(p)
    }
}

/// `C[i][j] = |a_i - b_j|_2^p`.
pub fn cost_matrix(a: &EmpiricalMeasure, b: &EmpiricalMeasure, p: f64) -> Result<CostMatrix> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            got: b.dim(),
        });
    }
    pairwise_cost(a.points(), b.points(), p)
}

/// Entropic regularisation strength.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Epsilon {
    /// Fixed value in cost units.
    Absolute(f64),
    /// Multiple of the instance's mean ground cost.
    RelativeToMeanCost(f64),
}

impl Epsilon {
    pub fn resolve(&self, cost: &CostMatrix) -> f64 {
        match *self {
            Epsilon::Absolute(e) => e,
            Epsilon::RelativeToMeanCost(r) => r * cost.mean(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OtConfig {
    pub p: f64,
    pub epsilon: Epsilon,
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for OtConfig {
    fn default() -> Self {
        Self {
            p: 2.0,
            epsilon: Epsilon::RelativeToMeanCost(0.01),
            max_iter: 10_000,
            tol: 1e-6,
        }
    }
}

impl OtConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.p >= 1.0) {
            return Err(Error::param(format!("p must be >= 1, got {}", self.p)));
        }
        let e = match self.epsilon {
            Epsilon::Absolute(e) | Epsilon::RelativeToMeanCost(e) => e,
        };
        if !(e > 0.0) {
            return Err(Error::param("epsilon must be > 0"));
        }
        if !(self.tol > 0.0) {
            return Err(Error::param("tol must be > 0"));
        }
        if self.max_iter == 0 {
            return Err(Error::param("max_iter must be >= 1"));
        }
        Ok(())
    }
}

/// Exact optimal transport cost for a precomputed cost matrix and marginals.
/// Uniform equal-size marginals go through the assignment solver, anything
/// else through the transportation simplex.
pub fn exact_with_cost(cost: &CostMatrix, a: &[f64], b: &[f64], uniform: bool) -> f64 {
    if uniform && cost.rows == cost.cols {
        solve_assignment(cost).cost / cost.rows as f64
    } else {
        transport_simplex(cost, a, b)
    }
}

/// Exact `W_p^p(a, b)`.
pub fn wasserstein_exact(a: &EmpiricalMeasure, b: &EmpiricalMeasure, p: f64) -> Result<f64> {
    a.check()?;
    b.check()?;
    let cost = cost_matrix(a, b, p)?;
    let uniform = a.is_uniform() && b.is_uniform();
    Ok(exact_with_cost(&cost, a.weights(), b.weights(), uniform))
}

/// Unregularised transport cost of the entropic plan.
pub fn wasserstein_sinkhorn(
    a: &EmpiricalMeasure,
    b: &EmpiricalMeasure,
    cfg: &OtConfig,
) -> Result<SinkhornResult> {
    cfg.validate()?;
    a.check()?;
    b.check()?;
    let cost = cost_matrix(a, b, cfg.p)?;
    Ok(sinkhorn_with_cost(&cost, a.weights(), b.weights(), cfg))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn m(pts: &[&[f64]]) -> EmpiricalMeasure {
        EmpiricalMeasure::uniform(pts.iter().copied()).unwrap()
    }

    #[test]
    fn cost_examples() {
        let c = cost_matrix(&m(&[&[0.0]]), &m(&[&[3.0]]), 2.0).unwrap();
        assert_eq!(c.data, vec![9.0]);
        let a = m(&[&[0.0, 0.0], &[1.0, 0.0]]);
        let c = cost_matrix(&a, &m(&[&[0.0, 1.0]]), 1.0).unwrap();
        assert_abs_diff_eq!(c.get(0, 0), 1.0);
        assert_abs_diff_eq!(c.get(1, 0), 2f64.sqrt(), epsilon = 1e-15);
        let c = cost_matrix(&a, &a, 1.5).unwrap();
        assert_eq!(c.get(0, 0), 0.0);
        assert_eq!(c.get(1, 1), 0.0);
        assert!(c.data.iter().all(|v| *v >= 0.0));
    }

    #[test]
    fn dimension_mismatch() {
        let err = cost_matrix(&m(&[&[0.0]]), &m(&[&[0.0, 1.0]]), 2.0);
        assert!(matches!(err, Err(Error::DimensionMismatch { .. })));
        assert!(EmpiricalMeasure::uniform([[0.0].as_slice(), [1.0, 2.0].as_slice()]).is_err());
    }

    #[test]
    fn measure_validation() {
        let pts: [&[f64]; 2] = [&[0.0], &[1.0]];
        assert!(EmpiricalMeasure::weighted(pts, vec![0.5, 0.6]).is_err());
        assert!(EmpiricalMeasure::weighted(pts, vec![1.5, -0.5]).is_err());
        assert!(EmpiricalMeasure::uniform(std::iter::empty::<&[f64]>()).is_err());
        let u = m(&pts);
        assert_eq!(u.weights(), &[0.5, 0.5]);
        let w = EmpiricalMeasure::from_masses(pts, &[3.0, 1.0]).unwrap();
        assert_eq!(w.weights(), &[0.75, 0.25]);
    }

    #[test]
    fn exact_examples() {
        let a = m(&[&[0.0], &[1.0]]);
        let b = m(&[&[2.0], &[3.0]]);
        assert_abs_diff_eq!(wasserstein_exact(&a, &b, 1.0).unwrap(), 2.0, epsilon = 1e-12);
        assert_eq!(wasserstein_exact(&a, &a, 2.0).unwrap(), 0.0);
    }

    #[test]
    fn single_point_sinkhorn_is_forced() {
        let a = m(&[&[0.0, 1.0, 2.0]]);
        let b = m(&[&[1.0, -1.0, 4.0]]);
        for eps in [1e-3, 1.0, 100.0] {
            let cfg = OtConfig { epsilon: Epsilon::Absolute(eps), ..Default::default() };
            let r = wasserstein_sinkhorn(&a, &b, &cfg).unwrap();
            assert_eq!(r.cost, 9.0);
            assert!(r.converged);
        }
    }

    #[test]
    fn config_validation() {
        assert!(OtConfig { p: 0.5, ..Default::default() }.validate().is_err());
        assert!(OtConfig { epsilon: Epsilon::Absolute(0.0), ..Default::default() }.validate().is_err());
        assert!(OtConfig { tol: 0.0, ..Default::default() }.validate().is_err());
        OtConfig::default().validate().unwrap();
    }
}
