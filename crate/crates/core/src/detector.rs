//! Second sliding window over the point cloud: per-position Wasserstein
//! distances between the two halves and their maximum.

use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::embedding::PointCloud;
use crate::error::{Error, Result};
use crate::transport::{
    exact_with_cost, ground_cost, sinkhorn_with_cost, CostMatrix, EmpiricalMeasure, OtConfig,
};

/// Largest half-window solved exactly unless told otherwise.
pub const EXACT_MAX_H: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectorConfig {
    /// Half-window, in cloud points.
    pub h: usize,
    /// Step between window centres, in cloud points.
    pub stride: usize,
    pub ot: OtConfig,
    pub use_exact: bool,
}

impl DetectorConfig {
    pub fn new(h: usize) -> Self {
        Self {
            h,
            stride: 1,
            ot: OtConfig::default(),
            use_exact: h <= EXACT_MAX_H,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.h < 2 {
            return Err(Error::param(format!("h must be >= 2, got {}", self.h)));
        }
        if self.stride == 0 {
            return Err(Error::param("stride must be >= 1"));
        }
        self.ot.validate()
    }

    pub fn check_cloud(&self, n_points: usize) -> Result<()> {
        if 2 * self.h > n_points {
            return Err(Error::SeriesTooShort {
                needed: 2 * self.h,
                got: n_points,
            });
        }
        Ok(())
    }

    /// Window centres `h, h + stride, ..., <= n - h`.
    pub fn taus(&self, n_points: usize) -> Vec<usize> {
        if 2 * self.h > n_points {
            return Vec::new();
        }
        (self.h..=n_points - self.h).step_by(self.stride).collect()
    }
}

/// Cloud points per signal period.
pub fn points_per_loop(period_samples: usize, dt: usize) -> usize {
    ((period_samples as f64 / dt as f64).round() as usize).max(1)
}

/// Half-window covering `loops_per_half` curve loops.
pub fn half_window(loops_per_half: usize, period_samples: usize, dt: usize) -> usize {
    loops_per_half * points_per_loop(period_samples, dt)
}

/// Uniform measures on points `[tau - h, tau)` and `[tau, tau + h)`.
pub fn split_window(
    cloud: &PointCloud,
    tau: usize,
    h: usize,
) -> Result<(EmpiricalMeasure, EmpiricalMeasure)> {
    check_tau(cloud.len(), tau, h)?;
    let left = EmpiricalMeasure::uniform((tau - h..tau).map(|i| cloud.point(i)))?;
    let right = EmpiricalMeasure::uniform((tau..tau + h).map(|i| cloud.point(i)))?;
    Ok((left, right))
}

fn check_tau(n: usize, tau: usize, h: usize) -> Result<()> {
    if h == 0 || tau < h || tau + h > n {
        return Err(Error::WindowOutOfRange {
            tau,
            lo: h,
            hi: n.saturating_sub(h),
        });
    }
    Ok(())
}

/// Cost between the halves of the window centred at `tau`, rows on the left.
pub(crate) fn window_cost(cloud: &PointCloud, tau: usize, h: usize, p: f64) -> CostMatrix {
    let dim = cloud.dim();
    let flat = cloud.flat();
    let mut data = Vec::with_capacity(h * h);
    for i in tau - h..tau {
        let x = &flat[i * dim..(i + 1) * dim];
        for j in tau..tau + h {
            let y = &flat[j * dim..(j + 1) * dim];
            let sq: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
            data.push(ground_cost(sq, p));
        }
    }
    CostMatrix {
        rows: h,
        cols: h,
        data,
    }
}

/// Solves one transport problem per the detector's solver choice.
/// Returns the cost and whether the solver converged.
pub(crate) fn solve(
    cost: &CostMatrix,
    a: &[f64],
    b: &[f64],
    uniform: bool,
    cfg: &DetectorConfig,
) -> (f64, bool) {
    if cfg.use_exact {
        (exact_with_cost(cost, a, b, uniform), true)
    } else {
        let r = sinkhorn_with_cost(cost, a, b, &cfg.ot);
        (r.cost.max(0.0), r.converged)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WassersteinSeries {
    pub taus: Vec<usize>,
    /// `W_p^p` per window centre.
    pub values: Vec<f64>,
    /// Source sample indices of the first and last cloud point of each
    /// window.
    pub source_spans: Vec<(usize, usize)>,
    /// Windows whose Sinkhorn solve hit the iteration cap.
    #[serde(default)]
    pub unconverged: usize,
}

impl WassersteinSeries {
    pub fn len(&self) -> usize {
        self.taus.len()
    }

    pub fn is_empty(&self) -> bool {
        self.taus.is_empty()
    }

    /// Writes `tau,value,src_start,src_end` rows.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut out = String::from("tau,value,src_start,src_end\n");
        for k in 0..self.len() {
            let (s, e) = self.source_spans[k];
            out.push_str(&format!("{},{:?},{s},{e}\n", self.taus[k], self.values[k]));
        }
        let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(out.as_bytes()).map_err(|e| Error::io(path, e))
    }
}

pub fn wasserstein_series(cloud: &PointCloud, cfg: &DetectorConfig) -> Result<WassersteinSeries> {
    cfg.validate()?;
    cfg.check_cloud(cloud.len())?;
    let h = cfg.h;
    let taus = cfg.taus(cloud.len());
    let u = vec![1.0 / h as f64; h];
    let solved: Vec<(f64, bool)> = taus
        .par_iter()
        .map(|&tau| solve(&window_cost(cloud, tau, h, cfg.ot.p), &u, &u, true, cfg))
        .collect();
    let src = cloud.source_index();
    Ok(WassersteinSeries {
        source_spans: taus.iter().map(|&t| (src[t - h], src[t + h - 1])).collect(),
        values: solved.iter().map(|s| s.0).collect(),
        unconverged: solved.iter().filter(|s| !s.1).count(),
        taus,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChangeStatistic {
    pub value: f64,
    pub argmax_tau: usize,
}

/// Maximum of the series; ties go to the smallest centre.
pub fn change_statistic(series: &WassersteinSeries) -> Result<ChangeStatistic> {
    if series.is_empty() {
        return Err(Error::Empty("wasserstein series"));
    }
    let mut best = 0;
    for (k, v) in series.values.iter().enumerate() {
        if *v > series.values[best] {
            best = k;
        }
    }
    Ok(ChangeStatistic {
        value: series.values[best],
        argmax_tau: series.taus[best],
    })
}
