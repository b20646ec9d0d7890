//! Moving-block bootstrap of the change point statistic, the threshold it
//! induces and the flagged source intervals.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::detector::{
    change_statistic, solve, wasserstein_series, window_cost, ChangeStatistic, DetectorConfig,
    WassersteinSeries,
};
use crate::embedding::PointCloud;
use crate::error::{Error, Result};
use crate::transport::{ground_cost, CostMatrix};

/// Redraw budget for replicates that leave a half-window without mass.
pub const MAX_REDRAWS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightScheme {
    /// Block multiplicities of `n_blocks` uniform draws with replacement.
    Multinomial,
    /// Independent `Exp(1)` multipliers.
    ExponentialUnitMean,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Resampling {
    /// Fixed consecutive blocks, each carrying a random weight.
    Weighted,
    /// Each half-window is compared with the adjacent stretch on its own
    /// side of the window: the two half-windows of that context are
    /// reweighted, and the replicate is the cost of moving the resulting mass
    /// imbalance across the context. Contexts never straddle the location of
    /// the observed maximum.
    Centered,
    /// Blocks of consecutive points starting anywhere in the cloud are drawn
    /// with replacement and concatenated; measures stay uniform.
    Shuffled,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BootstrapConfig {
    pub replications: usize,
    /// Block length in cloud points.
    pub block_len: usize,
    pub alpha: f64,
    pub seed: u64,
    pub weight_scheme: WeightScheme,
    pub resampling: Resampling,
    /// Multiplier on centered replicates.
    #[serde(default = "default_inflation")]
    pub inflation: f64,
}

/// Default multiplier on centered replicates.
pub const DEFAULT_INFLATION: f64 = 4.5;

fn default_inflation() -> f64 {
    DEFAULT_INFLATION
}

impl BootstrapConfig {
    pub fn new(block_len: usize) -> Self {
        Self {
            replications: 500,
            block_len,
            alpha: 0.05,
            seed: 0,
            weight_scheme: WeightScheme::ExponentialUnitMean,
            resampling: Resampling::Centered,
            inflation: DEFAULT_INFLATION,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.replications < 100 {
            return Err(Error::param(format!(
                "replications must be >= 100, got {}",
                self.replications
            )));
        }
        if self.block_len == 0 {
            return Err(Error::param("block_len must be >= 1"));
        }
        if !(self.inflation.is_finite() && self.inflation > 0.0) {
            return Err(Error::param(format!("inflation must be > 0, got {}", self.inflation)));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::param(format!("alpha must be in (0, 1), got {}", self.alpha)));
        }
        Ok(())
    }
}

/// Consecutive blocks `[start, end)` covering `[0, n_points)`; the last may
/// be short.
pub fn mbb_blocks(n_points: usize, block_len: usize) -> Vec<(usize, usize)> {
    assert!(block_len >= 1, "block_len must be >= 1");
    (0..n_points)
        .step_by(block_len)
        .map(|s| (s, (s + block_len).min(n_points)))
        .collect()
}

pub fn mbb_weights<R: Rng + ?Sized>(n_blocks: usize, scheme: WeightScheme, rng: &mut R) -> Vec<f64> {
    match scheme {
        WeightScheme::ExponentialUnitMean => (0..n_blocks).map(|_| Exp1.sample(rng)).collect(),
        WeightScheme::Multinomial => {
            let mut counts = vec![0.0; n_blocks];
            for _ in 0..n_blocks {
                counts[rng.random_range(0..n_blocks)] += 1.0;
            }
            counts
        }
    }
}

/// RNG for replicate `b`, independent of scheduling.
pub fn replicate_rng(seed: u64, b: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(b as u64);
    rng
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapSample {
    /// `T^b` per replicate, in replicate order.
    pub statistics: Vec<f64>,
    pub threshold: f64,
    /// Weight vectors rejected for leaving a half-window empty.
    pub redraws: usize,
    /// Sinkhorn solves that hit the iteration cap.
    pub unconverged: usize,
}

/// Order statistic at `ceil((1 - alpha) * B) - 1` of the sorted sample.
pub fn quantile_threshold(statistics: &[f64], alpha: f64) -> Result<f64> {
    if statistics.is_empty() {
        return Err(Error::Empty("bootstrap statistics"));
    }
    let mut sorted = statistics.to_vec();
    sorted.sort_by(f64::total_cmp);
    let b = sorted.len() as f64;
    let k = (((1.0 - alpha) * b) - 1e-9).ceil().max(1.0) as usize;
    Ok(sorted[k.min(sorted.len()) - 1])
}

pub fn bootstrap_statistic(
    cloud: &PointCloud,
    dcfg: &DetectorConfig,
    bcfg: &BootstrapConfig,
) -> Result<BootstrapSample> {
    let series = match bcfg.resampling {
        Resampling::Centered => Some(wasserstein_series(cloud, dcfg)?),
        _ => None,
    };
    bootstrap_with_series(cloud, dcfg, bcfg, series.as_ref())
}

/// As [`bootstrap_statistic`], reusing an already computed series for the
/// centered scheme.
fn bootstrap_with_series(
    cloud: &PointCloud,
    dcfg: &DetectorConfig,
    bcfg: &BootstrapConfig,
    series: Option<&WassersteinSeries>,
) -> Result<BootstrapSample> {
    dcfg.validate()?;
    bcfg.validate()?;
    dcfg.check_cloud(cloud.len())?;
    if bcfg.block_len > cloud.len() {
        return Err(Error::param(format!(
            "block_len {} exceeds cloud size {}",
            bcfg.block_len,
            cloud.len()
        )));
    }
    let (statistics, redraws, unconverged) = match bcfg.resampling {
        Resampling::Weighted => weighted_replicates(cloud, dcfg, bcfg)?,
        Resampling::Centered => match series {
            Some(series) => centered_replicates(cloud, dcfg, bcfg, series)?,
            None => centered_replicates(cloud, dcfg, bcfg, &wasserstein_series(cloud, dcfg)?)?,
        },
        Resampling::Shuffled => shuffled_replicates(cloud, dcfg, bcfg),
    };
    Ok(BootstrapSample {
        threshold: quantile_threshold(&statistics, bcfg.alpha)?,
        statistics,
        redraws,
        unconverged,
    })
}

/// Per-point weights, one vector per replicate.
fn draw_point_weights(
    n: usize,
    taus: &[usize],
    h: usize,
    bcfg: &BootstrapConfig,
) -> Result<(Vec<Vec<f64>>, usize)> {
    let blocks = mbb_blocks(n, bcfg.block_len);
    let mut redraws = 0;
    let mut out = Vec::with_capacity(bcfg.replications);
    for b in 0..bcfg.replications {
        let mut rng = replicate_rng(bcfg.seed, b);
        let mut attempt = 0;
        loop {
            let w = mbb_weights(blocks.len(), bcfg.weight_scheme, &mut rng);
            let mut point = vec![0.0; n];
            for (&(s, e), wk) in blocks.iter().zip(&w) {
                point[s..e].iter_mut().for_each(|p| *p = *wk);
            }
            if halves_have_mass(&point, taus, h) {
                out.push(point);
                break;
            }
            redraws += 1;
            attempt += 1;
            if attempt >= MAX_REDRAWS {
                return Err(Error::param(format!(
                    "replicate {b}: every one of {MAX_REDRAWS} weight draws left a half-window empty"
                )));
            }
        }
    }
    Ok((out, redraws))
}

fn halves_have_mass(point: &[f64], taus: &[usize], h: usize) -> bool {
    // prefix sums of positivity make each check O(1)
    let mut pos = vec![0usize; point.len() + 1];
    for (i, w) in point.iter().enumerate() {
        pos[i + 1] = pos[i] + usize::from(*w > 0.0);
    }
    taus.iter()
        .all(|&t| pos[t] > pos[t - h] && pos[t + h] > pos[t])
}

fn normalized(w: &[f64]) -> Vec<f64> {
    let total: f64 = w.iter().sum();
    w.iter().map(|v| v / total).collect()
}

fn weighted_replicates(
    cloud: &PointCloud,
    dcfg: &DetectorConfig,
    bcfg: &BootstrapConfig,
) -> Result<(Vec<f64>, usize, usize)> {
    let h = dcfg.h;
    let taus = dcfg.taus(cloud.len());
    let (weights, redraws) = draw_point_weights(cloud.len(), &taus, h, bcfg)?;
    let reps = bcfg.replications;

    let (stats, unconverged) = taus
        .par_iter()
        .fold(
            || (vec![0.0f64; reps], 0usize),
            |(mut best, mut bad), &tau| {
                let cost = window_cost(cloud, tau, h, dcfg.ot.p);
                for (b, w) in weights.iter().enumerate() {
                    let v = solve_weighted(&cost, &w[tau - h..tau], &w[tau..tau + h], dcfg);
                    if !v.1 {
                        bad += 1;
                    }
                    if v.0 > best[b] {
                        best[b] = v.0;
                    }
                }
                (best, bad)
            },
        )
        .reduce(
            || (vec![0.0f64; reps], 0usize),
            |(mut a, x), (b, y)| {
                for (p, q) in a.iter_mut().zip(b) {
                    *p = p.max(q);
                }
                (a, x + y)
            },
        );
    Ok((stats, redraws, unconverged))
}

/// Drops zero-weight points, then solves on the renormalised halves.
fn solve_weighted(cost: &CostMatrix, wl: &[f64], wr: &[f64], dcfg: &DetectorConfig) -> (f64, bool) {
    let uniform = wl.iter().all(|w| *w == wl[0]) && wr.iter().all(|w| *w == wr[0]);
    if uniform {
        let a = vec![1.0 / wl.len() as f64; wl.len()];
        let b = vec![1.0 / wr.len() as f64; wr.len()];
        return solve(cost, &a, &b, true, dcfg);
    }
    let rows: Vec<usize> = (0..wl.len()).filter(|&i| wl[i] > 0.0).collect();
    let cols: Vec<usize> = (0..wr.len()).filter(|&j| wr[j] > 0.0).collect();
    let a = normalized(&rows.iter().map(|&i| wl[i]).collect::<Vec<_>>());
    let b = normalized(&cols.iter().map(|&j| wr[j]).collect::<Vec<_>>());
    if rows.len() == wl.len() && cols.len() == wr.len() {
        solve(cost, &a, &b, false, dcfg)
    } else {
        solve(&cost.select(&rows, &cols), &a, &b, false, dcfg)
    }
}

/// Centre of the context used for the side of `tau` nearest `c`: `c` itself
/// unless its window straddles `hat`, in which case the nearest window on
/// the same side of `hat`.
fn context_centre(c: usize, hat: usize, h: usize) -> usize {
    if c.abs_diff(hat) >= h {
        c
    } else if c < hat {
        hat.saturating_sub(h)
    } else {
        hat + h
    }
}

fn centered_replicates(
    cloud: &PointCloud,
    dcfg: &DetectorConfig,
    bcfg: &BootstrapConfig,
    series: &WassersteinSeries,
) -> Result<(Vec<f64>, usize, usize)> {
    let h = dcfg.h;
    let n = cloud.len();
    let hat = change_statistic(series)?.argmax_tau;
    let reps = bcfg.replications;

    // (tau, centres of its two contexts); out-of-range contexts are dropped
    let admissible = |c: usize| c >= h && c + h <= n;
    let sides: Vec<(usize, Vec<usize>)> = series
        .taus
        .iter()
        .map(|&tau| {
            let mut cs = Vec::with_capacity(2);
            if tau >= h {
                cs.push(context_centre(tau - h, hat, h));
            }
            cs.push(context_centre(tau + h, hat, h));
            cs.retain(|&c| admissible(c));
            (tau, cs)
        })
        .collect();

    let mut dist: BTreeMap<usize, f64> = series.taus.iter().copied().zip(series.values.iter().copied()).collect();
    let missing: Vec<usize> = sides
        .iter()
        .flat_map(|(_, cs)| cs.iter().copied())
        .filter(|c| !dist.contains_key(c))
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let u = vec![1.0 / h as f64; h];
    let solved: Vec<(f64, bool)> = missing
        .par_iter()
        .map(|&c| solve(&window_cost(cloud, c, h, dcfg.ot.p), &u, &u, true, dcfg))
        .collect();
    let unconverged = solved.iter().filter(|s| !s.1).count();
    dist.extend(missing.into_iter().zip(solved.iter().map(|s| s.0)));

    let blocks = mbb_blocks(n, bcfg.block_len);
    let stats: Vec<f64> = (0..reps)
        .into_par_iter()
        .map(|b| {
            let mut rng = replicate_rng(bcfg.seed, b);
            let w = mbb_weights(blocks.len(), bcfg.weight_scheme, &mut rng);
            let mut prefix = vec![0.0; n + 1];
            for (&(s, e), wk) in blocks.iter().zip(&w) {
                for i in s..e {
                    prefix[i + 1] = prefix[i] + wk;
                }
            }
            let mass = |s: usize, e: usize| prefix[e] - prefix[s];
            let mut best = 0.0f64;
            for (_, cs) in &sides {
                let v: f64 = cs
                    .iter()
                    .map(|&c| {
                        let (l, r) = (mass(c - h, c), mass(c, c + h));
                        if l + r > 0.0 {
                            (l / (l + r) - 0.5).abs() * dist[&c]
                        } else {
                            0.0
                        }
                    })
                    .sum();
                best = best.max(bcfg.inflation * v);
            }
            best
        })
        .collect();
    Ok((stats, 0, unconverged))
}

/// Index map of one moving-block resample of `n` points.
pub fn mbb_index_map<R: Rng + ?Sized>(n: usize, block_len: usize, rng: &mut R) -> Vec<usize> {
    let starts: Vec<usize> = (0..=n - block_len).collect();
    let mut k = Vec::with_capacity(n + block_len);
    while k.len() < n {
        let s = *starts.choose(rng).expect("non-empty cloud");
        k.extend(s..s + block_len);
    }
    k.truncate(n);
    k
}

fn shuffled_replicates(
    cloud: &PointCloud,
    dcfg: &DetectorConfig,
    bcfg: &BootstrapConfig,
) -> (Vec<f64>, usize, usize) {
    let h = dcfg.h;
    let n = cloud.len();
    let taus = dcfg.taus(n);
    let u = vec![1.0 / h as f64; h];
    let dim = cloud.dim();
    let flat = cloud.flat();
    let results: Vec<(f64, usize)> = (0..bcfg.replications)
        .into_par_iter()
        .map(|b| {
            let mut rng = replicate_rng(bcfg.seed, b);
            let k = mbb_index_map(n, bcfg.block_len, &mut rng);
            let mut best = 0.0f64;
            let mut bad = 0;
            let mut data = vec![0.0; h * h];
            for &tau in &taus {
                for (r, &i) in k[tau - h..tau].iter().enumerate() {
                    let x = &flat[i * dim..(i + 1) * dim];
                    for (c, &j) in k[tau..tau + h].iter().enumerate() {
                        let y = &flat[j * dim..(j + 1) * dim];
                        let sq: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
                        data[r * h + c] = ground_cost(sq, dcfg.ot.p);
                    }
                }
                let cost = CostMatrix {
                    rows: h,
                    cols: h,
                    data: std::mem::take(&mut data),
                };
                let (v, ok) = solve(&cost, &u, &u, true, dcfg);
                data = cost.data;
                if !ok {
                    bad += 1;
                }
                best = best.max(v);
            }
            (best, bad)
        })
        .collect();
    (
        results.iter().map(|r| r.0).collect(),
        0,
        results.iter().map(|r| r.1).sum(),
    )
}

/// Half-open source intervals of every window above `threshold`, merged.
/// `embed_span` extends each window to the last sample its final embedding
/// vector reads.
pub fn label_intervals(
    series: &WassersteinSeries,
    threshold: f64,
    embed_span: usize,
) -> Vec<(usize, usize)> {
    let mut flagged: Vec<(usize, usize)> = Vec::new();
    for (k, v) in series.values.iter().enumerate() {
        if *v <= threshold {
            continue;
        }
        let (s, e) = series.source_spans[k];
        let e = e + embed_span + 1;
        match flagged.last_mut() {
            Some(last) if s <= last.1 => last.1 = last.1.max(e),
            _ => flagged.push((s, e)),
        }
    }
    flagged
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionResult {
    pub threshold: f64,
    pub flagged: Vec<(usize, usize)>,
    pub series: WassersteinSeries,
    pub statistic: ChangeStatistic,
    pub change_detected: bool,
    pub bootstrap: BootstrapSample,
}

/// Series, statistic, bootstrap threshold and labels for one cloud.
pub fn detect(
    cloud: &PointCloud,
    dcfg: &DetectorConfig,
    bcfg: &BootstrapConfig,
    embed_span: usize,
) -> Result<DetectionResult> {
    let series = wasserstein_series(cloud, dcfg)?;
    detect_with_series(cloud, dcfg, bcfg, series, embed_span)
}

/// [`detect`] on a series already computed from `cloud` with `dcfg`.
pub fn detect_with_series(
    cloud: &PointCloud,
    dcfg: &DetectorConfig,
    bcfg: &BootstrapConfig,
    series: WassersteinSeries,
    embed_span: usize,
) -> Result<DetectionResult> {
    let statistic = change_statistic(&series)?;
    let bootstrap = bootstrap_with_series(cloud, dcfg, bcfg, Some(&series))?;
    let threshold = bootstrap.threshold;
    Ok(DetectionResult {
        flagged: label_intervals(&series, threshold, embed_span),
        change_detected: statistic.value > threshold,
        threshold,
        series,
        statistic,
        bootstrap,
    })
}
