//! Time-series data model, CSV ingestion and synthetic quasi-periodic signals.

mod csv_io;
mod synth;
pub mod wavelet;

pub use csv_io::{load_csv, read_sidecar_sample_rate, save_csv, CsvFormat};
pub use synth::{
    inject_arrhythmia, inject_with_preset, synthesize_normal, synthesize_plain_periodic, ArrhythmiaKind,
    ArrhythmiaPreset, ArrhythmiaSpec, SynthesisParams,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Half-open sample interval `[start, end)` carrying a ground-truth label.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Annotation {
    pub start: usize,
    pub end: usize,
    pub label: String,
}

impl Annotation {
    pub fn new(start: usize, end: usize, label: impl Into<String>) -> Self {
        Self {
            start,
            end,
            label: label.into(),
        }
    }

    pub fn overlaps(&self, start: usize, end: usize) -> bool {
        self.start < end && start < self.end
    }
}

/// Raw 1-D signal with sampling metadata and optional ground-truth intervals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotatedSeries {
    pub name: String,
    pub samples: Vec<f64>,
    pub sample_rate: f64,
    pub annotations: Vec<Annotation>,
}

impl AnnotatedSeries {
    pub fn new(name: impl Into<String>, samples: Vec<f64>, sample_rate: f64) -> Result<Self> {
        let series = Self {
            name: name.into(),
            samples,
            sample_rate,
            annotations: Vec::new(),
        };
        series.validate()?;
        Ok(series)
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Appends an annotation, rejecting out-of-bounds or overlapping intervals.
    pub fn add_annotation(&mut self, ann: Annotation) -> Result<()> {
        check_interval(ann.start, ann.end, self.samples.len())?;
        if let Some(other) = self
            .annotations
            .iter()
            .find(|a| a.overlaps(ann.start, ann.end))
        {
            return Err(Error::Annotation(format!(
                "interval [{}, {}) overlaps existing annotation [{}, {}) '{}'",
                ann.start, ann.end, other.start, other.end, other.label
            )));
        }
        self.annotations.push(ann);
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if self.samples.is_empty() {
            return Err(Error::Empty("series has no samples"));
        }
        if !(self.sample_rate.is_finite() && self.sample_rate > 0.0) {
            return Err(Error::param(format!(
                "sample_rate must be positive, got {}",
                self.sample_rate
            )));
        }
        for (i, a) in self.annotations.iter().enumerate() {
            check_interval(a.start, a.end, self.samples.len())?;
            if self.annotations[..i]
                .iter()
                .any(|b| b.overlaps(a.start, a.end))
            {
                return Err(Error::Annotation(format!(
                    "interval [{}, {}) overlaps an earlier annotation",
                    a.start, a.end
                )));
            }
        }
        Ok(())
    }
}

/// Dominant period in samples from the autocorrelation: the first peak in
/// `[min_lag, max_lag]` after the first zero crossing that reaches 90% of
/// the highest one. `None` for a flat signal.
pub fn estimate_period(samples: &[f64], min_lag: usize, max_lag: usize) -> Result<Option<usize>> {
    let n = samples.len();
    let min_lag = min_lag.max(1);
    let max_lag = max_lag.min(n.saturating_sub(1));
    if min_lag > max_lag {
        return Err(Error::SeriesTooShort {
            needed: 2 * min_lag + 1,
            got: n,
        });
    }
    let mean = samples.iter().sum::<f64>() / n as f64;
    let x: Vec<f64> = samples.iter().map(|v| v - mean).collect();
    let r0 = x.iter().map(|v| v * v).sum::<f64>() / n as f64;
    if !(r0 > 1e-24) {
        return Ok(None);
    }
    let acf = |k: usize| x[..n - k].iter().zip(&x[k..]).map(|(a, b)| a * b).sum::<f64>() / ((n - k) as f64 * r0);
    let values: Vec<f64> = (0..=max_lag).map(|k| if k < min_lag { 1.0 } else { acf(k) }).collect();
    let first_negative = (min_lag..=max_lag).find(|&k| values[k] < 0.0).unwrap_or(min_lag);
    let top = (first_negative..=max_lag)
        .map(|k| values[k])
        .fold(f64::NEG_INFINITY, f64::max);
    // multiples of the period peak almost as high; take the first
    let is_peak = |k: usize| {
        values[k] >= 0.9 * top
            && (k == first_negative || values[k] >= values[k - 1])
            && (k == max_lag || values[k] >= values[k + 1])
    };
    let best = (first_negative..=max_lag)
        .find(|&k| is_peak(k))
        .expect("the maximum is a peak");
    Ok(Some(best))
}

pub(crate) fn check_interval(start: usize, end: usize, len: usize) -> Result<()> {
    if end < start {
        return Err(Error::Annotation(format!(
            "interval end {end} before start {start}"
        )));
    }
    if start == end {
        return Err(Error::Annotation(format!("empty interval at {start}")));
    }
    if end > len {
        return Err(Error::Annotation(format!(
            "interval [{start}, {end}) exceeds series length {len}"
        )));
    }
    Ok(())
}
