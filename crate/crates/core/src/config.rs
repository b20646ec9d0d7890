//! Pipeline configuration: one JSON document with dotted-key overrides.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::bootstrap::{BootstrapConfig, Resampling, WeightScheme, DEFAULT_INFLATION};
use crate::detector::{points_per_loop, DetectorConfig, EXACT_MAX_H};
use crate::embedding::EmbedParams;
use crate::error::{Error, Result};
use crate::signal::{estimate_period, AnnotatedSeries, ArrhythmiaKind};
use crate::transport::OtConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectorSection {
    pub loops_per_half: usize,
    /// Beat period in samples; estimated from the signal when absent.
    pub period_samples: Option<usize>,
    /// Half-window in cloud points; overrides `loops_per_half`.
    pub h: Option<usize>,
    pub stride: usize,
    pub ot: OtConfig,
    /// `None` picks exact transport for small half-windows only.
    pub exact: Option<bool>,
}

impl Default for DetectorSection {
    fn default() -> Self {
        Self {
            loops_per_half: 2,
            period_samples: None,
            h: None,
            stride: 1,
            ot: OtConfig::default(),
            exact: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BootstrapSection {
    pub replications: usize,
    /// Block length in cloud points. Defaults to the half-window for
    /// centered resampling and to one loop otherwise.
    pub block_len: Option<usize>,
    pub alpha: f64,
    pub weight_scheme: WeightScheme,
    pub resampling: Resampling,
    pub inflation: f64,
}

impl Default for BootstrapSection {
    fn default() -> Self {
        Self {
            replications: 500,
            block_len: None,
            alpha: 0.05,
            weight_scheme: WeightScheme::ExponentialUnitMean,
            resampling: Resampling::Centered,
            inflation: DEFAULT_INFLATION,
        }
    }
}

/// Corpus generation settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSection {
    pub heart_rate_bpm: f64,
    pub sample_rate: f64,
    /// Beats after the first embedding window.
    pub beats: usize,
    pub noise_mu: f64,
    pub noise_sigma: f64,
    pub wavelet_order: usize,
    /// Anomaly onset range as fractions of the series length; anomalies
    /// run to the end of the series.
    pub onset_min: f64,
    pub onset_max: f64,
    /// Relative frequency of each label; `normal` is the clean class.
    pub mix: BTreeMap<String, f64>,
}

impl Default for SynthSection {
    fn default() -> Self {
        let mut mix = BTreeMap::new();
        mix.insert("normal".to_string(), 6.0);
        for k in ArrhythmiaKind::ALL {
            mix.insert(k.label().to_string(), 1.0);
        }
        Self {
            heart_rate_bpm: 60.0,
            sample_rate: 450.0,
            beats: 12,
            noise_mu: 0.0,
            noise_sigma: 0.05,
            wavelet_order: 4,
            onset_min: 0.4,
            onset_max: 0.6,
            mix,
        }
    }
}

impl SynthSection {
    pub fn validate(&self) -> Result<()> {
        if self.mix.is_empty() {
            return Err(Error::param("synth.mix is empty"));
        }
        for (label, w) in &self.mix {
            if label != "normal" && ArrhythmiaKind::from_label(label).is_none() {
                return Err(Error::param(format!("synth.mix: unknown label '{label}'")));
            }
            if !(w.is_finite() && *w >= 0.0) {
                return Err(Error::param(format!("synth.mix.{label} must be >= 0, got {w}")));
            }
        }
        if !(self.mix.values().sum::<f64>() > 0.0) {
            return Err(Error::param("synth.mix weights sum to zero"));
        }
        if !(0.0 <= self.onset_min && self.onset_min <= self.onset_max && self.onset_max < 1.0) {
            return Err(Error::param("need 0 <= onset_min <= onset_max < 1"));
        }
        if self.beats == 0 {
            return Err(Error::param("synth.beats must be >= 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IoSection {
    /// Sample rate for CSV input without a sidecar file.
    pub sample_rate: Option<f64>,
    pub svg: bool,
    pub write_cloud: bool,
}

impl Default for IoSection {
    fn default() -> Self {
        Self {
            sample_rate: None,
            svg: false,
            write_cloud: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub embed: EmbedParams,
    /// Output dimension of the PCA projection; 0 keeps the raw embedding.
    pub pca_dim: usize,
    pub detector: DetectorSection,
    pub bootstrap: BootstrapSection,
    pub synth: SynthSection,
    pub io: IoSection,
    pub seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            embed: EmbedParams { m: 450, s: 1, dt: 2 },
            pca_dim: 3,
            detector: DetectorSection::default(),
            bootstrap: BootstrapSection::default(),
            synth: SynthSection::default(),
            io: IoSection::default(),
            seed: 0,
        }
    }
}

/// Concrete parameters for one series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Resolved {
    pub embed: EmbedParams,
    pub pca_dim: usize,
    pub period_samples: usize,
    pub detector: DetectorConfig,
    pub bootstrap: BootstrapConfig,
}

impl PipelineConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    /// Parses and validates; absent keys take their defaults.
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        self.embed.validate()?;
        self.detector.ot.validate()?;
        if self.detector.loops_per_half == 0 {
            return Err(Error::param("detector.loops_per_half must be >= 1"));
        }
        if self.detector.stride == 0 {
            return Err(Error::param("detector.stride must be >= 1"));
        }
        if matches!(self.detector.h, Some(h) if h < 2) {
            return Err(Error::param("detector.h must be >= 2"));
        }
        if self.detector.period_samples == Some(0) {
            return Err(Error::param("detector.period_samples must be >= 1"));
        }
        BootstrapConfig {
            replications: self.bootstrap.replications,
            block_len: self.bootstrap.block_len.unwrap_or(1),
            alpha: self.bootstrap.alpha,
            seed: self.seed,
            weight_scheme: self.bootstrap.weight_scheme,
            resampling: self.bootstrap.resampling,
            inflation: self.bootstrap.inflation,
        }
        .validate()?;
        self.synth.validate()
    }

    /// Applies `key=value` where `key` is a dotted path into the JSON form
    /// and `value` is JSON, or a bare string.
    pub fn apply_override(&mut self, assignment: &str) -> Result<()> {
        let (key, raw) = assignment
            .split_once('=')
            .ok_or_else(|| Error::param(format!("override '{assignment}' is not KEY=VALUE")))?;
        let value: Value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
        let mut doc = serde_json::to_value(&*self)?;
        let mut node = &mut doc;
        let parts: Vec<&str> = key.split('.').collect();
        for (i, part) in parts.iter().enumerate() {
            let obj = node
                .as_object_mut()
                .ok_or_else(|| Error::param(format!("'{}' is not a section", parts[..i].join("."))))?;
            // mix entries are free-form; every other key must already exist
            let free = i > 0 && parts[i - 1] == "mix";
            if !free && !obj.contains_key(*part) {
                return Err(Error::param(format!("unknown config key '{key}'")));
            }
            node = obj.entry(part.to_string()).or_insert(Value::Null);
        }
        *node = value;
        let next: Self = serde_json::from_value(doc)
            .map_err(|e| Error::param(format!("override '{assignment}': {e}")))?;
        next.validate()?;
        *self = next;
        Ok(())
    }

    /// Detector and bootstrap parameters for `series`.
    pub fn resolve(&self, series: &AnnotatedSeries) -> Result<Resolved> {
        self.validate()?;
        let dt = self.embed.dt;
        let period = match self.detector.period_samples {
            Some(p) => p,
            // a flat signal has no period; one embedding window stands in
            None => estimate_period(&series.samples, 2 * dt, series.len() / 3)?
                .unwrap_or(self.embed.span() + self.embed.s),
        };
        let ppl = points_per_loop(period, dt);
        let h = self
            .detector
            .h
            .unwrap_or(self.detector.loops_per_half * ppl)
            .max(2);
        let block_len = self.bootstrap.block_len.unwrap_or(match self.bootstrap.resampling {
            Resampling::Centered => h,
            _ => ppl,
        });
        Ok(Resolved {
            embed: self.embed,
            pca_dim: self.pca_dim,
            period_samples: period,
            detector: DetectorConfig {
                h,
                stride: self.detector.stride,
                ot: self.detector.ot,
                use_exact: self.detector.exact.unwrap_or(h <= EXACT_MAX_H),
            },
            bootstrap: BootstrapConfig {
                replications: self.bootstrap.replications,
                block_len,
                alpha: self.bootstrap.alpha,
                seed: self.seed,
                weight_scheme: self.bootstrap.weight_scheme,
                resampling: self.bootstrap.resampling,
                inflation: self.bootstrap.inflation,
            },
        })
    }
}
