//! End-to-end commands behind the CLI: corpus generation, detection,
//! evaluation and plotting.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bootstrap::{detect_with_series, DetectionResult};
use crate::config::{PipelineConfig, Resolved};
use crate::detector::wasserstein_series;
use crate::embedding::{pca_fit, pca_project, sliding_window_embed};
use crate::error::{Error, Result};
use crate::eval::{aggregate_runs, score_series, EvalReport, SeriesScore};
use crate::report::render_svg;
use crate::signal::{
    inject_arrhythmia, load_csv, read_sidecar_sample_rate, save_csv, synthesize_normal, Annotation,
    AnnotatedSeries, ArrhythmiaKind, ArrhythmiaSpec, CsvFormat, SynthesisParams,
};

pub const MANIFEST: &str = "manifest.json";
pub const THREADS_ENV: &str = "QPCD_THREADS";

/// Runs `f` on a pool capped by `QPCD_THREADS` when it is set.
pub fn with_thread_limit<R: Send>(f: impl FnOnce() -> R + Send) -> Result<R> {
    match std::env::var(THREADS_ENV) {
        Ok(v) => {
            let n: usize = v
                .trim()
                .parse()
                .ok()
                .filter(|n| *n >= 1)
                .ok_or_else(|| Error::param(format!("{THREADS_ENV} must be a positive integer, got '{v}'")))?;
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::param(format!("thread pool: {e}")))?;
            Ok(pool.install(f))
        }
        Err(_) => Ok(f()),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub name: String,
    pub file: String,
    pub seed: u64,
    /// `normal` or the arrhythmia label.
    pub label: String,
    pub annotations: Vec<Annotation>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub seed: u64,
    pub sample_rate: f64,
    pub entries: Vec<ManifestEntry>,
}

impl Manifest {
    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let path = dir.as_ref().join(MANIFEST);
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

/// Label counts proportional to the mix, largest remainders first, in a
/// seeded random order.
fn draw_labels(mix: &BTreeMap<String, f64>, count: usize, rng: &mut ChaCha8Rng) -> Vec<String> {
    let total: f64 = mix.values().sum();
    let mut quotas: Vec<(String, usize, f64)> = mix
        .iter()
        .map(|(k, w)| {
            let exact = count as f64 * w / total;
            (k.clone(), exact.floor() as usize, exact - exact.floor())
        })
        .collect();
    let mut left = count - quotas.iter().map(|q| q.1).sum::<usize>();
    let mut order: Vec<usize> = (0..quotas.len()).collect();
    order.sort_by(|&a, &b| quotas[b].2.total_cmp(&quotas[a].2).then(a.cmp(&b)));
    for i in order {
        if left == 0 {
            break;
        }
        quotas[i].1 += 1;
        left -= 1;
    }
    let mut labels: Vec<String> = quotas
        .into_iter()
        .flat_map(|(k, n, _)| std::iter::repeat_n(k, n))
        .collect();
    labels.shuffle(rng);
    labels
}

fn write_file(path: &Path, body: &str) -> Result<()> {
    std::fs::write(path, body).map_err(|e| Error::io(path, e))
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

/// One synthetic series per manifest entry plus `manifest.json`.
pub fn cmd_generate(cfg: &PipelineConfig, count: usize, out_dir: &Path) -> Result<Manifest> {
    cfg.validate()?;
    let syn = &cfg.synth;
    create_dir(out_dir)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let labels = draw_labels(&syn.mix, count, &mut rng);
    let base = SynthesisParams {
        heart_rate_bpm: syn.heart_rate_bpm,
        wavelet_order: syn.wavelet_order,
        noise_mu: syn.noise_mu,
        noise_sigma: syn.noise_sigma,
        duration_samples: 1,
        sample_rate: syn.sample_rate,
        seed: 0,
    };
    let len = cfg.embed.span() + 1 + syn.beats * base.period_samples();

    let mut entries = Vec::with_capacity(count);
    for (i, label) in labels.into_iter().enumerate() {
        let seed = cfg.seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(i as u64);
        let p = SynthesisParams {
            duration_samples: len,
            seed,
            ..base.clone()
        };
        let name = format!("{i:04}_{label}");
        let mut series = synthesize_normal(&p)?;
        if let Some(kind) = ArrhythmiaKind::from_label(&label) {
            let mut r = ChaCha8Rng::seed_from_u64(seed);
            r.set_stream(1);
            let frac = r.random_range(syn.onset_min..=syn.onset_max);
            let start = ((frac * len as f64) as usize).min(len - 1);
            let spec = ArrhythmiaSpec {
                kind,
                start_index: start,
                length_samples: len - start,
            };
            series = inject_arrhythmia(&series, &spec, &p)?;
        }
        series.name = name.clone();
        let file = format!("{name}.csv");
        save_csv(&series, out_dir.join(&file))?;
        write_file(
            &out_dir.join(format!("{name}.json")),
            &format!("{{\"sample_rate\": {:?}}}\n", syn.sample_rate),
        )?;
        entries.push(ManifestEntry {
            name,
            file,
            seed,
            label,
            annotations: series.annotations,
        });
    }
    let manifest = Manifest {
        seed: cfg.seed,
        sample_rate: syn.sample_rate,
        entries,
    };
    write_file(
        &out_dir.join(MANIFEST),
        &(serde_json::to_string_pretty(&manifest)? + "\n"),
    )?;
    Ok(manifest)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectReport {
    pub name: String,
    pub n_samples: usize,
    pub n_points: usize,
    pub resolved: Resolved,
    pub result: DetectionResult,
    /// Seconds per stage; excluded from the canonical form.
    #[serde(default)]
    pub timings: BTreeMap<String, f64>,
}

impl DetectReport {
    /// Report JSON without timings.
    pub fn canonical_json(&self) -> String {
        let mut v = serde_json::to_value(self).expect("report serializes");
        v.as_object_mut().expect("object").remove("timings");
        serde_json::to_string_pretty(&v).expect("report serializes")
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    /// 2 when a change was detected, 0 otherwise.
    pub fn exit_code(&self) -> i32 {
        if self.result.change_detected {
            2
        } else {
            0
        }
    }

    pub fn svg(&self) -> String {
        render_svg(
            &self.result.series,
            self.result.threshold,
            &self.result.flagged,
            &self.name,
        )
    }
}

fn timed<T>(timings: &mut BTreeMap<String, f64>, stage: &'static str, f: impl FnOnce() -> Result<T>) -> Result<T> {
    let t0 = Instant::now();
    let out = f().map_err(|e| e.in_stage(stage))?;
    timings.insert(stage.to_string(), t0.elapsed().as_secs_f64());
    Ok(out)
}

/// Embedding, projection, series, bootstrap and labels for one series.
pub fn detect_series(cfg: &PipelineConfig, series: &AnnotatedSeries) -> Result<(DetectReport, crate::embedding::PointCloud)> {
    let mut timings = BTreeMap::new();
    let resolved = timed(&mut timings, "config", || cfg.resolve(series))?;
    let raw = timed(&mut timings, "embed", || sliding_window_embed(series, &resolved.embed))?;
    let cloud = if resolved.pca_dim == 0 {
        raw
    } else {
        timed(&mut timings, "pca", || {
            let model = pca_fit(&raw, resolved.pca_dim)?;
            pca_project(&model, &raw)
        })?
    };
    let ws = timed(&mut timings, "series", || wasserstein_series(&cloud, &resolved.detector))?;
    let result = timed(&mut timings, "bootstrap", || {
        detect_with_series(
            &cloud,
            &resolved.detector,
            &resolved.bootstrap,
            ws,
            resolved.embed.span(),
        )
    })?;
    Ok((
        DetectReport {
            name: series.name.clone(),
            n_samples: series.len(),
            n_points: cloud.len(),
            resolved,
            result,
            timings,
        },
        cloud,
    ))
}

/// Loads a CSV with its sample rate from the sidecar, the config, or 1 Hz.
pub fn load_series(cfg: &PipelineConfig, path: &Path) -> Result<AnnotatedSeries> {
    let rate = match read_sidecar_sample_rate(path)? {
        Some(r) => r,
        None => cfg.io.sample_rate.unwrap_or(1.0),
    };
    load_csv(path, &CsvFormat::with_rate(rate)).map_err(|e| e.in_stage("load"))
}

pub fn result_path(out_dir: &Path, name: &str) -> PathBuf {
    out_dir.join(format!("{name}.result.json"))
}

fn detect_file(cfg: &PipelineConfig, path: &Path, out_dir: Option<&Path>) -> Result<DetectReport> {
    let series = load_series(cfg, path)?;
    let (report, cloud) = detect_series(cfg, &series)?;
    if let Some(dir) = out_dir {
        write_file(&result_path(dir, &report.name), &(report.to_json() + "\n"))?;
        if cfg.io.svg {
            write_file(&dir.join(format!("{}.svg", report.name)), &report.svg())?;
        }
        if cfg.io.write_cloud {
            cloud.write_csv(dir.join(format!("{}.cloud.csv", report.name)))?;
        }
    }
    Ok(report)
}

/// Detection on one CSV, or on every entry of a corpus directory in
/// manifest order.
pub fn cmd_detect(cfg: &PipelineConfig, input: &Path, out_dir: Option<&Path>) -> Result<Vec<DetectReport>> {
    cfg.validate()?;
    if let Some(dir) = out_dir {
        create_dir(dir)?;
    }
    if input.is_dir() {
        let manifest = Manifest::load(input)?;
        manifest
            .entries
            .par_iter()
            .map(|e| detect_file(cfg, &input.join(&e.file), out_dir))
            .collect()
    } else {
        Ok(vec![detect_file(cfg, input, out_dir)?])
    }
}

/// Scores every manifest entry against its saved result in each results
/// directory (one directory per run).
pub fn cmd_eval(corpus: &Path, results: &[PathBuf], out_dir: Option<&Path>) -> Result<EvalReport> {
    if results.is_empty() {
        return Err(Error::Empty("results directories"));
    }
    let manifest = Manifest::load(corpus)?;
    let mut runs = Vec::with_capacity(results.len());
    for dir in results {
        let mut scores = Vec::with_capacity(manifest.entries.len());
        for e in &manifest.entries {
            let path = result_path(dir, &e.name);
            if !path.exists() {
                return Err(Error::param(format!(
                    "missing result for manifest entry '{}': {}",
                    e.name,
                    path.display()
                )));
            }
            let report = DetectReport::load(&path)?;
            let truth = load_csv(corpus.join(&e.file), &CsvFormat::with_rate(manifest.sample_rate))?;
            let (detected, truth) = score_series(&report.result, &truth);
            scores.push(SeriesScore {
                name: e.name.clone(),
                detected,
                truth,
            });
        }
        runs.push(scores);
    }
    let report = aggregate_runs(&runs)?;
    if let Some(dir) = out_dir {
        create_dir(dir)?;
        write_file(&dir.join("eval.json"), &(serde_json::to_string_pretty(&report)? + "\n"))?;
        write_file(&dir.join("eval.txt"), &report.to_table())?;
    }
    Ok(report)
}

/// SVG for a saved result, written next to it or into `out_dir`.
pub fn cmd_plot(result: &Path, out_dir: Option<&Path>) -> Result<PathBuf> {
    let report = DetectReport::load(result)?;
    let dir = match out_dir {
        Some(d) => {
            create_dir(d)?;
            d.to_path_buf()
        }
        None => result.parent().map(Path::to_path_buf).unwrap_or_default(),
    };
    let path = dir.join(format!("{}.svg", report.name));
    write_file(&path, &report.svg())?;
    Ok(path)
}
