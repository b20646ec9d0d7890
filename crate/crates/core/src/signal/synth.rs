use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Uniform};
use serde::{Deserialize, Serialize};

use super::wavelet::DaubechiesWavelet;
use super::{AnnotatedSeries, Annotation};
use crate::error::{Error, Result};

const CASCADE_LEVEL: u32 = 8;

/// One wave of the beat: centre and width as fractions of the beat period.
#[derive(Debug, Clone, Copy)]
struct Wave {
    center: f64,
    width: f64,
    amplitude: f64,
}

// Normal sinus morphology, one atom per wave.
const P_WAVE: Wave = Wave { center: 0.20, width: 0.12, amplitude: 0.15 };
const Q_WAVE: Wave = Wave { center: 0.335, width: 0.035, amplitude: -0.12 };
const R_WAVE: Wave = Wave { center: 0.36, width: 0.05, amplitude: 1.0 };
const S_WAVE: Wave = Wave { center: 0.385, width: 0.035, amplitude: -0.25 };
const T_WAVE: Wave = Wave { center: 0.62, width: 0.20, amplitude: 0.30 };

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthesisParams {
    pub heart_rate_bpm: f64,
    pub wavelet_order: usize,
    pub noise_mu: f64,
    pub noise_sigma: f64,
    pub duration_samples: usize,
    pub sample_rate: f64,
    pub seed: u64,
}

impl Default for SynthesisParams {
    fn default() -> Self {
        Self {
            heart_rate_bpm: 60.0,
            wavelet_order: 4,
            noise_mu: 0.0,
            noise_sigma: 0.05,
            duration_samples: 3600,
            sample_rate: 360.0,
            seed: 0,
        }
    }
}

impl SynthesisParams {
    /// Beat period in samples.
    pub fn period_samples(&self) -> usize {
        (60.0 * self.sample_rate / self.heart_rate_bpm).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        if !(40.0..=220.0).contains(&self.heart_rate_bpm) {
            return Err(Error::param(format!(
                "heart_rate_bpm must lie in [40, 220], got {}",
                self.heart_rate_bpm
            )));
        }
        if self.wavelet_order < 2 {
            return Err(Error::param("wavelet_order must be >= 2"));
        }
        if !(self.noise_sigma >= 0.0) || !self.noise_mu.is_finite() {
            return Err(Error::param("noise_sigma must be >= 0 and noise_mu finite"));
        }
        if !(self.sample_rate > 0.0) {
            return Err(Error::param("sample_rate must be positive"));
        }
        if self.duration_samples == 0 {
            return Err(Error::param("duration_samples must be > 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ArrhythmiaKind {
    AtrialFlutter,
    AtrialFibrillation,
    SupraventricularTachycardia,
    PrematureAtrialContraction,
    VentricularRhythm,
    RandomAnomaly,
}

impl ArrhythmiaKind {
    pub const ALL: [ArrhythmiaKind; 6] = [
        ArrhythmiaKind::AtrialFlutter,
        ArrhythmiaKind::AtrialFibrillation,
        ArrhythmiaKind::SupraventricularTachycardia,
        ArrhythmiaKind::PrematureAtrialContraction,
        ArrhythmiaKind::VentricularRhythm,
        ArrhythmiaKind::RandomAnomaly,
    ];

    pub fn label(self) -> &'static str {
        match self {
            ArrhythmiaKind::AtrialFlutter => "AFL",
            ArrhythmiaKind::AtrialFibrillation => "AFIB",
            ArrhythmiaKind::SupraventricularTachycardia => "SVTA",
            ArrhythmiaKind::PrematureAtrialContraction => "PAC",
            ArrhythmiaKind::VentricularRhythm => "VR",
            ArrhythmiaKind::RandomAnomaly => "RAND",
        }
    }

    pub fn from_label(label: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.label().eq_ignore_ascii_case(label))
    }

    fn stream(self) -> u64 {
        self as u64 + 1
    }

    /// Rate and morphology distortions applied inside an injected interval.
    pub fn preset(self) -> ArrhythmiaPreset {
        let base = ArrhythmiaPreset::default();
        match self {
            // 2:1 conduction, sawtooth F-waves at five times the host rate
            ArrhythmiaKind::AtrialFlutter => ArrhythmiaPreset {
                rate_multiplier: 2.0,
                suppress_p: true,
                atrial_wave_amplitude: 0.2,
                atrial_wave_rate: 5.0,
                sawtooth: true,
                ..base
            },
            // irregular RR, no P, fine fibrillatory baseline
            ArrhythmiaKind::AtrialFibrillation => ArrhythmiaPreset {
                rate_multiplier: 1.6,
                suppress_p: true,
                rr_jitter: 0.25,
                atrial_wave_amplitude: 0.08,
                atrial_wave_rate: 7.0,
                ..base
            },
            ArrhythmiaKind::SupraventricularTachycardia => ArrhythmiaPreset {
                rate_multiplier: 2.5,
                suppress_p: true,
                ..base
            },
            // every second beat early with an inverted ectopic P wave,
            // followed by a compensatory pause
            ArrhythmiaKind::PrematureAtrialContraction => ArrhythmiaPreset {
                premature_every: 2,
                premature_ratio: 0.6,
                ectopic_p_scale: -1.0,
                ..base
            },
            // wide bizarre QRS, discordant T, no P
            ArrhythmiaKind::VentricularRhythm => ArrhythmiaPreset {
                rate_multiplier: 1.7,
                suppress_p: true,
                qrs_width_scale: 3.0,
                amplitude_scale: 1.4,
                invert_t: true,
                ..base
            },
            // a new rhythm whose rate and morphology are drawn per episode
            ArrhythmiaKind::RandomAnomaly => ArrhythmiaPreset {
                randomize: true,
                random_resample: 0.03,
                ..base
            },
        }
    }
}

/// Parameter preset describing one arrhythmia kind relative to the host rhythm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArrhythmiaPreset {
    pub rate_multiplier: f64,
    pub suppress_p: bool,
    /// Relative standard deviation of each RR interval.
    pub rr_jitter: f64,
    pub amplitude_scale: f64,
    pub qrs_width_scale: f64,
    pub invert_t: bool,
    /// Amplitude of the atrial baseline activity (flutter/fibrillation waves).
    pub atrial_wave_amplitude: f64,
    /// Atrial wave frequency as a multiple of the host beat frequency.
    pub atrial_wave_rate: f64,
    /// Every n-th beat is premature; 0 disables.
    pub premature_every: usize,
    pub premature_ratio: f64,
    pub ectopic_p_scale: f64,
    /// Half-width of the per-beat uniform resampling of period and amplitude.
    pub random_resample: f64,
    /// Flutter waves are a sawtooth rather than a modulated sine.
    pub sawtooth: bool,
    /// Rate, amplitude, QRS width, P and T polarity are drawn once per
    /// injection.
    pub randomize: bool,
}

impl Default for ArrhythmiaPreset {
    fn default() -> Self {
        Self {
            rate_multiplier: 1.0,
            suppress_p: false,
            rr_jitter: 0.0,
            amplitude_scale: 1.0,
            qrs_width_scale: 1.0,
            invert_t: false,
            atrial_wave_amplitude: 0.0,
            atrial_wave_rate: 0.0,
            premature_every: 0,
            premature_ratio: 1.0,
            ectopic_p_scale: 1.0,
            random_resample: 0.0,
            sawtooth: false,
            randomize: false,
        }
    }
}

impl ArrhythmiaPreset {
    fn draw<R: Rng + ?Sized>(mut self, rng: &mut R) -> Self {
        self.rate_multiplier = rng.random_range(1.3..2.3);
        self.amplitude_scale = rng.random_range(0.6..1.6);
        self.qrs_width_scale = rng.random_range(1.0..2.5);
        self.suppress_p = rng.random_bool(0.5);
        self.invert_t = rng.random_bool(0.5);
        self.randomize = false;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArrhythmiaSpec {
    pub kind: ArrhythmiaKind,
    pub start_index: usize,
    pub length_samples: usize,
}

struct BeatShape {
    waves: [Wave; 5],
    wavelet: DaubechiesWavelet,
    peak: f64,
}

impl BeatShape {
    fn normal(order: usize) -> Result<Self> {
        let wavelet = DaubechiesWavelet::new(order, CASCADE_LEVEL)?;
        let peak = wavelet.phi.iter().cloned().fold(f64::MIN, f64::max);
        Ok(Self {
            waves: [P_WAVE, Q_WAVE, R_WAVE, S_WAVE, T_WAVE],
            wavelet,
            peak,
        })
    }

    /// Unit-peak scaling-function atom supported on `u` in [-1/2, 1/2].
    fn atom(&self, u: f64) -> f64 {
        if !(-0.5..=0.5).contains(&u) {
            return 0.0;
        }
        self.wavelet.phi_at((u + 0.5) * self.wavelet.support()) / self.peak
    }

    fn with_preset(&self, preset: &ArrhythmiaPreset, ectopic: bool) -> [Wave; 5] {
        let mut w = self.waves;
        if preset.suppress_p {
            w[0].amplitude = 0.0;
        }
        if ectopic {
            w[0].amplitude *= preset.ectopic_p_scale;
        }
        for qrs in &mut w[1..4] {
            let offset = qrs.center - R_WAVE.center;
            qrs.center = R_WAVE.center + offset * preset.qrs_width_scale;
            qrs.width *= preset.qrs_width_scale;
        }
        if preset.invert_t {
            w[4].amplitude = -w[4].amplitude;
        }
        for wave in &mut w {
            wave.amplitude *= preset.amplitude_scale;
        }
        w
    }

    fn render(&self, waves: &[Wave; 5], len: usize, gain: f64, out: &mut Vec<f64>) {
        for k in 0..len {
            let phase = k as f64 / len as f64;
            let v: f64 = waves
                .iter()
                .map(|w| w.amplitude * self.atom((phase - w.center) / w.width))
                .sum();
            out.push(gain * v);
        }
    }
}

fn add_noise(samples: &mut [f64], mu: f64, sigma: f64, rng: &mut ChaCha8Rng) -> Result<()> {
    if sigma == 0.0 && mu == 0.0 {
        return Ok(());
    }
    let normal = Normal::new(mu, sigma).map_err(|e| Error::param(e.to_string()))?;
    for s in samples {
        *s += normal.sample(rng);
    }
    Ok(())
}

/// Normal sinus rhythm: the same PQRST beat repeated every
/// `round(60 * sample_rate / heart_rate_bpm)` samples plus Gaussian noise.
pub fn synthesize_normal(params: &SynthesisParams) -> Result<AnnotatedSeries> {
    params.validate()?;
    let period = params.period_samples();
    if params.duration_samples < period {
        return Err(Error::SeriesTooShort {
            needed: period,
            got: params.duration_samples,
        });
    }
    let shape = BeatShape::normal(params.wavelet_order)?;
    let mut beat = Vec::with_capacity(period);
    shape.render(&shape.waves, period, 1.0, &mut beat);

    let mut samples: Vec<f64> = (0..params.duration_samples)
        .map(|t| beat[t % period])
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    add_noise(&mut samples, params.noise_mu, params.noise_sigma, &mut rng)?;

    AnnotatedSeries::new(
        format!("normal_{}", params.seed),
        samples,
        params.sample_rate,
    )
}

/// Replaces `[start, start + length)` with the kind-specific rhythm and
/// records the matching annotation. Samples outside the interval are untouched.
pub fn inject_arrhythmia(
    series: &AnnotatedSeries,
    spec: &ArrhythmiaSpec,
    params: &SynthesisParams,
) -> Result<AnnotatedSeries> {
    inject_with_preset(series, spec, &spec.kind.preset(), params)
}

/// [`inject_arrhythmia`] with an explicit preset; the annotation still
/// carries `spec.kind`'s label.
pub fn inject_with_preset(
    series: &AnnotatedSeries,
    spec: &ArrhythmiaSpec,
    preset: &ArrhythmiaPreset,
    params: &SynthesisParams,
) -> Result<AnnotatedSeries> {
    params.validate()?;
    if spec.length_samples == 0 {
        return Err(Error::param("length_samples must be > 0"));
    }
    let start = spec.start_index;
    let end = start
        .checked_add(spec.length_samples)
        .ok_or_else(|| Error::param("interval overflows"))?;
    let mut out = series.clone();
    out.add_annotation(Annotation::new(start, end, spec.kind.label()))?;

    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    rng.set_stream(spec.kind.stream() ^ ((start as u64) << 8));
    let preset = if preset.randomize {
        preset.draw(&mut rng)
    } else {
        *preset
    };
    let shape = BeatShape::normal(params.wavelet_order)?;
    let host_period = 60.0 * params.sample_rate / params.heart_rate_bpm;
    let base = host_period / preset.rate_multiplier;
    let std_normal = Normal::new(0.0, 1.0).expect("unit normal");
    let resample = Uniform::new_inclusive(
        1.0 - preset.random_resample,
        1.0 + preset.random_resample,
    )
    .map_err(|e| Error::param(e.to_string()))?;

    let n = spec.length_samples;
    let mut segment = Vec::with_capacity(n + host_period as usize * 3);
    let mut beat_idx = 0usize;
    let mut pause = false;
    while segment.len() < n {
        let mut len = base;
        let mut gain = 1.0;
        let mut ectopic = false;
        if preset.rr_jitter > 0.0 {
            let j: f64 = std_normal.sample(&mut rng);
            len *= (1.0 + preset.rr_jitter * j).clamp(0.4, 2.0);
        }
        if preset.random_resample > 0.0 {
            len *= resample.sample(&mut rng);
            gain = resample.sample(&mut rng);
        }
        if preset.premature_every > 0 {
            if pause {
                len *= 2.0 - preset.premature_ratio;
                pause = false;
            } else if beat_idx % preset.premature_every == preset.premature_every - 1 {
                len *= preset.premature_ratio;
                ectopic = true;
                pause = true;
            }
        }
        let waves = shape.with_preset(&preset, ectopic);
        shape.render(&waves, (len.round() as usize).max(4), gain, &mut segment);
        beat_idx += 1;
    }
    segment.truncate(n);

    if preset.atrial_wave_amplitude > 0.0 {
        let cycle = host_period / preset.atrial_wave_rate;
        let phase0: f64 = rng.random();
        for (k, s) in segment.iter_mut().enumerate() {
            let ph = (k as f64 / cycle + phase0).fract();
            let wave = if preset.sawtooth {
                // sawtooth: slow descent, sharp return
                0.5 - ph
            } else {
                (std::f64::consts::TAU * ph).sin()
                    * (1.0 + 0.5 * (std::f64::consts::TAU * k as f64 / (2.7 * cycle)).sin())
            };
            *s += preset.atrial_wave_amplitude * wave;
        }
    }
    add_noise(&mut segment, params.noise_mu, params.noise_sigma, &mut rng)?;

    out.samples[start..end].copy_from_slice(&segment);
    Ok(out)
}

/// Sine wave plus Gaussian noise; a null-hypothesis fixture.
pub fn synthesize_plain_periodic(
    freq_hz: f64,
    duration_samples: usize,
    sample_rate: f64,
    noise_sigma: f64,
    seed: u64,
) -> Result<AnnotatedSeries> {
    if !(freq_hz > 0.0) || !(sample_rate > 0.0) {
        return Err(Error::param("frequency and sample rate must be positive"));
    }
    if freq_hz >= sample_rate / 2.0 {
        return Err(Error::param(format!(
            "frequency {freq_hz} Hz violates Nyquist limit {} Hz",
            sample_rate / 2.0
        )));
    }
    if !(noise_sigma >= 0.0) {
        return Err(Error::param("noise_sigma must be >= 0"));
    }
    let w = std::f64::consts::TAU * freq_hz / sample_rate;
    let mut samples: Vec<f64> = (0..duration_samples).map(|t| (w * t as f64).sin()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    add_noise(&mut samples, 0.0, noise_sigma, &mut rng)?;
    AnnotatedSeries::new(format!("sine_{seed}"), samples, sample_rate)
}
