//! Seeded synthetic corpus standing in for recorded seismic data.
//!
//! Earthquake clips put an enveloped 1–40 Hz signal (a downward chirp plus
//! random tones) on top of pink noise, starting with a sharp P-onset and
//! decaying through an exponential coda. Non-earthquake clips rotate
//! through stationary colored noise, impulsive glitches and mains-like hum.

use crate::waveform::{write_manifest, write_wav, DatasetEntry, Split, Waveform, WaveformError};
use crate::Label;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};

#[derive(Debug, thiserror::Error)]
pub enum SynthError {
    #[error("invalid synth config: {0}")]
    Config(String),
    #[error(transparent)]
    Waveform(#[from] WaveformError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

pub type Result<T, E = SynthError> = std::result::Result<T, E>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClipKind {
    Quake,
    StationaryNoise,
    Glitch,
    Hum,
}

impl ClipKind {
    pub fn label(self) -> Label {
        match self {
            ClipKind::Quake => Label::Earthquake,
            _ => Label::NonEarthquake,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ClipKind::Quake => "quake",
            ClipKind::StationaryNoise => "noise",
            ClipKind::Glitch => "glitch",
            ClipKind::Hum => "hum",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Clip {
    pub kind: ClipKind,
    pub waveform: Waveform,
    /// Event onset in seconds (earthquake clips only).
    pub onset_s: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub n_quake: usize,
    pub n_noise: usize,
    pub sample_rate: u32,
    pub duration_s: f64,
    pub seed: u64,
    pub train_fraction: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self { n_quake: 310, n_noise: 300, sample_rate: 1000, duration_s: 16.0, seed: 7, train_fraction: 0.8 }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_quake == 0 || self.n_noise == 0 {
            return Err(SynthError::Config("both class counts must be at least 1".into()));
        }
        if self.sample_rate < 100 {
            return Err(SynthError::Config(format!("sample rate {} Hz cannot hold a 1–40 Hz band", self.sample_rate)));
        }
        if !(self.duration_s >= 1.0 && self.duration_s.is_finite()) {
            return Err(SynthError::Config("duration must be at least 1 s".into()));
        }
        if !(0.0..=1.0).contains(&self.train_fraction) {
            return Err(SynthError::Config("train_fraction must be in [0, 1]".into()));
        }
        Ok(())
    }
}

/// Independent stream per (corpus seed, clip index).
pub fn clip_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Unit-variance pink noise (Kellet's refined filter over white noise).
pub fn pink_noise(n: usize, rng: &mut impl Rng) -> Vec<f64> {
    let mut b = [0.0f64; 7];
    let mut next = |rng: &mut dyn rand::RngCore| {
        let w: f64 = StandardNormal.sample(rng);
        b[0] = 0.99886 * b[0] + w * 0.0555179;
        b[1] = 0.99332 * b[1] + w * 0.0750759;
        b[2] = 0.96900 * b[2] + w * 0.1538520;
        b[3] = 0.86650 * b[3] + w * 0.3104856;
        b[4] = 0.55000 * b[4] + w * 0.5329522;
        b[5] = -0.7616 * b[5] - w * 0.0168980;
        let out = b.iter().sum::<f64>() + w * 0.5362;
        b[6] = w * 0.115926;
        out
    };
    for _ in 0..4096 {
        next(rng);
    }
    let raw: Vec<f64> = (0..n).map(|_| next(rng)).collect();
    unit_rms(raw)
}

pub fn white_noise(n: usize, rng: &mut impl Rng) -> Vec<f64> {
    (0..n).map(|_| StandardNormal.sample(rng)).collect()
}

fn unit_rms(mut x: Vec<f64>) -> Vec<f64> {
    let mean = x.iter().sum::<f64>() / x.len().max(1) as f64;
    x.iter_mut().for_each(|v| *v -= mean);
    let rms = (x.iter().map(|v| v * v).sum::<f64>() / x.len().max(1) as f64).sqrt();
    if rms > 0.0 {
        x.iter_mut().for_each(|v| *v /= rms);
    }
    x
}

/// Scales to a 0.9 peak so 16-bit storage neither clips nor wastes range.
fn finish(samples: Vec<f64>, rate: u32) -> Result<Waveform> {
    let peak = samples.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let scaled = if peak > 0.0 { samples.iter().map(|v| 0.9 * v / peak).collect() } else { samples };
    Ok(Waveform::new(scaled, rate)?)
}

pub fn quake_clip(rate: u32, duration_s: f64, rng: &mut impl Rng) -> Result<Clip> {
    let n = (duration_s * rate as f64).round() as usize;
    let fs = rate as f64;
    let mut x = pink_noise(n, rng);
    let onset = rng.random_range(0.6875..0.8125) * duration_s;
    let rise = rng.random_range(0.02..0.08);
    let decay = rng.random_range(1.0..3.0);
    let amplitude = rng.random_range(4.0..12.0);
    let (f_start, f_end): (f64, f64) = (rng.random_range(15.0..40.0), rng.random_range(1.0..5.0));
    let tones: Vec<(f64, f64, f64)> = (0..5)
        .map(|_| (rng.random_range(1.0..40.0), rng.random_range(0.2..1.0), rng.random_range(0.0..2.0 * PI)))
        .collect();
    let start = (onset * fs).ceil() as usize;
    let span = (n.saturating_sub(start)) as f64 / fs;
    let mut event = vec![0.0; n];
    let mut phase = rng.random_range(0.0..2.0 * PI);
    for (i, e) in event.iter_mut().enumerate().skip(start) {
        let t = i as f64 / fs - onset;
        // exponential sweep from f_start down to f_end over the event
        let f = f_start * (f_end / f_start).powf((t / span.max(1e-9)).min(1.0));
        phase += 2.0 * PI * f / fs;
        let mut s = phase.sin();
        for &(ft, a, ph) in &tones {
            s += a * (2.0 * PI * ft * t + ph).sin();
        }
        *e = s;
    }
    let rms = (event.iter().map(|v| v * v).sum::<f64>() / (n - start).max(1) as f64).sqrt();
    for (i, v) in x.iter_mut().enumerate().skip(start) {
        let t = i as f64 / fs - onset;
        let envelope = (1.0 - (-t / rise).exp()) * (-t / decay).exp();
        *v += amplitude * envelope * event[i] / rms.max(1e-12);
    }
    Ok(Clip { kind: ClipKind::Quake, waveform: finish(x, rate)?, onset_s: Some(onset) })
}

pub fn noise_clip(kind: ClipKind, rate: u32, duration_s: f64, rng: &mut impl Rng) -> Result<Clip> {
    let n = (duration_s * rate as f64).round() as usize;
    let fs = rate as f64;
    let x = match kind {
        ClipKind::Quake => return quake_clip(rate, duration_s, rng),
        ClipKind::StationaryNoise => {
            // random blend of pink and white noise
            let mix = rng.random_range(0.0..1.0);
            let pink = pink_noise(n, rng);
            let white = white_noise(n, rng);
            unit_rms(pink.iter().zip(&white).map(|(p, w)| mix * p + (1.0 - mix) * w).collect())
        }
        ClipKind::Glitch => {
            let mut x = pink_noise(n, rng);
            let count = rng.random_range(1..=3);
            for _ in 0..count {
                let at = (rng.random_range(0.66..0.95) * duration_s * fs) as usize;
                let amp = rng.random_range(15.0..40.0) * if rng.random_bool(0.5) { 1.0 } else { -1.0 };
                let tau = rng.random_range(0.002..0.01) * fs;
                for (k, v) in x.iter_mut().skip(at).take((6.0 * tau) as usize + 1).enumerate() {
                    let sign = if k % 2 == 0 { 1.0 } else { -0.6 };
                    *v += amp * sign * (-(k as f64) / tau).exp();
                }
            }
            x
        }
        ClipKind::Hum => {
            let f = rng.random_range(45.0..60.0f64).min(0.45 * fs);
            let a = rng.random_range(1.0..3.0);
            let ph = rng.random_range(0.0..2.0 * PI);
            let noise = pink_noise(n, rng);
            noise.iter().enumerate().map(|(i, v)| v + a * (2.0 * PI * f * i as f64 / fs + ph).sin()).collect()
        }
    };
    Ok(Clip { kind, waveform: finish(x, rate)?, onset_s: None })
}

/// White noise whose standard deviation jumps from 1 to `ratio` at
/// `onset_s`.
pub fn variance_step_trace(
    rate: u32,
    duration_s: f64,
    onset_s: f64,
    ratio: f64,
    rng: &mut impl Rng,
) -> Result<Waveform> {
    let n = (duration_s * rate as f64).round() as usize;
    let start = (onset_s * rate as f64).round() as usize;
    let x = white_noise(n, rng).into_iter().enumerate().map(|(i, v)| if i >= start { v * ratio } else { v }).collect();
    Ok(Waveform::new(x, rate)?)
}

/// The kind of clip `index` gets: quakes first, then non-quake variants
/// in rotation.
pub fn kind_for(index: usize, n_quake: usize) -> ClipKind {
    if index < n_quake {
        ClipKind::Quake
    } else {
        [ClipKind::StationaryNoise, ClipKind::Glitch, ClipKind::Hum][(index - n_quake) % 3]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorpusItem {
    pub name: String,
    pub clip: Clip,
    pub split: Split,
}

/// Generates the whole corpus in memory, with a stratified seeded split.
pub fn generate(cfg: &SynthConfig) -> Result<Vec<CorpusItem>> {
    cfg.validate()?;
    let total = cfg.n_quake + cfg.n_noise;
    let mut split_rng = clip_rng(cfg.seed, u64::MAX);
    let mut splits = vec![Split::Test; total];
    for range in [0..cfg.n_quake, cfg.n_quake..total] {
        let mut idx: Vec<usize> = range.collect();
        idx.shuffle(&mut split_rng);
        let n_train = (idx.len() as f64 * cfg.train_fraction).round() as usize;
        for &i in &idx[..n_train] {
            splits[i] = Split::Train;
        }
    }
    (0..total)
        .map(|i| {
            let kind = kind_for(i, cfg.n_quake);
            let mut rng = clip_rng(cfg.seed, i as u64);
            let clip = noise_clip(kind, cfg.sample_rate, cfg.duration_s, &mut rng)?;
            let name = format!("{}_{i:04}.wav", kind.as_str());
            Ok(CorpusItem {
                name: name.clone(),
                clip: Clip { waveform: clip.waveform.with_source(name), ..clip },
                split: splits[i],
            })
        })
        .collect()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct EventRow {
    path: String,
    kind: ClipKind,
    onset_s: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorpusSummary {
    pub manifest: PathBuf,
    pub events: PathBuf,
    pub n_quake: usize,
    pub n_noise: usize,
    pub n_train: usize,
    pub n_test: usize,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> SynthError + '_ {
    move |source| SynthError::Io { path: path.to_path_buf(), source }
}

/// Writes `<dir>/<name>.wav`, `manifest.csv` and `events.csv`.
pub fn write_corpus(cfg: &SynthConfig, dir: &Path) -> Result<CorpusSummary> {
    let items = generate(cfg)?;
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut entries = Vec::with_capacity(items.len());
    let mut events = Vec::with_capacity(items.len());
    for item in &items {
        let path = dir.join(&item.name);
        fs::write(&path, write_wav(&item.clip.waveform)?).map_err(io_err(&path))?;
        entries.push(DatasetEntry { path: item.name.clone(), label: item.clip.kind.label(), split: item.split });
        events.push(EventRow { path: item.name.clone(), kind: item.clip.kind, onset_s: item.clip.onset_s });
    }
    let manifest = dir.join("manifest.csv");
    let file = fs::File::create(&manifest).map_err(io_err(&manifest))?;
    write_manifest(file, &entries)?;
    let events_path = dir.join("events.csv");
    let mut wtr = csv::Writer::from_path(&events_path)
        .map_err(|e| SynthError::Io { path: events_path.clone(), source: e.into() })?;
    for row in &events {
        wtr.serialize(row).map_err(|e| SynthError::Io { path: events_path.clone(), source: e.into() })?;
    }
    wtr.flush().map_err(io_err(&events_path))?;
    let n_train = entries.iter().filter(|e| e.split == Split::Train).count();
    Ok(CorpusSummary {
        manifest,
        events: events_path,
        n_quake: cfg.n_quake,
        n_noise: cfg.n_noise,
        n_train,
        n_test: entries.len() - n_train,
    })
}

/// Onsets recorded by [`write_corpus`], keyed by manifest path.
pub fn read_events(path: &Path) -> Result<std::collections::HashMap<String, Option<f64>>> {
    let mut rdr =
        csv::Reader::from_path(path).map_err(|e| SynthError::Io { path: path.to_path_buf(), source: e.into() })?;
    let mut out = std::collections::HashMap::new();
    for row in rdr.deserialize::<EventRow>() {
        let row = row.map_err(|e| SynthError::Io { path: path.to_path_buf(), source: e.into() })?;
        out.insert(row.path, row.onset_s);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pink_noise_has_falling_spectrum() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = pink_noise(1 << 14, &mut rng);
        // energy in first differences is small relative to the signal for 1/f noise
        let diff: f64 = x.windows(2).map(|w| (w[1] - w[0]).powi(2)).sum::<f64>() / x.len() as f64;
        assert!(diff < 1.0, "{diff}");
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let w = white_noise(1 << 14, &mut rng);
        let wdiff: f64 = w.windows(2).map(|w| (w[1] - w[0]).powi(2)).sum::<f64>() / w.len() as f64;
        assert!(wdiff > 1.5);
    }

    #[test]
    fn quake_clip_onset_and_energy() {
        let mut rng = clip_rng(3, 0);
        let clip = quake_clip(1000, 16.0, &mut rng).unwrap();
        let onset = clip.onset_s.unwrap();
        assert!((11.0..13.0).contains(&onset));
        let x = clip.waveform.samples();
        let i = (onset * 1000.0) as usize;
        let before: f64 = x[i - 2000..i].iter().map(|v| v * v).sum();
        let after: f64 = x[i + 100..i + 2100].iter().map(|v| v * v).sum();
        assert!(after > 10.0 * before);
        assert!(clip.waveform.peak() <= 0.9 + 1e-12);
    }

    #[test]
    fn corpus_is_seeded_and_stratified() {
        let cfg = SynthConfig { n_quake: 10, n_noise: 9, duration_s: 2.0, sample_rate: 200, ..Default::default() };
        let a = generate(&cfg).unwrap();
        let b = generate(&cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.iter().filter(|c| c.clip.kind == ClipKind::Quake).count(), 10);
        let train_q = a.iter().filter(|c| c.clip.kind == ClipKind::Quake && c.split == Split::Train).count();
        let train_n = a.iter().filter(|c| c.clip.kind != ClipKind::Quake && c.split == Split::Train).count();
        assert_eq!((train_q, train_n), (8, 7));
        let other = generate(&SynthConfig { seed: 8, ..cfg.clone() }).unwrap();
        assert_ne!(a, other);
        assert!(generate(&SynthConfig { n_quake: 0, ..cfg }).is_err());
    }

    #[test]
    fn variance_step_levels() {
        let mut rng = clip_rng(1, 1);
        let w = variance_step_trace(100, 20.0, 12.0, 10.0, &mut rng).unwrap();
        let x = w.samples();
        let var = |s: &[f64]| s.iter().map(|v| v * v).sum::<f64>() / s.len() as f64;
        assert!((var(&x[..1200]) - 1.0).abs() < 0.15);
        assert!((var(&x[1200..]) / 100.0 - 1.0).abs() < 0.15);
    }
}
