//! Dataset loading: manifest resolution, resampling and window selection.

use super::{HarnessError, Result};
use crate::exec::{self, Execution};
use crate::features::FeatureExtractor;
use crate::nn::{FeatureSetup, LabeledSample};
use crate::waveform::{decimate, read_manifest, read_wav, upsample, DatasetEntry, Split, Waveform};
use std::fs;
use std::path::{Path, PathBuf};

/// Manifest entries plus the directory their relative paths resolve against.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub root: PathBuf,
    pub entries: Vec<DatasetEntry>,
}

impl Dataset {
    pub fn load(manifest: &Path) -> Result<Self> {
        let file = fs::File::open(manifest).map_err(|e| HarnessError::io(manifest, e))?;
        let entries = read_manifest(file)?;
        let root = manifest.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(Self { root, entries })
    }

    pub fn split(&self, split: Split) -> Vec<&DatasetEntry> {
        self.entries.iter().filter(|e| e.split == split).collect()
    }

    pub fn resolve(&self, entry: &DatasetEntry) -> PathBuf {
        self.root.join(&entry.path)
    }
}

/// Reads a WAV at its native rate.
pub fn read_clip(path: &Path) -> Result<Waveform> {
    let bytes = fs::read(path).map_err(|e| HarnessError::io(path, e))?;
    Ok(read_wav(&bytes)?.with_source(path.display().to_string()))
}

/// Reads a WAV and brings it to `rate`: upsampled when the file is slower,
/// decimated by an integer factor when it is faster.
pub fn load_clip(path: &Path, rate: u32) -> Result<Waveform> {
    let w = read_clip(path)?;
    if w.sample_rate() == rate {
        return Ok(w);
    }
    if w.sample_rate() > rate {
        log::debug!("decimating {} from {} Hz to {rate} Hz", path.display(), w.sample_rate());
        return Ok(decimate(&w, rate)?);
    }
    log::debug!("upsampling {} from {} Hz to {rate} Hz", path.display(), w.sample_rate());
    Ok(upsample(&w, rate)?)
}

/// Start of the non-overlapping `len`-sample window with the most energy
/// (earliest wins ties). `None` if the signal is shorter than one window.
pub fn select_window(samples: &[f64], len: usize) -> Option<usize> {
    if len == 0 || samples.len() < len {
        return None;
    }
    let mut best = (0, f64::NEG_INFINITY);
    for (k, chunk) in samples.chunks_exact(len).enumerate() {
        let e: f64 = chunk.iter().map(|v| v * v).sum();
        if e > best.1 {
            best = (k * len, e);
        }
    }
    Some(best.0)
}

/// Loads one clip and turns its loudest window into a feature matrix.
pub fn clip_features(path: &Path, setup: &FeatureSetup, extractor: &FeatureExtractor) -> Result<crate::nn::Tensor> {
    let w = load_clip(path, setup.config.sample_rate)?;
    let len = setup.window_samples();
    let start = select_window(w.samples(), len).ok_or_else(|| {
        HarnessError::Message(format!(
            "{}: {} samples is shorter than one {len}-sample window",
            path.display(),
            w.len()
        ))
    })?;
    Ok(setup.prepare(extractor, &w.samples()[start..start + len])?)
}

/// Feature matrices for `entries`, in order.
pub fn build_samples(
    dataset: &Dataset,
    entries: &[&DatasetEntry],
    setup: &FeatureSetup,
    execution: Execution,
) -> Result<Vec<LabeledSample>> {
    let extractor = FeatureExtractor::new(&setup.config)?;
    exec::map(execution, entries, |e| {
        clip_features(&dataset.resolve(e), setup, &extractor).map(|features| LabeledSample { features, label: e.label })
    })
    .into_iter()
    .collect()
}
