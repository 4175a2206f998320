//! featurize, train and eval.

use super::data::{build_samples, clip_features, Dataset};
use super::{HarnessError, Result};
use crate::exec::Execution;
use crate::features::{FeatureConfig, FeatureExtractor, FeatureKind, FeatureMatrix, Matrix};
use crate::metrics::MetricsReport;
use crate::nn::{
    evaluate, load_model, save_model, train, Classifier, EpochStats, FeatureSetup, LstmReadout, ModelKind,
    ModelMetadata, ModelSpec, TrainConfig,
};
use crate::waveform::Split;
use serde::Serialize;
use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

/// Feature settings for one (rate, window) cell; the stride, frame length
/// and filterbank come from `base`.
pub fn feature_setup(base: &FeatureConfig, rate: u32, window_s: f64, kind: FeatureKind) -> FeatureSetup {
    FeatureSetup { config: FeatureConfig { sample_rate: rate, ..base.clone() }, kind, window_s }
}

#[derive(Debug, Clone, Default)]
pub struct FeaturizeReport {
    /// `(source, feature file, rows, cols)` per clip.
    pub written: Vec<(String, PathBuf, usize, usize)>,
    pub failures: Vec<(String, String)>,
    pub index: PathBuf,
}

#[derive(Serialize)]
struct IndexRow<'a> {
    path: &'a str,
    label: crate::Label,
    split: Split,
    features: String,
    rows: usize,
    cols: usize,
}

/// Writes one feature CSV per clip (its loudest window) and an index.
/// Per-file failures are collected, not fatal.
pub fn cmd_featurize(manifest: &Path, setup: &FeatureSetup, out_dir: &Path) -> Result<FeaturizeReport> {
    let dataset = Dataset::load(manifest)?;
    let extractor = FeatureExtractor::new(&setup.config)?;
    let dir = out_dir.join("features");
    fs::create_dir_all(&dir).map_err(|e| HarnessError::io(&dir, e))?;
    let mut report = FeaturizeReport { index: dir.join("index.csv"), ..Default::default() };
    let mut index = csv::Writer::from_writer(Vec::new());
    for entry in &dataset.entries {
        let src = dataset.resolve(entry);
        match clip_features(&src, setup, &extractor) {
            Ok(t) => {
                let (rows, cols) = (t.shape()[0], t.shape()[1]);
                let fm = FeatureMatrix { values: Matrix::from_vec(rows, cols, t.into_data())?, kind: setup.kind };
                let stem = Path::new(&entry.path).file_stem().map(|s| s.to_string_lossy().into_owned());
                let name = format!("{}.csv", stem.unwrap_or_else(|| entry.path.replace(['/', '\\'], "_")));
                let path = dir.join(&name);
                let mut text = fm.to_csv(&setup.config);
                text.insert_str(0, &format!("#window_s={}\n", setup.window_s));
                fs::write(&path, text).map_err(|e| HarnessError::io(&path, e))?;
                log::debug!("{}: {rows}x{cols}", entry.path);
                index
                    .serialize(IndexRow {
                        path: &entry.path,
                        label: entry.label,
                        split: entry.split,
                        features: name,
                        rows,
                        cols,
                    })
                    .map_err(|e| HarnessError::Message(e.to_string()))?;
                report.written.push((entry.path.clone(), path, rows, cols));
            }
            Err(e) => {
                log::error!("{}: {e}", entry.path);
                report.failures.push((entry.path.clone(), e.to_string()));
            }
        }
    }
    let bytes = index.into_inner().map_err(|e| HarnessError::Message(e.to_string()))?;
    fs::write(&report.index, bytes).map_err(|e| HarnessError::io(&report.index, e))?;
    Ok(report)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainRequest {
    pub kind: ModelKind,
    pub readout: LstmReadout,
    pub setup: FeatureSetup,
    pub train: TrainConfig,
}

#[derive(Debug, Clone)]
pub struct TrainReport {
    pub model_path: PathBuf,
    pub history_path: PathBuf,
    pub history: Vec<EpochStats>,
    /// Accuracy of the final model on the full training split.
    pub train_accuracy: f64,
    pub classifier: Classifier,
}

pub fn history_csv(history: &[EpochStats]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for h in history {
        w.serialize(h).map_err(|e| HarnessError::Message(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| HarnessError::Message(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}

/// Trains on the manifest's train split and returns the classifier
/// without touching the filesystem beyond reading clips.
pub fn train_classifier(dataset: &Dataset, req: &TrainRequest) -> Result<(Classifier, Vec<EpochStats>, f64)> {
    let entries = dataset.split(Split::Train);
    if entries.is_empty() {
        return Err(HarnessError::Message("manifest has no training clips".into()));
    }
    let samples = build_samples(dataset, &entries, &req.setup, req.train.execution)?;
    let (rows, cols) = (samples[0].features.shape()[0], samples[0].features.shape()[1]);
    let spec = ModelSpec::build(req.kind, rows, cols, req.readout)?;
    let (model, history) = train(&spec, &samples, &req.train)?;
    let (_, cm) = evaluate(&model, &samples, req.train.execution)?;
    let mut notes = BTreeMap::new();
    notes.insert("model".into(), req.kind.to_string());
    notes.insert("readout".into(), format!("{:?}", req.readout));
    notes.insert("train_clips".into(), samples.len().to_string());
    let metadata = ModelMetadata { train: req.train.clone(), notes };
    Ok((Classifier::new(model, req.setup.clone(), metadata)?, history, cm.accuracy()))
}

/// Trains and writes `model_<kind>.qfm` plus `history_<kind>.csv`.
pub fn cmd_train(manifest: &Path, req: &TrainRequest, out_dir: &Path) -> Result<TrainReport> {
    let dataset = Dataset::load(manifest)?;
    let (classifier, history, train_accuracy) = train_classifier(&dataset, req)?;
    fs::create_dir_all(out_dir).map_err(|e| HarnessError::io(out_dir, e))?;
    let model_path = out_dir.join(format!("model_{}.qfm", req.kind));
    fs::write(&model_path, save_model(&classifier)).map_err(|e| HarnessError::io(&model_path, e))?;
    let history_path = out_dir.join(format!("history_{}.csv", req.kind));
    fs::write(&history_path, history_csv(&history)?).map_err(|e| HarnessError::io(&history_path, e))?;
    Ok(TrainReport { model_path, history_path, history, train_accuracy, classifier })
}

pub fn read_classifier(path: &Path) -> Result<Classifier> {
    let bytes = fs::read(path).map_err(|e| HarnessError::io(path, e))?;
    Ok(load_model(&bytes)?)
}

/// Scores `classifier` on one split of a dataset.
pub fn eval_classifier(
    classifier: &Classifier,
    dataset: &Dataset,
    split: Split,
    execution: Execution,
) -> Result<MetricsReport> {
    let entries = dataset.split(split);
    if entries.is_empty() {
        return Err(HarnessError::Message(format!("manifest has no {split:?} clips")));
    }
    let samples = build_samples(dataset, &entries, &classifier.setup, execution)?;
    let (_, cm) = evaluate(&classifier.model, &samples, execution)?;
    let mut config: BTreeMap<String, String> = classifier.setup.config.echo().into_iter().collect();
    config.insert("feature_kind".into(), format!("{:?}", classifier.setup.kind));
    config.insert("window_s".into(), classifier.setup.window_s.to_string());
    config.insert("model".into(), classifier.model.network.spec().kind.to_string());
    config.insert("seed".into(), classifier.metadata.train.rng_seed.to_string());
    config.insert("split".into(), format!("{split:?}").to_lowercase());
    config.insert("clips".into(), samples.len().to_string());
    Ok(MetricsReport::from_confusion(cm, config))
}

pub fn cmd_eval(model: &Path, manifest: &Path, split: Split, execution: Execution) -> Result<MetricsReport> {
    let classifier = read_classifier(model)?;
    eval_classifier(&classifier, &Dataset::load(manifest)?, split, execution)
}
