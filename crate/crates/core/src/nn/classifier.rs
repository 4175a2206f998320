use super::{ModelMetadata, NnError, Result, Tensor, TrainedModel};
use crate::features::{FeatureConfig, FeatureExtractor, FeatureKind};
use crate::Label;
use serde::{Deserialize, Serialize};
use std::time::Instant;

/// Everything needed to turn a raw window into model input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSetup {
    pub config: FeatureConfig,
    pub kind: FeatureKind,
    /// Classification window length in seconds.
    pub window_s: f64,
}

impl FeatureSetup {
    pub fn window_samples(&self) -> usize {
        (self.window_s * self.config.sample_rate as f64).round() as usize
    }

    /// `(frames, coefficients)` of one window's feature matrix.
    pub fn input_shape(&self) -> Result<(usize, usize)> {
        let ex = FeatureExtractor::new(&self.config)?;
        Ok(ex.output_shape(self.window_samples(), self.kind))
    }

    /// Peak-normalizes a window (unless it is silent) and extracts its
    /// feature matrix as a `[frames, coefficients]` tensor.
    pub fn prepare(&self, extractor: &FeatureExtractor, window: &[f64]) -> Result<Tensor> {
        let peak = window.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let features = if peak > 0.0 {
            let scaled: Vec<f64> = window.iter().map(|v| v / peak).collect();
            extractor.extract_samples(&scaled, self.kind)?
        } else {
            extractor.extract_samples(window, self.kind)?
        };
        let (r, c) = features.shape();
        Tensor::new(vec![r, c], features.values.into_vec())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub label: Label,
    /// Probability of `label`.
    pub probability: f64,
    pub probabilities: [f64; 2],
    /// Normalization, feature extraction and standardization time.
    pub process_ms: f64,
    /// Forward-pass time.
    pub predict_ms: f64,
}

/// A trained model bundled with its feature pipeline. Immutable, so one
/// instance can serve concurrent callers.
#[derive(Debug, Clone)]
pub struct Classifier {
    pub model: TrainedModel,
    pub setup: FeatureSetup,
    pub metadata: ModelMetadata,
    extractor: FeatureExtractor,
}

impl PartialEq for Classifier {
    fn eq(&self, other: &Self) -> bool {
        self.model == other.model && self.setup == other.setup && self.metadata == other.metadata
    }
}

impl Classifier {
    pub fn new(model: TrainedModel, setup: FeatureSetup, metadata: ModelMetadata) -> Result<Self> {
        let extractor = FeatureExtractor::new(&setup.config)?;
        let (rows, cols) = extractor.output_shape(setup.window_samples(), setup.kind);
        let want = &model.network.spec().input_shape;
        if want[..2] != [rows, cols] {
            return Err(NnError::Shape(format!(
                "model input {want:?} does not fit {rows}×{cols} features of a {} s window",
                setup.window_s
            )));
        }
        if model.standardizer.mean.len() != cols {
            return Err(NnError::Shape("standardizer width differs from feature width".into()));
        }
        Ok(Self { model, setup, metadata, extractor })
    }

    pub fn sample_rate(&self) -> u32 {
        self.setup.config.sample_rate
    }

    pub fn window_samples(&self) -> usize {
        self.setup.window_samples()
    }

    pub fn extractor(&self) -> &FeatureExtractor {
        &self.extractor
    }

    /// Standardized model input for one raw window.
    pub fn features(&self, window: &[f64]) -> Result<Tensor> {
        let raw = self.setup.prepare(&self.extractor, window)?;
        self.model.standardizer.apply(&raw)
    }

    pub fn classify_window(&self, window: &[f64]) -> Result<Prediction> {
        let t0 = Instant::now();
        let x = self.features(window)?;
        let t1 = Instant::now();
        let p = self.model.network.forward(&x)?;
        let t2 = Instant::now();
        let idx = if p[1] > p[0] { 1 } else { 0 };
        Ok(Prediction {
            label: Label::from_index(idx).expect("two classes"),
            probability: p[idx],
            probabilities: [p[0], p[1]],
            process_ms: (t1 - t0).as_secs_f64() * 1e3,
            predict_ms: (t2 - t1).as_secs_f64() * 1e3,
        })
    }
}
