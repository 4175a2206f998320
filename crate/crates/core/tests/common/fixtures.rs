//! Classifiers and signals shared by the integration tests.

use quake_core::features::{FeatureConfig, FeatureKind};
use quake_core::nn::{
    Classifier, FeatureSetup, LstmReadout, ModelKind, ModelMetadata, ModelSpec, Network, Standardizer, TrainedModel,
};
use quake_core::synth::{clip_rng, quake_clip};
use quake_core::waveform::Waveform;

pub fn setup(rate: u32, window_s: f64) -> FeatureSetup {
    FeatureSetup { config: FeatureConfig::reference(rate), kind: FeatureKind::Mfcc, window_s }
}

/// Freshly initialized network behind the reference 0.2 s / 1000 Hz setup.
pub fn untrained(kind: ModelKind, seed: u64) -> Classifier {
    let setup = setup(1000, 0.2);
    let spec = ModelSpec::build(kind, 9, 13, LstmReadout::LastStep).unwrap();
    let model = TrainedModel { network: Network::init(spec, seed).unwrap(), standardizer: Standardizer::identity(13) };
    Classifier::new(model, setup, ModelMetadata::default()).unwrap()
}

/// A CNN whose output layer ignores its input and puts probability
/// `sigmoid(2 * margin)` on "earthquake" for every window.
pub fn constant_quake(margin: f64) -> Classifier {
    let mut c = untrained(ModelKind::Cnn, 1);
    let params = c.model.network.params_mut();
    let last = params.len() - 1;
    params.tensor_mut(last - 1).data_mut().fill(0.0);
    params.tensor_mut(last).data_mut().copy_from_slice(&[-margin, margin]);
    c
}

pub fn always_quake() -> Classifier {
    constant_quake(50.0)
}

pub fn quake_waveform(seed: u64, duration_s: f64) -> Waveform {
    quake_clip(1000, duration_s, &mut clip_rng(seed, 0)).unwrap().waveform
}
