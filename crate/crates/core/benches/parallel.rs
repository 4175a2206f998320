//! Parallel vs sequential execution of the data-parallel hot paths. On a
//! single-core machine both arms should time the same.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use quake_core::detector::{classify_windows_batch, DetectorConfig};
use quake_core::exec;
use quake_core::features::{FeatureConfig, FeatureExtractor, FeatureKind};
use quake_core::nn::{
    Classifier, FeatureSetup, LstmReadout, ModelKind, ModelMetadata, ModelSpec, Network, Standardizer, Tensor,
    TrainedModel,
};
use quake_core::synth::{clip_rng, quake_clip};
use quake_core::Execution;
use std::hint::black_box;

const MODES: [(&str, Execution); 2] = [("parallel", Execution::Parallel), ("sequential", Execution::Sequential)];

fn signal(seconds: f64) -> Vec<f64> {
    quake_clip(1000, seconds, &mut clip_rng(1, 0)).unwrap().waveform.into_samples()
}

fn features(c: &mut Criterion) {
    let ex = FeatureExtractor::new(&FeatureConfig::reference(1000)).unwrap();
    let x = signal(51.2);
    let windows: Vec<&[f64]> = x.chunks_exact(200).collect();
    let mut g = c.benchmark_group("mfcc_256_windows");
    for (name, mode) in MODES {
        g.bench_function(name, |b| {
            b.iter(|| exec::map(mode, &windows, |w| ex.extract_samples(black_box(w), FeatureKind::Mfcc).unwrap()))
        });
    }
    g.finish();
}

fn gradients(c: &mut Criterion) {
    let ex = FeatureExtractor::new(&FeatureConfig::reference(1000)).unwrap();
    let x = signal(6.4);
    let inputs: Vec<Tensor> = x
        .chunks_exact(200)
        .map(|w| {
            let m = ex.extract_samples(w, FeatureKind::Mfcc).unwrap();
            Tensor::new(vec![9, 13], m.values.into_vec()).unwrap()
        })
        .collect();
    let batch: Vec<(&Tensor, usize)> = inputs.iter().enumerate().map(|(i, t)| (t, i % 2)).collect();
    let mut g = c.benchmark_group("gradients_batch_32");
    g.sample_size(20);
    for kind in [ModelKind::Cnn, ModelKind::Lstm] {
        let net = Network::init(ModelSpec::build(kind, 9, 13, LstmReadout::LastStep).unwrap(), 3).unwrap();
        for (name, mode) in MODES {
            g.bench_with_input(BenchmarkId::new(kind.to_string(), name), &mode, |b, &mode| {
                b.iter(|| net.loss_and_backward(black_box(&batch), mode).unwrap())
            });
        }
    }
    g.finish();
}

fn batch_classification(c: &mut Criterion) {
    let setup = FeatureSetup { config: FeatureConfig::reference(1000), kind: FeatureKind::Mfcc, window_s: 0.2 };
    let spec = ModelSpec::build(ModelKind::Cnn, 9, 13, LstmReadout::LastStep).unwrap();
    let model = TrainedModel { network: Network::init(spec, 5).unwrap(), standardizer: Standardizer::identity(13) };
    let clf = Classifier::new(model, setup, ModelMetadata::default()).unwrap();
    let x = signal(16.0);
    let cfg = DetectorConfig::default();
    let mut g = c.benchmark_group("classify_16s_clip");
    g.sample_size(20);
    for (name, mode) in MODES {
        g.bench_function(name, |b| b.iter(|| classify_windows_batch(&clf, black_box(&x), &cfg, mode).unwrap()));
    }
    g.finish();
}

criterion_group!(benches, features, gradients, batch_classification);
criterion_main!(benches);
