use super::model::argmax;
use super::{adam_step, AdamState, ModelSpec, Network, NnError, Result, Tensor};
use crate::exec::{self, Execution};
use crate::metrics::ConfusionMatrix;
use crate::Label;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub rng_seed: u64,
    /// Share of the training set held out for per-epoch validation.
    pub validation_fraction: f64,
    pub learning_rate: f64,
    #[serde(skip)]
    pub execution: Execution,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 100,
            batch_size: 32,
            rng_seed: 0,
            validation_fraction: 0.1,
            learning_rate: 1e-3,
            execution: Execution::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(NnError::Config("epochs must be at least 1".into()));
        }
        if self.batch_size == 0 {
            return Err(NnError::Config("batch_size must be at least 1".into()));
        }
        if !(0.0..1.0).contains(&self.validation_fraction) {
            return Err(NnError::Config("validation_fraction must be in [0, 1)".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(NnError::Config("learning_rate must be positive".into()));
        }
        Ok(())
    }
}

/// A `[rows, cols]` feature matrix with its class.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSample {
    pub features: Tensor,
    pub label: Label,
}

/// Per-column (per-coefficient) mean and standard deviation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardizer {
    pub fn identity(cols: usize) -> Self {
        Self { mean: vec![0.0; cols], std: vec![1.0; cols] }
    }

    /// Statistics over every row of every matrix. Columns with (near) zero
    /// spread get a divisor of 1.
    pub fn fit<'a>(matrices: impl IntoIterator<Item = &'a Tensor>) -> Result<Self> {
        let mut sum: Vec<f64> = Vec::new();
        let mut sq: Vec<f64> = Vec::new();
        let mut count = 0usize;
        let mut all: Vec<&Tensor> = Vec::new();
        for m in matrices {
            let cols = *m.shape().last().unwrap_or(&0);
            if sum.is_empty() {
                sum = vec![0.0; cols];
            } else if cols != sum.len() {
                return Err(NnError::Shape(format!("standardizer: {cols} columns, expected {}", sum.len())));
            }
            for row in m.data().chunks(cols.max(1)) {
                sum.iter_mut().zip(row).for_each(|(s, v)| *s += v);
                count += 1;
            }
            all.push(m);
        }
        if count == 0 {
            return Err(NnError::EmptyDataset);
        }
        let mean: Vec<f64> = sum.iter().map(|s| s / count as f64).collect();
        sq.resize(mean.len(), 0.0);
        for m in all {
            for row in m.data().chunks(mean.len().max(1)) {
                for ((q, v), mu) in sq.iter_mut().zip(row).zip(&mean) {
                    *q += (v - mu) * (v - mu);
                }
            }
        }
        let std = sq
            .iter()
            .map(|q| {
                let s = (q / count as f64).sqrt();
                if s > 1e-12 {
                    s
                } else {
                    1.0
                }
            })
            .collect();
        Ok(Self { mean, std })
    }

    pub fn apply(&self, m: &Tensor) -> Result<Tensor> {
        let cols = self.mean.len();
        if m.shape().last() != Some(&cols) {
            return Err(NnError::Shape(format!("standardizer has {cols} columns, input {:?}", m.shape())));
        }
        let data = m
            .data()
            .chunks(cols)
            .flat_map(|row| row.iter().zip(&self.mean).zip(&self.std).map(|((v, mu), sd)| (v - mu) / sd))
            .collect();
        Tensor::new(m.shape().to_vec(), data)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    pub network: Network,
    pub standardizer: Standardizer,
}

impl TrainedModel {
    /// Class probabilities for a raw (unstandardized) feature matrix.
    pub fn predict_proba(&self, features: &Tensor) -> Result<Vec<f64>> {
        self.network.forward(&self.standardizer.apply(features)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub loss: f64,
    pub accuracy: f64,
    pub val_loss: Option<f64>,
    pub val_accuracy: Option<f64>,
}

/// Trains `spec` on `samples`. The result is a pure function of the spec,
/// the sample order and `config.rng_seed`.
pub fn train(
    spec: &ModelSpec,
    samples: &[LabeledSample],
    config: &TrainConfig,
) -> Result<(TrainedModel, Vec<EpochStats>)> {
    config.validate()?;
    spec.validate()?;
    let first = samples.first().ok_or(NnError::EmptyDataset)?;
    if let Some(bad) = samples.iter().find(|s| s.features.shape() != first.features.shape()) {
        return Err(NnError::Shape(format!(
            "inconsistent feature shapes {:?} and {:?}",
            first.features.shape(),
            bad.features.shape()
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed ^ 0x5EED_5EED);
    let mut order: Vec<usize> = (0..samples.len()).collect();
    order.shuffle(&mut rng);
    let n_val = ((samples.len() as f64 * config.validation_fraction) as usize).min(samples.len() - 1);
    let (val_idx, train_idx) = order.split_at(n_val);
    let mut train_idx = train_idx.to_vec();

    let standardizer = Standardizer::fit(train_idx.iter().map(|&i| &samples[i].features))?;
    let prepared: Vec<Tensor> =
        exec::map(config.execution, samples, |s| standardizer.apply(&s.features)).into_iter().collect::<Result<_>>()?;

    let mut network = Network::init(spec.clone(), config.rng_seed)?;
    let mut adam = AdamState::new(network.params(), config.learning_rate);
    let mut history = Vec::with_capacity(config.epochs);
    for epoch in 1..=config.epochs {
        train_idx.shuffle(&mut rng);
        let (mut loss_sum, mut correct) = (0.0, 0usize);
        for batch_idx in train_idx.chunks(config.batch_size) {
            let batch: Vec<(&Tensor, usize)> =
                batch_idx.iter().map(|&i| (&prepared[i], samples[i].label.index())).collect();
            let g = network.loss_and_backward(&batch, config.execution)?;
            if !g.loss.is_finite() {
                return Err(NnError::Diverged { epoch });
            }
            loss_sum += g.loss * batch.len() as f64;
            correct += g.correct;
            adam_step(network.params_mut(), &g.grads, &mut adam)?;
        }
        let n = train_idx.len() as f64;
        let (val_loss, val_accuracy) = if val_idx.is_empty() {
            (None, None)
        } else {
            let (l, cm) = score(&network, val_idx.iter().map(|&i| (&prepared[i], samples[i].label)), config.execution)?;
            (Some(l), Some(cm.accuracy()))
        };
        let stats = EpochStats { epoch, loss: loss_sum / n, accuracy: correct as f64 / n, val_loss, val_accuracy };
        log::debug!("epoch {epoch}: loss {:.5} acc {:.4}", stats.loss, stats.accuracy);
        history.push(stats);
    }
    Ok((TrainedModel { network, standardizer }, history))
}

fn score<'a>(
    network: &Network,
    items: impl Iterator<Item = (&'a Tensor, Label)>,
    execution: Execution,
) -> Result<(f64, ConfusionMatrix)> {
    let items: Vec<(&Tensor, Label)> = items.collect();
    let outs = exec::map(execution, &items, |(x, _)| network.forward(x));
    let mut cm = ConfusionMatrix::default();
    let mut loss = 0.0;
    for ((_, truth), p) in items.iter().zip(outs) {
        let p = p?;
        loss -= p[truth.index()].max(f64::MIN_POSITIVE).ln();
        cm.add(*truth, Label::from_index(argmax(&p)).expect("two classes"));
    }
    Ok((loss / items.len().max(1) as f64, cm))
}

/// Mean cross-entropy and confusion matrix of `model` on raw samples.
pub fn evaluate(
    model: &TrainedModel,
    samples: &[LabeledSample],
    execution: Execution,
) -> Result<(f64, ConfusionMatrix)> {
    let prepared: Vec<Tensor> = samples.iter().map(|s| model.standardizer.apply(&s.features)).collect::<Result<_>>()?;
    score(&model.network, prepared.iter().zip(samples.iter().map(|s| s.label)), execution)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{Activation, LayerSpec, ModelKind};
    use rand::Rng;

    fn toy(n: usize, seed: u64) -> Vec<LabeledSample> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|i| {
                let label = if i % 2 == 0 { Label::Earthquake } else { Label::NonEarthquake };
                let shift = if label == Label::Earthquake { 1.0 } else { -1.0 };
                let data = (0..12).map(|_| shift + rng.random_range(-0.5..0.5)).collect();
                LabeledSample { features: Tensor::new(vec![4, 3], data).unwrap(), label }
            })
            .collect()
    }

    fn tiny_spec() -> ModelSpec {
        ModelSpec::custom(
            ModelKind::Cnn,
            vec![4, 3],
            vec![
                LayerSpec::Flatten,
                LayerSpec::Dense { units: 6, activation: Activation::Relu },
                LayerSpec::Dense { units: 2, activation: Activation::Linear },
            ],
        )
        .unwrap()
    }

    #[test]
    fn separable_toy_reaches_full_accuracy() {
        let data = toy(64, 1);
        let cfg = TrainConfig { epochs: 50, batch_size: 8, rng_seed: 9, learning_rate: 1e-2, ..Default::default() };
        let (model, history) = train(&tiny_spec(), &data, &cfg).unwrap();
        assert_eq!(history.len(), 50);
        let (_, cm) = evaluate(&model, &data, Execution::Sequential).unwrap();
        assert_eq!(cm.accuracy(), 1.0);
        assert!(history.last().unwrap().loss < history[0].loss);
    }

    #[test]
    fn same_seed_same_params() {
        let data = toy(40, 2);
        let cfg = TrainConfig { epochs: 5, batch_size: 7, rng_seed: 3, ..Default::default() };
        let (a, ha) = train(&tiny_spec(), &data, &cfg).unwrap();
        let seq = TrainConfig { execution: Execution::Sequential, ..cfg.clone() };
        let (b, hb) = train(&tiny_spec(), &data, &seq).unwrap();
        assert_eq!(a, b);
        assert_eq!(ha, hb);
        let other = TrainConfig { rng_seed: 4, ..cfg };
        let (c, _) = train(&tiny_spec(), &data, &other).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn divergence_and_bad_input_are_errors() {
        let mut data = toy(8, 3);
        let cfg = TrainConfig { epochs: 2, validation_fraction: 0.0, ..Default::default() };
        data[0].features.data_mut()[0] = f64::INFINITY;
        assert!(matches!(train(&tiny_spec(), &data, &cfg), Err(NnError::Diverged { epoch: 1 })));
        assert!(matches!(train(&tiny_spec(), &[], &cfg), Err(NnError::EmptyDataset)));
        let mut mixed = toy(4, 4);
        mixed[1].features = Tensor::zeros(&[3, 4]);
        assert!(matches!(train(&tiny_spec(), &mixed, &cfg), Err(NnError::Shape(_))));
        let bad = TrainConfig { epochs: 0, ..Default::default() };
        assert!(matches!(train(&tiny_spec(), &toy(4, 5), &bad), Err(NnError::Config(_))));
    }

    #[test]
    fn standardizer_statistics() {
        let a = Tensor::new(vec![2, 2], vec![1.0, 5.0, 3.0, 5.0]).unwrap();
        let s = Standardizer::fit([&a]).unwrap();
        assert_eq!(s.mean, vec![2.0, 5.0]);
        assert_eq!(s.std, vec![1.0, 1.0]);
        let z = s.apply(&a).unwrap();
        assert_eq!(z.data(), &[-1.0, 0.0, 1.0, 0.0]);
    }
}
