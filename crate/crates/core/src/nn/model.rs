use super::ops::{self, LstmCache};
use super::{NnError, Result, Tensor};
use crate::exec::{self, Execution};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::ops::Range;
use std::str::FromStr;

/// Samples per gradient work unit. Fixed so the summation order, and hence
/// every bit of the result, is independent of the thread count.
pub const CHUNK: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Linear,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum LayerSpec {
    Conv3x3 {
        filters: usize,
        activation: Activation,
    },
    MaxPool2x2,
    Flatten,
    Dense {
        units: usize,
        activation: Activation,
    },
    Lstm {
        units: usize,
    },
    /// The same dense layer applied to every timestep of a `[T, D]` input.
    TimeDense {
        units: usize,
        activation: Activation,
    },
    /// `[T, D]` to the `D`-vector of the final timestep.
    LastStep,
}

impl LayerSpec {
    fn tag(&self) -> &'static str {
        match self {
            LayerSpec::Conv3x3 { .. } => "conv",
            LayerSpec::MaxPool2x2 => "pool",
            LayerSpec::Flatten => "flatten",
            LayerSpec::Dense { .. } => "dense",
            LayerSpec::Lstm { .. } => "lstm",
            LayerSpec::TimeDense { .. } => "td",
            LayerSpec::LastStep => "last",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    #[default]
    Cnn,
    Lstm,
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModelKind::Cnn => "cnn",
            ModelKind::Lstm => "lstm",
        })
    }
}

impl FromStr for ModelKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.trim().to_ascii_lowercase().as_str() {
            "cnn" => Ok(ModelKind::Cnn),
            "lstm" => Ok(ModelKind::Lstm),
            other => Err(format!("unknown model kind {other:?} (expected cnn or lstm)")),
        }
    }
}

/// How the LSTM's per-timestep outputs reach the 2-way classifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LstmReadout {
    #[default]
    LastStep,
    Flatten,
}

/// Architecture description. Also embedded in model files so a load can
/// verify every tensor name and shape.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub kind: ModelKind,
    pub input_shape: Vec<usize>,
    pub layers: Vec<LayerSpec>,
}

impl ModelSpec {
    /// Four same-padded 3×3 ReLU convs (16, 32, 64, 128 filters), one 2×2
    /// max pool, then dense 128 → 64 → 2.
    pub fn cnn(rows: usize, cols: usize) -> Result<Self> {
        use Activation::*;
        let mut layers: Vec<LayerSpec> =
            [16, 32, 64, 128].iter().map(|&filters| LayerSpec::Conv3x3 { filters, activation: Relu }).collect();
        layers.extend([
            LayerSpec::MaxPool2x2,
            LayerSpec::Flatten,
            LayerSpec::Dense { units: 128, activation: Relu },
            LayerSpec::Dense { units: 64, activation: Relu },
            LayerSpec::Dense { units: 2, activation: Linear },
        ]);
        Self::custom(ModelKind::Cnn, vec![rows, cols, 1], layers)
    }

    /// Two 128-unit LSTMs, time-distributed ReLU dense 64 → 32 → 16 → 8,
    /// then a 2-unit dense over the chosen readout.
    pub fn lstm(rows: usize, cols: usize, readout: LstmReadout) -> Result<Self> {
        use Activation::*;
        let mut layers = vec![LayerSpec::Lstm { units: 128 }, LayerSpec::Lstm { units: 128 }];
        layers.extend([64, 32, 16, 8].iter().map(|&units| LayerSpec::TimeDense { units, activation: Relu }));
        layers.push(match readout {
            LstmReadout::LastStep => LayerSpec::LastStep,
            LstmReadout::Flatten => LayerSpec::Flatten,
        });
        layers.push(LayerSpec::Dense { units: 2, activation: Linear });
        Self::custom(ModelKind::Lstm, vec![rows, cols], layers)
    }

    pub fn build(kind: ModelKind, rows: usize, cols: usize, readout: LstmReadout) -> Result<Self> {
        match kind {
            ModelKind::Cnn => Self::cnn(rows, cols),
            ModelKind::Lstm => Self::lstm(rows, cols, readout),
        }
    }

    /// Any layer stack that type-checks and ends in two logits.
    pub fn custom(kind: ModelKind, input_shape: Vec<usize>, layers: Vec<LayerSpec>) -> Result<Self> {
        let spec = Self { kind, input_shape, layers };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let shapes = self.shapes()?;
        match shapes.last().map(Vec::as_slice) {
            Some([2]) => Ok(()),
            other => Err(NnError::Spec(format!("final output must be [2], got {other:?}"))),
        }
    }

    /// Activation shapes: the input followed by each layer's output.
    pub fn shapes(&self) -> Result<Vec<Vec<usize>>> {
        if self.input_shape.is_empty() || self.input_shape.contains(&0) {
            return Err(NnError::Spec(format!("bad input shape {:?}", self.input_shape)));
        }
        let mut shapes = vec![self.input_shape.clone()];
        for (i, layer) in self.layers.iter().enumerate() {
            let cur = shapes.last().unwrap();
            let err = |what: &str| NnError::Spec(format!("layer {i} ({}): {what}, input {cur:?}", layer.tag()));
            let next = match (*layer, cur.as_slice()) {
                (LayerSpec::Conv3x3 { filters, .. }, &[h, w, _]) if filters > 0 => vec![h, w, filters],
                (LayerSpec::MaxPool2x2, &[h, w, c]) if h >= 2 && w >= 2 => vec![h / 2, w / 2, c],
                (LayerSpec::Flatten, s) => vec![s.iter().product()],
                (LayerSpec::Dense { units, .. }, &[_]) if units > 0 => vec![units],
                (LayerSpec::Lstm { units }, &[t, _]) if units > 0 => vec![t, units],
                (LayerSpec::TimeDense { units, .. }, &[t, _]) if units > 0 => vec![t, units],
                (LayerSpec::LastStep, &[_, d]) => vec![d],
                _ => return Err(err("incompatible input")),
            };
            shapes.push(next);
        }
        Ok(shapes)
    }

    /// Names and shapes of every learnable tensor, in storage order.
    pub fn param_layout(&self) -> Result<Vec<(String, Vec<usize>)>> {
        let shapes = self.shapes()?;
        let mut out = Vec::new();
        for (i, layer) in self.layers.iter().enumerate() {
            let inp = &shapes[i];
            let name = |p: &str| format!("{}{i}.{p}", layer.tag());
            match *layer {
                LayerSpec::Conv3x3 { filters, .. } => {
                    out.push((name("weight"), vec![3, 3, inp[2], filters]));
                    out.push((name("bias"), vec![filters]));
                }
                LayerSpec::Dense { units, .. } | LayerSpec::TimeDense { units, .. } => {
                    out.push((name("weight"), vec![*inp.last().unwrap(), units]));
                    out.push((name("bias"), vec![units]));
                }
                LayerSpec::Lstm { units } => {
                    out.push((name("w_x"), vec![inp[1], 4 * units]));
                    out.push((name("w_h"), vec![units, 4 * units]));
                    out.push((name("bias"), vec![4 * units]));
                }
                LayerSpec::MaxPool2x2 | LayerSpec::Flatten | LayerSpec::LastStep => {}
            }
        }
        Ok(out)
    }
}

/// Ordered named tensors matching a [`ModelSpec`].
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    entries: Vec<(String, Tensor)>,
}

impl ModelParams {
    pub fn new(entries: Vec<(String, Tensor)>) -> Self {
        Self { entries }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.entries.iter().map(|(n, t)| (n.as_str(), t))
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.entries.iter().find(|(n, _)| n == name).map(|(_, t)| t)
    }

    pub fn tensor(&self, i: usize) -> &Tensor {
        &self.entries[i].1
    }

    pub fn tensor_mut(&mut self, i: usize) -> &mut Tensor {
        &mut self.entries[i].1
    }

    /// Total number of scalar parameters.
    pub fn count(&self) -> usize {
        self.entries.iter().map(|(_, t)| t.len()).sum()
    }

    pub fn into_entries(self) -> Vec<(String, Tensor)> {
        self.entries
    }

    fn check(&self, spec: &ModelSpec) -> Result<()> {
        let layout = spec.param_layout()?;
        if layout.len() != self.entries.len() {
            return Err(NnError::Spec(format!("spec needs {} tensors, found {}", layout.len(), self.entries.len())));
        }
        for ((name, shape), (got_name, t)) in layout.iter().zip(&self.entries) {
            if name != got_name || shape.as_slice() != t.shape() {
                return Err(NnError::Spec(format!("expected {name} {shape:?}, found {got_name} {:?}", t.shape())));
            }
        }
        Ok(())
    }
}

/// Summed-then-averaged result of a backward pass over a batch.
#[derive(Debug, Clone)]
pub struct BatchGradients {
    /// Mean cross-entropy.
    pub loss: f64,
    /// Mean gradient per parameter tensor, aligned with [`ModelParams`].
    pub grads: Vec<Tensor>,
    /// Samples whose pre-update argmax matched the label.
    pub correct: usize,
}

enum Saved {
    Conv { input: Tensor, output: Tensor, act: Activation },
    Pool { argmax: Vec<usize>, in_shape: Vec<usize> },
    Reshape { in_shape: Vec<usize> },
    Dense { input: Tensor, output: Tensor, act: Activation },
    Lstm(Box<LstmCache>),
    LastStep { in_shape: Vec<usize> },
}

fn activate(t: &mut Tensor, act: Activation) {
    if act == Activation::Relu {
        ops::relu_in_place(t);
    }
}

fn act_backward(output: &Tensor, grad: Tensor, act: Activation) -> Tensor {
    match act {
        Activation::Relu => ops::relu_backward(output, &grad),
        Activation::Linear => grad,
    }
}

/// A spec together with its parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    spec: ModelSpec,
    params: ModelParams,
    /// Parameter index range owned by each layer.
    slots: Vec<Range<usize>>,
}

impl Network {
    /// Seeded initialization: He-uniform for ReLU layers, Glorot-uniform
    /// for LSTM and linear layers, zero biases except a forget-gate bias of 1.
    pub fn init(spec: ModelSpec, seed: u64) -> Result<Self> {
        let shapes = spec.shapes()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut uniform = |shape: &[usize], limit: f64| {
            let n: usize = shape.iter().product();
            Tensor::new(shape.to_vec(), (0..n).map(|_| rng.random_range(-limit..=limit)).collect())
        };
        let limit = |act: Activation, fan_in: usize, fan_out: usize| match act {
            Activation::Relu => (6.0 / fan_in as f64).sqrt(),
            Activation::Linear => (6.0 / (fan_in + fan_out) as f64).sqrt(),
        };
        let mut tensors = Vec::new();
        for (i, layer) in spec.layers.iter().enumerate() {
            let inp = &shapes[i];
            match *layer {
                LayerSpec::Conv3x3 { filters, activation } => {
                    let c = inp[2];
                    tensors.push(uniform(&[3, 3, c, filters], limit(activation, 9 * c, 9 * filters))?);
                    tensors.push(Tensor::zeros(&[filters]));
                }
                LayerSpec::Dense { units, activation } | LayerSpec::TimeDense { units, activation } => {
                    let d = *inp.last().unwrap();
                    tensors.push(uniform(&[d, units], limit(activation, d, units))?);
                    tensors.push(Tensor::zeros(&[units]));
                }
                LayerSpec::Lstm { units } => {
                    let d = inp[1];
                    tensors.push(uniform(&[d, 4 * units], limit(Activation::Linear, d, 4 * units))?);
                    tensors.push(uniform(&[units, 4 * units], limit(Activation::Linear, units, 4 * units))?);
                    let mut b = Tensor::zeros(&[4 * units]);
                    b.data_mut()[units..2 * units].fill(1.0);
                    tensors.push(b);
                }
                LayerSpec::MaxPool2x2 | LayerSpec::Flatten | LayerSpec::LastStep => {}
            }
        }
        let layout = spec.param_layout()?;
        let entries = layout.into_iter().map(|(n, _)| n).zip(tensors).collect();
        Self::from_parts(spec, ModelParams::new(entries))
    }

    pub fn from_parts(spec: ModelSpec, params: ModelParams) -> Result<Self> {
        spec.validate()?;
        params.check(&spec)?;
        let mut slots = Vec::with_capacity(spec.layers.len());
        let mut next = 0;
        for layer in &spec.layers {
            let n = match layer {
                LayerSpec::Conv3x3 { .. } | LayerSpec::Dense { .. } | LayerSpec::TimeDense { .. } => 2,
                LayerSpec::Lstm { .. } => 3,
                _ => 0,
            };
            slots.push(next..next + n);
            next += n;
        }
        Ok(Self { spec, params, slots })
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ModelParams {
        &mut self.params
    }

    pub fn into_parts(self) -> (ModelSpec, ModelParams) {
        (self.spec, self.params)
    }

    /// Accepts the spec's input shape, or a 2-D matrix when the spec adds
    /// a trailing channel axis of 1.
    fn conform(&self, input: &Tensor) -> Result<Tensor> {
        let want = &self.spec.input_shape;
        let ok = input.shape() == want.as_slice() || (want.len() == 3 && want[2] == 1 && input.shape() == &want[..2]);
        if !ok {
            return Err(NnError::Shape(format!("model expects input {want:?}, got {:?}", input.shape())));
        }
        input.clone().reshape(want)
    }

    fn run(&self, input: &Tensor, mut saved: Option<&mut Vec<Saved>>) -> Result<Vec<f64>> {
        let mut x = self.conform(input)?;
        for (layer, slot) in self.spec.layers.iter().zip(&self.slots) {
            let p = |k: usize| self.params.tensor(slot.start + k);
            x = match *layer {
                LayerSpec::Conv3x3 { activation, .. } => {
                    let mut y = ops::conv2d_forward(&x, p(0), p(1))?;
                    activate(&mut y, activation);
                    if let Some(s) = saved.as_deref_mut() {
                        s.push(Saved::Conv { input: x, output: y.clone(), act: activation });
                    }
                    y
                }
                LayerSpec::MaxPool2x2 => {
                    let (y, argmax) = ops::maxpool2x2_forward(&x)?;
                    if let Some(s) = saved.as_deref_mut() {
                        s.push(Saved::Pool { argmax, in_shape: x.shape().to_vec() });
                    }
                    y
                }
                LayerSpec::Flatten => {
                    if let Some(s) = saved.as_deref_mut() {
                        s.push(Saved::Reshape { in_shape: x.shape().to_vec() });
                    }
                    let n = x.len();
                    x.reshape(&[n])?
                }
                LayerSpec::Dense { activation, .. } | LayerSpec::TimeDense { activation, .. } => {
                    let mut y = ops::dense_forward(&x, p(0), p(1))?;
                    activate(&mut y, activation);
                    if let Some(s) = saved.as_deref_mut() {
                        s.push(Saved::Dense { input: x, output: y.clone(), act: activation });
                    }
                    y
                }
                LayerSpec::Lstm { .. } => {
                    let (y, cache) = ops::lstm_forward(&x, p(0), p(1), p(2))?;
                    if let Some(s) = saved.as_deref_mut() {
                        s.push(Saved::Lstm(Box::new(cache)));
                    }
                    y
                }
                LayerSpec::LastStep => {
                    let (t, d) = (x.shape()[0], x.shape()[1]);
                    if let Some(s) = saved.as_deref_mut() {
                        s.push(Saved::LastStep { in_shape: x.shape().to_vec() });
                    }
                    Tensor::from_vec(x.data()[(t - 1) * d..].to_vec())
                }
            };
        }
        Ok(x.into_data())
    }

    /// Raw two-class scores.
    pub fn logits(&self, input: &Tensor) -> Result<Vec<f64>> {
        self.run(input, None)
    }

    /// Class probabilities (softmax of the logits).
    pub fn forward(&self, input: &Tensor) -> Result<Vec<f64>> {
        Ok(ops::softmax(&self.logits(input)?))
    }

    /// Loss and parameter gradients for one sample (not averaged).
    pub fn sample_gradients(&self, input: &Tensor, label: usize) -> Result<(f64, Vec<Tensor>, bool)> {
        let mut saved = Vec::with_capacity(self.spec.layers.len());
        let logits = self.run(input, Some(&mut saved))?;
        let (loss, dlogits) = ops::softmax_cross_entropy(&logits, label)?;
        let correct = argmax(&logits) == label;
        let mut grads: Vec<Option<Tensor>> = vec![None; self.params.len()];
        let mut g = Tensor::from_vec(dlogits);
        for (slot, s) in self.slots.iter().zip(saved).rev() {
            let p = |k: usize| self.params.tensor(slot.start + k);
            g = match s {
                Saved::Conv { input, output, act } => {
                    let gz = act_backward(&output, g, act);
                    let r = ops::conv2d_backward(&input, p(0), &gz)?;
                    grads[slot.start] = Some(r.filters);
                    grads[slot.start + 1] = Some(r.bias);
                    r.input
                }
                Saved::Pool { argmax, in_shape } => ops::maxpool2x2_backward(&g, &argmax, &in_shape)?,
                Saved::Reshape { in_shape } => g.reshape(&in_shape)?,
                Saved::Dense { input, output, act } => {
                    let gz = act_backward(&output, g, act);
                    let r = ops::dense_backward(&input, p(0), &gz)?;
                    grads[slot.start] = Some(r.weights);
                    grads[slot.start + 1] = Some(r.bias);
                    r.input
                }
                Saved::Lstm(cache) => {
                    let r = ops::lstm_backward(&cache, p(0), p(1), &g)?;
                    grads[slot.start] = Some(r.w_x);
                    grads[slot.start + 1] = Some(r.w_h);
                    grads[slot.start + 2] = Some(r.bias);
                    r.input
                }
                Saved::LastStep { in_shape } => {
                    let mut full = Tensor::zeros(&in_shape);
                    let d = in_shape[1];
                    let n = full.len();
                    full.data_mut()[n - d..].copy_from_slice(g.data());
                    full
                }
            };
        }
        let grads = grads.into_iter().map(|g| g.expect("every parameter receives a gradient")).collect();
        Ok((loss, grads, correct))
    }

    /// Mean cross-entropy and mean gradients over `batch`.
    ///
    /// Samples are processed in fixed chunks of [`CHUNK`]; each chunk is
    /// summed in order and chunk sums are then added in order, so the
    /// result does not depend on `exec`.
    pub fn loss_and_backward(&self, batch: &[(&Tensor, usize)], exec: Execution) -> Result<BatchGradients> {
        if batch.is_empty() {
            return Err(NnError::EmptyDataset);
        }
        let partials = exec::map_chunks(exec, batch, CHUNK, |chunk| -> Result<(f64, Vec<Tensor>, usize)> {
            let mut acc: Option<(f64, Vec<Tensor>, usize)> = None;
            for &(x, label) in chunk {
                let (loss, grads, ok) = self.sample_gradients(x, label)?;
                acc = Some(match acc {
                    None => (loss, grads, ok as usize),
                    Some((l, mut g, c)) => {
                        g.iter_mut().zip(&grads).for_each(|(a, b)| a.add_assign(b));
                        (l + loss, g, c + ok as usize)
                    }
                });
            }
            Ok(acc.expect("chunks are nonempty"))
        });
        let mut total: Option<(f64, Vec<Tensor>, usize)> = None;
        for part in partials {
            let (l, g, c) = part?;
            total = Some(match total {
                None => (l, g, c),
                Some((tl, mut tg, tc)) => {
                    tg.iter_mut().zip(&g).for_each(|(a, b)| a.add_assign(b));
                    (tl + l, tg, tc + c)
                }
            });
        }
        let (loss, mut grads, correct) = total.expect("batch is nonempty");
        let inv = 1.0 / batch.len() as f64;
        grads.iter_mut().for_each(|g| g.scale(inv));
        Ok(BatchGradients { loss: loss * inv, grads, correct })
    }
}

pub(crate) fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cnn_shape_chain() {
        let spec = ModelSpec::cnn(9, 13).unwrap();
        let shapes = spec.shapes().unwrap();
        let expect: Vec<Vec<usize>> = vec![
            vec![9, 13, 1],
            vec![9, 13, 16],
            vec![9, 13, 32],
            vec![9, 13, 64],
            vec![9, 13, 128],
            vec![4, 6, 128],
            vec![3072],
            vec![128],
            vec![64],
            vec![2],
        ];
        assert_eq!(shapes, expect);
    }

    #[test]
    fn lstm_shape_chain() {
        let spec = ModelSpec::lstm(9, 13, LstmReadout::LastStep).unwrap();
        let shapes = spec.shapes().unwrap();
        assert_eq!(shapes[2], vec![9, 128]);
        assert_eq!(shapes[6], vec![9, 8]);
        assert_eq!(shapes[7], vec![8]);
        assert_eq!(shapes.last().unwrap(), &vec![2]);
        let flat = ModelSpec::lstm(9, 13, LstmReadout::Flatten).unwrap();
        assert_eq!(flat.shapes().unwrap()[7], vec![72]);
    }

    #[test]
    fn bad_specs_rejected() {
        assert!(ModelSpec::custom(ModelKind::Cnn, vec![4, 4, 1], vec![LayerSpec::Flatten]).is_err());
        assert!(ModelSpec::custom(
            ModelKind::Lstm,
            vec![4, 3],
            vec![
                LayerSpec::MaxPool2x2,
                LayerSpec::Flatten,
                LayerSpec::Dense { units: 2, activation: Activation::Linear }
            ]
        )
        .is_err());
        assert!(ModelSpec::cnn(1, 13).is_err());
    }

    #[test]
    fn forward_is_a_probability_vector() {
        for spec in [ModelSpec::cnn(9, 13).unwrap(), ModelSpec::lstm(9, 13, LstmReadout::LastStep).unwrap()] {
            let net = Network::init(spec, 7).unwrap();
            let x = Tensor::new(vec![9, 13], (0..117).map(|i| (i as f64 * 0.37).sin()).collect()).unwrap();
            let p = net.forward(&x).unwrap();
            assert_eq!(p.len(), 2);
            assert!((p[0] + p[1] - 1.0).abs() <= 1e-12);
            assert!(p.iter().all(|&v| v > 0.0));
            assert!(net.forward(&Tensor::zeros(&[13, 9])).is_err());
        }
    }

    #[test]
    fn init_is_seeded_and_sets_forget_bias() {
        let spec = ModelSpec::lstm(9, 13, LstmReadout::LastStep).unwrap();
        let a = Network::init(spec.clone(), 3).unwrap();
        let b = Network::init(spec.clone(), 3).unwrap();
        let c = Network::init(spec, 4).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        let bias = a.params().get("lstm0.bias").unwrap();
        assert!(bias.data()[..128].iter().all(|&v| v == 0.0));
        assert!(bias.data()[128..256].iter().all(|&v| v == 1.0));
    }

    #[test]
    fn loss_identities() {
        // zero final layer gives a uniform prediction
        let spec = ModelSpec::custom(
            ModelKind::Cnn,
            vec![3],
            vec![LayerSpec::Dense { units: 2, activation: Activation::Linear }],
        )
        .unwrap();
        let mut net = Network::init(spec, 1).unwrap();
        net.params_mut().tensor_mut(0).data_mut().fill(0.0);
        let x = Tensor::from_vec(vec![1.0, -2.0, 0.5]);
        let r = net.loss_and_backward(&[(&x, 0), (&x, 1)], Execution::Sequential).unwrap();
        assert!((r.loss - 2f64.ln()).abs() < 1e-15);
        // confident correct prediction
        net.params_mut().tensor_mut(1).data_mut().copy_from_slice(&[60.0, -60.0]);
        let r = net.loss_and_backward(&[(&x, 0)], Execution::Sequential).unwrap();
        assert!(r.loss < 1e-40);
        assert!(matches!(net.loss_and_backward(&[(&x, 2)], Execution::Sequential), Err(NnError::Label(2))));
    }

    #[test]
    fn execution_strategies_agree_bitwise() {
        let spec = ModelSpec::custom(
            ModelKind::Cnn,
            vec![4, 5, 1],
            vec![
                LayerSpec::Conv3x3 { filters: 3, activation: Activation::Relu },
                LayerSpec::MaxPool2x2,
                LayerSpec::Flatten,
                LayerSpec::Dense { units: 2, activation: Activation::Linear },
            ],
        )
        .unwrap();
        let net = Network::init(spec, 11).unwrap();
        let xs: Vec<Tensor> = (0..13)
            .map(|k| Tensor::new(vec![4, 5], (0..20).map(|i| ((i * 7 + k * 3) as f64).cos()).collect()).unwrap())
            .collect();
        let batch: Vec<(&Tensor, usize)> = xs.iter().enumerate().map(|(i, x)| (x, i % 2)).collect();
        let a = net.loss_and_backward(&batch, Execution::Parallel).unwrap();
        let b = net.loss_and_backward(&batch, Execution::Sequential).unwrap();
        assert_eq!(a.loss.to_bits(), b.loss.to_bits());
        assert_eq!(a.grads, b.grads);
    }
}
