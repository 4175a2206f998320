//! Central finite-difference gradient checks.

use quake_core::nn::ops;
use quake_core::nn::{Activation, LayerSpec, ModelKind, ModelSpec, Network, Tensor};
use quake_core::Execution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const STEP: f64 = 1e-5;
pub const TOLERANCE: f64 = 1e-4;

/// |a − n| / max(|a|, |n|, 1e-6). The floor keeps gradients that are
/// numerically zero from turning round-off into a huge ratio.
pub fn rel_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6)
}

pub fn random_tensor(shape: &[usize], rng: &mut ChaCha8Rng) -> Tensor {
    let n = shape.iter().product();
    Tensor::new(shape.to_vec(), (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
}

/// Worst relative error of `analytic` against central differences of `f`
/// taken at every coordinate of `x`.
pub fn check(x: &Tensor, analytic: &Tensor, f: impl Fn(&Tensor) -> f64) -> f64 {
    assert_eq!(x.shape(), analytic.shape());
    let mut worst: f64 = 0.0;
    for i in 0..x.len() {
        let mut plus = x.clone();
        plus.data_mut()[i] += STEP;
        let mut minus = x.clone();
        minus.data_mut()[i] -= STEP;
        let numeric = (f(&plus) - f(&minus)) / (2.0 * STEP);
        worst = worst.max(rel_error(analytic.data()[i], numeric));
    }
    worst
}

fn project(y: &Tensor, r: &Tensor) -> f64 {
    y.data().iter().zip(r.data()).map(|(a, b)| a * b).sum()
}

/// Conv kernel: input, filter and bias gradients of Σ r·conv(x).
pub fn conv_instance(seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (h, w, c, f) = (rng.random_range(2..6), rng.random_range(2..6), rng.random_range(1..4), rng.random_range(1..4));
    let x = random_tensor(&[h, w, c], &mut rng);
    let k = random_tensor(&[3, 3, c, f], &mut rng);
    let b = random_tensor(&[f], &mut rng);
    let r = random_tensor(&[h, w, f], &mut rng);
    let g = ops::conv2d_backward(&x, &k, &r).unwrap();
    let e1 = check(&x, &g.input, |x| project(&ops::conv2d_forward(x, &k, &b).unwrap(), &r));
    let e2 = check(&k, &g.filters, |k| project(&ops::conv2d_forward(&x, k, &b).unwrap(), &r));
    let e3 = check(&b, &g.bias, |b| project(&ops::conv2d_forward(&x, &k, b).unwrap(), &r));
    e1.max(e2).max(e3)
}

/// Max pool: input gradient of Σ r·pool(x).
pub fn pool_instance(seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shape = [rng.random_range(2..7), rng.random_range(2..7), rng.random_range(1..4)];
    let x = random_tensor(&shape, &mut rng);
    let (y, argmax) = ops::maxpool2x2_forward(&x).unwrap();
    let r = random_tensor(y.shape(), &mut rng);
    let g = ops::maxpool2x2_backward(&r, &argmax, x.shape()).unwrap();
    check(&x, &g, |x| project(&ops::maxpool2x2_forward(x).unwrap().0, &r))
}

/// Dense: input, weight and bias gradients, batched input.
pub fn dense_instance(seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (n, i, o) = (rng.random_range(1..4), rng.random_range(1..6), rng.random_range(1..6));
    let x = random_tensor(&[n, i], &mut rng);
    let w = random_tensor(&[i, o], &mut rng);
    let b = random_tensor(&[o], &mut rng);
    let r = random_tensor(&[n, o], &mut rng);
    let g = ops::dense_backward(&x, &w, &r).unwrap();
    let e1 = check(&x, &g.input, |x| project(&ops::dense_forward(x, &w, &b).unwrap(), &r));
    let e2 = check(&w, &g.weights, |w| project(&ops::dense_forward(&x, w, &b).unwrap(), &r));
    let e3 = check(&b, &g.bias, |b| project(&ops::dense_forward(&x, &w, b).unwrap(), &r));
    e1.max(e2).max(e3)
}

/// LSTM: input and all weight gradients through time.
pub fn lstm_instance(seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (t, d, h) = (rng.random_range(1..6), rng.random_range(1..4), rng.random_range(1..4));
    let x = random_tensor(&[t, d], &mut rng);
    let wx = random_tensor(&[d, 4 * h], &mut rng);
    let wh = random_tensor(&[h, 4 * h], &mut rng);
    let b = random_tensor(&[4 * h], &mut rng);
    let r = random_tensor(&[t, h], &mut rng);
    let (_, cache) = ops::lstm_forward(&x, &wx, &wh, &b).unwrap();
    let g = ops::lstm_backward(&cache, &wx, &wh, &r).unwrap();
    let run =
        |x: &Tensor, wx: &Tensor, wh: &Tensor, b: &Tensor| project(&ops::lstm_forward(x, wx, wh, b).unwrap().0, &r);
    let e1 = check(&x, &g.input, |x| run(x, &wx, &wh, &b));
    let e2 = check(&wx, &g.w_x, |wx| run(&x, wx, &wh, &b));
    let e3 = check(&wh, &g.w_h, |wh| run(&x, &wx, wh, &b));
    let e4 = check(&b, &g.bias, |b| run(&x, &wx, &wh, b));
    e1.max(e2).max(e3).max(e4)
}

/// Softmax + cross-entropy: gradient with respect to the logits.
pub fn softmax_ce_instance(seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(2..6);
    let z = random_tensor(&[n], &mut rng);
    let mut z = z;
    z.data_mut().iter_mut().for_each(|v| *v *= 5.0);
    let label = rng.random_range(0..n);
    let (_, grad) = ops::softmax_cross_entropy(z.data(), label).unwrap();
    let grad = Tensor::from_vec(grad);
    check(&z, &grad, |z| ops::softmax_cross_entropy(z.data(), label).unwrap().0)
}

/// Miniature model containing every layer type; checks every parameter
/// gradient of the batch-mean loss.
pub fn model_instance(seed: u64, lstm: bool) -> f64 {
    use Activation::*;
    let spec = if lstm {
        ModelSpec::custom(
            ModelKind::Lstm,
            vec![4, 3],
            vec![
                LayerSpec::Lstm { units: 3 },
                LayerSpec::Lstm { units: 2 },
                LayerSpec::TimeDense { units: 3, activation: Relu },
                LayerSpec::LastStep,
                LayerSpec::Dense { units: 2, activation: Linear },
            ],
        )
    } else {
        ModelSpec::custom(
            ModelKind::Cnn,
            vec![4, 5, 1],
            vec![
                LayerSpec::Conv3x3 { filters: 2, activation: Relu },
                LayerSpec::Conv3x3 { filters: 3, activation: Relu },
                LayerSpec::MaxPool2x2,
                LayerSpec::Flatten,
                LayerSpec::Dense { units: 4, activation: Relu },
                LayerSpec::Dense { units: 2, activation: Linear },
            ],
        )
    }
    .unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let net = Network::init(spec.clone(), seed).unwrap();
    let rows_cols = &spec.input_shape[..2];
    let xs: Vec<Tensor> = (0..3).map(|_| random_tensor(rows_cols, &mut rng)).collect();
    let batch: Vec<(&Tensor, usize)> = xs.iter().enumerate().map(|(i, x)| (x, i % 2)).collect();
    let g = net.loss_and_backward(&batch, Execution::Sequential).unwrap();
    let mut worst: f64 = 0.0;
    for (pi, analytic) in g.grads.iter().enumerate() {
        let base = net.params().tensor(pi).clone();
        let e = check(&base, analytic, |p| {
            let mut n = net.clone();
            *n.params_mut().tensor_mut(pi) = p.clone();
            n.loss_and_backward(&batch, Execution::Sequential).unwrap().loss
        });
        worst = worst.max(e);
    }
    worst
}
