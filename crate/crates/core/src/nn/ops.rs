//! Layer kernels: forward passes and their hand-derived backward passes.
//!
//! Layouts: images are `[H, W, C]`, conv filters `[3, 3, C, F]`, dense
//! weights `[in, out]`, sequences `[T, D]`, LSTM weights `[D, 4H]` and
//! `[H, 4H]` with gate blocks ordered input, forget, candidate, output.

use super::gemm::gemm;
use super::{NnError, Result, Tensor};

fn dims3(t: &Tensor, what: &str) -> Result<(usize, usize, usize)> {
    match *t.shape() {
        [a, b, c] => Ok((a, b, c)),
        ref s => Err(NnError::Shape(format!("{what}: expected 3 dims, got {s:?}"))),
    }
}

fn dims2(t: &Tensor, what: &str) -> Result<(usize, usize)> {
    match *t.shape() {
        [a, b] => Ok((a, b)),
        [a] => Ok((1, a)),
        ref s => Err(NnError::Shape(format!("{what}: expected 1 or 2 dims, got {s:?}"))),
    }
}

/// Unfolds 3×3 same-padded neighbourhoods into rows of `9·C` values,
/// ordered `(ky, kx, c)` to match the filter layout.
fn im2col(x: &[f64], h: usize, w: usize, c: usize) -> Vec<f64> {
    let cols = 9 * c;
    let mut out = vec![0.0; h * w * cols];
    for y in 0..h {
        for xx in 0..w {
            let row = &mut out[(y * w + xx) * cols..(y * w + xx + 1) * cols];
            for ky in 0..3 {
                let sy = y as isize + ky as isize - 1;
                if sy < 0 || sy >= h as isize {
                    continue;
                }
                for kx in 0..3 {
                    let sx = xx as isize + kx as isize - 1;
                    if sx < 0 || sx >= w as isize {
                        continue;
                    }
                    let src = (sy as usize * w + sx as usize) * c;
                    let dst = (ky * 3 + kx) * c;
                    row[dst..dst + c].copy_from_slice(&x[src..src + c]);
                }
            }
        }
    }
    out
}

/// Adjoint of [`im2col`]: scatters patch gradients back onto the image.
fn col2im(cols_buf: &[f64], h: usize, w: usize, c: usize) -> Vec<f64> {
    let cols = 9 * c;
    let mut out = vec![0.0; h * w * c];
    for y in 0..h {
        for xx in 0..w {
            let row = &cols_buf[(y * w + xx) * cols..(y * w + xx + 1) * cols];
            for ky in 0..3 {
                let sy = y as isize + ky as isize - 1;
                if sy < 0 || sy >= h as isize {
                    continue;
                }
                for kx in 0..3 {
                    let sx = xx as isize + kx as isize - 1;
                    if sx < 0 || sx >= w as isize {
                        continue;
                    }
                    let dst = (sy as usize * w + sx as usize) * c;
                    let src = (ky * 3 + kx) * c;
                    for (o, g) in out[dst..dst + c].iter_mut().zip(&row[src..src + c]) {
                        *o += g;
                    }
                }
            }
        }
    }
    out
}

fn check_conv(input: &Tensor, filters: &Tensor, bias: &Tensor) -> Result<(usize, usize, usize, usize)> {
    let (h, w, c) = dims3(input, "conv input")?;
    let f = match *filters.shape() {
        [3, 3, fc, f] if fc == c => f,
        [3, 3, fc, _] => return Err(NnError::Shape(format!("conv: input has {c} channels, filters expect {fc}"))),
        ref s => return Err(NnError::Shape(format!("conv: filters must be [3, 3, C, F], got {s:?}"))),
    };
    if bias.shape() != [f] {
        return Err(NnError::Shape(format!("conv: bias {:?} for {f} filters", bias.shape())));
    }
    Ok((h, w, c, f))
}

/// 3×3 convolution, stride 1, one pixel of zero padding. No activation.
pub fn conv2d_forward(input: &Tensor, filters: &Tensor, bias: &Tensor) -> Result<Tensor> {
    let (h, w, c, f) = check_conv(input, filters, bias)?;
    let patches = im2col(input.data(), h, w, c);
    let mut out = Vec::with_capacity(h * w * f);
    for _ in 0..h * w {
        out.extend_from_slice(bias.data());
    }
    gemm(h * w, 9 * c, f, &patches, false, filters.data(), false, &mut out, 1.0);
    Tensor::new(vec![h, w, f], out)
}

#[derive(Debug, Clone)]
pub struct ConvGrads {
    pub input: Tensor,
    pub filters: Tensor,
    pub bias: Tensor,
}

pub fn conv2d_backward(input: &Tensor, filters: &Tensor, grad_out: &Tensor) -> Result<ConvGrads> {
    let (h, w, c) = dims3(input, "conv input")?;
    let f = *filters.shape().last().unwrap_or(&0);
    check_conv(input, filters, &Tensor::zeros(&[f]))?;
    if grad_out.shape() != [h, w, f] {
        return Err(NnError::Shape(format!("conv backward: grad {:?}", grad_out.shape())));
    }
    let patches = im2col(input.data(), h, w, c);
    let mut d_filters = vec![0.0; 9 * c * f];
    gemm(9 * c, h * w, f, &patches, true, grad_out.data(), false, &mut d_filters, 0.0);
    let mut d_bias = vec![0.0; f];
    for row in grad_out.data().chunks(f) {
        for (b, g) in d_bias.iter_mut().zip(row) {
            *b += g;
        }
    }
    let mut d_patches = vec![0.0; h * w * 9 * c];
    gemm(h * w, f, 9 * c, grad_out.data(), false, filters.data(), true, &mut d_patches, 0.0);
    Ok(ConvGrads {
        input: Tensor::new(vec![h, w, c], col2im(&d_patches, h, w, c))?,
        filters: Tensor::new(filters.shape().to_vec(), d_filters)?,
        bias: Tensor::new(vec![f], d_bias)?,
    })
}

/// Non-overlapping 2×2 max pooling; a trailing odd row/column is dropped.
/// Also returns, per output element, the flat input index of the maximum.
pub fn maxpool2x2_forward(input: &Tensor) -> Result<(Tensor, Vec<usize>)> {
    let (h, w, c) = dims3(input, "maxpool input")?;
    if h < 2 || w < 2 {
        return Err(NnError::Shape(format!("maxpool needs at least 2×2, got {h}×{w}")));
    }
    let (oh, ow) = (h / 2, w / 2);
    let x = input.data();
    let mut out = Vec::with_capacity(oh * ow * c);
    let mut argmax = Vec::with_capacity(oh * ow * c);
    for y in 0..oh {
        for xx in 0..ow {
            for ch in 0..c {
                let mut best = usize::MAX;
                for (dy, dx) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
                    let i = ((2 * y + dy) * w + 2 * xx + dx) * c + ch;
                    if best == usize::MAX || x[i] > x[best] {
                        best = i;
                    }
                }
                out.push(x[best]);
                argmax.push(best);
            }
        }
    }
    Ok((Tensor::new(vec![oh, ow, c], out)?, argmax))
}

pub fn maxpool2x2_backward(grad_out: &Tensor, argmax: &[usize], input_shape: &[usize]) -> Result<Tensor> {
    if grad_out.len() != argmax.len() {
        return Err(NnError::Shape("maxpool backward: argmax length".into()));
    }
    let mut d = Tensor::zeros(input_shape);
    let data = d.data_mut();
    for (&i, g) in argmax.iter().zip(grad_out.data()) {
        data[i] += g;
    }
    Ok(d)
}

/// `y = x·W + b` for `x` of shape `[in]` or `[N, in]`.
pub fn dense_forward(x: &Tensor, weights: &Tensor, bias: &Tensor) -> Result<Tensor> {
    let (n, din) = dims2(x, "dense input")?;
    let dout = match *weights.shape() {
        [i, o] if i == din => o,
        ref s => return Err(NnError::Shape(format!("dense: input width {din}, weights {s:?}"))),
    };
    if bias.shape() != [dout] {
        return Err(NnError::Shape(format!("dense: bias {:?} for {dout} units", bias.shape())));
    }
    let mut out = Vec::with_capacity(n * dout);
    for _ in 0..n {
        out.extend_from_slice(bias.data());
    }
    gemm(n, din, dout, x.data(), false, weights.data(), false, &mut out, 1.0);
    let shape = if x.shape().len() == 1 { vec![dout] } else { vec![n, dout] };
    Tensor::new(shape, out)
}

#[derive(Debug, Clone)]
pub struct DenseGrads {
    pub input: Tensor,
    pub weights: Tensor,
    pub bias: Tensor,
}

pub fn dense_backward(x: &Tensor, weights: &Tensor, grad_out: &Tensor) -> Result<DenseGrads> {
    let (n, din) = dims2(x, "dense input")?;
    let dout = weights.shape().get(1).copied().unwrap_or(0);
    if weights.shape() != [din, dout] || grad_out.len() != n * dout {
        return Err(NnError::Shape("dense backward: shape mismatch".into()));
    }
    let mut dw = vec![0.0; din * dout];
    gemm(din, n, dout, x.data(), true, grad_out.data(), false, &mut dw, 0.0);
    let mut db = vec![0.0; dout];
    for row in grad_out.data().chunks(dout) {
        for (b, g) in db.iter_mut().zip(row) {
            *b += g;
        }
    }
    let mut dx = vec![0.0; n * din];
    gemm(n, dout, din, grad_out.data(), false, weights.data(), true, &mut dx, 0.0);
    Ok(DenseGrads {
        input: Tensor::new(x.shape().to_vec(), dx)?,
        weights: Tensor::new(vec![din, dout], dw)?,
        bias: Tensor::new(vec![dout], db)?,
    })
}

pub fn relu(x: &Tensor) -> Tensor {
    let mut y = x.clone();
    relu_in_place(&mut y);
    y
}

pub fn relu_in_place(x: &mut Tensor) {
    // `f64::max` would swallow NaN; keep it so divergence stays visible
    for v in x.data_mut() {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
}

/// Gradient through a ReLU given its output.
pub fn relu_backward(output: &Tensor, grad: &Tensor) -> Tensor {
    let data = output.data().iter().zip(grad.data()).map(|(&y, &g)| if y > 0.0 { g } else { 0.0 }).collect();
    Tensor::new(grad.shape().to_vec(), data).expect("same shape")
}

/// Numerically stable softmax (max subtracted before exponentiating).
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Cross-entropy of softmax(logits) against class `label`, with the
/// gradient with respect to the logits (`p - onehot`).
pub fn softmax_cross_entropy(logits: &[f64], label: usize) -> Result<(f64, Vec<f64>)> {
    if label >= logits.len() {
        return Err(NnError::Label(label));
    }
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let log_sum = logits.iter().map(|z| (z - max).exp()).sum::<f64>().ln() + max;
    let loss = log_sum - logits[label];
    let mut grad = softmax(logits);
    grad[label] -= 1.0;
    Ok((loss, grad))
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Activations saved by [`lstm_forward`] for the backward pass.
#[derive(Debug, Clone)]
pub struct LstmCache {
    input: Tensor,
    units: usize,
    /// `[T, 4H]` post-activation gates (i, f, g, o).
    gates: Vec<f64>,
    /// `[T, H]` cell states.
    cells: Vec<f64>,
    /// `[T, H]` tanh of the cell states.
    cells_tanh: Vec<f64>,
    /// `[T, H]` hidden states.
    hidden: Vec<f64>,
}

fn check_lstm(seq: &Tensor, w_x: &Tensor, w_h: &Tensor, bias: &Tensor) -> Result<(usize, usize, usize)> {
    let (t, d) = dims2(seq, "lstm input")?;
    let hidden = match *w_h.shape() {
        [h, g] if g == 4 * h => h,
        ref s => return Err(NnError::Shape(format!("lstm: recurrent weights {s:?}"))),
    };
    if w_x.shape() != [d, 4 * hidden] {
        return Err(NnError::Shape(format!("lstm: input weights {:?}, expected [{d}, {}]", w_x.shape(), 4 * hidden)));
    }
    if bias.shape() != [4 * hidden] {
        return Err(NnError::Shape(format!("lstm: bias {:?}", bias.shape())));
    }
    Ok((t, d, hidden))
}

/// Runs an LSTM over `seq` (`[T, D]`) from zero initial state and returns
/// all hidden states (`[T, H]`).
pub fn lstm_forward(seq: &Tensor, w_x: &Tensor, w_h: &Tensor, bias: &Tensor) -> Result<(Tensor, LstmCache)> {
    let (t, d, hu) = check_lstm(seq, w_x, w_h, bias)?;
    let g4 = 4 * hu;
    let mut pre = Vec::with_capacity(t * g4);
    for _ in 0..t {
        pre.extend_from_slice(bias.data());
    }
    gemm(t, d, g4, seq.data(), false, w_x.data(), false, &mut pre, 1.0);
    let mut gates = vec![0.0; t * g4];
    let mut cells = vec![0.0; t * hu];
    let mut cells_tanh = vec![0.0; t * hu];
    let mut hidden = vec![0.0; t * hu];
    let mut h_prev = vec![0.0; hu];
    let mut c_prev = vec![0.0; hu];
    for step in 0..t {
        let z = &mut pre[step * g4..(step + 1) * g4];
        gemm(1, hu, g4, &h_prev, false, w_h.data(), false, z, 1.0);
        let gate = &mut gates[step * g4..(step + 1) * g4];
        for j in 0..hu {
            let i = sigmoid(z[j]);
            let f = sigmoid(z[hu + j]);
            let g = z[2 * hu + j].tanh();
            let o = sigmoid(z[3 * hu + j]);
            let c = f * c_prev[j] + i * g;
            let tc = c.tanh();
            gate[j] = i;
            gate[hu + j] = f;
            gate[2 * hu + j] = g;
            gate[3 * hu + j] = o;
            cells[step * hu + j] = c;
            cells_tanh[step * hu + j] = tc;
            hidden[step * hu + j] = o * tc;
        }
        h_prev.copy_from_slice(&hidden[step * hu..(step + 1) * hu]);
        c_prev.copy_from_slice(&cells[step * hu..(step + 1) * hu]);
    }
    let out = Tensor::new(vec![t, hu], hidden.clone())?;
    Ok((out, LstmCache { input: seq.clone(), units: hu, gates, cells, cells_tanh, hidden }))
}

#[derive(Debug, Clone)]
pub struct LstmGrads {
    pub input: Tensor,
    pub w_x: Tensor,
    pub w_h: Tensor,
    pub bias: Tensor,
}

/// Backpropagation through time for [`lstm_forward`].
pub fn lstm_backward(cache: &LstmCache, w_x: &Tensor, w_h: &Tensor, grad_hidden: &Tensor) -> Result<LstmGrads> {
    let hu = cache.units;
    let (t, d) = dims2(&cache.input, "lstm input")?;
    if grad_hidden.shape() != [t, hu] {
        return Err(NnError::Shape(format!("lstm backward: grad {:?}", grad_hidden.shape())));
    }
    let g4 = 4 * hu;
    let mut dz = vec![0.0; t * g4];
    let mut dh_next = vec![0.0; hu];
    let mut dc_next = vec![0.0; hu];
    let dh_in = grad_hidden.data();
    for step in (0..t).rev() {
        let gate = &cache.gates[step * g4..(step + 1) * g4];
        let tc = &cache.cells_tanh[step * hu..(step + 1) * hu];
        let dzs = &mut dz[step * g4..(step + 1) * g4];
        for j in 0..hu {
            let (i, f, g, o) = (gate[j], gate[hu + j], gate[2 * hu + j], gate[3 * hu + j]);
            let c_prev = if step == 0 { 0.0 } else { cache.cells[(step - 1) * hu + j] };
            let dh = dh_in[step * hu + j] + dh_next[j];
            let dc = dh * o * (1.0 - tc[j] * tc[j]) + dc_next[j];
            dzs[j] = dc * g * i * (1.0 - i);
            dzs[hu + j] = dc * c_prev * f * (1.0 - f);
            dzs[2 * hu + j] = dc * i * (1.0 - g * g);
            dzs[3 * hu + j] = dh * tc[j] * o * (1.0 - o);
            dc_next[j] = dc * f;
        }
        gemm(1, g4, hu, dzs, false, w_h.data(), true, &mut dh_next, 0.0);
    }
    let mut d_wx = vec![0.0; d * g4];
    gemm(d, t, g4, cache.input.data(), true, &dz, false, &mut d_wx, 0.0);
    // previous hidden states, row 0 being the zero initial state
    let mut h_prev = vec![0.0; t * hu];
    if t > 1 {
        h_prev[hu..].copy_from_slice(&cache.hidden[..(t - 1) * hu]);
    }
    let mut d_wh = vec![0.0; hu * g4];
    gemm(hu, t, g4, &h_prev, true, &dz, false, &mut d_wh, 0.0);
    let mut d_b = vec![0.0; g4];
    for row in dz.chunks(g4) {
        for (b, g) in d_b.iter_mut().zip(row) {
            *b += g;
        }
    }
    let mut dx = vec![0.0; t * d];
    gemm(t, g4, d, &dz, false, w_x.data(), true, &mut dx, 0.0);
    Ok(LstmGrads {
        input: Tensor::new(cache.input.shape().to_vec(), dx)?,
        w_x: Tensor::new(vec![d, g4], d_wx)?,
        w_h: Tensor::new(vec![hu, g4], d_wh)?,
        bias: Tensor::new(vec![g4], d_b)?,
    })
}
