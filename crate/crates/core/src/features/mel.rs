use super::{FeatureConfig, FeatureError, Matrix, Result};

pub fn hz_to_mel(f: f64) -> Result<f64> {
    if f < 0.0 {
        return Err(FeatureError::Negative(f));
    }
    Ok(1125.0 * (f / 700.0).ln_1p())
}

pub fn mel_to_hz(m: f64) -> Result<f64> {
    if m < 0.0 {
        return Err(FeatureError::Negative(m));
    }
    Ok(700.0 * (m / 1125.0).exp_m1())
}

/// Triangular Mel filterbank over the one-sided power spectrum.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterBank {
    /// `n_filters × (nfft/2 + 1)` weights in [0, 1].
    pub weights: Matrix,
    /// `n_filters + 2` edge frequencies in Hz, Mel-spaced from 0 to Nyquist.
    pub edge_freqs: Vec<f64>,
    /// The edges snapped to FFT bin indices.
    pub edge_bins: Vec<usize>,
}

impl FilterBank {
    pub fn n_filters(&self) -> usize {
        self.weights.rows()
    }
}

fn bin_of(hz: f64, nfft: usize, sample_rate: u32) -> usize {
    ((nfft + 1) as f64 * hz / sample_rate as f64).floor() as usize
}

pub fn build_filterbank(config: &FeatureConfig) -> Result<FilterBank> {
    let n = config.n_filters;
    if n == 0 {
        return Err(FeatureError::Config("n_filters must be at least 1".into()));
    }
    if config.sample_rate == 0 {
        return Err(FeatureError::Config("sample_rate must be positive".into()));
    }
    let nfft = config.nfft;
    let bins = nfft / 2 + 1;
    let top = hz_to_mel(config.sample_rate as f64 / 2.0)?;
    let edge_freqs = (0..n + 2).map(|i| mel_to_hz(top * i as f64 / (n + 1) as f64)).collect::<Result<Vec<_>>>()?;
    let edge_bins: Vec<usize> = edge_freqs.iter().map(|&f| bin_of(f, nfft, config.sample_rate).min(bins - 1)).collect();
    if edge_bins.windows(2).any(|w| w[1] <= w[0]) {
        let mut min_nfft = nfft.max(2);
        while {
            let trial: Vec<usize> = edge_freqs.iter().map(|&f| bin_of(f, min_nfft, config.sample_rate)).collect();
            trial.windows(2).any(|w| w[1] <= w[0])
        } {
            min_nfft *= 2;
        }
        return Err(FeatureError::FilterbankTooDense { n_filters: n, bins, sample_rate: config.sample_rate, min_nfft });
    }
    let mut weights = Matrix::zeros(n, bins);
    for j in 0..n {
        let (left, center, right) = (edge_bins[j], edge_bins[j + 1], edge_bins[j + 2]);
        let row = weights.row_mut(j);
        for (k, w) in row.iter_mut().enumerate().take(center).skip(left) {
            *w = (k - left) as f64 / (center - left) as f64;
        }
        for (k, w) in row.iter_mut().enumerate().take(right).skip(center) {
            *w = (right - k) as f64 / (right - center) as f64;
        }
    }
    Ok(FilterBank { weights, edge_freqs, edge_bins })
}

/// `E[i][j] = ln(max(Σ_k fb[j][k] · power[i][k], floor))`.
pub fn apply_filterbank(power: &Matrix, fb: &FilterBank, log_floor: f64) -> Result<Matrix> {
    if power.cols() != fb.weights.cols() {
        return Err(FeatureError::Dimension(format!(
            "power spectrum has {} bins, filterbank expects {}",
            power.cols(),
            fb.weights.cols()
        )));
    }
    let n = fb.n_filters();
    let mut out = Matrix::zeros(power.rows(), n);
    for i in 0..power.rows() {
        let p = power.row(i);
        for j in 0..n {
            let e: f64 = fb.weights.row(j).iter().zip(p).map(|(w, x)| w * x).sum();
            out.row_mut(i)[j] = e.max(log_floor).ln();
        }
    }
    Ok(out)
}
