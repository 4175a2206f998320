use super::{FeatureError, Result};
use std::f64::consts::PI;

/// Orthonormal DCT-II basis truncated to the first `n_out` coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct DctBasis {
    n_in: usize,
    n_out: usize,
    /// `n_out × n_in`, row k = s_k · cos(π k (2n+1) / 2N).
    basis: Vec<f64>,
}

impl DctBasis {
    pub fn new(n_in: usize, n_out: usize) -> Result<Self> {
        if n_in == 0 || n_out == 0 || n_out > n_in {
            return Err(FeatureError::Config(format!("need 0 < n_ceps ({n_out}) <= n_filters ({n_in})")));
        }
        let nf = n_in as f64;
        let mut basis = Vec::with_capacity(n_in * n_out);
        for k in 0..n_out {
            let s = if k == 0 { (1.0 / nf).sqrt() } else { (2.0 / nf).sqrt() };
            for n in 0..n_in {
                basis.push(s * (PI * k as f64 * (2 * n + 1) as f64 / (2.0 * nf)).cos());
            }
        }
        Ok(Self { n_in, n_out, basis })
    }

    pub fn apply_into(&self, input: &[f64], out: &mut [f64]) {
        debug_assert_eq!(input.len(), self.n_in);
        for (k, dst) in out.iter_mut().enumerate().take(self.n_out) {
            let row = &self.basis[k * self.n_in..(k + 1) * self.n_in];
            *dst = row.iter().zip(input).map(|(b, x)| b * x).sum();
        }
    }
}

/// Orthonormal DCT-II of `log_energies`, keeping coefficients `0..n_ceps`.
pub fn dct2_truncated(log_energies: &[f64], n_ceps: usize) -> Result<Vec<f64>> {
    let basis = DctBasis::new(log_energies.len(), n_ceps)?;
    let mut out = vec![0.0; n_ceps];
    basis.apply_into(log_energies, &mut out);
    Ok(out)
}
