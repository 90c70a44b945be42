//! Shared building blocks for the hand-rolled networks.

use rand::Rng;

/// Fully connected layer, row-major `out_dim x in_dim`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub w: Vec<f64>,
    pub b: Vec<f64>,
    pub in_dim: usize,
    pub out_dim: usize,
}

impl Dense {
    /// Uniform fan-in initialization `U(-1/sqrt(in), 1/sqrt(in))`.
    pub fn init<R: Rng + ?Sized>(in_dim: usize, out_dim: usize, rng: &mut R) -> Self {
        let scale = 1.0 / (in_dim as f64).sqrt();
        let w = (0..in_dim * out_dim)
            .map(|_| scale * (2.0 * rng.random::<f64>() - 1.0))
            .collect();
        Dense {
            w,
            b: vec![0.0; out_dim],
            in_dim,
            out_dim,
        }
    }

    pub fn forward(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.in_dim);
        for o in 0..self.out_dim {
            let mut acc = self.b[o];
            let row = &self.w[o * self.in_dim..(o + 1) * self.in_dim];
            for (wi, xi) in row.iter().zip(x) {
                acc += wi * xi;
            }
            out[o] = acc;
        }
    }

    /// Accumulate gradients for `dz` (gradient at the pre-activation) and
    /// return the gradient w.r.t. the input.
    pub fn backward(&self, x: &[f64], dz: &[f64], gw: &mut [f64], gb: &mut [f64]) -> Vec<f64> {
        let mut dx = vec![0.0; self.in_dim];
        for o in 0..self.out_dim {
            gb[o] += dz[o];
            let row = &self.w[o * self.in_dim..(o + 1) * self.in_dim];
            let grow = &mut gw[o * self.in_dim..(o + 1) * self.in_dim];
            for i in 0..self.in_dim {
                grow[i] += dz[o] * x[i];
                dx[i] += row[i] * dz[o];
            }
        }
        dx
    }

    pub fn param_count(&self) -> usize {
        self.w.len() + self.b.len()
    }
}

/// Numerically safe softmax.
pub fn softmax(z: &[f64], out: &mut [f64]) {
    let max = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for i in 0..z.len() {
        let e = (z[i] - max).exp();
        out[i] = e;
        total += e;
    }
    for o in out.iter_mut() {
        *o /= total;
    }
}

/// Cross-entropy of a one-hot target: `-ln p[label]`. Non-finite
/// probabilities propagate as NaN so training can abort loudly.
pub fn cross_entropy(probs: &[f64], label: usize) -> f64 {
    let p = probs[label];
    if !p.is_finite() {
        return f64::NAN;
    }
    -p.max(1e-300).ln()
}

/// Inverted-dropout mask entries: 0 with probability `rate`, else
/// `1 / (1 - rate)`, leaving the expected activation unchanged.
pub fn sample_mask<R: Rng + ?Sized>(len: usize, rate: f64, rng: &mut R) -> Vec<f64> {
    let keep = 1.0 / (1.0 - rate);
    (0..len)
        .map(|_| if rng.random::<f64>() < rate { 0.0 } else { keep })
        .collect()
}

pub fn tanh_vec(z: &mut [f64]) {
    for v in z.iter_mut() {
        *v = v.tanh();
    }
}
