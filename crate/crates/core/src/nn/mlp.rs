//! Feed-forward 3-class classifier: 8 -> 16 -> 4 -> 2 -> 3 with tanh
//! hidden activations, softmax output, and inverted dropout (rate 0.2)
//! after the first two hidden layers.

use rand::Rng;

use crate::nn::common::{cross_entropy, sample_mask, softmax, tanh_vec, Dense};

pub const MLP_DIMS: [usize; 5] = [8, 16, 4, 2, 3];
pub const DROPOUT_RATE: f64 = 0.2;

#[derive(Debug, Clone, PartialEq)]
pub struct MlpWeights {
    pub layers: Vec<Dense>,
    pub dropout_rate: f64,
}

/// Scaled dropout masks for one forward pass (training mode).
#[derive(Debug, Clone)]
pub struct MlpMasks {
    pub m1: Vec<f64>,
    pub m2: Vec<f64>,
}

struct Trace {
    x: Vec<f64>,
    h1: Vec<f64>,
    h1d: Vec<f64>,
    h2: Vec<f64>,
    h2d: Vec<f64>,
    h3: Vec<f64>,
    probs: Vec<f64>,
}

impl MlpWeights {
    pub fn init<R: Rng + ?Sized>(rng: &mut R) -> Self {
        let layers = MLP_DIMS
            .windows(2)
            .map(|d| Dense::init(d[0], d[1], rng))
            .collect();
        MlpWeights {
            layers,
            dropout_rate: DROPOUT_RATE,
        }
    }

    pub fn sample_masks<R: Rng + ?Sized>(&self, rng: &mut R) -> MlpMasks {
        MlpMasks {
            m1: sample_mask(MLP_DIMS[1], self.dropout_rate, rng),
            m2: sample_mask(MLP_DIMS[2], self.dropout_rate, rng),
        }
    }

    fn run(&self, x: &[f64], masks: Option<&MlpMasks>) -> Trace {
        let ones1;
        let ones2;
        let (m1, m2) = match masks {
            Some(m) => (&m.m1[..], &m.m2[..]),
            None => {
                ones1 = vec![1.0; MLP_DIMS[1]];
                ones2 = vec![1.0; MLP_DIMS[2]];
                (&ones1[..], &ones2[..])
            }
        };
        let mut h1 = vec![0.0; MLP_DIMS[1]];
        self.layers[0].forward(x, &mut h1);
        tanh_vec(&mut h1);
        let h1d: Vec<f64> = h1.iter().zip(m1).map(|(a, m)| a * m).collect();

        let mut h2 = vec![0.0; MLP_DIMS[2]];
        self.layers[1].forward(&h1d, &mut h2);
        tanh_vec(&mut h2);
        let h2d: Vec<f64> = h2.iter().zip(m2).map(|(a, m)| a * m).collect();

        let mut h3 = vec![0.0; MLP_DIMS[3]];
        self.layers[2].forward(&h2d, &mut h3);
        tanh_vec(&mut h3);

        let mut z4 = vec![0.0; MLP_DIMS[4]];
        self.layers[3].forward(&h3, &mut z4);
        let mut probs = vec![0.0; MLP_DIMS[4]];
        softmax(&z4, &mut probs);

        Trace {
            x: x.to_vec(),
            h1,
            h1d,
            h2,
            h2d,
            h3,
            probs,
        }
    }

    /// Class probabilities; `masks: None` is deterministic evaluation mode.
    pub fn forward(&self, x: &[f64], masks: Option<&MlpMasks>) -> Vec<f64> {
        self.run(x, masks).probs
    }

    /// Cross-entropy loss of one sample and the gradient w.r.t. every
    /// parameter, flattened in [`Self::params`] order.
    pub fn loss_grad(&self, x: &[f64], label: usize, masks: Option<&MlpMasks>) -> (f64, Vec<f64>) {
        let trace = self.run(x, masks);
        let loss = cross_entropy(&trace.probs, label);

        let mut grads: Vec<(Vec<f64>, Vec<f64>)> = self
            .layers
            .iter()
            .map(|l| (vec![0.0; l.w.len()], vec![0.0; l.b.len()]))
            .collect();

        // softmax + cross-entropy: dz = p - y
        let mut dz4 = trace.probs.clone();
        dz4[label] -= 1.0;
        let (gw, gb) = &mut grads[3];
        let dh3 = self.layers[3].backward(&trace.h3, &dz4, gw, gb);

        let dz3: Vec<f64> = dh3
            .iter()
            .zip(&trace.h3)
            .map(|(d, h)| d * (1.0 - h * h))
            .collect();
        let (gw, gb) = &mut grads[2];
        let dh2d = self.layers[2].backward(&trace.h2d, &dz3, gw, gb);

        let ones;
        let (m1, m2) = match masks {
            Some(m) => (&m.m1[..], &m.m2[..]),
            None => {
                ones = vec![1.0; MLP_DIMS[1].max(MLP_DIMS[2])];
                (&ones[..MLP_DIMS[1]], &ones[..MLP_DIMS[2]])
            }
        };
        let dz2: Vec<f64> = dh2d
            .iter()
            .zip(m2)
            .zip(&trace.h2)
            .map(|((d, m), h)| d * m * (1.0 - h * h))
            .collect();
        let (gw, gb) = &mut grads[1];
        let dh1d = self.layers[1].backward(&trace.h1d, &dz2, gw, gb);

        let dz1: Vec<f64> = dh1d
            .iter()
            .zip(m1)
            .zip(&trace.h1)
            .map(|((d, m), h)| d * m * (1.0 - h * h))
            .collect();
        let (gw, gb) = &mut grads[0];
        let _ = self.layers[0].backward(&trace.x, &dz1, gw, gb);

        let mut flat = Vec::with_capacity(self.param_count());
        for (gw, gb) in &grads {
            flat.extend_from_slice(gw);
            flat.extend_from_slice(gb);
        }
        (loss, flat)
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(Dense::param_count).sum()
    }

    pub fn params(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.param_count());
        for l in &self.layers {
            v.extend_from_slice(&l.w);
            v.extend_from_slice(&l.b);
        }
        v
    }

    pub fn set_params(&mut self, p: &[f64]) {
        let mut at = 0;
        for l in &mut self.layers {
            let nw = l.w.len();
            l.w.copy_from_slice(&p[at..at + nw]);
            at += nw;
            let nb = l.b.len();
            l.b.copy_from_slice(&p[at..at + nb]);
            at += nb;
        }
        debug_assert_eq!(at, p.len());
    }
}
