//! Two stacked recurrent cells (16 then 4 units) over 24-step feature
//! blocks, followed by the same dense 2 -> softmax 3 head as the
//! feed-forward network. Hyperbolic tangent activations; inverted dropout
//! after each recurrent layer's output.

use rand::Rng;

use crate::nn::common::{cross_entropy, sample_mask, softmax, Dense};
use crate::nn::features::{BASE_FEATURES, SEQ_LEN};

pub const HIDDEN1: usize = 16;
pub const HIDDEN2: usize = 4;
pub const DROPOUT_RATE: f64 = 0.2;

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// One recurrent cell. Gate rows are ordered input, forget, candidate,
/// output in the stacked `4*hidden x *` matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmCell {
    pub w_ih: Vec<f64>,
    pub w_hh: Vec<f64>,
    pub bias: Vec<f64>,
    pub input_dim: usize,
    pub hidden: usize,
}

/// Per-step state recorded during the forward pass.
#[derive(Debug, Clone)]
struct StepState {
    i: Vec<f64>,
    f: Vec<f64>,
    g: Vec<f64>,
    o: Vec<f64>,
    c: Vec<f64>,
    tanh_c: Vec<f64>,
    h: Vec<f64>,
}

impl LstmCell {
    fn init<R: Rng + ?Sized>(input_dim: usize, hidden: usize, rng: &mut R) -> Self {
        let s_ih = 1.0 / (input_dim as f64).sqrt();
        let s_hh = 1.0 / (hidden as f64).sqrt();
        let w_ih = (0..4 * hidden * input_dim)
            .map(|_| s_ih * (2.0 * rng.random::<f64>() - 1.0))
            .collect();
        let w_hh = (0..4 * hidden * hidden)
            .map(|_| s_hh * (2.0 * rng.random::<f64>() - 1.0))
            .collect();
        // forget-gate bias starts at 1 so early training does not flush
        // the cell state
        let mut bias = vec![0.0; 4 * hidden];
        for b in bias.iter_mut().take(2 * hidden).skip(hidden) {
            *b = 1.0;
        }
        LstmCell {
            w_ih,
            w_hh,
            bias,
            input_dim,
            hidden,
        }
    }

    fn step(&self, x: &[f64], h_prev: &[f64], c_prev: &[f64]) -> StepState {
        let hn = self.hidden;
        let mut pre = self.bias.clone();
        for r in 0..4 * hn {
            let mut acc = 0.0;
            let row = &self.w_ih[r * self.input_dim..(r + 1) * self.input_dim];
            for (w, xv) in row.iter().zip(x) {
                acc += w * xv;
            }
            let row = &self.w_hh[r * hn..(r + 1) * hn];
            for (w, hv) in row.iter().zip(h_prev) {
                acc += w * hv;
            }
            pre[r] += acc;
        }
        let mut st = StepState {
            i: vec![0.0; hn],
            f: vec![0.0; hn],
            g: vec![0.0; hn],
            o: vec![0.0; hn],
            c: vec![0.0; hn],
            tanh_c: vec![0.0; hn],
            h: vec![0.0; hn],
        };
        for k in 0..hn {
            st.i[k] = sigmoid(pre[k]);
            st.f[k] = sigmoid(pre[hn + k]);
            st.g[k] = pre[2 * hn + k].tanh();
            st.o[k] = sigmoid(pre[3 * hn + k]);
            st.c[k] = st.f[k] * c_prev[k] + st.i[k] * st.g[k];
            st.tanh_c[k] = st.c[k].tanh();
            st.h[k] = st.o[k] * st.tanh_c[k];
        }
        st
    }

    fn param_count(&self) -> usize {
        self.w_ih.len() + self.w_hh.len() + self.bias.len()
    }
}

/// Gradient accumulator matching a cell's parameters.
struct CellGrad {
    w_ih: Vec<f64>,
    w_hh: Vec<f64>,
    bias: Vec<f64>,
}

impl CellGrad {
    fn zeros(cell: &LstmCell) -> Self {
        CellGrad {
            w_ih: vec![0.0; cell.w_ih.len()],
            w_hh: vec![0.0; cell.w_hh.len()],
            bias: vec![0.0; cell.bias.len()],
        }
    }
}

/// Backpropagate through a full sequence of one cell. `dh_ext[t]` is the
/// external gradient arriving at `h_t`; returns gradients on the inputs.
fn backward_seq(
    cell: &LstmCell,
    inputs: &[Vec<f64>],
    states: &[StepState],
    dh_ext: &[Vec<f64>],
    grad: &mut CellGrad,
) -> Vec<Vec<f64>> {
    let hn = cell.hidden;
    let steps = states.len();
    let mut dx = vec![vec![0.0; cell.input_dim]; steps];
    let mut dh_next = vec![0.0; hn];
    let mut dc_next = vec![0.0; hn];

    for t in (0..steps).rev() {
        let st = &states[t];
        let c_prev: &[f64] = if t == 0 { &[] } else { &states[t - 1].c };
        let h_prev: &[f64] = if t == 0 { &[] } else { &states[t - 1].h };

        let mut dpre = vec![0.0; 4 * hn];
        for k in 0..hn {
            let dh = dh_ext[t][k] + dh_next[k];
            let do_ = dh * st.tanh_c[k];
            let mut dc = dh * st.o[k] * (1.0 - st.tanh_c[k] * st.tanh_c[k]) + dc_next[k];
            let cp = if t == 0 { 0.0 } else { c_prev[k] };
            let df = dc * cp;
            let di = dc * st.g[k];
            let dg = dc * st.i[k];
            dc *= st.f[k];
            dc_next[k] = dc;

            dpre[k] = di * st.i[k] * (1.0 - st.i[k]);
            dpre[hn + k] = df * st.f[k] * (1.0 - st.f[k]);
            dpre[2 * hn + k] = dg * (1.0 - st.g[k] * st.g[k]);
            dpre[3 * hn + k] = do_ * st.o[k] * (1.0 - st.o[k]);
        }

        let x = &inputs[t];
        for r in 0..4 * hn {
            let d = dpre[r];
            grad.bias[r] += d;
            let grow = &mut grad.w_ih[r * cell.input_dim..(r + 1) * cell.input_dim];
            for (gi, xv) in grow.iter_mut().zip(x) {
                *gi += d * xv;
            }
            let wrow = &cell.w_ih[r * cell.input_dim..(r + 1) * cell.input_dim];
            for (dxi, w) in dx[t].iter_mut().zip(wrow) {
                *dxi += d * w;
            }
        }
        let mut dh_prev = vec![0.0; hn];
        if t > 0 {
            for r in 0..4 * hn {
                let d = dpre[r];
                let grow = &mut grad.w_hh[r * hn..(r + 1) * hn];
                for (gi, hv) in grow.iter_mut().zip(h_prev) {
                    *gi += d * hv;
                }
                let wrow = &cell.w_hh[r * hn..(r + 1) * hn];
                for (dhp, w) in dh_prev.iter_mut().zip(wrow) {
                    *dhp += d * w;
                }
            }
        }
        dh_next = dh_prev;
    }
    dx
}

#[derive(Debug, Clone, PartialEq)]
pub struct LstmWeights {
    pub cell1: LstmCell,
    pub cell2: LstmCell,
    pub dense1: Dense,
    pub dense2: Dense,
    pub dropout_rate: f64,
}

/// Scaled dropout masks: per-step masks after the first recurrent layer,
/// one mask for the second layer's final output.
#[derive(Debug, Clone)]
pub struct LstmMasks {
    pub m1: Vec<Vec<f64>>,
    pub m2: Vec<f64>,
}

struct Trace {
    inputs1: Vec<Vec<f64>>,
    states1: Vec<StepState>,
    inputs2: Vec<Vec<f64>>,
    states2: Vec<StepState>,
    h2d: Vec<f64>,
    h3: Vec<f64>,
    probs: Vec<f64>,
}

impl LstmWeights {
    pub fn init<R: Rng + ?Sized>(rng: &mut R) -> Self {
        LstmWeights {
            cell1: LstmCell::init(BASE_FEATURES, HIDDEN1, rng),
            cell2: LstmCell::init(HIDDEN1, HIDDEN2, rng),
            dense1: Dense::init(HIDDEN2, 2, rng),
            dense2: Dense::init(2, 3, rng),
            dropout_rate: DROPOUT_RATE,
        }
    }

    pub fn sample_masks<R: Rng + ?Sized>(&self, rng: &mut R) -> LstmMasks {
        LstmMasks {
            m1: (0..SEQ_LEN)
                .map(|_| sample_mask(HIDDEN1, self.dropout_rate, rng))
                .collect(),
            m2: sample_mask(HIDDEN2, self.dropout_rate, rng),
        }
    }

    fn run(&self, block: &[f64], masks: Option<&LstmMasks>) -> Trace {
        debug_assert_eq!(block.len(), SEQ_LEN * BASE_FEATURES);
        let inputs1: Vec<Vec<f64>> = (0..SEQ_LEN)
            .map(|s| block[s * BASE_FEATURES..(s + 1) * BASE_FEATURES].to_vec())
            .collect();

        let mut states1 = Vec::with_capacity(SEQ_LEN);
        let mut h = vec![0.0; HIDDEN1];
        let mut c = vec![0.0; HIDDEN1];
        for x in &inputs1 {
            let st = self.cell1.step(x, &h, &c);
            h = st.h.clone();
            c = st.c.clone();
            states1.push(st);
        }

        let inputs2: Vec<Vec<f64>> = states1
            .iter()
            .enumerate()
            .map(|(t, st)| match masks {
                Some(m) => st.h.iter().zip(&m.m1[t]).map(|(a, b)| a * b).collect(),
                None => st.h.clone(),
            })
            .collect();

        let mut states2 = Vec::with_capacity(SEQ_LEN);
        let mut h = vec![0.0; HIDDEN2];
        let mut c = vec![0.0; HIDDEN2];
        for x in &inputs2 {
            let st = self.cell2.step(x, &h, &c);
            h = st.h.clone();
            c = st.c.clone();
            states2.push(st);
        }

        let h2 = &states2[SEQ_LEN - 1].h;
        let h2d: Vec<f64> = match masks {
            Some(m) => h2.iter().zip(&m.m2).map(|(a, b)| a * b).collect(),
            None => h2.clone(),
        };

        let mut z3 = vec![0.0; 2];
        self.dense1.forward(&h2d, &mut z3);
        let h3: Vec<f64> = z3.iter().map(|v| v.tanh()).collect();
        let mut z4 = vec![0.0; 3];
        self.dense2.forward(&h3, &mut z4);
        let mut probs = vec![0.0; 3];
        softmax(&z4, &mut probs);

        Trace {
            inputs1,
            states1,
            inputs2,
            states2,
            h2d,
            h3,
            probs,
        }
    }

    pub fn forward(&self, block: &[f64], masks: Option<&LstmMasks>) -> Vec<f64> {
        self.run(block, masks).probs
    }

    /// Cross-entropy loss of one sequence and the flat parameter gradient,
    /// backpropagated through both recurrent layers.
    pub fn loss_grad(
        &self,
        block: &[f64],
        label: usize,
        masks: Option<&LstmMasks>,
    ) -> (f64, Vec<f64>) {
        let trace = self.run(block, masks);
        let loss = cross_entropy(&trace.probs, label);

        let mut g1 = CellGrad::zeros(&self.cell1);
        let mut g2 = CellGrad::zeros(&self.cell2);
        let mut gd1 = (vec![0.0; self.dense1.w.len()], vec![0.0; self.dense1.b.len()]);
        let mut gd2 = (vec![0.0; self.dense2.w.len()], vec![0.0; self.dense2.b.len()]);

        let mut dz4 = trace.probs.clone();
        dz4[label] -= 1.0;
        let dh3 = self.dense2.backward(&trace.h3, &dz4, &mut gd2.0, &mut gd2.1);
        let dz3: Vec<f64> = dh3
            .iter()
            .zip(&trace.h3)
            .map(|(d, h)| d * (1.0 - h * h))
            .collect();
        let dh2d = self.dense1.backward(&trace.h2d, &dz3, &mut gd1.0, &mut gd1.1);

        // external gradient hits only the final step of layer 2
        let mut dh2_ext = vec![vec![0.0; HIDDEN2]; SEQ_LEN];
        for k in 0..HIDDEN2 {
            let m = masks.map_or(1.0, |m| m.m2[k]);
            dh2_ext[SEQ_LEN - 1][k] = dh2d[k] * m;
        }
        let dx2 = backward_seq(&self.cell2, &trace.inputs2, &trace.states2, &dh2_ext, &mut g2);

        // gradient on layer-1 outputs, through the per-step dropout masks
        let dh1_ext: Vec<Vec<f64>> = dx2
            .iter()
            .enumerate()
            .map(|(t, d)| {
                (0..HIDDEN1)
                    .map(|k| d[k] * masks.map_or(1.0, |m| m.m1[t][k]))
                    .collect()
            })
            .collect();
        let _ = backward_seq(&self.cell1, &trace.inputs1, &trace.states1, &dh1_ext, &mut g1);

        let mut flat = Vec::with_capacity(self.param_count());
        flat.extend_from_slice(&g1.w_ih);
        flat.extend_from_slice(&g1.w_hh);
        flat.extend_from_slice(&g1.bias);
        flat.extend_from_slice(&g2.w_ih);
        flat.extend_from_slice(&g2.w_hh);
        flat.extend_from_slice(&g2.bias);
        flat.extend_from_slice(&gd1.0);
        flat.extend_from_slice(&gd1.1);
        flat.extend_from_slice(&gd2.0);
        flat.extend_from_slice(&gd2.1);
        (loss, flat)
    }

    pub fn param_count(&self) -> usize {
        self.cell1.param_count()
            + self.cell2.param_count()
            + self.dense1.param_count()
            + self.dense2.param_count()
    }

    pub fn params(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.param_count());
        v.extend_from_slice(&self.cell1.w_ih);
        v.extend_from_slice(&self.cell1.w_hh);
        v.extend_from_slice(&self.cell1.bias);
        v.extend_from_slice(&self.cell2.w_ih);
        v.extend_from_slice(&self.cell2.w_hh);
        v.extend_from_slice(&self.cell2.bias);
        v.extend_from_slice(&self.dense1.w);
        v.extend_from_slice(&self.dense1.b);
        v.extend_from_slice(&self.dense2.w);
        v.extend_from_slice(&self.dense2.b);
        v
    }

    pub fn set_params(&mut self, p: &[f64]) {
        let mut at = 0;
        let take = |buf: &mut Vec<f64>, at: &mut usize| {
            let n = buf.len();
            buf.copy_from_slice(&p[*at..*at + n]);
            *at += n;
        };
        take(&mut self.cell1.w_ih, &mut at);
        take(&mut self.cell1.w_hh, &mut at);
        take(&mut self.cell1.bias, &mut at);
        take(&mut self.cell2.w_ih, &mut at);
        take(&mut self.cell2.w_hh, &mut at);
        take(&mut self.cell2.bias, &mut at);
        take(&mut self.dense1.w, &mut at);
        take(&mut self.dense1.b, &mut at);
        take(&mut self.dense2.w, &mut at);
        take(&mut self.dense2.b, &mut at);
        debug_assert_eq!(at, p.len());
    }
}
