//! Gated recurrent unit with explicit forward and backward passes.
//!
//! Update equations (`h_{-1} = 0`, `*` is elementwise):
//!
//! ```text
//! r_t = sigmoid(W_r x_t + U_r h_{t-1} + b_r)
//! z_t = sigmoid(W_z x_t + U_z h_{t-1} + b_z)
//! n_t = tanh(W_n x_t + U_n (r_t * h_{t-1}) + b_n)
//! h_t = (1 - z_t) * n_t + z_t * h_{t-1}
//! ```
//!
//! `W`, `U` and `b` stack the reset, update and candidate blocks in that
//! order, so `W` is `3H x I`, `U` is `3H x H` and `b` has `3H` entries.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::linalg::{gemv_acc, gemv_t_acc, ger_acc, Matrix};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GruCell {
    pub input_size: usize,
    pub hidden_size: usize,
    pub w: Vec<f64>,
    pub u: Vec<f64>,
    pub b: Vec<f64>,
}

/// Per-step activations kept for the backward pass, indexed by frame.
#[derive(Debug, Clone)]
pub struct GruTrace {
    /// `frames x H` outputs in frame order.
    pub hidden: Matrix,
    r: Matrix,
    z: Matrix,
    n: Matrix,
    reverse: bool,
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl GruCell {
    pub fn zeros(input_size: usize, hidden_size: usize) -> Self {
        let g = 3 * hidden_size;
        Self {
            input_size,
            hidden_size,
            w: vec![0.0; g * input_size],
            u: vec![0.0; g * hidden_size],
            b: vec![0.0; g],
        }
    }

    /// Weights uniform in `±1/sqrt(H)`, biases zero.
    pub fn init<R: Rng>(input_size: usize, hidden_size: usize, rng: &mut R) -> Self {
        let mut cell = Self::zeros(input_size, hidden_size);
        let k = 1.0 / (hidden_size as f64).sqrt();
        for v in cell.w.iter_mut().chain(cell.u.iter_mut()) {
            *v = rng.random_range(-k..k);
        }
        cell
    }

    pub(crate) fn tensors(&self) -> [&[f64]; 3] {
        [&self.w, &self.u, &self.b]
    }

    pub(crate) fn tensors_mut(&mut self) -> [&mut [f64]; 3] {
        [&mut self.w, &mut self.u, &mut self.b]
    }

    /// Runs the cell over `inputs` (`frames x I`), back to front when
    /// `reverse` is set. Outputs are always stored in frame order.
    pub fn forward(&self, inputs: &Matrix, reverse: bool) -> GruTrace {
        let h = self.hidden_size;
        let frames = inputs.rows();
        let mut trace = GruTrace {
            hidden: Matrix::zeros(frames, h),
            r: Matrix::zeros(frames, h),
            z: Matrix::zeros(frames, h),
            n: Matrix::zeros(frames, h),
            reverse,
        };
        let mut h_prev = vec![0.0; h];
        let mut pre = vec![0.0; 3 * h];
        let mut rec = vec![0.0; 2 * h];
        let mut cand = vec![0.0; h];
        let mut rh = vec![0.0; h];
        for t in order(frames, reverse) {
            pre.copy_from_slice(&self.b);
            gemv_acc(&self.w, self.input_size, inputs.row(t), &mut pre);
            rec.fill(0.0);
            gemv_acc(&self.u[..2 * h * h], h, &h_prev, &mut rec);
            for i in 0..h {
                let r = sigmoid(pre[i] + rec[i]);
                let z = sigmoid(pre[h + i] + rec[h + i]);
                trace.r.row_mut(t)[i] = r;
                trace.z.row_mut(t)[i] = z;
                rh[i] = r * h_prev[i];
            }
            cand.copy_from_slice(&pre[2 * h..]);
            gemv_acc(&self.u[2 * h * h..], h, &rh, &mut cand);
            for i in 0..h {
                let n = cand[i].tanh();
                let z = trace.z.get(t, i);
                trace.n.row_mut(t)[i] = n;
                let out = (1.0 - z) * n + z * h_prev[i];
                trace.hidden.row_mut(t)[i] = out;
            }
            h_prev.copy_from_slice(trace.hidden.row(t));
        }
        trace
    }

    /// Accumulates parameter gradients into `grads` and input gradients into
    /// `dx` given `dh`, the loss gradient with respect to each output frame.
    pub fn backward(
        &self,
        inputs: &Matrix,
        trace: &GruTrace,
        dh: &Matrix,
        grads: &mut GruCell,
        dx: &mut Matrix,
    ) {
        let h = self.hidden_size;
        let frames = inputs.rows();
        let mut carry = vec![0.0; h];
        let mut da = vec![0.0; 3 * h];
        let mut d_rh = vec![0.0; h];
        let mut rh = vec![0.0; h];
        let zero = vec![0.0; h];
        let mut dh_prev = vec![0.0; h];
        let steps: Vec<usize> = order(frames, trace.reverse).collect();
        for (pos, &t) in steps.iter().enumerate().rev() {
            let h_prev: &[f64] = if pos == 0 { &zero } else { trace.hidden.row(steps[pos - 1]) };
            let (r, z, n) = (trace.r.row(t), trace.z.row(t), trace.n.row(t));

            for i in 0..h {
                let g = dh.get(t, i) + carry[i];
                let dn = g * (1.0 - z[i]);
                let dz = g * (h_prev[i] - n[i]);
                dh_prev[i] = g * z[i];
                da[h + i] = dz * z[i] * (1.0 - z[i]);
                da[2 * h + i] = dn * (1.0 - n[i] * n[i]);
                rh[i] = r[i] * h_prev[i];
            }
            d_rh.fill(0.0);
            gemv_t_acc(&self.u[2 * h * h..], h, &da[2 * h..], &mut d_rh);
            for i in 0..h {
                let dr = d_rh[i] * h_prev[i];
                dh_prev[i] += d_rh[i] * r[i];
                da[i] = dr * r[i] * (1.0 - r[i]);
            }

            ger_acc(&mut grads.w, &da, inputs.row(t));
            for (gb, d) in grads.b.iter_mut().zip(&da) {
                *gb += d;
            }
            ger_acc(&mut grads.u[..2 * h * h], &da[..2 * h], h_prev);
            ger_acc(&mut grads.u[2 * h * h..], &da[2 * h..], &rh);
            gemv_t_acc(&self.u[..2 * h * h], h, &da[..2 * h], &mut dh_prev);
            gemv_t_acc(&self.w, self.input_size, &da, dx.row_mut(t));
            std::mem::swap(&mut carry, &mut dh_prev);
        }
    }
}

fn order(frames: usize, reverse: bool) -> Box<dyn Iterator<Item = usize>> {
    if reverse {
        Box::new((0..frames).rev())
    } else {
        Box::new(0..frames)
    }
}
