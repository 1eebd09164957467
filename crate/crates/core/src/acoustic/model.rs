//! Stacked bidirectional GRU encoder with one softmax head per language.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::ctc::{ctc_loss, FrameLogProbs};
use super::gru::{GruCell, GruTrace};
use crate::embedding::{bias_features, embedding_gradient};
use crate::error::{Error, Result};
use crate::linalg::{gemv_acc, gemv_t_acc, ger_acc, Matrix};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub layers: usize,
    /// Hidden units per direction.
    pub hidden_size: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            layers: 1,
            hidden_size: 32,
        }
    }
}

impl ModelConfig {
    /// Six bidirectional layers of 320 units per direction.
    pub fn large() -> Self {
        Self {
            layers: 6,
            hidden_size: 320,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiGruLayer {
    pub forward: GruCell,
    pub backward: GruCell,
}

/// Affine map from encoder output to `alphabet + 1` logits (class 0 = blank).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Head {
    pub input_size: usize,
    pub classes: usize,
    pub w: Vec<f64>,
    pub b: Vec<f64>,
}

impl Head {
    pub fn zeros(input_size: usize, classes: usize) -> Self {
        Self {
            input_size,
            classes,
            w: vec![0.0; input_size * classes],
            b: vec![0.0; classes],
        }
    }
}

/// Encoder weights plus per-language output heads.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncoderParams {
    pub input_size: usize,
    pub hidden_size: usize,
    pub layers: Vec<BiGruLayer>,
    pub heads: BTreeMap<String, Head>,
}

/// Activations of one encoder pass.
pub struct EncoderTrace {
    /// Input to each layer; `inputs[0]` is the biased feature matrix.
    inputs: Vec<Matrix>,
    traces: Vec<(GruTrace, GruTrace)>,
    pub hidden: Matrix,
}

/// Loss and gradients of one utterance.
#[derive(Debug, Clone)]
pub struct UtteranceGrad {
    pub loss: f64,
    pub params: EncoderParams,
    /// Gradient with respect to the corpus embedding row.
    pub embedding: Vec<f64>,
}

impl EncoderParams {
    pub fn zeros(config: &ModelConfig, input_size: usize, languages: &BTreeMap<String, usize>) -> Self {
        let h = config.hidden_size;
        let layers = (0..config.layers)
            .map(|l| {
                let i = if l == 0 { input_size } else { 2 * h };
                BiGruLayer {
                    forward: GruCell::zeros(i, h),
                    backward: GruCell::zeros(i, h),
                }
            })
            .collect();
        let heads = languages
            .iter()
            .map(|(id, &alphabet)| (id.clone(), Head::zeros(2 * h, alphabet + 1)))
            .collect();
        Self {
            input_size,
            hidden_size: h,
            layers,
            heads,
        }
    }

    /// Recurrent weights uniform in `±1/sqrt(H)`, head weights uniform in
    /// `±1/sqrt(2H)`, all biases zero. Deterministic in `seed`.
    pub fn init(
        config: &ModelConfig,
        input_size: usize,
        languages: &BTreeMap<String, usize>,
        seed: u64,
    ) -> Result<Self> {
        if config.layers == 0 || config.hidden_size == 0 || input_size == 0 {
            return Err(Error::validation("model", "layers, hidden_size and input size must be positive"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut p = Self::zeros(config, input_size, languages);
        let h = config.hidden_size;
        for layer in &mut p.layers {
            let i = layer.forward.input_size;
            layer.forward = GruCell::init(i, h, &mut rng);
            layer.backward = GruCell::init(i, h, &mut rng);
        }
        let k = 1.0 / ((2 * h) as f64).sqrt();
        for head in p.heads.values_mut() {
            for v in &mut head.w {
                *v = rng.random_range(-k..k);
            }
        }
        Ok(p)
    }

    pub fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        for t in z.tensors_mut() {
            t.fill(0.0);
        }
        z
    }

    /// Every parameter buffer in a fixed order.
    pub fn tensors(&self) -> Vec<&[f64]> {
        let mut out = Vec::new();
        for layer in &self.layers {
            out.extend(layer.forward.tensors());
            out.extend(layer.backward.tensors());
        }
        for head in self.heads.values() {
            out.push(&head.w[..]);
            out.push(&head.b[..]);
        }
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out = Vec::new();
        for layer in &mut self.layers {
            out.extend(layer.forward.tensors_mut());
            out.extend(layer.backward.tensors_mut());
        }
        for head in self.heads.values_mut() {
            out.push(&mut head.w[..]);
            out.push(&mut head.b[..]);
        }
        out
    }

    pub fn num_params(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    pub fn add_assign(&mut self, other: &Self) {
        for (a, b) in self.tensors_mut().into_iter().zip(other.tensors()) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for t in self.tensors_mut() {
            t.iter_mut().for_each(|v| *v *= factor);
        }
    }

    pub fn sq_norm(&self) -> f64 {
        self.tensors().iter().flat_map(|t| t.iter()).map(|v| v * v).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.iter().all(|v| v.is_finite()))
    }

    pub fn head(&self, language_id: &str) -> Result<&Head> {
        self.heads.get(language_id).ok_or_else(|| Error::Unknown {
            kind: "language head",
            id: language_id.to_string(),
        })
    }

    /// Bidirectional pass; each output frame is `[forward ; backward]`.
    pub fn encode(&self, x_biased: &Matrix) -> Result<EncoderTrace> {
        if x_biased.cols() != self.input_size {
            return Err(Error::DimensionMismatch {
                context: "encoder input",
                expected: self.input_size,
                actual: x_biased.cols(),
            });
        }
        let h = self.hidden_size;
        let frames = x_biased.rows();
        let mut inputs = vec![x_biased.clone()];
        let mut traces = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            let input = inputs.last().expect("nonempty");
            let f = layer.forward.forward(input, false);
            let b = layer.backward.forward(input, true);
            let mut out = Matrix::zeros(frames, 2 * h);
            for t in 0..frames {
                let row = out.row_mut(t);
                row[..h].copy_from_slice(f.hidden.row(t));
                row[h..].copy_from_slice(b.hidden.row(t));
            }
            traces.push((f, b));
            inputs.push(out);
        }
        let hidden = inputs.pop().expect("at least the input");
        Ok(EncoderTrace {
            inputs,
            traces,
            hidden,
        })
    }

    /// Logits through the language head followed by log-softmax.
    pub fn head_log_probs(&self, hidden: &Matrix, language_id: &str) -> Result<FrameLogProbs> {
        let head = self.head(language_id)?;
        if hidden.cols() != head.input_size {
            return Err(Error::DimensionMismatch {
                context: "head input",
                expected: head.input_size,
                actual: hidden.cols(),
            });
        }
        let mut logits = Matrix::zeros(hidden.rows(), head.classes);
        for t in 0..hidden.rows() {
            let row = logits.row_mut(t);
            row.copy_from_slice(&head.b);
            gemv_acc(&head.w, head.input_size, hidden.row(t), row);
        }
        Ok(FrameLogProbs::from_logits(logits))
    }

    /// Full forward pass of one utterance: bias, encode, head.
    pub fn log_probs(&self, features: &Matrix, embedding: &[f64], language_id: &str) -> Result<FrameLogProbs> {
        let x = bias_features(features, embedding)?;
        let trace = self.encode(&x)?;
        self.head_log_probs(&trace.hidden, language_id)
    }

    /// CTC loss of one utterance and gradients with respect to every encoder
    /// and head parameter and the corpus embedding row.
    pub fn loss_and_grad(
        &self,
        features: &Matrix,
        embedding: &[f64],
        phones: &[usize],
        language_id: &str,
    ) -> Result<UtteranceGrad> {
        let x = bias_features(features, embedding)?;
        let trace = self.encode(&x)?;
        let lp = self.head_log_probs(&trace.hidden, language_id)?;
        let (loss, dlogits) = ctc_loss(&lp, phones)?;

        let mut grads = self.zeros_like();
        let head = self.head(language_id)?;
        let ghead = grads.heads.get_mut(language_id).expect("same keys");
        let mut dh = Matrix::zeros(trace.hidden.rows(), trace.hidden.cols());
        for t in 0..dlogits.rows() {
            let d = dlogits.row(t);
            ger_acc(&mut ghead.w, d, trace.hidden.row(t));
            for (gb, v) in ghead.b.iter_mut().zip(d) {
                *gb += v;
            }
            gemv_t_acc(&head.w, head.input_size, d, dh.row_mut(t));
        }
        let dx = self.backward(&trace, dh, &mut grads);
        let embedding = embedding_gradient(&dx, self.input_size)?;
        Ok(UtteranceGrad {
            loss,
            params: grads,
            embedding,
        })
    }

    /// Backpropagates `dh` (gradient wrt encoder output) through all layers,
    /// accumulating into `grads`. Returns the gradient wrt the encoder input.
    pub fn backward(&self, trace: &EncoderTrace, mut dh: Matrix, grads: &mut EncoderParams) -> Matrix {
        let h = self.hidden_size;
        for (l, layer) in self.layers.iter().enumerate().rev() {
            let input = &trace.inputs[l];
            let frames = input.rows();
            let mut df = Matrix::zeros(frames, h);
            let mut db = Matrix::zeros(frames, h);
            for t in 0..frames {
                df.row_mut(t).copy_from_slice(&dh.row(t)[..h]);
                db.row_mut(t).copy_from_slice(&dh.row(t)[h..]);
            }
            let mut dx = Matrix::zeros(frames, input.cols());
            let (tf, tb) = &trace.traces[l];
            let g = &mut grads.layers[l];
            layer.forward.backward(input, tf, &df, &mut g.forward, &mut dx);
            layer.backward.backward(input, tb, &db, &mut g.backward, &mut dx);
            dh = dx;
        }
        dh
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn langs() -> BTreeMap<String, usize> {
        [("A".to_string(), 2), ("B".to_string(), 3)].into_iter().collect()
    }

    fn random_matrix(rows: usize, cols: usize, seed: u64) -> Matrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Matrix::from_vec(rows, cols, (0..rows * cols).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
    }

    #[test]
    fn shapes() {
        let cfg = ModelConfig { layers: 2, hidden_size: 5 };
        let p = EncoderParams::init(&cfg, 3, &langs(), 1).unwrap();
        let one = random_matrix(1, 3, 2);
        assert_eq!(p.encode(&one).unwrap().hidden.cols(), 10);
        assert_eq!(p.encode(&one).unwrap().hidden.rows(), 1);
        assert_eq!(p.heads["B"].classes, 4);
        assert!(p.encode(&random_matrix(2, 4, 2)).is_err());
        assert!(p.head_log_probs(&Matrix::zeros(2, 10), "C").is_err());
    }

    #[test]
    fn bidirectional_symmetry() {
        let cfg = ModelConfig { layers: 1, hidden_size: 4 };
        let p = EncoderParams::init(&cfg, 3, &langs(), 5).unwrap();
        let mut swapped = p.clone();
        let layer = &mut swapped.layers[0];
        std::mem::swap(&mut layer.forward, &mut layer.backward);

        let x = random_matrix(6, 3, 9);
        let mut rev = Matrix::zeros(6, 3);
        for t in 0..6 {
            rev.row_mut(t).copy_from_slice(x.row(5 - t));
        }
        let h = p.encode(&x).unwrap().hidden;
        let hr = swapped.encode(&rev).unwrap().hidden;
        for t in 0..6 {
            let orig = h.row(5 - t);
            let got = hr.row(t);
            // Forward and backward halves trade places.
            assert_eq!(&got[..4], &orig[4..]);
            assert_eq!(&got[4..], &orig[..4]);
        }
    }

    #[test]
    fn zero_head_is_uniform() {
        let cfg = ModelConfig { layers: 1, hidden_size: 3 };
        let p = EncoderParams::zeros(&cfg, 2, &langs());
        let lp = p.head_log_probs(&random_matrix(4, 6, 1), "B").unwrap();
        for v in lp.matrix().as_slice() {
            assert!((v + 4f64.ln()).abs() < 1e-12);
        }
    }

    #[test]
    fn other_language_head_gets_no_gradient() {
        let cfg = ModelConfig { layers: 1, hidden_size: 3 };
        let p = EncoderParams::init(&cfg, 2, &langs(), 4).unwrap();
        let g = p.loss_and_grad(&random_matrix(5, 2, 3), &[0.1, -0.1], &[0, 1], "A").unwrap();
        assert!(g.params.heads["B"].w.iter().all(|&v| v == 0.0));
        assert!(g.params.heads["A"].w.iter().any(|&v| v != 0.0));
        assert!(g.embedding.iter().any(|&v| v != 0.0));
    }
}
