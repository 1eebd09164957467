use serde::{Deserialize, Serialize};

use super::model::EncoderParams;
use crate::embedding::EmbeddingMatrix;
use crate::error::{Error, Result};

/// Plain SGD with a constant learning rate and global gradient-norm
/// clipping. Encoder, heads and embeddings share the same rule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sgd {
    pub learning_rate: f64,
    pub clip_norm: f64,
}

impl Default for Sgd {
    fn default() -> Self {
        Self {
            learning_rate: 0.05,
            clip_norm: 5.0,
        }
    }
}

impl Sgd {
    /// Applies one update. `embedding_grads` holds `(row, gradient)` pairs.
    /// Returns the pre-clipping gradient norm.
    pub fn step(
        &self,
        params: &mut EncoderParams,
        grads: &EncoderParams,
        embeddings: &mut EmbeddingMatrix,
        embedding_grads: &[(usize, Vec<f64>)],
    ) -> Result<f64> {
        let sq = grads.sq_norm()
            + embedding_grads
                .iter()
                .flat_map(|(_, g)| g.iter())
                .map(|v| v * v)
                .sum::<f64>();
        let norm = sq.sqrt();
        if !norm.is_finite() {
            return Err(Error::numeric("optimizer step", format!("gradient norm is {norm}")));
        }
        let scale = if self.clip_norm > 0.0 && norm > self.clip_norm {
            self.clip_norm / norm
        } else {
            1.0
        };
        let lr = self.learning_rate * scale;
        for (p, g) in params.tensors_mut().into_iter().zip(grads.tensors()) {
            for (x, d) in p.iter_mut().zip(g) {
                *x -= lr * d;
            }
        }
        for (row, g) in embedding_grads {
            for (x, d) in embeddings.row_mut(*row).iter_mut().zip(g) {
                *x -= lr * d;
            }
        }
        Ok(norm)
    }
}
