//! The trainable sequence model: corpus-biased input, bidirectional GRU
//! encoder, language-specific softmax heads and the CTC objective.

mod checkpoint;
mod ctc;
mod gru;
mod model;
mod optim;

pub use checkpoint::{Checkpoint, CHECKPOINT_FORMAT_VERSION};
pub use ctc::{ctc_loss, greedy_decode, FrameLogProbs, BLANK};
pub use gru::{GruCell, GruTrace};
pub use model::{BiGruLayer, EncoderParams, EncoderTrace, Head, ModelConfig, UtteranceGrad};
pub use optim::Sgd;
