//! Siamese bidirectional-LSTM scorer, trained with exact backpropagation
//! through time in double precision.
//!
//! Architecture (block counts are per direction):
//!
//! ```text
//! enrolled (K x 21) --\                       /-- shared branch BLSTM(42) -> K x 84 --\
//!                      >-- same parameters --<                                         >-- concat K x 168
//! test     (K x 21) --/                       \-- shared branch BLSTM(42) -> K x 84 --/
//!   -> merge BLSTM(84) -> K x 168 -> top BLSTM(168) -> K x 336
//!   -> [forward h_{K-1}, backward h_0] (336) -> affine -> sigmoid
//! ```
//!
//! The two inputs must have the same length K, which pre-alignment (or a
//! linear time resampling for the unaligned variant) provides. The pair is
//! ordered: the enrolled sample always goes first.

mod adam;
mod blstm;
pub mod checkpoint;
mod lstm;
mod siamese;
mod train;

use ndarray::{Array2, ArrayView2};
use thiserror::Error;

pub use adam::{AdamConfig, AdamState};
pub use blstm::BlstmParams;
pub use lstm::LstmParams;
pub use siamese::{
    bce_with_logit, loss_and_gradients, loss_with_params, siamese_forward, to_matrix, PairExample,
    SiameseArch, SiameseModel, SiameseParams, Side,
};
pub use train::{
    pair_eer, train, train_from, EpochRecord, TrainConfig, TrainOutcome, TrainState, TrainingLog,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RnnError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("pair length mismatch: {a} vs {b}")]
    LengthMismatch { a: usize, b: usize },
    #[error("empty sequence")]
    EmptySequence,
    #[error("empty batch")]
    EmptyBatch,
    #[error("training diverged at epoch {epoch}, batch {batch}: loss {loss}")]
    Diverged {
        epoch: usize,
        batch: usize,
        loss: f64,
    },
    #[error("invalid training configuration: {0}")]
    Config(String),
    #[error("checkpoint error: {0}")]
    Checkpoint(String),
    #[error("i/o error: {0}")]
    Io(String),
}

/// One LSTM step: returns `(hidden, cell)`.
pub fn lstm_cell_step(
    params: &LstmParams,
    input: &[f64],
    hidden: &[f64],
    cell: &[f64],
) -> Result<(Vec<f64>, Vec<f64>), RnnError> {
    params.step(input, hidden, cell)
}

/// Bidirectional layer over a `T x I` sequence; returns `T x 2H`.
pub fn blstm_forward(
    layer: &BlstmParams,
    sequence: ArrayView2<'_, f64>,
) -> Result<Array2<f64>, RnnError> {
    layer.forward(sequence)
}
