//! Convolutional temporal encoder: conv1d -> ReLU -> max-pool -> conv1d ->
//! ReLU -> temporal mean -> dense + ReLU -> dense, giving one 64-wide
//! embedding per subject.

use crate::error::Result;
use crate::model::config::EncoderConfig;
use crate::model::layers::dense;
use crate::tensor::{Tape, Var};

/// Tape handles for one encoder's parameters, each a `(weight, bias)` pair.
#[derive(Clone, Copy, Debug)]
pub struct EncoderVars {
    pub conv1: (Var, Var),
    pub conv2: (Var, Var),
    pub dense1: (Var, Var),
    pub dense2: (Var, Var),
}

/// Shapes `(weight, bias)` of the four stages for input width `width`.
pub fn encoder_shapes(cfg: &EncoderConfig, width: usize) -> [([usize; 2], [usize; 2]); 4] {
    let c = cfg.channels;
    [
        ([cfg.kernel * width, c], [1, c]),
        ([cfg.kernel * c, c], [1, c]),
        ([c, cfg.dense_hidden], [1, cfg.dense_hidden]),
        ([cfg.dense_hidden, crate::model::config::EMBED_DIM], [1, crate::model::config::EMBED_DIM]),
    ]
}

/// `x` stacks `n` padded sequences of `seq_len` rows; returns `n x 64`.
pub fn encode(tape: &mut Tape, x: Var, seq_len: usize, cfg: &EncoderConfig, v: &EncoderVars) -> Result<Var> {
    let cols = tape.unfold_rows(x, seq_len, cfg.kernel)?;
    let h = dense(tape, cols, v.conv1.0, v.conv1.1, true)?;
    let len1 = seq_len - cfg.kernel + 1;
    let h = tape.max_pool_rows(h, len1, cfg.pool)?;
    let len2 = len1 / cfg.pool;
    let cols = tape.unfold_rows(h, len2, cfg.kernel)?;
    let h = dense(tape, cols, v.conv2.0, v.conv2.1, true)?;
    let len3 = len2 - cfg.kernel + 1;
    let h = tape.group_mean_rows(h, len3)?;
    let h = dense(tape, h, v.dense1.0, v.dense1.1, true)?;
    dense(tape, h, v.dense2.0, v.dense2.1, false)
}
