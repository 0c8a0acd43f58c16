//! Validation of precomputed per-frame facial-emotion scores.

use crate::error::{Error, Result};
use crate::io::csv_matrix::parse_matrix_csv;
use crate::tensor::Tensor;

pub const EMOTIONS: [&str; 7] = ["angry", "disgust", "fear", "happy", "sad", "surprise", "neutral"];

/// Checks arity and range of each row and stacks them into `time x 7`.
pub fn load_emotion_features(rows: &[Vec<f64>]) -> Result<Tensor> {
    if rows.is_empty() {
        return Err(Error::invalid("no emotion rows"));
    }
    for (row, values) in rows.iter().enumerate() {
        if values.len() != EMOTIONS.len() {
            return Err(Error::Row {
                row,
                reason: format!("expected {} emotion scores, found {}", EMOTIONS.len(), values.len()),
            });
        }
        if let Some((i, v)) = values.iter().enumerate().find(|(_, v)| !(0.0..=1.0).contains(*v)) {
            return Err(Error::Row {
                row,
                reason: format!("{} = {v} outside [0, 1]", EMOTIONS[i]),
            });
        }
    }
    Tensor::from_rows(rows)
}

/// Parses an emotion CSV whose header is exactly the canonical order.
pub fn parse_emotion_csv(text: &str) -> Result<Tensor> {
    let m = parse_matrix_csv(text)?;
    if m.header != EMOTIONS {
        return Err(Error::invalid(format!(
            "emotion header must be {}, found {}",
            EMOTIONS.join(","),
            m.header.join(",")
        )));
    }
    load_emotion_features(&m.rows)
}
