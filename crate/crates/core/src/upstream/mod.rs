//! First-stage statistical machinery: Platt calibration, logit transforms,
//! gamer-level aggregation, decile quantization, chat featurization, and
//! linear-embedding triplet training with a logistic scorer.
//!
//! Neural feature extraction is out of scope; everything here consumes
//! feature vectors or scores produced elsewhere.

mod logistic;
mod platt;
mod transforms;
mod triplet;

pub use logistic::{logistic_fit, LogisticConfig, LogisticModel};
pub use platt::{platt_fit, CalibrationModel};
pub use transforms::{
    chat_density, decile_quantize, gamer_mean_scores, prob_to_logit, window_group, DayCount,
    DecileQuantization,
};
pub use triplet::{
    train_linear_embedding, triplet_loss_batch_hard, EmbeddingConfig, EmbeddingModel,
    TrainedEmbedding, TripletLoss,
};

use std::collections::HashSet;

use thiserror::Error;

use crate::model::{GamerId, ModalityId, ModelError};

#[derive(Debug, Error)]
pub enum UpstreamError {
    #[error("inputs must contain both classes")]
    SingleClass,
    #[error("expected equal-length inputs, got {left} and {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("need at least {needed} values, got {got}")]
    TooFewValues { needed: usize, got: usize },
    #[error("calibration did not converge after {iterations} iterations (a={a}, b={b})")]
    NoConvergence { iterations: usize, a: f64, b: f64 },
    #[error("timestamps must be sorted ascending (violation at position {position})")]
    UnsortedTimestamps { position: usize },
    #[error("modality {0:?} has no rows in the score table")]
    ModalityAbsent(String),
    #[error("duplicate score row for (gamer={gamer:?}, modality={modality:?}, datapoint={datapoint})")]
    DuplicateScore { gamer: String, modality: String, datapoint: u64 },
    #[error("non-finite score for (gamer={gamer:?}, modality={modality:?}, datapoint={datapoint})")]
    NonFiniteScore { gamer: String, modality: String, datapoint: u64 },
    #[error("embedding output dimension {output} exceeds input dimension {input}")]
    BadProjectionShape { output: usize, input: usize },
    #[error("training diverged (non-finite loss at epoch {epoch}); lower the learning rate")]
    Diverged { epoch: usize },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("{path}:{line}: {message}")]
    Parse { path: String, line: usize, message: String },
}

/// One upstream score emission.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreRow {
    pub gamer: GamerId,
    pub modality: ModalityId,
    pub datapoint: u64,
    pub score: f64,
}

/// Validated table of (gamer, modality, datapoint, score) rows with unique
/// keys and finite scores.
#[derive(Debug, Clone, Default)]
pub struct ScoreTable {
    rows: Vec<ScoreRow>,
}

impl ScoreTable {
    pub fn new(rows: Vec<ScoreRow>) -> Result<Self, UpstreamError> {
        let mut seen = HashSet::with_capacity(rows.len());
        for row in &rows {
            if !row.score.is_finite() {
                return Err(UpstreamError::NonFiniteScore {
                    gamer: row.gamer.as_str().to_owned(),
                    modality: row.modality.as_str().to_owned(),
                    datapoint: row.datapoint,
                });
            }
            if !seen.insert((
                row.gamer.as_str().to_owned(),
                row.modality.as_str().to_owned(),
                row.datapoint,
            )) {
                return Err(UpstreamError::DuplicateScore {
                    gamer: row.gamer.as_str().to_owned(),
                    modality: row.modality.as_str().to_owned(),
                    datapoint: row.datapoint,
                });
            }
        }
        Ok(Self { rows })
    }

    pub fn rows(&self) -> &[ScoreRow] {
        &self.rows
    }

    /// Distinct modalities in first-appearance order.
    pub fn modalities(&self) -> Vec<ModalityId> {
        let mut seen = HashSet::new();
        let mut out = Vec::new();
        for row in &self.rows {
            if seen.insert(row.modality.as_str().to_owned()) {
                out.push(row.modality.clone());
            }
        }
        out
    }

    /// Serializes as `gamer,modality,datapoint,score` CSV with a header.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("gamer,modality,datapoint,score\n");
        for row in &self.rows {
            out.push_str(&format!(
                "{},{},{},{}\n",
                row.gamer, row.modality, row.datapoint, row.score
            ));
        }
        out
    }

    /// Parses the CSV form, reporting 1-based line numbers on malformed rows.
    pub fn from_csv_str(text: &str, path: &str) -> Result<Self, UpstreamError> {
        let mut rows = Vec::new();
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, header)) if header.trim() == "gamer,modality,datapoint,score" => {}
            Some((_, header)) => {
                return Err(UpstreamError::Parse {
                    path: path.to_owned(),
                    line: 1,
                    message: format!(
                        "expected header 'gamer,modality,datapoint,score', got {header:?}"
                    ),
                })
            }
            None => {
                return Err(UpstreamError::Parse {
                    path: path.to_owned(),
                    line: 1,
                    message: "empty file".to_owned(),
                })
            }
        }
        for (idx, line) in lines {
            let line_no = idx + 1;
            if line.trim().is_empty() {
                continue;
            }
            let parts: Vec<&str> = line.split(',').collect();
            if parts.len() != 4 {
                return Err(UpstreamError::Parse {
                    path: path.to_owned(),
                    line: line_no,
                    message: format!("expected 4 fields, got {}", parts.len()),
                });
            }
            let parse_err = |message: String| UpstreamError::Parse {
                path: path.to_owned(),
                line: line_no,
                message,
            };
            let gamer = GamerId::new(parts[0]).map_err(|e| parse_err(e.to_string()))?;
            let modality = ModalityId::new(parts[1]).map_err(|e| parse_err(e.to_string()))?;
            let datapoint: u64 =
                parts[2].parse().map_err(|e| parse_err(format!("bad datapoint: {e}")))?;
            let score: f64 =
                parts[3].parse().map_err(|e| parse_err(format!("bad score: {e}")))?;
            rows.push(ScoreRow { gamer, modality, datapoint, score });
        }
        Self::new(rows)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(g: &str, m: &str, t: u64, s: f64) -> ScoreRow {
        ScoreRow {
            gamer: GamerId::new(g).unwrap(),
            modality: ModalityId::new(m).unwrap(),
            datapoint: t,
            score: s,
        }
    }

    #[test]
    fn rejects_duplicate_keys() {
        let res = ScoreTable::new(vec![row("a", "chat", 0, 0.5), row("a", "chat", 0, 0.7)]);
        assert!(matches!(res, Err(UpstreamError::DuplicateScore { .. })));
    }

    #[test]
    fn csv_round_trip() {
        let table =
            ScoreTable::new(vec![row("a", "chat", 0, 0.125), row("b", "video", 3, -1.5)]).unwrap();
        let text = table.to_csv_string();
        let parsed = ScoreTable::from_csv_str(&text, "scores.csv").unwrap();
        assert_eq!(parsed.rows(), table.rows());
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let text = "gamer,modality,datapoint,score\na,chat,0,0.5\na,chat,notanint,0.5\n";
        match ScoreTable::from_csv_str(text, "scores.csv") {
            Err(UpstreamError::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("expected parse error, got {other:?}"),
        }
    }
}
