//! Deterministic featurization and aggregation transforms.

use std::collections::BTreeMap;

use chrono::DateTime;
use serde::{Deserialize, Serialize};

use crate::math::quantile_type7;
use crate::model::{GamerId, ModalityId};

use super::{ScoreTable, UpstreamError};

/// Log-odds of a probability after clamping it into [clamp, 1 - clamp].
pub fn prob_to_logit(p: f64, clamp: f64) -> f64 {
    let p = p.clamp(clamp, 1.0 - clamp);
    (p / (1.0 - p)).ln()
}

/// Arithmetic mean score per gamer for one modality, in first-appearance
/// order of the gamers.
pub fn gamer_mean_scores(
    table: &ScoreTable,
    modality: &ModalityId,
) -> Result<Vec<(GamerId, f64)>, UpstreamError> {
    let mut order: Vec<GamerId> = Vec::new();
    let mut sums: BTreeMap<String, (f64, u64)> = BTreeMap::new();
    for row in table.rows() {
        if &row.modality != modality {
            continue;
        }
        let entry = sums.entry(row.gamer.as_str().to_owned()).or_insert_with(|| {
            order.push(row.gamer.clone());
            (0.0, 0)
        });
        entry.0 += row.score;
        entry.1 += 1;
    }
    if order.is_empty() {
        return Err(UpstreamError::ModalityAbsent(modality.as_str().to_owned()));
    }
    Ok(order
        .into_iter()
        .map(|g| {
            let (sum, count) = sums[g.as_str()];
            (g, sum / count as f64)
        })
        .collect())
}

/// Decile classes plus the boundary quantiles they were cut at.
#[derive(Debug, Clone, PartialEq)]
pub struct DecileQuantization {
    pub classes: Vec<u8>,
    /// Type-7 empirical quantiles at 0.1, 0.2, ..., 0.9.
    pub boundaries: [f64; 9],
}

/// Quantizes values into ten classes along the deciles of their own empirical
/// distribution. A value equal to a boundary falls in the lower class, so
/// all-equal inputs all land in class 0.
pub fn decile_quantize(values: &[f64]) -> Result<DecileQuantization, UpstreamError> {
    if values.len() < 10 {
        return Err(UpstreamError::TooFewValues { needed: 10, got: values.len() });
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite values"));
    let mut boundaries = [0.0; 9];
    for (k, b) in boundaries.iter_mut().enumerate() {
        *b = quantile_type7(&sorted, (k + 1) as f64 / 10.0);
    }
    let classes = values
        .iter()
        .map(|&v| boundaries.iter().filter(|&&b| b < v).count() as u8)
        .collect();
    Ok(DecileQuantization { classes, boundaries })
}

/// Fixed one-hour grouping of sorted epoch-second timestamps, anchored at the
/// first timestamp: group id is `(t - t0) / 3600`.
pub fn window_group(timestamps: &[i64]) -> Result<Vec<u64>, UpstreamError> {
    if let Some(position) = timestamps.windows(2).position(|w| w[1] < w[0]) {
        return Err(UpstreamError::UnsortedTimestamps { position: position + 1 });
    }
    let Some(&first) = timestamps.first() else {
        return Ok(Vec::new());
    };
    Ok(timestamps.iter().map(|&t| ((t - first) / 3600) as u64).collect())
}

/// Message count for one UTC calendar day.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DayCount {
    /// ISO date, e.g. "2019-03-14".
    pub day: String,
    pub count: u64,
}

/// Messages per UTC calendar day, covering only days that received at least
/// one message, in ascending day order. The vector length therefore varies
/// with stream coverage.
pub fn chat_density(timestamps: &[i64]) -> Vec<DayCount> {
    let mut per_day: BTreeMap<i64, u64> = BTreeMap::new();
    for &t in timestamps {
        *per_day.entry(t.div_euclid(86_400)).or_insert(0) += 1;
    }
    per_day
        .into_iter()
        .map(|(day, count)| {
            let date = DateTime::from_timestamp(day * 86_400, 0)
                .expect("valid epoch day")
                .date_naive();
            DayCount { day: date.format("%Y-%m-%d").to_string(), count }
        })
        .collect()
}
