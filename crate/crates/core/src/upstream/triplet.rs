//! Batch-hard triplet loss over squared Euclidean distances and full-batch
//! gradient-descent training of a linear embedding.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::UpstreamError;

/// Loss evaluation with the analytic gradient and the anchors that had to be
/// skipped because their class has fewer than two members.
#[derive(Debug, Clone)]
pub struct TripletLoss {
    pub loss: f64,
    /// Gradient with respect to each embedding vector.
    pub gradient: Vec<Vec<f64>>,
    pub skipped_anchors: Vec<usize>,
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Batch-hard triplet loss: for every anchor, the hardest (farthest) positive
/// and hardest (closest) negative under squared Euclidean distance, hinged at
/// `margin`. The total is the mean over anchors with a defined positive term;
/// the hinge contributes zero gradient where inactive.
pub fn triplet_loss_batch_hard(
    embeddings: &[Vec<f64>],
    labels: &[bool],
    margin: f64,
) -> Result<TripletLoss, UpstreamError> {
    if embeddings.len() != labels.len() {
        return Err(UpstreamError::LengthMismatch {
            left: embeddings.len(),
            right: labels.len(),
        });
    }
    let n_pos = labels.iter().filter(|&&l| l).count();
    if n_pos == 0 || n_pos == labels.len() {
        return Err(UpstreamError::SingleClass);
    }

    let n = embeddings.len();
    let dim = embeddings[0].len();
    let mut gradient = vec![vec![0.0; dim]; n];
    let mut total = 0.0;
    let mut active_anchors = 0usize;
    let mut skipped_anchors = Vec::new();

    for anchor in 0..n {
        let same: Vec<usize> =
            (0..n).filter(|&j| j != anchor && labels[j] == labels[anchor]).collect();
        if same.is_empty() {
            skipped_anchors.push(anchor);
            continue;
        }
        let mut hardest_positive = same[0];
        let mut d_ap = squared_distance(&embeddings[anchor], &embeddings[same[0]]);
        for &j in &same[1..] {
            let d = squared_distance(&embeddings[anchor], &embeddings[j]);
            if d > d_ap {
                d_ap = d;
                hardest_positive = j;
            }
        }
        let mut hardest_negative = usize::MAX;
        let mut d_an = f64::INFINITY;
        for j in (0..n).filter(|&j| labels[j] != labels[anchor]) {
            let d = squared_distance(&embeddings[anchor], &embeddings[j]);
            if d < d_an {
                d_an = d;
                hardest_negative = j;
            }
        }

        active_anchors += 1;
        let hinge = margin + d_ap - d_an;
        if hinge > 0.0 {
            total += hinge;
            for k in 0..dim {
                let toward_pos = embeddings[anchor][k] - embeddings[hardest_positive][k];
                let toward_neg = embeddings[anchor][k] - embeddings[hardest_negative][k];
                gradient[anchor][k] += 2.0 * (toward_pos - toward_neg);
                gradient[hardest_positive][k] -= 2.0 * toward_pos;
                gradient[hardest_negative][k] += 2.0 * toward_neg;
            }
        }
    }

    let scale = 1.0 / active_anchors as f64;
    for row in &mut gradient {
        for g in row.iter_mut() {
            *g *= scale;
        }
    }
    Ok(TripletLoss { loss: total * scale, gradient, skipped_anchors })
}

/// Linear projection used as the embedding map, `embed(x) = P x`.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingModel {
    /// Row-major `output_dim x input_dim` projection.
    pub projection: Vec<f64>,
    pub margin: f64,
    pub input_dim: usize,
    pub output_dim: usize,
}

impl EmbeddingModel {
    pub fn embed(&self, features: &[f64]) -> Vec<f64> {
        (0..self.output_dim)
            .map(|r| {
                let row = &self.projection[r * self.input_dim..(r + 1) * self.input_dim];
                row.iter().zip(features).map(|(w, x)| w * x).sum()
            })
            .collect()
    }

    pub fn embed_all(&self, features: &[Vec<f64>]) -> Vec<Vec<f64>> {
        features.iter().map(|x| self.embed(x)).collect()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct EmbeddingConfig {
    pub output_dim: usize,
    pub margin: f64,
    pub learning_rate: f64,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for EmbeddingConfig {
    fn default() -> Self {
        Self { output_dim: 2, margin: 1.0, learning_rate: 0.05, epochs: 200, seed: 0 }
    }
}

/// A trained embedding plus the per-epoch loss trajectory.
#[derive(Debug, Clone)]
pub struct TrainedEmbedding {
    pub model: EmbeddingModel,
    pub loss_trajectory: Vec<f64>,
}

/// Trains the linear embedding by full-batch gradient descent on the
/// batch-hard triplet loss. Deterministic for a fixed seed; with zero epochs
/// the returned projection is the seeded random initialization.
pub fn train_linear_embedding(
    features: &[Vec<f64>],
    labels: &[bool],
    config: &EmbeddingConfig,
) -> Result<TrainedEmbedding, UpstreamError> {
    if features.len() != labels.len() {
        return Err(UpstreamError::LengthMismatch { left: features.len(), right: labels.len() });
    }
    let n_pos = labels.iter().filter(|&&l| l).count();
    if n_pos == 0 || n_pos == labels.len() {
        return Err(UpstreamError::SingleClass);
    }
    let input_dim = features[0].len();
    if config.output_dim > input_dim {
        return Err(UpstreamError::BadProjectionShape {
            output: config.output_dim,
            input: input_dim,
        });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let init_scale = 1.0 / (input_dim as f64).sqrt();
    let mut projection: Vec<f64> = (0..config.output_dim * input_dim)
        .map(|_| {
            let z: f64 = rng.sample(StandardNormal);
            z * init_scale
        })
        .collect();

    let mut model = EmbeddingModel {
        projection: projection.clone(),
        margin: config.margin,
        input_dim,
        output_dim: config.output_dim,
    };
    let mut loss_trajectory = Vec::with_capacity(config.epochs);

    for epoch in 0..config.epochs {
        model.projection.clone_from(&projection);
        let embedded = model.embed_all(features);
        let eval = triplet_loss_batch_hard(&embedded, labels, config.margin)?;
        if !eval.loss.is_finite() {
            return Err(UpstreamError::Diverged { epoch });
        }
        loss_trajectory.push(eval.loss);
        // Chain rule through the projection: dL/dP = sum_i g_i x_i^T.
        for (g_row, x) in eval.gradient.iter().zip(features) {
            for r in 0..config.output_dim {
                let g = g_row[r];
                if g == 0.0 {
                    continue;
                }
                let row = &mut projection[r * input_dim..(r + 1) * input_dim];
                for (w, &xv) in row.iter_mut().zip(x) {
                    *w -= config.learning_rate * g * xv;
                }
            }
        }
        if projection.iter().any(|w| !w.is_finite()) {
            return Err(UpstreamError::Diverged { epoch });
        }
    }
    model.projection = projection;
    Ok(TrainedEmbedding { model, loss_trajectory })
}
