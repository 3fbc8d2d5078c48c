//! Forward simulation of the generative model.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Normal, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::math::inv_logit;
use crate::model::{
    Dataset, GamerId, LogitObservation, ModalityId, ModelError, RankObservation, Split,
};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("{0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// How many logit observations each (gamer, modality) pair receives.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ObservationPlan {
    /// The same count for every pair.
    Fixed(usize),
    /// Explicit per-pair counts, gamer-major; zeros model missing modalities.
    PerPair(Vec<Vec<usize>>),
    /// Uneven coverage: per-modality observation probabilities cycle through
    /// a fixed table and observed pairs draw a count around `base`, so some
    /// pairs end up with no data at all.
    Uneven { base: usize },
}

impl Default for ObservationPlan {
    fn default() -> Self {
        ObservationPlan::Uneven { base: 4 }
    }
}

const UNEVEN_COVERAGE: [f64; 5] = [0.9, 0.75, 0.6, 0.85, 0.5];

/// Ground-truth generative settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthConfig {
    pub n_gamers: usize,
    pub n_modalities: usize,
    pub plan: ObservationPlan,
    pub validation_fraction: f64,
    pub modality_mean: Vec<f64>,
    pub modality_scale: Vec<f64>,
    pub noise_scale: Vec<f64>,
    pub seed: u64,
}

impl TruthConfig {
    /// Uniform hyper-parameters across modalities.
    pub fn uniform(
        n_gamers: usize,
        n_modalities: usize,
        plan: ObservationPlan,
        validation_fraction: f64,
        mean: f64,
        scale: f64,
        noise: f64,
        seed: u64,
    ) -> Self {
        Self {
            n_gamers,
            n_modalities,
            plan,
            validation_fraction,
            modality_mean: vec![mean; n_modalities],
            modality_scale: vec![scale; n_modalities],
            noise_scale: vec![noise; n_modalities],
            seed,
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if self.n_gamers == 0 {
            return Err(SimError::InvalidConfig("n_gamers must be >= 1".into()));
        }
        if self.n_modalities == 0 {
            return Err(SimError::InvalidConfig("n_modalities must be >= 1".into()));
        }
        if !(0.0..=1.0).contains(&self.validation_fraction) {
            return Err(SimError::InvalidConfig("validation_fraction must be in [0, 1]".into()));
        }
        for v in [&self.modality_mean, &self.modality_scale, &self.noise_scale] {
            if v.len() != self.n_modalities {
                return Err(SimError::InvalidConfig(format!(
                    "hyper-parameter vectors must have length {}",
                    self.n_modalities
                )));
            }
        }
        if self.modality_scale.iter().chain(&self.noise_scale).any(|&s| !(s > 0.0)) {
            return Err(SimError::InvalidConfig("scales must be strictly positive".into()));
        }
        if let ObservationPlan::PerPair(counts) = &self.plan {
            if counts.len() != self.n_gamers
                || counts.iter().any(|row| row.len() != self.n_modalities)
            {
                return Err(SimError::InvalidConfig(
                    "per-pair counts must be n_gamers x n_modalities".into(),
                ));
            }
        }
        Ok(())
    }
}

/// The latent truths behind a simulated dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthRecord {
    pub gamers: Vec<GamerId>,
    pub modalities: Vec<ModalityId>,
    pub modality_mean: Vec<f64>,
    pub modality_scale: Vec<f64>,
    pub noise_scale: Vec<f64>,
    /// Per-gamer, per-modality latent effects, gamer-major.
    pub gamer_effects: Vec<Vec<f64>>,
    /// Summed effects, the intrinsic skill of each gamer.
    pub gamer_skill: Vec<f64>,
    pub seed: u64,
}

/// The five evidence channels of the original pipeline, recycled as default
/// modality names.
pub(crate) fn modality_name(m: usize) -> String {
    const NAMES: [&str; 5] =
        ["video_spatial", "video_motion", "audio", "chat_text", "chat_temporal"];
    if m < NAMES.len() {
        NAMES[m].to_owned()
    } else {
        format!("modality_{}", m + 1)
    }
}

pub(crate) fn gamer_name(i: usize, n: usize) -> String {
    let width = n.to_string().len().max(3);
    format!("g{:0width$}", i + 1)
}

fn pair_counts(config: &TruthConfig, rng: &mut ChaCha8Rng) -> Vec<Vec<usize>> {
    match &config.plan {
        ObservationPlan::Fixed(count) => {
            vec![vec![*count; config.n_modalities]; config.n_gamers]
        }
        ObservationPlan::PerPair(counts) => counts.clone(),
        ObservationPlan::Uneven { base } => {
            let base = (*base).max(1);
            let lo = base.div_ceil(2);
            let hi = base + base / 2;
            (0..config.n_gamers)
                .map(|_| {
                    (0..config.n_modalities)
                        .map(|m| {
                            let coverage = UNEVEN_COVERAGE[m % UNEVEN_COVERAGE.len()];
                            if rng.random::<f64>() < coverage {
                                rng.random_range(lo..=hi)
                            } else {
                                0
                            }
                        })
                        .collect()
                })
                .collect()
        }
    }
}

/// Draws truths and observations with the given generator, using the supplied
/// latent effects. Shared between the public simulator and the calibration
/// harness (which draws its truths from the model prior instead of the
/// config).
pub(crate) fn simulate_observations(
    rng: &mut ChaCha8Rng,
    config: &TruthConfig,
    effects: &[Vec<f64>],
) -> Result<Dataset, SimError> {
    let gamers: Vec<GamerId> = (0..config.n_gamers)
        .map(|i| GamerId::new(gamer_name(i, config.n_gamers)))
        .collect::<Result<_, _>>()?;
    let modalities: Vec<ModalityId> = (0..config.n_modalities)
        .map(|m| ModalityId::new(modality_name(m)))
        .collect::<Result<_, _>>()?;

    let counts = pair_counts(config, rng);
    let mut logits = Vec::new();
    for (i, gamer) in gamers.iter().enumerate() {
        for (m, modality) in modalities.iter().enumerate() {
            let noise = Normal::new(effects[i][m], config.noise_scale[m])
                .map_err(|e| SimError::InvalidConfig(e.to_string()))?;
            for t in 0..counts[i][m] {
                logits.push(LogitObservation {
                    gamer: gamer.clone(),
                    modality: modality.clone(),
                    datapoint: t as u64,
                    logit: noise.sample(rng),
                });
            }
        }
    }

    let mut ranks = Vec::with_capacity(config.n_gamers);
    for (i, gamer) in gamers.iter().enumerate() {
        let skill: f64 = effects[i].iter().sum();
        let rank_a = rng.random::<f64>() < inv_logit(skill);
        ranks.push(RankObservation { gamer: gamer.clone(), rank_a, split: Split::Train });
    }

    // Seeded choice of the validation gamers via a Fisher-Yates shuffle.
    let n_validation =
        ((config.n_gamers as f64) * config.validation_fraction).round() as usize;
    let mut order: Vec<usize> = (0..config.n_gamers).collect();
    for i in (1..order.len()).rev() {
        let j = rng.random_range(0..=i);
        order.swap(i, j);
    }
    for &i in order.iter().take(n_validation) {
        ranks[i].split = Split::Validation;
    }

    Ok(Dataset::new(gamers, modalities, logits, ranks)?)
}

/// Simulates a dataset from the generative model: effects drawn around the
/// modality means, logits around the effects, and ranks through the logistic
/// link on summed effects. Deterministic per seed.
pub fn simulate(config: &TruthConfig) -> Result<(Dataset, TruthRecord), SimError> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    let effects: Vec<Vec<f64>> = (0..config.n_gamers)
        .map(|_| {
            (0..config.n_modalities)
                .map(|m| {
                    let z: f64 = rng.sample(StandardNormal);
                    config.modality_mean[m] + config.modality_scale[m] * z
                })
                .collect()
        })
        .collect();

    let dataset = simulate_observations(&mut rng, config, &effects)?;
    let record = TruthRecord {
        gamers: dataset.gamers().to_vec(),
        modalities: dataset.modalities().to_vec(),
        modality_mean: config.modality_mean.clone(),
        modality_scale: config.modality_scale.clone(),
        noise_scale: config.noise_scale.clone(),
        gamer_skill: effects.iter().map(|row| row.iter().sum()).collect(),
        gamer_effects: effects,
        seed: config.seed,
    };
    Ok((dataset, record))
}
