//! Layout of the unconstrained parameter vector and the constraining map.

use serde::{Deserialize, Serialize};

use super::{Dataset, GamerId, ModelError};

/// Hyper-prior settings: mu[m] ~ Normal(mu_loc, mu_scale), sigma[m] ~
/// HalfNormal(sigma_scale), tau[m] ~ HalfNormal(tau_scale).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HyperPriors {
    pub mu_loc: f64,
    pub mu_scale: f64,
    pub sigma_scale: f64,
    pub tau_scale: f64,
}

impl HyperPriors {
    pub fn new(
        mu_loc: f64,
        mu_scale: f64,
        sigma_scale: f64,
        tau_scale: f64,
    ) -> Result<Self, ModelError> {
        if !(mu_scale > 0.0 && sigma_scale > 0.0 && tau_scale > 0.0)
            || !mu_loc.is_finite()
            || !mu_scale.is_finite()
            || !sigma_scale.is_finite()
            || !tau_scale.is_finite()
        {
            return Err(ModelError::NonPositiveScale);
        }
        Ok(Self { mu_loc, mu_scale, sigma_scale, tau_scale })
    }
}

impl Default for HyperPriors {
    /// Weakly informative defaults on the logit scale.
    fn default() -> Self {
        Self { mu_loc: 0.0, mu_scale: 2.5, sigma_scale: 1.0, tau_scale: 1.0 }
    }
}

/// How the per-(gamer, modality) effects are represented in the unconstrained
/// vector. The non-centered form stores standardized effects `z` with
/// `effect = mu + sigma * z`; the centered form stores the effects directly.
/// The centered variant exists for sampler equivalence checks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Parameterization {
    #[default]
    NonCentered,
    Centered,
}

/// Deterministic layout of the flat unconstrained vector: all per-pair effect
/// slots (gamer-major, modality-minor), then mu[m], then log sigma[m], then
/// log tau[m]. Total dimension is `n_gamers * n_modalities + 3 * n_modalities`.
/// Every (gamer, modality) pair has an effect slot, including pairs with no
/// observed logits.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParameterIndex {
    n_gamers: usize,
    n_modalities: usize,
    parameterization: Parameterization,
}

impl ParameterIndex {
    pub fn new(n_gamers: usize, n_modalities: usize, parameterization: Parameterization) -> Self {
        Self { n_gamers, n_modalities, parameterization }
    }

    pub fn for_dataset(dataset: &Dataset) -> Self {
        Self::new(dataset.n_gamers(), dataset.n_modalities(), Parameterization::NonCentered)
    }

    pub fn for_dataset_with(dataset: &Dataset, parameterization: Parameterization) -> Self {
        Self::new(dataset.n_gamers(), dataset.n_modalities(), parameterization)
    }

    pub fn n_gamers(&self) -> usize {
        self.n_gamers
    }

    pub fn n_modalities(&self) -> usize {
        self.n_modalities
    }

    pub fn parameterization(&self) -> Parameterization {
        self.parameterization
    }

    pub fn dim(&self) -> usize {
        self.n_gamers * self.n_modalities + 3 * self.n_modalities
    }

    /// Slot of the effect parameter for (gamer, modality): `z` in the
    /// non-centered form, the effect itself in the centered form.
    pub fn effect_slot(&self, gamer: usize, modality: usize) -> usize {
        debug_assert!(gamer < self.n_gamers && modality < self.n_modalities);
        gamer * self.n_modalities + modality
    }

    pub fn mu_slot(&self, modality: usize) -> usize {
        self.n_gamers * self.n_modalities + modality
    }

    pub fn log_sigma_slot(&self, modality: usize) -> usize {
        self.n_gamers * self.n_modalities + self.n_modalities + modality
    }

    pub fn log_tau_slot(&self, modality: usize) -> usize {
        self.n_gamers * self.n_modalities + 2 * self.n_modalities + modality
    }

    /// Column names for draw exports, in slot order. The pair separator is a
    /// semicolon so the names stay single CSV fields.
    pub fn names(&self, dataset: &Dataset) -> Vec<String> {
        assert_eq!(dataset.n_gamers(), self.n_gamers);
        assert_eq!(dataset.n_modalities(), self.n_modalities);
        let effect = match self.parameterization {
            Parameterization::NonCentered => "z",
            Parameterization::Centered => "eta",
        };
        let mut names = Vec::with_capacity(self.dim());
        for g in dataset.gamers() {
            for m in dataset.modalities() {
                names.push(format!("{effect}[{g};{m}]"));
            }
        }
        for m in dataset.modalities() {
            names.push(format!("mu[{m}]"));
        }
        for m in dataset.modalities() {
            names.push(format!("log_sigma[{m}]"));
        }
        for m in dataset.modalities() {
            names.push(format!("log_tau[{m}]"));
        }
        names
    }
}

/// A point in the unconstrained parameter space. All entries finite.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterVector(Vec<f64>);

impl ParameterVector {
    pub fn new(values: Vec<f64>) -> Result<Self, ModelError> {
        if let Some(position) = values.iter().position(|v| !v.is_finite()) {
            return Err(ModelError::NonFiniteParameter { position });
        }
        Ok(Self(values))
    }

    pub fn zeros(dim: usize) -> Self {
        Self(vec![0.0; dim])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl std::ops::Deref for ParameterVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

/// Constrained view of a parameter point: positive scales and materialized
/// per-pair effects.
#[derive(Debug, Clone)]
pub struct ConstrainedParams {
    pub modality_mean: Vec<f64>,
    pub modality_scale: Vec<f64>,
    pub noise_scale: Vec<f64>,
    /// Per-pair effects, gamer-major.
    pub effects: Vec<f64>,
    n_gamers: usize,
    n_modalities: usize,
}

impl ConstrainedParams {
    pub fn effect(&self, gamer: usize, modality: usize) -> f64 {
        self.effects[gamer * self.n_modalities + modality]
    }

    /// Summed effect over all modalities, the gamer's intrinsic skill.
    pub fn skill(&self, gamer: usize) -> f64 {
        let base = gamer * self.n_modalities;
        self.effects[base..base + self.n_modalities].iter().sum()
    }

    pub fn n_gamers(&self) -> usize {
        self.n_gamers
    }
}

/// Maps an unconstrained point to the constrained space: scales are
/// exponentiated and non-centered effects are shifted and scaled.
pub fn constrain(params: &ParameterVector, index: &ParameterIndex) -> ConstrainedParams {
    assert_eq!(params.len(), index.dim(), "parameter/index dimension mismatch");
    let m_count = index.n_modalities();
    let n = index.n_gamers();
    let modality_mean: Vec<f64> = (0..m_count).map(|m| params[index.mu_slot(m)]).collect();
    let modality_scale: Vec<f64> =
        (0..m_count).map(|m| params[index.log_sigma_slot(m)].exp()).collect();
    let noise_scale: Vec<f64> = (0..m_count).map(|m| params[index.log_tau_slot(m)].exp()).collect();
    let mut effects = Vec::with_capacity(n * m_count);
    for g in 0..n {
        for m in 0..m_count {
            let raw = params[index.effect_slot(g, m)];
            let eta = match index.parameterization() {
                Parameterization::NonCentered => modality_mean[m] + modality_scale[m] * raw,
                Parameterization::Centered => raw,
            };
            effects.push(eta);
        }
    }
    ConstrainedParams {
        modality_mean,
        modality_scale,
        noise_scale,
        effects,
        n_gamers: n,
        n_modalities: m_count,
    }
}

/// Intrinsic skill of a registered gamer under a constrained parameter point.
pub fn skill_of(
    constrained: &ConstrainedParams,
    dataset: &Dataset,
    gamer: &GamerId,
) -> Result<f64, ModelError> {
    let gi = dataset
        .gamer_index(gamer)
        .ok_or_else(|| ModelError::UnknownGamer(gamer.as_str().to_owned()))?;
    Ok(constrained.skill(gi))
}
