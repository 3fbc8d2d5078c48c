//! Turns raw draws into per-gamer skill summaries, KDE-mode point estimates,
//! decile group selections, and plot-ready exports.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::math::{quantile_type7, sample_sd};
use crate::model::{Dataset, GamerId, ParameterIndex, Parameterization, RankObservation};
use crate::sampler::MultiChainDraws;

#[derive(Debug, Error)]
pub enum PosteriorError {
    #[error("unknown gamer id {0:?}")]
    UnknownGamer(String),
    #[error("need at least {needed} draws for a stable summary, got {got}")]
    TooFewDraws { needed: usize, got: usize },
    #[error("no summaries supplied")]
    EmptySummaries,
    #[error("draws/index dimension mismatch")]
    DimensionMismatch,
    #[error("failed writing {path}: {source}")]
    Io { path: String, source: std::io::Error },
}

/// Posterior summary of one gamer's intrinsic skill.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkillSummary {
    pub gamer: GamerId,
    pub n_draws: usize,
    pub mean: f64,
    pub sd: f64,
    pub map: f64,
    pub q05: f64,
    pub q25: f64,
    pub q50: f64,
    pub q75: f64,
    pub q95: f64,
    pub modalities_observed: usize,
}

/// How decile sizes round. The ceiling rule is the default; the floor rule
/// matches reports that round 10% of 425 down to 42.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DecileRule {
    #[default]
    Ceil,
    Floor,
}

impl DecileRule {
    fn size(&self, n: usize) -> usize {
        match self {
            DecileRule::Ceil => n.div_ceil(10),
            DecileRule::Floor => (n / 10).max(1),
        }
    }
}

/// Skill-ranked gamer groups for extrinsic validation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupSelection {
    pub top_decile: Vec<GamerId>,
    pub bottom_decile: Vec<GamerId>,
    /// Gamers observed below the top rank whose skill point estimate exceeds
    /// the median estimate of the top-ranked gamers.
    pub below_a_high_skill: Vec<GamerId>,
}

/// Per-draw skill of one gamer: the summed per-modality effects, evaluated
/// from the unconstrained draws and concatenated across chains.
pub fn skill_draws(
    draws: &MultiChainDraws,
    index: &ParameterIndex,
    dataset: &Dataset,
    gamer: &GamerId,
) -> Result<Vec<f64>, PosteriorError> {
    let gi = dataset
        .gamer_index(gamer)
        .ok_or_else(|| PosteriorError::UnknownGamer(gamer.as_str().to_owned()))?;
    if draws.dim != index.dim() {
        return Err(PosteriorError::DimensionMismatch);
    }
    Ok(skill_draws_by_index(draws, index, gi))
}

pub(crate) fn skill_draws_by_index(
    draws: &MultiChainDraws,
    index: &ParameterIndex,
    gamer: usize,
) -> Vec<f64> {
    let m_count = index.n_modalities();
    let mut out = Vec::with_capacity(draws.total_draws());
    for chain in &draws.chains {
        for d in 0..chain.n_draws {
            let row = &chain.draws[d * draws.dim..(d + 1) * draws.dim];
            let mut skill = 0.0;
            for m in 0..m_count {
                let raw = row[index.effect_slot(gamer, m)];
                skill += match index.parameterization() {
                    Parameterization::NonCentered => {
                        row[index.mu_slot(m)] + row[index.log_sigma_slot(m)].exp() * raw
                    }
                    Parameterization::Centered => raw,
                };
            }
            out.push(skill);
        }
    }
    out
}

/// Gaussian-kernel density estimate evaluated at every draw point; returns
/// the argmax. Draws must be sorted ascending. The kernel is truncated at six
/// bandwidths, far below the resolution of the sums involved.
fn kde_mode(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    let sd = sample_sd(sorted);
    let bandwidth = 1.06 * sd * (n as f64).powf(-0.2);
    if !(bandwidth > 0.0) || !bandwidth.is_finite() {
        // Degenerate spread: every draw is (numerically) the same point.
        return sorted[n / 2];
    }
    let cutoff = 6.0 * bandwidth;
    let inv_h = 1.0 / bandwidth;
    let mut best = (f64::NEG_INFINITY, 0usize);
    let mut lo = 0usize;
    let mut hi = 0usize;
    for j in 0..n {
        let x = sorted[j];
        while sorted[lo] < x - cutoff {
            lo += 1;
        }
        while hi < n && sorted[hi] <= x + cutoff {
            hi += 1;
        }
        let mut density = 0.0;
        for &y in &sorted[lo..hi] {
            let u = (x - y) * inv_h;
            density += (-0.5 * u * u).exp();
        }
        if density > best.0 {
            best = (density, j);
        }
    }
    sorted[best.1]
}

/// Summarizes one gamer's skill draws: moments, type-7 quantiles, and the
/// MAP estimate as the mode of a Gaussian KDE with Silverman's bandwidth
/// `1.06 * sd * n^(-1/5)`. Requires at least 100 draws; the KDE mode is not
/// stable below that.
pub fn summarize(
    gamer: GamerId,
    draws: &[f64],
    modalities_observed: usize,
) -> Result<SkillSummary, PosteriorError> {
    if draws.len() < 100 {
        return Err(PosteriorError::TooFewDraws { needed: 100, got: draws.len() });
    }
    let mut sorted = draws.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite draws"));
    let mean = crate::math::mean(&sorted);
    let sd = sample_sd(&sorted);
    Ok(SkillSummary {
        gamer,
        n_draws: sorted.len(),
        mean,
        sd,
        map: kde_mode(&sorted),
        q05: quantile_type7(&sorted, 0.05),
        q25: quantile_type7(&sorted, 0.25),
        q50: quantile_type7(&sorted, 0.50),
        q75: quantile_type7(&sorted, 0.75),
        q95: quantile_type7(&sorted, 0.95),
        modalities_observed,
    })
}

/// Summaries for every gamer in the dataset, in dataset order.
pub fn summarize_all(
    draws: &MultiChainDraws,
    index: &ParameterIndex,
    dataset: &Dataset,
) -> Result<Vec<SkillSummary>, PosteriorError> {
    if draws.dim != index.dim() {
        return Err(PosteriorError::DimensionMismatch);
    }
    dataset
        .gamers()
        .iter()
        .enumerate()
        .map(|(gi, gamer)| {
            let skills = skill_draws_by_index(draws, index, gi);
            summarize(gamer.clone(), &skills, dataset.modalities_observed(gi))
        })
        .collect()
}

fn sorted_by_map_desc(summaries: &[SkillSummary]) -> Vec<&SkillSummary> {
    let mut refs: Vec<&SkillSummary> = summaries.iter().collect();
    refs.sort_by(|a, b| {
        b.map
            .partial_cmp(&a.map)
            .expect("finite MAP estimates")
            .then_with(|| a.gamer.cmp(&b.gamer))
    });
    refs
}

/// Selects the skill-ranked validation groups: the top and bottom decile by
/// MAP, and the gamers without top-rank status whose MAP exceeds the median
/// MAP of top-ranked gamers. Ties in MAP break lexicographically by gamer id.
/// Returns the selection plus any warnings (e.g. no top-ranked gamers to
/// anchor the third group).
pub fn select_groups(
    summaries: &[SkillSummary],
    ranks: &[RankObservation],
) -> Result<(GroupSelection, Vec<String>), PosteriorError> {
    select_groups_with(summaries, ranks, DecileRule::Ceil)
}

pub fn select_groups_with(
    summaries: &[SkillSummary],
    ranks: &[RankObservation],
    rule: DecileRule,
) -> Result<(GroupSelection, Vec<String>), PosteriorError> {
    if summaries.is_empty() {
        return Err(PosteriorError::EmptySummaries);
    }
    let ranked = sorted_by_map_desc(summaries);
    let k = rule.size(ranked.len());
    let top_decile: Vec<GamerId> = ranked[..k].iter().map(|s| s.gamer.clone()).collect();
    let bottom_decile: Vec<GamerId> =
        ranked[ranked.len() - k..].iter().map(|s| s.gamer.clone()).collect();

    let mut warnings = Vec::new();
    let map_of: std::collections::HashMap<&str, f64> =
        summaries.iter().map(|s| (s.gamer.as_str(), s.map)).collect();
    let mut rank_a_maps: Vec<f64> = ranks
        .iter()
        .filter(|r| r.rank_a)
        .filter_map(|r| map_of.get(r.gamer.as_str()).copied())
        .collect();
    let below_a_high_skill = if rank_a_maps.is_empty() {
        warnings.push("no rank-A gamers with summaries; high-skill group is empty".to_string());
        Vec::new()
    } else {
        rank_a_maps.sort_by(|a, b| a.partial_cmp(b).expect("finite MAP estimates"));
        let mid = rank_a_maps.len() / 2;
        let median = if rank_a_maps.len() % 2 == 1 {
            rank_a_maps[mid]
        } else {
            0.5 * (rank_a_maps[mid - 1] + rank_a_maps[mid])
        };
        let below: std::collections::HashSet<&str> = ranks
            .iter()
            .filter(|r| !r.rank_a)
            .map(|r| r.gamer.as_str())
            .collect();
        ranked
            .iter()
            .filter(|s| below.contains(s.gamer.as_str()) && s.map > median)
            .map(|s| s.gamer.clone())
            .collect()
    };

    Ok((GroupSelection { top_decile, bottom_decile, below_a_high_skill }, warnings))
}

fn rank_label(ranks: &[RankObservation], gamer: &GamerId) -> &'static str {
    match ranks.iter().find(|r| &r.gamer == gamer) {
        Some(r) if r.rank_a => "A",
        Some(_) => "below_A",
        None => "unknown",
    }
}

/// Renders the box-plot table: one row per gamer sorted by MAP descending,
/// with the columns a plotting tool needs to reproduce the skill-distribution
/// figures.
pub fn boxplot_csv_string(summaries: &[SkillSummary], ranks: &[RankObservation]) -> String {
    let mut out = String::from(
        "gamer,rank_label,map,mean,sd,q05,q25,q50,q75,q95,n_modalities\n",
    );
    for s in sorted_by_map_desc(summaries) {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{}\n",
            s.gamer,
            rank_label(ranks, &s.gamer),
            s.map,
            s.mean,
            s.sd,
            s.q05,
            s.q25,
            s.q50,
            s.q75,
            s.q95,
            s.modalities_observed
        ));
    }
    out
}

/// Writes the box-plot CSV to a file.
pub fn export_boxplot_csv(
    summaries: &[SkillSummary],
    ranks: &[RankObservation],
    path: &Path,
) -> Result<(), PosteriorError> {
    let body = boxplot_csv_string(summaries, ranks);
    let mut file = std::fs::File::create(path)
        .map_err(|source| PosteriorError::Io { path: path.display().to_string(), source })?;
    file.write_all(body.as_bytes())
        .map_err(|source| PosteriorError::Io { path: path.display().to_string(), source })?;
    Ok(())
}
