//! Observation containers and their validation.

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::ModelError;

fn valid_token(s: &str) -> bool {
    !s.is_empty() && s.chars().all(|c| !c.is_whitespace() && !c.is_control() && c != ',')
}

/// Opaque per-gamer identifier. Tokens are restricted to non-whitespace,
/// comma-free characters so they survive the CSV and JSONL wire formats.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct GamerId(String);

impl GamerId {
    pub fn new(id: impl Into<String>) -> Result<Self, ModelError> {
        let id = id.into();
        if valid_token(&id) {
            Ok(Self(id))
        } else {
            Err(ModelError::InvalidId(id))
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for GamerId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Opaque evidence-channel identifier, e.g. `chat_temporal` or `video_motion`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ModalityId(String);

impl ModalityId {
    pub fn new(id: impl Into<String>) -> Result<Self, ModelError> {
        let id = id.into();
        if valid_token(&id) {
            Ok(Self(id))
        } else {
            Err(ModelError::InvalidId(id))
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for ModalityId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Which likelihood a rank observation participates in. Train-split ranks were
/// already consumed by the upstream classifiers, so the pooling model ignores
/// them entirely; only validation-split ranks enter the posterior.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Validation,
}

impl Split {
    pub fn as_str(&self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Validation => "validation",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "train" => Some(Split::Train),
            "validation" => Some(Split::Validation),
            _ => None,
        }
    }
}

/// One log-odds emission from an upstream modality model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogitObservation {
    pub gamer: GamerId,
    pub modality: ModalityId,
    pub datapoint: u64,
    pub logit: f64,
}

/// Observed binary top-rank status for one gamer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankObservation {
    pub gamer: GamerId,
    pub rank_a: bool,
    pub split: Split,
}

/// Sufficient statistics of the logit observations for one (gamer, modality)
/// pair: count, mean, and centered sum of squares. The Gaussian likelihood
/// only needs these three numbers.
#[derive(Debug, Clone, Copy, Default)]
pub struct PairStats {
    pub count: u64,
    pub mean: f64,
    pub centered_sq_sum: f64,
}

/// Validated collection of gamers, modalities, logit observations and rank
/// observations. Construction indexes everything the log-posterior needs, so
/// density evaluations never touch the raw observation lists.
///
/// Datasets with no observations at all are permitted; the posterior then
/// equals the prior. Immutable after construction and safe to share across
/// threads.
#[derive(Debug, Clone)]
pub struct Dataset {
    gamers: Vec<GamerId>,
    modalities: Vec<ModalityId>,
    logits: Vec<LogitObservation>,
    ranks: Vec<RankObservation>,
    gamer_lookup: HashMap<String, usize>,
    modality_lookup: HashMap<String, usize>,
    pair_stats: Vec<PairStats>,
    validation_ranks: Vec<(usize, bool)>,
    modalities_observed: Vec<usize>,
}

impl Dataset {
    pub fn new(
        gamers: Vec<GamerId>,
        modalities: Vec<ModalityId>,
        logits: Vec<LogitObservation>,
        ranks: Vec<RankObservation>,
    ) -> Result<Self, ModelError> {
        if gamers.is_empty() {
            return Err(ModelError::NoGamers);
        }
        if modalities.is_empty() {
            return Err(ModelError::NoModalities);
        }

        let mut gamer_lookup = HashMap::with_capacity(gamers.len());
        for (i, g) in gamers.iter().enumerate() {
            if gamer_lookup.insert(g.as_str().to_owned(), i).is_some() {
                return Err(ModelError::DuplicateGamer(g.as_str().to_owned()));
            }
        }
        let mut modality_lookup = HashMap::with_capacity(modalities.len());
        for (m, id) in modalities.iter().enumerate() {
            if modality_lookup.insert(id.as_str().to_owned(), m).is_some() {
                return Err(ModelError::DuplicateModality(id.as_str().to_owned()));
            }
        }

        let n = gamers.len();
        let m = modalities.len();
        let mut pair_stats = vec![PairStats::default(); n * m];
        let mut seen = HashMap::with_capacity(logits.len());
        for obs in &logits {
            let gi = *gamer_lookup
                .get(obs.gamer.as_str())
                .ok_or_else(|| ModelError::UnknownGamer(obs.gamer.as_str().to_owned()))?;
            let mi = *modality_lookup
                .get(obs.modality.as_str())
                .ok_or_else(|| ModelError::UnknownModality(obs.modality.as_str().to_owned()))?;
            if !obs.logit.is_finite() {
                return Err(ModelError::NonFiniteLogit {
                    gamer: obs.gamer.as_str().to_owned(),
                    modality: obs.modality.as_str().to_owned(),
                    datapoint: obs.datapoint,
                });
            }
            if seen.insert((gi, mi, obs.datapoint), ()).is_some() {
                return Err(ModelError::DuplicateLogit {
                    gamer: obs.gamer.as_str().to_owned(),
                    modality: obs.modality.as_str().to_owned(),
                    datapoint: obs.datapoint,
                });
            }
            // Welford update of the pair's sufficient statistics.
            let stats = &mut pair_stats[gi * m + mi];
            stats.count += 1;
            let delta = obs.logit - stats.mean;
            stats.mean += delta / stats.count as f64;
            stats.centered_sq_sum += delta * (obs.logit - stats.mean);
        }

        let mut rank_seen = vec![false; n];
        let mut validation_ranks = Vec::new();
        for r in &ranks {
            let gi = *gamer_lookup
                .get(r.gamer.as_str())
                .ok_or_else(|| ModelError::UnknownGamer(r.gamer.as_str().to_owned()))?;
            if rank_seen[gi] {
                return Err(ModelError::DuplicateRank(r.gamer.as_str().to_owned()));
            }
            rank_seen[gi] = true;
            if r.split == Split::Validation {
                validation_ranks.push((gi, r.rank_a));
            }
        }
        validation_ranks.sort_unstable_by_key(|(gi, _)| *gi);

        let mut modalities_observed = vec![0usize; n];
        for (gi, counts) in modalities_observed.iter_mut().enumerate() {
            *counts = (0..m).filter(|&mi| pair_stats[gi * m + mi].count > 0).count();
        }

        Ok(Self {
            gamers,
            modalities,
            logits,
            ranks,
            gamer_lookup,
            modality_lookup,
            pair_stats,
            validation_ranks,
            modalities_observed,
        })
    }

    pub fn n_gamers(&self) -> usize {
        self.gamers.len()
    }

    pub fn n_modalities(&self) -> usize {
        self.modalities.len()
    }

    pub fn gamers(&self) -> &[GamerId] {
        &self.gamers
    }

    pub fn modalities(&self) -> &[ModalityId] {
        &self.modalities
    }

    pub fn logits(&self) -> &[LogitObservation] {
        &self.logits
    }

    pub fn ranks(&self) -> &[RankObservation] {
        &self.ranks
    }

    pub fn gamer_index(&self, gamer: &GamerId) -> Option<usize> {
        self.gamer_lookup.get(gamer.as_str()).copied()
    }

    pub fn modality_index(&self, modality: &ModalityId) -> Option<usize> {
        self.modality_lookup.get(modality.as_str()).copied()
    }

    pub fn pair_stats(&self, gamer: usize, modality: usize) -> &PairStats {
        &self.pair_stats[gamer * self.modalities.len() + modality]
    }

    /// Validation-split rank observations as (gamer index, rank_a), sorted by
    /// gamer index.
    pub fn validation_ranks(&self) -> &[(usize, bool)] {
        &self.validation_ranks
    }

    /// Number of modalities with at least one logit observation for a gamer.
    pub fn modalities_observed(&self, gamer: usize) -> usize {
        self.modalities_observed[gamer]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn gid(s: &str) -> GamerId {
        GamerId::new(s).unwrap()
    }

    pub(crate) fn mid(s: &str) -> ModalityId {
        ModalityId::new(s).unwrap()
    }

    fn obs(g: &str, m: &str, t: u64, logit: f64) -> LogitObservation {
        LogitObservation { gamer: gid(g), modality: mid(m), datapoint: t, logit }
    }

    #[test]
    fn rejects_bad_tokens() {
        assert!(GamerId::new("").is_err());
        assert!(GamerId::new("a b").is_err());
        assert!(GamerId::new("a,b").is_err());
        assert!(ModalityId::new("chat\n").is_err());
        assert!(GamerId::new("player_01").is_ok());
    }

    #[test]
    fn rejects_duplicates_and_unknown_refs() {
        let two = vec![gid("a"), gid("b")];
        let chat = vec![mid("chat")];
        assert!(matches!(
            Dataset::new(vec![gid("a"), gid("a")], chat.clone(), vec![], vec![]),
            Err(ModelError::DuplicateGamer(_))
        ));
        assert!(matches!(
            Dataset::new(two.clone(), chat.clone(), vec![obs("zzz", "chat", 0, 1.0)], vec![]),
            Err(ModelError::UnknownGamer(_))
        ));
        assert!(matches!(
            Dataset::new(
                two.clone(),
                chat.clone(),
                vec![obs("a", "chat", 0, 1.0), obs("a", "chat", 0, 2.0)],
                vec![]
            ),
            Err(ModelError::DuplicateLogit { .. })
        ));
        let dup_rank = vec![
            RankObservation { gamer: gid("a"), rank_a: true, split: Split::Train },
            RankObservation { gamer: gid("a"), rank_a: false, split: Split::Validation },
        ];
        assert!(matches!(
            Dataset::new(two, chat, vec![], dup_rank),
            Err(ModelError::DuplicateRank(_))
        ));
    }

    #[test]
    fn rejects_empty_axes() {
        assert!(matches!(
            Dataset::new(vec![], vec![mid("chat")], vec![], vec![]),
            Err(ModelError::NoGamers)
        ));
        assert!(matches!(
            Dataset::new(vec![gid("a")], vec![], vec![], vec![]),
            Err(ModelError::NoModalities)
        ));
    }

    #[test]
    fn pair_stats_match_direct_computation() {
        let data = [0.4, -1.2, 2.5, 0.0];
        let logits: Vec<LogitObservation> =
            data.iter().enumerate().map(|(t, &l)| obs("a", "chat", t as u64, l)).collect();
        let ds =
            Dataset::new(vec![gid("a"), gid("b")], vec![mid("chat")], logits, vec![]).unwrap();
        let stats = ds.pair_stats(0, 0);
        let mean = data.iter().sum::<f64>() / data.len() as f64;
        let css: f64 = data.iter().map(|l| (l - mean) * (l - mean)).sum();
        assert_eq!(stats.count, 4);
        assert!((stats.mean - mean).abs() < 1e-12);
        assert!((stats.centered_sq_sum - css).abs() < 1e-12);
        assert_eq!(ds.pair_stats(1, 0).count, 0);
        assert_eq!(ds.modalities_observed(0), 1);
        assert_eq!(ds.modalities_observed(1), 0);
    }

    #[test]
    fn only_validation_ranks_are_indexed() {
        let ranks = vec![
            RankObservation { gamer: gid("a"), rank_a: true, split: Split::Train },
            RankObservation { gamer: gid("b"), rank_a: false, split: Split::Validation },
        ];
        let ds = Dataset::new(vec![gid("a"), gid("b")], vec![mid("chat")], vec![], ranks).unwrap();
        assert_eq!(ds.validation_ranks(), &[(1, false)]);
    }
}
