//! File formats and atomic writes.
//!
//! Wire formats:
//! - logits.jsonl: one JSON object per line,
//!   `{"gamer": string, "modality": string, "datapoint": integer, "logit": number}`
//! - ranks.csv: header `gamer,rank_a,split` with rank_a in {0,1} and split in
//!   {train,validation}
//! - future ranks: header `gamer,rank_section` with free-form section tokens
//!
//! All writers go through a temp-file-plus-rename so a failing command never
//! leaves a partial output behind.

use std::fs;
use std::path::Path;

use serde::Deserialize;
use skillpool::model::{Dataset, GamerId, LogitObservation, ModalityId, RankObservation, Split};

use crate::errors::CliError;

/// Writes bytes to `path` atomically: temp file in the same directory, then
/// rename.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<(), CliError> {
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let file_name = path
        .file_name()
        .ok_or_else(|| CliError::Io(format!("{}: not a file path", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp", file_name.to_string_lossy()));
    fs::write(&tmp, contents).map_err(|e| CliError::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| CliError::io(path, e))?;
    Ok(())
}

pub fn read_to_string(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

#[derive(Deserialize)]
struct LogitLine {
    gamer: String,
    modality: String,
    datapoint: u64,
    logit: f64,
}

/// Parses logits.jsonl, reporting the 1-based line number of the first
/// malformed record.
pub fn parse_logits_jsonl(text: &str, path: &str) -> Result<Vec<LogitObservation>, CliError> {
    let mut out = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let line_no = idx + 1;
        let parsed: LogitLine = serde_json::from_str(line)
            .map_err(|e| CliError::Data(format!("{path}:{line_no}: {e}")))?;
        let gamer = GamerId::new(parsed.gamer)
            .map_err(|e| CliError::Data(format!("{path}:{line_no}: {e}")))?;
        let modality = ModalityId::new(parsed.modality)
            .map_err(|e| CliError::Data(format!("{path}:{line_no}: {e}")))?;
        if !parsed.logit.is_finite() {
            return Err(CliError::Data(format!("{path}:{line_no}: logit must be finite")));
        }
        out.push(LogitObservation {
            gamer,
            modality,
            datapoint: parsed.datapoint,
            logit: parsed.logit,
        });
    }
    Ok(out)
}

pub fn logits_to_jsonl(logits: &[LogitObservation]) -> String {
    let mut out = String::new();
    for obs in logits {
        out.push_str(&format!(
            "{{\"gamer\":{},\"modality\":{},\"datapoint\":{},\"logit\":{}}}\n",
            serde_json::to_string(obs.gamer.as_str()).expect("string"),
            serde_json::to_string(obs.modality.as_str()).expect("string"),
            obs.datapoint,
            serde_json::Number::from_f64(obs.logit).expect("finite logit"),
        ));
    }
    out
}

/// Parses ranks.csv with line-numbered validation errors.
pub fn parse_ranks_csv(text: &str, path: &str) -> Result<Vec<RankObservation>, CliError> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header.trim() == "gamer,rank_a,split" => {}
        Some((_, header)) => {
            return Err(CliError::Data(format!(
                "{path}:1: expected header 'gamer,rank_a,split', got {header:?}"
            )))
        }
        None => return Err(CliError::Data(format!("{path}:1: empty file"))),
    }
    let mut out = Vec::new();
    for (idx, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let line_no = idx + 1;
        let parts: Vec<&str> = line.split(',').collect();
        if parts.len() != 3 {
            return Err(CliError::Data(format!(
                "{path}:{line_no}: expected 3 fields, got {}",
                parts.len()
            )));
        }
        let gamer = GamerId::new(parts[0])
            .map_err(|e| CliError::Data(format!("{path}:{line_no}: {e}")))?;
        let rank_a = match parts[1] {
            "0" => false,
            "1" => true,
            other => {
                return Err(CliError::Data(format!(
                    "{path}:{line_no}: rank_a must be 0 or 1, got {other:?}"
                )))
            }
        };
        let split = Split::parse(parts[2]).ok_or_else(|| {
            CliError::Data(format!(
                "{path}:{line_no}: split must be 'train' or 'validation', got {:?}",
                parts[2]
            ))
        })?;
        out.push(RankObservation { gamer, rank_a, split });
    }
    Ok(out)
}

pub fn ranks_to_csv(ranks: &[RankObservation]) -> String {
    let mut out = String::from("gamer,rank_a,split\n");
    for r in ranks {
        out.push_str(&format!(
            "{},{},{}\n",
            r.gamer,
            if r.rank_a { 1 } else { 0 },
            r.split.as_str()
        ));
    }
    out
}

/// Assembles a validated dataset from parsed observations, with gamers and
/// modalities registered in first-appearance order.
pub fn dataset_from_observations(
    logits: Vec<LogitObservation>,
    ranks: Vec<RankObservation>,
) -> Result<Dataset, CliError> {
    let mut gamers: Vec<GamerId> = Vec::new();
    let mut modalities: Vec<ModalityId> = Vec::new();
    let mut seen_gamers = std::collections::HashSet::new();
    let mut seen_modalities = std::collections::HashSet::new();
    for obs in &logits {
        if seen_gamers.insert(obs.gamer.as_str().to_owned()) {
            gamers.push(obs.gamer.clone());
        }
        if seen_modalities.insert(obs.modality.as_str().to_owned()) {
            modalities.push(obs.modality.clone());
        }
    }
    for r in &ranks {
        if seen_gamers.insert(r.gamer.as_str().to_owned()) {
            gamers.push(r.gamer.clone());
        }
    }
    if modalities.is_empty() {
        // A rank-only dataset still needs one modality axis for the model.
        modalities.push(ModalityId::new("evidence").expect("valid token"));
    }
    Dataset::new(gamers, modalities, logits, ranks)
        .map_err(|e| CliError::Data(e.to_string()))
}

/// Parses the optional future-ranks file: `gamer,rank_section`.
pub fn parse_future_ranks(text: &str, path: &str) -> Result<Vec<(GamerId, String)>, CliError> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header.trim() == "gamer,rank_section" => {}
        Some((_, header)) => {
            return Err(CliError::Data(format!(
                "{path}:1: expected header 'gamer,rank_section', got {header:?}"
            )))
        }
        None => return Err(CliError::Data(format!("{path}:1: empty file"))),
    }
    let mut out = Vec::new();
    for (idx, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let line_no = idx + 1;
        let parts: Vec<&str> = line.split(',').collect();
        if parts.len() != 2 {
            return Err(CliError::Data(format!(
                "{path}:{line_no}: expected 2 fields, got {}",
                parts.len()
            )));
        }
        let gamer = GamerId::new(parts[0])
            .map_err(|e| CliError::Data(format!("{path}:{line_no}: {e}")))?;
        let section = parts[1].trim().to_owned();
        if section.is_empty() {
            return Err(CliError::Data(format!("{path}:{line_no}: empty rank_section")));
        }
        out.push((gamer, section));
    }
    Ok(out)
}
