use std::collections::HashMap;
use std::path::PathBuf;

use clap::Args;
use serde::{Deserialize, Serialize};
use skillpool::metrics::{best_f1_threshold, report};
use skillpool::model::Split;
use skillpool::upstream::{gamer_mean_scores, ScoreTable};

use crate::errors::CliError;
use crate::io;

use super::load_config;

#[derive(Args)]
pub struct EvaluateArgs {
    /// Upstream score table CSV (gamer,modality,datapoint,score).
    #[arg(long)]
    scores: PathBuf,
    /// Rank labels CSV (gamer,rank_a,split).
    #[arg(long)]
    ranks: PathBuf,
    /// Optional path for the JSON report; the text table always prints to
    /// stdout.
    #[arg(long)]
    json: Option<PathBuf>,
    /// JSON config file mirroring these flags; flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct EvaluateFileConfig {
    json: Option<PathBuf>,
}

#[derive(Serialize)]
struct ModalityReport {
    modality: String,
    threshold: f64,
    auc: f64,
    f1: f64,
    precision: Option<f64>,
    recall: f64,
    n_train: usize,
    n_validation: usize,
}

pub fn run(args: EvaluateArgs) -> Result<(), CliError> {
    let file: EvaluateFileConfig = load_config(args.config.as_deref())?;
    let scores_text = io::read_to_string(&args.scores)?;
    let table = ScoreTable::from_csv_str(&scores_text, &args.scores.display().to_string())
        .map_err(|e| CliError::Data(e.to_string()))?;
    let ranks_text = io::read_to_string(&args.ranks)?;
    let ranks = io::parse_ranks_csv(&ranks_text, &args.ranks.display().to_string())?;

    let mut label_of: HashMap<&str, (bool, Split)> = HashMap::new();
    for r in &ranks {
        if label_of.insert(r.gamer.as_str(), (r.rank_a, r.split)).is_some() {
            return Err(CliError::Data(format!(
                "duplicate rank label for gamer {:?}",
                r.gamer.as_str()
            )));
        }
    }

    let mut reports = Vec::new();
    for modality in table.modalities() {
        let means = gamer_mean_scores(&table, &modality)
            .map_err(|e| CliError::Data(e.to_string()))?;
        let mut train: (Vec<f64>, Vec<bool>) = (Vec::new(), Vec::new());
        let mut validation: (Vec<f64>, Vec<bool>) = (Vec::new(), Vec::new());
        for (gamer, mean) in &means {
            match label_of.get(gamer.as_str()) {
                Some((rank_a, Split::Train)) => {
                    train.0.push(*mean);
                    train.1.push(*rank_a);
                }
                Some((rank_a, Split::Validation)) => {
                    validation.0.push(*mean);
                    validation.1.push(*rank_a);
                }
                None => {}
            }
        }
        let single_class = |labels: &[bool]| {
            labels.iter().all(|&l| l) || labels.iter().all(|&l| !l)
        };
        if train.1.is_empty() || single_class(&train.1) {
            return Err(CliError::Data(format!(
                "modality {modality}: training split needs both classes to pick a threshold"
            )));
        }
        if validation.1.is_empty() || single_class(&validation.1) {
            return Err(CliError::Data(format!(
                "modality {modality}: validation split needs both classes"
            )));
        }
        let threshold = best_f1_threshold(&train.0, &train.1)
            .map_err(|e| CliError::Data(e.to_string()))?;
        let r = report(&validation.0, &validation.1, threshold)
            .map_err(|e| CliError::Data(e.to_string()))?;
        reports.push(ModalityReport {
            modality: modality.as_str().to_owned(),
            threshold,
            auc: r.auc,
            f1: r.f1,
            precision: r.precision,
            recall: r.recall,
            n_train: train.0.len(),
            n_validation: validation.0.len(),
        });
    }

    println!("{:<18} {:>7} {:>7} {:>7} {:>7}", "Modality", "AUC", "F1", "Prec.", "Recall");
    for r in &reports {
        let precision = match r.precision {
            Some(p) => format!("{p:.3}"),
            None => "n.a.".to_owned(),
        };
        println!(
            "{:<18} {:>7.3} {:>7.3} {:>7} {:>7.3}",
            r.modality, r.auc, r.f1, precision, r.recall
        );
    }

    if let Some(path) = args.json.or(file.json) {
        let body =
            serde_json::to_string_pretty(&reports).map_err(|e| CliError::Io(e.to_string()))?;
        io::write_atomic(&path, format!("{body}\n").as_bytes())?;
    }
    Ok(())
}
