use std::path::PathBuf;

use clap::Args;
use serde::Deserialize;
use skillpool::simkit::{simulate, ObservationPlan, TruthConfig};

use crate::errors::CliError;
use crate::io;

use super::{load_config, pick};

#[derive(Args)]
pub struct SimulateArgs {
    /// Output directory for logits.jsonl, ranks.csv, truth.json.
    #[arg(long)]
    out: PathBuf,
    /// Number of gamers.
    #[arg(long)]
    gamers: Option<usize>,
    /// Number of evidence modalities.
    #[arg(long)]
    modalities: Option<usize>,
    /// Fixed logit observations per (gamer, modality) pair. Without this the
    /// simulator uses uneven coverage that leaves some pairs empty.
    #[arg(long, conflicts_with = "uneven_base")]
    logits_per_pair: Option<usize>,
    /// Base observation count for the uneven-coverage plan.
    #[arg(long)]
    uneven_base: Option<usize>,
    /// Fraction of gamers whose rank labels go to the validation split.
    #[arg(long)]
    validation_fraction: Option<f64>,
    /// Per-modality effect means, comma-separated; a single value broadcasts.
    #[arg(long)]
    mu: Option<String>,
    /// Per-modality effect scales, comma-separated; a single value broadcasts.
    #[arg(long)]
    sigma: Option<String>,
    /// Per-modality observation noise scales, comma-separated.
    #[arg(long)]
    tau: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// JSON config file mirroring these flags; flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct SimulateFileConfig {
    gamers: Option<usize>,
    modalities: Option<usize>,
    logits_per_pair: Option<usize>,
    uneven_base: Option<usize>,
    validation_fraction: Option<f64>,
    mu: Option<String>,
    sigma: Option<String>,
    tau: Option<String>,
    seed: Option<u64>,
}

fn parse_broadcast(spec: &str, len: usize, flag: &str) -> Result<Vec<f64>, CliError> {
    let parts: Result<Vec<f64>, _> = spec.split(',').map(|p| p.trim().parse::<f64>()).collect();
    let values =
        parts.map_err(|e| CliError::Usage(format!("--{flag}: bad number in {spec:?}: {e}")))?;
    if values.len() == 1 {
        return Ok(vec![values[0]; len]);
    }
    if values.len() != len {
        return Err(CliError::Usage(format!(
            "--{flag}: expected 1 or {len} values, got {}",
            values.len()
        )));
    }
    Ok(values)
}

pub fn run(args: SimulateArgs) -> Result<(), CliError> {
    let file: SimulateFileConfig = load_config(args.config.as_deref())?;
    let n_gamers = pick(args.gamers, file.gamers, 20);
    let n_modalities = pick(args.modalities, file.modalities, 3);
    if n_gamers == 0 {
        return Err(CliError::Data("--gamers must be >= 1".into()));
    }
    if n_modalities == 0 {
        return Err(CliError::Data("--modalities must be >= 1".into()));
    }

    let plan = match (args.logits_per_pair.or(file.logits_per_pair), args.uneven_base.or(file.uneven_base)) {
        (Some(fixed), None) => ObservationPlan::Fixed(fixed),
        (None, Some(base)) => ObservationPlan::Uneven { base },
        (None, None) => ObservationPlan::default(),
        (Some(_), Some(_)) => {
            return Err(CliError::Usage(
                "--logits-per-pair and --uneven-base are mutually exclusive".into(),
            ))
        }
    };

    let mu_spec = pick(args.mu, file.mu, "0.0".to_owned());
    let sigma_spec = pick(args.sigma, file.sigma, "1.0".to_owned());
    let tau_spec = pick(args.tau, file.tau, "1.0".to_owned());
    let config = TruthConfig {
        n_gamers,
        n_modalities,
        plan,
        validation_fraction: pick(args.validation_fraction, file.validation_fraction, 0.25),
        modality_mean: parse_broadcast(&mu_spec, n_modalities, "mu")?,
        modality_scale: parse_broadcast(&sigma_spec, n_modalities, "sigma")?,
        noise_scale: parse_broadcast(&tau_spec, n_modalities, "tau")?,
        seed: pick(args.seed, file.seed, 0),
    };

    let (dataset, truth) = simulate(&config).map_err(|e| CliError::Data(e.to_string()))?;

    io::write_atomic(&args.out.join("logits.jsonl"), io::logits_to_jsonl(dataset.logits()).as_bytes())?;
    io::write_atomic(&args.out.join("ranks.csv"), io::ranks_to_csv(dataset.ranks()).as_bytes())?;
    let truth_json =
        serde_json::to_string_pretty(&truth).map_err(|e| CliError::Io(e.to_string()))?;
    io::write_atomic(&args.out.join("truth.json"), format!("{truth_json}\n").as_bytes())?;

    eprintln!(
        "simulated {} gamers x {} modalities: {} logit observations, {} rank labels",
        n_gamers,
        n_modalities,
        dataset.logits().len(),
        dataset.ranks().len()
    );
    Ok(())
}
