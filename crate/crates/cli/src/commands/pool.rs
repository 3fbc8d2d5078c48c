use std::path::PathBuf;

use clap::Args;
use serde::Deserialize;
use skillpool::model::{HyperPriors, ParameterIndex, Parameterization};
use skillpool::posterior::{boxplot_csv_string, summarize_all};
use skillpool::sampler::{diagnose, diagnostics_to_json, run_chains_with, write_draws_csv, SamplerConfig};

use crate::errors::CliError;
use crate::io;

use super::{load_config, pick};

#[derive(Args)]
pub struct PoolArgs {
    /// Logit observations, one JSON object per line.
    #[arg(long)]
    logits: PathBuf,
    /// Rank labels CSV (gamer,rank_a,split).
    #[arg(long)]
    ranks: PathBuf,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    chains: Option<usize>,
    /// Total transitions per chain, warmup included.
    #[arg(long)]
    iterations: Option<usize>,
    #[arg(long)]
    warmup: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    target_accept: Option<f64>,
    #[arg(long)]
    max_treedepth: Option<u32>,
    #[arg(long)]
    init_radius: Option<f64>,
    #[arg(long)]
    mu_loc: Option<f64>,
    #[arg(long)]
    mu_scale: Option<f64>,
    #[arg(long)]
    sigma_scale: Option<f64>,
    #[arg(long)]
    tau_scale: Option<f64>,
    /// Exit 3 when any parameter's split R-hat exceeds this threshold.
    #[arg(long)]
    strict_rhat: Option<f64>,
    /// Sample the centered parameterization instead of the non-centered one.
    #[arg(long)]
    centered: bool,
    /// JSON config file mirroring these flags; flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct PoolFileConfig {
    chains: Option<usize>,
    iterations: Option<usize>,
    warmup: Option<usize>,
    seed: Option<u64>,
    target_accept: Option<f64>,
    max_treedepth: Option<u32>,
    init_radius: Option<f64>,
    mu_loc: Option<f64>,
    mu_scale: Option<f64>,
    sigma_scale: Option<f64>,
    tau_scale: Option<f64>,
    strict_rhat: Option<f64>,
    centered: Option<bool>,
}

pub fn run(args: PoolArgs) -> Result<(), CliError> {
    let file: PoolFileConfig = load_config(args.config.as_deref())?;

    let logits_text = io::read_to_string(&args.logits)?;
    let logits = io::parse_logits_jsonl(&logits_text, &args.logits.display().to_string())?;
    let ranks_text = io::read_to_string(&args.ranks)?;
    let ranks = io::parse_ranks_csv(&ranks_text, &args.ranks.display().to_string())?;
    let dataset = io::dataset_from_observations(logits, ranks)?;

    if dataset.validation_ranks().is_empty() {
        eprintln!("warning: no validation-split rank labels; the posterior is driven by logit evidence and priors alone");
    }

    let defaults = SamplerConfig::default();
    let sampler_config = SamplerConfig {
        chains: pick(args.chains, file.chains, defaults.chains),
        iterations: pick(args.iterations, file.iterations, defaults.iterations),
        warmup: pick(args.warmup, file.warmup, defaults.warmup),
        seed: pick(args.seed, file.seed, defaults.seed),
        target_accept: pick(args.target_accept, file.target_accept, defaults.target_accept),
        max_treedepth: pick(args.max_treedepth, file.max_treedepth, defaults.max_treedepth),
        init_radius: pick(args.init_radius, file.init_radius, defaults.init_radius),
    };
    sampler_config.validate().map_err(|e| CliError::Usage(e.to_string()))?;

    let priors = HyperPriors::new(
        pick(args.mu_loc, file.mu_loc, 0.0),
        pick(args.mu_scale, file.mu_scale, 2.5),
        pick(args.sigma_scale, file.sigma_scale, 1.0),
        pick(args.tau_scale, file.tau_scale, 1.0),
    )
    .map_err(|e| CliError::Usage(e.to_string()))?;

    let parameterization = if args.centered || file.centered.unwrap_or(false) {
        Parameterization::Centered
    } else {
        Parameterization::NonCentered
    };

    let draws = run_chains_with(&dataset, &priors, &sampler_config, parameterization)
        .map_err(|e| CliError::Data(e.to_string()))?;

    let index = ParameterIndex::for_dataset_with(&dataset, parameterization);
    let diagnostics = diagnose(&draws).map_err(|e| CliError::Data(e.to_string()))?;
    let summaries = summarize_all(&draws, &index, &dataset)
        .map_err(|e| CliError::Data(e.to_string()))?;

    for chain in 0..draws.n_chains() {
        let mut buffer = Vec::new();
        write_draws_csv(&mut buffer, &draws, chain)
            .map_err(|e| CliError::Io(e.to_string()))?;
        io::write_atomic(&args.out.join(format!("draws_chain{chain}.csv")), &buffer)?;
    }
    let diag_json = serde_json::to_string_pretty(&diagnostics_to_json(&diagnostics))
        .map_err(|e| CliError::Io(e.to_string()))?;
    io::write_atomic(&args.out.join("diagnostics.json"), format!("{diag_json}\n").as_bytes())?;
    let summary_json =
        serde_json::to_string_pretty(&summaries).map_err(|e| CliError::Io(e.to_string()))?;
    io::write_atomic(&args.out.join("summary.json"), format!("{summary_json}\n").as_bytes())?;
    io::write_atomic(
        &args.out.join("boxplot.csv"),
        boxplot_csv_string(&summaries, dataset.ranks()).as_bytes(),
    )?;

    let nan_params = diagnostics.parameters.iter().filter(|p| p.rhat.is_nan()).count();
    if nan_params > 0 {
        eprintln!("warning: {nan_params} parameters have zero within-chain variance; their R-hat is undefined");
    }
    eprintln!(
        "pooled {} draws across {} chains; max R-hat {:.4}, {} divergences",
        draws.total_draws(),
        draws.n_chains(),
        diagnostics.max_rhat().unwrap_or(f64::NAN),
        diagnostics.total_divergences
    );

    if let Some(threshold) = args.strict_rhat.or(file.strict_rhat) {
        let worst = diagnostics.max_rhat().unwrap_or(f64::INFINITY);
        if worst > threshold {
            return Err(CliError::NonConvergence(format!(
                "max R-hat {worst:.4} exceeds --strict-rhat {threshold}"
            )));
        }
    }
    Ok(())
}
