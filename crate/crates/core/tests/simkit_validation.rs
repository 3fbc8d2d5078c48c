//! The simulation kit's cross-checks: sampler versus deterministic oracle,
//! and signal recovery on synthetic data.

use skillpool::math::mean;
use skillpool::metrics::roc_auc;
use skillpool::model::{HyperPriors, ParameterIndex, Split};
use skillpool::posterior::skill_draws;
use skillpool::sampler::{run_chains, sample_chains, SamplerConfig};
use skillpool::simkit::{grid_posterior_oracle, simulate, FixedHyperModel, ObservationPlan, TruthConfig};

#[test]
fn sampler_matches_grid_oracle_on_tiny_model() {
    let model = FixedHyperModel {
        prior_mean: 0.4,
        prior_scale: 1.2,
        noise_scale: 0.9,
        logits: vec![1.3, 0.8, 1.9, 0.2],
        rank: Some(true),
    };
    let (oracle_mean, oracle_sd) = grid_posterior_oracle(
        model.prior_mean,
        model.prior_scale,
        model.noise_scale,
        &model.logits,
        model.rank,
        20_001,
    )
    .unwrap();

    let config = SamplerConfig {
        chains: 4,
        iterations: 4000,
        warmup: 1000,
        seed: 99,
        ..SamplerConfig::default()
    };
    let draws = sample_chains(&model, &config, vec!["z".into()]).unwrap();
    let effects: Vec<f64> =
        draws.pooled_column(0).iter().map(|&z| model.effect_from_z(z)).collect();
    let mcmc_mean = mean(&effects);
    let mcmc_sd = skillpool::math::sample_sd(&effects);

    assert!(
        (mcmc_mean - oracle_mean).abs() <= 0.02 * oracle_mean.abs().max(oracle_sd),
        "mean: mcmc {mcmc_mean} vs oracle {oracle_mean}"
    );
    assert!(
        (mcmc_sd - oracle_sd).abs() <= 0.02 * oracle_sd,
        "sd: mcmc {mcmc_sd} vs oracle {oracle_sd}"
    );
}

#[test]
fn posterior_skill_discriminates_simulated_ranks() {
    // Strong per-gamer signal by construction; posterior mean skill must
    // rank held-out gamers far better than noise does.
    let truth = TruthConfig::uniform(60, 2, ObservationPlan::Fixed(6), 0.4, 0.0, 1.5, 0.8, 14);
    let (dataset, _) = simulate(&truth).unwrap();
    let priors = HyperPriors::default();
    let config = SamplerConfig {
        chains: 2,
        iterations: 1200,
        warmup: 600,
        seed: 5,
        ..SamplerConfig::default()
    };
    let draws = run_chains(&dataset, &priors, &config).unwrap();
    let index = ParameterIndex::for_dataset(&dataset);

    // Held-out = train-split gamers: their rank labels never entered the
    // posterior.
    let mut scores = Vec::new();
    let mut labels = Vec::new();
    for r in dataset.ranks().iter().filter(|r| r.split == Split::Train) {
        let skills = skill_draws(&draws, &index, &dataset, &r.gamer).unwrap();
        scores.push(mean(&skills));
        labels.push(r.rank_a);
    }
    assert!(labels.iter().any(|&l| l) && labels.iter().any(|&l| !l));
    let auc = roc_auc(&scores, &labels).unwrap();

    // Noise baseline on the same labels, averaged over independent draws so
    // one lucky shuffle cannot mask the comparison.
    use rand::prelude::*;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
    let mut random_auc = 0.0;
    let baseline_draws = 50;
    for _ in 0..baseline_draws {
        let random_scores: Vec<f64> = labels.iter().map(|_| rng.random::<f64>()).collect();
        random_auc += roc_auc(&random_scores, &labels).unwrap();
    }
    random_auc /= baseline_draws as f64;

    assert!(
        auc >= random_auc + 0.2,
        "posterior AUC {auc} does not clear noise AUC {random_auc} by 0.2"
    );
}
