//! Convergence diagnostics: split R-hat and autocorrelation-based effective
//! sample size with Geyer initial-monotone-sequence truncation.

use serde::Serialize;

use super::{MultiChainDraws, SamplerError};

/// Split R-hat for one parameter. Each chain is halved; with `B` the
/// between-half-chain variance (n * variance of half-chain means) and `W`
/// the mean within-half-chain variance, R-hat is
/// `sqrt(((n-1)/n * W + B/n) / W)` for half-chain length n.
///
/// Returns a NaN sentinel (not an error) when the within-chain variance is
/// zero, e.g. for constant chains.
pub fn rhat(draws: &MultiChainDraws, param: usize) -> Result<f64, SamplerError> {
    check_preconditions(draws, param)?;
    let mut halves: Vec<Vec<f64>> = Vec::with_capacity(2 * draws.n_chains());
    for chain in 0..draws.n_chains() {
        let column = draws.chain_column(chain, param);
        let half = column.len() / 2;
        halves.push(column[..half].to_vec());
        halves.push(column[column.len() - half..].to_vec());
    }
    let n = halves[0].len() as f64;
    let m = halves.len() as f64;
    let means: Vec<f64> = halves.iter().map(|h| crate::math::mean(h)).collect();
    let grand = crate::math::mean(&means);
    let between =
        n * means.iter().map(|x| (x - grand) * (x - grand)).sum::<f64>() / (m - 1.0);
    let within = halves.iter().map(|h| crate::math::sample_variance(h)).sum::<f64>() / m;
    if within <= 1e-300 {
        return Ok(f64::NAN);
    }
    let var_plus = (n - 1.0) / n * within + between / n;
    Ok((var_plus / within).sqrt())
}

/// Effective sample size for one parameter, combined across chains. Computes
/// lag autocovariances per chain, pools them against the cross-chain variance
/// estimate, sums paired autocorrelations while positive (Geyer's initial
/// positive sequence) with the monotone correction, and divides the total
/// draw count by the integrated autocorrelation time.
///
/// Returns NaN for zero-variance draws.
pub fn ess(draws: &MultiChainDraws, param: usize) -> Result<f64, SamplerError> {
    check_preconditions(draws, param)?;
    let columns: Vec<Vec<f64>> =
        (0..draws.n_chains()).map(|c| draws.chain_column(c, param)).collect();
    let n = columns[0].len();
    let m = columns.len() as f64;
    let means: Vec<f64> = columns.iter().map(|c| crate::math::mean(c)).collect();

    // Biased (1/n) autocovariances, computed lazily per lag.
    let acov = |lag: usize| -> f64 {
        let mut total = 0.0;
        for (col, mu) in columns.iter().zip(&means) {
            let mut s = 0.0;
            for i in 0..n - lag {
                s += (col[i] - mu) * (col[i + lag] - mu);
            }
            total += s / n as f64;
        }
        total / m
    };

    let var0 = acov(0);
    if var0 <= 1e-300 {
        return Ok(f64::NAN);
    }
    let within = var0 * n as f64 / (n as f64 - 1.0);
    let grand = crate::math::mean(&means);
    let between_over_n = if columns.len() > 1 {
        means.iter().map(|x| (x - grand) * (x - grand)).sum::<f64>() / (m - 1.0)
    } else {
        0.0
    };
    let var_plus = within * (n as f64 - 1.0) / n as f64 + between_over_n;

    let rho = |lag: usize| 1.0 - (within - acov(lag)) / var_plus;

    // Geyer pairs: sum rho(2k) + rho(2k+1) while positive, enforcing
    // monotone non-increase.
    let mut tau = -1.0;
    let mut prev_pair = f64::INFINITY;
    let mut lag = 0usize;
    while lag + 1 < n {
        let pair = rho(lag) + rho(lag + 1);
        if pair <= 0.0 {
            break;
        }
        let pair = pair.min(prev_pair);
        prev_pair = pair;
        tau += 2.0 * pair;
        lag += 2;
    }
    let total = (n * columns.len()) as f64;
    Ok((total / tau.max(1.0 / total)).min(total * 10.0))
}

#[derive(Debug, Clone, Serialize)]
pub struct ParamDiagnostic {
    pub name: String,
    pub rhat: f64,
    pub ess: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Diagnostics {
    pub parameters: Vec<ParamDiagnostic>,
    pub total_divergences: u64,
    pub step_sizes: Vec<f64>,
}

impl Diagnostics {
    pub fn max_rhat(&self) -> Option<f64> {
        self.parameters
            .iter()
            .map(|p| p.rhat)
            .filter(|r| r.is_finite())
            .fold(None, |acc, r| Some(acc.map_or(r, |a: f64| a.max(r))))
    }
}

/// Computes split R-hat and ESS for every parameter.
pub fn diagnose(draws: &MultiChainDraws) -> Result<Diagnostics, SamplerError> {
    let mut parameters = Vec::with_capacity(draws.dim);
    for param in 0..draws.dim {
        parameters.push(ParamDiagnostic {
            name: draws.param_names[param].clone(),
            rhat: rhat(draws, param)?,
            ess: ess(draws, param)?,
        });
    }
    Ok(Diagnostics {
        parameters,
        total_divergences: draws.total_divergences(),
        step_sizes: draws.chains.iter().map(|c| c.step_size).collect(),
    })
}

fn check_preconditions(draws: &MultiChainDraws, param: usize) -> Result<(), SamplerError> {
    if param >= draws.dim {
        return Err(SamplerError::ParameterOutOfRange { index: param, dim: draws.dim });
    }
    let min_draws = draws.chains.iter().map(|c| c.n_draws).min().unwrap_or(0);
    if draws.n_chains() < 2 || min_draws < 4 {
        return Err(SamplerError::NotEnoughDraws {
            chains: draws.n_chains(),
            draws: min_draws,
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::super::run::ChainRun;
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn draws_from_columns(columns: Vec<Vec<f64>>) -> MultiChainDraws {
        let chains = columns
            .into_iter()
            .map(|col| ChainRun {
                n_draws: col.len(),
                draws: col,
                divergences: 0,
                tree_depths: vec![],
                accept_stats: vec![],
                step_size: 0.5,
            })
            .collect();
        MultiChainDraws { dim: 1, param_names: vec!["x".into()], chains }
    }

    #[test]
    fn converged_chains_have_rhat_near_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let columns: Vec<Vec<f64>> = (0..2)
            .map(|_| (0..10_000).map(|_| rng.sample::<f64, _>(StandardNormal)).collect())
            .collect();
        let d = draws_from_columns(columns);
        let r = rhat(&d, 0).unwrap();
        assert!((0.999..=1.01).contains(&r), "rhat {r}");
    }

    #[test]
    fn separated_chains_have_large_rhat() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let near: Vec<f64> = (0..500).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let far: Vec<f64> =
            (0..500).map(|_| 10.0 + rng.sample::<f64, _>(StandardNormal)).collect();
        let d = draws_from_columns(vec![near, far]);
        assert!(rhat(&d, 0).unwrap() > 3.0);
    }

    #[test]
    fn constant_chains_yield_nan_sentinel() {
        let d = draws_from_columns(vec![vec![2.0; 100], vec![2.0; 100]]);
        assert!(rhat(&d, 0).unwrap().is_nan());
        assert!(ess(&d, 0).unwrap().is_nan());
    }

    #[test]
    fn iid_draws_have_ess_near_total() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let columns: Vec<Vec<f64>> = (0..2)
            .map(|_| (0..2000).map(|_| rng.sample::<f64, _>(StandardNormal)).collect())
            .collect();
        let d = draws_from_columns(columns);
        let e = ess(&d, 0).unwrap();
        assert!((3200.0..=4800.0).contains(&e), "ess {e}");
    }

    #[test]
    fn ar1_draws_match_analytic_ess() {
        let rho = 0.9;
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut make_chain = |n: usize| {
            let mut x = 0.0;
            let mut out = Vec::with_capacity(n);
            for _ in 0..n {
                let z: f64 = rng.sample(StandardNormal);
                x = rho * x + (1.0f64 - rho * rho).sqrt() * z;
                out.push(x);
            }
            out
        };
        let n = 5000;
        let d = draws_from_columns(vec![make_chain(n), make_chain(n)]);
        let e = ess(&d, 0).unwrap();
        let expected = 2.0 * n as f64 * (1.0 - rho) / (1.0 + rho);
        assert!(
            e > expected / 1.5 && e < expected * 1.5,
            "ess {e}, analytic {expected}"
        );
    }

    #[test]
    fn preconditions_are_enforced() {
        let d = draws_from_columns(vec![vec![1.0, 2.0, 3.0, 4.0]]);
        assert!(matches!(rhat(&d, 0), Err(SamplerError::NotEnoughDraws { .. })));
        let d2 = draws_from_columns(vec![vec![1.0; 8], vec![1.0; 8]]);
        assert!(matches!(rhat(&d2, 3), Err(SamplerError::ParameterOutOfRange { .. })));
    }
}
