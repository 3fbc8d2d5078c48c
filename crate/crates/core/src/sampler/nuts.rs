//! One No-U-Turn transition: doubling tree construction with multinomial
//! sampling among trajectory states, a momentum-sum U-turn criterion, and
//! divergence detection on the energy error.

use rand::Rng;
use rand_distr::StandardNormal;

use super::leapfrog::{kinetic, leapfrog};
use super::run::ChainState;
use super::{LogDensityGradient, SamplerError};

/// Energy error above which a trajectory is declared divergent.
const DIVERGENCE_THRESHOLD: f64 = 1000.0;

/// Per-transition statistics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransitionStats {
    /// Number of subtree extensions performed (0-depth extension counts as 1).
    pub depth: u32,
    /// Total leapfrog steps taken.
    pub n_leapfrog: u32,
    pub divergent: bool,
    /// Mean Metropolis acceptance statistic over all visited states.
    pub accept_stat: f64,
}

#[derive(Clone)]
struct PhasePoint {
    position: Vec<f64>,
    momentum: Vec<f64>,
    grad: Vec<f64>,
}

struct Subtree {
    /// Endpoint nearest the existing tree, in integration order.
    begin: PhasePoint,
    /// Endpoint farthest from the existing tree.
    end: PhasePoint,
    proposal: Vec<f64>,
    log_sum_weight: f64,
    momentum_sum: Vec<f64>,
}

struct BuildResult {
    subtree: Option<Subtree>,
    divergent: bool,
    accept_sum: f64,
    n_leaf: u32,
}

fn no_uturn(rho: &[f64], p_begin: &[f64], p_end: &[f64], inv_mass: &[f64]) -> bool {
    let mut dot_begin = 0.0;
    let mut dot_end = 0.0;
    for j in 0..rho.len() {
        dot_begin += rho[j] * inv_mass[j] * p_begin[j];
        dot_end += rho[j] * inv_mass[j] * p_end[j];
    }
    dot_begin > 0.0 && dot_end > 0.0
}

#[allow(clippy::too_many_arguments)]
fn build_subtree<T: LogDensityGradient + ?Sized, R: Rng>(
    target: &T,
    rng: &mut R,
    depth: u32,
    direction: f64,
    start: &PhasePoint,
    energy0: f64,
    step_size: f64,
    inv_mass: &[f64],
) -> BuildResult {
    if depth == 0 {
        let mut point = start.clone();
        let logp = leapfrog(
            target,
            &mut point.position,
            &mut point.momentum,
            &mut point.grad,
            direction * step_size,
            inv_mass,
        );
        let delta_energy = match logp {
            Some(lp) => -lp + kinetic(&point.momentum, inv_mass) - energy0,
            None => f64::INFINITY,
        };
        if !(delta_energy <= DIVERGENCE_THRESHOLD) {
            return BuildResult { subtree: None, divergent: true, accept_sum: 0.0, n_leaf: 1 };
        }
        let accept = (-delta_energy).min(0.0).exp();
        let proposal = point.position.clone();
        let momentum_sum = point.momentum.clone();
        return BuildResult {
            subtree: Some(Subtree {
                begin: point.clone(),
                end: point,
                proposal,
                log_sum_weight: -delta_energy,
                momentum_sum,
            }),
            divergent: false,
            accept_sum: accept,
            n_leaf: 1,
        };
    }

    let first =
        build_subtree(target, rng, depth - 1, direction, start, energy0, step_size, inv_mass);
    let Some(near) = first.subtree else {
        return first;
    };
    let second = build_subtree(
        target,
        rng,
        depth - 1,
        direction,
        &near.end,
        energy0,
        step_size,
        inv_mass,
    );
    let accept_sum = first.accept_sum + second.accept_sum;
    let n_leaf = first.n_leaf + second.n_leaf;
    let Some(far) = second.subtree else {
        return BuildResult { subtree: None, divergent: second.divergent, accept_sum, n_leaf };
    };

    // Unbiased multinomial choice between the two halves.
    let log_sum_weight = crate::math::log_add_exp(near.log_sum_weight, far.log_sum_weight);
    let u: f64 = rng.random();
    let proposal = if u.ln() < far.log_sum_weight - log_sum_weight {
        far.proposal
    } else {
        near.proposal
    };
    let momentum_sum: Vec<f64> =
        near.momentum_sum.iter().zip(&far.momentum_sum).map(|(a, b)| a + b).collect();
    if !no_uturn(&momentum_sum, &near.begin.momentum, &far.end.momentum, inv_mass) {
        return BuildResult { subtree: None, divergent: false, accept_sum, n_leaf };
    }
    BuildResult {
        subtree: Some(Subtree {
            begin: near.begin,
            end: far.end,
            proposal,
            log_sum_weight,
            momentum_sum,
        }),
        divergent: false,
        accept_sum,
        n_leaf,
    }
}

/// Advances the chain by one No-U-Turn transition. Subtrees double in size
/// until a U-turn, a divergence, or the depth cap; the first extension is
/// always attempted, so `max_treedepth = 0` degenerates to a single
/// leapfrog step with a Metropolis accept/reject.
pub fn nuts_transition<T: LogDensityGradient + ?Sized>(
    state: &mut ChainState,
    target: &T,
    max_treedepth: u32,
) -> Result<TransitionStats, SamplerError> {
    let dim = state.position.len();
    let mut grad = vec![0.0; dim];
    let logp0 =
        target.logp_grad(&state.position, &mut grad).ok_or(SamplerError::NonFiniteStart)?;

    let momentum: Vec<f64> = (0..dim)
        .map(|j| {
            let z: f64 = state.rng.sample(StandardNormal);
            z / state.inverse_mass_diag[j].sqrt()
        })
        .collect();
    let energy0 = -logp0 + kinetic(&momentum, &state.inverse_mass_diag);

    let origin = PhasePoint { position: state.position.clone(), momentum, grad };
    let mut left = origin.clone();
    let mut right = origin.clone();
    let mut rho = origin.momentum.clone();
    let mut proposal = origin.position;
    let mut log_sum_weight = 0.0;
    let mut accept_sum = 0.0;
    let mut n_leaf = 0u32;
    let mut divergent = false;
    let mut depth = 0u32;

    loop {
        let go_right: bool = state.rng.random();
        let (direction, from) = if go_right { (1.0, &right) } else { (-1.0, &left) };
        let result = build_subtree(
            target,
            &mut state.rng,
            depth,
            direction,
            from,
            energy0,
            state.step_size,
            &state.inverse_mass_diag,
        );
        accept_sum += result.accept_sum;
        n_leaf += result.n_leaf;
        let Some(sub) = result.subtree else {
            divergent |= result.divergent;
            break;
        };

        // Biased progressive sampling: always move into a heavier new
        // subtree, otherwise accept it with probability w_new / w_old.
        let u: f64 = state.rng.random();
        if sub.log_sum_weight >= log_sum_weight
            || u < (sub.log_sum_weight - log_sum_weight).exp()
        {
            proposal = sub.proposal.clone();
        }
        log_sum_weight = crate::math::log_add_exp(log_sum_weight, sub.log_sum_weight);
        for (r, p) in rho.iter_mut().zip(&sub.momentum_sum) {
            *r += p;
        }
        if go_right {
            right = sub.end;
        } else {
            left = sub.end;
        }
        depth += 1;
        if !no_uturn(&rho, &left.momentum, &right.momentum, &state.inverse_mass_diag) {
            break;
        }
        if depth > max_treedepth {
            break;
        }
    }

    state.position = proposal;
    let accept_stat = if n_leaf > 0 { accept_sum / n_leaf as f64 } else { 0.0 };
    Ok(TransitionStats { depth, n_leapfrog: n_leaf, divergent, accept_stat })
}

#[cfg(test)]
mod tests {
    use super::super::target::DiagonalGaussian;
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn fresh_state(dim: usize, step: f64, seed: u64) -> ChainState {
        ChainState {
            position: vec![0.5; dim],
            step_size: step,
            inverse_mass_diag: vec![1.0; dim],
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    #[test]
    fn standard_gaussian_moments() {
        // 1-D standard Gaussian at a near-optimal fixed step size.
        let target = DiagonalGaussian::standard(1);
        let mut state = fresh_state(1, 0.9, 42);
        let mut values = Vec::with_capacity(10_000);
        for _ in 0..500 {
            nuts_transition(&mut state, &target, 10).unwrap();
        }
        for _ in 0..10_000 {
            nuts_transition(&mut state, &target, 10).unwrap();
            values.push(state.position[0]);
        }
        let mean = crate::math::mean(&values);
        let var = crate::math::sample_variance(&values);
        assert!(mean.abs() < 0.05, "mean {mean}");
        assert!((var - 1.0).abs() < 0.07, "variance {var}");
    }

    #[test]
    fn treedepth_zero_is_single_step_accept_reject() {
        let target = DiagonalGaussian::standard(3);
        let mut state = fresh_state(3, 0.5, 7);
        for _ in 0..50 {
            let stats = nuts_transition(&mut state, &target, 0).unwrap();
            assert_eq!(stats.n_leapfrog, 1);
            assert_eq!(stats.depth, 1);
        }
    }

    #[test]
    fn no_divergences_on_well_conditioned_target() {
        let target = DiagonalGaussian::standard(2);
        let mut state = fresh_state(2, 0.7, 3);
        let mut divergences = 0u32;
        for _ in 0..10_000 {
            let stats = nuts_transition(&mut state, &target, 10).unwrap();
            if stats.divergent {
                divergences += 1;
            }
        }
        assert!(divergences <= 2, "{divergences} divergences");
    }

    #[test]
    fn non_finite_start_is_a_hard_error() {
        let target = DiagonalGaussian::standard(1);
        let mut state = fresh_state(1, 0.5, 1);
        state.position[0] = f64::INFINITY;
        assert!(matches!(
            nuts_transition(&mut state, &target, 10),
            Err(SamplerError::NonFiniteStart)
        ));
    }
}
