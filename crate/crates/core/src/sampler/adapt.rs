//! Warmup adaptation: dual-averaging step-size tuning and windowed diagonal
//! mass-matrix estimation.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::math::RunningMoments;

use super::leapfrog::{kinetic, leapfrog};
use super::nuts::nuts_transition;
use super::run::ChainState;
use super::{LogDensityGradient, SamplerConfig, SamplerError};

/// Nesterov dual averaging of the log step size toward a target acceptance
/// statistic, with the standard constants gamma = 0.05, t0 = 10, kappa = 0.75.
#[derive(Debug, Clone)]
pub struct DualAveraging {
    mu: f64,
    log_step: f64,
    log_step_avg: f64,
    h_bar: f64,
    accept_sum: f64,
    count: u64,
    target_accept: f64,
}

const GAMMA: f64 = 0.05;
const T0: f64 = 10.0;
const KAPPA: f64 = 0.75;

impl DualAveraging {
    pub fn new(initial_step: f64, target_accept: f64) -> Self {
        // Shrinkage anchor at the initial step itself. The classical 10x
        // anchor fires a large upward step-size excursion whose rejected
        // transitions dominate the averaged statistic for hundreds of
        // iterations, leaving the averaged step biased low on short windows.
        Self {
            mu: initial_step.ln(),
            log_step: initial_step.ln(),
            log_step_avg: 0.0,
            h_bar: 0.0,
            accept_sum: 0.0,
            count: 0,
            target_accept,
        }
    }

    /// Feeds one acceptance statistic and returns the step size to use for
    /// the next transition. The statistic is smoothed with the running window
    /// mean before entering the averaging recursion; the raw per-transition
    /// feedback drives a limit cycle in the step size on windows of a few
    /// hundred iterations, which leaves the averaged step biased small.
    pub fn update(&mut self, accept_stat: f64) -> f64 {
        self.count += 1;
        self.accept_sum += accept_stat;
        let m = self.count as f64;
        let smoothed = 0.5 * (accept_stat + self.accept_sum / m);
        let eta_h = 1.0 / (m + T0);
        self.h_bar = (1.0 - eta_h) * self.h_bar + eta_h * (self.target_accept - smoothed);
        self.log_step = self.mu - m.sqrt() / GAMMA * self.h_bar;
        let eta = m.powf(-KAPPA);
        self.log_step_avg = eta * self.log_step + (1.0 - eta) * self.log_step_avg;
        self.log_step.exp()
    }

    /// The averaged step size, used after warmup ends.
    pub fn adapted_step(&self) -> f64 {
        self.log_step_avg.exp()
    }
}

/// Doubling-window schedule for mass-matrix re-estimation, scaled down for
/// short warmups: an initial step-size-only buffer, doubling covariance
/// windows, and a final step-size-only buffer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub(super) struct WarmupSchedule {
    pub init_end: usize,
    pub term_start: usize,
    pub window_ends: Vec<usize>,
}

pub(super) fn warmup_schedule(warmup: usize) -> WarmupSchedule {
    let (init, term, base) = if warmup >= 150 {
        (75, 50, 25)
    } else {
        let init = (warmup * 15 / 100).max(1);
        let term = (warmup / 10).max(1);
        (init, term, warmup.saturating_sub(init + term).max(1))
    };
    let slow_end = warmup - term;
    let mut window_ends = Vec::new();
    let mut pos = init;
    let mut size = base;
    while pos < slow_end {
        let mut end = pos + size;
        // The last window absorbs what would remain of the slow phase.
        if end + 2 * size > slow_end {
            end = slow_end;
        }
        window_ends.push(end);
        pos = end;
        size *= 2;
    }
    WarmupSchedule { init_end: init, term_start: slow_end, window_ends }
}

/// Heuristic search for a starting step size: doubles or halves until the
/// one-step acceptance probability crosses 1/2.
pub fn find_reasonable_step<T: LogDensityGradient + ?Sized, R: Rng>(
    target: &T,
    position: &[f64],
    inv_mass: &[f64],
    rng: &mut R,
) -> Result<f64, SamplerError> {
    let dim = position.len();
    let mut grad0 = vec![0.0; dim];
    let logp0 = target.logp_grad(position, &mut grad0).ok_or(SamplerError::NonFiniteStart)?;
    let momentum0: Vec<f64> = (0..dim)
        .map(|j| {
            let z: f64 = rng.sample(StandardNormal);
            z / inv_mass[j].sqrt()
        })
        .collect();
    let energy0 = -logp0 + kinetic(&momentum0, inv_mass);

    let mut step = 1.0;
    let log_accept = |step: f64| -> f64 {
        let mut q = position.to_vec();
        let mut p = momentum0.clone();
        let mut g = grad0.clone();
        match leapfrog(target, &mut q, &mut p, &mut g, step, inv_mass) {
            Some(lp) => energy0 - (-lp + kinetic(&p, inv_mass)),
            None => f64::NEG_INFINITY,
        }
    };

    let mut la = log_accept(step);
    let mut shrink_guard = 0;
    while !la.is_finite() {
        step *= 0.5;
        la = log_accept(step);
        shrink_guard += 1;
        if shrink_guard > 60 {
            return Err(SamplerError::NonFiniteStart);
        }
    }

    // Double while the acceptance ratio stays above 1/2, or halve while it
    // stays below, until the ratio crosses 1/2.
    let ln_half = 0.5f64.ln();
    let direction: f64 = if la > ln_half { 1.0 } else { -1.0 };
    for _ in 0..100 {
        if direction * (la - ln_half) <= 0.0 {
            break;
        }
        step *= 2f64.powf(direction);
        if !(1e-10..=1e10).contains(&step) {
            break;
        }
        la = log_accept(step);
        if !la.is_finite() {
            step *= 0.5;
            break;
        }
    }
    Ok(step.clamp(1e-10, 1e10))
}

/// Runs the warmup phase in place: dual averaging throughout, covariance
/// collection inside the slow windows, and a mass-matrix update plus
/// step-size re-initialization at every window end. On return the chain
/// carries the averaged step size and the final mass matrix.
pub fn adapt_warmup<T: LogDensityGradient + ?Sized>(
    state: &mut ChainState,
    target: &T,
    config: &SamplerConfig,
) -> Result<(), SamplerError> {
    config.validate()?;
    let schedule = warmup_schedule(config.warmup);
    let dim = state.position.len();
    let mut averaging = DualAveraging::new(state.step_size, config.target_accept);
    let mut moments = RunningMoments::new(dim);
    let mut next_window = 0usize;
    let mut any_finished = false;

    for iter in 0..config.warmup {
        let stats = nuts_transition(state, target, config.max_treedepth)?;
        if !stats.divergent {
            any_finished = true;
        }
        state.step_size = averaging.update(stats.accept_stat);

        let in_slow = iter >= schedule.init_end && iter < schedule.term_start;
        if in_slow {
            moments.push(&state.position);
        }
        if schedule.window_ends.get(next_window) == Some(&(iter + 1)) {
            next_window += 1;
            if moments.count() >= 2 {
                let count = moments.count() as f64;
                let shrink = count / (count + 5.0);
                state.inverse_mass_diag = moments
                    .variance()
                    .iter()
                    .map(|v| (shrink * v + 1e-3 * (1.0 - shrink)).max(1e-10))
                    .collect();
            }
            moments.reset();
            // Restart the averaging anchored at the step already adapted;
            // a cold restart's transient cannot be absorbed by the shorter
            // late windows, and the refined metric rarely moves the usable
            // step by much.
            state.step_size = averaging.adapted_step().clamp(1e-10, 1e10);
            averaging = DualAveraging::new(state.step_size, config.target_accept);
        }
    }

    if !any_finished {
        return Err(SamplerError::AllDivergentWarmup { chain: usize::MAX });
    }
    state.step_size = averaging.adapted_step();
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::super::target::DiagonalGaussian;
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn schedule_matches_doubling_pattern() {
        let s = warmup_schedule(1000);
        assert_eq!(s.init_end, 75);
        assert_eq!(s.term_start, 950);
        assert_eq!(s.window_ends, vec![100, 150, 250, 450, 950]);

        let tiny = warmup_schedule(40);
        assert_eq!(tiny.init_end, 6);
        assert_eq!(tiny.term_start, 36);
        assert_eq!(tiny.window_ends, vec![36]);
    }

    #[test]
    fn mass_matrix_recovers_marginal_variances() {
        let target = DiagonalGaussian { mean: vec![0.0, 0.0], sd: vec![1.0, 10.0] };
        let mut state = ChainState {
            position: vec![0.1, 0.1],
            step_size: 1.0,
            inverse_mass_diag: vec![1.0, 1.0],
            rng: ChaCha8Rng::seed_from_u64(99),
        };
        let config = SamplerConfig {
            chains: 1,
            iterations: 1001,
            warmup: 1000,
            seed: 99,
            ..SamplerConfig::default()
        };
        adapt_warmup(&mut state, &target, &config).unwrap();
        assert!(
            state.inverse_mass_diag[0] > 0.5 && state.inverse_mass_diag[0] < 2.0,
            "unit-variance coordinate adapted to {}",
            state.inverse_mass_diag[0]
        );
        assert!(
            state.inverse_mass_diag[1] > 50.0 && state.inverse_mass_diag[1] < 200.0,
            "variance-100 coordinate adapted to {}",
            state.inverse_mass_diag[1]
        );
    }

    #[test]
    fn zero_warmup_is_rejected() {
        let config = SamplerConfig { warmup: 0, iterations: 10, ..SamplerConfig::default() };
        assert!(matches!(config.validate(), Err(SamplerError::InvalidConfig(_))));
        let config = SamplerConfig { warmup: 19, iterations: 40, ..SamplerConfig::default() };
        assert!(config.validate().is_err());
    }

    #[test]
    fn dual_averaging_shrinks_step_under_rejection() {
        let mut da = DualAveraging::new(1.0, 0.8);
        let mut step = 1.0;
        for _ in 0..50 {
            step = da.update(0.0);
        }
        assert!(step < 0.05, "step {step} should have collapsed");
        let mut da = DualAveraging::new(0.01, 0.8);
        for _ in 0..50 {
            step = da.update(1.0);
        }
        assert!(step > 0.01, "step {step} should have grown");
    }
}
