//! Symplectic leapfrog integration with a diagonal metric.

use super::LogDensityGradient;

/// One leapfrog step of Hamiltonian dynamics: half momentum kick, full
/// position drift, half momentum kick. `grad` must hold the gradient at the
/// incoming position and is left holding the gradient at the outgoing one.
/// `inverse_mass_diag` is the diagonal of the inverse mass matrix (the
/// estimated posterior variances).
///
/// Returns the log density at the new position, or `None` when the density,
/// gradient, or position became non-finite — a divergence signal to the
/// caller.
pub fn leapfrog<T: LogDensityGradient + ?Sized>(
    target: &T,
    position: &mut [f64],
    momentum: &mut [f64],
    grad: &mut [f64],
    step_size: f64,
    inverse_mass_diag: &[f64],
) -> Option<f64> {
    let half = 0.5 * step_size;
    for j in 0..position.len() {
        momentum[j] += half * grad[j];
        position[j] += step_size * inverse_mass_diag[j] * momentum[j];
        if !position[j].is_finite() {
            return None;
        }
    }
    let logp = target.logp_grad(position, grad)?;
    for (p, g) in momentum.iter_mut().zip(grad.iter()) {
        *p += half * g;
    }
    Some(logp)
}

/// Kinetic energy 0.5 * p' M^-1 p for the diagonal metric.
pub(super) fn kinetic(momentum: &[f64], inverse_mass_diag: &[f64]) -> f64 {
    0.5 * momentum.iter().zip(inverse_mass_diag).map(|(p, v)| p * p * v).sum::<f64>()
}

#[cfg(test)]
mod tests {
    use super::super::target::DiagonalGaussian;
    use super::*;

    #[test]
    fn hand_evaluated_standard_gaussian_step() {
        // Position 1, momentum 0, step 0.1, unit mass on a 1-D standard
        // Gaussian: half-kick p = -0.05, drift q = 1 - 0.005 = 0.995,
        // half-kick p = -0.05 + 0.05 * (-0.995) = -0.09975.
        let target = DiagonalGaussian::standard(1);
        let mut q = vec![1.0];
        let mut p = vec![0.0];
        let mut g = vec![0.0];
        target.logp_grad(&q, &mut g).unwrap();
        leapfrog(&target, &mut q, &mut p, &mut g, 0.1, &[1.0]).unwrap();
        assert!((q[0] - 0.995).abs() < 1e-15);
        assert!((p[0] - (-0.09975)).abs() < 1e-15);
    }

    #[test]
    fn reversibility() {
        let target = DiagonalGaussian { mean: vec![0.3, -1.0], sd: vec![1.0, 2.5] };
        let inv_mass = [0.7, 1.4];
        let q0 = vec![0.8, -0.2];
        let p0 = vec![-0.5, 1.1];
        let mut q = q0.clone();
        let mut p = p0.clone();
        let mut g = vec![0.0; 2];
        target.logp_grad(&q, &mut g).unwrap();
        for _ in 0..25 {
            leapfrog(&target, &mut q, &mut p, &mut g, 0.05, &inv_mass).unwrap();
        }
        for v in p.iter_mut() {
            *v = -*v;
        }
        target.logp_grad(&q, &mut g).unwrap();
        for _ in 0..25 {
            leapfrog(&target, &mut q, &mut p, &mut g, 0.05, &inv_mass).unwrap();
        }
        for j in 0..2 {
            assert!((q[j] - q0[j]).abs() < 1e-12);
            assert!((p[j] + p0[j]).abs() < 1e-12);
        }
    }

    #[test]
    fn vanishing_step_keeps_position() {
        let target = DiagonalGaussian::standard(2);
        let mut q = vec![0.4, -0.9];
        let mut p = vec![1.0, 2.0];
        let mut g = vec![0.0; 2];
        target.logp_grad(&q, &mut g).unwrap();
        let eps = 1e-9;
        leapfrog(&target, &mut q, &mut p, &mut g, eps, &[1.0, 1.0]).unwrap();
        assert!((q[0] - 0.4).abs() < 2.0 * eps);
        assert!((q[1] + 0.9).abs() < 3.0 * eps);
    }
}
