//! The density interface the sampler runs against.

/// A differentiable unnormalized log density over R^dim.
///
/// Implementations must be pure: the same position always yields bit-identical
/// results, and concurrent calls from multiple chains are safe.
pub trait LogDensityGradient: Sync {
    fn dim(&self) -> usize;

    /// Writes the gradient into `grad` and returns the log density, or `None`
    /// when either is non-finite at `position`. The sampler treats `None` as
    /// a divergence signal during trajectory integration and as a hard error
    /// at chain initialization.
    fn logp_grad(&self, position: &[f64], grad: &mut [f64]) -> Option<f64>;
}

/// Independent Gaussian target, mostly for tests and sampler validation.
#[derive(Debug, Clone)]
pub struct DiagonalGaussian {
    pub mean: Vec<f64>,
    pub sd: Vec<f64>,
}

impl DiagonalGaussian {
    pub fn standard(dim: usize) -> Self {
        Self { mean: vec![0.0; dim], sd: vec![1.0; dim] }
    }
}

impl LogDensityGradient for DiagonalGaussian {
    fn dim(&self) -> usize {
        self.mean.len()
    }

    fn logp_grad(&self, position: &[f64], grad: &mut [f64]) -> Option<f64> {
        let mut lp = 0.0;
        for j in 0..position.len() {
            if !position[j].is_finite() {
                return None;
            }
            let z = (position[j] - self.mean[j]) / self.sd[j];
            lp -= 0.5 * z * z;
            grad[j] = -z / self.sd[j];
        }
        Some(lp)
    }
}
