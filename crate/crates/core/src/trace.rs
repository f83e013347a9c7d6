use crate::bayes::GaussianBelief;
use crate::linalg::{relative_deviation, Matrix, SpdMatrix, Vector};

/// Everything a filter computed at one measurement time `k`.
#[derive(Debug, Clone)]
pub struct FilterStep {
    pub k: usize,
    /// `x̂_{k|k−1}`, `P_{k|k−1}`
    pub prior: GaussianBelief,
    /// `x̂_{k|k}`, `P_{k|k}`
    pub posterior: GaussianBelief,
    pub innovation: Vector,
    pub innovation_cov: SpdMatrix,
    /// `K_k = P Hᵀ S⁻¹`
    pub gain: Matrix,
    pub log_predictive: f64,
}

#[derive(Debug, Clone)]
pub struct FilterTrace {
    pub steps: Vec<FilterStep>,
    /// `x̂_{K+1|K}`, `P_{K+1|K}` after the last measurement.
    pub final_prediction: GaussianBelief,
}

impl FilterTrace {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn last_posterior(&self) -> Option<&GaussianBelief> {
        self.steps.last().map(|s| &s.posterior)
    }
}

/// Largest relative deviation between two beliefs over mean and covariance.
pub fn belief_deviation(a: &GaussianBelief, b: &GaussianBelief) -> f64 {
    relative_deviation(a.mean.as_slice(), b.mean.as_slice())
        .max(relative_deviation(a.cov.matrix().as_slice(), b.cov.matrix().as_slice()))
}

/// Per-step deviation between two traces of the same run: priors, posteriors and gains.
pub fn step_deviations(a: &FilterTrace, b: &FilterTrace) -> Vec<f64> {
    assert_eq!(a.len(), b.len(), "traces of different length");
    a.steps
        .iter()
        .zip(&b.steps)
        .map(|(x, y)| {
            belief_deviation(&x.prior, &y.prior)
                .max(belief_deviation(&x.posterior, &y.posterior))
                .max(relative_deviation(x.gain.as_slice(), y.gain.as_slice()))
        })
        .collect()
}
