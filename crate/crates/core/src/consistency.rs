//! Filter consistency statistics over Monte-Carlo runs.
//!
//! For a correctly specified filter the posterior NEES at each step is
//! χ²(n) and the NIS is χ²(m). Averaging over `N` independent runs gives
//! `N·mean ~ χ²(N·n)`, which sets the acceptance interval. The reported mean
//! additionally averages over time; the per-step interval is used for it as
//! well, which can only make the test more conservative.

use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::bayes::GaussianBelief;
use crate::error::Result;
use crate::linalg::{SpdMatrix, Vector};
use crate::trace::FilterTrace;

/// `(x − x̂)ᵀ P⁻¹ (x − x̂)`
pub fn nees(truth: &Vector, belief: &GaussianBelief) -> Result<f64> {
    belief.cov.inverse_quadratic_form(&(truth - &belief.mean))
}

/// `νᵀ S⁻¹ ν`
pub fn nis(innovation: &Vector, s: &SpdMatrix) -> Result<f64> {
    s.inverse_quadratic_form(innovation)
}

/// Two-sided interval for the mean of `samples` independent χ²(`dof`) variables.
pub fn averaged_chi_square_bounds(dof: usize, samples: usize, confidence: f64) -> (f64, f64) {
    let total = (dof * samples) as f64;
    let dist = ChiSquared::new(total).expect("positive degrees of freedom");
    let tail = (1.0 - confidence) / 2.0;
    (
        dist.inverse_cdf(tail) / samples as f64,
        dist.inverse_cdf(1.0 - tail) / samples as f64,
    )
}

/// Per-step statistics of one filtered run against its ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct RunStatistics {
    pub nees: Vec<f64>,
    pub nis: Vec<f64>,
    /// Squared posterior error per step and component.
    pub squared_error: Vec<Vector>,
}

impl RunStatistics {
    pub fn from_trace(states: &[Vector], trace: &FilterTrace) -> Result<Self> {
        let mut nees_v = Vec::with_capacity(trace.len());
        let mut nis_v = Vec::with_capacity(trace.len());
        let mut sq = Vec::with_capacity(trace.len());
        for (step, x) in trace.steps.iter().zip(states) {
            nees_v.push(nees(x, &step.posterior)?);
            nis_v.push(nis(&step.innovation, &step.innovation_cov)?);
            sq.push((x - &step.posterior.mean).map(|e| e * e));
        }
        Ok(RunStatistics {
            nees: nees_v,
            nis: nis_v,
            squared_error: sq,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConsistencySummary {
    pub runs: usize,
    pub steps: usize,
    pub rmse_per_component: Vec<f64>,
    pub mean_nees: f64,
    pub nees_bounds: (f64, f64),
    pub mean_nis: f64,
    pub nis_bounds: (f64, f64),
    /// Run-averaged NEES at every step.
    pub nees_per_step: Vec<f64>,
}

impl ConsistencySummary {
    pub fn nees_consistent(&self) -> bool {
        self.mean_nees >= self.nees_bounds.0 && self.mean_nees <= self.nees_bounds.1
    }

    pub fn nis_consistent(&self) -> bool {
        self.mean_nis >= self.nis_bounds.0 && self.mean_nis <= self.nis_bounds.1
    }
}

/// Reduces runs in the order given; identical input order gives bit-identical output.
pub fn summarize(runs: &[RunStatistics], n: usize, m: usize, confidence: f64) -> ConsistencySummary {
    assert!(!runs.is_empty(), "at least one run");
    let steps = runs[0].nees.len();
    let mut nees_per_step = vec![0.0; steps];
    let mut nis_sum = 0.0;
    let mut sq = vec![0.0; n];
    for run in runs {
        for (acc, v) in nees_per_step.iter_mut().zip(&run.nees) {
            *acc += v;
        }
        nis_sum += run.nis.iter().sum::<f64>();
        for e in &run.squared_error {
            for (acc, v) in sq.iter_mut().zip(e.iter()) {
                *acc += v;
            }
        }
    }
    let count = (runs.len() * steps) as f64;
    let mean_nees = nees_per_step.iter().sum::<f64>() / count;
    for v in nees_per_step.iter_mut() {
        *v /= runs.len() as f64;
    }
    ConsistencySummary {
        runs: runs.len(),
        steps,
        rmse_per_component: sq.iter().map(|s| (s / count).sqrt()).collect(),
        mean_nees,
        nees_bounds: averaged_chi_square_bounds(n, runs.len(), confidence),
        mean_nis: nis_sum / count,
        nis_bounds: averaged_chi_square_bounds(m, runs.len(), confidence),
        nees_per_step,
    }
}
