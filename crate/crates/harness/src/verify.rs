//! Identity suite plus Monte-Carlo consistency of the configured scenario.

use std::collections::BTreeMap;
use std::path::PathBuf;

use kalman_core::consistency::{summarize, ConsistencySummary, RunStatistics};
use kalman_core::simulator::GENERATOR_ID;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::checks;
use crate::config::{FilterVariant, ScenarioConfig};
use crate::error::{HarnessError, Result};
use crate::filter::run_filter;
use crate::io::{to_json_bytes, write_atomic};
use crate::simulate::sample_runs;

pub const REPORT_FILE: &str = "verify_report.json";

/// Identity check names and their base tolerances.
pub const TOLERANCES: [(&str, f64); 9] = [
    ("two_form", 1e-9),
    ("gauss_markov_limit", 1e-5),
    ("projection_vs_bayes", 1e-12),
    ("batch_oracle", 1e-8),
    ("woodbury", 1e-10),
    ("gain_duality", 1e-10),
    ("determinant", 1e-9),
    ("gaussian_product", 1e-9),
    ("optimality", 1e-12),
];

/// Rng streams for the identity suite sit far above those used by simulated runs.
const IDENTITY_STREAM_BASE: u64 = 1 << 62;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckOutcome {
    pub name: String,
    pub residual: Option<f64>,
    pub tolerance: f64,
    pub passed: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConsistencyBlock {
    pub runs: usize,
    pub steps: usize,
    pub confidence: f64,
    /// How the bounds were formed.
    pub aggregation: String,
    pub nees_dof: usize,
    pub nis_dof: usize,
    pub rmse_per_component: Vec<f64>,
    pub mean_nees: f64,
    pub nees_bounds: (f64, f64),
    pub mean_nis: f64,
    pub nis_bounds: (f64, f64),
    pub nees_per_step: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport {
    pub master_seed: u64,
    pub generator: &'static str,
    pub tol_scale: f64,
    pub r_scale: f64,
    pub identity_residuals: BTreeMap<String, Option<f64>>,
    pub consistency: Option<ConsistencyBlock>,
    pub checks: Vec<CheckOutcome>,
    pub passed: bool,
}

impl VerifyReport {
    pub fn failed_checks(&self) -> Vec<&str> {
        self.checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect()
    }
}

fn identity_rng(seed: u64, index: usize) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(IDENTITY_STREAM_BASE + index as u64);
    rng
}

fn outcome(name: &str, tolerance: f64, result: kalman_core::Result<f64>) -> CheckOutcome {
    match result {
        Ok(r) => CheckOutcome {
            name: name.to_string(),
            residual: Some(r),
            tolerance,
            passed: r <= tolerance,
            error: None,
        },
        Err(e) => CheckOutcome {
            name: name.to_string(),
            residual: None,
            tolerance,
            passed: false,
            error: Some(e.to_string()),
        },
    }
}

/// Runs every identity check on seeded random instances.
pub fn identity_suite(config: &ScenarioConfig, tol_scale: f64) -> Vec<CheckOutcome> {
    let n = config.verify.instances;
    let f = config.verify.filter_instances;
    let few = (n / 10).max(1);
    TOLERANCES
        .par_iter()
        .enumerate()
        .map(|(i, &(name, tol))| {
            let rng = &mut identity_rng(config.master_seed, i);
            let residual = match name {
                "two_form" => checks::two_form(rng, n, 8, 8),
                "gauss_markov_limit" => checks::gauss_markov_limit(rng, n, 1e8, 8, 8),
                "projection_vs_bayes" => checks::projection_vs_bayes(rng, f, 6, 50),
                "batch_oracle" => checks::batch_oracle(rng, f, 4, 3, 10),
                "woodbury" => checks::woodbury(rng, n, 8),
                "gain_duality" => checks::gain_duality(rng, n, 8),
                "determinant" => checks::determinant(rng, n, 8),
                "gaussian_product" => checks::gaussian_product(rng, few, 100, 6),
                "optimality" => checks::optimality(rng, few, 100, 10, 8),
                _ => unreachable!("every named check is dispatched"),
            };
            outcome(name, tol * tol_scale, residual)
        })
        .collect()
}

/// Scenario Monte-Carlo result, plus the largest derivation gap when both variants ran.
pub struct ScenarioResult {
    pub summary: ConsistencySummary,
    pub variant_deviation: Option<f64>,
}

pub fn scenario_monte_carlo(config: &ScenarioConfig) -> Result<ScenarioResult> {
    let trajectories = sample_runs(config)?;
    let per_run: Vec<(RunStatistics, Option<f64>)> = trajectories
        .par_iter()
        .map(|t| {
            let out = run_filter(config, &t.measurements)?;
            let stats = RunStatistics::from_trace(&t.states, &out.trace)?;
            let dev = out.variant_deviation.map(|d| d.into_iter().fold(0.0, f64::max));
            Ok((stats, dev))
        })
        .collect::<Result<_>>()?;
    let variant_deviation = match config.filter_variant {
        FilterVariant::Both => Some(per_run.iter().filter_map(|(_, d)| *d).fold(0.0, f64::max)),
        _ => None,
    };
    let stats: Vec<RunStatistics> = per_run.into_iter().map(|(s, _)| s).collect();
    let summary = summarize(&stats, config.model.state_dim(), config.model.measurement_dim(), config.confidence);
    Ok(ScenarioResult {
        summary,
        variant_deviation,
    })
}

fn interval_check(name: &str, value: f64, bounds: (f64, f64)) -> CheckOutcome {
    let passed = value >= bounds.0 && value <= bounds.1;
    CheckOutcome {
        name: name.to_string(),
        residual: Some(value),
        tolerance: if value < bounds.0 { bounds.0 } else { bounds.1 },
        passed,
        error: None,
    }
}

pub fn build_report(config: &ScenarioConfig, tol_scale: f64) -> VerifyReport {
    let mut checks = identity_suite(config, tol_scale);
    let identity_residuals = checks.iter().map(|c| (c.name.clone(), c.residual)).collect();

    let consistency = match scenario_monte_carlo(config) {
        Ok(res) => {
            let s = &res.summary;
            checks.push(interval_check("scenario_mean_nees", s.mean_nees, s.nees_bounds));
            checks.push(interval_check("scenario_mean_nis", s.mean_nis, s.nis_bounds));
            if let Some(dev) = res.variant_deviation {
                checks.push(outcome("scenario_projection_vs_bayes", 1e-12 * tol_scale, Ok(dev)));
            }
            let (n, m) = (config.model.state_dim(), config.model.measurement_dim());
            Some(ConsistencyBlock {
                runs: s.runs,
                steps: s.steps,
                confidence: config.confidence,
                aggregation: format!(
                    "mean over runs and steps; two-sided chi-square interval of the run average at one step \
                     (dof = runs x n = {} for NEES, runs x m = {} for NIS), divided by runs",
                    s.runs * n,
                    s.runs * m
                ),
                nees_dof: s.runs * n,
                nis_dof: s.runs * m,
                rmse_per_component: s.rmse_per_component.clone(),
                mean_nees: s.mean_nees,
                nees_bounds: s.nees_bounds,
                mean_nis: s.mean_nis,
                nis_bounds: s.nis_bounds,
                nees_per_step: s.nees_per_step.clone(),
            })
        }
        Err(e) => {
            checks.push(CheckOutcome {
                name: "scenario_monte_carlo".to_string(),
                residual: None,
                tolerance: 0.0,
                passed: false,
                error: Some(e.to_string()),
            });
            None
        }
    };

    let passed = checks.iter().all(|c| c.passed);
    VerifyReport {
        master_seed: config.master_seed,
        generator: GENERATOR_ID,
        tol_scale,
        r_scale: config.r_scale,
        identity_residuals,
        consistency,
        checks,
        passed,
    }
}

/// Writes the report, then fails with the names of any failing checks.
pub fn cmd_verify(config: &ScenarioConfig, tol_scale: f64) -> Result<(PathBuf, VerifyReport)> {
    let report = build_report(config, tol_scale);
    let path = config.output_dir.join(REPORT_FILE);
    write_atomic(&path, &to_json_bytes(&report))?;
    if report.passed {
        Ok((path, report))
    } else {
        Err(HarnessError::Verification(format!(
            "failing checks: {} (report: {})",
            report.failed_checks().join(", "),
            path.display()
        )))
    }
}
