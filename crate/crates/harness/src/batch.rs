//! Batch estimation from a problem manifest.
//!
//! The manifest is TOML with keys `w`, `q`, `y` and optionally `r`, each
//! inline or `{ csv = "path" }` relative to the manifest. Without `r` the
//! Gauss-Markov estimate is computed; with `r` the minimum-variance estimate
//! in information form, checked against the gain form and against
//! Gauss-Markov. The information form is reported because it stays accurate
//! under diffuse priors, where the gain form subtracts nearly equal terms.

use std::path::{Path, PathBuf};

use kalman_core::batch::{gauss_markov, min_variance_prior_gain, min_variance_prior_info, BatchEstimate, BatchProblem};
use kalman_core::linalg::{relative_deviation, spd_check, Matrix, SYM_TOL};
use kalman_core::Vector;
use serde::{Deserialize, Serialize};

use crate::config::{matrix_from_rows, MatrixSource, VectorSource};
use crate::error::{HarnessError, Result};
use crate::io::{read_matrix_csv, to_json_bytes, write_atomic};

pub const OUTPUT_FILE: &str = "batch_estimate.json";

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct Manifest {
    w: MatrixSource,
    q: MatrixSource,
    y: VectorSource,
    r: Option<MatrixSource>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BatchReport {
    pub estimator: &'static str,
    pub state_dim: usize,
    pub measurement_dim: usize,
    pub beta_hat: Vec<f64>,
    pub error_cov: Vec<Vec<f64>>,
    /// Information form vs gain form, max relative deviation over β̂ and covariance.
    pub two_form_residual: Option<f64>,
    /// Prior estimate vs Gauss-Markov, max relative deviation; absent when the design is rank deficient.
    pub gauss_markov_deviation: Option<f64>,
}

fn rows(m: &Matrix) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn estimate_deviation(a: &BatchEstimate, b: &BatchEstimate) -> f64 {
    relative_deviation(a.beta_hat.as_slice(), b.beta_hat.as_slice())
        .max(relative_deviation(a.error_cov.matrix().as_slice(), b.error_cov.matrix().as_slice()))
}

fn load_matrix(src: &MatrixSource, base: &Path, field: &str) -> Result<Matrix> {
    match src {
        MatrixSource::Inline(r) => matrix_from_rows(r, field),
        MatrixSource::File { csv } => {
            let r = read_matrix_csv(&base.join(csv)).map_err(|e| HarnessError::config(field, e))?;
            matrix_from_rows(&r, field)
        }
    }
}

fn load_vector(src: &VectorSource, base: &Path, field: &str) -> Result<Vector> {
    let m = match src {
        VectorSource::Inline(v) => matrix_from_rows(std::slice::from_ref(v), field)?,
        VectorSource::File { csv } => load_matrix(&MatrixSource::File { csv: csv.clone() }, base, field)?,
    };
    if m.nrows() != 1 && m.ncols() != 1 {
        return Err(HarnessError::config(field, "expected a single row or column"));
    }
    Ok(Vector::from_iterator(m.len(), m.iter().copied()))
}

/// Parses and validates a manifest into a problem.
pub fn load_problem(path: &Path) -> Result<BatchProblem> {
    let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
    let manifest: Manifest =
        toml::from_str(&text).map_err(|e| HarnessError::Input(format!("{}: {e}", path.display())))?;
    let base = path.parent().unwrap_or(Path::new("."));
    let w = load_matrix(&manifest.w, base, "w")?;
    let q = load_matrix(&manifest.q, base, "q")?;
    let y = load_vector(&manifest.y, base, "y")?;
    let q = spd_check(&q, SYM_TOL).map_err(|e| HarnessError::config("q", e))?;
    let r = match &manifest.r {
        Some(src) => Some(spd_check(&load_matrix(src, base, "r")?, SYM_TOL).map_err(|e| HarnessError::config("r", e))?),
        None => None,
    };
    BatchProblem::new(w, q, y, r).map_err(|e| HarnessError::Input(format!("{}: {e}", path.display())))
}

pub fn estimate(problem: &BatchProblem) -> Result<BatchReport> {
    let (estimator, est, two_form, gm_dev) = if problem.prior.is_some() {
        let gain = min_variance_prior_gain(problem)?;
        let info = min_variance_prior_info(problem)?;
        let gm = gauss_markov(&BatchProblem { prior: None, ..problem.clone() });
        let gm_dev = match gm {
            Ok(g) => Some(estimate_deviation(&info, &g)),
            Err(kalman_core::Error::RankDeficient { .. }) => None,
            Err(e) => return Err(e.into()),
        };
        let two = estimate_deviation(&gain, &info);
        ("min_variance", info, Some(two), gm_dev)
    } else {
        ("gauss_markov", gauss_markov(problem)?, None, None)
    };
    Ok(BatchReport {
        estimator,
        state_dim: problem.state_dim(),
        measurement_dim: problem.measurement_dim(),
        beta_hat: est.beta_hat.iter().copied().collect(),
        error_cov: rows(est.error_cov.matrix()),
        two_form_residual: two_form,
        gauss_markov_deviation: gm_dev,
    })
}

/// Everything is computed before the single output file is written.
pub fn cmd_batch(manifest: &Path, out_dir: &Path) -> Result<PathBuf> {
    let problem = load_problem(manifest)?;
    let report = estimate(&problem)?;
    let path = out_dir.join(OUTPUT_FILE);
    write_atomic(&path, &to_json_bytes(&report))?;
    Ok(path)
}
