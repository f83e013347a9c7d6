use std::path::{Path, PathBuf};

use kalman_core::bayes::bayes_filter_run;
use kalman_core::projection::projection_filter_run;
use kalman_core::trace::step_deviations;
use kalman_core::{FilterTrace, Vector};

use crate::config::{FilterVariant, ScenarioConfig};
use crate::error::{HarnessError, Result};
use crate::io::{fmt_f64, read_trajectory, write_atomic};

/// Column names of a filter trace; `with_deviation` adds the variant comparison column.
pub fn trace_header(n: usize, m: usize, with_deviation: bool) -> Vec<String> {
    let mut h = vec!["k".to_string()];
    for (prefix, len) in [
        ("xhat_pred", n),
        ("P_pred_diag", n),
        ("xhat_post", n),
        ("P_post_diag", n),
        ("innov", m),
        ("S_diag", m),
    ] {
        h.extend((0..len).map(|i| format!("{prefix}_{i}")));
    }
    h.push("gain_frobenius".to_string());
    h.push("log_predictive".to_string());
    if with_deviation {
        h.push("max_variant_deviation".to_string());
    }
    h
}

/// Filter output for one measurement sequence.
#[derive(Debug, Clone)]
pub struct FilterOutput {
    pub trace: FilterTrace,
    /// Per-step deviation between the two derivations, when both were run.
    pub variant_deviation: Option<Vec<f64>>,
}

/// Runs the configured variant(s) with the filter-side model.
pub fn run_filter(config: &ScenarioConfig, z: &[Vector]) -> Result<FilterOutput> {
    let model = &config.filter_model;
    let (x0, p0) = (&config.x0_mean, &config.p0);
    Ok(match config.filter_variant {
        FilterVariant::Bayes => FilterOutput {
            trace: bayes_filter_run(model, z, x0, p0, config.covariance_form)?,
            variant_deviation: None,
        },
        FilterVariant::Projection => FilterOutput {
            trace: projection_filter_run(model, z, x0, p0)?,
            variant_deviation: None,
        },
        FilterVariant::Both => {
            let bayes = bayes_filter_run(model, z, x0, p0, config.covariance_form)?;
            let proj = projection_filter_run(model, z, x0, p0)?;
            let dev = step_deviations(&proj, &bayes);
            FilterOutput {
                trace: bayes,
                variant_deviation: Some(dev),
            }
        }
    })
}

pub fn render_trace(out: &FilterOutput) -> Vec<u8> {
    let trace = &out.trace;
    let n = trace.final_prediction.dim();
    let m = trace.steps.first().map(|s| s.innovation.len()).unwrap_or(0);
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(trace_header(n, m, out.variant_deviation.is_some()))
        .expect("in-memory write");
    for (i, s) in trace.steps.iter().enumerate() {
        let mut rec = vec![s.k.to_string()];
        let (p_pred, p_post, s_diag) = (
            s.prior.cov.matrix().diagonal(),
            s.posterior.cov.matrix().diagonal(),
            s.innovation_cov.matrix().diagonal(),
        );
        let cells = s
            .prior
            .mean
            .iter()
            .chain(p_pred.iter())
            .chain(s.posterior.mean.iter())
            .chain(p_post.iter())
            .chain(s.innovation.iter())
            .chain(s_diag.iter())
            .copied()
            .chain([s.gain.norm(), s.log_predictive]);
        rec.extend(cells.map(fmt_f64));
        if let Some(dev) = &out.variant_deviation {
            rec.push(fmt_f64(dev[i]));
        }
        w.write_record(&rec).expect("in-memory write");
    }
    w.into_inner().expect("in-memory flush")
}

pub fn trace_file_name(trajectory: &Path) -> String {
    let stem = trajectory.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "trajectory".into());
    format!("{stem}_trace.csv")
}

pub fn cmd_filter(config: &ScenarioConfig, trajectory: &Path) -> Result<PathBuf> {
    let (n, m) = (config.model.state_dim(), config.model.measurement_dim());
    let data = read_trajectory(trajectory, n, m)?;
    let out = run_filter(config, &data.measurements).map_err(|e| match e {
        HarnessError::Estimation(inner) => HarnessError::Input(format!("{}: {inner}", trajectory.display())),
        other => other,
    })?;
    let path = config.output_dir.join(trace_file_name(trajectory));
    write_atomic(&path, &render_trace(&out))?;
    Ok(path)
}
