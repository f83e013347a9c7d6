//! Scenario configuration.
//!
//! One TOML file with sections `[model]`, `[init]`, `[run]`, `[output]` and an
//! optional `[verify]`. Every matrix is given either inline as nested arrays
//! or as `{ csv = "path" }`, resolved relative to the config file. A model
//! matrix may also be a per-step schedule: an array of matrices, one per step.
//! See the README for the full grammar.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use kalman_core::linalg::{psd_check, spd_check, Definiteness, Matrix, SpdMatrix, Vector, SYM_TOL};
use kalman_core::{CovarianceForm, Schedule, StateSpaceModel};
use serde::Deserialize;

use crate::error::{HarnessError, Result};
use crate::io::read_matrix_csv;

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum MatrixSource {
    Inline(Vec<Vec<f64>>),
    File { csv: String },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum ScheduleSource {
    Constant(MatrixSource),
    PerStep(Vec<MatrixSource>),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum VectorSource {
    Inline(Vec<f64>),
    File { csv: String },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    model: RawModel,
    init: RawInit,
    run: RawRun,
    #[serde(default)]
    output: RawOutput,
    #[serde(default)]
    verify: VerifySettings,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawModel {
    phi: ScheduleSource,
    h: ScheduleSource,
    q: ScheduleSource,
    r: ScheduleSource,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawInit {
    x0_mean: VectorSource,
    p0: MatrixSource,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRun {
    horizon: usize,
    master_seed: u64,
    #[serde(default = "default_runs")]
    monte_carlo_runs: usize,
    #[serde(default)]
    filter_variant: FilterVariant,
    #[serde(default)]
    covariance_form: FormName,
    #[serde(default = "default_confidence")]
    confidence: f64,
    #[serde(default = "default_r_scale")]
    r_scale: f64,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOutput {
    dir: Option<PathBuf>,
}

fn default_runs() -> usize {
    1
}

fn default_confidence() -> f64 {
    0.99
}

fn default_r_scale() -> f64 {
    1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FilterVariant {
    Projection,
    #[default]
    Bayes,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "lowercase")]
enum FormName {
    #[default]
    Standard,
    Joseph,
}

/// Sizes of the random identity suite run by `verify`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerifySettings {
    /// Random instances per matrix identity.
    pub instances: usize,
    /// Random models for the filter-level checks.
    pub filter_instances: usize,
}

impl Default for VerifySettings {
    fn default() -> Self {
        VerifySettings {
            instances: 200,
            filter_instances: 20,
        }
    }
}

/// A validated scenario.
#[derive(Debug, Clone)]
pub struct ScenarioConfig {
    /// Model used to generate trajectories.
    pub model: StateSpaceModel,
    /// Model assumed by the filter: `model` with R multiplied by `r_scale`.
    pub filter_model: StateSpaceModel,
    pub x0_mean: Vector,
    pub p0: SpdMatrix,
    pub horizon: usize,
    pub master_seed: u64,
    pub monte_carlo_runs: usize,
    pub filter_variant: FilterVariant,
    pub covariance_form: CovarianceForm,
    pub confidence: f64,
    pub r_scale: f64,
    pub output_dir: PathBuf,
    pub verify: VerifySettings,
    /// Canonical rendering of every resolved input, hashed into metadata.
    pub canonical: String,
}

/// Overrides from the command line.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
}

impl ScenarioConfig {
    pub fn load(path: &Path, overrides: &Overrides) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, base, overrides).map_err(|e| match e {
            HarnessError::Input(msg) => HarnessError::Input(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    /// Parses config text; CSV references are resolved against `base`.
    pub fn parse(text: &str, base: &Path, overrides: &Overrides) -> Result<Self> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| HarnessError::Input(e.to_string()))?;
        let mut canon = Canonical::default();

        let phi = load_schedule(&raw.model.phi, base, "model.phi")?;
        let h = load_schedule(&raw.model.h, base, "model.h")?;
        let q_raw = load_schedule(&raw.model.q, base, "model.q")?;
        let r_raw = load_schedule(&raw.model.r, base, "model.r")?;
        canon.schedule("model.phi", &phi);
        canon.schedule("model.h", &h);
        canon.schedule("model.q", &q_raw);
        canon.schedule("model.r", &r_raw);

        let q = certify_schedule(q_raw, "model.q", Definiteness::SemiDefinite)?;
        let r = certify_schedule(r_raw, "model.r", Definiteness::Positive)?;
        let model = StateSpaceModel::new(phi, h, q, r).map_err(|e| HarnessError::config("model", e))?;

        let x0_mean = load_vector(&raw.init.x0_mean, base, "init.x0_mean")?;
        let p0_raw = load_matrix(&raw.init.p0, base, "init.p0")?;
        canon.vector("init.x0_mean", &x0_mean);
        canon.matrix("init.p0", &p0_raw);
        let n = model.state_dim();
        if x0_mean.len() != n {
            return Err(HarnessError::config(
                "init.x0_mean",
                format!("expected length {n}, found {}", x0_mean.len()),
            ));
        }
        if p0_raw.nrows() != n || p0_raw.ncols() != n {
            return Err(HarnessError::config(
                "init.p0",
                format!("expected {n}x{n}, found {}x{}", p0_raw.nrows(), p0_raw.ncols()),
            ));
        }
        let p0 = psd_check(&p0_raw, SYM_TOL).map_err(|e| HarnessError::config("init.p0", e))?;

        let run = raw.run;
        if run.horizon < 1 {
            return Err(HarnessError::config("run.horizon", "must be at least 1"));
        }
        if run.monte_carlo_runs < 1 {
            return Err(HarnessError::config("run.monte_carlo_runs", "must be at least 1"));
        }
        if !(run.confidence > 0.0 && run.confidence < 1.0) {
            return Err(HarnessError::config("run.confidence", "must lie strictly between 0 and 1"));
        }
        if !(run.r_scale.is_finite() && run.r_scale > 0.0) {
            return Err(HarnessError::config("run.r_scale", "must be positive and finite"));
        }
        // trajectories hold states 0..=horizon, so schedules must cover as many steps
        model
            .require_steps(run.horizon + 1)
            .map_err(|e| HarnessError::config("model", e))?;
        let filter_model = model
            .with_scaled_r(run.r_scale)
            .map_err(|e| HarnessError::config("run.r_scale", e))?;

        if raw.verify.instances < 1 {
            return Err(HarnessError::config("verify.instances", "must be at least 1"));
        }
        if raw.verify.filter_instances < 1 {
            return Err(HarnessError::config("verify.filter_instances", "must be at least 1"));
        }

        let master_seed = overrides.seed.unwrap_or(run.master_seed);
        let covariance_form = match run.covariance_form {
            FormName::Standard => CovarianceForm::Standard,
            FormName::Joseph => CovarianceForm::Joseph,
        };
        canon.scalar("run.horizon", run.horizon);
        canon.scalar("run.master_seed", master_seed);
        canon.scalar("run.monte_carlo_runs", run.monte_carlo_runs);
        canon.scalar("run.filter_variant", format!("{:?}", run.filter_variant));
        canon.scalar("run.covariance_form", format!("{covariance_form:?}"));
        canon.scalar("run.confidence", format!("{:?}", run.confidence));
        canon.scalar("run.r_scale", format!("{:?}", run.r_scale));

        let output_dir = overrides
            .out
            .clone()
            .or(raw.output.dir)
            .unwrap_or_else(|| PathBuf::from("out"));

        Ok(ScenarioConfig {
            model,
            filter_model,
            x0_mean,
            p0,
            horizon: run.horizon,
            master_seed,
            monte_carlo_runs: run.monte_carlo_runs,
            filter_variant: run.filter_variant,
            covariance_form,
            confidence: run.confidence,
            r_scale: run.r_scale,
            output_dir,
            verify: raw.verify,
            canonical: canon.finish(),
        })
    }
}

/// Deterministic text form of the resolved inputs (exact float rendering).
#[derive(Default)]
struct Canonical {
    entries: BTreeMap<String, String>,
}

impl Canonical {
    fn matrix(&mut self, key: &str, m: &Matrix) {
        self.entries.insert(key.to_string(), render_matrix(m));
    }

    fn vector(&mut self, key: &str, v: &Vector) {
        let body: Vec<String> = v.iter().map(|x| format!("{x:?}")).collect();
        self.entries.insert(key.to_string(), format!("[{}]", body.join(",")));
    }

    fn schedule(&mut self, key: &str, s: &Schedule<Matrix>) {
        let body = match s {
            Schedule::Constant(m) => render_matrix(m),
            Schedule::PerStep(ms) => {
                let parts: Vec<String> = ms.iter().map(render_matrix).collect();
                format!("[{}]", parts.join(","))
            }
        };
        self.entries.insert(key.to_string(), body);
    }

    fn scalar(&mut self, key: &str, v: impl ToString) {
        self.entries.insert(key.to_string(), v.to_string());
    }

    fn finish(self) -> String {
        self.entries.into_iter().map(|(k, v)| format!("{k}={v}\n")).collect()
    }
}

fn render_matrix(m: &Matrix) -> String {
    let rows: Vec<String> = m
        .row_iter()
        .map(|r| {
            let cells: Vec<String> = r.iter().map(|x| format!("{x:?}")).collect();
            format!("[{}]", cells.join(","))
        })
        .collect();
    format!("[{}]", rows.join(","))
}

pub(crate) fn matrix_from_rows(rows: &[Vec<f64>], field: &str) -> Result<Matrix> {
    let nrows = rows.len();
    let ncols = rows.first().map(Vec::len).unwrap_or(0);
    if nrows == 0 || ncols == 0 {
        return Err(HarnessError::config(field, "matrix must be at least 1x1"));
    }
    if let Some(i) = rows.iter().position(|r| r.len() != ncols) {
        return Err(HarnessError::config(
            format!("{field}[{i}]"),
            format!("row has {} entries, expected {ncols}", rows[i].len()),
        ));
    }
    if rows.iter().flatten().any(|v| !v.is_finite()) {
        return Err(HarnessError::config(field, "entries must be finite"));
    }
    Ok(Matrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
}

fn load_matrix(src: &MatrixSource, base: &Path, field: &str) -> Result<Matrix> {
    match src {
        MatrixSource::Inline(rows) => matrix_from_rows(rows, field),
        MatrixSource::File { csv } => {
            let rows = read_matrix_csv(&base.join(csv)).map_err(|e| HarnessError::config(field, e))?;
            matrix_from_rows(&rows, field)
        }
    }
}

fn load_vector(src: &VectorSource, base: &Path, field: &str) -> Result<Vector> {
    let values = match src {
        VectorSource::Inline(v) => v.clone(),
        VectorSource::File { csv } => {
            let m = load_matrix(&MatrixSource::File { csv: csv.clone() }, base, field)?;
            if m.nrows() != 1 && m.ncols() != 1 {
                return Err(HarnessError::config(field, "expected a single row or column"));
            }
            m.iter().cloned().collect()
        }
    };
    if values.is_empty() {
        return Err(HarnessError::config(field, "vector must not be empty"));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(HarnessError::config(field, "entries must be finite"));
    }
    Ok(Vector::from_vec(values))
}

fn load_schedule(src: &ScheduleSource, base: &Path, field: &str) -> Result<Schedule<Matrix>> {
    match src {
        ScheduleSource::Constant(m) => Ok(Schedule::Constant(load_matrix(m, base, field)?)),
        ScheduleSource::PerStep(ms) => {
            if ms.is_empty() {
                return Err(HarnessError::config(field, "per-step schedule must not be empty"));
            }
            let v = ms
                .iter()
                .enumerate()
                .map(|(k, m)| load_matrix(m, base, &format!("{field}[{k}]")))
                .collect::<Result<Vec<_>>>()?;
            Ok(Schedule::PerStep(v))
        }
    }
}

fn certify_schedule(s: Schedule<Matrix>, field: &str, def: Definiteness) -> Result<Schedule<SpdMatrix>> {
    let check = |m: &Matrix, f: String| match def {
        Definiteness::Positive => spd_check(m, SYM_TOL).map_err(|e| HarnessError::config(f, e)),
        Definiteness::SemiDefinite => psd_check(m, SYM_TOL).map_err(|e| HarnessError::config(f, e)),
    };
    Ok(match s {
        Schedule::Constant(m) => Schedule::Constant(check(&m, field.to_string())?),
        Schedule::PerStep(ms) => Schedule::PerStep(
            ms.iter()
                .enumerate()
                .map(|(k, m)| check(m, format!("{field}[{k}]")))
                .collect::<Result<Vec<_>>>()?,
        ),
    })
}
