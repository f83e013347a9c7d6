use std::path::PathBuf;

use kalman_core::simulator::{sample_trajectory, StreamSeed, Trajectory, GENERATOR_ID};
use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::ScenarioConfig;
use crate::error::Result;
use crate::io::{render_trajectory, to_json_bytes, write_atomic};

pub const META_FILE: &str = "simulate_meta.json";

#[derive(Debug, Serialize)]
pub struct SimulateMeta {
    pub master_seed: u64,
    pub generator: &'static str,
    pub model_sha256: String,
    pub runs: usize,
    pub horizon: usize,
    pub state_dim: usize,
    pub measurement_dim: usize,
    pub files: Vec<String>,
}

pub fn run_file_name(run: usize) -> String {
    format!("run_{run:04}.csv")
}

/// SHA-256 of the canonical resolved config.
pub fn model_hash(config: &ScenarioConfig) -> String {
    hex::encode(Sha256::digest(config.canonical.as_bytes()))
}

/// Samples every Monte-Carlo run of the configured scenario, in run order.
pub fn sample_runs(config: &ScenarioConfig) -> Result<Vec<Trajectory>> {
    (0..config.monte_carlo_runs as u64)
        .into_par_iter()
        .map(|run| {
            sample_trajectory(
                &config.model,
                &config.x0_mean,
                &config.p0,
                config.horizon,
                StreamSeed::new(config.master_seed, run),
            )
            .map_err(Into::into)
        })
        .collect()
}

/// Writes one CSV per run plus the metadata sidecar; returns the written paths.
pub fn cmd_simulate(config: &ScenarioConfig) -> Result<Vec<PathBuf>> {
    let runs = sample_runs(config)?;
    let mut written = Vec::with_capacity(runs.len() + 1);
    let mut files = Vec::with_capacity(runs.len());
    for (i, t) in runs.iter().enumerate() {
        let name = run_file_name(i);
        let path = config.output_dir.join(&name);
        write_atomic(&path, &render_trajectory(&t.states, &t.measurements))?;
        files.push(name);
        written.push(path);
    }
    let meta = SimulateMeta {
        master_seed: config.master_seed,
        generator: GENERATOR_ID,
        model_sha256: model_hash(config),
        runs: config.monte_carlo_runs,
        horizon: config.horizon,
        state_dim: config.model.state_dim(),
        measurement_dim: config.model.measurement_dim(),
        files,
    };
    let path = config.output_dir.join(META_FILE);
    write_atomic(&path, &to_json_bytes(&meta))?;
    written.push(path);
    Ok(written)
}
