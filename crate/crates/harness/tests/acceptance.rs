//! Acceptance suite: one line per criterion, non-zero exit if any fails.
//! Run alone with `cargo test -p kalman-harness --test acceptance`.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::time::Instant;

use kalman_harness::checks::{self, OrthogonalityProblem};
use kalman_harness::verify::scenario_monte_carlo;
use kalman_harness::{Overrides, ScenarioConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

type Outcome = Result<(bool, String), String>;
type Criterion = (&'static str, fn() -> Outcome);

fn rng(seed: u64) -> ChaCha20Rng {
    ChaCha20Rng::seed_from_u64(seed)
}

fn within(value: f64, tol: f64, what: &str) -> (bool, String) {
    (value <= tol, format!("{what} {value:.3e} (tolerance {tol:.0e})"))
}

fn err(e: impl ToString) -> String {
    e.to_string()
}

fn two_form_equivalence() -> Outcome {
    let worst = checks::two_form(&mut rng(1), 1000, 8, 8).map_err(err)?;
    Ok(within(worst, 1e-9, "1000 problems, max relative deviation"))
}

fn gauss_markov_limit() -> Outcome {
    let worst = checks::gauss_markov_limit(&mut rng(2), 100, 1e8, 8, 8).map_err(err)?;
    Ok(within(worst, 1e-5, "100 problems with prior 1e8*I, max relative deviation"))
}

fn projection_bayes_equivalence() -> Outcome {
    let worst = checks::projection_vs_bayes(&mut rng(3), 200, 6, 50).map_err(err)?;
    Ok(within(worst, 1e-12, "200 models x 50 steps, max per-step relative deviation"))
}

fn batch_oracle() -> Outcome {
    let worst = checks::batch_oracle(&mut rng(4), 100, 4, 3, 10).map_err(err)?;
    Ok(within(worst, 1e-8, "100 scenarios, max relative deviation of final posterior"))
}

fn matrix_identities() -> Outcome {
    let w = checks::woodbury(&mut rng(51), 1000, 8).map_err(err)?;
    let g = checks::gain_duality(&mut rng(52), 1000, 8).map_err(err)?;
    let d = checks::determinant(&mut rng(53), 1000, 8).map_err(err)?;
    Ok((
        w <= 1e-10 && g <= 1e-10 && d <= 1e-9,
        format!("1000 instances each: woodbury {w:.3e} (1e-10), gain duality {g:.3e} (1e-10), determinant {d:.3e} (1e-9)"),
    ))
}

fn gaussian_product() -> Outcome {
    let worst = checks::gaussian_product(&mut rng(6), 100, 100, 6).map_err(err)?;
    Ok(within(worst, 1e-9, "100 instances x 100 probes, max log-density gap"))
}

fn monte_carlo_orthogonality() -> Outcome {
    const DRAWS: usize = 200_000;
    let mut problems = rng(7);
    let mut worst = 0.0f64;
    let mut retries = 0;
    for i in 0..10u64 {
        let p = OrthogonalityProblem::random(&mut problems, 4, 4);
        let mut sampler = rng(7);
        sampler.set_stream(1 + 2 * i);
        let mut sigma = p.worst_sigma(&mut sampler, DRAWS).map_err(err)?;
        if sigma > 4.0 {
            retries += 1;
            let mut fresh = rng(7);
            fresh.set_stream(2 + 2 * i);
            sigma = p.worst_sigma(&mut fresh, DRAWS).map_err(err)?;
        }
        worst = worst.max(sigma);
    }
    Ok((
        worst <= 4.0,
        format!("10 problems x {DRAWS} draws, worst entry {worst:.2} sigma (band 4), {retries} retried"),
    ))
}

fn scenario_path() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/constant_velocity.toml")
}

fn filter_consistency() -> Outcome {
    let text = fs::read_to_string(scenario_path()).map_err(err)?;
    let load = |t: &str| ScenarioConfig::parse(t, Path::new("."), &Overrides::default()).map_err(err);
    let good = load(&text)?;
    if good.monte_carlo_runs != 500 || good.horizon != 50 || good.model.state_dim() != 2 {
        return Err("scenario file does not describe 500 runs of a 2-state model over 50 steps".into());
    }
    let bad = load(&text.replace("r_scale = 1.0", "r_scale = 4.0"))?;
    let g = scenario_monte_carlo(&good).map_err(err)?.summary;
    let b = scenario_monte_carlo(&bad).map_err(err)?.summary;
    let (lo, hi) = g.nees_bounds;
    Ok((
        g.nees_consistent() && !b.nees_consistent(),
        format!(
            "mean NEES {:.4} in [{lo:.4}, {hi:.4}]; with R x4 mean NEES {:.4} (must fall outside)",
            g.mean_nees, b.mean_nees
        ),
    ))
}

fn optimality() -> Outcome {
    let worst = checks::optimality(&mut rng(9), 100, 100, 10, 8).map_err(err)?;
    Ok((
        worst <= 1e-12,
        format!("100 problems x 100 perturbed gains x (trace + 10 PSD weights), worst improvement {worst:.3e} (must be <= 1e-12)"),
    ))
}

fn files_in(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<_> = fs::read_dir(dir)
        .map(|rd| {
            rd.filter_map(|e| e.ok())
                .map(|e| (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap_or_default()))
                .collect()
        })
        .unwrap_or_default();
    v.sort();
    v
}

fn reproducibility() -> Outcome {
    let bin = env!("CARGO_BIN_EXE_kalman-harness");
    let tmp = tempfile::tempdir().map_err(err)?;
    let base = tmp.path();
    let cfg = fs::read_to_string(scenario_path())
        .map_err(err)?
        .replace("monte_carlo_runs = 500", "monte_carlo_runs = 3");
    let cfg_path = base.join("scenario.toml");
    fs::write(&cfg_path, cfg).map_err(err)?;
    fs::write(base.join("problem.toml"), "w = [[1.0, 0.5], [0.2, 1.0], [1.0, 1.0]]\nq = [[1.0, 0.1, 0.0], [0.1, 2.0, 0.0], [0.0, 0.0, 0.5]]\ny = [1.0, 2.0, 3.0]\nr = [[4.0, 0.0], [0.0, 9.0]]\n").map_err(err)?;

    let mut compared = 0;
    for pass in ["a", "b"] {
        let out = base.join(pass);
        let c = cfg_path.to_str().unwrap();
        let o = out.to_str().unwrap();
        let traj = base.join("a").join("run_0000.csv");
        let runs: Vec<Vec<String>> = vec![
            vec!["--config", c, "--out", o, "simulate"],
            vec!["--config", c, "--out", o, "filter", "--trajectory", traj.to_str().unwrap()],
            vec!["--out", o, "batch", "--problem", base.join("problem.toml").to_str().unwrap()],
            vec!["--config", c, "--out", o, "verify"],
        ]
        .into_iter()
        .map(|a| a.into_iter().map(String::from).collect())
        .collect();
        for args in runs {
            let status = Command::new(bin).args(&args).stdout(Stdio::null()).status().map_err(err)?;
            if !status.success() {
                return Err(format!("command {args:?} failed with {status}"));
            }
        }
    }
    let (a, b) = (files_in(&base.join("a")), files_in(&base.join("b")));
    for ((na, ba), (nb, bb)) in a.iter().zip(&b) {
        if na != nb || ba != bb {
            return Ok((false, format!("{na} differs between reruns")));
        }
        compared += 1;
    }
    Ok((
        a.len() == b.len() && compared >= 7,
        format!("simulate, filter, batch and verify each run twice: {compared} output files byte-identical"),
    ))
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("two-form equivalence", two_form_equivalence),
        ("Gauss-Markov limit", gauss_markov_limit),
        ("projection/Bayes equivalence", projection_bayes_equivalence),
        ("batch oracle", batch_oracle),
        ("matrix identities", matrix_identities),
        ("Gaussian product decomposition", gaussian_product),
        ("Monte-Carlo orthogonality", monte_carlo_orthogonality),
        ("filter consistency", filter_consistency),
        ("optimality", optimality),
        ("reproducibility", reproducibility),
    ];
    let start = Instant::now();
    let mut failures = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let (passed, detail) = match f() {
            Ok(r) => r,
            Err(e) => (false, format!("error: {e}")),
        };
        if !passed {
            failures += 1;
        }
        println!(
            "{} {:>2}. {name}: {detail} [{:.1}s]",
            if passed { "PASS" } else { "FAIL" },
            i + 1,
            t.elapsed().as_secs_f64()
        );
    }
    println!(
        "acceptance: {}/{} criteria passed in {:.1}s",
        criteria.len() - failures,
        criteria.len(),
        start.elapsed().as_secs_f64()
    );
    if failures > 0 {
        std::process::exit(1);
    }
}
