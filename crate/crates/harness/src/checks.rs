//! Randomized identity checks. Each returns the worst residual over its
//! instances; the caller compares it against a tolerance. Oracles are
//! explicit LU inverses and determinants, independent of the certified
//! factorizations used by the estimators.

use kalman_core::batch::{
    error_covariance_of_linear_estimator, gauss_markov, min_variance_prior_gain, min_variance_prior_info, BatchProblem,
};
use kalman_core::bayes::{bayes_filter_run, correct, gaussian_product_decompose};
use kalman_core::linalg::{relative_deviation, spd_check, woodbury_posterior_cov, Matrix, SpdMatrix, SYM_TOL};
use kalman_core::projection::projection_filter_run;
use kalman_core::random;
use kalman_core::simulator::{
    batch_oracle_estimate, draw_gaussian, propagate_moments, sample_trajectory, stack_measurements, StreamSeed,
};
use kalman_core::trace::step_deviations;
use kalman_core::{CovarianceForm, Error, Result, Vector};
use rand::Rng;

fn inverse(m: &Matrix) -> Result<Matrix> {
    m.clone().try_inverse().ok_or(Error::Singular { index: 0 })
}

fn rel(a: &Matrix, b: &Matrix) -> f64 {
    relative_deviation(a.as_slice(), b.as_slice())
}

fn rel_v(a: &Vector, b: &Vector) -> f64 {
    relative_deviation(a.as_slice(), b.as_slice())
}

/// Gain form vs information form of the prior estimate (β̂ and error covariance).
pub fn two_form<R: Rng>(rng: &mut R, instances: usize, max_n: usize, max_m: usize) -> Result<f64> {
    let mut worst = 0.0f64;
    for _ in 0..instances {
        let p = random::batch_problem(rng, max_n, max_m);
        let g = min_variance_prior_gain(&p)?;
        let i = min_variance_prior_info(&p)?;
        worst = worst
            .max(rel_v(&g.beta_hat, &i.beta_hat))
            .max(rel(g.error_cov.matrix(), i.error_cov.matrix()));
    }
    Ok(worst)
}

/// Prior `λI` vs Gauss-Markov on well-conditioned designs.
pub fn gauss_markov_limit<R: Rng>(rng: &mut R, instances: usize, lambda: f64, max_n: usize, max_m: usize) -> Result<f64> {
    let mut worst = 0.0f64;
    for _ in 0..instances {
        let mut p = random::gauss_markov_problem(rng, max_n, max_m);
        let gm = gauss_markov(&p)?;
        let n = p.state_dim();
        p.prior = Some(spd_check(&(Matrix::identity(n, n) * lambda), SYM_TOL)?);
        let mv = min_variance_prior_info(&p)?;
        worst = worst
            .max(rel_v(&mv.beta_hat, &gm.beta_hat))
            .max(rel(mv.error_cov.matrix(), gm.error_cov.matrix()));
    }
    Ok(worst)
}

/// Worst per-step deviation between the projection recursion and correct∘predict.
pub fn projection_vs_bayes<R: Rng>(rng: &mut R, models: usize, max_dim: usize, horizon: usize) -> Result<f64> {
    let mut worst = 0.0f64;
    for _ in 0..models {
        let n = rng.random_range(1..=max_dim);
        let m = rng.random_range(1..=max_dim);
        let model = random::state_space_model(rng, n, m)?;
        let p0 = random::spd_matrix(rng, n);
        let x0 = random::uniform_vector(rng, n);
        let traj = sample_trajectory(&model, &x0, &p0, horizon - 1, StreamSeed::new(rng.random(), 0))?;
        let proj = projection_filter_run(&model, &traj.measurements, &x0, &p0)?;
        let bayes = bayes_filter_run(&model, &traj.measurements, &x0, &p0, CovarianceForm::Standard)?;
        worst = step_deviations(&proj, &bayes).into_iter().fold(worst, f64::max);
    }
    Ok(worst)
}

/// Recursive posterior at the last step vs the stacked joint-Gaussian estimate.
pub fn batch_oracle<R: Rng>(rng: &mut R, scenarios: usize, max_n: usize, max_m: usize, max_horizon: usize) -> Result<f64> {
    let mut worst = 0.0f64;
    for _ in 0..scenarios {
        let n = rng.random_range(1..=max_n);
        let m = rng.random_range(1..=max_m);
        let horizon = rng.random_range(1..=max_horizon);
        let model = random::state_space_model(rng, n, m)?;
        let p0 = random::spd_matrix(rng, n);
        let x0 = random::uniform_vector(rng, n);
        let traj = sample_trajectory(&model, &x0, &p0, horizon, StreamSeed::new(rng.random(), 0))?;
        let trace = bayes_filter_run(&model, &traj.measurements, &x0, &p0, CovarianceForm::Standard)?;
        let moments = propagate_moments(&model, &x0, &p0, horizon)?;
        let (mean, cov) = batch_oracle_estimate(&moments, &stack_measurements(&traj.measurements))?;
        let post = trace.last_posterior().ok_or(Error::EmptyMeasurementSequence)?;
        worst = worst.max(rel_v(&post.mean, &mean)).max(rel(post.cov.matrix(), &cov));
    }
    Ok(worst)
}

/// `P − PHᵀ(HPHᵀ+R)⁻¹HP` vs `(P⁻¹ + HᵀR⁻¹H)⁻¹`.
pub fn woodbury<R: Rng>(rng: &mut R, instances: usize, max_dim: usize) -> Result<f64> {
    let mut worst = 0.0f64;
    for _ in 0..instances {
        let n = rng.random_range(1..=max_dim);
        let m = rng.random_range(1..=max_dim);
        let p = random::spd_matrix(rng, n);
        let r = random::spd_matrix(rng, m);
        let h = random::uniform_matrix(rng, m, n);
        let lemma = woodbury_posterior_cov(&p, &h, &r)?;
        let direct = inverse(&(inverse(p.matrix())? + h.transpose() * inverse(r.matrix())? * &h))?;
        worst = worst.max(rel(lemma.matrix(), &direct));
    }
    Ok(worst)
}

/// `PHᵀS⁻¹` vs `(P⁻¹ + HᵀR⁻¹H)⁻¹HᵀR⁻¹`.
pub fn gain_duality<R: Rng>(rng: &mut R, instances: usize, max_dim: usize) -> Result<f64> {
    let mut worst = 0.0f64;
    for _ in 0..instances {
        let n = rng.random_range(1..=max_dim);
        let m = rng.random_range(1..=max_dim);
        let prior = random::gaussian_belief(rng, n);
        let r = random::spd_matrix(rng, m);
        let h = random::uniform_matrix(rng, m, n);
        let z = random::uniform_vector(rng, m);
        let gain = correct(&prior, &h, &r, &z)?.gain;
        let r_inv = inverse(r.matrix())?;
        let info = inverse(prior.cov.matrix())? + h.transpose() * &r_inv * &h;
        let dual = inverse(&info)? * h.transpose() * r_inv;
        worst = worst.max(rel(&gain, &dual));
    }
    Ok(worst)
}

/// `|logdet S − (logdet R + logdet P + logdet(P⁻¹ + HᵀR⁻¹H))|`.
pub fn determinant<R: Rng>(rng: &mut R, instances: usize, max_dim: usize) -> Result<f64> {
    let mut worst = 0.0f64;
    for _ in 0..instances {
        let n = rng.random_range(1..=max_dim);
        let m = rng.random_range(1..=max_dim);
        let p = random::spd_matrix(rng, n);
        let r = random::spd_matrix(rng, m);
        let h = random::uniform_matrix(rng, m, n);
        let s = spd_check(&(r.matrix() + &h * p.matrix() * h.transpose()), SYM_TOL)?;
        let info = inverse(p.matrix())? + h.transpose() * inverse(r.matrix())? * &h;
        let lhs = s.logdet();
        let rhs = r.matrix().determinant().ln() + p.matrix().determinant().ln() + info.determinant().ln();
        worst = worst.max((lhs - rhs).abs());
    }
    Ok(worst)
}

/// `|log[𝒢(z; Hx, R)𝒢(x; x̂, P)] − log[𝒢(z; Hx̂, S)𝒢(x; x̂⁺, P⁺)]|` at random probes
/// spread out to several prior standard deviations.
pub fn gaussian_product<R: Rng>(rng: &mut R, instances: usize, probes: usize, max_dim: usize) -> Result<f64> {
    let mut worst = 0.0f64;
    for _ in 0..instances {
        let n = rng.random_range(1..=max_dim);
        let m = rng.random_range(1..=max_dim);
        let prior = random::gaussian_belief(rng, n);
        let r = random::spd_matrix(rng, m);
        let h = random::uniform_matrix(rng, m, n);
        let factor = prior.cov.factor();
        let z = &h * draw_gaussian(rng, &prior.mean, &factor) + draw_gaussian(rng, &Vector::zeros(m), &r.factor());
        for _ in 0..probes {
            let spread = rng.random_range(0.0..=5.0);
            let x = draw_gaussian(rng, &prior.mean, &(&factor * spread));
            let (lhs, rhs) = gaussian_product_decompose(&h, &r, &prior, &z, &x)?;
            worst = worst.max((lhs - rhs).abs());
        }
    }
    Ok(worst)
}

/// Largest amount by which a perturbed gain beats the optimal gain, in trace and
/// in PSD-weighted trace; a non-positive value means the optimum held everywhere.
pub fn optimality<R: Rng>(rng: &mut R, problems: usize, perturbations: usize, weights: usize, max_dim: usize) -> Result<f64> {
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..problems {
        let p = random::batch_problem(rng, max_dim, max_dim);
        let (n, m) = (p.state_dim(), p.measurement_dim());
        let opt = min_variance_prior_gain(&p)?;
        let opt_cov = error_covariance_of_linear_estimator(&opt.gain, &p)?;
        let us: Vec<Matrix> = (0..weights).map(|_| random::psd_weight(rng, n)).collect();
        let opt_weighted: Vec<f64> = us.iter().map(|u| (u * &opt_cov).trace()).collect();
        for _ in 0..perturbations {
            let scale = 10f64.powf(rng.random_range(-6.0..0.0));
            let k = &opt.gain + random::uniform_matrix(rng, n, m) * scale;
            let cov = error_covariance_of_linear_estimator(&k, &p)?;
            worst = worst.max(opt_cov.trace() - cov.trace());
            for (u, o) in us.iter().zip(&opt_weighted) {
                worst = worst.max(o - (u * &cov).trace());
            }
        }
    }
    Ok(worst)
}

/// Sample means of products, with their standard errors.
struct Moments {
    sum: Vec<f64>,
    sum_sq: Vec<f64>,
    count: usize,
}

impl Moments {
    fn new(len: usize) -> Self {
        Moments {
            sum: vec![0.0; len],
            sum_sq: vec![0.0; len],
            count: 0,
        }
    }

    fn push_outer(&mut self, a: &Vector, b: &Vector) {
        let cols = b.len();
        for (i, x) in a.iter().enumerate() {
            for (j, y) in b.iter().enumerate() {
                let v = x * y;
                self.sum[i * cols + j] += v;
                self.sum_sq[i * cols + j] += v * v;
            }
        }
        self.count += 1;
    }

    /// Largest |mean| in units of its standard error.
    fn worst_sigma(&self) -> f64 {
        let n = self.count as f64;
        self.sum
            .iter()
            .zip(&self.sum_sq)
            .map(|(s, ss)| {
                let mean = s / n;
                let var = (ss / n - mean * mean).max(0.0) * n / (n - 1.0);
                let se = (var / n).sqrt();
                if se > 0.0 {
                    mean.abs() / se
                } else if mean == 0.0 {
                    0.0
                } else {
                    f64::INFINITY
                }
            })
            .fold(0.0, f64::max)
    }
}

/// An estimate from a past block `y_p = W_p β + ε_p` followed by a fresh block
/// `y = Wβ + ε`, for sampling the orthogonality conditions.
#[derive(Debug, Clone)]
pub struct OrthogonalityProblem {
    pub past: BatchProblem,
    pub w: Matrix,
    pub q: SpdMatrix,
}

impl OrthogonalityProblem {
    pub fn random<R: Rng>(rng: &mut R, max_n: usize, max_m: usize) -> Self {
        let past = random::batch_problem(rng, max_n, max_m);
        let m = rng.random_range(1..=max_m);
        let w = random::uniform_matrix(rng, m, past.state_dim());
        let q = random::spd_matrix(rng, m);
        OrthogonalityProblem { past, w, q }
    }

    /// Worst standard-error distance from zero over the entries of the sample
    /// means of `(β − β̂)y_pᵀ` and `β̂(y − Wβ̂)ᵀ`.
    pub fn worst_sigma<R: Rng>(&self, rng: &mut R, draws: usize) -> Result<f64> {
        let p = &self.past;
        let (n, mp, m) = (p.state_dim(), p.measurement_dim(), self.w.nrows());
        let k = min_variance_prior_gain(p)?.gain;
        let prior = p.prior.as_ref().ok_or_else(|| Error::DimensionMismatch {
            context: "orthogonality prior".into(),
            expected: "a prior covariance".into(),
            found: "none".into(),
        })?;
        let (rf, qpf, qf) = (prior.factor(), p.q.factor(), self.q.factor());
        let mut err_data = Moments::new(n * mp);
        let mut est_innov = Moments::new(n * m);
        for _ in 0..draws {
            let beta = draw_gaussian(rng, &Vector::zeros(n), &rf);
            let yp = &p.w * &beta + draw_gaussian(rng, &Vector::zeros(mp), &qpf);
            let beta_hat = &k * &yp;
            let y = &self.w * &beta + draw_gaussian(rng, &Vector::zeros(m), &qf);
            err_data.push_outer(&(&beta - &beta_hat), &yp);
            est_innov.push_outer(&beta_hat, &(y - &self.w * &beta_hat));
        }
        Ok(err_data.worst_sigma().max(est_innov.worst_sigma()))
    }
}
