//! Predict/correct Kalman filter in closed Gaussian form.
//!
//! The prediction is the Chapman-Kolmogorov marginal of a linear-Gaussian
//! transition, `𝒢(x; Φx̂, ΦPΦᵀ + Q)`. The correction multiplies the prior by
//! the likelihood `𝒢(z; Hx, R)` and renormalizes; for Gaussians this factors
//! exactly as
//!
//! ```text
//! 𝒢(z; Hx, R) 𝒢(x; x̂, P) = 𝒢(z; Hx̂, S) 𝒢(x; x̂⁺, P⁺),   S = R + HPHᵀ
//! ```
//!
//! so the posterior is `𝒢(x; x̂⁺, P⁺)` and `𝒢(z; Hx̂, S)` is the predictive
//! likelihood of the measurement. The posterior is Gaussian, so its mean is
//! both the MMSE and the MAP estimate.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::linalg::{spd_check, Definiteness, Matrix, SpdMatrix, Vector, SYM_TOL};
use crate::model::StateSpaceModel;
use crate::sequential::CovarianceForm;
use crate::trace::{FilterStep, FilterTrace};

#[derive(Debug, Clone)]
pub struct GaussianBelief {
    pub mean: Vector,
    pub cov: SpdMatrix,
}

impl GaussianBelief {
    pub fn new(mean: Vector, cov: SpdMatrix) -> Result<Self> {
        if cov.dim() != mean.len() {
            return Err(Error::mismatch("belief covariance", mean.len(), cov.dim()));
        }
        Ok(GaussianBelief { mean, cov })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }
}

#[derive(Debug, Clone)]
pub struct CorrectionResult {
    pub posterior: GaussianBelief,
    pub gain: Matrix,
    pub innovation: Vector,
    /// `S = R + H P Hᵀ`
    pub innovation_cov: SpdMatrix,
    /// `log 𝒢(z; H x̂, S)`
    pub log_predictive: f64,
}

/// `−½ [n log 2π + log det Σ + (x−μ)ᵀ Σ⁻¹ (x−μ)]`
pub fn log_gaussian_density(x: &Vector, mean: &Vector, cov: &SpdMatrix) -> Result<f64> {
    if x.len() != mean.len() {
        return Err(Error::mismatch("density point", mean.len(), x.len()));
    }
    let d = x - mean;
    let maha = cov.inverse_quadratic_form(&d)?;
    Ok(-0.5 * (x.len() as f64 * (2.0 * PI).ln() + cov.logdet() + maha))
}

pub fn predict(b: &GaussianBelief, phi: &Matrix, q: &SpdMatrix) -> Result<GaussianBelief> {
    let n = b.dim();
    if phi.nrows() != n || phi.ncols() != n {
        return Err(Error::mismatch(
            "transition",
            format!("{n}x{n}"),
            format!("{}x{}", phi.nrows(), phi.ncols()),
        ));
    }
    if q.dim() != n {
        return Err(Error::mismatch("process noise", n, q.dim()));
    }
    let cov = phi * b.cov.matrix() * phi.transpose() + q.matrix();
    Ok(GaussianBelief {
        mean: phi * &b.mean,
        cov: SpdMatrix::certify_computed(cov, Definiteness::SemiDefinite)?,
    })
}

fn check_measurement(b: &GaussianBelief, h: &Matrix, r: &SpdMatrix, z: &Vector) -> Result<()> {
    let (n, m) = (b.dim(), r.dim());
    if h.nrows() != m || h.ncols() != n {
        return Err(Error::mismatch(
            "measurement matrix",
            format!("{m}x{n}"),
            format!("{}x{}", h.nrows(), h.ncols()),
        ));
    }
    if z.len() != m {
        return Err(Error::mismatch("measurement", m, z.len()));
    }
    Ok(())
}

pub fn correct(b: &GaussianBelief, h: &Matrix, r: &SpdMatrix, z: &Vector) -> Result<CorrectionResult> {
    correct_with(b, h, r, z, CovarianceForm::Standard)
}

/// Gain-form correction: `K = PHᵀS⁻¹`, `x̂⁺ = x̂ + K(z − Hx̂)`, `P⁺ = (I − KH)P`.
pub fn correct_with(
    b: &GaussianBelief,
    h: &Matrix,
    r: &SpdMatrix,
    z: &Vector,
    form: CovarianceForm,
) -> Result<CorrectionResult> {
    check_measurement(b, h, r, z)?;
    let n = b.dim();
    let p = b.cov.matrix();
    let hp = h * p;
    let s = SpdMatrix::certify_computed(r.matrix() + &hp * h.transpose(), Definiteness::Positive)?;
    let gain = s.solve(&hp)?.transpose();
    let innovation = z - h * &b.mean;
    let mean = &b.mean + &gain * &innovation;
    let i_kh = Matrix::identity(n, n) - &gain * h;
    let cov = match form {
        CovarianceForm::Standard => &i_kh * p,
        CovarianceForm::Joseph => &i_kh * p * i_kh.transpose() + &gain * r.matrix() * gain.transpose(),
    };
    let log_predictive = log_gaussian_density(&innovation, &Vector::zeros(innovation.len()), &s)?;
    Ok(CorrectionResult {
        posterior: GaussianBelief {
            mean,
            cov: SpdMatrix::certify_computed(cov, Definiteness::SemiDefinite)?,
        },
        gain,
        innovation,
        innovation_cov: s,
        log_predictive,
    })
}

/// Information-form correction:
/// `P⁺⁻¹ = P⁻¹ + HᵀR⁻¹H`, `P⁺⁻¹x̂⁺ = P⁻¹x̂ + HᵀR⁻¹z`.
///
/// Needs an invertible prior covariance; a singular one is reported, never regularized.
pub fn information_correct(b: &GaussianBelief, h: &Matrix, r: &SpdMatrix, z: &Vector) -> Result<CorrectionResult> {
    check_measurement(b, h, r, z)?;
    let n = b.dim();
    let p = match b.cov.definiteness() {
        Definiteness::Positive => b.cov.clone(),
        Definiteness::SemiDefinite => spd_check(b.cov.matrix(), SYM_TOL)?,
    };
    let rinv_h = r.solve(h)?;
    let information = SpdMatrix::certify_computed(
        p.solve(&Matrix::identity(n, n))? + h.transpose() * &rinv_h,
        Definiteness::Positive,
    )?;
    let info_mean = p.solve_vec(&b.mean)? + h.transpose() * r.solve_vec(z)?;
    let mean = information.solve_vec(&info_mean)?;
    let cov = SpdMatrix::certify_computed(information.solve(&Matrix::identity(n, n))?, Definiteness::Positive)?;
    let gain = cov.matrix() * rinv_h.transpose();

    let s = SpdMatrix::certify_computed(r.matrix() + h * p.matrix() * h.transpose(), Definiteness::Positive)?;
    let innovation = z - h * &b.mean;
    let log_predictive = log_gaussian_density(&innovation, &Vector::zeros(innovation.len()), &s)?;
    Ok(CorrectionResult {
        posterior: GaussianBelief { mean, cov },
        gain,
        innovation,
        innovation_cov: s,
        log_predictive,
    })
}

/// Both sides of the Gaussian product factorization at `x_probe`:
/// `log[𝒢(z; Hx, R) 𝒢(x; x̂, P)]` and `log[𝒢(z; Hx̂, S) 𝒢(x; x̂⁺, P⁺)]`.
pub fn gaussian_product_decompose(
    h: &Matrix,
    r: &SpdMatrix,
    prior: &GaussianBelief,
    z: &Vector,
    x_probe: &Vector,
) -> Result<(f64, f64)> {
    let c = correct(prior, h, r, z)?;
    let lhs = log_gaussian_density(z, &(h * x_probe), r)? + log_gaussian_density(x_probe, &prior.mean, &prior.cov)?;
    let rhs = c.log_predictive + log_gaussian_density(x_probe, &c.posterior.mean, &c.posterior.cov)?;
    Ok((lhs, rhs))
}

/// Runs correct-then-predict over `z_0..z_K` starting from `x̂_{0|−1} = x0`, `P_0`.
pub fn bayes_filter_run(
    model: &StateSpaceModel,
    z: &[Vector],
    x0: &Vector,
    p0: &SpdMatrix,
    form: CovarianceForm,
) -> Result<FilterTrace> {
    if z.is_empty() {
        return Err(Error::EmptyMeasurementSequence);
    }
    model.require_steps(z.len())?;
    let mut belief = GaussianBelief::new(x0.clone(), p0.clone())?;
    if belief.dim() != model.state_dim() {
        return Err(Error::mismatch("initial state", model.state_dim(), belief.dim()));
    }
    let mut steps = Vec::with_capacity(z.len());
    for (k, zk) in z.iter().enumerate() {
        let sm = model.step(k)?;
        let c = correct_with(&belief, sm.h, sm.r, zk, form).map_err(|e| e.at_step(k))?;
        let next = predict(&c.posterior, sm.phi, sm.q).map_err(|e| e.at_step(k))?;
        steps.push(FilterStep {
            k,
            prior: belief,
            posterior: c.posterior,
            innovation: c.innovation,
            innovation_cov: c.innovation_cov,
            gain: c.gain,
            log_predictive: c.log_predictive,
        });
        belief = next;
    }
    Ok(FilterTrace {
        steps,
        final_prediction: belief,
    })
}
