//! Batch linear estimation for the stacked model `y = Wβ + ε`.
//!
//! The prior on β is zero-mean with second moment `R = E[ββᵀ]`; the noise has
//! `Q = E[εεᵀ]` and is uncorrelated with β. Callers with a nonzero prior mean
//! centre their data first.

use crate::error::{Error, Result};
use crate::linalg::{Definiteness, Matrix, SpdMatrix, Vector};

/// Smallest-to-largest pivot ratio of `WᵀQ⁻¹W` below which W is treated as rank deficient.
pub const RANK_PIVOT_RATIO: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct BatchProblem {
    pub w: Matrix,
    pub q: SpdMatrix,
    pub y: Vector,
    pub prior: Option<SpdMatrix>,
}

impl BatchProblem {
    pub fn new(w: Matrix, q: SpdMatrix, y: Vector, prior: Option<SpdMatrix>) -> Result<Self> {
        let p = BatchProblem { w, q, y, prior };
        p.check_dims()?;
        Ok(p)
    }

    pub fn state_dim(&self) -> usize {
        self.w.ncols()
    }

    pub fn measurement_dim(&self) -> usize {
        self.w.nrows()
    }

    fn check_dims(&self) -> Result<()> {
        let m = self.w.nrows();
        if self.q.dim() != m {
            return Err(Error::mismatch("batch Q", m, self.q.dim()));
        }
        if self.y.len() != m {
            return Err(Error::mismatch("batch y", m, self.y.len()));
        }
        if let Some(r) = &self.prior {
            if r.dim() != self.w.ncols() {
                return Err(Error::mismatch("batch prior R", self.w.ncols(), r.dim()));
            }
        }
        Ok(())
    }

    fn prior(&self) -> Result<&SpdMatrix> {
        self.prior
            .as_ref()
            .ok_or_else(|| Error::mismatch("batch prior R", "present", "absent"))
    }

    /// `E[βyᵀ] = RWᵀ` and `E[yyᵀ] = WRWᵀ + Q` under the prior.
    pub fn second_moments(&self) -> Result<SecondMoments> {
        self.check_dims()?;
        let r = self.prior()?;
        let rwt = r.matrix() * self.w.transpose();
        let cov_yy = SpdMatrix::certify_computed(
            &self.w * &rwt + self.q.matrix(),
            Definiteness::Positive,
        )?;
        Ok(SecondMoments {
            cov_beta_y: rwt,
            cov_yy,
        })
    }
}

#[derive(Debug, Clone)]
pub struct BatchEstimate {
    pub beta_hat: Vector,
    pub error_cov: SpdMatrix,
    /// The linear map with `beta_hat = gain * y`.
    pub gain: Matrix,
}

#[derive(Debug, Clone)]
pub struct SecondMoments {
    pub cov_beta_y: Matrix,
    pub cov_yy: SpdMatrix,
}

/// Minimum-variance unbiased estimate without a prior:
/// `β̂ = (WᵀQ⁻¹W)⁻¹WᵀQ⁻¹y`, error covariance `(WᵀQ⁻¹W)⁻¹`.
pub fn gauss_markov(p: &BatchProblem) -> Result<BatchEstimate> {
    p.check_dims()?;
    let n = p.state_dim();
    let qinv_w = p.q.solve(&p.w)?;
    let information = p.w.transpose() * &qinv_w;
    let information = match SpdMatrix::certify_computed(information, Definiteness::Positive) {
        Ok(info) => info,
        Err(Error::NotPositiveDefinite { .. }) => return Err(Error::RankDeficient { ratio: 0.0 }),
        Err(e) => return Err(e),
    };
    let ratio = information.pivot_ratio();
    if ratio <= RANK_PIVOT_RATIO {
        return Err(Error::RankDeficient { ratio });
    }
    let gain = information.solve(&qinv_w.transpose())?;
    let error_cov = SpdMatrix::certify_computed(
        information.solve(&Matrix::identity(n, n))?,
        Definiteness::SemiDefinite,
    )?;
    Ok(BatchEstimate {
        beta_hat: &gain * &p.y,
        error_cov,
        gain,
    })
}

/// `K = E[βyᵀ] (E[yyᵀ])⁻¹`.
pub fn min_variance_gain(m: &SecondMoments) -> Result<Matrix> {
    if m.cov_beta_y.ncols() != m.cov_yy.dim() {
        return Err(Error::mismatch(
            "E[beta y^T] columns",
            m.cov_yy.dim(),
            m.cov_beta_y.ncols(),
        ));
    }
    // K Σ_yy = Σ_βy  ⇔  Σ_yy Kᵀ = Σ_βyᵀ
    Ok(m.cov_yy.solve(&m.cov_beta_y.transpose())?.transpose())
}

/// Full estimate from second moments: `β̂ = K y`, error covariance `E[ββᵀ] − K E[yβᵀ]`.
pub fn min_variance_estimate(m: &SecondMoments, cov_beta: &Matrix, y: &Vector) -> Result<BatchEstimate> {
    let gain = min_variance_gain(m)?;
    if y.len() != gain.ncols() {
        return Err(Error::mismatch("measurement vector", gain.ncols(), y.len()));
    }
    if cov_beta.nrows() != gain.nrows() || !cov_beta.is_square() {
        return Err(Error::mismatch(
            "E[beta beta^T]",
            gain.nrows(),
            format!("{}x{}", cov_beta.nrows(), cov_beta.ncols()),
        ));
    }
    let error_cov = SpdMatrix::certify_computed(
        cov_beta - &gain * m.cov_beta_y.transpose(),
        Definiteness::SemiDefinite,
    )?;
    Ok(BatchEstimate {
        beta_hat: &gain * y,
        error_cov,
        gain,
    })
}

/// Gain form: `β̂ = RWᵀ(WRWᵀ+Q)⁻¹y`, error covariance `R − RWᵀ(WRWᵀ+Q)⁻¹WR`.
pub fn min_variance_prior_gain(p: &BatchProblem) -> Result<BatchEstimate> {
    let moments = p.second_moments()?;
    min_variance_estimate(&moments, p.prior()?.matrix(), &p.y)
}

/// Information form: `β̂ = (WᵀQ⁻¹W + R⁻¹)⁻¹WᵀQ⁻¹y`, error covariance `(WᵀQ⁻¹W + R⁻¹)⁻¹`.
pub fn min_variance_prior_info(p: &BatchProblem) -> Result<BatchEstimate> {
    p.check_dims()?;
    let r = p.prior()?;
    let n = p.state_dim();
    let qinv_w = p.q.solve(&p.w)?;
    let prior_information = r.solve(&Matrix::identity(n, n))?;
    let information = SpdMatrix::certify_computed(
        p.w.transpose() * &qinv_w + prior_information,
        Definiteness::Positive,
    )?;
    let gain = information.solve(&qinv_w.transpose())?;
    let error_cov = SpdMatrix::certify_computed(
        information.solve(&Matrix::identity(n, n))?,
        Definiteness::Positive,
    )?;
    Ok(BatchEstimate {
        beta_hat: &gain * &p.y,
        error_cov,
        gain,
    })
}

/// Estimate of `Tβ` from an estimate of β: mean `Tβ̂`, gain `TK`, covariance `T P Tᵀ`.
pub fn linear_function_estimate(t: &Matrix, e: &BatchEstimate) -> Result<BatchEstimate> {
    if t.ncols() != e.beta_hat.len() {
        return Err(Error::mismatch("transform columns", e.beta_hat.len(), t.ncols()));
    }
    let error_cov = SpdMatrix::certify_computed(
        t * e.error_cov.matrix() * t.transpose(),
        Definiteness::SemiDefinite,
    )?;
    Ok(BatchEstimate {
        beta_hat: t * &e.beta_hat,
        error_cov,
        gain: t * &e.gain,
    })
}

/// Exact error covariance of an arbitrary linear estimator `β̂ = Ky`:
/// `K(WRWᵀ+Q)Kᵀ − KWR − RWᵀKᵀ + R`.
pub fn error_covariance_of_linear_estimator(k: &Matrix, p: &BatchProblem) -> Result<Matrix> {
    p.check_dims()?;
    let r = p.prior()?.matrix();
    let (n, m) = (p.state_dim(), p.measurement_dim());
    if k.nrows() != n || k.ncols() != m {
        return Err(Error::mismatch(
            "estimator gain",
            format!("{n}x{m}"),
            format!("{}x{}", k.nrows(), k.ncols()),
        ));
    }
    let cov_yy = &p.w * r * p.w.transpose() + p.q.matrix();
    let k_w_r = k * &p.w * r;
    Ok(k * cov_yy * k.transpose() - &k_w_r - k_w_r.transpose() + r)
}
