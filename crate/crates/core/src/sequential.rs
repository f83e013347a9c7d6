//! Folding a new measurement block into an existing estimate.
//!
//! Only the part of the new data orthogonal to the old data moves the
//! estimate: the innovation `ỹ = y − Wβ̂`, whose covariance is `W𝔑Wᵀ + Q`.

use crate::error::{Error, Result};
use crate::linalg::{Definiteness, Matrix, SpdMatrix, Vector};

/// How a posterior covariance is formed from the prior and the gain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CovarianceForm {
    /// `P − K W P`, i.e. `(I − KW)P`.
    #[default]
    Standard,
    /// `(I − KW) P (I − KW)ᵀ + K Q Kᵀ`; same value, better at keeping PSD over long runs.
    Joseph,
}

#[derive(Debug, Clone)]
pub struct PriorEstimate {
    pub mean: Vector,
    pub cov: SpdMatrix,
}

#[derive(Debug, Clone)]
pub struct MeasurementBlock {
    pub w: Matrix,
    pub q: SpdMatrix,
    pub y: Vector,
}

fn check_dims(prior: &PriorEstimate, blk: &MeasurementBlock) -> Result<()> {
    let n = prior.mean.len();
    if prior.cov.dim() != n {
        return Err(Error::mismatch("prior covariance", n, prior.cov.dim()));
    }
    if blk.w.ncols() != n {
        return Err(Error::mismatch("block W columns", n, blk.w.ncols()));
    }
    let m = blk.w.nrows();
    if blk.q.dim() != m {
        return Err(Error::mismatch("block Q", m, blk.q.dim()));
    }
    if blk.y.len() != m {
        return Err(Error::mismatch("block y", m, blk.y.len()));
    }
    Ok(())
}

pub fn innovation(prior: &PriorEstimate, blk: &MeasurementBlock) -> Result<Vector> {
    check_dims(prior, blk)?;
    Ok(&blk.y - &blk.w * &prior.mean)
}

pub fn innovation_covariance(prior: &PriorEstimate, blk: &MeasurementBlock) -> Result<SpdMatrix> {
    check_dims(prior, blk)?;
    SpdMatrix::certify_computed(
        &blk.w * prior.cov.matrix() * blk.w.transpose() + blk.q.matrix(),
        Definiteness::Positive,
    )
}

pub fn update(prior: &PriorEstimate, blk: &MeasurementBlock) -> Result<PriorEstimate> {
    update_with(prior, blk, CovarianceForm::Standard)
}

/// `β̂' = β̂ + 𝔑Wᵀ(W𝔑Wᵀ+Q)⁻¹(y − Wβ̂)`, `𝔑' = 𝔑 − 𝔑Wᵀ(W𝔑Wᵀ+Q)⁻¹W𝔑`.
pub fn update_with(prior: &PriorEstimate, blk: &MeasurementBlock, form: CovarianceForm) -> Result<PriorEstimate> {
    let resid = innovation(prior, blk)?;
    let s = innovation_covariance(prior, blk)?;
    let cov = prior.cov.matrix();
    let w_cov = &blk.w * cov;
    // gain = 𝔑Wᵀ S⁻¹ = (S⁻¹ W𝔑)ᵀ
    let gain = s.solve(&w_cov)?.transpose();
    let mean = &prior.mean + &gain * resid;
    let cov_post = match form {
        CovarianceForm::Standard => cov - &gain * &w_cov,
        CovarianceForm::Joseph => {
            let n = prior.mean.len();
            let i_kw = Matrix::identity(n, n) - &gain * &blk.w;
            &i_kw * cov * i_kw.transpose() + &gain * blk.q.matrix() * gain.transpose()
        }
    };
    Ok(PriorEstimate {
        mean,
        cov: SpdMatrix::certify_computed(cov_post, Definiteness::SemiDefinite)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{relative_deviation, spd_check, SYM_TOL};

    fn scalar(v: f64) -> Matrix {
        Matrix::from_element(1, 1, v)
    }

    fn scalar_prior(mean: f64, cov: f64) -> PriorEstimate {
        PriorEstimate {
            mean: Vector::from_element(1, mean),
            cov: spd_check(&scalar(cov), SYM_TOL).unwrap(),
        }
    }

    fn scalar_block(w: f64, q: f64, y: f64) -> MeasurementBlock {
        MeasurementBlock {
            w: scalar(w),
            q: spd_check(&scalar(q), SYM_TOL).unwrap(),
            y: Vector::from_element(1, y),
        }
    }

    #[test]
    fn innovation_examples() {
        let prior = PriorEstimate {
            mean: Vector::from_vec(vec![1.0, -2.0]),
            cov: SpdMatrix::identity(2),
        };
        let w = Matrix::from_row_slice(1, 2, &[0.5, 2.0]);
        let blk = MeasurementBlock {
            y: &w * &prior.mean,
            w,
            q: SpdMatrix::identity(1),
        };
        assert_eq!(innovation(&prior, &blk).unwrap(), Vector::zeros(1));
        assert_eq!(innovation(&scalar_prior(0.0, 1.0), &scalar_block(2.0, 1.0, 3.0)).unwrap()[0], 3.0);
        assert_eq!(innovation(&scalar_prior(1.0, 1.0), &scalar_block(2.0, 1.0, 3.0)).unwrap()[0], 1.0);
    }

    #[test]
    fn innovation_covariance_examples() {
        let s = innovation_covariance(&scalar_prior(0.0, 2.0), &scalar_block(1.0, 2.0, 0.0)).unwrap();
        assert_eq!(s.matrix()[(0, 0)], 4.0);
        let s = innovation_covariance(&scalar_prior(0.0, 2.0), &scalar_block(0.0, 3.0, 0.0)).unwrap();
        assert_eq!(s.matrix()[(0, 0)], 3.0);
    }

    #[test]
    fn scalar_update() {
        let post = update(&scalar_prior(0.0, 2.0), &scalar_block(1.0, 2.0, 4.0)).unwrap();
        assert_eq!(post.mean[0], 2.0);
        assert_eq!(post.cov.matrix()[(0, 0)], 1.0);
        let joseph = update_with(&scalar_prior(0.0, 2.0), &scalar_block(1.0, 2.0, 4.0), CovarianceForm::Joseph).unwrap();
        assert_eq!(joseph.cov.matrix()[(0, 0)], 1.0);
    }

    #[test]
    fn uninformative_and_uncoupled_blocks() {
        let prior = scalar_prior(0.7, 2.0);
        let post = update(&prior, &scalar_block(1.0, 1e12, 40.0)).unwrap();
        assert!(relative_deviation(post.mean.as_slice(), prior.mean.as_slice()) < 1e-6);
        assert!(relative_deviation(post.cov.matrix().as_slice(), prior.cov.matrix().as_slice()) < 1e-6);

        let post = update(&prior, &scalar_block(0.0, 1.0, 40.0)).unwrap();
        assert_eq!(post.mean, prior.mean);
        assert_eq!(post.cov.matrix(), prior.cov.matrix());
    }

    #[test]
    fn mismatched_block_is_rejected() {
        let blk = MeasurementBlock {
            w: Matrix::zeros(1, 2),
            q: SpdMatrix::identity(1),
            y: Vector::zeros(1),
        };
        assert!(matches!(update(&scalar_prior(0.0, 1.0), &blk), Err(Error::DimensionMismatch { .. })));
    }
}
