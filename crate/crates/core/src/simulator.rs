//! Ground-truth sampling and exact second-moment propagation for the linear-Gaussian model.
//!
//! Randomness comes from ChaCha20 keyed by a master seed. Each Monte-Carlo run
//! owns four word-streams of the cipher (initial state, process noise,
//! measurement noise, auxiliary), so the draws for `x₀`, `{u_k}` and `{w_k}`
//! are independent by construction and a run's output does not depend on how
//! many other runs exist or which thread produced them.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::batch::{min_variance_estimate, SecondMoments};
use crate::error::{Error, Result};
use crate::linalg::{Definiteness, Matrix, SpdMatrix, Vector};
use crate::model::StateSpaceModel;

/// Identifies the pseudo-random construction; written into output metadata.
pub const GENERATOR_ID: &str = "chacha20/rand_chacha-0.9/seed_from_u64(master)/stream=4*run+substream;normal=rand_distr-0.5-StandardNormal-ziggurat";

/// Largest stacked measurement dimension `m·(K+1)` accepted by [`propagate_moments`].
pub const MAX_STACKED_DIM: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StreamSeed {
    pub master: u64,
    pub run: u64,
}

impl StreamSeed {
    pub fn new(master: u64, run: u64) -> Self {
        StreamSeed { master, run }
    }
}

impl From<u64> for StreamSeed {
    fn from(master: u64) -> Self {
        StreamSeed { master, run: 0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Substream {
    InitialState = 0,
    Process = 1,
    Measurement = 2,
    /// Free for callers that need extra draws tied to the same run.
    Auxiliary = 3,
}

pub fn substream_rng(seed: StreamSeed, which: Substream) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed.master);
    rng.set_stream(seed.run.wrapping_mul(4).wrapping_add(which as u64));
    rng
}

/// `mean + F·ξ` with ξ standard normal and `F Fᵀ` the covariance.
pub fn draw_gaussian<R: rand::Rng + ?Sized>(rng: &mut R, mean: &Vector, factor: &Matrix) -> Vector {
    let xi = Vector::from_iterator(factor.ncols(), (0..factor.ncols()).map(|_| StandardNormal.sample(rng)));
    mean + factor * xi
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    /// `x_0..x_K`
    pub states: Vec<Vector>,
    /// `z_0..z_K`
    pub measurements: Vec<Vector>,
    pub seed: StreamSeed,
}

/// Draws `x_0 ~ 𝒢(x0_mean, P0)`, then `x_{k+1} = Φ_k x_k + u_k`, `z_k = H_k x_k + w_k` for `k = 0..=K`.
///
/// Every schedule must cover steps `0..=K`.
pub fn sample_trajectory(
    model: &StateSpaceModel,
    x0_mean: &Vector,
    p0: &SpdMatrix,
    horizon: usize,
    seed: impl Into<StreamSeed>,
) -> Result<Trajectory> {
    let seed = seed.into();
    let n = model.state_dim();
    if x0_mean.len() != n || p0.dim() != n {
        return Err(Error::mismatch("initial state", n, format!("{}, {}", x0_mean.len(), p0.dim())));
    }
    model.require_steps(horizon + 1)?;

    let mut rng_x0 = substream_rng(seed, Substream::InitialState);
    let mut rng_u = substream_rng(seed, Substream::Process);
    let mut rng_w = substream_rng(seed, Substream::Measurement);

    let mut states = Vec::with_capacity(horizon + 1);
    let mut measurements = Vec::with_capacity(horizon + 1);
    let mut x = draw_gaussian(&mut rng_x0, x0_mean, &p0.factor());
    for k in 0..=horizon {
        let sm = model.step(k)?;
        let z = draw_gaussian(&mut rng_w, &(sm.h * &x), &sm.r.factor());
        measurements.push(z);
        if k < horizon {
            let next = draw_gaussian(&mut rng_u, &(sm.phi * &x), &sm.q.factor());
            states.push(std::mem::replace(&mut x, next));
        } else {
            states.push(x.clone());
        }
    }
    Ok(Trajectory {
        states,
        measurements,
        seed,
    })
}

/// Exact first and second moments of `(x_K, z_0..z_K)`.
#[derive(Debug, Clone)]
pub struct JointMoments {
    /// `E[x_K]`
    pub mean_x: Vector,
    /// `E[z_0..z_K]` stacked
    pub mean_z: Vector,
    /// `Cov(x_K)`
    pub cov_xx: Matrix,
    /// blocks `Cov(x_K, z_j)`, `n × m(K+1)`
    pub cov_x_z: Matrix,
    /// blocks `Cov(z_i, z_j)`
    pub cov_zz: SpdMatrix,
}

/// Covariance propagation `Σ_{k+1} = Φ_k Σ_k Φ_kᵀ + Q_k`, cross terms
/// `Cov(x_i, x_j) = Φ_{i−1} Cov(x_{i−1}, x_j)` for `i > j`. No sampling.
pub fn propagate_moments(model: &StateSpaceModel, x0_mean: &Vector, p0: &SpdMatrix, horizon: usize) -> Result<JointMoments> {
    let n = model.state_dim();
    let m = model.measurement_dim();
    if x0_mean.len() != n || p0.dim() != n {
        return Err(Error::mismatch("initial state", n, format!("{}, {}", x0_mean.len(), p0.dim())));
    }
    let dim = m * (horizon + 1);
    if dim > MAX_STACKED_DIM {
        return Err(Error::DimensionOverflow {
            dim,
            limit: MAX_STACKED_DIM,
        });
    }
    model.require_steps(horizon + 1)?;

    let mut means = Vec::with_capacity(horizon + 1);
    let mut marginals = Vec::with_capacity(horizon + 1);
    let mut mean = x0_mean.clone();
    let mut sigma = p0.matrix().clone();
    for k in 0..=horizon {
        means.push(mean.clone());
        marginals.push(sigma.clone());
        if k < horizon {
            let sm = model.step(k)?;
            mean = sm.phi * &mean;
            sigma = sm.phi * &sigma * sm.phi.transpose() + sm.q.matrix();
        }
    }

    let mut mean_z = Vector::zeros(dim);
    let mut cov_zz = Matrix::zeros(dim, dim);
    let mut cov_x_z = Matrix::zeros(n, dim);
    for j in 0..=horizon {
        let hj = model.step(j)?.h;
        mean_z.rows_mut(j * m, m).copy_from(&(hj * &means[j]));
        // cross = Cov(x_i, x_j), walked forward from i = j
        let mut cross = marginals[j].clone();
        for i in j..=horizon {
            let si = model.step(i)?;
            let mut block = si.h * &cross * hj.transpose();
            if i == j {
                block += si.r.matrix();
            }
            cov_zz.view_mut((i * m, j * m), (m, m)).copy_from(&block);
            cov_zz.view_mut((j * m, i * m), (m, m)).copy_from(&block.transpose());
            if i == horizon {
                cov_x_z.view_mut((0, j * m), (n, m)).copy_from(&(&cross * hj.transpose()));
            } else {
                cross = si.phi * cross;
            }
        }
    }

    Ok(JointMoments {
        mean_x: means[horizon].clone(),
        mean_z,
        cov_xx: marginals[horizon].clone(),
        cov_x_z,
        cov_zz: SpdMatrix::certify_computed(cov_zz, Definiteness::Positive)?,
    })
}

/// Stacks `z_0..z_K` into one vector.
pub fn stack_measurements(z: &[Vector]) -> Vector {
    let total = z.iter().map(|v| v.len()).sum();
    Vector::from_iterator(total, z.iter().flat_map(|v| v.iter().cloned()))
}

/// Non-recursive minimum-variance estimate of `x_K` from the stacked measurements,
/// `x̂ = E[x_K] + K (Z − E[Z])` with `K = Cov(x_K, Z) Cov(Z)⁻¹`, and its error covariance.
pub fn batch_oracle_estimate(moments: &JointMoments, z_stacked: &Vector) -> Result<(Vector, Matrix)> {
    if z_stacked.len() != moments.mean_z.len() {
        return Err(Error::mismatch("stacked measurements", moments.mean_z.len(), z_stacked.len()));
    }
    let second = SecondMoments {
        cov_beta_y: moments.cov_x_z.clone(),
        cov_yy: moments.cov_zz.clone(),
    };
    let centred = z_stacked - &moments.mean_z;
    let est = min_variance_estimate(&second, &moments.cov_xx, &centred)?;
    Ok((&moments.mean_x + est.beta_hat, est.error_cov.into_matrix()))
}
