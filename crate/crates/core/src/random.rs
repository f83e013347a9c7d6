//! Random well-conditioned instances for property checks.
//!
//! Design matrices have entries uniform in `[−1, 1]`; SPD matrices are
//! `AAᵀ + nI` rescaled to unit mean diagonal, which keeps condition numbers
//! bounded so fixed tolerances stay meaningful.

use rand::Rng;

use crate::batch::BatchProblem;
use crate::bayes::GaussianBelief;
use crate::error::Result;
use crate::linalg::{spd_check, Matrix, SpdMatrix, Vector, SYM_TOL};
use crate::model::StateSpaceModel;
use crate::simulator::draw_gaussian;

pub fn uniform_matrix<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..=1.0))
}

pub fn uniform_vector<R: Rng + ?Sized>(rng: &mut R, len: usize) -> Vector {
    Vector::from_fn(len, |_, _| rng.random_range(-1.0..=1.0))
}

pub fn spd_matrix<R: Rng + ?Sized>(rng: &mut R, n: usize) -> SpdMatrix {
    let a = uniform_matrix(rng, n, n);
    let m = &a * a.transpose() + Matrix::identity(n, n) * n as f64;
    let scale = n as f64 / m.trace();
    spd_check(&(m * scale), SYM_TOL).expect("AAᵀ + nI is positive definite")
}

/// Random PSD weight of random rank (possibly rank deficient).
pub fn psd_weight<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Matrix {
    let rank = rng.random_range(1..=n);
    let a = uniform_matrix(rng, n, rank);
    &a * a.transpose()
}

/// A problem with prior, dimensions drawn from `1..=max_n`, `1..=max_m`.
/// `y` is drawn from the model itself.
pub fn batch_problem<R: Rng + ?Sized>(rng: &mut R, max_n: usize, max_m: usize) -> BatchProblem {
    let n = rng.random_range(1..=max_n);
    let m = rng.random_range(1..=max_m);
    batch_problem_sized(rng, n, m, true)
}

pub fn batch_problem_sized<R: Rng + ?Sized>(rng: &mut R, n: usize, m: usize, with_prior: bool) -> BatchProblem {
    let w = uniform_matrix(rng, m, n);
    let q = spd_matrix(rng, m);
    let r = spd_matrix(rng, n);
    let beta = draw_gaussian(rng, &Vector::zeros(n), &r.factor());
    let y = &w * beta + draw_gaussian(rng, &Vector::zeros(m), &q.factor());
    BatchProblem::new(w, q, y, with_prior.then_some(r)).expect("conformable by construction")
}

/// Smallest eigenvalue of `WᵀQ⁻¹W` accepted by [`gauss_markov_problem`].
pub const MIN_DESIGN_EIGENVALUE: f64 = 0.05;

/// A problem without prior whose design is well conditioned: `m ≥ n` and
/// `λ_min(WᵀQ⁻¹W) ≥ MIN_DESIGN_EIGENVALUE` (rejection sampled).
pub fn gauss_markov_problem<R: Rng + ?Sized>(rng: &mut R, max_n: usize, max_m: usize) -> BatchProblem {
    let n = rng.random_range(1..=max_n);
    let m = rng.random_range(n..=max_m.max(n));
    loop {
        let p = batch_problem_sized(rng, n, m, false);
        let qinv_w = p.q.solve(&p.w).expect("certified Q");
        let information = p.w.transpose() * qinv_w;
        if information.symmetric_eigenvalues().min() >= MIN_DESIGN_EIGENVALUE {
            return p;
        }
    }
}

/// Transition with Frobenius norm in `[0.5, 1.1]`, so the spectral radius stays at most 1.1.
pub fn transition<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Matrix {
    let a = uniform_matrix(rng, n, n);
    let target = rng.random_range(0.5..=1.1);
    let norm = a.norm();
    if norm > 0.0 {
        a * (target / norm)
    } else {
        Matrix::identity(n, n)
    }
}

/// Time-invariant model with the given dimensions.
pub fn state_space_model<R: Rng + ?Sized>(rng: &mut R, n: usize, m: usize) -> Result<StateSpaceModel> {
    let phi = transition(rng, n);
    let h = uniform_matrix(rng, m, n);
    let q = spd_matrix(rng, n);
    let r = spd_matrix(rng, m);
    StateSpaceModel::constant(phi, h, q, r)
}

pub fn gaussian_belief<R: Rng + ?Sized>(rng: &mut R, n: usize) -> GaussianBelief {
    GaussianBelief {
        mean: uniform_vector(rng, n),
        cov: spd_matrix(rng, n),
    }
}
